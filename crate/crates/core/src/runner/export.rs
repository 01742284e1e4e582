//! Text serializations of run artifacts.

use std::fmt::Write as _;

use crate::field::HeatMap;
use crate::geometry::{Point3, ProbeGrid};
use crate::ofdm::BerReport;
use crate::stats::CutProfile;

use super::RunnerError;

pub const HEATMAP_CSV_HEADER: &str = "x_m,y_m,e_vpm";
pub const BER_CSV_HEADER: &str = "scenario,ue,ber,bits";
pub const CUT_CSV_HEADER: &str = "y_m,field_vpm";

/// Formats `v` with 9 significant digits, `%g` style: fixed notation for
/// moderate exponents, scientific otherwise, trailing zeros trimmed.
pub fn fmt_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{:.8e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v))
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub fn heatmap_csv(map: &HeatMap) -> String {
    let mut out = String::from(HEATMAP_CSV_HEADER);
    out.push('\n');
    for (p, v) in map.grid.points.iter().zip(&map.values) {
        let _ = writeln!(out, "{},{},{}", fmt_sig9(p.x), fmt_sig9(p.y), fmt_sig9(*v));
    }
    out
}

pub fn ber_csv(reports: &[BerReport]) -> String {
    let mut out = String::from(BER_CSV_HEADER);
    out.push('\n');
    for r in reports {
        for (k, ber) in r.per_ue_ber.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", r.scenario_id, k + 1, fmt_sig9(*ber), r.bits_tested);
        }
    }
    out
}

pub fn cut_csv(profile: &CutProfile) -> String {
    let mut out = String::from(CUT_CSV_HEADER);
    out.push('\n');
    for (d, e) in &profile.samples {
        let _ = writeln!(out, "{},{}", fmt_sig9(*d), fmt_sig9(*e));
    }
    out
}

/// Parses a heat-map CSV back into a map on its implied rectangular grid.
pub fn parse_heatmap_csv(text: &str, scenario_id: &str, probe_height: f64) -> Result<HeatMap, RunnerError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == HEATMAP_CSV_HEADER => {}
        other => {
            return Err(RunnerError::Config(format!(
                "expected header {HEATMAP_CSV_HEADER:?}, found {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| RunnerError::Config(format!("line {}: {e}", i + 2)))
        };
        if fields.len() != 3 {
            return Err(RunnerError::Config(format!("line {}: expected 3 columns", i + 2)));
        }
        rows.push((parse(fields[0])?, parse(fields[1])?, parse(fields[2])?));
    }
    rows.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    let mut xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let nx = xs.len();
    if nx == 0 || !rows.len().is_multiple_of(nx) {
        return Err(RunnerError::Config("CSV rows do not form a rectangular grid".into()));
    }
    let spacing = if nx > 1 { xs[1] - xs[0] } else { 1.0 };
    Ok(HeatMap {
        grid: ProbeGrid {
            points: rows.iter().map(|&(x, y, _)| Point3::new(x, y, probe_height)).collect(),
            spacing,
            probe_height,
            nx,
            ny: rows.len() / nx,
        },
        values: rows.iter().map(|r| r.2).collect(),
        scenario_id: scenario_id.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig9_formatting() {
        assert_eq!(fmt_sig9(0.0), "0");
        assert_eq!(fmt_sig9(-3.0), "-3");
        assert_eq!(fmt_sig9(1.5), "1.5");
        assert_eq!(fmt_sig9(std::f64::consts::PI), "3.14159265");
        assert_eq!(fmt_sig9(123.456789012), "123.456789");
        assert_eq!(fmt_sig9(1.35e-4), "0.000135");
        assert_eq!(fmt_sig9(1.35e-6), "1.35e-6");
        assert_eq!(fmt_sig9(2.68e-7), "2.68e-7");
        assert_eq!(fmt_sig9(1234567891234.0), "1.23456789e12");
    }

    #[test]
    fn ber_rows() {
        let r = BerReport { scenario_id: "8".into(), per_ue_ber: vec![0.5, 0.0], per_ue_errors: vec![3, 0], bits_tested: 6 };
        assert_eq!(ber_csv(&[r]), "scenario,ue,ber,bits\n8,1,0.5,6\n8,2,0,6\n");
    }
}
