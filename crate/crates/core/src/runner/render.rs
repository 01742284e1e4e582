//! SVG colour map and ASCII preview of heat maps.
//!
//! Colour scale: linear from 0 to `vmax` V/m through five fixed stops
//! (`#440154`, `#3b528b`, `#21918c`, `#5ec962`, `#fde725`); values above
//! `vmax` saturate.

use std::fmt::Write as _;

use crate::field::HeatMap;

use super::export::fmt_sig9;

const STOPS: [[u8; 3]; 5] = [[0x44, 0x01, 0x54], [0x3b, 0x52, 0x8b], [0x21, 0x91, 0x8c], [0x5e, 0xc9, 0x62], [0xfd, 0xe7, 0x25]];
pub const ASCII_LEVELS: &[u8; 10] = b" .:-=+*#%@";
const CELL: usize = 48;
const MARGIN: usize = 56;

pub fn color(value: f64, vmax: f64) -> [u8; 3] {
    let t = if vmax > 0.0 { (value / vmax).clamp(0.0, 1.0) } else { 0.0 };
    let pos = t * (STOPS.len() - 1) as f64;
    let i = (pos.floor() as usize).min(STOPS.len() - 2);
    let f = pos - i as f64;
    let mut out = [0u8; 3];
    for c in 0..3 {
        let a = STOPS[i][c] as f64;
        let b = STOPS[i + 1][c] as f64;
        out[c] = (a + (b - a) * f).round() as u8;
    }
    out
}

/// Level 0..=9 of the ASCII ramp.
pub fn ascii_level(value: f64, vmax: f64) -> usize {
    if !(vmax > 0.0) {
        return 0;
    }
    ((value / vmax * 10.0).floor().max(0.0) as usize).min(9)
}

/// Grid cells in display order: rows from the largest `y` down.
fn display_rows(map: &HeatMap) -> Vec<Vec<(f64, f64, f64)>> {
    let nx = map.grid.nx.max(1);
    let mut rows: Vec<Vec<(f64, f64, f64)>> = map
        .grid
        .points
        .chunks(nx)
        .zip(map.values.chunks(nx))
        .map(|(pts, vals)| pts.iter().zip(vals).map(|(p, &v)| (p.x, p.y, v)).collect())
        .collect();
    rows.reverse();
    rows
}

pub fn render_svg(map: &HeatMap, vmax: f64) -> String {
    let rows = display_rows(map);
    let nx = map.grid.nx.max(1);
    let ny = rows.len();
    let width = 2 * MARGIN + nx * CELL;
    let height = 2 * MARGIN + ny * CELL + 40;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="monospace" font-size="11">"#
    );
    let _ = writeln!(s, r#"<title>RF-EMF heat map, scenario {} (V/m)</title>"#, map.scenario_id);
    let _ = writeln!(s, r##"<rect width="{width}" height="{height}" fill="#ffffff"/>"##);
    for (r, row) in rows.iter().enumerate() {
        for (c, &(x, y, v)) in row.iter().enumerate() {
            let [red, green, blue] = color(v, vmax);
            let px = MARGIN + c * CELL;
            let py = MARGIN + r * CELL;
            let _ = writeln!(
                s,
                r##"<rect x="{px}" y="{py}" width="{CELL}" height="{CELL}" fill="#{red:02x}{green:02x}{blue:02x}"><title>({}, {}) {} V/m</title></rect>"##,
                fmt_sig9(x),
                fmt_sig9(y),
                fmt_sig9(v)
            );
        }
        if let Some(&(_, y, _)) = row.first() {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
                MARGIN - 6,
                MARGIN + r * CELL + CELL / 2 + 4,
                fmt_sig9(y)
            );
        }
    }
    if let Some(bottom) = rows.last() {
        for (c, &(x, _, _)) in bottom.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
                MARGIN + c * CELL + CELL / 2,
                MARGIN + ny * CELL + 14,
                fmt_sig9(x)
            );
        }
    }
    let ly = MARGIN + ny * CELL + 26;
    let lw = nx * CELL;
    for i in 0..lw {
        let [red, green, blue] = color(vmax * i as f64 / (lw - 1).max(1) as f64, vmax);
        let _ = writeln!(
            s,
            r##"<rect x="{}" y="{ly}" width="1" height="10" fill="#{red:02x}{green:02x}{blue:02x}"/>"##,
            MARGIN + i
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="start">0</text>"#, MARGIN, ly + 22);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{} V/m</text>"#,
        MARGIN + lw,
        ly + 22,
        fmt_sig9(vmax)
    );
    s.push_str("</svg>\n");
    s
}

pub fn render_ascii(map: &HeatMap, vmax: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario {}  scale 0..{} V/m  levels \"{}\"", map.scenario_id, fmt_sig9(vmax), std::str::from_utf8(ASCII_LEVELS).unwrap());
    for row in display_rows(map) {
        let y = row.first().map_or(0.0, |c| c.1);
        let cells: String = row
            .iter()
            .flat_map(|&(_, _, v)| {
                let ch = ASCII_LEVELS[ascii_level(v, vmax)] as char;
                [ch, ch]
            })
            .collect();
        let _ = writeln!(s, "{:>6} |{}|", fmt_sig9(y), cells);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{GridSpec, Room};

    #[test]
    fn color_endpoints() {
        assert_eq!(color(0.0, 5.0), STOPS[0]);
        assert_eq!(color(5.0, 5.0), STOPS[4]);
        assert_eq!(color(50.0, 5.0), STOPS[4]);
        assert_eq!(color(2.5, 5.0), STOPS[2]);
    }

    #[test]
    fn ascii_quantizes_to_ten_levels() {
        assert_eq!(ascii_level(0.0, 1.0), 0);
        assert_eq!(ascii_level(0.0999, 1.0), 0);
        assert_eq!(ascii_level(0.1, 1.0), 1);
        assert_eq!(ascii_level(1.0, 1.0), 9);
        assert_eq!(ascii_level(7.0, 1.0), 9);
    }

    #[test]
    fn ascii_puts_far_rows_on_top() {
        let grid = GridSpec::default().build(&Room::default()).unwrap();
        let values = grid.points.iter().map(|p| 9.0 - p.y).collect();
        let map = HeatMap { grid, values, scenario_id: "t".into() };
        let txt = render_ascii(&map, 10.0);
        let lines: Vec<&str> = txt.lines().collect();
        assert_eq!(lines.len(), 9);
        assert!(lines[1].starts_with("     8 |"));
        assert!(lines[8].contains("%%"));
        let svg = render_svg(&map, 10.0);
        assert_eq!(svg.matches("<title>(").count(), 56);
    }
}
