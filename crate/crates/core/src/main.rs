use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mmimo_emf::runner::{self, ExportFormat, RunConfig, RunnerError};

#[derive(Parser)]
#[command(name = "mmimo-emf", version, about = "Massive-MIMO downlink RF-EMF exposure simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// TOML run config; the shipped defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Scenario id to run; repeatable.
    #[arg(long = "scenario")]
    scenarios: Vec<String>,
    /// Export formats, comma separated (csv,json,svg,ascii).
    #[arg(long, value_delimiter = ',', value_parser = parse_format)]
    format: Vec<ExportFormat>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config and print every finding.
    Validate {
        #[command(flatten)]
        args: ConfigArgs,
    },
    /// Run the selected scenarios and write artifacts.
    Run {
        #[command(flatten)]
        args: ConfigArgs,
        /// Output directory; overrides the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in scenarios.
    Scenarios,
    /// Re-render heat-map CSV files as SVG and ASCII.
    Render {
        /// A heat-map CSV or a directory of them.
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 41.0)]
        vmax: f64,
        #[arg(long, value_delimiter = ',', value_parser = parse_format, default_value = "svg,ascii")]
        format: Vec<ExportFormat>,
    },
}

fn parse_format(s: &str) -> Result<ExportFormat, String> {
    ExportFormat::parse(s).ok_or_else(|| format!("unknown format {s:?}; expected csv, json, svg or ascii"))
}

fn load(args: &ConfigArgs) -> Result<RunConfig, RunnerError> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::paper_defaults(),
    };
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    if !args.scenarios.is_empty() {
        cfg.scenarios = args.scenarios.clone();
    }
    if !args.format.is_empty() {
        cfg.formats = args.format.clone();
    }
    Ok(cfg)
}

fn fail(e: &RunnerError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        RunnerError::Validation(_) | RunnerError::Config(_) => ExitCode::from(1),
        _ => ExitCode::from(2),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { args } => {
            let cfg = match load(&args) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            let findings = runner::validate(&cfg);
            if findings.is_empty() {
                println!("ok: 0 findings");
                ExitCode::SUCCESS
            } else {
                for f in &findings {
                    println!("{f}");
                }
                ExitCode::from(1)
            }
        }
        Command::Run { args, out } => {
            let cfg = match load(&args) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            let outputs = match runner::simulate(&cfg) {
                Ok(o) => o,
                Err(e) => return fail(&e),
            };
            if let Err(e) = runner::write_outputs(&cfg, &outputs, &dir) {
                return fail(&e);
            }
            println!("{:<10} {:>12} {:>10} {:>10}", "scenario", "mean BER", "max V/m", "ZF leak");
            for r in &outputs.scenarios {
                let max = outputs.stats.iter().find(|s| s.map == r.scenario.id).map_or(f64::NAN, |s| s.summary.max);
                println!("{:<10} {:>12.4e} {:>10.4} {:>10.2e}", r.scenario.id, r.ber.mean_ber(), max, r.interference_ratio);
            }
            println!();
            println!("{:<8} {:>8} {:>10} {:>14} {:>14}", "region", "limit", "exceed", "margin dB", "exclusion m");
            for c in &outputs.compliance {
                println!(
                    "{:<8} {:>8} {:>10} {:>14.2} {:>14}",
                    c.region,
                    c.limit_vpm,
                    c.average.exceed_count,
                    c.average.worst_margin_db,
                    c.exclusion_distance_m.map_or("-".to_string(), |d| format!("{d:.3}"))
                );
            }
            println!("\nwrote artifacts to {}", dir.display());
            ExitCode::SUCCESS
        }
        Command::Scenarios => {
            let cfg = RunConfig::paper_defaults();
            for s in cfg.all_scenarios() {
                let ues: Vec<String> = s.ue_positions.iter().map(|[x, y]| format!("({x}, {y})")).collect();
                println!("{:<4} {} UE  {}", s.id, s.num_ues(), ues.join(" "));
            }
            ExitCode::SUCCESS
        }
        Command::Render { input, out, vmax, format } => {
            let height = RunConfig::paper_defaults().grid.height;
            match runner::render_csv(&input, &out, &format, vmax, height) {
                Ok(files) => {
                    for f in files {
                        println!("{}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
    }
}
