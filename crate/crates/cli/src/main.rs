use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use mottrack::harness::{
    ablate, parse_grid, read_detections, read_trajectories, run_tracker, sweep, write_atomic,
    write_scenario, write_tracks, AblationRow, CellResult, RunConfig, ScenarioSummary, CONFIG_KEYS,
};
use mottrack::metrics::evaluate;
use mottrack::simulator::{generate, standard_suite, suite_scenario, SuiteScenario};

#[derive(Parser)]
#[command(name = "mottrack", version, about = "Motion-gated multi-object tracking toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Kv,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Standard,
}

#[derive(Subcommand)]
enum Command {
    /// Run the tracker over a MOTChallenge detection file.
    Track {
        #[arg(long)]
        det: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a hypothesis file against ground truth.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "kv")]
        format: Format,
    },
    /// Generate one suite scenario as gt.txt, det.txt and det.aff.
    Simulate {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Evaluate the suite for every cell of a config grid.
    Sweep {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long)]
        config: Option<PathBuf>,
        /// `key=v1,v2;key2=v3`
        #[arg(long, default_value = "")]
        grid: String,
        /// Seeds per scenario (default: the full suite).
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        scenario: Vec<String>,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Also write the table to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the full tracker with its ablated variants.
    Ablate {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        scenario: Vec<String>,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// List configuration keys with their defaults.
    Keys,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

fn select_suite(names: &[String]) -> Result<Vec<SuiteScenario>> {
    if names.is_empty() {
        return Ok(standard_suite());
    }
    names
        .iter()
        .map(|n| suite_scenario(n).with_context(|| format!("unknown scenario {n:?}")))
        .collect()
}

fn summary_header() -> String {
    format!("{:<16} {:>5} {:>8} {:>7} {:>7} {:>7} {:>8} {:>8}", "scenario", "runs", "IDS", "IDF1", "MOTA", "HOTA", "FP", "FN")
}

fn summary_line(s: &ScenarioSummary) -> String {
    format!(
        "{:<16} {:>5} {:>8.3} {:>7.3} {:>7.3} {:>7.3} {:>8.2} {:>8.2}",
        s.scenario, s.runs, s.ids, s.idf1, s.mota, s.hota, s.fp, s.fn_
    )
}

fn sweep_table(cells: &[CellResult]) -> String {
    let mut out = String::new();
    for c in cells {
        let label = if c.cell.is_empty() {
            "(base config)".to_string()
        } else {
            c.cell.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
        };
        let _ = writeln!(out, "# {label}");
        let _ = writeln!(out, "{}", summary_header());
        for s in &c.summaries {
            let _ = writeln!(out, "{}", summary_line(s));
        }
        out.push('\n');
    }
    out
}

fn ablation_table(rows: &[AblationRow]) -> String {
    let mut out = format!("{:<16} {}\n", "preset", summary_header());
    for r in rows {
        for s in &r.summaries {
            let _ = writeln!(out, "{:<16} {}", r.preset, summary_line(s));
        }
    }
    out
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Track { det, config, out } => {
            let cfg = load_config(config.as_deref())?;
            let dets = read_detections(&det)?;
            let frames = run_tracker(&dets, &cfg.tracker)?;
            write_tracks(&out, &frames, cfg.eval_include_lost)?;
        }
        Command::Eval { gt, hyp, config, format } => {
            let cfg = load_config(config.as_deref())?;
            let gt = read_trajectories(&gt)?;
            let hyp = read_trajectories(&hyp)?;
            let report = evaluate(&gt, &hyp, cfg.eval_iou)?;
            match format {
                Format::Kv => print!("{}", report.to_kv()),
                Format::Table => println!("{report}"),
            }
        }
        Command::Simulate { scenario, seed, out_dir } => {
            let s = suite_scenario(&scenario).with_context(|| format!("unknown scenario {scenario:?}"))?;
            write_scenario(&out_dir, &generate(&s.config.with_seed(seed))?)?;
        }
        Command::Sweep { suite: Suite::Standard, config, grid, seeds, scenario, threads, out } => {
            let cfg = load_config(config.as_deref())?;
            let axes = parse_grid(&grid)?;
            let cells = sweep(&select_suite(&scenario)?, &cfg, &axes, seeds, threads)?;
            let table = sweep_table(&cells);
            if let Some(p) = out {
                write_atomic(&p, table.as_bytes())?;
            }
            print!("{table}");
        }
        Command::Ablate { suite: Suite::Standard, config, seeds, scenario, threads } => {
            let cfg = load_config(config.as_deref())?;
            print!("{}", ablation_table(&ablate(&select_suite(&scenario)?, &cfg, seeds, threads)?));
        }
        Command::Keys => {
            for (k, d, desc) in CONFIG_KEYS {
                println!("{k:<22} {:<10} {desc}", if d.is_empty() { "(none)" } else { d });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mottrack: {e:#}");
            ExitCode::FAILURE
        }
    }
}
