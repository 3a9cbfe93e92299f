use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use dvc_noc::config::{load_config, Overrides};
use dvc_noc::experiment::{self, Axis};
use dvc_noc::metrics::{ControlLayout, TableStorage};
use dvc_noc::router::BufferMode;
use dvc_noc::traffic::TrafficPattern;

#[derive(Parser)]
#[command(name = "dvc-noc", version, about = "Mesh NoC simulator with dynamic virtual channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single simulation; prints the JSON report.
    Run(Common),
    /// One run per injection rate; prints CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated rates in flits/node/cycle.
        #[arg(long, value_delimiter = ',', required = true)]
        rates: Vec<f64>,
    },
    /// Matched-seed A/B runs along one axis; prints CSV.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Rates to compare at (default: the configured rate).
        #[arg(long, value_delimiter = ',')]
        rates: Vec<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON config file; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    width: Option<u16>,
    #[arg(long)]
    height: Option<u16>,
    #[arg(long)]
    num_slots: Option<usize>,
    #[arg(long)]
    flit_bits: Option<u32>,
    #[arg(long)]
    packet_len: Option<usize>,
    #[arg(long)]
    warmup: Option<u64>,
    #[arg(long)]
    measure: Option<u64>,
    #[arg(long)]
    drain_limit: Option<u64>,
    /// `dynamic` or `static:VCSxDEPTH`, e.g. `static:4x4`.
    #[arg(long, value_parser = parse_buffer_mode)]
    buffer_mode: Option<BufferMode>,
    #[arg(long, value_parser = parse_layout)]
    control_layout: Option<ControlLayout>,
    #[arg(long, value_parser = parse_storage)]
    table_storage: Option<TableStorage>,
    /// `uniform_random`, `transpose`, `bit_complement` or `hotspot:X,Y,FRACTION`.
    #[arg(long, value_parser = parse_pattern)]
    pattern: Option<TrafficPattern>,
    /// Check every flow-control ledger after each cycle.
    #[arg(long)]
    check_invariants: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            rate: self.rate,
            seed: self.seed,
            width: self.width,
            height: self.height,
            num_slots: self.num_slots,
            flit_bits: self.flit_bits,
            packet_len: self.packet_len,
            warmup: self.warmup,
            measure: self.measure,
            drain_limit: self.drain_limit,
            buffer_mode: self.buffer_mode,
            control_layout: self.control_layout,
            table_storage: self.table_storage,
            pattern: self.pattern,
            check_invariants: self.check_invariants.then_some(true),
        }
    }
}

fn parse_buffer_mode(s: &str) -> Result<BufferMode, String> {
    if s == "dynamic" {
        return Ok(BufferMode::Dynamic);
    }
    let spec = s.strip_prefix("static:").ok_or("expected `dynamic` or `static:VCSxDEPTH`")?;
    let (v, d) = spec.split_once('x').ok_or("expected `static:VCSxDEPTH`")?;
    Ok(BufferMode::Static {
        vcs: v.parse().map_err(|e| format!("vcs: {e}"))?,
        depth: d.parse().map_err(|e| format!("depth: {e}"))?,
    })
}

fn parse_layout(s: &str) -> Result<ControlLayout, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| "expected `proposed` or `vichar_baseline`".into())
}

fn parse_storage(s: &str) -> Result<TableStorage, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| "expected `register` or `memory`".into())
}

fn parse_pattern(s: &str) -> Result<TrafficPattern, String> {
    if let Some(rest) = s.strip_prefix("hotspot:") {
        let parts: Vec<&str> = rest.split(',').collect();
        let [x, y, f] = parts.as_slice() else {
            return Err("expected `hotspot:X,Y,FRACTION`".into());
        };
        let node = dvc_noc::flit::Coord::new(x.parse().map_err(|e| format!("x: {e}"))?, y.parse().map_err(|e| format!("y: {e}"))?);
        return Ok(TrafficPattern::Hotspot { node, fraction: f.parse().map_err(|e| format!("fraction: {e}"))? });
    }
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| "expected uniform_random, transpose, bit_complement or hotspot:X,Y,FRACTION".into())
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let threads = experiment::threads_from_env();
    match cli.command {
        Command::Run(common) => {
            let config = load_config(common.config.as_deref(), &common.overrides())?;
            let report = experiment::run(&config, threads)?;
            let mut text = serde_json::to_string_pretty(&report)?;
            text.push('\n');
            emit(common.out.as_deref(), &text)
        }
        Command::Sweep { common, rates } => {
            let config = load_config(common.config.as_deref(), &common.overrides())?;
            let reports = experiment::sweep(&config, &rates, threads)?;
            emit(common.out.as_deref(), &experiment::sweep_csv(&reports))
        }
        Command::Compare { common, axis, rates } => {
            let config = load_config(common.config.as_deref(), &common.overrides())?;
            let rates = if rates.is_empty() { vec![config.traffic.rate] } else { rates };
            let rows = experiment::compare(&config, axis, &rates, threads)?;
            emit(common.out.as_deref(), &experiment::compare_csv(axis, &rows))
        }
    }
}
