//! Experiment drivers: single run, rate sweep, matched-seed A/B comparison.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::metrics::{ControlLayout, MetricsReport, TableStorage};
use crate::router::BufferMode;
use crate::sim::Simulation;

/// Environment variable naming the worker-thread count.
pub const THREADS_ENV: &str = "DVC_NOC_THREADS";

/// Bumped whenever a column is added, removed, or reordered.
pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const SWEEP_HEADER: &str =
    "rate,accepted_tput,avg_lat,p99_lat,proxy_per_flit,saturated,offered_tput,median_lat,measured_packets,delivered_packets,buffer_share";

pub const COMPARE_HEADER: &str = "axis,rate,variant_a,variant_b,accepted_tput_a,accepted_tput_b,avg_lat_a,avg_lat_b,\
p99_lat_a,p99_lat_b,proxy_per_flit_a,proxy_per_flit_b,avg_lat_delta_pct,proxy_delta_pct,saturated_a,saturated_b";

/// Thread count from [`THREADS_ENV`], defaulting to 1.
pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()).filter(|&n| n > 0).unwrap_or(1)
}

pub fn run(config: &SimConfig, threads: usize) -> Result<MetricsReport> {
    Ok(Simulation::new(config, threads)?.run()?.report)
}

fn num(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_default()
}

pub fn sweep_row(r: &MetricsReport) -> String {
    format!(
        "{:.4},{:.4},{},{},{},{},{:.4},{},{},{},{}",
        r.rate,
        r.accepted_tput,
        num(r.latency.avg),
        num(r.latency.p99),
        num(r.energy.per_flit),
        r.saturated,
        r.offered_tput,
        num(r.latency.median),
        r.measured_packets,
        r.delivered_packets,
        num(r.energy.buffer_share),
    )
}

/// Runs `f` over `items` on a pool of `threads`, keeping input order.
fn par_map<T: Sync, R: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> Result<R> + Sync + Send) -> Result<Vec<R>> {
    if threads <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    pool.install(|| items.par_iter().map(&f).collect())
}

/// One run per rate; reports come back ordered by rate.
pub fn sweep(config: &SimConfig, rates: &[f64], threads: usize) -> Result<Vec<MetricsReport>> {
    let mut rates = rates.to_vec();
    rates.sort_by(f64::total_cmp);
    let configs: Vec<SimConfig> = rates
        .iter()
        .map(|&rate| {
            let mut c = config.clone();
            c.traffic.rate = rate;
            c.validate().map(|_| c)
        })
        .collect::<Result<_, _>>()?;
    par_map(&configs, threads, |c| run(c, 1))
}

pub fn sweep_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&sweep_row(r));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[clap(rename_all = "snake_case")]
pub enum Axis {
    BufferMode,
    ControlLayout,
    TableStorage,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::BufferMode => "buffer_mode",
            Axis::ControlLayout => "control_layout",
            Axis::TableStorage => "table_storage",
        }
    }

    /// The two configurations compared, with their labels.
    pub fn variants(self, base: &SimConfig) -> [(String, SimConfig); 2] {
        let mut a = base.clone();
        let mut b = base.clone();
        match self {
            Axis::BufferMode => {
                a.router.buffer_mode = BufferMode::Dynamic;
                b.router.buffer_mode = match base.router.buffer_mode {
                    s @ BufferMode::Static { .. } => s,
                    BufferMode::Dynamic => {
                        BufferMode::Static { vcs: 4, depth: (base.router.num_slots / 4) as u16 }
                    }
                };
            }
            Axis::ControlLayout => {
                a.router.control_layout = ControlLayout::Proposed;
                b.router.control_layout = ControlLayout::VicharBaseline;
            }
            Axis::TableStorage => {
                a.router.table_storage = TableStorage::Memory;
                b.router.table_storage = TableStorage::Register;
            }
        }
        let label = |c: &SimConfig| match self {
            Axis::BufferMode => match c.router.buffer_mode {
                BufferMode::Dynamic => "dynamic".to_string(),
                BufferMode::Static { vcs, depth } => format!("static_{vcs}x{depth}"),
            },
            Axis::ControlLayout => c.router.control_layout.label().to_string(),
            Axis::TableStorage => c.router.table_storage.label().to_string(),
        };
        [(label(&a), a), (label(&b), b)]
    }
}

#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub rate: f64,
    pub labels: [String; 2],
    pub reports: [MetricsReport; 2],
}

/// Percentage change of `a` relative to `b`.
fn delta_pct(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) if b != 0.0 => Some(100.0 * (a - b) / b),
        _ => None,
    }
}

/// Matched-seed pairs at each rate.
pub fn compare(config: &SimConfig, axis: Axis, rates: &[f64], threads: usize) -> Result<Vec<ComparisonRow>> {
    let mut rates = rates.to_vec();
    rates.sort_by(f64::total_cmp);
    let mut jobs = Vec::new();
    for &rate in &rates {
        let mut base = config.clone();
        base.traffic.rate = rate;
        for (label, c) in axis.variants(&base) {
            c.validate()?;
            jobs.push((rate, label, c));
        }
    }
    let reports = par_map(&jobs, threads, |(_, _, c)| run(c, 1))?;
    let mut rows = Vec::new();
    let mut it = jobs.into_iter().zip(reports);
    while let (Some(((rate, la, _), ra)), Some(((_, lb, _), rb))) = (it.next(), it.next()) {
        rows.push(ComparisonRow { rate, labels: [la, lb], reports: [ra, rb] });
    }
    Ok(rows)
}

pub fn compare_csv(axis: Axis, rows: &[ComparisonRow]) -> String {
    let mut out = String::from(COMPARE_HEADER);
    out.push('\n');
    for row in rows {
        let [a, b] = &row.reports;
        let _ = writeln!(
            out,
            "{},{:.4},{},{},{:.4},{:.4},{},{},{},{},{},{},{},{},{},{}",
            axis.label(),
            row.rate,
            row.labels[0],
            row.labels[1],
            a.accepted_tput,
            b.accepted_tput,
            num(a.latency.avg),
            num(b.latency.avg),
            num(a.latency.p99),
            num(b.latency.p99),
            num(a.energy.per_flit),
            num(b.energy.per_flit),
            num(delta_pct(a.latency.avg, b.latency.avg)),
            num(delta_pct(a.energy.per_flit, b.energy.per_flit)),
            a.saturated,
            b.saturated,
        );
    }
    out
}
