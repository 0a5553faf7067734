//! CSV logs and text summaries. Column order follows the row structs and
//! is stable across runs; floats print with Rust's shortest round-trip form.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

use super::experiments::{AblationReport, AttackRun, BurstReport, ComparisonRow, DensityReport};
use super::metrics::RunMetrics;
use super::sim::RunOutput;

pub fn write_csv<T: Serialize>(w: impl Write, rows: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

fn write_file<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    write_csv(BufWriter::new(File::create(path)?), rows)
}

/// Directory name for one run's logs.
pub fn run_dir(root: &Path, m: &RunMetrics) -> PathBuf {
    root.join(format!("{}-seed{}", m.label, m.seed))
}

/// Every log of one run under `dir`. The chain dump is written only for
/// runs that kept a ledger.
pub fn write_run(dir: &Path, out: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_file(&dir.join("metrics.csv"), std::slice::from_ref(&out.metrics))?;
    write_file(&dir.join("fires.csv"), &out.fires)?;
    write_file(&dir.join("events.csv"), &out.events)?;
    write_file(&dir.join("alerts.csv"), &out.alerts)?;
    write_file(&dir.join("decomposition.csv"), &out.decomposition)?;
    write_file(&dir.join("attacks.csv"), &out.attacks)?;
    write_file(&dir.join("blocks.csv"), &out.blocks)?;
    if let Some(chain) = &out.chain {
        chain.write_to(BufWriter::new(File::create(dir.join("chain.txt"))?))?;
    }
    Ok(())
}

pub fn write_metrics(path: &Path, rows: &[RunMetrics]) -> Result<()> {
    write_file(path, rows)
}

#[derive(Serialize)]
struct FlatComparison<'a> {
    metric: &'a str,
    baseline: &'a str,
    other: &'a str,
    mean_baseline: f64,
    sd_baseline: f64,
    mean_other: f64,
    sd_other: f64,
    n: usize,
    mean_diff: f64,
    t: f64,
    p: f64,
    degenerate: bool,
}

pub fn write_comparison(path: &Path, rows: &[ComparisonRow]) -> Result<()> {
    let flat: Vec<FlatComparison> = rows
        .iter()
        .map(|r| FlatComparison {
            metric: r.metric,
            baseline: &r.baseline,
            other: &r.other,
            mean_baseline: r.mean_baseline,
            sd_baseline: r.sd_baseline,
            mean_other: r.mean_other,
            sd_other: r.sd_other,
            n: r.test.n,
            mean_diff: r.test.mean_diff,
            t: r.test.t,
            p: r.test.p,
            degenerate: r.test.degenerate,
        })
        .collect();
    write_file(path, &flat)
}

#[derive(Serialize)]
struct FlatAttack<'a> {
    plan: &'a str,
    seed: u64,
    kind: String,
    step: u64,
    target: &'a str,
    outcome: String,
    detail: &'a str,
}

pub fn write_attack_runs(path: &Path, runs: &[AttackRun]) -> Result<()> {
    let rows: Vec<FlatAttack> = runs
        .iter()
        .flat_map(|r| {
            r.outcomes.iter().map(move |o| FlatAttack {
                plan: &r.plan,
                seed: r.seed,
                kind: format!("{:?}", o.kind),
                step: o.step,
                target: &o.target,
                outcome: format!("{:?}", o.outcome),
                detail: &o.detail,
            })
        })
        .collect();
    write_file(path, &rows)
}

fn f3(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.3}")
    } else {
        format!("{x}")
    }
}

pub fn summarize_runs(metrics: &[RunMetrics]) -> String {
    let mut s = String::new();
    for m in metrics {
        let _ = writeln!(
            s,
            "{:<16} seed={:<4} fires={:<3} detected={:<3} alerts={:<3} L_d={:>8} F_p={} gov={} J={}",
            m.label,
            m.seed,
            m.fires,
            m.fires_detected,
            m.alerts,
            f3(m.mean_ld),
            f3(m.fp),
            f3(m.gov_share),
            f3(m.cost_j)
        );
    }
    s
}

pub fn summarize_comparison(rows: &[ComparisonRow]) -> String {
    let mut s = String::new();
    for r in rows {
        let _ = writeln!(
            s,
            "{:<20} {:>14} {:>10}+-{:<8} {:>14} {:>10}+-{:<8} diff={:>9} p={}",
            r.metric,
            r.baseline,
            f3(r.mean_baseline),
            f3(r.sd_baseline),
            r.other,
            f3(r.mean_other),
            f3(r.sd_other),
            f3(r.test.mean_diff),
            f3(r.test.p)
        );
    }
    s
}

pub fn summarize_ablations(r: &AblationReport) -> String {
    format!(
        "no-coordination L_d ratio {}\nno-hitl F_p ratio {}\nno-blockchain L_d {} vs full {} +- {}\n\
         injected alerts delivered: full {} no-blockchain {}\n",
        f3(r.latency_ratio),
        f3(r.fp_ratio),
        f3(r.no_blockchain_ld.0),
        f3(r.full_ld.0),
        f3(r.full_ld.1),
        r.injected_full,
        r.injected_no_blockchain
    )
}

pub fn summarize_density(r: &DensityReport) -> String {
    let mut s = String::new();
    for row in &r.rows {
        let _ = writeln!(
            s,
            "N={:<3} L_d={:>8} +- {:<8} bound={:>8} gov={}",
            row.uavs,
            f3(row.mean_ld),
            f3(row.sd_ld),
            f3(row.bound),
            f3(row.gov_share)
        );
    }
    let _ = writeln!(s, "monotone: {}", r.monotone());
    s
}

pub fn summarize_burst(r: &BurstReport) -> String {
    format!(
        "burst x{}: consensus {} -> {} ({:+.1}%), sensing+verification {}\n",
        r.factor,
        f3(r.consensus_nominal),
        f3(r.consensus_burst),
        100.0 * r.consensus_growth(),
        f3(r.sensing_burst)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: u32,
        b: Option<u64>,
        c: f64,
    }

    #[test]
    fn header_and_empty_options() {
        let s = csv_string(&[Row { a: 1, b: None, c: 0.5 }, Row { a: 2, b: Some(3), c: 1.0 }]).unwrap();
        assert_eq!(s, "a,b,c\n1,,0.5\n2,3,1.0\n");
    }
}
