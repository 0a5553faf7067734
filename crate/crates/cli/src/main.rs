use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use firegate::adversary::{Outcome, PlanFile};
use firegate::coordination::Policy;
use firegate::governance::{GatePolicy, GovernanceContract};
use firegate::harness::experiments::{
    check_latency_bound, compare_baselines, run_ablations, run_attack_matrix, run_seeds, sweep_density, BoundStatus,
};
use firegate::harness::output::{
    run_dir, summarize_ablations, summarize_comparison, summarize_density, summarize_runs, write_attack_runs,
    write_comparison, write_metrics, write_run,
};
use firegate::harness::{RunMetrics, ScenarioConfig};
use firegate::ledger::{verify_chain, ChainDump, Verdict};

#[derive(Parser)]
#[command(name = "firegate", version, about = "Governance-constrained wildfire monitoring simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario on its seed list, or on one seed.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Seed-paired comparison of policies; the first is the baseline.
    Compare {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        policies: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Full system against each single-component removal.
    Ablate {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Detection latency across fleet sizes.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        uavs: Vec<u32>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run attack plans from a TOML file.
    Attack {
        config: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Audit a chain dump from genesis.
    VerifyChain { dump: PathBuf },
}

fn load(path: &Path) -> Result<ScenarioConfig> {
    let cfg = ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Invariant breaches a run must never show. Unauthorized deliveries are
/// only a breach while the ledger enforces the gate.
fn breaches(cfg: &ScenarioConfig, m: &RunMetrics) -> usize {
    let injected = if cfg.uses_ledger() { m.injected_delivered } else { 0 };
    m.gate_violations + m.duplicate_alerts + m.duplicate_commits + injected
}

fn run(config: &Path, seed: Option<u64>, out: &Path) -> Result<bool> {
    let mut cfg = load(config)?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    let outputs = run_seeds(&cfg)?;
    for o in &outputs {
        write_run(&run_dir(out, &o.metrics), o)?;
    }
    let metrics: Vec<RunMetrics> = outputs.into_iter().map(|o| o.metrics).collect();
    write_metrics(&out.join("metrics.csv"), &metrics)?;
    print!("{}", summarize_runs(&metrics));
    for m in &metrics {
        let b = check_latency_bound(m, &cfg);
        if b.status != BoundStatus::Pass {
            println!("seed {}: latency bound {:?} (L_d {:.2} vs {:.2})", m.seed, b.status, b.mean_ld, b.bound);
        }
    }
    Ok(metrics.iter().all(|m| breaches(&cfg, m) == 0))
}

fn compare(config: &Path, policies: &[String], out: &Path) -> Result<bool> {
    let base = load(config)?;
    let cfgs = policies
        .iter()
        .map(|p| {
            let mut c = base.clone();
            c.policy = p.parse::<Policy>()?;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let cmp = compare_baselines(&cfgs)?;
    let all: Vec<RunMetrics> = cmp.runs.iter().flat_map(|r| r.metrics.iter().cloned()).collect();
    write_metrics(&out.join("metrics.csv"), &all)?;
    write_comparison(&out.join("comparison.csv"), &cmp.rows)?;
    print!("{}", summarize_comparison(&cmp.rows));
    Ok(cmp.runs.iter().zip(&cfgs).all(|(r, c)| r.metrics.iter().all(|m| breaches(c, m) == 0)))
}

fn ablate(config: &Path, out: &Path) -> Result<bool> {
    let cfg = load(config)?;
    let r = run_ablations(&cfg)?;
    let all: Vec<RunMetrics> = [&r.full, &r.no_coordination, &r.no_hitl, &r.no_blockchain]
        .iter()
        .flat_map(|p| p.metrics.iter().cloned())
        .collect();
    write_metrics(&out.join("metrics.csv"), &all)?;
    print!("{}", summarize_ablations(&r));
    Ok(r.injected_full == 0)
}

fn sweep(config: &Path, uavs: &[u32], out: &Path) -> Result<bool> {
    let cfg = load(config)?;
    let r = sweep_density(&cfg, uavs)?;
    let all: Vec<RunMetrics> = r.rows.iter().flat_map(|row| row.runs.metrics.iter().cloned()).collect();
    write_metrics(&out.join("metrics.csv"), &all)?;
    print!("{}", summarize_density(&r));
    Ok(all.iter().all(|m| breaches(&cfg, m) == 0))
}

fn attack(config: &Path, plan: &Path, out: &Path) -> Result<bool> {
    let cfg = load(config)?;
    let text = std::fs::read_to_string(plan).with_context(|| format!("reading {}", plan.display()))?;
    let file = PlanFile::from_toml(&text)?;
    if file.attacks.is_empty() {
        bail!("{}: no attacks listed", plan.display());
    }
    let plans: Vec<_> = file.attacks.into_iter().enumerate().map(|(i, p)| (format!("plan-{i}"), p)).collect();
    let runs = run_attack_matrix(&cfg, &plans)?;
    write_attack_runs(&out.join("attacks.csv"), &runs)?;
    let all: Vec<RunMetrics> = runs.iter().map(|r| r.metrics.clone()).collect();
    write_metrics(&out.join("metrics.csv"), &all)?;
    let mut ok = true;
    for r in &runs {
        let count = |o: Outcome| r.outcomes.iter().filter(|x| x.outcome == o).count();
        let violated = count(Outcome::GuaranteeViolated);
        println!(
            "{} seed={} rejected={} absorbed={} violated={} breaches={}",
            r.plan,
            r.seed,
            count(Outcome::Rejected),
            count(Outcome::Absorbed),
            violated,
            breaches(&cfg, &r.metrics)
        );
        ok &= violated == 0 && breaches(&cfg, &r.metrics) == 0;
    }
    Ok(ok)
}

const MAGIC: &str = "firegate-chain 1\n";

fn verify(path: &Path) -> Result<bool> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let dump = match ChainDump::parse(&text) {
        Ok(d) => d,
        // a dump whose records no longer decode has been altered
        Err(e) if text.starts_with(MAGIC) => {
            println!("violation: {e}");
            return Ok(false);
        }
        Err(e) => return Err(e.into()),
    };
    let f: usize = dump.param("f")?.context("dump lacks param f")?;
    let defaults = GatePolicy::default();
    let policy = GatePolicy {
        tau: dump.param("tau")?.unwrap_or(defaults.tau),
        m: dump.param("m")?.unwrap_or(defaults.m),
        n: dump.param("n")?.unwrap_or(defaults.n),
    };
    policy.validate()?;
    match verify_chain(&dump.blocks, &dump.registry, f, Some(GovernanceContract::new(policy))) {
        Verdict::Ok => {
            println!("ok: {} blocks", dump.blocks.len());
            Ok(true)
        }
        Verdict::Violation { at, what } => {
            println!("violation at {at}: {what:?}");
            Ok(false)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Run { config, seed, out } => run(config, *seed, out),
        Cmd::Compare { config, policies, out } => compare(config, policies, out),
        Cmd::Ablate { config, out } => ablate(config, out),
        Cmd::Sweep { config, uavs, out } => sweep(config, uavs, out),
        Cmd::Attack { config, plan, out } => attack(config, plan, out),
        Cmd::VerifyChain { dump } => verify(dump),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("invariant violation");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
