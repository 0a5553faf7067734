//! Multi-seed drivers: baseline comparison, ablations, the density sweep,
//! the latency bound, anomaly bursts and the attack matrix.
//!
//! Every driver runs each configuration on the same seed list, so rows
//! with equal seeds share one world history.

use rayon::prelude::*;
use serde::Serialize;

use crate::adversary::{standard_matrix, AttackKind, AttackOutcome, AttackPlan, Outcome};
use crate::coordination::Policy;
use crate::error::{Error, Result};

use super::config::{Ablation, ScenarioConfig};
use super::metrics::RunMetrics;
use super::sim::{run_label, run_scenario, RunOutput};
use super::stats::{mean_std, paired_t_test, PairedTest};

/// Full outputs for every seed of `cfg`, in seed order.
pub fn run_seeds(cfg: &ScenarioConfig) -> Result<Vec<RunOutput>> {
    cfg.validate()?;
    cfg.seeds.par_iter().map(|&s| run_scenario(cfg, s)).collect()
}

/// Metrics only; logs are dropped as soon as each run finishes.
pub fn run_metrics(cfg: &ScenarioConfig) -> Result<Vec<RunMetrics>> {
    cfg.validate()?;
    cfg.seeds.par_iter().map(|&s| run_scenario(cfg, s).map(|o| o.metrics)).collect()
}

type Pick = fn(&RunMetrics) -> f64;

/// Metrics reported by `compare_baselines`.
pub const COMPARED: [(&str, Pick); 8] = [
    ("mean_ld", |m| m.mean_ld),
    ("fp", |m| m.fp),
    ("mean_alert_latency", |m| m.mean_alert_latency),
    ("override_freq", |m| m.override_freq),
    ("confirm_mean", |m| m.confirm_mean),
    ("gov_share", |m| m.gov_share),
    ("cost_cr", |m| m.cost_cr),
    ("cost_j", |m| m.cost_j),
];

pub fn pick(name: &str) -> Option<Pick> {
    COMPARED.iter().find(|(n, _)| *n == name).map(|(_, f)| *f)
}

#[derive(Debug, Clone)]
pub struct PolicyRuns {
    pub label: String,
    pub seeds: Vec<u64>,
    pub metrics: Vec<RunMetrics>,
}

impl PolicyRuns {
    pub fn run(cfg: &ScenarioConfig) -> Result<Self> {
        Ok(PolicyRuns { label: run_label(cfg), seeds: cfg.seeds.clone(), metrics: run_metrics(cfg)? })
    }

    pub fn values(&self, f: Pick) -> Vec<f64> {
        self.metrics.iter().map(f).collect()
    }

    /// Mean and sample std over seeds, skipping NaN entries.
    pub fn mean_std(&self, f: Pick) -> (f64, f64) {
        mean_std(&self.values(f))
    }

    pub fn mean(&self, f: Pick) -> f64 {
        self.mean_std(f).0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub metric: &'static str,
    pub baseline: String,
    pub other: String,
    pub mean_baseline: f64,
    pub sd_baseline: f64,
    pub mean_other: f64,
    pub sd_other: f64,
    /// Paired on seeds, other minus baseline.
    pub test: PairedTest,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub runs: Vec<PolicyRuns>,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn row(&self, metric: &str, other: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.metric == metric && r.other == other)
    }
}

/// Run every configuration on the shared seed list and test each one
/// against the first with a paired two-sided t-test per metric.
pub fn compare_baselines(cfgs: &[ScenarioConfig]) -> Result<Comparison> {
    if cfgs.len() < 2 {
        return Err(Error::config("policies", "need at least two configurations to compare"));
    }
    let seeds = &cfgs[0].seeds;
    if let Some(c) = cfgs.iter().find(|c| &c.seeds != seeds) {
        return Err(Error::config(
            "seeds",
            format!("mismatched seed lists: {:?} vs {:?} ({})", seeds, c.seeds, run_label(c)),
        ));
    }
    let runs = cfgs.iter().map(PolicyRuns::run).collect::<Result<Vec<_>>>()?;
    Ok(Comparison { rows: comparison_rows(&runs), runs })
}

pub fn comparison_rows(runs: &[PolicyRuns]) -> Vec<ComparisonRow> {
    let mut rows = Vec::new();
    let Some(base) = runs.first() else { return rows };
    for other in &runs[1..] {
        for (metric, f) in COMPARED {
            let (mb, sb) = base.mean_std(f);
            let (mo, so) = other.mean_std(f);
            rows.push(ComparisonRow {
                metric,
                baseline: base.label.clone(),
                other: other.label.clone(),
                mean_baseline: mb,
                sd_baseline: sb,
                mean_other: mo,
                sd_other: so,
                test: paired_t_test(&other.values(f), &base.values(f)),
            });
        }
    }
    rows
}

/// `b / a`, with a zero denominator mapped to infinity (or 1 when both are zero).
pub fn ratio_of_means(b: f64, a: f64) -> f64 {
    if a == 0.0 {
        if b == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        b / a
    }
}

// ---- ablations ----

#[derive(Debug, Clone)]
pub struct AblationReport {
    pub full: PolicyRuns,
    pub no_coordination: PolicyRuns,
    pub no_hitl: PolicyRuns,
    pub no_blockchain: PolicyRuns,
    /// Mean L_d without coordination over the full system's.
    pub latency_ratio: f64,
    /// F_p without human review over the full system's.
    pub fp_ratio: f64,
    pub full_ld: (f64, f64),
    pub no_blockchain_ld: (f64, f64),
    /// Unauthorized alerts delivered under an injection attack.
    pub injected_full: usize,
    pub injected_no_blockchain: usize,
}

impl AblationReport {
    /// Detection latency of the no-blockchain variant within one std of the full system.
    pub fn no_blockchain_within_noise(&self) -> bool {
        (self.no_blockchain_ld.0 - self.full_ld.0).abs() <= self.full_ld.1
    }
}

fn with_ablation(cfg: &ScenarioConfig, a: Ablation) -> ScenarioConfig {
    let mut c = cfg.clone();
    c.policy = Policy::Proposed;
    c.ablation = a;
    c
}

fn injection_plan(cfg: &ScenarioConfig) -> AttackPlan {
    standard_matrix(cfg.horizon, cfg.ledger.consensus.f)
        .into_iter()
        .find(|(_, p)| p.kind == AttackKind::AlertInject)
        .map(|(_, p)| p)
        .expect("matrix has an injection plan")
}

/// Full system against each single-component removal. The injection check
/// runs separately so forged alerts do not leak into the F_p comparison.
pub fn run_ablations(cfg: &ScenarioConfig) -> Result<AblationReport> {
    let full = PolicyRuns::run(&with_ablation(cfg, Ablation::default()))?;
    let no_coordination = PolicyRuns::run(&with_ablation(cfg, Ablation { no_coordination: true, ..Default::default() }))?;
    let no_hitl = PolicyRuns::run(&with_ablation(cfg, Ablation { no_hitl: true, ..Default::default() }))?;
    let nb_cfg = with_ablation(cfg, Ablation { no_blockchain: true, ..Default::default() });
    let no_blockchain = PolicyRuns::run(&nb_cfg)?;

    let plan = injection_plan(cfg);
    let injected = |c: &ScenarioConfig| -> Result<usize> {
        let mut c = c.clone();
        c.attacks.push(plan.clone());
        Ok(run_metrics(&c)?.iter().map(|m| m.injected_delivered).sum())
    };
    let injected_full = injected(&with_ablation(cfg, Ablation::default()))?;
    let injected_no_blockchain = injected(&nb_cfg)?;

    let ld: Pick = |m| m.mean_ld;
    let fp: Pick = |m| m.fp;
    Ok(AblationReport {
        latency_ratio: ratio_of_means(no_coordination.mean(ld), full.mean(ld)),
        fp_ratio: ratio_of_means(no_hitl.mean(fp), full.mean(fp)),
        full_ld: full.mean_std(ld),
        no_blockchain_ld: no_blockchain.mean_std(ld),
        injected_full,
        injected_no_blockchain,
        full,
        no_coordination,
        no_hitl,
        no_blockchain,
    })
}

// ---- latency bound and density ----

/// `A / (v N) + delta` in steps; infinite when nothing moves.
pub fn latency_bound(area: u64, speed: u32, uavs: u32, delta: u64) -> f64 {
    if speed == 0 || uavs == 0 {
        return f64::INFINITY;
    }
    area as f64 / (speed as f64 * uavs as f64) + delta as f64
}

pub fn config_bound(cfg: &ScenarioConfig) -> f64 {
    let area = cfg.world.width as u64 * cfg.world.height as u64;
    latency_bound(area, cfg.coordination.uav.speed, cfg.coordination.uav.count, cfg.channels.delay)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundStatus {
    Pass,
    Fail,
    /// No fire was detected, so there is nothing to compare.
    Incomplete,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub seed: u64,
    pub bound: f64,
    pub slack: f64,
    pub mean_ld: f64,
    pub status: BoundStatus,
}

pub fn check_latency_bound(m: &RunMetrics, cfg: &ScenarioConfig) -> BoundReport {
    let bound = config_bound(cfg);
    let status = if m.fires_detected == 0 || !m.mean_ld.is_finite() {
        BoundStatus::Incomplete
    } else if m.mean_ld <= bound * cfg.bound_slack {
        BoundStatus::Pass
    } else {
        BoundStatus::Fail
    };
    BoundReport { seed: m.seed, bound, slack: cfg.bound_slack, mean_ld: m.mean_ld, status }
}

#[derive(Debug, Clone)]
pub struct DensityRow {
    pub uavs: u32,
    pub runs: PolicyRuns,
    pub mean_ld: f64,
    pub sd_ld: f64,
    pub gov_share: f64,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct DensityReport {
    pub rows: Vec<DensityRow>,
}

impl DensityReport {
    /// Seed-averaged latency does not increase with N.
    pub fn monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].uavs <= w[0].uavs || w[1].mean_ld <= w[0].mean_ld)
    }

    pub fn max_gov_share(&self) -> f64 {
        self.rows.iter().map(|r| r.gov_share).fold(0.0, f64::max)
    }
}

pub fn sweep_density(cfg: &ScenarioConfig, uavs: &[u32]) -> Result<DensityReport> {
    if uavs.is_empty() {
        return Err(Error::config("uavs", "need at least one fleet size"));
    }
    let mut rows = Vec::new();
    for &n in uavs {
        let mut c = cfg.clone();
        c.coordination.uav.count = n;
        let runs = PolicyRuns::run(&c)?;
        let (mean_ld, sd_ld) = runs.mean_std(|m| m.mean_ld);
        rows.push(DensityRow { uavs: n, mean_ld, sd_ld, gov_share: runs.mean(|m| m.gov_share), bound: config_bound(&c), runs });
    }
    Ok(DensityReport { rows })
}

// ---- bursts ----

#[derive(Debug, Clone)]
pub struct BurstReport {
    pub factor: f64,
    pub nominal: PolicyRuns,
    pub burst: PolicyRuns,
    pub consensus_nominal: f64,
    pub consensus_burst: f64,
    pub sensing_burst: f64,
}

impl BurstReport {
    pub fn consensus_growth(&self) -> f64 {
        self.consensus_burst / self.consensus_nominal - 1.0
    }
}

/// Same seeds with the anomaly rate multiplied by `factor`.
pub fn burst_comparison(cfg: &ScenarioConfig, factor: f64) -> Result<BurstReport> {
    let nominal = PolicyRuns::run(cfg)?;
    let mut b = cfg.clone();
    b.anomalies.burst_multiplier *= factor;
    let burst = PolicyRuns::run(&b)?;
    Ok(BurstReport {
        factor,
        consensus_nominal: nominal.mean(|m| m.consensus_steps),
        consensus_burst: burst.mean(|m| m.consensus_steps),
        sensing_burst: burst.mean(|m| m.sensing_verification_steps),
        nominal,
        burst,
    })
}

// ---- attack matrix ----

#[derive(Debug, Clone)]
pub struct AttackRun {
    pub plan: String,
    pub seed: u64,
    pub metrics: RunMetrics,
    pub outcomes: Vec<AttackOutcome>,
}

impl AttackRun {
    /// Guarantee breaches inside the threat model: a violated outcome, an
    /// unauthorized delivery, or a delivered alert the gate audit rejects.
    pub fn breaches(&self) -> usize {
        self.outcomes.iter().filter(|o| o.outcome == Outcome::GuaranteeViolated).count()
            + self.metrics.injected_delivered
            + self.metrics.gate_violations
            + self.metrics.duplicate_alerts
            + self.metrics.duplicate_commits
    }
}

/// Every named plan on every seed of `cfg`.
pub fn run_attack_matrix(cfg: &ScenarioConfig, plans: &[(String, AttackPlan)]) -> Result<Vec<AttackRun>> {
    let jobs: Vec<(usize, u64)> = (0..plans.len()).flat_map(|p| cfg.seeds.iter().map(move |&s| (p, s))).collect();
    let cfgs: Vec<ScenarioConfig> = plans
        .iter()
        .map(|(_, plan)| {
            let mut c = cfg.clone();
            c.attacks = vec![plan.clone()];
            c.validate().map(|_| c)
        })
        .collect::<Result<_>>()?;
    jobs.par_iter()
        .map(|&(p, seed)| {
            let out = run_scenario(&cfgs[p], seed)?;
            Ok(AttackRun { plan: plans[p].0.clone(), seed, metrics: out.metrics, outcomes: out.attacks })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_formula() {
        assert_eq!(latency_bound(10_000, 1, 10, 2), 1002.0);
        // doubling N halves the travel term
        let (a, b) = (latency_bound(10_000, 1, 10, 2), latency_bound(10_000, 1, 20, 2));
        assert_eq!(a - 2.0, 2.0 * (b - 2.0));
        assert!(latency_bound(100, 0, 3, 1).is_infinite());
        assert!(latency_bound(100, 1, 0, 1).is_infinite());
    }

    #[test]
    fn zero_detections_are_incomplete() {
        let cfg = ScenarioConfig::default();
        let m = RunMetrics { mean_ld: f64::NAN, fires_detected: 0, ..Default::default() };
        assert_eq!(check_latency_bound(&m, &cfg).status, BoundStatus::Incomplete);
        let m = RunMetrics { mean_ld: 40.0, fires_detected: 3, ..Default::default() };
        assert_eq!(check_latency_bound(&m, &cfg).status, BoundStatus::Pass);
    }

    #[test]
    fn mismatched_seeds_rejected() {
        let a = ScenarioConfig { seeds: vec![1, 2], ..Default::default() };
        let b = ScenarioConfig { seeds: vec![1, 3], policy: Policy::AdaptiveNogov, ..Default::default() };
        assert!(matches!(compare_baselines(&[a.clone(), b]), Err(Error::Config { .. })));
        assert!(compare_baselines(&[a]).is_err());
    }

    #[test]
    fn ratio_edge_cases() {
        assert_eq!(ratio_of_means(0.0, 0.0), 1.0);
        assert!(ratio_of_means(0.1, 0.0).is_infinite());
        assert_eq!(ratio_of_means(3.0, 1.5), 2.0);
    }
}
