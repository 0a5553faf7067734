//! Per-run metrics, log rows and the latency decomposition.

use serde::Serialize;

use super::config::CostWeights;

/// Per-alert delay split by pipeline timestamps. Components add up to
/// `delivered - created`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Components {
    pub coordination: u64,
    pub sensing_verification: u64,
    pub consensus: u64,
    pub human: u64,
    pub dissemination: u64,
}

impl Components {
    pub fn total(&self) -> u64 {
        self.coordination + self.sensing_verification + self.consensus + self.human + self.dissemination
    }

    pub fn governance(&self) -> u64 {
        self.consensus + self.human
    }

    fn add(&mut self, o: &Components) {
        self.coordination += o.coordination;
        self.sensing_verification += o.sensing_verification;
        self.consensus += o.consensus;
        self.human += o.human;
        self.dissemination += o.dissemination;
    }
}

/// Event timestamps feeding the decomposition. `created` is the first
/// detection by the pipeline; `origin` is the ignition behind a true-fire
/// event, so the time the fire went unseen counts as sensing delay.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stamps {
    pub origin: Option<u64>,
    pub created: u64,
    pub dispatched: Option<u64>,
    pub verified: u64,
    pub committed: Option<u64>,
    pub approved: Option<u64>,
    pub authorized: u64,
    pub delivered: u64,
}

/// Split one alert's end-to-end delay. With a ledger, consensus covers the
/// event commit plus the wait between the human decision (or the event
/// commit, without reviewers) and the authorizing block; human review runs
/// from the event commit to the decision. Without a ledger, review starts
/// at verification and authorization is the decision itself.
pub fn decompose(s: &Stamps) -> Components {
    let after_dispatch = s.dispatched.unwrap_or(s.created);
    let unseen = s.origin.map_or(0, |o| s.created.saturating_sub(o));
    let (consensus, human) = match s.committed {
        Some(c) => {
            let human = s.approved.map_or(0, |a| a.saturating_sub(c));
            let gate_input = s.approved.map_or(c, |a| a.max(c));
            (c.saturating_sub(s.verified) + s.authorized.saturating_sub(gate_input), human)
        }
        None => (0, s.approved.map_or(0, |a| a.saturating_sub(s.verified))),
    };
    Components {
        coordination: after_dispatch.saturating_sub(s.created),
        sensing_verification: unseen + s.verified.saturating_sub(after_dispatch),
        consensus,
        human,
        dissemination: s.delivered.saturating_sub(s.authorized),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Fractions {
    pub coordination: f64,
    pub sensing_verification: f64,
    pub consensus: f64,
    pub human: f64,
    pub dissemination: f64,
}

/// Aggregate of many alerts: summed steps and shares of the summed total.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Decomposition {
    pub alerts: usize,
    pub steps: Components,
    pub fractions: Fractions,
}

impl Decomposition {
    pub fn from_components<'a>(items: impl IntoIterator<Item = &'a Components>) -> Self {
        let mut steps = Components::default();
        let mut alerts = 0;
        for c in items {
            steps.add(c);
            alerts += 1;
        }
        let t = steps.total() as f64;
        let frac = |v: u64| if t > 0.0 { v as f64 / t } else { 0.0 };
        let fractions = Fractions {
            coordination: frac(steps.coordination),
            sensing_verification: frac(steps.sensing_verification),
            consensus: frac(steps.consensus),
            human: frac(steps.human),
            dissemination: frac(steps.dissemination),
        };
        Decomposition { alerts, steps, fractions }
    }

    /// Mean steps per alert for each component.
    pub fn mean(&self, pick: impl Fn(&Components) -> u64) -> f64 {
        if self.alerts == 0 {
            f64::NAN
        } else {
            pick(&self.steps) as f64 / self.alerts as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FireRow {
    pub fire_id: u32,
    pub x: u32,
    pub y: u32,
    pub ignition: u64,
    pub detection: Option<u64>,
    pub alert: Option<u64>,
    pub latency: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRow {
    pub event_id: u64,
    pub x: u32,
    pub y: u32,
    pub lineage: usize,
    pub created: u64,
    pub dispatched: Option<u64>,
    pub verified: Option<u64>,
    pub submitted: Option<u64>,
    pub committed: Option<u64>,
    pub approved: Option<u64>,
    pub authorized: Option<u64>,
    pub delivered: Option<u64>,
    pub conf1: f64,
    pub conf_final: Option<f64>,
    pub samples: usize,
    pub truth_fire: bool,
    pub fire_id: Option<u32>,
    pub spoofed: bool,
    pub status: &'static str,
}

/// Delivered-alert log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlertRow {
    pub event_id: u64,
    pub decision_step: u64,
    pub delivery_step: u64,
    pub severity: u8,
    pub boundary: String,
    pub channels_ok: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionRow {
    pub event_id: u64,
    pub truth_fire: bool,
    pub coordination: u64,
    pub sensing_verification: u64,
    pub consensus: u64,
    pub human: u64,
    pub dissemination: u64,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockRow {
    pub height: u64,
    pub commit_step: u64,
    pub txs: usize,
    pub receipts: usize,
    pub signatures: usize,
}

/// One run's summary. Rates are NaN-free: an empty denominator yields 0.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunMetrics {
    pub label: String,
    pub seed: u64,
    pub uavs: u32,
    pub fires: usize,
    pub fires_detected: usize,
    pub fires_alerted: usize,
    /// Mean over detected fires; NaN when none was detected.
    pub mean_ld: f64,
    pub mean_alert_latency: f64,
    pub events: usize,
    pub alerts: usize,
    pub false_alerts: usize,
    pub fp: f64,
    pub reviews: usize,
    pub overrides: usize,
    pub override_freq: f64,
    pub severity_overrides: usize,
    pub blocks: usize,
    pub confirm_mean: f64,
    pub confirm_p95: f64,
    pub confirm_max: u64,
    pub stalled_rounds: u64,
    pub tx_rejections: usize,
    pub decomp_coordination: f64,
    pub decomp_sensing_verification: f64,
    pub decomp_consensus: f64,
    pub decomp_human: f64,
    pub decomp_dissemination: f64,
    /// Mean consensus component per alert, in steps.
    pub consensus_steps: f64,
    pub sensing_verification_steps: f64,
    /// Consensus + human delay over ignition-to-delivery latency, fire alerts only.
    pub gov_share: f64,
    pub distance: u64,
    pub battery: f64,
    pub cost_cr: f64,
    pub cost_j: f64,
    pub gate_violations: usize,
    pub injected_delivered: usize,
    pub duplicate_alerts: usize,
    pub duplicate_commits: usize,
}

pub fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Nearest-rank percentile of unsorted data.
pub fn percentile(xs: &[u64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_unstable();
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1] as f64
}

/// `J = alpha * mean(L_d) + beta * F_p + gamma * C_r`; a zero weight drops
/// its term even when the metric is undefined.
pub fn scalar_cost(w: &CostWeights, mean_ld: f64, fp: f64, cr: f64) -> f64 {
    let term = |k: f64, v: f64| if k == 0.0 { 0.0 } else { k * v };
    term(w.alpha, mean_ld) + term(w.beta, fp) + term(w.gamma, cr)
}
