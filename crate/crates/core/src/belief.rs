//! Factored ignition posterior and the environmental risk prior.
//!
//! Each cell carries an independent Bernoulli posterior. A step's delivered
//! observations are reduced to per-cell (modality, detection) counts before
//! any arithmetic, which makes the result independent of delivery order.
//! Cells not covered by any observation relax exponentially toward a prior
//! derived from the risk map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Dims;
use crate::sensing::{Modality, Observation, Target};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Likelihood {
    pub tpr: f64,
    pub fpr: f64,
}

impl Likelihood {
    pub fn new(tpr: f64, fpr: f64) -> Self {
        Likelihood { tpr, fpr }
    }

    pub fn validate(&self, name: &'static str) -> Result<()> {
        for v in [self.tpr, self.fpr] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Likelihood { name, value: v });
            }
        }
        Ok(())
    }

    /// (P(obs | fire), P(obs | no fire)) for one observation.
    pub fn factors(&self, detection: bool) -> (f64, f64) {
        if detection {
            (self.tpr, self.fpr)
        } else {
            (1.0 - self.tpr, 1.0 - self.fpr)
        }
    }
}

/// Single Bernoulli Bayes step.
#[inline]
pub fn bayes_update(prior: f64, lik: Likelihood, detection: bool) -> f64 {
    let (l1, l0) = lik.factors(detection);
    let num = prior * l1;
    let den = num + (1.0 - prior) * l0;
    if den == 0.0 {
        prior
    } else {
        num / den
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Likelihoods {
    pub thermal: Likelihood,
    pub ground: Likelihood,
    pub satellite: Likelihood,
}

impl Default for Likelihoods {
    fn default() -> Self {
        Likelihoods {
            thermal: Likelihood::new(0.85, 0.05),
            ground: Likelihood::new(0.9, 0.02),
            satellite: Likelihood::new(0.6, 0.1),
        }
    }
}

impl Likelihoods {
    pub fn get(&self, m: Modality) -> Likelihood {
        match m {
            Modality::ThermalUav => self.thermal,
            Modality::GroundIot => self.ground,
            Modality::Satellite => self.satellite,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.thermal.validate("thermal")?;
        self.ground.validate("ground")?;
        self.satellite.validate("satellite")
    }
}

/// Per-cell (modality, detection) tallies for one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CellCounts {
    /// Indexed by `[modality][detected as usize]`.
    pub n: [[u32; 2]; 3],
}

impl CellCounts {
    pub fn is_empty(&self) -> bool {
        self.n.iter().all(|m| m[0] == 0 && m[1] == 0)
    }
}

pub fn tally(dims: Dims, observations: &[Observation]) -> Vec<CellCounts> {
    let mut counts = vec![CellCounts::default(); dims.len()];
    for o in observations {
        let m = o.modality.index();
        let d = o.detection as usize;
        match o.target {
            Target::Cell(c) => {
                if dims.contains(c) {
                    counts[dims.index(c)].n[m][d] += 1;
                }
            }
            Target::Region(r) => {
                for c in r.cells() {
                    if dims.contains(c) {
                        counts[dims.index(c)].n[m][d] += 1;
                    }
                }
            }
        }
    }
    counts
}

/// Apply tallied observations to one cell's posterior in fixed modality
/// order, detections before non-detections.
pub fn apply_counts(mut p: f64, counts: &CellCounts, lik: &Likelihoods) -> f64 {
    for m in Modality::ALL {
        let l = lik.get(m);
        for d in [true, false] {
            for _ in 0..counts.n[m.index()][d as usize] {
                p = bayes_update(p, l, d);
            }
        }
    }
    p
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefMap {
    dims: Dims,
    pub probs: Vec<f64>,
    pub step: u64,
}

impl BeliefMap {
    pub fn new(dims: Dims, initial: f64) -> Self {
        BeliefMap { dims, probs: vec![initial.clamp(0.0, 1.0); dims.len()], step: 0 }
    }

    pub fn from_probs(dims: Dims, probs: Vec<f64>) -> Self {
        assert_eq!(probs.len(), dims.len());
        BeliefMap { dims, probs, step: 0 }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.probs[idx]
    }

    /// One filtering step: Bayes update on covered cells, exponential drift
    /// toward `prior` elsewhere.
    pub fn update(
        &mut self,
        observations: &[Observation],
        lik: &Likelihoods,
        prior: &[f64],
        drift_rate: f64,
    ) -> Result<()> {
        lik.validate()?;
        let counts = tally(self.dims, observations);
        for (i, p) in self.probs.iter_mut().enumerate() {
            let c = &counts[i];
            *p = if c.is_empty() {
                *p + drift_rate * (prior[i] - *p)
            } else {
                apply_counts(*p, c, lik)
            }
            .clamp(0.0, 1.0);
        }
        self.step += 1;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiskWeights {
    pub fuel: f64,
    pub burn_proximity: f64,
    pub humidity: f64,
}

impl Default for RiskWeights {
    fn default() -> Self {
        RiskWeights { fuel: 1.0, burn_proximity: 0.5, humidity: 0.6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskMap {
    pub values: Vec<f64>,
    pub step: u64,
}

/// Risk per cell: `clamp(w_f * fuel + w_p * near - w_h * humidity, 0, 1)`
/// where `near` is the mean burn indicator over the in-grid Moore
/// neighbours. `burn_view` is any per-cell burning estimate in [0, 1]; the
/// simulation passes the current belief, tests may pass the true state.
pub fn compute_risk(
    dims: Dims,
    fuel: &[f64],
    humidity: &[f64],
    burn_view: &[f64],
    weights: &RiskWeights,
    step: u64,
) -> RiskMap {
    // Separable 3x3 box sums; the neighbour mean excludes the centre.
    let (w, h) = (dims.width as usize, dims.height as usize);
    let mut rows = vec![0.0; w * h];
    for y in 0..h {
        let r = &burn_view[y * w..(y + 1) * w];
        for x in 0..w {
            let mut s = r[x];
            if x > 0 {
                s += r[x - 1];
            }
            if x + 1 < w {
                s += r[x + 1];
            }
            rows[y * w + x] = s;
        }
    }
    let mut values = vec![0.0; w * h];
    for y in 0..h {
        let ny = 1 + (y > 0) as usize + (y + 1 < h) as usize;
        for x in 0..w {
            let i = y * w + x;
            let mut s = rows[i];
            if y > 0 {
                s += rows[i - w];
            }
            if y + 1 < h {
                s += rows[i + w];
            }
            let nx = 1 + (x > 0) as usize + (x + 1 < w) as usize;
            let n = nx * ny - 1;
            let near = if n == 0 { 0.0 } else { (s - burn_view[i]) / n as f64 };
            values[i] = (weights.fuel * fuel[i] + weights.burn_proximity * near - weights.humidity * humidity[i])
                .clamp(0.0, 1.0);
        }
    }
    RiskMap { values, step }
}
