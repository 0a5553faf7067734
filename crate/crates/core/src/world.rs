//! Environment state: static fuel/humidity fields, stochastic fire spread,
//! ignition spawning and non-fire heat sources.
//!
//! Spread follows a Moore-neighbourhood cellular automaton. Every step each
//! burning cell makes one independent Bernoulli trial against each unburned
//! neighbour with probability
//!
//! ```text
//! P = logistic(a_wind * wind_alignment + a_fuel * fuel - a_humidity * humidity)
//! ```
//!
//! where fuel and humidity belong to the target cell and `wind_alignment` is
//! the projection of the global wind vector onto the unit direction from the
//! burning cell to the target, clamped to [-1, 1].

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, Dims};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BurnState {
    Unburned,
    Burning,
    Burned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnomalyKind {
    SignalNoise,
    NonFireHeat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalySource {
    pub cell: Cell,
    pub magnitude: f64,
    pub start: u64,
    pub end: u64,
    pub kind: AnomalyKind,
}

impl AnomalySource {
    pub fn active_at(&self, step: u64) -> bool {
        self.start <= step && step <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgnitionEvent {
    pub fire_id: u32,
    pub cell: Cell,
    pub ignition_step: u64,
    pub detection_step: Option<u64>,
    pub alert_step: Option<u64>,
}

/// Generator for a smooth random scalar field in [0, 1]: a base level plus
/// a handful of Gaussian bumps plus white noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldSpec {
    pub base: f64,
    pub amplitude: f64,
    pub blobs: u32,
    pub blob_radius: f64,
    pub noise: f64,
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec { base: 0.5, amplitude: 0.0, blobs: 0, blob_radius: 10.0, noise: 0.0 }
    }
}

impl FieldSpec {
    pub fn constant(v: f64) -> Self {
        FieldSpec { base: v, ..Default::default() }
    }

    pub fn generate(&self, dims: Dims, rng: &mut SimRng) -> Vec<f64> {
        let centers: Vec<(f64, f64, f64)> = (0..self.blobs)
            .map(|_| {
                let cx = rng.gen_range(0.0..dims.width as f64);
                let cy = rng.gen_range(0.0..dims.height as f64);
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                (cx, cy, sign)
            })
            .collect();
        let two_r2 = 2.0 * self.blob_radius * self.blob_radius;
        (0..dims.len())
            .map(|i| {
                let c = dims.cell(i);
                let mut v = self.base;
                for &(cx, cy, s) in &centers {
                    let dx = c.x as f64 - cx;
                    let dy = c.y as f64 - cy;
                    v += s * self.amplitude * (-(dx * dx + dy * dy) / two_r2).exp();
                }
                if self.noise > 0.0 {
                    v += rng.gen_range(-self.noise..=self.noise);
                }
                v.clamp(0.0, 1.0)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldParams {
    pub width: u32,
    pub height: u32,
    pub alpha_wind: f64,
    pub alpha_fuel: f64,
    pub alpha_humidity: f64,
    pub burn_duration: u64,
    pub wind: [f64; 2],
    pub ambient_temperature: f64,
    pub ambient_variation: f64,
    pub fire_heat: f64,
    pub fuel: FieldSpec,
    pub humidity: FieldSpec,
    /// Expected new ignitions per step.
    pub ignition_rate: f64,
    /// Exponent applied to `fuel * (1 - humidity)` when choosing where an
    /// ignition lands; 0 means uniform.
    pub ignition_bias: f64,
    /// Ignitions are not spawned during the final steps of the horizon.
    pub ignition_cutoff: u64,
}

impl Default for WorldParams {
    fn default() -> Self {
        WorldParams {
            width: 100,
            height: 100,
            alpha_wind: 1.0,
            alpha_fuel: 4.0,
            alpha_humidity: 15.0,
            burn_duration: 120,
            wind: [0.5, 0.2],
            ambient_temperature: 20.0,
            ambient_variation: 2.0,
            fire_heat: 60.0,
            fuel: FieldSpec { base: 0.5, amplitude: 0.35, blobs: 8, blob_radius: 14.0, noise: 0.05 },
            humidity: FieldSpec { base: 0.65, amplitude: 0.25, blobs: 8, blob_radius: 14.0, noise: 0.03 },
            ignition_rate: 0.02,
            ignition_bias: 3.0,
            ignition_cutoff: 300,
        }
    }
}

/// Standard logistic function.
pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Wind alignment scalar for spread from a burning cell toward the
/// neighbour at offset `(dx, dy)`.
pub fn wind_alignment(wind: [f64; 2], dx: i32, dy: i32) -> f64 {
    let norm = ((dx * dx + dy * dy) as f64).sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    ((wind[0] * dx as f64 + wind[1] * dy as f64) / norm).clamp(-1.0, 1.0)
}

pub fn spread_probability(p: &WorldParams, alignment: f64, fuel: f64, humidity: f64) -> f64 {
    logistic(p.alpha_wind * alignment + p.alpha_fuel * fuel - p.alpha_humidity * humidity)
}

/// Cells whose burn state changed during one fire step.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FireDelta {
    pub ignited: Vec<Cell>,
    pub burned_out: Vec<Cell>,
}

const NO_FIRE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct GridWorld {
    dims: Dims,
    pub params: WorldParams,
    pub fuel: Vec<f64>,
    pub humidity: Vec<f64>,
    base_temperature: Vec<f64>,
    burn: Vec<BurnState>,
    ignited_at: Vec<u64>,
    fire_of: Vec<u32>,
    burning: Vec<usize>,
    step: u64,
    pub horizon: u64,
    pub ignitions: Vec<IgnitionEvent>,
    anomalies: Vec<AnomalySource>,
    anomaly_index: BTreeMap<usize, Vec<usize>>,
    ignition_cdf: Vec<f64>,
}

impl GridWorld {
    /// Build a world with the given fields; temperature variation is drawn
    /// from `rng`.
    pub fn with_fields(
        params: WorldParams,
        fuel: Vec<f64>,
        humidity: Vec<f64>,
        horizon: u64,
        rng: &mut SimRng,
    ) -> Self {
        let dims = Dims::new(params.width, params.height);
        assert_eq!(fuel.len(), dims.len());
        assert_eq!(humidity.len(), dims.len());
        let base_temperature = (0..dims.len())
            .map(|_| {
                if params.ambient_variation > 0.0 {
                    params.ambient_temperature
                        + rng.gen_range(-params.ambient_variation..=params.ambient_variation)
                } else {
                    params.ambient_temperature
                }
            })
            .collect();
        let mut acc = 0.0;
        let ignition_cdf = fuel
            .iter()
            .zip(&humidity)
            .map(|(f, h)| {
                acc += (f * (1.0 - h)).max(1e-12).powf(params.ignition_bias);
                acc
            })
            .collect();
        GridWorld {
            dims,
            params,
            fuel,
            humidity,
            base_temperature,
            burn: vec![BurnState::Unburned; dims.len()],
            ignited_at: vec![0; dims.len()],
            fire_of: vec![NO_FIRE; dims.len()],
            burning: Vec::new(),
            step: 0,
            horizon,
            ignitions: Vec::new(),
            anomalies: Vec::new(),
            anomaly_index: BTreeMap::new(),
            ignition_cdf,
        }
    }

    /// Generate fuel and humidity from the configured field specs.
    pub fn generate(params: WorldParams, horizon: u64, rng: &mut SimRng) -> Self {
        let dims = Dims::new(params.width, params.height);
        let fuel = params.fuel.generate(dims, rng);
        let humidity = params.humidity.generate(dims, rng);
        Self::with_fields(params, fuel, humidity, horizon, rng)
    }

    /// Uniform fields, no temperature variation; handy for tests.
    pub fn uniform(params: WorldParams, fuel: f64, humidity: f64, horizon: u64) -> Self {
        let dims = Dims::new(params.width, params.height);
        let mut p = params;
        p.ambient_variation = 0.0;
        let mut rng = crate::rng::labeled(0, "uniform-world");
        Self::with_fields(p, vec![fuel; dims.len()], vec![humidity; dims.len()], horizon, &mut rng)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn burn_state(&self, c: Cell) -> BurnState {
        self.burn[self.dims.index(c)]
    }

    pub fn burn_states(&self) -> &[BurnState] {
        &self.burn
    }

    pub fn burning_cells(&self) -> &[usize] {
        &self.burning
    }

    pub fn fire_id(&self, c: Cell) -> Option<u32> {
        match self.fire_of[self.dims.index(c)] {
            NO_FIRE => None,
            id => Some(id),
        }
    }

    pub fn anomalies(&self) -> &[AnomalySource] {
        &self.anomalies
    }

    /// Summed magnitude of anomaly sources active at `c` on the current step.
    pub fn anomaly_heat(&self, c: Cell) -> f64 {
        self.anomaly_heat_at(c, self.step)
    }

    pub fn anomaly_heat_at(&self, c: Cell, step: u64) -> f64 {
        self.anomaly_index
            .get(&self.dims.index(c))
            .map(|ids| {
                ids.iter()
                    .map(|&i| &self.anomalies[i])
                    .filter(|a| a.active_at(step))
                    .map(|a| a.magnitude)
                    .sum()
            })
            .unwrap_or(0.0)
    }

    pub fn has_active_anomaly(&self, c: Cell) -> bool {
        self.anomaly_index
            .get(&self.dims.index(c))
            .is_some_and(|ids| ids.iter().any(|&i| self.anomalies[i].active_at(self.step)))
    }

    /// Observable temperature: ambient, plus fire heat while burning, plus
    /// any active anomaly sources.
    pub fn temperature(&self, c: Cell) -> f64 {
        let i = self.dims.index(c);
        let fire = if self.burn[i] == BurnState::Burning { self.params.fire_heat } else { 0.0 };
        self.base_temperature[i] + fire + self.anomaly_heat(c)
    }

    /// Put `cell` on fire as a fresh ignition.
    pub fn spawn_ignition(&mut self, cell: Cell) -> Result<IgnitionEvent> {
        if !self.dims.contains(cell) {
            return Err(Error::OutOfBounds(cell));
        }
        let i = self.dims.index(cell);
        if self.burn[i] != BurnState::Unburned {
            return Err(Error::NotUnburned(cell));
        }
        let id = self.ignitions.len() as u32;
        self.ignite(i, id, self.step);
        let ev = IgnitionEvent {
            fire_id: id,
            cell,
            ignition_step: self.step,
            detection_step: None,
            alert_step: None,
        };
        self.ignitions.push(ev.clone());
        Ok(ev)
    }

    /// Draw a Poisson number of ignitions for this step at fuel/dryness
    /// weighted locations. A draw landing on a non-unburned cell is skipped.
    pub fn spawn_random_ignitions(&mut self, rate: f64, rng: &mut SimRng) -> Vec<IgnitionEvent> {
        if rate <= 0.0 || self.step + self.params.ignition_cutoff >= self.horizon {
            return Vec::new();
        }
        let n = Poisson::new(rate).map(|d| d.sample(rng) as u64).unwrap_or(0);
        let total = *self.ignition_cdf.last().unwrap_or(&0.0);
        let mut out = Vec::new();
        for _ in 0..n {
            let u = rng.gen_range(0.0..total);
            let idx = self.ignition_cdf.partition_point(|&c| c <= u).min(self.dims.len() - 1);
            if let Ok(ev) = self.spawn_ignition(self.dims.cell(idx)) {
                out.push(ev);
            }
        }
        out
    }

    pub fn inject_anomaly(&mut self, source: AnomalySource) -> Result<()> {
        if !self.dims.contains(source.cell) {
            return Err(Error::OutOfBounds(source.cell));
        }
        if source.start > source.end || source.end > self.horizon {
            return Err(Error::AnomalyInterval {
                start: source.start,
                end: source.end,
                horizon: self.horizon,
            });
        }
        if !(source.magnitude > 0.0) {
            return Err(Error::AnomalyMagnitude(source.magnitude));
        }
        let idx = self.anomalies.len();
        self.anomalies.push(source);
        self.anomaly_index.entry(self.dims.index(source.cell)).or_default().push(idx);
        Ok(())
    }

    fn ignite(&mut self, i: usize, fire: u32, at: u64) {
        self.burn[i] = BurnState::Burning;
        self.ignited_at[i] = at;
        self.fire_of[i] = fire;
        let pos = self.burning.partition_point(|&b| b < i);
        self.burning.insert(pos, i);
    }

    /// Advance the fire by one step and return the cells whose state
    /// changed. Burning cells are visited in index order and neighbours in
    /// fixed Moore order, so the draw sequence is a function of the state.
    pub fn step_fire(&mut self, rng: &mut SimRng) -> FireDelta {
        let next = self.step + 1;
        let mut ignite: Vec<(usize, u32)> = Vec::new();
        for &b in &self.burning {
            let src = self.dims.cell(b);
            for ((dx, dy), n) in self.dims.neighbors(src) {
                let ni = self.dims.index(n);
                if self.burn[ni] != BurnState::Unburned {
                    continue;
                }
                if ignite.iter().any(|&(c, _)| c == ni) {
                    continue;
                }
                let w = wind_alignment(self.params.wind, dx, dy);
                let p = spread_probability(&self.params, w, self.fuel[ni], self.humidity[ni]);
                if rng.gen::<f64>() < p {
                    ignite.push((ni, self.fire_of[b]));
                }
            }
        }
        let mut delta = FireDelta::default();
        let duration = self.params.burn_duration.max(1);
        let (done, still): (Vec<usize>, Vec<usize>) =
            self.burning.iter().partition(|&&b| next - self.ignited_at[b] >= duration);
        for &b in &done {
            self.burn[b] = BurnState::Burned;
            delta.burned_out.push(self.dims.cell(b));
        }
        self.burning = still;
        ignite.sort_unstable();
        for (i, fire) in ignite {
            self.ignite(i, fire, next);
            delta.ignited.push(self.dims.cell(i));
        }
        self.step = next;
        delta
    }

    /// Advance the clock without touching the fire (used when fire dynamics
    /// are frozen in tests).
    pub fn tick(&mut self) {
        self.step += 1;
    }

    pub fn record_detection(&mut self, fire: u32, step: u64) {
        if let Some(ev) = self.ignitions.get_mut(fire as usize) {
            if ev.detection_step.is_none() && step >= ev.ignition_step {
                ev.detection_step = Some(step);
            }
        }
    }

    pub fn record_alert(&mut self, fire: u32, step: u64) {
        if let Some(ev) = self.ignitions.get_mut(fire as usize) {
            if ev.alert_step.is_none() {
                if let Some(d) = ev.detection_step {
                    if step >= d {
                        ev.alert_step = Some(step);
                    }
                }
            }
        }
    }
}

/// Generate a schedule of anomaly sources: Poisson arrivals at `rate` per
/// step over `[0, horizon)`, uniform locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnomalySchedule {
    pub rate: f64,
    pub burst_multiplier: f64,
    pub magnitude: [f64; 2],
    pub duration: [u64; 2],
    /// Fraction of sources that are signal noise rather than non-fire heat.
    pub noise_fraction: f64,
}

impl Default for AnomalySchedule {
    fn default() -> Self {
        AnomalySchedule {
            rate: 0.02,
            burst_multiplier: 1.0,
            magnitude: [20.0, 60.0],
            duration: [30, 120],
            noise_fraction: 0.3,
        }
    }
}

impl AnomalySchedule {
    pub fn effective_rate(&self) -> f64 {
        self.rate * self.burst_multiplier
    }

    pub fn generate(&self, dims: Dims, horizon: u64, rng: &mut SimRng) -> Vec<AnomalySource> {
        let rate = self.effective_rate();
        let mut out = Vec::new();
        if rate <= 0.0 || horizon == 0 {
            return out;
        }
        let count = Poisson::new(rate * horizon as f64).map(|d| d.sample(rng) as u64).unwrap_or(0);
        for _ in 0..count {
            let start = rng.gen_range(0..horizon);
            let dur = rng.gen_range(self.duration[0]..=self.duration[1].max(self.duration[0]));
            let end = (start + dur).min(horizon);
            let cell = Cell::new(rng.gen_range(0..dims.width), rng.gen_range(0..dims.height));
            let magnitude = rng.gen_range(self.magnitude[0]..=self.magnitude[1].max(self.magnitude[0]));
            let kind = if rng.gen_bool(self.noise_fraction.clamp(0.0, 1.0)) {
                AnomalyKind::SignalNoise
            } else {
                AnomalyKind::NonFireHeat
            };
            out.push(AnomalySource { cell, magnitude, start, end, kind });
        }
        out.sort_by(|a, b| a.start.cmp(&b.start).then(a.cell.cmp(&b.cell)));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::labeled;

    fn small(w: u32, h: u32) -> WorldParams {
        WorldParams { width: w, height: h, ..Default::default() }
    }

    #[test]
    fn logistic_at_zero_is_half() {
        let p = WorldParams { alpha_wind: 1.0, alpha_fuel: 1.0, alpha_humidity: 1.0, ..Default::default() };
        assert_eq!(spread_probability(&p, 0.0, 0.0, 0.0), 0.5);
    }

    #[test]
    fn saturated_humidity_suppresses_spread() {
        let p = WorldParams { alpha_humidity: 10.0, alpha_fuel: 1.0, alpha_wind: 1.0, ..Default::default() };
        let prob = spread_probability(&p, 0.0, 0.0, 1.0);
        assert!((prob - 4.5397868702434395e-5).abs() < 1e-12);
        let mut rng = labeled(3, "sat");
        let hits = (0..10_000).filter(|_| rng.gen::<f64>() < prob).count();
        assert!(hits <= 3, "{hits}");
    }

    #[test]
    fn wind_alignment_is_clamped_projection() {
        assert_eq!(wind_alignment([0.0, 0.0], 1, 0), 0.0);
        assert_eq!(wind_alignment([0.5, 0.0], 1, 0), 0.5);
        assert_eq!(wind_alignment([0.5, 0.0], -1, 0), -0.5);
        assert_eq!(wind_alignment([3.0, 0.0], 1, 0), 1.0);
        let d = wind_alignment([1.0, 1.0], 1, 1);
        assert!((d - 2f64.sqrt()).abs() > 0.0 && d == 1.0);
    }

    #[test]
    fn spawn_at_center_and_reject_double() {
        let mut w = GridWorld::uniform(small(100, 100), 0.5, 0.5, 3000);
        let ev = w.spawn_ignition(Cell::new(50, 50)).unwrap();
        assert_eq!(ev.cell, Cell::new(50, 50));
        assert_eq!(ev.ignition_step, 0);
        assert_eq!(w.spawn_ignition(Cell::new(50, 50)), Err(Error::NotUnburned(Cell::new(50, 50))));
        assert!(w.spawn_ignition(Cell::new(100, 0)).is_err());
    }

    #[test]
    fn burn_out_after_duration() {
        let mut p = small(3, 3);
        p.alpha_humidity = 1000.0;
        p.burn_duration = 4;
        let mut w = GridWorld::uniform(p, 0.0, 1.0, 100);
        w.spawn_ignition(Cell::new(1, 1)).unwrap();
        let mut rng = labeled(1, "t");
        for s in 1..4 {
            let d = w.step_fire(&mut rng);
            assert!(d.burned_out.is_empty(), "step {s}");
            assert_eq!(w.burn_state(Cell::new(1, 1)), BurnState::Burning);
        }
        let d = w.step_fire(&mut rng);
        assert_eq!(d.burned_out, vec![Cell::new(1, 1)]);
        assert_eq!(w.burn_state(Cell::new(1, 1)), BurnState::Burned);
        assert!(d.ignited.is_empty());
    }

    #[test]
    fn anomaly_is_additive_and_bounded_in_time() {
        let mut w = GridWorld::uniform(small(10, 10), 0.5, 0.9, 300);
        let c = Cell::new(3, 3);
        let base = w.temperature(c);
        w.inject_anomaly(AnomalySource { cell: c, magnitude: 5.0, start: 100, end: 200, kind: AnomalyKind::NonFireHeat })
            .unwrap();
        w.inject_anomaly(AnomalySource { cell: c, magnitude: 2.0, start: 150, end: 160, kind: AnomalyKind::SignalNoise })
            .unwrap();
        assert_eq!(w.anomaly_heat_at(c, 99), 0.0);
        assert_eq!(w.anomaly_heat_at(c, 100), 5.0);
        assert_eq!(w.anomaly_heat_at(c, 155), 7.0);
        assert_eq!(w.anomaly_heat_at(c, 200), 5.0);
        assert_eq!(w.anomaly_heat_at(c, 201), 0.0);
        for _ in 0..100 {
            w.tick();
        }
        assert_eq!(w.temperature(c), base + 5.0);
        assert_eq!(w.burn_state(c), BurnState::Unburned);
    }

    #[test]
    fn anomaly_outside_horizon_rejected() {
        let mut w = GridWorld::uniform(small(10, 10), 0.5, 0.9, 300);
        let bad = AnomalySource { cell: Cell::new(1, 1), magnitude: 5.0, start: 250, end: 400, kind: AnomalyKind::NonFireHeat };
        assert!(matches!(w.inject_anomaly(bad), Err(Error::AnomalyInterval { .. })));
        let inverted = AnomalySource { start: 20, end: 10, ..bad };
        assert!(w.inject_anomaly(inverted).is_err());
        let zero = AnomalySource { start: 1, end: 2, magnitude: 0.0, ..bad };
        assert!(w.inject_anomaly(zero).is_err());
    }

    #[test]
    fn identical_seed_identical_history() {
        let run = |seed| {
            let mut rng = labeled(seed, "fields");
            let mut w = GridWorld::generate(small(40, 40), 500, &mut rng);
            let mut fire = labeled(seed, "fire");
            w.spawn_ignition(Cell::new(20, 20)).unwrap();
            for _ in 0..200 {
                w.step_fire(&mut fire);
                w.spawn_random_ignitions(0.01, &mut fire);
            }
            w.burn_states().to_vec()
        };
        assert_eq!(run(5), run(5));
    }
}
