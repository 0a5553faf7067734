//! Observation generators for the three sensing modalities.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::grid::{Cell, Dims};
use crate::rng::SimRng;
use crate::world::{BurnState, GridWorld};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modality {
    ThermalUav,
    GroundIot,
    Satellite,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::ThermalUav, Modality::GroundIot, Modality::Satellite];

    pub fn index(self) -> usize {
        match self {
            Modality::ThermalUav => 0,
            Modality::GroundIot => 1,
            Modality::Satellite => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::ThermalUav => "thermal_uav",
            Modality::GroundIot => "ground_iot",
            Modality::Satellite => "satellite",
        }
    }
}

/// Inclusive cell rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl Rect {
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (self.y0..=self.y1).flat_map(move |y| (self.x0..=self.x1).map(move |x| Cell::new(x, y)))
    }

    pub fn contains(&self, c: Cell) -> bool {
        (self.x0..=self.x1).contains(&c.x) && (self.y0..=self.y1).contains(&c.y)
    }

    pub fn area(&self) -> usize {
        (self.x1 - self.x0 + 1) as usize * (self.y1 - self.y0 + 1) as usize
    }

    pub fn around(dims: Dims, c: Cell, radius: u32) -> Rect {
        Rect {
            x0: c.x.saturating_sub(radius),
            y0: c.y.saturating_sub(radius),
            x1: (c.x + radius).min(dims.width - 1),
            y1: (c.y + radius).min(dims.height - 1),
        }
    }
}

impl std::fmt::Display for Rect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}-{}:{}", self.x0, self.y0, self.x1, self.y1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Cell(Cell),
    Region(Rect),
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Target::Cell(c) => write!(f, "{}:{}", c.x, c.y),
            Target::Region(r) => r.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub modality: Modality,
    pub sensor_id: u32,
    pub target: Target,
    pub reading: f64,
    pub detection: bool,
    pub emitted: u64,
    pub delivered: u64,
    /// Ground truth: a burning cell lies in the target.
    pub truth_burning: bool,
    /// Ground truth: the real reading when an attacker replaced it.
    pub spoofed_from: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensingParams {
    pub footprint_radius: u32,
    pub thermal_detection: f64,
    pub thermal_anomaly_fpr: f64,
    pub ground_spacing: u32,
    pub ground_noise_std: f64,
    /// Absolute reading above which a ground sensor flags a detection.
    pub ground_threshold: f64,
    pub satellite_revisit: u64,
    pub satellite_latency: u64,
    pub satellite_region: u32,
    pub satellite_noise_std: f64,
    pub satellite_threshold: f64,
    /// Thermal readings from UAVs reach the controller over an
    /// authenticated link and cannot be spoofed.
    pub uav_links_authenticated: bool,
}

impl Default for SensingParams {
    fn default() -> Self {
        SensingParams {
            footprint_radius: 2,
            thermal_detection: 0.85,
            thermal_anomaly_fpr: 0.3,
            ground_spacing: 20,
            ground_noise_std: 1.0,
            ground_threshold: 40.0,
            satellite_revisit: 30,
            satellite_latency: 5,
            satellite_region: 10,
            satellite_noise_std: 0.2,
            satellite_threshold: 23.0,
            uav_links_authenticated: true,
        }
    }
}

/// Thermal camera sweep of the footprint around `pos`. Every footprint cell
/// yields one observation; the detection flag fires with `thermal_detection`
/// on burning cells and `thermal_anomaly_fpr` on cells with an active
/// anomaly source.
pub fn sense_thermal(
    uav_id: u32,
    pos: Cell,
    world: &GridWorld,
    params: &SensingParams,
    rng: &mut SimRng,
) -> Vec<Observation> {
    sense_thermal_with(uav_id, pos, world, params, |c| thermal_draw(world, c, params, rng))
}

/// Same sweep with the per-cell detection supplied by the caller.
pub fn sense_thermal_with(
    uav_id: u32,
    pos: Cell,
    world: &GridWorld,
    params: &SensingParams,
    mut draw: impl FnMut(Cell) -> bool,
) -> Vec<Observation> {
    let dims = world.dims();
    let step = world.step();
    dims.square(pos, params.footprint_radius)
        .map(|c| {
            let burning = world.burn_state(c) == BurnState::Burning;
            let detection = draw(c);
            Observation {
                modality: Modality::ThermalUav,
                sensor_id: uav_id,
                target: Target::Cell(c),
                reading: world.temperature(c),
                detection,
                emitted: step,
                delivered: step,
                truth_burning: burning,
                spoofed_from: None,
            }
        })
        .collect()
}

/// One thermal Bernoulli draw for a single cell.
pub fn thermal_draw(world: &GridWorld, c: Cell, params: &SensingParams, rng: &mut SimRng) -> bool {
    let burning = world.burn_state(c) == BurnState::Burning;
    let anomaly = world.has_active_anomaly(c);
    let mut hit = false;
    // Draws happen in a fixed order so the stream consumption depends only
    // on the state.
    if burning {
        hit |= rng.gen::<f64>() < params.thermal_detection;
    }
    if anomaly {
        hit |= rng.gen::<f64>() < params.thermal_anomaly_fpr;
    }
    hit
}

/// Ground sensor positions on a uniform lattice.
pub fn ground_layout(dims: Dims, spacing: u32) -> Vec<Cell> {
    if spacing == 0 {
        return Vec::new();
    }
    let off = spacing / 2;
    let mut out = Vec::new();
    let mut y = off;
    while y < dims.height {
        let mut x = off;
        while x < dims.width {
            out.push(Cell::new(x, y));
            x += spacing;
        }
        y += spacing;
    }
    out
}

pub fn sense_ground(
    sensors: &[Cell],
    world: &GridWorld,
    params: &SensingParams,
    rng: &mut SimRng,
) -> Vec<Observation> {
    let step = world.step();
    let noise = Normal::new(0.0, params.ground_noise_std.max(0.0)).expect("finite std");
    sensors
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let temp = world.temperature(c);
            let reading = if params.ground_noise_std > 0.0 { temp + noise.sample(rng) } else { temp };
            Observation {
                modality: Modality::GroundIot,
                sensor_id: i as u32,
                target: Target::Cell(c),
                reading,
                detection: reading > params.ground_threshold,
                emitted: step,
                delivered: step,
                truth_burning: world.burn_state(c) == BurnState::Burning,
                spoofed_from: None,
            }
        })
        .collect()
}

/// Satellite tiling of the grid into square regions.
pub fn satellite_regions(dims: Dims, size: u32) -> Vec<Rect> {
    let size = size.max(1);
    let mut out = Vec::new();
    let mut y = 0;
    while y < dims.height {
        let mut x = 0;
        while x < dims.width {
            out.push(Rect {
                x0: x,
                y0: y,
                x1: (x + size - 1).min(dims.width - 1),
                y1: (y + size - 1).min(dims.height - 1),
            });
            x += size;
        }
        y += size;
    }
    out
}

/// Regional mean-temperature summaries on revisit steps; each summary is
/// delivered after a uniform delay in `[0, satellite_latency]`.
pub fn sense_satellite(
    regions: &[Rect],
    world: &GridWorld,
    params: &SensingParams,
    rng: &mut SimRng,
) -> Vec<Observation> {
    let step = world.step();
    if params.satellite_revisit == 0 || !step.is_multiple_of(params.satellite_revisit) {
        return Vec::new();
    }
    let noise = Normal::new(0.0, params.satellite_noise_std.max(0.0)).expect("finite std");
    regions
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut sum = 0.0;
            let mut burning = false;
            for c in r.cells() {
                sum += world.temperature(c);
                burning |= world.burn_state(c) == BurnState::Burning;
            }
            let mut reading = sum / r.area() as f64;
            if params.satellite_noise_std > 0.0 {
                reading += noise.sample(rng);
            }
            let delay = rng.gen_range(0..=params.satellite_latency);
            Observation {
                modality: Modality::Satellite,
                sensor_id: i as u32,
                target: Target::Region(*r),
                reading,
                detection: reading > params.satellite_threshold,
                emitted: step,
                delivered: step + delay,
                truth_burning: burning,
                spoofed_from: None,
            }
        })
        .collect()
}
