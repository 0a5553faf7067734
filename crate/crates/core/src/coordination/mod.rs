//! Hierarchical coordination: zone partition, the greedy meta-controller,
//! and local UAV movement.

pub mod allocation;
pub mod patrol;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{step_toward, Cell, Dims};
use crate::sensing::Rect;

pub use allocation::{allocate_zones, objective, ZoneScore};
pub use patrol::{full_cover_cycle, sweep_period, zone_sweep, StaticRoutes};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    Proposed,
    AdaptiveNogov,
    Static,
}

impl Policy {
    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Proposed => "proposed",
            Policy::AdaptiveNogov => "adaptive-nogov",
            Policy::Static => "static",
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Policy::Proposed),
            "adaptive-nogov" => Ok(Policy::AdaptiveNogov),
            "static" => Ok(Policy::Static),
            other => Err(Error::config("policy", format!("unknown policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Patrol,
    Verify,
    Return,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyTask {
    pub event_id: u64,
    pub target: Cell,
    pub dispatched: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Uav {
    pub id: u32,
    pub pos: Cell,
    pub speed: u32,
    pub battery: f64,
    pub zone: Option<usize>,
    pub mode: Mode,
    pub route: VecDeque<Cell>,
    pub task: Option<VerifyTask>,
    pub distance: u64,
    pub consumed: f64,
}

impl Uav {
    pub fn new(id: u32, pos: Cell, speed: u32) -> Self {
        Uav {
            id,
            pos,
            speed,
            battery: 1.0,
            zone: None,
            mode: Mode::Patrol,
            route: VecDeque::new(),
            task: None,
            distance: 0,
            consumed: 0.0,
        }
    }

    /// Patrolling with nothing left to sweep.
    pub fn needs_zone(&self) -> bool {
        self.mode == Mode::Patrol && self.route.is_empty()
    }

    pub fn available_for_verification(&self, reserve: f64) -> bool {
        self.mode == Mode::Patrol && self.battery > reserve
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UavParams {
    pub count: u32,
    pub speed: u32,
    pub drain: f64,
    pub reserve: f64,
    /// Recharge base; `None` puts it at the grid centre.
    pub base: Option<[u32; 2]>,
    pub recharge: bool,
}

impl Default for UavParams {
    fn default() -> Self {
        UavParams { count: 10, speed: 1, drain: 0.0005, reserve: 0.05, base: None, recharge: true }
    }
}

impl UavParams {
    pub fn base_cell(&self, dims: Dims) -> Cell {
        match self.base {
            Some([x, y]) => dims.clamp(x as i64, y as i64),
            None => Cell::new(dims.width / 2, dims.height / 2),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    pub distance: u64,
    /// Verification tasks abandoned because the UAV had to return.
    pub aborted: Vec<VerifyTask>,
}

/// Advance every UAV by one step. Verify-mode UAVs head for their target,
/// patrol-mode UAVs follow their waypoint queue, and a battery at or below
/// the reserve forces a return to base where the battery is refilled.
pub fn step_uavs(uavs: &mut [Uav], params: &UavParams, dims: Dims) -> StepReport {
    let base = params.base_cell(dims);
    let mut report = StepReport::default();
    for u in uavs.iter_mut() {
        if u.mode != Mode::Return && u.battery <= params.reserve {
            if let Some(t) = u.task.take() {
                report.aborted.push(t);
            }
            u.mode = Mode::Return;
            u.zone = None;
            u.route.clear();
        }
        let start = u.pos;
        match u.mode {
            Mode::Return => u.pos = step_toward(u.pos, base, u.speed),
            Mode::Verify => {
                if let Some(t) = u.task {
                    u.pos = step_toward(u.pos, t.target, u.speed);
                }
            }
            Mode::Patrol => {
                let mut budget = u.speed;
                while budget > 0 {
                    let Some(&wp) = u.route.front() else { break };
                    let d = u.pos.chebyshev(wp);
                    if d <= budget {
                        u.pos = wp;
                        budget -= d;
                        u.route.pop_front();
                    } else {
                        u.pos = step_toward(u.pos, wp, budget);
                        budget = 0;
                    }
                }
            }
        }
        let moved = start.chebyshev(u.pos) as u64;
        u.distance += moved;
        report.distance += moved;
        let drain = params.drain.min(u.battery);
        u.battery = (u.battery - params.drain).max(0.0);
        u.consumed += drain;
        if u.mode == Mode::Return && u.pos == base && params.recharge {
            u.battery = 1.0;
            u.mode = Mode::Patrol;
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub id: usize,
    pub rect: Rect,
}

/// Square tiling of the grid; edge tiles are clipped.
pub fn make_zones(dims: Dims, tile: u32) -> Vec<Zone> {
    crate::sensing::satellite_regions(dims, tile)
        .into_iter()
        .enumerate()
        .map(|(id, rect)| Zone { id, rect })
        .collect()
}

/// Every cell belongs to exactly one zone.
pub fn validate_partition(zones: &[Zone], dims: Dims) -> Result<()> {
    if zones.is_empty() {
        return Err(Error::NoZones);
    }
    let mut owner = vec![usize::MAX; dims.len()];
    for z in zones {
        if !dims.contains(Cell::new(z.rect.x1, z.rect.y1)) || z.rect.x0 > z.rect.x1 || z.rect.y0 > z.rect.y1 {
            return Err(Error::BadPartition(format!("zone {} leaves the grid", z.id)));
        }
        for c in z.rect.cells() {
            let i = dims.index(c);
            if owner[i] != usize::MAX {
                return Err(Error::BadPartition(format!("cell {c} in zones {} and {}", owner[i], z.id)));
            }
            owner[i] = z.id;
        }
    }
    if let Some(i) = owner.iter().position(|&o| o == usize::MAX) {
        return Err(Error::BadPartition(format!("cell {} uncovered", dims.cell(i))));
    }
    Ok(())
}

/// Per-cell last-seen steps; zone coverage gain is the mean over member
/// cells of `1 - exp(-lambda * steps_since_seen)`.
#[derive(Debug, Clone)]
pub struct CoverageTracker {
    dims: Dims,
    last_seen: Vec<Option<u64>>,
    pub lambda: f64,
    /// `1 - exp(-lambda * k)` for small `k`.
    table: Vec<f64>,
}

impl CoverageTracker {
    pub fn new(dims: Dims, lambda: f64) -> Self {
        let table = (0..4096).map(|k| 1.0 - (-lambda * k as f64).exp()).collect();
        CoverageTracker { dims, last_seen: vec![None; dims.len()], lambda, table }
    }

    pub fn mark(&mut self, c: Cell, step: u64) {
        let i = self.dims.index(c);
        self.last_seen[i] = Some(step);
    }

    pub fn mark_footprint(&mut self, pos: Cell, radius: u32, step: u64) {
        for c in self.dims.square(pos, radius) {
            self.mark(c, step);
        }
    }

    pub fn last_seen(&self, c: Cell) -> Option<u64> {
        self.last_seen[self.dims.index(c)]
    }

    pub fn gain(&self, rect: &Rect, now: u64) -> f64 {
        let mut sum = 0.0;
        for c in rect.cells() {
            sum += match self.last_seen[self.dims.index(c)] {
                None => 1.0,
                Some(s) => {
                    let k = (now - s) as usize;
                    match self.table.get(k) {
                        Some(&g) => g,
                        None => 1.0 - (-self.lambda * k as f64).exp(),
                    }
                }
            };
        }
        sum / rect.area() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_move_toward_target() {
        let mut u = [Uav::new(0, Cell::new(0, 0), 1)];
        u[0].mode = Mode::Verify;
        u[0].task = Some(VerifyTask { event_id: 1, target: Cell::new(3, 0), dispatched: 0 });
        step_uavs(&mut u, &UavParams::default(), Dims::new(10, 10));
        assert_eq!(u[0].pos, Cell::new(1, 0));
    }

    #[test]
    fn zero_velocity_never_moves() {
        let dims = Dims::new(10, 10);
        let mut u = [Uav::new(0, Cell::new(2, 2), 0)];
        u[0].route.push_back(Cell::new(9, 9));
        let params = UavParams { drain: 0.0, ..Default::default() };
        for _ in 0..100 {
            step_uavs(&mut u, &params, dims);
            assert_eq!(u[0].pos, Cell::new(2, 2));
        }
    }

    #[test]
    fn battery_floors_at_zero_and_triggers_return() {
        let dims = Dims::new(10, 10);
        let params = UavParams { drain: 0.001, reserve: 0.1, base: Some([9, 9]), ..Default::default() };
        let mut u = [Uav::new(0, Cell::new(0, 0), 0)];
        let mut return_at = None;
        for s in 0..3000 {
            step_uavs(&mut u, &params, dims);
            assert!(u[0].battery >= 0.0);
            if return_at.is_none() && u[0].mode == Mode::Return {
                return_at = Some(s);
            }
        }
        assert_eq!(u[0].battery, 0.0);
        assert_eq!(u[0].mode, Mode::Return);
        // reserve 0.1 is crossed after 900 drains of 0.001
        let r = return_at.unwrap();
        assert!((899..=901).contains(&r), "{r}");
    }

    #[test]
    fn return_recharges_at_base() {
        let dims = Dims::new(10, 10);
        let params = UavParams { drain: 0.01, reserve: 0.5, base: Some([3, 0]), ..Default::default() };
        let mut u = [Uav::new(0, Cell::new(0, 0), 1)];
        u[0].battery = 0.5;
        u[0].mode = Mode::Verify;
        u[0].task = Some(VerifyTask { event_id: 9, target: Cell::new(0, 5), dispatched: 0 });
        let r = step_uavs(&mut u, &params, dims);
        assert_eq!(r.aborted.len(), 1);
        step_uavs(&mut u, &params, dims);
        step_uavs(&mut u, &params, dims);
        assert_eq!(u[0].pos, Cell::new(3, 0));
        assert_eq!(u[0].battery, 1.0);
        assert_eq!(u[0].mode, Mode::Patrol);
    }

    #[test]
    fn movement_respects_velocity() {
        let dims = Dims::new(50, 50);
        let mut u = [Uav::new(0, Cell::new(0, 0), 3)];
        u[0].route.extend(zone_sweep(Rect { x0: 20, y0: 20, x1: 39, y1: 39 }, 2));
        let mut prev = u[0].pos;
        for _ in 0..200 {
            step_uavs(&mut u, &UavParams::default(), dims);
            assert!(prev.chebyshev(u[0].pos) <= 3);
            prev = u[0].pos;
        }
        assert!(u[0].route.is_empty());
    }

    #[test]
    fn default_tiling_partitions() {
        let dims = Dims::new(100, 100);
        let z = make_zones(dims, 10);
        assert_eq!(z.len(), 100);
        validate_partition(&z, dims).unwrap();
        let z = make_zones(Dims::new(25, 13), 10);
        validate_partition(&z, Dims::new(25, 13)).unwrap();
        let mut bad = make_zones(dims, 10);
        bad.pop();
        assert!(validate_partition(&bad, dims).is_err());
        let mut dup = make_zones(dims, 10);
        dup[1].rect = dup[0].rect;
        assert!(validate_partition(&dup, dims).is_err());
    }

    #[test]
    fn coverage_gain_decays_with_staleness() {
        let dims = Dims::new(10, 10);
        let mut t = CoverageTracker::new(dims, 0.05);
        let r = Rect { x0: 0, y0: 0, x1: 4, y1: 4 };
        assert_eq!(t.gain(&r, 0), 1.0);
        for c in r.cells() {
            t.mark(c, 10);
        }
        assert_eq!(t.gain(&r, 10), 0.0);
        let g20 = t.gain(&r, 30);
        assert!((g20 - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    }
}
