//! Patrol route construction.

use crate::grid::{Cell, Dims};
use crate::sensing::Rect;

/// Lane-sweep waypoints covering `zone` with a square footprint of the
/// given radius. Lanes run along x and are spaced so that adjacent
/// footprints touch; consecutive lanes alternate direction.
pub fn zone_sweep(zone: Rect, radius: u32) -> Vec<Cell> {
    let span = 2 * radius + 1;
    let lo_x = (zone.x0 + radius).min(zone.x1);
    let hi_x = zone.x1.saturating_sub(radius).max(lo_x);
    let mut lanes = Vec::new();
    let mut y = (zone.y0 + radius).min(zone.y1);
    loop {
        lanes.push(y);
        if y + radius >= zone.y1 {
            break;
        }
        let next = y + span;
        if next > zone.y1 {
            lanes.push(zone.y1.saturating_sub(radius).max(y + 1).min(zone.y1));
            break;
        }
        y = next;
    }
    lanes.dedup();
    let mut out = Vec::with_capacity(lanes.len() * 2);
    for (k, &ly) in lanes.iter().enumerate() {
        let (a, b) = if k % 2 == 0 { (lo_x, hi_x) } else { (hi_x, lo_x) };
        out.push(Cell::new(a, ly));
        if a != b {
            out.push(Cell::new(b, ly));
        }
    }
    out
}

/// A closed tour through every cell of `rect` in which consecutive cells
/// (including last to first) are king-move adjacent. Uses a comb-shaped
/// Hamiltonian cycle when one side has even length, otherwise a
/// boustrophedon ping-pong.
pub fn full_cover_cycle(rect: Rect) -> Vec<Cell> {
    let w = rect.x1 - rect.x0 + 1;
    let h = rect.y1 - rect.y0 + 1;
    if w == 1 || h == 1 {
        let fwd: Vec<Cell> = rect.cells().collect();
        return ping_pong(fwd);
    }
    if h.is_multiple_of(2) {
        comb(w, h, |x, y| Cell::new(rect.x0 + x, rect.y0 + y))
    } else if w.is_multiple_of(2) {
        comb(h, w, |x, y| Cell::new(rect.x0 + y, rect.y0 + x))
    } else {
        let mut fwd = Vec::new();
        for y in 0..h {
            for i in 0..w {
                let x = if y % 2 == 0 { i } else { w - 1 - i };
                fwd.push(Cell::new(rect.x0 + x, rect.y0 + y));
            }
        }
        ping_pong(fwd)
    }
}

fn ping_pong(fwd: Vec<Cell>) -> Vec<Cell> {
    let n = fwd.len();
    let mut out = fwd.clone();
    if n > 2 {
        out.extend(fwd[1..n - 1].iter().rev());
    }
    out
}

/// Comb cycle on a `w x h` lattice with `h` even: row 0 left to right,
/// then serpentine over columns 1.. for the remaining rows, then back up
/// column 0.
fn comb(w: u32, h: u32, map: impl Fn(u32, u32) -> Cell) -> Vec<Cell> {
    let mut out = Vec::with_capacity((w * h) as usize);
    for x in 0..w {
        out.push(map(x, 0));
    }
    for y in 1..h {
        if y % 2 == 1 {
            for x in (1..w).rev() {
                out.push(map(x, y));
            }
        } else {
            for x in 1..w {
                out.push(map(x, y));
            }
        }
    }
    for y in (1..h).rev() {
        out.push(map(0, y));
    }
    out
}

/// Split the grid into `n` horizontal bands of near-equal height.
pub fn bands(dims: Dims, n: u32) -> Vec<Rect> {
    if n == 0 {
        return Vec::new();
    }
    let n = n.min(dims.height);
    (0..n)
        .map(|i| {
            let y0 = i * dims.height / n;
            let y1 = (i + 1) * dims.height / n - 1;
            Rect { x0: 0, y0, x1: dims.width - 1, y1 }
        })
        .collect()
}

/// Steps for one UAV to cover every cell of a route of `cells` cells when
/// it advances `speed` cells per step along the tour.
pub fn sweep_period(cells: usize, speed: u32) -> Option<u64> {
    if speed == 0 {
        None
    } else {
        Some((cells as u64).div_ceil(speed as u64))
    }
}

/// Fixed patrol routes, one per UAV, independent of any belief or risk.
#[derive(Debug, Clone)]
pub struct StaticRoutes {
    pub routes: Vec<Vec<Cell>>,
    cursor: Vec<usize>,
}

impl StaticRoutes {
    /// One full-cover tour per band. With more UAVs than rows the extras
    /// share bands.
    pub fn lawnmower(dims: Dims, n: u32) -> Self {
        let b = bands(dims, n);
        let routes: Vec<Vec<Cell>> = (0..n as usize)
            .map(|i| if b.is_empty() { Vec::new() } else { full_cover_cycle(b[i % b.len()]) })
            .collect();
        let cursor = vec![0; routes.len()];
        StaticRoutes { routes, cursor }
    }

    pub fn start(&self, i: usize) -> Option<Cell> {
        self.routes.get(i).and_then(|r| r.first().copied())
    }

    pub fn position(&self, i: usize) -> Option<Cell> {
        self.routes.get(i).and_then(|r| r.get(self.cursor[i]).copied())
    }

    /// Advance UAV `i` by `speed` cells along its tour and return the new
    /// waypoint.
    pub fn advance(&mut self, i: usize, speed: u32) -> Option<Cell> {
        let r = self.routes.get(i)?;
        if r.is_empty() {
            return None;
        }
        self.cursor[i] = (self.cursor[i] + speed as usize) % r.len();
        Some(r[self.cursor[i]])
    }

    /// Re-enter the tour at the cell nearest to `pos`.
    pub fn rejoin(&mut self, i: usize, pos: Cell) {
        if let Some(r) = self.routes.get(i) {
            if let Some((k, _)) = r.iter().enumerate().min_by_key(|(k, c)| (c.chebyshev(pos), *k)) {
                self.cursor[i] = k;
            }
        }
    }
}
