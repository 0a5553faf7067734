use serde::{Deserialize, Serialize};

/// Integer cell coordinates, `x` along columns and `y` along rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: u32,
    pub y: u32,
}

impl Cell {
    pub const fn new(x: u32, y: u32) -> Self {
        Cell { x, y }
    }

    /// Chebyshev (king-move) distance.
    pub fn chebyshev(self, other: Cell) -> u32 {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// Immutable grid dimensions with row-major indexing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub width: u32,
    pub height: u32,
}

pub const MOORE: [(i32, i32); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

impl Dims {
    pub const fn new(width: u32, height: u32) -> Self {
        Dims { width, height }
    }

    pub fn len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    #[inline]
    pub fn index(&self, c: Cell) -> usize {
        c.y as usize * self.width as usize + c.x as usize
    }

    #[inline]
    pub fn cell(&self, idx: usize) -> Cell {
        Cell::new((idx % self.width as usize) as u32, (idx / self.width as usize) as u32)
    }

    pub fn offset(&self, c: Cell, dx: i32, dy: i32) -> Option<Cell> {
        let x = c.x as i64 + dx as i64;
        let y = c.y as i64 + dy as i64;
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            None
        } else {
            Some(Cell::new(x as u32, y as u32))
        }
    }

    /// Moore neighbours of `c` that lie inside the grid, with their offsets.
    pub fn neighbors(&self, c: Cell) -> impl Iterator<Item = ((i32, i32), Cell)> + '_ {
        MOORE
            .iter()
            .filter_map(move |&(dx, dy)| self.offset(c, dx, dy).map(|n| ((dx, dy), n)))
    }

    /// Cells within Chebyshev `radius` of `center`, clipped to the grid, in
    /// row-major order.
    pub fn square(&self, center: Cell, radius: u32) -> impl Iterator<Item = Cell> {
        let x0 = center.x.saturating_sub(radius);
        let y0 = center.y.saturating_sub(radius);
        let x1 = (center.x + radius).min(self.width.saturating_sub(1));
        let y1 = (center.y + radius).min(self.height.saturating_sub(1));
        (y0..=y1).flat_map(move |y| (x0..=x1).map(move |x| Cell::new(x, y)))
    }

    /// Clamp an arbitrary coordinate pair into the grid.
    pub fn clamp(&self, x: i64, y: i64) -> Cell {
        Cell::new(
            x.clamp(0, self.width as i64 - 1) as u32,
            y.clamp(0, self.height as i64 - 1) as u32,
        )
    }
}

/// Move `from` toward `to` by at most `speed` cells in Chebyshev metric,
/// taking the diagonal first.
pub fn step_toward(from: Cell, to: Cell, speed: u32) -> Cell {
    let mv = |a: u32, b: u32| -> u32 {
        if a < b {
            a + (b - a).min(speed)
        } else {
            a - (a - b).min(speed)
        }
    };
    Cell::new(mv(from.x, to.x), mv(from.y, to.y))
}
