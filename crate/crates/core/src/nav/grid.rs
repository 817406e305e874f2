use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{v2, EnvironmentState, Polygon};

pub const DIAGONAL_COST: f64 = std::f64::consts::SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub fn new(x: usize, y: usize) -> Self {
        Cell { x, y }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("start {0:?} lies outside the navigation grid")]
    StartOutside([f64; 2]),
    #[error("goal {0:?} lies outside the navigation grid")]
    GoalOutside([f64; 2]),
    #[error("start {0:?} is inside an inflated obstacle")]
    StartBlocked([f64; 2]),
    #[error("goal {0:?} is inside an inflated obstacle")]
    GoalBlocked([f64; 2]),
    #[error("no path from {0:?} to {1:?}")]
    NoPath([f64; 2], [f64; 2]),
}

/// Occupancy grid over a rectangle of the floor plane.
#[derive(Clone, Debug, PartialEq)]
pub struct NavGrid {
    origin: [f64; 2],
    cell_size: f64,
    width: usize,
    height: usize,
    blocked: Vec<bool>,
}

impl NavGrid {
    /// `blocked` is row-major with `width` cells per row.
    pub fn from_blocked(width: usize, height: usize, blocked: Vec<bool>, origin: [f64; 2], cell_size: f64) -> Self {
        assert_eq!(blocked.len(), width * height, "blocked mask size");
        assert!(cell_size > 0.0, "cell size must be positive");
        NavGrid {
            origin,
            cell_size,
            width,
            height,
            blocked,
        }
    }

    /// Rasterizes obstacles grown by `inflation`: a cell is blocked when its
    /// center is within `inflation` of any obstacle.
    pub fn from_obstacles(obstacles: &[Polygon], min: [f64; 2], max: [f64; 2], cell_size: f64, inflation: f64) -> Self {
        let width = (((max[0] - min[0]) / cell_size).ceil() as usize).max(1);
        let height = (((max[1] - min[1]) / cell_size).ceil() as usize).max(1);
        let mut grid = NavGrid::from_blocked(width, height, vec![false; width * height], min, cell_size);
        for y in 0..height {
            for x in 0..width {
                let c = v2(grid.center(Cell::new(x, y)));
                grid.blocked[y * width + x] = obstacles.iter().any(|p| p.signed_distance(c).0 <= inflation);
            }
        }
        grid
    }

    /// Grid covering the environment's obstacles, agents and the extra
    /// points given (goals), with a one meter margin.
    pub fn for_environment(env: &EnvironmentState, extra: &[[f64; 2]], cell_size: f64, inflation: f64) -> Self {
        let points = env
            .obstacles
            .iter()
            .flat_map(|p| p.vertices().iter().copied())
            .chain(env.agents.iter().map(|a| a.position))
            .chain(env.user.iter().map(|u| u.position))
            .chain(extra.iter().copied());
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for p in points {
            for k in 0..2 {
                min[k] = min[k].min(p[k]);
                max[k] = max[k].max(p[k]);
            }
        }
        if !min[0].is_finite() {
            min = [0.0; 2];
            max = [0.0; 2];
        }
        let margin = 1.0;
        NavGrid::from_obstacles(
            &env.obstacles,
            [min[0] - margin, min[1] - margin],
            [max[0] + margin, max[1] + margin],
            cell_size,
            inflation,
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn is_free(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height && !self.blocked[c.y * self.width + c.x]
    }

    fn free_at(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && self.is_free(Cell::new(x as usize, y as usize))
    }

    pub fn cell_of(&self, p: [f64; 2]) -> Option<Cell> {
        let x = ((p[0] - self.origin[0]) / self.cell_size).floor();
        let y = ((p[1] - self.origin[1]) / self.cell_size).floor();
        if x < 0.0 || y < 0.0 || x >= self.width as f64 || y >= self.height as f64 {
            return None;
        }
        Some(Cell::new(x as usize, y as usize))
    }

    pub fn center(&self, c: Cell) -> [f64; 2] {
        [
            self.origin[0] + (c.x as f64 + 0.5) * self.cell_size,
            self.origin[1] + (c.y as f64 + 0.5) * self.cell_size,
        ]
    }

    /// Free 8-connected neighbors. Diagonal moves need both orthogonal
    /// cells free, so paths never cut a blocked corner.
    pub fn neighbors(&self, c: Cell) -> impl Iterator<Item = (Cell, bool)> + '_ {
        const DIRS: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
        let (x, y) = (c.x as i64, c.y as i64);
        DIRS.iter().filter_map(move |&(dx, dy)| {
            let diagonal = dx != 0 && dy != 0;
            if !self.free_at(x + dx, y + dy) {
                return None;
            }
            if diagonal && !(self.free_at(x + dx, y) && self.free_at(x, y + dy)) {
                return None;
            }
            Some((Cell::new((x + dx) as usize, (y + dy) as usize), diagonal))
        })
    }

    /// True when every cell the segment touches is free. A segment passing
    /// exactly through a cell corner must clear both side cells too.
    pub fn segment_clear(&self, a: [f64; 2], b: [f64; 2]) -> bool {
        let to_grid = |p: [f64; 2]| {
            [
                (p[0] - self.origin[0]) / self.cell_size,
                (p[1] - self.origin[1]) / self.cell_size,
            ]
        };
        let (a, b) = (to_grid(a), to_grid(b));
        let (mut i, mut j) = (a[0].floor() as i64, a[1].floor() as i64);
        let (bi, bj) = (b[0].floor() as i64, b[1].floor() as i64);
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let axis = |d: f64, start: f64, cell: i64| -> (i64, f64, f64) {
            if d > 0.0 {
                (1, ((cell + 1) as f64 - start) / d, 1.0 / d)
            } else if d < 0.0 {
                (-1, (start - cell as f64) / -d, -1.0 / d)
            } else {
                (0, f64::INFINITY, f64::INFINITY)
            }
        };
        let (si, mut tx, ddx) = axis(dx, a[0], i);
        let (sj, mut ty, ddy) = axis(dy, a[1], j);
        let limit = (bi - i).abs() + (bj - j).abs() + 2;
        for _ in 0..=limit {
            if !self.free_at(i, j) {
                return false;
            }
            if (i, j) == (bi, bj) || tx.min(ty) > 1.0 {
                return true;
            }
            let tie = (tx - ty).abs() <= 1e-12;
            if tie {
                if !self.free_at(i + si, j) || !self.free_at(i, j + sj) {
                    return false;
                }
                i += si;
                j += sj;
                tx += ddx;
                ty += ddy;
            } else if tx < ty {
                i += si;
                tx += ddx;
            } else {
                j += sj;
                ty += ddy;
            }
        }
        self.free_at(i, j)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridPath {
    pub cells: Vec<Cell>,
    pub cost: f64,
}

fn octile(a: Cell, b: Cell) -> f64 {
    let dx = a.x.abs_diff(b.x) as f64;
    let dy = a.y.abs_diff(b.y) as f64;
    let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
    (hi - lo) + DIAGONAL_COST * lo
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    g: f64,
    cell: Cell,
}

impl Eq for Open {}

impl Ord for Open {
    // min-heap on f, preferring deeper nodes, then cell order for determinism
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f)
            .then(self.g.total_cmp(&o.g))
            .then(o.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Shortest 8-connected path (unit straight moves, sqrt 2 diagonals).
pub fn astar(grid: &NavGrid, start: Cell, goal: Cell) -> Option<GridPath> {
    if !grid.is_free(start) || !grid.is_free(goal) {
        return None;
    }
    let idx = |c: Cell| c.y * grid.width + c.x;
    let n = grid.width * grid.height;
    let mut g = vec![f64::INFINITY; n];
    let mut came: Vec<Option<(Cell, bool)>> = vec![None; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    g[idx(start)] = 0.0;
    open.push(Open {
        f: octile(start, goal),
        g: 0.0,
        cell: start,
    });
    while let Some(Open { g: gc, cell, .. }) = open.pop() {
        if closed[idx(cell)] {
            continue;
        }
        closed[idx(cell)] = true;
        if cell == goal {
            break;
        }
        for (next, diagonal) in grid.neighbors(cell) {
            let ng = gc + if diagonal { DIAGONAL_COST } else { 1.0 };
            if ng < g[idx(next)] && !closed[idx(next)] {
                g[idx(next)] = ng;
                came[idx(next)] = Some((cell, diagonal));
                open.push(Open {
                    f: ng + octile(next, goal),
                    g: ng,
                    cell: next,
                });
            }
        }
    }
    if !closed[idx(goal)] {
        return None;
    }
    let mut cells = vec![goal];
    let (mut straight, mut diagonal) = (0u32, 0u32);
    let mut c = goal;
    while let Some((prev, diag)) = came[idx(c)] {
        if diag {
            diagonal += 1;
        } else {
            straight += 1;
        }
        cells.push(prev);
        c = prev;
    }
    cells.reverse();
    Some(GridPath {
        cells,
        cost: straight as f64 + DIAGONAL_COST * diagonal as f64,
    })
}

/// Plans a collision-free polyline from `start` to `goal`. The first point
/// is `start`, the last is `goal`, and consecutive points see each other
/// through free cells.
pub fn plan_global(grid: &NavGrid, start: [f64; 2], goal: [f64; 2]) -> Result<Vec<[f64; 2]>, PlanError> {
    let s = grid.cell_of(start).ok_or(PlanError::StartOutside(start))?;
    let g = grid.cell_of(goal).ok_or(PlanError::GoalOutside(goal))?;
    if !grid.is_free(s) {
        return Err(PlanError::StartBlocked(start));
    }
    if !grid.is_free(g) {
        return Err(PlanError::GoalBlocked(goal));
    }
    let path = astar(grid, s, g).ok_or(PlanError::NoPath(start, goal))?;
    let mut raw: Vec<[f64; 2]> = path.cells.iter().map(|&c| grid.center(c)).collect();
    raw[0] = start;
    let last = raw.len() - 1;
    raw[last] = goal;
    if raw.len() == 1 {
        raw.push(goal);
    }
    // string pulling: from each kept point jump to the farthest visible one
    let mut out = vec![raw[0]];
    let mut i = 0;
    while i + 1 < raw.len() {
        let mut j = raw.len() - 1;
        while j > i + 1 && !grid.segment_clear(raw[i], raw[j]) {
            j -= 1;
        }
        out.push(raw[j]);
        i = j;
    }
    Ok(out)
}

/// Length of a polyline.
pub fn polyline_length(points: &[[f64; 2]]) -> f64 {
    points.windows(2).map(|w| (v2(w[1]) - v2(w[0])).norm()).sum()
}
