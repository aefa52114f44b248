//! Exact minimax paths on a dense 2D grid.
//!
//! The cost of a grid path is the highest node loss along it. A best-first
//! search that aggregates with `max` instead of `+` finds the optimal
//! bottleneck exactly for the discretised problem.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::Landscape;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// Nodes per axis, `(nx, ny)`.
    pub resolution: (usize, usize),
}

impl GridSpec {
    pub fn square(low: f64, high: f64, resolution: usize) -> Self {
        GridSpec { x_range: (low, high), y_range: (low, high), resolution: (resolution, resolution) }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a < b;
        if !ok(self.x_range) || !ok(self.y_range) {
            return Err(Error::InvalidConfig("grid ranges must be finite and non-degenerate".into()));
        }
        if self.resolution.0 < 3 || self.resolution.1 < 3 {
            return Err(Error::InvalidConfig("grid resolution must be at least 3 per axis".into()));
        }
        Ok(())
    }

    fn step(&self) -> (f64, f64) {
        (
            (self.x_range.1 - self.x_range.0) / (self.resolution.0 - 1) as f64,
            (self.y_range.1 - self.y_range.0) / (self.resolution.1 - 1) as f64,
        )
    }

    /// Coordinates of node `(ix, iy)`.
    pub fn point(&self, ix: usize, iy: usize) -> [f64; 2] {
        let (dx, dy) = self.step();
        [self.x_range.0 + ix as f64 * dx, self.y_range.0 + iy as f64 * dy]
    }

    /// Nearest node to `(x, y)`.
    pub fn snap(&self, x: f64, y: f64) -> Result<(usize, usize)> {
        let inside = |v: f64, (a, b): (f64, f64)| v >= a && v <= b;
        if !inside(x, self.x_range) || !inside(y, self.y_range) {
            return Err(Error::OutsideGrid { x, y });
        }
        let (dx, dy) = self.step();
        let ix = ((x - self.x_range.0) / dx).round() as usize;
        let iy = ((y - self.y_range.0) / dy).round() as usize;
        Ok((ix.min(self.resolution.0 - 1), iy.min(self.resolution.1 - 1)))
    }

    /// Diagonal of one cell.
    pub fn cell_diagonal(&self) -> f64 {
        let (dx, dy) = self.step();
        dx.hypot(dy)
    }

    /// Loss at every node, row-major with `x` varying fastest.
    pub fn evaluate<L: Landscape + ?Sized>(&self, landscape: &L) -> Result<Vec<f64>> {
        self.validate()?;
        if landscape.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: landscape.dim() });
        }
        let (nx, ny) = self.resolution;
        let rows: Vec<Vec<f64>> = (0..ny)
            .into_par_iter()
            .map(|iy| (0..nx).map(|ix| landscape.loss(&self.point(ix, iy))).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        Ok(rows.concat())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    /// Highest node loss on the optimal path.
    pub saddle_value: f64,
    /// Node indices `(ix, iy)` from start to end.
    pub nodes: Vec<(usize, usize)>,
    /// Node coordinates from start to end.
    pub points: Vec<[f64; 2]>,
}

#[derive(PartialEq)]
struct Frontier {
    cost: f64,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on cost, then on node index for determinism
        other.cost.total_cmp(&self.cost).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimax path between the grid nodes nearest to `start` and `end` over
/// 8-connected neighbours.
pub fn grid_mep<L: Landscape + ?Sized>(landscape: &L, spec: &GridSpec, start: &[f64], end: &[f64]) -> Result<GridPath> {
    for p in [start, end] {
        if p.len() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: p.len() });
        }
    }
    spec.validate()?;
    let from = spec.snap(start[0], start[1])?;
    let to = spec.snap(end[0], end[1])?;
    let losses = spec.evaluate(landscape)?;
    Ok(minimax_on_grid(spec, &losses, from, to))
}

/// Minimax search over precomputed node losses.
pub fn minimax_on_grid(spec: &GridSpec, losses: &[f64], from: (usize, usize), to: (usize, usize)) -> GridPath {
    let (nx, ny) = spec.resolution;
    let index = |(ix, iy): (usize, usize)| iy * nx + ix;
    let (source, target) = (index(from), index(to));

    let mut cost = vec![f64::INFINITY; nx * ny];
    let mut parent = vec![usize::MAX; nx * ny];
    let mut done = vec![false; nx * ny];
    let mut heap = BinaryHeap::new();
    cost[source] = losses[source];
    heap.push(Frontier { cost: cost[source], node: source });
    while let Some(Frontier { cost: c, node }) = heap.pop() {
        if done[node] {
            continue;
        }
        done[node] = true;
        if node == target {
            break;
        }
        let (ix, iy) = ((node % nx) as isize, (node / nx) as isize);
        for (ddx, ddy) in [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)] {
            let (jx, jy) = (ix + ddx, iy + ddy);
            if jx < 0 || jy < 0 || jx >= nx as isize || jy >= ny as isize {
                continue;
            }
            let next = jy as usize * nx + jx as usize;
            let through = c.max(losses[next]);
            if !done[next] && through < cost[next] {
                cost[next] = through;
                parent[next] = node;
                heap.push(Frontier { cost: through, node: next });
            }
        }
    }

    let mut nodes = vec![to];
    let mut at = target;
    while at != source {
        at = parent[at];
        nodes.push((at % nx, at / nx));
    }
    nodes.reverse();
    let points = nodes.iter().map(|&(ix, iy)| spec.point(ix, iy)).collect();
    GridPath { saddle_value: cost[target], nodes, points }
}

/// Writes `x,y,loss` for every node.
pub fn write_grid_csv<L: Landscape + ?Sized, W: Write>(landscape: &L, spec: &GridSpec, writer: W) -> Result<()> {
    let losses = spec.evaluate(landscape)?;
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["x", "y", "loss"])?;
    for iy in 0..spec.resolution.1 {
        for ix in 0..spec.resolution.0 {
            let [x, y] = spec.point(ix, iy);
            wtr.serialize((x, y, losses[iy * spec.resolution.0 + ix]))?;
        }
    }
    wtr.flush()?;
    Ok(())
}
