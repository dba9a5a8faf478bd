use rayon::prelude::*;

use super::{MaterialPointSet, NodeSet, SpatialHash};
use crate::maxent::LmeParams;
use crate::{OtmError, Point, Result};

/// Particle → node adjacency with the locality data the shape functions use.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    lists: Vec<Vec<usize>>,
    /// Support radius `r_p = sqrt(-ln ε_cut / β_p)`.
    radius: Vec<f64>,
    /// Distance of the farthest listed node at build time.
    gauge: Vec<f64>,
    /// Locality `β_p = γ / h_p²`.
    beta: Vec<f64>,
    /// Local nodal spacing `h_p` (mean distance to the 4 nearest nodes).
    spacing: Vec<f64>,
}

impl NeighborTable {
    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn neighbors(&self, p: usize) -> &[usize] {
        &self.lists[p]
    }

    pub fn radius(&self, p: usize) -> f64 {
        self.radius[p]
    }

    pub fn gauge(&self, p: usize) -> f64 {
        self.gauge[p]
    }

    pub fn beta(&self, p: usize) -> f64 {
        self.beta[p]
    }

    pub fn spacing(&self, p: usize) -> f64 {
        self.spacing[p]
    }
}

/// Lists, for each material point, every node within its LME support radius.
///
/// Fails with [`OtmError::Resolution`] when a particle sees fewer than four
/// nodes.
pub fn build_neighbors(nodes: &NodeSet, mps: &MaterialPointSet, lme: &LmeParams) -> Result<NeighborTable> {
    if nodes.is_empty() || mps.is_empty() {
        return Err(OtmError::InvalidState("neighbor search needs nodes and material points".into()));
    }
    let xs = &nodes.positions;
    let (lo, hi) = xs
        .iter()
        .fold((xs[0], xs[0]), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
    let extent = (hi - lo).max().max(1e-300);
    let coarse = SpatialHash::new(xs, extent / (xs.len() as f64).cbrt().max(1.0));

    let spacing: Vec<f64> = mps
        .positions()
        .par_iter()
        .map(|x| {
            let d = coarse.nearest_distances(xs, x, 4);
            d.iter().sum::<f64>() / d.len() as f64
        })
        .collect();
    let cut = lme.cutoff_factor();
    let beta: Vec<f64> = spacing.iter().map(|h| lme.gamma / (h * h)).collect();
    let radius: Vec<f64> = spacing.iter().map(|h| h * cut).collect();

    let rmax = radius.iter().copied().fold(0.0, f64::max);
    let grid = SpatialHash::new(xs, rmax.max(1e-300));
    let lists: Vec<Vec<usize>> = mps
        .positions()
        .par_iter()
        .zip(radius.par_iter())
        .map(|(x, &r)| grid.within(xs, x, r))
        .collect();

    let mut gauge = Vec::with_capacity(lists.len());
    for (p, list) in lists.iter().enumerate() {
        if list.len() < 4 {
            return Err(OtmError::Resolution {
                particle: p,
                found: list.len(),
            });
        }
        let x = mps.positions()[p];
        gauge.push(farthest(xs, list, &x));
    }
    Ok(NeighborTable {
        lists,
        radius,
        gauge,
        beta,
        spacing,
    })
}

fn farthest(xs: &[Point], list: &[usize], x: &Point) -> f64 {
    list.iter().map(|&a| (xs[a] - x).norm()).fold(0.0, f64::max)
}

/// True when some particle's farthest listed node has moved relative to its
/// build-time distance by more than `tol`, or any listed node has left the
/// support radius.
pub fn needs_rebuild(table: &NeighborTable, nodes: &NodeSet, mps: &MaterialPointSet, tol: f64) -> bool {
    let xs = &nodes.positions;
    (0..table.len()).into_par_iter().any(|p| {
        let x = mps.positions()[p];
        let list = &table.lists[p];
        let mut dmax: f64 = 0.0;
        for &a in list {
            let d = (xs[a] - x).norm();
            if d > table.radius[p] {
                return true;
            }
            dmax = dmax.max(d);
        }
        ((dmax - table.gauge[p]) / table.gauge[p]).abs() > tol
    })
}
