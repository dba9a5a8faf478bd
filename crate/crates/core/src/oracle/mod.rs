//! Verification instruments: exact discrete 2-Wasserstein cost, the discrete
//! entropy `Σ m log(m/v)` and the incremental JKO functional.
//!
//! None of this runs inside the time loop; the transport solvers are `O(n³)`
//! and meant for small or subsampled particle sets.

mod assignment;
mod flow;

pub use assignment::solve_assignment;
pub use flow::solve_transport;

use crate::discretization::MaterialPointSet;
use crate::{Mat3, OtmError, Point, Result};

/// Default bound on the support size accepted by [`wasserstein2`].
pub const DEFAULT_CAP: usize = 2000;

/// Weighted point cloud with positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: Vec<Point>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(OtmError::InvalidMeasure(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if points.is_empty() {
            return Err(OtmError::InvalidMeasure("empty support".into()));
        }
        if let Some(k) = weights.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(OtmError::InvalidMeasure(format!("weight {k} is {}", weights[k])));
        }
        Ok(DiscreteMeasure { points, weights })
    }

    /// Unit weight on every point.
    pub fn uniform(points: Vec<Point>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0; n])
    }

    /// Diracs at the particle positions weighted by their masses.
    pub fn from_particles(mps: &MaterialPointSet) -> Result<Self> {
        Self::new(mps.positions().to_vec(), mps.masses().to_vec())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Deterministic stratified subsample of `k` points: one per block of
    /// consecutive indices, rescaled to the original total mass.
    pub fn subsample(&self, k: usize) -> DiscreteMeasure {
        let n = self.len();
        if k == 0 || k >= n {
            return self.clone();
        }
        let idx: Vec<usize> = (0..k).map(|i| (2 * i + 1) * n / (2 * k)).collect();
        let points = idx.iter().map(|&i| self.points[i]).collect();
        let mut weights: Vec<f64> = idx.iter().map(|&i| self.weights[i]).collect();
        let scale = self.total_mass() / weights.iter().sum::<f64>();
        weights.iter_mut().for_each(|w| *w *= scale);
        DiscreteMeasure { points, weights }
    }
}

/// Sparse coupling `γ_ij ≥ 0` between a source and a target measure.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    /// `(i, j, γ_ij)` with `γ_ij > 0`, sorted by `(i, j)`.
    pub entries: Vec<(usize, usize, f64)>,
}

impl TransportPlan {
    pub fn row_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.rows];
        for &(i, _, g) in &self.entries {
            s[i] += g;
        }
        s
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for &(_, j, g) in &self.entries {
            s[j] += g;
        }
        s
    }

    pub fn cost(&self, a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, g)| g * (a.points[i] - b.points[j]).norm_squared())
            .sum()
    }

    /// Largest relative marginal violation against the two measures.
    pub fn marginal_error(&self, a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
        let rel = |s: Vec<f64>, w: &[f64]| {
            s.iter()
                .zip(w)
                .map(|(s, w)| (s - w).abs() / w)
                .fold(0.0, f64::max)
        };
        rel(self.row_sums(), &a.weights).max(rel(self.col_sums(), &b.weights))
    }
}

fn check_pair(a: &DiscreteMeasure, b: &DiscreteMeasure, cap: usize) -> Result<()> {
    let size = a.len().max(b.len());
    if size > cap {
        return Err(OtmError::CapExceeded { size, cap });
    }
    let (ma, mb) = (a.total_mass(), b.total_mass());
    if (ma - mb).abs() > 1e-12 * ma.max(mb) {
        return Err(OtmError::UnequalMass(ma, mb));
    }
    Ok(())
}

fn cost_matrix(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Vec<f64> {
    let mut c = Vec::with_capacity(a.len() * b.len());
    for x in &a.points {
        for y in &b.points {
            c.push((x - y).norm_squared());
        }
    }
    c
}

fn equal_weights(a: &DiscreteMeasure, b: &DiscreteMeasure) -> bool {
    let w = a.weights[0];
    a.len() == b.len()
        && a.weights.iter().chain(&b.weights).all(|x| (x - w).abs() <= 1e-12 * w)
}

/// Squared 2-Wasserstein cost `min_γ Σ γ_ij |x_i − y_j|²` and an optimal plan.
pub fn wasserstein2(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<(f64, TransportPlan)> {
    wasserstein2_capped(a, b, DEFAULT_CAP)
}

pub fn wasserstein2_capped(a: &DiscreteMeasure, b: &DiscreteMeasure, cap: usize) -> Result<(f64, TransportPlan)> {
    if equal_weights(a, b) {
        wasserstein2_assignment(a, b, cap)
    } else {
        wasserstein2_lp(a, b, cap)
    }
}

/// Optimal assignment path; requires equal cardinalities and equal weights.
pub fn wasserstein2_assignment(a: &DiscreteMeasure, b: &DiscreteMeasure, cap: usize) -> Result<(f64, TransportPlan)> {
    check_pair(a, b, cap)?;
    if !equal_weights(a, b) {
        return Err(OtmError::InvalidMeasure(
            "assignment path needs equal cardinalities and equal weights".into(),
        ));
    }
    let n = a.len();
    let c = cost_matrix(a, b);
    let col = solve_assignment(n, &c);
    let entries: Vec<_> = col.iter().enumerate().map(|(i, &j)| (i, j, a.weights[i])).collect();
    let plan = TransportPlan {
        rows: n,
        cols: n,
        entries,
    };
    Ok((plan.cost(a, b), plan))
}

/// General transportation linear program, solved exactly.
pub fn wasserstein2_lp(a: &DiscreteMeasure, b: &DiscreteMeasure, cap: usize) -> Result<(f64, TransportPlan)> {
    check_pair(a, b, cap)?;
    let c = cost_matrix(a, b);
    let gamma = solve_transport(&a.weights, &b.weights, &c);
    let m = b.len();
    let entries: Vec<_> = gamma
        .iter()
        .enumerate()
        .filter(|(_, g)| **g > 0.0)
        .map(|(k, g)| (k / m, k % m, *g))
        .collect();
    let plan = TransportPlan {
        rows: a.len(),
        cols: m,
        entries,
    };
    Ok((plan.cost(a, b), plan))
}

/// `Σ m log(m / v)` accumulated in index order.
pub fn entropy(masses: &[f64], volumes: &[f64]) -> f64 {
    masses.iter().zip(volumes).map(|(m, v)| m * (m / v).ln()).sum()
}

/// Entropy of a particle set; rejects nonpositive volumes.
pub fn particle_entropy(mps: &MaterialPointSet) -> Result<f64> {
    if let Some(p) = mps.volumes().iter().position(|v| !(*v > 0.0)) {
        return Err(OtmError::NonPositiveVolume {
            particle: p,
            volume: mps.volumes()[p],
        });
    }
    Ok(entropy(mps.masses(), mps.volumes()))
}

/// `½ d_W²(before, after) / dt + κ S(after)`.
pub fn jko_functional(before: &MaterialPointSet, after: &MaterialPointSet, dt: f64, kappa: f64) -> Result<f64> {
    if before.len() != after.len() || before.masses() != after.masses() {
        return Err(OtmError::InvalidMeasure(
            "JKO functional compares two states of the same particles".into(),
        ));
    }
    if !(dt > 0.0) {
        return Err(OtmError::InvalidState(format!("time step must be positive, got {dt}")));
    }
    let (w2, _) = wasserstein2(&DiscreteMeasure::from_particles(before)?, &DiscreteMeasure::from_particles(after)?)?;
    Ok(0.5 * w2 / dt + kappa * particle_entropy(after)?)
}

/// Smooth test velocity field for [`entropy_variation_check`].
pub trait VelocityField {
    fn velocity(&self, x: &Point) -> Point;
    fn gradient(&self, x: &Point) -> Mat3;
    fn divergence(&self, x: &Point) -> f64 {
        self.gradient(x).trace()
    }
}

/// Affine field `ξ(x) = A x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearField {
    pub a: Mat3,
    pub b: Point,
}

impl VelocityField for LinearField {
    fn velocity(&self, x: &Point) -> Point {
        self.a * x + self.b
    }

    fn gradient(&self, _x: &Point) -> Mat3 {
        self.a
    }
}

impl VelocityField for crate::AdvectionField {
    fn velocity(&self, x: &Point) -> Point {
        crate::AdvectionField::velocity(self, x)
    }

    fn gradient(&self, x: &Point) -> Mat3 {
        crate::AdvectionField::gradient(self, x)
    }
}

/// Pushes particles by `x + hξ(x)` with volumes scaled by `det(I + h∇ξ)` and
/// returns `|(S(h) − S(0))/h + Σ m ∇·ξ(x)|`, which is `O(h)`.
pub fn entropy_variation_check(mps: &MaterialPointSet, field: &dyn VelocityField, h: f64) -> f64 {
    let s0 = entropy(mps.masses(), mps.volumes());
    let mut s1 = 0.0;
    let mut flux = 0.0;
    for p in 0..mps.len() {
        let x = mps.positions()[p];
        let m = mps.masses()[p];
        let j = (Mat3::identity() + field.gradient(&x) * h).determinant();
        s1 += m * (m / (mps.volumes()[p] * j)).ln();
        flux += m * field.divergence(&x);
    }
    ((s1 - s0) / h + flux).abs()
}
