//! Local max-entropy (LME) shape functions.
//!
//! At a point `x` with neighbor nodes `x_a` the shape functions are
//!
//! ```text
//! N_a(x) = exp(-β|x - x_a|² + λ·(x - x_a)) / Z(x, λ)
//! ```
//!
//! where `λ` minimizes `log Z`, i.e. solves the first-order consistency
//! condition `r(λ) = Σ N_a (x - x_a) = 0`. The minimization is carried out with
//! a damped Newton iteration on the dual; at the root the gradients are
//! `∇N_a = N_a J⁻¹ (x_a - x)` with `J = Σ N_a (x_a - x) ⊗ (x_a - x)`.
//!
//! The solver is written for any spatial dimension so that the one-dimensional
//! restriction can be exercised directly.

use nalgebra::{SMatrix, SVector};
use rayon::prelude::*;

use crate::discretization::{MaterialPointSet, NeighborTable, NodeSet};
use crate::{OtmError, Point, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LmeParams {
    /// Dimensionless locality `β h²`.
    pub gamma: f64,
    /// Newton stops when `|r| <= newton_tol · h`.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    /// Support truncation level.
    pub eps_cut: f64,
}

impl Default for LmeParams {
    fn default() -> Self {
        LmeParams {
            gamma: 1.8,
            newton_tol: 1e-12,
            max_newton_iters: 50,
            eps_cut: 1e-6,
        }
    }
}

impl LmeParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| {
            Err(OtmError::ConfigValue {
                key: key.into(),
                message: msg,
            })
        };
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("lme.gamma", format!("must be positive, got {}", self.gamma));
        }
        if !(self.newton_tol > 0.0) {
            return bad("lme.newton_tol", format!("must be positive, got {}", self.newton_tol));
        }
        if self.max_newton_iters == 0 {
            return bad("lme.max_newton_iters", "must be at least 1".into());
        }
        if !(self.eps_cut > 0.0 && self.eps_cut <= 1e-3) {
            return bad("lme.eps_cut", format!("must lie in (0, 1e-3], got {}", self.eps_cut));
        }
        Ok(())
    }

    /// Support radius in units of the local spacing: `sqrt(-ln ε_cut / γ)`.
    pub fn cutoff_factor(&self) -> f64 {
        (-self.eps_cut.ln() / self.gamma).sqrt()
    }
}

/// Shape functions at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct LmeSolution<const D: usize> {
    pub values: Vec<f64>,
    pub gradients: Vec<SVector<f64, D>>,
    pub lambda: SVector<f64, D>,
    pub iterations: usize,
    /// Residual norm after each Newton iterate (including the starting point).
    pub residual_history: Vec<f64>,
}

/// Solves the LME dual at `x` for nodes `xs` in `D` dimensions.
///
/// `h` is the length scale for the stopping test.
pub fn solve_lme<const D: usize>(
    xs: &[SVector<f64, D>],
    x: &SVector<f64, D>,
    beta: f64,
    h: f64,
    params: &LmeParams,
) -> Result<LmeSolution<D>> {
    if xs.len() < D + 1 {
        return Err(OtmError::SingularHessian);
    }
    let d: Vec<SVector<f64, D>> = xs.iter().map(|xa| x - xa).collect();

    // Degenerate (e.g. coplanar) clouds have a rank-deficient second moment.
    let mut cov = SMatrix::<f64, D, D>::zeros();
    for da in &d {
        cov += da * da.transpose();
    }
    let eig = sym_eigenvalues(&cov);
    let (emin, emax) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    if !(emax > 0.0) || emin <= 1e-12 * emax {
        return Err(OtmError::SingularHessian);
    }

    let tol = params.newton_tol * h;
    let mut lambda = SVector::<f64, D>::zeros();
    let mut state = LmeState::new(&d, beta, &lambda);
    let mut history = vec![state.r.norm()];
    let mut iterations = 0;
    while state.r.norm() > tol {
        if iterations >= params.max_newton_iters {
            return Err(OtmError::NewtonDivergence {
                iterations,
                residual: state.r.norm(),
            });
        }
        iterations += 1;
        let hess = regularize(state.hessian());
        let step = hess
            .cholesky()
            .map(|c| c.solve(&(-state.r)))
            .ok_or(OtmError::SingularHessian)?;
        let r0 = state.r.norm();
        let mut t = 1.0;
        let mut next = LmeState::new(&d, beta, &(lambda + step));
        let mut halvings = 0;
        while !(next.r.norm() < r0) && halvings < 20 {
            t *= 0.5;
            halvings += 1;
            next = LmeState::new(&d, beta, &(lambda + step * t));
        }
        if !(next.r.norm() < r0) {
            // No decrease along the Newton direction: the root is unreachable
            // (x outside the hull) or already met to rounding.
            if r0 <= 1e3 * tol {
                break;
            }
            return Err(OtmError::NewtonDivergence {
                iterations,
                residual: r0,
            });
        }
        lambda += step * t;
        state = next;
        history.push(state.r.norm());
    }

    // Gradients from the converged state: ∇N_a = N_a J⁻¹ (x_a - x).
    let mut j = SMatrix::<f64, D, D>::zeros();
    for (p, da) in state.p.iter().zip(&d) {
        j += da * da.transpose() * *p;
    }
    let jinv = regularize(j).try_inverse().ok_or(OtmError::SingularHessian)?;
    let gradients = state.p.iter().zip(&d).map(|(p, da)| jinv * (-da) * *p).collect();
    Ok(LmeSolution {
        values: state.p,
        gradients,
        lambda,
        iterations,
        residual_history: history,
    })
}

struct LmeState<const D: usize> {
    p: Vec<f64>,
    r: SVector<f64, D>,
    d: Vec<SVector<f64, D>>,
}

impl<const D: usize> LmeState<D> {
    fn new(d: &[SVector<f64, D>], beta: f64, lambda: &SVector<f64, D>) -> Self {
        let f: Vec<f64> = d
            .iter()
            .map(|da| -beta * da.norm_squared() + lambda.dot(da))
            .collect();
        let fmax = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut p: Vec<f64> = f.iter().map(|fa| (fa - fmax).exp()).collect();
        let z: f64 = p.iter().sum();
        p.iter_mut().for_each(|pa| *pa /= z);
        let mut r = SVector::<f64, D>::zeros();
        for (pa, da) in p.iter().zip(d) {
            r += da * *pa;
        }
        LmeState { p, r, d: d.to_vec() }
    }

    fn hessian(&self) -> SMatrix<f64, D, D> {
        let mut h = SMatrix::<f64, D, D>::zeros();
        for (pa, da) in self.p.iter().zip(&self.d) {
            h += da * da.transpose() * *pa;
        }
        h - self.r * self.r.transpose()
    }
}

fn sym_eigenvalues<const D: usize>(m: &SMatrix<f64, D, D>) -> Vec<f64> {
    nalgebra::DMatrix::from_column_slice(D, D, m.as_slice())
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect()
}

/// Adds `1e-14 · tr(J) · I` when the condition number exceeds 1e12.
fn regularize<const D: usize>(j: SMatrix<f64, D, D>) -> SMatrix<f64, D, D> {
    let eig = sym_eigenvalues(&j);
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    if lo <= 0.0 || hi / lo > 1e12 {
        j + SMatrix::<f64, D, D>::identity() * (1e-14 * j.trace())
    } else {
        j
    }
}

/// Shape functions and gradients at one point in 3-D.
pub fn evaluate_point(
    neighbors: &[Point],
    x: &Point,
    beta: f64,
    params: &LmeParams,
) -> Result<(Vec<f64>, Vec<Point>, Point)> {
    let h = (params.gamma / beta).sqrt();
    let s = solve_lme::<3>(neighbors, x, beta, h, params)?;
    Ok((s.values, s.gradients, s.lambda))
}

/// Per-particle shape function values and gradients over the particle's
/// retained neighbor nodes, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeTable {
    offsets: Vec<usize>,
    nodes: Vec<usize>,
    values: Vec<f64>,
    gradients: Vec<Point>,
    /// Newton iterations summed over particles.
    pub newton_iterations: usize,
    /// Largest Newton iteration count at a single particle.
    pub newton_max: usize,
}

impl ShapeTable {
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nodes(&self, p: usize) -> &[usize] {
        &self.nodes[self.offsets[p]..self.offsets[p + 1]]
    }

    pub fn values(&self, p: usize) -> &[f64] {
        &self.values[self.offsets[p]..self.offsets[p + 1]]
    }

    pub fn gradients(&self, p: usize) -> &[Point] {
        &self.gradients[self.offsets[p]..self.offsets[p + 1]]
    }

    /// `(node, N_a, ∇N_a)` triples for particle `p`.
    pub fn entries(&self, p: usize) -> impl Iterator<Item = (usize, f64, &Point)> + '_ {
        self.nodes(p)
            .iter()
            .zip(self.values(p))
            .zip(self.gradients(p))
            .map(|((&a, &n), g)| (a, n, g))
    }

    /// Builds a table from explicit per-particle entries.
    pub fn from_entries(entries: Vec<(Vec<usize>, Vec<f64>, Vec<Point>)>) -> Self {
        let mut t = ShapeTable {
            offsets: vec![0],
            nodes: Vec::new(),
            values: Vec::new(),
            gradients: Vec::new(),
            newton_iterations: 0,
            newton_max: 0,
        };
        for (n, v, g) in entries {
            assert!(n.len() == v.len() && v.len() == g.len());
            t.nodes.extend(n);
            t.values.extend(v);
            t.gradients.extend(g);
            t.offsets.push(t.nodes.len());
        }
        t
    }

    /// Checks partition of unity, linear reproduction, both gradient
    /// consistency conditions and `N_a ∈ [0, 1]` at particle `p`.
    pub fn check_consistency(&self, p: usize, x: &Point, nodes: &NodeSet, h: f64) -> Result<()> {
        let mut sum = 0.0;
        let mut lin = Point::zeros();
        let mut gsum = Point::zeros();
        let mut glin = crate::Mat3::zeros();
        for (a, n, g) in self.entries(p) {
            if !(-1e-15..=1.0 + 1e-15).contains(&n) {
                return Err(consistency(p, format!("shape function value {n} outside [0, 1]")));
            }
            let xa = nodes.positions[a];
            sum += n;
            lin += xa * n;
            gsum += g;
            glin += xa * g.transpose();
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(consistency(p, format!("partition of unity off by {:e}", sum - 1.0)));
        }
        if (lin - x).norm() > 1e-10 * h {
            return Err(consistency(p, format!("linear reproduction off by {:e}", (lin - x).norm())));
        }
        if gsum.norm() > 1e-8 / h {
            return Err(consistency(p, format!("gradient sum {:e}", gsum.norm())));
        }
        let dev = (glin - crate::Mat3::identity()).abs().max();
        if dev > 1e-8 {
            return Err(consistency(p, format!("gradient reproduction off by {dev:e}")));
        }
        Ok(())
    }
}

fn consistency(p: usize, msg: String) -> OtmError {
    OtmError::InvalidState(format!("shape functions at particle {p}: {msg}"))
}

/// Evaluates the shape functions at every material point, drops entries below
/// `ε_cut`, and re-solves on the retained nodes so the truncated set is again
/// exactly consistent.
pub fn build_shape_table(
    nodes: &NodeSet,
    mps: &MaterialPointSet,
    table: &NeighborTable,
    params: &LmeParams,
) -> Result<ShapeTable> {
    let per: Vec<Result<(Vec<usize>, LmeSolution<3>, usize)>> = (0..mps.len())
        .into_par_iter()
        .map(|p| particle_shape(nodes, mps, table, params, p).map_err(|e| e.at_particle(p)))
        .collect();
    let mut t = ShapeTable {
        offsets: Vec::with_capacity(mps.len() + 1),
        nodes: Vec::new(),
        values: Vec::new(),
        gradients: Vec::new(),
        newton_iterations: 0,
        newton_max: 0,
    };
    t.offsets.push(0);
    for r in per {
        let (idx, sol, iters) = r?;
        t.nodes.extend(idx);
        t.values.extend(sol.values);
        t.gradients.extend(sol.gradients);
        t.offsets.push(t.nodes.len());
        t.newton_iterations += iters;
        t.newton_max = t.newton_max.max(iters);
    }
    for p in 0..mps.len() {
        t.check_consistency(p, &mps.positions()[p], nodes, table.spacing(p))?;
    }
    Ok(t)
}

fn particle_shape(
    nodes: &NodeSet,
    mps: &MaterialPointSet,
    table: &NeighborTable,
    params: &LmeParams,
    p: usize,
) -> Result<(Vec<usize>, LmeSolution<3>, usize)> {
    let x = mps.positions()[p];
    let beta = table.beta(p);
    let h = table.spacing(p);
    let idx = table.neighbors(p).to_vec();
    let xs: Vec<Point> = idx.iter().map(|&a| nodes.positions[a]).collect();
    let full = solve_lme::<3>(&xs, &x, beta, h, params)?;
    let (kept, _) = truncate(&full.values, params.eps_cut);
    if kept.len() == idx.len() || kept.len() < 4 {
        let it = full.iterations;
        return Ok((idx, full, it));
    }
    let sub_idx: Vec<usize> = kept.iter().map(|&k| idx[k]).collect();
    let sub_xs: Vec<Point> = kept.iter().map(|&k| xs[k]).collect();
    match solve_lme::<3>(&sub_xs, &x, beta, h, params) {
        Ok(sub) => {
            let it = full.iterations + sub.iterations;
            Ok((sub_idx, sub, it))
        }
        // A truncated cloud can lose the particle from its hull; keep the full set.
        Err(_) => {
            let it = full.iterations;
            Ok((idx, full, it))
        }
    }
}

/// Indices with `N_a >= eps` and the dropped mass `Σ_{N_a < eps} N_a`.
pub fn truncate(values: &[f64], eps: f64) -> (Vec<usize>, f64) {
    let mut kept = Vec::with_capacity(values.len());
    let mut dropped = 0.0;
    for (k, &v) in values.iter().enumerate() {
        if v >= eps {
            kept.push(k);
        } else {
            dropped += v;
        }
    }
    (kept, dropped)
}
