use rayon::prelude::*;

use super::assembly::{assemble_consistent_mass, assemble_flux, assemble_lumped_mass, conjugate_gradient};
use crate::discretization::{MaterialPointSet, NeighborTable, NodeSet};
use crate::maxent::ShapeTable;
use crate::{Domain, Mat3, OtmError, Point, Result};

/// Minimum distance between two nodes that share a particle neighborhood.
pub fn min_shared_spacing(nodes: &NodeSet, table: &NeighborTable) -> f64 {
    let xs = &nodes.positions;
    (0..table.len())
        .into_par_iter()
        .map(|p| {
            let list = table.neighbors(p);
            let mut d2 = f64::INFINITY;
            for (i, &a) in list.iter().enumerate() {
                for &b in &list[i + 1..] {
                    d2 = d2.min((xs[a] - xs[b]).norm_squared());
                }
            }
            d2
        })
        .reduce(|| f64::INFINITY, f64::min)
        .sqrt()
}

/// Explicit diffusive time step `safety · Δx_min² / κ`; infinite for `κ = 0`.
pub fn stable_dt(nodes: &NodeSet, table: &NeighborTable, kappa: f64, safety: f64) -> f64 {
    if kappa == 0.0 {
        return f64::INFINITY;
    }
    let dx = min_shared_spacing(nodes, table);
    safety * dx * dx / kappa
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiffusionReport {
    /// Nodes without particle support, held fixed.
    pub frozen: usize,
    /// Nodes moved outside the domain and projected back.
    pub projected: usize,
    pub cg_iterations: usize,
    /// Largest nodal speed `|M⁻¹ f|_a`.
    pub max_speed: f64,
}

/// Nodal velocities `v = M⁻¹ f` with either the lumped or the consistent mass.
/// Nodes with zero lumped mass get zero velocity and are flagged in `frozen`.
pub fn nodal_velocities(
    shape: &ShapeTable,
    mps: &MaterialPointSet,
    kappa: f64,
    n_nodes: usize,
    use_lumped: bool,
) -> Result<(Vec<Point>, Vec<bool>, usize)> {
    let lumped = assemble_lumped_mass(shape, mps, n_nodes);
    let flux = assemble_flux(shape, mps, kappa, n_nodes);
    let frozen: Vec<bool> = lumped.iter().map(|m| !(*m > 0.0)).collect();
    if use_lumped {
        let v = flux
            .iter()
            .zip(&lumped)
            .zip(&frozen)
            .map(|((f, m), &fz)| if fz { Point::zeros() } else { f / *m })
            .collect();
        return Ok((v, frozen, 0));
    }
    let mass = assemble_consistent_mass(shape, mps, n_nodes);
    let active: Vec<bool> = frozen.iter().map(|f| !f).collect();
    let mut v = vec![Point::zeros(); n_nodes];
    let mut iterations = 0;
    for k in 0..3 {
        let b: Vec<f64> = flux.iter().map(|f| f[k]).collect();
        let (x, it) = conjugate_gradient(&mass, &b, &active, 1e-10)?;
        iterations += it;
        for (va, xa) in v.iter_mut().zip(x) {
            va[k] = xa;
        }
    }
    Ok((v, frozen, iterations))
}

/// One diffusive fractional step: ballistic nodal update `x + dt M⁻¹ f`,
/// Neumann projection of exterior nodes, then interpolated particle positions
/// and Jacobian volume updates.
#[allow(clippy::too_many_arguments)]
pub fn diffusive_step(
    nodes: &mut NodeSet,
    mps: &mut MaterialPointSet,
    shape: &ShapeTable,
    table: &NeighborTable,
    kappa: f64,
    dt: f64,
    use_lumped: bool,
    domain: &Domain,
) -> Result<DiffusionReport> {
    if kappa == 0.0 {
        nodes.frozen.iter_mut().for_each(|f| *f = false);
        return Ok(DiffusionReport::default());
    }
    let limit = stable_dt(nodes, table, kappa, 1.0);
    if dt > limit {
        log::warn!("diffusive step dt = {dt:e} exceeds the explicit limit Δx²/κ = {limit:e}");
    }
    let (v, frozen, cg_iterations) = nodal_velocities(shape, mps, kappa, nodes.len(), use_lumped)?;
    let mut report = DiffusionReport {
        frozen: frozen.iter().filter(|f| **f).count(),
        cg_iterations,
        ..Default::default()
    };
    for (a, x) in nodes.positions.iter_mut().enumerate() {
        if frozen[a] {
            continue;
        }
        report.max_speed = report.max_speed.max(v[a].norm());
        *x += v[a] * dt;
        if domain.signed_distance(x) > 0.0 {
            *x = domain.nearest_surface_point(x);
            report.projected += 1;
        }
    }
    nodes.frozen = frozen;
    update_material_points(nodes, mps, shape)?;
    Ok(report)
}

/// Moves material points with the interpolated incremental map
/// `x_p ← Σ_a x_a N_a(x_p)` and updates volumes with
/// `det F_p`, `F_p = Σ_a x_a ⊗ ∇N_a(x_p)`, both evaluated with the shape
/// functions of the start of the step and the updated nodal positions.
pub fn update_material_points(nodes: &NodeSet, mps: &mut MaterialPointSet, shape: &ShapeTable) -> Result<()> {
    let updates: Vec<(Point, f64)> = (0..mps.len())
        .into_par_iter()
        .map(|p| {
            let mut x = Point::zeros();
            let mut f = Mat3::zeros();
            for (a, n, g) in shape.entries(p) {
                let xa = nodes.positions[a];
                x += xa * n;
                f += xa * g.transpose();
            }
            (x, f.determinant())
        })
        .collect();
    for (p, (x, det)) in updates.into_iter().enumerate() {
        if !(det > 0.0) {
            return Err(OtmError::Inversion { particle: p, det });
        }
        mps.positions_mut()[p] = x;
        let v = mps.volumes()[p] * det;
        mps.set_volume(p, v)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{build_neighbors, seed};
    use crate::maxent::{build_shape_table, LmeParams};

    fn lcg(state: &mut u64) -> f64 {
        *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (*state >> 11) as f64 / (1u64 << 53) as f64
    }

    fn ball(spacing: f64) -> (Domain, NodeSet, MaterialPointSet, NeighborTable, ShapeTable) {
        let domain = Domain::sphere(Point::zeros(), 3.0).unwrap();
        let region = Domain::sphere(Point::zeros(), 1.0).unwrap();
        let (nodes, mps) = seed(&domain, &region, spacing, 1.0).unwrap();
        let table = build_neighbors(&nodes, &mps, &LmeParams::default()).unwrap();
        let shape = build_shape_table(&nodes, &mps, &table, &LmeParams::default()).unwrap();
        (domain, nodes, mps, table, shape)
    }

    fn regular_tet() -> Vec<Point> {
        vec![
            Point::new(1.0, 1.0, 1.0),
            Point::new(1.0, -1.0, -1.0),
            Point::new(-1.0, 1.0, -1.0),
            Point::new(-1.0, -1.0, 1.0),
        ]
    }

    #[test]
    fn stable_dt_arithmetic() {
        let mut xs = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    xs.push(Point::new(i as f64, j as f64, k as f64) * 0.1);
                }
            }
        }
        let nodes = NodeSet::new(xs);
        let mps = MaterialPointSet::new(vec![Point::repeat(0.05)], vec![1.0], vec![1.0]).unwrap();
        let table = build_neighbors(&nodes, &mps, &LmeParams::default()).unwrap();
        let dt = stable_dt(&nodes, &table, 0.01, 0.1);
        assert!((dt - 0.1).abs() < 1e-15, "{dt}");
        assert_eq!(stable_dt(&nodes, &table, 0.0, 0.1), f64::INFINITY);
    }

    #[test]
    fn shared_spacing_matches_pairwise_scan() {
        let mut s = 3;
        let nodes = NodeSet::new((0..60).map(|_| Point::new(lcg(&mut s), lcg(&mut s), lcg(&mut s))).collect());
        let xs: Vec<Point> = (0..25).map(|_| Point::new(lcg(&mut s), lcg(&mut s), lcg(&mut s)) * 0.8).collect();
        let mps = MaterialPointSet::new(xs, vec![1.0; 25], vec![1.0; 25]).unwrap();
        let table = build_neighbors(&nodes, &mps, &LmeParams::default()).unwrap();
        // Every node pair, kept if some particle has both inside its radius.
        let mut best = f64::INFINITY;
        let n = nodes.len();
        for a in 0..n {
            for b in a + 1..n {
                let shared = (0..mps.len()).any(|p| {
                    let x = mps.positions()[p];
                    let r = table.radius(p);
                    (nodes.positions[a] - x).norm() <= r && (nodes.positions[b] - x).norm() <= r
                });
                if shared {
                    best = best.min((nodes.positions[a] - nodes.positions[b]).norm());
                }
            }
        }
        assert_eq!(min_shared_spacing(&nodes, &table), best);
    }

    #[test]
    fn zero_diffusivity_is_identity() {
        let (domain, mut nodes, mut mps, table, shape) = ball(0.5);
        let (n0, m0) = (nodes.clone(), mps.clone());
        let r = diffusive_step(&mut nodes, &mut mps, &shape, &table, 0.0, 0.1, true, &domain).unwrap();
        assert_eq!(r, DiffusionReport::default());
        assert_eq!(nodes, n0);
        assert_eq!(mps, m0);
    }

    #[test]
    fn affine_nodal_motion_scales_volumes_by_det() {
        let (_, mut nodes, mut mps, _, shape) = ball(0.4);
        let a = Mat3::new(1.2, 0.3, 0.0, -0.1, 1.5, 0.2, 0.05, 0.0, 1.4);
        let a = a * (2.5 / a.determinant()).cbrt();
        assert!((a.determinant() - 2.5).abs() < 1e-14);
        let b = Point::new(0.3, -0.7, 1.1);
        let before = mps.clone();
        nodes.positions.iter_mut().for_each(|x| *x = a * *x + b);
        update_material_points(&nodes, &mut mps, &shape).unwrap();
        for p in 0..mps.len() {
            let expect = a * before.positions()[p] + b;
            assert!((mps.positions()[p] - expect).norm() <= 1e-9 * expect.norm().max(1.0));
            let ratio = mps.volumes()[p] / before.volumes()[p];
            assert!((ratio - 2.5).abs() <= 2.5e-9, "particle {p}: {ratio}");
        }
    }

    #[test]
    fn regular_tetrahedron_by_hand() {
        // N_a = 1/4 and, since Σ x_a x_aᵀ = 4I, J = I and ∇N_a = x_a / 4.
        // Then f_a = m κ x_a / 4, M_aa = m / 4, so each node moves by dt κ x_a.
        let mut nodes = NodeSet::new(regular_tet());
        let mut mps = MaterialPointSet::new(vec![Point::zeros()], vec![2.0], vec![1.0]).unwrap();
        let table = build_neighbors(&nodes, &mps, &LmeParams::default()).unwrap();
        let shape = build_shape_table(&nodes, &mps, &table, &LmeParams::default()).unwrap();
        let domain = Domain::sphere(Point::zeros(), 10.0).unwrap();
        let (kappa, dt) = (0.1, 0.01);
        diffusive_step(&mut nodes, &mut mps, &shape, &table, kappa, dt, true, &domain).unwrap();
        for (x, x0) in nodes.positions.iter().zip(regular_tet()) {
            assert!((x - x0 * (1.0 + dt * kappa)).norm() < 1e-14);
        }
        assert!(mps.positions()[0].norm() < 1e-14);
        assert!((mps.volumes()[0] - (1.0 + dt * kappa).powi(3)).abs() < 1e-13);
    }

    #[test]
    fn lumped_and_consistent_share_the_weighted_mean_velocity() {
        // Row sums of the consistent mass are the lumped masses, so
        // Σ_a M_a v_a = Σ_a f_a for both solves.
        let (_, nodes, mps, _, shape) = ball(0.5);
        let n = nodes.len();
        let lumped = crate::solver::assemble_lumped_mass(&shape, &mps, n);
        let (vl, _, _) = nodal_velocities(&shape, &mps, 0.05, n, true).unwrap();
        let (vc, _, _) = nodal_velocities(&shape, &mps, 0.05, n, false).unwrap();
        let ml: Point = vl.iter().zip(&lumped).map(|(v, m)| v * *m).sum();
        let mc: Point = vc.iter().zip(&lumped).map(|(v, m)| v * *m).sum();
        let scale: f64 = vl.iter().zip(&lumped).map(|(v, m)| v.norm() * m).sum();
        assert!((ml - mc).norm() <= 1e-8 * scale, "{ml:?} vs {mc:?}");
    }
}
