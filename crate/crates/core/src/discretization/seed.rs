use super::delaunay::{tet_volume, tetrahedralize};
use super::{MaterialPointSet, NodeSet};
use crate::{Domain, OtmError, Point, Result};

/// Knobs of the seeding lattice. The defaults give boundary-dominated meshes:
/// a unit ball at spacing 0.3 has about 240 nodes and 610 material points,
/// at spacing 0.13 about 1500 nodes and 5200 points.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedOptions {
    /// Boundary sample spacing as a multiple of the target spacing.
    pub surface_factor: f64,
    /// Nearest-neighbor distance of the interior body-centred cubic lattice,
    /// as a multiple of the target spacing.
    pub interior_factor: f64,
    /// Interior lattice points closer than this (times the target spacing)
    /// to the boundary are discarded.
    pub margin: f64,
    /// Salt of the deterministic jitter that puts the points in general position.
    pub salt: u64,
    /// Tetrahedra smaller than this fraction of `spacing³` are discarded.
    pub sliver_volume: f64,
}

impl Default for SeedOptions {
    fn default() -> Self {
        SeedOptions {
            surface_factor: 0.85,
            interior_factor: 1.8,
            margin: 0.5,
            salt: 0,
            sliver_volume: 1e-6,
        }
    }
}

/// Seeds nodes at the vertices of a Delaunay tetrahedralization of
/// `initial_region` and one material point per tetrahedron at its barycenter,
/// with mass `ρ0 · volume`.
pub fn seed(domain: &Domain, initial_region: &Domain, spacing: f64, rho0: f64) -> Result<(NodeSet, MaterialPointSet)> {
    seed_with(domain, initial_region, spacing, rho0, &SeedOptions::default())
}

pub fn seed_with(
    domain: &Domain,
    region: &Domain,
    spacing: f64,
    rho0: f64,
    opts: &SeedOptions,
) -> Result<(NodeSet, MaterialPointSet)> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(OtmError::Seeding(format!("spacing must be positive, got {spacing}")));
    }
    if !(rho0 > 0.0 && rho0.is_finite()) {
        return Err(OtmError::Seeding(format!("initial density must be positive, got {rho0}")));
    }
    for (what, d) in [("domain", domain), ("initial region", region)] {
        let feature = d.feature_radius();
        if spacing >= feature {
            return Err(OtmError::Seeding(format!(
                "spacing {spacing} does not resolve the {what} feature radius {feature}"
            )));
        }
    }

    let mut points = region.surface_samples(spacing * opts.surface_factor);
    let n_surface = points.len();
    points.extend(bcc_lattice(region, spacing * opts.interior_factor, opts.margin * spacing));

    for (i, p) in points.iter_mut().enumerate() {
        *p += jitter(i as u64, opts.salt) * (1e-4 * spacing);
        if i < n_surface {
            *p = region.nearest_surface_point(p);
        }
    }

    let tol = 1e-9 * domain.diameter();
    if let Some(p) = points.iter().find(|p| domain.signed_distance(p) > tol) {
        return Err(OtmError::Seeding(format!(
            "initial region is not contained in the domain (point {:?})",
            [p.x, p.y, p.z]
        )));
    }
    // Points sitting on a shared wall may round to the wrong side.
    for p in points.iter_mut() {
        if domain.signed_distance(p) > 0.0 {
            *p = domain.nearest_surface_point(p);
        }
    }

    let tets = tetrahedralize(&points)?;
    let min_vol = opts.sliver_volume * spacing.powi(3);
    let tets: Vec<([usize; 4], f64)> = tets
        .into_iter()
        .map(|t| (t, tet_volume(&points[t[0]], &points[t[1]], &points[t[2]], &points[t[3]])))
        .filter(|(_, v)| *v > min_vol)
        .collect();

    let mut index = vec![usize::MAX; points.len()];
    let mut used = Vec::new();
    for (t, _) in &tets {
        for &k in t {
            index[k] = 0;
        }
    }
    for (k, slot) in index.iter_mut().enumerate() {
        if *slot == 0 {
            *slot = used.len();
            used.push(points[k]);
        }
    }
    if used.len() < 4 || tets.is_empty() {
        return Err(OtmError::Seeding(format!(
            "spacing {spacing} is too coarse: only {} nodes",
            used.len()
        )));
    }

    let mut xs = Vec::with_capacity(tets.len());
    let mut masses = Vec::with_capacity(tets.len());
    let mut volumes = Vec::with_capacity(tets.len());
    for (t, v) in &tets {
        let c = t.iter().map(|&k| points[k]).sum::<Point>() / 4.0;
        xs.push(c);
        masses.push(rho0 * v);
        volumes.push(*v);
    }
    let mps = MaterialPointSet::new(xs, masses, volumes)?;
    Ok((NodeSet::new(used), mps))
}

/// Body-centred cubic lattice points at least `margin` inside `region`.
fn bcc_lattice(region: &Domain, nn_distance: f64, margin: f64) -> Vec<Point> {
    let a = 2.0 * nn_distance / 3f64.sqrt();
    let (lo, hi) = region.bounding_box();
    let c = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let n: Vec<i64> = (0..3).map(|k| (half[k] / a).ceil() as i64 + 1).collect();
    let mut out = Vec::new();
    for i in -n[0]..=n[0] {
        for j in -n[1]..=n[1] {
            for k in -n[2]..=n[2] {
                for offset in [0.0, 0.5] {
                    let p = c + Point::new(i as f64 + offset, j as f64 + offset, k as f64 + offset) * a;
                    if region.signed_distance(&p) <= -margin {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

/// Deterministic pseudo-random vector in `[-1, 1]³` (splitmix64).
fn jitter(i: u64, salt: u64) -> Point {
    let mut s = i.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut next = || {
        s = s.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = s;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    Point::new(next(), next(), next())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn regular_tet() -> [Point; 4] {
        [
            Point::new(1.0, 1.0, 1.0),
            Point::new(1.0, -1.0, -1.0),
            Point::new(-1.0, 1.0, -1.0),
            Point::new(-1.0, -1.0, 1.0),
        ]
    }

    #[test]
    fn single_tetrahedron_region() {
        let region = Domain::tetrahedron(regular_tet()).unwrap();
        let domain = Domain::sphere(Point::zeros(), 10.0).unwrap();
        let (nodes, mps) = seed(&domain, &region, 5.0, 1.0).unwrap();
        assert_eq!(nodes.len(), 4);
        assert_eq!(mps.len(), 1);
        assert!(mps.positions()[0].norm() < 1e-3);
        // Regular tet of edge 2√2 has volume 8/3.
        assert!((mps.volumes()[0] - 8.0 / 3.0).abs() < 1e-2);
        assert_eq!(mps.masses()[0], mps.volumes()[0]);
    }

    #[test]
    fn mass_equals_density_times_tetrahedralized_volume() {
        let domain = Domain::sphere(Point::zeros(), 7.0).unwrap();
        let region = Domain::sphere(Point::zeros(), 1.0).unwrap();
        let (_, mps) = seed(&domain, &region, 0.35, 2.5).unwrap();
        let vol: f64 = mps.volumes().iter().sum();
        let mass = mps.total_mass();
        assert!(((mass - 2.5 * vol) / mass).abs() < 1e-12);
        // Inscribed polyhedron: slightly below the ball volume.
        let ball = region.volume();
        assert!(vol < ball && vol > 0.85 * ball, "{vol} vs {ball}");
        for (m, (v, r)) in mps.masses().iter().zip(mps.volumes().iter().zip(mps.densities())) {
            assert!(((r * v - m) / m).abs() <= 1e-14);
        }
    }

    #[test]
    fn deterministic() {
        let domain = Domain::sphere(Point::zeros(), 7.0).unwrap();
        let region = Domain::sphere(Point::zeros(), 1.0).unwrap();
        let a = seed(&domain, &region, 0.4, 1.0).unwrap();
        let b = seed(&domain, &region, 0.4, 1.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.1.total_mass().to_bits(), b.1.total_mass().to_bits());
    }

    #[test]
    fn errors() {
        let domain = Domain::sphere(Point::zeros(), 1.0).unwrap();
        let big = Domain::sphere(Point::new(0.5, 0.0, 0.0), 1.0).unwrap();
        assert!(matches!(seed(&domain, &big, 0.3, 1.0), Err(OtmError::Seeding(_))));
        let tiny = Domain::sphere(Point::zeros(), 0.1).unwrap();
        assert!(seed(&domain, &tiny, 2.0, 1.0).is_err());
        assert!(seed(&domain, &tiny, 0.0, 1.0).is_err());
    }

    #[test]
    fn nodes_inside_annulus() {
        let domain = Domain::square_annulus(Point::zeros(), Point::z(), 0.5, 0.25).unwrap();
        let region = Domain::sphere(Point::new(0.375, 0.0, 0.0), 0.125).unwrap();
        let (nodes, mps) = seed(&domain, &region, 0.06, 1.0).unwrap();
        assert!(nodes.len() > 20);
        for x in nodes.positions.iter().chain(mps.positions()) {
            assert!(domain.signed_distance(x) <= 0.0);
        }
    }
}
