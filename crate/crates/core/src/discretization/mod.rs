//! Nodes, material points, seeding and neighbor lists.

pub mod delaunay;
mod grid;
mod neighbors;
mod seed;

pub use grid::SpatialHash;
pub use neighbors::{build_neighbors, needs_rebuild, NeighborTable};
pub use seed::{seed, seed_with, SeedOptions};

use crate::{OtmError, Point, Result};

/// Nodal coordinates carrying the incremental transport map.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    pub positions: Vec<Point>,
    /// Nodes held fixed during the current step (no particle support).
    pub frozen: Vec<bool>,
}

impl NodeSet {
    pub fn new(positions: Vec<Point>) -> Self {
        let frozen = vec![false; positions.len()];
        NodeSet { positions, frozen }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Dirac carriers of constant mass with evolving position, volume and density.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialPointSet {
    positions: Vec<Point>,
    masses: Vec<f64>,
    volumes: Vec<f64>,
    densities: Vec<f64>,
}

impl MaterialPointSet {
    /// Builds a set with `ρ = m / v`. Masses and volumes must be positive.
    pub fn new(positions: Vec<Point>, masses: Vec<f64>, volumes: Vec<f64>) -> Result<Self> {
        if positions.len() != masses.len() || masses.len() != volumes.len() {
            return Err(OtmError::InvalidState("material point arrays differ in length".into()));
        }
        let densities = masses.iter().zip(&volumes).map(|(m, v)| m / v).collect();
        let set = MaterialPointSet {
            positions,
            masses,
            volumes,
            densities,
        };
        set.validate()?;
        Ok(set)
    }

    /// Assembles a set verbatim, e.g. from a snapshot, without checking it.
    /// Use [`MaterialPointSet::validate`] to audit the result.
    pub fn from_raw(positions: Vec<Point>, masses: Vec<f64>, volumes: Vec<f64>, densities: Vec<f64>) -> Self {
        MaterialPointSet {
            positions,
            masses,
            volumes,
            densities,
        }
    }

    /// Checks positivity of masses and volumes and `ρ v = m` to 1e-14 relative.
    pub fn validate(&self) -> Result<()> {
        let n = self.positions.len();
        if self.masses.len() != n || self.volumes.len() != n || self.densities.len() != n {
            return Err(OtmError::InvalidState("material point arrays differ in length".into()));
        }
        for p in 0..n {
            let (m, v, rho) = (self.masses[p], self.volumes[p], self.densities[p]);
            if !(m > 0.0 && m.is_finite()) {
                return Err(OtmError::InvalidState(format!("material point {p} has mass {m}")));
            }
            if !(v > 0.0 && v.is_finite()) {
                return Err(OtmError::NonPositiveVolume { particle: p, volume: v });
            }
            if ((rho * v - m) / m).abs() > 1e-14 {
                return Err(OtmError::InvalidState(format!(
                    "material point {p}: density {rho} times volume {v} differs from mass {m}"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn positions_mut(&mut self) -> &mut [Point] {
        &mut self.positions
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    /// Sets the volume of particle `p` and refreshes its density.
    pub fn set_volume(&mut self, p: usize, volume: f64) -> Result<()> {
        if !(volume > 0.0 && volume.is_finite()) {
            return Err(OtmError::NonPositiveVolume { particle: p, volume });
        }
        self.volumes[p] = volume;
        self.densities[p] = self.masses[p] / volume;
        Ok(())
    }

    /// Sum of masses in index order.
    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    /// Mass-weighted centroid.
    pub fn centroid(&self) -> Point {
        let mut c = Point::zeros();
        for (x, m) in self.positions.iter().zip(&self.masses) {
            c += x * *m;
        }
        c / self.total_mass()
    }

    /// Mass-weighted variance `Σ m |x - x̄|² / Σ m`.
    pub fn second_moment(&self) -> f64 {
        let c = self.centroid();
        let mut s = 0.0;
        for (x, m) in self.positions.iter().zip(&self.masses) {
            s += m * (x - c).norm_squared();
        }
        s / self.total_mass()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_tracks_volume() {
        let mut mps = MaterialPointSet::new(vec![Point::zeros(); 2], vec![1.0, 3.0], vec![0.5, 7.0]).unwrap();
        assert_eq!(mps.densities(), &[2.0, 3.0 / 7.0]);
        mps.set_volume(1, 0.3).unwrap();
        assert_eq!(mps.densities()[1] * mps.volumes()[1], 3.0);
        assert!(matches!(
            mps.set_volume(0, 0.0),
            Err(OtmError::NonPositiveVolume { particle: 0, .. })
        ));
        mps.validate().unwrap();
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(MaterialPointSet::new(vec![Point::zeros()], vec![-1.0], vec![1.0]).is_err());
        assert!(MaterialPointSet::new(vec![Point::zeros()], vec![1.0], vec![0.0]).is_err());
        let raw = MaterialPointSet::from_raw(vec![Point::zeros()], vec![1.0], vec![-2.0], vec![-0.5]);
        assert!(matches!(raw.validate(), Err(OtmError::NonPositiveVolume { particle: 0, .. })));
    }
}
