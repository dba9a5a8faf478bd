//! Nodal mass matrices and diffusive fluxes.

use std::collections::BTreeMap;

use crate::discretization::MaterialPointSet;
use crate::maxent::ShapeTable;
use crate::{OtmError, Point, Result};

/// Row-sum lumped mass `M_a = Σ_p m_p N_a(x_p)`.
pub fn assemble_lumped_mass(shape: &ShapeTable, mps: &MaterialPointSet, n_nodes: usize) -> Vec<f64> {
    let mut m = vec![0.0; n_nodes];
    for (p, mp) in mps.masses().iter().enumerate() {
        for (a, n, _) in shape.entries(p) {
            m[a] += mp * n;
        }
    }
    m
}

/// Nodal flux `f_a = Σ_p m_p κ ∇N_a(x_p)`.
pub fn assemble_flux(shape: &ShapeTable, mps: &MaterialPointSet, kappa: f64, n_nodes: usize) -> Vec<Point> {
    let mut f = vec![Point::zeros(); n_nodes];
    for (p, mp) in mps.masses().iter().enumerate() {
        let w = mp * kappa;
        for (a, _, g) in shape.entries(p) {
            f[a] += g * w;
        }
    }
    f
}

/// Symmetric sparse matrix in compressed-row form with both triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSymmetric {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        let row = &self.cols[self.row_ptr[a]..self.row_ptr[a + 1]];
        match row.binary_search(&b) {
            Ok(k) => self.vals[self.row_ptr[a] + k],
            Err(_) => 0.0,
        }
    }

    pub fn row(&self, a: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[a]..self.row_ptr[a + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|a| self.row(a).map(|(_, v)| v).sum()).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|a| self.get(a, a)).collect()
    }

    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        for (a, ya) in y.iter_mut().enumerate() {
            *ya = self.row(a).map(|(b, v)| v * x[b]).sum();
        }
    }
}

/// Consistent mass `M_ab = Σ_p m_p N_a(x_p) N_b(x_p)`; entries only for node
/// pairs sharing a particle. The upper triangle is accumulated once and
/// mirrored, so the matrix is bitwise symmetric.
pub fn assemble_consistent_mass(shape: &ShapeTable, mps: &MaterialPointSet, n_nodes: usize) -> SparseSymmetric {
    let mut upper: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (p, mp) in mps.masses().iter().enumerate() {
        let nodes = shape.nodes(p);
        let vals = shape.values(p);
        for i in 0..nodes.len() {
            for j in i..nodes.len() {
                let (a, b) = if nodes[i] <= nodes[j] { (nodes[i], nodes[j]) } else { (nodes[j], nodes[i]) };
                *upper.entry((a, b)).or_insert(0.0) += mp * (vals[i] * vals[j]);
            }
        }
    }
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_nodes];
    for (&(a, b), &v) in &upper {
        rows[a].push((b, v));
        if a != b {
            rows[b].push((a, v));
        }
    }
    let mut row_ptr = vec![0];
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for mut r in rows {
        r.sort_unstable_by_key(|e| e.0);
        for (c, v) in r {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    SparseSymmetric {
        n: n_nodes,
        row_ptr,
        cols,
        vals,
    }
}

/// Jacobi-preconditioned conjugate gradients on the rows/columns flagged
/// `active`; inactive entries of `x` are left at zero.
pub fn conjugate_gradient(
    m: &SparseSymmetric,
    b: &[f64],
    active: &[bool],
    rel_tol: f64,
) -> Result<(Vec<f64>, usize)> {
    let n = m.dim();
    let diag = m.diagonal();
    let mask = |v: &mut [f64]| {
        for (vi, &on) in v.iter_mut().zip(active) {
            if !on {
                *vi = 0.0;
            }
        }
    };
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let mut x = vec![0.0; n];
    let mut r: Vec<f64> = b.to_vec();
    mask(&mut r);
    let bnorm = dot(&r, &r).sqrt();
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let precond = |r: &[f64]| -> Vec<f64> {
        r.iter()
            .zip(&diag)
            .zip(active)
            .map(|((ri, di), &on)| if on && *di > 0.0 { ri / di } else { 0.0 })
            .collect()
    };
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let max_iter = 10 * n.max(10);
    for it in 1..=max_iter {
        m.mul(&p, &mut ap);
        mask(&mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(OtmError::CgFailure {
                iterations: it,
                residual: dot(&r, &r).sqrt() / bnorm,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let res = dot(&r, &r).sqrt() / bnorm;
        if res <= rel_tol {
            return Ok((x, it));
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(OtmError::CgFailure {
        iterations: max_iter,
        residual: dot(&r, &r).sqrt() / bnorm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_particle(values: Vec<f64>, grads: Vec<Point>, mass: f64) -> (ShapeTable, MaterialPointSet) {
        let n = values.len();
        let shape = ShapeTable::from_entries(vec![((0..n).collect(), values, grads)]);
        let mps = MaterialPointSet::new(vec![Point::zeros()], vec![mass], vec![1.0]).unwrap();
        (shape, mps)
    }

    #[test]
    fn lumped_single_particle() {
        let (shape, mps) = one_particle(vec![0.25; 4], vec![Point::zeros(); 4], 1.0);
        assert_eq!(assemble_lumped_mass(&shape, &mps, 4), vec![0.25; 4]);
    }

    #[test]
    fn consistent_outer_product() {
        let (shape, mps) = one_particle(vec![0.5, 0.5], vec![Point::zeros(); 2], 3.0);
        let m = assemble_consistent_mass(&shape, &mps, 2);
        for a in 0..2 {
            for b in 0..2 {
                assert_eq!(m.get(a, b), 0.75);
            }
        }
    }

    #[test]
    fn two_particles_five_nodes_by_hand() {
        let shape = ShapeTable::from_entries(vec![
            (vec![0, 1, 2, 3], vec![0.1, 0.2, 0.3, 0.4], vec![Point::x(); 4]),
            (vec![1, 2, 3, 4], vec![0.5, 0.25, 0.125, 0.125], vec![Point::y(); 4]),
        ]);
        let mps = MaterialPointSet::new(vec![Point::zeros(); 2], vec![2.0, 4.0], vec![1.0, 1.0]).unwrap();
        let lumped = assemble_lumped_mass(&shape, &mps, 5);
        let expect = [0.2, 0.4 + 2.0, 0.6 + 1.0, 0.8 + 0.5, 0.5];
        for (l, e) in lumped.iter().zip(expect) {
            assert!((l - e).abs() < 1e-15);
        }
        let m = assemble_consistent_mass(&shape, &mps, 5);
        assert!((m.get(1, 2) - (2.0 * 0.2 * 0.3 + 4.0 * 0.5 * 0.25)).abs() < 1e-15);
        assert_eq!(m.get(0, 4), 0.0);
        for (rs, l) in m.row_sums().iter().zip(&lumped) {
            assert!((rs - l).abs() <= 1e-12 * l);
        }
        let f = assemble_flux(&shape, &mps, 0.5, 5);
        assert_eq!(f[0], Point::x());
        assert_eq!(f[4], Point::y() * 2.0);
        assert_eq!(f[1], Point::x() + Point::y() * 2.0);
    }

    #[test]
    fn zero_diffusivity_zero_flux() {
        let (shape, mps) = one_particle(vec![0.25; 4], vec![Point::x(); 4], 1.0);
        assert!(assemble_flux(&shape, &mps, 0.0, 4).iter().all(|f| *f == Point::zeros()));
    }

    #[test]
    fn cg_solves_small_spd_system() {
        let shape = ShapeTable::from_entries(vec![
            (vec![0, 1, 2], vec![0.5, 0.3, 0.2], vec![Point::zeros(); 3]),
            (vec![1, 2, 3], vec![0.2, 0.3, 0.5], vec![Point::zeros(); 3]),
            (vec![0, 2, 3], vec![0.3, 0.3, 0.4], vec![Point::zeros(); 3]),
            (vec![0, 1, 3], vec![0.6, 0.1, 0.3], vec![Point::zeros(); 3]),
        ]);
        let mps = MaterialPointSet::new(vec![Point::zeros(); 4], vec![1.0; 4], vec![1.0; 4]).unwrap();
        let m = assemble_consistent_mass(&shape, &mps, 5);
        let active = [true, true, true, true, false];
        let b = [1.0, -2.0, 0.5, 0.25, 7.0];
        let (x, _) = conjugate_gradient(&m, &b, &active, 1e-12).unwrap();
        assert_eq!(x[4], 0.0);
        let mut y = vec![0.0; 5];
        m.mul(&x, &mut y);
        for k in 0..4 {
            assert!((y[k] - b[k]).abs() < 1e-10);
        }
    }
}
