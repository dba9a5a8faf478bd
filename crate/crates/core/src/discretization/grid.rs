use std::collections::HashMap;

use crate::Point;

/// Uniform-grid spatial hash over a fixed point set.
#[derive(Debug, Clone)]
pub struct SpatialHash {
    cell: f64,
    buckets: HashMap<[i64; 3], Vec<usize>>,
}

impl SpatialHash {
    pub fn new(points: &[Point], cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "cell size must be positive, got {cell}");
        let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(key(p, cell)).or_default().push(i);
        }
        SpatialHash { cell, buckets }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    /// Calls `f(i)` for every indexed point that may lie within `r` of `p`
    /// (a superset; callers filter by exact distance).
    pub fn candidates(&self, p: &Point, r: f64, mut f: impl FnMut(usize)) {
        let lo = key(&(p - Point::repeat(r)), self.cell);
        let hi = key(&(p + Point::repeat(r)), self.cell);
        let cells = (0..3).map(|k| (hi[k] - lo[k] + 1) as u128).product::<u128>();
        if cells > 4 * self.buckets.len() as u128 {
            for idx in self.buckets.values() {
                idx.iter().for_each(|&i| f(i));
            }
            return;
        }
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    if let Some(idx) = self.buckets.get(&[x, y, z]) {
                        idx.iter().for_each(|&i| f(i));
                    }
                }
            }
        }
    }

    /// Indices of points within the closed ball `|x - p| <= r`, sorted.
    pub fn within(&self, points: &[Point], p: &Point, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.candidates(p, r, |i| {
            if (points[i] - p).norm() <= r {
                out.push(i);
            }
        });
        out.sort_unstable();
        out
    }

    /// Distances to the `k` nearest points, ascending.
    pub fn nearest_distances(&self, points: &[Point], p: &Point, k: usize) -> Vec<f64> {
        let k = k.min(points.len());
        let mut r = self.cell;
        loop {
            let mut d: Vec<f64> = Vec::new();
            self.candidates(p, r, |i| {
                let dist = (points[i] - p).norm();
                if dist <= r {
                    d.push(dist);
                }
            });
            if d.len() >= k {
                d.sort_by(f64::total_cmp);
                d.truncate(k);
                return d;
            }
            r *= 2.0;
        }
    }
}

fn key(p: &Point, cell: f64) -> [i64; 3] {
    [
        (p.x / cell).floor() as i64,
        (p.y / cell).floor() as i64,
        (p.z / cell).floor() as i64,
    ]
}
