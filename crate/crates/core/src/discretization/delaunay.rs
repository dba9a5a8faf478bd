//! Incremental (Bowyer–Watson) Delaunay tetrahedralization with exact
//! orientation and in-sphere predicates.
//!
//! Points are inserted in a space-filling-curve order; each cavity is grown
//! from one conflicting tetrahedron across shared faces, using the exact
//! in-sphere predicate. A floating-point circumsphere filter is not used:
//! near-flat tetrahedra of cospherical boundary samples make it unreliable.

use std::collections::HashMap;

use robust::{insphere, orient3d, Coord3D};

use crate::{OtmError, Point, Result};

fn c3(p: &Point) -> Coord3D<f64> {
    Coord3D {
        x: p.x,
        y: p.y,
        z: p.z,
    }
}

struct Cell {
    v: [usize; 4],
}

impl Cell {
    fn encloses(&self, pts: &[Point], p: &Point) -> bool {
        let [a, b, c, d] = self.v;
        insphere(c3(&pts[a]), c3(&pts[b]), c3(&pts[c]), c3(&pts[d]), c3(p)) > 0.0
    }
}

/// Delaunay tetrahedra of `points`, each positively oriented (exact
/// `orient3d > 0`). Points must be distinct and in general position.
pub fn tetrahedralize(points: &[Point]) -> Result<Vec<[usize; 4]>> {
    if points.len() < 4 {
        return Err(OtmError::Seeding(format!(
            "need at least 4 points to tetrahedralize, got {}",
            points.len()
        )));
    }
    let n = points.len();
    let mut lo = Point::repeat(f64::INFINITY);
    let mut hi = Point::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let c = 0.5 * (lo + hi);
    let span = (hi - lo).max().max(f64::MIN_POSITIVE) * 1e3;

    let mut pts = points.to_vec();
    pts.push(c + Point::new(-span, -span, -span));
    pts.push(c + Point::new(3.0 * span, -span, -span));
    pts.push(c + Point::new(-span, 3.0 * span, -span));
    pts.push(c + Point::new(-span, -span, 3.0 * span));
    let mut root = [n, n + 1, n + 2, n + 3];
    if orient3d(c3(&pts[n]), c3(&pts[n + 1]), c3(&pts[n + 2]), c3(&pts[n + 3])) < 0.0 {
        root.swap(1, 2);
    }
    let mut cells: Vec<Option<Cell>> = vec![Some(Cell { v: root })];
    // Sorted face → the (up to two) live cells sharing it.
    let mut adjacency: HashMap<[usize; 3], [usize; 2]> = HashMap::new();
    let link = |adjacency: &mut HashMap<[usize; 3], [usize; 2]>, v: [usize; 4], id: usize| {
        for f in faces_of(v) {
            let slot = adjacency.entry(sorted(f)).or_insert([NONE, NONE]);
            if slot[0] == NONE {
                slot[0] = id;
            } else {
                slot[1] = id;
            }
        }
    };
    link(&mut adjacency, root, 0);

    let mut mark = vec![false; 1];
    for &i in &insertion_order(points) {
        let p = pts[i];
        // Recent cells sit near the previous point, which is spatially close.
        let start = (0..cells.len())
            .rev()
            .find(|&k| cells[k].as_ref().is_some_and(|t| t.encloses(&pts, &p)))
            .ok_or_else(|| OtmError::Seeding(format!("point {i} is a duplicate or lies outside the hull")))?;
        // The conflict region is connected: flood it across shared faces.
        let mut bad = vec![start];
        mark[start] = true;
        let mut head = 0;
        while head < bad.len() {
            let v = cells[bad[head]].as_ref().map(|t| t.v).unwrap_or([NONE; 4]);
            head += 1;
            for f in faces_of(v) {
                for &k in &adjacency[&sorted(f)] {
                    if k != NONE && !mark[k] && cells[k].as_ref().is_some_and(|t| t.encloses(&pts, &p)) {
                        mark[k] = true;
                        bad.push(k);
                    }
                }
            }
        }
        let mut count: HashMap<[usize; 3], ([usize; 3], u8)> = HashMap::new();
        for &k in &bad {
            for f in faces_of(cells[k].as_ref().map(|t| t.v).unwrap_or([NONE; 4])) {
                count.entry(sorted(f)).or_insert((f, 0)).1 += 1;
            }
        }
        for &k in &bad {
            let v = cells[k].take().map(|t| t.v).unwrap_or([NONE; 4]);
            for f in faces_of(v) {
                let key = sorted(f);
                if let Some(slot) = adjacency.get_mut(&key) {
                    if slot[0] == k {
                        slot[0] = slot[1];
                    }
                    slot[1] = NONE;
                    if slot[0] == NONE {
                        adjacency.remove(&key);
                    }
                }
            }
        }
        let mut boundary: Vec<[usize; 3]> = count.values().filter(|(_, k)| *k == 1).map(|(f, _)| *f).collect();
        boundary.sort_unstable();
        for [a, b, c] in boundary {
            let o = orient3d(c3(&pts[a]), c3(&pts[b]), c3(&pts[c]), c3(&p));
            let v = if o > 0.0 {
                [a, b, c, i]
            } else if o < 0.0 {
                [a, c, b, i]
            } else {
                return Err(OtmError::Seeding(format!(
                    "point {i} is coplanar with a cavity face; perturb the input"
                )));
            };
            let id = cells.len();
            cells.push(Some(Cell { v }));
            mark.push(false);
            link(&mut adjacency, v, id);
        }
    }
    let mut out: Vec<[usize; 4]> = cells
        .into_iter()
        .flatten()
        .filter(|t| t.v.iter().all(|&k| k < n))
        .map(|t| t.v)
        .collect();
    out.sort_unstable();
    Ok(out)
}

const NONE: usize = usize::MAX;

fn faces_of([a, b, c, d]: [usize; 4]) -> [[usize; 3]; 4] {
    [[a, b, c], [a, b, d], [a, c, d], [b, c, d]]
}

fn sorted(mut f: [usize; 3]) -> [usize; 3] {
    f.sort_unstable();
    f
}

/// Points ordered cell by cell along a coarse grid (Morton order), so that
/// consecutive insertions are close in space.
fn insertion_order(points: &[Point]) -> Vec<usize> {
    let mut lo = Point::repeat(f64::INFINITY);
    let mut hi = Point::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let span = (hi - lo).max().max(f64::MIN_POSITIVE);
    let cells = (points.len() as f64).cbrt().ceil().max(1.0);
    let key = |p: &Point| {
        let q = ((p - lo) / span * cells).map(|c| (c as u64).min(1023));
        let mut code = 0u64;
        for bit in 0..10 {
            for (k, &c) in q.iter().enumerate() {
                code |= ((c >> bit) & 1) << (3 * bit + k);
            }
        }
        code
    };
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by_key(|&i| (key(&points[i]), i));
    order
}

pub fn tet_volume(a: &Point, b: &Point, c: &Point, d: &Point) -> f64 {
    ((b - a).dot(&(c - a).cross(&(d - a)))).abs() / 6.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_tetrahedron() {
        let p = [Point::zeros(), Point::x(), Point::y(), Point::z()];
        let t = tetrahedralize(&p).unwrap();
        assert_eq!(t.len(), 1);
        let mut v = t[0];
        v.sort_unstable();
        assert_eq!(v, [0, 1, 2, 3]);
    }

    #[test]
    fn cube_with_center_fills_volume() {
        // Perturbed cube corners plus a center point: tetrahedra tile the hull.
        let mut p = Vec::new();
        for i in 0..8 {
            let jitter = 1e-3 * (i as f64 * 0.731).sin();
            p.push(Point::new((i & 1) as f64 + jitter, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64 - jitter));
        }
        p.push(Point::new(0.5, 0.52, 0.49));
        let t = tetrahedralize(&p).unwrap();
        let vol: f64 = t.iter().map(|v| tet_volume(&p[v[0]], &p[v[1]], &p[v[2]], &p[v[3]])).sum();
        assert!((vol - 1.0).abs() < 5e-3, "{vol}");
        for v in &t {
            assert!(orient3d(c3(&p[v[0]]), c3(&p[v[1]]), c3(&p[v[2]]), c3(&p[v[3]])) > 0.0);
        }
    }

    #[test]
    fn empty_circumsphere_property() {
        let pts: Vec<Point> = (0..60)
            .map(|i| {
                let f = i as f64;
                Point::new((f * 0.618).fract(), (f * 0.414 + 0.1).fract(), (f * 0.732 + 0.3).fract())
            })
            .collect();
        let t = tetrahedralize(&pts).unwrap();
        for v in &t {
            for (k, q) in pts.iter().enumerate() {
                if v.contains(&k) {
                    continue;
                }
                let s = insphere(c3(&pts[v[0]]), c3(&pts[v[1]]), c3(&pts[v[2]]), c3(&pts[v[3]]), c3(q));
                assert!(s <= 0.0);
            }
        }
    }
}
