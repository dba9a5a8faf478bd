//! Closed-form signed-distance containers.
//!
//! Every domain is a closed set: points with `signed_distance <= 0` belong to
//! it. Spheres, capped cylinders and the square-section annulus have exact
//! distance functions and exact nearest-point projections. Convex polyhedra
//! (intersections of half-spaces) use the max-of-planes distance, which is exact
//! inside and a lower bound outside; their projection searches the faces, edges
//! and vertices for the nearest feasible foot point.

use crate::{OtmError, Point, Result};

/// Oriented plane `normal · x <= offset` bounding a [`Domain::Polyhedron`].
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    pub normal: Point,
    pub offset: f64,
}

impl HalfSpace {
    /// Plane through `point` with outward `normal` (normalized here).
    pub fn new(normal: Point, point: Point) -> Self {
        let n = normal.normalize();
        HalfSpace {
            normal: n,
            offset: n.dot(&point),
        }
    }

    fn distance(&self, p: &Point) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Sphere {
        center: Point,
        radius: f64,
    },
    /// Solid circular cylinder of length `2 * half_length` along `axis`.
    Cylinder {
        center: Point,
        axis: Point,
        radius: f64,
        half_length: f64,
    },
    /// Circular channel with rectangular cross section: `inner <= ρ <= outer`,
    /// `|z| <= half_height` in cylindrical coordinates about `axis`.
    Annulus {
        center: Point,
        axis: Point,
        outer_radius: f64,
        inner_radius: f64,
        half_height: f64,
    },
    /// Bounded intersection of half-spaces.
    Polyhedron { planes: Vec<HalfSpace> },
}

/// Tolerance (relative to the domain diameter) used for on-boundary tests.
const BOUNDARY_TOL: f64 = 1e-12;

impl Domain {
    pub fn sphere(center: Point, radius: f64) -> Result<Self> {
        let d = Domain::Sphere { center, radius };
        d.validate()?;
        Ok(d)
    }

    pub fn cylinder(center: Point, axis: Point, radius: f64, length: f64) -> Result<Self> {
        let d = Domain::Cylinder {
            center,
            axis: unit_axis(axis)?,
            radius,
            half_length: 0.5 * length,
        };
        d.validate()?;
        Ok(d)
    }

    /// Annulus with a square cross section of side `outer - inner`.
    pub fn square_annulus(center: Point, axis: Point, outer: f64, inner: f64) -> Result<Self> {
        Self::annulus(center, axis, outer, inner, outer - inner)
    }

    pub fn annulus(center: Point, axis: Point, outer: f64, inner: f64, height: f64) -> Result<Self> {
        let d = Domain::Annulus {
            center,
            axis: unit_axis(axis)?,
            outer_radius: outer,
            inner_radius: inner,
            half_height: 0.5 * height,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn polyhedron(planes: Vec<HalfSpace>) -> Result<Self> {
        let d = Domain::Polyhedron { planes };
        d.validate()?;
        Ok(d)
    }

    /// Axis-aligned box `[lo, hi]`.
    pub fn aabb(lo: Point, hi: Point) -> Result<Self> {
        let mut planes = Vec::with_capacity(6);
        for k in 0..3 {
            let mut e = Point::zeros();
            e[k] = 1.0;
            planes.push(HalfSpace::new(e, hi));
            planes.push(HalfSpace::new(-e, lo));
        }
        Self::polyhedron(planes)
    }

    /// Tetrahedron with the given vertices (either orientation).
    pub fn tetrahedron(v: [Point; 4]) -> Result<Self> {
        let mut planes = Vec::with_capacity(4);
        for skip in 0..4 {
            let f: Vec<Point> = (0..4).filter(|&i| i != skip).map(|i| v[i]).collect();
            let mut n = (f[1] - f[0]).cross(&(f[2] - f[0]));
            if n.dot(&(v[skip] - f[0])) > 0.0 {
                n = -n;
            }
            if n.norm() == 0.0 {
                return Err(OtmError::InvalidDomain("degenerate tetrahedron".into()));
            }
            planes.push(HalfSpace::new(n, f[0]));
        }
        Self::polyhedron(planes)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(OtmError::InvalidDomain(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            Domain::Sphere { radius, .. } => positive("radius", *radius),
            Domain::Cylinder {
                axis,
                radius,
                half_length,
                ..
            } => {
                check_unit(axis)?;
                positive("radius", *radius)?;
                positive("length", *half_length)
            }
            Domain::Annulus {
                axis,
                outer_radius,
                inner_radius,
                half_height,
                ..
            } => {
                check_unit(axis)?;
                positive("outer radius", *outer_radius)?;
                positive("inner radius", *inner_radius)?;
                positive("height", *half_height)?;
                if outer_radius <= inner_radius {
                    return Err(OtmError::InvalidDomain(format!(
                        "outer radius {outer_radius} must exceed inner radius {inner_radius}"
                    )));
                }
                Ok(())
            }
            Domain::Polyhedron { planes } => {
                if planes.len() < 4 {
                    return Err(OtmError::InvalidDomain(
                        "a bounded polyhedron needs at least 4 planes".into(),
                    ));
                }
                for p in planes {
                    check_unit(&p.normal)?;
                }
                if polyhedron_vertices(planes).len() < 4 {
                    return Err(OtmError::InvalidDomain(
                        "half-spaces do not bound a solid".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn signed_distance(&self, p: &Point) -> f64 {
        match self {
            Domain::Sphere { center, radius } => (p - center).norm() - radius,
            Domain::Cylinder {
                center,
                axis,
                radius,
                half_length,
            } => {
                let (rho, z, _) = cylindrical(center, axis, p);
                rect_sd(rho, z, 0.0, *radius, *half_length, true)
            }
            Domain::Annulus {
                center,
                axis,
                outer_radius,
                inner_radius,
                half_height,
            } => {
                let (rho, z, _) = cylindrical(center, axis, p);
                rect_sd(rho, z, *inner_radius, *outer_radius, *half_height, false)
            }
            Domain::Polyhedron { planes } => planes
                .iter()
                .map(|h| h.distance(p))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Closed-domain membership: `signed_distance(p) <= 0`.
    pub fn contains(&self, p: &Point) -> bool {
        self.signed_distance(p) <= 0.0
    }

    /// Nearest boundary point of an exterior point.
    pub fn project_to_boundary(&self, p: &Point) -> Result<Point> {
        let distance = self.signed_distance(p);
        if distance <= 0.0 {
            return Err(OtmError::NotExterior {
                point: [p.x, p.y, p.z],
                distance,
            });
        }
        Ok(self.nearest_surface_point(p))
    }

    /// Nearest point on the boundary, for points on either side.
    ///
    pub fn nearest_surface_point(&self, p: &Point) -> Point {
        match self {
            Domain::Sphere { center, radius } => {
                let d = p - center;
                let n = d.norm();
                let dir = if n > 0.0 { d / n } else { Point::x() };
                center + dir * *radius
            }
            Domain::Cylinder {
                center,
                axis,
                radius,
                half_length,
            } => {
                let (rho, z, er) = cylindrical(center, axis, p);
                let (r, zz) = rect_nearest(rho, z, 0.0, *radius, *half_length, true);
                center + axis * zz + er * r
            }
            Domain::Annulus {
                center,
                axis,
                outer_radius,
                inner_radius,
                half_height,
            } => {
                let (rho, z, er) = cylindrical(center, axis, p);
                let (r, zz) = rect_nearest(rho, z, *inner_radius, *outer_radius, *half_height, false);
                center + axis * zz + er * r
            }
            Domain::Polyhedron { planes } => {
                let (k, sd) = planes
                    .iter()
                    .enumerate()
                    .map(|(k, h)| (k, h.distance(p)))
                    .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
                if sd <= 0.0 {
                    // Inside a convex body the nearest plane's foot lies on its face.
                    return p - planes[k].normal * sd;
                }
                polyhedron_projection(planes, p, BOUNDARY_TOL * self.diameter())
            }
        }
    }

    /// Smallest concave curvature radius the nodal spacing has to resolve.
    pub fn feature_radius(&self) -> f64 {
        match self {
            Domain::Sphere { radius, .. } => *radius,
            Domain::Cylinder { radius, .. } => *radius,
            Domain::Annulus { inner_radius, .. } => *inner_radius,
            Domain::Polyhedron { .. } => f64::INFINITY,
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Sphere { radius, .. } => 2.0 * radius,
            Domain::Cylinder {
                radius,
                half_length,
                ..
            } => 2.0 * radius.hypot(*half_length),
            Domain::Annulus {
                outer_radius,
                half_height,
                ..
            } => 2.0 * outer_radius.hypot(*half_height),
            Domain::Polyhedron { planes } => {
                let v = polyhedron_vertices(planes);
                let mut d: f64 = 0.0;
                for (i, a) in v.iter().enumerate() {
                    for b in &v[i + 1..] {
                        d = d.max((a - b).norm());
                    }
                }
                d
            }
        }
    }

    pub fn volume(&self) -> f64 {
        use std::f64::consts::PI;
        match self {
            Domain::Sphere { radius, .. } => 4.0 / 3.0 * PI * radius.powi(3),
            Domain::Cylinder {
                radius,
                half_length,
                ..
            } => PI * radius * radius * 2.0 * half_length,
            Domain::Annulus {
                outer_radius,
                inner_radius,
                half_height,
                ..
            } => PI * (outer_radius.powi(2) - inner_radius.powi(2)) * 2.0 * half_height,
            Domain::Polyhedron { planes } => polyhedron_volume(planes),
        }
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        let revolved = |center: &Point, axis: &Point, r: f64, h: f64| {
            let ext = Point::from_fn(|i, _| h * axis[i].abs() + r * (1.0 - axis[i] * axis[i]).max(0.0).sqrt());
            (center - ext, center + ext)
        };
        match self {
            Domain::Sphere { center, radius } => {
                let r = Point::repeat(*radius);
                (center - r, center + r)
            }
            Domain::Cylinder {
                center,
                axis,
                radius,
                half_length,
            } => revolved(center, axis, *radius, *half_length),
            Domain::Annulus {
                center,
                axis,
                outer_radius,
                half_height,
                ..
            } => revolved(center, axis, *outer_radius, *half_height),
            Domain::Polyhedron { planes } => {
                let v = polyhedron_vertices(planes);
                let mut lo = Point::repeat(f64::INFINITY);
                let mut hi = Point::repeat(f64::NEG_INFINITY);
                for p in &v {
                    lo = lo.inf(p);
                    hi = hi.sup(p);
                }
                (lo, hi)
            }
        }
    }

    /// Deterministic, roughly uniform samples of the boundary at the given
    /// spacing. Sharp features (edges, corners) are sampled first.
    pub fn surface_samples(&self, spacing: f64) -> Vec<Point> {
        use std::f64::consts::PI;
        match self {
            Domain::Sphere { center, radius } => {
                let area = 4.0 * PI * radius * radius;
                let n = ((area / (0.5 * 3f64.sqrt() * spacing * spacing)).round() as usize).max(4);
                fibonacci_sphere(n)
                    .into_iter()
                    .map(|d| center + d * *radius)
                    .collect()
            }
            Domain::Cylinder {
                center,
                axis,
                radius,
                half_length,
            } => {
                let (e1, e2) = orthonormal_pair(axis);
                let at = |r: f64, th: f64, z: f64| center + axis * z + (e1 * th.cos() + e2 * th.sin()) * r;
                let mut out = Vec::new();
                for &z in &[-*half_length, *half_length] {
                    ring(&mut out, *radius, spacing, 0.0, |r, th| at(r, th, z));
                    disk_rings(&mut out, 0.0, *radius, spacing, |r, th| at(r, th, z));
                }
                side_rings(&mut out, *radius, *half_length, spacing, at);
                out
            }
            Domain::Annulus {
                center,
                axis,
                outer_radius,
                inner_radius,
                half_height,
            } => {
                let (e1, e2) = orthonormal_pair(axis);
                let at = |r: f64, th: f64, z: f64| center + axis * z + (e1 * th.cos() + e2 * th.sin()) * r;
                let mut out = Vec::new();
                for &z in &[-*half_height, *half_height] {
                    ring(&mut out, *outer_radius, spacing, 0.0, |r, th| at(r, th, z));
                    ring(&mut out, *inner_radius, spacing, 0.0, |r, th| at(r, th, z));
                    disk_rings(&mut out, *inner_radius, *outer_radius, spacing, |r, th| at(r, th, z));
                }
                side_rings(&mut out, *outer_radius, *half_height, spacing, at);
                side_rings(&mut out, *inner_radius, *half_height, spacing, at);
                out
            }
            Domain::Polyhedron { planes } => polyhedron_surface(planes, spacing),
        }
    }
}

fn unit_axis(axis: Point) -> Result<Point> {
    let n = axis.norm();
    if n > 0.0 && n.is_finite() {
        Ok(axis / n)
    } else {
        Err(OtmError::InvalidDomain("axis must be a nonzero vector".into()))
    }
}

fn check_unit(v: &Point) -> Result<()> {
    if (v.norm() - 1.0).abs() > 1e-12 {
        return Err(OtmError::InvalidDomain(format!(
            "direction {:?} is not unit length",
            [v.x, v.y, v.z]
        )));
    }
    Ok(())
}

/// Returns `(ρ, z, e_ρ)`; `e_ρ` is an arbitrary perpendicular on the axis.
fn cylindrical(center: &Point, axis: &Point, p: &Point) -> (f64, f64, Point) {
    let d = p - center;
    let z = d.dot(axis);
    let radial = d - axis * z;
    let rho = radial.norm();
    let er = if rho > 0.0 {
        radial / rho
    } else {
        orthonormal_pair(axis).0
    };
    (rho, z, er)
}

/// Distance to the meridian rectangle `[r0, r1] x [-h, h]`. A solid of
/// revolution's distance equals the distance in its meridian half-plane.
/// `solid` marks `r0 == 0` as the axis rather than a wall.
fn rect_sd(rho: f64, z: f64, r0: f64, r1: f64, h: f64, solid: bool) -> f64 {
    let dr = if solid {
        rho - r1
    } else {
        (rho - 0.5 * (r0 + r1)).abs() - 0.5 * (r1 - r0)
    };
    let dz = z.abs() - h;
    let outside = dr.max(0.0).hypot(dz.max(0.0));
    outside + dr.max(dz).min(0.0)
}

fn rect_nearest(rho: f64, z: f64, r0: f64, r1: f64, h: f64, solid: bool) -> (f64, f64) {
    let lo = if solid { 0.0 } else { r0 };
    let outside = rho > r1 || z.abs() > h || (!solid && rho < r0);
    if outside {
        return (rho.clamp(lo, r1), z.clamp(-h, h));
    }
    // Interior: move to the closest wall.
    let mut best = (r1 - rho, (r1, z));
    if !solid && rho - r0 < best.0 {
        best = (rho - r0, (r0, z));
    }
    let cap = h - z.abs();
    if cap < best.0 {
        best = (cap, (rho, h.copysign(z)));
    }
    best.1
}

pub(crate) fn orthonormal_pair(axis: &Point) -> (Point, Point) {
    let seed = if axis.x.abs() < 0.9 { Point::x() } else { Point::y() };
    let e1 = (seed - axis * seed.dot(axis)).normalize();
    let e2 = axis.cross(&e1);
    (e1, e2)
}

fn fibonacci_sphere(n: usize) -> Vec<Point> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - y * y).sqrt();
            let th = golden * i as f64;
            Point::new(r * th.cos(), y, r * th.sin())
        })
        .collect()
}

fn ring(out: &mut Vec<Point>, r: f64, spacing: f64, phase: f64, at: impl Fn(f64, f64) -> Point) {
    use std::f64::consts::TAU;
    if r <= 0.0 {
        out.push(at(0.0, 0.0));
        return;
    }
    let n = ((TAU * r / spacing).round() as usize).max(3);
    for k in 0..n {
        out.push(at(r, phase + TAU * k as f64 / n as f64));
    }
}

/// Rings strictly between `r0` and `r1` on a flat cap.
fn disk_rings(out: &mut Vec<Point>, r0: f64, r1: f64, spacing: f64, at: impl Fn(f64, f64) -> Point) {
    let n = ((r1 - r0) / spacing).round() as usize;
    for k in 1..n {
        let r = r0 + (r1 - r0) * k as f64 / n as f64;
        ring(out, r, spacing, 0.37 * k as f64, &at);
    }
    if r0 == 0.0 && n >= 1 {
        out.push(at(0.0, 0.0));
    }
}

/// Rings strictly between the two caps on a cylindrical wall.
fn side_rings(out: &mut Vec<Point>, r: f64, h: f64, spacing: f64, at: impl Fn(f64, f64, f64) -> Point) {
    let n = ((2.0 * h / spacing).round() as usize).max(1);
    for k in 1..n {
        let z = -h + 2.0 * h * k as f64 / n as f64;
        ring(out, r, spacing, 0.5 * k as f64, |rr, th| at(rr, th, z));
    }
}

fn solve3(rows: [&HalfSpace; 3]) -> Option<Point> {
    let m = crate::Mat3::from_rows(&[
        rows[0].normal.transpose(),
        rows[1].normal.transpose(),
        rows[2].normal.transpose(),
    ]);
    if m.determinant().abs() < 1e-12 {
        return None;
    }
    m.try_inverse()
        .map(|inv| inv * Point::new(rows[0].offset, rows[1].offset, rows[2].offset))
}

pub(crate) fn polyhedron_vertices(planes: &[HalfSpace]) -> Vec<Point> {
    let scale = planes.iter().map(|p| p.offset.abs()).fold(1.0, f64::max);
    let mut out: Vec<Point> = Vec::new();
    let n = planes.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let Some(v) = solve3([&planes[i], &planes[j], &planes[k]]) else {
                    continue;
                };
                let inside = planes.iter().all(|h| h.distance(&v) <= 1e-9 * scale);
                if inside && !out.iter().any(|w| (w - v).norm() <= 1e-9 * scale) {
                    out.push(v);
                }
            }
        }
    }
    out
}

/// Vertices of face `k`, ordered counterclockwise about its outward normal.
fn face_polygon(planes: &[HalfSpace], k: usize, verts: &[Point]) -> Vec<Point> {
    let scale = planes.iter().map(|p| p.offset.abs()).fold(1.0, f64::max);
    let mut on: Vec<Point> = verts
        .iter()
        .filter(|v| planes[k].distance(v).abs() <= 1e-9 * scale)
        .copied()
        .collect();
    if on.len() < 3 {
        return Vec::new();
    }
    let c = on.iter().sum::<Point>() / on.len() as f64;
    let (e1, e2) = orthonormal_pair(&planes[k].normal);
    on.sort_by(|a, b| {
        let ta = (a - c).dot(&e2).atan2((a - c).dot(&e1));
        let tb = (b - c).dot(&e2).atan2((b - c).dot(&e1));
        ta.total_cmp(&tb)
    });
    on
}

fn polyhedron_volume(planes: &[HalfSpace]) -> f64 {
    let verts = polyhedron_vertices(planes);
    let origin = verts.iter().sum::<Point>() / verts.len() as f64;
    let mut vol = 0.0;
    for k in 0..planes.len() {
        let poly = face_polygon(planes, k, &verts);
        if poly.is_empty() {
            continue;
        }
        let mut area = Point::zeros();
        for i in 0..poly.len() {
            area += (poly[i] - poly[0]).cross(&(poly[(i + 1) % poly.len()] - poly[0]));
        }
        let a = 0.5 * area.norm();
        let height = -planes[k].distance(&origin);
        vol += a * height / 3.0;
    }
    vol
}

fn polyhedron_surface(planes: &[HalfSpace], spacing: f64) -> Vec<Point> {
    let verts = polyhedron_vertices(planes);
    let mut out = verts.clone();
    // Edges: vertex pairs sharing two faces.
    let scale = planes.iter().map(|p| p.offset.abs()).fold(1.0, f64::max);
    let faces_of = |v: &Point| -> Vec<usize> {
        (0..planes.len())
            .filter(|&k| planes[k].distance(v).abs() <= 1e-9 * scale)
            .collect()
    };
    let vf: Vec<Vec<usize>> = verts.iter().map(faces_of).collect();
    for i in 0..verts.len() {
        for j in i + 1..verts.len() {
            let shared = vf[i].iter().filter(|k| vf[j].contains(k)).count();
            if shared < 2 {
                continue;
            }
            let n = ((verts[j] - verts[i]).norm() / spacing).round() as usize;
            for s in 1..n {
                out.push(verts[i] + (verts[j] - verts[i]) * (s as f64 / n as f64));
            }
        }
    }
    // Face interiors: triangular lattice clipped half a spacing away from the
    // face's edges.
    for k in 0..planes.len() {
        let poly = face_polygon(planes, k, &verts);
        if poly.is_empty() {
            continue;
        }
        let (e1, e2) = orthonormal_pair(&planes[k].normal);
        let c = poly.iter().sum::<Point>() / poly.len() as f64;
        let extent = poly.iter().map(|v| (v - c).norm()).fold(0.0, f64::max);
        let n = (extent / spacing).ceil() as i64 + 1;
        let dy = spacing * 0.5 * 3f64.sqrt();
        for j in -n..=n {
            for i in -n..=n {
                let u = (i as f64 + 0.5 * (j.rem_euclid(2)) as f64) * spacing;
                let w = j as f64 * dy;
                let p = c + e1 * u + e2 * w;
                let clear = planes
                    .iter()
                    .enumerate()
                    .all(|(m, h)| m == k || h.distance(&p) <= -0.5 * spacing);
                if clear {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Euclidean projection of an exterior point onto a convex polyhedron: the
/// nearest feasible projection onto the affine hull of one, two or three
/// faces. Some such set is active at the optimum, so the search is exact.
fn polyhedron_projection(planes: &[HalfSpace], p: &Point, tol: f64) -> Point {
    let feasible = |q: &Point| planes.iter().all(|h| h.distance(q) <= tol);
    let mut best: Option<(f64, Point)> = None;
    let mut consider = |q: Point| {
        if feasible(&q) && best.is_none_or(|(d, _)| (q - p).norm_squared() < d) {
            best = Some(((q - p).norm_squared(), q));
        }
    };
    let m = planes.len();
    for i in 0..m {
        consider(p - planes[i].normal * planes[i].distance(p));
        for j in i + 1..m {
            if let Some(q) = affine_projection(&[&planes[i], &planes[j]], p) {
                consider(q);
            }
            for k in j + 1..m {
                if let Some(q) = affine_projection(&[&planes[i], &planes[j], &planes[k]], p) {
                    consider(q);
                }
            }
        }
    }
    best.map(|(_, q)| q).unwrap_or(*p)
}

/// Projection onto `{q : n_i·q = offset_i}`; `None` for dependent normals.
fn affine_projection(hs: &[&HalfSpace], p: &Point) -> Option<Point> {
    let k = hs.len();
    let mut gram = nalgebra::DMatrix::<f64>::zeros(k, k);
    let mut rhs = nalgebra::DVector::<f64>::zeros(k);
    for (a, ha) in hs.iter().enumerate() {
        rhs[a] = ha.distance(p);
        for (b, hb) in hs.iter().enumerate() {
            gram[(a, b)] = ha.normal.dot(&hb.normal);
        }
    }
    if gram.determinant().abs() < 1e-12 {
        return None;
    }
    let mu = gram.lu().solve(&rhs)?;
    Some(hs.iter().zip(mu.iter()).fold(*p, |q, (h, m)| q - h.normal * *m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn annulus() -> Domain {
        Domain::square_annulus(Point::zeros(), Point::z(), 0.5, 0.25).unwrap()
    }

    #[test]
    fn sphere_distance_and_projection() {
        let s = Domain::sphere(Point::zeros(), 7.0).unwrap();
        assert_eq!(s.signed_distance(&Point::zeros()), -7.0);
        assert_eq!(s.signed_distance(&Point::new(7.0, 0.0, 0.0)), 0.0);
        assert_eq!(s.project_to_boundary(&Point::new(8.0, 0.0, 0.0)).unwrap(), Point::new(7.0, 0.0, 0.0));
        assert_eq!(s.project_to_boundary(&Point::new(0.0, 0.0, 7.5)).unwrap(), Point::new(0.0, 0.0, 7.0));
        assert!(s.contains(&Point::zeros()));
        assert!(!s.contains(&Point::new(8.0, 0.0, 0.0)));
        assert!(s.contains(&Point::new(7.0, 0.0, 0.0)));
    }

    #[test]
    fn annulus_inner_wall_and_outer_projection() {
        let a = annulus();
        // inner wall, mid-height: rho = 0.25, z = 0 -> on the wall.
        let p = Point::new(0.25 * 0.6, 0.25 * 0.8, 0.0);
        assert!(a.signed_distance(&p).abs() < 1e-15);
        // Square section: mid-channel, mid-height is 0.125 from every wall.
        assert!((a.signed_distance(&Point::new(0.375, 0.0, 0.0)) + 0.125).abs() < 1e-15);
        // Beyond the outer wall at mid-height, angle 30 degrees.
        let th = std::f64::consts::FRAC_PI_6;
        let q = a
            .project_to_boundary(&Point::new(0.7 * th.cos(), 0.7 * th.sin(), 0.05))
            .unwrap();
        assert!((q - Point::new(0.5 * th.cos(), 0.5 * th.sin(), 0.05)).norm() < 1e-15);
        // In the hole, on the axis: nearest wall is the inner cylinder.
        assert!((a.signed_distance(&Point::new(0.0, 0.0, 0.0)) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn feature_radii() {
        assert_eq!(annulus().feature_radius(), 0.25);
        assert_eq!(Domain::sphere(Point::zeros(), 7.0).unwrap().feature_radius(), 7.0);
        let c = Domain::cylinder(Point::zeros(), Point::z(), 0.5, 0.25).unwrap();
        assert_eq!(c.feature_radius(), 0.5);
    }

    #[test]
    fn projection_rejects_interior_points() {
        let s = Domain::sphere(Point::zeros(), 1.0).unwrap();
        assert!(matches!(
            s.project_to_boundary(&Point::new(0.5, 0.0, 0.0)),
            Err(OtmError::NotExterior { .. })
        ));
        assert!(s.project_to_boundary(&Point::new(1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn invalid_parameters() {
        assert!(Domain::sphere(Point::zeros(), 0.0).is_err());
        assert!(Domain::annulus(Point::zeros(), Point::z(), 0.25, 0.5, 0.1).is_err());
        assert!(Domain::cylinder(Point::zeros(), Point::zeros(), 1.0, 1.0).is_err());
        let half = vec![HalfSpace::new(Point::x(), Point::zeros())];
        assert!(Domain::polyhedron(half).is_err());
    }

    #[test]
    fn polyhedron_volume_and_projection() {
        let b = Domain::aabb(Point::zeros(), Point::new(1.0, 2.0, 3.0)).unwrap();
        assert!((b.volume() - 6.0).abs() < 1e-12);
        let q = b.project_to_boundary(&Point::new(2.0, 3.0, 1.0)).unwrap();
        assert!(b.signed_distance(&q).abs() < 1e-12);
        assert!((q - Point::new(1.0, 2.0, 1.0)).norm() < 1e-12);
        let t = Domain::tetrahedron([
            Point::zeros(),
            Point::x(),
            Point::y(),
            Point::z(),
        ])
        .unwrap();
        assert!((t.volume() - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn surface_samples_lie_on_boundary() {
        let c = Domain::cylinder(Point::new(0.1, 0.0, 0.0), Point::new(1.0, 1.0, 0.0), 0.5, 0.25).unwrap();
        for d in [annulus(), c, Domain::aabb(Point::zeros(), Point::repeat(1.0)).unwrap()] {
            let pts = d.surface_samples(0.1);
            assert!(pts.len() > 10);
            for p in pts {
                assert!(d.signed_distance(&p).abs() < 1e-12, "{d:?} {p:?}");
            }
        }
    }

    fn primitives() -> Vec<Domain> {
        vec![
            Domain::sphere(Point::new(0.1, -0.2, 0.3), 7.0).unwrap(),
            Domain::cylinder(Point::zeros(), Point::new(1.0, 1.0, 0.0), 0.5, 0.25).unwrap(),
            annulus(),
            Domain::aabb(Point::new(-1.0, -0.5, 0.0), Point::new(1.0, 0.5, 2.0)).unwrap(),
            Domain::tetrahedron([Point::zeros(), Point::x(), Point::y(), Point::z()]).unwrap(),
        ]
    }

    fn probes(d: &Domain, n: usize, seed: u64) -> Vec<Point> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = d.bounding_box();
        let pad = (hi - lo) * 0.5;
        let (lo, hi) = (lo - pad, hi + pad);
        (0..n)
            .map(|_| Point::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y), rng.gen_range(lo.z..hi.z)))
            .collect()
    }

    #[test]
    fn contains_agrees_with_sign_on_random_probes() {
        for d in primitives() {
            for p in probes(&d, 100_000, 1) {
                assert_eq!(d.contains(&p), d.signed_distance(&p) <= 0.0);
            }
        }
    }

    #[test]
    fn exterior_projection_lands_on_boundary() {
        for d in primitives() {
            let tol = 1e-10 * d.diameter();
            let mut count = 0;
            for p in probes(&d, 40_000, 2) {
                if d.signed_distance(&p) <= 0.0 {
                    continue;
                }
                count += 1;
                let q = d.project_to_boundary(&p).unwrap();
                assert!(d.signed_distance(&q).abs() <= tol, "{d:?} {p:?} -> {q:?}");
                // Idempotence: nudge outward and project again.
                let out = q + (p - q).normalize() * 1e-12;
                let r = d.nearest_surface_point(&out);
                assert!((r - q).norm() <= 1e-9, "{d:?} {q:?} -> {r:?}");
                if count == 10_000 {
                    break;
                }
            }
            assert_eq!(count, 10_000, "{d:?}");
        }
    }

    #[test]
    fn signed_distance_is_one_lipschitz() {
        for d in primitives() {
            let ps = probes(&d, 20_001, 3);
            for w in ps.windows(2) {
                let gap = (d.signed_distance(&w[0]) - d.signed_distance(&w[1])).abs();
                assert!(gap <= (w[0] - w[1]).norm() + 1e-12);
            }
        }
    }
}

