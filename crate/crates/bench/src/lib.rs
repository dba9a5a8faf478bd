//! Fixtures shared by the criterion benchmarks.

use otm_core::discretization::seed;
use otm_core::{Domain, MaterialPointSet, NodeSet, Point};

/// Unit ball seeded at `spacing` inside a sphere of radius 3.
pub fn unit_ball(spacing: f64) -> (Domain, NodeSet, MaterialPointSet) {
    let domain = Domain::sphere(Point::zeros(), 3.0).expect("valid container");
    let region = Domain::sphere(Point::zeros(), 1.0).expect("valid region");
    let (nodes, mps) = seed(&domain, &region, spacing, 1.0).expect("seeding succeeds");
    (domain, nodes, mps)
}
