use nalgebra::{Rotation3, Unit};

use crate::discretization::{MaterialPointSet, NodeSet};
use crate::{Domain, Mat3, OtmError, Point, Result};

/// Prescribed advection velocity `u(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum AdvectionField {
    Zero,
    /// Rigid rotation with angular velocity `omega` about the line through
    /// `point` along unit `axis`.
    RigidRotation { point: Point, axis: Point, omega: f64 },
    Named(NamedFlow),
}

/// Analytic flows selected by name.
#[derive(Debug, Clone, PartialEq)]
pub enum NamedFlow {
    /// `u = velocity`.
    Uniform { velocity: Point },
    /// `u = rate · (x - center)`; compressible, `∇·u = 3 rate`.
    Expansion { center: Point, rate: f64 },
    /// `u = (rate · y, 0, 0)`.
    Shear { rate: f64 },
}

impl NamedFlow {
    pub fn name(&self) -> &'static str {
        match self {
            NamedFlow::Uniform { .. } => "uniform",
            NamedFlow::Expansion { .. } => "expansion",
            NamedFlow::Shear { .. } => "shear",
        }
    }

    pub fn velocity(&self, x: &Point) -> Point {
        match self {
            NamedFlow::Uniform { velocity } => *velocity,
            NamedFlow::Expansion { center, rate } => (x - center) * *rate,
            NamedFlow::Shear { rate } => Point::new(rate * x.y, 0.0, 0.0),
        }
    }

    pub fn gradient(&self, _x: &Point) -> Mat3 {
        match self {
            NamedFlow::Uniform { .. } => Mat3::zeros(),
            NamedFlow::Expansion { rate, .. } => Mat3::identity() * *rate,
            NamedFlow::Shear { rate } => {
                let mut g = Mat3::zeros();
                g[(0, 1)] = *rate;
                g
            }
        }
    }

    pub fn is_divergence_free(&self) -> bool {
        !matches!(self, NamedFlow::Expansion { .. })
    }
}

impl AdvectionField {
    pub fn rigid_rotation(point: Point, axis: Point, omega: f64) -> Result<Self> {
        let n = axis.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(OtmError::InvalidField("rotation axis must be nonzero".into()));
        }
        Ok(AdvectionField::RigidRotation {
            point,
            axis: axis / n,
            omega,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if let AdvectionField::RigidRotation { axis, omega, .. } = self {
            if (axis.norm() - 1.0).abs() > 1e-12 {
                return Err(OtmError::InvalidField("rotation axis is not unit length".into()));
            }
            if !omega.is_finite() {
                return Err(OtmError::InvalidField("angular velocity must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        match self {
            AdvectionField::Zero => true,
            AdvectionField::RigidRotation { omega, .. } => *omega == 0.0,
            AdvectionField::Named(NamedFlow::Uniform { velocity }) => velocity.norm() == 0.0,
            AdvectionField::Named(NamedFlow::Expansion { rate, .. } | NamedFlow::Shear { rate }) => *rate == 0.0,
        }
    }

    pub fn velocity(&self, x: &Point) -> Point {
        match self {
            AdvectionField::Zero => Point::zeros(),
            AdvectionField::RigidRotation { point, axis, omega } => axis.cross(&(x - point)) * *omega,
            AdvectionField::Named(f) => f.velocity(x),
        }
    }

    pub fn gradient(&self, x: &Point) -> Mat3 {
        match self {
            AdvectionField::Zero => Mat3::zeros(),
            AdvectionField::RigidRotation { axis, omega, .. } => axis.cross_matrix() * *omega,
            AdvectionField::Named(f) => f.gradient(x),
        }
    }

    /// Volume-preserving flows leave particle volumes untouched.
    pub fn is_isochoric(&self) -> bool {
        match self {
            AdvectionField::Zero | AdvectionField::RigidRotation { .. } => true,
            AdvectionField::Named(f) => f.is_divergence_free(),
        }
    }

    /// Maps `x` by the flow over a time `dt`, returning the image and the
    /// flow Jacobian determinant.
    pub fn flow(&self, x: &Point, dt: f64) -> (Point, f64) {
        match self {
            AdvectionField::Zero => (*x, 1.0),
            AdvectionField::RigidRotation { point, axis, omega } => {
                let rot = Rotation3::from_axis_angle(&Unit::new_unchecked(*axis), omega * dt);
                (point + rot * (x - point), 1.0)
            }
            AdvectionField::Named(_) => {
                let (y, f) = rk4_with_jacobian(self, x, dt);
                (y, f.determinant())
            }
        }
    }
}

/// Classical RK4 on the trajectory and its variational equation
/// `dF/dt = ∇u(x(t)) F`, `F(0) = I`.
fn rk4_with_jacobian(field: &AdvectionField, x: &Point, dt: f64) -> (Point, Mat3) {
    let rhs = |x: &Point, f: &Mat3| (field.velocity(x), field.gradient(x) * f);
    let f0 = Mat3::identity();
    let (k1, l1) = rhs(x, &f0);
    let (k2, l2) = rhs(&(x + k1 * (0.5 * dt)), &(f0 + l1 * (0.5 * dt)));
    let (k3, l3) = rhs(&(x + k2 * (0.5 * dt)), &(f0 + l2 * (0.5 * dt)));
    let (k4, l4) = rhs(&(x + k3 * dt), &(f0 + l3 * dt));
    let y = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    let f = f0 + (l1 + l2 * 2.0 + l3 * 2.0 + l4) * (dt / 6.0);
    (y, f)
}

/// Pushes nodes and material points forward by the flow over `dt`.
///
/// Nodes carried outside the domain are projected back onto its boundary;
/// returns how many. A material point carried outside is a fatal spill.
pub fn advect_step(
    nodes: &mut NodeSet,
    mps: &mut MaterialPointSet,
    field: &AdvectionField,
    dt: f64,
    domain: &Domain,
) -> Result<usize> {
    if !(dt > 0.0) {
        return Err(OtmError::InvalidState(format!("time step must be positive, got {dt}")));
    }
    if field.is_zero() {
        return Ok(0);
    }
    let rotation = match field {
        AdvectionField::RigidRotation { point, axis, omega } => Some((
            *point,
            Rotation3::from_axis_angle(&Unit::new_unchecked(*axis), omega * dt),
        )),
        _ => None,
    };
    let map = |x: &Point| -> (Point, f64) {
        match &rotation {
            Some((c, r)) => (c + r * (x - c), 1.0),
            None => field.flow(x, dt),
        }
    };

    let mut projected = 0;
    for x in nodes.positions.iter_mut() {
        *x = map(x).0;
        if domain.signed_distance(x) > 0.0 {
            *x = domain.nearest_surface_point(x);
            projected += 1;
        }
    }
    let isochoric = field.is_isochoric();
    for p in 0..mps.len() {
        let (y, det) = map(&mps.positions()[p]);
        mps.positions_mut()[p] = y;
        if !isochoric {
            if !(det > 0.0) {
                return Err(OtmError::Inversion { particle: p, det });
            }
            let v = mps.volumes()[p] * det;
            mps.set_volume(p, v)?;
        }
    }
    super::check_containment(mps, domain)?;
    Ok(projected)
}
