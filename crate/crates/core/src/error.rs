use thiserror::Error;

pub type Result<T, E = OtmError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum OtmError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("point {point:?} is not outside the domain (signed distance {distance:e})")]
    NotExterior { point: [f64; 3], distance: f64 },

    #[error("seeding failed: {0}")]
    Seeding(String),

    #[error("under-resolved: particle {particle} has {found} neighbor nodes (need at least 4)")]
    Resolution { particle: usize, found: usize },

    #[error("spill over: particle {particle} left the domain at {position:?} (signed distance {distance:e})")]
    Spill {
        particle: usize,
        position: [f64; 3],
        distance: f64,
    },

    #[error("max-ent Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("singular max-ent Hessian: neighbor nodes are coplanar or degenerate")]
    SingularHessian,

    #[error("shape functions failed at particle {particle}: {source}")]
    Shape {
        particle: usize,
        #[source]
        source: Box<OtmError>,
    },

    #[error("inverted material point {particle}: det F = {det:e}")]
    Inversion { particle: usize, det: f64 },

    #[error("conjugate gradient stalled at relative residual {residual:e} after {iterations} iterations; use the lumped mass matrix")]
    CgFailure { iterations: usize, residual: f64 },

    #[error("nonpositive volume {volume:e} at material point {particle}")]
    NonPositiveVolume { particle: usize, volume: f64 },

    #[error("measures carry different total mass ({0} vs {1})")]
    UnequalMass(f64, f64),

    #[error("transport problem too large: {size} support points exceeds cap {cap}")]
    CapExceeded { size: usize, cap: usize },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid advection field: {0}")]
    InvalidField(String),

    #[error("config line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },

    #[error("config key `{key}`: {message}")]
    ConfigValue { key: String, message: String },

    #[error("snapshot line {line}: {message}")]
    SnapshotFormat { line: usize, message: String },

    #[error("unsupported snapshot version `{0}`")]
    SnapshotVersion(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl OtmError {
    pub(crate) fn at_particle(self, particle: usize) -> Self {
        OtmError::Shape {
            particle,
            source: Box::new(self),
        }
    }
}
