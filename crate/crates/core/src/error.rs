use thiserror::Error;

#[derive(Debug, Error)]
pub enum DgError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported element type {kind} at line {line}")]
    UnsupportedElementType { line: usize, kind: u32 },

    #[error("degenerate element {element} (measure {measure:e})")]
    DegenerateElement { element: usize, measure: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("face shared by {count} elements (vertices {vertices:?})")]
    NonConforming { count: usize, vertices: Vec<usize> },

    #[error("hanging node: vertex {vertex} lies inside a boundary face")]
    HangingNode { vertex: usize },

    #[error("boundary face of element {element} (local face {face}) has no tag")]
    UntaggedBoundary { element: usize, face: usize },

    #[error("no boundary condition configured for tag '{0}'")]
    MissingBoundary(String),

    #[error("periodic tags '{a}' and '{b}' cannot be paired: {reason}")]
    PeriodicMismatch { a: String, b: String, reason: String },

    #[error("unsupported basis (dim {dim}, order {order})")]
    UnsupportedBasis { dim: usize, order: usize },

    #[error("nonphysical state in element {element}")]
    NonPhysical { element: usize },

    #[error("unknown problem '{0}'")]
    UnknownProblem(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("Newton did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("GMRES stagnated at relative residual {residual:e}")]
    GmresStagnation { residual: f64 },

    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<DgError>,
    },

    #[error("empty snapshot window")]
    EmptyWindow,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("reference norm is zero")]
    ZeroNorm,

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = DgError> = std::result::Result<T, E>;
