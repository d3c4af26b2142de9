//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised while building or validating a network.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("duplicate equilibrium id {0}")]
    DuplicateEquilibrium(u32),
    #[error("duplicate connection id {0}")]
    DuplicateConnection(u32),
    #[error("connection {connection} references unknown equilibrium id {endpoint}")]
    DanglingEndpoint { connection: u32, endpoint: u32 },
    #[error("equilibrium {id} has position of dimension {got}, expected {expected}")]
    DimensionMismatch { id: u32, got: usize, expected: usize },
    #[error("connection {connection} witness has dimension {got}, expected {expected}")]
    WitnessDimension { connection: u32, got: usize, expected: usize },
    #[error("witness of connection {connection} coincides with equilibrium {equilibrium}")]
    WitnessAtEquilibrium { connection: u32, equilibrium: u32 },
    #[error("network is not connected: equilibrium {0} is unreachable from equilibrium {1}")]
    Disconnected(u32, u32),
    #[error("network has no equilibria")]
    Empty,
}

/// Errors raised by sequence algebra.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SequenceError {
    #[error("unknown connection id {0}")]
    UnknownSymbol(u32),
    #[error("endpoint mismatch at index {index}: connection {previous} does not lead into {next}")]
    EndpointMismatch { index: usize, previous: u32, next: u32 },
    #[error("shift by {shift} exceeds finite length {len}")]
    ShiftPastEnd { shift: usize, len: usize },
    #[error("periodic tail must be nonempty")]
    EmptyTail,
    #[error("generator rule needs a nonempty filler and a positive step")]
    DegenerateRule,
    #[error("horizon {0} too small, need at least 2")]
    HorizonTooSmall(usize),
    #[error("sequence is finite ({len} symbols), index {index} out of range")]
    IndexPastEnd { index: usize, len: usize },
}

/// Errors raised when constructing or applying a cycle coding.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodingError {
    #[error("coding has no symbols")]
    Empty,
    #[error("coded word for '{0}' is empty")]
    EmptyWord(String),
    #[error("coded word for '{label}' does not start at the anchor connection {anchor}")]
    NotAnchored { label: String, anchor: u32 },
    #[error("coded word for '{label}' is not a valid path: {source}")]
    InvalidWord {
        label: String,
        #[source]
        source: SequenceError,
    },
    #[error("coded word for '{label}' does not return to the anchor's source equilibrium")]
    NotClosed { label: String },
    #[error("coded word for '{shorter}' is a prefix of the word for '{longer}'; parsing would be ambiguous")]
    AmbiguousParse { shorter: String, longer: String },
    #[error("sequence is not codable: block mismatch at symbol index {index}")]
    NotCodable { index: usize },
    #[error("unknown cycle label '{0}'")]
    UnknownLabel(String),
}

/// Errors raised by vector fields and the integrator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("vector field does not vanish at declared equilibrium {index}: |f| = {residual:.3e}")]
    EquilibriumResidual { index: usize, residual: f64 },
    #[error("initial state has dimension {got}, field expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),
    #[error("state norm {norm:.3e} exceeded escape radius {radius:.3e} at t = {time:.6}")]
    Escaped { time: f64, norm: f64, radius: f64 },
    #[error("step size underflow at t = {time:.6}")]
    StepUnderflow { time: f64 },
    #[error("non-finite state at t = {time:.6}")]
    NonFiniteState { time: f64 },
    #[error("point is not an equilibrium: |f| = {residual:.3e}")]
    NotAnEquilibrium { residual: f64 },
    #[error("failed to trace connection {connection}: {reason}")]
    TraceFailed { connection: u32, reason: String },
}

/// Errors raised while assembling neighborhoods or reading itineraries.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ItineraryError {
    #[error("tube radius must be positive, got {0}")]
    EmptyTube(f64),
    #[error("tube of radius {delta} self-intersects: connections {a} and {b} pass within {distance:.3e}")]
    TubeSelfIntersects { delta: f64, a: u32, b: u32, distance: f64 },
    #[error("trajectory never enters any equilibrium neighborhood")]
    NoAnchor,
    #[error("trajectory never settles in the tube within the record")]
    NeverSettles,
    #[error("geometry has no polyline for connection {0}")]
    MissingPolyline(u32),
    #[error("word contains connection {0} absent from the network")]
    UnknownConnection(u32),
}

/// Errors raised by the return-map model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReturnMapError {
    #[error("offset must lie in (0, {upper}), got {value}")]
    OffsetOutOfRange { value: f64, upper: f64 },
    #[error("rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("{name} must be {requirement}, got {value}")]
    BadConstant { name: &'static str, requirement: &'static str, value: f64 },
    #[error("turn count must be at least 1, got {0}")]
    BadTurnCount(f64),
    #[error("no real solution at m = {m}: log argument {argument:.3e} is not positive")]
    Saturated { m: f64, argument: f64 },
    #[error("turn-count relation needs both ratios above 1, got ({0}, {1})")]
    NotContracting(f64, f64),
    #[error("empty or inverted range [{0}, {1}]")]
    BadRange(f64, f64),
}

/// Errors raised by Monte Carlo estimation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasinError {
    #[error("sampling plan needs at least one sample")]
    NoSamples,
    #[error("acceptance rate {rate:.3e} below 1e-4 after {proposals} proposals; region and geometry are mismatched")]
    AcceptanceTooLow { rate: f64, proposals: usize },
    #[error("sampling region has dimension {got}, expected {expected}")]
    RegionDimension { got: usize, expected: usize },
    #[error("ball region needs a positive radius, got {0}")]
    BadRadius(f64),
    #[error("need estimates at two or more tube radii to classify, got {0}")]
    NotEnoughDeltas(usize),
    #[error("shift depth {k} leaves no symbols of the {len}-symbol prefix")]
    ShiftTooDeep { k: usize, len: usize },
}

/// Top-level error for library consumers.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    Coding(#[from] CodingError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Itinerary(#[from] ItineraryError),
    #[error(transparent)]
    ReturnMap(#[from] ReturnMapError),
    #[error(transparent)]
    Basin(#[from] BasinError),
    #[error("spec file error: {0}")]
    Spec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
