use thiserror::Error;

/// Errors produced by the symbolic engine and the verifier.
///
/// Soundness-critical invariants (space mismatches, pi-degree overflow,
/// nonzero residuals where zero is mandatory) are errors, never silent
/// fallbacks.
#[derive(Debug, Error)]
pub enum StarkError {
    #[error("variable space mismatch: expected {expected}, got {got}")]
    SpaceMismatch { expected: String, got: String },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("pi-degree {0} exceeds the supported bound 2")]
    PiDegreeOverflow(u32),

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("division by zero polynomial")]
    DivisionByZero,

    #[error("polynomial is not divisible: remainder is nonzero")]
    NotDivisible,

    #[error("linear solve has no exact solution: residual is nonzero")]
    NoExactSolution,

    #[error("expression is not invariant under the flow: mode {mode} survives")]
    NotFlowInvariant { mode: i64 },

    #[error("homological equation: nonzero mean term cannot be inverted")]
    HomologicalMean,

    #[error("sampling failed after {0} attempts")]
    SamplingExhausted(u32),

    #[error("four-square decomposition failed for {0}")]
    FourSquare(String),

    #[error("empty reduced phase space: |k| > h (k = {k}, h = {h})")]
    EmptyReducedSpace { k: String, h: String },

    #[error("level value must satisfy {0}")]
    BadLevel(String),

    #[error("certified rewrite failed at `{0}`: difference does not reduce to zero")]
    RewriteNotCertified(String),

    #[error("verification hard failure: {0}")]
    Verification(String),

    #[error("golden file mismatch for {name}")]
    GoldenMismatch { name: String },

    #[error("numerical integration failed: {0}")]
    Integration(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}
