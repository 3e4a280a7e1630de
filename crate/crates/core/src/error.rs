use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("alphabet size mismatch: {left} vs {right}")]
    AlphabetMismatch { left: usize, right: usize },

    #[error("letter {letter} outside alphabet {{1..{d}}}")]
    LetterOutOfRange { letter: usize, d: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty degree window")]
    EmptyWindow,

    #[error("degree {degree} exceeds cutoff {cutoff}")]
    DegreeBeyondCutoff { degree: usize, cutoff: usize },

    #[error("no tail bound available for degree {degree}")]
    MissingTailBound { degree: usize },

    #[error("tail bound is not summable against the adjunction growth (best bound {best_bound:e})")]
    TailNotSummable { best_bound: f64 },

    #[error("tolerance unreachable within cutoff: best bound {bound:e} at degree {degree}")]
    ToleranceUnreachable { degree: usize, bound: f64 },

    #[error("similarity is numerically singular (condition number {cond:e})")]
    SingularSimilarity { cond: f64 },

    #[error("pencil not invertible at the evaluation point (reciprocal condition {rcond:e})")]
    SingularPencil { rcond: f64 },

    #[error("reference tuple outside the expression domain (reciprocal condition {rcond:e})")]
    ReferenceOutOfDomain { rcond: f64 },

    #[error("Fock basis dimension {dim} exceeds cap {cap}")]
    BasisTooLarge { dim: usize, cap: usize },

    #[error("degree window too small: {0}")]
    WindowTooSmall(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Numeric failures (as opposed to malformed input or violated preconditions).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::TailNotSummable { .. }
                | Error::ToleranceUnreachable { .. }
                | Error::SingularSimilarity { .. }
                | Error::SingularPencil { .. }
                | Error::ReferenceOutOfDomain { .. }
                | Error::WindowTooSmall(_)
        )
    }

    /// Best bound carried by a numeric failure, when there is one.
    pub fn achieved_bound(&self) -> Option<f64> {
        match self {
            Error::TailNotSummable { best_bound } => Some(*best_bound),
            Error::ToleranceUnreachable { bound, .. } => Some(*bound),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::AlphabetMismatch { .. } => "alphabet_mismatch",
            Error::LetterOutOfRange { .. } => "letter_out_of_range",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::EmptyWindow => "empty_window",
            Error::DegreeBeyondCutoff { .. } => "degree_beyond_cutoff",
            Error::MissingTailBound { .. } => "missing_tail_bound",
            Error::TailNotSummable { .. } => "tail_not_summable",
            Error::ToleranceUnreachable { .. } => "tolerance_unreachable",
            Error::SingularSimilarity { .. } => "singular_similarity",
            Error::SingularPencil { .. } => "singular_pencil",
            Error::ReferenceOutOfDomain { .. } => "reference_out_of_domain",
            Error::BasisTooLarge { .. } => "basis_too_large",
            Error::WindowTooSmall(_) => "window_too_small",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Unsupported(_) => "unsupported",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }
}
