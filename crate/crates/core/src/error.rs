//! Error type shared by all pipeline stages.

use core::fmt;

/// Failure modes of the recovery pipeline.
///
/// Each variant corresponds to a distinct exit code in the CLI, so callers
/// can tell a degenerate spectrum apart from e.g. a near-singular solve.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Domain specification violates an invariant (non-positive extent,
    /// grid count below the minimum).
    InvalidSpec(&'static str),
    /// A sampled field value is NaN or infinite.
    NonFiniteValue,
    /// Array shapes do not match the domain grid.
    ShapeMismatch,
    /// The eigensolver failed to converge.
    SolverFailure,
    /// The shifted system `A - lambda M` is numerically singular; `lambda`
    /// is too close to an eigenvalue.
    NearSingular,
    /// The eigensystem does not cover the requested lambda range.
    TruncationInsufficient,
    /// The lambda grid is too coarse to resolve gaps of size `eps_gap`.
    UnresolvedGrid,
    /// Two eigenvalues are closer than `eps_gap`; the simplicity hypothesis
    /// is violated and the pipeline must stop.
    DegenerateSpectrum,
    /// Requested `lambda` is within `eps_gap` of a retained eigenvalue.
    NearEigenvalue,
    /// A squared trace is identically below the zero threshold.
    ZeroFunction,
    /// The vanishing-order fit cannot separate candidate orders.
    OrderAmbiguous { location: f64, confidence: f64 },
    /// The accumulated sign after traversing the closed boundary curve is
    /// not +1; some zero order was misestimated.
    ParityInconsistent,
    /// Input squares differ; the square-uniqueness check does not apply.
    PreconditionViolated,
    /// Gauss-Newton line search found no decreasing step.
    DivergedLineSearch,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidSpec(msg) => write!(f, "invalid domain spec: {msg}"),
            Error::NonFiniteValue => write!(f, "sampled value is not finite"),
            Error::ShapeMismatch => write!(f, "array shape does not match the domain grid"),
            Error::SolverFailure => write!(f, "eigensolver failed to converge"),
            Error::NearSingular => write!(f, "shifted system is near-singular"),
            Error::TruncationInsufficient => {
                write!(f, "eigensystem truncation does not cover the lambda grid")
            }
            Error::UnresolvedGrid => write!(f, "lambda grid spacing exceeds eps_gap/2"),
            Error::DegenerateSpectrum => write!(f, "eigenvalue gap below eps_gap (non-simple spectrum)"),
            Error::NearEigenvalue => write!(f, "lambda is within eps_gap of an eigenvalue"),
            Error::ZeroFunction => write!(f, "squared trace is identically below threshold"),
            Error::OrderAmbiguous { location, confidence } => write!(
                f,
                "vanishing order ambiguous at s={location} (confidence {confidence})"
            ),
            Error::ParityInconsistent => {
                write!(f, "sign does not close up around the boundary curve")
            }
            Error::PreconditionViolated => write!(f, "input squares differ"),
            Error::DivergedLineSearch => write!(f, "no decreasing Gauss-Newton step found"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
