//! Error type shared by every solver in the crate.

use alloc::vec::Vec;
use core::fmt;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, KamError>;

/// Failures surfaced by the spectral solvers, root finders and engines.
#[derive(Debug, Clone, PartialEq)]
pub enum KamError {
    /// Analysis grid has fewer than `2K + 2` points per axis.
    GridTooCoarse { needed: usize, got: usize },
    /// Difference-equation right-hand side carries a mean coefficient.
    NonzeroMean { magnitude: f64 },
    /// A divisor `|e^{i<k,omega>} - 1|` fell below the configured guard.
    SmallDivisorBreach { mode: Vec<i64>, divisor: f64 },
    /// Parameter sample set contains no pair at positive distance.
    DegenerateSampleSet,
    /// Degree query with the target on (or too close to) the boundary image.
    BoundaryHit,
    /// Adaptive boundary refinement hit its sample cap with a step >= pi/2.
    MeshExhausted,
    /// Bracketing / degree certificate failed: no root in the search region.
    NoRootInRegion,
    /// Root iteration stalled above the requested tolerance.
    ToleranceUnreachable { best: f64 },
    /// Range-mode target misses the image of the frequency map.
    TargetOutsideRange { best: f64, clearance: f64 },
    /// Schedule exponents violate `(1 + rho)^eta > 2`.
    BadExponents { growth: f64 },
    /// Convergence-order fit needs at least three norms above the noise floor.
    TooFewPoints,
    /// Prescribed frequency failed its Diophantine verification.
    NotDiophantine { worst_value: f64, gamma: f64 },
    /// Perturbation norms grew on two consecutive steps.
    DivergenceDetected { step: usize },
    /// Action displacement no longer brackets zero after conjugation.
    IntersectionLost { step: usize, margin: f64 },
    /// Newton inversion of the accumulated transformation did not converge.
    InversionFailure { iterations: usize, residual: f64 },
    /// Continued-fraction seed was empty or carried an entry outside 1..=2.
    BadSeed,
    /// Input dimensions do not match the operation's contract.
    DimensionMismatch { expected: usize, got: usize },
}

impl fmt::Display for KamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KamError::GridTooCoarse { needed, got } => {
                write!(f, "grid too coarse: need >= {needed} points per axis, got {got}")
            }
            KamError::NonzeroMean { magnitude } => {
                write!(f, "right-hand side has nonzero mean (|f0| = {magnitude:e})")
            }
            KamError::SmallDivisorBreach { mode, divisor } => {
                write!(f, "small divisor breach at k = {mode:?}: |e^(i<k,w>)-1| = {divisor:e}")
            }
            KamError::DegenerateSampleSet => {
                write!(f, "parameter sample set has no pair at positive distance")
            }
            KamError::BoundaryHit => write!(f, "target value lies on the boundary image"),
            KamError::MeshExhausted => {
                write!(f, "boundary mesh refinement exhausted before angle steps < pi/2")
            }
            KamError::NoRootInRegion => write!(f, "no root found inside the search region"),
            KamError::ToleranceUnreachable { best } => {
                write!(f, "iteration stalled above tolerance (best residual {best:e})")
            }
            KamError::TargetOutsideRange { best, clearance } => {
                write!(
                    f,
                    "target outside the frequency range (best residual {best:e} > clearance {clearance:e})"
                )
            }
            KamError::BadExponents { growth } => {
                write!(f, "schedule needs (1+rho)^eta > 2, got {growth}")
            }
            KamError::TooFewPoints => write!(f, "need at least three norms above the noise floor"),
            KamError::NotDiophantine { worst_value, gamma } => {
                write!(f, "frequency fails Diophantine check: worst {worst_value:e} < gamma {gamma:e}")
            }
            KamError::DivergenceDetected { step } => {
                write!(f, "perturbation norm grew on two consecutive steps (step {step})")
            }
            KamError::IntersectionLost { step, margin } => {
                write!(f, "intersection proxy failed at step {step} (margin {margin:e})")
            }
            KamError::InversionFailure { iterations, residual } => {
                write!(
                    f,
                    "transformation inversion did not converge in {iterations} iterations (residual {residual:e})"
                )
            }
            KamError::BadSeed => write!(f, "continued-fraction seed must be nonempty with entries in 1..=2"),
            KamError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
        }
    }
}

impl core::error::Error for KamError {}
