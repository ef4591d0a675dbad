//! Error types shared across the crate.
//!
//! Structured variants exist wherever a caller can act on the distinction:
//! resonance guards must identify the offending denominator so sweep rows can
//! report it, labeling failures must name the states involved, and validation
//! errors are kept separate from numerical ones so the CLI can map them to
//! different exit codes.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the engine.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A matrix expected to be Hermitian is not, beyond tolerance.
    #[error("matrix not hermitian (max |H - H\u{2020}| element = {defect:.3e})")]
    NonHermitian {
        /// Largest absolute deviation between the matrix and its adjoint.
        defect: f64,
    },

    /// A perturbative denominator straddles a resonance.
    #[error(
        "resonant denominator {term} = {value_ghz:.6} GHz (|value| < guard \
         {guard_ghz:.6} GHz) while evaluating {context}"
    )]
    ResonantDenominator {
        /// Human-readable name of the offending denominator.
        term: String,
        /// Denominator value in linear GHz.
        value_ghz: f64,
        /// Guard threshold in linear GHz.
        guard_ghz: f64,
        /// The quantity being evaluated when the guard tripped.
        context: &'static str,
    },

    /// Dressed-state labeling found no eigenvector with majority overlap.
    #[error(
        "state {label} cannot be labeled: best available overlap\u{00b2} = \
         {overlap2:.4} < 0.5 (non-dispersive regime)"
    )]
    NonDispersiveLabel {
        /// Occupation-number label, e.g. "|110>".
        label: String,
        /// Best overlap-squared still available for this label.
        overlap2: f64,
    },

    /// Two labels claim the same eigenvector with indistinguishable weight.
    #[error("ambiguous labeling: {label_a} and {label_b} tie for one eigenvector")]
    AmbiguousLabel {
        /// First competing label.
        label_a: String,
        /// Second competing label.
        label_b: String,
    },

    /// A required label is absent from a labeled spectrum.
    #[error("label {label} missing from the labeled spectrum")]
    MissingLabel {
        /// The absent occupation-number label.
        label: String,
    },

    /// The undriven propagator is not diagonal in the dressed basis.
    #[error(
        "idle propagator has off-diagonal weight {max_offdiag:.3e} (> {tol:.1e}); \
         residual exchange coupling invalidates the phase reference"
    )]
    NonDiagonalIdle {
        /// Largest off-diagonal magnitude in the computational block.
        max_offdiag: f64,
        /// Tolerance that was exceeded.
        tol: f64,
    },

    /// Matrix or vector dimensions do not match the operation.
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch {
        /// Expected shape, formatted.
        expected: String,
        /// Actual shape, formatted.
        got: String,
    },

    /// Invalid input: configuration, parameters, or schema violations.
    #[error("invalid input: {0}")]
    Validation(String),

    /// A numerical procedure failed (step-size underflow, budget exhausted...).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for errors caused by bad input rather than runtime numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_) | Error::ShapeMismatch { .. })
    }
}

/// Formats an occupation-number label as `|n1 n2 ...>` without spaces.
pub fn format_label(label: &[usize]) -> String {
    let digits: String = label.iter().map(|n| n.to_string()).collect();
    format!("|{digits}>")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_classification() {
        assert!(Error::Validation("x".into()).is_validation());
        assert!(!Error::Numerical("x".into()).is_validation());
    }

    #[test]
    fn label_formatting() {
        assert_eq!(format_label(&[1, 0, 1]), "|101>");
        assert_eq!(format_label(&[0, 2, 1, 0, 0]), "|02100>");
    }
}
