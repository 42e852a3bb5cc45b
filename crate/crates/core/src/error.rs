use thiserror::Error;

/// Errors raised by subgroup, metric and dynamics operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClabError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("ambient mismatch: {0}")]
    AmbientMismatch(String),
    #[error("not implemented: {0}")]
    NotImplemented(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("coset budget exceeded: index {index} exceeds cap {cap} (enlarge the epsilon grid or reduce K)")]
    BudgetExceeded { index: String, cap: usize },
    #[error("interval precision exhausted at {bits} bits")]
    PrecisionExhausted { bits: u32 },
    #[error("not expansive{}: {reason}", prime.map(|p| format!(" at p = {p}")).unwrap_or_default())]
    NotExpansive { prime: Option<u64>, reason: String },
    #[error("subgroup is not invariant: generator image {image} lies outside it")]
    NotInvariant { image: String },
    #[error("family too sparse below delta: minimal achieved distance {min_achieved}")]
    FamilyTooSparse { min_achieved: String },
    #[error("support escapes the window: {0}")]
    Truncation(String),
    #[error("out of certified scope: {0}")]
    OutOfScope(String),
}

impl ClabError {
    /// True for failures caused by a finite search budget rather than bad input.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            ClabError::BudgetExceeded { .. }
                | ClabError::PrecisionExhausted { .. }
                | ClabError::FamilyTooSparse { .. }
                | ClabError::Truncation(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, ClabError>;
