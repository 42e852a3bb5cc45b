//! Exact computations with closed subgroups of locally compact abelian groups,
//! the Chabauty topology on them, and automorphism dynamics.

pub mod analyzer;
pub mod chabauty;
pub mod dynamics;
pub mod error;
pub mod interval;
pub mod linalg;
pub mod module;
pub mod padic;
pub mod subgroups;

pub use analyzer::{
    certify, certify_product, certify_qp_scalar, exhaustive_scan, fixed_family, refute_fixed_points,
    refute_qp2_diag, refute_real_scalar, separation, shift_asymptotic_demo, CaseEntry, Certificate,
    RefutationWitness, ScanReport, SeparationReport, ShiftDemo, TailBound,
};
pub use chabauty::{chabauty_dist, Distance, DistanceKind, MetricConfig, Route};
pub use dynamics::{is_expansive_on_g, Automorphism, QpMatrix};
pub use error::{ClabError, Result};
pub use module::{Frame, QpModule, Slot};
pub use padic::{ExactRational, PrimeContext, Valuation};
pub use subgroups::{
    AmbientGroup, CircleSubgroup, ClosedSubgroup, Element, QpSubgroup, RealSubgroup, ShiftSubgroup,
};
