//! Discrete optimal transport with linear, congestion (quadratic) and penalized costs.
//!
//! Three models share one instance type:
//!
//! * the linear model `min Σ c_ij π_ij` over plans with fixed marginals ([`linear`]),
//! * the congestion model adding `a_ij π_ij²` ([`congestion`]),
//! * the penalized model, which drops the marginal constraints in favour of
//!   weighted squared deviations and reduces to the linear system `Aπ = b`
//!   when the optimum is interior ([`penalized`]).
//!
//! The crate is `no_std` and only needs `alloc`. File formats and the
//! command-line front end live in the `congested-ot` crate.

#![cfg_attr(not(test), no_std)]
// NaN-rejecting comparisons are written as `!(x > y)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod audit;
pub mod congestion;
pub mod error;
pub mod fixtures;
pub mod instance;
pub mod linalg;
pub mod linear;
pub mod oracle;
pub mod penalized;
pub mod sensitivity;

pub use audit::{audit_assumptions, Assumption, AssumptionAudit, AssumptionCheck, Gated};
pub use error::{Error, LinalgError, RankOneUpdate, Result, ValidationError, ValidationErrors};
pub use instance::{
    evaluate_cost, Balance, KktCertificate, ModelKind, Objective, PenalizedInstance, ProblemInstance, TransportPlan,
};
pub use linalg::Matrix;
