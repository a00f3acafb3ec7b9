//! Numerical laboratory for finite-time blow-up dynamics: superlinear
//! scalar ODEs, Keller-Osserman large solutions, dynamic boundary
//! conditions on a ball, singular delayed controls that continue
//! trajectories past their blow-up time, and the exact self-similar
//! solutions of the balanced power case.

// `!(x > 0.0)`-style guards are deliberate: they reject NaN along with
// the out-of-range sign.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod law;
pub mod ode;
pub mod quad;
pub mod roots;
pub mod scalar;
pub mod variation;
pub mod neutral;
pub mod elliptic;
pub mod boundary;
pub mod selfsim;

pub use error::{Error, Result};
pub use law::{
    domination_report, AbsorptionKind, AbsorptionLaw, DominationRegime, DominationReport,
    ForcingKind, ForcingLaw, ProbeGrid, TruncatedAbsorption, TruncatedForcing,
};
