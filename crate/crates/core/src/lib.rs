//! Relativistic quantum Otto engine driven by a three-level Unruh–DeWitt
//! detector.
//!
//! The working substance is a ladder-type (spin-1) qutrit coupled linearly to
//! a massless scalar field along a timelike trajectory. The crate provides
//!
//! * [`detector`]: energy levels, gap schedules, the coupling operator and
//!   switching profiles,
//! * [`correlator`]: pullback Wightman functions for inertial, uniformly
//!   accelerated and thermal detectors (plus user supplied tables),
//! * [`response`]: response functions and the coherence integrals of one
//!   interaction stage, evaluated by adaptive quadrature,
//! * [`dyson`]: a brute-force second-order Dyson evolution used to validate the
//!   closed-form population and coherence shifts,
//! * [`cycle`]: the four strokes, cycle closure and extracted work,
//! * [`pwc`]: effective temperatures and the positive work condition.
//!
//! Natural units (ħ = c = k_B = 1) are used throughout. Every 3×3 matrix is
//! written in the basis order `{e₂, e₁, e₀}`, i.e. highest level first.

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correlator;
pub mod cycle;
pub mod detector;
pub mod dyson;
pub mod error;
pub mod pwc;
pub mod quadrature;
pub mod response;

pub use correlator::{CorrelatorKind, CorrelatorSpec, TabulatedCorrelator};
pub use cycle::{ClosureSolution, CycleConfig, CycleReport, StrokeLedger};
pub use detector::{GapConfig, GapSchedule, QutritState, SignTriple, SwitchingProfile, SwitchingShape};
pub use error::{Error, Result};
pub use pwc::{EffectiveTemperature, PwcReport};
pub use response::{QuadConfig, ResponseSet, Stage};
