//! Numerical study of the supercritical biharmonic equation `Δ²u = |u|^{p-1}u`
//! and of the Dirichlet problem `Δ²u = λ(1+u)^p` in the unit ball.
//!
//! The crate covers the critical exponents ([`exponents`]), the linearization
//! around the singular solution ([`spectrum`]), radial shooting from the
//! regular centre ([`radial`], [`shooting`]), the Emden–Fowler autonomous
//! picture ([`emden_fowler`]) and diagnostics built on top of them
//! ([`analysis`]).

// `!(x > y)` is used on purpose so that NaN fails validation; small
// dense linear algebra reads best with explicit indices.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod emden_fowler;
pub mod error;
pub mod exponents;
pub mod ode;
pub mod radial;
pub mod shooting;
pub mod spectrum;

pub use error::{Error, Result};
pub use exponents::{CriticalExponent, ProblemParams, Regime, RegimeKind};
pub use spectrum::{SpectrumData, WPoint};
