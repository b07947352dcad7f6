//! Numerical laboratory for ring-shaped blow-up of the axially symmetric
//! cubic NLS `i u_t + Δu + |u|^2 u = 0` in three dimensions.

// `!(x > 0.0)` is used on purpose: it rejects NaN together with the bound.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cutoffs;
pub mod error;
pub mod evolution;
pub mod field;
pub mod inequalities;
pub mod initdata;
pub mod io;
pub mod linearized;
pub mod modulation;
pub mod numerics;
pub mod pipeline;
pub mod profiles;
pub mod rates;
pub mod tridiag;

pub use error::{Error, Result};
pub use field::{AxialField, EpsilonField, Grid2D, LocalFrame, OutOfBounds, RescaledField, RescaledGrid2D, Stencil};
pub use num_complex::Complex64;
