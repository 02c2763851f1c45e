//! Numerical laboratory for time-fractional Hamilton–Jacobi equations with
//! rapidly oscillating periodic Hamiltonians.
//!
//! The crate is organised bottom-up:
//!
//! * [`fraccalc`]: Gamma function, Caputo quadratures (L1 and the J + K split).
//! * [`hamiltonian`]: periodic coercive Hamiltonians, initial data, monotone fluxes.
//! * [`cell`]: discounted cell problem and the effective Hamiltonian table.
//! * [`tfhj`]: monotone time steppers for the oscillatory and effective equations.
//! * [`envelopes`]: sup/inf convolutions in time and their quantitative bounds.
//! * [`homogenize`]: ε-sweeps, sup-norm errors and log–log rate fits.

pub mod cell;
pub mod envelopes;
mod error;
pub mod fmt;
pub mod fraccalc;
pub mod hamiltonian;
pub mod homogenize;
mod monotone;
pub mod tfhj;

pub use error::{Error, Result};
