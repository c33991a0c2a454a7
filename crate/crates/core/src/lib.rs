//! Standing and traveling waves of the counter-rotating vortex filament pair.
//!
//! The distance `w1 = u1 - u2` between the filaments obeys
//! `∂t^2 w1 = -∂s^4 w1 + ∂s^2(|w1|^-2 w1)`, with the straight solution
//! `w1 = a`. This crate locates the distances `a0` at which periodic
//! standing waves bifurcate (exactly, in rational arithmetic), computes the
//! branches by a Lyapunov–Schmidt split with a contraction for the range
//! part, computes traveling-wave profiles, and checks all of it against a
//! time integrator of the underlying first-order system.

pub mod cli;
pub mod error;
pub mod evolution;
pub mod fourier;
pub mod io;
pub mod lattice;
pub mod par;
pub mod standing;
pub mod transform;
pub mod travel;

pub use error::{Error, Result};
