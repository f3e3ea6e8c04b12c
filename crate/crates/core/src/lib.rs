//! Worst-case generalized Nash equilibria of games whose coupled constraint
//! has uncertain coefficients.
//!
//! Each player's uncertainty set is replaced by an inscribed polytope, the
//! worst case over the polytope is dualized into a certain extended game,
//! and that game is solved by distributed projected dynamics with multiplier
//! consensus over a communication graph. The [`verify`] module measures how
//! far the result is from an equilibrium of the original game.

#![allow(clippy::needless_range_loop)]

pub mod dynamics;
pub mod error;
pub mod game;
pub mod harness;
pub mod polytope;
pub mod transform;
pub mod verify;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod testing;
