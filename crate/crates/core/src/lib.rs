//! Nonlinear differential equations linearizable by the generalized
//! Cole–Hopf transformation `ψ = P + Q φ'/φ`, their paired linear problems,
//! and independent numerical oracles to check every result.

pub mod burgers;
pub mod colehopf;
pub mod convective;
pub mod error;
pub mod expr;
pub mod grid;
pub mod lienard;
pub mod lincore;
pub mod ode;
pub mod oracle;
pub mod painleve3;
pub mod special;
pub mod suite;
pub mod vdp;

pub use error::{Error, ErrorClass, Result};
