//! Certified topological conjugacies for generalized hyperbolic operators.
//!
//! An invertible operator `T` on a Banach space `X` is generalized hyperbolic
//! when `X = M ⊕ N` with `T(M) ⊆ M`, `T^{-1}(N) ⊆ N` and both `T|_M` and
//! `T^{-1}|_N` of spectral radius below one. Such operators are strongly
//! structurally stable: for a bounded Lipschitz `β` with `‖β‖_∞` and
//! `Lip(β)` below an explicit `ε`, the map `S = T + β` is conjugate to `T`
//! by a homeomorphism `H = I + h` with `‖h‖_∞ <= γ`.
//!
//! The crate evaluates these conjugacies point by point with certified
//! error bounds and verifies the conjugacy identities numerically:
//!
//! * [`state`]: dense vectors and finitely supported sequences.
//! * [`operator`]: matrices and bilateral weighted shifts, their splittings
//!   and decay constants.
//! * [`perturbation`]: bounded Lipschitz perturbations and cutoffs.
//! * [`conjugacy`]: the conjugacies `h`, `h'` and their verification.
//! * [`linearize`]: local linearization near a fixed point and Hölder
//!   certificates.
//! * [`cli`]: JSON-configured runs used by the `gh-conjugacy` binary.

pub mod cli;
pub mod conjugacy;
pub mod error;
pub mod linearize;
pub mod operator;
pub mod perturbation;
pub mod sampling;
pub mod state;

pub use error::{Error, Result};
