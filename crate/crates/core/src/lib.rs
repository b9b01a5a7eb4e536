//! Disordered pinning of a renewal chain at a defect site.
//!
//! A chain returns to `0` after i.i.d. excursions with
//! `P(E = n) = phi(n) / (Z n^c)`, and collects `beta (u + V_n)` per return,
//! where `u = Delta - beta / 2` and `V_n` is standard Gaussian disorder.
//!
//! - [`excursion`]: the excursion law, its tails, Laplace transforms and
//!   tilted truncations.
//! - [`annealed`]: the homogeneous (disorder-averaged) model: free energy,
//!   contact density, correlation and coarse scales, crossover `Delta0(beta)`.
//! - [`quenched`]: seeded disorder and exact log-domain partition recursions.
//! - [`pathkit`]: exact path sampling and skeleton decompositions.
//! - [`oracle`]: brute-force enumeration and renewal identities for checks.
//! - [`scan`]: replicated parameter sweeps with CSV/JSON output.

// `!(x > 0.0)` guards deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annealed;
mod error;
pub mod excursion;
pub mod numeric;
pub mod oracle;
pub mod pathkit;
pub mod quenched;
pub mod scan;

pub use error::{Error, Result};
