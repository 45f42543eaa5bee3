//! Penalized spectral shape optimization for divergence-form operators.
//!
//! Minimizes `λ₁(Ω) + ⋯ + λₖ(Ω) + Λ|Ω|` for `-div(A∇u) = λ b u` over open
//! subsets of a box by a fictitious-domain relaxation, then audits the
//! computed free boundary (density, Weiss energy, blow-ups, optimality).

pub mod coeffs;
pub mod diagnostics;
pub mod eigensolve;
pub mod error;
pub mod freeboundary;
pub mod grid;
pub mod io;
pub mod operator;
pub mod optimizer;
pub mod oracle;
pub mod run;

pub use error::{Error, Result};
