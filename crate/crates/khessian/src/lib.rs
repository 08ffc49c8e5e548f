//! Numerical toolkit for k-Hessian equations `sigma_k(lambda(D^2 u)) = f`.
//!
//! The crate is organized around one workflow: solve Dirichlet problems on a
//! growing family of ellipsoidal domains, certify each solution between
//! explicit radial sub-/supersolution barriers, extract the limiting entire
//! solution on a compact set, and quantify how fast it approaches its
//! quadratic asymptote.
//!
//! Module map:
//! * [`symfunc`] — elementary symmetric functions, Newton tensors, cone
//!   membership, the normalized operator `F = sigma_k^(1/k)`;
//! * [`eig`] — small symmetric eigensolvers (closed forms, Jacobi, QL);
//! * [`quad`] — adaptive Gauss–Kronrod quadrature;
//! * [`fmodel`] — analytic right-hand-side families with certified tails;
//! * [`barriers`] — radial sub-/supersolution profiles and their constants;
//! * [`grid`] — tensor grids, ellipsoid masks, field I/O (binary + CSV);
//! * [`sparse`] — CSR matrices, ILU(0), BiCGSTAB for the Newton steps;
//! * [`dirichlet`] — discrete Hessians, damped Newton, continuation;
//! * [`entire`] — nested-domain runs, barrier sandwich checks, limits;
//! * [`asymptotics`] — quadratic-remainder fits and radial potentials;
//! * [`liouville`] — rescaling diagnostics and Hessian-decay metrics.

pub mod asymptotics;
pub mod barriers;
pub mod dirichlet;
pub mod eig;
pub mod entire;
pub mod error;
pub mod fmodel;
pub mod grid;
pub mod liouville;
pub mod quad;
pub mod sparse;
pub mod symfunc;

pub use error::{Error, Result};
