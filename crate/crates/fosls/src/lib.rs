//! Least-squares finite elements for the reaction-diffusion equation
//! `-Δu + γ·u = f` on the unit disk.
//!
//! The second-order problem is rewritten as the first-order system
//!
//! ```text
//! div φ + γ·u = f,      ∇u + φ = 0      in Ω,
//! ```
//!
//! and the discrete solution minimizes the L2 norm of both residuals over
//! an H(div)-conforming vector space (Raviart-Thomas or
//! Brezzi-Douglas-Marini) paired with a continuous Lagrange space. The
//! functional is coercive, so the discrete problem is symmetric positive
//! definite and the minimizer is a best approximation in the induced
//! energy norm.
//!
//! The crate provides curved triangulations of the disk (boundary cells
//! follow the circle exactly), the element spaces, assembly and solvers,
//! error measurement against manufactured solutions, the constrained
//! divergence projection and discrete Helmholtz splitting used to analyze
//! vector errors, and a convergence-study driver with CSV/SVG output
//! (see the `fosls-study` binary).

pub mod error;
pub mod point;
pub mod quadrature;
pub mod geometry;
pub mod sparse;
pub mod lagrange;
pub mod hdiv;
pub mod space;
pub mod cut;
pub mod assemble;
pub mod bessel;
pub mod radial;
pub mod cases;
pub mod norms;
pub mod plot;
pub mod projection;
pub mod study;

pub use error::{FoslsError, Result};
pub use point::{Mat2, Point2};
