//! Certified-bijective trivariate B-spline volume parameterization.
//!
//! Given the six boundary B-spline surfaces of a simply connected domain,
//! this crate constructs a tensor-product B-spline volume mapping the unit
//! cube onto the domain, in three stages:
//!
//! 1. a harmonic initial map (sparse SPD solve),
//! 2. a certified-bijective map from a slack-variable max-min optimization
//!    over collocation points, driven coarse-to-fine by a Bernstein
//!    positivity certificate,
//! 3. conformal-distortion (MIPS) refinement under a positivity barrier.
//!
//! The positivity certificate, collocation machinery, and quality metrics
//! are also usable standalone.

pub mod algebra;
pub mod bijective;
pub mod opt;
pub mod sparse;
pub mod fixtures;
pub mod harmonic;
pub mod io;
pub mod jacobian;
pub mod mips;
pub mod pipeline;
pub mod quadrature;
pub mod quality;
pub mod spline;

pub use algebra::{Box3, Mat3, Vec3};
