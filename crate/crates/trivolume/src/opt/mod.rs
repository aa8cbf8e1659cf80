//! Shared unconstrained minimization machinery.

mod lbfgs;

pub use lbfgs::{minimize, minimize_traced, LbfgsConfig, LbfgsResult, LbfgsStatus};
