//! Overlapping Schwarz domain decomposition with physics-informed neural
//! network subdomain solvers.
//!
//! Each subdomain problem of an elliptic PDE is discretized by a small tanh
//! network trained on collocation residuals. The outer loop exchanges
//! interface data between subdomains until it stops changing. See the guide
//! in `book/` for a walkthrough; [`solve_ddm`] is the entry point.

pub mod config;
pub mod ddm;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod net;
pub mod optim;
pub mod pde;
pub mod verify;

pub use config::ExperimentConfig;
pub use ddm::{solve_ddm, solve_single, DdmResult, RunStatus};
pub use error::{DdmError, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/problems.md")]
    mod problems {}
    #[doc = include_str!("../../../book/src/schwarz.md")]
    mod schwarz {}
    #[doc = include_str!("../../../book/src/reports.md")]
    mod reports {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
}
