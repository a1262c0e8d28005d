//! Global radial-basis-function semidiscretizations of linear advection with
//! strongly imposed boundary values, flux-reconstruction corrections and
//! simultaneous-approximation-term penalties.

pub mod correction;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod interpolation;
pub mod kernels;
pub mod linalg;
pub mod operators;
pub mod par;
pub mod problems;
pub mod quadrature;
pub mod timestep;
pub mod xprec;

pub use error::{Error, Result};
pub use experiment::{Method, RunConfig};
pub use kernels::Kernel;
pub use problems::ProblemName;
