//! Generative curation: produce small sets of quantitatively near-optimal,
//! qualitatively diverse candidate actions when part of the decision maker's
//! value is unobserved and modelled as a stationary Gaussian process.

pub mod baselines;
pub mod bench;
pub mod dis_gc;
pub mod error;
pub mod gp_truth;
pub mod grid_solver;
pub mod inner;
pub mod interp;
pub mod nn_gc;
pub mod kernels;
pub mod normal;
pub mod objective;
pub mod policy;
pub mod preference;
pub mod problem;
pub mod quadrature;
pub mod space;

pub use error::{CurateError, Result};
pub use kernels::{ActionPoint, Kernel, KernelConfig};
pub use objective::CurationObjectiveParams;
pub use policy::DiscretePolicy;
pub use space::ActionSpace;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/kernels.md")]
    pub struct Kernels;
    #[doc = include_str!("../../../book/src/objective.md")]
    pub struct Objective;
    #[doc = include_str!("../../../book/src/policies.md")]
    pub struct Policies;
    #[doc = include_str!("../../../book/src/generators.md")]
    pub struct Generators;
    #[doc = include_str!("../../../book/src/preferences.md")]
    pub struct Preferences;
    #[doc = include_str!("../../../book/src/benchmarks.md")]
    pub struct Benchmarks;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
