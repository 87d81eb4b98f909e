//! Confidence intervals for a stationary mean ḡ = Σ π_i g(i) built from a few
//! exact draws from π and many steps of a reversible chain.
//!
//! [`t1::run_t1`] runs the fixed-budget construction and
//! [`t2::run_t2`] the adaptive doubling variant. [`bounds`] evaluates the
//! closed-form probability bounds that accompany them, [`oracle`] computes
//! exact ground truth on tiny chains, and [`harness`] replicates whole
//! experiments to compare empirical frequencies with those bounds.

pub mod bounds;
pub mod chain;
pub mod error;
pub mod exec;
pub mod harness;
pub mod oracle;
pub mod report;
pub mod rng;
pub mod sampling;
pub mod spectral;
pub mod t1;
pub mod t2;

pub use chain::{validate_chain, ChainDefinition, ProbabilityVector, ReversibleChain, TransitionKernel};
pub use error::{Error, Result};
pub use exec::Execution;
pub use rng::SeededStream;
pub use spectral::{spectral_summary, RelaxationTime, SpectralSummary};
pub use t1::{run_t1, T1Config, T1Report};
pub use t2::{run_t2, T2Config, T2Report};
