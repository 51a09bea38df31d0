//! Nested Monte Carlo estimation.
//!
//! * [`rng`] and [`dist`]: splittable random streams and primitive distributions.
//! * [`problem`] and [`estimator`]: depth-`D` nested expectations and the
//!   recursive NMC estimator.
//! * [`reformulations`]: special cases that recover the plain Monte Carlo rate.
//! * [`bounds`] and [`alloc`]: mean-squared-error bounds and sample allocations.
//! * [`models`]: the concrete experiment models.
//! * [`harness`]: replicated runs, MSE statistics, convergence and allocation sweeps.

pub mod error;
pub mod exec;
pub mod rng;
pub mod dist;
pub mod problem;
pub mod estimator;
pub mod reformulations;
pub mod bounds;
pub mod alloc;
pub mod models;
pub mod harness;

pub use error::{NmcError, Result};
pub use exec::Execution;
pub use problem::{AllocationPlan, Draw, EstimateRecord, NestedProblem};
pub use rng::{make_stream, RandomStream};
