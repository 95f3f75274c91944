#![forbid(unsafe_code)]

//! Robust Brownian control of a critically loaded multiclass queue.
//!
//! The library solves a two-player stochastic differential game in which a
//! controller keeps a workload diffusion inside an interval by idleness and
//! rejection while an adversary perturbs the drift at a quadratic
//! (Kullback--Leibler) penalty scaled by an ambiguity parameter `eps`.
//!
//! The pipeline is:
//!
//! 1. [`model`] — validate the multiclass instance and project it to the
//!    one-dimensional workload game (drift `m`, noise `sigma`, buffer `b`,
//!    piecewise-linear holding cost `h`, rejection price `r`, aggregated
//!    ambiguity `eps`), together with the lifting map `gamma` back to queue
//!    lengths.
//! 2. [`hjb`] — solve the nonlinear free-boundary equation on `[0, b]` by a
//!    shooting method, producing the value function, the reflection
//!    threshold `beta`, and the upper threshold `beta_hat`.
//! 3. [`skorokhod`] — the discrete two-sided reflection map used both by
//!    reflecting strategies and by the simulator.
//! 4. [`simulate`] — seeded Euler--Maruyama Monte Carlo for discounted costs,
//!    equilibrium gap tables, and the multidimensional lift of reduced paths.
//! 5. [`analysis`] — parameter sweeps over `eps`: monotonicity, the linear
//!    convergence to the risk-neutral limit, threshold sandwiches, and the
//!    uniqueness condition for the optimal reflecting strategy.
//!
//! Monte Carlo batches and per-`eps` solves run on rayon when the `parallel`
//! feature (default) is enabled; [`exec::ExecMode`] selects the backend and
//! degrades to sequential execution when the feature is off.

pub mod analysis;
pub mod error;
pub mod exec;
pub mod export;
pub mod hjb;
pub mod model;
pub mod simulate;
pub mod skorokhod;

pub use error::{Error, Result};
pub use exec::ExecMode;
pub use hjb::{shoot, SolverConfig, ValueSolution};
pub use model::{reduce_instance, MultiClassInstance, ReducedInstance};
