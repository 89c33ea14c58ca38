//! Modeling, simulation, fitting and batch-size optimization for iteration
//! batch unrolling: running `I_k` iterations of a GPU kernel as `I`
//! launches of a task graph that chains `S` kernels.
//!
//! - [`model`]: closed-form creation, execution, baseline and speedup times.
//! - [`sim`]: virtual-clock event traces of both timelines.
//! - [`workloads`]: vector, Hotspot and FDTD steppers run in loop or
//!   batched-chain order.
//! - [`fitting`]: least-squares fits of the creation and execution models.
//! - [`optimizer`]: divisor search for the best batch size and the
//!   crossover batch count.
//! - [`io`]: parameter and CSV formats shared with the CLI.

pub mod error;
pub mod fitting;
pub mod io;
pub mod model;
pub mod optimizer;
pub mod sim;
pub mod workloads;

pub use error::{Error, Result};
pub use fitting::{
    fit_creation, fit_execution, fit_validity_filter, FitKind, FitResult, MeasurementPoint,
    MeasurementSeries,
};
pub use model::{
    BatchPlan, MemoryModel, ReciprocalCoefficients, SampleStats, SpeedupEstimate,
    TimingParameters,
};
pub use optimizer::{
    crossover_batches, feasible_batch_sizes, recommend, CostModel, FittedCoefficients,
    RecommendOptions, Recommendation,
};
pub use sim::{simulate_baseline, simulate_graph, trace_summary, EventKind, EventTrace, TraceSummary};
