//! Functional workloads executed in plain-loop order or as repeated launches
//! of an unrolled kernel chain.

mod fdtd;
mod graph;
mod hotspot;
mod vector;

use std::hash::Hasher;
use std::time::Instant;

pub use fdtd::{
    cfl_limit, fdtd_e_step, fdtd_h_step, FdtdWorkload, Field3, SPEED_OF_LIGHT,
    VACUUM_PERMEABILITY, VACUUM_PERMITTIVITY,
};
pub use graph::{ExecutableGraph, KernelGraph};
pub use hotspot::{hotspot_step, HotspotWorkload};
pub use vector::{vector_scale_step, VectorWorkload};

use crate::error::{Error, Result};
use crate::fitting::MeasurementSeries;
use crate::model::BatchPlan;

/// How a stepper walks its output grid. Both produce identical bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    #[default]
    Serial,
    /// Partition output rows or slabs across the current rayon pool.
    Rayon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelStep {
    VectorScale,
    HotspotDiffuse,
    FdtdMagnetic,
    FdtdElectric,
}

/// The kernel steps making up one iteration of a workload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainProgram {
    steps: Vec<KernelStep>,
}

impl ChainProgram {
    pub fn new(steps: Vec<KernelStep>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidParameter("chain program needs at least one step".into()));
        }
        Ok(Self { steps })
    }

    pub fn vector() -> Self {
        Self {
            steps: vec![KernelStep::VectorScale],
        }
    }

    pub fn hotspot() -> Self {
        Self {
            steps: vec![KernelStep::HotspotDiffuse],
        }
    }

    /// H update followed by E update.
    pub fn fdtd() -> Self {
        Self {
            steps: vec![KernelStep::FdtdMagnetic, KernelStep::FdtdElectric],
        }
    }

    /// The program matching a workload's family.
    pub fn for_state(state: &WorkloadState) -> Self {
        match state {
            WorkloadState::Vector(_) => Self::vector(),
            WorkloadState::Hotspot(_) => Self::hotspot(),
            WorkloadState::Fdtd(_) => Self::fdtd(),
        }
    }

    pub fn steps(&self) -> &[KernelStep] {
        &self.steps
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorkloadState {
    Vector(VectorWorkload),
    Hotspot(HotspotWorkload),
    Fdtd(FdtdWorkload),
}

impl WorkloadState {
    /// Applies one kernel step in place.
    pub fn apply(&mut self, step: KernelStep, par: Parallelism) -> Result<()> {
        match (step, self) {
            (KernelStep::VectorScale, WorkloadState::Vector(w)) => w.step(par),
            (KernelStep::HotspotDiffuse, WorkloadState::Hotspot(w)) => w.step(par),
            (KernelStep::FdtdMagnetic, WorkloadState::Fdtd(w)) => w.h_step(par),
            (KernelStep::FdtdElectric, WorkloadState::Fdtd(w)) => w.e_step(par),
            (step, state) => {
                return Err(Error::InvalidParameter(format!(
                    "kernel step {step:?} does not apply to a {} workload",
                    state.family()
                )))
            }
        }
        Ok(())
    }

    pub fn family(&self) -> &'static str {
        match self {
            WorkloadState::Vector(_) => "vector",
            WorkloadState::Hotspot(w) if w.dims() == 2 => "hotspot2d",
            WorkloadState::Hotspot(_) => "hotspot3d",
            WorkloadState::Fdtd(_) => "fdtd",
        }
    }

    fn arrays(&self) -> Vec<&[f64]> {
        match self {
            WorkloadState::Vector(w) => w.arrays().to_vec(),
            WorkloadState::Hotspot(w) => w.arrays().to_vec(),
            WorkloadState::Fdtd(w) => w.arrays().to_vec(),
        }
    }

    /// 64-bit FNV-1a over the little-endian bytes of every state array,
    /// in declaration order.
    pub fn checksum(&self) -> u64 {
        let mut hasher = fnv::FnvHasher::default();
        for array in self.arrays() {
            for v in array {
                hasher.write(&v.to_le_bytes());
            }
        }
        hasher.finish()
    }
}

/// Runs the program `total_iterations` times in a plain loop.
pub fn run_loop(
    program: &ChainProgram,
    state: WorkloadState,
    total_iterations: u64,
) -> Result<WorkloadState> {
    run_loop_with(program, state, total_iterations, Parallelism::Serial)
}

pub fn run_loop_with(
    program: &ChainProgram,
    mut state: WorkloadState,
    total_iterations: u64,
    par: Parallelism,
) -> Result<WorkloadState> {
    for _ in 0..total_iterations {
        for &step in program.steps() {
            state.apply(step, par)?;
        }
    }
    Ok(state)
}

/// Unrolls `batch_size` iterations into one kernel chain and launches it
/// `num_batches` times.
pub fn run_batched(
    program: &ChainProgram,
    state: WorkloadState,
    batch_size: u64,
    num_batches: u64,
) -> Result<WorkloadState> {
    run_batched_with(program, state, batch_size, num_batches, Parallelism::Serial)
}

pub fn run_batched_with(
    program: &ChainProgram,
    mut state: WorkloadState,
    batch_size: u64,
    num_batches: u64,
    par: Parallelism,
) -> Result<WorkloadState> {
    let plan = BatchPlan::from_batches(batch_size, num_batches)?;
    let graph = KernelGraph::unrolled_chain(program, plan.batch_size()).instantiate()?;
    for _ in 0..plan.num_batches() {
        graph.launch(&mut state, par)?;
    }
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TimingMode {
    /// Plain loop, one step at a time.
    Baseline,
    /// Build the unrolled chain, then launch it once per batch.
    GraphOrder,
}

/// Wall-clock seconds for `repeats` full executions of `plan`.
///
/// Each repetition starts from a fresh clone of `initial`; the clone is made
/// outside the timed region. Graph-order timings include building the chain.
pub fn time_workload(
    program: &ChainProgram,
    initial: &WorkloadState,
    plan: &BatchPlan,
    mode: TimingMode,
    repeats: usize,
) -> Result<MeasurementSeries> {
    if repeats == 0 {
        return Err(Error::InvalidParameter("repeats must be at least 1".into()));
    }
    let mut series = MeasurementSeries::new(initial.family());
    for _ in 0..repeats {
        let state = initial.clone();
        let start = Instant::now();
        let out = match mode {
            TimingMode::Baseline => run_loop(program, state, plan.total_kernel_executions())?,
            TimingMode::GraphOrder => {
                run_batched(program, state, plan.batch_size(), plan.num_batches())?
            }
        };
        let elapsed = start.elapsed().as_secs_f64();
        drop(out);
        series.push_sample(plan.batch_size(), elapsed);
    }
    Ok(series)
}
