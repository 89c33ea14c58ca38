//! Analytic cost model for iteration batch unrolling.
//!
//! A run of `I_k` kernel executions is split into `I` launches of a graph
//! holding a linear chain of `S` kernel nodes. The total time is the graph
//! creation cost plus the execution time of all launches:
//!
//! ```text
//! creation  = k_c * S + b_c
//! execution = t_l + (t_k * S + t_i * (S - 1)) * I + t_a * (I - 1)
//!           = I_k (t_a - t_i) / S + I_k (t_k + t_i) - t_a + t_l
//! ```
//!
//! The baseline loop launches every kernel individually:
//! `t_l + I_k * t_k + (I_k - 1) * t_b`.

use crate::error::{Error, Result};

/// Platform timing constants, all in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingParameters {
    /// Execution time of one kernel (`t_k`).
    pub kernel_time: f64,
    /// Gap between consecutive kernels inside one graph (`t_i`).
    pub intra_graph_gap: f64,
    /// Gap between consecutive graph executions (`t_a`).
    pub inter_graph_gap: f64,
    /// Latency to launch the first graph or kernel (`t_l`).
    pub launch_latency: f64,
    /// Gap between consecutive kernels in the baseline loop (`t_b`).
    pub baseline_gap: f64,
    /// Graph creation cost per node (`k_c`).
    pub creation_per_node: f64,
    /// Fixed graph creation cost: instantiation plus upload (`b_c`).
    pub creation_base: f64,
}

impl TimingParameters {
    pub const ZERO: TimingParameters = TimingParameters {
        kernel_time: 0.0,
        intra_graph_gap: 0.0,
        inter_graph_gap: 0.0,
        launch_latency: 0.0,
        baseline_gap: 0.0,
        creation_per_node: 0.0,
        creation_base: 0.0,
    };

    /// Field values paired with their parameter-file keys.
    pub fn named_fields(&self) -> [(&'static str, f64); 7] {
        [
            ("t_k", self.kernel_time),
            ("t_i", self.intra_graph_gap),
            ("t_a", self.inter_graph_gap),
            ("t_l", self.launch_latency),
            ("t_b", self.baseline_gap),
            ("k_c", self.creation_per_node),
            ("b_c", self.creation_base),
        ]
    }

    /// Checks that every field is finite and non-negative.
    pub fn validate(&self) -> Result<()> {
        for (name, value) in self.named_fields() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and >= 0, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// A split of `total_kernel_executions` into `num_batches` graphs of
/// `batch_size` nodes each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BatchPlan {
    total_kernel_executions: u64,
    batch_size: u64,
    num_batches: u64,
}

impl BatchPlan {
    /// Builds the plan for `batch_size` nodes per graph. Fails unless the
    /// batch size divides the total number of kernel executions.
    pub fn new(total_kernel_executions: u64, batch_size: u64) -> Result<Self> {
        if total_kernel_executions == 0 {
            return Err(Error::InvalidPlan(
                "total kernel executions must be positive".into(),
            ));
        }
        if batch_size == 0 || batch_size > total_kernel_executions {
            return Err(Error::InvalidPlan(format!(
                "batch size {batch_size} outside 1..={total_kernel_executions}"
            )));
        }
        if total_kernel_executions % batch_size != 0 {
            return Err(Error::InvalidPlan(format!(
                "batch size {batch_size} does not divide {total_kernel_executions}"
            )));
        }
        Ok(Self {
            total_kernel_executions,
            batch_size,
            num_batches: total_kernel_executions / batch_size,
        })
    }

    /// Builds the plan from a batch size and a batch count.
    pub fn from_batches(batch_size: u64, num_batches: u64) -> Result<Self> {
        if batch_size == 0 || num_batches == 0 {
            return Err(Error::InvalidPlan(
                "batch size and batch count must be positive".into(),
            ));
        }
        let total = batch_size.checked_mul(num_batches).ok_or_else(|| {
            Error::InvalidPlan(format!("{batch_size} x {num_batches} overflows"))
        })?;
        Ok(Self {
            total_kernel_executions: total,
            batch_size,
            num_batches,
        })
    }

    pub fn total_kernel_executions(&self) -> u64 {
        self.total_kernel_executions
    }

    pub fn batch_size(&self) -> u64 {
        self.batch_size
    }

    pub fn num_batches(&self) -> u64 {
        self.num_batches
    }
}

/// Coefficients of the reciprocal execution-time form `a / S + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReciprocalCoefficients {
    /// Seconds times nodes; positive when batching pays off.
    pub a: f64,
    /// Seconds; the execution-time floor as `S` grows.
    pub b: f64,
}

impl ReciprocalCoefficients {
    pub fn evaluate(&self, batch_size: u64) -> f64 {
        self.a / batch_size as f64 + self.b
    }
}

/// Affine graph memory footprint in bytes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryModel {
    pub base_bytes: f64,
    pub bytes_per_node: f64,
}

impl MemoryModel {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("m_base", self.base_bytes), ("m_node", self.bytes_per_node)] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and >= 0, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Mean and sample standard deviation (n - 1 denominator) of repeated timings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats {
    pub mean: f64,
    pub std_dev: f64,
    pub n: usize,
}

impl SampleStats {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        if n == 0 {
            return Err(Error::InsufficientData("no samples".into()));
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let std_dev = if n == 1 {
            0.0
        } else {
            let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / (n - 1) as f64).sqrt()
        };
        Ok(Self { mean, std_dev, n })
    }
}

/// Speedup of one configuration over another with its propagated error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedupEstimate {
    pub ratio: f64,
    pub error: f64,
}

/// Graph creation time for a graph of `batch_size` nodes.
pub fn creation_time(p: &TimingParameters, batch_size: u64) -> f64 {
    p.creation_per_node * batch_size as f64 + p.creation_base
}

/// Execution time summed launch by launch.
pub fn execution_time_expanded(p: &TimingParameters, plan: &BatchPlan) -> f64 {
    let s = plan.batch_size() as f64;
    let i = plan.num_batches() as f64;
    let single_graph = p.kernel_time * s + p.intra_graph_gap * (s - 1.0);
    p.launch_latency + single_graph * i + p.inter_graph_gap * (i - 1.0)
}

/// Execution time in closed form; algebraically equal to
/// [`execution_time_expanded`].
pub fn execution_time_closed(p: &TimingParameters, plan: &BatchPlan) -> f64 {
    reciprocal_coefficients(p, plan.total_kernel_executions()).evaluate(plan.batch_size())
}

/// Creation plus execution time.
pub fn total_time(p: &TimingParameters, plan: &BatchPlan) -> f64 {
    creation_time(p, plan.batch_size()) + execution_time_closed(p, plan)
}

pub fn reciprocal_coefficients(
    p: &TimingParameters,
    total_kernel_executions: u64,
) -> ReciprocalCoefficients {
    let ik = total_kernel_executions as f64;
    ReciprocalCoefficients {
        a: ik * (p.inter_graph_gap - p.intra_graph_gap),
        b: ik * (p.kernel_time + p.intra_graph_gap) - p.inter_graph_gap + p.launch_latency,
    }
}

/// Time of the plain loop launching each kernel individually. The first
/// launch pays the same latency as the first graph launch.
pub fn baseline_time(p: &TimingParameters, total_kernel_executions: u64) -> f64 {
    let ik = total_kernel_executions as f64;
    p.launch_latency + ik * p.kernel_time + (ik - 1.0) * p.baseline_gap
}

/// Predicted baseline-over-graph speedup.
pub fn model_speedup(p: &TimingParameters, plan: &BatchPlan) -> Result<f64> {
    let graph = total_time(p, plan);
    if graph == 0.0 {
        return Err(Error::DivisionByZero("graph total time is zero"));
    }
    Ok(baseline_time(p, plan.total_kernel_executions()) / graph)
}

/// Speedup of measured means with relative errors added in quadrature:
/// `error = ratio * sqrt((sd_b / mean_b)^2 + (sd_g / mean_g)^2)`.
pub fn measured_speedup(baseline: &SampleStats, graph: &SampleStats) -> Result<SpeedupEstimate> {
    if baseline.mean <= 0.0 || graph.mean <= 0.0 {
        return Err(Error::DivisionByZero("sample mean must be positive"));
    }
    let ratio = baseline.mean / graph.mean;
    let rel_b = baseline.std_dev / baseline.mean;
    let rel_g = graph.std_dev / graph.mean;
    Ok(SpeedupEstimate {
        ratio,
        error: ratio * rel_b.hypot(rel_g),
    })
}

/// Real-valued minimizer of `k_c * S + a / S`.
pub fn continuous_optimal_batch(creation_per_node: f64, a: f64) -> Result<f64> {
    if a <= 0.0 {
        return Err(Error::NoInteriorOptimum(
            "a <= 0: larger batches never reduce execution time",
        ));
    }
    if creation_per_node <= 0.0 {
        return Err(Error::NoInteriorOptimum(
            "k_c <= 0: creation cost does not grow with batch size",
        ));
    }
    Ok((a / creation_per_node).sqrt())
}

pub fn memory_usage(m: &MemoryModel, batch_size: u64) -> f64 {
    m.base_bytes + m.bytes_per_node * batch_size as f64
}
