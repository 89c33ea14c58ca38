//! Batch size selection under the divisibility constraint.

use crate::error::{Error, Result};
use crate::fitting::DEFAULT_VALIDITY_FRACTION;
use crate::model::{self, BatchPlan, MemoryModel, TimingParameters};

/// Anything that predicts graph creation and execution time for a plan.
pub trait CostModel {
    fn creation_time(&self, batch_size: u64) -> f64;

    fn execution_time(&self, plan: &BatchPlan) -> f64;

    fn total_time(&self, plan: &BatchPlan) -> f64 {
        self.creation_time(plan.batch_size()) + self.execution_time(plan)
    }

    /// Baseline loop time, when the model knows it.
    fn baseline_time(&self, total_kernel_executions: u64) -> Option<f64>;

    /// Slope of creation time per node (`k_c`).
    fn creation_slope(&self) -> f64;

    /// Reciprocal execution coefficient `a` for the given `I_k`.
    fn reciprocal_slope(&self, total_kernel_executions: u64) -> f64;
}

impl CostModel for TimingParameters {
    fn creation_time(&self, batch_size: u64) -> f64 {
        model::creation_time(self, batch_size)
    }

    fn execution_time(&self, plan: &BatchPlan) -> f64 {
        model::execution_time_closed(self, plan)
    }

    fn baseline_time(&self, total_kernel_executions: u64) -> Option<f64> {
        Some(model::baseline_time(self, total_kernel_executions))
    }

    fn creation_slope(&self) -> f64 {
        self.creation_per_node
    }

    fn reciprocal_slope(&self, total_kernel_executions: u64) -> f64 {
        model::reciprocal_coefficients(self, total_kernel_executions).a
    }
}

/// Coefficients fitted from profiler data for one fixed `I_k`.
///
/// `a` and `b` describe execution time at the `I_k` they were measured for;
/// the plan's total is not consulted when evaluating them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedCoefficients {
    pub creation_per_node: f64,
    pub creation_base: f64,
    pub a: f64,
    pub b: f64,
    /// Measured or predicted baseline time, if known.
    pub baseline_total: Option<f64>,
}

impl CostModel for FittedCoefficients {
    fn creation_time(&self, batch_size: u64) -> f64 {
        self.creation_per_node * batch_size as f64 + self.creation_base
    }

    fn execution_time(&self, plan: &BatchPlan) -> f64 {
        self.a / plan.batch_size() as f64 + self.b
    }

    fn baseline_time(&self, _total_kernel_executions: u64) -> Option<f64> {
        self.baseline_total
    }

    fn creation_slope(&self) -> f64 {
        self.creation_per_node
    }

    fn reciprocal_slope(&self, _total_kernel_executions: u64) -> f64 {
        self.a
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecommendOptions {
    pub memory: Option<MemoryModel>,
    pub memory_cap: Option<f64>,
    /// Largest admissible `S` as a fraction of `I_k`. `S = 1` is always
    /// admitted.
    pub validity_fraction: f64,
}

impl Default for RecommendOptions {
    fn default() -> Self {
        Self {
            memory: None,
            memory_cap: None,
            validity_fraction: DEFAULT_VALIDITY_FRACTION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recommendation {
    pub batch_size: u64,
    pub num_batches: u64,
    pub predicted_total: f64,
    /// Baseline over predicted total; absent when the model has no baseline.
    pub predicted_speedup: Option<f64>,
    /// `sqrt(a / k_c)` when both are positive.
    pub continuous_optimum: Option<f64>,
    pub candidates_evaluated: usize,
    pub memory_at_choice: Option<f64>,
}

/// All divisors of `n` in ascending order.
pub fn feasible_batch_sizes(total_kernel_executions: u64) -> Vec<u64> {
    let n = total_kernel_executions;
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            small.push(d);
            if d != n / d {
                large.push(n / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

/// Divisors of `I_k` that pass the validity bound and the memory cap.
pub fn admissible_batch_sizes(
    total_kernel_executions: u64,
    options: &RecommendOptions,
) -> Result<Vec<u64>> {
    if total_kernel_executions == 0 {
        return Err(Error::InvalidPlan(
            "total kernel executions must be positive".into(),
        ));
    }
    let fraction = options.validity_fraction;
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "validity fraction must be in (0, 1], got {fraction}"
        )));
    }
    let cap = match (options.memory, options.memory_cap) {
        (Some(m), cap) => {
            m.validate()?;
            cap.map(|c| (m, c))
        }
        (None, Some(_)) => {
            return Err(Error::InvalidParameter(
                "memory cap given without a memory model".into(),
            ))
        }
        (None, None) => None,
    };
    let bound = fraction * total_kernel_executions as f64;
    Ok(feasible_batch_sizes(total_kernel_executions)
        .into_iter()
        .filter(|&s| s == 1 || s as f64 <= bound)
        .filter(|&s| cap.map_or(true, |(m, c)| model::memory_usage(&m, s) <= c))
        .collect())
}

/// Picks the admissible divisor minimizing modeled total time. Ties go to
/// the smaller batch size.
pub fn recommend<M: CostModel + ?Sized>(
    model: &M,
    total_kernel_executions: u64,
    options: &RecommendOptions,
) -> Result<Recommendation> {
    let candidates = admissible_batch_sizes(total_kernel_executions, options)?;
    let mut best: Option<(BatchPlan, f64)> = None;
    for &s in &candidates {
        let plan = BatchPlan::new(total_kernel_executions, s)?;
        let t = model.total_time(&plan);
        if best.map_or(true, |(_, bt)| t < bt) {
            best = Some((plan, t));
        }
    }
    let (plan, predicted_total) = best.ok_or_else(|| {
        Error::EmptyFeasibleSet(format!(
            "no divisor of {total_kernel_executions} satisfies the validity bound and memory cap"
        ))
    })?;
    let predicted_speedup = model
        .baseline_time(total_kernel_executions)
        .map(|b| b / predicted_total);
    let continuous_optimum = model::continuous_optimal_batch(
        model.creation_slope(),
        model.reciprocal_slope(total_kernel_executions),
    )
    .ok();
    Ok(Recommendation {
        batch_size: plan.batch_size(),
        num_batches: plan.num_batches(),
        predicted_total,
        predicted_speedup,
        continuous_optimum,
        candidates_evaluated: candidates.len(),
        memory_at_choice: options
            .memory
            .map(|m| model::memory_usage(&m, plan.batch_size())),
    })
}

/// Upper limit on the number of batches searched by [`crossover_batches`].
pub const CROSSOVER_SEARCH_LIMIT: u64 = 1_000_000;

/// Smallest batch count at which the graph path, creation included, beats
/// the baseline loop over the same kernels.
///
/// The comparison uses the difference of the two timelines,
/// `graph - baseline = C + (t_b - t_a) - I * ((S - 1)(t_b - t_i) + (t_b - t_a))`
/// with `C` the creation time, so identical timelines compare equal instead
/// of differing by rounding.
pub fn crossover_batches(p: &TimingParameters, batch_size: u64) -> Option<u64> {
    if batch_size == 0 {
        return None;
    }
    let fixed = model::creation_time(p, batch_size) + (p.baseline_gap - p.inter_graph_gap);
    let per_batch = (batch_size - 1) as f64 * (p.baseline_gap - p.intra_graph_gap)
        + (p.baseline_gap - p.inter_graph_gap);
    (1..=CROSSOVER_SEARCH_LIMIT).find(|&i| fixed - i as f64 * per_batch < 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_divisors(n: u64) -> Vec<u64> {
        (1..=n).filter(|d| n % d == 0).collect()
    }

    fn reference_small_workload() -> FittedCoefficients {
        FittedCoefficients {
            creation_per_node: 4.18e-6,
            creation_base: 1.59e-4,
            a: 1.77e-2,
            b: 4.56e-2,
            baseline_total: None,
        }
    }

    fn realistic_params() -> TimingParameters {
        TimingParameters {
            kernel_time: 1e-5,
            intra_graph_gap: 2e-6,
            inter_graph_gap: 1e-5,
            launch_latency: 5e-5,
            baseline_gap: 1e-5,
            creation_per_node: 4.18e-6,
            creation_base: 1.59e-4,
        }
    }

    /// Exhaustive argmin over admissible divisors, ties to the smaller S.
    fn oracle_argmin(p: &TimingParameters, ik: u64, fraction: f64) -> u64 {
        let mut best = (0u64, f64::INFINITY);
        for s in brute_divisors(ik) {
            if s != 1 && s as f64 > fraction * ik as f64 {
                continue;
            }
            let t = model::total_time(p, &BatchPlan::new(ik, s).unwrap());
            if t < best.1 {
                best = (s, t);
            }
        }
        best.0
    }

    #[test]
    fn divisor_examples() {
        assert_eq!(feasible_batch_sizes(12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(feasible_batch_sizes(1), vec![1]);
        assert_eq!(feasible_batch_sizes(97), vec![1, 97]);
        assert_eq!(feasible_batch_sizes(7919), vec![1, 7919]);
        let d = feasible_batch_sizes(10_000);
        assert_eq!(d, brute_divisors(10_000));
        assert_eq!(d.len(), 25);
        for s in [50, 80, 100, 2500] {
            assert!(d.contains(&s));
        }
        assert_eq!(feasible_batch_sizes(36), brute_divisors(36));
    }

    #[test]
    fn reference_coefficients_pick_eighty() {
        let rec = recommend(&reference_small_workload(), 10_000, &RecommendOptions::default()).unwrap();
        assert_eq!(rec.batch_size, 80);
        assert_eq!(rec.num_batches, 125);
        let star = rec.continuous_optimum.unwrap();
        assert!((star - 65.07).abs() < 0.01);
        assert!(rec.predicted_speedup.is_none());
        // objective k_c S + a / S at the neighbours of the optimum
        let obj = |s: f64| 4.18e-6 * s + 1.77e-2 / s;
        assert!(obj(80.0) < obj(50.0) && obj(80.0) < obj(100.0));
        let expected = obj(80.0) + 1.59e-4 + 4.56e-2;
        assert!((rec.predicted_total - expected).abs() < 1e-15);
        assert!((50..=100).contains(&rec.batch_size));
    }

    #[test]
    fn no_batching_benefit_picks_one() {
        let p = TimingParameters {
            intra_graph_gap: 2e-5,
            ..realistic_params()
        };
        let rec = recommend(&p, 10_000, &RecommendOptions::default()).unwrap();
        assert_eq!(rec.batch_size, 1);
        assert!(rec.continuous_optimum.is_none());
        let flat = TimingParameters {
            intra_graph_gap: 1e-5,
            ..realistic_params()
        };
        assert_eq!(recommend(&flat, 10_000, &RecommendOptions::default()).unwrap().batch_size, 1);
    }

    #[test]
    fn prime_totals_leave_only_one() {
        for p in [5u64, 7, 97, 7919] {
            let rec = recommend(&realistic_params(), p, &RecommendOptions::default()).unwrap();
            assert_eq!(rec.batch_size, 1);
            assert_eq!(rec.candidates_evaluated, 1);
        }
    }

    #[test]
    fn memory_cap_filters_and_can_empty_the_set() {
        let mem = MemoryModel {
            base_bytes: 1e6,
            bytes_per_node: 2048.0,
        };
        let options = RecommendOptions {
            memory: Some(mem),
            memory_cap: Some(1e6 + 2048.0 * 50.0),
            ..Default::default()
        };
        let rec = recommend(&reference_small_workload(), 10_000, &options).unwrap();
        assert_eq!(rec.batch_size, 50);
        assert_eq!(rec.memory_at_choice, Some(1e6 + 2048.0 * 50.0));

        let tight = RecommendOptions {
            memory_cap: Some(1.0),
            ..options
        };
        assert!(matches!(
            recommend(&reference_small_workload(), 10_000, &tight),
            Err(Error::EmptyFeasibleSet(_))
        ));
        let no_model = RecommendOptions {
            memory: None,
            memory_cap: Some(1.0),
            ..Default::default()
        };
        assert!(recommend(&reference_small_workload(), 10_000, &no_model).is_err());
    }

    #[test]
    fn validity_fraction_is_checked() {
        for f in [0.0, -0.1, 1.01, f64::NAN] {
            let options = RecommendOptions {
                validity_fraction: f,
                ..Default::default()
            };
            assert!(recommend(&realistic_params(), 100, &options).is_err());
        }
    }

    #[test]
    fn speedup_is_reported_for_timing_parameters() {
        let p = realistic_params();
        let rec = recommend(&p, 1000, &RecommendOptions::default()).unwrap();
        let plan = BatchPlan::new(1000, rec.batch_size).unwrap();
        assert_eq!(rec.predicted_total, model::total_time(&p, &plan));
        assert_eq!(
            rec.predicted_speedup.unwrap(),
            model::model_speedup(&p, &plan).unwrap()
        );
    }

    #[test]
    fn crossover_examples() {
        let p = realistic_params();
        let i0 = crossover_batches(&p, 100).unwrap();
        // linear search oracle
        let oracle = (1..).find(|&i| {
            let plan = BatchPlan::from_batches(100, i).unwrap();
            model::total_time(&p, &plan) < model::baseline_time(&p, 100 * i)
        });
        assert_eq!(Some(i0), oracle);
        assert!(i0 <= 3);

        let same = TimingParameters {
            intra_graph_gap: 1e-5,
            creation_per_node: 0.0,
            creation_base: 0.0,
            ..p
        };
        assert_eq!(crossover_batches(&same, 100), None);

        let inverted = TimingParameters {
            intra_graph_gap: 3e-5,
            ..p
        };
        assert_eq!(crossover_batches(&inverted, 100), None);
        assert_eq!(crossover_batches(&p, 0), None);
    }

    #[test]
    fn recommend_matches_exhaustive_search() {
        let p = realistic_params();
        for ik in (1..=10_000u64).step_by(37).chain([10_000, 5040, 720, 2048]) {
            let rec = recommend(&p, ik, &RecommendOptions::default()).unwrap();
            assert_eq!(rec.batch_size, oracle_argmin(&p, ik, 0.25), "I_k={ik}");
        }
    }

    #[test]
    fn monotone_in_creation_cost_and_gap() {
        let ik = 10_000;
        let mut last = u64::MAX;
        for k in 0..60 {
            let kc = 1e-8 * 1.25f64.powi(k);
            let m = FittedCoefficients {
                creation_per_node: kc,
                ..reference_small_workload()
            };
            let s = recommend(&m, ik, &RecommendOptions::default()).unwrap().batch_size;
            assert!(s <= last, "k_c={kc}: {s} > {last}");
            last = s;
        }
        let mut last = 0;
        for k in 0..60 {
            let a = 1e-6 * 1.3f64.powi(k);
            let m = FittedCoefficients {
                a,
                ..reference_small_workload()
            };
            let s = recommend(&m, ik, &RecommendOptions::default()).unwrap().batch_size;
            assert!(s >= last, "a={a}: {s} < {last}");
            last = s;
        }
    }

    fn params() -> impl Strategy<Value = TimingParameters> {
        (1e-6..1e-4f64, 0.0..1e-5f64, 0.0..2e-5f64, 0.0..1e-4f64, 1e-7..1e-5f64, 0.0..1e-3f64)
            .prop_map(|(tk, ti, ta, tl, kc, bc)| TimingParameters {
                kernel_time: tk,
                intra_graph_gap: ti,
                inter_graph_gap: ta,
                launch_latency: tl,
                baseline_gap: ta,
                creation_per_node: kc,
                creation_base: bc,
            })
    }

    proptest! {
        #[test]
        fn oracle_equivalence(p in params(), ik in 1u64..=10_000) {
            let rec = recommend(&p, ik, &RecommendOptions::default()).unwrap();
            prop_assert_eq!(rec.batch_size, oracle_argmin(&p, ik, 0.25));
        }

        #[test]
        fn no_divisor_between_choice_and_optimum_does_better(p in params(), ik in 1u64..=10_000) {
            let rec = recommend(&p, ik, &RecommendOptions::default()).unwrap();
            if let Some(star) = rec.continuous_optimum {
                let (lo, hi) = if (rec.batch_size as f64) < star {
                    (rec.batch_size as f64, star)
                } else {
                    (star, rec.batch_size as f64)
                };
                let admissible = admissible_batch_sizes(ik, &RecommendOptions::default()).unwrap();
                for s in admissible.into_iter().filter(|&s| (s as f64) > lo && (s as f64) < hi) {
                    let t = model::total_time(&p, &BatchPlan::new(ik, s).unwrap());
                    prop_assert!(t >= rec.predicted_total);
                }
            }
        }

        #[test]
        fn crossover_is_sticky(p in params(), s in 1u64..500) {
            prop_assume!(p.intra_graph_gap < p.inter_graph_gap);
            if let Some(i0) = crossover_batches(&p, s) {
                for i in (i0..i0 + 200).chain([i0 * 10, i0 * 100]) {
                    let plan = BatchPlan::from_batches(s, i).unwrap();
                    let graph = model::total_time(&p, &plan);
                    let base = model::baseline_time(&p, s * i);
                    // totals within rounding of each other cannot be ordered
                    if (graph - base).abs() > 1e-12 * base {
                        prop_assert!(graph < base, "I={} after I0={}", i, i0);
                    }
                }
            }
        }
    }
}
