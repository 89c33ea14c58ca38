//! Deterministic virtual-clock simulation of graph and baseline timelines.
//!
//! Graph mode plays out creation (node additions, instantiation, upload)
//! followed by `I` launches of an `S`-node chain. Baseline mode launches
//! every kernel on its own. The clock is a plain `f64` accumulator and
//! creation is serialized before execution.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{BatchPlan, TimingParameters};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    NodeAdded,
    GraphInstantiated,
    GraphUploaded,
    GraphLaunched,
    KernelStarted,
    KernelEnded,
    BatchGapStarted,
    BaselineKernelLaunched,
}

impl EventKind {
    pub const ALL: [EventKind; 8] = [
        EventKind::NodeAdded,
        EventKind::GraphInstantiated,
        EventKind::GraphUploaded,
        EventKind::GraphLaunched,
        EventKind::KernelStarted,
        EventKind::KernelEnded,
        EventKind::BatchGapStarted,
        EventKind::BaselineKernelLaunched,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::NodeAdded => "NodeAdded",
            EventKind::GraphInstantiated => "GraphInstantiated",
            EventKind::GraphUploaded => "GraphUploaded",
            EventKind::GraphLaunched => "GraphLaunched",
            EventKind::KernelStarted => "KernelStarted",
            EventKind::KernelEnded => "KernelEnded",
            EventKind::BatchGapStarted => "BatchGapStarted",
            EventKind::BaselineKernelLaunched => "BaselineKernelLaunched",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown event kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEvent {
    /// Virtual time in seconds.
    pub timestamp: f64,
    pub kind: EventKind,
    pub batch_index: Option<u64>,
    pub kernel_index: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExecutionMode {
    Baseline,
    Graph,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventTrace {
    pub events: Vec<TraceEvent>,
    pub mode: ExecutionMode,
    /// For baseline traces this is the single-batch plan `(I_k, I_k, 1)`.
    pub plan: BatchPlan,
    pub params: TimingParameters,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSummary {
    pub creation_span: f64,
    pub execution_span: f64,
    pub total: f64,
}

/// Monotone virtual clock; advancing by a negative amount is a logic error.
#[derive(Debug, Default, Clone, Copy)]
struct VirtualClock {
    now: f64,
}

impl VirtualClock {
    fn advance(&mut self, dt: f64) -> f64 {
        debug_assert!(dt >= 0.0);
        self.now += dt;
        self.now
    }
}

struct Recorder {
    clock: VirtualClock,
    events: Vec<TraceEvent>,
}

impl Recorder {
    fn with_capacity(n: usize) -> Self {
        Self {
            clock: VirtualClock::default(),
            events: Vec::with_capacity(n),
        }
    }

    fn emit(&mut self, kind: EventKind, batch: Option<u64>, kernel: Option<u64>) {
        self.events.push(TraceEvent {
            timestamp: self.clock.now,
            kind,
            batch_index: batch,
            kernel_index: kernel,
        });
    }
}

/// Simulates graph creation followed by `I` launches of the `S`-node chain.
///
/// Creation starts at time 0: node additions complete every `k_c`, then
/// instantiation and upload share `b_c` equally. The first launch is issued
/// when the upload completes and its first kernel starts `t_l` later. Each
/// later batch starts `t_a` after the previous batch's last kernel ends.
pub fn simulate_graph(p: &TimingParameters, plan: &BatchPlan) -> EventTrace {
    let s = plan.batch_size();
    let n = plan.num_batches();
    let capacity = (s + 2 + n * (2 * s + 2)) as usize;
    let mut rec = Recorder::with_capacity(capacity);

    for node in 0..s {
        rec.clock.advance(p.creation_per_node);
        rec.emit(EventKind::NodeAdded, None, Some(node));
    }
    rec.clock.advance(0.5 * p.creation_base);
    rec.emit(EventKind::GraphInstantiated, None, None);
    rec.clock.advance(0.5 * p.creation_base);
    rec.emit(EventKind::GraphUploaded, None, None);

    for batch in 0..n {
        if batch == 0 {
            rec.emit(EventKind::GraphLaunched, Some(batch), None);
            rec.clock.advance(p.launch_latency);
        } else {
            rec.emit(EventKind::BatchGapStarted, Some(batch - 1), None);
            rec.emit(EventKind::GraphLaunched, Some(batch), None);
            rec.clock.advance(p.inter_graph_gap);
        }
        for kernel in 0..s {
            if kernel > 0 {
                rec.clock.advance(p.intra_graph_gap);
            }
            rec.emit(EventKind::KernelStarted, Some(batch), Some(kernel));
            rec.clock.advance(p.kernel_time);
            rec.emit(EventKind::KernelEnded, Some(batch), Some(kernel));
        }
    }

    EventTrace {
        events: rec.events,
        mode: ExecutionMode::Graph,
        plan: *plan,
        params: *p,
    }
}

/// Simulates the plain loop: kernel 0 starts `t_l` after its launch at time
/// 0, and kernel `n + 1` starts `t_b` after kernel `n` ends.
pub fn simulate_baseline(p: &TimingParameters, total_kernel_executions: u64) -> Result<EventTrace> {
    let plan = BatchPlan::new(total_kernel_executions, total_kernel_executions)?;
    let mut rec = Recorder::with_capacity(3 * total_kernel_executions as usize);
    for kernel in 0..total_kernel_executions {
        rec.emit(EventKind::BaselineKernelLaunched, None, Some(kernel));
        rec.clock.advance(if kernel == 0 {
            p.launch_latency
        } else {
            p.baseline_gap
        });
        rec.emit(EventKind::KernelStarted, None, Some(kernel));
        rec.clock.advance(p.kernel_time);
        rec.emit(EventKind::KernelEnded, None, Some(kernel));
    }
    Ok(EventTrace {
        events: rec.events,
        mode: ExecutionMode::Baseline,
        plan,
        params: *p,
    })
}

/// Creation and execution spans read back from event timestamps.
///
/// The clock origin is 0, so the creation span ends at `GraphUploaded`.
/// The execution span runs from the first launch event to the last
/// `KernelEnded`.
pub fn trace_summary(trace: &EventTrace) -> Result<TraceSummary> {
    summarize_events(&trace.events, trace.mode)
}

pub(crate) fn summarize_events(events: &[TraceEvent], mode: ExecutionMode) -> Result<TraceSummary> {
    let malformed = |msg: &str| Error::MalformedTrace(msg.to_string());
    let mut open_kernels = 0usize;
    let mut kernels = 0usize;
    let mut first_launch = None;
    let mut last_end = None;
    let mut uploaded = None;
    let mut last_ts = f64::NEG_INFINITY;

    for ev in events {
        if ev.timestamp < last_ts {
            return Err(malformed("timestamps decrease"));
        }
        last_ts = ev.timestamp;
        match ev.kind {
            EventKind::KernelStarted => {
                if open_kernels != 0 {
                    return Err(malformed("kernel started while another is running"));
                }
                open_kernels += 1;
            }
            EventKind::KernelEnded => {
                if open_kernels != 1 {
                    return Err(malformed("kernel ended without a matching start"));
                }
                open_kernels -= 1;
                kernels += 1;
                last_end = Some(ev.timestamp);
            }
            EventKind::GraphUploaded => {
                if mode == ExecutionMode::Baseline {
                    return Err(malformed("graph event in a baseline trace"));
                }
                uploaded = Some(ev.timestamp);
            }
            EventKind::GraphLaunched if mode == ExecutionMode::Graph => {
                if uploaded.is_none() {
                    return Err(malformed("graph launched before upload"));
                }
                first_launch.get_or_insert(ev.timestamp);
            }
            EventKind::BaselineKernelLaunched if mode == ExecutionMode::Baseline => {
                first_launch.get_or_insert(ev.timestamp);
            }
            EventKind::BaselineKernelLaunched => {
                return Err(malformed("baseline launch in a graph trace"));
            }
            EventKind::NodeAdded | EventKind::GraphInstantiated | EventKind::GraphLaunched
                if mode == ExecutionMode::Baseline =>
            {
                return Err(malformed("graph event in a baseline trace"));
            }
            _ => {}
        }
    }

    if open_kernels != 0 {
        return Err(malformed("kernel started but never ended"));
    }
    if kernels == 0 {
        return Err(malformed("no kernel executions"));
    }
    let first_launch = first_launch.ok_or_else(|| malformed("no launch event"))?;
    let last_end = last_end.ok_or_else(|| malformed("no kernel end"))?;
    let creation_span = match mode {
        ExecutionMode::Graph => uploaded.ok_or_else(|| malformed("graph never uploaded"))?,
        ExecutionMode::Baseline => 0.0,
    };
    let execution_span = last_end - first_launch;
    Ok(TraceSummary {
        creation_span,
        execution_span,
        total: creation_span + execution_span,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{baseline_time, creation_time, execution_time_expanded};
    use proptest::prelude::*;

    fn hand_params() -> TimingParameters {
        TimingParameters {
            kernel_time: 1.0,
            intra_graph_gap: 0.1,
            inter_graph_gap: 0.5,
            launch_latency: 0.2,
            baseline_gap: 0.5,
            creation_per_node: 0.01,
            creation_base: 0.05,
        }
    }

    fn count(trace: &EventTrace, kind: EventKind) -> usize {
        trace.events.iter().filter(|e| e.kind == kind).count()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn hand_schedule_graph() {
        let plan = BatchPlan::new(4, 2).unwrap();
        let trace = simulate_graph(&hand_params(), &plan);
        let sum = trace_summary(&trace).unwrap();
        assert!(close(sum.creation_span, 0.07));
        assert!(close(sum.execution_span, 4.9));
        assert!(close(sum.total, 4.97));

        // second batch starts t_a after the end of the first one
        let starts: Vec<f64> = trace
            .events
            .iter()
            .filter(|e| e.kind == EventKind::KernelStarted)
            .map(|e| e.timestamp)
            .collect();
        let t0 = 0.07;
        let expected = [t0 + 0.2, t0 + 1.3, t0 + 2.8, t0 + 3.9];
        for (got, want) in starts.iter().zip(expected) {
            assert!(close(*got, want), "{got} vs {want}");
        }
    }

    #[test]
    fn single_kernel_graph() {
        let p = hand_params();
        let plan = BatchPlan::new(1, 1).unwrap();
        let trace = simulate_graph(&p, &plan);
        assert_eq!(count(&trace, EventKind::KernelStarted), 1);
        let sum = trace_summary(&trace).unwrap();
        assert!(close(sum.execution_span, p.launch_latency + p.kernel_time));
        assert!(close(sum.creation_span, p.creation_per_node + p.creation_base));
    }

    #[test]
    fn hand_schedule_baseline() {
        let trace = simulate_baseline(&hand_params(), 3).unwrap();
        let sum = trace_summary(&trace).unwrap();
        assert_eq!(sum.creation_span, 0.0);
        assert!(close(sum.execution_span, 4.2));
        let one = trace_summary(&simulate_baseline(&hand_params(), 1).unwrap()).unwrap();
        assert!(close(one.execution_span, 1.2));
        assert!(simulate_baseline(&hand_params(), 0).is_err());
    }

    #[test]
    fn matching_gaps_make_modes_identical() {
        let p = TimingParameters {
            intra_graph_gap: 0.5,
            ..hand_params()
        };
        let base = trace_summary(&simulate_baseline(&p, 24).unwrap()).unwrap();
        for s in [1, 2, 3, 4, 6, 8, 12, 24] {
            let plan = BatchPlan::new(24, s).unwrap();
            let g = trace_summary(&simulate_graph(&p, &plan)).unwrap();
            assert!(close(g.execution_span, base.execution_span), "S={s}");
        }
    }

    #[test]
    fn event_counts() {
        let plan = BatchPlan::new(30, 5).unwrap();
        let trace = simulate_graph(&hand_params(), &plan);
        assert_eq!(count(&trace, EventKind::NodeAdded), 5);
        assert_eq!(count(&trace, EventKind::GraphInstantiated), 1);
        assert_eq!(count(&trace, EventKind::GraphUploaded), 1);
        assert_eq!(count(&trace, EventKind::GraphLaunched), 6);
        assert_eq!(count(&trace, EventKind::KernelStarted), 30);
        assert_eq!(count(&trace, EventKind::KernelEnded), 30);
        assert_eq!(count(&trace, EventKind::BatchGapStarted), 5);
        assert_eq!(count(&trace, EventKind::BaselineKernelLaunched), 0);

        let base = simulate_baseline(&hand_params(), 30).unwrap();
        assert_eq!(count(&base, EventKind::BaselineKernelLaunched), 30);
        assert_eq!(count(&base, EventKind::KernelStarted), 30);
        assert_eq!(count(&base, EventKind::KernelEnded), 30);
        assert_eq!(count(&base, EventKind::NodeAdded), 0);
    }

    #[test]
    fn inner_gaps_shorter_than_batch_gaps() {
        let p = hand_params();
        let plan = BatchPlan::new(12, 4).unwrap();
        let trace = simulate_graph(&p, &plan);
        let kernels: Vec<&TraceEvent> = trace
            .events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::KernelStarted | EventKind::KernelEnded))
            .collect();
        let mut inner = Vec::new();
        let mut between = Vec::new();
        for w in kernels.windows(2) {
            if w[0].kind == EventKind::KernelEnded && w[1].kind == EventKind::KernelStarted {
                let gap = w[1].timestamp - w[0].timestamp;
                if w[0].batch_index == w[1].batch_index {
                    inner.push(gap);
                } else {
                    between.push(gap);
                }
            }
        }
        assert_eq!(inner.len(), 9);
        assert_eq!(between.len(), 2);
        let max_inner = inner.iter().copied().fold(f64::MIN, f64::max);
        let min_between = between.iter().copied().fold(f64::MAX, f64::min);
        assert!(max_inner < min_between);
    }

    #[test]
    fn summary_rejects_malformed_traces() {
        let plan = BatchPlan::new(4, 2).unwrap();
        let mut trace = simulate_graph(&hand_params(), &plan);
        let last_end = trace
            .events
            .iter()
            .rposition(|e| e.kind == EventKind::KernelEnded)
            .unwrap();
        trace.events.remove(last_end);
        assert!(matches!(trace_summary(&trace), Err(Error::MalformedTrace(_))));

        let mut trace = simulate_graph(&hand_params(), &plan);
        trace.events.retain(|e| e.kind != EventKind::GraphUploaded);
        assert!(trace_summary(&trace).is_err());

        let mut trace = simulate_baseline(&hand_params(), 2).unwrap();
        trace.events.clear();
        assert!(trace_summary(&trace).is_err());
    }

    #[test]
    fn event_kind_names_round_trip() {
        for k in EventKind::ALL {
            assert_eq!(k.as_str().parse::<EventKind>().unwrap(), k);
        }
        assert!("Nope".parse::<EventKind>().is_err());
    }

    fn params() -> impl Strategy<Value = TimingParameters> {
        (
            1e-7..1e-2f64,
            0.0..1e-3f64,
            0.0..1e-3f64,
            0.0..1e-2f64,
            0.0..1e-3f64,
            0.0..1e-4f64,
            0.0..1e-2f64,
        )
            .prop_map(|(tk, ti, ta, tl, tb, kc, bc)| TimingParameters {
                kernel_time: tk,
                intra_graph_gap: ti,
                inter_graph_gap: ta,
                launch_latency: tl,
                baseline_gap: tb,
                creation_per_node: kc,
                creation_base: bc,
            })
    }

    proptest! {
        #[test]
        fn spans_match_closed_forms(p in params(), s in 1u64..64, i in 1u64..64) {
            let plan = BatchPlan::from_batches(s, i).unwrap();
            let trace = simulate_graph(&p, &plan);
            let sum = trace_summary(&trace).unwrap();
            let exec = execution_time_expanded(&p, &plan);
            let create = creation_time(&p, s);
            prop_assert!((sum.execution_span - exec).abs() <= 1e-9 * exec);
            prop_assert!((sum.creation_span - create).abs() <= 1e-9 * create.max(f64::MIN_POSITIVE));

            let base = trace_summary(&simulate_baseline(&p, s * i).unwrap()).unwrap();
            let bt = baseline_time(&p, s * i);
            prop_assert!((base.execution_span - bt).abs() <= 1e-9 * bt);
        }

        #[test]
        fn traces_are_ordered_and_indexed(p in params(), s in 1u64..20, i in 1u64..20) {
            let plan = BatchPlan::from_batches(s, i).unwrap();
            let trace = simulate_graph(&p, &plan);
            prop_assert!(trace.events.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
            for e in &trace.events {
                if let Some(k) = e.kernel_index { prop_assert!(k < s); }
                if let Some(b) = e.batch_index { prop_assert!(b < i); }
            }
            prop_assert_eq!(simulate_graph(&p, &plan), trace);
        }
    }
}
