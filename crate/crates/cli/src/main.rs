//! `iterbatch` command-line front end.
//!
//! Data goes to stdout, diagnostics to stderr. Exit codes: 0 success,
//! 1 data error, 2 usage error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use iterbatch::io::{
    format_fit, format_recommendation, format_speedup, format_summary, pair_speedups,
    parse_measurements, parse_params, write_measurements, write_trace,
};
use iterbatch::optimizer::{recommend, FittedCoefficients, RecommendOptions};
use iterbatch::sim::{simulate_baseline, simulate_graph, trace_summary};
use iterbatch::workloads::{
    run_batched_with, run_loop_with, time_workload, ChainProgram, FdtdWorkload, HotspotWorkload,
    Parallelism, TimingMode, VectorWorkload, WorkloadState,
};
use iterbatch::{fit_validity_filter, BatchPlan, FitKind};

#[derive(Parser)]
#[command(name = "iterbatch", version, about = "Model, simulate, fit and optimize iteration batch unrolling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play out the graph or baseline timeline on a virtual clock.
    Simulate {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        iterations: u64,
        #[arg(long)]
        batch_size: u64,
        #[arg(long, value_enum, default_value_t = SimMode::Graph)]
        mode: SimMode,
        /// Write the event trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Fit the creation (k_c S + b_c) or execution (a / S + b) model.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Drop batch sizes above validity_fraction * total_iterations.
        #[arg(long)]
        total_iterations: Option<u64>,
        #[arg(long, default_value_t = 0.25, requires = "total_iterations")]
        validity_fraction: f64,
    },
    /// Recommend the batch size minimizing modeled total time.
    Optimize {
        #[arg(long, required_unless_present = "coefficients", conflicts_with = "coefficients")]
        params: Option<PathBuf>,
        /// Fitted `k_c,b_c,a,b` instead of a parameter file.
        #[arg(long, value_delimiter = ',')]
        coefficients: Option<Vec<f64>>,
        /// Baseline time used for the speedup with --coefficients.
        #[arg(long, requires = "coefficients")]
        baseline_total: Option<f64>,
        #[arg(long)]
        iterations: u64,
        #[arg(long)]
        mem_cap: Option<f64>,
        #[arg(long, default_value_t = 0.25)]
        validity_fraction: f64,
    },
    /// Run a real workload in loop or batched order and time it.
    RunWorkload {
        #[arg(long, value_enum)]
        workload: WorkloadArg,
        /// N[,N2[,N3]]: vector length, hotspot rows,cols[,layers], or fdtd nx,ny,nz.
        #[arg(long, value_delimiter = ',', num_args = 1..=3)]
        size: Vec<usize>,
        #[arg(long)]
        iterations: u64,
        #[arg(long)]
        batch_size: u64,
        #[arg(long, value_enum)]
        mode: RunMode,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        /// Write timings CSV here instead of stdout.
        #[arg(long)]
        timings: Option<PathBuf>,
        /// Print the FNV-1a checksum of the final state.
        #[arg(long)]
        checksum: bool,
        /// Split each step across the rayon thread pool.
        #[arg(long)]
        parallel: bool,
    },
    /// Speedup of baseline over graph timings per matching batch size.
    Speedup {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        graph: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SimMode {
    Graph,
    Baseline,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Creation,
    Execution,
}

#[derive(Clone, Copy, ValueEnum)]
enum WorkloadArg {
    Vector,
    Hotspot2d,
    Hotspot3d,
    Fdtd,
}

#[derive(Clone, Copy, ValueEnum)]
enum RunMode {
    Loop,
    Batched,
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<iterbatch::Error> for Failure {
    fn from(e: iterbatch::Error) -> Self {
        // the message already includes any io source
        Failure::Data(anyhow::Error::msg(e.to_string()))
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn plan_for(iterations: u64, batch_size: u64) -> Result<BatchPlan, Failure> {
    BatchPlan::new(iterations, batch_size).map_err(|e| Failure::Usage(e.to_string()))
}

fn simulate(
    params: PathBuf,
    iterations: u64,
    batch_size: u64,
    mode: SimMode,
    trace_out: Option<PathBuf>,
    out: &mut impl Write,
) -> CmdResult {
    let plan = plan_for(iterations, batch_size)?;
    let params = parse_params(&params)?;
    let trace = match mode {
        SimMode::Graph => simulate_graph(&params.timing, &plan),
        SimMode::Baseline => simulate_baseline(&params.timing, iterations)?,
    };
    let summary = trace_summary(&trace)?;
    if let Some(path) = trace_out {
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        write_trace(&trace, &mut w)?;
        w.flush()?;
    }
    writeln!(out, "{}", format_summary(&summary))?;
    Ok(())
}

fn fit(
    input: PathBuf,
    kind: KindArg,
    total_iterations: Option<u64>,
    validity_fraction: f64,
    out: &mut impl Write,
) -> CmdResult {
    let mut series = parse_measurements(&input)?;
    if let Some(ik) = total_iterations {
        series = fit_validity_filter(&series, validity_fraction, ik)?;
    }
    let kind = match kind {
        KindArg::Creation => FitKind::Creation,
        KindArg::Execution => FitKind::Execution,
    };
    let result = iterbatch::fitting::fit(&series, kind)?;
    writeln!(out, "{}", format_fit(&result))?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn optimize(
    params: Option<PathBuf>,
    coefficients: Option<Vec<f64>>,
    baseline_total: Option<f64>,
    iterations: u64,
    mem_cap: Option<f64>,
    validity_fraction: f64,
    out: &mut impl Write,
) -> CmdResult {
    if iterations == 0 {
        return Err(Failure::Usage("--iterations must be positive".into()));
    }
    let mut options = RecommendOptions {
        memory_cap: mem_cap,
        validity_fraction,
        ..Default::default()
    };
    let rec = match (params, coefficients) {
        (Some(path), _) => {
            let file = parse_params(&path)?;
            options.memory = file.memory;
            recommend(&file.timing, iterations, &options)?
        }
        (None, Some(c)) => {
            if c.len() != 4 {
                return Err(Failure::Usage(format!(
                    "--coefficients takes k_c,b_c,a,b (got {} values)",
                    c.len()
                )));
            }
            let model = FittedCoefficients {
                creation_per_node: c[0],
                creation_base: c[1],
                a: c[2],
                b: c[3],
                baseline_total,
            };
            recommend(&model, iterations, &options)?
        }
        (None, None) => return Err(Failure::Usage("need --params or --coefficients".into())),
    };
    writeln!(out, "{}", format_recommendation(&rec))?;
    Ok(())
}

const FDTD_CELL_SIZE: f64 = 1e-3;
const FDTD_COURANT: f64 = 0.99;
const VECTOR_SCALE: f64 = 1.000_001;

fn build_workload(workload: WorkloadArg, size: &[usize]) -> Result<WorkloadState, Failure> {
    let dim = |i: usize| size.get(i).copied().unwrap_or(size[0]);
    if size.iter().any(|&n| n == 0) {
        return Err(Failure::Usage("--size entries must be positive".into()));
    }
    Ok(match workload {
        WorkloadArg::Vector => {
            if size.len() != 1 {
                return Err(Failure::Usage("vector takes a single --size".into()));
            }
            WorkloadState::Vector(VectorWorkload::ramp(size[0], VECTOR_SCALE))
        }
        WorkloadArg::Hotspot2d => {
            if size.len() > 2 {
                return Err(Failure::Usage("hotspot2d takes --size ROWS[,COLS]".into()));
            }
            WorkloadState::Hotspot(HotspotWorkload::demo(dim(0), dim(1), 1)?)
        }
        WorkloadArg::Hotspot3d => {
            let layers = dim(2);
            if layers < 2 {
                return Err(Failure::Usage("hotspot3d needs at least 2 layers".into()));
            }
            WorkloadState::Hotspot(HotspotWorkload::demo(dim(0), dim(1), layers)?)
        }
        WorkloadArg::Fdtd => WorkloadState::Fdtd(FdtdWorkload::te101(
            (dim(0), dim(1), dim(2)),
            FDTD_CELL_SIZE,
            FDTD_COURANT,
        )?),
    })
}

#[allow(clippy::too_many_arguments)]
fn run_workload(
    workload: WorkloadArg,
    size: Vec<usize>,
    iterations: u64,
    batch_size: u64,
    mode: RunMode,
    repeats: usize,
    timings: Option<PathBuf>,
    checksum: bool,
    parallel: bool,
    out: &mut impl Write,
) -> CmdResult {
    if repeats == 0 {
        return Err(Failure::Usage("--repeats must be at least 1".into()));
    }
    let plan = plan_for(iterations, batch_size)?;
    let initial = build_workload(workload, &size)?;
    let program = ChainProgram::for_state(&initial);
    let par = if parallel {
        Parallelism::Rayon
    } else {
        Parallelism::Serial
    };

    let timing_mode = match mode {
        RunMode::Loop => TimingMode::Baseline,
        RunMode::Batched => TimingMode::GraphOrder,
    };
    let series = time_workload(&program, &initial, &plan, timing_mode, repeats)?;
    match &timings {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            write_measurements(&series, &mut w)?;
            w.flush()?;
        }
        None if !checksum => write_measurements(&series, &mut *out)?,
        None => {}
    }
    if checksum {
        let state = initial.clone();
        let finished = match mode {
            RunMode::Loop => run_loop_with(&program, state, iterations, par)?,
            RunMode::Batched => {
                run_batched_with(&program, state, plan.batch_size(), plan.num_batches(), par)?
            }
        };
        writeln!(out, "checksum={:016x}", finished.checksum())?;
    }
    Ok(())
}

fn speedup(baseline: PathBuf, graph: PathBuf, out: &mut impl Write) -> CmdResult {
    let base = parse_measurements(&baseline)?;
    let graph = parse_measurements(&graph)?;
    let pairing = pair_speedups(&base, &graph)?;
    for size in &pairing.unmatched {
        eprintln!("warning: batch_size {size} is present in only one input; skipped");
    }
    if pairing.matched.is_empty() {
        return Err(Failure::Data(anyhow::anyhow!("no batch_size appears in both inputs")));
    }
    for (_, estimate) in &pairing.matched {
        writeln!(out, "{}", format_speedup(estimate))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Simulate {
            params,
            iterations,
            batch_size,
            mode,
            trace,
        } => simulate(params, iterations, batch_size, mode, trace, &mut out),
        Command::Fit {
            input,
            kind,
            total_iterations,
            validity_fraction,
        } => fit(input, kind, total_iterations, validity_fraction, &mut out),
        Command::Optimize {
            params,
            coefficients,
            baseline_total,
            iterations,
            mem_cap,
            validity_fraction,
        } => optimize(
            params,
            coefficients,
            baseline_total,
            iterations,
            mem_cap,
            validity_fraction,
            &mut out,
        ),
        Command::RunWorkload {
            workload,
            size,
            iterations,
            batch_size,
            mode,
            repeats,
            timings,
            checksum,
            parallel,
        } => run_workload(
            workload, size, iterations, batch_size, mode, repeats, timings, checksum, parallel,
            &mut out,
        ),
        Command::Speedup { baseline, graph } => speedup(baseline, graph, &mut out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
