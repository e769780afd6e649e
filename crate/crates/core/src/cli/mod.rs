//! The `sfp` command-line tool.
//!
//! Every subcommand writes `trace.csv` and `summary.json` (plus the solution)
//! into the output directory; commands that perform several runs write one
//! subdirectory per run and an aggregate `summary.json`. The exit code is 0
//! when every run converged, 2 when one hit the iteration cap, 3 when a line
//! search failed and 1 on errors.

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::apps::{
    build_imrt_problem, generate_phantom, qp_to_lcp, reference_objective, solve_lcp, toy_problem, ImrtInstance,
    LcpInstance, SignalDistribution, SparseRegressionSpec, TOY_STARTS,
};
use crate::apps::sparse::{evaluate, simulate, problem_from_data, solve_sparse};
use crate::error::{Error, Result};
use crate::io::{load_matrix, load_regions, load_vector, write_text, write_vector};
use crate::linalg::Vector;
use crate::solver::{self, Acceleration, DirectLinearSolver, SolveTrace, SolverConfig, Status};

pub use config::{Command, ModeName, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "sfp", version, about = "Split feasibility solvers")]
struct Cli {
    #[command(subcommand)]
    command: Option<Sub>,
    #[command(flatten)]
    global: GlobalArgs,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Relative decrease tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    grad_tol: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    /// `off` or `secants=q`.
    #[arg(long, global = true)]
    accel: Option<Acceleration>,
    /// Worker threads for multi-run commands.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Record wall-clock times in traces.
    #[arg(long, global = true)]
    timing: bool,
    /// Print the effective configuration as TOML and exit.
    #[arg(long, global = true)]
    dump_config: bool,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Solve the problem described in the `[problem]` config section.
    Solve,
    /// Monte Carlo sparse regression.
    SparseRegression {
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        /// Noise standard deviation; 0 fits the responses exactly.
        #[arg(long)]
        sigma: Option<f64>,
        /// `gaussian=variance` or `plus-minus=magnitude`.
        #[arg(long, value_parser = parse_signal)]
        signal: Option<SignalDistribution>,
        /// Number of consecutive seeds to run.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Linear complementarity problem `z ≥ 0, Mz + q ≥ 0, zᵀ(Mz + q) = 0`.
    Lcp {
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long)]
        q: Option<PathBuf>,
    },
    /// Convex QP `min cᵀx + ½xᵀBx` with `Ax ≥ b`, `x ≥ 0`.
    Qp {
        /// `B`
        #[arg(long)]
        quad: Option<PathBuf>,
        /// `A`
        #[arg(long)]
        constraints: Option<PathBuf>,
        /// `b`
        #[arg(long)]
        rhs: Option<PathBuf>,
        /// `c`
        #[arg(long)]
        linear: Option<PathBuf>,
    },
    /// Fluence map optimization on a dose matrix or a generated phantom.
    Imrt {
        #[arg(long, value_enum)]
        mode: Option<ModeName>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        dose: Option<PathBuf>,
        #[arg(long)]
        regions: Option<PathBuf>,
        /// Comma-separated per-region dose bounds.
        #[arg(long, value_delimiter = ',')]
        bounds: Option<Vec<f64>>,
        #[arg(long)]
        voxels: Option<usize>,
        #[arg(long)]
        beamlets: Option<usize>,
        #[arg(long = "region-count")]
        region_count: Option<usize>,
    },
    /// Two-dimensional demo from six starting points, plain and accelerated.
    DemoToy,
}

fn parse_signal(s: &str) -> std::result::Result<SignalDistribution, String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected gaussian=VARIANCE or plus-minus=MAGNITUDE, got {s:?}"))?;
    let value: f64 = value.parse().map_err(|e| format!("{value:?}: {e}"))?;
    match name {
        "gaussian" => Ok(SignalDistribution::Gaussian { variance: value }),
        "plus-minus" => Ok(SignalDistribution::PlusMinus { magnitude: value }),
        other => Err(format!("unknown signal law {other:?}")),
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let (config, base) = effective_config(&cli)?;
    if cli.global.dump_config {
        print!("{}", config.to_toml());
        return Ok(0);
    }
    let command = config
        .command
        .ok_or_else(|| Error::Config("no subcommand given and the config sets no `command`".into()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))?;
    create_dir(&config.out)?;
    let status = pool.install(|| match command {
        Command::Solve => run_solve(&config, &base),
        Command::SparseRegression => run_sparse(&config),
        Command::Lcp => run_lcp(&config),
        Command::Qp => run_qp(&config),
        Command::Imrt => run_imrt(&config),
        Command::DemoToy => run_toy(&config),
    })?;
    Ok(status.exit_code())
}

/// Loads the config file (if any) and applies command-line overrides.
/// Returns the config and the directory relative paths in it resolve from.
fn effective_config(cli: &Cli) -> Result<(RunConfig, PathBuf)> {
    let g = &cli.global;
    let (mut c, base) = match &g.config {
        Some(path) => {
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (RunConfig::load(path)?, base)
        }
        None => (RunConfig::default(), PathBuf::new()),
    };
    let base = if base.as_os_str().is_empty() { PathBuf::from(".") } else { base };
    if let Some(v) = &g.out {
        c.out = v.clone();
    }
    if let Some(v) = g.seed {
        c.seed = v;
    }
    if let Some(v) = g.tol {
        c.solver.tol = v;
    }
    if let Some(v) = g.grad_tol {
        c.solver.grad_tol = v;
    }
    if let Some(v) = g.max_iter {
        c.solver.max_iter = v;
    }
    if let Some(v) = g.accel {
        c.solver.accel = v;
    }
    if let Some(v) = g.jobs {
        c.jobs = v;
    }
    if g.timing {
        c.solver.timing = true;
    }
    if let Some(sub) = &cli.command {
        apply_subcommand(&mut c, sub);
    }
    c.validate()?;
    Ok((c, base))
}

fn apply_subcommand(c: &mut RunConfig, sub: &Sub) {
    fn set<T: Clone>(slot: &mut T, v: &Option<T>) {
        if let Some(v) = v {
            *slot = v.clone();
        }
    }
    fn set_opt<T: Clone>(slot: &mut Option<T>, v: &Option<T>) {
        if v.is_some() {
            *slot = v.clone();
        }
    }
    c.command = Some(match sub {
        Sub::Solve => Command::Solve,
        Sub::SparseRegression {
            m,
            n,
            k,
            sigma,
            signal,
            seeds,
        } => {
            set(&mut c.sparse.m, m);
            set(&mut c.sparse.n, n);
            set(&mut c.sparse.k, k);
            set(&mut c.sparse.sigma, sigma);
            set_opt(&mut c.sparse.signal, signal);
            set(&mut c.sparse.runs, seeds);
            Command::SparseRegression
        }
        Sub::Lcp { matrix, q } => {
            set_opt(&mut c.lcp.matrix, matrix);
            set_opt(&mut c.lcp.q, q);
            Command::Lcp
        }
        Sub::Qp {
            quad,
            constraints,
            rhs,
            linear,
        } => {
            set_opt(&mut c.qp.quadratic, quad);
            set_opt(&mut c.qp.constraints, constraints);
            set_opt(&mut c.qp.rhs, rhs);
            set_opt(&mut c.qp.linear, linear);
            Command::Qp
        }
        Sub::Imrt {
            mode,
            beta,
            gamma,
            dose,
            regions,
            bounds,
            voxels,
            beamlets,
            region_count,
        } => {
            set(&mut c.imrt.mode, mode);
            set(&mut c.imrt.beta, beta);
            set(&mut c.imrt.gamma, gamma);
            set_opt(&mut c.imrt.dose, dose);
            set_opt(&mut c.imrt.regions, regions);
            set_opt(&mut c.imrt.bounds, bounds);
            set(&mut c.imrt.voxels, voxels);
            set(&mut c.imrt.beamlets, beamlets);
            set(&mut c.imrt.region_count, region_count);
            Command::Imrt
        }
        Sub::DemoToy => Command::DemoToy,
    });
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("valid json");
    write_text(path, &(text + "\n"))
}

/// Writes `trace.csv`, `summary.json` (the trace summary merged with `extra`)
/// and the solution vector into `dir`.
fn write_run(dir: &Path, trace: &SolveTrace, solution_file: &str, extra: Value) -> Result<Value> {
    create_dir(dir)?;
    trace.write_csv(&dir.join("trace.csv"))?;
    let mut summary = trace.summary_json();
    if let (Some(obj), Value::Object(more)) = (summary.as_object_mut(), extra) {
        obj.extend(more);
    }
    write_json(&dir.join("summary.json"), &summary)?;
    write_vector(&dir.join(solution_file), &trace.solution)?;
    Ok(summary)
}

fn worst(statuses: impl IntoIterator<Item = Status>) -> Status {
    statuses
        .into_iter()
        .max_by_key(|s| s.exit_code())
        .unwrap_or(Status::Converged)
}

fn require<'a>(value: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::Config(format!("missing input: {what}")))
}

fn run_solve(c: &RunConfig, base: &Path) -> Result<Status> {
    let spec = c
        .problem
        .as_ref()
        .ok_or_else(|| Error::Config("`solve` needs a [problem] section in the config".into()))?;
    let problem = spec.build(base)?;
    let x0 = match &spec.x0 {
        Some(x) => Vector::from_row_slice(x),
        None => Vector::zeros(problem.dim()),
    };
    let config = c.solver.to_config();
    let trace = if spec.direct {
        DirectLinearSolver::new(&problem)?.solve(&x0, &config)?
    } else {
        solver::solve(&problem, &x0, &config)?
    };
    let extra = json!({ "form": format!("{:?}", problem.form()), "hinge": problem.is_hinge() });
    write_run(&c.out, &trace, "solution.csv", extra)?;
    Ok(trace.status)
}

fn run_sparse(c: &RunConfig) -> Result<Status> {
    use rayon::prelude::*;
    let s = &c.sparse;
    let mut base = if s.sigma > 0.0 {
        SparseRegressionSpec::noisy(s.m, s.n, s.k, s.sigma, c.seed)
    } else {
        SparseRegressionSpec::noiseless(s.m, s.n, s.k, c.seed)
    };
    if let Some(signal) = s.signal {
        base.signal = signal;
    }
    base.validate()?;
    let config = c.solver.to_config();
    let seeds: Vec<u64> = (0..s.runs as u64).map(|i| c.seed + i).collect();
    let runs: Vec<(u64, SolveTrace, Value)> = seeds
        .par_iter()
        .map(|&seed| {
            let spec = SparseRegressionSpec { seed, ..base.clone() };
            let data = simulate(&spec)?;
            let problem = problem_from_data(&data, spec.k, spec.epsilon())?;
            let trace = solve_sparse(&problem, &config)?;
            let outcome = evaluate(seed, &trace.solution, &data.truth, &trace);
            let extra = serde_json::to_value(&outcome).expect("outcome serializes");
            Ok((seed, trace, extra))
        })
        .collect::<Result<_>>()?;
    let mut outcomes = Vec::new();
    for (seed, trace, extra) in &runs {
        let dir = if runs.len() == 1 {
            c.out.clone()
        } else {
            c.out.join(format!("seed-{seed}"))
        };
        write_run(&dir, trace, "solution.csv", extra.clone())?;
        outcomes.push(extra.clone());
    }
    if runs.len() > 1 {
        let recovered = outcomes.iter().filter(|o| o["support_recovered"] == json!(true)).count();
        let mse = outcomes.iter().filter_map(|o| o["support_mse"].as_f64()).sum::<f64>() / outcomes.len() as f64;
        write_json(
            &c.out.join("summary.json"),
            &json!({
                "runs": outcomes.len(),
                "recovered": recovered,
                "mean_support_mse": mse,
                "outcomes": outcomes,
            }),
        )?;
    }
    Ok(worst(runs.iter().map(|r| r.1.status)))
}

fn lcp_run(c: &RunConfig, instance: &LcpInstance, solution_file: &str, extra: Value) -> Result<Status> {
    let config = c.solver.to_config();
    let sol = solve_lcp(instance, &Vector::zeros(instance.dim()), &config)?;
    let mut extra = extra;
    extra["complementarity"] = serde_json::to_value(sol.report).expect("report serializes");
    write_run(&c.out, &sol.trace, solution_file, extra)?;
    Ok(sol.trace.status)
}

fn run_lcp(c: &RunConfig) -> Result<Status> {
    let m = load_matrix(require(&c.lcp.matrix, "--matrix")?)?;
    let q = load_vector(require(&c.lcp.q, "--q")?)?;
    let instance = LcpInstance::new(m, q)?;
    lcp_run(c, &instance, "solution.csv", json!({}))
}

fn run_qp(c: &RunConfig) -> Result<Status> {
    let b_mat = load_matrix(require(&c.qp.quadratic, "--quad")?)?;
    let a = load_matrix(require(&c.qp.constraints, "--constraints")?)?;
    let b = load_vector(require(&c.qp.rhs, "--rhs")?)?;
    let n = b_mat.ncols();
    let lin = match &c.qp.linear {
        Some(p) => load_vector(p)?,
        None => Vector::zeros(n),
    };
    let instance = qp_to_lcp(&b_mat, &a, &b, &lin)?;
    let config = c.solver.to_config();
    let sol = solve_lcp(&instance, &Vector::zeros(instance.dim()), &config)?;
    let x = sol.trace.solution.rows(0, n).into_owned();
    let multipliers = sol.trace.solution.rows(n, b.len()).into_owned();
    let qp = instance.qp.as_ref().expect("built from a QP");
    let extra = json!({
        "x": x.as_slice(),
        "multipliers": multipliers.as_slice(),
        "qp_objective": qp.objective(&x),
        "complementarity": sol.report,
    });
    write_run(&c.out, &sol.trace, "solution.csv", extra)?;
    Ok(sol.trace.status)
}

fn load_imrt_instance(c: &RunConfig) -> Result<ImrtInstance> {
    let s = &c.imrt;
    let mut instance = match (&s.dose, &s.regions) {
        (Some(dose), Some(regions)) => {
            let dose = load_matrix(dose)?;
            let entries = load_regions(regions)?;
            ImrtInstance::from_region_entries(dose, &entries, s.bounds.as_deref(), s.gamma)?
        }
        (None, None) => generate_phantom(s.voxels, s.beamlets, s.region_count, c.seed)?,
        _ => return Err(Error::Config("--dose and --regions must be given together".into())),
    };
    instance.gamma = s.gamma;
    instance.validate()?;
    Ok(instance)
}

fn run_imrt(c: &RunConfig) -> Result<Status> {
    let instance = load_imrt_instance(c)?;
    let problem = build_imrt_problem(&instance, c.imrt.mode())?;
    let config = c.solver.to_config();
    let trace = solver::solve(&problem, &Vector::zeros(problem.dim()), &config)?;
    let extra = json!({
        "mode": c.imrt.mode(),
        "voxels": instance.voxels(),
        "beamlets": instance.beamlets(),
        "regions": instance.regions.len(),
        "reference_objective": reference_objective(&instance, &trace.solution)?,
        "min_weight": trace.solution.min(),
    });
    write_run(&c.out, &trace, "fluence.csv", extra)?;
    Ok(trace.status)
}

fn run_toy(c: &RunConfig) -> Result<Status> {
    let problem = toy_problem();
    let plain = SolverConfig {
        acceleration: Acceleration::Off,
        ..c.solver.to_config()
    };
    let accel = SolverConfig {
        acceleration: match c.solver.accel {
            Acceleration::Off => Acceleration::Secants(2),
            a => a,
        },
        ..plain.clone()
    };
    let mut rows = Vec::new();
    let mut statuses = Vec::new();
    for (i, start) in TOY_STARTS.iter().enumerate() {
        let x0 = Vector::from_row_slice(start);
        for (label, config) in [("plain", &plain), ("accel", &accel)] {
            let trace = solver::solve(&problem, &x0, config)?;
            let extra = json!({ "start": start, "acceleration": config.acceleration });
            let dir = c.out.join(format!("start-{i}-{label}"));
            write_run(&dir, &trace, "solution.csv", extra)?;
            rows.push(json!({
                "start": start,
                "variant": label,
                "status": trace.status,
                "iterations": trace.iterations,
                "mm_steps": trace.mm_steps,
                "final_f": trace.final_value(),
                "solution": trace.solution.as_slice(),
            }));
            statuses.push(trace.status);
        }
    }
    write_json(&c.out.join("summary.json"), &json!({ "runs": rows }))?;
    Ok(worst(statuses))
}
