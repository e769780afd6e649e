//! Sparse regression as split feasibility: `C = {z : ‖z‖₀ ≤ k}`, `h(x) = Ax`
//! and `Q = {y}` for exact data or the ball `B(y, ε)` when the responses are
//! noisy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::mappings::SmoothMap;
use crate::proximity::SplitProblem;
use crate::sets::{top_k_support, ConstraintSet};
use crate::solver::{DirectLinearSolver, SolveTrace, SolverConfig};

/// Law of the nonzero entries of the true signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalDistribution {
    /// Centered normal with the given variance.
    Gaussian { variance: f64 },
    /// `±magnitude` with equal probability.
    PlusMinus { magnitude: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseRegressionSpec {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    /// Standard deviation of the response noise.
    pub noise: f64,
    pub signal: SignalDistribution,
    pub seed: u64,
}

impl SparseRegressionSpec {
    /// Noiseless design with `N(0, 5)` signal entries.
    pub fn noiseless(m: usize, n: usize, k: usize, seed: u64) -> Self {
        Self {
            m,
            n,
            k,
            noise: 0.0,
            signal: SignalDistribution::Gaussian { variance: 5.0 },
            seed,
        }
    }

    /// Noisy design with `±5` signal entries and `N(0, σ²)` noise.
    pub fn noisy(m: usize, n: usize, k: usize, sigma: f64, seed: u64) -> Self {
        Self {
            m,
            n,
            k,
            noise: sigma,
            signal: SignalDistribution::PlusMinus { magnitude: 5.0 },
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.k == 0 {
            return Err(Error::InvalidParameter("m, n and k must be positive".into()));
        }
        if self.k > self.n {
            return Err(Error::InvalidParameter(format!("k = {} exceeds n = {}", self.k, self.n)));
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return Err(Error::InvalidParameter(format!("noise must be finite and nonnegative, got {}", self.noise)));
        }
        match self.signal {
            SignalDistribution::Gaussian { variance } if !(variance > 0.0) => {
                Err(Error::InvalidParameter(format!("signal variance must be positive, got {variance}")))
            }
            SignalDistribution::PlusMinus { magnitude } if !(magnitude > 0.0) => {
                Err(Error::InvalidParameter(format!("signal magnitude must be positive, got {magnitude}")))
            }
            _ => Ok(()),
        }
    }

    /// Radius of the response ball, `σ√m`.
    pub fn epsilon(&self) -> f64 {
        self.noise * (self.m as f64).sqrt()
    }
}

/// Simulated data: design `A`, responses `y` and the true signal.
#[derive(Debug, Clone)]
pub struct SparseData {
    pub design: Matrix,
    pub response: Vector,
    pub truth: Vector,
}

pub fn simulate(spec: &SparseRegressionSpec) -> Result<SparseData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let design = Matrix::from_fn(spec.m, spec.n, |_, _| StandardNormal.sample(&mut rng));
    let support = rand::seq::index::sample(&mut rng, spec.n, spec.k);
    let mut truth = Vector::zeros(spec.n);
    for i in support.iter() {
        truth[i] = match spec.signal {
            SignalDistribution::Gaussian { variance } => variance.sqrt() * rng.sample::<f64, _>(StandardNormal),
            SignalDistribution::PlusMinus { magnitude } => {
                if rng.random_bool(0.5) {
                    magnitude
                } else {
                    -magnitude
                }
            }
        };
    }
    let mut response = &design * &truth;
    if spec.noise > 0.0 {
        let noise = Normal::new(0.0, spec.noise).expect("noise is finite");
        response.iter_mut().for_each(|y| *y += noise.sample(&mut rng));
    }
    Ok(SparseData {
        design,
        response,
        truth,
    })
}

/// The split feasibility problem for `spec` together with the true signal.
pub fn build_sparse_regression(spec: &SparseRegressionSpec) -> Result<(SplitProblem, Vector)> {
    let data = simulate(spec)?;
    let problem = problem_from_data(&data, spec.k, spec.epsilon())?;
    Ok((problem, data.truth))
}

/// Builds the problem from existing data; `epsilon = 0` asks for `Ax = y`.
pub fn problem_from_data(data: &SparseData, k: usize, epsilon: f64) -> Result<SplitProblem> {
    let range = if epsilon > 0.0 {
        ConstraintSet::ball(data.response.clone(), epsilon)?
    } else {
        ConstraintSet::singleton(data.response.clone())
    };
    SplitProblem::builder(SmoothMap::Linear(data.design.clone()))
        .domain(ConstraintSet::sparsity(data.design.ncols(), k)?, 0.5)
        .range(range, 0.5)
        .build()
}

/// Solves with the cached direct update from `x₀ = 0`.
pub fn solve_sparse(problem: &SplitProblem, config: &SolverConfig) -> Result<SolveTrace> {
    let mut solver = DirectLinearSolver::new(problem)?;
    solver.solve(&Vector::zeros(problem.dim()), config)
}

/// Per-run recovery statistics.
#[derive(Debug, Clone, Serialize)]
pub struct SparseOutcome {
    pub seed: u64,
    pub support_recovered: bool,
    pub max_abs_error: f64,
    /// Mean squared error over the true support.
    pub support_mse: f64,
    pub iterations: usize,
    pub final_f: f64,
}

pub fn evaluate(seed: u64, estimate: &Vector, truth: &Vector, trace: &SolveTrace) -> SparseOutcome {
    let true_support: Vec<usize> = (0..truth.len()).filter(|&i| truth[i] != 0.0).collect();
    let mut found = top_k_support(estimate, true_support.len());
    found.sort_unstable();
    let support_mse = true_support
        .iter()
        .map(|&i| (estimate[i] - truth[i]).powi(2))
        .sum::<f64>()
        / true_support.len().max(1) as f64;
    SparseOutcome {
        seed,
        support_recovered: found == true_support,
        max_abs_error: (estimate - truth).amax(),
        support_mse,
        iterations: trace.iterations,
        final_f: trace.final_value(),
    }
}

/// Simulates and solves one instance.
pub fn run_once(spec: &SparseRegressionSpec, config: &SolverConfig) -> Result<SparseOutcome> {
    let (problem, truth) = build_sparse_regression(spec)?;
    let trace = solve_sparse(&problem, config)?;
    Ok(evaluate(spec.seed, &trace.solution, &truth, &trace))
}

/// Runs `spec` once per seed in parallel, in seed order.
pub fn monte_carlo(spec: &SparseRegressionSpec, seeds: &[u64], config: &SolverConfig) -> Result<Vec<SparseOutcome>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let spec = SparseRegressionSpec { seed, ..spec.clone() };
            run_once(&spec, config)
        })
        .collect()
}
