//! MM iteration with Armijo backtracking and optional secant acceleration.

mod accel;
mod trace;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use accel::SecantAccelerator;
pub use trace::{IterationRecord, SolveTrace, Status};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::proximity::{assemble_hessian, scaled_rows, ApproxHessian, SplitProblem};

/// Written `off` or `secants=q` in configs and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Acceleration {
    Off,
    /// Quasi-Newton extrapolation from the latest `q` secant pairs.
    Secants(usize),
}

impl fmt::Display for Acceleration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Acceleration::Off => f.write_str("off"),
            Acceleration::Secants(q) => write!(f, "secants={q}"),
        }
    }
}

impl FromStr for Acceleration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "off" {
            return Ok(Acceleration::Off);
        }
        let q = s
            .strip_prefix("secants=")
            .and_then(|q| q.parse::<usize>().ok())
            .filter(|q| *q > 0)
            .ok_or_else(|| Error::InvalidParameter(format!("acceleration must be `off` or `secants=q` with q ≥ 1, got {s:?}")))?;
        Ok(Acceleration::Secants(q))
    }
}

impl TryFrom<String> for Acceleration {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Acceleration> for String {
    fn from(a: Acceleration) -> String {
        a.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Armijo slope α.
    pub armijo: f64,
    /// Backtracking factor σ; trial steps are η = σˢ.
    pub backtrack: f64,
    pub max_iterations: usize,
    /// Stop when `(f_k − f_{k+1}) / |f_k|` falls below this.
    pub rel_tol: f64,
    pub grad_tol: f64,
    pub acceleration: Acceleration,
    pub max_backtracks: usize,
    /// When false every record reports `time_s = 0`, making traces reproducible
    /// byte for byte.
    pub timing: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            armijo: 1e-4,
            backtrack: 0.5,
            max_iterations: 10_000,
            rel_tol: 1e-6,
            grad_tol: 1e-8,
            acceleration: Acceleration::Off,
            max_backtracks: 60,
            timing: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return bad(format!("Armijo slope must lie in (0, 1), got {}", self.armijo));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad(format!("backtracking factor must lie in (0, 1), got {}", self.backtrack));
        }
        if !(self.rel_tol >= 0.0) || !(self.grad_tol >= 0.0) {
            return bad("tolerances must be nonnegative".into());
        }
        if self.acceleration == Acceleration::Secants(0) {
            return bad("acceleration needs at least one secant pair".into());
        }
        Ok(())
    }
}

/// An objective that the MM machinery can drive.
pub trait Objective {
    fn dim(&self) -> usize;

    /// f(x). Points outside the objective's domain return an error, which
    /// the line search treats as a failed trial.
    fn value(&self, x: &Vector) -> Result<f64>;

    /// `(f(x), ∇f(x))`.
    fn gradient(&self, x: &Vector) -> Result<(f64, Vector)>;

    /// `(f(x), ∇f(x), −H(x)⁻¹∇f(x))` for the MM curvature `H`.
    fn mm_direction(&self, x: &Vector) -> Result<(f64, Vector, Vector)>;
}

impl Objective for SplitProblem {
    fn dim(&self) -> usize {
        SplitProblem::dim(self)
    }

    fn value(&self, x: &Vector) -> Result<f64> {
        SplitProblem::value(self, x)
    }

    fn gradient(&self, x: &Vector) -> Result<(f64, Vector)> {
        let e = self.eval_f(x)?;
        Ok((e.value, e.gradient))
    }

    fn mm_direction(&self, x: &Vector) -> Result<(f64, Vector, Vector)> {
        let e = self.eval_f(x)?;
        let h = self.hessian_at(x, &e)?;
        let d = -h.solve(&e.gradient);
        Ok((e.value, e.gradient, d))
    }
}

/// Outcome of one update `x_k → x_{k+1}`.
#[derive(Debug, Clone)]
pub struct Step {
    pub x: Vector,
    pub value: f64,
    pub eta: f64,
    pub backtracks: usize,
}

/// A fixed-point map ψ whose iterates decrease the objective.
pub trait Stepper {
    fn step(&mut self, x: &Vector) -> Result<Step>;
}

/// One MM update `x + η d` with `d = −H⁻¹∇f` and `η = σˢ` the first power
/// meeting `f(x + ηd) ≤ f(x) + αη∇fᵀd`.
pub fn mm_step<O: Objective + ?Sized>(objective: &O, x: &Vector, config: &SolverConfig) -> Result<Step> {
    let (f, g, d) = objective.mm_direction(x)?;
    let slope = g.dot(&d);
    if g.iter().all(|v| *v == 0.0) || !(slope < 0.0) {
        return Ok(Step {
            x: x.clone(),
            value: f,
            eta: 0.0,
            backtracks: 0,
        });
    }
    let mut eta = 1.0;
    for s in 0..=config.max_backtracks {
        let trial = x + &d * eta;
        if let Ok(ft) = objective.value(&trial) {
            if ft.is_finite() && ft <= f + config.armijo * eta * slope {
                return Ok(Step {
                    x: trial,
                    value: ft,
                    eta,
                    backtracks: s,
                });
            }
        }
        eta *= config.backtrack;
    }
    Err(Error::LineSearchFailed {
        backtracks: config.max_backtracks,
    })
}

struct MmStepper<'a, O: ?Sized> {
    objective: &'a O,
    config: &'a SolverConfig,
}

impl<O: Objective + ?Sized> Stepper for MmStepper<'_, O> {
    fn step(&mut self, x: &Vector) -> Result<Step> {
        mm_step(self.objective, x, self.config)
    }
}

/// Runs the MM iteration from `x0`.
pub fn solve<O: Objective + ?Sized>(objective: &O, x0: &Vector, config: &SolverConfig) -> Result<SolveTrace> {
    let mut stepper = MmStepper { objective, config };
    run(objective, &mut stepper, x0, config)
}

/// [`solve`] with secant acceleration; uses two pairs unless the config
/// already asks for a different number.
pub fn accelerated_solve<O: Objective + ?Sized>(
    objective: &O,
    x0: &Vector,
    config: &SolverConfig,
) -> Result<SolveTrace> {
    let mut config = config.clone();
    if config.acceleration == Acceleration::Off {
        config.acceleration = Acceleration::Secants(2);
    }
    solve(objective, x0, &config)
}

/// Iterates `stepper` from `x0`, recording a trace and applying the
/// configured acceleration on top of it.
pub fn run<O: Objective + ?Sized, S: Stepper + ?Sized>(
    objective: &O,
    stepper: &mut S,
    x0: &Vector,
    config: &SolverConfig,
) -> Result<SolveTrace> {
    config.validate()?;
    if x0.len() != objective.dim() {
        return Err(Error::dims("starting point", objective.dim(), x0.len()));
    }
    let start = Instant::now();
    let clock = || if config.timing { start.elapsed().as_secs_f64() } else { 0.0 };
    let mut accelerator = match config.acceleration {
        Acceleration::Secants(q) => Some(SecantAccelerator::new(q)),
        Acceleration::Off => None,
    };

    let mut x = x0.clone();
    let (mut f, g) = objective.gradient(&x)?;
    let mut grad_norm = g.norm();
    let mut records = vec![IterationRecord {
        iter: 0,
        f,
        grad_norm,
        eta: 0.0,
        backtracks: 0,
        accel_accepted: false,
        time_s: clock(),
    }];
    let mut mm_steps = 0;
    let mut iter = 0;

    let status = loop {
        if f == 0.0 || grad_norm < config.grad_tol {
            break Status::Converged;
        }
        if iter >= config.max_iterations {
            break Status::MaxIterations;
        }
        let first = match stepper.step(&x) {
            Ok(s) => s,
            Err(Error::LineSearchFailed { .. }) => break Status::LineSearchFailed,
            Err(e) => return Err(e),
        };
        mm_steps += 1;
        let (next, accepted) = match accelerator.as_mut() {
            None => (first, false),
            Some(acc) => {
                let second = match stepper.step(&first.x) {
                    Ok(s) => s,
                    Err(Error::LineSearchFailed { .. }) => break Status::LineSearchFailed,
                    Err(e) => return Err(e),
                };
                mm_steps += 1;
                let candidate = acc
                    .extrapolate(&x, &first.x, &second.x)
                    .and_then(|c| objective.value(&c).ok().map(|fc| (c, fc)))
                    .filter(|(_, fc)| fc.is_finite() && *fc < second.value);
                match candidate {
                    Some((c, fc)) => (
                        Step {
                            x: c,
                            value: fc,
                            eta: second.eta,
                            backtracks: first.backtracks + second.backtracks,
                        },
                        true,
                    ),
                    None => (
                        Step {
                            backtracks: first.backtracks + second.backtracks,
                            ..second
                        },
                        false,
                    ),
                }
            }
        };
        iter += 1;
        let (f_next, g_next) = objective.gradient(&next.x)?;
        grad_norm = g_next.norm();
        records.push(IterationRecord {
            iter,
            f: f_next,
            grad_norm,
            eta: next.eta,
            backtracks: next.backtracks,
            accel_accepted: accepted,
            time_s: clock(),
        });
        let decrease = (f - f_next) / f.abs();
        x = next.x;
        f = f_next;
        if decrease < config.rel_tol {
            break Status::Converged;
        }
    };
    Ok(SolveTrace {
        records,
        status,
        solution: x,
        iterations: iter,
        mm_steps,
        wall_time: clock(),
    })
}

/// Exact surrogate minimizer for problems with an affine map `h(x) = Ax + b`:
/// `x⁺ = (vI + wAᵀA)⁻¹ [Σ vᵢ P_Cᵢ(x) + Aᵀ Σ wⱼ (P_Qⱼ(Ax + b) − b)]`.
///
/// The curvature matrix does not depend on `x`, so it is factored once.
#[derive(Debug, Clone)]
pub struct DirectLinearSolver<'a> {
    problem: &'a SplitProblem,
    a: crate::linalg::Matrix,
    b: Vector,
    hessian: ApproxHessian,
}

impl<'a> DirectLinearSolver<'a> {
    pub fn new(problem: &'a SplitProblem) -> Result<Self> {
        let (a, b) = problem.map().affine_parts().ok_or_else(|| {
            Error::Unsupported("the direct update needs an affine map".into())
        })?;
        if !problem.domain_generator().is_squared_euclidean() || !problem.range_generator().is_squared_euclidean() {
            return Err(Error::Unsupported(
                "the direct update needs squared-Euclidean generators".into(),
            ));
        }
        let n = problem.dim();
        let diag = Vector::from_element(n, problem.v());
        let k = (problem.w() > 0.0).then(|| scaled_rows(&a, problem.w(), None));
        let hessian = assemble_hessian(Some(&diag), None, k)?;
        Ok(Self { problem, a, b, hessian })
    }

    pub fn hessian(&self) -> &ApproxHessian {
        &self.hessian
    }

    pub fn direct_linear_step(&self, x: &Vector) -> Result<Vector> {
        let e = self.problem.eval_f(x)?;
        let mut rhs = Vector::zeros(x.len());
        for (ws, p) in self.problem.domain_sets().iter().zip(&e.domain_projections) {
            rhs.axpy(ws.weight, p, 1.0);
        }
        if !e.range_projections.is_empty() {
            let mut pull = Vector::zeros(self.b.len());
            for (ws, p) in self.problem.range_sets().iter().zip(&e.range_projections) {
                pull.axpy(ws.weight, &(p - &self.b), 1.0);
            }
            rhs += self.a.tr_mul(&pull);
        }
        Ok(self.hessian.solve(&rhs))
    }

    pub fn solve(&mut self, x0: &Vector, config: &SolverConfig) -> Result<SolveTrace> {
        let problem = self.problem;
        run(problem, self, x0, config)
    }
}

impl Stepper for DirectLinearSolver<'_> {
    fn step(&mut self, x: &Vector) -> Result<Step> {
        let next = self.direct_linear_step(x)?;
        let value = self.problem.value(&next)?;
        Ok(Step {
            x: next,
            value,
            eta: 1.0,
            backtracks: 0,
        })
    }
}
