//! Constrained GLM regression. Maximizing an exponential-family likelihood is
//! minimizing a Bregman divergence between responses and fitted means, so
//! the objective is
//! `Σ vᵢ D_φ(P_Cᵢ(x), x) + Σⱼ D_ζ(yⱼ, g⁻¹(aⱼᵀx))` with `φ = ½‖·‖²`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::proximity::{assemble_hessian, scaled_rows, WeightedSet};
use crate::solver::Objective;

/// Smallest fitted Poisson mean; `exp` underflow below this is an error.
pub const POISSON_MEAN_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GlmFamily {
    /// Identity link, `D(y, μ) = ½(y − μ)²`.
    Gaussian,
    /// Log link, `D(y, μ) = y log(y/μ) − y + μ`.
    Poisson,
}

#[derive(Debug, Clone)]
pub struct GlmSpec {
    pub family: GlmFamily,
    pub design: Matrix,
    pub response: Vector,
    /// Domain constraints with their weights `vᵢ`.
    pub constraints: Vec<WeightedSet>,
}

#[derive(Debug, Clone)]
pub struct GlmProblem {
    spec: GlmSpec,
    v: f64,
}

pub fn build_glm_problem(spec: GlmSpec) -> Result<GlmProblem> {
    let (m, n) = spec.design.shape();
    if spec.response.len() != m {
        return Err(Error::dims("GLM responses", m, spec.response.len()));
    }
    for ws in &spec.constraints {
        if ws.set.dim() != n {
            return Err(Error::dims("GLM constraint", n, ws.set.dim()));
        }
        if !(ws.weight > 0.0) || !ws.weight.is_finite() {
            return Err(Error::InvalidParameter(format!("constraint weight must be positive, got {}", ws.weight)));
        }
    }
    if spec.family == GlmFamily::Poisson {
        if let Some(j) = spec.response.iter().position(|y| !(*y >= 0.0) || !y.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Poisson response {j} = {} must be nonnegative",
                spec.response[j]
            )));
        }
    }
    let v = spec.constraints.iter().map(|ws| ws.weight).sum();
    Ok(GlmProblem { spec, v })
}

impl GlmProblem {
    pub fn spec(&self) -> &GlmSpec {
        &self.spec
    }

    /// Fitted means `g⁻¹(Ax)`.
    pub fn mean(&self, x: &Vector) -> Result<Vector> {
        let eta = &self.spec.design * x;
        match self.spec.family {
            GlmFamily::Gaussian => Ok(eta),
            GlmFamily::Poisson => {
                let mu = eta.map(f64::exp);
                if let Some(j) = mu.iter().position(|m| !(*m >= POISSON_MEAN_FLOOR) || !m.is_finite()) {
                    return Err(Error::domain(
                        "poisson",
                        format!("fitted mean {j} = {:e} leaves the representable range", mu[j]),
                    ));
                }
                Ok(mu)
            }
        }
    }

    fn deviance(&self, mu: &Vector) -> f64 {
        let y = &self.spec.response;
        match self.spec.family {
            GlmFamily::Gaussian => 0.5 * (y - mu).norm_squared(),
            GlmFamily::Poisson => y
                .iter()
                .zip(mu.iter())
                .map(|(&y, &m)| if y > 0.0 { y * (y / m).ln() - y + m } else { m })
                .sum(),
        }
    }

    fn penalty(&self, x: &Vector) -> Result<(f64, Vector)> {
        let mut value = 0.0;
        let mut pull = Vector::zeros(x.len());
        for ws in &self.spec.constraints {
            let r = x - ws.set.project(x)?;
            value += 0.5 * ws.weight * r.norm_squared();
            pull.axpy(ws.weight, &r, 1.0);
        }
        Ok((value, pull))
    }

    fn check(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::dims("GLM coefficients", self.dim(), x.len()));
        }
        Ok(())
    }
}

impl Objective for GlmProblem {
    fn dim(&self) -> usize {
        self.spec.design.ncols()
    }

    fn value(&self, x: &Vector) -> Result<f64> {
        self.check(x)?;
        let mu = self.mean(x)?;
        Ok(self.penalty(x)?.0 + self.deviance(&mu))
    }

    fn gradient(&self, x: &Vector) -> Result<(f64, Vector)> {
        self.check(x)?;
        let mu = self.mean(x)?;
        let (penalty, pull) = self.penalty(x)?;
        // for both canonical links the derivative in aⱼᵀx is μⱼ − yⱼ
        let g = pull + self.spec.design.tr_mul(&(&mu - &self.spec.response));
        Ok((penalty + self.deviance(&mu), g))
    }

    fn mm_direction(&self, x: &Vector) -> Result<(f64, Vector, Vector)> {
        let (f, g) = self.gradient(x)?;
        let curvature = match self.spec.family {
            GlmFamily::Gaussian => None,
            GlmFamily::Poisson => Some(self.mean(x)?),
        };
        let k = scaled_rows(&self.spec.design, 1.0, curvature.as_ref());
        let diag = Vector::from_element(self.dim(), self.v);
        let h = assemble_hessian(Some(&diag), None, Some(k))?;
        Ok((f, g.clone(), -h.solve(&g)))
    }
}

/// A Poisson design with a sparse coefficient vector and noiseless responses
/// `y = exp(Ax*)`. Design entries are `N(0, 0.25)`, nonzero coefficients
/// alternate between `1` and `−1`.
pub fn poisson_sparse_design(m: usize, n: usize, k: usize, seed: u64) -> (Matrix, Vector, Vector) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 0.5).expect("valid scale");
    let design = Matrix::from_fn(m, n, |_, _| normal.sample(&mut rng));
    let mut truth = Vector::zeros(n);
    for (r, i) in rand::seq::index::sample(&mut rng, n, k).iter().enumerate() {
        truth[i] = if r % 2 == 0 { 1.0 } else { -1.0 };
    }
    let response = (&design * &truth).map(f64::exp);
    (design, response, truth)
}
