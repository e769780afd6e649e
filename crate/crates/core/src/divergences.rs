//! Bregman generators, their divergences and Bregman projections.
//!
//! A generator φ is a strictly convex function; its divergence is
//! `D_φ(v, u) = φ(v) − φ(u) − ∇φ(u)ᵀ(v − u)`. Projections onto half-spaces and
//! hyperplanes solve the scalar problem in the multiplier γ of
//! `∇φ*(∇φ(x) − γa)` with a safeguarded Newton iteration.

use crate::error::{Error, Result};
use crate::linalg::{factor_spd, Matrix, SpdFactorization, Vector};
use crate::sets::{ConstraintSet, SetKind};

/// Scalar tolerance on `c − aᵀpoint(γ)`, scaled by `1 + |c|`.
pub const PROJECTION_TOL: f64 = 1e-10;
pub const PROJECTION_MAX_ITER: usize = 100;

/// Doubling steps allowed before the multiplier search is declared divergent.
const MAX_EXPANSIONS: usize = 64;

#[derive(Debug, Clone)]
enum Inner {
    SquaredEuclidean,
    NegativeEntropy,
    Quadratic { m: Matrix, factor: SpdFactorization },
    Beta(f64),
    ItakuraSaito,
}

/// A strictly convex generator φ.
#[derive(Debug, Clone)]
pub struct BregmanGenerator {
    inner: Inner,
}

/// Plain description of a generator, e.g. for configuration output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeneratorKind {
    SquaredEuclidean,
    NegativeEntropy,
    Quadratic,
    Beta(f64),
    ItakuraSaito,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BregmanProjection {
    pub point: Vector,
    pub gamma: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum Use {
    /// Only φ itself must be finite.
    Value,
    /// ∇φ and d²φ must be finite as well.
    Derivative,
}

fn is_even_integer(b: f64) -> bool {
    b.fract() == 0.0 && b >= 2.0 && (b as i64) % 2 == 0
}

/// `x^e`, exact for integer exponents so negative bases work where defined.
fn power(x: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() < i32::MAX as f64 {
        x.powi(e as i32)
    } else {
        x.powf(e)
    }
}

fn beta_admits(beta: f64, x: f64, purpose: Use) -> bool {
    if x > 0.0 {
        true
    } else if x == 0.0 {
        match purpose {
            Use::Value => beta > 0.0,
            Use::Derivative => beta >= 2.0,
        }
    } else {
        x.is_finite() && is_even_integer(beta)
    }
}

impl BregmanGenerator {
    /// `φ(x) = ½‖x‖²`
    pub fn squared_euclidean() -> Self {
        Self {
            inner: Inner::SquaredEuclidean,
        }
    }

    /// `φ(x) = Σ x log x`, generating the Kullback-Leibler divergence.
    pub fn negative_entropy() -> Self {
        Self {
            inner: Inner::NegativeEntropy,
        }
    }

    /// `φ(x) = ½ xᵀMx` for a symmetric positive-definite `M`.
    pub fn quadratic(m: Matrix) -> Result<Self> {
        let factor = factor_spd(&m)?;
        Ok(Self {
            inner: Inner::Quadratic { m, factor },
        })
    }

    /// `φ(x) = Σ x^β / (β(β − 1))` for `β ∉ {0, 1}`.
    pub fn beta(beta: f64) -> Result<Self> {
        if !beta.is_finite() || beta == 0.0 || beta == 1.0 {
            return Err(Error::InvalidParameter(format!(
                "beta exponent must be finite and differ from 0 and 1, got {beta}"
            )));
        }
        Ok(Self {
            inner: Inner::Beta(beta),
        })
    }

    /// `φ(x) = −Σ log x`
    pub fn itakura_saito() -> Self {
        Self {
            inner: Inner::ItakuraSaito,
        }
    }

    pub fn kind(&self) -> GeneratorKind {
        match &self.inner {
            Inner::SquaredEuclidean => GeneratorKind::SquaredEuclidean,
            Inner::NegativeEntropy => GeneratorKind::NegativeEntropy,
            Inner::Quadratic { .. } => GeneratorKind::Quadratic,
            Inner::Beta(b) => GeneratorKind::Beta(*b),
            Inner::ItakuraSaito => GeneratorKind::ItakuraSaito,
        }
    }

    pub fn name(&self) -> &'static str {
        match &self.inner {
            Inner::SquaredEuclidean => "squared-euclidean",
            Inner::NegativeEntropy => "negative-entropy",
            Inner::Quadratic { .. } => "quadratic",
            Inner::Beta(_) => "beta",
            Inner::ItakuraSaito => "itakura-saito",
        }
    }

    pub fn is_squared_euclidean(&self) -> bool {
        matches!(self.inner, Inner::SquaredEuclidean)
    }

    /// True when d²φ is diagonal.
    pub fn is_separable(&self) -> bool {
        !matches!(self.inner, Inner::Quadratic { .. })
    }

    fn check_dim(&self, x: &Vector) -> Result<()> {
        if let Inner::Quadratic { m, .. } = &self.inner {
            if m.nrows() != x.len() {
                return Err(Error::dims("quadratic generator", m.nrows(), x.len()));
            }
        }
        Ok(())
    }

    fn check(&self, x: &Vector, purpose: Use) -> Result<()> {
        self.check_dim(x)?;
        let bad = |detail: String| Err(Error::domain(self.name(), detail));
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return bad(format!("entry {i} is not finite"));
        }
        match &self.inner {
            Inner::SquaredEuclidean | Inner::Quadratic { .. } => Ok(()),
            Inner::NegativeEntropy => {
                let ok = |v: f64| if purpose == Use::Value { v >= 0.0 } else { v > 0.0 };
                match x.iter().position(|v| !ok(*v)) {
                    Some(i) => bad(format!("entry {i} = {} must be positive", x[i])),
                    None => Ok(()),
                }
            }
            Inner::ItakuraSaito => match x.iter().position(|v| *v <= 0.0) {
                Some(i) => bad(format!("entry {i} = {} must be positive", x[i])),
                None => Ok(()),
            },
            Inner::Beta(b) => match x.iter().position(|v| !beta_admits(*b, *v, purpose)) {
                Some(i) => bad(format!("entry {i} = {} is not admissible for beta = {b}", x[i])),
                None => Ok(()),
            },
        }
    }

    /// Errors unless ∇φ and d²φ are defined at `x`.
    pub fn check_domain(&self, x: &Vector) -> Result<()> {
        self.check(x, Use::Derivative)
    }

    pub fn in_domain(&self, x: &Vector) -> bool {
        self.check_domain(x).is_ok()
    }

    /// φ(x).
    pub fn value(&self, x: &Vector) -> Result<f64> {
        self.check(x, Use::Value)?;
        Ok(match &self.inner {
            Inner::SquaredEuclidean => 0.5 * x.norm_squared(),
            Inner::NegativeEntropy => x.iter().map(|&v| if v == 0.0 { 0.0 } else { v * v.ln() }).sum(),
            Inner::Quadratic { m, .. } => 0.5 * x.dot(&(m * x)),
            Inner::Beta(b) => x.iter().map(|&v| power(v, *b)).sum::<f64>() / (b * (b - 1.0)),
            Inner::ItakuraSaito => -x.iter().map(|v| v.ln()).sum::<f64>(),
        })
    }

    /// ∇φ(x).
    pub fn grad_phi(&self, x: &Vector) -> Result<Vector> {
        self.check(x, Use::Derivative)?;
        Ok(match &self.inner {
            Inner::SquaredEuclidean => x.clone(),
            Inner::NegativeEntropy => x.map(|v| v.ln() + 1.0),
            Inner::Quadratic { m, .. } => m * x,
            Inner::Beta(b) => x.map(|v| power(v, b - 1.0) / (b - 1.0)),
            Inner::ItakuraSaito => x.map(|v| -1.0 / v),
        })
    }

    /// Diagonal of d²φ(x); fails for the non-separable quadratic generator.
    pub fn hess_diag(&self, x: &Vector) -> Result<Vector> {
        self.check(x, Use::Derivative)?;
        Ok(match &self.inner {
            Inner::SquaredEuclidean => Vector::from_element(x.len(), 1.0),
            Inner::NegativeEntropy => x.map(|v| 1.0 / v),
            Inner::Quadratic { .. } => {
                return Err(Error::Unsupported(
                    "quadratic generator has no diagonal Hessian".into(),
                ))
            }
            Inner::Beta(b) => x.map(|v| power(v, b - 2.0)),
            Inner::ItakuraSaito => x.map(|v| 1.0 / (v * v)),
        })
    }

    /// d²φ(x) as a dense matrix.
    pub fn hess_matrix(&self, x: &Vector) -> Result<Matrix> {
        match &self.inner {
            Inner::Quadratic { m, .. } => {
                self.check_dim(x)?;
                Ok(m.clone())
            }
            _ => Ok(Matrix::from_diagonal(&self.hess_diag(x)?)),
        }
    }

    /// d²φ(x) · w.
    pub fn hess_phi_apply(&self, x: &Vector, w: &Vector) -> Result<Vector> {
        if w.len() != x.len() {
            return Err(Error::dims("hess_phi_apply", x.len(), w.len()));
        }
        match &self.inner {
            Inner::Quadratic { m, .. } => {
                self.check_dim(x)?;
                Ok(m * w)
            }
            _ => Ok(self.hess_diag(x)?.component_mul(w)),
        }
    }

    /// ∇φ*(z), the inverse of ∇φ.
    pub fn conj_grad(&self, z: &Vector) -> Result<Vector> {
        self.check_dim(z)?;
        let out = match &self.inner {
            Inner::SquaredEuclidean => z.clone(),
            Inner::NegativeEntropy => z.map(|v| (v - 1.0).exp()),
            Inner::Quadratic { factor, .. } => factor.solve(z),
            Inner::Beta(b) => {
                let e = 1.0 / (b - 1.0);
                let mut out = Vector::zeros(z.len());
                for (i, &zi) in z.iter().enumerate() {
                    let t = (b - 1.0) * zi;
                    out[i] = if t > 0.0 {
                        t.powf(e)
                    } else if t == 0.0 && *b >= 2.0 {
                        0.0
                    } else if t < 0.0 && is_even_integer(*b) {
                        // odd root of a negative number
                        -(-t).powf(e)
                    } else {
                        return Err(Error::domain(
                            "beta",
                            format!("dual entry {i} = {zi} lies outside the range of the gradient"),
                        ));
                    };
                }
                out
            }
            Inner::ItakuraSaito => {
                if let Some(i) = z.iter().position(|v| *v >= 0.0) {
                    return Err(Error::domain(
                        "itakura-saito",
                        format!("dual entry {i} = {} must be negative", z[i]),
                    ));
                }
                z.map(|v| -1.0 / v)
            }
        };
        if let Some(i) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(self.name(), format!("conjugate gradient entry {i} overflows")));
        }
        Ok(out)
    }

    /// `D_φ(v, u)`.
    pub fn divergence(&self, v: &Vector, u: &Vector) -> Result<f64> {
        if v.len() != u.len() {
            return Err(Error::dims("divergence", u.len(), v.len()));
        }
        self.check(v, Use::Value)?;
        self.check(u, Use::Derivative)?;
        let d = match &self.inner {
            Inner::SquaredEuclidean => 0.5 * (v - u).norm_squared(),
            Inner::Quadratic { m, .. } => {
                let r = v - u;
                0.5 * r.dot(&(m * &r))
            }
            Inner::NegativeEntropy => v
                .iter()
                .zip(u.iter())
                .map(|(&a, &b)| if a == 0.0 { b } else { a * (a / b).ln() - a + b })
                .sum(),
            Inner::Beta(beta) => v
                .iter()
                .zip(u.iter())
                .map(|(&a, &b)| {
                    if a == b {
                        return 0.0;
                    }
                    power(a, *beta) / (beta * (beta - 1.0)) + power(b, *beta) / beta
                        - a * power(b, beta - 1.0) / (beta - 1.0)
                })
                .sum(),
            Inner::ItakuraSaito => v
                .iter()
                .zip(u.iter())
                .map(|(&a, &b)| a / b - (a / b).ln() - 1.0)
                .sum(),
        };
        // Cancellation can leave a tiny negative residue.
        Ok(d.max(0.0))
    }

    /// Bregman projection of `x` onto `set`.
    ///
    /// Half-spaces and hyperplanes go through the multiplier search for
    /// every generator. Boxes, orthants, sparsity and complementarity sets
    /// are handled coordinate-wise for separable generators; balls only
    /// under the squared Euclidean generator.
    pub fn project(&self, set: &ConstraintSet, x: &Vector) -> Result<Vector> {
        if x.len() != set.dim() {
            return Err(Error::dims("Bregman projection", set.dim(), x.len()));
        }
        match set.kind() {
            SetKind::HalfSpace { normal, offset } => {
                Ok(bregman_project_halfspace(self, x, normal, *offset)?.point)
            }
            SetKind::Hyperplane { normal, offset } => {
                Ok(bregman_project_hyperplane(self, x, normal, *offset)?.point)
            }
            SetKind::Singleton(y) => Ok(y.clone()),
            _ if self.is_squared_euclidean() => set.project(x),
            _ if !self.is_separable() => Err(Error::Unsupported(format!(
                "Bregman projection onto {} is not available for the quadratic generator",
                kind_name(set.kind())
            ))),
            SetKind::Box { .. } | SetKind::NonnegativeOrthant { .. } => set.project(x),
            SetKind::Sparsity { k, .. } => self.project_sparsity(x, *k),
            SetKind::Complementarity { pairs } => self.project_complementarity(x, *pairs),
            SetKind::Ball { .. } => Err(Error::Unsupported(format!(
                "Bregman projection onto a ball requires the squared Euclidean generator, not {}",
                self.name()
            ))),
        }
    }

    /// Divergence of the scalar `a` from `b`.
    fn scalar_divergence(&self, a: f64, b: f64) -> Result<f64> {
        self.divergence(&Vector::from_element(1, a), &Vector::from_element(1, b))
    }

    fn zeroing_cost(&self, u: f64) -> Result<f64> {
        self.scalar_divergence(0.0, u).map_err(|_| {
            Error::Unsupported(format!(
                "the {} generator cannot place zeros, so sparse projections are undefined",
                self.name()
            ))
        })
    }

    fn project_sparsity(&self, x: &Vector, k: usize) -> Result<Vector> {
        self.check_domain(x)?;
        let costs = x
            .iter()
            .map(|&u| self.zeroing_cost(u))
            .collect::<Result<Vec<_>>>()?;
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by(|&i, &j| costs[j].total_cmp(&costs[i]));
        let mut out = Vector::zeros(x.len());
        for &i in order.iter().take(k) {
            out[i] = x[i];
        }
        Ok(out)
    }

    fn project_complementarity(&self, x: &Vector, pairs: usize) -> Result<Vector> {
        self.check_domain(x)?;
        let mut out = Vector::zeros(x.len());
        for i in 0..pairs {
            let (u, v) = (x[i], x[pairs + i]);
            let (pu, pv) = (u.max(0.0), v.max(0.0));
            let keep_u = self.scalar_divergence(pu, u)? + self.zeroing_cost(v)?;
            let keep_v = self.zeroing_cost(u)? + self.scalar_divergence(pv, v)?;
            if keep_u <= keep_v {
                out[i] = pu;
            } else {
                out[pairs + i] = pv;
            }
        }
        Ok(out)
    }
}

fn kind_name(kind: &SetKind) -> &'static str {
    match kind {
        SetKind::Box { .. } => "a box",
        SetKind::Ball { .. } => "a ball",
        SetKind::HalfSpace { .. } => "a half-space",
        SetKind::Hyperplane { .. } => "a hyperplane",
        SetKind::Singleton(_) => "a singleton",
        SetKind::NonnegativeOrthant { .. } => "the nonnegative orthant",
        SetKind::Sparsity { .. } => "a sparsity set",
        SetKind::Complementarity { .. } => "a complementarity set",
    }
}

fn check_normal(a: &Vector, x: &Vector) -> Result<()> {
    if a.len() != x.len() {
        return Err(Error::dims("Bregman projection normal", x.len(), a.len()));
    }
    if a.iter().all(|v| *v == 0.0) {
        return Err(Error::ZeroNormal);
    }
    Ok(())
}

/// Residual `c − aᵀpoint(γ)` and its derivative `aᵀ[d²φ(point)]⁻¹a`.
struct Scalar<'a> {
    gen: &'a BregmanGenerator,
    dual: Vector,
    a: &'a Vector,
    c: f64,
}

impl Scalar<'_> {
    fn eval(&self, gamma: f64) -> Option<(Vector, f64, f64)> {
        let point = self.gen.conj_grad(&(&self.dual - self.a * gamma)).ok()?;
        let residual = self.c - self.a.dot(&point);
        if !residual.is_finite() {
            return None;
        }
        let slope = match &self.gen.inner {
            Inner::Quadratic { factor, .. } => self.a.dot(&factor.solve(self.a)),
            _ => match self.gen.hess_diag(&point) {
                Ok(d) => self.a.iter().zip(d.iter()).map(|(ai, di)| ai * ai / di).sum(),
                Err(_) => f64::NAN,
            },
        };
        Some((point, residual, slope))
    }
}

/// Bregman projection onto `{z : aᵀz = c}`.
pub fn bregman_project_hyperplane(
    gen: &BregmanGenerator,
    x: &Vector,
    a: &Vector,
    c: f64,
) -> Result<BregmanProjection> {
    check_normal(a, x)?;
    let problem = Scalar {
        gen,
        dual: gen.grad_phi(x)?,
        a,
        c,
    };
    let tol = PROJECTION_TOL * (1.0 + c.abs());

    // Invariant: residual(lo) < 0 < residual(hi). γ = 0 is always feasible
    // because x lies in the domain, so evaluation failures at γ signal that
    // the search overshot on that side.
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut gamma = 0.0;
    let mut best: Option<(f64, Vector, f64)> = None;
    let mut expansions = 0;
    let mut previous = f64::INFINITY;
    for iteration in 0..PROJECTION_MAX_ITER {
        let next = match problem.eval(gamma) {
            Some((point, residual, slope)) => {
                if residual.abs() <= tol {
                    return Ok(BregmanProjection {
                        point,
                        gamma,
                        iterations: iteration,
                    });
                }
                if best.as_ref().is_none_or(|b| residual.abs() < b.2.abs()) {
                    best = Some((gamma, point, residual));
                }
                if residual < 0.0 {
                    lo = gamma;
                } else {
                    hi = gamma;
                }
                // Newton stalls where ∇φ* has a vertical tangent; bisect
                // whenever a bracketed step fails to halve the residual.
                let stalled = lo.is_finite() && hi.is_finite() && residual.abs() > 0.5 * previous;
                previous = residual.abs();
                let newton = gamma - residual / slope;
                if !stalled && newton.is_finite() && slope > 0.0 && newton > lo && newton < hi {
                    Some(newton)
                } else {
                    None
                }
            }
            None => {
                if gamma > 0.0 {
                    hi = gamma;
                } else {
                    lo = gamma;
                }
                None
            }
        };
        gamma = match next {
            Some(g) => g,
            None if lo.is_finite() && hi.is_finite() => {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                mid
            }
            None => {
                expansions += 1;
                if expansions > MAX_EXPANSIONS {
                    return Err(Error::NoFiniteMinimizer);
                }
                if hi.is_infinite() {
                    lo + lo.abs().max(1.0)
                } else {
                    hi - hi.abs().max(1.0)
                }
            }
        };
        if gamma.abs() > 1e300 {
            return Err(Error::NoFiniteMinimizer);
        }
    }
    match best {
        Some((gamma, point, residual)) if residual.abs() <= 1e-8 * (1.0 + c.abs()) => {
            Ok(BregmanProjection {
                point,
                gamma,
                iterations: PROJECTION_MAX_ITER,
            })
        }
        Some(_) if lo.is_infinite() || hi.is_infinite() => Err(Error::NoFiniteMinimizer),
        Some((_, _, residual)) => Err(Error::ProjectionNotConverged {
            residual: residual.abs(),
            iterations: PROJECTION_MAX_ITER,
        }),
        None => Err(Error::NoFiniteMinimizer),
    }
}

/// Bregman projection onto `{z : aᵀz ≤ c}`; feasible points are returned
/// unchanged with `γ = 0`.
pub fn bregman_project_halfspace(
    gen: &BregmanGenerator,
    x: &Vector,
    a: &Vector,
    c: f64,
) -> Result<BregmanProjection> {
    check_normal(a, x)?;
    gen.check_domain(x)?;
    if a.dot(x) <= c {
        return Ok(BregmanProjection {
            point: x.clone(),
            gamma: 0.0,
            iterations: 0,
        });
    }
    bregman_project_hyperplane(gen, x, a, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::project_halfspace;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    fn all_generators() -> Vec<BregmanGenerator> {
        vec![
            BregmanGenerator::squared_euclidean(),
            BregmanGenerator::negative_entropy(),
            BregmanGenerator::quadratic(Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap(),
            BregmanGenerator::beta(4.0).unwrap(),
            BregmanGenerator::beta(1.5).unwrap(),
            BregmanGenerator::beta(-1.0).unwrap(),
            BregmanGenerator::beta(0.5).unwrap(),
            BregmanGenerator::itakura_saito(),
        ]
    }

    fn random_positive(rng: &mut ChaCha8Rng, n: usize) -> Vector {
        Vector::from_fn(n, |_, _| rng.random_range(0.2..3.0))
    }

    #[test]
    fn divergence_examples() {
        let sq = BregmanGenerator::squared_euclidean();
        assert_eq!(sq.divergence(&v(&[1.0, 2.0]), &v(&[1.0, 2.0])).unwrap(), 0.0);
        let kl = BregmanGenerator::negative_entropy();
        let d = kl.divergence(&v(&[1.0]), &v(&[2.0])).unwrap();
        assert_relative_eq!(d, 0.5f64.ln() + 1.0, epsilon = 1e-15);
        assert_relative_eq!(d, 0.30685, epsilon = 1e-5);
        let b2 = BregmanGenerator::beta(2.0).unwrap();
        assert_relative_eq!(b2.divergence(&v(&[2.0]), &v(&[0.0])).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn beta_two_is_half_squared_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let b2 = BregmanGenerator::beta(2.0).unwrap();
        for _ in 0..100 {
            let a = Vector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
            let b = Vector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
            let d = b2.divergence(&a, &b).unwrap();
            assert_relative_eq!(d, 0.5 * (&a - &b).norm_squared(), epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn domain_violations() {
        let kl = BregmanGenerator::negative_entropy();
        assert!(matches!(kl.grad_phi(&v(&[-1.0])), Err(Error::DomainViolation { .. })));
        assert!(matches!(kl.divergence(&v(&[1.0]), &v(&[0.0])), Err(Error::DomainViolation { .. })));
        assert!(kl.divergence(&v(&[0.0]), &v(&[2.0])).is_ok());
        let b3 = BregmanGenerator::beta(3.0).unwrap();
        assert!(b3.grad_phi(&v(&[-1.0])).is_err());
        let b4 = BregmanGenerator::beta(4.0).unwrap();
        assert!(b4.grad_phi(&v(&[-1.0])).is_ok());
        assert!(BregmanGenerator::beta(1.0).is_err());
        assert!(BregmanGenerator::beta(0.0).is_err());
        assert!(BregmanGenerator::itakura_saito().conj_grad(&v(&[1.0])).is_err());
    }

    #[test]
    fn gradient_examples() {
        let sq = BregmanGenerator::squared_euclidean();
        let x = v(&[1.5, -2.0]);
        assert_eq!(sq.grad_phi(&x).unwrap(), x);
        assert_eq!(sq.conj_grad(&x).unwrap(), x);
        assert_eq!(sq.hess_phi_apply(&x, &v(&[3.0, 4.0])).unwrap(), v(&[3.0, 4.0]));

        let kl = BregmanGenerator::negative_entropy();
        let back = kl.conj_grad(&kl.grad_phi(&v(&[2.0, 3.0])).unwrap()).unwrap();
        assert!((back - v(&[2.0, 3.0])).amax() < 1e-14);

        let b4 = BregmanGenerator::beta(4.0).unwrap();
        assert_relative_eq!(b4.grad_phi(&v(&[2.0])).unwrap()[0], 8.0 / 3.0, epsilon = 1e-15);
        let z = v(&[0.7]);
        assert_relative_eq!(
            b4.conj_grad(&z).unwrap()[0],
            3f64.powf(1.0 / 3.0) * 0.7f64.powf(1.0 / 3.0),
            epsilon = 1e-14
        );
        let back = b4.conj_grad(&b4.grad_phi(&v(&[2.0])).unwrap()).unwrap();
        assert_relative_eq!(back[0], 2.0, epsilon = 1e-14);
        let back = b4.conj_grad(&b4.grad_phi(&v(&[-2.0])).unwrap()).unwrap();
        assert_relative_eq!(back[0], -2.0, epsilon = 1e-14);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for gen in all_generators() {
            for _ in 0..30 {
                let x = random_positive(&mut rng, 2);
                let g = gen.grad_phi(&x).unwrap();
                for i in 0..2 {
                    let h = 1e-6 * (1.0 + x[i].abs());
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    let fd = (gen.value(&xp).unwrap() - gen.value(&xm).unwrap()) / (2.0 * h);
                    assert!((fd - g[i]).abs() <= 1e-5 * (1.0 + g[i].abs()), "{}: {fd} vs {}", gen.name(), g[i]);
                }
            }
        }
    }

    #[test]
    fn conjugate_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for gen in all_generators() {
            for _ in 0..50 {
                let x = random_positive(&mut rng, 2);
                let back = gen.conj_grad(&gen.grad_phi(&x).unwrap()).unwrap();
                assert!((&back - &x).amax() <= 1e-8 * x.amax(), "{}", gen.name());
            }
        }
    }

    #[test]
    fn divergence_positive_off_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for gen in all_generators() {
            for _ in 0..50 {
                let a = random_positive(&mut rng, 2);
                let b = random_positive(&mut rng, 2);
                assert_eq!(gen.divergence(&a, &a).unwrap(), 0.0, "{}", gen.name());
                assert!(gen.divergence(&a, &b).unwrap() > 0.0, "{}", gen.name());
            }
        }
    }

    #[test]
    fn kl_hyperplane_examples() {
        let kl = BregmanGenerator::negative_entropy();
        let a = v(&[1.0, 1.0]);
        let p = bregman_project_hyperplane(&kl, &v(&[1.0, 1.0]), &a, 2.0).unwrap();
        assert_eq!(p.gamma, 0.0);
        assert_eq!(p.point, v(&[1.0, 1.0]));

        let p = bregman_project_hyperplane(&kl, &v(&[2.0, 2.0]), &a, 2.0).unwrap();
        assert!((p.gamma - 2f64.ln()).abs() <= 1e-8);
        assert!((&p.point - v(&[1.0, 1.0])).amax() <= 1e-8);
        // multiplicative form x e^{-γa}
        assert!((&p.point - v(&[2.0, 2.0]) * (-p.gamma).exp()).amax() <= 1e-12);
    }

    #[test]
    fn halfspace_examples() {
        let kl = BregmanGenerator::negative_entropy();
        let a = v(&[1.0, 1.0]);
        let p = bregman_project_halfspace(&kl, &v(&[1.0, 1.0]), &a, 3.0).unwrap();
        assert_eq!((p.gamma, p.point), (0.0, v(&[1.0, 1.0])));
        let p = bregman_project_halfspace(&kl, &v(&[2.0, 2.0]), &a, 2.0).unwrap();
        assert!(p.gamma > 0.0);
        assert!((p.gamma - 2f64.ln()).abs() <= 1e-8);

        let b2 = BregmanGenerator::beta(2.0).unwrap();
        let x = v(&[2.0, 0.0]);
        let p = bregman_project_halfspace(&b2, &x, &v(&[1.0, 0.0]), 1.0).unwrap();
        let oracle = project_halfspace(&x, &v(&[1.0, 0.0]), 1.0).unwrap();
        assert!((p.point - oracle).amax() <= 1e-12);

        let sq = BregmanGenerator::squared_euclidean();
        let p = bregman_project_hyperplane(&sq, &x, &v(&[1.0, 0.0]), 1.0).unwrap();
        assert!((p.point - v(&[1.0, 0.0])).amax() <= 1e-14);
    }

    #[test]
    fn unbounded_multiplier_is_reported() {
        let kl = BregmanGenerator::negative_entropy();
        let r = bregman_project_hyperplane(&kl, &v(&[1.0, 1.0]), &v(&[1.0, 1.0]), -1.0);
        assert!(matches!(r, Err(Error::NoFiniteMinimizer)), "{r:?}");
        assert!(matches!(
            bregman_project_hyperplane(&kl, &v(&[1.0, 1.0]), &v(&[0.0, 0.0]), 1.0),
            Err(Error::ZeroNormal)
        ));
    }

    #[test]
    fn projection_beats_random_feasible_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let gens = [
            BregmanGenerator::negative_entropy(),
            BregmanGenerator::beta(4.0).unwrap(),
            BregmanGenerator::itakura_saito(),
            BregmanGenerator::quadratic(Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap(),
        ];
        for gen in &gens {
            for _ in 0..5 {
                let x = random_positive(&mut rng, 2);
                let a = random_positive(&mut rng, 2);
                let c = a.dot(&x) * rng.random_range(0.3..0.9);
                let p = bregman_project_hyperplane(gen, &x, &a, c).unwrap();
                assert!((a.dot(&p.point) - c).abs() <= 1e-8 * (1.0 + c.abs()));
                let best = gen.divergence(&p.point, &x).unwrap();
                for _ in 0..1000 {
                    // feasible z on the segment of the hyperplane inside the orthant
                    let t = rng.random_range(0.001..0.999);
                    let z = v(&[t * c / a[0], (1.0 - t) * c / a[1]]);
                    assert!(best <= gen.divergence(&z, &x).unwrap() + 1e-8, "{}", gen.name());
                }
            }
        }
    }

    #[test]
    fn kl_projection_stays_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let kl = BregmanGenerator::negative_entropy();
        for _ in 0..100 {
            let x = random_positive(&mut rng, 3);
            let a = Vector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            let c = rng.random_range(-0.5..0.5);
            if let Ok(p) = bregman_project_halfspace(&kl, &x, &a, c) {
                assert!(p.point.iter().all(|v| *v > 0.0));
                assert!(a.dot(&p.point) <= c + 1e-8 * (1.0 + c.abs()));
            }
        }
    }

    #[test]
    fn separable_set_projections() {
        let kl = BregmanGenerator::negative_entropy();
        let boxed = ConstraintSet::boxed(v(&[0.5, 0.5]), v(&[1.0, 1.0])).unwrap();
        assert_eq!(kl.project(&boxed, &v(&[0.2, 3.0])).unwrap(), v(&[0.5, 1.0]));

        let sparse = ConstraintSet::sparsity(3, 1).unwrap();
        let x = v(&[0.5, 3.0, 1.0]);
        let p = kl.project(&sparse, &x).unwrap();
        // zeroing cost under KL is the coordinate itself, so the largest stays
        assert_eq!(p, v(&[0.0, 3.0, 0.0]));

        let ball = ConstraintSet::ball(v(&[0.0, 0.0]), 1.0).unwrap();
        assert!(matches!(kl.project(&ball, &v(&[1.0, 1.0])), Err(Error::Unsupported(_))));
        let sq = BregmanGenerator::squared_euclidean();
        assert!(sq.project(&ball, &v(&[3.0, 4.0])).is_ok());
    }

    #[test]
    fn bregman_sparsity_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let gens = [BregmanGenerator::negative_entropy(), BregmanGenerator::beta(4.0).unwrap()];
        for gen in &gens {
            for _ in 0..50 {
                let n = 5;
                let k = rng.random_range(1..n);
                let x = random_positive(&mut rng, n);
                let p = gen.project(&ConstraintSet::sparsity(n, k).unwrap(), &x).unwrap();
                let cost = gen.divergence(&p, &x).unwrap();
                let mut best = f64::INFINITY;
                for mask in 0u32..(1 << n) {
                    if mask.count_ones() as usize != k {
                        continue;
                    }
                    let z = Vector::from_fn(n, |i, _| if mask & (1 << i) != 0 { x[i] } else { 0.0 });
                    best = best.min(gen.divergence(&z, &x).unwrap());
                }
                assert!((cost - best).abs() <= 1e-10);
            }
        }
    }
}
