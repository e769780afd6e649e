//! Split feasibility problems and their proximity functions.
//!
//! The Euclidean proximity function is
//! `f(x) = ½ Σ vᵢ dist(x, Cᵢ)² + ½ Σ wⱼ dist(h(x), Qⱼ)²`; the Bregman form
//! replaces each squared distance by the divergence from the Bregman
//! projection, `Σ vᵢ D_φ(P_Cᵢ(x), x) + Σ wⱼ D_ζ(P_Qⱼ(h(x)), h(x))`.

use crate::divergences::BregmanGenerator;
use crate::error::{Error, Result};
use crate::linalg::{factor_spd, Matrix, SpdFactorization, Vector, WoodburySolver};
use crate::mappings::SmoothMap;
use crate::sets::{ConstraintSet, SetKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProximityForm {
    Euclidean,
    Bregman,
}

#[derive(Debug, Clone)]
pub struct WeightedSet {
    pub set: ConstraintSet,
    pub weight: f64,
}

/// Result of evaluating the proximity function at a point.
#[derive(Debug, Clone)]
pub struct ProximityEvaluation {
    pub value: f64,
    pub gradient: Vector,
    /// `P_Cᵢ(x)` for every domain set, in order.
    pub domain_projections: Vec<Vector>,
    /// `P_Qⱼ(h(x))` for every range set, in order.
    pub range_projections: Vec<Vector>,
    /// `h(x)` and `dh(x)`; absent when there are no range sets.
    pub map_value: Option<Vector>,
    pub jacobian: Option<Matrix>,
}

/// The MM curvature matrix `H(x)` in a form that can solve against a gradient.
#[derive(Debug, Clone)]
pub enum ApproxHessian {
    /// Positive diagonal, used when no range term contributes curvature.
    Diagonal(Vector),
    Woodbury(WoodburySolver),
    Dense(SpdFactorization),
}

impl ApproxHessian {
    /// Returns `H⁻¹ g`.
    pub fn solve(&self, g: &Vector) -> Vector {
        match self {
            ApproxHessian::Diagonal(d) => g.component_div(d),
            ApproxHessian::Woodbury(w) => w.apply(g),
            ApproxHessian::Dense(f) => f.solve(g),
        }
    }

    pub fn to_dense(&self) -> Matrix {
        match self {
            ApproxHessian::Diagonal(d) => Matrix::from_diagonal(d),
            ApproxHessian::Woodbury(w) => w.to_dense(),
            ApproxHessian::Dense(f) => f.reconstruct(),
        }
    }

    pub fn path_name(&self) -> &'static str {
        match self {
            ApproxHessian::Diagonal(_) => "diagonal",
            ApproxHessian::Woodbury(_) => "woodbury",
            ApproxHessian::Dense(_) => "dense",
        }
    }
}

/// Builds `H` from a domain curvature and the range Jacobian scaled as
/// `K = diag(√(w·rangeᵢ)) J`, so that `H = domain + KᵀK`.
pub(crate) fn assemble_hessian(
    domain_diag: Option<&Vector>,
    domain_dense: Option<&Matrix>,
    k: Option<Matrix>,
) -> Result<ApproxHessian> {
    let n = domain_diag
        .map(|d| d.len())
        .or(domain_dense.map(|m| m.nrows()))
        .expect("domain curvature required");
    let positive = domain_diag.is_some_and(|d| d.iter().all(|v| *v > 0.0 && v.is_finite()));
    match (&k, domain_diag) {
        (None, Some(d)) if positive => return Ok(ApproxHessian::Diagonal(d.clone())),
        (Some(k), Some(d)) if positive && k.nrows() < n => {
            return Ok(ApproxHessian::Woodbury(WoodburySolver::new(d, k.clone())?))
        }
        _ => {}
    }
    let mut h = match (domain_diag, domain_dense) {
        (_, Some(m)) => m.clone(),
        (Some(d), None) => Matrix::from_diagonal(d),
        (None, None) => unreachable!(),
    };
    if let Some(k) = &k {
        h += k.tr_mul(k);
    }
    Ok(ApproxHessian::Dense(factor_spd(&h)?))
}

/// Scales row `j` of `jac` by `√(w·scale_j)`.
pub(crate) fn scaled_rows(jac: &Matrix, w: f64, scale: Option<&Vector>) -> Matrix {
    let mut k = jac.clone();
    for (j, mut row) in k.row_iter_mut().enumerate() {
        let s = scale.map_or(1.0, |d| d[j]);
        row *= (w * s).sqrt();
    }
    k
}

/// A split feasibility problem: find `x ∈ ∩Cᵢ` with `h(x) ∈ ∩Qⱼ`.
#[derive(Debug, Clone)]
pub struct SplitProblem {
    domain: Vec<WeightedSet>,
    range: Vec<WeightedSet>,
    map: SmoothMap,
    phi: BregmanGenerator,
    zeta: BregmanGenerator,
    form: ProximityForm,
    hinge: bool,
    v: f64,
    w: f64,
}

#[derive(Debug, Clone)]
pub struct SplitProblemBuilder {
    domain: Vec<WeightedSet>,
    range: Vec<WeightedSet>,
    map: SmoothMap,
    generators: Option<(BregmanGenerator, BregmanGenerator)>,
    hinge: bool,
}

impl SplitProblemBuilder {
    pub fn domain(mut self, set: ConstraintSet, weight: f64) -> Self {
        self.domain.push(WeightedSet { set, weight });
        self
    }

    pub fn range(mut self, set: ConstraintSet, weight: f64) -> Self {
        self.range.push(WeightedSet { set, weight });
        self
    }

    /// Switches to the Bregman form with generator `phi` on the domain and
    /// `zeta` on the range.
    pub fn bregman(mut self, phi: BregmanGenerator, zeta: BregmanGenerator) -> Self {
        self.generators = Some((phi, zeta));
        self
    }

    /// Evaluates one-sided coordinate range constraints as hinge residuals
    /// `[±hⱼ(x) ∓ dⱼ]₊` instead of through generic projections.
    pub fn hinge(mut self) -> Self {
        self.hinge = true;
        self
    }

    pub fn build(self) -> Result<SplitProblem> {
        let n = self.map.input_dim();
        let p = self.map.output_dim();
        if self.domain.is_empty() && self.range.is_empty() {
            return Err(Error::InvalidParameter("problem has no constraint sets".into()));
        }
        for ws in self.domain.iter().chain(&self.range) {
            if !(ws.weight > 0.0) || !ws.weight.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "set weights must be positive and finite, got {}",
                    ws.weight
                )));
            }
        }
        for ws in &self.domain {
            if ws.set.dim() != n {
                return Err(Error::dims("domain set", n, ws.set.dim()));
            }
        }
        for ws in &self.range {
            if ws.set.dim() != p {
                return Err(Error::dims("range set", p, ws.set.dim()));
            }
        }
        let (form, phi, zeta) = match self.generators {
            Some((phi, zeta)) => (ProximityForm::Bregman, phi, zeta),
            None => (
                ProximityForm::Euclidean,
                BregmanGenerator::squared_euclidean(),
                BregmanGenerator::squared_euclidean(),
            ),
        };
        if self.hinge {
            if form != ProximityForm::Euclidean {
                return Err(Error::InvalidParameter("hinge mode requires the Euclidean form".into()));
            }
            if let Some(ws) = self.range.iter().find(|ws| hinge_coordinate(&ws.set).is_none()) {
                return Err(Error::InvalidParameter(format!(
                    "hinge mode needs one-sided coordinate half-spaces, found {:?}",
                    ws.set.kind()
                )));
            }
        }

        let total: f64 = self.domain.iter().chain(&self.range).map(|ws| ws.weight).sum();
        let mut domain = self.domain;
        let mut range = self.range;
        if (total - 1.0).abs() > 1e-12 {
            log::warn!("set weights sum to {total}; normalizing to 1");
            for ws in domain.iter_mut().chain(range.iter_mut()) {
                ws.weight /= total;
            }
        }
        let v = domain.iter().map(|ws| ws.weight).sum();
        let w = range.iter().map(|ws| ws.weight).sum();
        Ok(SplitProblem {
            domain,
            range,
            map: self.map,
            phi,
            zeta,
            form,
            hinge: self.hinge,
            v,
            w,
        })
    }
}

/// `(j, s, c)` when `set = {y : s·yⱼ ≤ c}` with `s = ±1`.
fn hinge_coordinate(set: &ConstraintSet) -> Option<(usize, f64, f64)> {
    let SetKind::HalfSpace { normal, offset } = set.kind() else {
        return None;
    };
    let nonzero: Vec<usize> = (0..normal.len()).filter(|&i| normal[i] != 0.0).collect();
    match nonzero.as_slice() {
        [j] if normal[*j].abs() == 1.0 => Some((*j, normal[*j], *offset)),
        _ => None,
    }
}

/// The half-space `{y ∈ ℝᵖ : yⱼ ≤ d}` for an upper dose bound, or
/// `{y : yⱼ ≥ d}` written as `−yⱼ ≤ −d` for a lower bound.
pub fn coordinate_bound(p: usize, j: usize, bound: f64, lower: bool) -> Result<ConstraintSet> {
    let mut a = Vector::zeros(p);
    let s = if lower { -1.0 } else { 1.0 };
    a[j] = s;
    ConstraintSet::halfspace(a, s * bound)
}

impl SplitProblem {
    pub fn builder(map: SmoothMap) -> SplitProblemBuilder {
        SplitProblemBuilder {
            domain: Vec::new(),
            range: Vec::new(),
            map,
            generators: None,
            hinge: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.map.input_dim()
    }

    pub fn map(&self) -> &SmoothMap {
        &self.map
    }

    pub fn domain_sets(&self) -> &[WeightedSet] {
        &self.domain
    }

    pub fn range_sets(&self) -> &[WeightedSet] {
        &self.range
    }

    pub fn form(&self) -> ProximityForm {
        self.form
    }

    pub fn is_hinge(&self) -> bool {
        self.hinge
    }

    pub fn domain_generator(&self) -> &BregmanGenerator {
        &self.phi
    }

    pub fn range_generator(&self) -> &BregmanGenerator {
        &self.zeta
    }

    /// Total domain weight `v = Σvᵢ`.
    pub fn v(&self) -> f64 {
        self.v
    }

    /// Total range weight `w = Σwⱼ`.
    pub fn w(&self) -> f64 {
        self.w
    }

    fn check_point(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::dims("proximity point", self.dim(), x.len()));
        }
        if self.form == ProximityForm::Bregman {
            self.phi.check_domain(x)?;
        } else if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain("squared-euclidean", format!("entry {i} is not finite")));
        }
        Ok(())
    }

    fn project_domain(&self, set: &ConstraintSet, x: &Vector) -> Result<Vector> {
        match self.form {
            ProximityForm::Euclidean => set.project(x),
            ProximityForm::Bregman => self.phi.project(set, x),
        }
    }

    fn project_range(&self, set: &ConstraintSet, y: &Vector) -> Result<Vector> {
        match self.form {
            ProximityForm::Euclidean if self.hinge => {
                let (j, s, c) = hinge_coordinate(set).expect("validated at construction");
                let mut out = y.clone();
                let excess = s * y[j] - c;
                if excess > 0.0 {
                    out[j] -= s * excess;
                }
                Ok(out)
            }
            ProximityForm::Euclidean => set.project(y),
            ProximityForm::Bregman => self.zeta.project(set, y),
        }
    }

    /// Loss of one term given the point and its projection.
    fn term(&self, generator: &BregmanGenerator, projection: &Vector, point: &Vector) -> Result<f64> {
        match self.form {
            ProximityForm::Euclidean => Ok(0.5 * (point - projection).norm_squared()),
            ProximityForm::Bregman => generator.divergence(projection, point),
        }
    }

    fn hinge_term(&self, set: &ConstraintSet, y: &Vector) -> f64 {
        let (j, s, c) = hinge_coordinate(set).expect("validated at construction");
        let r = (s * y[j] - c).max(0.0);
        0.5 * r * r
    }

    /// Proximity value only; skips gradient and Jacobian work.
    pub fn value(&self, x: &Vector) -> Result<f64> {
        self.check_point(x)?;
        let mut value = 0.0;
        for ws in &self.domain {
            let p = self.project_domain(&ws.set, x)?;
            value += ws.weight * self.term(&self.phi, &p, x)?;
        }
        if !self.range.is_empty() {
            let y = self.map.eval(x)?;
            if self.form == ProximityForm::Bregman {
                self.zeta.check_domain(&y)?;
            }
            for ws in &self.range {
                value += ws.weight
                    * if self.hinge {
                        self.hinge_term(&ws.set, &y)
                    } else {
                        let p = self.project_range(&ws.set, &y)?;
                        self.term(&self.zeta, &p, &y)?
                    };
            }
        }
        Ok(value)
    }

    /// Value, gradient and the cached projections at `x`.
    pub fn eval_f(&self, x: &Vector) -> Result<ProximityEvaluation> {
        self.check_point(x)?;
        let n = self.dim();
        let mut value = 0.0;
        let mut domain_pull = Vector::zeros(n);
        let mut domain_projections = Vec::with_capacity(self.domain.len());
        for ws in &self.domain {
            let p = self.project_domain(&ws.set, x)?;
            value += ws.weight * self.term(&self.phi, &p, x)?;
            domain_pull.axpy(ws.weight, &(x - &p), 1.0);
            domain_projections.push(p);
        }
        let mut gradient = match self.form {
            ProximityForm::Euclidean => domain_pull,
            ProximityForm::Bregman => self.phi.hess_phi_apply(x, &domain_pull)?,
        };

        let mut range_projections = Vec::with_capacity(self.range.len());
        let (mut map_value, mut jacobian) = (None, None);
        if !self.range.is_empty() {
            let (y, jac) = self.map.eval_jacobian(x)?;
            if self.form == ProximityForm::Bregman {
                self.zeta.check_domain(&y)?;
            }
            let mut range_pull = Vector::zeros(y.len());
            for ws in &self.range {
                let p = self.project_range(&ws.set, &y)?;
                value += ws.weight
                    * if self.hinge {
                        self.hinge_term(&ws.set, &y)
                    } else {
                        self.term(&self.zeta, &p, &y)?
                    };
                range_pull.axpy(ws.weight, &(&y - &p), 1.0);
                range_projections.push(p);
            }
            if self.form == ProximityForm::Bregman {
                range_pull = self.zeta.hess_phi_apply(&y, &range_pull)?;
            }
            gradient += jac.tr_mul(&range_pull);
            map_value = Some(y);
            jacobian = Some(jac);
        }
        Ok(ProximityEvaluation {
            value,
            gradient,
            domain_projections,
            range_projections,
            map_value,
            jacobian,
        })
    }

    /// The majorizing surrogate `g(x | x_k)` built from the projections
    /// cached in `anchor = eval_f(x_k)`.
    pub fn surrogate(&self, x: &Vector, anchor: &ProximityEvaluation) -> Result<f64> {
        self.check_point(x)?;
        let mut value = 0.0;
        for (ws, p) in self.domain.iter().zip(&anchor.domain_projections) {
            value += ws.weight * self.term(&self.phi, p, x)?;
        }
        if !self.range.is_empty() {
            let y = self.map.eval(x)?;
            for (ws, p) in self.range.iter().zip(&anchor.range_projections) {
                value += ws.weight * self.term(&self.zeta, p, &y)?;
            }
        }
        Ok(value)
    }

    /// `H(x) = v d²φ(x) + w dh(x)ᵀ d²ζ(h(x)) dh(x)`, which reduces to
    /// `v I + w dh(x)ᵀ dh(x)` in the Euclidean form.
    pub fn approx_hessian(&self, x: &Vector) -> Result<ApproxHessian> {
        self.check_point(x)?;
        let jac = if self.range.is_empty() {
            None
        } else {
            Some(self.map.eval_jacobian(x)?)
        };
        let (y, j) = match jac {
            Some((y, j)) => (Some(y), Some(j)),
            None => (None, None),
        };
        self.hessian_from(x, y.as_ref(), j.as_ref())
    }

    /// Same as [`approx_hessian`](Self::approx_hessian) but reuses the
    /// Jacobian cached in an evaluation.
    pub fn hessian_at(&self, x: &Vector, eval: &ProximityEvaluation) -> Result<ApproxHessian> {
        self.hessian_from(x, eval.map_value.as_ref(), eval.jacobian.as_ref())
    }

    fn hessian_from(&self, x: &Vector, y: Option<&Vector>, jac: Option<&Matrix>) -> Result<ApproxHessian> {
        let n = self.dim();
        let v = self.v;
        let w = self.w;
        let euclidean = self.form == ProximityForm::Euclidean;

        let (domain_diag, domain_dense) = if euclidean || self.phi.is_separable() {
            let d = if euclidean {
                Vector::from_element(n, v)
            } else {
                self.phi.hess_diag(x)? * v
            };
            (Some(d), None)
        } else {
            (None, Some(self.phi.hess_matrix(x)? * v))
        };

        let k = match (jac, y) {
            (Some(j), Some(y)) if w > 0.0 => {
                if euclidean {
                    Some(scaled_rows(j, w, None))
                } else if self.zeta.is_separable() {
                    Some(scaled_rows(j, w, Some(&self.zeta.hess_diag(y)?)))
                } else {
                    // non-separable range curvature: fold it into a dense H
                    let m = self.zeta.hess_matrix(y)?;
                    let mut h = match (&domain_diag, &domain_dense) {
                        (Some(d), _) => Matrix::from_diagonal(d),
                        (None, Some(m)) => m.clone(),
                        (None, None) => unreachable!(),
                    };
                    h += j.tr_mul(&(&m * j)) * w;
                    return Ok(ApproxHessian::Dense(factor_spd(&h)?));
                }
            }
            _ => None,
        };
        assemble_hessian(domain_diag.as_ref(), domain_dense.as_ref(), k)
    }

    /// True when every projection residual is within `tol`.
    pub fn is_feasible(&self, x: &Vector, tol: f64) -> Result<bool> {
        for ws in &self.domain {
            if !ws.set.contains(x, tol) {
                return Ok(false);
            }
        }
        if !self.range.is_empty() {
            let y = self.map.eval(x)?;
            for ws in &self.range {
                if !ws.set.contains(&y, tol) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}
