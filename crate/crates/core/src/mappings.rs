//! Differentiable maps `h: ℝⁿ → ℝᵖ` with value and Jacobian access.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Default softmax sharpness for region-aggregated dose maps.
pub const DEFAULT_GAMMA: f64 = 10.0;

/// Scale on the third coordinate of the toy map. With scale 1 the image of
/// the unit disk never reaches the demo's range ball, so the demo uses 3.
pub const TOY_SCALE: f64 = 3.0;

/// Smooth upper bound on `max(y)`: `(1/γ) log Σ exp(γ yₗ)`.
///
/// Evaluated with the maximum factored out, so large entries do not overflow.
pub fn softmax_mu(y: &Vector, gamma: f64) -> f64 {
    let top = y.max();
    let sum: f64 = y.iter().map(|v| (gamma * (v - top)).exp()).sum();
    top + sum.ln() / gamma
}

/// Gradient of [`softmax_mu`]: the softmax weights `exp(γy) / Σ exp(γyₗ)`.
pub fn grad_mu(y: &Vector, gamma: f64) -> Vector {
    let top = y.max();
    let e = y.map(|v| (gamma * (v - top)).exp());
    let sum = e.sum();
    e / sum
}

/// Per-region softmax aggregation of a linear dose map.
///
/// Region `j` with block `Aⱼ` maps to `μ(Aⱼx)` (a smooth maximum) for
/// non-target regions and to `−μ(−Aⱼx)` (a smooth minimum) for targets.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxRegion {
    blocks: Vec<Matrix>,
    targets: Vec<bool>,
    gamma: f64,
    n: usize,
}

impl SoftmaxRegion {
    pub fn new(blocks: Vec<Matrix>, targets: Vec<bool>, gamma: f64) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidParameter("softmax map needs at least one region".into()));
        }
        if blocks.len() != targets.len() {
            return Err(Error::dims("softmax target flags", blocks.len(), targets.len()));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("softmax gamma must be positive, got {gamma}")));
        }
        let n = blocks[0].ncols();
        for b in &blocks {
            if b.ncols() != n {
                return Err(Error::dims("softmax region block columns", n, b.ncols()));
            }
            if b.nrows() == 0 {
                return Err(Error::InvalidParameter("softmax region block is empty".into()));
            }
        }
        Ok(Self {
            blocks,
            targets,
            gamma,
            n,
        })
    }

    pub fn blocks(&self) -> &[Matrix] {
        &self.blocks
    }

    pub fn targets(&self) -> &[bool] {
        &self.targets
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    fn signed_dose(&self, j: usize, x: &Vector) -> (f64, Vector) {
        let sign = if self.targets[j] { -1.0 } else { 1.0 };
        (sign, &self.blocks[j] * x * sign)
    }

    fn eval(&self, x: &Vector) -> Vector {
        Vector::from_fn(self.blocks.len(), |j, _| {
            let (sign, y) = self.signed_dose(j, x);
            sign * softmax_mu(&y, self.gamma)
        })
    }

    fn eval_jacobian(&self, x: &Vector) -> (Vector, Matrix) {
        let p = self.blocks.len();
        let mut value = Vector::zeros(p);
        let mut jac = Matrix::zeros(p, self.n);
        for j in 0..p {
            let (sign, y) = self.signed_dose(j, x);
            value[j] = sign * softmax_mu(&y, self.gamma);
            // both signs collapse to ∇μ(±Aⱼx)ᵀ Aⱼ by the chain rule
            let row = self.blocks[j].tr_mul(&grad_mu(&y, self.gamma));
            jac.row_mut(j).copy_from(&row.transpose());
        }
        (value, jac)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SmoothMap {
    Identity(usize),
    Linear(Matrix),
    /// `x ↦ Mx + q`
    Affine { matrix: Matrix, offset: Vector },
    SoftmaxRegion(SoftmaxRegion),
    /// `x ↦ (x, u(x))` for an inner map `u: ℝⁿ → ℝⁿ`.
    ComplementarityStack(Box<SmoothMap>),
    /// `(x₁, x₂) ↦ (x₁, x₂, s·(x₁² + x₂²))`
    ToyQuadratic { scale: f64 },
}

impl SmoothMap {
    /// The toy map used by the demo, with [`TOY_SCALE`].
    pub fn toy() -> Self {
        SmoothMap::ToyQuadratic { scale: TOY_SCALE }
    }

    pub fn affine(matrix: Matrix, offset: Vector) -> Result<Self> {
        if matrix.nrows() != offset.len() {
            return Err(Error::dims("affine offset", matrix.nrows(), offset.len()));
        }
        Ok(SmoothMap::Affine { matrix, offset })
    }

    pub fn complementarity_stack(inner: SmoothMap) -> Result<Self> {
        if inner.input_dim() != inner.output_dim() {
            return Err(Error::dims(
                "complementarity inner map (square)",
                inner.input_dim(),
                inner.output_dim(),
            ));
        }
        Ok(SmoothMap::ComplementarityStack(Box::new(inner)))
    }

    pub fn input_dim(&self) -> usize {
        match self {
            SmoothMap::Identity(n) => *n,
            SmoothMap::Linear(a) => a.ncols(),
            SmoothMap::Affine { matrix, .. } => matrix.ncols(),
            SmoothMap::SoftmaxRegion(s) => s.n,
            SmoothMap::ComplementarityStack(u) => u.input_dim(),
            SmoothMap::ToyQuadratic { .. } => 2,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            SmoothMap::Identity(n) => *n,
            SmoothMap::Linear(a) => a.nrows(),
            SmoothMap::Affine { matrix, .. } => matrix.nrows(),
            SmoothMap::SoftmaxRegion(s) => s.blocks.len(),
            SmoothMap::ComplementarityStack(u) => 2 * u.output_dim(),
            SmoothMap::ToyQuadratic { .. } => 3,
        }
    }

    fn check(&self, x: &Vector) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::dims("map input", self.input_dim(), x.len()));
        }
        Ok(())
    }

    pub fn eval(&self, x: &Vector) -> Result<Vector> {
        self.check(x)?;
        Ok(match self {
            SmoothMap::Identity(_) => x.clone(),
            SmoothMap::Linear(a) => a * x,
            SmoothMap::Affine { matrix, offset } => matrix * x + offset,
            SmoothMap::SoftmaxRegion(s) => s.eval(x),
            SmoothMap::ComplementarityStack(u) => stack(x, &u.eval(x)?),
            SmoothMap::ToyQuadratic { scale } => Vector::from_vec(vec![x[0], x[1], scale * x.norm_squared()]),
        })
    }

    /// The `p × n` Jacobian `dh(x)`; row `j` is `∇hⱼ(x)ᵀ`.
    pub fn jacobian(&self, x: &Vector) -> Result<Matrix> {
        Ok(self.eval_jacobian(x)?.1)
    }

    /// Value and Jacobian together, sharing intermediate products.
    pub fn eval_jacobian(&self, x: &Vector) -> Result<(Vector, Matrix)> {
        self.check(x)?;
        Ok(match self {
            SmoothMap::Identity(n) => (x.clone(), Matrix::identity(*n, *n)),
            SmoothMap::Linear(a) => (a * x, a.clone()),
            SmoothMap::Affine { matrix, offset } => (matrix * x + offset, matrix.clone()),
            SmoothMap::SoftmaxRegion(s) => s.eval_jacobian(x),
            SmoothMap::ComplementarityStack(u) => {
                let (value, inner) = u.eval_jacobian(x)?;
                let n = x.len();
                let mut jac = Matrix::zeros(2 * n, n);
                jac.view_mut((0, 0), (n, n)).fill_with_identity();
                jac.view_mut((n, 0), (n, n)).copy_from(&inner);
                (stack(x, &value), jac)
            }
            SmoothMap::ToyQuadratic { scale } => (
                Vector::from_vec(vec![x[0], x[1], scale * x.norm_squared()]),
                Matrix::from_row_slice(
                    3,
                    2,
                    &[1.0, 0.0, 0.0, 1.0, 2.0 * scale * x[0], 2.0 * scale * x[1]],
                ),
            ),
        })
    }

    /// `(A, b)` with `h(x) = Ax + b` when the map is affine.
    pub fn affine_parts(&self) -> Option<(Matrix, Vector)> {
        match self {
            SmoothMap::Identity(n) => Some((Matrix::identity(*n, *n), Vector::zeros(*n))),
            SmoothMap::Linear(a) => Some((a.clone(), Vector::zeros(a.nrows()))),
            SmoothMap::Affine { matrix, offset } => Some((matrix.clone(), offset.clone())),
            SmoothMap::ComplementarityStack(u) => {
                let (m, q) = u.affine_parts()?;
                let n = m.ncols();
                let mut a = Matrix::zeros(2 * n, n);
                a.view_mut((0, 0), (n, n)).fill_with_identity();
                a.view_mut((n, 0), (n, n)).copy_from(&m);
                Some((a, stack(&Vector::zeros(n), &q)))
            }
            SmoothMap::SoftmaxRegion(_) | SmoothMap::ToyQuadratic { .. } => None,
        }
    }
}

fn stack(a: &Vector, b: &Vector) -> Vector {
    Vector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    #[test]
    fn eval_examples() {
        let a = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(SmoothMap::Linear(a).eval(&v(&[1.0, 2.0])).unwrap(), v(&[1.0, 2.0, 3.0]));

        let s = SoftmaxRegion::new(vec![Matrix::identity(2, 2)], vec![false], 1.0).unwrap();
        let h = SmoothMap::SoftmaxRegion(s);
        assert_relative_eq!(h.eval(&v(&[0.0, 0.0])).unwrap()[0], 2f64.ln(), epsilon = 1e-15);
        let row = h.jacobian(&v(&[0.0, 0.0])).unwrap();
        assert_relative_eq!(row[(0, 0)], 0.5, epsilon = 1e-15);
        assert_relative_eq!(row[(0, 1)], 0.5, epsilon = 1e-15);

        let u = SmoothMap::affine(Matrix::from_element(1, 1, 1.0), v(&[1.0])).unwrap();
        let c = SmoothMap::complementarity_stack(u).unwrap();
        assert_eq!(c.eval(&v(&[2.0])).unwrap(), v(&[2.0, 3.0]));
    }

    #[test]
    fn softmax_examples() {
        assert_relative_eq!(softmax_mu(&v(&[0.0, 0.0]), 1.0), 2f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(softmax_mu(&v(&[1.0, 2.0]), 1.0), 2.31326, epsilon = 1e-5);
        assert!((softmax_mu(&v(&[1.0, 2.0]), 100.0) - 2.0).abs() <= 1e-4);

        let g = grad_mu(&v(&[0.0, 0.0]), 1.0);
        assert_eq!(g, v(&[0.5, 0.5]));
        let e = std::f64::consts::E;
        let g = grad_mu(&v(&[1.0, 2.0]), 1.0);
        assert_relative_eq!(g[0], 1.0 / (1.0 + e), epsilon = 1e-15);
        assert_relative_eq!(g[1], e / (1.0 + e), epsilon = 1e-15);
        let g = grad_mu(&v(&[5.0, 0.0, 0.0]), 10.0);
        assert!((g - v(&[1.0, 0.0, 0.0])).amax() <= 1e-8);
    }

    #[test]
    fn softmax_bounds_and_overflow() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let m = rng.random_range(1..10);
            let gamma = rng.random_range(0.1..50.0);
            let y = Vector::from_fn(m, |_, _| rng.random_range(-10.0..10.0));
            let mu = softmax_mu(&y, gamma);
            assert!(y.max() <= mu && mu <= y.max() + (m as f64).ln() / gamma + 1e-12);
            assert!(-softmax_mu(&(-&y), gamma) <= y.min());
            assert!((grad_mu(&y, gamma).sum() - 1.0).abs() <= 1e-12);
        }
        let big = Vector::from_fn(50, |i, _| 1e4 - i as f64);
        assert!(softmax_mu(&big, 10.0).is_finite());
        assert!(grad_mu(&big, 10.0).iter().all(|g| g.is_finite()));
    }

    #[test]
    fn stacked_affine_jacobian() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let c = SmoothMap::complementarity_stack(SmoothMap::affine(m.clone(), v(&[0.0, 1.0])).unwrap())
            .unwrap();
        let j = c.jacobian(&v(&[5.0, -1.0])).unwrap();
        assert_eq!(j.rows(0, 2), Matrix::identity(2, 2));
        assert_eq!(j.rows(2, 2), m);
        let (a, b) = c.affine_parts().unwrap();
        assert_eq!(a, j);
        assert_eq!(b, v(&[0.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn dimension_mismatch() {
        let h = SmoothMap::Identity(3);
        assert!(matches!(h.eval(&v(&[1.0])), Err(Error::DimensionMismatch { .. })));
        assert!(SmoothMap::affine(Matrix::zeros(2, 2), v(&[1.0])).is_err());
        assert!(SoftmaxRegion::new(vec![Matrix::zeros(1, 2)], vec![false], 0.0).is_err());
    }

    fn random_maps(rng: &mut ChaCha8Rng) -> Vec<SmoothMap> {
        let n = 4;
        let mut r = |rows: usize| Matrix::from_fn(rows, n, |_, _| rng.random_range(-1.0..1.0));
        let blocks = vec![r(3), r(5), r(2)];
        let offset = Vector::from_element(n, 0.3);
        vec![
            SmoothMap::Identity(n),
            SmoothMap::Linear(r(3)),
            SmoothMap::affine(r(n), offset.clone()).unwrap(),
            SmoothMap::SoftmaxRegion(SoftmaxRegion::new(blocks, vec![false, true, true], 3.0).unwrap()),
            SmoothMap::complementarity_stack(SmoothMap::affine(r(n), offset).unwrap()).unwrap(),
        ]
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let mut maps = random_maps(&mut rng);
            maps.push(SmoothMap::ToyQuadratic { scale: 1.0 });
            maps.push(SmoothMap::toy());
            for h in &maps {
                let n = h.input_dim();
                let x = Vector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
                let jac = h.jacobian(&x).unwrap();
                for i in 0..n {
                    let step = 1e-6;
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += step;
                    xm[i] -= step;
                    let fd = (h.eval(&xp).unwrap() - h.eval(&xm).unwrap()) / (2.0 * step);
                    let col = jac.column(i);
                    assert!((&fd - col).amax() <= 1e-5 * (1.0 + col.amax()), "{h:?}");
                }
            }
        }
    }
}
