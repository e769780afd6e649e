//! Dense linear algebra kernels used by the MM updates.
//!
//! Every matrix in the crate is an [`nalgebra::DMatrix<f64>`], which stores
//! entries in column-major order. Other modules only go through the aliases
//! below and never depend on the layout.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Relative asymmetry tolerated before a matrix is rejected as non-symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Cholesky factor `H = L Lᵀ` of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct SpdFactorization {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactorization {
    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// Solves `H y = g`.
    pub fn solve(&self, g: &Vector) -> Vector {
        self.chol.solve(g)
    }

    pub fn solve_matrix(&self, b: &Matrix) -> Matrix {
        self.chol.solve(b)
    }

    /// Recomputes `L Lᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let l = self.chol.l();
        &l * l.transpose()
    }
}

/// Factors a symmetric positive-definite matrix.
///
/// The input is symmetrized as `(H + Hᵀ)/2` first; asymmetry above
/// [`SYMMETRY_TOL`] (relative to the largest entry) is an error.
pub fn factor_spd(h: &Matrix) -> Result<SpdFactorization> {
    if !h.is_square() {
        return Err(Error::dims("factor_spd (square)", h.nrows(), h.ncols()));
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    let scale = h.amax().max(f64::MIN_POSITIVE);
    let asymmetry = (h - h.transpose()).amax() / scale;
    if asymmetry > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { asymmetry });
    }
    let sym = (h + h.transpose()) * 0.5;
    Cholesky::new(sym)
        .map(|chol| SpdFactorization { chol })
        .ok_or(Error::NotPositiveDefinite)
}

/// Applies `(D + KᵀK)⁻¹` for a positive diagonal `D` (n entries) and a
/// `p × n` matrix `K` through the `p × p` capacitance system
/// `I_p + K D⁻¹ Kᵀ`.
#[derive(Debug, Clone)]
pub struct WoodburySolver {
    inv_diag: Vector,
    k: Matrix,
    inner: SpdFactorization,
}

impl WoodburySolver {
    pub fn new(diag: &Vector, k: Matrix) -> Result<Self> {
        if k.ncols() != diag.len() {
            return Err(Error::dims("woodbury (columns of K)", diag.len(), k.ncols()));
        }
        if diag.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::InvalidParameter(
                "Woodbury diagonal must be positive and finite".into(),
            ));
        }
        let inv_diag = diag.map(|d| 1.0 / d);
        // K D^{-1} Kᵀ, formed by scaling the columns of K first.
        let mut k_scaled = k.clone();
        for (mut col, s) in k_scaled.column_iter_mut().zip(inv_diag.iter()) {
            col *= *s;
        }
        let mut inner = &k_scaled * k.transpose();
        for i in 0..inner.nrows() {
            inner[(i, i)] += 1.0;
        }
        if inner.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular);
        }
        let inner = factor_spd(&inner).map_err(|_| Error::Singular)?;
        Ok(Self { inv_diag, k, inner })
    }

    /// Returns `(D + KᵀK)⁻¹ g`.
    pub fn apply(&self, g: &Vector) -> Vector {
        let dg = g.component_mul(&self.inv_diag);
        let t = self.inner.solve(&(&self.k * &dg));
        let correction = (self.k.tr_mul(&t)).component_mul(&self.inv_diag);
        dg - correction
    }

    pub fn dim(&self) -> usize {
        self.inv_diag.len()
    }

    /// Assembles `D + KᵀK` densely.
    pub fn to_dense(&self) -> Matrix {
        let mut h = self.k.tr_mul(&self.k);
        for (i, d) in self.inv_diag.iter().enumerate() {
            h[(i, i)] += 1.0 / d;
        }
        h
    }
}

/// Returns `(v I + w JᵀJ)⁻¹ g` using the Woodbury identity
/// `(1/v) I − (w/v²) Jᵀ (I_p + (w/v) J Jᵀ)⁻¹ J`.
pub fn woodbury_apply(v: f64, w: f64, j: &Matrix, g: &Vector) -> Result<Vector> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidParameter(format!("woodbury: v must be positive, got {v}")));
    }
    if !(w >= 0.0) || !w.is_finite() {
        return Err(Error::InvalidParameter(format!("woodbury: w must be nonnegative, got {w}")));
    }
    if j.ncols() != g.len() {
        return Err(Error::dims("woodbury_apply (columns of J)", g.len(), j.ncols()));
    }
    if w == 0.0 {
        return Ok(g / v);
    }
    let ratio = w / v;
    let mut inner = j * j.transpose() * ratio;
    for i in 0..inner.nrows() {
        inner[(i, i)] += 1.0;
    }
    if inner.iter().any(|x| !x.is_finite()) {
        return Err(Error::Singular);
    }
    let inner = factor_spd(&inner).map_err(|_| Error::Singular)?;
    let t = inner.solve(&(j * g));
    Ok(g / v - j.tr_mul(&t) * (w / (v * v)))
}

/// Assembles `v I + w JᵀJ` as a dense matrix.
pub fn gauss_newton_matrix(v: f64, w: f64, j: &Matrix) -> Matrix {
    let mut h = j.tr_mul(j) * w;
    for i in 0..h.nrows() {
        h[(i, i)] += v;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn identity_factor_solves_trivially() {
        let f = factor_spd(&Matrix::identity(2, 2)).unwrap();
        let g = Vector::from_vec(vec![3.0, -4.0]);
        assert_eq!(f.solve(&g), g);
    }

    #[test]
    fn two_by_two_solve_matches_hand_inverse() {
        let h = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let y = factor_spd(&h).unwrap().solve(&Vector::from_vec(vec![1.0, 1.0]));
        assert_relative_eq!(y[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(y[1], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let h = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(factor_spd(&h), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        let h = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 0.5, 2.0]);
        assert!(matches!(factor_spd(&h), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn tiny_asymmetry_is_symmetrized() {
        let h = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0 + 1e-14, 2.0]);
        assert!(factor_spd(&h).is_ok());
    }

    #[test]
    fn woodbury_examples() {
        let j = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let y = woodbury_apply(1.0, 0.0, &j, &Vector::from_vec(vec![3.0, 4.0])).unwrap();
        assert_eq!(y, Vector::from_vec(vec![3.0, 4.0]));

        let y = woodbury_apply(1.0, 1.0, &j, &Vector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_relative_eq!(y[0], 2.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(y[1], -1.0 / 3.0, epsilon = 1e-14);

        let j = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let y = woodbury_apply(2.0, 1.0, &j, &Vector::from_vec(vec![3.0, 2.0])).unwrap();
        assert_relative_eq!(y[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(y[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn woodbury_rejects_nonpositive_v() {
        let j = Matrix::zeros(1, 2);
        assert!(woodbury_apply(0.0, 1.0, &j, &Vector::zeros(2)).is_err());
    }

    #[test]
    fn woodbury_overflow_is_singular() {
        let j = Matrix::from_element(2, 3, 1e200);
        let r = woodbury_apply(1e-200, 1.0, &j, &Vector::from_element(3, 1.0));
        assert!(matches!(r, Err(Error::Singular)));
    }

    #[test]
    fn woodbury_matches_lu_on_random_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(1..=20);
            let p = rng.random_range(1..=5);
            let v = rng.random_range(0.1..10.0);
            let w = rng.random_range(0.0..10.0);
            let j = random_matrix(&mut rng, p, n);
            let g = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let direct = gauss_newton_matrix(v, w, &j).lu().solve(&g).unwrap();
            let wood = woodbury_apply(v, w, &j, &g).unwrap();
            assert!((&wood - &direct).norm() <= 1e-8 * direct.norm());
        }
    }

    #[test]
    fn diagonal_woodbury_matches_lu() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let n = rng.random_range(1..=15);
            let p = rng.random_range(1..=6);
            let d = Vector::from_fn(n, |_, _| rng.random_range(0.05..4.0));
            let k = random_matrix(&mut rng, p, n);
            let g = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let h = Matrix::from_diagonal(&d) + k.tr_mul(&k);
            let direct = h.lu().solve(&g).unwrap();
            let wood = WoodburySolver::new(&d, k).unwrap().apply(&g);
            assert!((&wood - &direct).norm() <= 1e-9 * direct.norm());
        }
    }

    #[test]
    fn random_spd_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.random_range(1..=12);
            let r = random_matrix(&mut rng, n, n);
            let a = r.tr_mul(&r) + Matrix::identity(n, n) * 0.1;
            let f = factor_spd(&a).unwrap();
            assert!((f.reconstruct() - &a).amax() <= 1e-10 * a.amax());
            let y = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let recovered = f.solve(&(&a * &y));
            assert!((&recovered - &y).norm() <= 1e-8 * y.norm());
        }
    }
}
