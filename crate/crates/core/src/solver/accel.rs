//! Secant quasi-Newton extrapolation for a fixed-point map ψ.
//!
//! Each outer step supplies the triple `x, ψ(x), ψ(ψ(x))`, giving the pair
//! `u = ψ(x) − x`, `v = ψ(ψ(x)) − ψ(x)`. With the latest `q` pairs stacked as
//! columns of `U` and `V`, the candidate is
//! `ψ(x) − V (UᵀU − UᵀV)⁻¹ Uᵀ (x − ψ(x))`.

use std::collections::VecDeque;

use crate::linalg::{Matrix, Vector};

#[derive(Debug, Clone)]
pub struct SecantAccelerator {
    q: usize,
    pairs: VecDeque<(Vector, Vector)>,
}

impl SecantAccelerator {
    pub fn new(q: usize) -> Self {
        assert!(q >= 1, "at least one secant pair is required");
        Self {
            q,
            pairs: VecDeque::with_capacity(q),
        }
    }

    /// Records the newest pair and returns the extrapolated point, or `None`
    /// when the small secant system is singular.
    pub fn extrapolate(&mut self, x: &Vector, psi: &Vector, psi2: &Vector) -> Option<Vector> {
        if self.pairs.len() == self.q {
            self.pairs.pop_front();
        }
        self.pairs.push_back((psi - x, psi2 - psi));
        let k = self.pairs.len();
        let n = x.len();
        let mut u = Matrix::zeros(n, k);
        let mut v = Matrix::zeros(n, k);
        for (i, (ui, vi)) in self.pairs.iter().enumerate() {
            u.set_column(i, ui);
            v.set_column(i, vi);
        }
        let system = u.tr_mul(&u) - u.tr_mul(&v);
        let rhs = u.tr_mul(&(x - psi));
        let coef = system.lu().solve(&rhs)?;
        let candidate = psi - v * coef;
        candidate.iter().all(|c| c.is_finite()).then_some(candidate)
    }

    pub fn reset(&mut self) {
        self.pairs.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_contraction_is_solved_in_one_step() {
        let mut acc = SecantAccelerator::new(1);
        let x = Vector::from_vec(vec![2.0]);
        let c = acc.extrapolate(&x, &(&x * 0.5), &(&x * 0.25)).unwrap();
        assert!(c[0].abs() < 1e-15);
    }

    #[test]
    fn two_secants_solve_a_two_dimensional_linear_map() {
        // ψ(x) = Bx + b has fixed point (I − B)⁻¹ b
        let b_mat = Matrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.8]);
        let b = Vector::from_vec(vec![1.0, -1.0]);
        let psi = |x: &Vector| &b_mat * x + &b;
        let fixed = (Matrix::identity(2, 2) - &b_mat).lu().solve(&b).unwrap();
        let mut acc = SecantAccelerator::new(2);
        let mut x = Vector::from_vec(vec![3.0, 4.0]);
        for _ in 0..2 {
            let p = psi(&x);
            let pp = psi(&p);
            x = acc.extrapolate(&x, &p, &pp).unwrap_or(pp);
        }
        assert!((x - fixed).amax() < 1e-10);
    }

    #[test]
    fn degenerate_pairs_return_none() {
        let mut acc = SecantAccelerator::new(1);
        let x = Vector::from_vec(vec![1.0, 1.0]);
        assert!(acc.extrapolate(&x, &x, &x).is_none());
    }
}
