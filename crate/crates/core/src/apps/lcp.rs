//! Linear complementarity problems `x ≥ 0, Mx + q ≥ 0, xᵀ(Mx + q) = 0` posed
//! as split feasibility with `h(x) = (x, Mx + q)` and the complementarity set
//! as the only constraint, plus the KKT reduction of convex QPs.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector, SYMMETRY_TOL};
use crate::mappings::SmoothMap;
use crate::proximity::SplitProblem;
use crate::sets::ConstraintSet;
use crate::solver::{DirectLinearSolver, SolveTrace, SolverConfig};

/// The quadratic program `min cᵀx + ½xᵀBx` subject to `Ax ≥ b`, `x ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpData {
    pub b_mat: Matrix,
    pub a: Matrix,
    pub b: Vector,
    pub c: Vector,
}

impl QpData {
    pub fn objective(&self, x: &Vector) -> f64 {
        self.c.dot(x) + 0.5 * x.dot(&(&self.b_mat * x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LcpInstance {
    pub m: Matrix,
    pub q: Vector,
    pub qp: Option<QpData>,
}

impl LcpInstance {
    pub fn new(m: Matrix, q: Vector) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dims("LCP matrix columns", m.nrows(), m.ncols()));
        }
        if m.nrows() != q.len() {
            return Err(Error::dims("LCP offset", m.nrows(), q.len()));
        }
        Ok(Self { m, q, qp: None })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// Split feasibility form with a single unit-weight complementarity set.
    pub fn problem(&self) -> Result<SplitProblem> {
        let map = SmoothMap::complementarity_stack(SmoothMap::affine(self.m.clone(), self.q.clone())?)?;
        SplitProblem::builder(map)
            .range(ConstraintSet::complementarity(self.dim()), 1.0)
            .build()
    }

    pub fn report(&self, z: &Vector) -> ComplementarityReport {
        let w = &self.m * z + &self.q;
        ComplementarityReport {
            min_z: z.min().min(0.0),
            min_w: w.min().min(0.0),
            gap: z.dot(&w),
        }
    }
}

/// KKT reduction: `M = [[B, −Aᵀ], [A, 0]]`, `q = (c, −b)`.
pub fn qp_to_lcp(b_mat: &Matrix, a: &Matrix, b: &Vector, c: &Vector) -> Result<LcpInstance> {
    let n = c.len();
    if b_mat.shape() != (n, n) {
        return Err(Error::dims("QP quadratic term", n, b_mat.nrows()));
    }
    if a.ncols() != n {
        return Err(Error::dims("QP constraint columns", n, a.ncols()));
    }
    if a.nrows() != b.len() {
        return Err(Error::dims("QP constraint rows", a.nrows(), b.len()));
    }
    let asymmetry = (b_mat - b_mat.transpose()).amax();
    if asymmetry > SYMMETRY_TOL * (1.0 + b_mat.amax()) {
        return Err(Error::NotSymmetric { asymmetry });
    }
    let r = b.len();
    let p = n + r;
    let mut m = Matrix::zeros(p, p);
    m.view_mut((0, 0), (n, n)).copy_from(b_mat);
    m.view_mut((0, n), (n, r)).copy_from(&(-a.transpose()));
    m.view_mut((n, 0), (r, n)).copy_from(a);
    let q = Vector::from_iterator(p, c.iter().copied().chain(b.iter().map(|v| -v)));
    Ok(LcpInstance {
        m,
        q,
        qp: Some(QpData {
            b_mat: b_mat.clone(),
            a: a.clone(),
            b: b.clone(),
            c: c.clone(),
        }),
    })
}

/// Residuals of a candidate solution `z` with `w = Mz + q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplementarityReport {
    /// `min(z, 0)` over coordinates.
    pub min_z: f64,
    pub min_w: f64,
    /// `zᵀw`.
    pub gap: f64,
}

impl ComplementarityReport {
    pub fn is_certified(&self, feasibility_tol: f64, gap_tol: f64) -> bool {
        self.min_z >= -feasibility_tol && self.min_w >= -feasibility_tol && self.gap.abs() <= gap_tol
    }

    pub fn max_residual(&self) -> f64 {
        (-self.min_z).max(-self.min_w).max(self.gap.abs())
    }
}

#[derive(Debug, Clone)]
pub struct LcpSolution {
    pub trace: SolveTrace,
    pub report: ComplementarityReport,
}

/// Iterates `x⁺ = (I + MᵀM)⁻¹(a + Mᵀ(b − q))` with `(a, b)` the
/// complementarity projection of `(x, Mx + q)`.
pub fn solve_lcp(instance: &LcpInstance, x0: &Vector, config: &SolverConfig) -> Result<LcpSolution> {
    let problem = instance.problem()?;
    let mut solver = DirectLinearSolver::new(&problem)?;
    let trace = solver.solve(x0, config)?;
    let report = instance.report(&trace.solution);
    Ok(LcpSolution { trace, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{mm_step, Status};

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    fn worked() -> LcpInstance {
        let one = Matrix::from_element(1, 1, 1.0);
        qp_to_lcp(&one, &one, &v(&[-1.0]), &v(&[-1.0])).unwrap()
    }

    fn tight() -> SolverConfig {
        SolverConfig {
            rel_tol: 0.0,
            grad_tol: 1e-12,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn worked_reduction() {
        let lcp = worked();
        assert_eq!(lcp.m, Matrix::from_row_slice(2, 2, &[1.0, -1.0, 1.0, 0.0]));
        assert_eq!(lcp.q, v(&[-1.0, 1.0]));
    }

    #[test]
    fn zero_data_gives_zero_offset() {
        let lcp = qp_to_lcp(
            &Matrix::identity(2, 2),
            &Matrix::from_row_slice(1, 2, &[1.0, 1.0]),
            &v(&[0.0]),
            &v(&[0.0, 0.0]),
        )
        .unwrap();
        assert_eq!(lcp.q, Vector::zeros(3));
    }

    #[test]
    fn block_structure() {
        let lcp = qp_to_lcp(&Matrix::identity(2, 2), &Matrix::identity(2, 2), &v(&[1.0, 2.0]), &v(&[3.0, 4.0])).unwrap();
        assert_eq!(lcp.m.shape(), (4, 4));
        assert_eq!(lcp.m.view((2, 2), (2, 2)).amax(), 0.0);
        assert_eq!(lcp.m.view((0, 2), (2, 2)), -Matrix::identity(2, 2));
    }

    #[test]
    fn dimension_errors() {
        let one = Matrix::from_element(1, 1, 1.0);
        assert!(qp_to_lcp(&one, &one, &v(&[1.0, 2.0]), &v(&[0.0])).is_err());
        assert!(qp_to_lcp(&Matrix::identity(2, 2), &one, &v(&[1.0]), &v(&[0.0])).is_err());
        let skew = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(
            qp_to_lcp(&skew, &Matrix::zeros(0, 2), &Vector::zeros(0), &v(&[0.0, 0.0])),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn worked_instance_converges() {
        let sol = solve_lcp(&worked(), &v(&[0.0, 0.0]), &tight()).unwrap();
        assert!((sol.trace.solution - v(&[1.0, 0.0])).amax() < 1e-8);
        assert!(sol.report.max_residual() <= 1e-8);
    }

    #[test]
    fn nonnegative_offset_keeps_zero() {
        let lcp = LcpInstance::new(Matrix::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 3.0]), v(&[0.5, 0.0])).unwrap();
        let sol = solve_lcp(&lcp, &v(&[0.0, 0.0]), &SolverConfig::default()).unwrap();
        assert_eq!(sol.trace.solution, v(&[0.0, 0.0]));
        assert_eq!(sol.trace.status, Status::Converged);
    }

    #[test]
    fn infeasible_instance_reaches_best_approximation() {
        let lcp = LcpInstance::new(Matrix::zeros(1, 1), v(&[-1.0])).unwrap();
        let sol = solve_lcp(&lcp, &v(&[0.3]), &tight()).unwrap();
        let problem = lcp.problem().unwrap();
        // brute-force scan of ½dist((x, −1), D)²
        let best = (-2000..=2000)
            .map(|i| problem.value(&v(&[i as f64 * 1e-3])).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(sol.trace.final_value() > 0.0);
        assert!((sol.trace.final_value() - best).abs() < 1e-6);
    }

    #[test]
    fn direct_update_matches_generic_unit_step() {
        let lcp = worked();
        let problem = lcp.problem().unwrap();
        let direct = DirectLinearSolver::new(&problem).unwrap();
        let x = v(&[0.4, 0.7]);
        let a = direct.direct_linear_step(&x).unwrap();
        let b = mm_step(&problem, &x, &SolverConfig::default()).unwrap();
        assert_eq!(b.eta, 1.0);
        assert!((a - b.x).amax() < 1e-12);
    }
}
