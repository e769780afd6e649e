//! A small convex QP solved through its KKT complementarity problem:
//! minimize `½‖x‖² − x₁ − 2x₂` subject to `x₁ + x₂ ≤ 1`, `x ≥ 0`.

use sfp_core::apps::{qp_to_lcp, solve_lcp};
use sfp_core::linalg::{Matrix, Vector};
use sfp_core::solver::SolverConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let b_mat = Matrix::identity(2, 2);
    // Ax ≥ b form: −x₁ − x₂ ≥ −1
    let a = Matrix::from_row_slice(1, 2, &[-1.0, -1.0]);
    let b = Vector::from_row_slice(&[-1.0]);
    let c = Vector::from_row_slice(&[-1.0, -2.0]);
    let lcp = qp_to_lcp(&b_mat, &a, &b, &c)?;

    let config = SolverConfig {
        rel_tol: 0.0,
        grad_tol: 1e-12,
        ..SolverConfig::default()
    };
    let sol = solve_lcp(&lcp, &Vector::zeros(lcp.dim()), &config)?;
    let z = &sol.trace.solution;
    let qp = lcp.qp.as_ref().expect("built from a QP");
    let x = z.rows(0, 2).into_owned();
    println!("{:?} after {} iterations", sol.trace.status, sol.trace.iterations);
    println!("x = ({:.6}, {:.6}), multiplier {:.6}", x[0], x[1], z[2]);
    println!("objective {:.6} (optimum is x = (0, 1), value -1.5)", qp.objective(&x));
    println!(
        "residuals: min z {:.1e}, min w {:.1e}, gap {:.1e}",
        sol.report.min_z, sol.report.min_w, sol.report.gap
    );
    Ok(())
}
