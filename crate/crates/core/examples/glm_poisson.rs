//! Sparse Poisson regression: minimize the deviance plus the squared
//! distance to `{‖x‖₀ ≤ k}`.

use sfp_core::apps::glm::poisson_sparse_design;
use sfp_core::apps::{build_glm_problem, GlmFamily, GlmSpec};
use sfp_core::linalg::Vector;
use sfp_core::proximity::WeightedSet;
use sfp_core::sets::{top_k_support, ConstraintSet};
use sfp_core::solver::{solve, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (m, n, k) = (40, 80, 4);
    let (design, response, truth) = poisson_sparse_design(m, n, k, 3);
    let glm = build_glm_problem(GlmSpec {
        family: GlmFamily::Poisson,
        design,
        response,
        constraints: vec![WeightedSet {
            set: ConstraintSet::sparsity(n, k)?,
            weight: 1.0,
        }],
    })?;
    let trace = solve(&glm, &Vector::zeros(n), &SolverConfig::default())?;

    let mut found = top_k_support(&trace.solution, k);
    found.sort_unstable();
    let actual: Vec<usize> = (0..n).filter(|&i| truth[i] != 0.0).collect();
    println!("{:?} after {} iterations, objective {:.3e}", trace.status, trace.iterations, trace.final_value());
    println!("true support      {actual:?}");
    println!("estimated support {found:?}");
    for &i in &actual {
        println!("  x[{i:>2}] = {:+.4}  (truth {:+})", trace.solution[i], truth[i]);
    }
    Ok(())
}
