//! Sparse regression as split feasibility: `‖x‖₀ ≤ k` in the domain and
//! `Ax = y` (or `‖Ax − y‖ ≤ σ√m`) in the range.
//!
//! Usage: `cargo run --release --example sparse_regression [seeds]`

use sfp_core::apps::sparse::monte_carlo;
use sfp_core::apps::SparseRegressionSpec;
use sfp_core::solver::SolverConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let runs: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(20);
    let seeds: Vec<u64> = (0..runs).collect();
    let config = SolverConfig::default();

    let exact = monte_carlo(&SparseRegressionSpec::noiseless(100, 1000, 8, 0), &seeds, &config)?;
    let recovered = exact.iter().filter(|o| o.support_recovered).count();
    println!("noiseless 100x1000, k = 8: support recovered in {recovered}/{runs} runs");
    for o in &exact {
        println!(
            "  seed {:>2}: recovered {:<5} max error {:.2e}  f = {:.2e} after {} iterations",
            o.seed, o.support_recovered, o.max_abs_error, o.final_f, o.iterations
        );
    }

    for sigma in [0.5, 1.0] {
        let noisy = monte_carlo(&SparseRegressionSpec::noisy(100, 1000, 8, sigma, 0), &seeds, &config)?;
        let mse = noisy.iter().map(|o| o.support_mse).sum::<f64>() / noisy.len() as f64;
        println!("sigma = {sigma}: mean squared error on the support {mse:.3}");
    }
    Ok(())
}
