//! Fluence map optimization on a generated phantom in the three
//! formulations, compared through the voxel-level proximity value.

use std::time::Instant;

use sfp_core::apps::{build_imrt_problem, generate_phantom, reference_objective, ImrtMode};
use sfp_core::linalg::Vector;
use sfp_core::solver::{solve, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let phantom = generate_phantom(2500, 60, 4, 1)?;
    println!("{} voxels, {} beamlets, {} regions", phantom.voxels(), phantom.beamlets(), phantom.regions.len());
    let config = SolverConfig {
        grad_tol: 1e-10,
        max_iterations: 2000,
        ..SolverConfig::default()
    };
    for mode in [ImrtMode::Voxel, ImrtMode::Region, ImrtMode::RegionBregman { beta: 4.0 }] {
        let problem = build_imrt_problem(&phantom, mode)?;
        let clock = Instant::now();
        let trace = solve(&problem, &Vector::zeros(problem.dim()), &config)?;
        println!(
            "{:<28} {:?} in {:>5} iterations ({:.2}s), voxel objective {:.3e}, min weight {:.2e}",
            format!("{mode:?}"),
            trace.status,
            trace.iterations,
            clock.elapsed().as_secs_f64(),
            reference_objective(&phantom, &trace.solution)?,
            trace.solution.min(),
        );
    }
    Ok(())
}
