//! Problem builders and experiment drivers for the four applications:
//! sparse regression, GLM regression, LCP/QP and IMRT fluence maps, plus the
//! two-dimensional toy demo.

pub mod glm;
pub mod imrt;
pub mod lcp;
pub mod sparse;
pub mod toy;

pub use glm::{build_glm_problem, GlmFamily, GlmProblem, GlmSpec};
pub use imrt::{build_imrt_problem, generate_phantom, reference_objective, ImrtInstance, ImrtMode};
pub use lcp::{qp_to_lcp, solve_lcp, ComplementarityReport, LcpInstance, LcpSolution, QpData};
pub use sparse::{build_sparse_regression, SignalDistribution, SparseOutcome, SparseRegressionSpec};
pub use toy::{toy_problem, TOY_STARTS};
