//! Run configuration: one TOML file with nested sections, overridden by
//! command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::apps::{ImrtMode, SignalDistribution};
use crate::divergences::BregmanGenerator;
use crate::error::{Error, Result};
use crate::io::{load_matrix, load_vector};
use crate::linalg::Vector;
use crate::mappings::{SmoothMap, DEFAULT_GAMMA, TOY_SCALE};
use crate::proximity::{SplitProblem, WeightedSet};
use crate::sets::ConstraintSet;
use crate::solver::{Acceleration, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    SparseRegression,
    Lcp,
    Qp,
    Imrt,
    DemoToy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub seed: u64,
    pub out: PathBuf,
    pub jobs: usize,
    pub solver: SolverSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemSection>,
    pub sparse: SparseSection,
    pub lcp: LcpSection,
    pub qp: QpSection,
    pub imrt: ImrtSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            seed: 0,
            out: PathBuf::from("sfp-out"),
            jobs: 1,
            solver: SolverSection::default(),
            problem: None,
            sparse: SparseSection::default(),
            lcp: LcpSection::default(),
            qp: QpSection::default(),
            imrt: ImrtSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    /// Relative decrease tolerance.
    pub tol: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
    pub accel: Acceleration,
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Record wall-clock times in traces; off keeps traces reproducible.
    pub timing: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            tol: d.rel_tol,
            grad_tol: d.grad_tol,
            max_iter: d.max_iterations,
            accel: d.acceleration,
            armijo: d.armijo,
            backtrack: d.backtrack,
            max_backtracks: d.max_backtracks,
            timing: false,
        }
    }
}

impl SolverSection {
    pub fn to_config(&self) -> SolverConfig {
        SolverConfig {
            armijo: self.armijo,
            backtrack: self.backtrack,
            max_iterations: self.max_iter,
            rel_tol: self.tol,
            grad_tol: self.grad_tol,
            acceleration: self.accel,
            max_backtracks: self.max_backtracks,
            timing: self.timing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SparseSection {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub sigma: f64,
    /// Defaults to `N(0, 5)` entries without noise and `±5` with noise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signal: Option<SignalDistribution>,
    /// Number of consecutive seeds, starting at the run seed.
    pub runs: usize,
}

impl Default for SparseSection {
    fn default() -> Self {
        Self {
            m: 100,
            n: 1000,
            k: 8,
            sigma: 0.0,
            signal: None,
            runs: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LcpSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<PathBuf>,
}

/// Files for `min cᵀx + ½xᵀBx` subject to `Ax ≥ b`, `x ≥ 0`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QpSection {
    /// `B`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadratic: Option<PathBuf>,
    /// `c`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linear: Option<PathBuf>,
    /// `A`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraints: Option<PathBuf>,
    /// `b`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhs: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    Voxel,
    Region,
    RegionBregman,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImrtSection {
    pub mode: ModeName,
    pub beta: f64,
    pub gamma: f64,
    /// Dose matrix file; without it a synthetic phantom is generated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dose: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regions: Option<PathBuf>,
    /// Per-region dose bounds for region files without a bound column.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<f64>>,
    pub voxels: usize,
    pub beamlets: usize,
    pub region_count: usize,
}

impl Default for ImrtSection {
    fn default() -> Self {
        Self {
            mode: ModeName::Region,
            beta: 4.0,
            gamma: DEFAULT_GAMMA,
            dose: None,
            regions: None,
            bounds: None,
            voxels: 2500,
            beamlets: 60,
            region_count: 4,
        }
    }
}

impl ImrtSection {
    pub fn mode(&self) -> ImrtMode {
        match self.mode {
            ModeName::Voxel => ImrtMode::Voxel,
            ModeName::Region => ImrtMode::Region,
            ModeName::RegionBregman => ImrtMode::RegionBregman { beta: self.beta },
        }
    }
}

/// A general split feasibility problem for the `solve` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub map: MapConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub domain: Vec<SetConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub range: Vec<SetConfig>,
    /// Domain and range generators; both absent selects the Euclidean form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<GeneratorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<GeneratorConfig>,
    #[serde(default)]
    pub hinge: bool,
    /// Use the cached exact update (affine maps, Euclidean form only).
    #[serde(default)]
    pub direct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MapConfig {
    Identity { dim: usize },
    Linear { matrix: PathBuf },
    Affine { matrix: PathBuf, offset: PathBuf },
    Toy { scale: Option<f64> },
    /// `x ↦ (x, Mx + q)`
    Complementarity { matrix: PathBuf, offset: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SetConfig {
    Box { lower: Vec<f64>, upper: Vec<f64>, weight: f64 },
    Ball { center: Vec<f64>, radius: f64, weight: f64 },
    Halfspace { normal: Vec<f64>, offset: f64, weight: f64 },
    Hyperplane { normal: Vec<f64>, offset: f64, weight: f64 },
    Singleton { point: Vec<f64>, weight: f64 },
    NonnegativeOrthant { dim: usize, weight: f64 },
    Sparsity { dim: usize, k: usize, weight: f64 },
    Complementarity { pairs: usize, weight: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorConfig {
    SquaredEuclidean,
    NegativeEntropy,
    ItakuraSaito,
    Beta { beta: f64 },
    Quadratic { matrix: PathBuf },
}

fn vector(values: &[f64]) -> Vector {
    Vector::from_row_slice(values)
}

impl SetConfig {
    pub fn build(&self) -> Result<WeightedSet> {
        let (set, weight) = match self {
            SetConfig::Box { lower, upper, weight } => {
                if lower.len() != upper.len() {
                    return Err(Error::dims("box bounds", lower.len(), upper.len()));
                }
                (ConstraintSet::boxed(vector(lower), vector(upper))?, *weight)
            }
            SetConfig::Ball { center, radius, weight } => (ConstraintSet::ball(vector(center), *radius)?, *weight),
            SetConfig::Halfspace { normal, offset, weight } => {
                (ConstraintSet::halfspace(vector(normal), *offset)?, *weight)
            }
            SetConfig::Hyperplane { normal, offset, weight } => {
                (ConstraintSet::hyperplane(vector(normal), *offset)?, *weight)
            }
            SetConfig::Singleton { point, weight } => (ConstraintSet::singleton(vector(point)), *weight),
            SetConfig::NonnegativeOrthant { dim, weight } => (ConstraintSet::nonnegative_orthant(*dim), *weight),
            SetConfig::Sparsity { dim, k, weight } => (ConstraintSet::sparsity(*dim, *k)?, *weight),
            SetConfig::Complementarity { pairs, weight } => (ConstraintSet::complementarity(*pairs), *weight),
        };
        Ok(WeightedSet { set, weight })
    }
}

impl GeneratorConfig {
    pub fn build(&self, base: &Path) -> Result<BregmanGenerator> {
        match self {
            GeneratorConfig::SquaredEuclidean => Ok(BregmanGenerator::squared_euclidean()),
            GeneratorConfig::NegativeEntropy => Ok(BregmanGenerator::negative_entropy()),
            GeneratorConfig::ItakuraSaito => Ok(BregmanGenerator::itakura_saito()),
            GeneratorConfig::Beta { beta } => BregmanGenerator::beta(*beta),
            GeneratorConfig::Quadratic { matrix } => BregmanGenerator::quadratic(load_matrix(&base.join(matrix))?),
        }
    }
}

impl MapConfig {
    pub fn build(&self, base: &Path) -> Result<SmoothMap> {
        match self {
            MapConfig::Identity { dim } => Ok(SmoothMap::Identity(*dim)),
            MapConfig::Linear { matrix } => Ok(SmoothMap::Linear(load_matrix(&base.join(matrix))?)),
            MapConfig::Affine { matrix, offset } => {
                SmoothMap::affine(load_matrix(&base.join(matrix))?, load_vector(&base.join(offset))?)
            }
            MapConfig::Toy { scale } => Ok(SmoothMap::ToyQuadratic {
                scale: scale.unwrap_or(TOY_SCALE),
            }),
            MapConfig::Complementarity { matrix, offset } => SmoothMap::complementarity_stack(SmoothMap::affine(
                load_matrix(&base.join(matrix))?,
                load_vector(&base.join(offset))?,
            )?),
        }
    }
}

impl ProblemSection {
    /// Builds the problem; relative file paths resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<SplitProblem> {
        let mut builder = SplitProblem::builder(self.map.build(base)?);
        for s in &self.domain {
            let ws = s.build()?;
            builder = builder.domain(ws.set, ws.weight);
        }
        for s in &self.range {
            let ws = s.build()?;
            builder = builder.range(ws.set, ws.weight);
        }
        match (&self.phi, &self.zeta) {
            (None, None) => {}
            (phi, zeta) => {
                let euclid = GeneratorConfig::SquaredEuclidean;
                builder = builder.bregman(
                    phi.as_ref().unwrap_or(&euclid).build(base)?,
                    zeta.as_ref().unwrap_or(&euclid).build(base)?,
                );
            }
        }
        if self.hinge {
            builder = builder.hinge();
        }
        builder.build()
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].lines().count().max(1));
            Error::Parse {
                path: path.to_path_buf(),
                line,
                message: e.message().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs are always representable in TOML")
    }

    /// Checks everything that can be checked before reading data files.
    pub fn validate(&self) -> Result<()> {
        self.solver.to_config().validate()?;
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        if self.sparse.runs == 0 {
            return Err(Error::Config("sparse.runs must be at least 1".into()));
        }
        if let Some(p) = &self.problem {
            for s in p.domain.iter().chain(&p.range) {
                let w = match s {
                    SetConfig::Box { weight, .. }
                    | SetConfig::Ball { weight, .. }
                    | SetConfig::Halfspace { weight, .. }
                    | SetConfig::Hyperplane { weight, .. }
                    | SetConfig::Singleton { weight, .. }
                    | SetConfig::NonnegativeOrthant { weight, .. }
                    | SetConfig::Sparsity { weight, .. }
                    | SetConfig::Complementarity { weight, .. } => *weight,
                };
                if !(w > 0.0) || !w.is_finite() {
                    return Err(Error::Config(format!("set weights must be positive, got {w}")));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 7
out = "runs/a"

[solver]
tol = 1e-8
accel = "secants=2"

[problem]
map = { kind = "toy" }
x0 = [0.5, 0.5]

[[problem.domain]]
kind = "ball"
center = [0.0, 0.0]
radius = 1.0
weight = 0.5

[[problem.range]]
kind = "box"
lower = [-inf, 1.0, -inf]
upper = [inf, 2.0, inf]
weight = 0.5
"#;

    #[test]
    fn parses_nested_sections() {
        let c = RunConfig::from_toml(SAMPLE, Path::new("c.toml")).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.solver.tol, 1e-8);
        assert_eq!(c.solver.accel, Acceleration::Secants(2));
        assert_eq!(c.solver.max_iter, SolverConfig::default().max_iterations);
        let p = c.problem.as_ref().unwrap();
        assert_eq!(p.map, MapConfig::Toy { scale: None });
        let problem = p.build(Path::new(".")).unwrap();
        assert_eq!(problem.dim(), 2);
        assert_eq!(problem.range_sets().len(), 1);
    }

    #[test]
    fn dump_round_trips() {
        let c = RunConfig::from_toml(SAMPLE, Path::new("c.toml")).unwrap();
        let again = RunConfig::from_toml(&c.to_toml(), Path::new("dump.toml")).unwrap();
        assert_eq!(again, c);
        let d = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&d.to_toml(), Path::new("d.toml")).unwrap(), d);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "seed = 1\n\n[solver]\nmax_iter = \"many\"\n";
        match RunConfig::from_toml(text, Path::new("bad.toml")) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 4, "{message}");
            }
            other => panic!("{other:?}"),
        }
        let unknown = "[solver]\ntolerance = 1.0\n";
        assert!(RunConfig::from_toml(unknown, Path::new("u.toml")).is_err());
        let accel = "[solver]\naccel = \"fast\"\n";
        assert!(RunConfig::from_toml(accel, Path::new("a.toml")).is_err());
    }

    #[test]
    fn rejects_nonpositive_weights() {
        let text = SAMPLE.replace("weight = 0.5\n\n[[problem.range]]", "weight = 0.0\n\n[[problem.range]]");
        let c = RunConfig::from_toml(&text, Path::new("c.toml")).unwrap();
        assert!(c.validate().is_err());
    }
}
