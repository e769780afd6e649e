//! Fluence map optimization for IMRT. Dose is `d = Ax` for beamlet weights
//! `x ≥ 0`; target regions need at least their prescribed dose and every
//! other region at most its tolerance.
//!
//! Three formulations are built from one instance: voxel-by-voxel bounds on
//! `Ax`, a region-by-region form bounding the softmax/softmin dose of each
//! region, and the same region form measured with a β-divergence.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::divergences::BregmanGenerator;
use crate::error::{Error, Result};
use crate::io::RegionEntry;
use crate::linalg::{Matrix, Vector};
use crate::mappings::{SmoothMap, SoftmaxRegion, DEFAULT_GAMMA};
use crate::proximity::{coordinate_bound, SplitProblem};
use crate::sets::ConstraintSet;

/// Dose prescribed to the phantom target.
pub const PHANTOM_PRESCRIPTION: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    /// Voxel (row) indices into the dose matrix.
    pub voxels: Vec<usize>,
    pub is_target: bool,
    /// Lower bound for targets, upper bound otherwise.
    pub dose_bound: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImrtInstance {
    pub dose: Matrix,
    pub regions: Vec<Region>,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImrtMode {
    Voxel,
    Region,
    RegionBregman { beta: f64 },
}

impl ImrtInstance {
    pub fn new(dose: Matrix, regions: Vec<Region>, gamma: f64) -> Result<Self> {
        let instance = Self { dose, regions, gamma };
        instance.validate()?;
        Ok(instance)
    }

    /// Groups region-file rows by region id (ascending). Rows without a dose
    /// bound take it from `bounds`, indexed in the same order.
    pub fn from_region_entries(
        dose: Matrix,
        entries: &[RegionEntry],
        bounds: Option<&[f64]>,
        gamma: f64,
    ) -> Result<Self> {
        let mut grouped: BTreeMap<usize, Region> = BTreeMap::new();
        for e in entries {
            let r = grouped.entry(e.region).or_insert_with(|| Region {
                voxels: Vec::new(),
                is_target: e.is_target,
                dose_bound: e.dose_bound.unwrap_or(f64::NAN),
                weight: 1.0,
            });
            if r.is_target != e.is_target {
                return Err(Error::PartitionError(format!(
                    "region {} mixes target and non-target voxels",
                    e.region
                )));
            }
            if let Some(d) = e.dose_bound {
                if r.dose_bound.is_nan() {
                    r.dose_bound = d;
                } else if r.dose_bound != d {
                    return Err(Error::PartitionError(format!(
                        "region {} has conflicting dose bounds {} and {d}",
                        e.region, r.dose_bound
                    )));
                }
            }
            r.voxels.push(e.voxel);
        }
        let mut regions: Vec<Region> = grouped.into_values().collect();
        if let Some(bounds) = bounds {
            if bounds.len() != regions.len() {
                return Err(Error::dims("dose bounds", regions.len(), bounds.len()));
            }
            for (r, &d) in regions.iter_mut().zip(bounds) {
                if r.dose_bound.is_nan() {
                    r.dose_bound = d;
                }
            }
        }
        if let Some(j) = regions.iter().position(|r| r.dose_bound.is_nan()) {
            return Err(Error::Config(format!("region {j} has no dose bound")));
        }
        Self::new(dose, regions, gamma)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.dose.nrows();
        let mut owner = vec![None; m];
        for (j, r) in self.regions.iter().enumerate() {
            if r.voxels.is_empty() {
                return Err(Error::PartitionError(format!("region {j} is empty")));
            }
            for &i in &r.voxels {
                match owner.get(i) {
                    None => {
                        return Err(Error::PartitionError(format!(
                            "region {j} lists voxel {i}, but the dose matrix has {m} rows"
                        )))
                    }
                    Some(Some(k)) => {
                        return Err(Error::PartitionError(format!("voxel {i} belongs to regions {k} and {j}")))
                    }
                    Some(None) => owner[i] = Some(j),
                }
            }
            if !(r.dose_bound > 0.0) || !r.dose_bound.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "region {j} dose bound must be positive, got {}",
                    r.dose_bound
                )));
            }
            if !(r.weight > 0.0) || !r.weight.is_finite() {
                return Err(Error::InvalidParameter(format!("region {j} weight must be positive")));
            }
        }
        if let Some(i) = owner.iter().position(Option::is_none) {
            return Err(Error::PartitionError(format!("voxel {i} is not assigned to any region")));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("softmax parameter must be positive, got {}", self.gamma)));
        }
        Ok(())
    }

    pub fn voxels(&self) -> usize {
        self.dose.nrows()
    }

    pub fn beamlets(&self) -> usize {
        self.dose.ncols()
    }

    /// Rows of the dose matrix belonging to region `j`.
    pub fn block(&self, j: usize) -> Matrix {
        let r = &self.regions[j];
        Matrix::from_fn(r.voxels.len(), self.beamlets(), |i, l| self.dose[(r.voxels[i], l)])
    }

    /// Region index of every voxel.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.voxels()];
        for (j, r) in self.regions.iter().enumerate() {
            for &i in &r.voxels {
                labels[i] = j;
            }
        }
        labels
    }
}

/// Builds the split feasibility problem for one formulation. The domain is
/// the nonnegative orthant in every mode; its weight equals the mean region
/// weight.
pub fn build_imrt_problem(instance: &ImrtInstance, mode: ImrtMode) -> Result<SplitProblem> {
    instance.validate()?;
    let n = instance.beamlets();
    let p = instance.regions.len();
    let domain_weight = instance.regions.iter().map(|r| r.weight).sum::<f64>() / p as f64;

    let builder = match mode {
        ImrtMode::Voxel => {
            let m = instance.voxels();
            let mut b = SplitProblem::builder(SmoothMap::Linear(instance.dose.clone()));
            for r in &instance.regions {
                let mut lower = Vector::from_element(m, f64::NEG_INFINITY);
                let mut upper = Vector::from_element(m, f64::INFINITY);
                for &i in &r.voxels {
                    if r.is_target {
                        lower[i] = r.dose_bound;
                    } else {
                        upper[i] = r.dose_bound;
                    }
                }
                b = b.range(ConstraintSet::boxed(lower, upper)?, r.weight);
            }
            b
        }
        ImrtMode::Region | ImrtMode::RegionBregman { .. } => {
            let blocks = (0..p).map(|j| instance.block(j)).collect();
            let targets = instance.regions.iter().map(|r| r.is_target).collect();
            let map = SoftmaxRegion::new(blocks, targets, instance.gamma)?;
            let mut b = SplitProblem::builder(SmoothMap::SoftmaxRegion(map));
            for (j, r) in instance.regions.iter().enumerate() {
                b = b.range(coordinate_bound(p, j, r.dose_bound, r.is_target)?, r.weight);
            }
            match mode {
                ImrtMode::RegionBregman { beta } => {
                    b.bregman(BregmanGenerator::squared_euclidean(), BregmanGenerator::beta(beta)?)
                }
                _ => b.hinge(),
            }
        }
    };
    builder.domain(ConstraintSet::nonnegative_orthant(n), domain_weight).build()
}

/// The voxel-by-voxel proximity value of `x`, used to compare solutions of
/// the different formulations.
pub fn reference_objective(instance: &ImrtInstance, x: &Vector) -> Result<f64> {
    build_imrt_problem(instance, ImrtMode::Voxel)?.value(x)
}

/// A square phantom on a `√m × √m` grid with `p` rectangular, contiguous
/// regions and `n` Gaussian beamlets fanned over five beam angles.
///
/// Region 0 is a central target, region 1 (when `p ≥ 3`) a critical organ
/// beside it and the remaining tissue is split into horizontal bands of
/// normal tissue. The dose matrix is scaled so that unit beam weights give
/// the target a mean dose of [`PHANTOM_PRESCRIPTION`].
pub fn generate_phantom(m: usize, n: usize, p: usize, seed: u64) -> Result<ImrtInstance> {
    let side = (m as f64).sqrt().round() as usize;
    if side * side != m || side < 4 {
        return Err(Error::InvalidParameter(format!("voxel count {m} must be a square of at least 16")));
    }
    if p < 2 {
        return Err(Error::InvalidParameter("a phantom needs a target and at least one other region".into()));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("a phantom needs at least one beamlet".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cell = 1.0 / side as f64;
    let center = |i: usize| ((i % side) as f64 + 0.5) * cell;
    let position = |i: usize| (center(i), ((i / side) as f64 + 0.5) * cell);

    // target rectangle around the middle, critical organ to its right
    let tx = 0.5 + rng.random_range(-0.05..0.05);
    let ty = 0.5 + rng.random_range(-0.05..0.05);
    let (thw, thh) = (0.14, 0.12);
    let in_target = |(x, y): (f64, f64)| (x - tx).abs() <= thw && (y - ty).abs() <= thh;
    let gap = 0.08;
    let in_critical =
        |(x, y): (f64, f64)| p >= 3 && x > tx + thw + gap && x <= tx + thw + gap + 0.12 && (y - ty).abs() <= thh;

    let mut target = Vec::new();
    let mut critical = Vec::new();
    let mut normal = Vec::new();
    for i in 0..m {
        let pos = position(i);
        if in_target(pos) {
            target.push(i);
        } else if in_critical(pos) {
            critical.push(i);
        } else {
            normal.push(i);
        }
    }
    if target.is_empty() || (p >= 3 && critical.is_empty()) {
        return Err(Error::InvalidParameter(format!("grid side {side} is too coarse for the phantom layout")));
    }
    let bands = if p >= 3 { p - 2 } else { p - 1 };
    if normal.len() < bands {
        return Err(Error::InvalidParameter(format!("too many regions ({p}) for {m} voxels")));
    }

    // beamlets: Gaussian lateral profile with exponential depth attenuation
    let angles = n.min(5);
    let width = 0.05;
    let attenuation = 1.2;
    let phase = rng.random_range(0.0..2.0 * PI / angles as f64);
    let mut dose = Matrix::zeros(m, n);
    for l in 0..n {
        let a = l % angles;
        let per_angle = n / angles + usize::from(a < n % angles);
        let slot = l / angles;
        let theta = phase + 2.0 * PI * a as f64 / angles as f64;
        let (dir, perp) = ((theta.cos(), theta.sin()), (-theta.sin(), theta.cos()));
        let spread = 0.11;
        let offset = if per_angle > 1 {
            -spread + 2.0 * spread * slot as f64 / (per_angle - 1) as f64
        } else {
            0.0
        } + rng.random_range(-0.01..0.01);
        for i in 0..m {
            let (x, y) = position(i);
            let (rx, ry) = (x - tx, y - ty);
            let lateral = perp.0 * rx + perp.1 * ry - offset;
            let depth = dir.0 * rx + dir.1 * ry + 0.75;
            dose[(i, l)] = (-lateral * lateral / (2.0 * width * width)).exp() * (-attenuation * depth.max(0.0)).exp();
        }
    }
    let mean_target = target.iter().map(|&i| dose.row(i).sum()).sum::<f64>() / target.len() as f64;
    dose *= PHANTOM_PRESCRIPTION / mean_target;

    let mut regions = vec![Region {
        voxels: target,
        is_target: true,
        dose_bound: PHANTOM_PRESCRIPTION,
        weight: 1.0,
    }];
    if p >= 3 {
        regions.push(Region {
            voxels: critical,
            is_target: false,
            dose_bound: 0.5 * PHANTOM_PRESCRIPTION,
            weight: 1.0,
        });
    }
    // normal voxels are already in row-major order, so equal chunks are bands
    let chunk = normal.len().div_ceil(bands);
    for band in normal.chunks(chunk) {
        regions.push(Region {
            voxels: band.to_vec(),
            is_target: false,
            dose_bound: 1.1 * PHANTOM_PRESCRIPTION,
            weight: 1.0,
        });
    }
    ImrtInstance::new(dose, regions, DEFAULT_GAMMA)
}
