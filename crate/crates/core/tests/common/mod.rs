//! Random problem generators shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sfp_core::divergences::BregmanGenerator;
use sfp_core::linalg::{Matrix, Vector};
use sfp_core::mappings::{SmoothMap, SoftmaxRegion};
use sfp_core::proximity::{coordinate_bound, SplitProblem};
use sfp_core::sets::ConstraintSet;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn normal_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(lo..hi))
}

pub fn uniform_mat(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.random_range(lo..hi))
}

pub fn spd(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let r = normal_mat(rng, n, n);
    r.transpose() * r / n as f64 + Matrix::identity(n, n)
}

fn weight(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(0.2..1.0)
}

fn random_box(rng: &mut ChaCha8Rng, n: usize) -> ConstraintSet {
    let lower = uniform_vec(rng, n, -1.5, 0.0);
    let upper = &lower + uniform_vec(rng, n, 0.2, 2.0);
    ConstraintSet::boxed(lower, upper).unwrap()
}

fn positive_box(rng: &mut ChaCha8Rng, n: usize) -> ConstraintSet {
    let lower = uniform_vec(rng, n, 0.1, 0.8);
    let upper = &lower + uniform_vec(rng, n, 0.2, 2.0);
    ConstraintSet::boxed(lower, upper).unwrap()
}

fn ball(rng: &mut ChaCha8Rng, n: usize) -> ConstraintSet {
    ConstraintSet::ball(normal_vec(rng, n), rng.random_range(0.3..2.0)).unwrap()
}

fn halfspace(rng: &mut ChaCha8Rng, n: usize) -> ConstraintSet {
    ConstraintSet::halfspace(normal_vec(rng, n), rng.random_range(-1.0..1.0)).unwrap()
}

fn hyperplane(rng: &mut ChaCha8Rng, n: usize) -> ConstraintSet {
    ConstraintSet::hyperplane(normal_vec(rng, n), rng.random_range(-1.0..1.0)).unwrap()
}

/// Positive normal and offset, so the set meets the positive orthant.
fn positive_halfspace(rng: &mut ChaCha8Rng, n: usize) -> ConstraintSet {
    ConstraintSet::halfspace(uniform_vec(rng, n, 0.1, 1.0), rng.random_range(0.5..2.0)).unwrap()
}

fn positive_hyperplane(rng: &mut ChaCha8Rng, n: usize) -> ConstraintSet {
    ConstraintSet::hyperplane(uniform_vec(rng, n, 0.1, 1.0), rng.random_range(0.5..2.0)).unwrap()
}

/// A random problem with a starting point in its domain. `case` selects the
/// family: 0-4 Euclidean with each map kind, 5 hinge, 6-9 Bregman with the
/// entropy, β = 4, Itakura-Saito and quadratic generators.
pub fn random_problem(case: usize, rng: &mut ChaCha8Rng) -> (SplitProblem, Vector) {
    random_problem_with(case, rng, true)
}

/// [`random_problem`] without sparsity sets when `nonconvex` is false, so
/// the proximity function is smooth.
pub fn random_problem_with(case: usize, rng: &mut ChaCha8Rng, nonconvex: bool) -> (SplitProblem, Vector) {
    let n = rng.random_range(2..=50);
    let p = rng.random_range(1..=20);
    match case % 10 {
        0 => {
            let problem = SplitProblem::builder(SmoothMap::Identity(n))
                .domain(random_box(rng, n), weight(rng))
                .domain(ball(rng, n), weight(rng))
                .range(halfspace(rng, n), weight(rng))
                .range(hyperplane(rng, n), weight(rng))
                .build()
                .unwrap();
            (problem, normal_vec(rng, n) * 2.0)
        }
        1 => {
            let k = if nonconvex { rng.random_range(1..=n) } else { n };
            let a = normal_mat(rng, p, n);
            let problem = SplitProblem::builder(SmoothMap::Linear(a))
                .domain(ConstraintSet::sparsity(n, k).unwrap(), weight(rng))
                .domain(ConstraintSet::nonnegative_orthant(n), weight(rng))
                .range(ball(rng, p), weight(rng))
                .range(ConstraintSet::singleton(normal_vec(rng, p)), weight(rng))
                .build()
                .unwrap();
            (problem, normal_vec(rng, n))
        }
        2 => {
            let map = SmoothMap::affine(normal_mat(rng, p, n), normal_vec(rng, p)).unwrap();
            let problem = SplitProblem::builder(map)
                .domain(halfspace(rng, n), weight(rng))
                .range(random_box(rng, p), weight(rng))
                .build()
                .unwrap();
            (problem, normal_vec(rng, n))
        }
        3 => {
            let centre = Vector::from_row_slice(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 2.0]);
            let problem = SplitProblem::builder(SmoothMap::toy())
                .domain(ball(rng, 2), weight(rng))
                .range(ConstraintSet::ball(centre, 1.0).unwrap(), weight(rng))
                .range(random_box(rng, 3), weight(rng))
                .build()
                .unwrap();
            (problem, normal_vec(rng, 2))
        }
        4 => {
            let m = n.min(10);
            let map = SmoothMap::complementarity_stack(
                SmoothMap::affine(normal_mat(rng, m, m), normal_vec(rng, m)).unwrap(),
            )
            .unwrap();
            let problem = SplitProblem::builder(map)
                .range(ConstraintSet::complementarity(m), 1.0)
                .build()
                .unwrap();
            (problem, normal_vec(rng, m))
        }
        5 => {
            let regions = rng.random_range(2..=4);
            let blocks: Vec<Matrix> = (0..regions)
                .map(|_| {
                    let rows = rng.random_range(1..=5);
                    uniform_mat(rng, rows, n, 0.0, 1.0)
                })
                .collect();
            let targets: Vec<bool> = (0..regions).map(|j| j == 0).collect();
            let map = SoftmaxRegion::new(blocks, targets.clone(), 10.0).unwrap();
            let mut b = SplitProblem::builder(SmoothMap::SoftmaxRegion(map))
                .domain(ConstraintSet::nonnegative_orthant(n), weight(rng));
            for (j, &t) in targets.iter().enumerate() {
                let bound = if t { rng.random_range(2.0..5.0) } else { rng.random_range(0.5..2.0) };
                b = b.range(coordinate_bound(regions, j, bound, t).unwrap(), weight(rng));
            }
            (b.hinge().build().unwrap(), uniform_vec(rng, n, 0.0, 0.5))
        }
        6 => {
            let a = uniform_mat(rng, p, n, 0.05, 1.0);
            let k = if nonconvex { rng.random_range(1..=n) } else { n };
            let problem = SplitProblem::builder(SmoothMap::Linear(a))
                .domain(positive_hyperplane(rng, n), weight(rng))
                .domain(positive_box(rng, n), weight(rng))
                .domain(ConstraintSet::sparsity(n, k).unwrap(), weight(rng))
                .range(positive_halfspace(rng, p), weight(rng))
                .bregman(BregmanGenerator::negative_entropy(), BregmanGenerator::negative_entropy())
                .build()
                .unwrap();
            (problem, uniform_vec(rng, n, 0.2, 2.0))
        }
        7 => {
            let k = if nonconvex { rng.random_range(1..=n) } else { n };
            let map = SmoothMap::affine(normal_mat(rng, p, n), normal_vec(rng, p)).unwrap();
            let beta = || BregmanGenerator::beta(4.0).unwrap();
            let problem = SplitProblem::builder(map)
                .domain(ConstraintSet::sparsity(n, k).unwrap(), weight(rng))
                .domain(halfspace(rng, n), weight(rng))
                .range(random_box(rng, p), weight(rng))
                .range(hyperplane(rng, p), weight(rng))
                .bregman(beta(), beta())
                .build()
                .unwrap();
            (problem, normal_vec(rng, n))
        }
        8 => {
            let a = uniform_mat(rng, p, n, 0.05, 1.0);
            let problem = SplitProblem::builder(SmoothMap::Linear(a))
                .domain(positive_halfspace(rng, n), weight(rng))
                .domain(positive_box(rng, n), weight(rng))
                .range(positive_hyperplane(rng, p), weight(rng))
                .bregman(BregmanGenerator::itakura_saito(), BregmanGenerator::negative_entropy())
                .build()
                .unwrap();
            (problem, uniform_vec(rng, n, 0.2, 2.0))
        }
        _ => {
            let quad = BregmanGenerator::quadratic(spd(rng, n)).unwrap();
            let map = SmoothMap::affine(normal_mat(rng, p, n), normal_vec(rng, p)).unwrap();
            let problem = SplitProblem::builder(map)
                .domain(hyperplane(rng, n), weight(rng))
                .domain(halfspace(rng, n), weight(rng))
                .range(ball(rng, p), weight(rng))
                .bregman(quad, BregmanGenerator::squared_euclidean())
                .build()
                .unwrap();
            (problem, normal_vec(rng, n))
        }
    }
}

/// The same random Euclidean problem built twice: plainly and in the
/// Bregman form with squared-Euclidean generators.
pub fn euclidean_pair(rng: &mut ChaCha8Rng) -> (SplitProblem, SplitProblem, Vector) {
    let n = rng.random_range(2..=30);
    let p = rng.random_range(1..=15);
    let a = normal_mat(rng, p, n);
    let b = normal_vec(rng, p);
    let sets = (
        random_box(rng, n),
        halfspace(rng, n),
        ball(rng, p),
        hyperplane(rng, p),
    );
    let weights: Vec<f64> = (0..4).map(|_| weight(rng)).collect();
    let build = |bregman: bool| {
        let mut builder = SplitProblem::builder(SmoothMap::affine(a.clone(), b.clone()).unwrap())
            .domain(sets.0.clone(), weights[0])
            .domain(sets.1.clone(), weights[1])
            .range(sets.2.clone(), weights[2])
            .range(sets.3.clone(), weights[3]);
        if bregman {
            builder = builder.bregman(BregmanGenerator::squared_euclidean(), BregmanGenerator::squared_euclidean());
        }
        builder.build().unwrap()
    };
    (build(false), build(true), normal_vec(rng, n) * 2.0)
}
