//! Closed constraint sets and their Euclidean projections.
//!
//! Two of the kinds are non-convex: the sparsity set `{z : ‖z‖₀ ≤ k}` and the
//! complementarity set `{(x, y) : x ≥ 0, y ≥ 0, xᵀy = 0}`. Their projections
//! are still exact (a nearest point is returned), just not unique.

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// The concrete shape of a [`ConstraintSet`].
#[derive(Debug, Clone, PartialEq)]
pub enum SetKind {
    /// Coordinate-wise bounds; infinite bounds are allowed.
    Box { lower: Vector, upper: Vector },
    Ball { center: Vector, radius: f64 },
    /// `{z : aᵀz ≤ c}`
    HalfSpace { normal: Vector, offset: f64 },
    /// `{z : aᵀz = c}`
    Hyperplane { normal: Vector, offset: f64 },
    Singleton(Vector),
    NonnegativeOrthant { dim: usize },
    /// At most `k` nonzero coordinates.
    Sparsity { dim: usize, k: usize },
    /// Acts on stacked vectors `(u, v)` of length `2 * pairs`.
    Complementarity { pairs: usize },
}

/// A validated closed set with a projection operator.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    kind: SetKind,
}

impl ConstraintSet {
    pub fn boxed(lower: Vector, upper: Vector) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::dims("box bounds", lower.len(), upper.len()));
        }
        if let Some(index) = (0..lower.len()).find(|&i| !(lower[i] <= upper[i])) {
            return Err(Error::EmptyBox {
                index,
                lower: lower[index],
                upper: upper[index],
            });
        }
        Ok(Self {
            kind: SetKind::Box { lower, upper },
        })
    }

    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            kind: SetKind::Ball { center, radius },
        })
    }

    pub fn halfspace(normal: Vector, offset: f64) -> Result<Self> {
        check_normal(&normal)?;
        Ok(Self {
            kind: SetKind::HalfSpace { normal, offset },
        })
    }

    pub fn hyperplane(normal: Vector, offset: f64) -> Result<Self> {
        check_normal(&normal)?;
        Ok(Self {
            kind: SetKind::Hyperplane { normal, offset },
        })
    }

    pub fn singleton(point: Vector) -> Self {
        Self {
            kind: SetKind::Singleton(point),
        }
    }

    pub fn nonnegative_orthant(dim: usize) -> Self {
        Self {
            kind: SetKind::NonnegativeOrthant { dim },
        }
    }

    pub fn sparsity(dim: usize, k: usize) -> Result<Self> {
        if k == 0 || k > dim {
            return Err(Error::InvalidParameter(format!(
                "sparsity level must satisfy 0 < k <= {dim}, got {k}"
            )));
        }
        Ok(Self {
            kind: SetKind::Sparsity { dim, k },
        })
    }

    pub fn complementarity(pairs: usize) -> Self {
        Self {
            kind: SetKind::Complementarity { pairs },
        }
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    /// Ambient dimension of the vectors the set acts on.
    pub fn dim(&self) -> usize {
        match &self.kind {
            SetKind::Box { lower, .. } => lower.len(),
            SetKind::Ball { center, .. } => center.len(),
            SetKind::HalfSpace { normal, .. } | SetKind::Hyperplane { normal, .. } => normal.len(),
            SetKind::Singleton(y) => y.len(),
            SetKind::NonnegativeOrthant { dim } | SetKind::Sparsity { dim, .. } => *dim,
            SetKind::Complementarity { pairs } => 2 * pairs,
        }
    }

    pub fn is_convex(&self) -> bool {
        !matches!(
            self.kind,
            SetKind::Sparsity { .. } | SetKind::Complementarity { .. }
        )
    }

    /// Euclidean projection of `x` onto the set.
    pub fn project(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.dim() {
            return Err(Error::dims("set projection", self.dim(), x.len()));
        }
        Ok(match &self.kind {
            SetKind::Box { lower, upper } => clamp(x, lower, upper),
            SetKind::Ball { center, radius } => project_ball(x, center, *radius),
            SetKind::HalfSpace { normal, offset } => halfspace_unchecked(x, normal, *offset),
            SetKind::Hyperplane { normal, offset } => hyperplane_unchecked(x, normal, *offset),
            SetKind::Singleton(y) => y.clone(),
            SetKind::NonnegativeOrthant { .. } => x.map(|v| v.max(0.0)),
            SetKind::Sparsity { k, .. } => project_sparsity(x, *k),
            SetKind::Complementarity { pairs } => {
                let u = x.rows(0, *pairs).clone_owned();
                let v = x.rows(*pairs, *pairs).clone_owned();
                let (a, b) = project_complementarity(&u, &v);
                let mut out = Vector::zeros(2 * pairs);
                out.rows_mut(0, *pairs).copy_from(&a);
                out.rows_mut(*pairs, *pairs).copy_from(&b);
                out
            }
        })
    }

    /// Euclidean distance from `x` to the set.
    pub fn distance(&self, x: &Vector) -> Result<f64> {
        Ok((x - self.project(x)?).norm())
    }

    /// Membership test with absolute slack `tol`.
    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match &self.kind {
            SetKind::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .all(|(v, (lo, hi))| *v >= lo - tol && *v <= hi + tol),
            SetKind::Ball { center, radius } => (x - center).norm() <= radius + tol,
            SetKind::HalfSpace { normal, offset } => normal.dot(x) <= offset + tol,
            SetKind::Hyperplane { normal, offset } => (normal.dot(x) - offset).abs() <= tol,
            SetKind::Singleton(y) => (x - y).amax() <= tol,
            SetKind::NonnegativeOrthant { .. } => x.iter().all(|v| *v >= -tol),
            SetKind::Sparsity { k, .. } => x.iter().filter(|v| v.abs() > tol).count() <= *k,
            SetKind::Complementarity { pairs } => (0..*pairs).all(|i| {
                let (u, v) = (x[i], x[pairs + i]);
                u >= -tol && v >= -tol && (u * v).abs() <= tol
            }),
        }
    }
}

fn check_normal(a: &Vector) -> Result<()> {
    if a.iter().all(|v| *v == 0.0) {
        return Err(Error::ZeroNormal);
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("normal vector must be finite".into()));
    }
    Ok(())
}

fn clamp(x: &Vector, lower: &Vector, upper: &Vector) -> Vector {
    Vector::from_iterator(
        x.len(),
        x.iter()
            .zip(lower.iter().zip(upper.iter()))
            .map(|(v, (lo, hi))| v.max(*lo).min(*hi)),
    )
}

fn halfspace_unchecked(x: &Vector, a: &Vector, c: f64) -> Vector {
    let excess = a.dot(x) - c;
    if excess <= 0.0 {
        return x.clone();
    }
    x - a * (excess / a.norm_squared())
}

fn hyperplane_unchecked(x: &Vector, a: &Vector, c: f64) -> Vector {
    x - a * ((a.dot(x) - c) / a.norm_squared())
}

/// `x − max(aᵀx − c, 0)/‖a‖² · a`
pub fn project_halfspace(x: &Vector, a: &Vector, c: f64) -> Result<Vector> {
    check_normal(a)?;
    if a.len() != x.len() {
        return Err(Error::dims("project_halfspace", a.len(), x.len()));
    }
    Ok(halfspace_unchecked(x, a, c))
}

pub fn project_hyperplane(x: &Vector, a: &Vector, c: f64) -> Result<Vector> {
    check_normal(a)?;
    if a.len() != x.len() {
        return Err(Error::dims("project_hyperplane", a.len(), x.len()));
    }
    Ok(hyperplane_unchecked(x, a, c))
}

/// Radial projection onto the closed ball of radius `r` around `center`.
pub fn project_ball(x: &Vector, center: &Vector, r: f64) -> Vector {
    let offset = x - center;
    let dist = offset.norm();
    if dist <= r {
        x.clone()
    } else {
        center + offset * (r / dist)
    }
}

pub fn project_box(x: &Vector, lower: &Vector, upper: &Vector) -> Result<Vector> {
    if lower.len() != x.len() || upper.len() != x.len() {
        return Err(Error::dims("project_box", x.len(), lower.len().min(upper.len())));
    }
    if let Some(index) = (0..lower.len()).find(|&i| !(lower[i] <= upper[i])) {
        return Err(Error::EmptyBox {
            index,
            lower: lower[index],
            upper: upper[index],
        });
    }
    Ok(clamp(x, lower, upper))
}

/// Indices of the `k` entries of largest magnitude; ties keep the lower index.
pub fn top_k_support(x: &Vector, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    // Stable sort, so equal magnitudes stay in index order.
    order.sort_by(|&i, &j| x[j].abs().total_cmp(&x[i].abs()));
    order.truncate(k);
    order.sort_unstable();
    order
}

/// Keeps the `k` largest-magnitude entries of `x` and zeroes the rest.
pub fn project_sparsity(x: &Vector, k: usize) -> Vector {
    if k >= x.len() {
        return x.clone();
    }
    let mut out = Vector::zeros(x.len());
    for i in top_k_support(x, k) {
        out[i] = x[i];
    }
    out
}

/// Coordinate-wise projection onto `{(a, b) : a ≥ 0, b ≥ 0, a_i b_i = 0}`.
///
/// Ties `u_i = v_i ≥ 0` resolve to `(u_i, 0)`.
pub fn project_complementarity(u: &Vector, v: &Vector) -> (Vector, Vector) {
    assert_eq!(u.len(), v.len(), "complementarity halves must match");
    let mut a = Vector::zeros(u.len());
    let mut b = Vector::zeros(v.len());
    for i in 0..u.len() {
        let (ui, vi) = (u[i], v[i]);
        if ui >= vi && vi >= 0.0 {
            a[i] = ui;
        } else if vi > ui && ui >= 0.0 {
            b[i] = vi;
        } else {
            a[i] = ui.max(0.0);
            b[i] = vi.max(0.0);
        }
    }
    (a, b)
}
