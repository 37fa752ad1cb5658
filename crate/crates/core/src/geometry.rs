//! Compact convex action sets with closed-form Euclidean projections.
//!
//! Every [`ActionSet`] carries a safety ball `B_r(p)` contained in the set.
//! The sampling step uses it to skew perturbations back toward the interior,
//! so the ball is validated once at construction and never mutated.

use serde::{Deserialize, Serialize};

use crate::error::{GoldError, Result};

/// Membership tolerance for points produced by floating-point arithmetic.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Tolerance used when certifying that the safety ball lies inside the set.
const SAFETY_TOL: f64 = 1e-12;

/// Relative slack under which a point counts as already projected, so that
/// projected points are exact fixed points despite last-ulp round-off.
const PROJECTION_SLACK: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetKind {
    /// Axis-aligned box `lo <= x <= hi`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Closed Euclidean ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// Budget-capped orthant slice `{x : x_k >= lower, sum_k x_k <= budget}`.
    SimplexSlice { budget: f64, dim: usize, lower: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    kind: SetKind,
    dim: usize,
    safety_center: Vec<f64>,
    safety_radius: f64,
}

impl ActionSet {
    /// Builds a set with its default (inscribed) safety ball.
    pub fn new(kind: SetKind) -> Result<Self> {
        let dim = validate_kind(&kind)?;
        let (center, radius) = inscribed_ball(&kind, dim)?;
        Self::with_safety_ball(kind, center, radius)
    }

    /// Builds a set with a caller-supplied safety ball, rejecting balls that
    /// leave the set.
    pub fn with_safety_ball(kind: SetKind, center: Vec<f64>, radius: f64) -> Result<Self> {
        let dim = validate_kind(&kind)?;
        if center.len() != dim {
            return Err(GoldError::DimensionMismatch {
                expected: dim,
                got: center.len(),
            });
        }
        if radius <= 0.0 || !radius.is_finite() {
            return Err(GoldError::SafetyBallOutside(format!(
                "safety radius must be positive, got {radius}"
            )));
        }
        let set = ActionSet {
            kind,
            dim,
            safety_center: center,
            safety_radius: radius,
        };
        set.check_safety_ball()?;
        Ok(set)
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(SetKind::Box {
            lo: vec![lo],
            hi: vec![hi],
        })
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(SetKind::Box {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        Self::new(SetKind::Ball { center, radius })
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn safety_center(&self) -> &[f64] {
        &self.safety_center
    }

    pub fn safety_radius(&self) -> f64 {
        self.safety_radius
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(y)?;
        Ok(match &self.kind {
            SetKind::Box { lo, hi } => y
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(&v, (&l, &h))| v.clamp(l, h))
                .collect(),
            SetKind::Ball { center, radius } => {
                let d = distance(y, center);
                if d <= radius * (1.0 + PROJECTION_SLACK) {
                    y.to_vec()
                } else {
                    let scale = radius / d;
                    y.iter()
                        .zip(center)
                        .map(|(&v, &c)| c + (v - c) * scale)
                        .collect()
                }
            }
            SetKind::SimplexSlice { budget, lower, .. } => project_slice(y, *budget, *lower),
        })
    }

    /// Distance from `x` to its projection.
    pub fn distance_to(&self, x: &[f64]) -> Result<f64> {
        let p = self.project(x)?;
        Ok(distance(x, &p))
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        Ok(self.distance_to(x)? <= tol)
    }

    /// Upper bound on `sup ||x - y||` over the set (exact for boxes and balls).
    pub fn diameter(&self) -> f64 {
        match &self.kind {
            SetKind::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| (h - l).powi(2))
                .sum::<f64>()
                .sqrt(),
            SetKind::Ball { radius, .. } => 2.0 * radius,
            SetKind::SimplexSlice { budget, dim, lower } => {
                let side = budget - *dim as f64 * lower;
                if *dim == 1 {
                    side
                } else {
                    std::f64::consts::SQRT_2 * side
                }
            }
        }
    }

    /// Largest distance from `a` to any point of the set.
    pub fn max_distance_from(&self, a: &[f64]) -> f64 {
        match &self.kind {
            SetKind::Box { lo, hi } => a
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(&v, (&l, &h))| (v - l).abs().max((v - h).abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
            SetKind::Ball { center, radius } => distance(a, center) + radius,
            SetKind::SimplexSlice { budget, dim, lower } => {
                // the farthest point of a polytope is one of its vertices
                let side = budget - *dim as f64 * lower;
                let base = vec![*lower; *dim];
                let mut best = distance(a, &base);
                for k in 0..*dim {
                    let mut v = base.clone();
                    v[k] += side;
                    best = best.max(distance(a, &v));
                }
                best
            }
        }
    }

    /// Default safety ball: the inscribed ball of the set.
    pub fn default_safety_ball(&self) -> Result<(Vec<f64>, f64)> {
        inscribed_ball(&self.kind, self.dim)
    }

    /// Smallest axis-aligned box containing the set, as `(lo, hi)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.kind {
            SetKind::Box { lo, hi } => (lo.clone(), hi.clone()),
            SetKind::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            SetKind::SimplexSlice { budget, dim, lower } => {
                let top = budget - (*dim as f64 - 1.0) * lower;
                (vec![*lower; *dim], vec![top; *dim])
            }
        }
    }

    /// Uniform-ish sample of a point of the set (used by property checks and
    /// the monotonicity falsifier, not by the learning policy).
    pub fn sample_point<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.kind {
            SetKind::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(&l, &h)| l + (h - l) * rng.random::<f64>())
                .collect(),
            SetKind::Ball { center, radius } => {
                let dir = crate::spsa::sample_direction(self.dim, rng);
                let scale = radius * rng.random::<f64>().powf(1.0 / self.dim as f64);
                center
                    .iter()
                    .zip(&dir)
                    .map(|(c, u)| c + scale * u)
                    .collect()
            }
            SetKind::SimplexSlice { budget, dim, lower } => {
                // Dirichlet(1,...,1) on the full simplex including the slack
                let side = budget - *dim as f64 * lower;
                let mut e: Vec<f64> = (0..=*dim)
                    .map(|_| -(1.0 - rng.random::<f64>()).ln())
                    .collect();
                let total: f64 = e.iter().sum();
                e.truncate(*dim);
                e.iter().map(|w| lower + side * w / total).collect()
            }
        }
    }

    fn check_dim(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.dim {
            return Err(GoldError::DimensionMismatch {
                expected: self.dim,
                got: y.len(),
            });
        }
        Ok(())
    }

    fn check_safety_ball(&self) -> Result<()> {
        let p = &self.safety_center;
        let fixed = |x: &[f64]| -> Result<bool> {
            let q = self.project(x)?;
            Ok(distance(x, &q) <= SAFETY_TOL)
        };
        if !fixed(p)? {
            return Err(GoldError::SafetyBallOutside(format!(
                "center {p:?} is not in the set"
            )));
        }
        for k in 0..self.dim {
            for sign in [1.0, -1.0] {
                let mut x = p.clone();
                x[k] += sign * self.safety_radius;
                if !fixed(&x)? {
                    return Err(GoldError::SafetyBallOutside(format!(
                        "point {x:?} on the ball of radius {} leaves the set",
                        self.safety_radius
                    )));
                }
            }
        }
        if let SetKind::SimplexSlice { budget, .. } = &self.kind {
            // the budget facet is not axis-aligned, check it directly
            let slack =
                budget - p.iter().sum::<f64>() - self.safety_radius * (self.dim as f64).sqrt();
            if slack < -SAFETY_TOL {
                return Err(GoldError::SafetyBallOutside(
                    "ball crosses the budget facet".into(),
                ));
            }
        }
        Ok(())
    }
}

fn validate_kind(kind: &SetKind) -> Result<usize> {
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    match kind {
        SetKind::Box { lo, hi } => {
            if lo.is_empty() || lo.len() != hi.len() {
                return Err(GoldError::InvalidSet(format!(
                    "box bounds must be nonempty and of equal length ({} vs {})",
                    lo.len(),
                    hi.len()
                )));
            }
            if !finite(lo) || !finite(hi) {
                return Err(GoldError::InvalidSet("box bounds must be finite".into()));
            }
            if lo.iter().zip(hi).any(|(l, h)| l > h) {
                return Err(GoldError::InvalidSet("box requires lo <= hi".into()));
            }
            Ok(lo.len())
        }
        SetKind::Ball { center, radius } => {
            if center.is_empty() || !finite(center) {
                return Err(GoldError::InvalidSet("ball center must be finite".into()));
            }
            if *radius < 0.0 || !radius.is_finite() {
                return Err(GoldError::InvalidSet("ball radius must be >= 0".into()));
            }
            Ok(center.len())
        }
        SetKind::SimplexSlice { budget, dim, lower } => {
            if *dim == 0 {
                return Err(GoldError::InvalidSet("slice dimension must be >= 1".into()));
            }
            if !budget.is_finite() || !lower.is_finite() || *budget < *dim as f64 * lower {
                return Err(GoldError::InvalidSet(format!(
                    "empty slice: budget {budget} < dim * lower = {}",
                    *dim as f64 * lower
                )));
            }
            Ok(*dim)
        }
    }
}

fn inscribed_ball(kind: &SetKind, dim: usize) -> Result<(Vec<f64>, f64)> {
    match kind {
        SetKind::Box { lo, hi } => {
            let min_side = lo
                .iter()
                .zip(hi)
                .map(|(l, h)| h - l)
                .fold(f64::INFINITY, f64::min);
            if min_side.is_nan() || min_side <= 0.0 {
                return Err(GoldError::NoInterior("box has a zero-width side".into()));
            }
            let center = lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect();
            Ok((center, 0.5 * min_side))
        }
        SetKind::Ball { center, radius } => {
            if radius.is_nan() || *radius <= 0.0 {
                return Err(GoldError::NoInterior("ball has zero radius".into()));
            }
            Ok((center.clone(), *radius))
        }
        SetKind::SimplexSlice { budget, lower, .. } => {
            let side = budget - dim as f64 * lower;
            if side.is_nan() || side <= 0.0 {
                return Err(GoldError::NoInterior("slice has no volume".into()));
            }
            // inradius of the corner simplex {z >= 0, sum z <= s}
            let n = dim as f64;
            let r = side / (n + n.sqrt());
            Ok((vec![lower + r; dim], r))
        }
    }
}

/// Projection onto `{x : x_k >= lower, sum x_k <= budget}`.
fn project_slice(y: &[f64], budget: f64, lower: f64) -> Vec<f64> {
    let side = budget - y.len() as f64 * lower;
    let clamped: Vec<f64> = y.iter().map(|&v| v.max(lower)).collect();
    if clamped.iter().sum::<f64>() <= budget + PROJECTION_SLACK * budget.abs().max(1.0) {
        return clamped;
    }
    // projection onto the face sum z = side, z >= 0 (sort-based threshold)
    let z: Vec<f64> = y.iter().map(|&v| v - lower).collect();
    let mut sorted = z.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - side) / (k as f64 + 1.0);
        if v - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    z.iter().map(|&v| (v - theta).max(0.0) + lower).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Euclidean distance between two joint profiles.
pub fn profile_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| distance(x, y).powi(2))
        .sum::<f64>()
        .sqrt()
}
