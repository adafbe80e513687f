//! Planar transformation groups SE(2), E(2), SA(2) and A(2): representation,
//! composition, application to curves and samples, and bounded random
//! sampling.

use crate::curves::{PlanarCurve, Point2, PointSample};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum GroupError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("element violates {kind:?} invariants: {reason}")]
    InvariantViolation { kind: GroupKind, reason: String },
    #[error("linear part is not invertible (det = {0})")]
    NonInvertible(f64),
}

/// Transformation group tag, ordered from most to least restrictive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKind {
    /// Rotations and translations.
    Se2,
    /// Rotations, reflections and translations.
    E2,
    /// Area-preserving linear maps (det = 1) and translations.
    Sa2,
    /// Invertible linear maps and translations.
    A2,
}

impl GroupKind {
    /// Least restrictive kind containing both operands, used when composing
    /// elements of different kinds.
    pub fn join(self, other: GroupKind) -> GroupKind {
        use GroupKind::*;
        if self == other {
            return self;
        }
        match (self, other) {
            (Se2, k) | (k, Se2) => k,
            _ => A2,
        }
    }
}

impl std::fmt::Display for GroupKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            GroupKind::Se2 => "se2",
            GroupKind::E2 => "e2",
            GroupKind::Sa2 => "sa2",
            GroupKind::A2 => "a2",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for GroupKind {
    type Err = GroupError;
    fn from_str(s: &str) -> Result<Self, GroupError> {
        match s.to_ascii_lowercase().as_str() {
            "se2" => Ok(GroupKind::Se2),
            "e2" => Ok(GroupKind::E2),
            "sa2" => Ok(GroupKind::Sa2),
            "a2" => Ok(GroupKind::A2),
            other => Err(GroupError::InvalidParameter(format!(
                "unknown group kind '{other}'"
            ))),
        }
    }
}

const ORTHO_TOL: f64 = 1e-9;

/// An affine map x -> A x + a with a group-kind tag.
///
/// Serializes as the six coefficients `[a11, a12, a21, a22, tx, ty]`
/// (row-major linear part, then translation) plus the kind tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WireElement", into = "WireElement")]
pub struct GroupElement {
    a11: f64,
    a12: f64,
    a21: f64,
    a22: f64,
    tx: f64,
    ty: f64,
    kind: GroupKind,
}

#[derive(Serialize, Deserialize)]
struct WireElement {
    kind: GroupKind,
    coeffs: [f64; 6],
}

impl From<GroupElement> for WireElement {
    fn from(g: GroupElement) -> Self {
        WireElement {
            kind: g.kind,
            coeffs: [g.a11, g.a12, g.a21, g.a22, g.tx, g.ty],
        }
    }
}

impl TryFrom<WireElement> for GroupElement {
    type Error = GroupError;
    fn try_from(w: WireElement) -> Result<Self, GroupError> {
        let [a11, a12, a21, a22, tx, ty] = w.coeffs;
        GroupElement::new(w.kind, [a11, a12, a21, a22], [tx, ty])
    }
}

impl GroupElement {
    /// Validates the linear part against the kind's invariants.
    ///
    /// The determinant range of sampled A(2) elements is a sampler parameter;
    /// the type itself only demands invertibility, so elements stay closed
    /// under composition.
    pub fn new(kind: GroupKind, a: [f64; 4], t: [f64; 2]) -> Result<Self, GroupError> {
        let [a11, a12, a21, a22] = a;
        if !(a11.is_finite() && a12.is_finite() && a21.is_finite() && a22.is_finite())
            || !(t[0].is_finite() && t[1].is_finite())
        {
            return Err(GroupError::InvalidParameter(
                "element coefficients must be finite".into(),
            ));
        }
        let det = a11 * a22 - a12 * a21;
        if det == 0.0 {
            return Err(GroupError::NonInvertible(det));
        }
        let orthogonal = {
            let c1 = a11 * a11 + a21 * a21;
            let c2 = a12 * a12 + a22 * a22;
            let c12 = a11 * a12 + a21 * a22;
            (c1 - 1.0).abs() <= ORTHO_TOL && (c2 - 1.0).abs() <= ORTHO_TOL && c12.abs() <= ORTHO_TOL
        };
        let invariant_err = |reason: &str| GroupError::InvariantViolation {
            kind,
            reason: reason.into(),
        };
        match kind {
            GroupKind::Se2 => {
                if !orthogonal {
                    return Err(invariant_err("linear part must be orthogonal"));
                }
                if (det - 1.0).abs() > ORTHO_TOL {
                    return Err(invariant_err("determinant must be +1"));
                }
            }
            GroupKind::E2 => {
                if !orthogonal {
                    return Err(invariant_err("linear part must be orthogonal"));
                }
            }
            GroupKind::Sa2 => {
                if (det - 1.0).abs() > ORTHO_TOL {
                    return Err(invariant_err("determinant must be 1"));
                }
            }
            GroupKind::A2 => {}
        }
        Ok(GroupElement {
            a11,
            a12,
            a21,
            a22,
            tx: t[0],
            ty: t[1],
            kind,
        })
    }

    pub fn identity(kind: GroupKind) -> Self {
        GroupElement {
            a11: 1.0,
            a12: 0.0,
            a21: 0.0,
            a22: 1.0,
            tx: 0.0,
            ty: 0.0,
            kind,
        }
    }

    /// Rotation by `theta` with translation `t`, an SE(2) element.
    pub fn rotation(theta: f64, t: [f64; 2]) -> Self {
        let (s, c) = theta.sin_cos();
        GroupElement {
            a11: c,
            a12: -s,
            a21: s,
            a22: c,
            tx: t[0],
            ty: t[1],
            kind: GroupKind::Se2,
        }
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn linear(&self) -> [f64; 4] {
        [self.a11, self.a12, self.a21, self.a22]
    }

    pub fn translation(&self) -> [f64; 2] {
        [self.tx, self.ty]
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn apply_point(&self, p: Point2) -> Point2 {
        Point2::new(
            self.a11 * p.x + self.a12 * p.y + self.tx,
            self.a21 * p.x + self.a22 * p.y + self.ty,
        )
    }

    pub fn apply_curve(&self, curve: &PlanarCurve) -> PlanarCurve {
        let points = curve.points().iter().map(|p| self.apply_point(*p)).collect();
        PlanarCurve::new(points, curve.is_closed())
            .expect("affine maps preserve curve invariants")
    }

    pub fn apply_sample(&self, sample: &PointSample) -> PointSample {
        PointSample {
            points: sample.points.iter().map(|p| self.apply_point(*p)).collect(),
            kind: sample.kind,
        }
    }

    /// Composition `self . other`: applying the result equals applying
    /// `other` first and `self` second.
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        let kind = self.kind.join(other.kind);
        GroupElement {
            a11: self.a11 * other.a11 + self.a12 * other.a21,
            a12: self.a11 * other.a12 + self.a12 * other.a22,
            a21: self.a21 * other.a11 + self.a22 * other.a21,
            a22: self.a21 * other.a12 + self.a22 * other.a22,
            tx: self.a11 * other.tx + self.a12 * other.ty + self.tx,
            ty: self.a21 * other.tx + self.a22 * other.ty + self.ty,
            kind,
        }
    }

    pub fn inverse(&self) -> Result<GroupElement, GroupError> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return Err(GroupError::NonInvertible(det));
        }
        let (b11, b12, b21, b22) = (
            self.a22 / det,
            -self.a12 / det,
            -self.a21 / det,
            self.a11 / det,
        );
        Ok(GroupElement {
            a11: b11,
            a12: b12,
            a21: b21,
            a22: b22,
            tx: -(b11 * self.tx + b12 * self.ty),
            ty: -(b21 * self.tx + b22 * self.ty),
            kind: self.kind,
        })
    }

    /// Ratio of the largest to smallest singular value of the linear part.
    ///
    /// Computed from the eigenvalues of A^T A; the smaller singular value is
    /// recovered through det(A) = sigma_max * sigma_min to avoid cancellation.
    pub fn condition_number(&self) -> f64 {
        let g11 = self.a11 * self.a11 + self.a21 * self.a21;
        let g22 = self.a12 * self.a12 + self.a22 * self.a22;
        let g12 = self.a11 * self.a12 + self.a21 * self.a22;
        let trace = g11 + g22;
        let disc = ((g11 - g22) * (g11 - g22) + 4.0 * g12 * g12).max(0.0).sqrt();
        let sigma_max_sq = (trace + disc) / 2.0;
        sigma_max_sq / self.det().abs()
    }
}

/// Parameters for [`sample_group_element`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SamplerBounds {
    /// Upper bound on the condition number of sampled linear parts.
    pub cond_max: f64,
    /// Determinant range for A(2) elements (positive, log-uniform).
    pub det_range: (f64, f64),
}

impl Default for SamplerBounds {
    fn default() -> Self {
        SamplerBounds {
            cond_max: 3.0,
            det_range: (0.5, 2.0),
        }
    }
}

/// Draws a random group element of the given kind.
///
/// SE(2)/E(2) elements are rotations (plus a reflection with probability 1/2
/// for E(2)). SA(2) elements are R(theta1) diag(sigma, 1/sigma) R(theta2)
/// with sigma uniform on [1, sqrt(cond_max)], so the condition number
/// sigma^2 never exceeds `cond_max`. A(2) scales an SA(2) element by sqrt(d)
/// with d log-uniform on `det_range`; reflections are excluded because
/// training treats the flipped anchor as a negative. Translations are
/// uniform on [-1, 1]^2 and irrelevant after sample normalization.
pub fn sample_group_element<R: Rng + ?Sized>(
    kind: GroupKind,
    bounds: &SamplerBounds,
    rng: &mut R,
) -> Result<GroupElement, GroupError> {
    if !(bounds.cond_max >= 1.0) {
        return Err(GroupError::InvalidParameter(format!(
            "cond_max must be >= 1, got {}",
            bounds.cond_max
        )));
    }
    let (d_lo, d_hi) = bounds.det_range;
    if !(d_lo > 0.0 && d_hi >= d_lo && d_hi.is_finite()) {
        return Err(GroupError::InvalidParameter(format!(
            "det_range must be a positive interval, got [{d_lo}, {d_hi}]"
        )));
    }
    let t = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    let tau = std::f64::consts::TAU;
    let a = match kind {
        GroupKind::Se2 => {
            let (s, c) = rng.gen_range(0.0..tau).sin_cos();
            [c, -s, s, c]
        }
        GroupKind::E2 => {
            let (s, c) = rng.gen_range(0.0..tau).sin_cos();
            if rng.gen::<bool>() {
                // Compose with the reflection diag(1, -1).
                [c, s, s, -c]
            } else {
                [c, -s, s, c]
            }
        }
        GroupKind::Sa2 | GroupKind::A2 => {
            let theta1 = rng.gen_range(0.0..tau);
            let theta2 = rng.gen_range(0.0..tau);
            let sigma_hi = bounds.cond_max.sqrt();
            let sigma = if sigma_hi > 1.0 {
                rng.gen_range(1.0..sigma_hi)
            } else {
                1.0
            };
            let scale = if kind == GroupKind::A2 {
                let d = (rng.gen_range(d_lo.ln()..=d_hi.ln())).exp();
                d.sqrt()
            } else {
                1.0
            };
            let (s1, c1) = theta1.sin_cos();
            let (s2, c2) = theta2.sin_cos();
            // R(theta1) * diag(sigma, 1/sigma) * R(theta2), scaled.
            [
                scale * (c1 * sigma * c2 - s1 / sigma * s2),
                scale * (-c1 * sigma * s2 - s1 / sigma * c2),
                scale * (s1 * sigma * c2 + c1 / sigma * s2),
                scale * (-s1 * sigma * s2 + c1 / sigma * c2),
            ]
        }
    };
    GroupElement::new(kind, a, t)
}
