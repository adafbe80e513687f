//! Joint invariants and closed-form differential invariants: the
//! circumcircle-based Euclidean estimators used as the baseline, and the jet
//! formulas used as analytic oracles in tests.

use crate::curves::{PlanarCurve, Point2};
use crate::signature::Signature;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum AxiomaticError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid size: {0}")]
    InvalidSize(String),
}

/// First three derivatives of a graph function y = f(x) at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JetPoint {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
}

/// First and second parametric derivatives of a plane curve t -> (x(t), y(t)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamJet {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

pub fn euclidean_distance(p: Point2, q: Point2) -> f64 {
    p.dist(q)
}

/// Half the absolute cross product of two edge vectors: the joint invariant
/// of the equi-affine group.
pub fn triangle_area(p1: Point2, p2: Point2, p3: Point2) -> f64 {
    ((p2 - p1).cross(p3 - p1)).abs() / 2.0
}

/// Signed curvature of the circle through three consecutive points:
/// kappa = 4 A / (a b c) with the area by Heron's formula in the
/// cancellation-safe sorted form, signed by the turn direction. Positive for
/// a counter-clockwise turn; zero for collinear points.
pub fn circumcircle_curvature(p1: Point2, p2: Point2, p3: Point2) -> Result<f64, AxiomaticError> {
    if p1 == p2 || p2 == p3 || p1 == p3 {
        return Err(AxiomaticError::DegenerateInput(
            "circumcircle needs three distinct points".into(),
        ));
    }
    let mut a = p1.dist(p2);
    let mut b = p2.dist(p3);
    let mut c = p1.dist(p3);
    // Sort descending: a >= b >= c.
    if a < b {
        std::mem::swap(&mut a, &mut b);
    }
    if b < c {
        std::mem::swap(&mut b, &mut c);
    }
    if a < b {
        std::mem::swap(&mut a, &mut b);
    }
    let u = c - (a - b);
    if u <= 0.0 {
        // Collinear up to roundoff.
        return Ok(0.0);
    }
    let area = 0.25 * ((a + (b + c)) * u * (c + (a - b)) * (a + (b - c))).sqrt();
    let kappa = 4.0 * area / (a * b * c);
    let turn = (p2 - p1).cross(p3 - p2);
    Ok(if turn < 0.0 { -kappa } else { kappa })
}

/// Finite-difference estimate of d(kappa)/ds at point `i`: the difference of
/// the circumcircle curvatures at the two neighbors divided by the distance
/// between them. Needs indices i-2..i+2 (wrapping on closed curves).
pub fn axiomatic_kappa_s(curve: &PlanarCurve, i: usize) -> Result<f64, AxiomaticError> {
    let n = curve.len();
    if i >= n {
        return Err(AxiomaticError::InvalidSize(format!(
            "index {i} out of range for curve of length {n}"
        )));
    }
    if !curve.is_closed() && (i < 2 || i + 2 >= n) {
        return Err(AxiomaticError::InvalidSize(format!(
            "open curve needs indices {}..={} in range",
            i as isize - 2,
            i + 2
        )));
    }
    if n < 5 {
        return Err(AxiomaticError::InvalidSize(
            "kappa_s needs at least 5 points".into(),
        ));
    }
    let at = |k: isize| curve.point_wrapped(i as isize + k);
    let kappa_prev = circumcircle_curvature(at(-2), at(-1), at(0))?;
    let kappa_next = circumcircle_curvature(at(0), at(1), at(2))?;
    let dist = at(-1).dist(at(1));
    Ok((kappa_next - kappa_prev) / dist)
}

/// Euclidean curvature from a graph jet: f'' / (1 + f'^2)^(3/2).
pub fn curvature_from_jet(j: JetPoint) -> f64 {
    j.f2 / (1.0 + j.f1 * j.f1).powf(1.5)
}

/// Derivative of the Euclidean curvature with respect to Euclidean
/// arc-length, from a graph jet:
/// (f''' (1 + f'^2) - 3 f''^2 f') / (1 + f'^2)^3.
pub fn kappa_s_from_jet(j: JetPoint) -> f64 {
    let w = 1.0 + j.f1 * j.f1;
    (j.f3 * w - 3.0 * j.f2 * j.f2 * j.f1) / (w * w * w)
}

/// Euclidean arc-length element sqrt(1 + f'^2) dx. Dividing finite
/// differences by this density realizes the invariant differential operator
/// d/ds = (1/p) d/dx.
pub fn euclidean_arclength_element(f1: f64, dx: f64) -> f64 {
    (1.0 + f1 * f1).sqrt() * dx
}

/// Equi-affine arc-length element |x' y'' - y' x''|^(1/3) dt.
pub fn equiaffine_arclength_element(j: ParamJet, dt: f64) -> f64 {
    (j.x1 * j.y2 - j.y1 * j.x2).abs().cbrt() * dt
}

/// The axiomatic Euclidean signature: per-point circumcircle curvature over
/// the (i-1, i, i+1) triple and cumulative chord length from index 0.
/// Degenerate triples are filled by linear interpolation between the nearest
/// valid neighbors.
pub fn axiomatic_euclidean_signature(curve: &PlanarCurve) -> Result<Signature, AxiomaticError> {
    let n = curve.len();
    if n < 5 {
        return Err(AxiomaticError::InvalidSize(format!(
            "signature needs at least 5 points, got {n}"
        )));
    }
    let mut kappa: Vec<Option<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        if !curve.is_closed() && (i == 0 || i + 1 == n) {
            kappa.push(None);
            continue;
        }
        let at = |k: isize| curve.point_wrapped(i as isize + k);
        kappa.push(circumcircle_curvature(at(-1), at(0), at(1)).ok());
    }
    fill_gaps(&mut kappa, curve.is_closed())?;

    let mut s = Vec::with_capacity(n);
    let mut acc = 0.0;
    for i in 0..n {
        if i > 0 {
            acc += curve.points()[i - 1].dist(curve.points()[i]);
        }
        s.push(acc);
    }
    let entries = (0..n)
        .map(|i| (i, s[i], kappa[i].expect("gaps filled")))
        .collect();
    Ok(Signature::from_entries(
        entries,
        crate::groups::GroupKind::Se2,
        0,
        "axiomatic-euclidean",
        "chord-length",
    ))
}

/// Replaces `None` runs by linear interpolation between the nearest valid
/// values (cyclically when `closed`).
fn fill_gaps(values: &mut [Option<f64>], closed: bool) -> Result<(), AxiomaticError> {
    let n = values.len();
    let valid: Vec<usize> = (0..n).filter(|i| values[*i].is_some()).collect();
    if valid.is_empty() {
        return Err(AxiomaticError::DegenerateInput(
            "no valid curvature estimate on the whole curve".into(),
        ));
    }
    if valid.len() == n {
        return Ok(());
    }
    for i in 0..n {
        if values[i].is_some() {
            continue;
        }
        // Nearest valid neighbors, searching cyclically when allowed.
        let prev = if closed {
            (1..n).map(|d| (d, (i + n - d) % n)).find(|(_, j)| values[*j].is_some())
        } else {
            (1..=i).map(|d| (d, i - d)).find(|(_, j)| values[*j].is_some())
        };
        let next = if closed {
            (1..n).map(|d| (d, (i + d) % n)).find(|(_, j)| values[*j].is_some())
        } else {
            (1..n - i).map(|d| (d, i + d)).find(|(_, j)| values[*j].is_some())
        };
        values[i] = Some(match (prev, next) {
            (Some((dp, jp)), Some((dn, jn))) => {
                let (vp, vn) = (values[jp].unwrap(), values[jn].unwrap());
                let t = dp as f64 / (dp + dn) as f64;
                vp + (vn - vp) * t
            }
            (Some((_, jp)), None) => values[jp].unwrap(),
            (None, Some((_, jn))) => values[jn].unwrap(),
            (None, None) => unreachable!("at least one valid value exists"),
        });
    }
    Ok(())
}
