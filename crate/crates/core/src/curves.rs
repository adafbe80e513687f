//! Discrete planar curves, non-uniform down-sampling, window extraction and
//! canonical sample normalization.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum CurveError {
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("window out of range: center {center}, half width {half_width}, curve length {len}")]
    OutOfRange {
        center: usize,
        half_width: usize,
        len: usize,
    },
    #[error("empty section: i == j == {0}")]
    EmptySection(usize),
    #[error("degenerate sample: first point coincides with midpoint")]
    DegenerateSample,
}

/// A point in the plane. Coordinates are abstract planar units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(&self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the cross product of two plane vectors.
    pub fn cross(&self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(&self, other: Point2) -> f64 {
        (*self - other).norm()
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

/// An ordered point sequence with a closed/open flag.
///
/// Invariants: at least 3 points, no two consecutive points identical, and
/// for closed curves the wraparound is implicit (first point != last point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarCurve {
    points: Vec<Point2>,
    closed: bool,
}

impl PlanarCurve {
    pub fn new(points: Vec<Point2>, closed: bool) -> Result<Self, CurveError> {
        if points.len() < 3 {
            return Err(CurveError::InvalidSize(format!(
                "curve needs at least 3 points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(CurveError::InvalidParameter(
                "curve coordinates must be finite".into(),
            ));
        }
        for w in points.windows(2) {
            if w[0] == w[1] {
                return Err(CurveError::InvalidParameter(
                    "consecutive curve points must be distinct".into(),
                ));
            }
        }
        if closed && points.first() == points.last() {
            return Err(CurveError::InvalidParameter(
                "closed curve must not repeat its first point".into(),
            ));
        }
        Ok(PlanarCurve { points, closed })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Point at `index` modulo the curve length (wraparound for closed curves).
    pub fn point_wrapped(&self, index: isize) -> Point2 {
        let n = self.points.len() as isize;
        let i = index.rem_euclid(n) as usize;
        self.points[i]
    }

    pub fn polyline_length(&self) -> f64 {
        polyline_length(&self.points, self.closed)
    }

    /// Signed area by the shoelace formula; positive for counter-clockwise
    /// traversal. Meaningful for closed curves.
    pub fn signed_area(&self) -> f64 {
        let mut acc = 0.0;
        let n = self.points.len();
        for i in 0..n {
            let p = self.points[i];
            let q = self.points[(i + 1) % n];
            acc += p.cross(q);
        }
        acc / 2.0
    }
}

/// A sampling probability mass function over the points of one curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPmf {
    weights: Vec<f64>,
}

impl SamplingPmf {
    /// Builds a pmf from nonnegative weights, normalizing to unit sum.
    pub fn new(mut weights: Vec<f64>) -> Result<Self, CurveError> {
        if weights.len() < 3 {
            return Err(CurveError::InvalidSize(format!(
                "pmf needs at least 3 weights, got {}",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(CurveError::InvalidParameter(
                "pmf weights must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(CurveError::InvalidParameter(
                "pmf weights must not all be zero".into(),
            ));
        }
        for w in &mut weights {
            *w /= sum;
        }
        Ok(SamplingPmf { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Kind of a point window fed to an estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleKind {
    /// Odd-length window centered on a curve point (curvature input).
    Neighborhood,
    /// Curve section between two anchor points (arc-length input).
    Section,
}

/// A fixed-length point window extracted from a curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSample {
    pub points: Vec<Point2>,
    pub kind: SampleKind,
}

impl PointSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The midpoint of a sample is its middle-index element, not the centroid.
    pub fn mid_index(&self) -> usize {
        self.points.len() / 2
    }

    pub fn polyline_length(&self) -> f64 {
        polyline_length(&self.points, false)
    }

    /// Flattens to `[x0, y0, x1, y1, ...]` for network input.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.points.len());
        for p in &self.points {
            out.push(p.x);
            out.push(p.y);
        }
        out
    }
}

/// Draws a random non-uniform pmf over `n` points: weights u_i^concentration
/// normalized to unit sum, with u_i i.i.d. uniform on (0,1). Larger
/// concentration gives a spikier mass function; the limit concentration -> 0
/// is uniform.
pub fn random_pmf<R: Rng + ?Sized>(
    n: usize,
    concentration: f64,
    rng: &mut R,
) -> Result<SamplingPmf, CurveError> {
    if n < 3 {
        return Err(CurveError::InvalidSize(format!(
            "pmf needs at least 3 points, got {n}"
        )));
    }
    if !(concentration > 0.0) || !concentration.is_finite() {
        return Err(CurveError::InvalidParameter(format!(
            "concentration must be positive and finite, got {concentration}"
        )));
    }
    let weights: Vec<f64> = (0..n)
        .map(|_| rng.gen::<f64>().powf(concentration))
        .collect();
    SamplingPmf::new(weights)
}

/// Selects `keep` indices out of `0..weights.len()` by weighted sampling
/// without replacement, always including `required`, and returns them in
/// increasing order.
///
/// Uses exponential race keys (one Exp(1)/w_i draw per index, smallest keys
/// win), which is equivalent in distribution to sequential draws with weight
/// renormalization.
pub(crate) fn sample_indices<R: Rng + ?Sized>(
    weights: &[f64],
    keep: usize,
    required: &[usize],
    rng: &mut R,
) -> Result<Vec<usize>, CurveError> {
    let n = weights.len();
    if keep > n {
        return Err(CurveError::InvalidSize(format!(
            "cannot keep {keep} of {n} points"
        )));
    }
    let mut is_required = vec![false; n];
    for &i in required {
        if i >= n {
            return Err(CurveError::InvalidParameter(format!(
                "required index {i} out of range (n = {n})"
            )));
        }
        is_required[i] = true;
    }
    let required_count = is_required.iter().filter(|r| **r).count();
    if required_count > keep {
        return Err(CurveError::InvalidSize(format!(
            "{required_count} required indices exceed keep = {keep}"
        )));
    }

    let mut keyed: Vec<(f64, usize)> = (0..n)
        .filter(|i| !is_required[*i])
        .map(|i| {
            let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
            let key = if weights[i] > 0.0 {
                -u.ln() / weights[i]
            } else {
                f64::INFINITY
            };
            (key, i)
        })
        .collect();
    let free = keep - required_count;
    if free > 0 && free < keyed.len() {
        keyed.select_nth_unstable_by(free - 1, |a, b| {
            a.partial_cmp(b).expect("race keys are never NaN")
        });
    }
    let mut chosen: Vec<usize> = keyed.iter().take(free).map(|(_, i)| *i).collect();
    chosen.extend((0..n).filter(|i| is_required[*i]));
    chosen.sort_unstable();
    Ok(chosen)
}

pub(crate) fn downsample_points<R: Rng + ?Sized>(
    points: &[Point2],
    pmf: &SamplingPmf,
    keep: usize,
    required: &[usize],
    rng: &mut R,
) -> Result<Vec<Point2>, CurveError> {
    if pmf.len() != points.len() {
        return Err(CurveError::InvalidSize(format!(
            "pmf length {} does not match point count {}",
            pmf.len(),
            points.len()
        )));
    }
    let idx = sample_indices(pmf.weights(), keep, required, rng)?;
    Ok(idx.into_iter().map(|i| points[i]).collect())
}

/// Down-samples a curve to `keep` points by weighted sampling without
/// replacement according to `pmf`, forcing retention of every index in
/// `required`. The output is an order-preserving subsequence of the input.
pub fn downsample<R: Rng + ?Sized>(
    curve: &PlanarCurve,
    pmf: &SamplingPmf,
    keep: usize,
    required: &[usize],
    rng: &mut R,
) -> Result<PlanarCurve, CurveError> {
    let points = downsample_points(curve.points(), pmf, keep, required, rng)?;
    PlanarCurve::new(points, curve.is_closed())
}

/// Extracts the window of `2 * half_width + 1` consecutive points centered on
/// `center`, wrapping around for closed curves.
pub fn neighborhood(
    curve: &PlanarCurve,
    center: usize,
    half_width: usize,
) -> Result<PointSample, CurveError> {
    let n = curve.len();
    let window = 2 * half_width + 1;
    if center >= n || window > n {
        return Err(CurveError::OutOfRange {
            center,
            half_width,
            len: n,
        });
    }
    if !curve.is_closed() && (center < half_width || center + half_width >= n) {
        return Err(CurveError::OutOfRange {
            center,
            half_width,
            len: n,
        });
    }
    let c = center as isize;
    let hw = half_width as isize;
    let points = (c - hw..=c + hw).map(|i| curve.point_wrapped(i)).collect();
    Ok(PointSample {
        points,
        kind: SampleKind::Neighborhood,
    })
}

/// Extracts all curve points from index `i` to index `j` inclusive, in
/// traversal order, wrapping around for closed curves. Open curves require
/// `i < j`.
pub fn section(curve: &PlanarCurve, i: usize, j: usize) -> Result<PointSample, CurveError> {
    let n = curve.len();
    if i >= n || j >= n {
        return Err(CurveError::OutOfRange {
            center: i.max(j),
            half_width: 0,
            len: n,
        });
    }
    if i == j {
        return Err(CurveError::EmptySection(i));
    }
    if !curve.is_closed() && i > j {
        return Err(CurveError::OutOfRange {
            center: i,
            half_width: 0,
            len: n,
        });
    }
    let count = if j > i { j - i + 1 } else { n - i + j + 1 };
    let points = (0..count)
        .map(|k| curve.point_wrapped((i + k) as isize))
        .collect();
    Ok(PointSample {
        points,
        kind: SampleKind::Section,
    })
}

/// Canonically normalizes a sample by the rigid motion that moves its
/// midpoint to the origin and aligns the ray from the midpoint through the
/// first point with the positive x-axis.
///
/// This quotients out exactly the translation and rotation ambiguity: for any
/// g in SE(2), `normalize_sample(g . s) == normalize_sample(s)` up to
/// floating-point roundoff.
pub fn normalize_sample(sample: &PointSample) -> Result<PointSample, CurveError> {
    if sample.len() < 2 {
        return Err(CurveError::InvalidSize(
            "sample needs at least 2 points".into(),
        ));
    }
    let mid = sample.points[sample.mid_index()];
    let first = sample.points[0] - mid;
    let r = first.norm();
    if r == 0.0 {
        return Err(CurveError::DegenerateSample);
    }
    // Rotation by -theta where theta is the heading of the first point.
    let (cos_t, sin_t) = (first.x / r, first.y / r);
    let points = sample
        .points
        .iter()
        .map(|p| {
            let d = *p - mid;
            Point2::new(cos_t * d.x + sin_t * d.y, -sin_t * d.x + cos_t * d.y)
        })
        .collect();
    Ok(PointSample {
        points,
        kind: sample.kind,
    })
}

/// Sum of consecutive Euclidean distances, plus the closing edge when
/// `closed` is set.
pub fn polyline_length(points: &[Point2], closed: bool) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let mut acc: f64 = points.windows(2).map(|w| w[0].dist(w[1])).sum();
    if closed {
        acc += points[points.len() - 1].dist(points[0]);
    }
    acc
}

/// Reverses the point order, converting clockwise traversal to
/// counter-clockwise and vice versa. Callers re-normalize before feeding the
/// result to a network.
pub fn flip_sample(sample: &PointSample) -> PointSample {
    let mut points = sample.points.clone();
    points.reverse();
    PointSample {
        points,
        kind: sample.kind,
    }
}
