//! Invariant signature construction from trained models, calibration against
//! analytic oracles, and signature comparison.
//!
//! A signature pairs each curve point with its invariant curvature and its
//! cumulative invariant arc-length from a reference point. Arc-length between
//! adjacent points comes from the difference of two section evaluations that
//! share all but one interior point.

use crate::curves::{neighborhood, normalize_sample, CurveError, PlanarCurve, PointSample};
use crate::groups::GroupKind;
use crate::net::{ModelTask, NetError, TrainedModel};
use crate::par;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum SignatureError {
    #[error("boundary: {0}")]
    Boundary(String),
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    #[error("comparison failed: {0}")]
    Comparison(String),
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("signature i/o failed for {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// One signature row: curve index, cumulative invariant arc-length, and
/// invariant curvature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignatureEntry {
    pub index: usize,
    pub s: f64,
    pub kappa: f64,
}

/// Ordered (s, kappa) sequence with reference-point and model metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signature {
    entries: Vec<SignatureEntry>,
    pub group: GroupKind,
    pub reference: usize,
    pub kappa_model: String,
    pub s_model: String,
}

impl Signature {
    pub fn from_entries(
        entries: Vec<(usize, f64, f64)>,
        group: GroupKind,
        reference: usize,
        kappa_model: &str,
        s_model: &str,
    ) -> Self {
        Signature {
            entries: entries
                .into_iter()
                .map(|(index, s, kappa)| SignatureEntry { index, s, kappa })
                .collect(),
            group,
            reference,
            kappa_model: kappa_model.into(),
            s_model: s_model.into(),
        }
    }

    pub fn entries(&self) -> &[SignatureEntry] {
        &self.entries
    }

    pub fn total_arclength(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| e.s)
    }

    /// (s, kappa) series for plotting and comparison.
    pub fn series(&self) -> Vec<(f64, f64)> {
        self.entries.iter().map(|e| (e.s, e.kappa)).collect()
    }

    /// (position, kappa) series: curvature against raw sample position
    /// instead of arc-length, the deliberately misaligned control.
    pub fn index_series(&self) -> Vec<(f64, f64)> {
        self.entries
            .iter()
            .enumerate()
            .map(|(pos, e)| (pos as f64, e.kappa))
            .collect()
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), SignatureError> {
        let mut text = String::from("index,s,kappa\n");
        for e in &self.entries {
            text.push_str(&format!("{},{},{}\n", e.index, e.s, e.kappa));
        }
        std::fs::write(path, text).map_err(|source| SignatureError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load_csv(path: &Path, group: GroupKind) -> Result<Self, SignatureError> {
        let text = std::fs::read_to_string(path).map_err(|source| SignatureError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut entries = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            if ln == 0 || line.trim().is_empty() {
                continue;
            }
            let bad = |what: &str| {
                SignatureError::Comparison(format!(
                    "{}: line {}: {what}",
                    path.display(),
                    ln + 1
                ))
            };
            let mut cols = line.split(',');
            let mut next = |name: &str| -> Result<f64, SignatureError> {
                cols.next()
                    .ok_or_else(|| bad(&format!("missing column {name}")))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| bad(&format!("column {name}: {e}")))
            };
            let index = next("index")? as usize;
            let s = next("s")?;
            let kappa = next("kappa")?;
            entries.push(SignatureEntry { index, s, kappa });
        }
        Ok(Signature {
            entries,
            group,
            reference: 0,
            kappa_model: String::new(),
            s_model: String::new(),
        })
    }
}

/// Estimates invariant curvature from a raw neighborhood window.
pub trait CurvatureEstimator: Sync {
    /// Points per side; windows have length `2 * half_width() + 1`.
    fn half_width(&self) -> usize;
    fn estimate(&self, sample: &PointSample) -> Result<f64, SignatureError>;
}

/// Estimates invariant arc-length of a raw section window.
pub trait ArcLengthEstimator: Sync {
    /// Points per section window.
    fn section_len(&self) -> usize;
    fn estimate(&self, sample: &PointSample) -> Result<f64, SignatureError>;
}

impl CurvatureEstimator for TrainedModel {
    fn half_width(&self) -> usize {
        self.meta.window
    }
    fn estimate(&self, sample: &PointSample) -> Result<f64, SignatureError> {
        if self.meta.task != ModelTask::Curvature {
            return Err(SignatureError::ModelMismatch(
                "arc-length model used as curvature estimator".into(),
            ));
        }
        Ok(self.eval_sample(sample)?)
    }
}

impl ArcLengthEstimator for TrainedModel {
    fn section_len(&self) -> usize {
        self.meta.window
    }
    fn estimate(&self, sample: &PointSample) -> Result<f64, SignatureError> {
        if self.meta.task != ModelTask::ArcLength {
            return Err(SignatureError::ModelMismatch(
                "curvature model used as arc-length estimator".into(),
            ));
        }
        Ok(self.eval_sample(sample)?)
    }
}

/// Closure-backed curvature estimator for tests and baselines.
pub struct FnCurvature<F> {
    pub half_width: usize,
    pub f: F,
}

impl<F: Fn(&PointSample) -> f64 + Sync> CurvatureEstimator for FnCurvature<F> {
    fn half_width(&self) -> usize {
        self.half_width
    }
    fn estimate(&self, sample: &PointSample) -> Result<f64, SignatureError> {
        Ok((self.f)(sample))
    }
}

/// Closure-backed arc-length estimator for tests and baselines.
pub struct FnArcLength<F> {
    pub section_len: usize,
    pub f: F,
}

impl<F: Fn(&PointSample) -> f64 + Sync> ArcLengthEstimator for FnArcLength<F> {
    fn section_len(&self) -> usize {
        self.section_len
    }
    fn estimate(&self, sample: &PointSample) -> Result<f64, SignatureError> {
        Ok((self.f)(sample))
    }
}

/// Consecutive window of `count` points starting at wrapped index `start`,
/// optionally excluding one wrapped index (the window is then drawn from
/// `count + 1` raw positions).
fn window_sample(
    curve: &PlanarCurve,
    start: isize,
    count: usize,
    skip: Option<isize>,
) -> PointSample {
    let span = count as isize + if skip.is_some() { 1 } else { 0 };
    let n = curve.len() as isize;
    let points = (0..span)
        .filter_map(|off| {
            let idx = start + off;
            if let Some(s) = skip {
                if (idx - s).rem_euclid(n) == 0 {
                    return None;
                }
            }
            Some(curve.point_wrapped(idx))
        })
        .collect();
    PointSample {
        points,
        kind: crate::curves::SampleKind::Section,
    }
}

/// Default excluded index for [`adjacent_arclength`]: the middle of the
/// extended window, fixed for determinism.
pub fn default_skip(i: usize, section_len: usize, curve_len: usize) -> usize {
    let start = i as isize - section_len as isize + 1;
    (start + section_len as isize / 2).rem_euclid(curve_len as isize) as usize
}

/// Invariant arc-length between adjacent points `i` and `i+1`.
///
/// Evaluates the model on two overlapping windows and differences them: the
/// window of `section_len` points ending at `i`, and the window ending at
/// `i+1` with the interior point `skip` left out so both windows have the
/// same length. Both windows are normalized before evaluation.
pub fn adjacent_arclength<M: ArcLengthEstimator>(
    model: &M,
    curve: &PlanarCurve,
    i: usize,
    skip: usize,
) -> Result<f64, SignatureError> {
    let n = curve.len();
    let len = model.section_len();
    if len < 3 {
        return Err(SignatureError::Boundary(
            "section windows need at least 3 points".into(),
        ));
    }
    if n < len + 2 {
        return Err(SignatureError::Boundary(format!(
            "curve of {n} points cannot host {len}+1 point windows"
        )));
    }
    let start = i as isize - len as isize + 1;
    if !curve.is_closed() && (start < 0 || i + 1 >= n) {
        return Err(SignatureError::Boundary(format!(
            "open curve window [{start}, {}] out of range",
            i + 1
        )));
    }
    // skip must be strictly inside the extended window (start, i+1).
    let skip_off = (skip as isize - start).rem_euclid(n as isize);
    if !(1..=len as isize - 1).contains(&skip_off) {
        return Err(SignatureError::Boundary(format!(
            "skip index {skip} not strictly inside the window of point {i}"
        )));
    }
    let upto_i = window_sample(curve, start, len, None);
    let upto_next = window_sample(curve, start, len, Some(start + skip_off));
    debug_assert_eq!(upto_next.len(), len);
    let a = model.estimate(&normalize_sample(&upto_i)?)?;
    let b = model.estimate(&normalize_sample(&upto_next)?)?;
    Ok(b - a)
}

/// Builds the signature of a closed curve: curvature from the neighborhood
/// model at every point, arc-length as the running sum of adjacent-point
/// increments from the reference point (s = 0 there). Per-point evaluations
/// run data-parallel; the prefix sum is a serial pass.
pub fn build_signature<K: CurvatureEstimator, S: ArcLengthEstimator>(
    curve: &PlanarCurve,
    kappa_model: &K,
    s_model: &S,
    reference: usize,
    group: GroupKind,
) -> Result<Signature, SignatureError> {
    let n = curve.len();
    if !curve.is_closed() {
        return Err(SignatureError::Boundary(
            "signatures are built on closed curves".into(),
        ));
    }
    if reference >= n {
        return Err(SignatureError::Boundary(format!(
            "reference {reference} out of range for {n} points"
        )));
    }
    let hw = kappa_model.half_width();
    if 2 * hw + 1 > n {
        return Err(SignatureError::Boundary(format!(
            "curve of {n} points cannot host {}-point neighborhoods",
            2 * hw + 1
        )));
    }
    let s_len = s_model.section_len();

    let kappas = par::map_indices(n, |t| {
        let raw = (reference + t) % n;
        let sample = neighborhood(curve, raw, hw)?;
        kappa_model.estimate(&sample)
    });
    let increments = par::map_indices(n - 1, |t| {
        let raw = (reference + t) % n;
        adjacent_arclength(s_model, curve, raw, default_skip(raw, s_len, n))
    });

    let mut entries = Vec::with_capacity(n);
    let mut acc = 0.0;
    for (t, kappa) in kappas.into_iter().enumerate() {
        let raw = (reference + t) % n;
        if t > 0 {
            acc += increments[t - 1]
                .as_ref()
                .map_err(|e| SignatureError::Boundary(e.to_string()))?;
        }
        entries.push((raw, acc, kappa?));
    }
    Ok(Signature::from_entries(
        entries,
        group,
        reference,
        "model",
        "model",
    ))
}

/// Least-squares calibration of a model against an oracle.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Calibration {
    /// Slope of the through-origin fit `model = scale * oracle`.
    pub scale: f64,
    /// Pearson correlation between model outputs and oracle values.
    pub correlation: f64,
    pub count: usize,
}

/// Fits the linear constant between model outputs and oracle values over a
/// set of sections, returning the slope and the fit correlation.
pub fn calibrate_scale<M: ArcLengthEstimator>(
    model: &M,
    sections: &[PointSample],
    oracle: impl Fn(&PointSample) -> f64,
) -> Result<Calibration, SignatureError> {
    if sections.len() < 10 {
        return Err(SignatureError::Calibration(format!(
            "need at least 10 sections, got {}",
            sections.len()
        )));
    }
    let mut pairs = Vec::with_capacity(sections.len());
    for s in sections {
        pairs.push((model.estimate(s)?, oracle(s)));
    }
    let n = pairs.len() as f64;
    let mean_o: f64 = pairs.iter().map(|(_, o)| o).sum::<f64>() / n;
    let var_o: f64 = pairs
        .iter()
        .map(|(_, o)| (o - mean_o) * (o - mean_o))
        .sum::<f64>()
        / n;
    if var_o <= 1e-18 * mean_o.abs().max(1.0) {
        return Err(SignatureError::Calibration(
            "oracle values span a degenerate range".into(),
        ));
    }
    let num: f64 = pairs.iter().map(|(m, o)| m * o).sum();
    let den: f64 = pairs.iter().map(|(_, o)| o * o).sum();
    let scale = num / den;

    let mean_m: f64 = pairs.iter().map(|(m, _)| m).sum::<f64>() / n;
    let var_m: f64 = pairs
        .iter()
        .map(|(m, _)| (m - mean_m) * (m - mean_m))
        .sum::<f64>()
        / n;
    let cov: f64 = pairs
        .iter()
        .map(|(m, o)| (m - mean_m) * (o - mean_o))
        .sum::<f64>()
        / n;
    let correlation = if var_m <= 0.0 {
        0.0
    } else {
        cov / (var_m.sqrt() * var_o.sqrt())
    };
    Ok(Calibration {
        scale,
        correlation,
        count: pairs.len(),
    })
}

const DISCREPANCY_GRID: usize = 512;

/// Mean absolute difference between two series resampled onto a uniform
/// 512-point grid over the shared x-range, normalized by the interquartile
/// range of the first series.
pub fn series_discrepancy(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64, SignatureError> {
    let hi_a = a.last().map(|p| p.0).unwrap_or(0.0);
    let hi_b = b.last().map(|p| p.0).unwrap_or(0.0);
    if a.len() < 2 || b.len() < 2 || hi_a <= 0.0 || hi_b <= 0.0 {
        return Err(SignatureError::Comparison(
            "series need positive extent from a common origin".into(),
        ));
    }
    let overlap = hi_a.min(hi_b);
    let ya = resample(a, overlap);
    let yb = resample(b, overlap);
    let mean_abs: f64 = ya
        .iter()
        .zip(yb.iter())
        .map(|(p, q)| (p - q).abs())
        .sum::<f64>()
        / DISCREPANCY_GRID as f64;
    if mean_abs == 0.0 {
        return Ok(0.0);
    }
    let iqr = interquartile_range(&ya);
    if iqr <= 0.0 {
        return Err(SignatureError::Comparison(
            "first series has zero interquartile range".into(),
        ));
    }
    Ok(mean_abs / iqr)
}

/// Discrepancy between two signatures over their overlapping arc-length
/// range; both are already rebased to s = 0 at their reference points.
pub fn signature_discrepancy(sig1: &Signature, sig2: &Signature) -> Result<f64, SignatureError> {
    series_discrepancy(&sig1.series(), &sig2.series())
}

/// Piecewise-linear resampling of an (x, y) series onto the uniform grid
/// over [0, hi]. Points with locally decreasing x are passed over by the
/// forward scan.
fn resample(series: &[(f64, f64)], hi: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(DISCREPANCY_GRID);
    let mut seg = 0usize;
    for k in 0..DISCREPANCY_GRID {
        let t = hi * k as f64 / (DISCREPANCY_GRID - 1) as f64;
        while seg + 2 < series.len() && series[seg + 1].0 < t {
            seg += 1;
        }
        let (x0, y0) = series[seg];
        let (x1, y1) = series[seg + 1];
        let y = if x1 > x0 {
            let w = ((t - x0) / (x1 - x0)).clamp(0.0, 1.0);
            y0 + (y1 - y0) * w
        } else {
            y0
        };
        out.push(y);
    }
    out
}

/// Interquartile range with linearly interpolated quantiles.
fn interquartile_range(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    quantile(&sorted, 0.75) - quantile(&sorted, 0.25)
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Per-point curvature against raw sample position for a pair of curves: the
/// misaligned control next to the arc-length parametrization.
pub fn index_parametrized<K: CurvatureEstimator>(
    curves: (&PlanarCurve, &PlanarCurve),
    kappa_model: &K,
) -> Result<(Vec<(f64, f64)>, Vec<(f64, f64)>), SignatureError> {
    let one = index_series_for(curves.0, kappa_model)?;
    let two = index_series_for(curves.1, kappa_model)?;
    Ok((one, two))
}

fn index_series_for<K: CurvatureEstimator>(
    curve: &PlanarCurve,
    kappa_model: &K,
) -> Result<Vec<(f64, f64)>, SignatureError> {
    let hw = kappa_model.half_width();
    let results = par::map_indices(curve.len(), |i| {
        let sample = neighborhood(curve, i, hw)?;
        kappa_model.estimate(&sample)
    });
    results
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map(|k| (i as f64, k)))
        .collect()
}
