//! Self-supervised training: on-the-fly curvature and arc-length tuplet
//! generation, the two loss functions, and the training loops.
//!
//! Batches are generated and differentiated data-parallel over batch slots;
//! gradients are folded in slot order and applied by a single serial
//! optimizer step, so results are bitwise reproducible for a given master
//! seed at any worker count.

use crate::curves::{
    flip_sample, normalize_sample, random_pmf, sample_indices, CurveError, PlanarCurve,
    PointSample, SampleKind,
};
use crate::groups::{sample_group_element, GroupError, GroupKind, SamplerBounds};
use crate::net::{
    mlp_backward, mlp_forward_cached, mlp_init, Activation, AdamConfig, MlpParams, MlpSpec,
    ModelMeta, ModelTask, NetError, OptimizerState, TrainedModel,
};
use crate::par;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum TrainingError {
    /// The drawn curve cannot host the requested tuplet; callers skip it.
    #[error("curve too short: {0}")]
    CurveTooShort(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("training diverged at step {step}: {reason}")]
    Diverged { step: u64, reason: String },
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("log i/o failed for {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Curvature tuplet generation parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvatureConfig {
    pub group: GroupKind,
    /// Points per side of a neighborhood; windows have 2*half_width+1 points.
    pub half_width: usize,
    /// Keep-ratio interval for non-uniform down-sampling.
    pub keep_ratio: (f64, f64),
    /// Non-flipped negatives per tuplet; the flipped anchor is appended.
    pub num_negatives: usize,
    /// Raw-index offset magnitude interval for negative center points.
    pub offset_range: (usize, usize),
    /// Concentration of the sampling pmf.
    pub concentration: f64,
    pub bounds: SamplerBounds,
}

impl CurvatureConfig {
    pub fn for_group(group: GroupKind) -> Self {
        CurvatureConfig {
            group,
            half_width: 6,
            keep_ratio: (0.3, 0.9),
            num_negatives: 4,
            offset_range: (5, 30),
            concentration: 1.0,
            bounds: SamplerBounds::default(),
        }
    }

    /// Flattened network input width for this window size.
    pub fn input_dim(&self) -> usize {
        2 * (2 * self.half_width + 1)
    }

    fn validate(&self) -> Result<(), TrainingError> {
        if self.half_width < 2 {
            return Err(TrainingError::Configuration(
                "half_width must be at least 2".into(),
            ));
        }
        if self.num_negatives < 1 {
            return Err(TrainingError::Configuration(
                "need at least one non-flipped negative".into(),
            ));
        }
        let (lo, hi) = self.keep_ratio;
        if !(0.0 < lo && lo <= hi && hi <= 1.0) {
            return Err(TrainingError::Configuration(format!(
                "keep_ratio interval [{lo}, {hi}] must lie inside (0, 1]"
            )));
        }
        if self.offset_range.0 == 0 || self.offset_range.0 > self.offset_range.1 {
            return Err(TrainingError::Configuration(
                "offset interval must exclude zero and be ordered".into(),
            ));
        }
        if !(self.concentration > 0.0) {
            return Err(TrainingError::Configuration(
                "pmf concentration must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Anchor, positive and negatives; the last negative is the flipped anchor.
/// All samples are normalized windows of length 2*half_width+1.
#[derive(Debug, Clone)]
pub struct CurvatureTuplet {
    pub anchor: PointSample,
    pub positive: PointSample,
    pub negatives: Vec<PointSample>,
}

impl CurvatureTuplet {
    /// anchor, positive, then negatives, in loss order.
    pub fn samples(&self) -> impl Iterator<Item = &PointSample> {
        std::iter::once(&self.anchor)
            .chain(std::iter::once(&self.positive))
            .chain(self.negatives.iter())
    }
}

/// Arc-length tuplet generation parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArcLengthConfig {
    pub group: GroupKind,
    /// Number of anchor points per tuplet.
    pub num_anchors: usize,
    /// Points per section sample (anchors included).
    pub section_len: usize,
    /// Raw-point gap interval between consecutive anchors.
    pub gap_range: (usize, usize),
    pub concentration: f64,
    pub bounds: SamplerBounds,
}

impl ArcLengthConfig {
    pub fn for_group(group: GroupKind) -> Self {
        ArcLengthConfig {
            group,
            num_anchors: 5,
            section_len: 40,
            gap_range: (40, 120),
            concentration: 1.0,
            bounds: SamplerBounds::default(),
        }
    }

    pub fn input_dim(&self) -> usize {
        2 * self.section_len
    }

    fn validate(&self) -> Result<(), TrainingError> {
        if self.num_anchors < 3 {
            return Err(TrainingError::Configuration(
                "need at least 3 anchors".into(),
            ));
        }
        if self.section_len < 4 {
            return Err(TrainingError::Configuration(
                "sections need at least 4 points".into(),
            ));
        }
        if self.gap_range.0 + 1 < self.section_len {
            return Err(TrainingError::Configuration(format!(
                "minimum gap {} leaves sections under {} raw points",
                self.gap_range.0, self.section_len
            )));
        }
        if self.gap_range.0 > self.gap_range.1 {
            return Err(TrainingError::Configuration(
                "gap interval must be ordered".into(),
            ));
        }
        if !(self.concentration > 0.0) {
            return Err(TrainingError::Configuration(
                "pmf concentration must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Flat index of the anchor pair (i, j), 1-based with i < j, in the order
/// (1,2), (1,3), ..., (1,m), (2,3), ...
pub fn pair_index(m: usize, i: usize, j: usize) -> usize {
    debug_assert!(1 <= i && i < j && j <= m);
    (i - 1) * m - (i - 1) * i / 2 + (j - i - 1)
}

/// Number of anchor pairs for `m` anchors.
pub fn pair_count(m: usize) -> usize {
    m * (m - 1) / 2
}

/// All pairwise section samples of one tuplet in [`pair_index`] order.
/// Adjacent pairs (the A collection) share one group element, non-adjacent
/// pairs (the B collection) another; every sample has exactly `section_len`
/// points including both anchor images, and is normalized.
#[derive(Debug, Clone)]
pub struct ArcLengthTuplet {
    pub num_anchors: usize,
    pub sections: Vec<PointSample>,
}

impl ArcLengthTuplet {
    pub fn adjacent(&self) -> impl Iterator<Item = &PointSample> {
        let m = self.num_anchors;
        (1..m).map(move |i| &self.sections[pair_index(m, i, i + 1)])
    }

    pub fn skipping(&self) -> impl Iterator<Item = ((usize, usize), &PointSample)> {
        let m = self.num_anchors;
        (1..=m.saturating_sub(2))
            .flat_map(move |i| (i + 2..=m).map(move |j| ((i, j), &self.sections[pair_index(m, i, j)])))
    }
}

fn wrap(idx: isize, n: usize) -> usize {
    idx.rem_euclid(n as isize) as usize
}

/// Transformed, down-sampled, normalized neighborhood of raw point `center`.
fn curvature_element<R: Rng + ?Sized>(
    curve: &PlanarCurve,
    center: usize,
    cfg: &CurvatureConfig,
    rng: &mut R,
) -> Result<PointSample, TrainingError> {
    let n = curve.len();
    let window = 2 * cfg.half_width + 1;
    let ratio = rng.gen_range(cfg.keep_ratio.0..=cfg.keep_ratio.1);
    let keep = ((n as f64 * ratio).round() as usize).clamp(window, n);
    let pmf = random_pmf(n, cfg.concentration, rng)?;
    let kept = sample_indices(pmf.weights(), keep, &[center], rng)?;
    let pos = kept.binary_search(&center).expect("center is forced");
    if !curve.is_closed() && (pos < cfg.half_width || pos + cfg.half_width >= kept.len()) {
        return Err(TrainingError::CurveTooShort(format!(
            "window around point {center} leaves the open curve"
        )));
    }
    let g = sample_group_element(cfg.group, &cfg.bounds, rng)?;
    let hw = cfg.half_width as isize;
    let points = (-hw..=hw)
        .map(|off| {
            let k = kept[wrap(pos as isize + off, kept.len())];
            g.apply_point(curve.points()[k])
        })
        .collect();
    let sample = PointSample {
        points,
        kind: SampleKind::Neighborhood,
    };
    normalize_sample(&sample)
        .map_err(|_| TrainingError::CurveTooShort(format!("degenerate window around {center}")))
}

/// Generates one curvature training tuplet: anchor and positive from the
/// same curve point under independent transformations and down-samplings,
/// negatives from nearby points, and the flipped anchor as the final
/// negative.
pub fn make_curvature_tuplet<R: Rng + ?Sized>(
    curve: &PlanarCurve,
    cfg: &CurvatureConfig,
    rng: &mut R,
) -> Result<CurvatureTuplet, TrainingError> {
    cfg.validate()?;
    let n = curve.len();
    let window = 2 * cfg.half_width + 1;
    let min_len = (window as f64 / cfg.keep_ratio.0).ceil() as usize + 1;
    if n < min_len.max(window + 2 * cfg.offset_range.1 + 1) {
        return Err(TrainingError::CurveTooShort(format!(
            "{n} points cannot host {window}-point windows at keep ratio {}",
            cfg.keep_ratio.0
        )));
    }
    let center = rng.gen_range(0..n);
    let anchor = curvature_element(curve, center, cfg, rng)?;
    let positive = curvature_element(curve, center, cfg, rng)?;
    let mut negatives = Vec::with_capacity(cfg.num_negatives + 1);
    for _ in 0..cfg.num_negatives {
        let magnitude = rng.gen_range(cfg.offset_range.0..=cfg.offset_range.1) as isize;
        let offset = if rng.gen::<bool>() { magnitude } else { -magnitude };
        let neighbor = wrap(center as isize + offset, n);
        negatives.push(curvature_element(curve, neighbor, cfg, rng)?);
    }
    let flipped = normalize_sample(&flip_sample(&anchor))
        .map_err(|_| TrainingError::CurveTooShort("anchor degenerates under flipping".into()))?;
    negatives.push(flipped);
    Ok(CurvatureTuplet {
        anchor,
        positive,
        negatives,
    })
}

/// Draws `num_anchors` consecutive anchor indices with random gaps; the total
/// span must fit the curve.
pub fn draw_anchors<R: Rng + ?Sized>(
    curve: &PlanarCurve,
    cfg: &ArcLengthConfig,
    rng: &mut R,
) -> Result<Vec<usize>, TrainingError> {
    cfg.validate()?;
    let n = curve.len();
    for _ in 0..16 {
        let gaps: Vec<usize> = (1..cfg.num_anchors)
            .map(|_| rng.gen_range(cfg.gap_range.0..=cfg.gap_range.1))
            .collect();
        let span: usize = gaps.iter().sum();
        if span + 1 > n {
            continue;
        }
        let start = if curve.is_closed() {
            rng.gen_range(0..n)
        } else {
            rng.gen_range(0..n - span)
        };
        let mut anchors = vec![start];
        for g in gaps {
            let next = wrap((*anchors.last().unwrap() + g) as isize, n);
            anchors.push(next);
        }
        return Ok(anchors);
    }
    Err(TrainingError::CurveTooShort(format!(
        "{n} points cannot host {} anchors with gaps in {:?}",
        cfg.num_anchors, cfg.gap_range
    )))
}

/// Raw (un-sampled, untransformed) curve sections between every anchor pair,
/// in [`pair_index`] order. Chord lengths of adjacent raw sections add up
/// exactly to the chord length of the spanned section.
pub fn raw_sections(curve: &PlanarCurve, anchors: &[usize]) -> Vec<PointSample> {
    let m = anchors.len();
    let n = curve.len();
    let mut out = Vec::with_capacity(pair_count(m));
    for i in 0..m {
        for j in i + 1..m {
            let from = anchors[i] as isize;
            let count = wrap(anchors[j] as isize - from, n) + 1;
            let points = (0..count as isize)
                .map(|off| curve.point_wrapped(from + off))
                .collect();
            out.push(PointSample {
                points,
                kind: SampleKind::Section,
            });
        }
    }
    out
}

/// Generates one arc-length training tuplet: anchors with random gaps, each
/// pairwise section down-sampled to `section_len` points with both endpoints
/// forced, adjacent sections under one group element and skipping sections
/// under another, all normalized.
pub fn make_arclength_tuplet<R: Rng + ?Sized>(
    curve: &PlanarCurve,
    cfg: &ArcLengthConfig,
    rng: &mut R,
) -> Result<ArcLengthTuplet, TrainingError> {
    let anchors = draw_anchors(curve, cfg, rng)?;
    let raw = raw_sections(curve, &anchors);
    let g_adjacent = sample_group_element(cfg.group, &cfg.bounds, rng)?;
    let g_skipping = sample_group_element(cfg.group, &cfg.bounds, rng)?;
    let m = anchors.len();
    let mut sections = Vec::with_capacity(raw.len());
    for i in 1..=m - 1 {
        for j in i + 1..=m {
            let section = &raw[pair_index(m, i, j)];
            if section.len() < cfg.section_len {
                return Err(TrainingError::CurveTooShort(format!(
                    "section ({i}, {j}) has {} raw points, need {}",
                    section.len(),
                    cfg.section_len
                )));
            }
            let pmf = random_pmf(section.len(), cfg.concentration, rng)?;
            let kept = sample_indices(
                pmf.weights(),
                cfg.section_len,
                &[0, section.len() - 1],
                rng,
            )?;
            let g = if j - i == 1 { &g_adjacent } else { &g_skipping };
            let points = kept
                .iter()
                .map(|k| g.apply_point(section.points[*k]))
                .collect();
            let sample = PointSample {
                points,
                kind: SampleKind::Section,
            };
            sections.push(normalize_sample(&sample).map_err(|_| {
                TrainingError::CurveTooShort(format!("section ({i}, {j}) degenerates"))
            })?);
        }
    }
    Ok(ArcLengthTuplet {
        num_anchors: m,
        sections,
    })
}

fn signum_or_zero(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum()
    }
}

/// Tuplet loss over curvature outputs:
/// log(1 + sum_i exp(|k_a - k_p| - |k_a - k_n_i|)), computed in overflow-safe
/// log-sum-exp form.
pub fn curvature_tuplet_loss(kappa_a: f64, kappa_p: f64, kappa_n: &[f64]) -> f64 {
    curvature_tuplet_loss_grad(kappa_a, kappa_p, kappa_n).0
}

/// Loss plus partial derivatives with respect to every head output:
/// returns (loss, d/d kappa_a, d/d kappa_p, d/d kappa_n[i]).
pub fn curvature_tuplet_loss_grad(
    kappa_a: f64,
    kappa_p: f64,
    kappa_n: &[f64],
) -> (f64, f64, f64, Vec<f64>) {
    let pos_dist = (kappa_a - kappa_p).abs();
    let exponents: Vec<f64> = kappa_n
        .iter()
        .map(|kn| pos_dist - (kappa_a - kn).abs())
        .collect();
    let peak = exponents.iter().cloned().fold(0.0f64, f64::max);
    let scaled: Vec<f64> = exponents.iter().map(|x| (x - peak).exp()).collect();
    let denom = (-peak).exp() + scaled.iter().sum::<f64>();
    let loss = peak + denom.ln();

    let sign_p = signum_or_zero(kappa_a - kappa_p);
    let weights: Vec<f64> = scaled.iter().map(|e| e / denom).collect();
    let weight_sum: f64 = weights.iter().sum();
    let mut grad_a = sign_p * weight_sum;
    let mut grad_n = Vec::with_capacity(kappa_n.len());
    for (kn, w) in kappa_n.iter().zip(weights.iter()) {
        let sign_n = signum_or_zero(kappa_a - kn);
        grad_a -= sign_n * w;
        grad_n.push(sign_n * w);
    }
    let grad_p = -sign_p * weight_sum;
    (loss, grad_a, grad_p, grad_n)
}

/// Arc-length loss over the flat [`pair_index`]-ordered section outputs:
/// additivity residuals of every skipping section against its chain of
/// adjacent sections, plus exponential monotonicity penalties.
pub fn arclength_loss(values: &[f64], num_anchors: usize) -> f64 {
    arclength_loss_grad(values, num_anchors).0
}

/// Loss plus partial derivatives with respect to every section output.
pub fn arclength_loss_grad(values: &[f64], num_anchors: usize) -> (f64, Vec<f64>) {
    let m = num_anchors;
    debug_assert_eq!(values.len(), pair_count(m));
    let mut loss = 0.0;
    let mut grad = vec![0.0; values.len()];
    for i in 1..=m - 2 {
        for j in i + 2..=m {
            let mut chain = 0.0;
            for k in i..j {
                chain += values[pair_index(m, k, k + 1)];
            }
            let residual = values[pair_index(m, i, j)] - chain;
            loss += residual.abs();
            let sign = signum_or_zero(residual);
            grad[pair_index(m, i, j)] += sign;
            for k in i..j {
                grad[pair_index(m, k, k + 1)] -= sign;
            }
        }
        let margin = values[pair_index(m, i, i + 1)] - values[pair_index(m, i, i + 2)];
        let e = margin.exp();
        loss += e;
        grad[pair_index(m, i, i + 1)] += e;
        grad[pair_index(m, i, i + 2)] -= e;
    }
    (loss, grad)
}

fn assert_normalized(sample: &PointSample) {
    debug_assert!(
        sample.points[sample.mid_index()].norm() <= 1e-9,
        "sample midpoint off origin"
    );
    debug_assert!(
        sample.points[0].y.abs() <= 1e-9 && sample.points[0].x >= 0.0,
        "first point off the nonnegative x axis"
    );
}

/// Shared-weight network plus optimizer state; one instance per training run.
pub struct Trainer {
    pub spec: MlpSpec,
    pub params: MlpParams,
    optimizer: OptimizerState,
}

impl Trainer {
    pub fn new(spec: MlpSpec, params: MlpParams, adam: AdamConfig) -> Self {
        let optimizer = OptimizerState::new(adam, &params);
        Trainer {
            spec,
            params,
            optimizer,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.optimizer.step
    }

    /// One optimizer step on a batch of curvature tuplets; returns the mean
    /// tuplet loss. Forward/backward passes run data-parallel per tuplet on
    /// frozen parameters; gradients fold in batch order.
    pub fn step_curvature(&mut self, batch: &[CurvatureTuplet]) -> Result<f64, TrainingError> {
        if batch.is_empty() {
            return Err(TrainingError::Configuration("empty batch".into()));
        }
        let inv_batch = 1.0 / batch.len() as f64;
        let spec = &self.spec;
        let params = &self.params;
        let results = par::map_slice(batch, |tuplet| -> Result<(f64, MlpParams), NetError> {
            for s in tuplet.samples() {
                assert_normalized(s);
            }
            let caches = tuplet
                .samples()
                .map(|s| mlp_forward_cached(spec, params, &s.flatten()))
                .collect::<Result<Vec<_>, _>>()?;
            let outputs: Vec<f64> = caches.iter().map(|c| c.output()).collect();
            let (loss, g_a, g_p, g_n) =
                curvature_tuplet_loss_grad(outputs[0], outputs[1], &outputs[2..]);
            let upstreams = std::iter::once(g_a).chain(std::iter::once(g_p)).chain(g_n);
            let mut grads: Option<MlpParams> = None;
            for (cache, upstream) in caches.iter().zip(upstreams) {
                let (g, _) = mlp_backward(spec, params, cache, upstream * inv_batch);
                match grads.as_mut() {
                    Some(acc) => acc.add_scaled(&g, 1.0),
                    None => grads = Some(g),
                }
            }
            Ok((loss, grads.expect("at least one head")))
        });
        self.apply(results)
    }

    /// One optimizer step on a batch of arc-length tuplets; returns the mean
    /// tuplet loss.
    pub fn step_arclength(&mut self, batch: &[ArcLengthTuplet]) -> Result<f64, TrainingError> {
        if batch.is_empty() {
            return Err(TrainingError::Configuration("empty batch".into()));
        }
        let inv_batch = 1.0 / batch.len() as f64;
        let spec = &self.spec;
        let params = &self.params;
        let results = par::map_slice(batch, |tuplet| -> Result<(f64, MlpParams), NetError> {
            for s in &tuplet.sections {
                assert_normalized(s);
            }
            let caches = tuplet
                .sections
                .iter()
                .map(|s| mlp_forward_cached(spec, params, &s.flatten()))
                .collect::<Result<Vec<_>, _>>()?;
            let outputs: Vec<f64> = caches.iter().map(|c| c.output()).collect();
            let (loss, upstreams) = arclength_loss_grad(&outputs, tuplet.num_anchors);
            let mut grads: Option<MlpParams> = None;
            for (cache, upstream) in caches.iter().zip(upstreams) {
                let (g, _) = mlp_backward(spec, params, cache, upstream * inv_batch);
                match grads.as_mut() {
                    Some(acc) => acc.add_scaled(&g, 1.0),
                    None => grads = Some(g),
                }
            }
            Ok((loss, grads.expect("at least one section")))
        });
        self.apply(results)
    }

    fn apply(
        &mut self,
        results: Vec<Result<(f64, MlpParams), NetError>>,
    ) -> Result<f64, TrainingError> {
        let count = results.len() as f64;
        let mut total: Option<MlpParams> = None;
        let mut loss_sum = 0.0;
        for r in results {
            let (loss, grads) = r?;
            loss_sum += loss;
            match total.as_mut() {
                None => total = Some(grads),
                Some(acc) => acc.add_scaled(&grads, 1.0),
            }
        }
        let grads = total.expect("non-empty batch");
        let mean_loss = loss_sum / count;
        if !mean_loss.is_finite() {
            return Err(TrainingError::Diverged {
                step: self.optimizer.step + 1,
                reason: format!("loss = {mean_loss}"),
            });
        }
        self.optimizer
            .step(&mut self.params, &grads)
            .map_err(|e| TrainingError::Diverged {
                step: self.optimizer.step + 1,
                reason: e.to_string(),
            })?;
        Ok(mean_loss)
    }
}

/// Loop controls shared by both training kinds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainOptions {
    pub steps: u64,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden_dims: Vec<usize>,
    pub activation: Activation,
    pub adam: AdamConfig,
    /// Validate every this many steps (and at the final step).
    pub val_interval: u64,
    pub val_batch: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            steps: 20_000,
            batch_size: 64,
            seed: 0,
            hidden_dims: vec![128, 128, 64],
            activation: Activation::Tanh,
            adam: AdamConfig::default(),
            val_interval: 500,
            val_batch: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrainRecord {
    pub step: u64,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

/// Per-step loss history, persisted as CSV.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub records: Vec<TrainRecord>,
}

impl TrainingLog {
    pub fn save_csv(&self, path: &Path) -> Result<(), TrainingError> {
        let mut text = String::from("step,train_loss,val_loss\n");
        for r in &self.records {
            match r.val_loss {
                Some(v) => text.push_str(&format!("{},{},{}\n", r.step, r.train_loss, v)),
                None => text.push_str(&format!("{},{},\n", r.step, r.train_loss)),
            }
        }
        std::fs::write(path, text).map_err(|source| TrainingError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// A finished run: best-validation model, loss history, and where the best
/// validation loss occurred.
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub log: TrainingLog,
    pub best_val: f64,
    pub best_step: u64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent per-slot random stream, stable across worker counts.
fn slot_rng(seed: u64, stream: u64, slot: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(stream ^ splitmix(slot))))
}

const VALIDATION_STREAM: u64 = u64::MAX;

fn generate_batch<T, F>(
    curves: &[PlanarCurve],
    count: usize,
    seed: u64,
    stream: u64,
    make: F,
) -> Result<Vec<T>, TrainingError>
where
    T: Send,
    F: Fn(&PlanarCurve, &mut ChaCha8Rng) -> Result<T, TrainingError> + Sync + Send,
{
    let slots = par::map_indices(count, |slot| {
        let mut rng = slot_rng(seed, stream, slot as u64);
        for _ in 0..64 {
            let curve = &curves[rng.gen_range(0..curves.len())];
            match make(curve, &mut rng) {
                Ok(t) => return Ok(t),
                Err(TrainingError::CurveTooShort(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(TrainingError::Configuration(
            "no curve in the dataset supports the tuplet configuration".into(),
        ))
    });
    slots.into_iter().collect()
}

/// Generates a batch of curvature tuplets for one step, data-parallel over
/// slots and deterministic in (seed, step, slot).
pub fn generate_curvature_batch(
    curves: &[PlanarCurve],
    cfg: &CurvatureConfig,
    count: usize,
    seed: u64,
    step: u64,
) -> Result<Vec<CurvatureTuplet>, TrainingError> {
    generate_batch(curves, count, seed, step, |curve, rng| {
        make_curvature_tuplet(curve, cfg, rng)
    })
}

/// Generates a batch of arc-length tuplets for one step.
pub fn generate_arclength_batch(
    curves: &[PlanarCurve],
    cfg: &ArcLengthConfig,
    count: usize,
    seed: u64,
    step: u64,
) -> Result<Vec<ArcLengthTuplet>, TrainingError> {
    generate_batch(curves, count, seed, step, |curve, rng| {
        make_arclength_tuplet(curve, cfg, rng)
    })
}

enum TaskConfig<'a> {
    Curvature(&'a CurvatureConfig),
    ArcLength(&'a ArcLengthConfig),
}

fn train_inner(
    task: TaskConfig<'_>,
    train_curves: &[PlanarCurve],
    val_curves: &[PlanarCurve],
    opts: &TrainOptions,
    dataset_id: &str,
) -> Result<TrainOutcome, TrainingError> {
    if train_curves.is_empty() || val_curves.is_empty() {
        return Err(TrainingError::Configuration(
            "training and validation manifests must be non-empty".into(),
        ));
    }
    let (group, window, input_dim, task_kind) = match &task {
        TaskConfig::Curvature(cfg) => {
            cfg.validate()?;
            (cfg.group, cfg.half_width, cfg.input_dim(), ModelTask::Curvature)
        }
        TaskConfig::ArcLength(cfg) => {
            cfg.validate()?;
            (cfg.group, cfg.section_len, cfg.input_dim(), ModelTask::ArcLength)
        }
    };
    let spec = MlpSpec::new(input_dim, opts.hidden_dims.clone(), opts.activation);
    let mut init_rng = ChaCha8Rng::seed_from_u64(splitmix(opts.seed));
    let params = mlp_init(&spec, &mut init_rng)?;
    let mut trainer = Trainer::new(spec.clone(), params, opts.adam);

    let mut log = TrainingLog::default();
    let mut best_val = f64::INFINITY;
    let mut best_step = 0;
    let mut best_params = trainer.params.clone();

    let run_step = |trainer: &mut Trainer, step: u64| -> Result<f64, TrainingError> {
        match &task {
            TaskConfig::Curvature(cfg) => {
                let batch =
                    generate_curvature_batch(train_curves, cfg, opts.batch_size, opts.seed, step)?;
                trainer.step_curvature(&batch)
            }
            TaskConfig::ArcLength(cfg) => {
                let batch =
                    generate_arclength_batch(train_curves, cfg, opts.batch_size, opts.seed, step)?;
                trainer.step_arclength(&batch)
            }
        }
    };
    // Validation tuplets come from a fixed stream, so every evaluation sees
    // the same held-out batch and epochs stay comparable.
    let validate = |trainer: &Trainer| -> Result<f64, TrainingError> {
        match &task {
            TaskConfig::Curvature(cfg) => {
                let batch =
                    generate_batch(val_curves, opts.val_batch, opts.seed, VALIDATION_STREAM, |c, r| {
                        make_curvature_tuplet(c, cfg, r)
                    })?;
                let losses = par::map_slice(&batch, |t| -> Result<f64, NetError> {
                    let outs = t
                        .samples()
                        .map(|s| crate::net::mlp_forward(&trainer.spec, &trainer.params, &s.flatten()))
                        .collect::<Result<Vec<f64>, _>>()?;
                    Ok(curvature_tuplet_loss(outs[0], outs[1], &outs[2..]))
                });
                let mut sum = 0.0;
                for l in losses {
                    sum += l?;
                }
                Ok(sum / batch.len() as f64)
            }
            TaskConfig::ArcLength(cfg) => {
                let batch =
                    generate_batch(val_curves, opts.val_batch, opts.seed, VALIDATION_STREAM, |c, r| {
                        make_arclength_tuplet(c, cfg, r)
                    })?;
                let losses = par::map_slice(&batch, |t| -> Result<f64, NetError> {
                    let outs = t
                        .sections
                        .iter()
                        .map(|s| crate::net::mlp_forward(&trainer.spec, &trainer.params, &s.flatten()))
                        .collect::<Result<Vec<f64>, _>>()?;
                    Ok(arclength_loss(&outs, t.num_anchors))
                });
                let mut sum = 0.0;
                for l in losses {
                    sum += l?;
                }
                Ok(sum / batch.len() as f64)
            }
        }
    };

    for step in 0..opts.steps {
        let train_loss = run_step(&mut trainer, step)?;
        let is_val_step =
            (opts.val_interval > 0 && (step + 1) % opts.val_interval == 0) || step + 1 == opts.steps;
        let val_loss = if is_val_step {
            let v = validate(&trainer)?;
            if v < best_val {
                best_val = v;
                best_step = step + 1;
                best_params = trainer.params.clone();
            }
            Some(v)
        } else {
            None
        };
        log.records.push(TrainRecord {
            step: step + 1,
            train_loss,
            val_loss,
        });
    }
    let model = TrainedModel::new(
        spec,
        best_params,
        ModelMeta {
            task: task_kind,
            group,
            window,
            dataset_id: dataset_id.to_string(),
            trained_steps: best_step,
            seed: opts.seed,
        },
    );
    Ok(TrainOutcome {
        model,
        log,
        best_val,
        best_step,
    })
}

/// Trains a curvature model, returning the parameters with the best
/// validation loss.
pub fn train_curvature(
    train_curves: &[PlanarCurve],
    val_curves: &[PlanarCurve],
    cfg: &CurvatureConfig,
    opts: &TrainOptions,
    dataset_id: &str,
) -> Result<TrainOutcome, TrainingError> {
    train_inner(
        TaskConfig::Curvature(cfg),
        train_curves,
        val_curves,
        opts,
        dataset_id,
    )
}

/// Trains an arc-length model, returning the parameters with the best
/// validation loss.
pub fn train_arclength(
    train_curves: &[PlanarCurve],
    val_curves: &[PlanarCurve],
    cfg: &ArcLengthConfig,
    opts: &TrainOptions,
    dataset_id: &str,
) -> Result<TrainOutcome, TrainingError> {
    train_inner(
        TaskConfig::ArcLength(cfg),
        train_curves,
        val_curves,
        opts,
        dataset_id,
    )
}
