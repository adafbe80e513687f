//! Curve dataset construction: grayscale images, Gaussian blur, closed
//! level-curve extraction by marching squares, a synthetic blob-image
//! generator, and dataset persistence with split manifests.

use crate::curves::{PlanarCurve, Point2};
use crate::par;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum DatasetError {
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("i/o failed for {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to decode image {path}: {source}")]
    Decode {
        path: String,
        source: image::ImageError,
    },
    #[error("malformed curve file {path}: {reason}")]
    MalformedCurve { path: String, reason: String },
    #[error("malformed manifest {path}: {reason}")]
    MalformedManifest { path: String, reason: String },
    #[error(transparent)]
    Curve(#[from] crate::curves::CurveError),
}

/// Row-major grayscale image with intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, DatasetError> {
        if width * height != pixels.len() {
            return Err(DatasetError::InvalidImage(format!(
                "{}x{} image needs {} pixels, got {}",
                width,
                height,
                width * height,
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(DatasetError::InvalidImage(
                "intensities must lie in [0, 1]".into(),
            ));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }
}

/// Separable Gaussian convolution with kernel radius ceil(3 sigma) and
/// clamped (replicated) edges. `sigma = 0` is the identity.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> Result<GrayImage, DatasetError> {
    if sigma < 0.0 || !sigma.is_finite() {
        return Err(DatasetError::InvalidParameter(format!(
            "sigma must be nonnegative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel = Vec::with_capacity(2 * radius as usize + 1);
    for k in -radius..=radius {
        kernel.push((-(k * k) as f64 / (2.0 * sigma * sigma)).exp());
    }
    let z: f64 = kernel.iter().sum();
    for w in &mut kernel {
        *w /= z;
    }

    let (w, h) = (img.width, img.height);
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    // Horizontal pass.
    let mut mid = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (ki, kw) in kernel.iter().enumerate() {
                let cc = clamp(c as isize + ki as isize - radius, w);
                acc += kw * img.pixels[r * w + cc];
            }
            mid[r * w + c] = acc;
        }
    }
    // Vertical pass.
    let mut out = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (ki, kw) in kernel.iter().enumerate() {
                let rr = clamp(r as isize + ki as isize - radius, h);
                acc += kw * mid[rr * w + c];
            }
            out[r * w + c] = acc.clamp(0.0, 1.0);
        }
    }
    GrayImage::new(w, h, out)
}

// Edge identifiers for marching squares: each grid point owns at most one
// rightward and one downward edge.
fn h_edge(w: usize, r: usize, c: usize) -> usize {
    2 * (r * w + c)
}
fn v_edge(w: usize, r: usize, c: usize) -> usize {
    2 * (r * w + c) + 1
}

/// Extracts closed iso-contours of `img` at the given intensity level using
/// marching squares with linear interpolation along cell edges. Saddle cells
/// are disambiguated by the center-value average. Only closed contours with
/// at least `min_points` vertices are returned, each oriented
/// counter-clockwise (enclosed region on the left).
pub fn extract_level_curves(
    img: &GrayImage,
    level: f64,
    min_points: usize,
) -> Result<Vec<PlanarCurve>, DatasetError> {
    if !(0.0 < level && level < 1.0) {
        return Err(DatasetError::InvalidParameter(format!(
            "level must lie strictly inside (0, 1), got {level}"
        )));
    }
    if min_points < 3 {
        return Err(DatasetError::InvalidParameter(
            "min_points must be at least 3".into(),
        ));
    }
    let (w, h) = (img.width, img.height);
    if w < 2 || h < 2 {
        return Ok(Vec::new());
    }
    let inside = |r: usize, c: usize| img.get(r, c) > level;

    // Crossing position along an edge, nudged off the corners so vertices
    // stay pairwise distinct.
    let crossing = |e: usize| -> Point2 {
        let (cell, vertical) = (e / 2, e % 2 == 1);
        let (r, c) = (cell / w, cell % w);
        let v0 = img.get(r, c);
        let (v1, dx, dy) = if vertical {
            (img.get(r + 1, c), 0.0, 1.0)
        } else {
            (img.get(r, c + 1), 1.0, 0.0)
        };
        let t = ((level - v0) / (v1 - v0)).clamp(1e-6, 1.0 - 1e-6);
        Point2::new(c as f64 + t * dx, r as f64 + t * dy)
    };

    let mut segments: Vec<(usize, usize)> = Vec::new();
    for r in 0..h - 1 {
        for c in 0..w - 1 {
            let (tl, tr, br, bl) = (
                inside(r, c),
                inside(r, c + 1),
                inside(r + 1, c + 1),
                inside(r + 1, c),
            );
            let case = (tl as u8) | (tr as u8) << 1 | (br as u8) << 2 | (bl as u8) << 3;
            let top = h_edge(w, r, c);
            let bottom = h_edge(w, r + 1, c);
            let left = v_edge(w, r, c);
            let right = v_edge(w, r, c + 1);
            match case {
                0 | 15 => {}
                1 | 14 => segments.push((top, left)),
                2 | 13 => segments.push((top, right)),
                4 | 11 => segments.push((bottom, right)),
                8 | 7 => segments.push((bottom, left)),
                3 | 12 => segments.push((left, right)),
                6 | 9 => segments.push((top, bottom)),
                5 | 10 => {
                    let center = (img.get(r, c)
                        + img.get(r, c + 1)
                        + img.get(r + 1, c)
                        + img.get(r + 1, c + 1))
                        / 4.0;
                    let center_inside = center > level;
                    let diag_is_tl_br = case == 5;
                    if center_inside {
                        // The two inside corners connect through the cell.
                        if diag_is_tl_br {
                            segments.push((top, right));
                            segments.push((bottom, left));
                        } else {
                            segments.push((top, left));
                            segments.push((bottom, right));
                        }
                    } else if diag_is_tl_br {
                        segments.push((top, left));
                        segments.push((bottom, right));
                    } else {
                        segments.push((top, right));
                        segments.push((bottom, left));
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    // Edge -> segments using it. Interior edges belong to two cells, so each
    // edge appears in at most two segments; walking is unambiguous.
    let mut by_edge: HashMap<usize, [Option<usize>; 2]> = HashMap::new();
    for (si, (a, b)) in segments.iter().enumerate() {
        for e in [*a, *b] {
            let slots = by_edge.entry(e).or_insert([None, None]);
            if slots[0].is_none() {
                slots[0] = Some(si);
            } else {
                slots[1] = Some(si);
            }
        }
    }

    let mut visited = vec![false; segments.len()];
    let mut curves = Vec::new();
    for start in 0..segments.len() {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let (first_edge, mut cursor_edge) = segments[start];
        let mut chain = vec![first_edge, cursor_edge];
        let mut cursor_seg = start;
        let closed = loop {
            let slots = &by_edge[&cursor_edge];
            let next_seg = match (slots[0], slots[1]) {
                (Some(a), Some(b)) => {
                    let other = if a == cursor_seg { b } else { a };
                    if visited[other] {
                        break cursor_edge == first_edge;
                    }
                    other
                }
                _ => break false, // image-border edge: open chain
            };
            visited[next_seg] = true;
            let (a, b) = segments[next_seg];
            cursor_edge = if a == cursor_edge { b } else { a };
            chain.push(cursor_edge);
            cursor_seg = next_seg;
        };
        if !closed {
            continue;
        }
        chain.pop(); // final edge repeats the first
        if chain.len() < min_points {
            continue;
        }
        let points: Vec<Point2> = chain.into_iter().map(crossing).collect();
        let mut curve = PlanarCurve::new(points, true)?;
        if curve.signed_area() < 0.0 {
            let mut reversed = curve.points().to_vec();
            reversed.reverse();
            curve = PlanarCurve::new(reversed, true)?;
        }
        curves.push(curve);
    }
    Ok(curves)
}

/// Rescales a curve to zero centroid and unit root-mean-square radius, so
/// that curves from differently sized sources share a common coordinate
/// scale. Applied once per curve at dataset-build time and recorded in the
/// manifest.
pub fn normalize_curve_scale(curve: &PlanarCurve) -> PlanarCurve {
    let n = curve.len() as f64;
    let cx = curve.points().iter().map(|p| p.x).sum::<f64>() / n;
    let cy = curve.points().iter().map(|p| p.y).sum::<f64>() / n;
    let rms = (curve
        .points()
        .iter()
        .map(|p| (p.x - cx) * (p.x - cx) + (p.y - cy) * (p.y - cy))
        .sum::<f64>()
        / n)
        .sqrt();
    let scale = if rms > 0.0 { 1.0 / rms } else { 1.0 };
    let points = curve
        .points()
        .iter()
        .map(|p| Point2::new((p.x - cx) * scale, (p.y - cy) * scale))
        .collect();
    PlanarCurve::new(points, curve.is_closed()).expect("uniform scaling preserves curve invariants")
}

/// Loads a PGM/PNG grayscale image and scales intensities to [0, 1].
pub fn load_gray_image(path: &Path) -> Result<GrayImage, DatasetError> {
    let img = image::open(path).map_err(|source| DatasetError::Decode {
        path: path.display().to_string(),
        source,
    })?;
    let luma = img.to_luma16();
    let (w, h) = (luma.width() as usize, luma.height() as usize);
    let pixels = luma.pixels().map(|p| p.0[0] as f64 / 65535.0).collect();
    GrayImage::new(w, h, pixels)
}

/// Random smooth blob image: a sum of anisotropic Gaussian bumps, rescaled
/// to peak at 1. The 0.5 level set is a closed blobby curve well inside the
/// frame, with curvature profiles that vary from bump to bump.
pub fn synth_blob_image<R: Rng + ?Sized>(size: usize, rng: &mut R) -> GrayImage {
    struct Bump {
        cx: f64,
        cy: f64,
        // Inverse covariance entries of the anisotropic Gaussian.
        ixx: f64,
        ixy: f64,
        iyy: f64,
        amp: f64,
    }
    let s = size as f64;
    let n_bumps = rng.gen_range(2..=6);
    let bumps: Vec<Bump> = (0..n_bumps)
        .map(|_| {
            let sigma_major = rng.gen_range(0.08 * s..0.20 * s);
            let sigma_minor = sigma_major * rng.gen_range(0.45..1.0);
            let (sin_t, cos_t) = rng.gen_range(0.0..std::f64::consts::PI).sin_cos();
            let (a, b) = (1.0 / (sigma_major * sigma_major), 1.0 / (sigma_minor * sigma_minor));
            Bump {
                cx: rng.gen_range(0.36 * s..0.64 * s),
                cy: rng.gen_range(0.36 * s..0.64 * s),
                ixx: a * cos_t * cos_t + b * sin_t * sin_t,
                ixy: (a - b) * sin_t * cos_t,
                iyy: a * sin_t * sin_t + b * cos_t * cos_t,
                amp: rng.gen_range(0.5..1.0),
            }
        })
        .collect();
    let mut pixels = vec![0.0; size * size];
    for r in 0..size {
        for c in 0..size {
            let (x, y) = (c as f64, r as f64);
            let v: f64 = bumps
                .iter()
                .map(|b| {
                    let (dx, dy) = (x - b.cx, y - b.cy);
                    let q = b.ixx * dx * dx + 2.0 * b.ixy * dx * dy + b.iyy * dy * dy;
                    b.amp * (-q / 2.0).exp()
                })
                .sum();
            pixels[r * size + c] = v;
        }
    }
    let max = pixels.iter().cloned().fold(f64::MIN, f64::max);
    for p in &mut pixels {
        *p = (*p / max).clamp(0.0, 1.0);
    }
    GrayImage::new(size, size, pixels).expect("synthetic pixels lie in range")
}

/// Writes one curve as CSV with a metadata line carrying the closed flag.
/// Coordinates print in shortest round-trip form, so a read-back is
/// bit-identical.
pub fn write_curve_csv(path: &Path, curve: &PlanarCurve) -> Result<(), DatasetError> {
    let mut text = format!("# closed={}\nx,y\n", curve.is_closed());
    for p in curve.points() {
        text.push_str(&format!("{},{}\n", p.x, p.y));
    }
    std::fs::write(path, text).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_curve_csv(path: &Path) -> Result<PlanarCurve, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let bad = |reason: String| DatasetError::MalformedCurve {
        path: path.display().to_string(),
        reason,
    };
    let mut closed: Option<bool> = None;
    let mut points = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            for field in meta.split(',') {
                if let Some((key, value)) = field.trim().split_once('=') {
                    if key.trim() == "closed" {
                        closed = Some(
                            value
                                .trim()
                                .parse()
                                .map_err(|_| bad(format!("bad closed flag '{}'", value.trim())))?,
                        );
                    }
                }
            }
            continue;
        }
        if line == "x,y" {
            continue;
        }
        let (x, y) = line
            .split_once(',')
            .ok_or_else(|| bad(format!("line {}: expected 'x,y'", ln + 1)))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("line {}: {e}", ln + 1)))
        };
        points.push(Point2::new(parse(x)?, parse(y)?));
    }
    let closed = closed.ok_or_else(|| bad("missing '# closed=' metadata line".into()))?;
    Ok(PlanarCurve::new(points, closed)?)
}

/// Extraction parameters recorded with every dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionParams {
    pub sigma: f64,
    pub level: f64,
    pub min_points: usize,
    /// Rescale each curve to zero centroid and unit RMS radius.
    pub normalize_scale: bool,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        ExtractionParams {
            sigma: 2.0,
            level: 0.5,
            min_points: 200,
            normalize_scale: true,
        }
    }
}

/// Split manifest: file list (relative to the manifest directory),
/// extraction parameters, and source provenance strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub split: String,
    pub files: Vec<String>,
    pub extraction: ExtractionParams,
    pub provenance: Vec<String>,
}

impl DatasetManifest {
    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serialization");
        std::fs::write(path, text).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| DatasetError::MalformedManifest {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }
}

/// Writes a split directory: one CSV per curve plus `manifest.json`.
pub fn save_dataset(
    dir: &Path,
    split: &str,
    curves: &[PlanarCurve],
    extraction: ExtractionParams,
    provenance: Vec<String>,
) -> Result<PathBuf, DatasetError> {
    std::fs::create_dir_all(dir).map_err(|source| DatasetError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut files = Vec::with_capacity(curves.len());
    for (i, curve) in curves.iter().enumerate() {
        let name = format!("curve_{i:05}.csv");
        write_curve_csv(&dir.join(&name), curve)?;
        files.push(name);
    }
    let manifest = DatasetManifest {
        split: split.to_string(),
        files,
        extraction,
        provenance,
    };
    let path = dir.join("manifest.json");
    manifest.save(&path)?;
    Ok(path)
}

/// Loads every curve listed by a manifest, erroring with the offending file
/// name on the first miss.
pub fn load_dataset(
    manifest_path: &Path,
) -> Result<(DatasetManifest, Vec<PlanarCurve>), DatasetError> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut curves = Vec::with_capacity(manifest.files.len());
    for file in &manifest.files {
        curves.push(read_curve_csv(&base.join(file))?);
    }
    Ok((manifest, curves))
}

/// Fractions of curves assigned to train/validation/test.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

fn split_counts(total: usize, fractions: SplitFractions) -> (usize, usize, usize) {
    let val = ((total as f64 * fractions.validation).round() as usize).min(total);
    let test = ((total as f64 * fractions.test).round() as usize).min(total - val);
    (total - val - test, val, test)
}

/// Generates `count` synthetic curves through the full image pipeline (blob
/// image, blur, level extraction, largest contour) and writes the three-way
/// split under `out_root`. Returns the manifest paths in
/// train/validation/test order. Image synthesis and extraction run
/// data-parallel per image.
pub fn build_synthetic_dataset(
    out_root: &Path,
    count: usize,
    image_size: usize,
    seed: u64,
    extraction: ExtractionParams,
    fractions: SplitFractions,
) -> Result<[PathBuf; 3], DatasetError> {
    if count == 0 {
        return Err(DatasetError::InvalidParameter(
            "count must be positive".into(),
        ));
    }
    // Oversample: some blob images yield no contour above min_points.
    let attempts: Vec<Option<PlanarCurve>> = par::map_indices(count * 2, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(
            seed ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(i as u64 + 1),
        );
        let img = synth_blob_image(image_size, &mut rng);
        let blurred = gaussian_blur(&img, extraction.sigma).ok()?;
        let curves = extract_level_curves(&blurred, extraction.level, extraction.min_points).ok()?;
        let best = curves.into_iter().max_by_key(|c| c.len())?;
        Some(if extraction.normalize_scale {
            normalize_curve_scale(&best)
        } else {
            best
        })
    });
    let curves: Vec<PlanarCurve> = attempts.into_iter().flatten().take(count).collect();
    if curves.len() < count {
        return Err(DatasetError::InvalidParameter(format!(
            "only {} of {count} synthetic curves met min_points = {}",
            curves.len(),
            extraction.min_points
        )));
    }
    let (n_train, n_val, n_test) = split_counts(count, fractions);
    let provenance = vec![format!(
        "synthetic blob images, size {image_size}, seed {seed}"
    )];
    let mut offset = 0;
    let mut out = Vec::with_capacity(3);
    for (split, n) in [("train", n_train), ("validation", n_val), ("test", n_test)] {
        let slice = &curves[offset..offset + n];
        offset += n;
        out.push(save_dataset(
            &out_root.join(split),
            split,
            slice,
            extraction,
            provenance.clone(),
        )?);
    }
    Ok([out[0].clone(), out[1].clone(), out[2].clone()])
}

/// Extracts curves from every PGM/PNG image in `input_dir` and writes the
/// split layout under `out_root`.
pub fn extract_dataset(
    input_dir: &Path,
    out_root: &Path,
    extraction: ExtractionParams,
    fractions: SplitFractions,
) -> Result<[PathBuf; 3], DatasetError> {
    let mut image_paths: Vec<PathBuf> = std::fs::read_dir(input_dir)
        .map_err(|source| DatasetError::Io {
            path: input_dir.display().to_string(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("pgm" | "png" | "PGM" | "PNG" | "pnm")
            )
        })
        .collect();
    image_paths.sort();
    if image_paths.is_empty() {
        return Err(DatasetError::InvalidParameter(format!(
            "no PGM/PNG images under {}",
            input_dir.display()
        )));
    }
    let extracted: Vec<Result<Vec<PlanarCurve>, DatasetError>> =
        par::map_slice(&image_paths, |p| {
            let img = load_gray_image(p)?;
            let blurred = gaussian_blur(&img, extraction.sigma)?;
            let curves = extract_level_curves(&blurred, extraction.level, extraction.min_points)?;
            Ok(curves
                .into_iter()
                .map(|c| {
                    if extraction.normalize_scale {
                        normalize_curve_scale(&c)
                    } else {
                        c
                    }
                })
                .collect())
        });
    let mut curves = Vec::new();
    let mut provenance = Vec::new();
    for (p, r) in image_paths.iter().zip(extracted) {
        let cs = r?;
        if !cs.is_empty() {
            provenance.push(p.display().to_string());
        }
        curves.extend(cs);
    }
    if curves.is_empty() {
        return Err(DatasetError::InvalidParameter(
            "no contour met the extraction parameters".into(),
        ));
    }
    let (n_train, n_val, n_test) = split_counts(curves.len(), fractions);
    let mut offset = 0;
    let mut out = Vec::with_capacity(3);
    for (split, n) in [("train", n_train), ("validation", n_val), ("test", n_test)] {
        let slice = &curves[offset..offset + n];
        offset += n;
        out.push(save_dataset(
            &out_root.join(split),
            split,
            slice,
            extraction,
            provenance.clone(),
        )?);
    }
    Ok([out[0].clone(), out[1].clone(), out[2].clone()])
}
