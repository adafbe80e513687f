//! Parametric test shapes: exact closed curves with known invariants.

use crate::curves::{PlanarCurve, Point2};

/// Counter-clockwise circle of radius `r` sampled at `n` points.
pub fn circle(n: usize, r: f64) -> PlanarCurve {
    let points = (0..n)
        .map(|i| {
            let t = i as f64 / n as f64 * std::f64::consts::TAU;
            Point2::new(r * t.cos(), r * t.sin())
        })
        .collect();
    PlanarCurve::new(points, true).expect("circle sampling is non-degenerate")
}

/// Counter-clockwise axis-aligned ellipse with semi-axes `a`, `b`.
pub fn ellipse(n: usize, a: f64, b: f64) -> PlanarCurve {
    let points = (0..n)
        .map(|i| {
            let t = i as f64 / n as f64 * std::f64::consts::TAU;
            Point2::new(a * t.cos(), b * t.sin())
        })
        .collect();
    PlanarCurve::new(points, true).expect("ellipse sampling is non-degenerate")
}

/// Smooth star-shaped blob r(t) = 1 + sum_k amp_k cos(k t + phase_k),
/// useful where varied curvature profiles are needed without the image
/// pipeline.
pub fn blob(n: usize, harmonics: &[(usize, f64, f64)]) -> PlanarCurve {
    let points = (0..n)
        .map(|i| {
            let t = i as f64 / n as f64 * std::f64::consts::TAU;
            let r = 1.0
                + harmonics
                    .iter()
                    .map(|(k, amp, phase)| amp * ((*k as f64) * t + phase).cos())
                    .sum::<f64>();
            Point2::new(r * t.cos(), r * t.sin())
        })
        .collect();
    PlanarCurve::new(points, true).expect("blob radii stay positive for sane amplitudes")
}
