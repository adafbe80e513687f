//! Self-contained SVG line plots: axes, ticks, legend, overlaid series.
//! Output is deterministic byte-for-byte for identical input.

use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum PlotError {
    #[error("plot error: {0}")]
    Empty(String),
    #[error("plot i/o failed for {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 48.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if a >= 1000.0 || a < 0.01 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Renders overlaid (x, y) series with axes and a legend into `path`.
pub fn emit_plot(
    series: &[Series],
    title: &str,
    x_label: &str,
    y_label: &str,
    path: &Path,
) -> Result<(), PlotError> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(PlotError::Empty("no series to plot".into()));
    }
    let mut x_lo = f64::MAX;
    let mut x_hi = f64::MIN;
    let mut y_lo = f64::MAX;
    let mut y_hi = f64::MIN;
    for s in series {
        for (x, y) in &s.points {
            x_lo = x_lo.min(*x);
            x_hi = x_hi.max(*x);
            y_lo = y_lo.min(*y);
            y_hi = y_hi.max(*y);
        }
    }
    if x_hi <= x_lo {
        x_hi = x_lo + 1.0;
    }
    if y_hi <= y_lo {
        y_hi = y_lo + 1.0;
    }
    // Pad the y-range a little so curves do not hug the frame.
    let pad = 0.05 * (y_hi - y_lo);
    y_lo -= pad;
    y_hi += pad;

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| MARGIN_TOP + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    if !title.is_empty() {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"16\">{}</text>\n",
            WIDTH / 2.0,
            escape(title)
        ));
    }
    // Frame.
    svg.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n",
        fmt(MARGIN_LEFT),
        fmt(MARGIN_TOP),
        fmt(plot_w),
        fmt(plot_h)
    ));
    // Ticks and grid.
    for k in 0..=5 {
        let t = k as f64 / 5.0;
        let xv = x_lo + t * (x_hi - x_lo);
        let yv = y_lo + t * (y_hi - y_lo);
        let xp = sx(xv);
        let yp = sy(yv);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#ddd\"/>\n",
            fmt(xp),
            fmt(MARGIN_TOP),
            fmt(xp),
            fmt(MARGIN_TOP + plot_h)
        ));
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#ddd\"/>\n",
            fmt(MARGIN_LEFT),
            fmt(yp),
            fmt(MARGIN_LEFT + plot_w),
            fmt(yp)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"11\">{}</text>\n",
            fmt(xp),
            fmt(MARGIN_TOP + plot_h + 16.0),
            tick_label(xv)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" \
             font-size=\"11\">{}</text>\n",
            fmt(MARGIN_LEFT - 6.0),
            fmt(yp + 4.0),
            tick_label(yv)
        ));
    }
    // Axis labels.
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\">{}</text>\n",
        fmt(MARGIN_LEFT + plot_w / 2.0),
        fmt(HEIGHT - 10.0),
        escape(x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        fmt(MARGIN_TOP + plot_h / 2.0),
        fmt(MARGIN_TOP + plot_h / 2.0),
        escape(y_label)
    ));
    // Series.
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let coords: Vec<String> = s
            .points
            .iter()
            .map(|(x, y)| format!("{},{}", fmt(sx(*x)), fmt(sy(*y))))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            coords.join(" ")
        ));
    }
    // Legend.
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let y = MARGIN_TOP + 14.0 + 18.0 * si as f64;
        let x = MARGIN_LEFT + plot_w - 150.0;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" \
             stroke-width=\"2\"/>\n",
            fmt(x),
            fmt(y - 4.0),
            fmt(x + 24.0),
            fmt(y - 4.0)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            fmt(x + 30.0),
            fmt(y),
            escape(&s.name)
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg).map_err(|source| PlotError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
