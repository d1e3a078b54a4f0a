//! Chart rendering: hand-rolled SVG, no external assets, byte-identical for
//! identical inputs (no timestamps, no randomness).
//!
//! Every chart is split into a compute step that returns plain data (series
//! means, box statistics) and a render step that turns that data into SVG.
//! The rendered files also embed the plotted numbers in `data-*` attributes
//! at full precision, so any chart can be audited against the CSV it came
//! from without a parser for coordinates.

use std::fmt::Write as _;

use crate::numeric;
use crate::optimizer::{GridSpec, LandscapePoint};
use crate::report::SweepCsvRow;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// Which per-replication rate column a line chart plots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateMetric {
    RenegeFsd,
    RenegeIcd,
    JockeyFsd,
    JockeyIcd,
}

impl RateMetric {
    pub fn name(self) -> &'static str {
        match self {
            RateMetric::RenegeFsd => "renege_rate_fsd",
            RateMetric::RenegeIcd => "renege_rate_icd",
            RateMetric::JockeyFsd => "jockey_rate_fsd",
            RateMetric::JockeyIcd => "jockey_rate_icd",
        }
    }

    fn extract(self, row: &SweepCsvRow) -> f64 {
        match self {
            RateMetric::RenegeFsd => row.renege_rate_fsd,
            RateMetric::RenegeIcd => row.renege_rate_icd,
            RateMetric::JockeyFsd => row.jockey_rate_fsd,
            RateMetric::JockeyIcd => row.jockey_rate_icd,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub lambda: f64,
    pub value: f64,
}

/// One line: the metric's per-cell mean as a function of λ, for a fixed
/// dispatch interval and policy flag.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSeries {
    pub r: f64,
    pub policy: bool,
    pub points: Vec<SeriesPoint>,
}

fn sorted_dedup(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(|a, b| a.total_cmp(b));
    values.dedup();
    values
}

/// Group replications into (r, policy) series of per-λ means.
pub fn rate_series(rows: &[SweepCsvRow], metric: RateMetric) -> Vec<RateSeries> {
    let rs = sorted_dedup(rows.iter().map(|row| row.r).collect());
    let lambdas = sorted_dedup(rows.iter().map(|row| row.lambda).collect());
    let mut series = Vec::new();
    for &r in &rs {
        for policy in [false, true] {
            let mut points = Vec::new();
            for &lambda in &lambdas {
                let values: Vec<f64> = rows
                    .iter()
                    .filter(|row| row.r == r && row.policy == policy && row.lambda == lambda)
                    .map(|row| metric.extract(row))
                    .collect();
                if !values.is_empty() {
                    points.push(SeriesPoint {
                        lambda,
                        value: numeric::mean(&values),
                    });
                }
            }
            if !points.is_empty() {
                series.push(RateSeries { r, policy, points });
            }
        }
    }
    series
}

/// Which waiting-time column a box summarizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaitOutcome {
    Reneged,
    Jockeyed,
    Served,
}

impl WaitOutcome {
    pub const ALL: [WaitOutcome; 3] = [
        WaitOutcome::Reneged,
        WaitOutcome::Jockeyed,
        WaitOutcome::Served,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WaitOutcome::Reneged => "reneged",
            WaitOutcome::Jockeyed => "jockeyed",
            WaitOutcome::Served => "served",
        }
    }

    fn extract(self, row: &SweepCsvRow) -> Option<f64> {
        match self {
            WaitOutcome::Reneged => row.wait_median_reneged,
            WaitOutcome::Jockeyed => row.wait_median_jockeyed,
            WaitOutcome::Served => row.wait_median_served,
        }
    }
}

/// How box-plot groups are formed from the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxGrouping {
    /// One box per outcome × policy, pooled over all intervals and λ.
    Pooled,
    /// One box per interval × outcome × policy.
    ByInterval,
}

/// Five-number summary of one group of per-replication waiting-time
/// medians, whiskers at the extremes.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub label: String,
    pub n: usize,
    pub whisker_lo: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_hi: f64,
}

fn box_from(label: String, mut values: Vec<f64>) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    Some(BoxStats {
        label,
        n: values.len(),
        whisker_lo: values[0],
        q1: numeric::quantile_sorted(&values, 0.25).unwrap(),
        median: numeric::median_sorted(&values).unwrap(),
        q3: numeric::quantile_sorted(&values, 0.75).unwrap(),
        whisker_hi: values[values.len() - 1],
    })
}

/// Summarize waiting-time medians into box statistics under the chosen
/// grouping. Groups with no samples are dropped.
pub fn wait_boxes(rows: &[SweepCsvRow], grouping: BoxGrouping) -> Vec<BoxStats> {
    let mut boxes = Vec::new();
    match grouping {
        BoxGrouping::Pooled => {
            for outcome in WaitOutcome::ALL {
                for policy in [false, true] {
                    let values: Vec<f64> = rows
                        .iter()
                        .filter(|row| row.policy == policy)
                        .filter_map(|row| outcome.extract(row))
                        .collect();
                    let label = format!(
                        "{} / policy {}",
                        outcome.name(),
                        if policy { "on" } else { "off" }
                    );
                    boxes.extend(box_from(label, values));
                }
            }
        }
        BoxGrouping::ByInterval => {
            let rs = sorted_dedup(rows.iter().map(|row| row.r).collect());
            for &r in &rs {
                for outcome in WaitOutcome::ALL {
                    for policy in [false, true] {
                        let values: Vec<f64> = rows
                            .iter()
                            .filter(|row| row.r == r && row.policy == policy)
                            .filter_map(|row| outcome.extract(row))
                            .collect();
                        let label = format!(
                            "r={} {} / {}",
                            r,
                            outcome.name(),
                            if policy { "on" } else { "off" }
                        );
                        boxes.extend(box_from(label, values));
                    }
                }
            }
        }
    }
    boxes
}

// ---------------------------------------------------------------------------
// rendering

const WIDTH: f64 = 880.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 190.0;
const MARGIN_TOP: f64 = 52.0;
const MARGIN_BOTTOM: f64 = 64.0;

fn plot_width() -> f64 {
    WIDTH - MARGIN_LEFT - MARGIN_RIGHT
}

fn plot_height() -> f64 {
    HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
}

fn svg_open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"##
    );
    let _ = writeln!(
        out,
        r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"##
    );
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="28" font-family="sans-serif" font-size="17" font-weight="bold">{}</text>"##,
        MARGIN_LEFT,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn x_scale(v: f64, lo: f64, hi: f64) -> f64 {
    if hi == lo {
        return MARGIN_LEFT + plot_width() / 2.0;
    }
    MARGIN_LEFT + (v - lo) / (hi - lo) * plot_width()
}

fn y_scale(v: f64, lo: f64, hi: f64) -> f64 {
    if hi == lo {
        return MARGIN_TOP + plot_height() / 2.0;
    }
    MARGIN_TOP + plot_height() - (v - lo) / (hi - lo) * plot_height()
}

fn axes(out: &mut String, x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64, x_label: &str, y_label: &str) {
    let x0 = MARGIN_LEFT;
    let x1 = MARGIN_LEFT + plot_width();
    let y0 = MARGIN_TOP + plot_height();
    let y1 = MARGIN_TOP;
    let _ = writeln!(
        out,
        r##"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}" stroke="#333" stroke-width="1"/>"##
    );
    let _ = writeln!(
        out,
        r##"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}" stroke="#333" stroke-width="1"/>"##
    );
    for tick in 0..=5 {
        let t = tick as f64 / 5.0;
        let vx = x_lo + t * (x_hi - x_lo);
        let px = x_scale(vx, x_lo, x_hi);
        let _ = writeln!(
            out,
            r##"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{:.2}" stroke="#333" stroke-width="1"/>"##,
            y0 + 5.0
        );
        let _ = writeln!(
            out,
            r##"<text x="{px:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"##,
            y0 + 20.0,
            trim_num(vx)
        );
        let vy = y_lo + t * (y_hi - y_lo);
        let py = y_scale(vy, y_lo, y_hi);
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{py:.2}" x2="{x0:.2}" y2="{py:.2}" stroke="#333" stroke-width="1"/>"##,
            x0 - 5.0
        );
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="end">{}</text>"##,
            x0 - 9.0,
            py + 4.0,
            trim_num(vy)
        );
        let _ = writeln!(
            out,
            r##"<line x1="{x0:.2}" y1="{py:.2}" x2="{x1:.2}" y2="{py:.2}" stroke="#eee" stroke-width="1"/>"##
        );
    }
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"##,
        MARGIN_LEFT + plot_width() / 2.0,
        HEIGHT - 16.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r##"<text x="18" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"##,
        MARGIN_TOP + plot_height() / 2.0,
        MARGIN_TOP + plot_height() / 2.0,
        escape(y_label)
    );
}

fn trim_num(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Render (r, policy) rate lines against λ.
pub fn rate_chart_svg(series: &[RateSeries], title: &str, y_label: &str) -> String {
    let mut out = String::new();
    svg_open(&mut out, title);
    let xs: Vec<f64> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.lambda))
        .collect();
    let ys: Vec<f64> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.value))
        .collect();
    let x_lo = xs.iter().copied().reduce(f64::min).unwrap_or(0.0);
    let x_hi = xs.iter().copied().reduce(f64::max).unwrap_or(1.0);
    let y_hi = ys.iter().copied().reduce(f64::max).unwrap_or(1.0).max(1e-12) * 1.05;
    axes(&mut out, x_lo, x_hi, 0.0, y_hi, "arrival rate", y_label);
    for (index, s) in series.iter().enumerate() {
        let color = PALETTE[index % PALETTE.len()];
        let dash = if s.policy { r##" stroke-dasharray="6 3""## } else { "" };
        let points: Vec<String> = s
            .points
            .iter()
            .map(|p| {
                format!(
                    "{:.2},{:.2}",
                    x_scale(p.lambda, x_lo, x_hi),
                    y_scale(p.value, 0.0, y_hi)
                )
            })
            .collect();
        let values: Vec<String> = s
            .points
            .iter()
            .map(|p| format!("{}:{}", p.lambda, p.value))
            .collect();
        let _ = writeln!(
            out,
            r##"<polyline fill="none" stroke="{color}" stroke-width="2"{dash} points="{}" data-r="{}" data-policy="{}" data-values="{}"/>"##,
            points.join(" "),
            s.r,
            if s.policy { "on" } else { "off" },
            values.join(";")
        );
        for p in &s.points {
            let _ = writeln!(
                out,
                r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"##,
                x_scale(p.lambda, x_lo, x_hi),
                y_scale(p.value, 0.0, y_hi)
            );
        }
        let ly = MARGIN_TOP + 16.0 * index as f64;
        let lx = WIDTH - MARGIN_RIGHT + 14.0;
        let _ = writeln!(
            out,
            r##"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"{dash}/>"##,
            ly + 4.0,
            lx + 22.0,
            ly + 4.0
        );
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">r={} policy {}</text>"##,
            lx + 28.0,
            ly + 8.0,
            s.r,
            if s.policy { "on" } else { "off" }
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Render box plots of waiting-time medians.
pub fn box_chart_svg(boxes: &[BoxStats], title: &str) -> String {
    let mut out = String::new();
    svg_open(&mut out, title);
    let y_hi = boxes
        .iter()
        .map(|b| b.whisker_hi)
        .reduce(f64::max)
        .unwrap_or(1.0)
        .max(1e-12)
        * 1.05;
    axes(&mut out, 0.0, boxes.len() as f64, 0.0, y_hi, "", "waiting time");
    let slot = plot_width() / boxes.len().max(1) as f64;
    let body = (slot * 0.5).min(46.0);
    for (index, b) in boxes.iter().enumerate() {
        let color = PALETTE[index % PALETTE.len()];
        let cx = MARGIN_LEFT + slot * (index as f64 + 0.5);
        let y = |v: f64| y_scale(v, 0.0, y_hi);
        let _ = writeln!(
            out,
            r##"<g data-label="{}" data-n="{}" data-median="{}" data-q1="{}" data-q3="{}" data-lo="{}" data-hi="{}">"##,
            escape(&b.label),
            b.n,
            b.median,
            b.q1,
            b.q3,
            b.whisker_lo,
            b.whisker_hi
        );
        let _ = writeln!(
            out,
            r##"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="#333" stroke-width="1"/>"##,
            y(b.whisker_lo),
            y(b.whisker_hi)
        );
        for v in [b.whisker_lo, b.whisker_hi] {
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#333" stroke-width="1"/>"##,
                cx - body / 4.0,
                y(v),
                cx + body / 4.0,
                y(v)
            );
        }
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{body:.2}" height="{:.2}" fill="{color}" fill-opacity="0.45" stroke="{color}" stroke-width="1.5"/>"##,
            cx - body / 2.0,
            y(b.q3),
            (y(b.q1) - y(b.q3)).max(0.5)
        );
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#111" stroke-width="2"/>"##,
            cx - body / 2.0,
            y(b.median),
            cx + body / 2.0,
            y(b.median)
        );
        let _ = writeln!(
            out,
            r##"<text x="{cx:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end" transform="rotate(-38 {cx:.2} {:.2})">{}</text>"##,
            MARGIN_TOP + plot_height() + 16.0,
            MARGIN_TOP + plot_height() + 16.0,
            escape(&b.label)
        );
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

/// Interpolate a heat color for t in [0, 1].
fn heat_color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    // pale yellow to deep red
    let from = (255.0, 243.0, 205.0);
    let to = (136.0, 14.0, 14.0);
    let r = (from.0 + (to.0 - from.0) * t).round() as u8;
    let g = (from.1 + (to.1 - from.1) * t).round() as u8;
    let b = (from.2 + (to.2 - from.2) * t).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Render the objective landscape over the rate lattice, marking the
/// optimized pair and, when given, the fixed reference pair.
pub fn heatmap_svg(
    landscape: &[LandscapePoint],
    grid: &GridSpec,
    best: (f64, f64),
    reference: Option<(f64, f64)>,
    title: &str,
) -> String {
    let mut out = String::new();
    svg_open(&mut out, title);
    let values = grid.values();
    let n = values.len().max(1);
    let cell_w = plot_width() / n as f64;
    let cell_h = plot_height() / n as f64;
    let finite: Vec<f64> = landscape.iter().filter_map(|p| p.objective).collect();
    let lo = finite.iter().copied().reduce(f64::min).unwrap_or(0.0);
    let hi = finite.iter().copied().reduce(f64::max).unwrap_or(1.0);
    let index_of = |mu: f64| -> usize {
        values
            .iter()
            .position(|v| (v - mu).abs() < 1e-9)
            .unwrap_or(0)
    };
    for p in landscape {
        let xi = index_of(p.mu_i);
        let yi = index_of(p.mu_j);
        let x = MARGIN_LEFT + xi as f64 * cell_w;
        // μ_j grows upward
        let y = MARGIN_TOP + plot_height() - (yi + 1) as f64 * cell_h;
        let fill = match p.objective {
            Some(v) => {
                if hi > lo {
                    heat_color((v - lo) / (hi - lo))
                } else {
                    heat_color(0.0)
                }
            }
            None => "#d9d9d9".to_string(),
        };
        let _ = writeln!(
            out,
            r##"<rect x="{x:.2}" y="{y:.2}" width="{cell_w:.2}" height="{cell_h:.2}" fill="{fill}"/>"##
        );
    }
    // axis ticks on the lattice corners
    axes_overlay(&mut out, grid);
    let center = |mu: f64, vertical: bool| -> f64 {
        let idx = index_of(mu) as f64;
        if vertical {
            MARGIN_TOP + plot_height() - (idx + 0.5) * cell_h
        } else {
            MARGIN_LEFT + (idx + 0.5) * cell_w
        }
    };
    let (bx, by) = (center(best.0, false), center(best.1, true));
    let _ = writeln!(
        out,
        r##"<circle cx="{bx:.2}" cy="{by:.2}" r="7" fill="none" stroke="#000" stroke-width="2.5" data-optimized="{},{}"/>"##,
        best.0, best.1
    );
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" font-weight="bold">optimized</text>"##,
        bx + 10.0,
        by - 8.0
    );
    if let Some((ri, rj)) = reference {
        let (rx, ry) = (center(ri, false), center(rj, true));
        let _ = writeln!(
            out,
            r##"<path d="M {x0:.2} {y0:.2} L {x1:.2} {y1:.2} M {x0:.2} {y1:.2} L {x1:.2} {y0:.2}" stroke="#005" stroke-width="2.5" fill="none" data-reference="{ri},{rj}"/>"##,
            x0 = rx - 6.0,
            y0 = ry - 6.0,
            x1 = rx + 6.0,
            y1 = ry + 6.0,
        );
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" font-weight="bold" fill="#005">reference</text>"##,
            rx + 10.0,
            ry + 16.0
        );
    }
    // color legend
    let legend_x = WIDTH - MARGIN_RIGHT + 24.0;
    for step in 0..64 {
        let t = step as f64 / 63.0;
        let y = MARGIN_TOP + plot_height() * (1.0 - t) - 1.0;
        let _ = writeln!(
            out,
            r##"<rect x="{legend_x:.2}" y="{y:.2}" width="18" height="{:.2}" fill="{}"/>"##,
            plot_height() / 63.0 + 1.0,
            heat_color(t)
        );
    }
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{}</text>"##,
        legend_x + 24.0,
        MARGIN_TOP + plot_height(),
        trim_num(lo)
    );
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{}</text>"##,
        legend_x + 24.0,
        MARGIN_TOP + 10.0,
        trim_num(hi)
    );
    out.push_str("</svg>\n");
    out
}

fn axes_overlay(out: &mut String, grid: &GridSpec) {
    let values = grid.values();
    let n = values.len().max(1);
    let y0 = MARGIN_TOP + plot_height();
    for tick in 0..=4 {
        let idx = (tick * (n - 1)) / 4;
        let frac = (idx as f64 + 0.5) / n as f64;
        let px = MARGIN_LEFT + frac * plot_width();
        let py = MARGIN_TOP + plot_height() * (1.0 - frac);
        let _ = writeln!(
            out,
            r##"<text x="{px:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"##,
            y0 + 16.0,
            trim_num(values[idx])
        );
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"##,
            MARGIN_LEFT - 8.0,
            py + 4.0,
            trim_num(values[idx])
        );
    }
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle">service rate of queue i</text>"##,
        MARGIN_LEFT + plot_width() / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        out,
        r##"<text x="18" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {:.2})">service rate of queue j</text>"##,
        MARGIN_TOP + plot_height() / 2.0,
        MARGIN_TOP + plot_height() / 2.0
    );
}
