//! Static SVG charts: cumulative reward curves and GP slices.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::report::PolicySummary;
use crate::error::{domain, Result};

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, PartialEq)]
pub struct ChartOptions {
    pub title: String,
    pub file_name: String,
    /// Reference curve drawn dashed, e.g. the utopic `m t`.
    pub reference: Option<Vec<f64>>,
    pub reference_label: String,
}

impl ChartOptions {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            file_name: "cumulative_reward.svg".into(),
            reference: None,
            reference_label: "utopic".into(),
        }
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Linear map from data coordinates to the plot area.
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        let span = if self.x1 > self.x0 { self.x1 - self.x0 } else { 1.0 };
        LEFT + (x - self.x0) / span * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let span = if self.y1 > self.y0 { self.y1 - self.y0 } else { 1.0 };
        HEIGHT - BOTTOM - (y - self.y0) / span * (HEIGHT - TOP - BOTTOM)
    }
}

fn nice_step(span: f64, target_ticks: f64) -> f64 {
    let raw = (span / target_ticks).max(1e-12);
    let magnitude = 10f64.powf(raw.log10().floor());
    let unit = raw / magnitude;
    let nice = if unit <= 1.0 {
        1.0
    } else if unit <= 2.0 {
        2.0
    } else if unit <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * magnitude
}

fn ticks(lo: f64, hi: f64, target: f64) -> Vec<f64> {
    let step = nice_step(hi - lo, target);
    let mut v = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while v <= hi + step * 1e-9 {
        out.push(if v.abs() < step * 1e-9 { 0.0 } else { v });
        v += step;
    }
    out
}

fn tick_label(v: f64) -> String {
    let text = format!("{v:.3}");
    text.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn open_svg(out: &mut String, title: &str, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<text x="{}" y="28" text-anchor="middle" font-size="16">{}</text>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        WIDTH / 2.0,
        escape(title),
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 15.0,
        escape(x_label),
        (TOP + HEIGHT - BOTTOM) / 2.0,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        escape(y_label),
    );
}

fn axes(out: &mut String, frame: &Frame, x_ticks: &[f64], y_ticks: &[f64]) {
    let (xl, xr) = (LEFT, WIDTH - RIGHT);
    let (yt, yb) = (TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        out,
        r##"<rect x="{xl}" y="{yt}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        xr - xl,
        yb - yt
    );
    for &x in x_ticks {
        let px = frame.px(x);
        let _ = writeln!(
            out,
            r##"<line x1="{px:.2}" y1="{yb}" x2="{px:.2}" y2="{}" stroke="#444"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"##,
            yb + 5.0,
            yb + 20.0,
            tick_label(x)
        );
    }
    for &y in y_ticks {
        let py = frame.py(y);
        let _ = writeln!(
            out,
            r##"<line x1="{xl}" y1="{py:.2}" x2="{xr}" y2="{py:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
            xl - 6.0,
            py + 4.0,
            tick_label(y)
        );
    }
}

fn legend(out: &mut String, entries: &[(String, &str, bool)]) {
    for (i, (label, colour, dashed)) in entries.iter().enumerate() {
        let y = TOP + 18.0 + 18.0 * i as f64;
        let x = LEFT + 14.0;
        let dash = if *dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            out,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{colour}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
            x + 24.0,
            x + 30.0,
            y + 4.0,
            escape(label)
        );
    }
}

/// Path through the points with a break wherever a value is missing.
fn broken_path(points: &[(f64, Option<f64>)], frame: &Frame) -> String {
    let mut d = String::new();
    let mut pen_down = false;
    for &(x, y) in points {
        match y {
            Some(y) => {
                let _ = write!(d, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, frame.px(x), frame.py(y));
                pen_down = true;
            }
            None => pen_down = false,
        }
    }
    d.trim_end().to_string()
}

/// Closed polygons between `upper` and `lower` for each run of points where
/// both are present.
fn band_paths(xs: &[f64], upper: &[Option<f64>], lower: &[Option<f64>], frame: &Frame) -> Vec<String> {
    let mut paths = Vec::new();
    let mut segment: Vec<usize> = Vec::new();
    let flush = |segment: &mut Vec<usize>, paths: &mut Vec<String>| {
        if !segment.is_empty() {
            let mut d = String::new();
            for (k, &i) in segment.iter().enumerate() {
                let _ = write!(
                    d,
                    "{}{:.2},{:.2} ",
                    if k == 0 { "M" } else { "L" },
                    frame.px(xs[i]),
                    frame.py(upper[i].unwrap())
                );
            }
            for &i in segment.iter().rev() {
                let _ = write!(d, "L{:.2},{:.2} ", frame.px(xs[i]), frame.py(lower[i].unwrap()));
            }
            d.push('Z');
            paths.push(d);
            segment.clear();
        }
    };
    for i in 0..xs.len() {
        if upper[i].is_some() && lower[i].is_some() {
            segment.push(i);
        } else {
            flush(&mut segment, &mut paths);
        }
    }
    flush(&mut segment, &mut paths);
    paths
}

fn log10_positive(v: f64) -> Option<f64> {
    (v > 0.0 && v.is_finite()).then(|| v.log10())
}

/// Renders log10 cumulative reward per policy: mean line, +/- 1 sd band and
/// the optional dashed reference. Nonpositive values leave gaps.
pub fn render_chart(summaries: &[PolicySummary], options: &ChartOptions) -> Result<String> {
    if summaries.is_empty() {
        return Err(domain("nothing to chart"));
    }
    let horizon = summaries
        .iter()
        .map(|s| s.mean_cumulative.len())
        .chain(options.reference.iter().map(|r| r.len()))
        .max()
        .unwrap_or(0)
        .max(1);

    let mut lows = Vec::new();
    let mut highs = Vec::new();
    for s in summaries {
        for (m, sd) in s.mean_cumulative.iter().zip(&s.sd_cumulative) {
            lows.extend(log10_positive(*m));
            lows.extend(log10_positive(m - sd));
            highs.extend(log10_positive(m + sd));
        }
    }
    if let Some(r) = &options.reference {
        lows.extend(r.iter().filter_map(|v| log10_positive(*v)));
        highs.extend(r.iter().filter_map(|v| log10_positive(*v)));
    }
    let lo = lows.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = highs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (y0, y1) = if lo.is_finite() && hi.is_finite() {
        let pad = ((hi - lo) * 0.05).max(0.05);
        (lo - pad, hi + pad)
    } else {
        (0.0, 1.0)
    };
    let frame = Frame { x0: 1.0, x1: horizon as f64, y0, y1 };

    let mut out = String::new();
    open_svg(&mut out, &options.title, "step t", "log10 cumulative reward");
    axes(&mut out, &frame, &ticks(1.0, horizon as f64, 8.0), &ticks(y0, y1, 6.0));

    let mut entries = Vec::new();
    for (k, s) in summaries.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let xs: Vec<f64> = (1..=s.mean_cumulative.len()).map(|t| t as f64).collect();
        let upper: Vec<Option<f64>> = s
            .mean_cumulative
            .iter()
            .zip(&s.sd_cumulative)
            .map(|(m, sd)| if *m > 0.0 { log10_positive(m + sd) } else { None })
            .collect();
        let lower: Vec<Option<f64>> = s
            .mean_cumulative
            .iter()
            .zip(&s.sd_cumulative)
            .map(|(m, sd)| if *m > 0.0 { Some(log10_positive(m - sd).unwrap_or(y0).max(y0)) } else { None })
            .collect();
        for d in band_paths(&xs, &upper, &lower, &frame) {
            let _ = writeln!(out, r#"<path d="{d}" fill="{colour}" fill-opacity="0.18" stroke="none"/>"#);
        }
        let points: Vec<(f64, Option<f64>)> =
            xs.iter().zip(&s.mean_cumulative).map(|(x, m)| (*x, log10_positive(*m))).collect();
        let d = broken_path(&points, &frame);
        if !d.is_empty() {
            let _ = writeln!(out, r#"<path d="{d}" fill="none" stroke="{colour}" stroke-width="2"/>"#);
        }
        entries.push((s.policy.to_string(), colour, false));
    }
    if let Some(r) = &options.reference {
        let points: Vec<(f64, Option<f64>)> =
            r.iter().enumerate().map(|(i, v)| ((i + 1) as f64, log10_positive(*v))).collect();
        let d = broken_path(&points, &frame);
        if !d.is_empty() {
            let _ = writeln!(
                out,
                r##"<path d="{d}" fill="none" stroke="#555" stroke-width="1.5" stroke-dasharray="6 4"/>"##
            );
        }
        entries.push((options.reference_label.clone(), "#555", true));
    }
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn emit_chart(summaries: &[PolicySummary], options: &ChartOptions, out_dir: &Path) -> Result<PathBuf> {
    let svg = render_chart(summaries, options)?;
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(&options.file_name);
    fs::write(&path, svg)?;
    Ok(path)
}

/// Posterior of a two-arm surrogate along the budget segment
/// `x_1 + x_2 = budget`.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceData {
    pub title: String,
    pub budget: f64,
    /// Allocation to arm 1 along the segment.
    pub x1: Vec<f64>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Past decisions as (allocation to arm 1 rescaled to `budget`, reward).
    pub markers: Vec<(f64, f64)>,
}

/// Renders the mean curve, a +/- 2 sd band and the observed decisions.
pub fn render_slice(slice: &SliceData) -> Result<String> {
    if slice.x1.len() < 2 || slice.x1.len() != slice.mean.len() || slice.mean.len() != slice.sd.len() {
        return Err(domain("slice needs at least two matching grid points"));
    }
    let upper: Vec<f64> = slice.mean.iter().zip(&slice.sd).map(|(m, s)| m + 2.0 * s).collect();
    let lower: Vec<f64> = slice.mean.iter().zip(&slice.sd).map(|(m, s)| m - 2.0 * s).collect();
    let finite = |v: &f64| v.is_finite();
    let lo =
        lower.iter().chain(slice.markers.iter().map(|(_, r)| r)).copied().filter(finite).fold(f64::INFINITY, f64::min);
    let hi = upper
        .iter()
        .chain(slice.markers.iter().map(|(_, r)| r))
        .copied()
        .filter(finite)
        .fold(f64::NEG_INFINITY, f64::max);
    let pad = ((hi - lo) * 0.05).max(1e-6);
    let frame = Frame { x0: 0.0, x1: slice.budget, y0: lo - pad, y1: hi + pad };

    let mut out = String::new();
    open_svg(&mut out, &slice.title, &format!("x1 (x2 = {} - x1)", tick_label(slice.budget)), "reward");
    axes(&mut out, &frame, &ticks(0.0, slice.budget, 8.0), &ticks(frame.y0, frame.y1, 6.0));
    let up: Vec<Option<f64>> = upper.iter().map(|v| Some(*v)).collect();
    let down: Vec<Option<f64>> = lower.iter().map(|v| Some(*v)).collect();
    for d in band_paths(&slice.x1, &up, &down, &frame) {
        let _ = writeln!(out, r##"<path d="{d}" fill="#1f77b4" fill-opacity="0.2" stroke="none"/>"##);
    }
    let points: Vec<(f64, Option<f64>)> = slice.x1.iter().zip(&slice.mean).map(|(x, m)| (*x, Some(*m))).collect();
    let _ = writeln!(
        out,
        r##"<path d="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##,
        broken_path(&points, &frame)
    );
    for (x, r) in &slice.markers {
        let _ = writeln!(
            out,
            r##"<circle class="decision" cx="{:.2}" cy="{:.2}" r="4" fill="#d62728"/>"##,
            frame.px(*x),
            frame.py(*r)
        );
    }
    legend(&mut out, &[("posterior mean".to_string(), "#1f77b4", false), ("decisions".to_string(), "#d62728", false)]);
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::PolicyId;

    fn summary(policy: PolicyId, mean: Vec<f64>, sd: Vec<f64>) -> PolicySummary {
        PolicySummary { policy, runs: 1, mean_cumulative: mean, sd_cumulative: sd }
    }

    #[test]
    fn chart_is_well_formed_with_gaps() {
        let s = vec![
            summary(PolicyId::Sbf, vec![0.0, 0.0, 1.0, 3.0], vec![0.0, 0.0, 0.5, 1.0]),
            summary(PolicyId::Bora3, vec![1.0, 2.0, 4.0, 5.0], vec![0.0; 4]),
        ];
        let mut options = ChartOptions::new("Case <1.a> & more");
        options.reference = Some(vec![2.0, 4.0, 6.0, 8.0]);
        let svg = render_chart(&s, &options).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let dashed = doc.descendants().filter(|n| n.attribute("stroke-dasharray").is_some()).count();
        assert!(dashed >= 1);
        assert!(svg.contains("Case &lt;1.a&gt; &amp; more"));
    }

    #[test]
    fn all_zero_series_does_not_crash() {
        let s = vec![summary(PolicyId::Sbf, vec![0.0; 5], vec![0.0; 5])];
        let svg = render_chart(&s, &ChartOptions::new("zeros")).unwrap();
        roxmltree::Document::parse(&svg).unwrap();
        assert!(render_chart(&[], &ChartOptions::new("none")).is_err());
    }

    #[test]
    fn gaps_split_the_mean_line() {
        let frame = Frame { x0: 1.0, x1: 4.0, y0: 0.0, y1: 1.0 };
        let d = broken_path(&[(1.0, Some(0.1)), (2.0, None), (3.0, Some(0.2)), (4.0, Some(0.3))], &frame);
        assert_eq!(d.matches('M').count(), 2);
        assert_eq!(d.matches('L').count(), 1);
    }

    #[test]
    fn slice_renders_markers() {
        let x1: Vec<f64> = (0..=10).map(|i| i as f64 * 3.39).collect();
        let slice = SliceData {
            title: "slice".into(),
            budget: 33.9,
            mean: x1.iter().map(|x| 1.0 + x / 100.0).collect(),
            sd: vec![0.1; 11],
            x1,
            markers: vec![(3.0, 1.0), (25.0, 2.0)],
        };
        let svg = render_slice(&slice).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(doc.descendants().filter(|n| n.attribute("class") == Some("decision")).count(), 2);
    }
}
