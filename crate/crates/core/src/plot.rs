//! Static SVG figures: envelope panels, mark-scaled pattern scatter, mark histograms.

use std::fmt::Write as _;

use crate::check::CheckResult;
use crate::envelope::EnvelopeTest;
use crate::error::{Error, Result};
use crate::pattern::Window;
use crate::simulation::SimRealization;

const PANEL_W: f64 = 320.0;
const PANEL_H: f64 = 240.0;
const MARGIN: f64 = 40.0;
const LEGEND_H: f64 = 36.0;
const VIOLATION: &str = "#d62728";

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn finite_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo <= 1e-12 * lo.abs().max(1.0) {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Data-to-pixel mapping of one panel.
struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xr: (f64, f64),
    yr: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.xr.0) / (self.xr.1 - self.xr.0) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + self.h - (y - self.yr.0) / (self.yr.1 - self.yr.0) * self.h
    }

    fn axes(&self, out: &mut String, title: &str) {
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
            self.x0, self.y0, self.w, self.h
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"#,
            self.x0 + self.w / 2.0,
            self.y0 - 8.0,
            esc(title)
        );
        for (v, anchor, x, y) in [
            (self.xr.0, "start", self.x0, self.y0 + self.h + 14.0),
            (self.xr.1, "end", self.x0 + self.w, self.y0 + self.h + 14.0),
            (self.yr.0, "end", self.x0 - 4.0, self.y0 + self.h),
            (self.yr.1, "end", self.x0 - 4.0, self.y0 + 10.0),
        ] {
            let _ = writeln!(out, r#"<text x="{x:.2}" y="{y:.2}" font-size="10" text-anchor="{anchor}">{}</text>"#, tick(v));
        }
    }

    fn polyline(&self, out: &mut String, xs: &[f64], ys: &[f64], style: &str) {
        let pts: Vec<String> = xs
            .iter()
            .zip(ys)
            .filter(|(_, y)| y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect();
        if !pts.is_empty() {
            let _ = writeln!(out, r#"<polyline points="{}" fill="none" {style}/>"#, pts.join(" "));
        }
    }
}

fn tick(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 0.01 && v.abs() < 1e4) {
        format!("{}", (v * 1000.0).round() / 1000.0)
    } else {
        format!("{v:.2e}")
    }
}

fn document(w: f64, h: f64, body: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w:.0} {h:.0}\" width=\"{w:.0}\" height=\"{h:.0}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

fn legend(out: &mut String, y: f64, items: &[(&str, &str)]) {
    let _ = writeln!(out, r#"<g class="legend">"#);
    let mut x = MARGIN;
    for (label, swatch) in items {
        let _ = writeln!(out, r#"<g transform="translate({x:.2},{y:.2})">{swatch}<text x="28" y="4" font-size="11">{}</text></g>"#, esc(label));
        x += 40.0 + 7.0 * label.len() as f64;
    }
    let _ = writeln!(out, "</g>");
}

const SOLID: &str = r##"stroke="#000" stroke-width="1.5""##;
const DASHED: &str = r##"stroke="#000" stroke-width="1" stroke-dasharray="5,4""##;

fn envelope_panel(out: &mut String, test: &EnvelopeTest, frame: &Frame, title: &str) {
    let _ = writeln!(out, r#"<g id="panel-{}" class="panel">"#, test.kind.label());
    frame.axes(out, title);
    let mut band: Vec<String> = test
        .r
        .iter()
        .zip(&test.upper)
        .map(|(&r, &u)| format!("{:.2},{:.2}", frame.px(r), frame.py(u)))
        .collect();
    band.extend(test.r.iter().zip(&test.lower).rev().map(|(&r, &l)| format!("{:.2},{:.2}", frame.px(r), frame.py(l))));
    if !band.is_empty() {
        let _ = writeln!(out, r##"<polygon class="envelope" points="{}" fill="#c8c8c8" stroke="none"/>"##, band.join(" "));
    }
    frame.polyline(out, &test.r, &test.theoretical, DASHED);
    frame.polyline(out, &test.r, &test.observed, SOLID);
    for j in 0..test.r.len() {
        let v = test.observed[j];
        if v < test.lower[j] || v > test.upper[j] {
            let _ = writeln!(
                out,
                r#"<circle class="violation" cx="{:.2}" cy="{:.2}" r="2.5" fill="{VIOLATION}"/>"#,
                frame.px(test.r[j]),
                frame.py(v)
            );
        }
    }
    let _ = writeln!(out, "</g>");
}

/// One envelope panel per statistic, three per row, with the combined p in the heading.
pub fn envelope_svg(check: &CheckResult) -> Result<String> {
    if check.statistics.is_empty() {
        return Err(Error::invalid("no envelope to plot"));
    }
    let cols = check.statistics.len().min(3);
    let rows = check.statistics.len().div_ceil(3);
    let width = cols as f64 * (PANEL_W + MARGIN) + MARGIN;
    let height = rows as f64 * (PANEL_H + 2.0 * MARGIN) + LEGEND_H + 30.0;
    let mut body = String::new();
    let _ = writeln!(
        body,
        r#"<text x="{:.2}" y="20" font-size="14" text-anchor="middle">combined p = {}</text>"#,
        width / 2.0,
        tick(check.combined_p())
    );
    for (i, test) in check.statistics.iter().enumerate() {
        let frame = Frame {
            x0: MARGIN + (i % 3) as f64 * (PANEL_W + MARGIN),
            y0: 30.0 + MARGIN + (i / 3) as f64 * (PANEL_H + 2.0 * MARGIN),
            w: PANEL_W,
            h: PANEL_H,
            xr: finite_range(test.r.iter().copied()),
            yr: finite_range(test.lower.iter().chain(&test.upper).chain(&test.observed).chain(&test.theoretical).copied()),
        };
        let title = format!("{}  p in [{}, {}]", test.kind.label(), tick(test.p.p_lower), tick(test.p.p_upper));
        envelope_panel(&mut body, test, &frame, &title);
    }
    legend(
        &mut body,
        height - LEGEND_H / 2.0,
        &[
            ("observed", &format!(r#"<line x1="0" y1="0" x2="22" y2="0" {SOLID}/>"#)),
            ("Poisson reference", &format!(r#"<line x1="0" y1="0" x2="22" y2="0" {DASHED}/>"#)),
            ("envelope", r##"<rect x="0" y="-5" width="22" height="10" fill="#c8c8c8"/>"##),
            ("outside envelope", &format!(r#"<circle cx="11" cy="0" r="3" fill="{VIOLATION}"/>"#)),
        ],
    );
    Ok(document(width, height, &body))
}

fn pattern_panel(out: &mut String, locs: &[(f64, f64)], marks: &[f64], frame: &Frame, title: &str) {
    let _ = writeln!(out, r#"<g class="panel pattern">"#);
    frame.axes(out, title);
    let max_mark = marks.iter().copied().filter(|m| m.is_finite()).fold(0.0, f64::max);
    let max_px = 0.04 * frame.w.min(frame.h);
    for (&(x, y), &m) in locs.iter().zip(marks) {
        // area proportional to the mark
        let r = if max_mark > 0.0 { max_px * (m.max(0.0) / max_mark).sqrt() } else { 0.0 };
        let _ = writeln!(
            out,
            r##"<circle class="point" cx="{:.2}" cy="{:.2}" r="{r:.3}" fill="none" stroke="#1f77b4"/>"##,
            frame.px(x),
            frame.py(y)
        );
    }
    let _ = writeln!(out, "</g>");
}

/// Shared bin edges over both samples.
pub fn shared_bins(a: &[f64], b: &[f64], n_bins: usize) -> Vec<f64> {
    let (lo, hi) = finite_range(a.iter().chain(b).copied());
    (0..=n_bins).map(|k| lo + (hi - lo) * k as f64 / n_bins as f64).collect()
}

fn densities(values: &[f64], edges: &[f64]) -> Vec<f64> {
    let n_bins = edges.len() - 1;
    let width = edges[1] - edges[0];
    let mut counts = vec![0.0; n_bins];
    for &v in values.iter().filter(|v| v.is_finite()) {
        let k = (((v - edges[0]) / width).floor() as isize).clamp(0, n_bins as isize - 1) as usize;
        counts[k] += 1.0;
    }
    let total = values.len().max(1) as f64;
    counts.iter().map(|c| c / (total * width)).collect()
}

fn histogram_panel(out: &mut String, reference: &[f64], simulated: &[f64], frame_at: (f64, f64)) {
    let edges = shared_bins(reference, simulated, 20);
    let dr = densities(reference, &edges);
    let ds = densities(simulated, &edges);
    let top = dr.iter().chain(&ds).copied().fold(0.0, f64::max).max(1e-12);
    let frame = Frame {
        x0: frame_at.0,
        y0: frame_at.1,
        w: PANEL_W,
        h: PANEL_H,
        xr: (edges[0], edges[edges.len() - 1]),
        yr: (0.0, top * 1.05),
    };
    let _ = writeln!(out, r#"<g class="panel histogram">"#);
    frame.axes(out, "mark distribution");
    for (k, (&a, &b)) in dr.iter().zip(&ds).enumerate() {
        let x = frame.px(edges[k]);
        let w = frame.px(edges[k + 1]) - x;
        for (v, class, colour) in [(a, "reference", "#7f7f7f"), (b, "simulated", "#1f77b4")] {
            let _ = writeln!(
                out,
                r#"<rect class="{class}" x="{x:.2}" y="{:.2}" width="{w:.2}" height="{:.2}" fill="{colour}" fill-opacity="0.45"/>"#,
                frame.py(v),
                frame.py(0.0) - frame.py(v)
            );
        }
    }
    let _ = writeln!(out, "</g>");
}

/// A pattern scatter with circles of area proportional to the mark.
pub fn pattern_svg(locs: &[(f64, f64)], marks: &[f64], window: &Window, title: &str) -> String {
    let mut body = String::new();
    let frame = pattern_frame(window, MARGIN, MARGIN);
    pattern_panel(&mut body, locs, marks, &frame, title);
    legend(&mut body, 2.0 * MARGIN + frame.h + 10.0, &[("circle area proportional to mark", r##"<circle cx="11" cy="0" r="5" fill="none" stroke="#1f77b4"/>"##)]);
    document(frame.w + 2.0 * MARGIN, frame.h + 2.0 * MARGIN + LEGEND_H, &body)
}

fn pattern_frame(window: &Window, x0: f64, y0: f64) -> Frame {
    let aspect = window.height() / window.width();
    let (w, h) = if aspect <= PANEL_H / PANEL_W { (PANEL_W, PANEL_W * aspect) } else { (PANEL_H / aspect, PANEL_H) };
    Frame {
        x0,
        y0,
        w,
        h,
        xr: (window.x_min, window.x_max),
        yr: (window.y_min, window.y_max),
    }
}

/// A realization, and when reference marks are given, both mark histograms on shared bins.
pub fn realization_svg(real: &SimRealization, reference_marks: Option<&[f64]>) -> String {
    let mut body = String::new();
    let frame = pattern_frame(&real.window, MARGIN, MARGIN);
    pattern_panel(&mut body, &real.locations(), &real.marks(), &frame, "simulated pattern");
    let mut width = frame.w + 2.0 * MARGIN;
    let mut items: Vec<(&str, String)> = vec![("circle area proportional to mark", r##"<circle cx="11" cy="0" r="5" fill="none" stroke="#1f77b4"/>"##.into())];
    if let Some(reference) = reference_marks {
        histogram_panel(&mut body, reference, &real.marks(), (width, MARGIN));
        width += PANEL_W + MARGIN;
        items.push(("reference marks", r##"<rect x="0" y="-5" width="22" height="10" fill="#7f7f7f" fill-opacity="0.45"/>"##.into()));
        items.push(("simulated marks", r##"<rect x="0" y="-5" width="22" height="10" fill="#1f77b4" fill-opacity="0.45"/>"##.into()));
    }
    let height = frame.h.max(PANEL_H) + 2.0 * MARGIN + LEGEND_H;
    let refs: Vec<(&str, &str)> = items.iter().map(|(a, b)| (*a, b.as_str())).collect();
    legend(&mut body, height - LEGEND_H / 2.0, &refs);
    document(width, height, &body)
}
