//! Minimal deterministic SVG line and scatter charts for diagnostics.

use std::fmt::Write;

const PANEL_W: f64 = 560.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 32.0;
const MARGIN_B: f64 = 44.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    Line,
    Dots,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub mark: Mark,
}

impl Series {
    pub fn line(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), points, mark: Mark::Line }
    }

    pub fn dots(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), points, mark: Mark::Dots }
    }
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub series: Vec<Series>,
}

impl Panel {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Panel {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_x: false,
            series: Vec::new(),
        }
    }

    pub fn log_x(mut self) -> Self {
        self.log_x = true;
        self
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-12 * (1.0 + lo.abs()) {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.04 * (hi - lo);
    (lo - pad, hi + pad)
}

fn render_panel(out: &mut String, p: &Panel, top: f64) {
    let tx = |x: f64| if p.log_x { x.ln() } else { x };
    let usable = |(x, y): &(f64, f64)| x.is_finite() && y.is_finite() && (!p.log_x || *x > 0.0);
    let all = || p.series.iter().flat_map(|s| s.points.iter().filter(|q| usable(q)));
    let (x0, x1) = bounds(all().map(|(x, _)| tx(*x)));
    let (y0, y1) = bounds(all().map(|(_, y)| *y));
    let pw = PANEL_W - MARGIN_L - MARGIN_R;
    let ph = PANEL_H - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (tx(x) - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + MARGIN_T + (y1 - y) / (y1 - y0) * ph;

    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN_L}" y="{:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="#444"/>"##,
        top + MARGIN_T
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">{}</text>"#,
        MARGIN_L + pw / 2.0,
        top + 20.0,
        esc(&p.title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}{}</text>"#,
        MARGIN_L + pw / 2.0,
        top + PANEL_H - 8.0,
        esc(&p.x_label),
        if p.log_x { " (log scale)" } else { "" }
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.2}" font-size="11" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#,
        top + MARGIN_T + ph / 2.0,
        top + MARGIN_T + ph / 2.0,
        esc(&p.y_label)
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let yv = y0 + f * (y1 - y0);
        let xv = x0 + f * (x1 - x0);
        let xlab = if p.log_x { xv.exp() } else { xv };
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{:.3}</text>"#,
            MARGIN_L - 4.0,
            sy(yv) + 3.0,
            yv
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{:.3}</text>"#,
            MARGIN_L + f * pw,
            top + MARGIN_T + ph + 14.0,
            xlab
        );
    }
    for (i, s) in p.series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let pts: Vec<&(f64, f64)> = s.points.iter().filter(|q| usable(q)).collect();
        match s.mark {
            Mark::Line => {
                let path: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
                let _ = writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
                    path.join(" ")
                );
            }
            Mark::Dots => {
                for (x, y) in pts {
                    let _ = writeln!(
                        out,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{colour}"/>"#,
                        sx(*x),
                        sy(*y)
                    );
                }
            }
        }
        let ly = top + MARGIN_T + 14.0 + 16.0 * i as f64;
        let lx = PANEL_W - MARGIN_R + 10.0;
        let _ = writeln!(
            out,
            r#"<rect x="{lx:.2}" y="{:.2}" width="10" height="10" fill="{colour}"/><text x="{:.2}" y="{ly:.2}" font-size="11">{}</text>"#,
            ly - 9.0,
            lx + 14.0,
            esc(&s.label)
        );
    }
}

/// Panels stacked vertically into one SVG document.
pub fn render(panels: &[Panel]) -> String {
    let h = PANEL_H * panels.len().max(1) as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W}" height="{h}" viewBox="0 0 {PANEL_W} {h}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (k, p) in panels.iter().enumerate() {
        render_panel(&mut out, p, k as f64 * PANEL_H);
    }
    out.push_str("</svg>\n");
    out
}
