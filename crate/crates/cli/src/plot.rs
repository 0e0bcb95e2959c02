//! Static SVG figures of weighted graphs.

use std::fmt::Write;

use mslift::sbv::SbvFunction;

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 320.0;
const MARGIN: f64 = 40.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub struct Curve {
    pub func: SbvFunction,
    pub weight: f64,
    pub label: String,
}

#[derive(Default)]
pub struct Panel {
    pub title: String,
    pub curves: Vec<Curve>,
    /// Abscissae drawn as dotted vertical guides.
    pub columns: Vec<f64>,
}

impl Panel {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            ..Self::default()
        }
    }

    pub fn curve(mut self, func: SbvFunction, weight: f64, label: impl Into<String>) -> Self {
        self.curves.push(Curve {
            func,
            weight,
            label: label.into(),
        });
        self
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    left: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + MARGIN + (x - self.x0) / (self.x1 - self.x0) * (PANEL_W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        PANEL_H - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (PANEL_H - 2.0 * MARGIN)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Panels side by side sharing one value range.
pub fn render(panels: &[Panel]) -> String {
    let funcs = || panels.iter().flat_map(|p| p.curves.iter().map(|c| &c.func));
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for f in funcs() {
        for s in f.segments() {
            y0 = y0.min(s.v0.min(s.v1));
            y1 = y1.max(s.v0.max(s.v1));
        }
    }
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    let pad = ((y1 - y0) * 0.08).max(0.05);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let wmax = panels
        .iter()
        .flat_map(|p| p.curves.iter().map(|c| c.weight))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);

    let width = PANEL_W * panels.len().max(1) as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{PANEL_H:.0}" viewBox="0 0 {width:.0} {PANEL_H:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (k, panel) in panels.iter().enumerate() {
        let (x0, x1) = panel
            .curves
            .first()
            .map(|c| (c.func.interval().a, c.func.interval().b))
            .unwrap_or((0.0, 1.0));
        let fr = Frame {
            x0,
            x1,
            y0,
            y1,
            left: k as f64 * PANEL_W,
        };
        draw_panel(&mut out, panel, &fr, wmax);
    }
    out.push_str("</svg>\n");
    out
}

fn draw_panel(out: &mut String, panel: &Panel, fr: &Frame, wmax: f64) {
    let (l, r) = (fr.px(fr.x0), fr.px(fr.x1));
    let (t, b) = (fr.py(fr.y1), fr.py(fr.y0));
    let _ = writeln!(
        out,
        r##"<rect x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#888"/>"##,
        r - l,
        b - t
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{}</text>"#,
        0.5 * (l + r),
        t - 14.0,
        escape(&panel.title)
    );
    for (v, anchor, x) in [(fr.x0, "start", l), (fr.x1, "end", r)] {
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="{anchor}">{v}</text>"#,
            b + 14.0
        );
    }
    for v in [fr.y0, fr.y1] {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"#,
            l - 4.0,
            fr.py(v) + 4.0
        );
    }
    for &x in &panel.columns {
        let _ = writeln!(
            out,
            r##"<line x1="{0:.2}" y1="{t:.2}" x2="{0:.2}" y2="{b:.2}" stroke="#bbb" stroke-dasharray="2,3"/>"##,
            fr.px(x)
        );
    }
    for (i, c) in panel.curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let sw = 1.0 + 2.5 * c.weight / wmax;
        for piece in c.func.pieces() {
            let pts: Vec<String> = piece
                .nodes
                .iter()
                .zip(&piece.values)
                .map(|(&x, &v)| format!("{:.2},{:.2}", fr.px(x), fr.py(v)))
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="{sw:.2}" stroke-opacity="0.8"/>"#,
                pts.join(" ")
            );
        }
        for j in c.func.jump_set() {
            let _ = writeln!(
                out,
                r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="{color}" stroke-width="{sw:.2}" stroke-dasharray="5,3" stroke-opacity="0.8"/>"#,
                fr.px(j.x),
                fr.py(j.left),
                fr.py(j.right)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" fill="{color}">{}</text>"#,
            l + 6.0,
            t + 14.0 * (i + 1) as f64,
            escape(&c.label)
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mslift::sbv::{Interval, Piece};

    #[test]
    fn jumps_become_dashed_segments() {
        let f = SbvFunction::new(
            Interval::new(0.0, 1.0).unwrap(),
            vec![
                Piece::linear(0.0, 0.5, 0.0, 0.0),
                Piece::linear(0.5, 1.0, 1.0, 1.0),
            ],
        )
        .unwrap();
        let svg = render(&[Panel::new("a <b>").curve(f, 1.0, "u")]);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("stroke-dasharray=\"5,3\"").count(), 1);
        assert!(svg.contains("a &lt;b&gt;"));
    }

    #[test]
    fn empty_figure_is_well_formed() {
        let svg = render(&[]);
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
