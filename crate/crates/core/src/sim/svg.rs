//! Minimal two-panel line plots: employed on the left, unemployed on the right.

use std::fmt::Write;

use super::{Curve, ExperimentResult};
use crate::model::IncomeState;

const W: f64 = 900.0;
const H: f64 = 380.0;
const PANEL_W: f64 = 380.0;
const PANEL_H: f64 = 280.0;
const TOP: f64 = 50.0;
const LEFT: [f64; 2] = [60.0, 510.0];
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
];

pub struct Series<'a> {
    pub label: String,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

fn bounds(series: &[Series]) -> (f64, f64, f64, f64) {
    let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for (&x, &y) in s.x.iter().zip(s.y) {
            if x.is_finite() && y.is_finite() {
                b = (b.0.min(x), b.1.max(x), b.2.min(y), b.3.max(y));
            }
        }
    }
    if !b.0.is_finite() {
        return (0.0, 1.0, 0.0, 1.0);
    }
    if b.1 <= b.0 {
        b.1 = b.0 + 1.0;
    }
    if b.3 <= b.2 {
        b.3 = b.2 + 1.0;
    }
    let pad = 0.05 * (b.3 - b.2);
    (b.0, b.1, b.2 - pad, b.3 + pad)
}

fn panel(out: &mut String, left: f64, title: &str, series: &[Series]) {
    let (x0, x1, y0, y1) = bounds(series);
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * PANEL_W;
    let sy = |y: f64| TOP + PANEL_H - (y - y0) / (y1 - y0) * PANEL_H;
    let _ = writeln!(
        out,
        r#"<rect x="{left}" y="{TOP}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{title}</text>"#,
        left + PANEL_W / 2.0,
        TOP - 10.0
    );
    for (v, anchor, x, y) in [
        (x0, "start", left, TOP + PANEL_H + 16.0),
        (x1, "end", left + PANEL_W, TOP + PANEL_H + 16.0),
    ] {
        let _ = writeln!(out, r#"<text x="{x}" y="{y}" text-anchor="{anchor}" font-size="11">{v:.2}</text>"#);
    }
    for (v, y) in [(y0, TOP + PANEL_H), (y1, TOP + 10.0)] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{y}" text-anchor="end" font-size="11">{v:.3}</text>"#,
            left - 4.0
        );
    }
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .x
            .iter()
            .zip(s.y)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let color = COLORS[i % COLORS.len()];
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 16.0 + 14.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{ly}" font-size="11" fill="{color}">{}</text>"#,
            left + 8.0,
            s.label
        );
    }
}

/// Two side-by-side panels.
pub fn two_panel(title: &str, panels: [(&str, Vec<Series>); 2]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="16">{title}</text>"#,
        W / 2.0
    );
    for (k, (name, series)) in panels.iter().enumerate() {
        panel(&mut out, LEFT[k], name, series);
    }
    out.push_str("</svg>\n");
    out
}

fn series_for<'a>(curves: &[&'a Curve]) -> Vec<Series<'a>> {
    curves
        .iter()
        .map(|c| Series {
            label: format!("{} t={}", c.label, c.t),
            x: &c.x,
            y: &c.y,
        })
        .collect()
}

/// Figure for all curves of one kind. Curves without an income state go in
/// the left panel.
pub fn experiment_figure(res: &ExperimentResult, kind: &str) -> String {
    let of = |y: Option<IncomeState>| -> Vec<&Curve> {
        res.curves.iter().filter(|c| c.kind == kind && c.income == y).collect()
    };
    let title = format!("{} {}", res.name, kind);
    let e = of(Some(IncomeState::Employed));
    if e.is_empty() {
        let all = of(None);
        return two_panel(&title, [(kind, series_for(&all)), ("", Vec::new())]);
    }
    let u = of(Some(IncomeState::Unemployed));
    two_panel(&title, [("employed", series_for(&e)), ("unemployed", series_for(&u))])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_formed() {
        let x = [0.0, 1.0, 2.0];
        let y = [1.0, 0.5, f64::NAN];
        let doc = two_panel(
            "t",
            [
                ("a", vec![Series { label: "s".into(), x: &x, y: &y }]),
                ("b", Vec::new()),
            ],
        );
        assert!(doc.starts_with("<svg") && doc.trim_end().ends_with("</svg>"));
        assert_eq!(doc.matches("<polyline").count(), 1);
        assert!(!doc.contains("NaN"));
    }
}
