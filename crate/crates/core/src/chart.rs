//! Minimal static SVG line and grouped-bar charts.
//!
//! Output depends only on the input data; numbers are printed with fixed
//! precision so identical inputs give identical bytes.

use std::fmt::Write;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct LineSeries {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarSeries {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Lines(Vec<LineSeries>),
    /// One group per category, one bar per series within a group.
    Bars {
        categories: Vec<String>,
        series: Vec<BarSeries>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub body: Body,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Finite range padded to a non-empty interval.
fn span(values: impl Iterator<Item = f64>, include_zero: bool) -> (f64, f64) {
    let (mut lo, mut hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if include_zero {
        lo = lo.min(0.0);
        hi = hi.max(0.0);
    }
    if hi - lo < 1e-12 * hi.abs().max(1.0) {
        let pad = hi.abs().max(1.0) * 0.5;
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn label(v: f64) -> String {
    let a = v.abs();
    let s = if a >= 1e6 {
        format!("{:.2}M", v / 1e6)
    } else if a >= 1e4 {
        format!("{:.1}k", v / 1e3)
    } else if a >= 100.0 || a == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    };
    if s.starts_with('-') && s[1..].chars().all(|c| matches!(c, '0' | '.' | 'k' | 'M')) {
        s[1..].to_string()
    } else {
        s
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

impl Chart {
    pub fn render(&self) -> String {
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{HEIGHT:.0}" viewBox="0 0 {WIDTH:.0} {HEIGHT:.0}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            (WIDTH - RIGHT + LEFT) / 2.0,
            escape(&self.title)
        );
        let legend = match &self.body {
            Body::Lines(series) => self.render_lines(&mut svg, series),
            Body::Bars { categories, series } => self.render_bars(&mut svg, categories, series),
        };
        for (i, (name, dashed)) in legend.iter().enumerate() {
            let y = TOP + 10.0 + 18.0 * i as f64;
            let x = WIDTH - RIGHT + 15.0;
            let color = PALETTE[i % PALETTE.len()];
            let dash = if *dashed { r#" stroke-dasharray="6 3""# } else { "" };
            let _ = writeln!(
                svg,
                r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="3"{dash}/>"#,
                x + 20.0
            );
            let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, x + 26.0, y + 4.0, escape(name));
        }
        svg.push_str("</svg>\n");
        svg
    }

    fn axes(&self, svg: &mut String, f: &Frame) {
        let (xa, xb) = (LEFT, WIDTH - RIGHT);
        let (ya, yb) = (HEIGHT - BOTTOM, TOP);
        let _ = writeln!(
            svg,
            r##"<path d="M{xa:.1},{yb:.1} V{ya:.1} H{xb:.1}" fill="none" stroke="#333"/>"##
        );
        for i in 0..=TICKS {
            let v = f.y0 + (f.y1 - f.y0) * i as f64 / TICKS as f64;
            let y = f.py(v);
            let _ = writeln!(
                svg,
                r##"<line x1="{xa:.1}" y1="{y:.1}" x2="{xb:.1}" y2="{y:.1}" stroke="#ddd"/>"##
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                xa - 6.0,
                y + 4.0,
                label(v)
            );
        }
        if f.y0 < 0.0 && f.y1 > 0.0 {
            let y = f.py(0.0);
            let _ = writeln!(
                svg,
                r##"<line x1="{xa:.1}" y1="{y:.1}" x2="{xb:.1}" y2="{y:.1}" stroke="#333"/>"##
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            (xa + xb) / 2.0,
            HEIGHT - 15.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="18" y="{0:.1}" text-anchor="middle" transform="rotate(-90 18 {0:.1})">{1}</text>"#,
            (ya + yb) / 2.0,
            escape(&self.y_label)
        );
    }

    fn render_lines(&self, svg: &mut String, series: &[LineSeries]) -> Vec<(String, bool)> {
        let all = || series.iter().flat_map(|s| s.points.iter());
        let (x0, x1) = span(all().map(|p| p.0), false);
        let (y0, y1) = span(all().map(|p| p.1), true);
        let f = Frame { x0, x1, y0, y1 };
        self.axes(svg, &f);
        let mut xs: Vec<f64> = all().map(|p| p.0).filter(|x| x.is_finite()).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let step = xs.len().div_ceil(12).max(1);
        for &x in xs.iter().step_by(step) {
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                f.px(x),
                HEIGHT - BOTTOM + 18.0,
                label(x)
            );
        }
        for (i, s) in series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<String> = s
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| format!("{:.1},{:.1}", f.px(x), f.py(y)))
                .collect();
            let dash = if s.dashed { r#" stroke-dasharray="6 3""# } else { "" };
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
                pts.join(" ")
            );
            for p in &pts {
                let (cx, cy) = p.split_once(',').unwrap_or(("0", "0"));
                let _ = writeln!(svg, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>"#);
            }
        }
        series.iter().map(|s| (s.name.clone(), s.dashed)).collect()
    }

    fn render_bars(&self, svg: &mut String, categories: &[String], series: &[BarSeries]) -> Vec<(String, bool)> {
        let (y0, y1) = span(series.iter().flat_map(|s| s.values.iter().copied()), true);
        let f = Frame {
            x0: 0.0,
            x1: categories.len().max(1) as f64,
            y0,
            y1,
        };
        self.axes(svg, &f);
        let group = (WIDTH - LEFT - RIGHT) / categories.len().max(1) as f64;
        let bar = group * 0.8 / series.len().max(1) as f64;
        let base = f.py(0.0);
        for (c, name) in categories.iter().enumerate() {
            let gx = f.px(c as f64);
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                gx + group / 2.0,
                HEIGHT - BOTTOM + 18.0,
                escape(name)
            );
            for (i, s) in series.iter().enumerate() {
                let v = s.values.get(c).copied().filter(|v| v.is_finite()).unwrap_or(0.0);
                let y = f.py(v);
                let _ = writeln!(
                    svg,
                    r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}"/>"#,
                    gx + group * 0.1 + bar * i as f64,
                    y.min(base),
                    bar,
                    (y - base).abs(),
                    PALETTE[i % PALETTE.len()]
                );
            }
        }
        series.iter().map(|s| (s.name.clone(), false)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lines() -> Chart {
        Chart {
            title: "Cost <&> capacity".into(),
            x_label: "MW".into(),
            y_label: "cost".into(),
            body: Body::Lines(vec![
                LineSeries {
                    name: "a".into(),
                    points: vec![(0.0, 5.0), (300.0, 3.0), (600.0, 1.0)],
                    dashed: false,
                },
                LineSeries {
                    name: "b".into(),
                    points: vec![(0.0, 5.0), (300.0, 4.0), (600.0, f64::NAN)],
                    dashed: true,
                },
            ]),
        }
    }

    #[test]
    fn well_formed_and_deterministic() {
        let a = lines().render();
        assert_eq!(a, lines().render());
        let doc = roxmltree::Document::parse(&a).unwrap();
        assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 2);
        assert!(a.contains("Cost &lt;&amp;&gt; capacity"));
    }

    #[test]
    fn grouped_bars_count() {
        let months: Vec<String> = (1..=12).map(|m| format!("{m:02}")).collect();
        let chart = Chart {
            title: "t".into(),
            x_label: "month".into(),
            y_label: "v".into(),
            body: Body::Bars {
                categories: months,
                series: (0..3)
                    .map(|k| BarSeries {
                        name: format!("s{k}"),
                        values: (0..12).map(|m| (m as f64 - 4.0) * k as f64).collect(),
                    })
                    .collect(),
            },
        };
        let svg = chart.render();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        // Background plus 36 bars.
        assert_eq!(doc.descendants().filter(|n| n.has_tag_name("rect")).count(), 37);
    }

    #[test]
    fn flat_and_empty_inputs() {
        let flat = Chart {
            title: "z".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            body: Body::Lines(vec![LineSeries {
                name: "zero".into(),
                points: vec![(0.0, 0.0), (1.0, 0.0)],
                dashed: false,
            }]),
        };
        roxmltree::Document::parse(&flat.render()).unwrap();
        let empty = Chart {
            body: Body::Lines(Vec::new()),
            ..flat
        };
        roxmltree::Document::parse(&empty.render()).unwrap();
        assert_eq!(label(-0.0001), "0.00");
    }
}
