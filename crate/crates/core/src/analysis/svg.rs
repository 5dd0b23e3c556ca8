//! Minimal deterministic SVG line and bar charts.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, Default)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Optional shaded band, `(x, low, high)`.
    pub band: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub series: Vec<Series>,
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Self { lo: if log { 1.0 } else { 0.0 }, hi: if log { 10.0 } else { 1.0 }, log };
        }
        if log {
            let (a, b) = (lo.log10().floor(), hi.log10().ceil());
            return Self { lo: 10f64.powf(a), hi: 10f64.powf(if b > a { b } else { a + 1.0 }), log };
        }
        if hi == lo {
            let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
            return Self { lo: lo - pad, hi: hi + pad, log };
        }
        let step = nice_step((hi - lo) / 5.0);
        Self { lo: (lo / step).floor() * step, hi: (hi / step).ceil() * step, log }
    }

    fn frac(&self, v: f64) -> f64 {
        if self.log {
            (v.log10() - self.lo.log10()) / (self.hi.log10() - self.lo.log10())
        } else {
            (v - self.lo) / (self.hi - self.lo)
        }
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (self.lo.log10().round() as i32, self.hi.log10().round() as i32);
            return (a..=b).map(|e| 10f64.powi(e)).collect();
        }
        let step = nice_step((self.hi - self.lo) / 5.0);
        let first = (self.lo / step).ceil() as i64;
        let last = (self.hi / step).floor() as i64;
        (first..=last).map(|k| k as f64 * step).collect()
    }
}

fn nice_step(raw: f64) -> f64 {
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let m = if r <= 1.0 {
        1.0
    } else if r <= 2.0 {
        2.0
    } else if r <= 5.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn label(v: f64) -> String {
    let s = if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-3) { format!("{v:.0e}") } else { format!("{:.4}", v) };
    if s.contains('.') && !s.contains('e') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn frame(out: &mut String, title: &str, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        (TOP + H - BOTTOM) / 2.0,
        escape(y_label)
    );
}

fn px(x: &Axis, v: f64) -> f64 {
    LEFT + x.frac(v) * (W - LEFT - RIGHT)
}

fn py(y: &Axis, v: f64) -> f64 {
    H - BOTTOM - y.frac(v) * (H - TOP - BOTTOM)
}

fn axes(out: &mut String, x: &Axis, y: &Axis) {
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
    let _ = writeln!(out, r##"<path d="M{x0} {y1}V{y0}H{x1}" fill="none" stroke="#333"/>"##);
    for t in x.ticks() {
        let p = px(x, t);
        let _ = writeln!(out, r##"<line x1="{p:.2}" y1="{y0}" x2="{p:.2}" y2="{}" stroke="#333"/>"##, y0 + 5.0);
        let _ = writeln!(out, r#"<text x="{p:.2}" y="{}" text-anchor="middle">{}</text>"#, y0 + 18.0, label(t));
    }
    for t in y.ticks() {
        let p = py(y, t);
        let _ = writeln!(out, r##"<line x1="{}" y1="{p:.2}" x2="{x0}" y2="{p:.2}" stroke="#333"/>"##, x0 - 5.0);
        let _ = writeln!(out, r##"<line x1="{x0}" y1="{p:.2}" x2="{x1}" y2="{p:.2}" stroke="#eee"/>"##);
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, p + 4.0, label(t));
    }
}

fn legend(out: &mut String, names: &[&str]) {
    for (k, name) in names.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * k as f64;
        let x = W - RIGHT + 12.0;
        let c = PALETTE[k % PALETTE.len()];
        let _ = writeln!(out, r#"<rect x="{x}" y="{}" width="14" height="4" fill="{c}"/>"#, y - 4.0);
        let _ = writeln!(out, r#"<text x="{}" y="{y}">{}</text>"#, x + 20.0, escape(name));
    }
}

impl LineChart {
    /// Axis ranges are chosen to contain every point and band value.
    pub fn render(&self) -> String {
        let xs = self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0).chain(s.band.iter().map(|b| b.0)));
        let ys =
            self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1).chain(s.band.iter().flat_map(|b| [b.1, b.2])));
        let x = Axis::fit(xs, self.log_x);
        let y = Axis::fit(ys, false);
        let mut out = String::new();
        frame(&mut out, &self.title, &self.x_label, &self.y_label);
        axes(&mut out, &x, &y);
        let ok = |v: f64| v.is_finite() && (!self.log_x || v > 0.0);
        for (k, s) in self.series.iter().enumerate() {
            let c = PALETTE[k % PALETTE.len()];
            let band: Vec<&(f64, f64, f64)> = s.band.iter().filter(|b| ok(b.0)).collect();
            if band.len() > 1 {
                let mut d = String::new();
                for (i, b) in band.iter().enumerate() {
                    let _ = write!(d, "{}{:.2} {:.2}", if i == 0 { "M" } else { "L" }, px(&x, b.0), py(&y, b.2));
                }
                for b in band.iter().rev() {
                    let _ = write!(d, "L{:.2} {:.2}", px(&x, b.0), py(&y, b.1));
                }
                let _ = writeln!(out, r#"<path d="{d}Z" fill="{c}" fill-opacity="0.2" stroke="none"/>"#);
            }
            let mut d = String::new();
            for (i, p) in s.points.iter().filter(|p| ok(p.0) && p.1.is_finite()).enumerate() {
                let _ = write!(d, "{}{:.2} {:.2}", if i == 0 { "M" } else { "L" }, px(&x, p.0), py(&y, p.1));
            }
            if !d.is_empty() {
                let _ = writeln!(out, r#"<path d="{d}" fill="none" stroke="{c}" stroke-width="1.5"/>"#);
            }
        }
        legend(&mut out, &self.series.iter().map(|s| s.name.as_str()).collect::<Vec<_>>());
        out.push_str("</svg>\n");
        out
    }
}

#[derive(Debug, Clone, Default)]
pub struct BarChart {
    pub title: String,
    pub y_label: String,
    /// `(label, value, error)`; error bars are drawn when positive.
    pub bars: Vec<(String, f64, f64)>,
}

impl BarChart {
    pub fn render(&self) -> String {
        let y = Axis::fit(self.bars.iter().flat_map(|b| [0.0, b.1 + b.2.max(0.0)]), false);
        let mut out = String::new();
        frame(&mut out, &self.title, "", &self.y_label);
        let x = Axis { lo: 0.0, hi: self.bars.len().max(1) as f64, log: false };
        let (x0, x1, y0) = (LEFT, W - RIGHT, H - BOTTOM);
        let _ = writeln!(out, r##"<path d="M{x0} {TOP}V{y0}H{x1}" fill="none" stroke="#333"/>"##);
        for t in y.ticks() {
            let p = py(&y, t);
            let _ = writeln!(out, r##"<line x1="{}" y1="{p:.2}" x2="{x0}" y2="{p:.2}" stroke="#333"/>"##, x0 - 5.0);
            let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, p + 4.0, label(t));
        }
        for (k, (name, v, err)) in self.bars.iter().enumerate() {
            let c = PALETTE[k % PALETTE.len()];
            let (a, b) = (px(&x, k as f64 + 0.2), px(&x, k as f64 + 0.8));
            let top = py(&y, *v);
            let _ = writeln!(
                out,
                r#"<rect x="{a:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{c}"/>"#,
                b - a,
                y0 - top
            );
            if *err > 0.0 {
                let mid = (a + b) / 2.0;
                let _ = writeln!(
                    out,
                    r##"<path d="M{mid:.2} {:.2}V{:.2}" stroke="#000"/>"##,
                    py(&y, v + err),
                    py(&y, (v - err).max(y.lo))
                );
            }
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
                (a + b) / 2.0,
                y0 + 18.0,
                escape(name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coords(svg: &str) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for path in svg.split("d=\"").skip(1) {
            let d = &path[..path.find('"').unwrap()];
            for cmd in d.split(['M', 'L']).filter(|s| !s.is_empty()) {
                let nums: Vec<f64> = cmd.trim_end_matches('Z').split(' ').filter_map(|s| s.parse().ok()).collect();
                if nums.len() == 2 {
                    out.push((nums[0], nums[1]));
                }
            }
        }
        out
    }

    #[test]
    fn data_lies_inside_the_plot_area() {
        let chart = LineChart {
            title: "t".into(),
            log_x: true,
            series: vec![Series {
                name: "a".into(),
                points: vec![(1.0, 0.1), (7.0, 0.93), (50.0, 0.97)],
                band: vec![(1.0, 0.05, 0.2), (50.0, 0.96, 0.99)],
            }],
            ..Default::default()
        };
        let svg = chart.render();
        let pts = coords(&svg);
        assert!(pts.len() >= 3);
        for (x, y) in pts {
            assert!(
                (LEFT - 1e-9..=W - RIGHT + 1e-9).contains(&x) && (TOP - 1e-9..=H - BOTTOM + 1e-9).contains(&y),
                "{x} {y}"
            );
        }
        assert_eq!(svg, chart.render());
    }

    #[test]
    fn ticks_cover_range() {
        let a = Axis::fit([0.13, 0.97].into_iter(), false);
        assert!(a.lo <= 0.13 && a.hi >= 0.97);
        let t = a.ticks();
        assert!(t.len() >= 3);
        let l = Axis::fit([1.0, 200.0].into_iter(), true);
        assert_eq!((l.lo, l.hi), (1.0, 1000.0));
        assert_eq!(l.ticks().len(), 4);
    }

    #[test]
    fn bar_chart_escapes_labels() {
        let svg = BarChart { title: "a<b".into(), y_label: "s".into(), bars: vec![("x&y".into(), 1.0, 0.1)] }.render();
        assert!(svg.contains("a&lt;b") && svg.contains("x&amp;y"));
    }
}
