//! Minimal self-contained SVG line plots: inline styling, linear axes,
//! vertical rules at marked radii. Plot generation never feeds back into
//! any numerical output.

use anyhow::Result;
use std::fmt::Write as _;
use std::path::Path;

const W: f64 = 800.0;
const H: f64 = 500.0;
const MARGIN: f64 = 60.0;

pub struct LinePlot<'a> {
    pub title: &'a str,
    pub points: &'a [(f64, f64)],
    /// Radii marked with vertical rules (solution nodes).
    pub marks: &'a [f64],
    pub x_label: &'a str,
    pub y_label: &'a str,
}

impl LinePlot<'_> {
    pub fn render(&self) -> String {
        let (x_lo, x_hi) = span(self.points.iter().map(|p| p.0));
        let (y_lo, y_hi) = span(self.points.iter().map(|p| p.1));
        let sx = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo).max(1e-300) * (W - 2.0 * MARGIN);
        let sy = |y: f64| H - MARGIN - (y - y_lo) / (y_hi - y_lo).max(1e-300) * (H - 2.0 * MARGIN);

        let mut svg = String::new();
        let _ = write!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="13">"#
        );
        let _ = write!(
            svg,
            r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#
        );
        let _ = write!(
            svg,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#,
            W / 2.0,
            escape(self.title)
        );
        // axes
        let _ = write!(
            svg,
            r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black" stroke-width="1"/>"#,
            m = MARGIN,
            b = H - MARGIN,
            r = W - MARGIN
        );
        let _ = write!(
            svg,
            r#"<line x1="{m}" y1="{t}" x2="{m}" y2="{b}" stroke="black" stroke-width="1"/>"#,
            m = MARGIN,
            t = MARGIN,
            b = H - MARGIN
        );
        // linear ticks
        for i in 0..=5 {
            let x = x_lo + (x_hi - x_lo) * i as f64 / 5.0;
            let y = y_lo + (y_hi - y_lo) * i as f64 / 5.0;
            let _ = write!(
                svg,
                r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
                sx(x),
                H - MARGIN + 20.0,
                format_tick(x)
            );
            let _ = write!(
                svg,
                r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
                MARGIN - 8.0,
                sy(y) + 4.0,
                format_tick(y)
            );
        }
        let _ = write!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            W / 2.0,
            H - 12.0,
            escape(self.x_label)
        );
        let _ = write!(
            svg,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            escape(self.y_label)
        );
        // zero line when the range crosses it
        if y_lo < 0.0 && y_hi > 0.0 {
            let _ = write!(
                svg,
                r##"<line x1="{}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#bbbbbb" stroke-width="1" stroke-dasharray="4 3"/>"##,
                MARGIN,
                W - MARGIN,
                y = sy(0.0)
            );
        }
        // node rules
        for &m in self.marks {
            let _ = write!(
                svg,
                r##"<line x1="{x:.2}" y1="{t}" x2="{x:.2}" y2="{b}" stroke="#cc3333" stroke-width="1" stroke-dasharray="6 4"/>"##,
                x = sx(m),
                t = MARGIN,
                b = H - MARGIN
            );
        }
        // polyline
        let mut pts = String::new();
        for &(x, y) in self.points {
            let _ = write!(pts, "{:.3},{:.3} ", sx(x), sy(y));
        }
        let _ = write!(
            svg,
            r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>"##,
            pts.trim_end()
        );
        svg.push_str("</svg>\n");
        svg
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::MAX;
    let mut hi = f64::MIN;
    for v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if lo > hi {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
