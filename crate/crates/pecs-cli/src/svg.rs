//! Minimal static SVG renderer for correlation curves.
//!
//! Output is deliberately plain: axes with ticks, one polyline per
//! series, optional asymmetric error bars, a dashed reference line at
//! g² = 1, and a legend. Log-x axes are supported for positive delays.

use std::fmt::Write as _;

const WIDTH: f64 = 840.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 25.0;
const MARGIN_TOP: f64 = 35.0;
const MARGIN_BOTTOM: f64 = 55.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Optional asymmetric error bars: (plus, minus) per point.
    pub errors: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone)]
pub struct PlotOptions {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    /// Dashed horizontal reference (g² = 1 by default).
    pub reference: Option<f64>,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self {
            title: String::new(),
            x_label: "tau (s)".into(),
            y_label: "g2".into(),
            log_x: false,
            reference: Some(1.0),
        }
    }
}

#[derive(Debug)]
pub enum SvgError {
    Empty,
    NonPositiveLogAxis,
}

impl std::fmt::Display for SvgError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SvgError::Empty => write!(f, "nothing to plot"),
            SvgError::NonPositiveLogAxis => {
                write!(f, "log-x plots need strictly positive delays")
            }
        }
    }
}

impl std::error::Error for SvgError {}

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw_step = (hi - lo) / target as f64;
    let magnitude = 10f64.powf(raw_step.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|&m| m * magnitude)
        .find(|&s| (hi - lo) / s <= target as f64)
        .unwrap_or(magnitude * 10.0);
    let start = (lo / step).ceil() as i64;
    let stop = (hi / step).floor() as i64;
    (start..=stop).map(|k| k as f64 * step).collect()
}

/// Renders the series into an SVG document.
pub fn render(series: &[Series], options: &PlotOptions) -> Result<String, SvgError> {
    if series.is_empty() || series.iter().all(|s| s.x.is_empty()) {
        return Err(SvgError::Empty);
    }
    let mut x_lo = f64::INFINITY;
    let mut x_hi = f64::NEG_INFINITY;
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for s in series {
        for (&x, &y) in s.x.iter().zip(&s.y) {
            if options.log_x && x <= 0.0 {
                continue;
            }
            x_lo = x_lo.min(x);
            x_hi = x_hi.max(x);
            y_lo = y_lo.min(y);
            y_hi = y_hi.max(y);
        }
        if let Some((plus, minus)) = &s.errors {
            for ((&y, &p), &m) in s.y.iter().zip(plus).zip(minus) {
                y_hi = y_hi.max(y + p);
                y_lo = y_lo.min(y - m);
            }
        }
    }
    if !x_lo.is_finite() || !(x_hi > x_lo) {
        return Err(if options.log_x {
            SvgError::NonPositiveLogAxis
        } else {
            SvgError::Empty
        });
    }
    if let Some(reference) = options.reference {
        y_lo = y_lo.min(reference);
        y_hi = y_hi.max(reference);
    }
    let y_pad = 0.05 * (y_hi - y_lo).max(1e-12);
    y_lo -= y_pad;
    y_hi += y_pad;

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x_of = |x: f64| -> f64 {
        let t = if options.log_x {
            (x.ln() - x_lo.ln()) / (x_hi.ln() - x_lo.ln())
        } else {
            (x - x_lo) / (x_hi - x_lo)
        };
        MARGIN_LEFT + t * plot_w
    };
    let y_of = |y: f64| -> f64 { MARGIN_TOP + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="13">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black" class="frame"/>"#
    );
    if !options.title.is_empty() {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="16">{}</text>"#,
            MARGIN_LEFT + plot_w / 2.0,
            options.title
        );
    }

    // X ticks.
    let x_ticks: Vec<f64> = if options.log_x {
        let lo_dec = x_lo.log10().ceil() as i32;
        let hi_dec = x_hi.log10().floor() as i32;
        (lo_dec..=hi_dec).map(|d| 10f64.powi(d)).collect()
    } else {
        nice_ticks(x_lo, x_hi, 6)
    };
    for &t in &x_ticks {
        let x = x_of(t);
        let y0 = MARGIN_TOP + plot_h;
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.1}" y1="{y0:.1}" x2="{x:.1}" y2="{:.1}" stroke="black" class="tick"/>"#,
            y0 + 5.0
        );
        let label = if options.log_x {
            format!("1e{}", t.log10().round() as i32)
        } else {
            format!("{t:.3e}")
        };
        let _ = writeln!(
            svg,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#,
            y0 + 20.0
        );
    }
    // Y ticks.
    for &t in &nice_ticks(y_lo, y_hi, 6) {
        let y = y_of(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{MARGIN_LEFT}" y2="{y:.1}" stroke="black" class="tick"/>"#,
            MARGIN_LEFT - 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{t:.3}</text>"#,
            MARGIN_LEFT - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        options.x_label
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        options.y_label
    );

    if let Some(reference) = options.reference {
        if reference >= y_lo && reference <= y_hi {
            let y = y_of(reference);
            let _ = writeln!(
                svg,
                r#"<line x1="{MARGIN_LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="gray" stroke-dasharray="6 4" class="reference"/>"#,
                MARGIN_LEFT + plot_w
            );
        }
    }

    for (idx, s) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        if let Some((plus, minus)) = &s.errors {
            for (((&x, &y), &p), &m) in s.x.iter().zip(&s.y).zip(plus).zip(minus) {
                if options.log_x && x <= 0.0 {
                    continue;
                }
                let (px, y1, y2) = (x_of(x), y_of(y + p), y_of(y - m));
                let _ = writeln!(
                    svg,
                    r#"<line x1="{px:.1}" y1="{y1:.1}" x2="{px:.1}" y2="{y2:.1}" stroke="{color}" stroke-opacity="0.55" class="errorbar"/>"#
                );
            }
        }
        let mut points = String::new();
        for (&x, &y) in s.x.iter().zip(&s.y) {
            if options.log_x && x <= 0.0 {
                continue;
            }
            let _ = write!(points, "{:.1},{:.1} ", x_of(x), y_of(y));
        }
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.6" class="series"/>"#,
            points.trim_end()
        );
        // Legend entry.
        let ly = MARGIN_TOP + 16.0 + idx as f64 * 18.0;
        let lx = MARGIN_LEFT + plot_w - 170.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3" class="legend-swatch"/>"#,
            lx + 22.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" class="legend-label">{}</text>"#,
            lx + 28.0,
            ly + 4.0,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_reference_line_and_series() {
        let series = vec![Series {
            label: "g2".into(),
            x: (1..100).map(|k| k as f64 * 1e-9).collect(),
            y: (1..100).map(|k| 1.0 - (-(k as f64) / 20.0).exp()).collect(),
            errors: None,
        }];
        let svg = render(&series, &PlotOptions::default()).unwrap();
        assert!(svg.contains("class=\"reference\""));
        assert_eq!(svg.matches("class=\"series\"").count(), 1);
    }

    #[test]
    fn renders_asymmetric_error_bars() {
        let n = 12;
        let series = vec![Series {
            label: "data".into(),
            x: (1..=n).map(|k| k as f64).collect(),
            y: vec![1.0; n],
            errors: Some((vec![0.3; n], vec![0.1; n])),
        }];
        let svg = render(
            &series,
            &PlotOptions {
                reference: None,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(svg.matches("class=\"errorbar\"").count(), n);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(render(&[], &PlotOptions::default()).is_err());
    }

    #[test]
    fn log_axis_requires_positive_delays() {
        let series = vec![Series {
            label: "bad".into(),
            x: vec![-1.0, 0.0],
            y: vec![1.0, 1.0],
            errors: None,
        }];
        let options = PlotOptions {
            log_x: true,
            ..Default::default()
        };
        assert!(render(&series, &options).is_err());
    }
}
