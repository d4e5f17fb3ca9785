//! Minimal SVG line/scatter chart for log–log sweep plots.

use std::fmt::Write as _;

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// (intercept, slope) of the fitted line.
    pub fitted: Option<(f64, f64)>,
    /// Slope of the predicted line, drawn through the first point.
    pub predicted: Option<f64>,
}

pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const ML: f64 = 70.0;
const MR: f64 = 20.0;
const MT: f64 = 40.0;
const MB: f64 = 60.0;
const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn nice_range(lo: f64, hi: f64) -> (f64, f64, f64) {
    let span = (hi - lo).max(1e-9);
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    ((lo / step).floor() * step, (hi / step).ceil() * step, step)
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render(chart: &Chart) -> String {
    let xs = chart.series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let ys = chart.series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
    let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (mut y0, mut y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    let (x0, x1) = if x0.is_finite() { (x0, x1) } else { (0.0, 1.0) };
    for s in &chart.series {
        if let Some(first) = s.points.first() {
            let last_x = s.points.last().unwrap().0;
            if let Some((a, b)) = s.fitted {
                y0 = y0.min(a + b * x0).min(a + b * x1);
                y1 = y1.max(a + b * x0).max(a + b * x1);
            }
            if let Some(b) = s.predicted {
                let yy = first.1 + b * (last_x - first.0);
                y0 = y0.min(yy);
                y1 = y1.max(yy);
            }
        }
    }
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    let (xa, xb, xs) = nice_range(x0, x1);
    let (ya, yb, ys) = nice_range(y0, y1);
    let px = |x: f64| ML + (x - xa) / (xb - xa) * (W - ML - MR);
    let py = |y: f64| H - MB - (y - ya) / (yb - ya) * (H - MT - MB);

    let mut o = String::new();
    let _ = writeln!(o, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(o, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(o, r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, esc(&chart.title));
    // grid and ticks
    let mut k = 0;
    while xa + k as f64 * xs <= xb + 1e-9 {
        let x = xa + k as f64 * xs;
        let _ = writeln!(o, r##"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="#ddd" stroke-dasharray="3,3"/>"##, px(x), MT, H - MB);
        let _ = writeln!(o, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, px(x), H - MB + 16.0, fmt_tick(x));
        k += 1;
    }
    let mut k = 0;
    while ya + k as f64 * ys <= yb + 1e-9 {
        let y = ya + k as f64 * ys;
        let _ = writeln!(o, r##"<line x1="{1:.2}" y1="{0:.2}" x2="{2:.2}" y2="{0:.2}" stroke="#ddd" stroke-dasharray="3,3"/>"##, py(y), ML, W - MR);
        let _ = writeln!(o, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, ML - 6.0, py(y) + 4.0, fmt_tick(y));
        k += 1;
    }
    let _ = writeln!(o, r#"<rect x="{ML}" y="{MT}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#, W - ML - MR, H - MT - MB);
    let _ = writeln!(o, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, (ML + W - MR) / 2.0, H - 18.0, esc(&chart.x_label));
    let _ = writeln!(
        o,
        r#"<text transform="translate(18,{:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (MT + H - MB) / 2.0,
        esc(&chart.y_label)
    );

    for (i, s) in chart.series.iter().enumerate() {
        let c = COLOURS[i % COLOURS.len()];
        if let Some((a, b)) = s.fitted {
            let _ = writeln!(
                o,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{c}" stroke-width="1.5"/>"#,
                px(x0),
                py(a + b * x0),
                px(x1),
                py(a + b * x1)
            );
        }
        if let (Some(b), Some(first)) = (s.predicted, s.points.first()) {
            let _ = writeln!(
                o,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{c}" stroke-width="1" stroke-dasharray="6,4"/>"#,
                px(x0),
                py(first.1 + b * (x0 - first.0)),
                px(x1),
                py(first.1 + b * (x1 - first.0))
            );
        }
        for &(x, y) in &s.points {
            let _ = writeln!(o, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}"/>"#, px(x), py(y));
        }
        let ly = MT + 14.0 + 16.0 * i as f64;
        let _ = writeln!(o, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{c}"/>"#, ML + 14.0, ly - 4.0);
        let _ = writeln!(o, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, ML + 24.0, ly, esc(&s.label));
    }
    let _ = writeln!(o, r##"<text x="{:.1}" y="{:.1}" font-size="10" fill="#555">solid: least-squares fit, dashed: predicted slope</text>"##, W - MR - 4.0 - 260.0, H - MB - 8.0);
    o.push_str("</svg>\n");
    o
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{:.2}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_well_formed() {
        let chart = Chart {
            title: "a < b".into(),
            x_label: "ln γ".into(),
            y_label: "ln ‖u‖".into(),
            series: vec![Series {
                label: "i = 1".into(),
                points: vec![(0.0, 1.0), (0.5, 2.0), (1.0, 3.0)],
                fitted: Some((1.0, 2.0)),
                predicted: Some(1.9),
            }],
        };
        let s = render(&chart);
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("a &lt; b"));
        assert_eq!(s.matches("<circle").count(), 4);
        assert_eq!(render(&chart), s);
    }

    #[test]
    fn ticks() {
        assert_eq!(fmt_tick(1.5), "1.5");
        assert_eq!(fmt_tick(2.0), "2");
        assert_eq!(fmt_tick(-0.0001), "0");
    }
}
