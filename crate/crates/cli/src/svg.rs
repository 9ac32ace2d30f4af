//! Self-contained SVG line chart for plot-data rows: mean generalization
//! error with its 95% band, and the influence curve.

use std::fmt::Write;

use boolinf::harness::PlotPoint;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;

pub fn line_chart(title: &str, x_label: &str, points: &[PlotPoint]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    if points.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let (x0, x1) = range(points.iter().map(|p| p.x));
    let (_, y1) = range(points.iter().flat_map(|p| [p.mean_gen_error_ood + p.ci95, p.influence]));
    let y1 = if y1 > 0.0 { y1 * 1.1 } else { 1.0 };
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0).max(1e-300) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - y / y1 * (H - 2.0 * PAD);

    let _ = writeln!(
        s,
        r#"<path d="M{PAD},{PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    for i in 0..=4 {
        let y = y1 * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{y:.3}</text>"#, PAD - 4.0, sy(y) + 4.0);
    }
    for p in points {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, sx(p.x), H - PAD + 16.0, p.x);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 10.0, escape(x_label));

    let band: Vec<String> = points
        .iter()
        .map(|p| format!("{:.1},{:.1}", sx(p.x), sy(p.mean_gen_error_ood + p.ci95)))
        .chain(
            points
                .iter()
                .rev()
                .map(|p| format!("{:.1},{:.1}", sx(p.x), sy((p.mean_gen_error_ood - p.ci95).max(0.0)))),
        )
        .collect();
    let _ = writeln!(s, r##"<polygon points="{}" fill="#1f77b4" fill-opacity="0.2"/>"##, band.join(" "));
    polyline(&mut s, points.iter().map(|p| (sx(p.x), sy(p.mean_gen_error_ood))), "#1f77b4", "");
    polyline(&mut s, points.iter().map(|p| (sx(p.x), sy(p.influence))), "#d62728", r#" stroke-dasharray="6 4""#);
    let _ = writeln!(s, r##"<text x="{}" y="40" fill="#1f77b4">gen error (ood)</text>"##, W - PAD - 150.0);
    let _ = writeln!(s, r##"<text x="{}" y="56" fill="#d62728">influence</text>"##, W - PAD - 150.0);
    s.push_str("</svg>\n");
    s
}

fn polyline(s: &mut String, pts: impl Iterator<Item = (f64, f64)>, color: &str, extra: &str) {
    let pts: Vec<String> = pts.map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{extra}/>"#,
        pts.join(" ")
    );
}

fn range(v: impl Iterator<Item = f64>) -> (f64, f64) {
    v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_is_well_formed() {
        let pts: Vec<PlotPoint> = (1..=4)
            .map(|w| PlotPoint {
                series: "w".into(),
                x: w as f64,
                mean_gen_error_ood: 0.1 * w as f64,
                ci95: 0.01,
                influence: 0.1,
            })
            .collect();
        let svg = line_chart("a < b", "window size", &pts);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a &lt; b"));
        assert!(line_chart("empty", "x", &[]).ends_with("</svg>\n"));
    }
}
