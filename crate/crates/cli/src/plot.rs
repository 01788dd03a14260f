//! Force-displacement overlays written as plain SVG.

use std::fmt::Write;

use snapid_core::oracle::ForceProfile;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 560.0;
const LEFT: f64 = 70.0;
const TOP: f64 = 40.0;
const PLOT_W: f64 = 700.0;
const PLOT_H: f64 = 460.0;
const TICKS: usize = 5;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Evenly spaced hues, so every run gets a distinct stroke.
fn color(i: usize, n: usize) -> String {
    let hue = 360.0 * i as f64 / n.max(1) as f64;
    format!("hsl({hue:.0},70%,42%)")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

/// One polyline per profile, axes with ticks, and a legend of run ids.
/// `profiles` must be non-empty.
pub fn render_svg(title: &str, profiles: &[ForceProfile]) -> String {
    let (x0, x1) = bounds(profiles.iter().flat_map(|p| p.displacement.iter().copied()));
    let (y0, y1) = bounds(profiles.iter().flat_map(|p| p.force.iter().copied()));
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * PLOT_W;
    let sy = |y: f64| TOP + PLOT_H - (y - y0) / (y1 - y0) * PLOT_H;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="16">{}</text>"#,
        LEFT + PLOT_W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{PLOT_W}" height="{PLOT_H}" fill="none" stroke="black"/>"#
    );
    for k in 0..=TICKS {
        let fx = x0 + (x1 - x0) * k as f64 / TICKS as f64;
        let fy = y0 + (y1 - y0) * k as f64 / TICKS as f64;
        let (px, py) = (sx(fx), sy(fy));
        let bottom = TOP + PLOT_H;
        let _ = writeln!(s, r#"<line x1="{px:.2}" y1="{bottom}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#, bottom + 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{fx:.3}</text>"#,
            bottom + 19.0
        );
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/>"#, LEFT - 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{fy:.3}</text>"#,
            LEFT - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">displacement</text>"#,
        LEFT + PLOT_W / 2.0,
        TOP + PLOT_H + 40.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">force</text>"#,
        TOP + PLOT_H / 2.0,
        TOP + PLOT_H / 2.0
    );

    let n = profiles.len();
    for (i, p) in profiles.iter().enumerate() {
        let mut points = String::new();
        for (k, (&x, &y)) in p.displacement.iter().zip(&p.force).enumerate() {
            if k > 0 {
                points.push(' ');
            }
            let _ = write!(points, "{:.2},{:.2}", sx(x), sy(y));
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.2" points="{points}"><title>{}</title></polyline>"#,
            color(i, n),
            escape(&p.run_id)
        );
    }

    let legend_x = LEFT + PLOT_W + 25.0;
    let row_h = (PLOT_H / n.max(1) as f64).min(20.0);
    for (i, p) in profiles.iter().enumerate() {
        let y = TOP + 8.0 + row_h * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{legend_x}" y1="{y:.2}" x2="{:.1}" y2="{y:.2}" stroke="{}" stroke-width="2"/>"#,
            legend_x + 24.0,
            color(i, n)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.2}">{}</text>"#,
            legend_x + 30.0,
            y + 4.0,
            escape(&p.run_id)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_polyline_and_legend_entry_per_run() {
        let profiles: Vec<_> = (0..4)
            .map(|i| ForceProfile::on_uniform_grid(format!("V{i}"), (0..20).map(|k| (k * i) as f64).collect()))
            .collect();
        let svg = render_svg("Runs & <fits>", &profiles);
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(svg.contains("Runs &amp; &lt;fits&gt;"));
        for i in 0..4 {
            assert!(svg.contains(&format!(">V{i}</text>")));
        }
    }

    #[test]
    fn flat_data_still_renders() {
        let p = ForceProfile::on_uniform_grid("c", vec![2.0; 5]);
        let svg = render_svg("flat", &[p]);
        assert!(!svg.contains("NaN"));
    }
}
