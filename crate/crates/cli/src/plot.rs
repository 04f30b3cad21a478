//! Minimal static SVG rendering of fidelity-versus-time traces.

use std::fmt::Write as FmtWrite;

use oscswap_core::lindblad::Trajectory;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

struct Trace<'a> {
    label: &'a str,
    color: &'a str,
    points: Vec<(f64, f64)>,
}

/// Renders a single-panel fidelity-vs-time plot; the open-system trace in
/// red, the decoherence-free trace in blue when supplied.
pub fn fidelity_svg(
    title: &str,
    open_or_only: &Trajectory,
    ideal: Option<&Trajectory>,
    open_is_ideal: bool,
) -> String {
    let mut traces = Vec::new();
    if let Some(ideal) = ideal {
        traces.push(Trace {
            label: "no decoherence",
            color: "#1f4fd8",
            points: points_of(ideal),
        });
    }
    traces.push(Trace {
        label: if open_is_ideal {
            "no decoherence"
        } else {
            "open system"
        },
        color: if open_is_ideal { "#1f4fd8" } else { "#d82f2f" },
        points: points_of(open_or_only),
    });

    let t_max = traces
        .iter()
        .flat_map(|t| t.points.iter().map(|p| p.0))
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let f_min = traces
        .iter()
        .flat_map(|t| t.points.iter().map(|p| p.1))
        .fold(1.0f64, f64::min)
        .min(0.999);
    let f_lo = (f_min - 0.05).max(0.0);

    let x = |t: f64| MARGIN_L + (WIDTH - MARGIN_L - MARGIN_R) * t / t_max;
    let y = |f: f64| HEIGHT - MARGIN_B - (HEIGHT - MARGIN_T - MARGIN_B) * (f - f_lo) / (1.0 - f_lo);

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    );
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" \
         text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        xml_escape(title)
    );

    // Axes and ticks.
    let _ = write!(
        svg,
        "<g stroke=\"#333\" stroke-width=\"1\" fill=\"none\">\
         <path d=\"M {x0} {y0} L {x0} {y1} L {x1} {y1}\"/></g>\n",
        x0 = MARGIN_L,
        y0 = MARGIN_T,
        x1 = WIDTH - MARGIN_R,
        y1 = HEIGHT - MARGIN_B,
    );
    for k in 0..=6 {
        let t = t_max * k as f64 / 6.0;
        let px = x(t);
        let _ = write!(
            svg,
            "<line x1=\"{px}\" y1=\"{}\" x2=\"{px}\" y2=\"{}\" stroke=\"#333\"/>\n\
             <text x=\"{px}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
             text-anchor=\"middle\">{:.2}</text>\n",
            HEIGHT - MARGIN_B,
            HEIGHT - MARGIN_B + 6.0,
            HEIGHT - MARGIN_B + 22.0,
            t
        );
    }
    for k in 0..=5 {
        let f = f_lo + (1.0 - f_lo) * k as f64 / 5.0;
        let py = y(f);
        let _ = write!(
            svg,
            "<line x1=\"{}\" y1=\"{py}\" x2=\"{}\" y2=\"{py}\" stroke=\"#333\"/>\n\
             <line x1=\"{}\" y1=\"{py}\" x2=\"{}\" y2=\"{py}\" stroke=\"#ddd\"/>\n\
             <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
             text-anchor=\"end\">{:.3}</text>\n",
            MARGIN_L - 6.0,
            MARGIN_L,
            MARGIN_L,
            WIDTH - MARGIN_R,
            MARGIN_L - 10.0,
            py + 4.0,
            f
        );
    }
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\">time (us)</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 12.0
    );
    let _ = write!(
        svg,
        "<text x=\"18\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">fidelity</text>\n",
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0
    );

    for trace in &traces {
        let mut path = String::new();
        for (i, &(t, f)) in trace.points.iter().enumerate() {
            let cmd = if i == 0 { 'M' } else { 'L' };
            let _ = write!(path, "{cmd} {:.3} {:.3} ", x(t), y(f.clamp(f_lo, 1.0)));
        }
        let _ = write!(
            svg,
            "<path d=\"{path}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.8\"/>\n",
            trace.color
        );
    }

    // Legend.
    let mut ly = MARGIN_T + 14.0;
    for trace in &traces {
        let _ = write!(
            svg,
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{}\" \
             stroke-width=\"2.5\"/>\n\
             <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            MARGIN_L + 12.0,
            MARGIN_L + 42.0,
            trace.color,
            MARGIN_L + 48.0,
            ly + 4.0,
            trace.label
        );
        ly += 18.0;
    }

    svg.push_str("</svg>\n");
    svg
}

fn points_of(trajectory: &Trajectory) -> Vec<(f64, f64)> {
    trajectory
        .samples
        .iter()
        .filter_map(|s| s.fidelity.map(|f| (s.time * 1e6, f)))
        .collect()
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
