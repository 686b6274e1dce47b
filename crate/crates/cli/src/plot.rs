//! Standalone SVG rendering of capacity-vs-cycle predictions, one colored
//! series pair per battery (solid = measured, dashed = predicted).

/// One battery's series: (cycle, actual Ah, predicted Ah) triples.
pub struct BatterySeries {
    pub battery_id: String,
    pub points: Vec<(u32, f64, f64)>,
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 160.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

pub fn capacity_plot_svg(series: &[BatterySeries]) -> String {
    let mut min_cycle = f64::INFINITY;
    let mut max_cycle = f64::NEG_INFINITY;
    let mut min_cap = f64::INFINITY;
    let mut max_cap = f64::NEG_INFINITY;
    for s in series {
        for &(cycle, actual, pred) in &s.points {
            min_cycle = min_cycle.min(cycle as f64);
            max_cycle = max_cycle.max(cycle as f64);
            min_cap = min_cap.min(actual.min(pred));
            max_cap = max_cap.max(actual.max(pred));
        }
    }
    if !min_cycle.is_finite() {
        min_cycle = 0.0;
        max_cycle = 1.0;
        min_cap = 0.0;
        max_cap = 1.0;
    }
    if max_cycle <= min_cycle {
        max_cycle = min_cycle + 1.0;
    }
    if max_cap <= min_cap {
        max_cap = min_cap + 1.0;
    }
    // A little breathing room on the y-axis.
    let pad = 0.05 * (max_cap - min_cap);
    let (y_lo, y_hi) = (min_cap - pad, max_cap + pad);

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |c: f64| MARGIN_L + (c - min_cycle) / (max_cycle - min_cycle) * plot_w;
    let sy = |v: f64| MARGIN_T + (y_hi - v) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">Capacity vs cycle: measured (solid) and predicted (dashed)</text>\n",
        MARGIN_L + plot_w / 2.0
    ));

    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y1}\" x2=\"{x1}\" y2=\"{y1}\" stroke=\"black\"/>\n<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n",
        x0 = MARGIN_L,
        x1 = MARGIN_L + plot_w,
        y0 = MARGIN_T,
        y1 = MARGIN_T + plot_h
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">cycle</text>\n",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">capacity (Ah)</text>\n",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0
    ));
    for (value, along_x) in [
        (min_cycle, true),
        (max_cycle, true),
        (y_lo, false),
        (y_hi, false),
    ] {
        if along_x {
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{value:.0}</text>\n",
                sx(value),
                MARGIN_T + plot_h + 18.0
            ));
        } else {
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{value:.3}</text>\n",
                MARGIN_L - 6.0,
                sy(value) + 4.0
            ));
        }
    }

    // One solid + one dashed polyline per battery.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let actual: String = s
            .points
            .iter()
            .map(|&(c, a, _)| format!("{:.2},{:.2} ", sx(c as f64), sy(a)))
            .collect();
        let predicted: String = s
            .points
            .iter()
            .map(|&(c, _, p)| format!("{:.2},{:.2} ", sx(c as f64), sy(p)))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            actual.trim_end()
        ));
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>\n",
            predicted.trim_end()
        ));
        let legend_y = MARGIN_T + 8.0 + 18.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{legend_y}\" x2=\"{x2}\" y2=\"{legend_y}\" stroke=\"{color}\" stroke-width=\"3\"/>\n",
            x = WIDTH - MARGIN_R + 12.0,
            x2 = WIDTH - MARGIN_R + 36.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            WIDTH - MARGIN_R + 42.0,
            legend_y + 4.0,
            s.battery_id
        ));
    }

    svg.push_str("</svg>\n");
    svg
}
