//! Hand-rolled SVG line plot of accuracy against the noise level, one curve
//! per (bound, metric, transform) series with a shaded +-1 stddev band.
//! Byte-deterministic output: fixed float formatting, series sorted by key.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::report::SummaryRow;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const X_MAX: f64 = 1.9;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn x_pos(b: f64) -> f64 {
    MARGIN_LEFT + (b / X_MAX) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
}

fn y_pos(accuracy: f64) -> f64 {
    let clamped = accuracy.clamp(0.0, 1.0);
    HEIGHT - MARGIN_BOTTOM - clamped * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
}

/// Render the accuracy-vs-noise curves; `summary` rows may arrive in any
/// order.
pub fn render_accuracy_plot(summary: &[SummaryRow]) -> String {
    let mut series: BTreeMap<(&'static str, &'static str, &'static str), Vec<&SummaryRow>> =
        BTreeMap::new();
    for row in summary {
        series
            .entry((row.bound.as_str(), row.metric, row.transform))
            .or_default()
            .push(row);
    }
    for rows in series.values_mut() {
        rows.sort_by_key(|r| r.b_tenths);
    }

    let mut svg = String::new();
    writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    )
    .unwrap();
    writeln!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>").unwrap();

    // grid and axes
    for tick in 0..=10 {
        let acc = tick as f64 / 10.0;
        let y = y_pos(acc);
        writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#dddddd\" stroke-width=\"1\"/>",
            MARGIN_LEFT,
            WIDTH - MARGIN_RIGHT
        )
        .unwrap();
        writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\" fill=\"#333333\">{acc:.1}</text>",
            MARGIN_LEFT - 8.0,
            y + 4.0
        )
        .unwrap();
    }
    for tick in 0..=19 {
        let b = tick as f64 / 10.0;
        let x = x_pos(b);
        if tick % 2 == 0 || tick == 19 {
            writeln!(
                svg,
                "<text x=\"{x:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\" fill=\"#333333\">{b:.1}</text>",
                HEIGHT - MARGIN_BOTTOM + 20.0
            )
            .unwrap();
        }
        writeln!(
            svg,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#eeeeee\" stroke-width=\"1\"/>",
            MARGIN_TOP,
            HEIGHT - MARGIN_BOTTOM
        )
        .unwrap();
    }
    writeln!(
        svg,
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\" stroke-width=\"1.5\"/>",
        MARGIN_LEFT,
        HEIGHT - MARGIN_BOTTOM,
        WIDTH - MARGIN_RIGHT,
        HEIGHT - MARGIN_BOTTOM
    )
    .unwrap();
    writeln!(
        svg,
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\" stroke-width=\"1.5\"/>",
        MARGIN_LEFT,
        MARGIN_TOP,
        MARGIN_LEFT,
        HEIGHT - MARGIN_BOTTOM
    )
    .unwrap();
    writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"14\" text-anchor=\"middle\" fill=\"black\">noise level b</text>",
        (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
        HEIGHT - 15.0
    )
    .unwrap();
    writeln!(
        svg,
        "<text x=\"18\" y=\"{:.2}\" font-size=\"14\" text-anchor=\"middle\" fill=\"black\" transform=\"rotate(-90 18 {:.2})\">accuracy</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0
    )
    .unwrap();

    // shaded bands first so curves draw on top
    for (idx, rows) in series.values().enumerate() {
        if rows.len() < 2 {
            continue;
        }
        let color = PALETTE[idx % PALETTE.len()];
        let mut d = String::new();
        for (i, row) in rows.iter().enumerate() {
            let cmd = if i == 0 { 'M' } else { 'L' };
            write!(
                d,
                "{cmd}{:.2},{:.2} ",
                x_pos(row.b_value()),
                y_pos(row.mean + row.stddev)
            )
            .unwrap();
        }
        for row in rows.iter().rev() {
            write!(
                d,
                "L{:.2},{:.2} ",
                x_pos(row.b_value()),
                y_pos(row.mean - row.stddev)
            )
            .unwrap();
        }
        writeln!(
            svg,
            "<path d=\"{}Z\" fill=\"{color}\" fill-opacity=\"0.15\" stroke=\"none\"/>",
            d.trim_end()
        )
        .unwrap();
    }

    for (idx, ((bound, metric, transform), rows)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let points: String = rows
            .iter()
            .map(|row| format!("{:.2},{:.2}", x_pos(row.b_value()), y_pos(row.mean)))
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(
            svg,
            "<polyline points=\"{points}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>"
        )
        .unwrap();
        for row in rows {
            writeln!(
                svg,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>",
                x_pos(row.b_value()),
                y_pos(row.mean)
            )
            .unwrap();
        }
        let legend_y = MARGIN_TOP + 16.0 * idx as f64;
        writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{legend_y:.2}\" x2=\"{:.2}\" y2=\"{legend_y:.2}\" stroke=\"{color}\" stroke-width=\"3\"/>",
            WIDTH - 260.0,
            WIDTH - 235.0
        )
        .unwrap();
        writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"#333333\">{bound} / {metric} / {transform}</text>",
            WIDTH - 228.0,
            legend_y + 4.0
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

trait BValue {
    fn b_value(&self) -> f64;
}

impl BValue for SummaryRow {
    fn b_value(&self) -> f64 {
        self.b_tenths as f64 / 10.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tsdapt_core::pipeline::BoundTag;

    fn summary_row(b: u8, bound: BoundTag, mean: f64, stddev: f64) -> SummaryRow {
        SummaryRow {
            b_tenths: b,
            bound,
            metric: "kmmd",
            transform: "sinkhorn",
            mean,
            stddev,
            runs: 10,
        }
    }

    #[test]
    fn plot_is_deterministic_and_contains_series() {
        let rows = vec![
            summary_row(0, BoundTag::Selected, 0.95, 0.02),
            summary_row(10, BoundTag::Selected, 0.85, 0.05),
            summary_row(0, BoundTag::NoneLower, 0.1, 0.01),
            summary_row(10, BoundTag::NoneLower, 0.12, 0.02),
        ];
        let svg = render_accuracy_plot(&rows);
        let mut shuffled = rows.clone();
        shuffled.reverse();
        assert_eq!(svg, render_accuracy_plot(&shuffled));
        assert!(svg.contains("<svg"));
        assert!(svg.contains("selected / kmmd / sinkhorn"));
        assert!(svg.contains("none_lower / kmmd / sinkhorn"));
        assert_eq!(svg.matches("<polyline").count(), 2);
    }

    #[test]
    fn values_clamp_into_the_axes_box() {
        let rows = vec![
            summary_row(0, BoundTag::Selected, 1.0, 0.3),
            summary_row(19, BoundTag::Selected, 0.0, 0.3),
        ];
        let svg = render_accuracy_plot(&rows);
        // band must not leave the plotting area vertically
        assert!(!svg.contains("y=\"-"));
    }
}
