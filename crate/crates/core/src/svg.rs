//! Standalone SVG rendering of sweep results: one log-log panel per epsilon,
//! mean l2 error against sample count, one polyline per estimator.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiment::parse_csv;
use crate::metrics::ErrorRecord;

/// Canvas sizing for [`render_svg`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotSpec {
    pub panel_width: u32,
    pub panel_height: u32,
}

impl Default for PlotSpec {
    fn default() -> Self {
        PlotSpec {
            panel_width: 420,
            panel_height: 340,
        }
    }
}

const MARGIN_LEFT: f64 = 58.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 34.0;
const MARGIN_BOTTOM: f64 = 46.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// Reads the sweep CSV and writes a Figure-style chart; nothing is written
/// when the input has no data rows.
pub fn emit_svg(csv_path: &Path, out_path: &Path, spec: &PlotSpec) -> Result<()> {
    let text = std::fs::read_to_string(csv_path)?;
    let records = parse_csv(&text)?;
    let svg = render_svg(&records, spec)?;
    std::fs::write(out_path, svg)?;
    Ok(())
}

// f64 keys sorted by bit pattern; epsilons are nonnegative so the order is
// numeric.
fn eps_key(e: f64) -> u64 {
    e.to_bits()
}

/// Renders the chart as an SVG document string.
pub fn render_svg(records: &[ErrorRecord], spec: &PlotSpec) -> Result<String> {
    if records.is_empty() {
        return Err(Error::domain("no data rows to plot"));
    }
    // (epsilon -> estimator -> n -> mean l2)
    let mut panels: BTreeMap<u64, BTreeMap<String, BTreeMap<usize, (f64, u32)>>> = BTreeMap::new();
    for r in records {
        if !(r.l2_error > 0.0) {
            return Err(Error::domain(
                "log-scale plot needs strictly positive errors",
            ));
        }
        let cell = panels
            .entry(eps_key(r.epsilon))
            .or_default()
            .entry(r.estimator.clone())
            .or_default()
            .entry(r.n)
            .or_insert((0.0, 0));
        cell.0 += r.l2_error;
        cell.1 += 1;
    }

    let pw = f64::from(spec.panel_width);
    let ph = f64::from(spec.panel_height);
    let total_w = pw * panels.len() as f64;
    let mut body = String::new();

    for (panel_idx, (eps_bits, series)) in panels.iter().enumerate() {
        let eps = f64::from_bits(*eps_bits);
        let x0 = pw * panel_idx as f64;

        let mut min_n = f64::INFINITY;
        let mut max_n = f64::NEG_INFINITY;
        let mut min_e = f64::INFINITY;
        let mut max_e = f64::NEG_INFINITY;
        for per_n in series.values() {
            for (n, (sum, count)) in per_n {
                let mean = sum / f64::from(*count);
                min_n = min_n.min(*n as f64);
                max_n = max_n.max(*n as f64);
                min_e = min_e.min(mean);
                max_e = max_e.max(mean);
            }
        }
        // Pad degenerate ranges so the log map stays finite.
        if max_n <= min_n {
            max_n = min_n * 2.0;
            min_n /= 2.0;
        }
        if max_e <= min_e {
            max_e = min_e * 2.0;
            min_e /= 2.0;
        }
        let (lx0, lx1) = (min_n.ln(), max_n.ln());
        let (ly0, ly1) = (min_e.ln(), max_e.ln());
        let plot_w = pw - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = ph - MARGIN_TOP - MARGIN_BOTTOM;
        let to_x = |n: f64| x0 + MARGIN_LEFT + (n.ln() - lx0) / (lx1 - lx0) * plot_w;
        let to_y = |e: f64| MARGIN_TOP + (ly1 - e.ln()) / (ly1 - ly0) * plot_h;

        body.push_str(&format!(
            "<rect x=\"{:.1}\" y=\"{MARGIN_TOP}\" width=\"{plot_w:.1}\" height=\"{plot_h:.1}\" fill=\"none\" stroke=\"#999\"/>\n",
            x0 + MARGIN_LEFT
        ));
        body.push_str(&format!(
            "<text x=\"{:.1}\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">epsilon = {eps}</text>\n",
            x0 + pw / 2.0
        ));
        body.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">n (log)</text>\n",
            x0 + pw / 2.0,
            ph - 10.0
        ));
        body.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 {:.1} {:.1})\">mean l2 error (log)</text>\n",
            x0 + 16.0,
            MARGIN_TOP + plot_h / 2.0,
            x0 + 16.0,
            MARGIN_TOP + plot_h / 2.0
        ));

        // Decade ticks on both axes.
        let mut tick = 10f64.powf(min_n.log10().floor());
        while tick <= max_n * 1.0001 {
            if tick >= min_n * 0.9999 {
                let x = to_x(tick);
                body.push_str(&format!(
                    "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#ccc\"/>\n<text x=\"{x:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"middle\">{tick:.0}</text>\n",
                    MARGIN_TOP,
                    MARGIN_TOP + plot_h,
                    MARGIN_TOP + plot_h + 14.0
                ));
            }
            tick *= 10.0;
        }
        let mut etick = 10f64.powf(min_e.log10().floor());
        while etick <= max_e * 1.0001 {
            if etick >= min_e * 0.9999 {
                let y = to_y(etick);
                body.push_str(&format!(
                    "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ccc\"/>\n<text x=\"{:.1}\" y=\"{y:.1}\" font-size=\"10\" text-anchor=\"end\">{etick:.0e}</text>\n",
                    x0 + MARGIN_LEFT,
                    x0 + MARGIN_LEFT + plot_w,
                    x0 + MARGIN_LEFT - 4.0
                ));
            }
            etick *= 10.0;
        }

        for (series_idx, (estimator, per_n)) in series.iter().enumerate() {
            let color = PALETTE[series_idx % PALETTE.len()];
            let points: Vec<(f64, f64)> = per_n
                .iter()
                .map(|(n, (sum, count))| (to_x(*n as f64), to_y(sum / f64::from(*count))))
                .collect();
            if points.len() >= 2 {
                let path: Vec<String> = points
                    .iter()
                    .map(|(x, y)| format!("{x:.2},{y:.2}"))
                    .collect();
                body.push_str(&format!(
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                    path.join(" ")
                ));
            }
            for (x, y) in &points {
                body.push_str(&format!(
                    "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"{color}\"/>\n"
                ));
            }
            // Legend entry.
            let ly = MARGIN_TOP + 14.0 * (series_idx as f64 + 1.0);
            let lx = x0 + MARGIN_LEFT + 8.0;
            body.push_str(&format!(
                "<rect x=\"{lx:.1}\" y=\"{:.1}\" width=\"10\" height=\"3\" fill=\"{color}\"/>\n<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\">{estimator}</text>\n",
                ly - 2.0,
                lx + 14.0,
                ly + 2.0
            ));
        }
    }

    Ok(format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{total_w:.0}\" height=\"{ph:.0}\" viewBox=\"0 0 {total_w:.0} {ph:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    ))
}
