//! Minimal self-contained SVG rendering for result tables. The CSV stays the
//! canonical output; plots are a reading convenience.

use relu_recover::{Error, Result};

use crate::table::ResultTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Line,
    Scatter,
}

struct Series {
    name: String,
    points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 24.0;
const BOTTOM: f64 = 52.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// Renders a table as a standalone SVG with axes, a legend, and the config
/// echo embedded as an XML comment.
pub fn emit_plot(table: &ResultTable, kind: PlotKind) -> Result<String> {
    if table.rows.is_empty() {
        return Err(Error::InvalidArgument("cannot plot an empty table".into()));
    }
    let (series, x_label, y_label) = extract_series(table)?;
    if series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::InvalidArgument("no numeric points to plot".into()));
    }

    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in &series {
        for &(x, y) in &s.points {
            xs.push(x);
            ys.push(y);
        }
    }
    let (x_min, x_max) = padded_range(&xs);
    let (y_min, y_max) = padded_range(&ys);
    let px = |x: f64| LEFT + (x - x_min) / (x_max - x_min) * (WIDTH - LEFT - RIGHT);
    let py = |y: f64| HEIGHT - BOTTOM - (y - y_min) / (y_max - y_min) * (HEIGHT - TOP - BOTTOM);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"monospace\" font-size=\"12\">\n"
    ));
    svg.push_str("<!--\n");
    for line in table.config.echo_lines() {
        // XML comments must not contain "--".
        svg.push_str(&line.replace("--", "__"));
        svg.push('\n');
    }
    svg.push_str("-->\n");
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));

    // Axes with 5 labeled ticks each.
    svg.push_str(&format!(
        "<line x1=\"{LEFT}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        HEIGHT - BOTTOM,
        WIDTH - RIGHT,
        HEIGHT - BOTTOM
    ));
    svg.push_str(&format!(
        "<line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{}\" stroke=\"black\"/>\n",
        HEIGHT - BOTTOM
    ));
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x_min + f * (x_max - x_min);
        let yv = y_min + f * (y_max - y_min);
        svg.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n",
            px(xv),
            HEIGHT - BOTTOM,
            HEIGHT - BOTTOM + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            px(xv),
            HEIGHT - BOTTOM + 18.0,
            fmt_tick(xv)
        ));
        svg.push_str(&format!(
            "<line x1=\"{1}\" y1=\"{0}\" x2=\"{2}\" y2=\"{0}\" stroke=\"black\"/>\n",
            py(yv),
            LEFT - 5.0,
            LEFT
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            LEFT - 8.0,
            py(yv) + 4.0,
            fmt_tick(yv)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 12.0,
        escape(&x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>\n",
        (TOP + HEIGHT - BOTTOM) / 2.0,
        escape(&y_label)
    ));

    for (idx, s) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        if kind == PlotKind::Line && s.points.len() > 1 {
            let pts: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                pts.join(" ")
            ));
        } else {
            for &(x, y) in &s.points {
                svg.push_str(&format!(
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                    px(x),
                    py(y)
                ));
            }
        }
        let ly = TOP + 16.0 * idx as f64 + 8.0;
        svg.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{ly}\" x2=\"{1}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"3\"/>\n",
            WIDTH - RIGHT + 12.0,
            WIDTH - RIGHT + 32.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{}</text>\n",
            WIDTH - RIGHT + 38.0,
            ly + 4.0,
            escape(&s.name)
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Grid tables (leading `d` column) become one series per dimension plotted
/// against N/d; trajectory-style tables become one series per value column.
fn extract_series(table: &ResultTable) -> Result<(Vec<Series>, String, String)> {
    if table.schema.first() == Some(&"d") {
        let ratio = table
            .col_index("ratio")
            .ok_or_else(|| Error::Parse("grid table missing ratio column".into()))?;
        let trials = table.col_index("trials");
        let y_idx = table.schema.len() - if trials.is_some() { 2 } else { 1 };
        let y_label = if trials.is_some() {
            "success fraction".to_string()
        } else {
            table.schema[y_idx].to_string()
        };
        let mut series: Vec<Series> = Vec::new();
        for row in &table.rows {
            let name = format!("d={}", row[0]);
            let x: f64 = row[ratio].parse().map_err(|_| bad_cell(&row[ratio]))?;
            let mut y: f64 = row[y_idx].parse().map_err(|_| bad_cell(&row[y_idx]))?;
            if let Some(t) = trials {
                y /= row[t].parse::<f64>().map_err(|_| bad_cell(&row[t]))?;
            }
            match series.iter_mut().find(|s| s.name == name) {
                Some(s) => s.points.push((x, y)),
                None => series.push(Series {
                    name,
                    points: vec![(x, y)],
                }),
            }
        }
        Ok((series, "N/d".into(), y_label))
    } else {
        let x_label = table.schema[0].to_string();
        let mut series = Vec::new();
        for (j, &name) in table.schema.iter().enumerate().skip(1) {
            let mut points = Vec::new();
            for row in &table.rows {
                if row[j].is_empty() {
                    continue;
                }
                let x: f64 = row[0].parse().map_err(|_| bad_cell(&row[0]))?;
                let y: f64 = row[j].parse().map_err(|_| bad_cell(&row[j]))?;
                points.push((x, y));
            }
            series.push(Series {
                name: name.to_string(),
                points,
            });
        }
        Ok((series, x_label, "value".into()))
    }
}

fn bad_cell(v: &str) -> Error {
    Error::Parse(format!("non-numeric cell {v:?}"))
}

fn padded_range(vals: &[f64]) -> (f64, f64) {
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        (min - 1.0, max + 1.0)
    } else {
        let pad = 0.05 * (max - min);
        (min - pad, max + pad)
    }
}

fn fmt_tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && (a >= 1e4 || a < 1e-3) {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
