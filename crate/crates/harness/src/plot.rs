//! SVG plots from result tables.
//!
//! Everything is rendered by hand into a fixed-size canvas with
//! fixed-precision coordinates, so a given table always produces the same
//! bytes. Series colors follow a fixed palette in sorted label order.

use std::path::Path;

use crate::error::{HarnessError, Result};
use crate::report::{read_csv, CsvTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    QVsLop,
    QPerSubcarrier,
    QVsOverhead,
    Constellation,
}

impl std::str::FromStr for PlotKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q_vs_lop" => Ok(PlotKind::QVsLop),
            "q_per_subcarrier" => Ok(PlotKind::QPerSubcarrier),
            "q_vs_overhead" => Ok(PlotKind::QVsOverhead),
            "constellation" => Ok(PlotKind::Constellation),
            other => Err(HarnessError::Config(format!(
                "unknown plot kind {other:?} (expected q_vs_lop, q_per_subcarrier, \
                 q_vs_overhead, or constellation)"
            ))),
        }
    }
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 520.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 64.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn from_points(points: impl Iterator<Item = (f64, f64)>) -> Result<Self> {
        let mut x_lo = f64::INFINITY;
        let mut x_hi = f64::NEG_INFINITY;
        let mut y_lo = f64::INFINITY;
        let mut y_hi = f64::NEG_INFINITY;
        let mut any = false;
        for (x, y) in points {
            if !(x.is_finite() && y.is_finite()) {
                continue;
            }
            any = true;
            x_lo = x_lo.min(x);
            x_hi = x_hi.max(x);
            y_lo = y_lo.min(y);
            y_hi = y_hi.max(y);
        }
        if !any {
            return Err(HarnessError::Config("plot: no finite points".into()));
        }
        // Degenerate spans still need a drawable box.
        if x_hi - x_lo < 1e-12 {
            x_lo -= 0.5;
            x_hi += 0.5;
        }
        if y_hi - y_lo < 1e-12 {
            y_lo -= 0.5;
            y_hi += 0.5;
        }
        let pad = (y_hi - y_lo) * 0.08;
        Ok(Self {
            x_lo,
            x_hi,
            y_lo: y_lo - pad,
            y_hi: y_hi + pad,
        })
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x_lo) / (self.x_hi - self.x_lo) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y_lo) / (self.y_hi - self.y_lo) * (HEIGHT - TOP - BOTTOM)
    }
}

fn svg_open(out: &mut String) {
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"13\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let x0 = LEFT;
    let x1 = WIDTH - RIGHT;
    let y0 = HEIGHT - BOTTOM;
    let y1 = TOP;
    out.push_str(&format!(
        "<rect x=\"{x0:.3}\" y=\"{y1:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"none\" \
         stroke=\"#333\"/>\n",
        x1 - x0,
        y0 - y1
    ));
    for i in 0..=5 {
        let t = i as f64 / 5.0;
        let xv = f.x_lo + t * (f.x_hi - f.x_lo);
        let yv = f.y_lo + t * (f.y_hi - f.y_lo);
        let px = f.px(xv);
        let py = f.py(yv);
        out.push_str(&format!(
            "<line x1=\"{px:.3}\" y1=\"{y0:.3}\" x2=\"{px:.3}\" y2=\"{y1:.3}\" stroke=\"#ddd\"/>\n\
             <text x=\"{px:.3}\" y=\"{:.3}\" text-anchor=\"middle\">{xv:.2}</text>\n",
            y0 + 20.0
        ));
        out.push_str(&format!(
            "<line x1=\"{x0:.3}\" y1=\"{py:.3}\" x2=\"{x1:.3}\" y2=\"{py:.3}\" stroke=\"#ddd\"/>\n\
             <text x=\"{:.3}\" y=\"{:.3}\" text-anchor=\"end\">{yv:.2}</text>\n",
            x0 - 8.0,
            py + 4.0
        ));
    }
    out.push_str(&format!(
        "<text x=\"{:.3}\" y=\"{:.3}\" text-anchor=\"middle\">{x_label}</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 16.0
    ));
    out.push_str(&format!(
        "<text x=\"18\" y=\"{:.3}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.3})\">\
         {y_label}</text>\n",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    ));
}

fn legend(out: &mut String, labels: &[String]) {
    for (i, label) in labels.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = TOP + 12.0 + 18.0 * i as f64;
        let x = WIDTH - RIGHT - 170.0;
        out.push_str(&format!(
            "<line x1=\"{x:.3}\" y1=\"{y:.3}\" x2=\"{:.3}\" y2=\"{y:.3}\" stroke=\"{color}\" \
             stroke-width=\"2\"/>\n<text x=\"{:.3}\" y=\"{:.3}\">{label}</text>\n",
            x + 24.0,
            x + 30.0,
            y + 4.0
        ));
    }
}

struct Series {
    label: String,
    /// (x, y, y_min, y_max); the band collapses to the line when no
    /// aggregate rows exist.
    points: Vec<(f64, f64, f64, f64)>,
}

/// Pull (axis value -> q) series per equalizer out of a sweep table,
/// preferring aggregate rows and falling back to run rows.
fn q_series(table: &CsvTable, axis: &str) -> Result<Vec<Series>> {
    let kind = table.strings("row_kind")?;
    let axes: Vec<&str> = table.strings("axis")?;
    let eq = table.strings("equalizer")?;
    let value = table.numbers("axis_value")?;
    let q = table.numbers("q_factor_db")?;

    let has_aggregates = kind.iter().any(|k| *k == "mean");
    let select = |want: &str| -> Vec<(String, f64, f64)> {
        (0..kind.len())
            .filter(|&i| kind[i] == want && axes[i] == axis)
            .filter_map(|i| Some((eq[i].to_string(), value[i]?, q[i]?)))
            .collect()
    };
    let center = if has_aggregates {
        select("mean")
    } else {
        select("run")
    };
    if center.is_empty() {
        return Err(HarnessError::Config(format!(
            "plot: table has no rows for axis {axis:?}"
        )));
    }
    let lookup = |rows: &[(String, f64, f64)], label: &str, x: f64| -> Option<f64> {
        rows.iter()
            .find(|(l, v, _)| l == label && *v == x)
            .map(|(_, _, y)| *y)
    };
    let mins = select("min");
    let maxs = select("max");

    let mut labels: Vec<String> = center.iter().map(|(l, _, _)| l.clone()).collect();
    labels.sort();
    labels.dedup();
    let mut series = Vec::new();
    for label in labels {
        let mut points: Vec<(f64, f64, f64, f64)> = center
            .iter()
            .filter(|(l, _, _)| *l == label)
            .map(|(_, x, y)| {
                let lo = lookup(&mins, &label, *x).unwrap_or(*y);
                let hi = lookup(&maxs, &label, *x).unwrap_or(*y);
                (*x, *y, lo, hi)
            })
            .collect();
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        series.push(Series { label, points });
    }
    Ok(series)
}

fn line_plot(series: &[Series], x_label: &str, y_label: &str) -> Result<String> {
    let frame = Frame::from_points(
        series
            .iter()
            .flat_map(|s| s.points.iter())
            .flat_map(|&(x, _, lo, hi)| [(x, lo), (x, hi)]),
    )?;
    let mut out = String::new();
    svg_open(&mut out);
    axes(&mut out, &frame, x_label, y_label);
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|p| format!("{:.3},{:.3}", frame.px(p.0), frame.py(p.1)))
            .collect();
        if path.len() > 1 {
            out.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
                path.join(" ")
            ));
        }
        for &(x, y, lo, hi) in &s.points {
            if !(x.is_finite() && y.is_finite()) {
                continue;
            }
            let px = frame.px(x);
            out.push_str(&format!(
                "<circle cx=\"{px:.3}\" cy=\"{:.3}\" r=\"3\" fill=\"{color}\"/>\n",
                frame.py(y)
            ));
            if hi > lo && lo.is_finite() && hi.is_finite() {
                out.push_str(&format!(
                    "<line x1=\"{px:.3}\" y1=\"{:.3}\" x2=\"{px:.3}\" y2=\"{:.3}\" \
                     stroke=\"{color}\" stroke-width=\"1\"/>\n",
                    frame.py(lo),
                    frame.py(hi)
                ));
            }
        }
    }
    legend(
        &mut out,
        &series.iter().map(|s| s.label.clone()).collect::<Vec<_>>(),
    );
    out.push_str("</svg>\n");
    Ok(out)
}

fn per_subcarrier_plot(table: &CsvTable) -> Result<String> {
    let kind = table.strings("row_kind")?;
    let eq = table.strings("equalizer")?;
    let value = table.numbers("axis_value")?;
    let sc_cols: Vec<usize> = table
        .header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("q_sc_"))
        .map(|(i, _)| i)
        .collect();
    if sc_cols.is_empty() {
        return Err(HarnessError::Config(
            "plot: table has no q_sc_* columns".into(),
        ));
    }
    let want = if kind.iter().any(|k| *k == "mean") {
        "mean"
    } else {
        "run"
    };
    let mut series = Vec::new();
    for (ri, row) in table.rows.iter().enumerate() {
        if kind[ri] != want {
            continue;
        }
        let label = match value[ri] {
            Some(v) => format!("{} @ {v}", eq[ri]),
            None => eq[ri].to_string(),
        };
        let points = sc_cols
            .iter()
            .enumerate()
            .filter_map(|(k, &ci)| {
                let q: f64 = row[ci].parse().ok()?;
                Some((k as f64, q, q, q))
            })
            .collect();
        series.push(Series { label, points });
    }
    if series.is_empty() {
        return Err(HarnessError::Config("plot: no rows to draw".into()));
    }
    series.sort_by(|a, b| a.label.cmp(&b.label));
    line_plot(&series, "data subcarrier index", "Q factor [dB]")
}

fn constellation_plot(table: &CsvTable) -> Result<String> {
    let re = table.numbers("re")?;
    let im = table.numbers("im")?;
    let pts: Vec<(f64, f64)> = re
        .iter()
        .zip(&im)
        .filter_map(|(r, i)| Some(((*r)?, (*i)?)))
        .filter(|(r, i)| r.is_finite() && i.is_finite())
        .collect();
    if pts.is_empty() {
        return Err(HarnessError::Config("plot: no symbols to draw".into()));
    }
    // Deterministic stride subsample, capped around 20000 points.
    let stride = pts.len().div_ceil(20_000).max(1);
    let limit = pts
        .iter()
        .step_by(stride)
        .fold(0.0f64, |m, (r, i)| m.max(r.abs()).max(i.abs()))
        * 1.1;
    let frame = Frame {
        x_lo: -limit,
        x_hi: limit,
        y_lo: -limit,
        y_hi: limit,
    };
    let mut out = String::new();
    svg_open(&mut out);
    axes(&mut out, &frame, "in-phase", "quadrature");
    for (r, i) in pts.iter().step_by(stride) {
        out.push_str(&format!(
            "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"1.4\" fill=\"#1f77b4\" fill-opacity=\"0.45\"/>\n",
            frame.px(*r),
            frame.py(*i)
        ));
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Render `kind` from the CSV at `input` into an SVG at `out`.
pub fn render_plot(kind: PlotKind, input: &Path, out: &Path) -> Result<()> {
    let table = read_csv(input)?;
    let svg = match kind {
        PlotKind::QVsLop => line_plot(
            &q_series(&table, "launch_power_dbm")?,
            "launch power [dBm]",
            "Q factor [dB]",
        )?,
        PlotKind::QVsOverhead => line_plot(
            &q_series(&table, "overhead")?,
            "training overhead",
            "Q factor [dB]",
        )?,
        PlotKind::QPerSubcarrier => per_subcarrier_plot(&table)?,
        PlotKind::Constellation => constellation_plot(&table)?,
    };
    std::fs::write(out, svg).map_err(|e| HarnessError::io("plot write", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::{write_csv, write_symbols_csv, ResultRow, RowMeta};

    fn tmp(name: &str) -> std::path::PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("coofdm-plot-test-{}-{name}", std::process::id()));
        p
    }

    fn row(kind: &'static str, eq: &str, x: f64, q: f64, repeat: Option<u64>) -> ResultRow {
        ResultRow {
            row_kind: kind,
            axis: "launch_power_dbm".into(),
            axis_value: Some(x),
            repeat,
            meta: RowMeta {
                equalizer: eq.into(),
                constellation: "16qam".into(),
                n_channels: 1,
                n_spans: 20,
                span_length_km: 100.0,
                launch_power_dbm: x,
                overhead: 0.1,
                seed_channel: 1,
                seed_noise: 2,
                seed_training: 3,
                fingerprint: "f".into(),
                version: "0".into(),
            },
            ber: 1e-3,
            q_factor_db: q,
            evm_percent: 10.0,
            n_bits_counted: 1000.0,
            n_errors: 1.0,
            inverted: 0.0,
            raw_bit_rate_bps: 1.0,
            net_bit_rate_bps: 1.0,
            train_epochs: None,
            train_final_cost: None,
            per_subcarrier_q: vec![8.0, 9.0, 8.5],
        }
    }

    #[test]
    fn q_vs_lop_renders_series_and_whiskers() {
        let rows = vec![
            row("mean", "linear", 0.0, 8.0, None),
            row("min", "linear", 0.0, 7.5, None),
            row("max", "linear", 0.0, 8.5, None),
            row("mean", "linear", 2.0, 9.0, None),
            row("min", "linear", 2.0, 8.8, None),
            row("max", "linear", 2.0, 9.2, None),
            row("mean", "mimo-dl-case2", 0.0, 9.5, None),
            row("min", "mimo-dl-case2", 0.0, 9.4, None),
            row("max", "mimo-dl-case2", 0.0, 9.6, None),
            row("mean", "mimo-dl-case2", 2.0, 10.5, None),
            row("min", "mimo-dl-case2", 2.0, 10.3, None),
            row("max", "mimo-dl-case2", 2.0, 10.7, None),
        ];
        let csv = tmp("lop.csv");
        let svg = tmp("lop.svg");
        write_csv(&rows, &csv).unwrap();
        render_plot(PlotKind::QVsLop, &csv, &svg).unwrap();
        let text = std::fs::read_to_string(&svg).unwrap();
        assert!(text.contains("launch power [dBm]"));
        assert!(text.contains("Q factor [dB]"));
        assert!(text.contains("polyline"));
        assert!(text.contains("mimo-dl-case2"));
        // Deterministic output byte for byte.
        let svg2 = tmp("lop2.svg");
        render_plot(PlotKind::QVsLop, &csv, &svg2).unwrap();
        assert_eq!(
            std::fs::read(&svg).unwrap(),
            std::fs::read(&svg2).unwrap()
        );
        for p in [csv, svg, svg2] {
            std::fs::remove_file(p).unwrap();
        }
    }

    #[test]
    fn per_subcarrier_uses_sc_columns() {
        let rows = vec![row("run", "linear", 2.0, 8.0, Some(0))];
        let csv = tmp("sc.csv");
        let svg = tmp("sc.svg");
        write_csv(&rows, &csv).unwrap();
        render_plot(PlotKind::QPerSubcarrier, &csv, &svg).unwrap();
        let text = std::fs::read_to_string(&svg).unwrap();
        assert!(text.contains("data subcarrier index"));
        std::fs::remove_file(csv).unwrap();
        std::fs::remove_file(svg).unwrap();
    }

    #[test]
    fn constellation_from_symbols() {
        use ndarray::Array2;
        use num_complex::Complex64;
        let m = Array2::from_shape_fn((40, 3), |(t, s)| {
            Complex64::new(t as f64 * 0.05 - 1.0, s as f64 * 0.4 - 0.4)
        });
        let csv = tmp("sym.csv");
        let svg = tmp("sym.svg");
        write_symbols_csv(&m, 4, &csv).unwrap();
        render_plot(PlotKind::Constellation, &csv, &svg).unwrap();
        let text = std::fs::read_to_string(&svg).unwrap();
        assert!(text.contains("in-phase"));
        assert!(text.contains("circle"));
        std::fs::remove_file(csv).unwrap();
        std::fs::remove_file(svg).unwrap();
    }

    #[test]
    fn wrong_table_is_an_error() {
        let rows = vec![row("run", "linear", 2.0, 8.0, Some(0))];
        let csv = tmp("wrong.csv");
        write_csv(&rows, &csv).unwrap();
        let out = tmp("wrong.svg");
        let err = render_plot(PlotKind::QVsOverhead, &csv, &out).unwrap_err();
        assert_eq!(err.category(), "config");
        assert!(!out.exists());
        std::fs::remove_file(csv).unwrap();
    }
}
