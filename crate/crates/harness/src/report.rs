//! Result tables and CSV emission.
//!
//! One schema covers single runs and sweeps. Columns, in order:
//!   row_kind        "run" for one execution; "mean"/"min"/"max" aggregate
//!                   the repeats of one sweep point column-wise
//!   axis            sweep axis name, empty for plain runs
//!   axis_value      numeric axis value (case label as its number)
//!   repeat          repeat index, empty on aggregate rows
//!   equalizer, constellation, n_channels, n_spans, span_length_km,
//!   launch_power_dbm, overhead, seed_channel, seed_noise, seed_training,
//!   fingerprint, version
//!   ber             raw error ratio over counted bits (after inversion
//!                   folding; see `inverted`)
//!   q_factor_db     20 log10(sqrt2 * erfcinv(2 ber)); zero-error runs
//!                   report the counting ceiling Q(0.5 / n_bits)
//!   evm_percent, n_bits_counted, n_errors
//!   inverted        1 if the raw BER exceeded 0.5 and was folded
//!   raw_bit_rate_bps, net_bit_rate_bps
//!   train_epochs    summed over subnets, empty for untrained equalizers
//!   train_final_cost mean over subnets, empty for untrained equalizers
//!   q_sc_NNN        per-data-subcarrier Q in dB, ascending frequency;
//!                   zero-error subcarriers sit at Q(0.5 / bits_per_sc)
//!
//! All numbers are written with Rust's shortest-roundtrip decimal
//! formatting, so parsing a column back yields bit-identical floats. No
//! timestamps or wall times appear in any column; identical (config,
//! seeds) runs serialize to identical bytes.

use std::path::Path;

use crate::config::ScenarioConfig;
use crate::error::{HarnessError, Result};
use crate::pipeline::RunResult;

#[derive(Debug, Clone, PartialEq)]
pub struct RowMeta {
    pub equalizer: String,
    pub constellation: String,
    pub n_channels: u64,
    pub n_spans: u64,
    pub span_length_km: f64,
    pub launch_power_dbm: f64,
    pub overhead: f64,
    pub seed_channel: u64,
    pub seed_noise: u64,
    pub seed_training: u64,
    pub fingerprint: String,
    pub version: String,
}

impl RowMeta {
    pub fn from_config(cfg: &ScenarioConfig, version: &str) -> Self {
        let equalizer = cfg
            .equalizer_choice()
            .map(|c| c.label())
            .unwrap_or_else(|_| cfg.equalizer.kind.clone());
        Self {
            equalizer,
            constellation: cfg.modem.constellation.clone(),
            n_channels: cfg.wdm.n_channels as u64,
            n_spans: cfg.link.n_spans as u64,
            span_length_km: cfg.link.span_length_km,
            launch_power_dbm: cfg.link.launch_power_dbm,
            overhead: cfg.training.overhead,
            seed_channel: cfg.seeds.channel,
            seed_noise: cfg.seeds.noise,
            seed_training: cfg.seeds.training,
            fingerprint: cfg.fingerprint(),
            version: version.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub row_kind: &'static str,
    pub axis: String,
    pub axis_value: Option<f64>,
    pub repeat: Option<u64>,
    pub meta: RowMeta,
    pub ber: f64,
    pub q_factor_db: f64,
    pub evm_percent: f64,
    pub n_bits_counted: f64,
    pub n_errors: f64,
    pub inverted: f64,
    pub raw_bit_rate_bps: f64,
    pub net_bit_rate_bps: f64,
    pub train_epochs: Option<f64>,
    pub train_final_cost: Option<f64>,
    pub per_subcarrier_q: Vec<f64>,
}

impl ResultRow {
    pub fn from_run(
        cfg: &ScenarioConfig,
        result: &RunResult,
        axis: &str,
        axis_value: Option<f64>,
        repeat: Option<u64>,
    ) -> Self {
        let (train_epochs, train_final_cost) = match &result.training {
            Some(list) if !list.is_empty() => {
                let epochs: usize = list.iter().map(|t| t.epochs).sum();
                let cost = list.iter().map(|t| t.final_cost).sum::<f64>() / list.len() as f64;
                (Some(epochs as f64), Some(cost))
            }
            _ => (None, None),
        };
        Self {
            row_kind: "run",
            axis: axis.to_string(),
            axis_value,
            repeat,
            meta: RowMeta::from_config(cfg, result.version),
            ber: result.quality.ber,
            q_factor_db: result.quality.q_factor_db,
            evm_percent: result.quality.evm_percent,
            n_bits_counted: result.quality.n_bits_counted as f64,
            n_errors: result.quality.n_errors as f64,
            inverted: if result.inverted { 1.0 } else { 0.0 },
            raw_bit_rate_bps: result.raw_bit_rate,
            net_bit_rate_bps: result.net_bit_rate,
            train_epochs,
            train_final_cost,
            per_subcarrier_q: result.quality.per_subcarrier_q.clone(),
        }
    }

    fn numeric_fields(&self) -> Vec<Option<f64>> {
        let mut v = vec![
            Some(self.ber),
            Some(self.q_factor_db),
            Some(self.evm_percent),
            Some(self.n_bits_counted),
            Some(self.n_errors),
            Some(self.inverted),
            Some(self.raw_bit_rate_bps),
            Some(self.net_bit_rate_bps),
            self.train_epochs,
            self.train_final_cost,
        ];
        v.extend(self.per_subcarrier_q.iter().map(|&q| Some(q)));
        v
    }

    fn from_numeric_fields(template: &ResultRow, kind: &'static str, fields: &[Option<f64>]) -> Self {
        let n_sc = template.per_subcarrier_q.len();
        let scalar = |i: usize| fields[i].unwrap_or(f64::NAN);
        Self {
            row_kind: kind,
            axis: template.axis.clone(),
            axis_value: template.axis_value,
            repeat: None,
            meta: template.meta.clone(),
            ber: scalar(0),
            q_factor_db: scalar(1),
            evm_percent: scalar(2),
            n_bits_counted: scalar(3),
            n_errors: scalar(4),
            inverted: scalar(5),
            raw_bit_rate_bps: scalar(6),
            net_bit_rate_bps: scalar(7),
            train_epochs: fields[8],
            train_final_cost: fields[9],
            per_subcarrier_q: (0..n_sc).map(|k| scalar(10 + k)).collect(),
        }
    }
}

/// Column-wise mean, min and max over the repeats of one sweep point. The
/// aggregate rows inherit the first repeat's meta except the seeds, which
/// are taken from `base` (the point's underived config).
pub fn aggregate_rows(repeats: &[ResultRow], base: &ScenarioConfig) -> Result<Vec<ResultRow>> {
    if repeats.is_empty() {
        return Err(HarnessError::Runtime("aggregate of zero repeats".into()));
    }
    let n = repeats[0].numeric_fields().len();
    for r in repeats {
        if r.numeric_fields().len() != n {
            return Err(HarnessError::Runtime(
                "aggregate over rows of differing width".into(),
            ));
        }
    }
    let columns: Vec<Vec<Option<f64>>> = repeats.iter().map(|r| r.numeric_fields()).collect();
    let fold = |f: fn(&[f64]) -> f64| -> Vec<Option<f64>> {
        (0..n)
            .map(|i| {
                let present: Vec<f64> = columns.iter().filter_map(|c| c[i]).collect();
                if present.len() == columns.len() {
                    Some(f(&present))
                } else {
                    None
                }
            })
            .collect()
    };
    let mean = fold(|v| v.iter().sum::<f64>() / v.len() as f64);
    let min = fold(|v| v.iter().copied().fold(f64::INFINITY, f64::min));
    let max = fold(|v| v.iter().copied().fold(f64::NEG_INFINITY, f64::max));

    let mut template = repeats[0].clone();
    template.meta.seed_channel = base.seeds.channel;
    template.meta.seed_noise = base.seeds.noise;
    template.meta.seed_training = base.seeds.training;
    template.meta.fingerprint = base.fingerprint();
    Ok(vec![
        ResultRow::from_numeric_fields(&template, "mean", &mean),
        ResultRow::from_numeric_fields(&template, "min", &min),
        ResultRow::from_numeric_fields(&template, "max", &max),
    ])
}

pub fn csv_header(n_subcarriers: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "row_kind",
        "axis",
        "axis_value",
        "repeat",
        "equalizer",
        "constellation",
        "n_channels",
        "n_spans",
        "span_length_km",
        "launch_power_dbm",
        "overhead",
        "seed_channel",
        "seed_noise",
        "seed_training",
        "fingerprint",
        "version",
        "ber",
        "q_factor_db",
        "evm_percent",
        "n_bits_counted",
        "n_errors",
        "inverted",
        "raw_bit_rate_bps",
        "net_bit_rate_bps",
        "train_epochs",
        "train_final_cost",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for k in 0..n_subcarriers {
        h.push(format!("q_sc_{k:03}"));
    }
    h
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn record(row: &ResultRow) -> Vec<String> {
    let mut r = vec![
        row.row_kind.to_string(),
        row.axis.clone(),
        fmt_opt_f64(row.axis_value),
        row.repeat.map(|x| x.to_string()).unwrap_or_default(),
        row.meta.equalizer.clone(),
        row.meta.constellation.clone(),
        row.meta.n_channels.to_string(),
        row.meta.n_spans.to_string(),
        row.meta.span_length_km.to_string(),
        row.meta.launch_power_dbm.to_string(),
        row.meta.overhead.to_string(),
        row.meta.seed_channel.to_string(),
        row.meta.seed_noise.to_string(),
        row.meta.seed_training.to_string(),
        row.meta.fingerprint.clone(),
        row.meta.version.clone(),
        row.ber.to_string(),
        row.q_factor_db.to_string(),
        row.evm_percent.to_string(),
        row.n_bits_counted.to_string(),
        row.n_errors.to_string(),
        row.inverted.to_string(),
        row.raw_bit_rate_bps.to_string(),
        row.net_bit_rate_bps.to_string(),
        fmt_opt_f64(row.train_epochs),
        fmt_opt_f64(row.train_final_cost),
    ];
    r.extend(row.per_subcarrier_q.iter().map(|q| q.to_string()));
    r
}

/// Write the result table. Refuses an empty table before touching the path.
pub fn write_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(HarnessError::Config(
            "emit_csv: empty result table, nothing to write".into(),
        ));
    }
    let n_sc = rows[0].per_subcarrier_q.len();
    for r in rows {
        if r.per_subcarrier_q.len() != n_sc {
            return Err(HarnessError::Config(
                "emit_csv: rows disagree on subcarrier count".into(),
            ));
        }
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::Io(e.to_string()))?;
    w.write_record(csv_header(n_sc))
        .map_err(|e| HarnessError::Io(e.to_string()))?;
    for row in rows {
        w.write_record(record(row))
            .map_err(|e| HarnessError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| HarnessError::io("csv flush", e))
}

/// Parsed CSV with header-addressed columns (plot input, tests).
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| HarnessError::Config(format!("csv: no column named {name:?}")))
    }

    pub fn strings(&self, name: &str) -> Result<Vec<&str>> {
        let i = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    /// Numeric view of one column; empty cells become None.
    pub fn numbers(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let i = self.column_index(name)?;
        self.rows
            .iter()
            .map(|r| {
                let cell = &r[i];
                if cell.is_empty() {
                    Ok(None)
                } else {
                    cell.parse::<f64>().map(Some).map_err(|_| {
                        HarnessError::Config(format!("csv: non-numeric cell {cell:?} in {name}"))
                    })
                }
            })
            .collect()
    }
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| HarnessError::Io(format!("csv open: {e}")))?;
    let header = r
        .headers()
        .map_err(|e| HarnessError::Io(format!("csv header: {e}")))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| HarnessError::Io(format!("csv record: {e}")))?;
        rows.push(rec.iter().map(|s| s.to_string()).collect());
    }
    Ok(CsvTable { header, rows })
}

/// Equalized payload symbols as a CSV (constellation plot input). Columns:
/// symbol_row (payload row index), subcarrier, re, im.
pub fn write_symbols_csv(
    symbols: &ndarray::Array2<num_complex::Complex64>,
    first_row: usize,
    path: &Path,
) -> Result<()> {
    if symbols.is_empty() {
        return Err(HarnessError::Config("symbols csv: empty matrix".into()));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::Io(e.to_string()))?;
    w.write_record(["symbol_row", "subcarrier", "re", "im"])
        .map_err(|e| HarnessError::Io(e.to_string()))?;
    for t in first_row..symbols.nrows() {
        for s in 0..symbols.ncols() {
            let z = symbols[(t, s)];
            w.write_record([
                t.to_string(),
                s.to_string(),
                z.re.to_string(),
                z.im.to_string(),
            ])
            .map_err(|e| HarnessError::Io(e.to_string()))?;
        }
    }
    w.flush().map_err(|e| HarnessError::io("csv flush", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_row(seed: u64, q: f64) -> ResultRow {
        ResultRow {
            row_kind: "run",
            axis: "launch_power_dbm".into(),
            axis_value: Some(2.0),
            repeat: Some(seed),
            meta: RowMeta {
                equalizer: "linear".into(),
                constellation: "16qam".into(),
                n_channels: 1,
                n_spans: 20,
                span_length_km: 100.0,
                launch_power_dbm: 2.0,
                overhead: 0.1,
                seed_channel: 1,
                seed_noise: seed,
                seed_training: 3,
                fingerprint: "abc123".into(),
                version: "0.1.0".into(),
            },
            ber: 1.234e-3 * (seed + 1) as f64,
            q_factor_db: q,
            evm_percent: 12.5,
            n_bits_counted: 1000.0,
            n_errors: 3.0,
            inverted: 0.0,
            raw_bit_rate_bps: 4.02e10,
            net_bit_rate_bps: 3.6e10,
            train_epochs: None,
            train_final_cost: None,
            per_subcarrier_q: vec![9.5, 10.25, 0.1 + 0.2],
        }
    }

    fn tmp(name: &str) -> std::path::PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("coofdm-report-test-{}-{name}.csv", std::process::id()));
        p
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let rows = vec![sample_row(0, 9.731), sample_row(1, f64::INFINITY)];
        let path = tmp("roundtrip");
        write_csv(&rows, &path).unwrap();
        let table = read_csv(&path).unwrap();
        assert_eq!(table.header.len(), 26 + 3);
        let ber = table.numbers("ber").unwrap();
        assert_eq!(ber[0].unwrap().to_bits(), rows[0].ber.to_bits());
        let q = table.numbers("q_factor_db").unwrap();
        assert_eq!(q[1], Some(f64::INFINITY));
        let sc2 = table.numbers("q_sc_002").unwrap();
        // 0.1 + 0.2 round trips bit-exactly, not just approximately.
        assert_eq!(sc2[0].unwrap().to_bits(), (0.1f64 + 0.2).to_bits());
        let epochs = table.numbers("train_epochs").unwrap();
        assert_eq!(epochs[0], None);
        std::fs::remove_file(path).unwrap();
    }

    #[test]
    fn empty_table_rejected_without_file() {
        let path = tmp("empty");
        let err = write_csv(&[], &path).unwrap_err();
        assert_eq!(err.category(), "config");
        assert!(!path.exists());
    }

    #[test]
    fn aggregates_are_columnwise() {
        let rows = vec![sample_row(0, 9.0), sample_row(1, 11.0), sample_row(2, 10.0)];
        let base = ScenarioConfig::single_channel_16qam();
        let agg = aggregate_rows(&rows, &base).unwrap();
        assert_eq!(agg[0].row_kind, "mean");
        assert!((agg[0].q_factor_db - 10.0).abs() < 1e-12);
        assert_eq!(agg[1].row_kind, "min");
        assert_eq!(agg[1].q_factor_db, 9.0);
        assert_eq!(agg[2].row_kind, "max");
        assert_eq!(agg[2].q_factor_db, 11.0);
        assert_eq!(agg[0].repeat, None);
        assert_eq!(agg[0].meta.seed_noise, base.seeds.noise);
    }

    #[test]
    fn determinism_byte_identical() {
        let rows = vec![sample_row(0, 9.0), sample_row(1, 11.0)];
        let p1 = tmp("det1");
        let p2 = tmp("det2");
        write_csv(&rows, &p1).unwrap();
        write_csv(&rows, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        std::fs::remove_file(p1).unwrap();
        std::fs::remove_file(p2).unwrap();
    }
}
