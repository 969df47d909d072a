//! Parameter sweeps with repeats.
//!
//! A sweep varies exactly one axis (launch power, training overhead, or
//! grouping case) over an explicit value list, running each point
//! `repeats` times. Repeat 0 uses the scenario's own seeds; repeat r > 0
//! rederives the noise and training seeds through `mix_seed` while the
//! channel data seed stays put, so repeats average over noise and
//! initialization, not over payload content.
//!
//! Every point is validated before any point runs; one invalid point
//! rejects the whole sweep. Points execute on a rayon pool (size taken
//! from `COOFDM_LAB_WORKERS` when set) and results are emitted in axis
//! order regardless of completion order, so the output table does not
//! depend on the worker count.

use std::str::FromStr;

use coofdm_core::equalizer::CaseId;

use crate::config::ScenarioConfig;
use crate::error::{HarnessError, Result};
use crate::pipeline::{mix_seed, run_scenario, RunOptions};
use crate::report::{aggregate_rows, ResultRow};

pub const WORKERS_ENV: &str = "COOFDM_LAB_WORKERS";

#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    LaunchPowerDbm(Vec<f64>),
    Overhead(Vec<f64>),
    Case(Vec<CaseId>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::LaunchPowerDbm(_) => "launch_power_dbm",
            SweepAxis::Overhead(_) => "overhead",
            SweepAxis::Case(_) => "case",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SweepAxis::LaunchPowerDbm(v) => v.len(),
            SweepAxis::Overhead(v) => v.len(),
            SweepAxis::Case(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parse an axis name plus comma-separated value list.
    pub fn parse(axis: &str, values: &str) -> Result<Self> {
        let items: Vec<&str> = values
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        if items.is_empty() {
            return Err(HarnessError::Config(format!(
                "sweep axis {axis:?}: empty value list"
            )));
        }
        let floats = |what: &str| -> Result<Vec<f64>> {
            items
                .iter()
                .map(|s| {
                    s.parse::<f64>().map_err(|_| {
                        HarnessError::Config(format!("sweep {what} value {s:?} is not a number"))
                    })
                })
                .collect()
        };
        match axis {
            "launch_power_dbm" | "lop" => Ok(SweepAxis::LaunchPowerDbm(floats("launch power")?)),
            "overhead" => Ok(SweepAxis::Overhead(floats("overhead")?)),
            "case" => {
                let cases = items
                    .iter()
                    .map(|s| CaseId::from_str(s).map_err(|e| HarnessError::Config(e.to_string())))
                    .collect::<Result<Vec<_>>>()?;
                Ok(SweepAxis::Case(cases))
            }
            other => Err(HarnessError::Config(format!(
                "unknown sweep axis {other:?} (expected launch_power_dbm, overhead, or case)"
            ))),
        }
    }

    fn point(&self, base: &ScenarioConfig, i: usize) -> (ScenarioConfig, f64) {
        let mut cfg = base.clone();
        let value = match self {
            SweepAxis::LaunchPowerDbm(v) => {
                cfg.link.launch_power_dbm = v[i];
                v[i]
            }
            SweepAxis::Overhead(v) => {
                cfg.training.overhead = v[i];
                v[i]
            }
            SweepAxis::Case(v) => {
                cfg.equalizer.case = v[i].label().to_string();
                v[i] as u64 as f64
            }
        };
        (cfg, value)
    }
}

/// Per-repeat seed derivation. Repeat 0 is the config as given.
pub fn repeat_config(point: &ScenarioConfig, repeat: u64) -> ScenarioConfig {
    let mut cfg = point.clone();
    if repeat > 0 {
        cfg.seeds.noise = mix_seed(point.seeds.noise, repeat);
        cfg.seeds.training = mix_seed(point.seeds.training, repeat);
    }
    cfg
}

fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(WORKERS_ENV) {
        let n: usize = raw.parse().map_err(|_| {
            HarnessError::Config(format!("{WORKERS_ENV}={raw:?} is not a worker count"))
        })?;
        if n == 0 {
            return Err(HarnessError::Config(format!(
                "{WORKERS_ENV} must be >= 1"
            )));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| HarnessError::Runtime(format!("worker pool: {e}")))
}

/// Run the full sweep and return the result table: for each axis value, the
/// individual repeat rows followed by mean/min/max aggregates.
pub fn run_sweep(base: &ScenarioConfig, axis: &SweepAxis, repeats: usize) -> Result<Vec<ResultRow>> {
    if axis.is_empty() {
        return Err(HarnessError::Config("sweep: no axis values".into()));
    }
    if repeats == 0 {
        return Err(HarnessError::Config("sweep: repeats must be >= 1".into()));
    }
    if matches!(axis, SweepAxis::Case(_)) && base.equalizer.kind != "mimo-dl" {
        return Err(HarnessError::Config(format!(
            "sweep over case requires equalizer.kind = \"mimo-dl\", got {:?}",
            base.equalizer.kind
        )));
    }

    // Validate every point before running any.
    let points: Vec<(ScenarioConfig, f64)> = (0..axis.len()).map(|i| axis.point(base, i)).collect();
    for (i, (cfg, value)) in points.iter().enumerate() {
        cfg.validate().map_err(|msg| {
            HarnessError::Config(format!(
                "sweep point {i} ({} = {value}): {msg}",
                axis.name()
            ))
        })?;
    }

    let jobs: Vec<(usize, u64, ScenarioConfig)> = points
        .iter()
        .enumerate()
        .flat_map(|(pi, (cfg, _))| {
            (0..repeats as u64).map(move |r| (pi, r, repeat_config(cfg, r)))
        })
        .collect();

    let pool = worker_pool()?;
    let outcomes: Vec<ResultRow> = pool.install(|| {
        use rayon::prelude::*;
        jobs.par_iter()
            .map(|(pi, r, cfg)| {
                let result = run_scenario(cfg, &RunOptions::default())?;
                let (_, value) = &points[*pi];
                log::info!(
                    "sweep {} = {value} repeat {r}: q = {:.3} dB, ber = {:.3e}",
                    axis.name(),
                    result.quality.q_factor_db,
                    result.quality.ber
                );
                Ok(ResultRow::from_run(
                    cfg,
                    &result,
                    axis.name(),
                    Some(*value),
                    Some(*r),
                ))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    // par_iter keeps job order, so outcomes arrive grouped by point already;
    // rebuild the table point by point with aggregates appended.
    let mut rows = Vec::with_capacity(points.len() * (repeats + 3));
    for (pi, (cfg, _)) in points.iter().enumerate() {
        let slice = &outcomes[pi * repeats..(pi + 1) * repeats];
        rows.extend_from_slice(slice);
        rows.extend(aggregate_rows(slice, cfg)?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_parsing() {
        let a = SweepAxis::parse("launch_power_dbm", "-2, 0, 2").unwrap();
        assert_eq!(a, SweepAxis::LaunchPowerDbm(vec![-2.0, 0.0, 2.0]));
        let a = SweepAxis::parse("case", "case1,case2").unwrap();
        assert_eq!(a, SweepAxis::Case(vec![CaseId::Case1, CaseId::Case2]));
        assert!(SweepAxis::parse("case", "case9").is_err());
        assert!(SweepAxis::parse("spans", "1,2").is_err());
        assert!(SweepAxis::parse("overhead", "").is_err());
    }

    #[test]
    fn invalid_point_rejects_whole_sweep() {
        let base = quick_config();
        let axis = SweepAxis::Overhead(vec![0.1, 1.5]);
        let err = run_sweep(&base, &axis, 1).unwrap_err();
        assert_eq!(err.category(), "config");
        assert!(err.to_string().contains("sweep point 1"), "{err}");
    }

    #[test]
    fn case_axis_requires_grouped_kind() {
        let mut base = quick_config();
        base.equalizer.kind = "linear".into();
        let axis = SweepAxis::Case(vec![CaseId::Case1]);
        assert!(run_sweep(&base, &axis, 1).is_err());
    }

    #[test]
    fn repeat_seed_derivation() {
        let base = quick_config();
        let r0 = repeat_config(&base, 0);
        assert_eq!(r0.seeds.noise, base.seeds.noise);
        let r1 = repeat_config(&base, 1);
        let r2 = repeat_config(&base, 2);
        assert_eq!(r1.seeds.channel, base.seeds.channel);
        assert_ne!(r1.seeds.noise, base.seeds.noise);
        assert_ne!(r1.seeds.noise, r2.seeds.noise);
        assert_ne!(r1.seeds.training, r2.seeds.training);
    }

    fn quick_config() -> ScenarioConfig {
        // Small linear back-to-back so sweep tests stay fast.
        let mut cfg = ScenarioConfig::single_channel_16qam();
        cfg.link.n_spans = 0;
        cfg.link.ase_noise = false;
        cfg.impairments.converters = false;
        cfg.equalizer.kind = "mimo-dl".into();
        cfg.run.n_payload_symbols = 30;
        cfg.training.max_epochs = 2;
        cfg
    }

    #[test]
    fn sweep_rows_are_ordered_and_aggregated() {
        let mut base = quick_config();
        base.equalizer.kind = "linear".into();
        let axis = SweepAxis::LaunchPowerDbm(vec![0.0, 2.0]);
        let rows = run_sweep(&base, &axis, 2).unwrap();
        assert_eq!(rows.len(), 2 * (2 + 3));
        assert_eq!(rows[0].row_kind, "run");
        assert_eq!(rows[0].axis_value, Some(0.0));
        assert_eq!(rows[0].repeat, Some(0));
        assert_eq!(rows[1].repeat, Some(1));
        assert_eq!(rows[2].row_kind, "mean");
        assert_eq!(rows[4].row_kind, "max");
        assert_eq!(rows[5].axis_value, Some(2.0));
        // Back-to-back linear is error free at either power.
        assert_eq!(rows[0].n_errors, 0.0);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut base = quick_config();
        base.equalizer.kind = "linear".into();
        let axis = SweepAxis::LaunchPowerDbm(vec![0.0, 1.0, 2.0]);
        std::env::set_var(WORKERS_ENV, "1");
        let serial = run_sweep(&base, &axis, 2).unwrap();
        std::env::set_var(WORKERS_ENV, "3");
        let parallel = run_sweep(&base, &axis, 2).unwrap();
        std::env::remove_var(WORKERS_ENV);
        assert_eq!(serial, parallel);
    }
}
