use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use coofdm_lab::config::ScenarioConfig;
use coofdm_lab::error::{HarnessError, Result};
use coofdm_lab::pipeline::{run_scenario, RunOptions};
use coofdm_lab::plot::{render_plot, PlotKind};
use coofdm_lab::report::{write_csv, write_symbols_csv, ResultRow};
use coofdm_lab::sweep::{run_sweep, SweepAxis};
use coofdm_lab::trace::{load_trace, save_trace};

use coofdm_core::equalizer::write_equalizer;

#[derive(Parser)]
#[command(
    name = "coofdm-lab",
    version,
    about = "Coherent optical OFDM link simulator with neural equalization",
    after_help = "Worker count for sweeps can be overridden with the \
                  COOFDM_LAB_WORKERS environment variable."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigSource {
    /// Scenario config file (TOML)
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario preset
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Allow scenarios larger than the default WDM grid
    #[arg(long)]
    full: bool,
}

impl ConfigSource {
    fn load(&self) -> Result<ScenarioConfig> {
        let cfg = match (&self.config, &self.preset) {
            (Some(path), None) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| HarnessError::io(&format!("read {}", path.display()), e))?;
                ScenarioConfig::from_toml_str(&text).map_err(HarnessError::Config)?
            }
            (None, Some(name)) => ScenarioConfig::preset(name).ok_or_else(|| {
                HarnessError::Config(format!(
                    "unknown preset {name:?} (available: {})",
                    ScenarioConfig::PRESET_NAMES.join(", ")
                ))
            })?,
            (None, None) => {
                return Err(HarnessError::Config(
                    "pass either --config <path> or --preset <name>".into(),
                ))
            }
            (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
        };
        if cfg.is_large() && !self.full {
            return Err(HarnessError::Config(format!(
                "{} WDM channels exceeds the default grid; pass --full to accept the runtime",
                cfg.wdm.n_channels
            )));
        }
        if cfg.is_large() {
            log::warn!(
                "running {} WDM channels; expect a long wall time and high memory use",
                cfg.wdm.n_channels
            );
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and report its metrics
    Run {
        #[command(flatten)]
        source: ConfigSource,
        /// Write the single-run result table here (CSV)
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Write equalized payload symbols here (CSV, constellation input)
        #[arg(long, value_name = "PATH")]
        symbols_csv: Option<PathBuf>,
        /// Record the received aggregate waveform here (binary trace)
        #[arg(long, value_name = "PATH")]
        save_trace: Option<PathBuf>,
        /// Replay a recorded received waveform instead of simulating
        #[arg(long, value_name = "PATH")]
        rx_trace: Option<PathBuf>,
        /// Persist the trained equalizer weights here
        #[arg(long, value_name = "PATH")]
        save_equalizer: Option<PathBuf>,
    },
    /// Sweep one parameter axis with repeats and aggregate statistics
    Sweep {
        #[command(flatten)]
        source: ConfigSource,
        /// Axis to vary: launch_power_dbm, overhead, or case
        #[arg(long, value_name = "NAME")]
        axis: String,
        /// Comma-separated axis values (negative values allowed)
        #[arg(long, value_name = "LIST", allow_hyphen_values = true)]
        values: String,
        /// Runs per point with rederived noise/training seeds
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Output table (CSV)
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Render an SVG plot from a result or symbols table
    Plot {
        /// q_vs_lop, q_per_subcarrier, q_vs_overhead, or constellation
        #[arg(long, value_name = "KIND")]
        kind: String,
        /// Input CSV (result table, or symbols table for constellation)
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Output SVG
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Check a scenario config and list every violation
    Validate {
        /// Scenario config file (TOML)
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
    },
    /// Print a preset scenario as TOML
    PrintDefaults {
        /// Preset name
        #[arg(long, value_name = "NAME", default_value = "single-16qam")]
        preset: String,
    },
}

fn cmd_run(
    source: &ConfigSource,
    out: Option<&PathBuf>,
    symbols_csv: Option<&PathBuf>,
    save_trace_path: Option<&PathBuf>,
    rx_trace: Option<&PathBuf>,
    save_equalizer_path: Option<&PathBuf>,
) -> Result<()> {
    let cfg = source.load()?;
    let opts = RunOptions {
        keep_waveforms: save_trace_path.is_some(),
        replay_rx: match rx_trace {
            Some(p) => Some(load_trace(p)?),
            None => None,
        },
    };
    let result = run_scenario(&cfg, &opts)?;

    println!("scenario         {}", cfg.fingerprint());
    println!("equalizer        {}", cfg.equalizer_choice().map_err(HarnessError::Config)?.label());
    println!("measured bits    {}", result.quality.n_bits_counted);
    println!("bit errors       {}", result.quality.n_errors);
    println!("ber              {:e}", result.quality.ber);
    println!("q factor         {:.3} dB", result.quality.q_factor_db);
    println!("evm              {:.3} %", result.quality.evm_percent);
    if result.inverted {
        println!("note             raw ber exceeded 0.5; counts were folded");
    }
    if let Some(training) = &result.training {
        let epochs: usize = training.iter().map(|t| t.epochs).sum();
        let cost = training.iter().map(|t| t.final_cost).sum::<f64>() / training.len() as f64;
        println!("train epochs     {epochs}");
        println!("train final cost {cost:.3e}");
    }
    println!("net bit rate     {:.6e} bit/s", result.net_bit_rate);
    println!("wall time        {:.2} s", result.wall_time_s);

    if let Some(path) = out {
        let row = ResultRow::from_run(&cfg, &result, "", None, None);
        write_csv(&[row], path)?;
        println!("results          {}", path.display());
    }
    if let Some(path) = symbols_csv {
        write_symbols_csv(&result.equalized, result.measured_rows.start, path)?;
        println!("symbols          {}", path.display());
    }
    if let Some(path) = save_trace_path {
        let wave = result.rx_waveform.as_ref().ok_or_else(|| {
            HarnessError::Runtime("run kept no waveform to trace".into())
        })?;
        save_trace(wave, path)?;
        println!("trace            {}", path.display());
    }
    if let Some(path) = save_equalizer_path {
        let eq = result.equalizer.as_ref().ok_or_else(|| {
            HarnessError::Config(format!(
                "equalizer {:?} has no trainable weights to save",
                cfg.equalizer.kind
            ))
        })?;
        let file = std::fs::File::create(path)
            .map_err(|e| HarnessError::io(&format!("create {}", path.display()), e))?;
        write_equalizer(eq, std::io::BufWriter::new(file))?;
        println!("equalizer file   {}", path.display());
    }
    Ok(())
}

fn cmd_sweep(
    source: &ConfigSource,
    axis: &str,
    values: &str,
    repeats: usize,
    out: &PathBuf,
) -> Result<()> {
    let cfg = source.load()?;
    let axis = SweepAxis::parse(axis, values)?;
    let rows = run_sweep(&cfg, &axis, repeats)?;
    write_csv(&rows, out)?;
    println!(
        "swept {} over {} points x {repeats} repeats -> {}",
        axis.name(),
        axis.len(),
        out.display()
    );
    Ok(())
}

fn real_main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Run {
            source,
            out,
            symbols_csv,
            save_trace,
            rx_trace,
            save_equalizer,
        } => cmd_run(
            source,
            out.as_ref(),
            symbols_csv.as_ref(),
            save_trace.as_ref(),
            rx_trace.as_ref(),
            save_equalizer.as_ref(),
        ),
        Command::Sweep {
            source,
            axis,
            values,
            repeats,
            out,
        } => cmd_sweep(source, axis, values, *repeats, out),
        Command::Plot { kind, input, out } => {
            let kind = PlotKind::from_str(kind)?;
            render_plot(kind, input, out)?;
            println!("plot -> {}", out.display());
            Ok(())
        }
        Command::Validate { config } => {
            let text = std::fs::read_to_string(config)
                .map_err(|e| HarnessError::io(&format!("read {}", config.display()), e))?;
            let cfg = ScenarioConfig::from_toml_str(&text).map_err(HarnessError::Config)?;
            cfg.validate().map_err(HarnessError::Config)?;
            println!("ok: {} ({})", config.display(), cfg.fingerprint());
            Ok(())
        }
        Command::PrintDefaults { preset } => {
            let cfg = ScenarioConfig::preset(preset).ok_or_else(|| {
                HarnessError::Config(format!(
                    "unknown preset {preset:?} (available: {})",
                    ScenarioConfig::PRESET_NAMES.join(", ")
                ))
            })?;
            print!("{}", cfg.to_toml_string());
            Ok(())
        }
    }
}

fn main() {
    if let Err(e) = real_main() {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
