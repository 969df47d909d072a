//! End-to-end scenario execution.
//!
//! The chain is split into stage functions (`transmit`, `channel`,
//! `receive`, `evaluate`) so tests can tap intermediate products or reuse
//! one channel realization across several equalizers; `run_scenario` wires
//! them together and stamps the result with fingerprint, wall time and
//! version.
//!
//! Determinism: every random draw comes from one of the three named seed
//! streams (channel data, link noise, equalizer init), each consumed in a
//! fixed order. Two runs with equal configs produce identical numbers.

use std::time::Instant;

use ndarray::{s, Array2};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use coofdm_core::constellation::Constellation;
use coofdm_core::equalizer::{
    dbp_equalize, one_tap_equalize, NnEqualizer, RpropConfig, TrainOptions, TrainingSummary,
};
use coofdm_core::fiber::{
    apply_phase_noise, dac_adc_apply, propagate_link, wdm_demux, wdm_mux, ConverterParams,
    FiberParams, LinkPlan,
};
use coofdm_core::metrics::{quality_report, BitErrors, QualityReport};
use coofdm_core::modem::{
    build_frame, cd_compensate, estimate_channel, ofdm_demodulate, ofdm_modulate, ChannelEstimate,
    OfdmConfig, OfdmFrame,
};
use coofdm_core::prbs::Prbs19;
use coofdm_core::waveform::{downsample_fft, next_fast_len, upsample_fft, SampledWaveform};

use crate::config::{EqualizerChoice, ScenarioConfig};
use crate::error::{HarnessError, Result};

/// Stateless splitmix64-style mixer deriving stream seeds from a base seed
/// and a salt (channel index, repeat index).
pub fn mix_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Validated scenario with the derived core handles.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub cfg: ScenarioConfig,
    pub modem: OfdmConfig,
    pub fiber: FiberParams,
    pub plan: LinkPlan,
    pub choice: EqualizerChoice,
}

impl Scenario {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate().map_err(HarnessError::Config)?;
        let modem = cfg.ofdm_config().map_err(HarnessError::Config)?;
        let choice = cfg.equalizer_choice().map_err(HarnessError::Config)?;
        Ok(Self {
            fiber: cfg.fiber_params(),
            plan: cfg.link_plan(),
            modem,
            choice,
            cfg,
        })
    }

    pub fn n_payload(&self) -> usize {
        self.cfg.run.n_payload_symbols
    }

    /// Frame length in modem-rate samples (preamble + payload, no padding).
    pub fn frame_len(&self) -> usize {
        (self.modem.n_preamble_symbols + self.n_payload()) * self.modem.symbol_samples()
    }

    /// Frame length zero-padded to an FFT-friendly size. The pad doubles as
    /// a guard interval for dispersion wrap-around at the frame edges.
    pub fn padded_len(&self) -> usize {
        next_fast_len(self.frame_len())
    }

    /// Index of the channel whose metrics are reported.
    pub fn test_channel(&self) -> usize {
        self.cfg.wdm.n_channels / 2
    }

    /// Center-frequency offset per WDM channel, symmetric around zero.
    pub fn channel_offsets(&self) -> Vec<f64> {
        let n = self.cfg.wdm.n_channels;
        (0..n)
            .map(|i| (i as f64 - (n as f64 - 1.0) / 2.0) * self.cfg.wdm.spacing_hz)
            .collect()
    }

    pub fn converters(&self) -> ConverterParams {
        self.cfg.converter_params()
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            max_epochs: self.cfg.training.max_epochs,
            plateau_window: self.cfg.training.plateau_window,
            plateau_rtol: self.cfg.training.plateau_rtol,
            val_fraction: self.cfg.training.val_fraction,
            patience: self.cfg.training.patience,
            weight_decay: self.cfg.training.weight_decay,
            warm_start: self.cfg.training.warm_start,
            rprop: RpropConfig {
                delta0: self.cfg.training.delta0,
                delta_max: self.cfg.training.delta_max,
                ..RpropConfig::default()
            },
            ..TrainOptions::default()
        }
    }

    /// First payload row that counts toward metrics (rows before it form
    /// the training slice, whether or not the equalizer trains).
    pub fn first_measured_row(&self) -> usize {
        self.cfg.n_training_rows()
    }

    /// Regenerate the frame of one channel from the channel seed stream.
    pub fn frame_for(&self, channel: usize) -> Result<OfdmFrame> {
        let mut prbs = Prbs19::from_wide_seed(mix_seed(self.cfg.seeds.channel, channel as u64));
        Ok(build_frame(&self.modem, self.n_payload(), &mut prbs)?)
    }
}

/// Transmitter output: the frame under test plus the aggregate field at the
/// channel (oversampled) rate, unit average power per channel.
pub struct TxOutput {
    pub frame: OfdmFrame,
    pub aggregate: SampledWaveform,
    /// The test channel's modem-rate frame waveform after converter
    /// impairment, before padding (reference for waveform-level checks).
    pub modem_waveform: SampledWaveform,
}

pub fn transmit(sc: &Scenario) -> Result<TxOutput> {
    let n_channels = sc.cfg.wdm.n_channels;
    let mut test_frame = None;
    let mut test_modem_wave = None;
    let mut channels = Vec::with_capacity(n_channels);
    for ch in 0..n_channels {
        let frame = sc.frame_for(ch)?;
        let mut w = ofdm_modulate(&frame, &sc.modem)?;
        if sc.cfg.impairments.converters {
            dac_adc_apply(&mut w, &sc.converters())?;
        }
        if ch == sc.test_channel() {
            test_frame = Some(frame);
            test_modem_wave = Some(w.clone());
        }
        w.samples.resize(sc.padded_len(), Complex64::default());
        channels.push(upsample_fft(&w, sc.cfg.run.oversampling)?);
    }
    let aggregate = if n_channels == 1 {
        channels.pop().expect("one channel")
    } else {
        wdm_mux(
            &channels,
            &sc.channel_offsets(),
            sc.modem.occupied_bandwidth(),
        )?
    };
    Ok(TxOutput {
        frame: test_frame.expect("test channel built"),
        aggregate,
        modem_waveform: test_modem_wave.expect("test channel built"),
    })
}

/// Fiber link plus receiver-side phase noise, in place. `noise_rng` is the
/// scenario's noise stream; it is consumed in a fixed order (ASE span by
/// span, then the phase walk).
pub fn channel(sc: &Scenario, w: &mut SampledWaveform, noise_rng: &mut ChaCha12Rng) -> Result<()> {
    let nonlinear = sc.fiber.gamma_w_km > 0.0;
    propagate_link(
        w,
        &sc.plan,
        &sc.fiber,
        nonlinear,
        sc.cfg.link.ase_noise,
        noise_rng,
    )?;
    if sc.cfg.impairments.phase_noise && sc.cfg.impairments.combined_linewidth_hz > 0.0 {
        apply_phase_noise(w, sc.cfg.impairments.combined_linewidth_hz, noise_rng)?;
    }
    Ok(())
}

/// Receiver output down to equalized subcarrier symbols.
pub struct RxOutput {
    pub one_tap: Array2<Complex64>,
    pub equalized: Array2<Complex64>,
    pub estimate: ChannelEstimate,
    pub training: Option<Vec<TrainingSummary>>,
    /// Trained network bank, present for the trained equalizer kinds.
    pub equalizer: Option<NnEqualizer>,
    /// Waveform after static compensation, back at modem rate and truncated
    /// to the frame (reference point for waveform-level checks).
    pub compensated: SampledWaveform,
}

/// Full receive chain: demux, ADC, static compensation (CDC or DBP),
/// demodulation, channel estimation, one-tap, then the configured
/// equalizer trained on the overhead slice.
pub fn receive(sc: &Scenario, rx_wave: &SampledWaveform, frame: &OfdmFrame) -> Result<RxOutput> {
    // Channel select. Single-channel runs skip the brick-wall filter so the
    // rx chain stays an exact inverse of the tx chain where it should be.
    let mut w = if sc.cfg.wdm.n_channels > 1 {
        let offset = sc.channel_offsets()[sc.test_channel()];
        let bw = sc.modem.occupied_bandwidth() * sc.cfg.wdm.demux_bw_factor;
        wdm_demux(rx_wave, offset, bw)?
    } else {
        rx_wave.clone()
    };

    if sc.cfg.impairments.converters {
        dac_adc_apply(&mut w, &sc.converters())?;
    }

    // Static compensation runs at the oversampled rate where the nonlinear
    // spectral products still live.
    match sc.choice {
        EqualizerChoice::Dbp { steps_per_span } => {
            dbp_equalize(&mut w, &sc.plan, &sc.fiber, steps_per_span)?;
        }
        _ => {
            let total_km = sc.plan.n_spans as f64 * sc.plan.span_length_km;
            if total_km > 0.0 {
                w = cd_compensate(&w, &sc.fiber, total_km)?;
            }
        }
    }

    let mut base = downsample_fft(&w, sc.cfg.run.oversampling)?;
    base.samples.truncate(sc.frame_len());

    let rx = ofdm_demodulate(&base, &sc.modem, sc.n_payload())?;
    let estimate = estimate_channel(&rx, frame, &sc.modem)?;
    let one_tap = one_tap_equalize(&rx.payload, &estimate)?;
    let (equalized, training, equalizer) = equalize(sc, &one_tap, frame)?;
    Ok(RxOutput {
        one_tap,
        equalized,
        estimate,
        training,
        equalizer,
        compensated: base,
    })
}

/// Apply the configured equalizer to the one-tap symbol matrix, training on
/// the leading overhead rows when the equalizer is a trained kind.
pub fn equalize(
    sc: &Scenario,
    one_tap: &Array2<Complex64>,
    frame: &OfdmFrame,
) -> Result<(
    Array2<Complex64>,
    Option<Vec<TrainingSummary>>,
    Option<NnEqualizer>,
)> {
    let order = sc.modem.constellation.order();
    let n_sc = sc.modem.n_data_subcarriers;
    let mut eq = match sc.choice {
        EqualizerChoice::Linear | EqualizerChoice::Dbp { .. } => {
            return Ok((one_tap.clone(), None, None));
        }
        EqualizerChoice::Ann => NnEqualizer::per_carrier(n_sc, order, sc.cfg.seeds.training)?,
        EqualizerChoice::MimoDl { case } => {
            NnEqualizer::grouped(case, n_sc, order, sc.cfg.seeds.training)?
        }
    };
    let rows = sc.first_measured_row();
    let rx_train = one_tap.slice(s![0..rows, ..]).to_owned();
    let tx_train = frame.payload_symbols.slice(s![0..rows, ..]).to_owned();
    let summaries = eq.train(&rx_train, &tx_train, &sc.train_options())?;
    let equalized = eq.apply(one_tap)?;
    Ok((equalized, Some(summaries), Some(eq)))
}

/// Metrics over the measured payload rows.
pub struct Evaluation {
    pub report: QualityReport,
    /// Raw aggregate BER exceeded 0.5; the report carries folded values.
    pub inverted: bool,
    pub measured_rows: std::ops::Range<usize>,
}

pub fn evaluate(
    sc: &Scenario,
    frame: &OfdmFrame,
    equalized: &Array2<Complex64>,
) -> Result<Evaluation> {
    let n_payload = sc.n_payload();
    let n_data = sc.modem.n_data_subcarriers;
    let bps = sc.modem.constellation.bits_per_symbol();
    let t0 = sc.first_measured_row();
    if t0 >= n_payload {
        return Err(HarnessError::Config(format!(
            "training.overhead: training slice covers all {n_payload} payload symbols"
        )));
    }

    let constellation: Constellation = sc.modem.constellation;
    let mut counts = vec![BitErrors { errors: 0, total: 0 }; n_data];
    let mut rx_syms = Vec::with_capacity((n_payload - t0) * n_data);
    let mut ref_syms = Vec::with_capacity((n_payload - t0) * n_data);
    let mut rx_bits = Vec::with_capacity(bps);
    for t in t0..n_payload {
        for sci in 0..n_data {
            let z = equalized[(t, sci)];
            rx_bits.clear();
            constellation.demap_symbol(z, &mut rx_bits);
            let at = (t * n_data + sci) * bps;
            let tx_bits = &frame.payload_bits[at..at + bps];
            let errors = tx_bits
                .iter()
                .zip(&rx_bits)
                .filter(|(a, b)| a != b)
                .count();
            counts[sci].merge(BitErrors { errors, total: bps });
            rx_syms.push(z);
            ref_syms.push(frame.payload_symbols[(t, sci)]);
        }
    }

    let total: usize = counts.iter().map(|c| c.total).sum();
    let errors: usize = counts.iter().map(|c| c.errors).sum();
    let inverted = 2 * errors > total;
    if inverted {
        for c in &mut counts {
            c.errors = c.total - c.errors;
        }
    }
    let report = quality_report(&counts, &rx_syms, &ref_syms)?;
    Ok(Evaluation {
        report,
        inverted,
        measured_rows: t0..n_payload,
    })
}

/// Options controlling what one run retains and whether it replays a
/// recorded received waveform instead of simulating the channel.
#[derive(Default)]
pub struct RunOptions {
    /// Keep the waveform taps in the result (memory heavy).
    pub keep_waveforms: bool,
    /// Skip tx + channel; feed this as the received aggregate field.
    pub replay_rx: Option<SampledWaveform>,
}

#[derive(Debug)]
pub struct RunResult {
    pub quality: QualityReport,
    pub inverted: bool,
    pub training: Option<Vec<TrainingSummary>>,
    /// Trained network bank, present for the trained equalizer kinds.
    pub equalizer: Option<NnEqualizer>,
    pub fingerprint: String,
    pub wall_time_s: f64,
    pub version: &'static str,
    pub raw_bit_rate: f64,
    pub net_bit_rate: f64,
    pub measured_rows: std::ops::Range<usize>,
    pub equalized: Array2<Complex64>,
    pub one_tap: Array2<Complex64>,
    /// Post-link aggregate field (present with `keep_waveforms`).
    pub rx_waveform: Option<SampledWaveform>,
    /// Post-compensation modem-rate frame (present with `keep_waveforms`).
    pub compensated: Option<SampledWaveform>,
    /// Transmitted modem-rate frame (present with `keep_waveforms`).
    pub tx_waveform: Option<SampledWaveform>,
}

pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunResult> {
    let start = Instant::now();
    let sc = Scenario::new(cfg.clone())?;
    let (frame, rx_wave, tx_wave) = match &opts.replay_rx {
        Some(w) => {
            let expect_len = sc.padded_len() * sc.cfg.run.oversampling;
            let expect_rate = sc.cfg.channel_rate_hz();
            if w.len() != expect_len || w.sample_rate != expect_rate {
                return Err(HarnessError::Config(format!(
                    "replay trace geometry mismatch: {} samples at {} Hz, scenario expects {} at {}",
                    w.len(),
                    w.sample_rate,
                    expect_len,
                    expect_rate
                )));
            }
            (sc.frame_for(sc.test_channel())?, w.clone(), None)
        }
        None => {
            let tx = transmit(&sc)?;
            let mut w = tx.aggregate;
            let mut noise_rng = ChaCha12Rng::seed_from_u64(sc.cfg.seeds.noise);
            channel(&sc, &mut w, &mut noise_rng)?;
            (tx.frame, w, Some(tx.modem_waveform))
        }
    };
    let rx = receive(&sc, &rx_wave, &frame)?;
    let eval = evaluate(&sc, &frame, &rx.equalized)?;
    let (raw_bit_rate, net_bit_rate) = cfg.bit_rates().map_err(HarnessError::Config)?;
    Ok(RunResult {
        quality: eval.report,
        inverted: eval.inverted,
        training: rx.training,
        equalizer: rx.equalizer,
        fingerprint: cfg.fingerprint(),
        wall_time_s: start.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION"),
        raw_bit_rate,
        net_bit_rate,
        measured_rows: eval.measured_rows,
        equalized: rx.equalized,
        one_tap: rx.one_tap,
        rx_waveform: opts.keep_waveforms.then_some(rx_wave),
        compensated: opts.keep_waveforms.then(|| rx.compensated),
        tx_waveform: if opts.keep_waveforms { tx_wave } else { None },
    })
}

/// Relative L2 distance between two equal-length waveforms.
pub fn waveform_rtol(a: &SampledWaveform, b: &SampledWaveform) -> f64 {
    assert_eq!(a.len(), b.len(), "waveform_rtol length mismatch");
    let num: f64 = a
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();
    let den: f64 = b.samples.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b2b_config(kind: &str, constellation: &str) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::single_channel_16qam();
        cfg.modem.constellation = constellation.into();
        cfg.link.n_spans = 0;
        cfg.link.ase_noise = false;
        cfg.impairments.converters = false;
        cfg.impairments.phase_noise = false;
        cfg.equalizer.kind = kind.into();
        cfg.equalizer.dbp_steps_per_span = 1;
        cfg.run.n_payload_symbols = 12;
        cfg.training.overhead = 0.5;
        cfg.training.max_epochs = 150;
        cfg
    }

    #[test]
    fn back_to_back_linear_is_error_free() {
        for constellation in ["qpsk", "16qam"] {
            let cfg = b2b_config("linear", constellation);
            let r = run_scenario(&cfg, &RunOptions::default()).unwrap();
            assert_eq!(r.quality.n_errors, 0, "{constellation}");
            assert!(!r.inverted);
            assert!(r.quality.q_factor_db.is_finite());
            assert_eq!(r.quality.per_subcarrier_q.len(), 210);
        }
    }

    #[test]
    fn seeded_reruns_are_identical() {
        let mut cfg = ScenarioConfig::single_channel_16qam();
        cfg.run.n_payload_symbols = 8;
        cfg.training.overhead = 0.25;
        cfg.equalizer.kind = "linear".into();
        cfg.link.n_spans = 2;
        cfg.link.step_km = 10.0;
        let a = run_scenario(&cfg, &RunOptions::default()).unwrap();
        let b = run_scenario(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(a.quality, b.quality);
        assert_eq!(a.equalized, b.equalized);
        assert_eq!(a.fingerprint, b.fingerprint);
    }

    #[test]
    fn noise_seed_changes_outcome() {
        let mut cfg = ScenarioConfig::single_channel_16qam();
        cfg.run.n_payload_symbols = 8;
        cfg.training.overhead = 0.25;
        cfg.equalizer.kind = "linear".into();
        cfg.link.n_spans = 2;
        cfg.link.step_km = 10.0;
        let a = run_scenario(&cfg, &RunOptions::default()).unwrap();
        cfg.seeds.noise = 777;
        let b = run_scenario(&cfg, &RunOptions::default()).unwrap();
        assert_ne!(a.equalized, b.equalized);
    }

    #[test]
    fn replay_reproduces_run_metrics() {
        let mut cfg = ScenarioConfig::single_channel_16qam();
        cfg.run.n_payload_symbols = 8;
        cfg.training.overhead = 0.25;
        cfg.equalizer.kind = "linear".into();
        cfg.link.n_spans = 1;
        cfg.link.step_km = 5.0;
        let keep = RunOptions {
            keep_waveforms: true,
            replay_rx: None,
        };
        let a = run_scenario(&cfg, &keep).unwrap();
        let replay = RunOptions {
            keep_waveforms: false,
            replay_rx: Some(a.rx_waveform.clone().unwrap()),
        };
        let b = run_scenario(&cfg, &replay).unwrap();
        assert_eq!(a.quality, b.quality);
        assert_eq!(a.equalized, b.equalized);
    }

    #[test]
    fn replay_rejects_wrong_geometry() {
        let cfg = b2b_config("linear", "16qam");
        let w = SampledWaveform::new(vec![Complex64::default(); 64], 1e9);
        let err = run_scenario(
            &cfg,
            &RunOptions {
                keep_waveforms: false,
                replay_rx: Some(w),
            },
        )
        .unwrap_err();
        assert_eq!(err.category(), "config");
    }

    #[test]
    fn mix_seed_separates_streams() {
        let a = mix_seed(1, 0);
        let b = mix_seed(1, 1);
        let c = mix_seed(2, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, mix_seed(1, 0));
    }
}
