//! Scenario configuration: TOML schema, validation, presets, fingerprint.
//!
//! A scenario file describes one end-to-end run. `print-defaults` emits the
//! two presets; every field shown there can be overridden in a user file.
//! Validation produces field-precise messages and runs before any compute.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use coofdm_core::constellation::Constellation;
use coofdm_core::equalizer::CaseId;
use coofdm_core::fiber::{AmplifierParams, ConverterParams, FiberParams, LinkPlan};
use coofdm_core::modem::OfdmConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub modem: ModemSection,
    pub fiber: FiberSection,
    pub link: LinkSection,
    pub wdm: WdmSection,
    pub impairments: ImpairmentsSection,
    pub equalizer: EqualizerSection,
    pub training: TrainingSection,
    pub seeds: SeedsSection,
    pub run: RunSection,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::single_channel_16qam()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModemSection {
    pub ifft_size: usize,
    pub n_data_subcarriers: usize,
    pub cp_fraction: f64,
    pub sample_rate_hz: f64,
    pub pilot_spacing: usize,
    pub n_preamble_symbols: usize,
    /// "qpsk" or "16qam".
    pub constellation: String,
}

impl Default for ModemSection {
    fn default() -> Self {
        Self {
            ifft_size: 512,
            n_data_subcarriers: 210,
            cp_fraction: 0.02,
            sample_rate_hz: 25e9,
            pilot_spacing: 27,
            n_preamble_symbols: 2,
            constellation: "16qam".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiberSection {
    pub gamma_w_km: f64,
    pub dispersion_ps_nm_km: f64,
    pub slope_ps_nm2_km: f64,
    pub attenuation_db_km: f64,
    pub pmd_ps_sqrt_km: f64,
    pub wavelength_nm: f64,
}

impl Default for FiberSection {
    fn default() -> Self {
        let f = FiberParams::default();
        Self {
            gamma_w_km: f.gamma_w_km,
            dispersion_ps_nm_km: f.dispersion_ps_nm_km,
            slope_ps_nm2_km: f.slope_ps_nm2_km,
            attenuation_db_km: f.attenuation_db_km,
            pmd_ps_sqrt_km: f.pmd_ps_sqrt_km,
            wavelength_nm: f.wavelength_nm,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkSection {
    pub n_spans: usize,
    pub span_length_km: f64,
    pub launch_power_dbm: f64,
    /// Split-step size for the forward channel model.
    pub step_km: f64,
    /// Amplifier gain; if absent the gain exactly offsets the span loss.
    pub amplifier_gain_db: Option<f64>,
    pub noise_figure_db: f64,
    /// ASE noise injection (off for noiseless oracle runs).
    pub ase_noise: bool,
}

impl Default for LinkSection {
    fn default() -> Self {
        Self {
            n_spans: 20,
            span_length_km: 100.0,
            launch_power_dbm: -2.0,
            step_km: 1.0,
            amplifier_gain_db: None,
            noise_figure_db: 5.5,
            ase_noise: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WdmSection {
    /// 1 = single channel. The channel under test is the middle one.
    pub n_channels: usize,
    pub spacing_hz: f64,
    /// Receiver demux filter bandwidth as a multiple of the occupied
    /// bandwidth (slightly above 1 so edge subcarriers survive).
    pub demux_bw_factor: f64,
}

impl Default for WdmSection {
    fn default() -> Self {
        Self {
            n_channels: 1,
            spacing_hz: 10e9,
            demux_bw_factor: 1.02,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImpairmentsSection {
    pub converters: bool,
    pub converter_bits: u32,
    pub converter_clipping_db: f64,
    /// Laser phase noise defaults off. With 100 kHz-class lasers the
    /// intra-symbol phase wander (which per-symbol pilot CPE cannot touch)
    /// costs ~10% EVM on its own and masks the fiber effects the equalizer
    /// sweep is meant to compare. Switch it on for phase-noise studies.
    pub phase_noise: bool,
    /// Combined transmitter + LO linewidth driving the Wiener phase walk.
    pub combined_linewidth_hz: f64,
}

impl Default for ImpairmentsSection {
    fn default() -> Self {
        let c = ConverterParams::default();
        Self {
            converters: true,
            converter_bits: c.bits,
            converter_clipping_db: c.clipping_db,
            phase_noise: false,
            combined_linewidth_hz: 200e3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EqualizerSection {
    /// "linear", "dbp", "ann" or "mimo-dl".
    pub kind: String,
    /// Backward steps per span for dbp.
    pub dbp_steps_per_span: usize,
    /// Subcarrier grouping for mimo-dl: "case1".."case4".
    pub case: String,
}

impl Default for EqualizerSection {
    fn default() -> Self {
        Self {
            kind: "mimo-dl".into(),
            dbp_steps_per_span: 40,
            case: "case2".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    /// Fraction of payload symbols used as the training slice.
    pub overhead: f64,
    pub max_epochs: usize,
    pub plateau_window: usize,
    pub plateau_rtol: f64,
    /// Tail fraction of the training slice held out to pick the
    /// best-generalizing iterate. Zero trains on the full slice and keeps
    /// the last iterate.
    pub val_fraction: f64,
    /// Epochs without holdout improvement before training stops.
    pub patience: usize,
    /// RPROP initial per-weight step.
    pub delta0: f64,
    /// RPROP per-weight step ceiling.
    pub delta_max: f64,
    /// L2 penalty on the training gradient; keeps the wide grouped inputs
    /// from fitting noise on short overhead slices.
    pub weight_decay: f64,
    /// Grouped subnets warm-start on their own subcarrier before the
    /// full-group refinement stage.
    pub warm_start: bool,
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self {
            overhead: 0.10,
            max_epochs: 500,
            plateau_window: 10,
            plateau_rtol: 1e-6,
            val_fraction: 0.2,
            patience: 50,
            delta0: 0.07,
            delta_max: 50.0,
            weight_decay: 1e-3,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeedsSection {
    pub channel: u64,
    pub noise: u64,
    pub training: u64,
}

impl Default for SeedsSection {
    fn default() -> Self {
        Self {
            channel: 1,
            noise: 2,
            training: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub n_payload_symbols: usize,
    /// Channel-rate oversampling relative to the modem sample rate.
    pub oversampling: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            n_payload_symbols: 280,
            oversampling: 4,
        }
    }
}

/// Equalizer selection after validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqualizerChoice {
    Linear,
    Dbp { steps_per_span: usize },
    Ann,
    MimoDl { case: CaseId },
}

impl EqualizerChoice {
    pub fn label(&self) -> String {
        match self {
            EqualizerChoice::Linear => "linear".into(),
            EqualizerChoice::Dbp { .. } => "dbp".into(),
            EqualizerChoice::Ann => "ann".into(),
            EqualizerChoice::MimoDl { case } => format!("mimo-dl-{}", case.label()),
        }
    }

    pub fn is_trained(&self) -> bool {
        matches!(self, EqualizerChoice::Ann | EqualizerChoice::MimoDl { .. })
    }
}

impl ScenarioConfig {
    /// Desk-scale single-channel 16-QAM link (20 x 100 km).
    pub fn single_channel_16qam() -> Self {
        Self {
            modem: ModemSection::default(),
            fiber: FiberSection::default(),
            link: LinkSection::default(),
            wdm: WdmSection::default(),
            impairments: ImpairmentsSection::default(),
            equalizer: EqualizerSection::default(),
            training: TrainingSection::default(),
            seeds: SeedsSection::default(),
            run: RunSection::default(),
        }
    }

    /// Desk-scale WDM QPSK link: 5 channels on a 10 GHz grid, 32 x 100 km.
    /// The full 20-channel variant needs the `--full` gate.
    pub fn wdm_qpsk() -> Self {
        Self {
            modem: ModemSection {
                constellation: "qpsk".into(),
                ..ModemSection::default()
            },
            link: LinkSection {
                n_spans: 32,
                step_km: 1.0,
                launch_power_dbm: 0.0,
                ..LinkSection::default()
            },
            wdm: WdmSection {
                n_channels: 5,
                ..WdmSection::default()
            },
            run: RunSection {
                n_payload_symbols: 560,
                oversampling: 4,
            },
            ..Self::single_channel_16qam()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "single-16qam" => Some(Self::single_channel_16qam()),
            "wdm-qpsk" => Some(Self::wdm_qpsk()),
            _ => None,
        }
    }

    pub const PRESET_NAMES: [&'static str; 2] = ["single-16qam", "wdm-qpsk"];

    pub fn from_toml_str(s: &str) -> Result<Self, String> {
        toml::from_str(s).map_err(|e| format!("config parse error: {e}"))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialized form; stable across
    /// re-serialization because it hashes the parsed structure. JSON is the
    /// hashed encoding because derived seeds can exceed TOML's integer
    /// range.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("config serializes"));
        let d = h.finalize();
        let mut hex = String::with_capacity(16);
        for b in &d[..8] {
            hex.push_str(&format!("{b:02x}"));
        }
        hex
    }

    pub fn constellation(&self) -> Result<Constellation, String> {
        match self.modem.constellation.to_ascii_lowercase().as_str() {
            "qpsk" => Ok(Constellation::Qpsk),
            "16qam" | "16-qam" | "qam16" => Ok(Constellation::Qam16),
            other => Err(format!(
                "modem.constellation: unknown format {other:?} (expected \"qpsk\" or \"16qam\")"
            )),
        }
    }

    pub fn ofdm_config(&self) -> Result<OfdmConfig, String> {
        Ok(OfdmConfig {
            ifft_size: self.modem.ifft_size,
            n_data_subcarriers: self.modem.n_data_subcarriers,
            cp_fraction: self.modem.cp_fraction,
            sample_rate: self.modem.sample_rate_hz,
            pilot_spacing: self.modem.pilot_spacing,
            n_preamble_symbols: self.modem.n_preamble_symbols,
            constellation: self.constellation()?,
        })
    }

    pub fn fiber_params(&self) -> FiberParams {
        FiberParams {
            gamma_w_km: self.fiber.gamma_w_km,
            dispersion_ps_nm_km: self.fiber.dispersion_ps_nm_km,
            slope_ps_nm2_km: self.fiber.slope_ps_nm2_km,
            attenuation_db_km: self.fiber.attenuation_db_km,
            pmd_ps_sqrt_km: self.fiber.pmd_ps_sqrt_km,
            wavelength_nm: self.fiber.wavelength_nm,
        }
    }

    pub fn link_plan(&self) -> LinkPlan {
        let gain_db = self
            .link
            .amplifier_gain_db
            .unwrap_or(self.fiber.attenuation_db_km * self.link.span_length_km);
        LinkPlan {
            n_spans: self.link.n_spans,
            span_length_km: self.link.span_length_km,
            launch_power_dbm: self.link.launch_power_dbm,
            amplifier: AmplifierParams {
                gain_db,
                noise_figure_db: self.link.noise_figure_db,
            },
            step_km: self.link.step_km,
        }
    }

    pub fn converter_params(&self) -> ConverterParams {
        ConverterParams {
            bits: self.impairments.converter_bits,
            clipping_db: self.impairments.converter_clipping_db,
        }
    }

    pub fn equalizer_choice(&self) -> Result<EqualizerChoice, String> {
        match self.equalizer.kind.to_ascii_lowercase().as_str() {
            "linear" => Ok(EqualizerChoice::Linear),
            "dbp" => Ok(EqualizerChoice::Dbp {
                steps_per_span: self.equalizer.dbp_steps_per_span,
            }),
            "ann" => Ok(EqualizerChoice::Ann),
            "mimo-dl" | "mimo_dl" | "mimo" => {
                let case: CaseId = self
                    .equalizer
                    .case
                    .parse()
                    .map_err(|e| format!("equalizer.case: {e}"))?;
                Ok(EqualizerChoice::MimoDl { case })
            }
            other => Err(format!(
                "equalizer.kind: unknown kind {other:?} (expected linear, dbp, ann or mimo-dl)"
            )),
        }
    }

    /// Number of payload symbols in the training slice.
    pub fn n_training_rows(&self) -> usize {
        (self.training.overhead * self.run.n_payload_symbols as f64).ceil() as usize
    }

    /// Aggregate (channel-rate) sample rate.
    pub fn channel_rate_hz(&self) -> f64 {
        self.modem.sample_rate_hz * self.run.oversampling as f64
    }

    /// Raw and net bit rate from the actual framing, bit/s. Net removes the
    /// training overhead slice on top of CP, preamble and pilot overhead.
    pub fn bit_rates(&self) -> Result<(f64, f64), String> {
        let cfg = self.ofdm_config()?;
        let bps = cfg.constellation.bits_per_symbol();
        let n_payload = self.run.n_payload_symbols;
        let n_sym = n_payload + cfg.n_preamble_symbols;
        let duration = (n_sym * cfg.symbol_samples()) as f64 / cfg.sample_rate;
        let raw = (n_payload * cfg.n_data_subcarriers * bps) as f64 / duration;
        let measured = n_payload - self.n_training_rows().min(n_payload);
        let net = (measured * cfg.n_data_subcarriers * bps) as f64 / duration;
        Ok((raw, net))
    }

    /// Every violated constraint as a `section.field: message` line.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();

        match self.ofdm_config() {
            Ok(cfg) => {
                for msg in cfg.violations() {
                    v.push(format!("modem.{msg}"));
                }
            }
            Err(e) => v.push(e),
        }

        for msg in self.fiber_params().violations() {
            v.push(format!("fiber.{msg}"));
        }

        if self.link.n_spans > 0 {
            if !(self.link.span_length_km > 0.0) {
                v.push(format!(
                    "link.span_length_km: must be > 0, got {}",
                    self.link.span_length_km
                ));
            }
            if !(self.link.step_km > 0.0) {
                v.push(format!("link.step_km: must be > 0, got {}", self.link.step_km));
            } else if self.link.step_km > self.link.span_length_km {
                v.push(format!(
                    "link.step_km: {} exceeds span_length_km {}",
                    self.link.step_km, self.link.span_length_km
                ));
            }
        }
        if !self.link.launch_power_dbm.is_finite() {
            v.push("link.launch_power_dbm: must be finite".into());
        }
        if !self.link.noise_figure_db.is_finite() {
            v.push("link.noise_figure_db: must be finite".into());
        }

        if self.run.n_payload_symbols == 0 {
            v.push("run.n_payload_symbols: must be >= 1".into());
        }
        if self.run.oversampling < 2 {
            v.push(format!(
                "run.oversampling: must be >= 2 to leave nonlinear spectral headroom, got {}",
                self.run.oversampling
            ));
        }

        if self.wdm.n_channels == 0 {
            v.push("wdm.n_channels: must be >= 1".into());
        }
        if self.wdm.n_channels > 1 {
            if !(self.wdm.spacing_hz > 0.0) {
                v.push(format!(
                    "wdm.spacing_hz: must be > 0 for multi-channel runs, got {}",
                    self.wdm.spacing_hz
                ));
            }
            if let Ok(cfg) = self.ofdm_config() {
                let half_grid = (self.wdm.n_channels - 1) as f64 / 2.0 * self.wdm.spacing_hz;
                let needed = half_grid + cfg.occupied_bandwidth() / 2.0;
                let nyquist = self.channel_rate_hz() / 2.0;
                if needed > nyquist {
                    v.push(format!(
                        "wdm.n_channels/spacing_hz: outer channel edge at {:.3e} Hz exceeds the \
                         aggregate Nyquist {:.3e} Hz (raise run.oversampling or shrink the grid)",
                        needed, nyquist
                    ));
                }
            }
        }
        if !(self.wdm.demux_bw_factor >= 1.0) || !self.wdm.demux_bw_factor.is_finite() {
            v.push(format!(
                "wdm.demux_bw_factor: must be >= 1, got {}",
                self.wdm.demux_bw_factor
            ));
        }

        if self.impairments.converters
            && (self.impairments.converter_bits == 0 || self.impairments.converter_bits > 48)
        {
            v.push(format!(
                "impairments.converter_bits: must be in 1..=48, got {}",
                self.impairments.converter_bits
            ));
        }
        if self.impairments.phase_noise
            && (!(self.impairments.combined_linewidth_hz >= 0.0)
                || !self.impairments.combined_linewidth_hz.is_finite())
        {
            v.push(format!(
                "impairments.combined_linewidth_hz: must be >= 0 and finite, got {}",
                self.impairments.combined_linewidth_hz
            ));
        }

        // The training slice is excluded from measurement for every
        // equalizer kind, so its bounds are checked unconditionally.
        if !(self.training.overhead > 0.0 && self.training.overhead < 1.0) {
            v.push(format!(
                "training.overhead: must be in (0, 1), got {}",
                self.training.overhead
            ));
        } else {
            let rows = self.n_training_rows();
            if rows == 0 {
                v.push(format!(
                    "training.overhead: {} of {} payload symbols leaves no training rows",
                    self.training.overhead, self.run.n_payload_symbols
                ));
            }
            if rows >= self.run.n_payload_symbols {
                v.push(format!(
                    "training.overhead: {} of {} payload symbols leaves no measured rows",
                    self.training.overhead, self.run.n_payload_symbols
                ));
            }
        }

        match self.equalizer_choice() {
            Ok(EqualizerChoice::Dbp { steps_per_span }) => {
                if steps_per_span == 0 {
                    v.push("equalizer.dbp_steps_per_span: must be >= 1".into());
                }
            }
            Ok(choice @ (EqualizerChoice::Ann | EqualizerChoice::MimoDl { .. })) => {
                if let (EqualizerChoice::MimoDl { case }, Ok(cfg)) =
                    (choice, self.ofdm_config())
                {
                    let total: usize = case.group_sizes().iter().sum();
                    if total != cfg.n_data_subcarriers {
                        v.push(format!(
                            "equalizer.case: {} partitions {total} subcarriers, modem has {}",
                            case.label(),
                            cfg.n_data_subcarriers
                        ));
                    }
                }
                if self.training.max_epochs == 0 {
                    v.push("training.max_epochs: must be >= 1".into());
                }
                if self.training.plateau_window == 0 {
                    v.push("training.plateau_window: must be >= 1".into());
                }
                if !(self.training.plateau_rtol > 0.0) {
                    v.push(format!(
                        "training.plateau_rtol: must be > 0, got {}",
                        self.training.plateau_rtol
                    ));
                }
                if !(0.0..1.0).contains(&self.training.val_fraction) {
                    v.push(format!(
                        "training.val_fraction: must be in [0, 1), got {}",
                        self.training.val_fraction
                    ));
                }
                if self.training.val_fraction > 0.0 && self.training.patience == 0 {
                    v.push("training.patience: must be >= 1 when val_fraction > 0".into());
                }
                if !(self.training.delta0 > 0.0) {
                    v.push(format!(
                        "training.delta0: must be > 0, got {}",
                        self.training.delta0
                    ));
                }
                if self.training.delta_max < self.training.delta0 {
                    v.push(format!(
                        "training.delta_max: must be >= delta0, got {} < {}",
                        self.training.delta_max, self.training.delta0
                    ));
                }
                if self.training.weight_decay < 0.0 {
                    v.push(format!(
                        "training.weight_decay: must be >= 0, got {}",
                        self.training.weight_decay
                    ));
                }
            }
            Ok(EqualizerChoice::Linear) => {}
            Err(e) => v.push(e),
        }

        v
    }

    pub fn validate(&self) -> Result<(), String> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(v.join("\n"))
        }
    }

    /// Scale guard for the `--full` CLI gate.
    pub fn is_large(&self) -> bool {
        self.wdm.n_channels > 5
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in ScenarioConfig::PRESET_NAMES {
            let cfg = ScenarioConfig::preset(name).unwrap();
            assert!(cfg.validate().is_ok(), "{name}: {:?}", cfg.violations());
        }
    }

    #[test]
    fn toml_round_trip_preserves_fingerprint() {
        let cfg = ScenarioConfig::wdm_qpsk();
        let text = cfg.to_toml_string();
        let back = ScenarioConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg.fingerprint(), back.fingerprint());
    }

    #[test]
    fn unknown_fields_rejected() {
        let mut text = ScenarioConfig::default().to_toml_string();
        text.push_str("\n[bogus]\nx = 1\n");
        assert!(ScenarioConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn violations_are_field_precise() {
        let mut cfg = ScenarioConfig::default();
        cfg.training.overhead = 1.5;
        cfg.link.step_km = 500.0;
        cfg.run.oversampling = 1;
        let v = cfg.violations();
        assert!(v.iter().any(|m| m.contains("training.overhead")), "{v:?}");
        assert!(v.iter().any(|m| m.contains("link.step_km")), "{v:?}");
        assert!(v.iter().any(|m| m.contains("run.oversampling")), "{v:?}");
    }

    #[test]
    fn wdm_nyquist_guard() {
        let mut cfg = ScenarioConfig::wdm_qpsk();
        cfg.wdm.n_channels = 21;
        let v = cfg.violations();
        assert!(v.iter().any(|m| m.contains("Nyquist")), "{v:?}");
    }

    #[test]
    fn default_sizing_counts_enough_bits() {
        // >= 2e5 measured bits per preset run.
        for name in ScenarioConfig::PRESET_NAMES {
            let cfg = ScenarioConfig::preset(name).unwrap();
            let cfg_core = cfg.ofdm_config().unwrap();
            let measured = cfg.run.n_payload_symbols - cfg.n_training_rows();
            let bits = measured
                * cfg_core.n_data_subcarriers
                * cfg_core.constellation.bits_per_symbol();
            assert!(bits >= 200_000, "{name}: only {bits} bits");
        }
    }

    #[test]
    fn net_rate_reflects_framing() {
        let cfg = ScenarioConfig::single_channel_16qam();
        let (raw, net) = cfg.bit_rates().unwrap();
        assert!(raw > net && net > 0.0);
        // 210 carriers x 4 bits over 522 samples at 25 GS/s, under the
        // per-symbol gross rate, above half of it.
        let gross = 210.0 * 4.0 / (522.0 / 25e9);
        assert!(raw < gross && raw > gross * 0.9);
    }
}
