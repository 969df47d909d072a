//! Fiber channel: split-step Fourier propagation, EDFA amplification with ASE
//! noise, DAC/ADC impairments, laser phase noise and WDM mux/demux.
//!
//! The scalar envelope equation solved per step is
//!
//! ```text
//! dA/dz = -(alpha/2) A - i (beta2/2) d2A/dt2 + (beta3/6) d3A/dt3 + i gamma |A|^2 A
//! ```
//!
//! integrated with the symmetric split-step scheme: half linear step in the
//! frequency domain (dispersion phase plus loss), full nonlinear phase rotation
//! `exp(i gamma |A|^2 dz)` at the step midpoint, half linear step. Keeping the
//! loss in the linear halves makes the midpoint power the effective-length
//! average to second order, and makes a backward pass with negated parameters
//! an exact inverse of a forward pass with matched steps: the nonlinear
//! rotation is a pure phase, so the midpoint magnitudes agree sample by
//! sample in both directions.

use num_complex::Complex64;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{CoreError, Result};
use crate::waveform::{angular_freqs, fft_forward, fft_inverse, frequency_shift, SampledWaveform};

/// Planck constant, J s.
const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light, m/s.
const C_LIGHT: f64 = 299_792_458.0;

/// Standard single-mode fiber at 1550 nm.
#[derive(Debug, Clone)]
pub struct FiberParams {
    /// Kerr coefficient, 1/(W km).
    pub gamma_w_km: f64,
    /// Dispersion parameter D, ps/(nm km).
    pub dispersion_ps_nm_km: f64,
    /// Dispersion slope S, ps/(nm^2 km).
    pub slope_ps_nm2_km: f64,
    /// Attenuation, dB/km.
    pub attenuation_db_km: f64,
    /// PMD coefficient, ps/sqrt(km). Carried for completeness; the scalar
    /// single-polarization model here does not use it.
    pub pmd_ps_sqrt_km: f64,
    /// Carrier wavelength, nm.
    pub wavelength_nm: f64,
}

impl Default for FiberParams {
    fn default() -> Self {
        Self {
            gamma_w_km: 1.1,
            dispersion_ps_nm_km: 16.0,
            slope_ps_nm2_km: 0.06,
            attenuation_db_km: 0.2,
            pmd_ps_sqrt_km: 0.1,
            wavelength_nm: 1550.2,
        }
    }
}

impl FiberParams {
    /// Group-velocity dispersion beta2 in s^2/m, from D and the wavelength:
    /// beta2 = -D lambda^2 / (2 pi c).
    pub fn beta2_s2_m(&self) -> f64 {
        let d_si = self.dispersion_ps_nm_km * 1e-6; // s/m^2
        let lam = self.wavelength_nm * 1e-9;
        -d_si * lam * lam / (2.0 * std::f64::consts::PI * C_LIGHT)
    }

    /// Third-order dispersion beta3 in s^3/m:
    /// beta3 = (lambda^2 / (2 pi c))^2 (S + 2 D / lambda).
    pub fn beta3_s3_m(&self) -> f64 {
        let d_si = self.dispersion_ps_nm_km * 1e-6;
        let s_si = self.slope_ps_nm2_km * 1e3; // s/m^3
        let lam = self.wavelength_nm * 1e-9;
        let k = lam * lam / (2.0 * std::f64::consts::PI * C_LIGHT);
        k * k * (s_si + 2.0 * d_si / lam)
    }

    /// Power attenuation in nepers per meter.
    pub fn alpha_np_m(&self) -> f64 {
        self.attenuation_db_km * (10.0f64.ln() / 10.0) / 1e3
    }

    /// Kerr coefficient in 1/(W m).
    pub fn gamma_w_m(&self) -> f64 {
        self.gamma_w_km / 1e3
    }

    /// Optical carrier frequency, Hz.
    pub fn carrier_hz(&self) -> f64 {
        C_LIGHT / (self.wavelength_nm * 1e-9)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.gamma_w_km >= 0.0) || !self.gamma_w_km.is_finite() {
            v.push(format!("gamma_w_km: must be >= 0 and finite, got {}", self.gamma_w_km));
        }
        if !self.dispersion_ps_nm_km.is_finite() {
            v.push("dispersion_ps_nm_km: must be finite".into());
        }
        if !self.slope_ps_nm2_km.is_finite() {
            v.push("slope_ps_nm2_km: must be finite".into());
        }
        if !(self.attenuation_db_km >= 0.0) || !self.attenuation_db_km.is_finite() {
            v.push(format!(
                "attenuation_db_km: must be >= 0 and finite, got {}",
                self.attenuation_db_km
            ));
        }
        if !(self.wavelength_nm > 0.0) || !self.wavelength_nm.is_finite() {
            v.push(format!("wavelength_nm: must be positive, got {}", self.wavelength_nm));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(CoreError::InvalidConfig(v.join("; ")))
        }
    }
}

/// Propagation direction for the split-step solver. `Backward` negates
/// dispersion, nonlinearity and loss, which turns the solver into the exact
/// inverse of a forward pass with the same steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Symmetric split-step Fourier propagation over `length_km`, in place.
/// The final partial step covers the remainder when the step does not divide
/// the length. Emits a log warning when a significant fraction of spectral
/// energy sits in the outer half of the digital band (under-oversampling
/// makes nonlinear products alias).
pub fn ssfm_propagate(
    w: &mut SampledWaveform,
    fiber: &FiberParams,
    length_km: f64,
    step_km: f64,
    direction: Direction,
) -> Result<()> {
    fiber.validate()?;
    if w.is_empty() {
        return Err(CoreError::EmptyInput("ssfm_propagate"));
    }
    if !(length_km >= 0.0) || !length_km.is_finite() {
        return Err(CoreError::InvalidConfig(format!(
            "length_km: must be >= 0 and finite, got {length_km}"
        )));
    }
    if length_km == 0.0 {
        return Ok(());
    }
    if !(step_km > 0.0) || !step_km.is_finite() {
        return Err(CoreError::InvalidConfig(format!(
            "step_km: must be > 0 and finite, got {step_km}"
        )));
    }
    if step_km > length_km {
        return Err(CoreError::StepExceedsLength { step_km, length_km });
    }
    check_oversampling(w);

    let sign = match direction {
        Direction::Forward => 1.0,
        Direction::Backward => -1.0,
    };
    let n = w.len();
    let omega = angular_freqs(n, w.sample_rate);
    let b2 = sign * fiber.beta2_s2_m();
    let b3 = sign * fiber.beta3_s3_m();
    let alpha = sign * fiber.alpha_np_m();
    let gamma = sign * fiber.gamma_w_m();

    let n_full = (length_km / step_km).floor() as usize;
    let remainder_km = length_km - n_full as f64 * step_km;
    let mut steps = vec![step_km * 1e3; n_full];
    if remainder_km > 1e-9 {
        steps.push(remainder_km * 1e3);
    }

    // Reusable half-step operator for the uniform part.
    let half_op = |dz_m: f64| -> Vec<Complex64> {
        omega
            .iter()
            .map(|&om| {
                let phase = (b2 / 2.0 * om * om - b3 / 6.0 * om * om * om) * dz_m / 2.0;
                let amp = (-alpha * dz_m / 4.0).exp();
                Complex64::from_polar(amp, phase)
            })
            .collect()
    };
    let uniform_half = half_op(step_km * 1e3);

    let buf = &mut w.samples;
    for &dz_m in &steps {
        let half = if (dz_m - step_km * 1e3).abs() < 1e-9 {
            &uniform_half
        } else {
            &half_op(dz_m)
        };
        fft_forward(buf);
        for (s, h) in buf.iter_mut().zip(half.iter()) {
            *s *= h;
        }
        fft_inverse(buf);
        for s in buf.iter_mut() {
            let phi = gamma * s.norm_sqr() * dz_m;
            *s *= Complex64::from_polar(1.0, phi);
        }
        fft_forward(buf);
        for (s, h) in buf.iter_mut().zip(half.iter()) {
            *s *= h;
        }
        fft_inverse(buf);
    }
    Ok(())
}

fn check_oversampling(w: &SampledWaveform) {
    let n = w.len();
    if n < 16 {
        return;
    }
    let mut spec = w.samples.clone();
    fft_forward(&mut spec);
    let total: f64 = spec.iter().map(|s| s.norm_sqr()).sum();
    if total <= 0.0 {
        return;
    }
    // Outer half of the band: |f| > fs/4.
    let lo = n / 4;
    let hi = n - n / 4;
    let outer: f64 = spec[lo..hi].iter().map(|s| s.norm_sqr()).sum();
    if outer / total > 0.01 {
        log::warn!(
            "ssfm_propagate: {:.1}% of spectral energy beyond fs/4; nonlinear \
             products may alias (increase oversampling)",
            100.0 * outer / total
        );
    }
}

/// Lumped amplifier.
#[derive(Debug, Clone)]
pub struct AmplifierParams {
    pub gain_db: f64,
    pub noise_figure_db: f64,
}

impl Default for AmplifierParams {
    fn default() -> Self {
        Self {
            gain_db: 20.0,
            noise_figure_db: 5.5,
        }
    }
}

/// One-sided ASE power spectral density added by an amplifier of gain G:
/// S_ase = (NF_lin / 2) (G - 1) h nu, in W/Hz.
pub fn ase_psd_w_hz(amp: &AmplifierParams, wavelength_nm: f64) -> f64 {
    let g = 10.0f64.powf(amp.gain_db / 10.0);
    let nf = 10.0f64.powf(amp.noise_figure_db / 10.0);
    let nu = C_LIGHT / (wavelength_nm * 1e-9);
    (nf / 2.0) * (g - 1.0).max(0.0) * PLANCK * nu
}

/// Apply flat gain and, when `noise_on`, circular complex AWGN of total
/// variance `S_ase * sample_rate` per sample (the white-noise density
/// integrated over the simulation bandwidth).
pub fn edfa_amplify(
    w: &mut SampledWaveform,
    amp: &AmplifierParams,
    wavelength_nm: f64,
    noise_on: bool,
    rng: &mut ChaCha12Rng,
) -> Result<()> {
    if !amp.gain_db.is_finite() || !amp.noise_figure_db.is_finite() {
        return Err(CoreError::InvalidConfig(
            "amplifier gain_db and noise_figure_db must be finite".into(),
        ));
    }
    let g_amp = 10.0f64.powf(amp.gain_db / 20.0);
    for s in &mut w.samples {
        *s *= g_amp;
    }
    if noise_on {
        let var = ase_psd_w_hz(amp, wavelength_nm) * w.sample_rate;
        let sigma = (var / 2.0).sqrt();
        let normal = Normal::new(0.0, sigma).map_err(|e| {
            CoreError::InvalidConfig(format!("ASE noise sigma invalid: {e}"))
        })?;
        for s in &mut w.samples {
            *s += Complex64::new(normal.sample(rng), normal.sample(rng));
        }
    }
    Ok(())
}

/// Multi-span link description.
#[derive(Debug, Clone)]
pub struct LinkPlan {
    pub n_spans: usize,
    pub span_length_km: f64,
    pub launch_power_dbm: f64,
    pub amplifier: AmplifierParams,
    /// Forward split-step size, km.
    pub step_km: f64,
}

impl Default for LinkPlan {
    fn default() -> Self {
        Self {
            n_spans: 20,
            span_length_km: 100.0,
            launch_power_dbm: 0.0,
            amplifier: AmplifierParams::default(),
            step_km: 0.1,
        }
    }
}

impl LinkPlan {
    /// Amplifier gain exactly compensating the span loss.
    pub fn transparent_gain_db(fiber: &FiberParams, span_length_km: f64) -> f64 {
        fiber.attenuation_db_km * span_length_km
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.n_spans > 0 && !(self.span_length_km > 0.0) {
            v.push(format!(
                "span_length_km: must be > 0 when n_spans > 0, got {}",
                self.span_length_km
            ));
        }
        if !self.launch_power_dbm.is_finite() {
            v.push("launch_power_dbm: must be finite".into());
        }
        if self.n_spans > 0 && !(self.step_km > 0.0) {
            v.push(format!("step_km: must be > 0, got {}", self.step_km));
        }
        v
    }
}

/// Launch-power scaling followed by `n_spans` of fiber + amplifier. The input
/// is expected at unit average power per channel; the scalar launch gain sets
/// the per-channel power. `nonlinear_on = false` zeroes gamma (linear truth
/// model); `noise_on = false` keeps amplifier gain but adds no ASE.
pub fn propagate_link(
    w: &mut SampledWaveform,
    plan: &LinkPlan,
    fiber: &FiberParams,
    nonlinear_on: bool,
    noise_on: bool,
    rng: &mut ChaCha12Rng,
) -> Result<()> {
    let v = plan.violations();
    if !v.is_empty() {
        return Err(CoreError::InvalidConfig(v.join("; ")));
    }
    fiber.validate()?;
    let p_launch_w = 1e-3 * 10.0f64.powf(plan.launch_power_dbm / 10.0);
    w.scale(p_launch_w.sqrt());
    let eff_fiber = if nonlinear_on {
        fiber.clone()
    } else {
        FiberParams {
            gamma_w_km: 0.0,
            ..fiber.clone()
        }
    };
    // A linear span is a single diagonal operator; one step is exact then.
    let step = if nonlinear_on {
        plan.step_km.min(plan.span_length_km)
    } else {
        plan.span_length_km
    };
    for _ in 0..plan.n_spans {
        ssfm_propagate(w, &eff_fiber, plan.span_length_km, step, Direction::Forward)?;
        edfa_amplify(w, &plan.amplifier, fiber.wavelength_nm, noise_on, rng)?;
    }
    w.check_finite("propagate_link output")?;
    Ok(())
}

/// DAC/ADC impairment: per-quadrature clipping at
/// `rms * 10^(clipping_db/20)` followed by a mid-rise uniform quantizer with
/// `2^bits` levels across the clip range. The rms is computed per quadrature
/// over the waveform instance.
#[derive(Debug, Clone)]
pub struct ConverterParams {
    pub bits: u32,
    pub clipping_db: f64,
}

impl Default for ConverterParams {
    fn default() -> Self {
        Self {
            bits: 10,
            clipping_db: 13.0,
        }
    }
}

pub fn dac_adc_apply(w: &mut SampledWaveform, conv: &ConverterParams) -> Result<()> {
    if conv.bits == 0 || conv.bits > 48 {
        return Err(CoreError::InvalidConfig(format!(
            "converter bits: must be in 1..=48, got {}",
            conv.bits
        )));
    }
    if !conv.clipping_db.is_finite() {
        return Err(CoreError::InvalidConfig("clipping_db: must be finite".into()));
    }
    if w.is_empty() {
        return Err(CoreError::EmptyInput("dac_adc_apply"));
    }
    let mean_sq: f64 = w.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / (2.0 * w.len() as f64);
    let rms = mean_sq.sqrt();
    if rms <= 0.0 {
        return Ok(()); // silence stays silence
    }
    let a_clip = rms * 10.0f64.powf(conv.clipping_db / 20.0);
    let n_levels = 1u64 << conv.bits;
    let delta = 2.0 * a_clip / n_levels as f64;
    let top = a_clip - delta / 2.0;
    let q = |x: f64| -> f64 {
        let clipped = x.clamp(-a_clip, a_clip);
        let level = (clipped / delta).floor() * delta + delta / 2.0;
        level.clamp(-top, top)
    };
    for s in &mut w.samples {
        *s = Complex64::new(q(s.re), q(s.im));
    }
    Ok(())
}

/// Multiply the waveform by a Wiener phase process with increment variance
/// `2 pi linewidth / sample_rate` (combined transmitter + LO linewidth).
pub fn apply_phase_noise(
    w: &mut SampledWaveform,
    linewidth_hz: f64,
    rng: &mut ChaCha12Rng,
) -> Result<()> {
    if !(linewidth_hz >= 0.0) || !linewidth_hz.is_finite() {
        return Err(CoreError::InvalidConfig(format!(
            "linewidth_hz: must be >= 0 and finite, got {linewidth_hz}"
        )));
    }
    if linewidth_hz == 0.0 {
        return Ok(());
    }
    let sigma = (2.0 * std::f64::consts::PI * linewidth_hz / w.sample_rate).sqrt();
    let normal = Normal::new(0.0, sigma).expect("sigma finite");
    let mut theta = 0.0f64;
    for s in &mut w.samples {
        *s *= Complex64::from_polar(1.0, theta);
        theta += normal.sample(rng);
    }
    Ok(())
}

/// Snap a nominal shift to the FFT grid of an n-sample frame. Mux and demux
/// both snap, so they cancel exactly on the periodic frame; the snap error
/// is at most half a bin.
fn grid_snapped_offset(offset_hz: f64, n: usize, sample_rate: f64) -> f64 {
    let df = sample_rate / n as f64;
    (offset_hz / df).round() * df
}

/// Sum frequency-shifted channel fields into one aggregate waveform. All
/// inputs must share sample rate and length; each channel edge must stay
/// inside Nyquist. Shifts are snapped to the frame's FFT grid to keep the
/// periodic-frame model exact.
pub fn wdm_mux(channels: &[SampledWaveform], offsets_hz: &[f64], occupied_bw_hz: f64) -> Result<SampledWaveform> {
    if channels.is_empty() {
        return Err(CoreError::EmptyInput("wdm_mux"));
    }
    if channels.len() != offsets_hz.len() {
        return Err(CoreError::DimensionMismatch {
            context: "wdm_mux channels vs offsets",
            left: channels.len(),
            right: offsets_hz.len(),
        });
    }
    let rate = channels[0].sample_rate;
    let len = channels[0].len();
    let nyquist = rate / 2.0;
    for (i, ch) in channels.iter().enumerate() {
        if ch.sample_rate != rate {
            return Err(CoreError::InvalidConfig(format!(
                "wdm_mux: channel {i} sample rate {} differs from {}",
                ch.sample_rate, rate
            )));
        }
        if ch.len() != len {
            return Err(CoreError::DimensionMismatch {
                context: "wdm_mux channel length",
                left: ch.len(),
                right: len,
            });
        }
        let needed = offsets_hz[i].abs() + occupied_bw_hz / 2.0;
        if needed > nyquist {
            return Err(CoreError::Aliasing {
                offset_hz: offsets_hz[i],
                needed_hz: needed,
                nyquist_hz: nyquist,
            });
        }
    }
    let mut agg = vec![Complex64::new(0.0, 0.0); len];
    for (ch, &off) in channels.iter().zip(offsets_hz) {
        let mut shifted = ch.clone();
        frequency_shift(&mut shifted, grid_snapped_offset(off, len, rate));
        for (a, s) in agg.iter_mut().zip(&shifted.samples) {
            *a += s;
        }
    }
    Ok(SampledWaveform::new(agg, rate))
}

/// Select one channel: shift `offset_hz` to baseband, then apply an ideal
/// brick-wall filter of the given bandwidth (bins strictly outside
/// +-bandwidth/2 are zeroed). Output stays at the aggregate rate. The shift
/// snaps to the same FFT grid as `wdm_mux`, making demux-after-mux exact.
pub fn wdm_demux(agg: &SampledWaveform, offset_hz: f64, bandwidth_hz: f64) -> Result<SampledWaveform> {
    if agg.is_empty() {
        return Err(CoreError::EmptyInput("wdm_demux"));
    }
    if !(bandwidth_hz > 0.0) || !bandwidth_hz.is_finite() {
        return Err(CoreError::InvalidConfig(format!(
            "bandwidth_hz: must be > 0 and finite, got {bandwidth_hz}"
        )));
    }
    let mut out = agg.clone();
    frequency_shift(&mut out, -grid_snapped_offset(offset_hz, agg.len(), agg.sample_rate));
    let n = out.len();
    fft_forward(&mut out.samples);
    let df = out.sample_rate / n as f64;
    for (k, s) in out.samples.iter_mut().enumerate() {
        let f = if k < n.div_ceil(2) {
            k as f64 * df
        } else {
            (k as f64 - n as f64) * df
        };
        if f.abs() > bandwidth_hz / 2.0 {
            *s = Complex64::new(0.0, 0.0);
        }
    }
    fft_inverse(&mut out.samples);
    out.center_freq_offset = 0.0;
    Ok(out)
}
