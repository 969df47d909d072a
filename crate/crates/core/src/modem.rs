//! OFDM modem: frame construction, modulation, demodulation, static
//! chromatic-dispersion compensation and pilot-aided channel estimation.
//!
//! Frame layout on the time axis: `n_preamble_symbols` known full-band OFDM
//! symbols, then `n_payload` payload symbols. Each OFDM symbol is a cyclic
//! prefix (the tail of the body, `floor(cp_fraction * ifft_size)` samples)
//! followed by the `ifft_size`-sample body.
//!
//! Frequency layout: `n_active = n_data + n_pilots` subcarriers sit on the
//! bins closest to DC, symmetrically, with DC itself unused. Pilots occupy
//! the centers of `n_pilots` equal chunks of the active band; the remaining
//! active bins carry data. Ordering everywhere is ascending frequency
//! (most negative bin first), so "middle subcarriers" means around DC.
//!
//! Scaling: with `X` the subcarrier symbols of one OFDM symbol, the body is
//! `idft(X) / sqrt(n_active)` (unnormalized inverse DFT), which makes the
//! average transmit power exactly 1 for unit-power constellations, and
//! `sum_n |body[n]|^2 = ifft_size / n_active * sum_k |X[k]|^2` (tested).

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::constellation::Constellation;
use crate::error::{CoreError, Result};
use crate::fiber::FiberParams;
use crate::prbs::Prbs19;
use crate::waveform::{angular_freqs, fft_forward, fft_inverse, SampledWaveform};

/// Fixed internal seeds for the known preamble and pilot symbol sequences.
/// These are part of the frame definition: transmitter and receiver both
/// regenerate them, so they never travel out of band.
const PREAMBLE_SEED: u64 = 0x5EED_0FD3;
const PILOT_SEED: u64 = 0x5EED_9170;

/// Static modem parameters.
#[derive(Debug, Clone)]
pub struct OfdmConfig {
    pub ifft_size: usize,
    pub n_data_subcarriers: usize,
    /// Cyclic prefix length as a fraction of the IFFT size; the sample count
    /// is floor(cp_fraction * ifft_size).
    pub cp_fraction: f64,
    /// Modem (1 sample per bin) rate in samples/s.
    pub sample_rate: f64,
    /// One pilot per this many data subcarriers, rounded up.
    pub pilot_spacing: usize,
    pub n_preamble_symbols: usize,
    pub constellation: Constellation,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            ifft_size: 512,
            n_data_subcarriers: 210,
            cp_fraction: 0.02,
            sample_rate: 25e9,
            pilot_spacing: 27,
            n_preamble_symbols: 2,
            constellation: Constellation::Qam16,
        }
    }
}

impl OfdmConfig {
    pub fn cp_samples(&self) -> usize {
        (self.cp_fraction * self.ifft_size as f64).floor() as usize
    }

    /// Samples per OFDM symbol including the cyclic prefix.
    pub fn symbol_samples(&self) -> usize {
        self.ifft_size + self.cp_samples()
    }

    pub fn n_pilots(&self) -> usize {
        self.n_data_subcarriers.div_ceil(self.pilot_spacing)
    }

    pub fn n_active(&self) -> usize {
        self.n_data_subcarriers + self.n_pilots()
    }

    /// Collect every constraint violation, named by field.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.ifft_size < 8 || !self.ifft_size.is_power_of_two() {
            v.push(format!("ifft_size: must be a power of two >= 8, got {}", self.ifft_size));
        }
        if self.n_data_subcarriers == 0 {
            v.push("n_data_subcarriers: must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.cp_fraction) {
            v.push(format!("cp_fraction: must be in [0, 1), got {}", self.cp_fraction));
        }
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            v.push(format!("sample_rate: must be positive and finite, got {}", self.sample_rate));
        }
        if self.pilot_spacing == 0 {
            v.push("pilot_spacing: must be >= 1".into());
        }
        if self.n_preamble_symbols == 0 {
            v.push("n_preamble_symbols: must be >= 1 (channel estimation needs a reference)".into());
        }
        if self.n_data_subcarriers != 0 && self.pilot_spacing != 0 {
            let n_act = self.n_active();
            // DC stays empty and the Nyquist bin stays empty, so each side
            // can hold at most ifft_size/2 - 1 subcarriers.
            let half_hi = n_act - n_act / 2;
            if half_hi > self.ifft_size / 2 - 1 {
                v.push(format!(
                    "n_data_subcarriers: {} active subcarriers (data + {} pilots) do not fit \
                     in {} bins with DC and Nyquist unused",
                    n_act,
                    self.n_pilots(),
                    self.ifft_size
                ));
            }
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

    /// Occupied optical bandwidth of the active band, Hz.
    pub fn occupied_bandwidth(&self) -> f64 {
        (self.n_active() + 1) as f64 * self.sample_rate / self.ifft_size as f64
    }
}

/// Frequency plan: which FFT bin each subcarrier occupies.
#[derive(Debug, Clone)]
pub struct SubcarrierPlan {
    /// FFT bin per data subcarrier, ascending frequency.
    pub data_bins: Vec<usize>,
    /// FFT bin per pilot, ascending frequency.
    pub pilot_bins: Vec<usize>,
    /// FFT bin per active subcarrier (data and pilots merged), ascending.
    pub active_bins: Vec<usize>,
    /// Positions of the pilots within `active_bins`.
    pub pilot_slots: Vec<usize>,
    /// Positions of the data subcarriers within `active_bins`.
    pub data_slots: Vec<usize>,
}

/// Build the subcarrier plan for a validated config.
pub fn subcarrier_plan(cfg: &OfdmConfig) -> Result<SubcarrierPlan> {
    cfg.validate()?;
    let n = cfg.ifft_size;
    let n_act = cfg.n_active();
    let half_lo = n_act / 2;
    let half_hi = n_act - half_lo;
    // Signed frequency offsets, ascending, DC excluded.
    let offsets = (-(half_lo as isize)..=-1).chain(1..=half_hi as isize);
    let active_bins: Vec<usize> = offsets
        .map(|off| ((n as isize + off) % n as isize) as usize)
        .collect();

    let n_pilots = cfg.n_pilots();
    let pilot_slots: Vec<usize> = (0..n_pilots)
        .map(|i| (2 * i + 1) * n_act / (2 * n_pilots))
        .collect();
    let mut is_pilot = vec![false; n_act];
    for &s in &pilot_slots {
        is_pilot[s] = true;
    }
    let data_slots: Vec<usize> = (0..n_act).filter(|&s| !is_pilot[s]).collect();
    Ok(SubcarrierPlan {
        data_bins: data_slots.iter().map(|&s| active_bins[s]).collect(),
        pilot_bins: pilot_slots.iter().map(|&s| active_bins[s]).collect(),
        active_bins,
        pilot_slots,
        data_slots,
    })
}

/// A transmit frame: payload data plus the known preamble/pilot overlay.
#[derive(Debug, Clone)]
pub struct OfdmFrame {
    /// Transmitted payload bits, row-major `[symbol][subcarrier][bit]`.
    pub payload_bits: Vec<u8>,
    /// Payload constellation symbols, `n_payload x n_data`.
    pub payload_symbols: Array2<Complex64>,
    /// Known pilot symbols, `n_payload x n_pilots`.
    pub pilot_symbols: Array2<Complex64>,
    /// Known preamble symbols on every active subcarrier, `n_preamble x n_active`.
    pub preamble_symbols: Array2<Complex64>,
}

impl OfdmFrame {
    pub fn n_payload(&self) -> usize {
        self.payload_symbols.nrows()
    }
}

fn known_qpsk(rng: &mut ChaCha12Rng) -> Complex64 {
    let pts = Constellation::Qpsk.points();
    pts[rng.gen_range(0..4usize)]
}

/// Build a frame: payload bits pulled from the given PRBS, preamble and
/// pilots regenerated from fixed internal seeds.
pub fn build_frame(cfg: &OfdmConfig, n_payload: usize, bits: &mut Prbs19) -> Result<OfdmFrame> {
    cfg.validate()?;
    if n_payload == 0 {
        return Err(CoreError::InvalidConfig("n_payload: must be >= 1".into()));
    }
    let n_data = cfg.n_data_subcarriers;
    let bps = cfg.constellation.bits_per_symbol();
    let payload_bits = bits.take_bits(n_payload * n_data * bps);
    let syms = cfg.constellation.map(&payload_bits)?;
    let payload_symbols = Array2::from_shape_vec((n_payload, n_data), syms)
        .expect("payload symbol count matches shape");

    let mut prng = ChaCha12Rng::seed_from_u64(PILOT_SEED);
    let pilot_symbols =
        Array2::from_shape_fn((n_payload, cfg.n_pilots()), |_| known_qpsk(&mut prng));

    let mut arng = ChaCha12Rng::seed_from_u64(PREAMBLE_SEED);
    let preamble_symbols =
        Array2::from_shape_fn((cfg.n_preamble_symbols, cfg.n_active()), |_| known_qpsk(&mut arng));

    Ok(OfdmFrame {
        payload_bits,
        payload_symbols,
        pilot_symbols,
        preamble_symbols,
    })
}

/// Modulate a frame to the 1-sample-per-bin baseband waveform at
/// `cfg.sample_rate`, unit average power before any launch scaling.
pub fn ofdm_modulate(frame: &OfdmFrame, cfg: &OfdmConfig) -> Result<SampledWaveform> {
    let plan = subcarrier_plan(cfg)?;
    let n = cfg.ifft_size;
    let cp = cfg.cp_samples();
    let n_sym = cfg.n_preamble_symbols + frame.n_payload();
    let scale = 1.0 / (cfg.n_active() as f64).sqrt();

    if frame.payload_symbols.ncols() != cfg.n_data_subcarriers {
        return Err(CoreError::DimensionMismatch {
            context: "ofdm_modulate payload columns",
            left: frame.payload_symbols.ncols(),
            right: cfg.n_data_subcarriers,
        });
    }

    let mut out = Vec::with_capacity(n_sym * cfg.symbol_samples());
    let mut freq = vec![Complex64::new(0.0, 0.0); n];
    for t in 0..n_sym {
        for f in freq.iter_mut() {
            *f = Complex64::new(0.0, 0.0);
        }
        if t < cfg.n_preamble_symbols {
            for (slot, &bin) in plan.active_bins.iter().enumerate() {
                freq[bin] = frame.preamble_symbols[(t, slot)];
            }
        } else {
            let row = t - cfg.n_preamble_symbols;
            for (k, &bin) in plan.data_bins.iter().enumerate() {
                freq[bin] = frame.payload_symbols[(row, k)];
            }
            for (p, &bin) in plan.pilot_bins.iter().enumerate() {
                freq[bin] = frame.pilot_symbols[(row, p)];
            }
        }
        fft_inverse(&mut freq);
        // fft_inverse includes 1/N; undo it and apply the documented scale.
        let g = n as f64 * scale;
        let body: Vec<Complex64> = freq.iter().map(|&x| x * g).collect();
        out.extend_from_slice(&body[n - cp..]);
        out.extend_from_slice(&body);
        // Restore freq buffer for reuse (it now holds time samples).
    }
    Ok(SampledWaveform::new(out, cfg.sample_rate))
}

/// Received frame, split back into the frequency-domain parts.
#[derive(Debug, Clone)]
pub struct RxFrame {
    /// Raw (unequalized) payload subcarrier symbols, `n_payload x n_data`.
    pub payload: Array2<Complex64>,
    /// Received pilot subcarriers, `n_payload x n_pilots`.
    pub pilots: Array2<Complex64>,
    /// Received preamble, `n_preamble x n_active`.
    pub preamble: Array2<Complex64>,
}

/// Demodulate a waveform back to subcarrier symbols. The waveform must hold a
/// whole number of OFDM symbols at the modem rate; trailing padding beyond the
/// frame is tolerated and ignored when `n_payload` is given explicitly.
///
/// The FFT window starts half a prefix early (`cp/2` samples into the CP) and
/// the known per-bin phase ramp is removed afterwards. Anomalous dispersion
/// spreads group delays to both signs across the band, so centering the
/// window splits the CP margin symmetrically instead of tolerating only
/// positive delays.
pub fn ofdm_demodulate(
    w: &SampledWaveform,
    cfg: &OfdmConfig,
    n_payload: usize,
) -> Result<RxFrame> {
    let plan = subcarrier_plan(cfg)?;
    let n = cfg.ifft_size;
    let cp = cfg.cp_samples();
    let sym = cfg.symbol_samples();
    let n_sym = cfg.n_preamble_symbols + n_payload;
    if w.len() < n_sym * sym {
        return Err(CoreError::BadLength {
            context: "ofdm_demodulate",
            len: w.len(),
            quantum: n_sym * sym,
        });
    }
    let scale = (cfg.n_active() as f64).sqrt() / n as f64;
    let early = cp / 2;
    // Window taken `early` samples before the body start adds a delay of
    // `early` to every bin; undo it with the matching ramp.
    let ramp: Vec<Complex64> = (0..n)
        .map(|k| {
            Complex64::from_polar(
                1.0,
                2.0 * std::f64::consts::PI * k as f64 * early as f64 / n as f64,
            )
        })
        .collect();

    let mut payload = Array2::zeros((n_payload, cfg.n_data_subcarriers));
    let mut pilots = Array2::zeros((n_payload, cfg.n_pilots()));
    let mut preamble = Array2::zeros((cfg.n_preamble_symbols, cfg.n_active()));
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for t in 0..n_sym {
        let start = t * sym + cp - early;
        buf.copy_from_slice(&w.samples[start..start + n]);
        fft_forward(&mut buf);
        if t < cfg.n_preamble_symbols {
            for (slot, &bin) in plan.active_bins.iter().enumerate() {
                preamble[(t, slot)] = buf[bin] * ramp[bin] * scale;
            }
        } else {
            let row = t - cfg.n_preamble_symbols;
            for (k, &bin) in plan.data_bins.iter().enumerate() {
                payload[(row, k)] = buf[bin] * ramp[bin] * scale;
            }
            for (p, &bin) in plan.pilot_bins.iter().enumerate() {
                pilots[(row, p)] = buf[bin] * ramp[bin] * scale;
            }
        }
    }
    Ok(RxFrame {
        payload,
        pilots,
        preamble,
    })
}

/// Frequency-domain compensation of the accumulated linear fiber phase over
/// `length_km`: the exact inverse of lossless linear propagation (both the
/// beta2 and beta3 terms derived from D and S).
pub fn cd_compensate(w: &SampledWaveform, fiber: &FiberParams, length_km: f64) -> Result<SampledWaveform> {
    if length_km < 0.0 || !length_km.is_finite() {
        return Err(CoreError::InvalidConfig(format!(
            "length_km: must be >= 0 and finite, got {length_km}"
        )));
    }
    if w.is_empty() {
        return Err(CoreError::EmptyInput("cd_compensate"));
    }
    let mut spec = w.samples.clone();
    fft_forward(&mut spec);
    let b2 = fiber.beta2_s2_m();
    let b3 = fiber.beta3_s3_m();
    let l_m = length_km * 1e3;
    for (s, om) in spec.iter_mut().zip(angular_freqs(w.len(), w.sample_rate)) {
        // Forward linear propagation applies +(b2/2)w^2 - (b3/6)w^3 per meter.
        let phase = -(b2 / 2.0 * om * om - b3 / 6.0 * om * om * om) * l_m;
        *s *= Complex64::from_polar(1.0, phase);
    }
    fft_inverse(&mut spec);
    Ok(SampledWaveform {
        samples: spec,
        sample_rate: w.sample_rate,
        center_freq_offset: w.center_freq_offset,
    })
}

/// One-tap channel estimate plus common-phase track.
#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    /// Complex gain per data subcarrier (ascending frequency).
    pub taps_data: Vec<Complex64>,
    /// Complex gain per pilot subcarrier.
    pub taps_pilot: Vec<Complex64>,
    /// Common phase error per payload symbol, radians.
    pub cpe: Vec<f64>,
}

/// Estimate per-subcarrier gains from the preamble and per-symbol common
/// phase from the pilots.
pub fn estimate_channel(rx: &RxFrame, frame: &OfdmFrame, cfg: &OfdmConfig) -> Result<ChannelEstimate> {
    let plan = subcarrier_plan(cfg)?;
    let n_pre = cfg.n_preamble_symbols;
    if rx.preamble.nrows() != n_pre || frame.preamble_symbols.nrows() != n_pre {
        return Err(CoreError::DimensionMismatch {
            context: "estimate_channel preamble rows",
            left: rx.preamble.nrows(),
            right: n_pre,
        });
    }
    let n_act = cfg.n_active();
    let mut taps_active = vec![Complex64::new(0.0, 0.0); n_act];
    for slot in 0..n_act {
        let mut acc = Complex64::new(0.0, 0.0);
        for t in 0..n_pre {
            let tx = frame.preamble_symbols[(t, slot)];
            if tx.norm_sqr() < 1e-30 {
                return Err(CoreError::ZeroReference(slot));
            }
            acc += rx.preamble[(t, slot)] / tx;
        }
        taps_active[slot] = acc / n_pre as f64;
    }
    let taps_data: Vec<Complex64> = plan.data_slots.iter().map(|&s| taps_active[s]).collect();
    let taps_pilot: Vec<Complex64> = plan.pilot_slots.iter().map(|&s| taps_active[s]).collect();

    let n_payload = rx.pilots.nrows();
    let mut cpe = Vec::with_capacity(n_payload);
    for t in 0..n_payload {
        let mut acc = Complex64::new(0.0, 0.0);
        for (p, &tap) in taps_pilot.iter().enumerate() {
            let reference = tap * frame.pilot_symbols[(t, p)];
            if reference.norm_sqr() < 1e-30 {
                return Err(CoreError::ZeroReference(plan.pilot_slots[p]));
            }
            acc += rx.pilots[(t, p)] * reference.conj();
        }
        cpe.push(acc.arg());
    }
    Ok(ChannelEstimate {
        taps_data,
        taps_pilot,
        cpe,
    })
}
