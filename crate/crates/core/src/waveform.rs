//! Complex baseband waveforms and spectral utilities.
//!
//! Conventions used throughout the crate:
//!
//! * A sample's squared magnitude is instantaneous power in watts.
//! * `fft_forward` is the unnormalized DFT `X[k] = sum_n x[n] e^{-i 2 pi k n / N}`;
//!   `fft_inverse` applies the matching 1/N factor, so the pair round-trips.
//! * Bin k of an N-point spectrum sits at frequency `k/N * fs` for k < N/2 and
//!   `(k-N)/N * fs` above; [`angular_freqs`] returns that grid as rad/s.
//! * Integer-factor resampling is done by spectral zero-padding/truncation,
//!   which preserves tone amplitudes and in-band content exactly.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;

use crate::error::{CoreError, Result};

/// Uniformly sampled complex baseband waveform.
#[derive(Debug, Clone)]
pub struct SampledWaveform {
    pub samples: Vec<Complex64>,
    /// Samples per second.
    pub sample_rate: f64,
    /// Nominal offset of this waveform's carrier from the aggregate band
    /// center, in Hz. Purely informational; 0 for baseband signals.
    pub center_freq_offset: f64,
}

impl SampledWaveform {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Self {
        Self {
            samples,
            sample_rate,
            center_freq_offset: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of |x|^2 over all samples, in watts.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    /// Sum of |x|^2 (sample energy, not time-integrated).
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    /// Multiply every sample by a real gain.
    pub fn scale(&mut self, g: f64) {
        for s in &mut self.samples {
            *s *= g;
        }
    }

    /// Error if any sample is NaN or infinite.
    pub fn check_finite(&self, context: &'static str) -> Result<()> {
        for s in &self.samples {
            if !s.re.is_finite() || !s.im.is_finite() {
                return Err(CoreError::NonFinite(context));
            }
        }
        Ok(())
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place unnormalized forward DFT.
pub fn fft_forward(buf: &mut [Complex64]) {
    if buf.len() < 2 {
        return;
    }
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_forward(buf.len());
        fft.process(buf);
    });
}

/// In-place inverse DFT, scaled by 1/N so that `fft_inverse(fft_forward(x)) == x`.
pub fn fft_inverse(buf: &mut [Complex64]) {
    let n = buf.len();
    if n < 2 {
        return;
    }
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_inverse(n);
        fft.process(buf);
    });
    let inv = 1.0 / n as f64;
    for s in buf.iter_mut() {
        *s *= inv;
    }
}

/// FFT-ordered angular frequency grid in rad/s for an n-point transform.
pub fn angular_freqs(n: usize, sample_rate: f64) -> Vec<f64> {
    let df = sample_rate / n as f64;
    (0..n)
        .map(|k| {
            let kf = if k < n.div_ceil(2) {
                k as f64
            } else {
                k as f64 - n as f64
            };
            2.0 * std::f64::consts::PI * kf * df
        })
        .collect()
}

/// Upsample by an integer factor via spectral zero-padding. Tone amplitudes
/// and total energy density are preserved; the output rate is `factor *`
/// the input rate.
pub fn upsample_fft(w: &SampledWaveform, factor: usize) -> Result<SampledWaveform> {
    if factor == 0 {
        return Err(CoreError::InvalidConfig("upsample factor must be >= 1".into()));
    }
    if factor == 1 {
        return Ok(w.clone());
    }
    if w.samples.is_empty() {
        return Err(CoreError::EmptyInput("upsample_fft"));
    }
    let n = w.len();
    let m = n * factor;
    let mut spec = w.samples.clone();
    fft_forward(&mut spec);
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    let half = n / 2;
    // Low half (DC..Nyquist inclusive) stays put; the strictly negative bins
    // move to the top of the longer spectrum. The source Nyquist bin keeps its
    // positive-side slot, exact for signals with no energy there (our
    // subcarrier plans always leave it empty).
    out[..=half.min(n - 1)].copy_from_slice(&spec[..=half.min(n - 1)]);
    if n > half + 1 {
        out[m - (n - half - 1)..].copy_from_slice(&spec[half + 1..]);
    }
    let gain = 1.0 / n as f64; // manual inverse normalization, amplitude-preserving
    fft_inverse_unnormalized(&mut out);
    for s in &mut out {
        *s *= gain;
    }
    Ok(SampledWaveform {
        samples: out,
        sample_rate: w.sample_rate * factor as f64,
        center_freq_offset: w.center_freq_offset,
    })
}

/// Downsample by an integer factor via spectral truncation (ideal brick-wall
/// anti-alias). The input length must be divisible by the factor.
pub fn downsample_fft(w: &SampledWaveform, factor: usize) -> Result<SampledWaveform> {
    if factor == 0 {
        return Err(CoreError::InvalidConfig("downsample factor must be >= 1".into()));
    }
    if factor == 1 {
        return Ok(w.clone());
    }
    let m = w.len();
    if m == 0 {
        return Err(CoreError::EmptyInput("downsample_fft"));
    }
    if m % factor != 0 {
        return Err(CoreError::BadLength {
            context: "downsample_fft",
            len: m,
            quantum: factor,
        });
    }
    let n = m / factor;
    let mut spec = w.samples.clone();
    fft_forward(&mut spec);
    let half = n / 2;
    let mut kept = vec![Complex64::new(0.0, 0.0); n];
    kept[..=half.min(n - 1)].copy_from_slice(&spec[..=half.min(n - 1)]);
    if n > half + 1 {
        kept[half + 1..].copy_from_slice(&spec[m - (n - half - 1)..]);
    }
    let gain = 1.0 / m as f64;
    fft_inverse_unnormalized(&mut kept);
    for s in &mut kept {
        *s *= gain;
    }
    Ok(SampledWaveform {
        samples: kept,
        sample_rate: w.sample_rate / factor as f64,
        center_freq_offset: w.center_freq_offset,
    })
}

fn fft_inverse_unnormalized(buf: &mut [Complex64]) {
    if buf.len() < 2 {
        return;
    }
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_inverse(buf.len());
        fft.process(buf);
    });
}

/// Multiply by exp(+i 2 pi f t): shifts spectral content up by `offset_hz`.
pub fn frequency_shift(w: &mut SampledWaveform, offset_hz: f64) {
    let step = 2.0 * std::f64::consts::PI * offset_hz / w.sample_rate;
    // Incremental rotation: one complex multiply per sample, with periodic
    // renormalization to stop drift over long records.
    let rot = Complex64::from_polar(1.0, step);
    let mut phase = Complex64::new(1.0, 0.0);
    for (i, s) in w.samples.iter_mut().enumerate() {
        *s *= phase;
        phase *= rot;
        if i % 4096 == 4095 {
            phase /= phase.norm();
        }
    }
    w.center_freq_offset += offset_hz;
}

/// Next length >= n whose prime factors are all <= 7 (fast FFT sizes).
pub fn next_fast_len(n: usize) -> usize {
    fn is_smooth(mut v: usize) -> bool {
        for p in [2usize, 3, 5, 7] {
            while v % p == 0 {
                v /= p;
            }
        }
        v == 1
    }
    let mut m = n.max(1);
    while !is_smooth(m) {
        m += 1;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(n: usize, fs: f64, f: f64, amp: f64) -> SampledWaveform {
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                Complex64::from_polar(amp, 2.0 * std::f64::consts::PI * f * t)
            })
            .collect();
        SampledWaveform::new(samples, fs)
    }

    #[test]
    fn fft_round_trip() {
        let w = tone(1000, 1e6, 12_000.0, 0.7);
        let mut buf = w.samples.clone();
        fft_forward(&mut buf);
        fft_inverse(&mut buf);
        for (a, b) in buf.iter().zip(&w.samples) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn angular_freqs_layout() {
        let f = angular_freqs(8, 8.0);
        let hz: Vec<f64> = f.iter().map(|w| w / (2.0 * std::f64::consts::PI)).collect();
        assert_eq!(hz, vec![0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]);
    }

    #[test]
    fn upsample_preserves_tone() {
        // Bin-aligned tone so there is no leakage to argue about.
        let n = 256;
        let fs = 1e3;
        let w = tone(n, fs, 5.0 * fs / n as f64, 1.3);
        let up = upsample_fft(&w, 4).unwrap();
        assert_eq!(up.len(), 4 * n);
        assert_eq!(up.sample_rate, 4.0 * fs);
        // Original samples appear at every 4th output position.
        for i in 0..n {
            assert!((up.samples[4 * i] - w.samples[i]).norm() < 1e-10);
        }
        assert!((up.mean_power() - w.mean_power()).abs() < 1e-10);
    }

    #[test]
    fn down_up_round_trip() {
        let n = 512;
        let fs = 1e3;
        // Band-limited content only: two tones well inside fs/8.
        let mut w = tone(n, fs, 3.0 * fs / n as f64, 1.0);
        let t2 = tone(n, fs, -7.0 * fs / n as f64, 0.4);
        for (a, b) in w.samples.iter_mut().zip(&t2.samples) {
            *a += b;
        }
        let up = upsample_fft(&w, 4).unwrap();
        let back = downsample_fft(&up, 4).unwrap();
        for (a, b) in back.samples.iter().zip(&w.samples) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn frequency_shift_moves_bin() {
        let n = 1024;
        let fs = 1e6;
        let mut w = tone(n, fs, 0.0, 1.0);
        let df = fs / n as f64;
        frequency_shift(&mut w, 10.0 * df);
        let mut spec = w.samples.clone();
        fft_forward(&mut spec);
        let peak = spec
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak, 10);
        // Phase-increment rotation stays on the unit circle.
        assert!((w.mean_power() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn next_fast_len_basics() {
        assert_eq!(next_fast_len(1), 1);
        assert_eq!(next_fast_len(131_022), 131_072);
        assert_eq!(next_fast_len(97), 98); // 2*7^2
        assert_eq!(next_fast_len(128), 128);
    }

    #[test]
    fn downsample_rejects_bad_length() {
        let w = tone(100, 1e3, 0.0, 1.0);
        assert!(downsample_fft(&w, 3).is_err());
    }
}
