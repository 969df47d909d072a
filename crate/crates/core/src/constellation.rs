//! Gray-coded QPSK and 16-QAM constellations, unit average power.
//!
//! Bit conventions (documented here once, tested below):
//!
//! * QPSK, 2 bits `[b0 b1]`: `b0` selects the real sign, `b1` the imaginary
//!   sign, with bit 0 mapping to +. So `00 -> (1+i)/sqrt(2)`,
//!   `01 -> (1-i)/sqrt(2)`, `10 -> (-1+i)/sqrt(2)`, `11 -> (-1-i)/sqrt(2)`.
//! * 16-QAM, 4 bits `[b0 b1 b2 b3]`: `[b0 b1]` selects the in-phase level,
//!   `[b2 b3]` the quadrature level, through the Gray ramp
//!   `00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3`, scaled by 1/sqrt(10).
//!
//! Both labelings are Gray: nearest-neighbour points differ in exactly one
//! bit. Average constellation power is exactly 1 (per point for QPSK, over
//! the 16 points for 16-QAM).

use num_complex::Complex64;
use std::sync::OnceLock;

use crate::error::{CoreError, Result};

/// Modulation format of the data subcarriers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constellation {
    Qpsk,
    Qam16,
}

impl Constellation {
    /// Number of constellation points M.
    pub fn order(self) -> usize {
        match self {
            Constellation::Qpsk => 4,
            Constellation::Qam16 => 16,
        }
    }

    pub fn from_order(order: usize) -> Result<Self> {
        match order {
            4 => Ok(Constellation::Qpsk),
            16 => Ok(Constellation::Qam16),
            other => Err(CoreError::UnsupportedFormat(format!(
                "no constellation of order {other} (supported: 4, 16)"
            ))),
        }
    }

    /// Bits carried per symbol, log2(M).
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Constellation::Qpsk => 2,
            Constellation::Qam16 => 4,
        }
    }

    /// Constellation points indexed by the integer formed from the bit label,
    /// most significant bit first.
    pub fn points(self) -> &'static [Complex64] {
        match self {
            Constellation::Qpsk => {
                static P: OnceLock<Vec<Complex64>> = OnceLock::new();
                P.get_or_init(|| build_points(Constellation::Qpsk))
            }
            Constellation::Qam16 => {
                static P: OnceLock<Vec<Complex64>> = OnceLock::new();
                P.get_or_init(|| build_points(Constellation::Qam16))
            }
        }
    }

    /// Map one label's bits (length log2 M) to its point.
    pub fn map_symbol(self, bits: &[u8]) -> Complex64 {
        debug_assert_eq!(bits.len(), self.bits_per_symbol());
        let mut idx = 0usize;
        for &b in bits {
            idx = (idx << 1) | (b as usize & 1);
        }
        self.points()[idx]
    }

    /// Map a bit stream to symbols. The stream length must be a multiple of
    /// bits_per_symbol and every element must be 0 or 1.
    pub fn map(self, bits: &[u8]) -> Result<Vec<Complex64>> {
        let bps = self.bits_per_symbol();
        if bits.len() % bps != 0 {
            return Err(CoreError::BadLength {
                context: "constellation map",
                len: bits.len(),
                quantum: bps,
            });
        }
        for (i, &b) in bits.iter().enumerate() {
            if b > 1 {
                return Err(CoreError::NotABit { index: i, value: b });
            }
        }
        Ok(bits.chunks_exact(bps).map(|c| self.map_symbol(c)).collect())
    }

    /// Index of the nearest constellation point (minimum Euclidean distance,
    /// ties resolved toward the lowest index).
    pub fn demap_index(self, s: Complex64) -> usize {
        let pts = self.points();
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, p) in pts.iter().enumerate() {
            let d = (s - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Hard-decision bits for one received symbol.
    pub fn demap_symbol(self, s: Complex64, out: &mut Vec<u8>) {
        let idx = self.demap_index(s);
        let bps = self.bits_per_symbol();
        for k in (0..bps).rev() {
            out.push(((idx >> k) & 1) as u8);
        }
    }

    /// Hard-decision demap of a symbol slice to a bit stream.
    pub fn demap(self, syms: &[Complex64]) -> Vec<u8> {
        let mut out = Vec::with_capacity(syms.len() * self.bits_per_symbol());
        for &s in syms {
            self.demap_symbol(s, &mut out);
        }
        out
    }
}

/// Gray ramp for one 2-bit axis label: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3.
fn gray_level(two_bits: usize) -> f64 {
    match two_bits {
        0b00 => -3.0,
        0b01 => -1.0,
        0b11 => 1.0,
        0b10 => 3.0,
        _ => unreachable!(),
    }
}

fn build_points(c: Constellation) -> Vec<Complex64> {
    match c {
        Constellation::Qpsk => {
            let a = std::f64::consts::FRAC_1_SQRT_2;
            (0..4)
                .map(|idx| {
                    let re = if idx & 0b10 == 0 { a } else { -a };
                    let im = if idx & 0b01 == 0 { a } else { -a };
                    Complex64::new(re, im)
                })
                .collect()
        }
        Constellation::Qam16 => {
            let scale = 1.0 / 10.0_f64.sqrt();
            (0..16)
                .map(|idx| {
                    let re = gray_level((idx >> 2) & 0b11) * scale;
                    let im = gray_level(idx & 0b11) * scale;
                    Complex64::new(re, im)
                })
                .collect()
        }
    }
}
