//! Waveform trace files.
//!
//! Layout (all integers and floats little-endian):
//!   bytes 0..8   magic "COFDMTRC"
//!   bytes 8..10  format version, u16 (currently 1)
//!   bytes 10..18 sample_rate, f64, Hz
//!   bytes 18..26 sample count, u64
//!   then `count` pairs of f64: I then Q per sample.
//! Load is the bit-exact inverse of save.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use coofdm_core::waveform::SampledWaveform;

use crate::error::{HarnessError, Result};

const MAGIC: &[u8; 8] = b"COFDMTRC";
const VERSION: u16 = 1;

pub fn save_trace(w: &SampledWaveform, path: &Path) -> Result<()> {
    if w.is_empty() {
        return Err(HarnessError::Config("trace: empty waveform".into()));
    }
    let file = File::create(path).map_err(|e| HarnessError::io("trace create", e))?;
    let mut out = BufWriter::new(file);
    let mut write = |buf: &[u8]| out.write_all(buf).map_err(|e| HarnessError::io("trace write", e));
    write(MAGIC)?;
    write(&VERSION.to_le_bytes())?;
    write(&w.sample_rate.to_le_bytes())?;
    write(&(w.len() as u64).to_le_bytes())?;
    for s in &w.samples {
        write(&s.re.to_le_bytes())?;
        write(&s.im.to_le_bytes())?;
    }
    out.flush().map_err(|e| HarnessError::io("trace flush", e))
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            HarnessError::Io(format!("trace truncated while reading {what}"))
        } else {
            HarnessError::io("trace read", e)
        }
    })
}

pub fn load_trace(path: &Path) -> Result<SampledWaveform> {
    let file = File::open(path).map_err(|e| HarnessError::io("trace open", e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 8];
    read_exact(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(HarnessError::Io(format!(
            "trace: bad magic {:02x?}, not a waveform trace",
            magic
        )));
    }
    let mut u16b = [0u8; 2];
    read_exact(&mut r, &mut u16b, "version")?;
    let version = u16::from_le_bytes(u16b);
    if version != VERSION {
        return Err(HarnessError::Io(format!(
            "trace: unsupported version {version} (expected {VERSION})"
        )));
    }
    let mut f64b = [0u8; 8];
    read_exact(&mut r, &mut f64b, "sample_rate")?;
    let sample_rate = f64::from_le_bytes(f64b);
    if !(sample_rate > 0.0) || !sample_rate.is_finite() {
        return Err(HarnessError::Io(format!(
            "trace: invalid sample rate {sample_rate}"
        )));
    }
    read_exact(&mut r, &mut f64b, "sample count")?;
    let count = u64::from_le_bytes(f64b) as usize;

    let mut samples = Vec::with_capacity(count);
    for i in 0..count {
        let mut iq = [0u8; 16];
        read_exact(&mut r, &mut iq, "samples").map_err(|_| {
            HarnessError::Io(format!(
                "trace truncated: {i} of {count} samples present"
            ))
        })?;
        let re = f64::from_le_bytes(iq[..8].try_into().expect("8 bytes"));
        let im = f64::from_le_bytes(iq[8..].try_into().expect("8 bytes"));
        samples.push(Complex64::new(re, im));
    }
    // Trailing bytes mean the header lied about the length.
    let mut extra = [0u8; 1];
    if r.read(&mut extra).map_err(|e| HarnessError::io("trace read", e))? != 0 {
        return Err(HarnessError::Io(
            "trace: trailing bytes after declared sample count".into(),
        ));
    }
    Ok(SampledWaveform::new(samples, sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("coofdm-trace-test-{}-{name}", std::process::id()));
        p
    }

    fn sample_wave() -> SampledWaveform {
        let samples = (0..257)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        SampledWaveform::new(samples, 25e9)
    }

    #[test]
    fn round_trip_bit_exact() {
        let w = sample_wave();
        let path = tmp("roundtrip");
        save_trace(&w, &path).unwrap();
        let back = load_trace(&path).unwrap();
        assert_eq!(back.sample_rate.to_bits(), w.sample_rate.to_bits());
        assert_eq!(back.len(), w.len());
        for (a, b) in back.samples.iter().zip(&w.samples) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
        std::fs::remove_file(path).unwrap();
    }

    #[test]
    fn truncation_reported_precisely() {
        let w = sample_wave();
        let path = tmp("truncated");
        save_trace(&w, &path).unwrap();
        let full = std::fs::read(&path).unwrap();
        std::fs::write(&path, &full[..full.len() - 7]).unwrap();
        let err = load_trace(&path).unwrap_err();
        assert_eq!(err.category(), "io");
        assert!(format!("{err}").contains("truncated"), "{err}");
        std::fs::remove_file(path).unwrap();
    }

    #[test]
    fn bad_magic_and_version_rejected() {
        let path = tmp("magic");
        std::fs::write(&path, b"NOTATRACE_AT_ALL_____").unwrap();
        let err = load_trace(&path).unwrap_err();
        assert!(format!("{err}").contains("magic"), "{err}");

        let w = sample_wave();
        save_trace(&w, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[8] = 99; // version field
        std::fs::write(&path, &bytes).unwrap();
        let err = load_trace(&path).unwrap_err();
        assert!(format!("{err}").contains("version"), "{err}");
        std::fs::remove_file(path).unwrap();
    }
}
