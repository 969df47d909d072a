//! Binary save/load for trained equalizers.
//!
//! Layout (all little-endian):
//! magic "CNEQ", version u16, kind u8 (0 = per-carrier, 1..=4 = grouped
//! case), order u16, seed u64, n_subnets u32, then per subnet:
//! in_start u32, in_len u32, out_col u32, n_in u32, n_hidden u32,
//! n_out u32, n_params u64, params as f64 x n_params.

use std::io::{Read, Write};

use crate::equalizer::network::SubNetwork;
use crate::equalizer::{CaseId, NnEqualizer, NnKind};
use crate::error::{CoreError, Result};

const MAGIC: [u8; 4] = *b"CNEQ";
const VERSION: u16 = 1;

pub fn write_equalizer<W: Write>(eq: &NnEqualizer, mut out: W) -> Result<()> {
    out.write_all(&MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    let kind: u8 = match eq.kind {
        NnKind::PerCarrier => 0,
        NnKind::Grouped(case) => case as u8,
    };
    out.write_all(&[kind])?;
    out.write_all(&(eq.order as u16).to_le_bytes())?;
    out.write_all(&eq.seed.to_le_bytes())?;
    out.write_all(&(eq.subnets.len() as u32).to_le_bytes())?;
    for (net, (&(start, len), &out_col)) in eq
        .subnets
        .iter()
        .zip(eq.in_spans.iter().zip(&eq.out_cols))
    {
        out.write_all(&(start as u32).to_le_bytes())?;
        out.write_all(&(len as u32).to_le_bytes())?;
        out.write_all(&(out_col as u32).to_le_bytes())?;
        out.write_all(&(net.n_in as u32).to_le_bytes())?;
        out.write_all(&(net.n_hidden as u32).to_le_bytes())?;
        out.write_all(&(net.n_out as u32).to_le_bytes())?;
        out.write_all(&(net.params.len() as u64).to_le_bytes())?;
        for &p in &net.params {
            out.write_all(&p.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_equalizer<R: Read>(mut input: R) -> Result<NnEqualizer> {
    let magic = read_array::<4, _>(&mut input)?;
    if magic != MAGIC {
        return Err(CoreError::UnsupportedFormat(format!(
            "bad magic {magic:02x?}, expected {MAGIC:02x?}"
        )));
    }
    let version = u16::from_le_bytes(read_array::<2, _>(&mut input)?);
    if version != VERSION {
        return Err(CoreError::UnsupportedFormat(format!(
            "unsupported version {version}"
        )));
    }
    let kind_byte = read_array::<1, _>(&mut input)?[0];
    let kind = match kind_byte {
        0 => NnKind::PerCarrier,
        1 => NnKind::Grouped(CaseId::Case1),
        2 => NnKind::Grouped(CaseId::Case2),
        3 => NnKind::Grouped(CaseId::Case3),
        4 => NnKind::Grouped(CaseId::Case4),
        other => {
            return Err(CoreError::UnsupportedFormat(format!(
                "unknown equalizer kind {other}"
            )))
        }
    };
    let order = u16::from_le_bytes(read_array::<2, _>(&mut input)?) as usize;
    let seed = u64::from_le_bytes(read_array::<8, _>(&mut input)?);
    let n_subnets = u32::from_le_bytes(read_array::<4, _>(&mut input)?) as usize;
    if n_subnets == 0 || n_subnets > 1 << 20 {
        return Err(CoreError::UnsupportedFormat(format!(
            "implausible subnet count {n_subnets}"
        )));
    }
    let mut subnets = Vec::with_capacity(n_subnets);
    let mut in_spans = Vec::with_capacity(n_subnets);
    let mut out_cols = Vec::with_capacity(n_subnets);
    for _ in 0..n_subnets {
        let start = u32::from_le_bytes(read_array::<4, _>(&mut input)?) as usize;
        let len = u32::from_le_bytes(read_array::<4, _>(&mut input)?) as usize;
        let out_col = u32::from_le_bytes(read_array::<4, _>(&mut input)?) as usize;
        let n_in = u32::from_le_bytes(read_array::<4, _>(&mut input)?) as usize;
        let n_hidden = u32::from_le_bytes(read_array::<4, _>(&mut input)?) as usize;
        let n_out = u32::from_le_bytes(read_array::<4, _>(&mut input)?) as usize;
        let n_params = u64::from_le_bytes(read_array::<8, _>(&mut input)?) as usize;
        if n_params != SubNetwork::param_count(n_in, n_hidden, n_out) {
            return Err(CoreError::UnsupportedFormat(format!(
                "param count {n_params} does not match shape {n_in}x{n_hidden}x{n_out}"
            )));
        }
        let mut params = vec![0.0f64; n_params];
        for p in &mut params {
            *p = f64::from_le_bytes(read_array::<8, _>(&mut input)?);
        }
        subnets.push(SubNetwork {
            n_in,
            n_hidden,
            n_out,
            params,
        });
        in_spans.push((start, len));
        out_cols.push(out_col);
    }
    Ok(NnEqualizer {
        kind,
        order,
        seed,
        subnets,
        in_spans,
        out_cols,
    })
}

fn read_array<const N: usize, R: Read>(input: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    let mut got = 0usize;
    while got < N {
        let n = input.read(&mut buf[got..])?;
        if n == 0 {
            return Err(CoreError::Truncated {
                expected: N,
                got,
            });
        }
        got += n;
    }
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn roundtrip_preserves_everything() {
        let eq = NnEqualizer::grouped(CaseId::Case4, 210, 4, 99).unwrap();
        let mut buf = Vec::new();
        write_equalizer(&eq, &mut buf).unwrap();
        let back = read_equalizer(buf.as_slice()).unwrap();
        assert_eq!(back.kind, eq.kind);
        assert_eq!(back.order, eq.order);
        assert_eq!(back.seed, eq.seed);
        assert_eq!(back.in_spans, eq.in_spans);
        assert_eq!(back.out_cols, eq.out_cols);
        assert_eq!(back.subnets.len(), eq.subnets.len());
        for (a, b) in back.subnets.iter().zip(&eq.subnets) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn truncated_stream_is_reported() {
        let eq = NnEqualizer::per_carrier(4, 4, 1).unwrap();
        let mut buf = Vec::new();
        write_equalizer(&eq, &mut buf).unwrap();
        let err = read_equalizer(&buf[..buf.len() - 3]);
        assert!(matches!(err, Err(CoreError::Truncated { .. })), "{err:?}");
    }

    #[test]
    fn bad_magic_rejected() {
        let err = read_equalizer(&b"XXXX$more-bytes-here"[..]);
        assert!(matches!(err, Err(CoreError::UnsupportedFormat(_))));
    }
}
