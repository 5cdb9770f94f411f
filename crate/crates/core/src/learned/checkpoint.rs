//! DAF1 checkpoint container.
//!
//! Little-endian: `b"DAF1"`, `u32 version`, then one record per tensor:
//! `u32 name_len`, name bytes (UTF-8), `u32 rank`, `rank × u32 dims`,
//! `f64` payload. Every regressor tensor must appear exactly once.

use std::fs;
use std::path::Path;

use super::net::RegressorParams;
use crate::error::{Error, Result};

pub const DAF1_MAGIC: &[u8; 4] = b"DAF1";
pub const DAF1_VERSION: u32 = 1;

/// Longest tensor name and highest rank accepted by the decoder.
const MAX_NAME_LEN: usize = 256;
const MAX_RANK: usize = 8;

pub fn encode_checkpoint(params: &RegressorParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + params.num_params() * 8 + 12 * 48);
    out.extend_from_slice(DAF1_MAGIC);
    out.extend_from_slice(&DAF1_VERSION.to_le_bytes());
    for t in params.tensors() {
        out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
        for d in &t.dims {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for v in t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(Error::Truncated {
            expected: self.pos.saturating_add(n),
            found: self.bytes.len(),
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<RegressorParams> {
    if bytes.len() < 4 || &bytes[..4] != DAF1_MAGIC {
        return Err(Error::Format("missing DAF1 magic".into()));
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32()?;
    if version != DAF1_VERSION {
        return Err(Error::Format(format!("unsupported DAF1 version {version}")));
    }

    let mut params = RegressorParams::zeros();
    let expected: Vec<(String, Vec<usize>)> =
        params.tensors().into_iter().map(|t| (t.name, t.dims)).collect();
    let mut seen = vec![false; expected.len()];
    let mut buffers = params.buffers_mut();
    while !r.done() {
        let name_len = r.u32()? as usize;
        if name_len > MAX_NAME_LEN {
            return Err(Error::Format(format!("tensor name length {name_len} too large")));
        }
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        let slot = expected
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::Format(format!("unknown tensor {name:?}")))?;
        if std::mem::replace(&mut seen[slot], true) {
            return Err(Error::Format(format!("duplicate tensor {name:?}")));
        }
        let rank = r.u32()? as usize;
        if rank > MAX_RANK {
            return Err(Error::Format(format!("tensor {name:?} rank {rank} too large")));
        }
        let dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        if dims != expected[slot].1 {
            return Err(Error::Shape {
                expected: format!("{name} {:?}", expected[slot].1),
                actual: format!("{dims:?}"),
            });
        }
        let buf = &mut buffers[slot];
        let payload = r.take(buf.len() * 8)?;
        for (dst, chunk) in buf.iter_mut().zip(payload.chunks_exact(8)) {
            *dst = f64::from_le_bytes(chunk.try_into().unwrap());
            if !dst.is_finite() {
                return Err(Error::NonFinite("DAF1 payload"));
            }
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Format(format!("missing tensor {:?}", expected[missing].0)));
    }
    drop(buffers);
    Ok(params)
}

pub fn save_checkpoint(params: &RegressorParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(params)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<RegressorParams> {
    let path = path.as_ref();
    decode_checkpoint(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn round_trip_is_exact() {
        let p = RegressorParams::init(77);
        let bytes = encode_checkpoint(&p);
        assert_eq!(&bytes[..4], b"DAF1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(decode_checkpoint(&bytes).unwrap(), p);
        let tensors = p.tensors();
        let header: usize = tensors.iter().map(|t| 8 + t.name.len() + 4 * t.dims.len()).sum();
        assert_eq!(bytes.len(), 8 + header + 8 * p.num_params());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.daf1");
        let p = RegressorParams::init(1);
        save_checkpoint(&p, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), p);
        assert!(matches!(load_checkpoint(dir.path().join("none")), Err(Error::Io { .. })));
    }

    #[test]
    fn rejects_malformed() {
        let bytes = encode_checkpoint(&RegressorParams::init(2));
        assert!(matches!(decode_checkpoint(b"DAF2\x01\0\0\0"), Err(Error::Format(_))));
        assert!(matches!(decode_checkpoint(b"DAF1\x02\0\0\0"), Err(Error::Format(_))));
        assert!(matches!(decode_checkpoint(&bytes[..bytes.len() - 3]), Err(Error::Truncated { .. })));
        // Header only: every tensor missing.
        assert!(matches!(decode_checkpoint(&bytes[..8]), Err(Error::Format(_))));
        let mut dup = bytes.clone();
        let first_len = 8 + 4 + "conv1.weight".len() + 4 + 16 + 8 * 144;
        dup.extend_from_slice(&bytes[8..first_len]);
        assert!(matches!(decode_checkpoint(&dup), Err(Error::Format(_))));
        let mut nan = bytes.clone();
        let off = 8 + 4 + 12 + 4 + 16;
        nan[off..off + 8].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(decode_checkpoint(&nan), Err(Error::NonFinite(_))));
        let mut shape = bytes;
        shape[8 + 4 + 12 + 4..8 + 4 + 12 + 8].copy_from_slice(&9u32.to_le_bytes());
        assert!(matches!(decode_checkpoint(&shape), Err(Error::Shape { .. })));
    }

    proptest! {
        #[test]
        fn decode_never_panics(data in proptest::collection::vec(any::<u8>(), 0..512)) {
            let _ = decode_checkpoint(&data);
            let mut prefixed = b"DAF1\x01\0\0\0".to_vec();
            prefixed.extend_from_slice(&data);
            let _ = decode_checkpoint(&prefixed);
        }
    }
}
