//! Optimizer-state sidecar: magic, format version, step count, then the first
//! and second moment vectors as little-endian f64.

use std::path::Path;

use crate::error::{Error, Result};
use crate::optim::AdamState;

pub const MAGIC: &[u8; 8] = b"FROSTADM";
pub const STATE_VERSION: u32 = 1;
const HEADER: usize = 8 + 4 + 8 + 8;

pub fn encode_optimizer_state(s: &AdamState) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER + 16 * s.m.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&STATE_VERSION.to_le_bytes());
    buf.extend_from_slice(&s.step.to_le_bytes());
    buf.extend_from_slice(&(s.m.len() as u64).to_le_bytes());
    for v in s.m.iter().chain(&s.v) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode_optimizer_state(path: &Path, bytes: &[u8]) -> Result<AdamState> {
    let truncated = |offset: usize, message: &str| Error::Truncated {
        path: path.to_path_buf(),
        offset: offset as u64,
        message: message.into(),
    };
    if bytes.len() < HEADER {
        return Err(truncated(bytes.len(), "header incomplete"));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::CorruptPackage(format!("{}: bad optimizer-state magic", path.display())));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version > STATE_VERSION {
        return Err(Error::VersionError {
            found: version.to_string(),
            supported: STATE_VERSION.to_string(),
        });
    }
    let step = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let len = u64::from_le_bytes(bytes[20..28].try_into().unwrap()) as usize;
    let need = len.checked_mul(16).and_then(|n| n.checked_add(HEADER)).ok_or_else(|| truncated(20, "length overflows"))?;
    if bytes.len() < need {
        return Err(truncated(bytes.len() - (bytes.len() - HEADER) % 8, "moment vectors incomplete"));
    }
    if bytes.len() > need {
        return Err(Error::CorruptPackage(format!("{}: trailing bytes after offset {need}", path.display())));
    }
    let vals: Vec<f64> = bytes[HEADER..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(AdamState {
        step,
        m: vals[..len].to_vec(),
        v: vals[len..].to_vec(),
    })
}

pub fn write_optimizer_state(path: &Path, s: &AdamState) -> Result<()> {
    std::fs::write(path, encode_optimizer_state(s)).map_err(|e| Error::io(path, e))
}

pub fn read_optimizer_state(path: &Path) -> Result<AdamState> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_optimizer_state(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_truncation() {
        let s = AdamState {
            step: 42,
            m: vec![0.1, -2.5, 1e-300],
            v: vec![3.0, 0.0, f64::MIN_POSITIVE],
        };
        let bytes = encode_optimizer_state(&s);
        assert_eq!(decode_optimizer_state(Path::new("o"), &bytes).unwrap(), s);
        let err = decode_optimizer_state(Path::new("o"), &bytes[..bytes.len() - 3]).unwrap_err();
        assert!(matches!(err, Error::Truncated { .. }));
        let mut newer = bytes.clone();
        newer[8] = 9;
        assert!(matches!(decode_optimizer_state(Path::new("o"), &newer), Err(Error::VersionError { .. })));
    }
}
