//! Binary container shared by instance, score and checkpoint files.
//!
//! ```text
//! offset  size  field
//! 0       4     magic ("TCI1" instance, "TCS1" scores, "TCM1" checkpoint)
//! 4       4     format version, u32 little-endian
//! 8       8     metadata length in bytes, u64 little-endian
//! 16      m     metadata, UTF-8 JSON object; "shape" lists payload dimensions
//! 16+m    4*n   payload, row-major f32 little-endian, n = product of shape
//! end-8   8     first 8 bytes of SHA-256 over all preceding bytes
//! ```

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;
pub const TRAILER_LEN: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Instance,
    Scores,
    Checkpoint,
}

impl Kind {
    pub fn magic(self) -> [u8; 4] {
        match self {
            Kind::Instance => *b"TCI1",
            Kind::Scores => *b"TCS1",
            Kind::Checkpoint => *b"TCM1",
        }
    }

    fn from_magic(m: &[u8]) -> Option<Self> {
        [Kind::Instance, Kind::Scores, Kind::Checkpoint].into_iter().find(|k| k.magic() == m)
    }
}

/// A decoded container.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub kind: Kind,
    pub meta: Map<String, Value>,
    pub shape: Vec<usize>,
    pub payload: Vec<f32>,
    pub hash: u64,
}

pub fn hash64(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn encode(kind: Kind, mut meta: Map<String, Value>, shape: &[usize], payload: &[f32]) -> Result<Vec<u8>> {
    let n: usize = shape.iter().product();
    if n != payload.len() {
        return Err(Error::Shape(format!("shape {shape:?} holds {n} values, payload has {}", payload.len())));
    }
    meta.insert("shape".into(), Value::from(shape.to_vec()));
    let meta_bytes = serde_json::to_vec(&Value::Object(meta))?;
    let mut out = Vec::with_capacity(HEADER_LEN + meta_bytes.len() + 4 * n + TRAILER_LEN);
    out.extend_from_slice(&kind.magic());
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(meta_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta_bytes);
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let h = hash64(&out);
    out.extend_from_slice(&h.to_le_bytes());
    Ok(out)
}

pub fn decode(bytes: &[u8], expected: Kind) -> Result<Frame> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("truncated header: need {HEADER_LEN} bytes, found {}", bytes.len())));
    }
    let kind = Kind::from_magic(&bytes[..4])
        .ok_or_else(|| Error::Format(format!("unknown magic {:?}", String::from_utf8_lossy(&bytes[..4]))))?;
    if kind != expected {
        return Err(Error::Format(format!("expected {expected:?} container, found {kind:?}")));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Format(format!("unsupported container version {version}")));
    }
    let meta_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let meta_end = HEADER_LEN
        .checked_add(meta_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Format(format!("truncated metadata: declared {meta_len} bytes")))?;
    let meta: Value = serde_json::from_slice(&bytes[HEADER_LEN..meta_end])
        .map_err(|e| Error::Format(format!("metadata is not valid JSON: {e}")))?;
    let Value::Object(mut meta) = meta else {
        return Err(Error::Format("metadata is not a JSON object".into()));
    };
    let shape: Vec<usize> = meta
        .remove("shape")
        .and_then(|v| serde_json::from_value(v).ok())
        .ok_or_else(|| Error::Format("metadata lacks a valid \"shape\"".into()))?;
    let n = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format("shape overflows".into()))?;
    let payload_end = n
        .checked_mul(4)
        .and_then(|b| meta_end.checked_add(b))
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Format(format!("truncated payload: expected {n} f32 values")))?;
    if bytes.len() < payload_end + TRAILER_LEN {
        return Err(Error::Format("truncated hash trailer".into()));
    }
    if bytes.len() > payload_end + TRAILER_LEN {
        return Err(Error::Format(format!("{} unexpected trailing bytes", bytes.len() - payload_end - TRAILER_LEN)));
    }
    let stored = u64::from_le_bytes(bytes[payload_end..].try_into().expect("8 bytes"));
    if hash64(&bytes[..payload_end]) != stored {
        return Err(Error::HashMismatch(format!("{kind:?} container")));
    }
    let payload = bytes[meta_end..payload_end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok(Frame { kind, meta, shape, payload, hash: stored })
}

pub fn meta_field<T: serde::de::DeserializeOwned>(meta: &Map<String, Value>, key: &str) -> Result<T> {
    let v = meta.get(key).ok_or_else(|| Error::Format(format!("metadata lacks \"{key}\"")))?;
    serde_json::from_value(v.clone()).map_err(|e| Error::Format(format!("metadata field \"{key}\": {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<u8> {
        let mut meta = Map::new();
        meta.insert("id".into(), "x".into());
        encode(Kind::Scores, meta, &[2, 3], &[1.0, -2.5, 3.25, f32::MIN_POSITIVE, 0.0, -0.0]).unwrap()
    }

    #[test]
    fn header_layout() {
        let b = sample();
        assert_eq!(&b[..4], b"TCS1");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        let f = decode(&b, Kind::Scores).unwrap();
        assert_eq!(f.shape, vec![2, 3]);
        assert_eq!(f.payload[1], -2.5);
        assert_eq!(f.payload[5].to_bits(), (-0.0f32).to_bits());
        assert_eq!(f.meta["id"], "x");
    }

    #[test]
    fn truncation_names_section() {
        let b = sample();
        let msg = |n: usize| decode(&b[..n], Kind::Scores).unwrap_err().to_string();
        assert!(msg(10).contains("header"));
        assert!(msg(20).contains("metadata"));
        assert!(msg(b.len() - 12).contains("payload"));
        assert!(msg(b.len() - 3).contains("trailer"));
    }

    #[test]
    fn corruption_detected() {
        let mut b = sample();
        let k = b.len() - 10;
        b[k] ^= 1;
        assert!(matches!(decode(&b, Kind::Scores), Err(Error::HashMismatch(_))));
        assert!(decode(&sample(), Kind::Instance).is_err());
    }
}
