//! Binary checkpoint format, all integers little-endian:
//!
//! ```text
//! magic        8 bytes  "UDCKPT01"
//! fingerprint  u64      FNV-1a of the canonical network config
//! config_len   u32      followed by the canonical config text (UTF-8)
//! count        u32      number of arrays
//! per array:   u32 name length, name bytes, u32 rank, rank x u32 dims,
//!              then prod(dims) x f32 values
//! ```

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use super::config::NetworkConfig;
use super::params::{layout, Parameters, Tensor};

const MAGIC: &[u8; 8] = b"UDCKPT01";

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("config fingerprint mismatch: checkpoint {found:016x}, expected {expected:016x}")]
    FingerprintMismatch { expected: u64, found: u64 },
}

pub fn write_checkpoint<W: Write>(mut w: W, params: &Parameters) -> Result<(), CheckpointError> {
    let cfg = params.config.canonical();
    w.write_all(MAGIC)?;
    w.write_all(&params.config.fingerprint().to_le_bytes())?;
    w.write_all(&(cfg.len() as u32).to_le_bytes())?;
    w.write_all(cfg.as_bytes())?;
    w.write_all(&(params.tensors().len() as u32).to_le_bytes())?;
    for t in params.tensors() {
        let name = t.id.name();
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape.len() as u32).to_le_bytes())?;
        for &d in &t.shape {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(t.data.len() * 4);
        for &v in &t.data {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, CheckpointError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Reads a checkpoint. With `expected`, the stored fingerprint must match it.
pub fn read_checkpoint<R: Read>(mut r: R, expected: Option<&NetworkConfig>) -> Result<Parameters, CheckpointError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut fp = [0u8; 8];
    r.read_exact(&mut fp)?;
    let found = u64::from_le_bytes(fp);
    if let Some(exp) = expected {
        if exp.fingerprint() != found {
            return Err(CheckpointError::FingerprintMismatch { expected: exp.fingerprint(), found });
        }
    }
    let len = read_u32(&mut r)? as usize;
    let mut text = vec![0u8; len];
    r.read_exact(&mut text)?;
    let text = String::from_utf8(text).map_err(|_| CheckpointError::Malformed("config is not UTF-8".into()))?;
    let config = NetworkConfig::parse_canonical(&text)
        .ok_or_else(|| CheckpointError::Malformed(format!("unparseable config {text:?}")))?;
    if config.fingerprint() != found {
        return Err(CheckpointError::FingerprintMismatch { expected: config.fingerprint(), found });
    }
    let expected_layout = layout(&config).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
    let count = read_u32(&mut r)? as usize;
    if count != expected_layout.len() {
        return Err(CheckpointError::Malformed(format!(
            "expected {} arrays, found {count}",
            expected_layout.len()
        )));
    }
    let mut tensors = Vec::with_capacity(count);
    for (id, shape, _) in expected_layout {
        let nlen = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; nlen];
        r.read_exact(&mut name)?;
        if name != id.name().as_bytes() {
            return Err(CheckpointError::Malformed(format!(
                "expected array {}, found {}",
                id.name(),
                String::from_utf8_lossy(&name)
            )));
        }
        let rank = read_u32(&mut r)? as usize;
        let dims = (0..rank).map(|_| read_u32(&mut r).map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        if dims != shape {
            return Err(CheckpointError::Malformed(format!("{}: shape {dims:?}, expected {shape:?}", id.name())));
        }
        let n: usize = dims.iter().product();
        let mut raw = vec![0u8; n * 4];
        r.read_exact(&mut raw)?;
        let data: Vec<f64> =
            raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CheckpointError::Malformed(format!("{}: non-finite value", id.name())));
        }
        tensors.push(Tensor { id, shape: dims, data });
    }
    Ok(Parameters::from_tensors(config, tensors))
}

pub fn save_checkpoint(path: &Path, params: &Parameters) -> Result<(), CheckpointError> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, params)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path, expected: Option<&NetworkConfig>) -> Result<Parameters, CheckpointError> {
    let bytes = fs::read(path)?;
    read_checkpoint(bytes.as_slice(), expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_at_f32_precision() {
        let c = NetworkConfig::tiny(5);
        let p = Parameters::init(&c, 1).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &p).unwrap();
        let q = read_checkpoint(buf.as_slice(), Some(&c)).unwrap();
        for (a, b) in p.tensors().iter().zip(q.tensors()) {
            assert_eq!(a.shape, b.shape);
            for (x, y) in a.data.iter().zip(&b.data) {
                assert_eq!(*x as f32 as f64, *y);
            }
        }
        // Re-encoding a loaded checkpoint is byte-stable.
        let mut again = Vec::new();
        write_checkpoint(&mut again, &q).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn header_layout() {
        let c = NetworkConfig::tiny(3);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &Parameters::zeros(&c).unwrap()).unwrap();
        assert_eq!(&buf[..8], b"UDCKPT01");
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), c.fingerprint());
    }

    #[test]
    fn fingerprint_mismatch_is_an_error() {
        let p = Parameters::init(&NetworkConfig::tiny(3), 0).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &p).unwrap();
        let err = read_checkpoint(buf.as_slice(), Some(&NetworkConfig::tiny(5))).unwrap_err();
        assert!(matches!(err, CheckpointError::FingerprintMismatch { .. }));
        assert!(matches!(read_checkpoint(&b"garbage!........"[..], None), Err(CheckpointError::BadMagic)));
    }
}
