//! Binary container shared by checkpoints and window caches:
//! 8 magic bytes, header length as u64 LE, a JSON header, then the payload
//! as little-endian f64.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{AuditError, Result};

pub(crate) fn write<H: Serialize>(path: &Path, magic: &[u8; 8], header: &H, payload: &[f64]) -> Result<()> {
    let io = |e| AuditError::io(path, e);
    let json = serde_json::to_vec(header).map_err(|e| AuditError::Config(format!("header encoding: {e}")))?;
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp).map_err(io)?);
        w.write_all(magic).map_err(io)?;
        w.write_all(&(json.len() as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&json).map_err(io)?;
        for v in payload {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
        w.flush().map_err(io)?;
    }
    std::fs::rename(&tmp, path).map_err(io)
}

pub(crate) fn read<H: DeserializeOwned>(path: &Path, magic: &[u8; 8]) -> Result<(H, Vec<f64>)> {
    let io = |e| AuditError::io(path, e);
    let corrupt = |m: &str| AuditError::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string()));
    let mut r = BufReader::new(File::open(path).map_err(io)?);
    let mut head = [0u8; 16];
    r.read_exact(&mut head).map_err(io)?;
    if &head[..8] != magic {
        return Err(corrupt("bad magic bytes"));
    }
    let len = u64::from_le_bytes(head[8..].try_into().unwrap()) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json).map_err(io)?;
    let header = serde_json::from_slice(&json).map_err(|_| corrupt("bad header"))?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest).map_err(io)?;
    if rest.len() % 8 != 0 {
        return Err(corrupt("truncated payload"));
    }
    let payload = rest
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, payload))
}
