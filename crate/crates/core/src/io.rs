//! Versioned binary container with a JSON sidecar, shared by kernel grids and
//! grid measures.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SHFDATA\0";
pub const FORMAT_VERSION: u32 = 1;
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// `out.bin` → `out.bin.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn encode(kind: &str, payload: &[f64]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(32 + kind.len() + 8 * payload.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(kind.len() as u32).to_le_bytes());
    buf.extend_from_slice(kind.as_bytes());
    buf.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    for v in payload {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes the binary payload and its sidecar.
pub fn write_container(path: &Path, kind: &str, header: Value, payload: &[f64]) -> Result<()> {
    let bytes = encode(kind, payload);
    let side = json!({
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "code_version": CODE_VERSION,
        "payload_len": payload.len(),
        "sha256": sha256_hex(&bytes),
        "header": header,
    });
    let text = serde_json::to_string_pretty(&side).map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(path, &bytes)?;
    write_atomic(&sidecar_path(path), text.as_bytes())?;
    Ok(())
}

fn take<'a>(buf: &'a [u8], pos: &mut usize, n: usize) -> Result<&'a [u8]> {
    if *pos + n > buf.len() {
        return Err(Error::Format("truncated binary container".into()));
    }
    let s = &buf[*pos..*pos + n];
    *pos += n;
    Ok(s)
}

/// Reads and verifies a container; returns the sidecar header and payload.
pub fn read_container(path: &Path, kind: &str) -> Result<(Value, Vec<f64>)> {
    let bytes = fs::read(path)?;
    let side_text = fs::read_to_string(sidecar_path(path))?;
    let side: Value = serde_json::from_str(&side_text).map_err(|e| Error::Format(format!("sidecar: {e}")))?;
    let want_sum = side["sha256"].as_str().unwrap_or_default();
    if want_sum != sha256_hex(&bytes) {
        return Err(Error::Format(format!("checksum mismatch for {}", path.display())));
    }
    let mut pos = 0;
    if take(&bytes, &mut pos, 8)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(&bytes, &mut pos, 4)?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("format version {version}, expected {FORMAT_VERSION}")));
    }
    let klen = u32::from_le_bytes(take(&bytes, &mut pos, 4)?.try_into().unwrap()) as usize;
    let got_kind = take(&bytes, &mut pos, klen)?;
    if got_kind != kind.as_bytes() {
        return Err(Error::Format(format!(
            "container holds '{}', expected '{kind}'",
            String::from_utf8_lossy(got_kind)
        )));
    }
    let n = u64::from_le_bytes(take(&bytes, &mut pos, 8)?.try_into().unwrap()) as usize;
    let raw = take(&bytes, &mut pos, 8 * n)?;
    if pos != bytes.len() {
        return Err(Error::Format("trailing bytes in container".into()));
    }
    let payload = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((side["header"].clone(), payload))
}
