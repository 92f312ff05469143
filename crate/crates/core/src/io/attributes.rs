use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::renderer::VertexAttributes;

pub const ATTRIBUTES_MAGIC: [u8; 8] = *b"TDVATTR\0";
pub const ATTRIBUTES_VERSION: u32 = 1;

/// Little-endian layout: 8-byte magic, u32 version, u32 reserved, u64 `N`,
/// `N×3` f64 colors, `N` f64 visibilities.
pub fn write_attributes(attrs: &VertexAttributes, path: &Path) -> Result<()> {
    let n = attrs.len();
    let mut out = Vec::with_capacity(24 + 32 * n);
    out.extend_from_slice(&ATTRIBUTES_MAGIC);
    out.extend_from_slice(&ATTRIBUTES_VERSION.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for c in attrs.colors.iter().flatten() {
        out.extend_from_slice(&c.to_le_bytes());
    }
    for d in &attrs.visibility {
        out.extend_from_slice(&d.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_attributes(path: &Path) -> Result<VertexAttributes> {
    let bytes = fs::read(path)?;
    if bytes.len() < 24 || bytes[..8] != ATTRIBUTES_MAGIC {
        return Err(Error::Format(format!("{}: not a vertex attribute file", path.display())));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    if word(8) != ATTRIBUTES_VERSION {
        return Err(Error::Format(format!("unsupported attribute file version {}", word(8))));
    }
    let n = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    if n.checked_mul(32).and_then(|b| b.checked_add(24)) != Some(bytes.len()) {
        return Err(Error::Format(format!("attribute file size does not match {n} vertices")));
    }
    let float = |k: usize| f64::from_le_bytes(bytes[24 + 8 * k..32 + 8 * k].try_into().unwrap());
    let colors = (0..n).map(|v| [float(3 * v), float(3 * v + 1), float(3 * v + 2)]).collect();
    let visibility = (0..n).map(|v| float(3 * n + v)).collect();
    Ok(VertexAttributes { colors, visibility })
}
