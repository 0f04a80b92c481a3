//! On-disk table format.
//!
//! ```text
//! magic       8 bytes   "FSTRK01\0"
//! header_len  u32 LE
//! header      UTF-8 JSON {dims, subsystem, solver_hash, converged[, component]}
//! payload     f64 LE, row-major, last dimension fastest
//! crc         u32 LE, CRC-32 of the payload bytes
//! ```

use std::fs;
use std::path::Path;

use fastrack_core::grid::{Axis, GradientTable, GridSpec, TableMeta, ValueTable};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"FSTRK01\0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    dims: Vec<Axis>,
    subsystem: String,
    solver_hash: u64,
    converged: bool,
    /// Gradient axis for derivative tables, absent for value tables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    component: Option<usize>,
}

/// A decoded table file: values plus the gradient axis they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct TableFile {
    pub table: ValueTable,
    pub component: Option<usize>,
}

pub fn encode(table: &ValueTable, component: Option<usize>) -> Vec<u8> {
    let header = Header {
        dims: table.grid.axes().to_vec(),
        subsystem: table.meta.subsystem.clone(),
        solver_hash: table.meta.solver_hash,
        converged: table.meta.converged,
        component,
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(8 + 4 + header.len() + 8 * table.values.len() + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    let start = out.len();
    for v in &table.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out[start..]);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Parses bytes produced by [`encode`]. `path` only labels errors.
pub fn decode(bytes: &[u8], path: &Path) -> Result<TableFile> {
    let bad = |reason: &str| Error::format(path, reason);
    if bytes.len() < 12 {
        return Err(bad("truncated table file"));
    }
    if &bytes[..8] != MAGIC {
        return Err(bad("not a table file (bad magic bytes)"));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() < header_len + 4 {
        return Err(bad("truncated table file"));
    }
    let header: Header = serde_json::from_slice(&body[..header_len])
        .map_err(|e| Error::format(path, format!("bad header: {e}")))?;
    let grid = GridSpec::new(header.dims).map_err(|e| Error::format(path, e.to_string()))?;
    let payload = &body[header_len..body.len() - 4];
    let stored_crc = u32::from_le_bytes(body[body.len() - 4..].try_into().unwrap());
    if payload.len() % 8 != 0 || payload.len() / 8 != grid.len() {
        return Err(Error::format(
            path,
            format!(
                "corrupt table: {} payload bytes for {} nodes",
                payload.len(),
                grid.len()
            ),
        ));
    }
    if crc32fast::hash(payload) != stored_crc {
        return Err(bad("checksum mismatch"));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let meta = TableMeta {
        subsystem: header.subsystem,
        solver_hash: header.solver_hash,
        converged: header.converged,
    };
    Ok(TableFile {
        table: ValueTable::new(grid, values, meta)?,
        component: header.component,
    })
}

pub fn save_table(table: &ValueTable, path: &Path) -> Result<()> {
    fs::write(path, encode(table, None)).map_err(|e| Error::io(path, e))
}

pub fn load_table(path: &Path) -> Result<ValueTable> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let file = decode(&bytes, path)?;
    if file.component.is_some() {
        return Err(Error::format(path, "expected a value table, found a gradient table"));
    }
    Ok(file.table)
}

pub fn value_path(dir: &Path, name: &str) -> std::path::PathBuf {
    dir.join(format!("{name}.tbl"))
}

pub fn gradient_path(dir: &Path, name: &str, axis: usize) -> std::path::PathBuf {
    dir.join(format!("{name}.grad{axis}.tbl"))
}

/// Writes one file per gradient axis next to the value table.
pub fn save_gradient(grad: &GradientTable, meta: &TableMeta, dir: &Path, name: &str) -> Result<()> {
    for (d, comp) in grad.components.iter().enumerate() {
        let table = ValueTable::new(grad.grid.clone(), comp.clone(), meta.clone())?;
        let path = gradient_path(dir, name, d);
        fs::write(&path, encode(&table, Some(d))).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

pub fn load_gradient(dir: &Path, name: &str, grid: &GridSpec) -> Result<GradientTable> {
    let mut components = Vec::with_capacity(grid.ndim());
    for d in 0..grid.ndim() {
        let path = gradient_path(dir, name, d);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let file = decode(&bytes, &path)?;
        if file.component != Some(d) {
            return Err(Error::format(&path, format!("expected gradient axis {d}")));
        }
        if file.table.grid != *grid {
            return Err(Error::format(&path, "gradient grid differs from the value table"));
        }
        components.push(file.table.values);
    }
    Ok(GradientTable {
        grid: grid.clone(),
        components,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> ValueTable {
        let grid = GridSpec::new(vec![Axis::new("a", -1.0, 1.0, 3), Axis::new("b", 0.0, 2.0, 4)]).unwrap();
        let meta = TableMeta {
            subsystem: "scalar".into(),
            solver_hash: u64::MAX - 7,
            converged: true,
        };
        ValueTable::from_fn(grid, meta, |x| x[0] * 0.1 + x[1])
    }

    #[test]
    fn layout_starts_with_magic_and_ends_with_crc() {
        let bytes = encode(&table(), None);
        assert_eq!(&bytes[..8], b"FSTRK01\0");
        let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let payload = &bytes[12 + n..bytes.len() - 4];
        assert_eq!(payload.len(), 12 * 8);
        let crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
        assert_eq!(crc, crc32fast::hash(payload));
        let header: serde_json::Value = serde_json::from_slice(&bytes[12..12 + n]).unwrap();
        assert_eq!(header["dims"][1]["count"], 4);
        assert_eq!(header["solver_hash"].as_u64(), Some(u64::MAX - 7));
    }

    #[test]
    fn flipped_payload_bit_fails_checksum() {
        let mut bytes = encode(&table(), None);
        let i = bytes.len() - 10;
        bytes[i] ^= 1;
        let err = decode(&bytes, Path::new("t")).unwrap_err();
        assert!(err.to_string().contains("checksum"));
    }

    #[test]
    fn truncation_is_reported() {
        let bytes = encode(&table(), None);
        assert!(decode(&bytes[..bytes.len() - 9], Path::new("t")).is_err());
        assert!(decode(&bytes[..5], Path::new("t")).is_err());
    }
}
