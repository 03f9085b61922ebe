//! Raw matrix files: a 16-byte header (8-byte magic, `u32` rows, `u32`
//! columns, little-endian) followed by `rows × cols` little-endian `f64`
//! values in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 8] = b"MSTATF64";

#[derive(Debug, Clone, PartialEq)]
pub struct RawMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major values.
    pub data: Vec<f64>,
}

impl RawMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> CliResult<Self> {
        if data.len() != rows * cols {
            return Err(CliError::data(format!("{rows}×{cols} matrix needs {} values, got {}", rows * cols, data.len())));
        }
        if u32::try_from(rows).is_err() || u32::try_from(cols).is_err() {
            return Err(CliError::data("matrix too large for the binary header"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

pub fn is_binary(path: &Path) -> CliResult<bool> {
    let mut f = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut head = [0u8; 8];
    match f.read_exact(&mut head) {
        Ok(()) => Ok(&head == MAGIC),
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Ok(false),
        Err(e) => Err(CliError::io(path, e)),
    }
}

pub fn write(path: &Path, m: &RawMatrix) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| CliError::io(path, e));
    put(MAGIC)?;
    put(&(m.rows as u32).to_le_bytes())?;
    put(&(m.cols as u32).to_le_bytes())?;
    for v in &m.data {
        put(&v.to_le_bytes())?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read(path: &Path) -> CliResult<RawMatrix> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut header = [0u8; 16];
    r.read_exact(&mut header)
        .map_err(|_| CliError::data(format!("{}: truncated header", path.display())))?;
    if &header[..8] != MAGIC {
        return Err(CliError::data(format!("{}: bad magic", path.display())));
    }
    let rows = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| CliError::io(path, e))?;
    if bytes.len() != rows * cols * 8 {
        return Err(CliError::data(format!(
            "{}: header says {rows}×{cols} but payload has {} bytes",
            path.display(),
            bytes.len()
        )));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    RawMatrix::new(rows, cols, data)
}
