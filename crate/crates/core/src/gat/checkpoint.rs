//! Named-tensor checkpoint archive.
//!
//! ```text
//! HATGAE-CKPT<TAB>1<LF>
//! arch<TAB><architecture as JSON><LF>
//! tensors<TAB><count><LF>
//! then per tensor, in name order:
//! <name><TAB><rows>x<cols><TAB><rows*cols little-endian f64, row-major><LF>
//! ```

use super::{Architecture, ModelParams};
use crate::autodiff::{Matrix, ParamStore};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

const MAGIC: &str = "HATGAE-CKPT";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
}

fn format_err(msg: impl Into<String>) -> CheckpointError {
    CheckpointError::Format(msg.into())
}

pub fn write_checkpoint<W: Write>(model: &ModelParams, mut out: W) -> Result<(), CheckpointError> {
    writeln!(out, "{MAGIC}\t{VERSION}")?;
    let arch = serde_json::to_string(&model.arch).map_err(|e| format_err(e.to_string()))?;
    writeln!(out, "arch\t{arch}")?;
    writeln!(out, "tensors\t{}", model.store.len())?;
    for (name, m) in model.store.iter() {
        write!(out, "{name}\t{}x{}\t", m.nrows(), m.ncols())?;
        for x in m.iter() {
            out.write_all(&x.to_le_bytes())?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn read_line<R: BufRead>(r: &mut R, what: &str) -> Result<String, CheckpointError> {
    let mut line = String::new();
    if r.read_line(&mut line)? == 0 {
        return Err(format_err(format!("unexpected end of file reading {what}")));
    }
    Ok(line.trim_end_matches('\n').to_string())
}

/// Reads bytes up to and excluding the next tab.
fn read_field<R: BufRead>(r: &mut R) -> Result<String, CheckpointError> {
    let mut buf = Vec::new();
    r.read_until(b'\t', &mut buf)?;
    if buf.pop() != Some(b'\t') {
        return Err(format_err("truncated tensor header"));
    }
    String::from_utf8(buf).map_err(|_| format_err("tensor header is not UTF-8"))
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<ModelParams, CheckpointError> {
    let mut r = BufReader::new(input);
    let header = read_line(&mut r, "header")?;
    let version = header
        .strip_prefix(MAGIC)
        .and_then(|rest| rest.strip_prefix('\t'))
        .ok_or_else(|| format_err("missing magic header"))?
        .parse::<u32>()
        .map_err(|_| format_err("bad version"))?;
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let arch_line = read_line(&mut r, "architecture")?;
    let arch: Architecture = serde_json::from_str(
        arch_line
            .strip_prefix("arch\t")
            .ok_or_else(|| format_err("missing arch record"))?,
    )
    .map_err(|e| format_err(format!("architecture: {e}")))?;
    let count: usize = read_line(&mut r, "tensor count")?
        .strip_prefix("tensors\t")
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| format_err("missing tensor count"))?;

    let mut store = ParamStore::new();
    for _ in 0..count {
        let name = read_field(&mut r)?;
        let dims = read_field(&mut r)?;
        let (rows, cols) = dims
            .split_once('x')
            .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
            .ok_or_else(|| format_err(format!("bad shape {dims:?} for {name}")))?;
        let mut bytes = vec![0u8; rows * cols * 8];
        r.read_exact(&mut bytes)
            .map_err(|_| format_err(format!("truncated values for {name}")))?;
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let mut nl = [0u8; 1];
        r.read_exact(&mut nl)?;
        if nl[0] != b'\n' {
            return Err(format_err(format!("missing record terminator after {name}")));
        }
        let m = Matrix::from_shape_vec((rows, cols), values).expect("length matches shape");
        store.insert(name, m);
    }
    Ok(ModelParams { arch, store })
}

pub fn save_checkpoint(model: &ModelParams, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    let mut buf = Vec::new();
    write_checkpoint(model, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams, CheckpointError> {
    read_checkpoint(fs::File::open(path)?)
}
