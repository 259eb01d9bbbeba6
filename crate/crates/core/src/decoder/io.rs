//! Logit file formats.
//!
//! Binary "CTCL1": magic `CTCL`, version byte 1, little-endian u32 frame
//! count T, u32 token count V, then T*V 32-bit floats, frame-major. The
//! token inventory travels in its own file; V must match it.
//!
//! The text format is one frame per line, V space-separated decimals, for
//! hand-written fixtures.

use std::io::{BufRead, Read, Write};
use std::sync::Arc;

use super::{DecodeError, LogitMatrix};
use crate::text::TokenInventory;

const MAGIC: &[u8; 4] = b"CTCL";
const VERSION: u8 = 1;

pub fn write_ctcl1(m: &LogitMatrix, sink: &mut impl Write) -> Result<(), DecodeError> {
    sink.write_all(MAGIC)?;
    sink.write_all(&[VERSION])?;
    sink.write_all(&(m.num_frames() as u32).to_le_bytes())?;
    sink.write_all(&(m.num_tokens() as u32).to_le_bytes())?;
    for t in 0..m.num_frames() {
        for &x in m.frame(t) {
            sink.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_ctcl1(
    source: &mut impl Read,
    inventory: Arc<TokenInventory>,
) -> Result<LogitMatrix, DecodeError> {
    let mut header = [0u8; 13];
    source
        .read_exact(&mut header)
        .map_err(|_| DecodeError::Format("truncated CTCL1 header".into()))?;
    if &header[0..4] != MAGIC {
        return Err(DecodeError::Format(format!(
            "bad magic {:?}, expected \"CTCL\"",
            &header[0..4]
        )));
    }
    if header[4] != VERSION {
        return Err(DecodeError::Format(format!(
            "unsupported CTCL version {}",
            header[4]
        )));
    }
    let t = u32::from_le_bytes(header[5..9].try_into().unwrap()) as usize;
    let v = u32::from_le_bytes(header[9..13].try_into().unwrap()) as usize;
    if v != inventory.len() {
        return Err(DecodeError::VocabMismatch {
            expected: inventory.len(),
            got: v,
        });
    }
    let mut bytes = vec![0u8; t * v * 4];
    source
        .read_exact(&mut bytes)
        .map_err(|_| DecodeError::Format("truncated CTCL1 payload".into()))?;
    let mut trailing = [0u8; 1];
    if source.read(&mut trailing)? != 0 {
        return Err(DecodeError::Format("trailing bytes after payload".into()));
    }
    let data: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    LogitMatrix::new(data, t, inventory)
}

/// One frame per line, space-separated decimal logits.
pub fn read_text_logits(
    source: impl BufRead,
    inventory: Arc<TokenInventory>,
) -> Result<LogitMatrix, DecodeError> {
    let v = inventory.len();
    let mut data = Vec::new();
    let mut frames = 0usize;
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f32>, _> = line.split_whitespace().map(str::parse::<f32>).collect();
        let row = row.map_err(|e| DecodeError::Parse {
            line: idx + 1,
            msg: format!("bad logit: {e}"),
        })?;
        if row.len() != v {
            return Err(DecodeError::Parse {
                line: idx + 1,
                msg: format!("expected {v} columns, got {}", row.len()),
            });
        }
        data.extend_from_slice(&row);
        frames += 1;
    }
    LogitMatrix::new(data, frames, inventory)
}
