//! Dataset metadata: the TSV ingestion format and the votes/duration filter.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetadataError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing header row")]
    MissingHeader,
}

pub const METADATA_HEADER: &str = "id\tpath\ttranscript\tupvotes\tdownvotes\tduration_s";

/// One row of dataset metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMetadata {
    pub id: String,
    pub audio_path: PathBuf,
    pub transcript: String,
    pub upvotes: u32,
    pub downvotes: u32,
    pub duration_s: f64,
}

/// Keeps samples that are not downvoted below their upvotes and whose
/// duration lies in `[min_dur_s, max_dur_s]`, both ends inclusive. A vote tie
/// is kept. Input order is preserved.
pub fn filter_samples(
    samples: &[SampleMetadata],
    min_dur_s: f64,
    max_dur_s: f64,
) -> Vec<SampleMetadata> {
    samples
        .iter()
        .filter(|s| sample_passes(s, min_dur_s, max_dur_s))
        .cloned()
        .collect()
}

pub fn sample_passes(s: &SampleMetadata, min_dur_s: f64, max_dur_s: f64) -> bool {
    s.downvotes <= s.upvotes && s.duration_s >= min_dur_s && s.duration_s <= max_dur_s
}

/// Parses the metadata TSV. The header row must match [`METADATA_HEADER`];
/// parse failures name the 1-based line.
pub fn parse_metadata_tsv(text: &str) -> Result<Vec<SampleMetadata>, MetadataError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == METADATA_HEADER => {}
        Some((_, h)) => {
            return Err(MetadataError::Parse {
                line: 1,
                msg: format!("bad header {h:?}, expected {METADATA_HEADER:?}"),
            });
        }
        None => return Err(MetadataError::MissingHeader),
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        out.push(parse_metadata_row(line, line_no)?);
    }
    Ok(out)
}

pub fn parse_metadata_row(line: &str, line_no: usize) -> Result<SampleMetadata, MetadataError> {
    let err = |msg: String| MetadataError::Parse { line: line_no, msg };
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 6 {
        return Err(err(format!("expected 6 columns, got {}", cols.len())));
    }
    let upvotes: u32 = cols[3]
        .parse()
        .map_err(|_| err(format!("bad upvotes {:?}", cols[3])))?;
    let downvotes: u32 = cols[4]
        .parse()
        .map_err(|_| err(format!("bad downvotes {:?}", cols[4])))?;
    let duration_s: f64 = cols[5]
        .parse()
        .map_err(|_| err(format!("bad duration {:?}", cols[5])))?;
    if !duration_s.is_finite() || duration_s < 0.0 {
        return Err(err(format!("duration must be finite and >= 0, got {duration_s}")));
    }
    Ok(SampleMetadata {
        id: cols[0].to_string(),
        audio_path: PathBuf::from(cols[1]),
        transcript: cols[2].to_string(),
        upvotes,
        downvotes,
        duration_s,
    })
}
