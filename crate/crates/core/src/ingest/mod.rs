//! Scenario corpora: highD-style track extraction, seeded synthetic
//! generation and `.jsonl` corpus files.

pub mod extract;
pub mod synthetic;
pub mod tracks;

use std::io::{BufRead, Write};

use thiserror::Error;

pub use extract::{extract_scenarios, AnchorMode, Extraction, ExtractionConfig, LaneConvention, SkipReason};
pub use synthetic::{generate_synthetic, SyntheticSample, SyntheticSpec};
pub use tracks::{load_tracks, TrackError, TrackRecord, Tracks};

use crate::scenario::CorpusEntry;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: invalid scenario {id:?}: {detail}")]
    Invalid { line: usize, id: String, detail: String },
    #[error("line {line}: duplicate scenario id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads one corpus entry per non-blank line, validating every scenario.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<CorpusEntry>, CorpusError> {
    let mut out = Vec::new();
    let mut ids = std::collections::HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: CorpusEntry =
            serde_json::from_str(&line).map_err(|source| CorpusError::Json { line: line_no, source })?;
        let violations = entry.scenario.validate();
        if let Some(v) = violations.first() {
            return Err(CorpusError::Invalid { line: line_no, id: entry.scenario.id.clone(), detail: v.to_string() });
        }
        if !ids.insert(entry.scenario.id.clone()) {
            return Err(CorpusError::DuplicateId { line: line_no, id: entry.scenario.id });
        }
        out.push(entry);
    }
    Ok(out)
}

pub fn write_corpus<W: Write>(entries: &[CorpusEntry], mut writer: W) -> std::io::Result<()> {
    for e in entries {
        serde_json::to_writer(&mut writer, e)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}
