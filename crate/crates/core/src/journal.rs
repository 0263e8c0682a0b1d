//! Run journals: an append-only file with one self-describing JSON record
//! per line. The first line is a versioned header binding the journal to its
//! experiment fingerprint; each further line is one trial. A torn final line
//! (crash mid-append) is dropped on load and truncated away on repair.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::TrialRecord;

pub const JOURNAL_SCHEMA: &str = "journal-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalHeader {
    pub schema: String,
    pub scenario: String,
    pub method: String,
    pub variant: String,
    pub seed: u64,
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_evals: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub time_budget: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub power_budget: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub memory_budget: Option<f64>,
    pub config_digest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Journal {
    pub header: JournalHeader,
    pub records: Vec<TrialRecord>,
}

fn header_line(header: &JournalHeader) -> Result<String> {
    serde_json::to_string(header).map_err(|e| Error::Journal(format!("header encode: {e}")))
}

fn record_line(record: &TrialRecord) -> Result<String> {
    serde_json::to_string(record).map_err(|e| Error::Journal(format!("record encode: {e}")))
}

/// Write a complete journal, replacing any existing file.
pub fn write(path: &Path, journal: &Journal) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", header_line(&journal.header)?)?;
    for r in &journal.records {
        writeln!(out, "{}", record_line(r)?)?;
    }
    out.flush()?;
    Ok(())
}

/// Append records to an existing journal file.
pub fn append(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let mut out = BufWriter::new(OpenOptions::new().append(true).open(path)?);
    for r in records {
        writeln!(out, "{}", record_line(r)?)?;
    }
    out.flush()?;
    Ok(())
}

/// Load a journal. `repair` additionally truncates the file when the final
/// line is torn, restoring the append-only invariant for a following resume.
pub fn load(path: &Path, repair: bool) -> Result<Journal> {
    let text = std::fs::read_to_string(path)?;
    let mut valid_len = 0usize;
    let mut header: Option<JournalHeader> = None;
    let mut records = Vec::new();
    let mut torn = false;

    for line in text.split_inclusive('\n') {
        let body = line.trim_end_matches('\n');
        if body.is_empty() {
            valid_len += line.len();
            continue;
        }
        let complete = line.ends_with('\n');
        if header.is_none() {
            match serde_json::from_str::<JournalHeader>(body) {
                Ok(h) if complete => {
                    if h.schema != JOURNAL_SCHEMA {
                        return Err(Error::Journal(format!(
                            "{}: unknown journal schema `{}` (expected `{JOURNAL_SCHEMA}`)",
                            path.display(),
                            h.schema
                        )));
                    }
                    header = Some(h);
                    valid_len += line.len();
                }
                _ => {
                    return Err(Error::Journal(format!(
                        "{}: missing or corrupt journal header",
                        path.display()
                    )));
                }
            }
            continue;
        }
        match serde_json::from_str::<TrialRecord>(body) {
            Ok(r) if complete => {
                records.push(r);
                valid_len += line.len();
            }
            _ => {
                torn = true;
                break;
            }
        }
    }

    let header = header.ok_or_else(|| {
        Error::Journal(format!("{}: empty journal", path.display()))
    })?;

    if torn && repair {
        let file = OpenOptions::new().write(true).open(path)?;
        file.set_len(valid_len as u64)?;
    }

    // Index continuity guards against a file assembled from mixed runs.
    for (i, r) in records.iter().enumerate() {
        if r.index != i as u64 {
            return Err(Error::Journal(format!(
                "{}: record {} carries index {}",
                path.display(),
                i,
                r.index
            )));
        }
    }

    Ok(Journal { header, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::TrialStatus;

    fn sample_header() -> JournalHeader {
        JournalHeader {
            schema: JOURNAL_SCHEMA.into(),
            scenario: "mnist-like".into(),
            method: "rand".into(),
            variant: "gated".into(),
            seed: 3,
            mode: "fixed-evals".into(),
            max_evals: Some(5),
            time_budget: None,
            power_budget: Some(62.0),
            memory_budget: Some(1.15),
            config_digest: "abc".into(),
        }
    }

    fn sample_record(index: u64) -> TrialRecord {
        TrialRecord {
            index,
            status: TrialStatus::Completed,
            x: vec![50.0, 3.0, 450.0, 0.01, 0.9, 0.001],
            z: vec![50, 3, 450],
            objective: Some(0.12345),
            epochs_run: 20,
            predicted_power: 51.2,
            predicted_memory: 0.93,
            true_power: 50.9,
            true_memory: 0.95,
            time_start: 0.0,
            time_end: 41.2,
            note: None,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = std::env::temp_dir().join(format!("hwopt-journal-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.jsonl");
        let journal = Journal {
            header: sample_header(),
            records: vec![sample_record(0), sample_record(1)],
        };
        write(&path, &journal).unwrap();
        let loaded = load(&path, false).unwrap();
        assert_eq!(journal, loaded);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn torn_final_line_is_dropped_and_repaired() {
        let dir = std::env::temp_dir().join(format!("hwopt-journal-torn-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("torn.jsonl");
        let journal = Journal {
            header: sample_header(),
            records: vec![sample_record(0), sample_record(1)],
        };
        write(&path, &journal).unwrap();
        // simulate a crash mid-append
        let mut bytes = std::fs::read(&path).unwrap();
        let keep = bytes.len() - 17;
        bytes.truncate(keep);
        std::fs::write(&path, &bytes).unwrap();

        let loaded = load(&path, true).unwrap();
        assert_eq!(loaded.records.len(), 1);
        // after repair the file parses cleanly and appending works
        append(&path, &[sample_record(1)]).unwrap();
        let again = load(&path, false).unwrap();
        assert_eq!(again.records.len(), 2);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn unknown_schema_is_rejected_explicitly() {
        let dir = std::env::temp_dir().join(format!("hwopt-journal-schema-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("schema.jsonl");
        let mut header = sample_header();
        header.schema = "journal-v99".into();
        write(
            &path,
            &Journal {
                header,
                records: vec![],
            },
        )
        .unwrap();
        let err = load(&path, false).unwrap_err();
        assert!(err.to_string().contains("journal-v99"));
        std::fs::remove_dir_all(&dir).ok();
    }
}
