//! Question/sample records, JSONL ingestion, and per-question count
//! summaries.
//!
//! Records arrive already clustered and graded; ingestion re-indexes the
//! arbitrary class labels densely as 0..K-1 in order of first appearance
//! and keeps the original labels for reporting.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

/// One generation, after semantic clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticSample {
    /// Dense class index, < K of the owning record.
    pub class_id: usize,
    /// Per-generation grade, when the upstream grader emitted one.
    pub graded_correct: Option<bool>,
    /// Raw text the verbalized-confidence parser operates on.
    pub verbalized_raw: Option<String>,
}

/// One question's clustered samples plus the class-level correctness map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub question_id: String,
    /// Generation order preserved.
    pub samples: Vec<SemanticSample>,
    /// Correctness per dense class id; length is K.
    pub class_correct: Vec<bool>,
    /// Original label per dense class id (ingestion-side mapping).
    pub class_labels: Vec<String>,
    pub meta: BTreeMap<String, String>,
}

impl QuestionRecord {
    pub fn k_classes(&self) -> usize {
        self.class_correct.len()
    }

    pub fn pool_size(&self) -> usize {
        self.samples.len()
    }
}

/// Class counts over a sample subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSummary {
    /// Count per dense class id; zero for classes absent from the subset.
    pub counts: Vec<u32>,
    pub n_total: usize,
}

/// Counts over the given index subset, or over all samples.
pub fn count_summary(record: &QuestionRecord, index_subset: Option<&[usize]>) -> Result<CountSummary> {
    let mut counts = vec![0u32; record.k_classes()];
    let n_total = match index_subset {
        None => {
            for s in &record.samples {
                counts[s.class_id] += 1;
            }
            record.samples.len()
        }
        Some(idx) => {
            if idx.is_empty() {
                return Err(Error::EmptySubset);
            }
            for &i in idx {
                let s = record
                    .samples
                    .get(i)
                    .ok_or(Error::IndexOutOfRange { index: i, len: record.samples.len() })?;
                counts[s.class_id] += 1;
            }
            idx.len()
        }
    };
    Ok(CountSummary { counts, n_total })
}

// ---------------------------------------------------------------------------
// JSONL wire schema
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct RawSample {
    class: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    correct: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verbalized: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawRecord {
    question_id: String,
    samples: Vec<RawSample>,
    #[serde(skip_serializing_if = "Option::is_none")]
    class_correct: Option<BTreeMap<String, bool>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    meta: Option<BTreeMap<String, String>>,
}

/// A record dropped in lenient mode, with the reason.
#[derive(Debug, Clone)]
pub struct SkippedRecord {
    pub line: usize,
    pub reason: String,
}

/// Ingestion output: accepted records plus lenient-mode skip log.
#[derive(Debug, Default)]
pub struct IngestReport {
    pub records: Vec<QuestionRecord>,
    pub skipped: Vec<SkippedRecord>,
}

/// Reads one JSONL record per line.
///
/// In strict mode any malformed line, duplicate question id, or class
/// without a correctness label aborts with an error carrying the line
/// number; in lenient mode such records are skipped and logged.
pub fn ingest_records(path: &Path, schema_strict: bool) -> Result<IngestReport> {
    let file = std::fs::File::open(path)?;
    ingest_from_reader(BufReader::new(file), schema_strict)
}

pub fn ingest_from_reader<R: Read>(reader: BufReader<R>, schema_strict: bool) -> Result<IngestReport> {
    let mut report = IngestReport::default();
    let mut seen_ids = std::collections::HashSet::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line_no = line_no + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(&line, line_no) {
            Ok(record) => {
                if !seen_ids.insert(record.question_id.clone()) {
                    let err = Error::DuplicateQuestion {
                        line: line_no,
                        question_id: record.question_id.clone(),
                    };
                    if schema_strict {
                        return Err(err);
                    }
                    report.skipped.push(SkippedRecord { line: line_no, reason: err.to_string() });
                    continue;
                }
                report.records.push(record);
            }
            Err(err) => {
                if schema_strict {
                    return Err(err);
                }
                report.skipped.push(SkippedRecord { line: line_no, reason: err.to_string() });
            }
        }
    }
    Ok(report)
}

fn parse_record(line: &str, line_no: usize) -> Result<QuestionRecord> {
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| Error::Ingest {
        line: line_no,
        msg: e.to_string(),
    })?;
    if raw.samples.is_empty() {
        return Err(Error::Ingest {
            line: line_no,
            msg: format!("question `{}` has no samples", raw.question_id),
        });
    }

    // Dense re-indexing in order of first appearance.
    let mut label_to_id: BTreeMap<&str, usize> = BTreeMap::new();
    let mut class_labels: Vec<String> = Vec::new();
    let mut samples = Vec::with_capacity(raw.samples.len());
    for s in &raw.samples {
        let next = class_labels.len();
        let id = *label_to_id.entry(s.class.as_str()).or_insert_with(|| {
            class_labels.push(s.class.clone());
            next
        });
        samples.push(SemanticSample {
            class_id: id,
            graded_correct: s.correct,
            verbalized_raw: s.verbalized.clone(),
        });
    }

    // Correctness: record-level map first, per-sample majority as fallback.
    // Map entries for labels never sampled are dropped so that K equals the
    // number of distinct sampled classes.
    let mut class_correct = vec![None; class_labels.len()];
    if let Some(map) = &raw.class_correct {
        for (label, &ok) in map {
            if let Some(&id) = label_to_id.get(label.as_str()) {
                class_correct[id] = Some(ok);
            }
        }
    }
    for (id, slot) in class_correct.iter_mut().enumerate() {
        if slot.is_none() {
            *slot = majority_grade(&samples, id);
        }
    }
    let mut resolved = Vec::with_capacity(class_correct.len());
    for (id, slot) in class_correct.into_iter().enumerate() {
        match slot {
            Some(ok) => resolved.push(ok),
            None => {
                return Err(Error::MissingCorrectness {
                    line: line_no,
                    question_id: raw.question_id.clone(),
                    class_label: class_labels[id].clone(),
                })
            }
        }
    }

    Ok(QuestionRecord {
        question_id: raw.question_id,
        samples,
        class_correct: resolved,
        class_labels,
        meta: raw.meta.unwrap_or_default(),
    })
}

/// Majority vote over the class's graded samples; exact tie counts as
/// incorrect, and a class with no graded samples stays undecided.
fn majority_grade(samples: &[SemanticSample], class_id: usize) -> Option<bool> {
    let mut correct = 0usize;
    let mut graded = 0usize;
    for s in samples.iter().filter(|s| s.class_id == class_id) {
        if let Some(ok) = s.graded_correct {
            graded += 1;
            if ok {
                correct += 1;
            }
        }
    }
    if graded == 0 {
        None
    } else {
        Some(2 * correct > graded)
    }
}

/// Serializes records back to the JSONL wire schema (original labels).
pub fn export_records(records: &[QuestionRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        let raw = RawRecord {
            question_id: r.question_id.clone(),
            samples: r
                .samples
                .iter()
                .map(|s| RawSample {
                    class: r.class_labels[s.class_id].clone(),
                    correct: s.graded_correct,
                    verbalized: s.verbalized_raw.clone(),
                })
                .collect(),
            class_correct: Some(
                r.class_labels
                    .iter()
                    .cloned()
                    .zip(r.class_correct.iter().copied())
                    .collect(),
            ),
            meta: if r.meta.is_empty() { None } else { Some(r.meta.clone()) },
        };
        out.push_str(&serde_json::to_string(&raw)?);
        out.push('\n');
    }
    Ok(out)
}
