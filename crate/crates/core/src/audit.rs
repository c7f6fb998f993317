//! Append-only audit trail of control cycles.
//!
//! One JSON object per line, one line per diagnosis cycle. A log is
//! replayable when its controller is deterministic: [`replay_verify`]
//! recomputes every decision from the recorded macro statistics and prior
//! parameters and reports the records that disagree.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::control::{closed_loop_update, llm_mapping_decision, ControlConfig, ControlDecision, Rule};
use crate::diagnosis::{BackendKind, MacroStats};
use crate::experiment::Condition;
use crate::sim::DynamicsConfig;
use crate::PolicyParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditRecord {
    pub day: u32,
    pub condition: Condition,
    pub macro_stats: MacroStats,
    pub prior_params: PolicyParams,
    pub decision: ControlDecision,
    pub backend_kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_responses: Option<Vec<String>>,
    pub config_hash: String,
}

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error("audit integrity violation at day {day}: {reason}")]
    Integrity { day: u32, reason: String },
    #[error("malformed audit record on line {line}: {source}")]
    Malformed { line: usize, source: serde_json::Error },
    /// The line parses but is not byte-identical to how the record
    /// serializes, i.e. it was edited after being written.
    #[error("audit record on line {line} is not in canonical form")]
    NonCanonical { line: usize },
    #[error("audit I/O error on {path:?}: {source}")]
    Io { path: Option<PathBuf>, source: io::Error },
}

/// SHA-256 over the canonical JSON of both configs.
pub fn config_hash(control: &ControlConfig, dynamics: &DynamicsConfig) -> String {
    let canonical = serde_json::json!({ "control": control, "dynamics": dynamics }).to_string();
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

fn check_next(prev: Option<&AuditRecord>, record: &AuditRecord) -> Result<(), AuditError> {
    let Some(prev) = prev else { return Ok(()) };
    if record.day <= prev.day {
        return Err(AuditError::Integrity {
            day: record.day,
            reason: format!("day {} does not follow day {}", record.day, prev.day),
        });
    }
    if record.prior_params != prev.decision.new_params {
        return Err(AuditError::Integrity {
            day: record.day,
            reason: format!(
                "prior parameters {:?} differ from the previous decision's {:?}",
                record.prior_params, prev.decision.new_params
            ),
        });
    }
    Ok(())
}

/// Ordering and chain checks over a complete sequence of records.
pub fn check_integrity(records: &[AuditRecord]) -> Result<(), AuditError> {
    records.windows(2).try_for_each(|w| check_next(Some(&w[0]), &w[1]))
}

/// An audit log for one run, optionally mirrored line by line to a file.
#[derive(Debug, Default)]
pub struct AuditLog {
    records: Vec<AuditRecord>,
    sink: Option<(PathBuf, BufWriter<File>)>,
}

impl AuditLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Creates (or truncates) `path` and appends to it from then on.
    pub fn create(path: impl Into<PathBuf>) -> Result<Self, AuditError> {
        let path = path.into();
        let file = File::create(&path).map_err(|source| AuditError::Io {
            path: Some(path.clone()),
            source,
        })?;
        Ok(AuditLog {
            records: Vec::new(),
            sink: Some((path, BufWriter::new(file))),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.sink.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn records(&self) -> &[AuditRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<AuditRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Appends after checking day order and parameter chaining. File-backed
    /// logs are flushed per record so an aborted run keeps what it wrote.
    pub fn append(&mut self, record: AuditRecord) -> Result<(), AuditError> {
        check_next(self.records.last(), &record)?;
        if let Some((path, w)) = &mut self.sink {
            let io_err = |source| AuditError::Io {
                path: Some(path.clone()),
                source,
            };
            let line = serde_json::to_string(&record).expect("audit records always serialize");
            w.write_all(line.as_bytes()).map_err(io_err)?;
            w.write_all(b"\n").map_err(io_err)?;
            w.flush().map_err(io_err)?;
        }
        self.records.push(record);
        Ok(())
    }
}

pub fn to_ndjson(records: &[AuditRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("audit records always serialize"));
        out.push('\n');
    }
    out
}

/// Parses newline-delimited records and checks their integrity. Blank lines
/// are ignored. Every other line must be exactly the canonical encoding of
/// its record, so edits that keep the value (`0.0` to `0e0`, added spaces)
/// are still caught.
pub fn read_records<R: Read>(reader: R) -> Result<Vec<AuditRecord>, AuditError> {
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|source| AuditError::Io { path: None, source })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: AuditRecord =
            serde_json::from_str(&line).map_err(|source| AuditError::Malformed { line: idx + 1, source })?;
        if serde_json::to_string(&record).ok().as_deref() != Some(line.as_str()) {
            return Err(AuditError::NonCanonical { line: idx + 1 });
        }
        records.push(record);
    }
    check_integrity(&records)?;
    Ok(records)
}

pub fn read_file(path: impl AsRef<Path>) -> Result<Vec<AuditRecord>, AuditError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| AuditError::Io {
        path: Some(path.to_path_buf()),
        source,
    })?;
    read_records(file)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub index: usize,
    pub day: u32,
    pub recorded: ControlDecision,
    pub recomputed: Option<ControlDecision>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    /// Every record matches its recomputation.
    Verified {
        records: usize,
    },
    Mismatches(Vec<Mismatch>),
    /// The controller is not a function of the recorded inputs; the raw
    /// proposals are returned for inspection.
    NotReplayable {
        condition: Condition,
        raw_proposals: Vec<String>,
    },
}

impl Verdict {
    pub fn is_verified(&self) -> bool {
        matches!(self, Verdict::Verified { .. })
    }
}

/// Recomputes each record's decision from its macro statistics and prior
/// parameters.
pub fn replay_verify(records: &[AuditRecord], config: &ControlConfig) -> Verdict {
    if let Some(bb) = records.iter().find(|r| r.condition == Condition::BlackBox) {
        let raw_proposals = records
            .iter()
            .flat_map(|r| r.decision.fired_rules.iter())
            .filter(|f| matches!(f.rule, Rule::BlackBoxProposal | Rule::BlackBoxRejected))
            .filter_map(|f| f.detail.clone())
            .collect();
        return Verdict::NotReplayable {
            condition: bb.condition,
            raw_proposals,
        };
    }

    let mismatches: Vec<Mismatch> = records
        .iter()
        .enumerate()
        .filter_map(|(index, r)| {
            let recomputed = match r.condition {
                Condition::ClosedLoop => Some(closed_loop_update(&r.macro_stats, &r.prior_params, config)),
                Condition::LlmMapping => Some(llm_mapping_decision(&r.macro_stats, &r.prior_params)),
                // no controller runs in these conditions
                Condition::Baseline | Condition::FixedPolicy | Condition::BlackBox => None,
            };
            (recomputed.as_ref() != Some(&r.decision)).then(|| Mismatch {
                index,
                day: r.day,
                recorded: r.decision.clone(),
                recomputed,
            })
        })
        .collect();

    if mismatches.is_empty() {
        Verdict::Verified { records: records.len() }
    } else {
        Verdict::Mismatches(mismatches)
    }
}
