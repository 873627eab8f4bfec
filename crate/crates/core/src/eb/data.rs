//! p-value records: CSV parsing, the censoring protocol and conversion to
//! squared z-values grouped by study.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, LineIssue, ParseError, Result};
use crate::kernel::abs_z_from_two_sided_p;

/// Records with a two-sided p at or below this value are not collected.
pub const CENSOR_P: f64 = 0.001;

/// |z| values below this are raised to it; the shape-1/2 Gamma density is
/// infinite at zero.
pub const Z_ABS_FLOOR: f64 = 1e-8;

/// One extracted two-sided p-value, converted to |z| and z².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZRecord {
    pub study_id: String,
    pub p_value: f64,
    pub z_abs: f64,
    pub z_sq: f64,
    /// Set when `z_abs` was raised to [`Z_ABS_FLOOR`].
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub floored: bool,
}

impl ZRecord {
    pub fn from_p(study_id: impl Into<String>, p_value: f64) -> Result<Self> {
        if !(p_value > 0.0 && p_value <= 1.0) {
            return Err(Error::domain(format!("p-value must lie in (0, 1], got {p_value}")));
        }
        let raw = abs_z_from_two_sided_p(p_value)?;
        let floored = raw < Z_ABS_FLOOR;
        let z_abs = raw.max(Z_ABS_FLOOR);
        Ok(Self {
            study_id: study_id.into(),
            p_value,
            z_abs,
            z_sq: z_abs * z_abs,
            floored,
        })
    }
}

/// Records sharing a study identifier, with the sufficient statistics the
/// shape-1/2 Gamma likelihood needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyGroup {
    pub study_id: String,
    pub records: Vec<ZRecord>,
    #[serde(skip)]
    stats: GroupStats,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct GroupStats {
    pub n: f64,
    pub sum_z_sq: f64,
    pub sum_ln_z_sq: f64,
}

impl StudyGroup {
    pub fn new(study_id: impl Into<String>, records: Vec<ZRecord>) -> Result<Self> {
        let study_id = study_id.into();
        if records.is_empty() {
            return Err(Error::Validation(format!("study {study_id} has no records")));
        }
        if let Some(r) = records.iter().find(|r| r.study_id != study_id) {
            return Err(Error::Validation(format!(
                "record for study {} placed in group {study_id}",
                r.study_id
            )));
        }
        let stats = GroupStats {
            n: records.len() as f64,
            sum_z_sq: records.iter().map(|r| r.z_sq).sum(),
            sum_ln_z_sq: records.iter().map(|r| r.z_sq.ln()).sum(),
        };
        Ok(Self { study_id, records, stats })
    }

    pub(crate) fn stats(&self) -> GroupStats {
        self.stats
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Fit-ready data: study groups ordered by study identifier.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub groups: Vec<StudyGroup>,
}

impl Dataset {
    /// Group records by study. Groups are ordered by identifier; records keep
    /// their input order within a group.
    pub fn from_records(records: Vec<ZRecord>) -> Result<Self> {
        let mut by_study: BTreeMap<String, Vec<ZRecord>> = BTreeMap::new();
        for r in records {
            by_study.entry(r.study_id.clone()).or_default().push(r);
        }
        let groups = by_study
            .into_iter()
            .map(|(id, recs)| StudyGroup::new(id, recs))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { groups })
    }

    pub fn n_studies(&self) -> usize {
        self.groups.len()
    }

    pub fn n_records(&self) -> usize {
        self.groups.iter().map(|g| g.len()).sum()
    }

    pub fn records(&self) -> impl Iterator<Item = &ZRecord> {
        self.groups.iter().flat_map(|g| g.records.iter())
    }

    pub fn mean_z_sq(&self) -> f64 {
        let n = self.n_records();
        if n == 0 {
            return f64::NAN;
        }
        self.records().map(|r| r.z_sq).sum::<f64>() / n as f64
    }
}

/// A row of input before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    /// 1-based line in the source file (header is line 1), or the 1-based
    /// position for records that did not come from a file.
    pub line: u64,
    pub study_id: String,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    CensoredByProtocol,
    Invalid,
}

impl std::fmt::Display for DropReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DropReason::CensoredByProtocol => "censored-by-protocol",
            DropReason::Invalid => "invalid",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedRecord {
    pub line: u64,
    pub study_id: String,
    pub p_value: f64,
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestOutcome {
    pub dataset: Dataset,
    pub dropped: Vec<DroppedRecord>,
    pub warnings: Vec<String>,
}

impl IngestOutcome {
    pub fn count_dropped(&self, reason: DropReason) -> usize {
        self.dropped.iter().filter(|d| d.reason == reason).count()
    }
}

/// Apply the collection protocol: drop p ≤ 0.001 as censored, drop p
/// outside (0, 1] as invalid, convert the rest and group by study. p = 1
/// (a rounded p-value) is kept with |z| raised to the floor.
pub fn ingest(records: &[RawRecord]) -> IngestOutcome {
    let mut kept = Vec::with_capacity(records.len());
    let mut dropped = Vec::new();
    let mut warnings = Vec::new();
    for raw in records {
        let reason = if !(raw.p_value > 0.0 && raw.p_value <= 1.0) {
            Some(DropReason::Invalid)
        } else if raw.p_value <= CENSOR_P {
            Some(DropReason::CensoredByProtocol)
        } else {
            None
        };
        if let Some(reason) = reason {
            dropped.push(DroppedRecord {
                line: raw.line,
                study_id: raw.study_id.clone(),
                p_value: raw.p_value,
                reason,
            });
            continue;
        }
        match ZRecord::from_p(raw.study_id.clone(), raw.p_value) {
            Ok(z) => {
                if z.floored {
                    warnings.push(format!(
                        "line {}: |z| for p = {} raised to {Z_ABS_FLOOR:e}",
                        raw.line, raw.p_value
                    ));
                }
                kept.push(z);
            }
            Err(_) => dropped.push(DroppedRecord {
                line: raw.line,
                study_id: raw.study_id.clone(),
                p_value: raw.p_value,
                reason: DropReason::Invalid,
            }),
        }
    }
    let dataset = Dataset::from_records(kept).expect("grouping by identifier yields consistent groups");
    IngestOutcome { dataset, dropped, warnings }
}

/// Convenience wrapper over [`ingest`] for in-memory `(study_id, p)` pairs.
pub fn ingest_pairs<S: AsRef<str>>(pairs: &[(S, f64)]) -> IngestOutcome {
    let raw: Vec<RawRecord> = pairs
        .iter()
        .enumerate()
        .map(|(i, (id, p))| RawRecord {
            line: i as u64 + 1,
            study_id: id.as_ref().to_owned(),
            p_value: *p,
        })
        .collect();
    ingest(&raw)
}

/// Counts `\n`, `\r\n` and lone `\r`, which all end a CSV record.
fn line_breaks(bytes: &[u8]) -> u64 {
    let mut n = 0;
    for (i, &c) in bytes.iter().enumerate() {
        if c == b'\n' || (c == b'\r' && bytes.get(i + 1) != Some(&b'\n')) {
            n += 1;
        }
    }
    n
}

/// Parse `study_id,p_value` CSV. Every malformed line is reported; values
/// that parse as numbers are returned even when out of range, so that
/// [`ingest`] can account for them.
pub fn parse_csv<R: Read>(mut input: R) -> std::result::Result<Vec<RawRecord>, ParseError> {
    let mut data = Vec::new();
    if let Err(e) = input.read_to_end(&mut data) {
        return Err(ParseError { issues: vec![LineIssue { line: 1, message: e.to_string() }] });
    }
    let line_at = |byte: u64| {
        let mut at = (byte as usize).min(data.len());
        while at < data.len() && matches!(data[at], b'\r' | b'\n') {
            at += 1;
        }
        1 + line_breaks(&data[..at])
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(data.as_slice());

    let mut issues = Vec::new();
    let mut out = Vec::new();
    let mut saw_header = false;

    for (idx, row) in reader.byte_records().enumerate() {
        let fallback_line = idx as u64 + 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| line_at(p.byte())).unwrap_or(fallback_line);
                issues.push(LineIssue { line, message: e.to_string() });
                // a reader error is not recoverable past this point
                break;
            }
        };
        let line = row.position().map(|p| line_at(p.byte())).unwrap_or(fallback_line);
        let fields: Vec<&[u8]> = row.iter().collect();
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        let texts: std::result::Result<Vec<&str>, _> = fields.iter().map(|f| std::str::from_utf8(f)).collect();
        let texts = match texts {
            Ok(t) => t,
            Err(_) => {
                issues.push(LineIssue { line, message: "invalid UTF-8".into() });
                continue;
            }
        };
        if !saw_header {
            saw_header = true;
            let first = texts[0].trim_start_matches('\u{feff}');
            if texts.len() != 2 || first != "study_id" || texts[1] != "p_value" {
                issues.push(LineIssue {
                    line,
                    message: format!("expected header `study_id,p_value`, found `{}`", texts.join(",")),
                });
                return Err(ParseError { issues });
            }
            continue;
        }
        if texts.len() != 2 {
            issues.push(LineIssue {
                line,
                message: format!("expected 2 fields, found {}", texts.len()),
            });
            continue;
        }
        if texts[0].is_empty() {
            issues.push(LineIssue { line, message: "empty study_id".into() });
            continue;
        }
        match texts[1].parse::<f64>() {
            Ok(p) => out.push(RawRecord { line, study_id: texts[0].to_owned(), p_value: p }),
            Err(_) => issues.push(LineIssue {
                line,
                message: format!("p_value `{}` is not a decimal number", texts[1]),
            }),
        }
    }
    if !saw_header {
        issues.push(LineIssue { line: 1, message: "missing header `study_id,p_value`".into() });
    }
    if issues.is_empty() {
        Ok(out)
    } else {
        Err(ParseError { issues })
    }
}

/// Write records as `study_id,p_value` CSV. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv<W: std::io::Write>(out: W, rows: impl IntoIterator<Item = (String, f64)>) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["study_id", "p_value"])?;
    for (id, p) in rows {
        w.write_record([id, format!("{p:?}")])?;
    }
    w.flush()
}
