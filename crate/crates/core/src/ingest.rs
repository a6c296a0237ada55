//! Parsing and validation of the three input files (academic events, degree
//! registrations, curriculum catalogue), plus the structural derivation of
//! the CBC subject set.
//!
//! Parsing is strict per row but fault-tolerant per file: a malformed row is
//! rejected with a reason code and parsing continues; only a missing file,
//! a header mismatch or a catalogue conflict is fatal. Identical duplicate
//! rows are dropped and counted.

use crate::types::{
    DateError, EventKind, ExamResult, FieldGroup, MajorId, StudentId, SubjectCode, YearMonth,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

/// One enrolment or examination record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcademicEvent {
    pub student_id: StudentId,
    pub major_id: MajorId,
    pub subject_code: SubjectCode,
    pub kind: EventKind,
    pub date: YearMonth,
    pub result: ExamResult,
    pub grade: Option<f64>,
}

impl AcademicEvent {
    fn dedup_key(&self) -> (StudentId, MajorId, SubjectCode, EventKind, YearMonth, ExamResult, Option<u64>) {
        (
            self.student_id.clone(),
            self.major_id.clone(),
            self.subject_code.clone(),
            self.kind,
            self.date,
            self.result,
            self.grade.map(f64::to_bits),
        )
    }
}

/// One student-major degree registration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DegreeRegistration {
    pub student_id: StudentId,
    pub major_id: MajorId,
    pub reg_date: YearMonth,
}

/// A subject's role inside one degree programme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub subject_code: SubjectCode,
    pub subject_name: String,
    pub field_group: FieldGroup,
    pub major_id: MajorId,
    pub year_level: u32,
}

/// Row-level rejection reasons. Serialised as stable upper-snake codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectReason {
    MissingField,
    InvalidDate,
    InvalidMonth,
    InvalidYear,
    InvalidKind,
    InvalidResult,
    ExamWithoutResult,
    EnrolWithResult,
    EnrolWithGrade,
    InvalidGrade,
    GradeOutOfRange,
    InvalidFieldGroup,
    InvalidYearLevel,
}

impl fmt::Display for RejectReason {
    fmt_via_serde!();
}

macro_rules! fmt_via_serde {
    () => {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            let s = serde_json::to_string(self).map_err(|_| fmt::Error)?;
            f.write_str(s.trim_matches('"'))
        }
    };
}
use fmt_via_serde;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowReject {
    pub line: u64,
    pub reason: RejectReason,
}

/// Outcome of a parse or consistency pass. `rows_read` always equals
/// `rows_accepted + rows_rejected`; accepted duplicate rows that were folded
/// away are counted in `duplicates_removed`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rows_read: u64,
    pub rows_accepted: u64,
    pub rows_rejected: u64,
    pub duplicates_removed: u64,
    pub rejects: Vec<RowReject>,
    pub students_flagged_inconsistent: BTreeSet<StudentId>,
}

impl ValidationReport {
    fn reject(&mut self, line: u64, reason: RejectReason) {
        self.rows_rejected += 1;
        self.rejects.push(RowReject { line, reason });
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: header mismatch, missing columns {missing:?}")]
    HeaderMismatch { path: PathBuf, missing: Vec<String> },
    #[error(
        "catalogue conflict for subject {subject} in major {major}: lines {first_line} and {second_line} disagree"
    )]
    DuplicateConflict {
        subject: SubjectCode,
        major: MajorId,
        first_line: u64,
        second_line: u64,
    },
    #[error("empty catalogue")]
    EmptyCatalog,
    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

/// Column-name remapping for the events file, plus the accepted grade scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EventsSchema {
    pub student_id: String,
    pub major_id: String,
    pub subject_code: String,
    pub kind: String,
    pub date: String,
    pub result: String,
    pub grade: String,
    pub grade_min: f64,
    pub grade_max: f64,
}

impl Default for EventsSchema {
    fn default() -> Self {
        Self {
            student_id: "student_id".into(),
            major_id: "major_id".into(),
            subject_code: "subject_code".into(),
            kind: "kind".into(),
            date: "date".into(),
            result: "result".into(),
            grade: "grade".into(),
            grade_min: 0.0,
            grade_max: 10.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RegistrationsSchema {
    pub student_id: String,
    pub major_id: String,
    pub reg_date: String,
}

impl Default for RegistrationsSchema {
    fn default() -> Self {
        Self {
            student_id: "student_id".into(),
            major_id: "major_id".into(),
            reg_date: "reg_date".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CatalogSchema {
    pub subject_code: String,
    pub subject_name: String,
    pub field_group: String,
    pub major_id: String,
    pub year_level: String,
}

impl Default for CatalogSchema {
    fn default() -> Self {
        Self {
            subject_code: "subject_code".into(),
            subject_name: "subject_name".into(),
            field_group: "field_group".into(),
            major_id: "major_id".into(),
            year_level: "year_level".into(),
        }
    }
}

/// Schemas for all three inputs, as carried in the run configuration.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchemas {
    pub events: EventsSchema,
    pub registrations: RegistrationsSchema,
    pub catalog: CatalogSchema,
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new().flexible(true).from_reader(file))
}

/// Resolve logical columns to indices in the header, or fail fatally.
fn column_indices(
    path: &Path,
    reader: &mut csv::Reader<std::fs::File>,
    wanted: &[&str],
) -> Result<Vec<usize>, IngestError> {
    let headers = reader.headers().map_err(|source| IngestError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    let mut indices = Vec::with_capacity(wanted.len());
    let mut missing = Vec::new();
    for name in wanted {
        match headers.iter().position(|h| h == *name) {
            Some(i) => indices.push(i),
            None => missing.push((*name).to_string()),
        }
    }
    if !missing.is_empty() {
        return Err(IngestError::HeaderMismatch {
            path: path.to_path_buf(),
            missing,
        });
    }
    Ok(indices)
}

fn field<'r>(record: &'r csv::StringRecord, idx: usize) -> Option<&'r str> {
    record.get(idx).map(str::trim)
}

fn parse_date(s: &str) -> Result<YearMonth, RejectReason> {
    s.parse::<YearMonth>().map_err(|e| match e {
        DateError::InvalidMonth(_) => RejectReason::InvalidMonth,
        DateError::InvalidYear(_) => RejectReason::InvalidYear,
        DateError::InvalidFormat(_) => RejectReason::InvalidDate,
    })
}

/// Parse the events file. Row order is preserved; identical duplicate rows
/// are folded with a count.
pub fn parse_events(
    path: &Path,
    schema: &EventsSchema,
) -> Result<(Vec<AcademicEvent>, ValidationReport), IngestError> {
    let mut reader = open_reader(path)?;
    let cols = column_indices(
        path,
        &mut reader,
        &[
            &schema.student_id,
            &schema.major_id,
            &schema.subject_code,
            &schema.kind,
            &schema.date,
            &schema.result,
            &schema.grade,
        ],
    )?;
    let mut events = Vec::new();
    let mut report = ValidationReport::default();
    let mut seen = HashSet::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(source) => {
                return Err(IngestError::Csv {
                    path: path.to_path_buf(),
                    source,
                })
            }
        }
        report.rows_read += 1;
        let line = record.position().map_or(0, |p| p.line());
        match parse_event_row(&record, &cols, schema) {
            Ok(event) => {
                report.rows_accepted += 1;
                if seen.insert(event.dedup_key()) {
                    events.push(event);
                } else {
                    report.duplicates_removed += 1;
                }
            }
            Err(reason) => report.reject(line, reason),
        }
    }
    Ok((events, report))
}

fn parse_event_row(
    record: &csv::StringRecord,
    cols: &[usize],
    schema: &EventsSchema,
) -> Result<AcademicEvent, RejectReason> {
    let student = field(record, cols[0]).filter(|s| !s.is_empty());
    let major = field(record, cols[1]).filter(|s| !s.is_empty());
    let subject = field(record, cols[2]).filter(|s| !s.is_empty());
    let kind_raw = field(record, cols[3]).filter(|s| !s.is_empty());
    let date_raw = field(record, cols[4]).filter(|s| !s.is_empty());
    let (Some(student), Some(major), Some(subject), Some(kind_raw), Some(date_raw)) =
        (student, major, subject, kind_raw, date_raw)
    else {
        return Err(RejectReason::MissingField);
    };
    let result_raw = field(record, cols[5]).ok_or(RejectReason::MissingField)?;
    let grade_raw = field(record, cols[6]).ok_or(RejectReason::MissingField)?;

    let kind = match kind_raw {
        "ENROL" => EventKind::Enrol,
        "EXAM" => EventKind::Exam,
        _ => return Err(RejectReason::InvalidKind),
    };
    let date = parse_date(date_raw)?;
    let result = match result_raw {
        "PASS" => ExamResult::Pass,
        "FAIL" => ExamResult::Fail,
        "NONE" | "" => ExamResult::None,
        _ => return Err(RejectReason::InvalidResult),
    };
    let grade = if grade_raw.is_empty() {
        None
    } else {
        let g: f64 = grade_raw.parse().map_err(|_| RejectReason::InvalidGrade)?;
        if !g.is_finite() {
            return Err(RejectReason::InvalidGrade);
        }
        if g < schema.grade_min || g > schema.grade_max {
            return Err(RejectReason::GradeOutOfRange);
        }
        Some(g)
    };
    match kind {
        EventKind::Exam if result == ExamResult::None => {
            return Err(RejectReason::ExamWithoutResult)
        }
        EventKind::Enrol if result != ExamResult::None => {
            return Err(RejectReason::EnrolWithResult)
        }
        EventKind::Enrol if grade.is_some() => return Err(RejectReason::EnrolWithGrade),
        _ => {}
    }
    Ok(AcademicEvent {
        student_id: StudentId::new(student),
        major_id: MajorId::new(major),
        subject_code: SubjectCode::new(subject),
        kind,
        date,
        result,
        grade,
    })
}

/// Parse the degree-registrations file, deduplicating identical rows.
pub fn parse_registrations(
    path: &Path,
    schema: &RegistrationsSchema,
) -> Result<(Vec<DegreeRegistration>, ValidationReport), IngestError> {
    let mut reader = open_reader(path)?;
    let cols = column_indices(
        path,
        &mut reader,
        &[&schema.student_id, &schema.major_id, &schema.reg_date],
    )?;
    let mut regs = Vec::new();
    let mut report = ValidationReport::default();
    let mut seen = HashSet::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(source) => {
                return Err(IngestError::Csv {
                    path: path.to_path_buf(),
                    source,
                })
            }
        }
        report.rows_read += 1;
        let line = record.position().map_or(0, |p| p.line());
        let student = field(&record, cols[0]).filter(|s| !s.is_empty());
        let major = field(&record, cols[1]).filter(|s| !s.is_empty());
        let date_raw = field(&record, cols[2]).filter(|s| !s.is_empty());
        let (Some(student), Some(major), Some(date_raw)) = (student, major, date_raw) else {
            report.reject(line, RejectReason::MissingField);
            continue;
        };
        match parse_date(date_raw) {
            Ok(reg_date) => {
                report.rows_accepted += 1;
                let reg = DegreeRegistration {
                    student_id: StudentId::new(student),
                    major_id: MajorId::new(major),
                    reg_date,
                };
                if seen.insert(reg.clone()) {
                    regs.push(reg);
                } else {
                    report.duplicates_removed += 1;
                }
            }
            Err(reason) => report.reject(line, reason),
        }
    }
    Ok((regs, report))
}

/// Parse the curriculum catalogue. A repeated (subject, major) pair with any
/// differing field is a fatal conflict reported with both line numbers.
pub fn parse_catalog(
    path: &Path,
    schema: &CatalogSchema,
) -> Result<(Vec<CatalogEntry>, ValidationReport), IngestError> {
    let mut reader = open_reader(path)?;
    let cols = column_indices(
        path,
        &mut reader,
        &[
            &schema.subject_code,
            &schema.subject_name,
            &schema.field_group,
            &schema.major_id,
            &schema.year_level,
        ],
    )?;
    let mut entries: Vec<CatalogEntry> = Vec::new();
    let mut report = ValidationReport::default();
    let mut seen: HashMap<(SubjectCode, MajorId), (u64, usize)> = HashMap::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(source) => {
                return Err(IngestError::Csv {
                    path: path.to_path_buf(),
                    source,
                })
            }
        }
        report.rows_read += 1;
        let line = record.position().map_or(0, |p| p.line());
        let subject = field(&record, cols[0]).filter(|s| !s.is_empty());
        let name = field(&record, cols[1]);
        let group_raw = field(&record, cols[2]).filter(|s| !s.is_empty());
        let major = field(&record, cols[3]).filter(|s| !s.is_empty());
        let level_raw = field(&record, cols[4]).filter(|s| !s.is_empty());
        let (Some(subject), Some(name), Some(group_raw), Some(major), Some(level_raw)) =
            (subject, name, group_raw, major, level_raw)
        else {
            report.reject(line, RejectReason::MissingField);
            continue;
        };
        let Some(field_group) = FieldGroup::parse(group_raw) else {
            report.reject(line, RejectReason::InvalidFieldGroup);
            continue;
        };
        let year_level: u32 = match level_raw.parse() {
            Ok(l) if l >= 1 => l,
            _ => {
                report.reject(line, RejectReason::InvalidYearLevel);
                continue;
            }
        };
        report.rows_accepted += 1;
        let entry = CatalogEntry {
            subject_code: SubjectCode::new(subject),
            subject_name: name.to_string(),
            field_group,
            major_id: MajorId::new(major),
            year_level,
        };
        let key = (entry.subject_code.clone(), entry.major_id.clone());
        match seen.get(&key) {
            None => {
                seen.insert(key, (line, entries.len()));
                entries.push(entry);
            }
            Some(&(first_line, idx)) => {
                if entries[idx] == entry {
                    report.duplicates_removed += 1;
                } else {
                    return Err(IngestError::DuplicateConflict {
                        subject: entry.subject_code,
                        major: entry.major_id,
                        first_line,
                        second_line: line,
                    });
                }
            }
        }
    }
    Ok((entries, report))
}

/// Metadata for one subject in the CBC set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbcSubjectInfo {
    pub field_group: FieldGroup,
    /// Majors in whose curriculum the subject sits at year level 1.
    pub level1_majors: BTreeSet<MajorId>,
    /// All majors whose curriculum contains the subject at any level.
    pub member_majors: BTreeSet<MajorId>,
}

/// The structurally derived CBC subject set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CbcSubjectSet {
    pub subjects: BTreeMap<SubjectCode, CbcSubjectInfo>,
}

impl CbcSubjectSet {
    pub fn contains(&self, subject: &SubjectCode) -> bool {
        self.subjects.contains_key(subject)
    }

    pub fn get(&self, subject: &SubjectCode) -> Option<&CbcSubjectInfo> {
        self.subjects.get(subject)
    }

    pub fn codes(&self) -> impl Iterator<Item = &SubjectCode> {
        self.subjects.keys()
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }
}

/// Derive the CBC subject set: year level 1 somewhere, shared by at least
/// two majors, foundational field group (OTHER only via the whitelist).
pub fn classify_cbc_subjects(
    catalog: &[CatalogEntry],
    whitelist: &BTreeSet<SubjectCode>,
) -> Result<CbcSubjectSet, IngestError> {
    if catalog.is_empty() {
        return Err(IngestError::EmptyCatalog);
    }
    #[derive(Default)]
    struct Acc {
        level1: BTreeSet<MajorId>,
        members: BTreeSet<MajorId>,
        groups: BTreeMap<MajorId, FieldGroup>,
    }
    let mut by_subject: BTreeMap<SubjectCode, Acc> = BTreeMap::new();
    for entry in catalog {
        let acc = by_subject.entry(entry.subject_code.clone()).or_default();
        acc.members.insert(entry.major_id.clone());
        acc.groups.insert(entry.major_id.clone(), entry.field_group);
        if entry.year_level == 1 {
            acc.level1.insert(entry.major_id.clone());
        }
    }
    let mut set = CbcSubjectSet::default();
    for (code, acc) in by_subject {
        let shared = acc.members.len() >= 2;
        let has_level1 = !acc.level1.is_empty();
        let foundational = acc.groups.values().any(|g| *g != FieldGroup::Other)
            || whitelist.contains(&code);
        if has_level1 && shared && foundational {
            // Metadata field group: taken from the lowest-major level-1 entry.
            let field_group = acc
                .level1
                .iter()
                .find_map(|m| acc.groups.get(m).copied())
                .unwrap_or(FieldGroup::Other);
            set.subjects.insert(
                code,
                CbcSubjectInfo {
                    field_group,
                    level1_majors: acc.level1,
                    member_majors: acc.members,
                },
            );
        }
    }
    Ok(set)
}

/// Indexed catalogue with per-(subject, major) year-level lookups.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    entries: Vec<CatalogEntry>,
    by_pair: HashMap<(SubjectCode, MajorId), usize>,
}

impl Catalog {
    /// Index a deduplicated entry list. Conflicting duplicates are rejected
    /// the same way `parse_catalog` rejects them (without line numbers).
    pub fn new(entries: Vec<CatalogEntry>) -> Result<Self, IngestError> {
        let mut by_pair = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            let key = (e.subject_code.clone(), e.major_id.clone());
            if let Some(&prev) = by_pair.get(&key) {
                let prev: usize = prev;
                if entries[prev] != *e {
                    return Err(IngestError::DuplicateConflict {
                        subject: e.subject_code.clone(),
                        major: e.major_id.clone(),
                        first_line: 0,
                        second_line: 0,
                    });
                }
            } else {
                by_pair.insert(key, i);
            }
        }
        Ok(Self { entries, by_pair })
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn year_level(&self, subject: &SubjectCode, major: &MajorId) -> Option<u32> {
        self.by_pair
            .get(&(subject.clone(), major.clone()))
            .map(|&i| self.entries[i].year_level)
    }

    /// Upper cycle means year level >= 2 for that specific major.
    pub fn is_upper_cycle(&self, subject: &SubjectCode, major: &MajorId) -> bool {
        self.year_level(subject, major).is_some_and(|l| l >= 2)
    }
}

/// Report-only cross-file consistency pass. A student is flagged when their
/// examination activity ends before their first enrolment (a reversed date
/// pair) or when they have events earlier than `grace_months` before their
/// first registration. Flagged students stay in descriptives and are
/// excluded from survival models downstream.
pub fn validate_consistency(
    events: &[AcademicEvent],
    registrations: &[DegreeRegistration],
    grace_months: i32,
) -> ValidationReport {
    #[derive(Default)]
    struct Span {
        first_enrol: Option<YearMonth>,
        last_exam: Option<YearMonth>,
        first_event: Option<YearMonth>,
    }
    let mut spans: HashMap<&StudentId, Span> = HashMap::new();
    for e in events {
        let span = spans.entry(&e.student_id).or_default();
        span.first_event = Some(span.first_event.map_or(e.date, |d| d.min(e.date)));
        match e.kind {
            EventKind::Enrol => {
                span.first_enrol = Some(span.first_enrol.map_or(e.date, |d| d.min(e.date)));
            }
            EventKind::Exam => {
                span.last_exam = Some(span.last_exam.map_or(e.date, |d| d.max(e.date)));
            }
        }
    }
    let mut first_reg: HashMap<&StudentId, YearMonth> = HashMap::new();
    for r in registrations {
        first_reg
            .entry(&r.student_id)
            .and_modify(|d| *d = (*d).min(r.reg_date))
            .or_insert(r.reg_date);
    }
    let mut report = ValidationReport::default();
    for (student, span) in &spans {
        let reversed = matches!(
            (span.last_exam, span.first_enrol),
            (Some(exam), Some(enrol)) if exam < enrol
        );
        let before_registration = match (span.first_event, first_reg.get(student)) {
            (Some(event), Some(reg)) => event.index() < reg.index() - grace_months,
            _ => false,
        };
        if reversed || before_registration {
            report
                .students_flagged_inconsistent
                .insert((*student).clone());
        }
    }
    report
}

// --- canonical CSV writers (used by the synthetic generator and tests) ---

fn fmt_grade(grade: Option<f64>) -> String {
    grade.map_or(String::new(), |g| g.to_string())
}

pub fn write_events_csv(path: &Path, events: &[AcademicEvent]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_path(path).map_err(|source| IngestError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    let io_err = |source| IngestError::Csv {
        path: path.to_path_buf(),
        source,
    };
    w.write_record([
        "student_id",
        "major_id",
        "subject_code",
        "kind",
        "date",
        "result",
        "grade",
    ])
    .map_err(io_err)?;
    for e in events {
        w.write_record([
            e.student_id.as_str(),
            e.major_id.as_str(),
            e.subject_code.as_str(),
            e.kind.as_str(),
            &e.date.to_string(),
            e.result.as_str(),
            &fmt_grade(e.grade),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_registrations_csv(
    path: &Path,
    registrations: &[DegreeRegistration],
) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_path(path).map_err(|source| IngestError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    let io_err = |source| IngestError::Csv {
        path: path.to_path_buf(),
        source,
    };
    w.write_record(["student_id", "major_id", "reg_date"])
        .map_err(io_err)?;
    for r in registrations {
        w.write_record([
            r.student_id.as_str(),
            r.major_id.as_str(),
            &r.reg_date.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_catalog_csv(path: &Path, entries: &[CatalogEntry]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_path(path).map_err(|source| IngestError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    let io_err = |source| IngestError::Csv {
        path: path.to_path_buf(),
        source,
    };
    w.write_record([
        "subject_code",
        "subject_name",
        "field_group",
        "major_id",
        "year_level",
    ])
    .map_err(io_err)?;
    for e in entries {
        w.write_record([
            e.subject_code.as_str(),
            &e.subject_name,
            e.field_group.as_str(),
            e.major_id.as_str(),
            &e.year_level.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    const EVENTS_HEADER: &str = "student_id,major_id,subject_code,kind,date,result,grade\n";

    #[test]
    fn single_valid_exam_row() {
        let f = write_temp(&format!("{EVENTS_HEADER}s1,mA,CALC1,EXAM,2010-07,PASS,7\n"));
        let (events, report) = parse_events(f.path(), &EventsSchema::default()).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(report.rows_read, 1);
        assert_eq!(report.rows_accepted, 1);
        assert_eq!(report.rows_rejected, 0);
        let e = &events[0];
        assert_eq!(e.kind, EventKind::Exam);
        assert_eq!(e.result, ExamResult::Pass);
        assert_eq!(e.grade, Some(7.0));
        assert_eq!(e.date, YearMonth::new(2010, 7).unwrap());
    }

    #[test]
    fn bad_month_rejected_with_reason() {
        let f = write_temp(&format!("{EVENTS_HEADER}s1,mA,CALC1,EXAM,2020-13,PASS,\n"));
        let (events, report) = parse_events(f.path(), &EventsSchema::default()).unwrap();
        assert!(events.is_empty());
        assert_eq!(report.rows_rejected, 1);
        assert_eq!(report.rejects[0].reason, RejectReason::InvalidMonth);
        assert_eq!(report.rejects[0].line, 2);
        assert_eq!(report.rows_read, report.rows_accepted + report.rows_rejected);
    }

    #[test]
    fn row_level_violations_do_not_stop_the_parse() {
        let body = "\
s1,mA,CALC1,EXAM,2010-03,,\n\
s2,mA,CALC1,EXAM,2010-03,PASS,11\n\
s3,mA,CALC1,ENROL,2010-03,PASS,\n\
s4,mA,CALC1,ENROL,2010-03,NONE,5\n\
s5,mA,CALC1,AUDIT,2010-03,NONE,\n\
s6,mA,CALC1,EXAM,2010-03,MAYBE,\n\
s7,mA,CALC1,EXAM,banana,PASS,\n\
s8,mA,CALC1,EXAM,2010-03,PASS,x\n\
s9,mA,CALC1,EXAM,1979-03,PASS,\n\
s10,mA,CALC1,EXAM,2010-04,FAIL,2\n";
        let f = write_temp(&format!("{EVENTS_HEADER}{body}"));
        let (events, report) = parse_events(f.path(), &EventsSchema::default()).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(report.rows_read, 10);
        assert_eq!(report.rows_rejected, 9);
        let reasons: Vec<RejectReason> = report.rejects.iter().map(|r| r.reason).collect();
        assert_eq!(
            reasons,
            vec![
                RejectReason::ExamWithoutResult,
                RejectReason::GradeOutOfRange,
                RejectReason::EnrolWithResult,
                RejectReason::EnrolWithGrade,
                RejectReason::InvalidKind,
                RejectReason::InvalidResult,
                RejectReason::InvalidDate,
                RejectReason::InvalidGrade,
                RejectReason::InvalidYear,
            ]
        );
    }

    #[test]
    fn missing_file_is_fatal() {
        let err = parse_events(Path::new("/nonexistent/events.csv"), &EventsSchema::default());
        assert!(matches!(err, Err(IngestError::Io { .. })));
    }

    #[test]
    fn header_mismatch_is_fatal() {
        let f = write_temp("sid,major_id,subject_code,kind,date,result,grade\n");
        let err = parse_events(f.path(), &EventsSchema::default());
        match err {
            Err(IngestError::HeaderMismatch { missing, .. }) => {
                assert_eq!(missing, vec!["student_id".to_string()]);
            }
            other => panic!("expected header mismatch, got {other:?}"),
        }
    }

    #[test]
    fn schema_remapping_accepts_renamed_columns() {
        let f = write_temp("alumno,carrera,materia,kind,date,result,grade\ns1,mA,CALC1,ENROL,2010-03,NONE,\n");
        let schema = EventsSchema {
            student_id: "alumno".into(),
            major_id: "carrera".into(),
            subject_code: "materia".into(),
            ..EventsSchema::default()
        };
        let (events, report) = parse_events(f.path(), &schema).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(report.rows_rejected, 0);
    }

    #[test]
    fn identical_event_rows_are_deduplicated() {
        let row = "s1,mA,CALC1,ENROL,2010-03,NONE,\n";
        let f = write_temp(&format!("{EVENTS_HEADER}{row}{row}"));
        let (events, report) = parse_events(f.path(), &EventsSchema::default()).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(report.rows_accepted, 2);
        assert_eq!(report.duplicates_removed, 1);
    }

    #[test]
    fn registrations_dedup_and_empty_body() {
        let f = write_temp("student_id,major_id,reg_date\ns1,mA,2010-03\ns1,mA,2010-03\n");
        let (regs, report) = parse_registrations(f.path(), &RegistrationsSchema::default()).unwrap();
        assert_eq!(regs.len(), 1);
        assert_eq!(report.duplicates_removed, 1);

        let empty = write_temp("student_id,major_id,reg_date\n");
        let (regs, report) =
            parse_registrations(empty.path(), &RegistrationsSchema::default()).unwrap();
        assert!(regs.is_empty());
        assert_eq!(report.rows_read, 0);
    }

    const CATALOG_HEADER: &str = "subject_code,subject_name,field_group,major_id,year_level\n";

    #[test]
    fn catalog_same_subject_two_majors() {
        let f = write_temp(&format!(
            "{CATALOG_HEADER}CALC1,Cálculo I,MATH,mA,1\nCALC1,Cálculo I,MATH,mB,1\n"
        ));
        let (entries, report) = parse_catalog(f.path(), &CatalogSchema::default()).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(report.rows_accepted, 2);
        assert!(entries.iter().all(|e| e.field_group == FieldGroup::Math));
        assert!(entries.iter().all(|e| e.subject_name == "Cálculo I"));
    }

    #[test]
    fn catalog_conflicting_levels_fatal_with_lines() {
        let f = write_temp(&format!(
            "{CATALOG_HEADER}CALC1,Calculo I,MATH,mA,1\nCALC1,Calculo I,MATH,mA,2\n"
        ));
        match parse_catalog(f.path(), &CatalogSchema::default()) {
            Err(IngestError::DuplicateConflict {
                first_line,
                second_line,
                ..
            }) => {
                assert_eq!(first_line, 2);
                assert_eq!(second_line, 3);
            }
            other => panic!("expected duplicate conflict, got {other:?}"),
        }
    }

    fn entry(code: &str, major: &str, level: u32, group: FieldGroup) -> CatalogEntry {
        CatalogEntry {
            subject_code: code.into(),
            subject_name: code.to_string(),
            field_group: group,
            major_id: major.into(),
            year_level: level,
        }
    }

    #[test]
    fn cbc_classification_three_conditions() {
        let catalog = vec![
            // level 1 in two majors, MATH: included
            entry("CALC1", "mA", 1, FieldGroup::Math),
            entry("CALC1", "mB", 1, FieldGroup::Math),
            // level 2 everywhere: excluded
            entry("MECH2", "mA", 2, FieldGroup::IntroEngineering),
            entry("MECH2", "mB", 2, FieldGroup::IntroEngineering),
            // level 1 in exactly one major: excluded
            entry("SOLO", "mA", 1, FieldGroup::Physics),
            // shared level 1 but OTHER: excluded unless whitelisted
            entry("MISC", "mA", 1, FieldGroup::Other),
            entry("MISC", "mB", 1, FieldGroup::Other),
        ];
        let set = classify_cbc_subjects(&catalog, &BTreeSet::new()).unwrap();
        assert!(set.contains(&"CALC1".into()));
        assert!(!set.contains(&"MECH2".into()));
        assert!(!set.contains(&"SOLO".into()));
        assert!(!set.contains(&"MISC".into()));

        let whitelist: BTreeSet<SubjectCode> = [SubjectCode::from("MISC")].into();
        let set = classify_cbc_subjects(&catalog, &whitelist).unwrap();
        assert!(set.contains(&"MISC".into()));

        for info in set.subjects.values() {
            assert!(info.member_majors.len() >= 2);
        }
    }

    #[test]
    fn cbc_level1_in_one_major_level2_in_other_still_included() {
        // Condition 1 needs level 1 in at least one major; condition 2 counts
        // membership at any level.
        let catalog = vec![
            entry("PHY1", "mA", 1, FieldGroup::Physics),
            entry("PHY1", "mB", 2, FieldGroup::Physics),
        ];
        let set = classify_cbc_subjects(&catalog, &BTreeSet::new()).unwrap();
        let info = set.get(&"PHY1".into()).unwrap();
        assert_eq!(info.level1_majors.len(), 1);
        assert_eq!(info.member_majors.len(), 2);
    }

    #[test]
    fn empty_catalog_is_fatal() {
        assert!(matches!(
            classify_cbc_subjects(&[], &BTreeSet::new()),
            Err(IngestError::EmptyCatalog)
        ));
    }

    fn ev(student: &str, kind: EventKind, date: (i32, u8), result: ExamResult) -> AcademicEvent {
        AcademicEvent {
            student_id: student.into(),
            major_id: "mA".into(),
            subject_code: "CALC1".into(),
            kind,
            date: YearMonth::new(date.0, date.1).unwrap(),
            result,
            grade: None,
        }
    }

    fn reg(student: &str, date: (i32, u8)) -> DegreeRegistration {
        DegreeRegistration {
            student_id: student.into(),
            major_id: "mA".into(),
            reg_date: YearMonth::new(date.0, date.1).unwrap(),
        }
    }

    #[test]
    fn consistency_flags_reversed_date_pair() {
        let events = vec![
            ev("bad", EventKind::Exam, (2010, 1), ExamResult::Fail),
            ev("bad", EventKind::Enrol, (2015, 1), ExamResult::None),
            ev("good", EventKind::Enrol, (2010, 3), ExamResult::None),
            ev("good", EventKind::Exam, (2010, 7), ExamResult::Pass),
        ];
        let regs = vec![reg("bad", (2010, 1)), reg("good", (2010, 3))];
        let report = validate_consistency(&events, &regs, 0);
        assert!(report
            .students_flagged_inconsistent
            .contains(&StudentId::from("bad")));
        assert!(!report
            .students_flagged_inconsistent
            .contains(&StudentId::from("good")));
    }

    #[test]
    fn consistency_flags_event_before_registration() {
        let events = vec![ev("early", EventKind::Enrol, (2009, 12), ExamResult::None)];
        let regs = vec![reg("early", (2010, 3))];
        let report = validate_consistency(&events, &regs, 0);
        assert_eq!(report.students_flagged_inconsistent.len(), 1);
        // a 3-month grace window absorbs the same gap
        let report = validate_consistency(&events, &regs, 3);
        assert!(report.students_flagged_inconsistent.is_empty());
    }

    #[test]
    fn consistency_empty_input() {
        let report = validate_consistency(&[], &[], 0);
        assert!(report.students_flagged_inconsistent.is_empty());
        assert_eq!(report.rows_read, 0);
    }

    #[test]
    fn parse_is_pure_in_file_content() {
        let contents = format!(
            "{EVENTS_HEADER}s1,mA,CALC1,ENROL,2010-03,NONE,\ns2,mB,ALG1,EXAM,2011-11,FAIL,2\n"
        );
        let f = write_temp(&contents);
        let (a, ra) = parse_events(f.path(), &EventsSchema::default()).unwrap();
        let g = write_temp(&contents);
        let (b, rb) = parse_events(g.path(), &EventsSchema::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }

    #[test]
    fn events_csv_round_trip() {
        let events = vec![
            ev("s1", EventKind::Enrol, (2010, 3), ExamResult::None),
            AcademicEvent {
                grade: Some(7.0),
                ..ev("s1", EventKind::Exam, (2010, 7), ExamResult::Pass)
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.csv");
        write_events_csv(&path, &events).unwrap();
        let (parsed, report) = parse_events(&path, &EventsSchema::default()).unwrap();
        assert_eq!(parsed, events);
        assert_eq!(report.rows_rejected, 0);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_entry() -> impl Strategy<Value = CatalogEntry> {
            (
                prop::sample::select(vec!["S1", "S2", "S3", "S4"]),
                prop::sample::select(vec!["mA", "mB", "mC"]),
                1u32..=3,
                prop::sample::select(vec![FieldGroup::Math, FieldGroup::Other]),
            )
                .prop_map(|(code, major, level, group)| CatalogEntry {
                    subject_code: code.into(),
                    subject_name: code.to_string(),
                    field_group: group,
                    major_id: major.into(),
                    year_level: level,
                })
        }

        // Entries for the same (subject, major) pair would conflict, so keep
        // the first occurrence only, mirroring what a parsed catalogue holds.
        fn dedup(entries: Vec<CatalogEntry>) -> Vec<CatalogEntry> {
            let mut seen = BTreeSet::new();
            entries
                .into_iter()
                .filter(|e| seen.insert((e.subject_code.clone(), e.major_id.clone())))
                .collect()
        }

        proptest! {
            #[test]
            fn classification_is_monotone_in_the_catalogue(
                base in prop::collection::vec(arb_entry(), 1..12),
                extra in arb_entry(),
            ) {
                let base = dedup(base);
                let mut extended = base.clone();
                if !base
                    .iter()
                    .any(|e| e.subject_code == extra.subject_code && e.major_id == extra.major_id)
                {
                    extended.push(extra);
                }
                let before = classify_cbc_subjects(&base, &BTreeSet::new()).unwrap();
                let after = classify_cbc_subjects(&extended, &BTreeSet::new()).unwrap();
                for code in before.codes() {
                    prop_assert!(after.contains(code), "subject {code} dropped by adding an entry");
                }
                for info in after.subjects.values() {
                    prop_assert!(info.member_majors.len() >= 2);
                }
            }
        }
    }
}
