//! Record ingestion, location mapping and time bucketing.
//!
//! A [`Corpus`] is built once from a JSONL or CSV file and never mutated
//! afterwards; downstream stages only borrow it.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveTime, Timelike, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const BUNDLED_GAZETTEER: &str = include_str!("../../../data/gazetteer.csv");

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv input lacks required column `{0}`")]
    MissingColumn(&'static str),
    #[error("csv input: {0}")]
    Csv(#[from] csv::Error),
    #[error("gazetteer line {line}: {reason}")]
    Gazetteer { line: usize, reason: String },
    #[error("gazetteer has no entries")]
    EmptyGazetteer,
    #[error("timestamp {timestamp} precedes epoch start {epoch}")]
    BeforeEpoch {
        timestamp: DateTime<Utc>,
        epoch: NaiveDate,
    },
    #[error("corpus dump: {0}")]
    Dump(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "positive" => Ok(Label::Positive),
            "negative" => Ok(Label::Negative),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

/// Canonical location: the country, its states and territories, their
/// capital cities, or `oth` for anything unmappable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocationCode {
    Au,
    Nsw,
    Vic,
    Qld,
    Wa,
    Sa,
    Tas,
    Act,
    Nt,
    Syd,
    Mel,
    Bne,
    Per,
    Adl,
    Hob,
    Cbr,
    Drw,
    Oth,
}

impl LocationCode {
    pub const ALL: [LocationCode; 18] = [
        LocationCode::Au,
        LocationCode::Nsw,
        LocationCode::Vic,
        LocationCode::Qld,
        LocationCode::Wa,
        LocationCode::Sa,
        LocationCode::Tas,
        LocationCode::Act,
        LocationCode::Nt,
        LocationCode::Syd,
        LocationCode::Mel,
        LocationCode::Bne,
        LocationCode::Per,
        LocationCode::Adl,
        LocationCode::Hob,
        LocationCode::Cbr,
        LocationCode::Drw,
        LocationCode::Oth,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LocationCode::Au => "au",
            LocationCode::Nsw => "nsw",
            LocationCode::Vic => "vic",
            LocationCode::Qld => "qld",
            LocationCode::Wa => "wa",
            LocationCode::Sa => "sa",
            LocationCode::Tas => "tas",
            LocationCode::Act => "act",
            LocationCode::Nt => "nt",
            LocationCode::Syd => "syd",
            LocationCode::Mel => "mel",
            LocationCode::Bne => "bne",
            LocationCode::Per => "per",
            LocationCode::Adl => "adl",
            LocationCode::Hob => "hob",
            LocationCode::Cbr => "cbr",
            LocationCode::Drw => "drw",
            LocationCode::Oth => "oth",
        }
    }

    /// Position in [`LocationCode::ALL`]; used as a grid row index.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for LocationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LocationCode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LocationCode::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown location code `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Day,
    Week,
}

impl Granularity {
    pub fn seconds(self) -> i64 {
        match self {
            Granularity::Day => 86_400,
            Granularity::Week => 7 * 86_400,
        }
    }
}

impl FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "day" => Ok(Granularity::Day),
            "week" => Ok(Granularity::Week),
            other => Err(format!("unknown granularity `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BucketId {
    pub index: u32,
    pub granularity: Granularity,
}

/// Floor-divides the time elapsed since midnight UTC of `epoch_start`.
pub fn bucket_time(
    timestamp: DateTime<Utc>,
    epoch_start: NaiveDate,
    granularity: Granularity,
) -> Result<BucketId, CorpusError> {
    let epoch = epoch_start.and_time(NaiveTime::MIN).and_utc();
    let elapsed = (timestamp - epoch).num_seconds();
    if elapsed < 0 {
        return Err(CorpusError::BeforeEpoch {
            timestamp,
            epoch: epoch_start,
        });
    }
    let index = elapsed / granularity.seconds();
    Ok(BucketId {
        index: u32::try_from(index).unwrap_or(u32::MAX),
        granularity,
    })
}

/// Ordered substring table; the first pattern contained in the lowercased
/// raw location decides the code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gazetteer {
    entries: Vec<(String, LocationCode)>,
}

impl Gazetteer {
    pub fn new(entries: Vec<(String, LocationCode)>) -> Result<Self, CorpusError> {
        if entries.is_empty() {
            return Err(CorpusError::EmptyGazetteer);
        }
        let entries = entries
            .into_iter()
            .map(|(p, c)| (p.to_lowercase(), c))
            .collect();
        Ok(Self { entries })
    }

    /// The gazetteer shipped in `data/gazetteer.csv`.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_GAZETTEER.as_bytes()).expect("bundled gazetteer is valid")
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let file = File::open(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(file)
    }

    /// Two-column CSV `pattern,code` with a header row.
    pub fn parse<R: Read>(reader: R) -> Result<Self, CorpusError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let mut entries = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            let line = i + 2;
            if row.len() != 2 {
                return Err(CorpusError::Gazetteer {
                    line,
                    reason: format!("expected 2 columns, found {}", row.len()),
                });
            }
            let pattern = row[0].trim();
            if pattern.is_empty() {
                return Err(CorpusError::Gazetteer {
                    line,
                    reason: "empty pattern".into(),
                });
            }
            let code = row[1]
                .trim()
                .parse::<LocationCode>()
                .map_err(|reason| CorpusError::Gazetteer { line, reason })?;
            entries.push((pattern.to_string(), code));
        }
        Self::new(entries)
    }

    pub fn entries(&self) -> &[(String, LocationCode)] {
        &self.entries
    }
}

pub fn map_location(raw: Option<&str>, gaz: &Gazetteer) -> LocationCode {
    let Some(raw) = raw else {
        return LocationCode::Oth;
    };
    let raw = raw.to_lowercase();
    gaz.entries
        .iter()
        .find(|(pattern, _)| raw.contains(pattern.as_str()))
        .map(|&(_, code)| code)
        .unwrap_or(LocationCode::Oth)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub text: String,
    pub raw_location: Option<String>,
    /// Language tag supplied by the producer, if any.
    pub lang: Option<String>,
    pub timestamp: DateTime<Utc>,
    pub label: Option<Label>,
    pub location: LocationCode,
    pub bucket: BucketId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    BadJson,
    BadRow,
    MissingText,
    BadTimestamp,
    BadLabel,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::BadJson => "bad-json",
            RejectReason::BadRow => "bad-row",
            RejectReason::MissingText => "missing-text",
            RejectReason::BadTimestamp => "bad-timestamp",
            RejectReason::BadLabel => "bad-label",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Jsonl,
    Csv,
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(InputFormat::Jsonl),
            "csv" => Ok(InputFormat::Csv),
            other => Err(format!("unknown input format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub total: usize,
    pub accepted: usize,
    pub rejected: BTreeMap<RejectReason, usize>,
    /// 1-based line (JSONL) or data-row (CSV) numbers of rejected inputs.
    pub rejections: Vec<(usize, RejectReason)>,
}

impl IngestStats {
    pub fn rejected_total(&self) -> usize {
        self.rejected.values().sum()
    }

    fn reject(&mut self, line: usize, reason: RejectReason) {
        self.total += 1;
        *self.rejected.entry(reason).or_default() += 1;
        self.rejections.push((line, reason));
    }

    fn accept(&mut self) {
        self.total += 1;
        self.accepted += 1;
    }
}

/// Settings that turn raw fields into canonical codes.
#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub gazetteer: Gazetteer,
    pub epoch_start: NaiveDate,
    pub granularity: Granularity,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            gazetteer: Gazetteer::bundled(),
            epoch_start: default_epoch(),
            granularity: Granularity::Week,
        }
    }
}

pub fn default_epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(2019, 11, 27).expect("valid date")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    epoch_start: NaiveDate,
    granularity: Granularity,
    records: Vec<Record>,
}

impl Corpus {
    pub fn new(epoch_start: NaiveDate, granularity: Granularity, records: Vec<Record>) -> Self {
        Self {
            epoch_start,
            granularity,
            records,
        }
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn epoch_start(&self) -> NaiveDate {
        self.epoch_start
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    /// Number of buckets spanned, i.e. one past the largest bucket index.
    pub fn bucket_count(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.bucket.index as usize + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), CorpusError> {
        for r in &self.records {
            let line = serde_json::to_string(r).map_err(|e| CorpusError::Dump(e.to_string()))?;
            writeln!(out, "{line}").map_err(|e| CorpusError::Dump(e.to_string()))?;
        }
        Ok(())
    }

    /// Each record as a little-endian `u32` byte length followed by its JSON encoding.
    pub fn write_length_prefixed<W: Write>(&self, mut out: W) -> Result<(), CorpusError> {
        for r in &self.records {
            let bytes = serde_json::to_vec(r).map_err(|e| CorpusError::Dump(e.to_string()))?;
            let len = u32::try_from(bytes.len()).map_err(|e| CorpusError::Dump(e.to_string()))?;
            out.write_all(&len.to_le_bytes())
                .and_then(|_| out.write_all(&bytes))
                .map_err(|e| CorpusError::Dump(e.to_string()))?;
        }
        Ok(())
    }

    pub fn read_length_prefixed<R: Read>(
        mut input: R,
        epoch_start: NaiveDate,
        granularity: Granularity,
    ) -> Result<Self, CorpusError> {
        let mut records = Vec::new();
        let mut len_buf = [0u8; 4];
        loop {
            match input.read_exact(&mut len_buf) {
                Ok(()) => {}
                Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
                Err(e) => return Err(CorpusError::Dump(e.to_string())),
            }
            let mut body = vec![0u8; u32::from_le_bytes(len_buf) as usize];
            input
                .read_exact(&mut body)
                .map_err(|e| CorpusError::Dump(e.to_string()))?;
            records.push(serde_json::from_slice(&body).map_err(|e| CorpusError::Dump(e.to_string()))?);
        }
        Ok(Self::new(epoch_start, granularity, records))
    }
}

#[derive(Debug, Deserialize)]
struct JsonRecord {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    location: Option<String>,
    #[serde(default)]
    lang: Option<String>,
    #[serde(default)]
    created_at: Option<String>,
    #[serde(default)]
    label: Option<String>,
}

struct RawFields<'a> {
    id: Option<&'a str>,
    text: Option<&'a str>,
    location: Option<&'a str>,
    lang: Option<&'a str>,
    created_at: Option<&'a str>,
    label: Option<&'a str>,
}

fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let ts = DateTime::parse_from_rfc3339(s.trim()).ok()?.with_timezone(&Utc);
    let ts = ts.with_nanosecond(0)?;
    (ts.timestamp() >= 0).then_some(ts)
}

fn non_empty(s: Option<&str>) -> Option<&str> {
    s.map(str::trim).filter(|s| !s.is_empty())
}

fn build_record(
    line: usize,
    raw: RawFields<'_>,
    opts: &IngestOptions,
) -> Result<Record, RejectReason> {
    let text = raw.text.filter(|t| !t.trim().is_empty()).ok_or(RejectReason::MissingText)?;
    let timestamp = raw
        .created_at
        .and_then(parse_timestamp)
        .ok_or(RejectReason::BadTimestamp)?;
    // Records before the corpus epoch cannot be bucketed.
    let bucket = bucket_time(timestamp, opts.epoch_start, opts.granularity)
        .map_err(|_| RejectReason::BadTimestamp)?;
    let label = match non_empty(raw.label) {
        Some(l) => Some(l.parse::<Label>().map_err(|_| RejectReason::BadLabel)?),
        None => None,
    };
    let raw_location = non_empty(raw.location).map(str::to_string);
    Ok(Record {
        id: non_empty(raw.id)
            .map(str::to_string)
            .unwrap_or_else(|| format!("line-{line}")),
        text: text.to_string(),
        location: map_location(raw_location.as_deref(), &opts.gazetteer),
        raw_location,
        lang: non_empty(raw.lang).map(str::to_string),
        timestamp,
        label,
        bucket,
    })
}

pub fn ingest(
    path: &Path,
    format: InputFormat,
    opts: &IngestOptions,
) -> Result<(Corpus, IngestStats), CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    match format {
        InputFormat::Jsonl => ingest_jsonl(BufReader::new(file), opts),
        InputFormat::Csv => ingest_csv(file, opts),
    }
    .map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

pub fn ingest_jsonl<R: BufRead>(
    reader: R,
    opts: &IngestOptions,
) -> Result<(Corpus, IngestStats), CorpusError> {
    let mut stats = IngestStats::default();
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: PathBuf::new(),
            source,
        })?;
        let parsed: JsonRecord = match serde_json::from_str(&line) {
            Ok(p) => p,
            Err(_) => {
                stats.reject(line_no, RejectReason::BadJson);
                continue;
            }
        };
        let raw = RawFields {
            id: parsed.id.as_deref(),
            text: parsed.text.as_deref(),
            location: parsed.location.as_deref(),
            lang: parsed.lang.as_deref(),
            created_at: parsed.created_at.as_deref(),
            label: parsed.label.as_deref(),
        };
        match build_record(line_no, raw, opts) {
            Ok(r) => {
                stats.accept();
                records.push(r);
            }
            Err(reason) => stats.reject(line_no, reason),
        }
    }
    Ok((Corpus::new(opts.epoch_start, opts.granularity, records), stats))
}

/// Comma-separated, double-quoted, header row required. `text` and
/// `created_at` columns are mandatory; `id`, `location`, `lang`, `label`
/// are optional.
pub fn ingest_csv<R: Read>(
    reader: R,
    opts: &IngestOptions,
) -> Result<(Corpus, IngestStats), CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let text_col = col("text").ok_or(CorpusError::MissingColumn("text"))?;
    let ts_col = col("created_at").ok_or(CorpusError::MissingColumn("created_at"))?;
    let (id_col, loc_col, lang_col, label_col) =
        (col("id"), col("location"), col("lang"), col("label"));

    let mut stats = IngestStats::default();
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line_no = i + 1;
        let row = match row {
            Ok(r) if r.len() == headers.len() => r,
            Ok(_) | Err(_) => {
                stats.reject(line_no, RejectReason::BadRow);
                continue;
            }
        };
        let get = |c: Option<usize>| c.and_then(|c| row.get(c));
        let raw = RawFields {
            id: get(id_col),
            text: row.get(text_col),
            location: get(loc_col),
            lang: get(lang_col),
            created_at: row.get(ts_col),
            label: get(label_col),
        };
        match build_record(line_no, raw, opts) {
            Ok(r) => {
                stats.accept();
                records.push(r);
            }
            Err(reason) => stats.reject(line_no, reason),
        }
    }
    Ok((Corpus::new(opts.epoch_start, opts.granularity, records), stats))
}
