//! Corpus records, loading/validation and summary statistics.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::Tokenizer;

/// Language bucket for records without a language tag.
pub const UNKNOWN_LANGUAGE: &str = "und";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed record at line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("duplicate posting id {0:?}")]
    DuplicateId(String),
    #[error("missing required field `{field}` at line {line}")]
    MissingRequiredField { line: usize, field: &'static str },
    #[error("invalid CSV header: {0}")]
    BadHeader(String),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

/// One job posting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub id: String,
    pub title: String,
    pub description: String,
    pub company: Option<String>,
    pub location: Option<String>,
    pub country: Option<String>,
    pub language: Option<String>,
    #[serde(with = "date_format")]
    pub retrieval_date: NaiveDate,
    pub source: String,
}

impl Posting {
    /// Title and description joined by a single space.
    pub fn full_text(&self) -> String {
        let mut s = String::with_capacity(self.title.len() + self.description.len() + 1);
        s.push_str(&self.title);
        s.push(' ');
        s.push_str(&self.description);
        s
    }

    pub fn language_or_unknown(&self) -> &str {
        self.language.as_deref().unwrap_or(UNKNOWN_LANGUAGE)
    }
}

mod date_format {
    use chrono::NaiveDate;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &NaiveDate, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&d.format("%Y-%m-%d").to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDate, D::Error> {
        let raw = String::deserialize(d)?;
        super::parse_date(&raw).ok_or_else(|| serde::de::Error::custom(format!("bad date {raw:?}")))
    }
}

/// Parses an ISO-8601 calendar date. A trailing time component
/// (`T...` or ` ...`) is accepted and dropped.
pub fn parse_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    let date_part = match raw.find(['T', ' ']) {
        Some(10) => &raw[..10],
        Some(_) => return None,
        None => raw,
    };
    NaiveDate::parse_from_str(date_part, "%Y-%m-%d").ok()
}

/// Input file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Csv,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown corpus format {other:?}")),
        }
    }
}

impl Format {
    pub fn from_path(path: &Path) -> Option<Format> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "jsonl" | "json" | "ndjson" => Some(Format::Jsonl),
            "csv" => Some(Format::Csv),
            _ => None,
        }
    }
}

pub const CSV_COLUMNS: [&str; 9] = [
    "id",
    "title",
    "description",
    "company",
    "location",
    "country",
    "language",
    "retrieval_date",
    "source",
];

/// Wire shape shared by both formats; every field optional so that
/// validation can report precisely what is missing.
#[derive(Debug, Default, Deserialize)]
struct RawPosting {
    id: Option<String>,
    title: Option<String>,
    description: Option<String>,
    company: Option<String>,
    location: Option<String>,
    country: Option<String>,
    language: Option<String>,
    retrieval_date: Option<String>,
    source: Option<String>,
}

fn non_empty(v: Option<String>) -> Option<String> {
    v.filter(|s| !s.trim().is_empty())
}

impl RawPosting {
    fn validate(self, line: usize) -> Result<Posting> {
        let id = non_empty(self.id).ok_or(CorpusError::MissingRequiredField { line, field: "id" })?;
        let title = self.title.unwrap_or_default();
        let description = self.description.unwrap_or_default();
        if title.trim().is_empty() && description.trim().is_empty() {
            return Err(CorpusError::MissingRequiredField {
                line,
                field: "title|description",
            });
        }
        let raw_date = non_empty(self.retrieval_date).ok_or(CorpusError::MissingRequiredField {
            line,
            field: "retrieval_date",
        })?;
        let retrieval_date = parse_date(&raw_date).ok_or_else(|| CorpusError::MalformedRecord {
            line,
            message: format!("invalid retrieval_date {raw_date:?}"),
        })?;
        Ok(Posting {
            id,
            title,
            description,
            company: non_empty(self.company),
            location: non_empty(self.location),
            country: non_empty(self.country),
            language: non_empty(self.language),
            retrieval_date,
            source: self.source.unwrap_or_default(),
        })
    }
}

/// Loads and validates a corpus. Record order is preserved.
pub fn load_postings(path: &Path, format: Format) -> Result<Vec<Posting>> {
    let file = File::open(path)?;
    match format {
        Format::Jsonl => read_jsonl(BufReader::new(file)),
        Format::Csv => read_csv(BufReader::new(file)),
    }
}

pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<Posting>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawPosting =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRecord {
                line: line_no,
                message: e.to_string(),
            })?;
        push_unique(&mut out, &mut seen, raw.validate(line_no)?)?;
    }
    Ok(out)
}

pub fn read_csv<R: io::Read>(reader: R) -> Result<Vec<Posting>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .delimiter(b',')
        .quote(b'"')
        .double_quote(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CorpusError::BadHeader(e.to_string()))?
        .clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let names: HashSet<&str> = headers.iter().collect();
    for col in CSV_COLUMNS {
        if !names.contains(col) {
            return Err(CorpusError::BadHeader(format!("missing column {col:?}")));
        }
    }
    if let Some(extra) = headers.iter().find(|h| !CSV_COLUMNS.contains(h)) {
        return Err(CorpusError::BadHeader(format!("unknown column {extra:?}")));
    }

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (idx, record) in rdr.deserialize::<RawPosting>().enumerate() {
        // header is line 1
        let line_no = idx + 2;
        let raw = record.map_err(|e| CorpusError::MalformedRecord {
            line: e.position().map(|p| p.line() as usize).unwrap_or(line_no),
            message: e.to_string(),
        })?;
        push_unique(&mut out, &mut seen, raw.validate(line_no)?)?;
    }
    Ok(out)
}

fn push_unique(out: &mut Vec<Posting>, seen: &mut HashSet<String>, p: Posting) -> Result<()> {
    if !seen.insert(p.id.clone()) {
        return Err(CorpusError::DuplicateId(p.id));
    }
    out.push(p);
    Ok(())
}

pub fn write_postings(path: &Path, postings: &[Posting], format: Format) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    match format {
        Format::Jsonl => write_jsonl(file, postings),
        Format::Csv => write_csv(file, postings),
    }
}

pub fn write_jsonl<W: Write>(mut w: W, postings: &[Posting]) -> Result<()> {
    for p in postings {
        serde_json::to_writer(&mut w, p).map_err(io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv<W: Write>(w: W, postings: &[Posting]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(CSV_COLUMNS).map_err(csv_io)?;
    for p in postings {
        let date = p.retrieval_date.format("%Y-%m-%d").to_string();
        let opt = |v: &Option<String>| v.clone().unwrap_or_default();
        wtr.write_record([
            p.id.clone(),
            p.title.clone(),
            p.description.clone(),
            opt(&p.company),
            opt(&p.location),
            opt(&p.country),
            opt(&p.language),
            date,
            p.source.clone(),
        ])
        .map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> CorpusError {
    CorpusError::Io(io::Error::other(e))
}

/// Half-open token-count bucket `[lo, hi)`; `hi == None` is unbounded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    pub lo: usize,
    pub hi: Option<usize>,
    pub count: usize,
}

/// Builds empty buckets from ascending edges; the last bucket is open-ended.
pub(crate) fn buckets_from_edges(edges: &[usize]) -> Vec<Bucket> {
    let mut out: Vec<Bucket> = edges
        .windows(2)
        .map(|w| Bucket {
            lo: w[0],
            hi: Some(w[1]),
            count: 0,
        })
        .collect();
    out.push(Bucket {
        lo: *edges.last().expect("at least one edge"),
        hi: None,
        count: 0,
    });
    out
}

pub(crate) fn bucket_insert(buckets: &mut [Bucket], value: usize) {
    if let Some(b) = buckets
        .iter_mut()
        .find(|b| value >= b.lo && b.hi.is_none_or(|hi| value < hi))
    {
        b.count += 1;
    }
}

pub const TOKEN_BUCKET_EDGES: [usize; 8] = [0, 50, 100, 200, 384, 500, 1000, 2000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_postings: usize,
    pub language_histogram: BTreeMap<String, usize>,
    pub token_count_histogram: Vec<Bucket>,
    pub missing_company_fraction: f64,
    pub missing_location_fraction: f64,
}

pub fn corpus_stats<K: Tokenizer + ?Sized>(postings: &[Posting], tokenizer: &K) -> CorpusStats {
    let mut language_histogram = BTreeMap::new();
    let mut token_count_histogram = buckets_from_edges(&TOKEN_BUCKET_EDGES);
    let mut missing_company = 0usize;
    let mut missing_location = 0usize;
    for p in postings {
        *language_histogram
            .entry(p.language_or_unknown().to_string())
            .or_insert(0) += 1;
        let n_tokens = tokenizer.tokenize(&p.full_text()).len();
        bucket_insert(&mut token_count_histogram, n_tokens);
        missing_company += p.company.is_none() as usize;
        missing_location += p.location.is_none() as usize;
    }
    let frac = |k: usize| {
        if postings.is_empty() {
            0.0
        } else {
            k as f64 / postings.len() as f64
        }
    };
    CorpusStats {
        n_postings: postings.len(),
        language_histogram,
        token_count_histogram,
        missing_company_fraction: frac(missing_company),
        missing_location_fraction: frac(missing_location),
    }
}

/// Number of unordered pairs among `n` items, `n (n - 1) / 2`.
pub fn pair_count(n: u64) -> u128 {
    let n = n as u128;
    n * n.saturating_sub(1) / 2
}
