//! Bibliographic record ingestion, period splitting and vocabulary construction.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// One bibliographic document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub year: i32,
    pub keywords: Vec<String>,
    #[serde(default)]
    pub categories: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
}

impl Record {
    /// Distinct normalized keywords of this record.
    pub fn term_set(&self) -> BTreeSet<String> {
        normalized_set(&self.keywords)
    }

    /// Distinct normalized classification categories of this record.
    pub fn category_set(&self) -> BTreeSet<String> {
        normalized_set(&self.categories)
    }
}

fn normalized_set(values: &[String]) -> BTreeSet<String> {
    values
        .iter()
        .map(|v| normalize_term(v))
        .filter(|v| !v.is_empty())
        .collect()
}

/// Lowercase, strip, and collapse internal whitespace. An empty result means
/// the caller drops the term.
pub fn normalize_term(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Keep the first occurrence of each normalized value, in input order.
fn normalize_list(values: &[String]) -> Vec<String> {
    let mut seen = HashSet::new();
    values
        .iter()
        .map(|v| normalize_term(v))
        .filter(|v| !v.is_empty() && seen.insert(v.clone()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            _ => Err(Error::UnknownFormat(s.to_string())),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Jsonl => "jsonl",
            Format::Csv => "csv",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub records_read: usize,
    pub dropped_empty_keywords: usize,
    pub loaded: usize,
}

#[derive(Deserialize)]
struct CsvRow {
    id: String,
    year: String,
    keywords: String,
    #[serde(default)]
    categories: Option<String>,
    #[serde(default)]
    title: Option<String>,
}

fn split_cell(cell: &str) -> Vec<String> {
    cell.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Read and validate a corpus. Keywords and categories are normalized and
/// de-duplicated; records left without keywords are dropped and counted.
pub fn load_corpus(path: &Path, format: Format) -> Result<(Vec<Record>, LoadReport)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let raw = match format {
        Format::Jsonl => read_jsonl(path, BufReader::new(file))?,
        Format::Csv => read_csv(path, file)?,
    };
    validate(raw)
}

fn read_jsonl(path: &Path, reader: impl BufRead) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

fn read_csv(path: &Path, file: File) -> Result<Vec<Record>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let malformed = |line: u64, message: String| Error::Malformed {
        path: path.to_path_buf(),
        line: line as usize,
        message,
    };
    let headers = reader.headers().map_err(|e| malformed(1, e.to_string()))?;
    for required in ["id", "year", "keywords"] {
        if !headers.iter().any(|h| h == required) {
            return Err(malformed(1, format!("missing column `{required}`")));
        }
    }
    let mut out = Vec::new();
    for row in reader.deserialize::<CsvRow>() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let year = row.year.trim().parse::<i32>().map_err(|_| {
            // csv lines are 1-based and include the header
            malformed(out.len() as u64 + 2, format!("invalid year `{}`", row.year))
        })?;
        out.push(Record {
            id: row.id,
            year,
            keywords: split_cell(&row.keywords),
            categories: row.categories.as_deref().map(split_cell).unwrap_or_default(),
            title: row.title.filter(|t| !t.is_empty()),
        });
    }
    Ok(out)
}

fn validate(raw: Vec<Record>) -> Result<(Vec<Record>, LoadReport)> {
    let mut report = LoadReport {
        records_read: raw.len(),
        ..LoadReport::default()
    };
    let mut ids = HashSet::with_capacity(raw.len());
    let mut out = Vec::with_capacity(raw.len());
    for mut record in raw {
        if !ids.insert(record.id.clone()) {
            return Err(Error::DuplicateId(record.id));
        }
        record.keywords = normalize_list(&record.keywords);
        record.categories = normalize_list(&record.categories);
        if record.keywords.is_empty() {
            report.dropped_empty_keywords += 1;
            continue;
        }
        out.push(record);
    }
    report.loaded = out.len();
    Ok((out, report))
}

pub fn write_jsonl(records: &[Record], mut w: impl Write) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_csv(records: &[Record], w: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    writer.write_record(["id", "year", "keywords", "categories", "title"])?;
    for r in records {
        writer.write_record([
            r.id.as_str(),
            &r.year.to_string(),
            &r.keywords.join(";"),
            &r.categories.join(";"),
            r.title.as_deref().unwrap_or(""),
        ])?;
    }
    writer.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PeriodId {
    P1,
    P2,
}

impl PeriodId {
    pub fn as_str(self) -> &'static str {
        match self {
            PeriodId::P1 => "P1",
            PeriodId::P2 => "P2",
        }
    }
}

impl fmt::Display for PeriodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Two successive, disjoint, inclusive year windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodSpec {
    pub p1_start: i32,
    pub p1_end: i32,
    pub p2_start: i32,
    pub p2_end: i32,
}

impl PeriodSpec {
    pub fn new(p1_start: i32, p1_end: i32, p2_start: i32, p2_end: i32) -> Result<Self> {
        let spec = PeriodSpec {
            p1_start,
            p1_end,
            p2_start,
            p2_end,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p1_start > self.p1_end {
            return Err(Error::InvalidPeriods(format!(
                "P1 start {} is after P1 end {}",
                self.p1_start, self.p1_end
            )));
        }
        if self.p1_end >= self.p2_start {
            return Err(Error::InvalidPeriods(format!(
                "P2 must start after P1 ends (P1 ends {}, P2 starts {})",
                self.p1_end, self.p2_start
            )));
        }
        if self.p2_start > self.p2_end {
            return Err(Error::InvalidPeriods(format!(
                "P2 start {} is after P2 end {}",
                self.p2_start, self.p2_end
            )));
        }
        Ok(())
    }

    pub fn period_of(&self, year: i32) -> Option<PeriodId> {
        if (self.p1_start..=self.p1_end).contains(&year) {
            Some(PeriodId::P1)
        } else if (self.p2_start..=self.p2_end).contains(&year) {
            Some(PeriodId::P2)
        } else {
            None
        }
    }
}

/// The records of one period, sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSlice {
    pub period: PeriodId,
    pub records: Vec<Record>,
}

impl CorpusSlice {
    pub fn n_docs(&self) -> usize {
        self.records.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodSplit {
    pub p1: CorpusSlice,
    pub p2: CorpusSlice,
    pub dropped_outside: usize,
}

pub fn split_periods(records: &[Record], spec: &PeriodSpec) -> Result<PeriodSplit> {
    spec.validate()?;
    let mut p1 = Vec::new();
    let mut p2 = Vec::new();
    let mut dropped_outside = 0;
    for r in records {
        match spec.period_of(r.year) {
            Some(PeriodId::P1) => p1.push(r.clone()),
            Some(PeriodId::P2) => p2.push(r.clone()),
            None => dropped_outside += 1,
        }
    }
    if p1.is_empty() {
        return Err(Error::EmptyPeriod("P1"));
    }
    if p2.is_empty() {
        return Err(Error::EmptyPeriod("P2"));
    }
    p1.sort_by(|a, b| a.id.cmp(&b.id));
    p2.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(PeriodSplit {
        p1: CorpusSlice {
            period: PeriodId::P1,
            records: p1,
        },
        p2: CorpusSlice {
            period: PeriodId::P2,
            records: p2,
        },
        dropped_outside,
    })
}

/// Sorted term list with per-period document and occurrence counts.
///
/// Keywords are a set within a record, so `tf` and `df` coincide; both are
/// kept because downstream indicators are phrased in terms of each.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    pub terms: Vec<String>,
    pub index: HashMap<String, usize>,
    pub df_p1: Vec<u32>,
    pub df_p2: Vec<u32>,
    pub tf_p1: Vec<u32>,
    pub tf_p2: Vec<u32>,
    pub n_docs_p1: usize,
    pub n_docs_p2: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn n_pooled(&self) -> usize {
        self.n_docs_p1 + self.n_docs_p2
    }

    pub fn df_pooled(&self, col: usize) -> u32 {
        self.df_p1[col] + self.df_p2[col]
    }

    pub fn tf_pooled(&self, col: usize) -> u32 {
        self.tf_p1[col] + self.tf_p2[col]
    }

    /// `ln(N_pooled / df_pooled)` in nats.
    pub fn idf(&self, col: usize) -> f64 {
        (self.n_pooled() as f64 / self.df_pooled(col) as f64).ln()
    }

    /// Hex SHA-256 of the newline-joined term list; identifies the column space.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.terms {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn build_vocabulary(p1: &CorpusSlice, p2: &CorpusSlice, min_df: u32) -> Result<Vocabulary> {
    if min_df == 0 {
        return Err(Error::InvalidConfig("min_df must be at least 1".into()));
    }
    let mut counts: BTreeMap<String, [u32; 2]> = BTreeMap::new();
    for (slot, slice) in [(0, p1), (1, p2)] {
        for r in &slice.records {
            for term in r.term_set() {
                counts.entry(term).or_default()[slot] += 1;
            }
        }
    }
    counts.retain(|_, c| c[0] + c[1] >= min_df);
    if counts.is_empty() {
        return Err(Error::EmptyVocabulary { min_df });
    }
    let n = counts.len();
    let mut vocab = Vocabulary {
        terms: Vec::with_capacity(n),
        index: HashMap::with_capacity(n),
        df_p1: Vec::with_capacity(n),
        df_p2: Vec::with_capacity(n),
        tf_p1: Vec::with_capacity(n),
        tf_p2: Vec::with_capacity(n),
        n_docs_p1: p1.n_docs(),
        n_docs_p2: p2.n_docs(),
    };
    for (i, (term, [c1, c2])) in counts.into_iter().enumerate() {
        vocab.index.insert(term.clone(), i);
        vocab.terms.push(term);
        vocab.df_p1.push(c1);
        vocab.df_p2.push(c2);
        vocab.tf_p1.push(c1);
        vocab.tf_p2.push(c2);
    }
    Ok(vocab)
}
