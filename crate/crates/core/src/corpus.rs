//! Year-indexed document store.
//!
//! Documents are append-only after ingest; normalization and segmentation fill
//! in per-document derived state. Per-year lexical totals are cached at
//! segmentation time so counting passes never re-tokenize.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reserved bucket label for documents outside every slice of a scheme.
pub const UNASSIGNED_LABEL: &str = "unassigned";

/// One article: raw text plus derived normalized text and token list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub year: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<String>>,
}

/// A contiguous, inclusive year range with a label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSliceSpec {
    pub label: String,
    pub start_year: i32,
    pub end_year: i32,
}

impl TimeSliceSpec {
    pub fn new(label: impl Into<String>, start_year: i32, end_year: i32) -> Self {
        TimeSliceSpec {
            label: label.into(),
            start_year,
            end_year,
        }
    }

    pub fn contains(&self, year: i32) -> bool {
        self.start_year <= year && year <= self.end_year
    }
}

/// The five decade slices used throughout the bundled configs.
pub fn default_slices() -> Vec<TimeSliceSpec> {
    vec![
        TimeSliceSpec::new("1904-1909", 1904, 1909),
        TimeSliceSpec::new("1910-1919", 1910, 1919),
        TimeSliceSpec::new("1920-1929", 1920, 1929),
        TimeSliceSpec::new("1930-1939", 1930, 1939),
        TimeSliceSpec::new("1940-1949", 1940, 1949),
    ]
}

/// Validate a slicing scheme: labels unique and non-reserved, ranges ordered,
/// slices sorted ascending and pairwise disjoint.
pub fn validate_scheme(scheme: &[TimeSliceSpec]) -> Result<()> {
    if scheme.is_empty() {
        return Err(Error::Invalid("slicing scheme is empty".into()));
    }
    let mut labels = std::collections::HashSet::new();
    for slice in scheme {
        if slice.label.is_empty() || slice.label == UNASSIGNED_LABEL {
            return Err(Error::Invalid(format!(
                "slice label {:?} is empty or reserved",
                slice.label
            )));
        }
        if !labels.insert(slice.label.as_str()) {
            return Err(Error::Invalid(format!(
                "duplicate slice label {:?}",
                slice.label
            )));
        }
        if slice.start_year > slice.end_year {
            return Err(Error::Invalid(format!(
                "slice {:?} has start_year {} > end_year {}",
                slice.label, slice.start_year, slice.end_year
            )));
        }
    }
    for pair in scheme.windows(2) {
        if pair[1].start_year <= pair[0].end_year {
            return Err(Error::Invalid(format!(
                "slices {:?} and {:?} overlap or are out of order",
                pair[0].label, pair[1].label
            )));
        }
    }
    Ok(())
}

/// Per-year lexical-item totals (tokens after segmentation, punctuation and
/// whitespace excluded unless configured otherwise).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearTotals(pub BTreeMap<i32, u64>);

impl YearTotals {
    pub fn get(&self, year: i32) -> u64 {
        self.0.get(&year).copied().unwrap_or(0)
    }

    pub fn sum(&self) -> u64 {
        self.0.values().sum()
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        self.0.keys().copied()
    }
}

/// Ingest knobs; the reject threshold is a fraction of total parsed lines.
#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub max_reject_fraction: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            max_reject_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RejectedLine {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: u64,
    pub rejected: u64,
    pub per_year: BTreeMap<i32, u64>,
    pub rejects: Vec<RejectedLine>,
}

/// Corpus manifest: where the documents live and the declared year range.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub documents: PathBuf,
    pub year_min: i32,
    pub year_max: i32,
}

#[derive(Debug, Deserialize)]
struct RawDocument {
    id: String,
    year: i32,
    #[serde(default)]
    title: Option<String>,
    text: String,
}

/// Immutable-after-ingest document store with a year index.
#[derive(Debug, Clone)]
pub struct Corpus {
    docs: Vec<Document>,
    by_id: HashMap<String, usize>,
    year_index: BTreeMap<i32, Vec<usize>>,
    year_range: (i32, i32),
    normalized: bool,
    totals: Option<YearTotals>,
}

impl Corpus {
    /// Load a corpus from a manifest. The documents path is resolved relative
    /// to the manifest's directory when not absolute.
    pub fn ingest(manifest_path: &Path) -> Result<(Corpus, IngestReport)> {
        Corpus::ingest_with(manifest_path, &IngestOptions::default())
    }

    pub fn ingest_with(
        manifest_path: &Path,
        options: &IngestOptions,
    ) -> Result<(Corpus, IngestReport)> {
        let mut raw = String::new();
        File::open(manifest_path)
            .and_then(|mut f| f.read_to_string(&mut raw))
            .map_err(|e| Error::io(manifest_path, e))?;
        let manifest: CorpusManifest = serde_json::from_str(&raw)
            .map_err(|e| Error::parse(manifest_path, e.line(), format!("bad manifest: {e}")))?;
        let doc_path = resolve_relative(manifest_path, &manifest.documents);
        Corpus::ingest_documents(&doc_path, manifest.year_min, manifest.year_max, options)
    }

    /// Ingest a JSONL document file directly with an explicit year range.
    pub fn ingest_documents(
        doc_path: &Path,
        year_min: i32,
        year_max: i32,
        options: &IngestOptions,
    ) -> Result<(Corpus, IngestReport)> {
        if year_min > year_max {
            return Err(Error::Invalid(format!(
                "year range {year_min}..{year_max} is empty"
            )));
        }
        let file = File::open(doc_path).map_err(|e| Error::io(doc_path, e))?;
        let reader = BufReader::new(file);

        let mut corpus = Corpus {
            docs: Vec::new(),
            by_id: HashMap::new(),
            year_index: BTreeMap::new(),
            year_range: (year_min, year_max),
            normalized: false,
            totals: None,
        };
        let mut rejects = Vec::new();
        let mut total_lines = 0usize;

        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::io(doc_path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            total_lines += 1;
            match parse_document(&line, year_min, year_max, &corpus.by_id) {
                Ok(doc) => {
                    let slot = corpus.docs.len();
                    corpus.by_id.insert(doc.id.clone(), slot);
                    corpus.year_index.entry(doc.year).or_default().push(slot);
                    corpus.docs.push(doc);
                }
                Err(reason) => rejects.push(RejectedLine {
                    line: line_no,
                    reason,
                }),
            }
        }

        if total_lines == 0 {
            return Err(Error::parse(doc_path, 0, "empty corpus"));
        }
        let reject_fraction = rejects.len() as f64 / total_lines as f64;
        if reject_fraction > options.max_reject_fraction {
            return Err(Error::parse(
                doc_path,
                0,
                format!(
                    "{} of {} lines malformed ({:.1}% > {:.1}% threshold); first: {}",
                    rejects.len(),
                    total_lines,
                    reject_fraction * 100.0,
                    options.max_reject_fraction * 100.0,
                    rejects
                        .first()
                        .map(|r| format!("line {}: {}", r.line, r.reason))
                        .unwrap_or_default()
                ),
            ));
        }
        if corpus.docs.is_empty() {
            return Err(Error::parse(doc_path, 0, "empty corpus"));
        }

        let per_year = corpus
            .year_index
            .iter()
            .map(|(year, ids)| (*year, ids.len() as u64))
            .collect();
        let report = IngestReport {
            accepted: corpus.docs.len() as u64,
            rejected: rejects.len() as u64,
            per_year,
            rejects,
        };
        Ok((corpus, report))
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.by_id.get(id).map(|&i| &self.docs[i])
    }

    pub fn year_range(&self) -> (i32, i32) {
        self.year_range
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn is_segmented(&self) -> bool {
        self.totals.is_some()
    }

    /// Assign every document to the unique slice containing its year, or to
    /// the `"unassigned"` overflow bucket. Every scheme label appears in the
    /// result, even when empty.
    pub fn slice(&self, scheme: &[TimeSliceSpec]) -> Result<BTreeMap<String, Vec<String>>> {
        validate_scheme(scheme)?;
        let mut buckets: BTreeMap<String, Vec<String>> = scheme
            .iter()
            .map(|s| (s.label.clone(), Vec::new()))
            .collect();
        buckets.insert(UNASSIGNED_LABEL.to_string(), Vec::new());
        for doc in &self.docs {
            let label = scheme
                .iter()
                .find(|s| s.contains(doc.year))
                .map(|s| s.label.as_str())
                .unwrap_or(UNASSIGNED_LABEL);
            buckets.get_mut(label).expect("bucket exists").push(doc.id.clone());
        }
        Ok(buckets)
    }

    /// Document indices per slice, in ingest order. Used by training.
    pub fn slice_indices(&self, scheme: &[TimeSliceSpec]) -> Result<Vec<(String, Vec<usize>)>> {
        validate_scheme(scheme)?;
        let mut out: Vec<(String, Vec<usize>)> = scheme
            .iter()
            .map(|s| (s.label.clone(), Vec::new()))
            .collect();
        for (i, doc) in self.docs.iter().enumerate() {
            if let Some(pos) = scheme.iter().position(|s| s.contains(doc.year)) {
                out[pos].1.push(i);
            }
        }
        Ok(out)
    }

    /// Cached per-year lexical totals; requires segmentation.
    pub fn year_totals(&self) -> Result<&YearTotals> {
        self.totals
            .as_ref()
            .ok_or_else(|| Error::Invalid("corpus not yet segmented".into()))
    }

    /// Replace every document's working text with `f(text)` and mark the
    /// corpus normalized. The raw text is retained.
    pub fn normalize_with(&mut self, f: impl Fn(&str) -> String + Sync) {
        use rayon::prelude::*;
        self.docs.par_iter_mut().for_each(|doc| {
            doc.normalized = Some(f(&doc.text));
        });
        self.normalized = true;
        self.totals = None;
    }

    /// The text downstream stages operate on.
    pub fn working_text(doc: &Document) -> &str {
        doc.normalized.as_deref().unwrap_or(&doc.text)
    }

    pub(crate) fn docs_mut(&mut self) -> &mut [Document] {
        &mut self.docs
    }

    pub(crate) fn set_totals(&mut self, totals: YearTotals) {
        self.totals = Some(totals);
    }

    /// Rebuild a corpus from documents that already carry derived state
    /// (used when resuming a pipeline from stage artifacts).
    pub fn from_documents(
        docs: Vec<Document>,
        year_min: i32,
        year_max: i32,
        totals: Option<YearTotals>,
    ) -> Result<Corpus> {
        let mut by_id = HashMap::new();
        let mut year_index: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
        let normalized = docs.iter().all(|d| d.normalized.is_some());
        for (i, doc) in docs.iter().enumerate() {
            if by_id.insert(doc.id.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate document id {:?}", doc.id)));
            }
            year_index.entry(doc.year).or_default().push(i);
        }
        Ok(Corpus {
            docs,
            by_id,
            year_index,
            year_range: (year_min, year_max),
            normalized,
            totals,
        })
    }
}

fn parse_document(
    line: &str,
    year_min: i32,
    year_max: i32,
    seen: &HashMap<String, usize>,
) -> std::result::Result<Document, String> {
    let raw: RawDocument =
        serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    if raw.id.is_empty() {
        return Err("empty id".into());
    }
    if seen.contains_key(&raw.id) {
        return Err(format!("duplicate id {:?}", raw.id));
    }
    if raw.year < year_min || raw.year > year_max {
        return Err(format!(
            "year {} outside declared range {}..{}",
            raw.year, year_min, year_max
        ));
    }
    if raw.text.trim().is_empty() {
        return Err("empty text".into());
    }
    Ok(Document {
        id: raw.id,
        year: raw.year,
        title: raw.title,
        text: raw.text,
        normalized: None,
        tokens: None,
    })
}

fn resolve_relative(anchor: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        anchor.parent().unwrap_or(Path::new(".")).join(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;
    use tempfile::TempDir;

    fn write_corpus(dir: &TempDir, lines: &[&str]) -> PathBuf {
        let docs = dir.path().join("docs.jsonl");
        let mut f = File::create(&docs).unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        let manifest = dir.path().join("manifest.json");
        std::fs::write(
            &manifest,
            format!(
                "{{\"documents\": \"{}\", \"year_min\": 1904, \"year_max\": 1948}}",
                "docs.jsonl"
            ),
        )
        .unwrap();
        manifest
    }

    #[test]
    fn ingest_counts_by_year() {
        let dir = TempDir::new().unwrap();
        let manifest = write_corpus(
            &dir,
            &[
                r#"{"id": "a", "year": 1904, "text": "甲"}"#,
                r#"{"id": "b", "year": 1904, "text": "乙"}"#,
                r#"{"id": "c", "year": 1910, "text": "丙"}"#,
            ],
        );
        let (corpus, report) = Corpus::ingest(&manifest).unwrap();
        assert_eq!(corpus.len(), 3);
        assert_eq!(report.accepted, 3);
        assert_eq!(report.rejected, 0);
        assert_eq!(report.per_year.get(&1904), Some(&2));
        assert_eq!(report.per_year.get(&1910), Some(&1));
    }

    #[test]
    fn ingest_rejects_empty_file() {
        let dir = TempDir::new().unwrap();
        let manifest = write_corpus(&dir, &[]);
        let err = Corpus::ingest(&manifest).unwrap_err();
        assert!(err.to_string().contains("empty corpus"), "{err}");
    }

    #[test]
    fn ingest_fails_over_reject_threshold() {
        // 10 lines with 2 bad ones at a 10% threshold must fail and report both.
        let dir = TempDir::new().unwrap();
        let mut lines: Vec<String> = (0..8)
            .map(|i| format!(r#"{{"id": "d{i}", "year": 1905, "text": "文"}}"#))
            .collect();
        lines.push("not json".into());
        lines.push(r#"{"id": "bad", "year": 3000, "text": "文"}"#.into());
        let refs: Vec<&str> = lines.iter().map(|s| s.as_str()).collect();
        let manifest = write_corpus(&dir, &refs);
        let err = Corpus::ingest(&manifest).unwrap_err();
        assert!(err.to_string().contains("2 of 10"), "{err}");
    }

    #[test]
    fn ingest_tolerates_rejects_under_threshold() {
        let dir = TempDir::new().unwrap();
        let mut lines: Vec<String> = (0..19)
            .map(|i| format!(r#"{{"id": "d{i}", "year": 1905, "text": "文"}}"#))
            .collect();
        lines.push("not json".into());
        let refs: Vec<&str> = lines.iter().map(|s| s.as_str()).collect();
        let manifest = write_corpus(&dir, &refs);
        let (corpus, report) = Corpus::ingest(&manifest).unwrap();
        assert_eq!(corpus.len(), 19);
        assert_eq!(report.rejected, 1);
        assert_eq!(report.rejects[0].line, 20);
    }

    #[test]
    fn ingest_rejects_duplicate_ids_and_empty_text() {
        let dir = TempDir::new().unwrap();
        let manifest = write_corpus(
            &dir,
            &[
                r#"{"id": "a", "year": 1904, "text": "甲"}"#,
                r#"{"id": "a", "year": 1905, "text": "乙"}"#,
                r#"{"id": "b", "year": 1905, "text": "   "}"#,
                r#"{"id": "c", "year": 1906, "text": "丙"}"#,
                r#"{"id": "d", "year": 1906, "text": "丁"}"#,
                r#"{"id": "e", "year": 1906, "text": "戊"}"#,
                r#"{"id": "f", "year": 1906, "text": "己"}"#,
                r#"{"id": "g", "year": 1906, "text": "庚"}"#,
            ],
        );
        let (corpus, report) = Corpus::ingest(&manifest).unwrap();
        assert_eq!(corpus.len(), 6);
        assert_eq!(report.rejected, 2);
        assert!(report.rejects[0].reason.contains("duplicate id"));
        assert!(report.rejects[1].reason.contains("empty text"));
    }

    #[test]
    fn ingest_is_idempotent() {
        let dir = TempDir::new().unwrap();
        let manifest = write_corpus(
            &dir,
            &[
                r#"{"id": "a", "year": 1904, "text": "甲甲"}"#,
                r#"{"id": "b", "year": 1910, "text": "乙"}"#,
            ],
        );
        let (c1, r1) = Corpus::ingest(&manifest).unwrap();
        let (c2, r2) = Corpus::ingest(&manifest).unwrap();
        assert_eq!(format!("{:?}", c1.docs), format!("{:?}", c2.docs));
        assert_eq!(format!("{:?}", c1.year_index), format!("{:?}", c2.year_index));
        assert_eq!(
            serde_json::to_string(&r1).unwrap(),
            serde_json::to_string(&r2).unwrap()
        );
    }

    fn corpus_for_slicing(years: &[i32]) -> Corpus {
        let docs = years
            .iter()
            .enumerate()
            .map(|(i, &year)| Document {
                id: format!("d{i}"),
                year,
                title: None,
                text: "文".into(),
                normalized: None,
                tokens: None,
            })
            .collect();
        Corpus::from_documents(docs, 1900, 1960, None).unwrap()
    }

    #[test]
    fn slice_assigns_default_scheme() {
        let corpus = corpus_for_slicing(&[1907, 1950, 1925]);
        let buckets = corpus.slice(&default_slices()).unwrap();
        assert_eq!(buckets["1904-1909"], vec!["d0"]);
        assert_eq!(buckets["1920-1929"], vec!["d2"]);
        assert_eq!(buckets[UNASSIGNED_LABEL], vec!["d1"]);
        assert!(buckets["1910-1919"].is_empty());
    }

    #[test]
    fn slice_single_bucket_covers_all() {
        let corpus = corpus_for_slicing(&[1907, 1925, 1944]);
        let scheme = vec![TimeSliceSpec::new("all", 1900, 1960)];
        let buckets = corpus.slice(&scheme).unwrap();
        assert_eq!(buckets["all"].len(), 3);
        assert!(buckets[UNASSIGNED_LABEL].is_empty());
    }

    #[test]
    fn slice_rejects_overlap() {
        let corpus = corpus_for_slicing(&[1907]);
        let scheme = vec![
            TimeSliceSpec::new("a", 1904, 1910),
            TimeSliceSpec::new("b", 1910, 1919),
        ];
        assert!(corpus.slice(&scheme).is_err());
    }

    #[test]
    fn slice_partitions_corpus() {
        // Every document lands in exactly one bucket, for several schemes.
        let years: Vec<i32> = (0..200).map(|i| 1900 + (i * 7) % 61).collect();
        let corpus = corpus_for_slicing(&years);
        for scheme in [
            default_slices(),
            vec![TimeSliceSpec::new("early", 1900, 1929)],
            vec![
                TimeSliceSpec::new("a", 1900, 1919),
                TimeSliceSpec::new("b", 1920, 1939),
                TimeSliceSpec::new("c", 1940, 1960),
            ],
        ] {
            let buckets = corpus.slice(&scheme).unwrap();
            let total: usize = buckets.values().map(|v| v.len()).sum();
            assert_eq!(total, corpus.len());
        }
    }

    #[test]
    fn year_totals_requires_segmentation() {
        let corpus = corpus_for_slicing(&[1907]);
        assert!(corpus.year_totals().is_err());
    }
}
