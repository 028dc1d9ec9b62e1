//! Category-tagged lexicons and corpus frequency statistics.
//!
//! Lexicon entries are normalized with the same mapping tables as the corpus
//! and pre-segmented with the corpus dictionary, so an entry the segmenter
//! splits (four-character transliterations, typically) is matched as a
//! contiguous token n-gram. Counting is token-exact rather than substring:
//! a hit on a longer word never double-counts its prefix.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::normalize::MappingTable;
use crate::segment::{segment, SegDictionary};

/// Lexicon category labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    A,
    B,
    C,
    D,
    F,
    G,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::A,
        Category::B,
        Category::C,
        Category::D,
        Category::F,
        Category::G,
    ];

    pub fn parse(s: &str) -> Result<Category> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Category::A),
            "B" => Ok(Category::B),
            "C" => Ok(Category::C),
            "D" => Ok(Category::D),
            "F" => Ok(Category::F),
            "G" => Ok(Category::G),
            other => Err(Error::Invalid(format!("unknown lexicon category {other:?}"))),
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Category::A => "A",
            Category::B => "B",
            Category::C => "C",
            Category::D => "D",
            Category::F => "F",
            Category::G => "G",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct LexiconEntry {
    /// Normalized surface form.
    pub word: String,
    pub category: Category,
    /// The entry as the corpus dictionary segments it; multi-token entries
    /// are matched as contiguous n-grams.
    pub gram: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DuplicateReport {
    pub word: String,
    pub kept: Category,
    pub dropped: Category,
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    duplicates: Vec<DuplicateReport>,
    sizes: BTreeMap<Category, usize>,
}

impl Lexicon {
    /// Load `(path, category)` word files (one word per line, `#` comments).
    /// Words are normalized with `table` when given and pre-segmented with
    /// `dict`. A word appearing in several categories is kept in the
    /// first-listed one and reported.
    pub fn load(
        files: &[(impl AsRef<Path>, Category)],
        table: Option<&MappingTable>,
        dict: &SegDictionary,
    ) -> Result<Lexicon> {
        let mut words = Vec::new();
        for (path, category) in files {
            let path = path.as_ref();
            let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            for line in raw.lines() {
                let word = line.trim();
                if word.is_empty() || word.starts_with('#') {
                    continue;
                }
                let word = match table {
                    Some(t) => t.apply(word),
                    None => word.to_string(),
                };
                words.push((word, *category));
            }
        }
        Lexicon::from_words(words, dict)
    }

    pub fn from_words(
        words: impl IntoIterator<Item = (String, Category)>,
        dict: &SegDictionary,
    ) -> Result<Lexicon> {
        let mut seen: HashMap<String, Category> = HashMap::new();
        let mut entries = Vec::new();
        let mut duplicates = Vec::new();
        for (word, category) in words {
            if let Some(&kept) = seen.get(&word) {
                duplicates.push(DuplicateReport {
                    word,
                    kept,
                    dropped: category,
                });
                continue;
            }
            seen.insert(word.clone(), category);
            let gram = segment(dict, &word);
            entries.push(LexiconEntry {
                word,
                category,
                gram,
            });
        }
        if entries.is_empty() {
            return Err(Error::Invalid("empty lexicon".into()));
        }
        let mut sizes = BTreeMap::new();
        for e in &entries {
            *sizes.entry(e.category).or_insert(0) += 1;
        }
        Ok(Lexicon {
            entries,
            duplicates,
            sizes,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn duplicates(&self) -> &[DuplicateReport] {
        &self.duplicates
    }

    pub fn category_size(&self, category: Category) -> usize {
        self.sizes.get(&category).copied().unwrap_or(0)
    }

    pub fn words_in(&self, category: Category) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.category == category)
            .map(|e| e.word.as_str())
            .collect()
    }
}

/// Per-year counts and normalized frequencies for one word or category.
///
/// `counts` covers every year present in the corpus totals (zero-filled);
/// `frequency[y] = counts[y] / year_total[y]`, defined only where the total
/// is positive.
#[derive(Debug, Clone, Serialize)]
pub struct FrequencySeries {
    pub subject: String,
    pub counts: BTreeMap<i32, u64>,
    pub frequency: BTreeMap<i32, f64>,
}

impl FrequencySeries {
    fn from_counts(subject: String, by_year: BTreeMap<i32, u64>, corpus: &Corpus) -> Result<Self> {
        let totals = corpus.year_totals()?;
        let mut counts = BTreeMap::new();
        let mut frequency = BTreeMap::new();
        for year in totals.years() {
            let count = by_year.get(&year).copied().unwrap_or(0);
            counts.insert(year, count);
            let total = totals.get(year);
            if total > 0 {
                frequency.insert(year, count as f64 / total as f64);
            }
        }
        Ok(FrequencySeries {
            subject,
            counts,
            frequency,
        })
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// Exact token n-gram occurrence counting over segmented documents.
///
/// Grams are grouped by first token; each document is scanned once. All
/// contiguous positions are counted, so overlapping occurrences of a
/// self-overlapping gram each count.
fn count_grams(corpus: &Corpus, grams: &[&[String]]) -> Result<Vec<BTreeMap<i32, u64>>> {
    if !corpus.is_segmented() {
        return Err(Error::Invalid("corpus not yet segmented".into()));
    }
    let mut by_first: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, gram) in grams.iter().enumerate() {
        if let Some(first) = gram.first() {
            by_first.entry(first.as_str()).or_default().push(i);
        }
    }

    let per_doc: Vec<(i32, HashMap<usize, u64>)> = corpus
        .documents()
        .par_iter()
        .map(|doc| {
            let tokens = doc.tokens.as_deref().unwrap_or(&[]);
            let mut hits: HashMap<usize, u64> = HashMap::new();
            for (pos, token) in tokens.iter().enumerate() {
                if let Some(candidates) = by_first.get(token.as_str()) {
                    for &gi in candidates {
                        let gram = grams[gi];
                        if pos + gram.len() <= tokens.len()
                            && tokens[pos..pos + gram.len()] == *gram
                        {
                            *hits.entry(gi).or_insert(0) += 1;
                        }
                    }
                }
            }
            (doc.year, hits)
        })
        .collect();

    let mut out: Vec<BTreeMap<i32, u64>> = vec![BTreeMap::new(); grams.len()];
    for (year, hits) in per_doc {
        for (gi, n) in hits {
            *out[gi].entry(year).or_insert(0) += n;
        }
    }
    Ok(out)
}

/// Frequency series for arbitrary query words. Words are segmented with the
/// dictionary so multi-token queries match their n-gram form; absent words
/// yield all-zero series.
pub fn term_counts(
    corpus: &Corpus,
    dict: &SegDictionary,
    words: &[String],
) -> Result<BTreeMap<String, FrequencySeries>> {
    let grams: Vec<Vec<String>> = words.iter().map(|w| segment(dict, w)).collect();
    let gram_refs: Vec<&[String]> = grams.iter().map(|g| g.as_slice()).collect();
    let counted = count_grams(corpus, &gram_refs)?;
    let mut out = BTreeMap::new();
    for (word, by_year) in words.iter().zip(counted) {
        out.insert(
            word.clone(),
            FrequencySeries::from_counts(word.clone(), by_year, corpus)?,
        );
    }
    Ok(out)
}

/// Per-word series for every lexicon entry, keyed by normalized word.
pub fn word_series(
    corpus: &Corpus,
    lexicon: &Lexicon,
) -> Result<BTreeMap<String, FrequencySeries>> {
    let gram_refs: Vec<&[String]> = lexicon.entries.iter().map(|e| e.gram.as_slice()).collect();
    let counted = count_grams(corpus, &gram_refs)?;
    let mut out = BTreeMap::new();
    for (entry, by_year) in lexicon.entries.iter().zip(counted) {
        out.insert(
            entry.word.clone(),
            FrequencySeries::from_counts(entry.word.clone(), by_year, corpus)?,
        );
    }
    Ok(out)
}

/// One series per category: the sum of its member words' counts.
pub fn category_series(
    corpus: &Corpus,
    lexicon: &Lexicon,
) -> Result<BTreeMap<Category, FrequencySeries>> {
    let gram_refs: Vec<&[String]> = lexicon.entries.iter().map(|e| e.gram.as_slice()).collect();
    let counted = count_grams(corpus, &gram_refs)?;
    let mut sums: BTreeMap<Category, BTreeMap<i32, u64>> = BTreeMap::new();
    for (entry, by_year) in lexicon.entries.iter().zip(&counted) {
        let acc = sums.entry(entry.category).or_default();
        for (&year, &n) in by_year {
            *acc.entry(year).or_insert(0) += n;
        }
    }
    let mut out = BTreeMap::new();
    for category in Category::ALL {
        if lexicon.category_size(category) == 0 {
            continue;
        }
        let by_year = sums.remove(&category).unwrap_or_default();
        out.insert(
            category,
            FrequencySeries::from_counts(category.to_string(), by_year, corpus)?,
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct CategorySummary {
    pub category: Category,
    pub word_count: usize,
    pub total_count: u64,
    /// `total_count / word_count`, in real arithmetic.
    pub average: f64,
    pub top_words: Vec<(String, u64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioPair {
    pub per_word_average: f64,
    pub total: f64,
}

/// Per-category word counts, totals, averages, and top words, plus
/// cross-category ratios. The per-word and total ratios differ in general
/// and both are reported; neither is asserted anywhere.
#[derive(Debug, Clone, Serialize)]
pub struct AppendixReport {
    pub categories: Vec<CategorySummary>,
    pub zero_count_words: usize,
    pub below_threshold_words: usize,
    pub rare_threshold: u64,
    /// Category D relative to category A, when both exist.
    pub ratio_d_a: Option<RatioPair>,
    /// Category D relative to the combined transliteration categories (F+G).
    pub ratio_d_fg: Option<RatioPair>,
}

/// Build the per-category report. `top_n` caps the most-frequent-word lists;
/// `rare_threshold` feeds the zero/rare statistics.
pub fn appendix_report(
    corpus: &Corpus,
    lexicon: &Lexicon,
    top_n: usize,
    rare_threshold: u64,
) -> Result<AppendixReport> {
    let per_word = word_series(corpus, lexicon)?;
    let mut categories = Vec::new();
    for category in Category::ALL {
        let word_count = lexicon.category_size(category);
        if word_count == 0 {
            continue;
        }
        let mut totals: Vec<(String, u64)> = lexicon
            .entries
            .iter()
            .filter(|e| e.category == category)
            .map(|e| (e.word.clone(), per_word[&e.word].total()))
            .collect();
        totals.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let total_count: u64 = totals.iter().map(|(_, n)| n).sum();
        let average = total_count as f64 / word_count as f64;
        categories.push(CategorySummary {
            category,
            word_count,
            total_count,
            average,
            top_words: totals.into_iter().take(top_n).collect(),
        });
    }

    let zero_count_words = per_word.values().filter(|s| s.total() == 0).count();
    let below_threshold_words = per_word
        .values()
        .filter(|s| s.total() < rare_threshold)
        .count();

    let summary = |cat: Category| categories.iter().find(|c| c.category == cat);
    let ratio = |num_total: u64, num_words: usize, den_total: u64, den_words: usize| {
        (den_total > 0).then(|| RatioPair {
            per_word_average: (num_total as f64 / num_words as f64)
                / (den_total as f64 / den_words as f64),
            total: num_total as f64 / den_total as f64,
        })
    };
    let ratio_d_a = match (summary(Category::D), summary(Category::A)) {
        (Some(d), Some(a)) => ratio(d.total_count, d.word_count, a.total_count, a.word_count),
        _ => None,
    };
    let ratio_d_fg = match (
        summary(Category::D),
        summary(Category::F),
        summary(Category::G),
    ) {
        (Some(d), Some(f), Some(g)) => ratio(
            d.total_count,
            d.word_count,
            f.total_count + g.total_count,
            f.word_count + g.word_count,
        ),
        (Some(d), Some(f), None) => {
            ratio(d.total_count, d.word_count, f.total_count, f.word_count)
        }
        (Some(d), None, Some(g)) => {
            ratio(d.total_count, d.word_count, g.total_count, g.word_count)
        }
        _ => None,
    };

    Ok(AppendixReport {
        categories,
        zero_count_words,
        below_threshold_words,
        rare_threshold,
        ratio_d_a,
        ratio_d_fg,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ZeroRareReport {
    pub threshold: u64,
    /// Words with no occurrences at all, sorted.
    pub zero: Vec<String>,
    /// Words occurring fewer than `threshold` times (including zero),
    /// sorted by count then word.
    pub rare: Vec<(String, u64)>,
}

pub fn zero_and_rare_report(
    corpus: &Corpus,
    lexicon: &Lexicon,
    threshold: u64,
) -> Result<ZeroRareReport> {
    let per_word = word_series(corpus, lexicon)?;
    let mut zero: Vec<String> = per_word
        .iter()
        .filter(|(_, s)| s.total() == 0)
        .map(|(w, _)| w.clone())
        .collect();
    zero.sort();
    let mut rare: Vec<(String, u64)> = per_word
        .iter()
        .map(|(w, s)| (w.clone(), s.total()))
        .filter(|&(_, n)| n < threshold)
        .collect();
    rare.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    Ok(ZeroRareReport {
        threshold,
        zero,
        rare,
    })
}

/// Write series as CSV rows `year, subject, count, frequency, per_mille`,
/// sorted by subject then year. Frequencies are emitted raw and per-mille.
pub fn series_to_csv<'a>(series: impl IntoIterator<Item = &'a FrequencySeries>) -> Result<String> {
    let mut rows: Vec<&FrequencySeries> = series.into_iter().collect();
    rows.sort_by(|a, b| a.subject.cmp(&b.subject));
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["year", "subject", "count", "frequency", "per_mille"])
        .map_err(csv_error)?;
    for s in rows {
        for (&year, &count) in &s.counts {
            let (freq, per_mille) = match s.frequency.get(&year) {
                Some(&f) => (format!("{:.9e}", f), format!("{:.6}", f * 1000.0)),
                None => (String::new(), String::new()),
            };
            writer
                .write_record([
                    year.to_string(),
                    s.subject.clone(),
                    count.to_string(),
                    freq,
                    per_mille,
                ])
                .map_err(csv_error)?;
        }
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Invalid(e.to_string()))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Invalid(format!("csv write failed: {e}"))
}
