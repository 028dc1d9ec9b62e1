//! Dictionary-driven word segmentation.
//!
//! Text is pre-chunked into maximal runs by character class. CJK runs go
//! through a segmentation lattice: every dictionary word spanning a position
//! is an edge, plus a single-character fallback edge, so every input has a
//! path. Decoding picks the path maximizing the sum of log unigram
//! probabilities, with out-of-dictionary single characters scored at the
//! floor probability `1/total_frequency`. Ties prefer fewer tokens, then the
//! leftmost-longest segmentation, so output is identical across platforms.
//!
//! Non-CJK handling: alphabetic runs and numeric runs each become one token,
//! whitespace runs one token, and every other scalar is a token of its own.
//! Concatenating the tokens always reproduces the input exactly; which tokens
//! count as lexical items is decided separately (see [`SegmentOptions`]).

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::{Corpus, YearTotals};
use crate::error::{Error, Result};

/// CJK unified ideograph ranges (including extensions and compatibility
/// ideographs); the spans the segmentation lattice operates on.
pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xF900..=0xFAFF
        | 0x20000..=0x2A6DF
        | 0x2A700..=0x2B73F
        | 0x2B740..=0x2B81F
        | 0x2B820..=0x2CEAF
        | 0x2CEB0..=0x2EBEF
        | 0x2F800..=0x2FA1F)
}

/// What a token is, derived from its first scalar value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    CjkWord,
    Latin,
    Digit,
    Whitespace,
    Punct,
}

impl TokenKind {
    pub fn of(token: &str) -> TokenKind {
        match token.chars().next() {
            Some(c) if is_cjk(c) => TokenKind::CjkWord,
            Some(c) if c.is_whitespace() => TokenKind::Whitespace,
            Some(c) if c.is_numeric() => TokenKind::Digit,
            Some(c) if c.is_alphabetic() => TokenKind::Latin,
            _ => TokenKind::Punct,
        }
    }
}

/// Segmentation flags; `count_punctuation` widens what counts as a lexical
/// item (the denominator of every normalized frequency).
#[derive(Debug, Clone, Copy, Default)]
pub struct SegmentOptions {
    pub count_punctuation: bool,
}

impl SegmentOptions {
    /// Whether a token counts toward lexical-item totals. Whitespace never
    /// counts; punctuation only when configured.
    pub fn is_lexical(&self, token: &str) -> bool {
        match TokenKind::of(token) {
            TokenKind::CjkWord | TokenKind::Latin | TokenKind::Digit => true,
            TokenKind::Whitespace => false,
            TokenKind::Punct => self.count_punctuation,
        }
    }
}

/// Word→frequency dictionary backing the lattice.
#[derive(Debug, Clone)]
pub struct SegDictionary {
    entries: HashMap<String, u64>,
    total_frequency: u64,
    max_word_chars: usize,
}

impl SegDictionary {
    pub fn from_entries(entries: impl IntoIterator<Item = (String, u64)>) -> Result<SegDictionary> {
        let mut map = HashMap::new();
        for (word, freq) in entries {
            validate_entry(&word, freq)?;
            if map.insert(word.clone(), freq).is_some() {
                return Err(Error::Invalid(format!("duplicate dictionary word {word:?}")));
            }
        }
        SegDictionary::from_map(map)
    }

    fn from_map(map: HashMap<String, u64>) -> Result<SegDictionary> {
        if map.is_empty() {
            return Err(Error::Invalid("empty dictionary".into()));
        }
        let total_frequency = map.values().sum();
        let max_word_chars = map.keys().map(|w| w.chars().count()).max().unwrap_or(1);
        Ok(SegDictionary {
            entries: map,
            total_frequency,
            max_word_chars,
        })
    }

    /// Load a single `word<TAB>frequency` TSV. Duplicate words within one
    /// file are an error; merging across files is [`SegDictionary::load_merged`].
    pub fn load(path: &Path) -> Result<SegDictionary> {
        SegDictionary::load_merged(&[path])
    }

    /// Load several dictionary files; later files override the frequency of
    /// words already present in earlier ones.
    pub fn load_merged(paths: &[impl AsRef<Path>]) -> Result<SegDictionary> {
        let mut map: HashMap<String, u64> = HashMap::new();
        for path in paths {
            let path = path.as_ref();
            let mut seen_here: HashSet<String> = HashSet::new();
            for (line_no, word, freq) in parse_dict_file(path)? {
                if !seen_here.insert(word.clone()) {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!("duplicate dictionary word {word:?}"),
                    ));
                }
                map.insert(word, freq);
            }
        }
        SegDictionary::from_map(map)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_frequency(&self) -> u64 {
        self.total_frequency
    }

    pub fn frequency(&self, word: &str) -> Option<u64> {
        self.entries.get(word).copied()
    }

    pub fn words(&self) -> impl Iterator<Item = (&str, u64)> {
        self.entries.iter().map(|(w, &f)| (w.as_str(), f))
    }

    pub fn max_word_chars(&self) -> usize {
        self.max_word_chars
    }

    /// Log probability of a lattice edge: dictionary frequency over the
    /// total, or the floor `1/total` for an out-of-dictionary single char.
    pub fn edge_score(&self, word: &str) -> f64 {
        let freq = self.entries.get(word).copied().unwrap_or(1).max(1);
        (freq as f64 / self.total_frequency as f64).ln()
    }

    /// Score a token sequence the way the decoder accumulates it
    /// (right-associated sum), so equality checks against the decoder are
    /// exact rather than tolerance-based.
    pub fn path_score(&self, tokens: &[impl AsRef<str>]) -> f64 {
        let mut score = 0.0;
        for tok in tokens.iter().rev() {
            score = self.edge_score(tok.as_ref()) + score;
        }
        score
    }
}

fn validate_entry(word: &str, freq: u64) -> Result<()> {
    if word.is_empty() {
        return Err(Error::Invalid("empty dictionary word".into()));
    }
    if freq == 0 {
        return Err(Error::Invalid(format!(
            "dictionary word {word:?} has zero frequency"
        )));
    }
    if let Some(c) = word.chars().find(|&c| !is_cjk(c)) {
        return Err(Error::Invalid(format!(
            "dictionary word {word:?} contains non-CJK scalar {c:?}"
        )));
    }
    Ok(())
}

fn parse_dict_file(path: &Path) -> Result<Vec<(usize, String, u64)>> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        let line_no = idx + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (word, freq) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, line_no, "expected `word<TAB>frequency`"))?;
        let freq: i64 = freq
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("bad frequency {freq:?}")))?;
        if freq <= 0 {
            return Err(Error::parse(
                path,
                line_no,
                format!("frequency must be positive, got {freq}"),
            ));
        }
        validate_entry(word, freq as u64).map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        out.push((line_no, word.to_string(), freq as u64));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CharClass {
    Cjk,
    Latin,
    Digit,
    Whitespace,
    Punct,
}

fn classify(c: char) -> CharClass {
    if is_cjk(c) {
        CharClass::Cjk
    } else if c.is_whitespace() {
        CharClass::Whitespace
    } else if c.is_numeric() {
        CharClass::Digit
    } else if c.is_alphabetic() {
        CharClass::Latin
    } else {
        CharClass::Punct
    }
}

/// Segment text into tokens. Concatenating the result reproduces the input.
pub fn segment(dict: &SegDictionary, text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut start = 0;
    while start < chars.len() {
        let class = classify(chars[start]);
        let mut end = start + 1;
        while end < chars.len() && classify(chars[end]) == class {
            end += 1;
        }
        match class {
            CharClass::Cjk => decode_run(dict, &chars[start..end], &mut tokens),
            CharClass::Latin | CharClass::Digit | CharClass::Whitespace => {
                tokens.push(chars[start..end].iter().collect());
            }
            CharClass::Punct => {
                for &c in &chars[start..end] {
                    tokens.push(c.to_string());
                }
            }
        }
        start = end;
    }
    tokens
}

/// Maximum-probability path over one CJK run.
///
/// Dynamic program over suffixes, right to left: `best[i]` is the optimal
/// (score, token count, edge end) for `run[i..]`. Candidate comparison is
/// score (higher wins, exact float equality for ties), then token count
/// (fewer wins), then edge length (longer wins), which realizes the
/// leftmost-longest rule.
fn decode_run(dict: &SegDictionary, run: &[char], tokens: &mut Vec<String>) {
    let n = run.len();
    if n == 0 {
        return;
    }
    // (score, tokens, next index)
    let mut best: Vec<(f64, u32, usize)> = vec![(0.0, 0, usize::MAX); n + 1];
    best[n] = (0.0, 0, n);

    let total = dict.total_frequency() as f64;
    let floor = (1.0 / total).ln();
    let mut word = String::new();
    for i in (0..n).rev() {
        word.clear();
        let mut chosen: Option<(f64, u32, usize)> = None;
        let max_j = (i + dict.max_word_chars()).min(n);
        for j in i + 1..=max_j {
            word.push(run[j - 1]);
            let edge = if j == i + 1 {
                Some(match dict.frequency(&word) {
                    Some(freq) => (freq as f64 / total).ln(),
                    None => floor,
                })
            } else {
                dict.frequency(&word).map(|freq| (freq as f64 / total).ln())
            };
            let Some(edge_score) = edge else { continue };
            let (suffix_score, suffix_tokens, _) = best[j];
            let cand = (edge_score + suffix_score, suffix_tokens + 1, j);
            let better = match &chosen {
                None => true,
                Some(cur) => {
                    cand.0 > cur.0
                        || (cand.0 == cur.0
                            && (cand.1 < cur.1 || (cand.1 == cur.1 && cand.2 > cur.2)))
                }
            };
            if better {
                chosen = Some(cand);
            }
        }
        best[i] = chosen.expect("single-character fallback edge always exists");
    }

    let mut i = 0;
    while i < n {
        let j = best[i].2;
        tokens.push(run[i..j].iter().collect());
        i = j;
    }
}

/// Populate every document's token list and cache per-year lexical totals.
/// Parallel over documents; output independent of worker count.
pub fn segment_corpus(
    corpus: &mut Corpus,
    dict: &SegDictionary,
    options: &SegmentOptions,
) -> Result<()> {
    if !corpus.is_normalized() {
        return Err(Error::Invalid(
            "corpus must be normalized before segmentation".into(),
        ));
    }
    let per_doc: Vec<(i32, u64)> = {
        let docs = corpus.docs_mut();
        docs.par_iter_mut()
            .map(|doc| {
                let tokens = segment(dict, Corpus::working_text(doc));
                let lexical = tokens.iter().filter(|t| options.is_lexical(t)).count() as u64;
                doc.tokens = Some(tokens);
                (doc.year, lexical)
            })
            .collect()
    };
    let mut totals = YearTotals::default();
    for (year, count) in per_doc {
        *totals.0.entry(year).or_insert(0) += count;
    }
    corpus.set_totals(totals);
    Ok(())
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Exhaustive-enumeration reference decoder for small instances.

    use super::SegDictionary;

    /// All lattice-expressible segmentations: every multi-character token
    /// must be a dictionary word; single characters are always allowed.
    pub fn enumerate(dict: &SegDictionary, run: &[char]) -> Vec<Vec<String>> {
        let n = run.len();
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        // Bit i of mask set = boundary after character i.
        for mask in 0..(1u32 << (n - 1)) {
            let mut tokens = Vec::new();
            let mut start = 0;
            let mut valid = true;
            for i in 0..n {
                let boundary = i == n - 1 || mask & (1 << i) != 0;
                if boundary {
                    let tok: String = run[start..=i].iter().collect();
                    if i - start > 0 && dict.frequency(&tok).is_none() {
                        valid = false;
                        break;
                    }
                    tokens.push(tok);
                    start = i + 1;
                }
            }
            if valid {
                out.push(tokens);
            }
        }
        out
    }

    /// The decoder's full preference order: score desc (bitwise equality for
    /// ties), token count asc, then leftmost-longest.
    pub fn best_segmentation(dict: &SegDictionary, run: &[char]) -> (Vec<String>, f64) {
        let mut best: Option<(Vec<String>, f64)> = None;
        for cand in enumerate(dict, run) {
            let score = dict.path_score(&cand);
            let better = match &best {
                None => true,
                Some((cur_tokens, cur_score)) => {
                    score > *cur_score
                        || (score == *cur_score
                            && (cand.len() < cur_tokens.len()
                                || (cand.len() == cur_tokens.len()
                                    && leftmost_longer(&cand, cur_tokens))))
                }
            };
            if better {
                best = Some((cand, score));
            }
        }
        best.expect("all-single-character segmentation always valid")
    }

    fn leftmost_longer(a: &[String], b: &[String]) -> bool {
        for (x, y) in a.iter().zip(b.iter()) {
            let (lx, ly) = (x.chars().count(), y.chars().count());
            if lx != ly {
                return lx > ly;
            }
        }
        false
    }
}
