//! Deterministic synthetic corpus generation.
//!
//! Real historical corpora in this domain cannot be redistributed, so every
//! end-to-end check runs against generated data instead: documents sample
//! words from disjoint topic vocabularies, planted drift words migrate from
//! one topic's documents to another's across slices, and a fraction of
//! characters is written in a "variant" form that only the bundled mapping
//! table restores. One seed fully determines every emitted byte.
//!
//! `generate` writes a complete, runnable pipeline input set: corpus JSONL,
//! manifest, segmentation dictionary, mapping table, per-category lexicon
//! files, a ready `config.json`, and a `summary.json` describing the planted
//! structure for verification.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::TimeSliceSpec;
use crate::embedding::Hyperparams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopicSpec {
    pub name: String,
    pub word_count: usize,
}

/// How a planted word's contexts move from the source topic to the
/// destination topic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DriftProfile {
    /// All occurrences switch topic at the onset slice.
    #[default]
    Step,
    /// The destination share ramps linearly from the onset slice to 1.0 in
    /// the final slice.
    Ramp,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedDrift {
    pub from_topic: String,
    pub to_topic: String,
    /// Slice index (0-based) at which the switch begins.
    pub onset_slice: usize,
    #[serde(default)]
    pub profile: DriftProfile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub slices: usize,
    pub docs_per_slice: usize,
    pub topics: Vec<TopicSpec>,
    pub planted: Vec<PlantedDrift>,
    pub seed: u64,
    pub sentences_per_doc: usize,
    pub words_per_sentence: usize,
    /// Occurrences of each planted word per slice.
    pub planted_occurrences_per_slice: usize,
    /// Probability that a character is written in its variant form.
    pub variant_rate: f64,
    pub start_year: i32,
    pub years_per_slice: usize,
    /// Training hyperparameters written into the emitted config.
    pub embedding: Hyperparams,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            slices: 5,
            docs_per_slice: 200,
            topics: vec![
                TopicSpec {
                    name: "alpha".into(),
                    word_count: 50,
                },
                TopicSpec {
                    name: "beta".into(),
                    word_count: 50,
                },
            ],
            planted: vec![PlantedDrift {
                from_topic: "alpha".into(),
                to_topic: "beta".into(),
                onset_slice: 2,
                profile: DriftProfile::Step,
            }],
            seed: 42,
            sentences_per_doc: 6,
            words_per_sentence: 12,
            planted_occurrences_per_slice: 400,
            variant_rate: 0.15,
            start_year: 1904,
            years_per_slice: 10,
            embedding: Hyperparams {
                dimension: 50,
                window: 5,
                negatives: 5,
                epochs: 5,
                min_count: 5,
                ..Hyperparams::default()
            },
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.slices < 1 {
            return Err(Error::Invalid("synthetic spec needs at least 1 slice".into()));
        }
        if self.docs_per_slice < 1 || self.sentences_per_doc < 1 || self.words_per_sentence < 1 {
            return Err(Error::Invalid("synthetic spec sizes must be positive".into()));
        }
        if self.topics.is_empty() {
            return Err(Error::Invalid("synthetic spec needs at least one topic".into()));
        }
        let mut names = std::collections::HashSet::new();
        for t in &self.topics {
            if t.word_count == 0 {
                return Err(Error::Invalid(format!("topic {:?} has no words", t.name)));
            }
            if !names.insert(t.name.as_str()) {
                return Err(Error::Invalid(format!("duplicate topic {:?}", t.name)));
            }
        }
        for p in &self.planted {
            for topic in [&p.from_topic, &p.to_topic] {
                if !names.contains(topic.as_str()) {
                    return Err(Error::Invalid(format!(
                        "planted drift references unknown topic {topic:?}"
                    )));
                }
            }
            if p.from_topic == p.to_topic {
                return Err(Error::Invalid(
                    "planted drift must cross two distinct topics".into(),
                ));
            }
            if p.onset_slice >= self.slices {
                return Err(Error::Invalid(format!(
                    "drift onset {} beyond slice count {}",
                    p.onset_slice, self.slices
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.variant_rate) {
            return Err(Error::Invalid("variant_rate must be in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn slice_specs(&self) -> Vec<TimeSliceSpec> {
        (0..self.slices)
            .map(|i| {
                let start = self.start_year + (i * self.years_per_slice) as i32;
                let end = start + self.years_per_slice as i32 - 1;
                TimeSliceSpec::new(format!("{start}-{end}"), start, end)
            })
            .collect()
    }
}

/// Everything a verification run needs to know about the generated corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSummary {
    pub slice_labels: Vec<String>,
    pub topics: BTreeMap<String, Vec<String>>,
    pub planted: Vec<PlantedSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedSummary {
    pub word: String,
    pub from_topic: String,
    pub to_topic: String,
    pub onset_slice: usize,
    pub profile: DriftProfile,
}

/// Destination-topic share for a planted word in a given slice.
pub fn destination_share(p: &PlantedDrift, slice: usize, total_slices: usize) -> f64 {
    if slice < p.onset_slice {
        return 0.0;
    }
    match p.profile {
        DriftProfile::Step => 1.0,
        DriftProfile::Ramp => {
            let span = (total_slices - p.onset_slice) as f64;
            (slice - p.onset_slice + 1) as f64 / span
        }
    }
}

/// Two-character words over sequential CJK code points. Each word gets a
/// canonical form and a variant form for its first character; the variant
/// maps back to the canonical one through the emitted mapping table.
struct WordPool {
    next: u32,
}

impl WordPool {
    fn new() -> WordPool {
        WordPool { next: 0x4E00 }
    }

    fn next_char(&mut self) -> char {
        loop {
            let c = char::from_u32(self.next).expect("BMP CJK range");
            self.next += 1;
            if crate::segment::is_cjk(c) {
                return c;
            }
        }
    }

    fn next_word(&mut self) -> (String, String, (char, char)) {
        let canonical_head = self.next_char();
        let tail = self.next_char();
        let variant_head = self.next_char();
        let canonical: String = [canonical_head, tail].iter().collect();
        let variant: String = [variant_head, tail].iter().collect();
        (canonical, variant, (variant_head, canonical_head))
    }
}

struct GeneratedWord {
    canonical: String,
    variant: String,
}

/// Generate the corpus and companion files into `out_dir`. Returns the
/// summary that was also written to `summary.json`.
pub fn generate(spec: &SyntheticSpec, out_dir: &Path) -> Result<SynthSummary> {
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);

    // Deterministic word material: topics first, then planted words.
    let mut pool = WordPool::new();
    let mut variant_pairs: Vec<(char, char)> = Vec::new();
    let mut topics: BTreeMap<String, Vec<GeneratedWord>> = BTreeMap::new();
    for topic in &spec.topics {
        let words = (0..topic.word_count)
            .map(|_| {
                let (canonical, variant, pair) = pool.next_word();
                variant_pairs.push(pair);
                GeneratedWord { canonical, variant }
            })
            .collect();
        topics.insert(topic.name.clone(), words);
    }
    let planted_words: Vec<GeneratedWord> = spec
        .planted
        .iter()
        .map(|_| {
            let (canonical, variant, pair) = pool.next_word();
            variant_pairs.push(pair);
            GeneratedWord { canonical, variant }
        })
        .collect();

    let slices = spec.slice_specs();

    // Documents: per slice, per topic in round-robin, each doc samples its
    // topic's words. Planted occurrences are injected afterwards at random
    // positions of randomly chosen matching documents.
    #[derive(Clone)]
    struct Doc {
        year: i32,
        topic: usize,
        sentences: Vec<Vec<usize>>, // word indices into its topic
    }
    let topic_names: Vec<&String> = topics.keys().collect();
    let n_topics = topic_names.len();
    let mut docs: Vec<Doc> = Vec::with_capacity(spec.slices * spec.docs_per_slice);
    for (si, slice) in slices.iter().enumerate() {
        for di in 0..spec.docs_per_slice {
            let topic = (si * spec.docs_per_slice + di) % n_topics;
            let year = rng.random_range(slice.start_year..=slice.end_year);
            let words = &topics[topic_names[topic]];
            let sentences = (0..spec.sentences_per_doc)
                .map(|_| {
                    (0..spec.words_per_sentence)
                        .map(|_| rng.random_range(0..words.len()))
                        .collect()
                })
                .collect();
            docs.push(Doc {
                year,
                topic,
                sentences,
            });
        }
    }

    // Planted insertions: (doc index, sentence, position) -> planted word id.
    let mut insertions: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); spec.planted.len()];
    for (pi, p) in spec.planted.iter().enumerate() {
        let from = topic_names.iter().position(|n| **n == p.from_topic).unwrap();
        let to = topic_names.iter().position(|n| **n == p.to_topic).unwrap();
        for si in 0..spec.slices {
            let share = destination_share(p, si, spec.slices);
            let dest_n = (spec.planted_occurrences_per_slice as f64 * share).round() as usize;
            let src_n = spec.planted_occurrences_per_slice - dest_n;
            for (topic, n) in [(from, src_n), (to, dest_n)] {
                let slice_docs: Vec<usize> = (si * spec.docs_per_slice
                    ..(si + 1) * spec.docs_per_slice)
                    .filter(|&i| docs[i].topic == topic)
                    .collect();
                if slice_docs.is_empty() && n > 0 {
                    return Err(Error::Invalid(format!(
                        "slice {si} has no documents of topic {:?} for planted insertions",
                        topic_names[topic]
                    )));
                }
                for _ in 0..n {
                    let doc = slice_docs[rng.random_range(0..slice_docs.len())];
                    let sent = rng.random_range(0..spec.sentences_per_doc);
                    let pos = rng.random_range(0..=spec.words_per_sentence);
                    insertions[pi].push((doc, sent, pos));
                }
            }
        }
    }

    // Render documents, applying variant spelling per occurrence.
    let mut corpus = String::new();
    for (i, doc) in docs.iter().enumerate() {
        let words = &topics[topic_names[doc.topic]];
        let mut text = String::new();
        for (sj, sentence) in doc.sentences.iter().enumerate() {
            let mut rendered: Vec<String> = sentence
                .iter()
                .map(|&wi| {
                    let w = &words[wi];
                    if rng.random::<f64>() < spec.variant_rate {
                        w.variant.clone()
                    } else {
                        w.canonical.clone()
                    }
                })
                .collect();
            // Stable order for this sentence's planted insertions.
            let mut here: Vec<(usize, usize)> = Vec::new();
            for (pi, list) in insertions.iter().enumerate() {
                for &(d, s, pos) in list {
                    if d == i && s == sj {
                        here.push((pos.min(rendered.len()), pi));
                    }
                }
            }
            here.sort();
            for &(pos, pi) in here.iter().rev() {
                let w = &planted_words[pi];
                let form = if rng.random::<f64>() < spec.variant_rate {
                    w.variant.clone()
                } else {
                    w.canonical.clone()
                };
                rendered.insert(pos, form);
            }
            text.push_str(&rendered.concat());
            text.push('。');
        }
        let record = serde_json::json!({
            "id": format!("doc-{i:05}"),
            "year": doc.year,
            "text": text,
        });
        let _ = writeln!(corpus, "{record}");
    }
    write_file(out_dir, "corpus.jsonl", &corpus)?;

    let (year_min, year_max) = (
        slices.first().unwrap().start_year,
        slices.last().unwrap().end_year,
    );
    let manifest = serde_json::json!({
        "documents": "corpus.jsonl",
        "year_min": year_min,
        "year_max": year_max,
    });
    write_file(
        out_dir,
        "manifest.json",
        &format!("{}\n", serde_json::to_string_pretty(&manifest).unwrap()),
    )?;

    // Dictionary over canonical forms only: normalization must happen first.
    let mut dict = String::from("# generated dictionary\n");
    for words in topics.values() {
        for w in words {
            let _ = writeln!(dict, "{}\t100", w.canonical);
        }
    }
    for w in &planted_words {
        let _ = writeln!(dict, "{}\t100", w.canonical);
    }
    write_file(out_dir, "dict.tsv", &dict)?;

    let mut table = String::from("# variant -> canonical\n");
    for (variant, canonical) in &variant_pairs {
        let _ = writeln!(table, "{variant}\t{canonical}");
    }
    write_file(out_dir, "variants.tsv", &table)?;

    // Lexicon files: one category per topic (A, B, C, D, F, G cycling),
    // planted words under category D.
    let categories = ["A", "B", "C", "F", "G"];
    let mut lexicon_files: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (ti, (_, words)) in topics.iter().enumerate() {
        let category = categories[ti % categories.len()];
        let file = format!("lexicon_{category}.txt");
        let entry = lexicon_files.entry(file).or_default();
        for w in words {
            entry.push(w.canonical.clone());
        }
    }
    lexicon_files.insert(
        "lexicon_D.txt".to_string(),
        planted_words.iter().map(|w| w.canonical.clone()).collect(),
    );
    let mut lexicon_config: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (file, words) in &lexicon_files {
        let category = file
            .trim_start_matches("lexicon_")
            .trim_end_matches(".txt")
            .to_string();
        write_file(out_dir, file, &(words.join("\n") + "\n"))?;
        lexicon_config.entry(category).or_default().push(file.clone());
    }

    let summary = SynthSummary {
        slice_labels: slices.iter().map(|s| s.label.clone()).collect(),
        topics: topics
            .iter()
            .map(|(name, words)| {
                (
                    name.clone(),
                    words.iter().map(|w| w.canonical.clone()).collect(),
                )
            })
            .collect(),
        planted: spec
            .planted
            .iter()
            .zip(&planted_words)
            .map(|(p, w)| PlantedSummary {
                word: w.canonical.clone(),
                from_topic: p.from_topic.clone(),
                to_topic: p.to_topic.clone(),
                onset_slice: p.onset_slice,
                profile: p.profile,
            })
            .collect(),
    };
    write_file(
        out_dir,
        "summary.json",
        &format!("{}\n", serde_json::to_string_pretty(&summary).unwrap()),
    )?;

    let config = crate::pipeline::PipelineConfig {
        manifest: "manifest.json".into(),
        mapping_tables: vec!["variants.tsv".into()],
        dictionaries: vec!["dict.tsv".into()],
        lexicon: lexicon_config
            .into_iter()
            .map(|(cat, files)| (cat, files.into_iter().map(Into::into).collect()))
            .collect(),
        slices: slices.clone(),
        output_dir: "out".into(),
        seed: spec.seed,
        embedding: spec.embedding,
        ..crate::pipeline::PipelineConfig::default()
    };
    write_file(out_dir, "config.json", &config.canonical_json()?)?;

    Ok(summary)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use sha2::{Digest, Sha256};
    use tempfile::TempDir;

    fn tree_hash(dir: &Path) -> String {
        let mut names: Vec<_> = fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        let mut hasher = Sha256::new();
        for name in names {
            hasher.update(name.as_bytes());
            hasher.update(fs::read(dir.join(&name)).unwrap());
        }
        format!("{:x}", hasher.finalize())
    }

    #[test]
    fn identical_seeds_yield_identical_files() {
        let spec = SyntheticSpec {
            docs_per_slice: 20,
            planted_occurrences_per_slice: 40,
            ..SyntheticSpec::default()
        };
        let d1 = TempDir::new().unwrap();
        let d2 = TempDir::new().unwrap();
        generate(&spec, d1.path()).unwrap();
        generate(&spec, d2.path()).unwrap();
        assert_eq!(tree_hash(d1.path()), tree_hash(d2.path()));

        let d3 = TempDir::new().unwrap();
        generate(
            &SyntheticSpec {
                seed: 43,
                ..spec.clone()
            },
            d3.path(),
        )
        .unwrap();
        assert_ne!(tree_hash(d1.path()), tree_hash(d3.path()));
    }

    #[test]
    fn rejects_contradictory_specs() {
        let mut spec = SyntheticSpec::default();
        spec.planted[0].onset_slice = 7;
        assert!(spec.validate().is_err());

        let mut spec = SyntheticSpec::default();
        spec.planted[0].to_topic = "alpha".into();
        assert!(spec.validate().is_err());

        let mut spec = SyntheticSpec::default();
        spec.planted[0].to_topic = "missing".into();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn generated_corpus_ingests_and_segments() {
        use crate::corpus::Corpus;
        use crate::normalize::MappingTable;
        use crate::segment::{segment_corpus, SegDictionary, SegmentOptions};

        let spec = SyntheticSpec {
            slices: 2,
            docs_per_slice: 10,
            planted_occurrences_per_slice: 20,
            ..SyntheticSpec::default()
        };
        let dir = TempDir::new().unwrap();
        let summary = generate(&spec, dir.path()).unwrap();

        let (mut corpus, report) = Corpus::ingest(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(report.rejected, 0);
        assert_eq!(corpus.len(), 20);

        let table = MappingTable::load(&dir.path().join("variants.tsv")).unwrap();
        corpus.normalize_with(move |t| table.apply(t));
        let dict = SegDictionary::load(&dir.path().join("dict.tsv")).unwrap();
        segment_corpus(&mut corpus, &dict, &SegmentOptions::default()).unwrap();

        // After normalization every CJK token is a dictionary word or the
        // sentence separator; without it the variant forms would be OOV.
        let mut word_tokens = 0u64;
        for doc in corpus.documents() {
            for tok in doc.tokens.as_ref().unwrap() {
                if tok == "。" {
                    continue;
                }
                assert!(
                    dict.frequency(tok).is_some(),
                    "token {tok:?} not in dictionary"
                );
                word_tokens += 1;
            }
        }
        assert!(word_tokens > 0);
        assert_eq!(summary.planted.len(), 1);
    }

    #[test]
    fn destination_share_profiles() {
        let step = PlantedDrift {
            from_topic: "a".into(),
            to_topic: "b".into(),
            onset_slice: 2,
            profile: DriftProfile::Step,
        };
        assert_eq!(destination_share(&step, 0, 5), 0.0);
        assert_eq!(destination_share(&step, 1, 5), 0.0);
        assert_eq!(destination_share(&step, 2, 5), 1.0);
        assert_eq!(destination_share(&step, 4, 5), 1.0);

        let ramp = PlantedDrift {
            profile: DriftProfile::Ramp,
            ..step
        };
        assert_eq!(destination_share(&ramp, 1, 5), 0.0);
        assert!((destination_share(&ramp, 2, 5) - 1.0 / 3.0).abs() < 1e-12);
        assert!((destination_share(&ramp, 3, 5) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(destination_share(&ramp, 4, 5), 1.0);
    }
}
