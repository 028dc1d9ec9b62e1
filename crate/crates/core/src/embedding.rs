//! Skip-gram with negative sampling, trained independently per time slice.
//!
//! The objective for a center word `w` with context word `c` and negatives
//! `n_1..n_k` drawn from the unigram noise distribution is
//!
//! ```text
//! loss = -log sigma(u_c . v_w) - sum_i log sigma(-u_{n_i} . v_w)
//! ```
//!
//! where `v` are input vectors and `u` output vectors. Each SGD step applies
//! the exact gradient of one example ([`sgns_example_grad`]); training also
//! uses a dynamic window (uniform 1..=window per position), frequent-word
//! subsampling, and linear learning-rate decay down to 1e-4 of the initial
//! rate. With a fixed seed the whole procedure is deterministic, including
//! the RNG draw order: per position one subsampling draw (only when the
//! word's frequency exceeds the threshold), one window draw, then `k`
//! negative draws per context pair.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Hyperparams {
    pub dimension: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub min_count: u64,
    /// Frequent-word subsampling threshold `t`; a word with frequency `f > t`
    /// is discarded with probability `1 - sqrt(t/f)`.
    pub subsample: f64,
    /// Noise distribution exponent applied to raw counts.
    pub noise_alpha: f64,
    pub initial_lr: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            dimension: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            min_count: 10,
            subsample: 1e-4,
            noise_alpha: 0.75,
            initial_lr: 0.025,
        }
    }
}

impl Hyperparams {
    fn validate(&self) -> Result<()> {
        if self.dimension < 2 {
            return Err(Error::Invalid("embedding dimension must be >= 2".into()));
        }
        if self.window < 1 {
            return Err(Error::Invalid("window must be >= 1".into()));
        }
        if self.negatives < 1 {
            return Err(Error::Invalid("negatives must be >= 1".into()));
        }
        if self.epochs < 1 {
            return Err(Error::Invalid("epochs must be >= 1".into()));
        }
        if !self.initial_lr.is_finite() || self.initial_lr <= 0.0 {
            return Err(Error::Invalid("initial_lr must be positive".into()));
        }
        Ok(())
    }
}

/// Frequency-ordered vocabulary with the unigram noise distribution.
#[derive(Debug, Clone)]
pub struct Vocab {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    noise: Vec<f64>,
    noise_cdf: Vec<f64>,
    total_tokens: u64,
}

impl Vocab {
    /// Build from sentences, keeping words with count >= `min_count`.
    /// Order is descending count, ties broken by word, so indices are
    /// deterministic.
    pub fn build(sentences: &[Vec<String>], min_count: u64, noise_alpha: f64) -> Result<Vocab> {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for sent in sentences {
            for tok in sent {
                *counts.entry(tok.as_str()).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<(&str, u64)> = counts
            .into_iter()
            .filter(|&(_, n)| n >= min_count)
            .collect();
        if kept.is_empty() {
            return Err(Error::Invalid(format!(
                "empty vocabulary: no word reaches min_count {min_count}"
            )));
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        Vocab::from_sorted(
            kept.into_iter()
                .map(|(w, n)| (w.to_string(), n))
                .collect::<Vec<_>>(),
            noise_alpha,
        )
    }

    fn from_sorted(kept: Vec<(String, u64)>, noise_alpha: f64) -> Result<Vocab> {
        if kept.is_empty() {
            return Err(Error::Invalid("empty vocabulary".into()));
        }
        let words: Vec<String> = kept.iter().map(|(w, _)| w.clone()).collect();
        let counts: Vec<u64> = kept.iter().map(|&(_, n)| n).collect();
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        let weights: Vec<f64> = counts
            .iter()
            .map(|&n| (n as f64).powf(noise_alpha))
            .collect();
        let z: f64 = weights.iter().sum();
        let noise: Vec<f64> = weights.iter().map(|w| w / z).collect();
        let mut noise_cdf = Vec::with_capacity(noise.len());
        let mut acc = 0.0;
        for p in &noise {
            acc += p;
            noise_cdf.push(acc);
        }
        if let Some(last) = noise_cdf.last_mut() {
            *last = 1.0;
        }
        let total_tokens = counts.iter().sum();
        Ok(Vocab {
            words,
            counts,
            index,
            noise,
            noise_cdf,
            total_tokens,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, i: usize) -> &str {
        &self.words[i]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn count(&self, i: usize) -> u64 {
        self.counts[i]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn lookup(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn noise_probability(&self, i: usize) -> f64 {
        self.noise[i]
    }

    pub fn noise_sum(&self) -> f64 {
        self.noise.iter().sum()
    }

    fn sample_noise(&self, u: f64) -> u32 {
        self.noise_cdf.partition_point(|&cdf| cdf <= u) as u32
    }
}

/// Row-major dense matrix; one row per vocabulary word.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Matrix> {
        let n = rows.len();
        let cols = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(n * cols);
        for row in &rows {
            if row.len() != cols {
                return Err(Error::Invalid("ragged matrix rows".into()));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { rows: n, cols, data })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Copy with every row scaled to unit Euclidean norm (zero rows kept).
    pub fn normalized_rows(&self) -> Matrix {
        let mut out = self.clone();
        for i in 0..out.rows {
            let row = out.row_mut(i);
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|x| *x /= norm);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainMeta {
    pub hyperparams: Hyperparams,
    pub base_seed: u64,
}

/// One trained slice model: vocabulary plus input and output vector matrices.
/// Downstream consumers (alignment, neighbors) use the input vectors.
#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    pub slice_label: String,
    pub vocab: Vocab,
    pub input: Matrix,
    pub output: Matrix,
    pub meta: TrainMeta,
}

pub fn sigma(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable `log(1 + e^x)`; `-log sigma(x) == softplus(-x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss of one (center, context, negatives) example.
pub fn sgns_example_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    let mut loss = softplus(-dot(context, center));
    for neg in negatives {
        loss += softplus(dot(neg, center));
    }
    loss
}

/// Analytic gradients of [`sgns_example_loss`] with respect to the center
/// input vector, the context output vector, and each negative output vector.
#[allow(clippy::type_complexity)]
pub fn sgns_example_grad(
    center: &[f64],
    context: &[f64],
    negatives: &[&[f64]],
) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let d = center.len();
    let coeff_pos = sigma(dot(context, center)) - 1.0;
    let mut grad_center: Vec<f64> = context.iter().map(|&x| coeff_pos * x).collect();
    let grad_context: Vec<f64> = center.iter().map(|&x| coeff_pos * x).collect();
    let mut grad_negatives = Vec::with_capacity(negatives.len());
    for neg in negatives {
        let coeff = sigma(dot(neg, center));
        for j in 0..d {
            grad_center[j] += coeff * neg[j];
        }
        grad_negatives.push(center.iter().map(|&x| coeff * x).collect());
    }
    (grad_center, grad_context, grad_negatives)
}

/// Per-slice seed: SHA-256 over the base seed and the slice label, so slices
/// never share an initialization stream.
pub fn derive_seed(base_seed: u64, slice_label: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(base_seed.to_le_bytes());
    hasher.update(slice_label.as_bytes());
    hasher.finalize().into()
}

/// Train one slice model. Deterministic given (base_seed, slice_label) and
/// the sentence order; never parallel within a slice.
pub fn train(
    sentences: &[Vec<String>],
    vocab: &Vocab,
    hp: &Hyperparams,
    base_seed: u64,
    slice_label: &str,
) -> Result<EmbeddingModel> {
    hp.validate()?;
    if vocab.is_empty() {
        return Err(Error::Train {
            slice: slice_label.to_string(),
            message: "empty vocabulary".into(),
        });
    }
    let d = hp.dimension;
    let n = vocab.len();
    let mut rng = ChaCha12Rng::from_seed(derive_seed(base_seed, slice_label));

    // Input vectors uniform in (-0.5/d, 0.5/d); output vectors zero.
    let mut input = Matrix::zeros(n, d);
    for x in input.data.iter_mut() {
        *x = (rng.random::<f64>() - 0.5) / d as f64;
    }
    let mut output = Matrix::zeros(n, d);

    let streams: Vec<Vec<u32>> = sentences
        .iter()
        .map(|sent| sent.iter().filter_map(|t| vocab.lookup(t)).collect())
        .collect();
    let positions: u64 = streams.iter().map(|s| s.len() as u64).sum();
    if positions == 0 {
        return Err(Error::Train {
            slice: slice_label.to_string(),
            message: "no in-vocabulary tokens to train on".into(),
        });
    }
    let total_steps = (positions * hp.epochs as u64) as f64;
    let lr_floor = hp.initial_lr * 1e-4;
    let total_tokens = vocab.total_tokens() as f64;

    let mut step = 0u64;
    let mut grad_center = vec![0.0; d];
    let mut center_old = vec![0.0; d];
    let mut coeffs: Vec<(u32, f64)> = Vec::with_capacity(hp.negatives + 1);

    for epoch in 0..hp.epochs {
        for sent in &streams {
            for pos in 0..sent.len() {
                step += 1;
                let center = sent[pos] as usize;
                let lr = (hp.initial_lr * (1.0 - step as f64 / total_steps)).max(lr_floor);

                let freq = vocab.count(center) as f64 / total_tokens;
                if freq > hp.subsample {
                    let discard = 1.0 - (hp.subsample / freq).sqrt();
                    if rng.random::<f64>() < discard {
                        continue;
                    }
                }

                let b = rng.random_range(1..=hp.window);
                let lo = pos.saturating_sub(b);
                let hi = (pos + b).min(sent.len() - 1);
                for ctx_pos in lo..=hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let context = sent[ctx_pos];

                    // Phase 1: coefficients from the current parameters.
                    grad_center.iter_mut().for_each(|x| *x = 0.0);
                    coeffs.clear();
                    let v_w = input.row(center);
                    let s_pos = dot(output.row(context as usize), v_w);
                    let coeff_pos = sigma(s_pos) - 1.0;
                    accumulate(&mut grad_center, output.row(context as usize), coeff_pos);
                    coeffs.push((context, coeff_pos));
                    let mut loss = softplus(-s_pos);
                    for _ in 0..hp.negatives {
                        let neg = vocab.sample_noise(rng.random::<f64>());
                        let s_neg = dot(output.row(neg as usize), v_w);
                        let coeff = sigma(s_neg);
                        accumulate(&mut grad_center, output.row(neg as usize), coeff);
                        coeffs.push((neg, coeff));
                        loss += softplus(s_neg);
                    }
                    if !loss.is_finite() {
                        return Err(Error::Train {
                            slice: slice_label.to_string(),
                            message: format!(
                                "non-finite loss at epoch {epoch}, step {step} (center {:?})",
                                vocab.word(center)
                            ),
                        });
                    }

                    // Phase 2: apply the example's exact gradient. Output rows
                    // update against the pre-step center vector, so repeated
                    // rows accumulate like a summed gradient.
                    center_old.copy_from_slice(input.row(center));
                    for &(row, coeff) in &coeffs {
                        let scale = -lr * coeff;
                        let u = output.row_mut(row as usize);
                        for j in 0..d {
                            u[j] += scale * center_old[j];
                        }
                    }
                    let v_w = input.row_mut(center);
                    for j in 0..d {
                        v_w[j] -= lr * grad_center[j];
                    }
                }
            }
        }
    }

    if !input.is_finite() || !output.is_finite() {
        return Err(Error::Train {
            slice: slice_label.to_string(),
            message: "trained matrices contain non-finite values".into(),
        });
    }

    Ok(EmbeddingModel {
        slice_label: slice_label.to_string(),
        vocab: vocab.clone(),
        input,
        output,
        meta: TrainMeta {
            hyperparams: *hp,
            base_seed,
        },
    })
}

fn accumulate(acc: &mut [f64], row: &[f64], coeff: f64) {
    for (a, &x) in acc.iter_mut().zip(row) {
        *a += coeff * x;
    }
}

#[derive(Serialize, Deserialize)]
struct ModelSidecar {
    slice_label: String,
    meta: TrainMeta,
    counts: Vec<u64>,
}

impl EmbeddingModel {
    /// Write the interchange text format: header `<vocab_size> <dimension>`,
    /// then one `word v1 .. vd` line per word in vocabulary order, values
    /// printed with 9 significant digits. A JSON sidecar (`<path>.meta.json`)
    /// preserves counts and training metadata; the text file alone is enough
    /// to reload for alignment and queries.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.vocab.len(), self.input.ncols());
        for i in 0..self.vocab.len() {
            out.push_str(self.vocab.word(i));
            for v in self.input.row(i) {
                let _ = write!(out, " {:.8e}", v);
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))?;

        let sidecar = ModelSidecar {
            slice_label: self.slice_label.clone(),
            meta: self.meta.clone(),
            counts: self.vocab.counts().to_vec(),
        };
        let sidecar_path = sidecar_path(path);
        let json =
            serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Invalid(e.to_string()))?;
        fs::write(&sidecar_path, json).map_err(|e| Error::io(&sidecar_path, e))
    }

    /// Load the text format; validates the header against the actual row
    /// count and dimension. Restores counts and metadata from the sidecar
    /// when present, otherwise substitutes rank-ordered placeholder counts.
    pub fn load(path: &Path) -> Result<EmbeddingModel> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = raw.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty model file"))?;
        let mut parts = header.split_whitespace();
        let vocab_size: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(path, 1, "bad header: expected `<vocab> <dim>`"))?;
        let dim: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(path, 1, "bad header: expected `<vocab> <dim>`"))?;
        if vocab_size == 0 {
            return Err(Error::parse(path, 1, "model declares an empty vocabulary"));
        }

        let mut words = Vec::with_capacity(vocab_size);
        let mut rows = Vec::with_capacity(vocab_size);
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields
                .next()
                .ok_or_else(|| Error::parse(path, line_no, "missing word"))?;
            let mut row = Vec::with_capacity(dim);
            for field in fields {
                let v: f64 = field.parse().map_err(|_| {
                    Error::parse(path, line_no, format!("non-numeric value {field:?}"))
                })?;
                row.push(v);
            }
            if row.len() != dim {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("expected {dim} values, found {}", row.len()),
                ));
            }
            words.push(word.to_string());
            rows.push(row);
        }
        if words.len() != vocab_size {
            return Err(Error::parse(
                path,
                words.len() + 1,
                format!(
                    "header declares {vocab_size} words, file has {}",
                    words.len()
                ),
            ));
        }

        let sidecar_path = sidecar_path(path);
        let sidecar: Option<ModelSidecar> = fs::read_to_string(&sidecar_path)
            .ok()
            .and_then(|s| serde_json::from_str(&s).ok());
        let (slice_label, meta, counts) = match sidecar {
            Some(s) if s.counts.len() == vocab_size => (s.slice_label, s.meta, s.counts),
            _ => {
                let label = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                let counts = (0..vocab_size).map(|i| (vocab_size - i) as u64).collect();
                (
                    label,
                    TrainMeta {
                        hyperparams: Hyperparams {
                            dimension: dim,
                            ..Hyperparams::default()
                        },
                        base_seed: 0,
                    },
                    counts,
                )
            }
        };

        let alpha = meta.hyperparams.noise_alpha;
        let vocab = Vocab::from_sorted(words.into_iter().zip(counts).collect::<Vec<_>>(), alpha)?;
        let input = Matrix::from_rows(rows)?;
        let output = Matrix::zeros(vocab_size, dim);
        Ok(EmbeddingModel {
            slice_label,
            vocab,
            input,
            output,
            meta,
        })
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    std::path::PathBuf::from(s)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn sentences(tokens: &[&str]) -> Vec<Vec<String>> {
        vec![tokens.iter().map(|t| t.to_string()).collect()]
    }

    #[test]
    fn vocab_applies_min_count() {
        let s = sentences(&["a", "a", "b"]);
        let v = Vocab::build(&s, 2, 0.75).unwrap();
        assert_eq!(v.words(), &["a".to_string()]);
        assert!((v.noise_probability(0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vocab_min_count_one_keeps_everything() {
        let s = sentences(&["c", "a", "b", "a"]);
        let v = Vocab::build(&s, 1, 0.75).unwrap();
        assert_eq!(v.len(), 3);
        // Descending count, ties lexicographic.
        assert_eq!(v.word(0), "a");
        assert_eq!(v.word(1), "b");
        assert_eq!(v.word(2), "c");
    }

    #[test]
    fn vocab_empty_is_an_error() {
        let s = sentences(&["a"]);
        assert!(Vocab::build(&s, 2, 0.75).is_err());
    }

    #[test]
    fn noise_ratio_follows_alpha() {
        // counts 16 vs 1 at alpha 0.75: 16^0.75 : 1 = 8 : 1.
        let mut toks = vec!["a"; 16];
        toks.push("b");
        let v = Vocab::build(&sentences(&toks), 1, 0.75).unwrap();
        let ratio = v.noise_probability(0) / v.noise_probability(1);
        assert!((ratio - 8.0).abs() < 1e-9, "ratio {ratio}");
        assert!((v.noise_sum() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn noise_sampling_respects_cdf() {
        let mut toks = vec!["a"; 16];
        toks.push("b");
        let v = Vocab::build(&sentences(&toks), 1, 0.75).unwrap();
        // P(a) = 8/9: u below the boundary picks index 0.
        assert_eq!(v.sample_noise(0.0), 0);
        assert_eq!(v.sample_noise(8.0 / 9.0 - 1e-9), 0);
        assert_eq!(v.sample_noise(8.0 / 9.0 + 1e-9), 1);
        assert_eq!(v.sample_noise(1.0 - 1e-12), 1);
    }

    /// Central finite differences over every parameter slot.
    fn finite_difference_grad(
        center: &[f64],
        context: &[f64],
        negatives: &[Vec<f64>],
        h: f64,
    ) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
        let loss = |c: &[f64], ctx: &[f64], negs: &[Vec<f64>]| {
            let refs: Vec<&[f64]> = negs.iter().map(|n| n.as_slice()).collect();
            sgns_example_loss(c, ctx, &refs)
        };
        let d = center.len();
        let mut gc = vec![0.0; d];
        let mut gx = vec![0.0; d];
        let mut gn = vec![vec![0.0; d]; negatives.len()];
        for j in 0..d {
            let mut plus = center.to_vec();
            let mut minus = center.to_vec();
            plus[j] += h;
            minus[j] -= h;
            gc[j] =
                (loss(&plus, context, negatives) - loss(&minus, context, negatives)) / (2.0 * h);

            let mut plus = context.to_vec();
            let mut minus = context.to_vec();
            plus[j] += h;
            minus[j] -= h;
            gx[j] = (loss(center, &plus, negatives) - loss(center, &minus, negatives)) / (2.0 * h);

            for (i, neg) in negatives.iter().enumerate() {
                let mut plus = negatives.to_vec();
                let mut minus = negatives.to_vec();
                plus[i][j] = neg[j] + h;
                minus[i][j] = neg[j] - h;
                gn[i][j] =
                    (loss(center, context, &plus) - loss(center, context, &minus)) / (2.0 * h);
            }
        }
        (gc, gx, gn)
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        num / den.max(1e-12)
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let d = 5;
        let k = 3;
        for _ in 0..100 {
            let center: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let context: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let negatives: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
                .collect();
            let refs: Vec<&[f64]> = negatives.iter().map(|n| n.as_slice()).collect();
            let (gc, gx, gn) = sgns_example_grad(&center, &context, &refs);
            let (fc, fx, fn_) = finite_difference_grad(&center, &context, &negatives, 1e-5);
            assert!(
                rel_err(&gc, &fc) <= 1e-4,
                "center grad err {}",
                rel_err(&gc, &fc)
            );
            assert!(rel_err(&gx, &fx) <= 1e-4);
            for (a, b) in gn.iter().zip(&fn_) {
                assert!(rel_err(a, b) <= 1e-4);
            }
        }
    }

    fn pair_corpus() -> Vec<Vec<String>> {
        // a and b always co-occur inside a window of 2.
        (0..600)
            .map(|_| vec!["a".to_string(), "b".to_string()])
            .collect()
    }

    #[test]
    fn cooccurring_pair_scores_high() {
        let sents = pair_corpus();
        let hp = Hyperparams {
            dimension: 2,
            window: 2,
            negatives: 2,
            epochs: 20,
            min_count: 1,
            subsample: 1.0, // disable
            ..Hyperparams::default()
        };
        let vocab = Vocab::build(&sents, hp.min_count, hp.noise_alpha).unwrap();
        let model = train(&sents, &vocab, &hp, 7, "pair").unwrap();
        let a = vocab.lookup("a").unwrap() as usize;
        let b = vocab.lookup("b").unwrap() as usize;
        let s = sigma(dot(model.output.row(b), model.input.row(a)));
        assert!(s > 0.9, "sigma(u_b . v_a) = {s}");
    }

    #[test]
    fn training_is_deterministic() {
        let sents = pair_corpus();
        let hp = Hyperparams {
            dimension: 8,
            window: 2,
            negatives: 3,
            epochs: 2,
            min_count: 1,
            ..Hyperparams::default()
        };
        let vocab = Vocab::build(&sents, 1, hp.noise_alpha).unwrap();
        let m1 = train(&sents, &vocab, &hp, 99, "s").unwrap();
        let m2 = train(&sents, &vocab, &hp, 99, "s").unwrap();
        assert_eq!(m1.input, m2.input);
        assert_eq!(m1.output, m2.output);

        // A different slice label must give a different stream.
        let m3 = train(&sents, &vocab, &hp, 99, "t").unwrap();
        assert_ne!(m1.input, m3.input);
    }

    #[test]
    fn subsampling_below_threshold_consumes_no_randomness() {
        // Every word frequency is below both thresholds, so the RNG stream
        // and therefore the trained vectors are identical.
        let sents = pair_corpus();
        let hp = Hyperparams {
            dimension: 4,
            window: 1,
            negatives: 1,
            epochs: 1,
            min_count: 1,
            subsample: 1.0,
            ..Hyperparams::default()
        };
        let vocab = Vocab::build(&sents, 1, hp.noise_alpha).unwrap();
        let m1 = train(&sents, &vocab, &hp, 5, "s").unwrap();
        let hp2 = Hyperparams {
            subsample: 2.0,
            ..hp
        };
        let m2 = train(&sents, &vocab, &hp2, 5, "s").unwrap();
        assert_eq!(m1.input, m2.input);
    }

    #[test]
    fn trainer_update_equals_summed_gradient() {
        // One sentence of two words, window 1, one negative; replay the RNG
        // stream and apply [`sgns_example_grad`] by hand.
        let sents = sentences(&["a", "b"]);
        let hp = Hyperparams {
            dimension: 3,
            window: 1,
            negatives: 1,
            epochs: 1,
            min_count: 1,
            subsample: 1.0,
            initial_lr: 0.5,
            ..Hyperparams::default()
        };
        let vocab = Vocab::build(&sents, 1, hp.noise_alpha).unwrap();

        let mut rng = ChaCha12Rng::from_seed(derive_seed(3, "s"));
        let d = hp.dimension;
        let mut input = Matrix::zeros(vocab.len(), d);
        for x in input.data.iter_mut() {
            *x = (rng.random::<f64>() - 0.5) / d as f64;
        }
        let mut output = Matrix::zeros(vocab.len(), d);
        let total_steps = 2.0;
        for (step, pos) in [(1u64, 0usize), (2, 1)] {
            let lr = (hp.initial_lr * (1.0 - step as f64 / total_steps)).max(hp.initial_lr * 1e-4);
            let center = vocab.lookup(["a", "b"][pos]).unwrap() as usize;
            let _b = rng.random_range(1..=hp.window);
            let context = vocab.lookup(["a", "b"][1 - pos]).unwrap() as usize;
            let neg = vocab.sample_noise(rng.random::<f64>()) as usize;
            let negs = [output.row(neg).to_vec()];
            let neg_refs: Vec<&[f64]> = negs.iter().map(|n| n.as_slice()).collect();
            let (gc, gx, gn) =
                sgns_example_grad(input.row(center), output.row(context), &neg_refs);
            for j in 0..d {
                output.row_mut(context)[j] -= lr * gx[j];
            }
            for j in 0..d {
                output.row_mut(neg)[j] -= lr * gn[0][j];
            }
            for j in 0..d {
                input.row_mut(center)[j] -= lr * gc[j];
            }
        }

        let model = train(&sents, &vocab, &hp, 3, "s").unwrap();
        for i in 0..vocab.len() {
            for j in 0..d {
                assert!(
                    (model.input.row(i)[j] - input.row(i)[j]).abs() < 1e-12,
                    "input[{i}][{j}]"
                );
                assert!(
                    (model.output.row(i)[j] - output.row(i)[j]).abs() < 1e-12,
                    "output[{i}][{j}]"
                );
            }
        }
    }

    #[test]
    fn save_load_round_trip() {
        let sents = pair_corpus();
        let hp = Hyperparams {
            dimension: 6,
            window: 2,
            negatives: 2,
            epochs: 1,
            min_count: 1,
            ..Hyperparams::default()
        };
        let vocab = Vocab::build(&sents, 1, hp.noise_alpha).unwrap();
        let model = train(&sents, &vocab, &hp, 1, "rt").unwrap();

        let dir = TempDir::new().unwrap();
        let path = dir.path().join("model.txt");
        model.save(&path).unwrap();

        let raw = std::fs::read_to_string(&path).unwrap();
        assert!(
            raw.starts_with("2 6\n"),
            "header: {}",
            raw.lines().next().unwrap()
        );

        let loaded = EmbeddingModel::load(&path).unwrap();
        assert_eq!(loaded.slice_label, "rt");
        assert_eq!(loaded.vocab.words(), model.vocab.words());
        assert_eq!(loaded.vocab.counts(), model.vocab.counts());
        for i in 0..model.vocab.len() {
            let c = cosine(model.input.row(i), loaded.input.row(i));
            assert!(c >= 1.0 - 1e-9, "word {i} cosine {c}");
        }
    }

    #[test]
    fn load_rejects_truncated_file() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("model.txt");
        std::fs::write(&path, "3 4\nw1 0.1 0.2 0.3 0.4\nw2 0.1 0.2 0.3 0.4\n").unwrap();
        let err = EmbeddingModel::load(&path).unwrap_err();
        assert!(err.to_string().contains("declares 3 words"), "{err}");

        std::fs::write(&path, "1 4\nw1 0.1 bad 0.3 0.4\n").unwrap();
        let err = EmbeddingModel::load(&path).unwrap_err();
        assert!(err.to_string().contains("non-numeric"), "{err}");
        assert!(err.to_string().contains(":2:"), "line number in {err}");
    }
}
