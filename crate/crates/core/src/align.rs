//! Cross-slice model alignment and drift measurement.
//!
//! Independently trained slice models live in arbitrary rotations of the same
//! latent space. Consecutive slices are aligned with orthogonal Procrustes
//! over their shared (anchor) vocabulary, the transforms composed so every
//! slice lands in the final slice's frame, and change is then read off as a
//! word's cosine similarity with itself across slices.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::embedding::{cosine, dot, EmbeddingModel, Matrix};
use crate::error::{Error, Result};

/// Orthogonal Procrustes solution for `min ||X W - Y||_F`.
#[derive(Debug, Clone)]
pub struct ProcrustesSolution {
    pub transform: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    /// Set when the cross-covariance is numerically rank-deficient; the
    /// transform is still well-defined through the SVD.
    pub rank_deficient: bool,
    /// Set when fewer anchor rows than dimensions were supplied.
    pub underdetermined: bool,
}

/// Solve `W = U V^T` where `U S V^T` is the SVD of `X^T Y`. Rows are expected
/// to be length-normalized anchor vectors; `n >= d` is recommended and
/// flagged otherwise.
pub fn procrustes(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<ProcrustesSolution> {
    if x.nrows() != y.nrows() || x.ncols() != y.ncols() {
        return Err(Error::Invalid(format!(
            "procrustes shape mismatch: {}x{} vs {}x{}",
            x.nrows(),
            x.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::Invalid("procrustes on empty matrices".into()));
    }
    let d = x.ncols();
    let m = x.transpose() * y;
    let svd = m.svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let transform = u * v_t;

    let singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    let max_sv = singular_values.first().copied().unwrap_or(0.0);
    let rank_deficient = singular_values
        .iter()
        .any(|&s| s <= max_sv * 1e-12 || s == 0.0);
    Ok(ProcrustesSolution {
        transform,
        singular_values,
        rank_deficient,
        underdetermined: x.nrows() < d,
    })
}

/// `max |W^T W - I|`, the orthogonality defect of a transform.
pub fn orthogonality_defect(w: &DMatrix<f64>) -> f64 {
    let gram = w.transpose() * w;
    let mut defect = 0.0f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            defect = defect.max((gram[(i, j)] - target).abs());
        }
    }
    defect
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AlignOptions {
    /// Restrict alignment anchors to the n most frequent shared words;
    /// `None` uses the full pairwise vocabulary intersection.
    pub anchor_top_n: Option<usize>,
}

/// One slice's vectors mapped into the common frame, rows unit-normalized.
#[derive(Debug, Clone)]
pub struct AlignedModel {
    pub label: String,
    words: Vec<String>,
    index: HashMap<String, u32>,
    vectors: Matrix,
}

impl AlignedModel {
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn lookup(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        self.vectors.row(i)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnchorReport {
    pub from: String,
    pub to: String,
    pub shared: usize,
    pub used: usize,
}

/// All slices in one coordinate frame (the final slice's), plus alignment
/// diagnostics.
#[derive(Debug, Clone)]
pub struct AlignedSeries {
    slices: Vec<AlignedModel>,
    pub anchors: Vec<AnchorReport>,
    pub warnings: Vec<String>,
}

/// A word's self-similarity across two slices; low cosine = high drift.
#[derive(Debug, Clone, Serialize)]
pub struct DriftRecord {
    pub word: String,
    pub from_slice: String,
    pub to_slice: String,
    pub cosine: f64,
}

/// Align consecutive models pairwise on their vocabulary intersection and
/// compose the transforms into the final slice's frame. All vectors are
/// length-normalized before solving and before any cosine query.
pub fn align_series(models: &[EmbeddingModel], options: &AlignOptions) -> Result<AlignedSeries> {
    if models.len() < 2 {
        return Err(Error::Invalid(format!(
            "alignment needs at least 2 models, got {}",
            models.len()
        )));
    }
    let d = models[0].input.ncols();
    for m in models {
        if m.input.ncols() != d {
            return Err(Error::Invalid(format!(
                "slice {:?} has dimension {}, expected {}",
                m.slice_label,
                m.input.ncols(),
                d
            )));
        }
    }

    let normalized: Vec<Matrix> = models.iter().map(|m| m.input.normalized_rows()).collect();
    let mut anchors = Vec::new();
    let mut warnings = Vec::new();

    // Pairwise transforms: step[i] maps slice i's frame onto slice i+1's.
    let mut steps: Vec<DMatrix<f64>> = Vec::with_capacity(models.len() - 1);
    for i in 0..models.len() - 1 {
        let (a, b) = (&models[i], &models[i + 1]);
        let mut shared: Vec<(String, u32, u32, u64)> = a
            .vocab
            .words()
            .iter()
            .enumerate()
            .filter_map(|(ai, w)| {
                b.vocab.lookup(w).map(|bi| {
                    let count = a.vocab.count(ai) + b.vocab.count(bi as usize);
                    (w.clone(), ai as u32, bi, count)
                })
            })
            .collect();
        if shared.is_empty() {
            return Err(Error::EmptyIntersection {
                from: a.slice_label.clone(),
                to: b.slice_label.clone(),
            });
        }
        let shared_total = shared.len();
        if let Some(top_n) = options.anchor_top_n {
            shared.sort_by(|x, y| y.3.cmp(&x.3).then_with(|| x.0.cmp(&y.0)));
            shared.truncate(top_n.max(1));
        }
        if shared.len() < d {
            warnings.push(format!(
                "only {} anchors for {} -> {} with dimension {d}",
                shared.len(),
                a.slice_label,
                b.slice_label,
            ));
        }
        anchors.push(AnchorReport {
            from: a.slice_label.clone(),
            to: b.slice_label.clone(),
            shared: shared_total,
            used: shared.len(),
        });

        let mut x = DMatrix::zeros(shared.len(), d);
        let mut y = DMatrix::zeros(shared.len(), d);
        for (row, &(_, ai, bi, _)) in shared.iter().enumerate() {
            for col in 0..d {
                x[(row, col)] = normalized[i].row(ai as usize)[col];
                y[(row, col)] = normalized[i + 1].row(bi as usize)[col];
            }
        }
        let solution = procrustes(&x, &y)?;
        if solution.rank_deficient {
            warnings.push(format!(
                "rank-deficient cross-covariance for {} -> {}",
                a.slice_label, b.slice_label
            ));
        }
        steps.push(solution.transform);
    }

    // Composed transform into the final frame: identity for the last slice,
    // step[i] * composed[i+1] for the rest.
    let mut composed: Vec<DMatrix<f64>> = vec![DMatrix::identity(d, d); models.len()];
    for i in (0..models.len() - 1).rev() {
        composed[i] = &steps[i] * &composed[i + 1];
    }

    let slices = models
        .iter()
        .zip(normalized)
        .zip(composed)
        .map(|((model, norm), transform)| {
            let n = norm.nrows();
            let mut data = DMatrix::zeros(n, d);
            for r in 0..n {
                for c in 0..d {
                    data[(r, c)] = norm.row(r)[c];
                }
            }
            let mapped = data * transform;
            let mut rows = Vec::with_capacity(n);
            for r in 0..n {
                rows.push((0..d).map(|c| mapped[(r, c)]).collect::<Vec<f64>>());
            }
            let vectors = Matrix::from_rows(rows).expect("rectangular");
            let index = model
                .vocab
                .words()
                .iter()
                .enumerate()
                .map(|(i, w)| (w.clone(), i as u32))
                .collect();
            AlignedModel {
                label: model.slice_label.clone(),
                words: model.vocab.words().to_vec(),
                index,
                vectors,
            }
        })
        .collect();

    Ok(AlignedSeries {
        slices,
        anchors,
        warnings,
    })
}

impl AlignedSeries {
    pub fn labels(&self) -> Vec<&str> {
        self.slices.iter().map(|s| s.label.as_str()).collect()
    }

    pub fn slice(&self, label: &str) -> Result<&AlignedModel> {
        self.slices
            .iter()
            .find(|s| s.label == label)
            .ok_or_else(|| Error::Invalid(format!("unknown slice label {label:?}")))
    }

    pub fn slices(&self) -> &[AlignedModel] {
        &self.slices
    }

    fn word_vector<'a>(&self, slice: &'a AlignedModel, word: &str) -> Result<&'a [f64]> {
        match slice.lookup(word) {
            Some(i) => Ok(slice.vector(i as usize)),
            None => Err(Error::WordNotFound {
                word: word.to_string(),
                slice: slice.label.clone(),
                hints: near_spellings(&slice.words, word),
            }),
        }
    }

    /// Cross-slice self-similarity of one word.
    pub fn drift(&self, word: &str, from: &str, to: &str) -> Result<DriftRecord> {
        let a = self.slice(from)?;
        let b = self.slice(to)?;
        let va = self.word_vector(a, word)?;
        let vb = self.word_vector(b, word)?;
        Ok(DriftRecord {
            word: word.to_string(),
            from_slice: from.to_string(),
            to_slice: to.to_string(),
            cosine: cosine(va, vb),
        })
    }

    /// Every word in both slices (optionally intersected with `filter`),
    /// sorted ascending by cosine, ties by word.
    pub fn rank_drift(
        &self,
        from: &str,
        to: &str,
        filter: Option<&[String]>,
    ) -> Result<Vec<DriftRecord>> {
        let a = self.slice(from)?;
        let b = self.slice(to)?;
        let candidates: Vec<&str> = match filter {
            Some(words) => {
                let mut seen = std::collections::HashSet::new();
                words
                    .iter()
                    .map(|w| w.as_str())
                    .filter(|w| seen.insert(*w))
                    .filter(|w| a.lookup(w).is_some() && b.lookup(w).is_some())
                    .collect()
            }
            None => a
                .words
                .iter()
                .map(|w| w.as_str())
                .filter(|w| b.lookup(w).is_some())
                .collect(),
        };
        let mut records: Vec<DriftRecord> = candidates
            .par_iter()
            .map(|word| {
                let va = a.vector(a.lookup(word).expect("filtered") as usize);
                let vb = b.vector(b.lookup(word).expect("filtered") as usize);
                DriftRecord {
                    word: word.to_string(),
                    from_slice: from.to_string(),
                    to_slice: to.to_string(),
                    cosine: cosine(va, vb),
                }
            })
            .collect();
        records.sort_by(|x, y| {
            x.cosine
                .total_cmp(&y.cosine)
                .then_with(|| x.word.cmp(&y.word))
        });
        Ok(records)
    }

    /// Top-k neighbors of `word` within one aligned slice.
    pub fn neighbors(&self, label: &str, word: &str, k: usize) -> Result<Vec<(String, f64)>> {
        let slice = self.slice(label)?;
        let idx = slice.lookup(word).ok_or_else(|| Error::WordNotFound {
            word: word.to_string(),
            slice: slice.label.clone(),
            hints: near_spellings(&slice.words, word),
        })?;
        Ok(top_k_by_cosine(
            &slice.words,
            &slice.vectors,
            idx as usize,
            k,
        ))
    }

    /// 2-D trajectory of a word: its aligned vector per slice plus the top
    /// `context_k` neighbors per slice, projected onto the top two principal
    /// components of that point set.
    pub fn project_trajectory(&self, word: &str, context_k: usize) -> Result<TrajectoryProjection> {
        let present: Vec<&AlignedModel> = self
            .slices
            .iter()
            .filter(|s| s.lookup(word).is_some())
            .collect();
        if present.len() < 2 {
            return Err(Error::Invalid(format!(
                "word {word:?} appears in {} slice(s); trajectory needs at least 2",
                present.len()
            )));
        }
        let mut labels: Vec<(String, String)> = Vec::new();
        let mut points: Vec<Vec<f64>> = Vec::new();
        for slice in &present {
            let idx = slice.lookup(word).expect("present") as usize;
            labels.push((word.to_string(), slice.label.clone()));
            points.push(slice.vector(idx).to_vec());
            for (neighbor, _) in top_k_by_cosine(&slice.words, &slice.vectors, idx, context_k) {
                let nidx = slice.lookup(&neighbor).expect("from vocab") as usize;
                labels.push((neighbor, slice.label.clone()));
                points.push(slice.vector(nidx).to_vec());
            }
        }
        let (coords, singular_values) = project_2d(&points)?;
        let points = labels
            .into_iter()
            .zip(coords)
            .map(|((label, slice), (x, y))| TrajectoryPoint {
                label,
                slice,
                x,
                y,
            })
            .collect();
        Ok(TrajectoryProjection {
            word: word.to_string(),
            points,
            singular_values,
        })
    }
}

/// Neighbor query against a raw (unaligned) model's input vectors.
pub fn model_neighbors(model: &EmbeddingModel, word: &str, k: usize) -> Result<Vec<(String, f64)>> {
    let idx = model.vocab.lookup(word).ok_or_else(|| Error::WordNotFound {
        word: word.to_string(),
        slice: model.slice_label.clone(),
        hints: near_spellings(model.vocab.words(), word),
    })?;
    Ok(top_k_by_cosine(
        model.vocab.words(),
        &model.input,
        idx as usize,
        k,
    ))
}

/// Brute-force top-k cosine scan, excluding the query row; descending cosine,
/// ties by word.
fn top_k_by_cosine(
    words: &[String],
    vectors: &Matrix,
    query: usize,
    k: usize,
) -> Vec<(String, f64)> {
    let qv = vectors.row(query);
    let mut scored: Vec<(usize, f64)> = (0..words.len())
        .into_par_iter()
        .filter(|&i| i != query)
        .map(|i| (i, cosine(vectors.row(i), qv)))
        .collect();
    scored.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| words[a.0].cmp(&words[b.0]))
    });
    scored
        .into_iter()
        .take(k)
        .map(|(i, c)| (words[i].clone(), c))
        .collect()
}

/// Vocabulary entries within edit distance 1 of `query`, for OOV hints.
fn near_spellings(words: &[String], query: &str) -> Vec<String> {
    let q: Vec<char> = query.chars().collect();
    let mut hits: Vec<String> = words
        .iter()
        .filter(|w| edit_distance_at_most_one(&q, w))
        .take(5)
        .cloned()
        .collect();
    hits.sort();
    hits
}

fn edit_distance_at_most_one(q: &[char], word: &str) -> bool {
    let w: Vec<char> = word.chars().collect();
    let (n, m) = (q.len(), w.len());
    if n.abs_diff(m) > 1 {
        return false;
    }
    if n == m {
        return q.iter().zip(&w).filter(|(a, b)| a != b).count() <= 1;
    }
    // One insertion: find the first mismatch and skip it in the longer string.
    let (short, long) = if n < m { (q, w.as_slice()) } else { (w.as_slice(), q) };
    let mut i = 0;
    while i < short.len() && short[i] == long[i] {
        i += 1;
    }
    short[i..] == long[i + 1..]
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryPoint {
    pub label: String,
    pub slice: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryProjection {
    pub word: String,
    pub points: Vec<TrajectoryPoint>,
    /// Singular values of the centered point set, descending.
    pub singular_values: Vec<f64>,
}

/// Center a point set and project onto its top two principal components.
/// Sign convention: the first nonzero loading of each component is positive.
fn project_2d(points: &[Vec<f64>]) -> Result<(Vec<(f64, f64)>, Vec<f64>)> {
    let n = points.len();
    let d = points.first().map(|p| p.len()).unwrap_or(0);
    if n < 2 || d < 2 {
        return Err(Error::Invalid(
            "projection needs at least 2 points of dimension >= 2".into(),
        ));
    }
    let mut mean = vec![0.0; d];
    for p in points {
        for (m, &x) in mean.iter_mut().zip(p) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut centered = DMatrix::zeros(n, d);
    for (r, p) in points.iter().enumerate() {
        for c in 0..d {
            centered[(r, c)] = p[c] - mean[c];
        }
    }
    let svd = centered.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();

    let mut components = [vec![0.0; d], vec![0.0; d]];
    for (ci, component) in components.iter_mut().enumerate() {
        for j in 0..d {
            component[j] = v_t[(ci, j)];
        }
        let first_nonzero = component.iter().find(|x| x.abs() > 1e-12);
        if let Some(&x) = first_nonzero {
            if x < 0.0 {
                component.iter_mut().for_each(|v| *v = -*v);
            }
        }
    }

    let coords = (0..n)
        .map(|r| {
            let row: Vec<f64> = (0..d).map(|c| centered[(r, c)]).collect();
            (dot(&row, &components[0]), dot(&row, &components[1]))
        })
        .collect();
    Ok((coords, singular_values))
}

/// CSV writers for the report formats.
pub fn drift_to_csv(records: &[DriftRecord]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["word", "from_slice", "to_slice", "cosine"])
        .map_err(csv_error)?;
    for r in records {
        writer
            .write_record([
                r.word.clone(),
                r.from_slice.clone(),
                r.to_slice.clone(),
                format!("{:.6}", r.cosine),
            ])
            .map_err(csv_error)?;
    }
    finish_csv(writer)
}

pub fn neighbors_to_csv(rows: &[(String, Vec<(String, f64)>)]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["slice", "rank", "word", "cosine"])
        .map_err(csv_error)?;
    for (slice, neighbors) in rows {
        for (rank, (word, cos)) in neighbors.iter().enumerate() {
            writer
                .write_record([
                    slice.clone(),
                    (rank + 1).to_string(),
                    word.clone(),
                    format!("{:.6}", cos),
                ])
                .map_err(csv_error)?;
        }
    }
    finish_csv(writer)
}

pub fn trajectory_to_csv(projection: &TrajectoryProjection) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["label", "slice", "x", "y"])
        .map_err(csv_error)?;
    for p in &projection.points {
        writer
            .write_record([
                p.label.clone(),
                p.slice.clone(),
                format!("{:.6}", p.x),
                format!("{:.6}", p.y),
            ])
            .map_err(csv_error)?;
    }
    finish_csv(writer)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Invalid(format!("csv write failed: {e}"))
}

fn finish_csv(writer: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Invalid(e.to_string()))
}
