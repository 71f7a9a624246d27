//! CSLS retrieval and bilingual lexicon induction scoring.
//!
//! `CSLS(x, y) = 2·cos(x, y) − r_T(x) − r_S(y)` where `r_T(x)` is the mean
//! similarity of query `x` to its `K` nearest targets and `r_S(y)` the mean
//! similarity of target `y` to its `K` nearest queries. The query population
//! for `r_S` is the set of mapped queries being scored.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::embedio::{normalize_rows, Dictionary, EmbeddingSpace};
use crate::error::{Error, Result};
use crate::linalg::LinearMap;

pub const DEFAULT_CSLS_K: usize = 10;
pub const DEFAULT_CHUNK: usize = 1024;

/// Row-normalized target matrix ready for CSLS scoring.
#[derive(Debug, Clone)]
pub struct CslsIndex {
    targets: Array2<f64>,
    k: usize,
    chunk: usize,
}

/// Mean of the `k` largest entries (all entries if fewer).
pub fn mean_top_k(row: ArrayView1<'_, f64>, k: usize) -> f64 {
    let k = k.min(row.len());
    if k == 0 {
        return 0.0;
    }
    let mut v: Vec<f64> = row.to_vec();
    let idx = k - 1;
    v.select_nth_unstable_by(idx, |a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    v[..k].iter().sum::<f64>() / k as f64
}

impl CslsIndex {
    pub fn build(targets: ArrayView2<'_, f64>, k: usize) -> Self {
        let mut targets = targets.to_owned();
        normalize_rows(&mut targets);
        CslsIndex {
            targets,
            k: k.max(1),
            chunk: DEFAULT_CHUNK,
        }
    }

    pub fn with_chunk(mut self, chunk: usize) -> Self {
        self.chunk = chunk.max(1);
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.targets.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.nrows() == 0
    }

    pub fn targets(&self) -> &Array2<f64> {
        &self.targets
    }

    /// Binds a query population: computes `r_T` for every query and `r_S`
    /// for every target against these queries.
    pub fn with_queries(&self, queries: ArrayView2<'_, f64>) -> CslsScorer<'_> {
        let mut queries = queries.to_owned();
        normalize_rows(&mut queries);
        let r_query = self.neighbourhood_means(queries.view(), self.targets.view());
        let r_target = self.neighbourhood_means(self.targets.view(), queries.view());
        CslsScorer {
            index: self,
            queries,
            r_query,
            r_target,
        }
    }

    /// For each row of `a`, the mean of its `k` largest cosines against `b`.
    fn neighbourhood_means(&self, a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array1<f64> {
        let chunks: Vec<usize> = (0..a.nrows()).step_by(self.chunk).collect();
        let parts: Vec<Vec<f64>> = chunks
            .par_iter()
            .map(|&start| {
                let end = (start + self.chunk).min(a.nrows());
                let sims = a.slice(s![start..end, ..]).dot(&b.t());
                sims.rows().into_iter().map(|r| mean_top_k(r, self.k)).collect()
            })
            .collect();
        parts.into_iter().flatten().collect()
    }
}

/// CSLS scores for a fixed query population.
#[derive(Debug, Clone)]
pub struct CslsScorer<'a> {
    index: &'a CslsIndex,
    queries: Array2<f64>,
    r_query: Array1<f64>,
    r_target: Array1<f64>,
}

impl CslsScorer<'_> {
    pub fn queries(&self) -> &Array2<f64> {
        &self.queries
    }

    pub fn r_query(&self) -> &Array1<f64> {
        &self.r_query
    }

    pub fn r_target(&self) -> &Array1<f64> {
        &self.r_target
    }

    /// Full CSLS score vector of query `q` against every target.
    pub fn scores(&self, q: usize) -> Array1<f64> {
        let cos = self.index.targets.dot(&self.queries.row(q));
        self.finish(cos.view(), q)
    }

    fn finish(&self, cos: ArrayView1<'_, f64>, q: usize) -> Array1<f64> {
        let rq = self.r_query[q];
        let mut out = Array1::zeros(cos.len());
        for j in 0..cos.len() {
            out[j] = 2.0 * cos[j] - rq - self.r_target[j];
        }
        out
    }

    /// Full `queries × targets` CSLS matrix.
    pub fn score_matrix(&self) -> Array2<f64> {
        let cos = self.queries.dot(&self.index.targets.t());
        let mut out = Array2::zeros(cos.dim());
        for (q, row) in cos.rows().into_iter().enumerate() {
            out.row_mut(q).assign(&self.finish(row, q));
        }
        out
    }

    /// Best `k` targets of every query, ties broken by lower target index.
    pub fn top_k_all(&self, k: usize) -> Vec<Vec<(usize, f64)>> {
        let n = self.queries.nrows();
        let chunk = self.index.chunk;
        let starts: Vec<usize> = (0..n).step_by(chunk).collect();
        starts
            .par_iter()
            .flat_map_iter(|&start| {
                let end = (start + chunk).min(n);
                let cos = self.queries.slice(s![start..end, ..]).dot(&self.index.targets.t());
                (start..end)
                    .map(|q| top_k(self.finish(cos.row(q - start), q).view(), k))
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    /// Nearest target of every query.
    pub fn nearest_all(&self) -> Vec<(usize, f64)> {
        self.top_k_all(1).into_iter().map(|v| v[0]).collect()
    }
}

/// Indices and scores of the `k` largest entries, descending, ties by lower
/// index. `k` is clamped to the vector length.
pub fn top_k(scores: ArrayView1<'_, f64>, k: usize) -> Vec<(usize, f64)> {
    let k = k.min(scores.len());
    let desc = |a: &(usize, f64), b: &(usize, f64)| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0));
    if k == 1 {
        let mut best = (0, scores[0]);
        for (j, &v) in scores.iter().enumerate().skip(1) {
            if v > best.1 {
                best = (j, v);
            }
        }
        return vec![best];
    }
    let mut all: Vec<(usize, f64)> = scores.iter().copied().enumerate().collect();
    if k < all.len() && k > 0 {
        all.select_nth_unstable_by(k - 1, desc);
        all.truncate(k);
    }
    all.sort_by(desc);
    all
}

/// Pair of linear maps into a shared space: retrieval compares
/// `source.apply(x)` with `target.apply(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub source: LinearMap,
    pub target: LinearMap,
}

impl Projection {
    /// Source mapped into the target space; targets untouched.
    pub fn one_sided(map: LinearMap) -> Self {
        let d = map.output_dim();
        Projection {
            source: map,
            target: LinearMap::identity(d),
        }
    }

    pub fn identity(d: usize) -> Self {
        Projection::one_sided(LinearMap::identity(d))
    }

    /// Mapped, row-normalized source rows.
    pub fn map_source(&self, rows: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut m = self.source.apply(rows);
        normalize_rows(&mut m);
        m
    }

    pub fn map_target(&self, rows: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut m = self.target.apply(rows);
        normalize_rows(&mut m);
        m
    }
}

/// Result of translating one word.
#[derive(Debug, Clone, PartialEq)]
pub enum Translation {
    Oov(String),
    Ranked { word: String, candidates: Vec<(String, f64)> },
}

/// Options shared by [`translate_words`] and [`evaluate_bli`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetrievalOptions {
    pub csls_k: usize,
    /// Most frequent source words added to the query population when
    /// translating ad-hoc words.
    pub population: usize,
}

impl Default for RetrievalOptions {
    fn default() -> Self {
        RetrievalOptions {
            csls_k: DEFAULT_CSLS_K,
            population: 10_000,
        }
    }
}

/// Top-`k` CSLS candidates for each word. The query population is the given
/// words plus the `opts.population` most frequent source words.
pub fn translate_words(
    words: &[&str],
    projection: &Projection,
    source: &EmbeddingSpace,
    target: &EmbeddingSpace,
    k: usize,
    opts: RetrievalOptions,
) -> Vec<Translation> {
    let mut rows: Vec<usize> = words.iter().filter_map(|w| source.index_of(w)).collect();
    let n_queries = rows.len();
    let queried: BTreeSet<usize> = rows.iter().copied().collect();
    rows.extend((0..opts.population.min(source.len())).filter(|i| !queried.contains(i)));

    let mapped = projection.map_source(source.vectors().select(Axis(0), &rows).view());
    let index = CslsIndex::build(projection.map_target(target.vectors().view()).view(), opts.csls_k);
    let scorer = index.with_queries(mapped.view());

    let mut next = 0;
    let mut out = Vec::with_capacity(words.len());
    for w in words {
        if source.index_of(w).is_none() {
            out.push(Translation::Oov((*w).to_owned()));
            continue;
        }
        debug_assert!(next < n_queries);
        let ranked = top_k(scorer.scores(next).view(), k);
        next += 1;
        out.push(Translation::Ranked {
            word: (*w).to_owned(),
            candidates: ranked.into_iter().map(|(j, s)| (target.word(j).to_owned(), s)).collect(),
        });
    }
    out
}

/// Precision at several cut-offs, as percentages.
#[derive(Debug, Clone, PartialEq)]
pub struct BliReport {
    pub p_at: BTreeMap<usize, f64>,
    pub evaluated: usize,
    pub oov: usize,
    pub success: bool,
}

/// A run succeeds when P@1 exceeds this percentage.
pub const SUCCESS_THRESHOLD: f64 = 5.0;

impl BliReport {
    pub fn p1(&self) -> f64 {
        self.p_at.get(&1).copied().unwrap_or(0.0)
    }

    /// Tab-separated `k, precision, evaluated, oov, success` rows.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("k\tprecision\tevaluated\toov\tsuccess\n");
        for (k, p) in &self.p_at {
            let _ = writeln!(out, "{k}\t{p:.2}\t{}\t{}\t{}", self.evaluated, self.oov, self.success);
        }
        out
    }
}

/// Scores `dict` with CSLS retrieval. Each unique source word counts once and
/// is correct at `k` when any gold target appears in its top `k`. Source
/// words without an in-vocabulary pair are counted as OOV.
pub fn evaluate_bli(
    dict: &Dictionary,
    projection: &Projection,
    source: &EmbeddingSpace,
    target: &EmbeddingSpace,
    ks: &[usize],
    csls_k: usize,
) -> Result<BliReport> {
    let mut queries = Vec::new();
    let mut gold: Vec<BTreeSet<usize>> = Vec::new();
    let mut oov = 0;
    for (src, tgts) in dict.targets_by_source() {
        let targets: BTreeSet<usize> = tgts.iter().filter_map(|t| target.index_of(t)).collect();
        match source.index_of(src) {
            Some(i) if !targets.is_empty() => {
                queries.push(i);
                gold.push(targets);
            }
            _ => oov += 1,
        }
    }
    if queries.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let max_k = ks.iter().copied().max().unwrap_or(1).max(1);
    let mapped = projection.map_source(source.vectors().select(Axis(0), &queries).view());
    let index = CslsIndex::build(projection.map_target(target.vectors().view()).view(), csls_k);
    let ranked = index.with_queries(mapped.view()).top_k_all(max_k);

    let mut p_at = BTreeMap::new();
    for &k in ks {
        let correct = ranked
            .iter()
            .zip(&gold)
            .filter(|(r, g)| r.iter().take(k).any(|(j, _)| g.contains(j)))
            .count();
        p_at.insert(k, 100.0 * correct as f64 / queries.len() as f64);
    }
    let p1 = if let Some(&p) = p_at.get(&1) {
        p
    } else {
        let correct = ranked.iter().zip(&gold).filter(|(r, g)| g.contains(&r[0].0)).count();
        100.0 * correct as f64 / queries.len() as f64
    };
    Ok(BliReport {
        p_at,
        evaluated: queries.len(),
        oov,
        success: p1 > SUCCESS_THRESHOLD,
    })
}
