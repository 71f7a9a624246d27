//! Synthetic bilingual embedding pairs with controllable departure from
//! isometry, a brute-force CSLS oracle, and the seeded robustness sweep.

use std::fmt::Write as _;

use log::{info, warn};
use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::embedio::{normalize_rows, Dictionary, EmbeddingSpace};
use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, random_orthogonal};
use crate::refine::{refine, RefineConfig};
use crate::retrieval::{evaluate_bli, BliReport, SUCCESS_THRESHOLD};
use crate::trainer::{train, TrainConfig};

/// Largest vocabulary [`brute_force_csls`] accepts on either side.
pub const BRUTE_FORCE_LIMIT: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub vocab_size: usize,
    pub dim: usize,
    pub noise_sigma: f64,
    /// Strength of the per-axis stretch applied after the rotation.
    pub stretch: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            vocab_size: 2000,
            dim: 50,
            noise_sigma: 0.0,
            stretch: 0.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// Named difficulty: `easy`, `medium` or `hard`.
    pub fn preset(name: &str) -> Result<Self> {
        let (noise_sigma, stretch) = match name {
            "easy" => (0.01, 0.0),
            "medium" => (0.05, 0.2),
            "hard" => (0.1, 0.5),
            other => return Err(Error::Config(format!("unknown difficulty `{other}`"))),
        };
        Ok(SynthConfig {
            noise_sigma,
            stretch,
            ..SynthConfig::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.dim == 0 {
            return Err(Error::Config("vocab_size and dim must be positive".into()));
        }
        let reals = [self.noise_sigma, self.stretch];
        if reals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config("noise_sigma and stretch must be finite and ≥ 0".into()));
        }
        if self.vocab_size < 2 * self.dim {
            warn!("vocab_size {} < 2·dim; the pair is poorly determined", self.vocab_size);
        }
        Ok(())
    }
}

/// A generated pair together with the ground truth used to build it.
#[derive(Debug, Clone)]
pub struct SynthPair {
    pub source: EmbeddingSpace,
    pub target: EmbeddingSpace,
    pub gold: Dictionary,
    pub rotation: Array2<f64>,
    /// Diagonal of `D`, entries in `[−1, 1]`.
    pub stretch_diag: Array1<f64>,
    /// Source row `i` became target row `permutation[i]`.
    pub permutation: Vec<usize>,
}

impl SynthPair {
    pub fn gold_indices(&self) -> Vec<(usize, usize)> {
        self.permutation.iter().copied().enumerate().collect()
    }
}

/// Source: row-normalized Gaussian rows in generation (frequency) order.
/// Target: `source·Q·(I + stretch·D) + σ·G`, row-normalized, rows shuffled by
/// a random permutation. The gold dictionary pairs `s<i>` with `t<π(i)>`.
pub fn generate_pair(config: &SynthConfig) -> Result<SynthPair> {
    generate_pair_with(config, None)
}

/// Like [`generate_pair`]; `fixed` forces `(Q, identity permutation)`.
pub fn generate_pair_with(config: &SynthConfig, fixed: Option<&Array2<f64>>) -> Result<SynthPair> {
    config.validate()?;
    let (v, d) = (config.vocab_size, config.dim);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut x = gaussian_matrix(v, d, &mut rng);
    normalize_rows(&mut x);
    let rotation = match fixed {
        Some(q) => q.clone(),
        None => random_orthogonal(d, &mut rng),
    };
    let stretch_diag: Array1<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut y = x.dot(&rotation);
    if config.stretch > 0.0 {
        let factors = stretch_diag.mapv(|s| 1.0 + config.stretch * s);
        y *= &factors;
    }
    if config.noise_sigma > 0.0 {
        y.scaled_add(config.noise_sigma, &gaussian_matrix(v, d, &mut rng));
    }
    normalize_rows(&mut y);

    let mut permutation: Vec<usize> = (0..v).collect();
    if fixed.is_none() {
        permutation.shuffle(&mut rng);
    }
    let mut target_rows = Array2::zeros((v, d));
    for (i, &p) in permutation.iter().enumerate() {
        target_rows.row_mut(p).assign(&y.row(i));
    }

    let source_words: Vec<String> = (0..v).map(|i| format!("s{i}")).collect();
    let target_words: Vec<String> = (0..v).map(|j| format!("t{j}")).collect();
    let gold = Dictionary::new(
        permutation
            .iter()
            .enumerate()
            .map(|(i, &p)| (source_words[i].clone(), target_words[p].clone()))
            .collect(),
    )?;
    Ok(SynthPair {
        source: EmbeddingSpace::new(source_words, x, "src")?,
        target: EmbeddingSpace::new(target_words, target_rows, "tgt")?,
        gold,
        rotation,
        stretch_diag,
        permutation,
    })
}

fn unit_rows(m: ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
    m.rows()
        .into_iter()
        .map(|r| {
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            r.iter().map(|v| if norm > 0.0 { v / norm } else { 0.0 }).collect()
        })
        .collect()
}

fn naive_mean_top_k(sims: &[f64], k: usize) -> f64 {
    let k = k.min(sims.len());
    let mut taken = vec![false; sims.len()];
    let mut total = 0.0;
    for _ in 0..k {
        let mut best: Option<usize> = None;
        for (j, &s) in sims.iter().enumerate() {
            if !taken[j] && best.is_none_or(|b| s > sims[b]) {
                best = Some(j);
            }
        }
        let b = best.expect("k ≤ len");
        taken[b] = true;
        total += sims[b];
    }
    total / k as f64
}

/// Naive CSLS matrix (`queries × targets`): explicit dot products and
/// repeated max-selection for the `K` nearest neighbours.
pub fn brute_force_csls(source_mapped: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>, k: usize) -> Result<Array2<f64>> {
    let rows = source_mapped.nrows().max(target.nrows());
    if rows > BRUTE_FORCE_LIMIT {
        return Err(Error::ScaleGuard {
            rows,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let q = unit_rows(source_mapped);
    let t = unit_rows(target);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let cos: Vec<Vec<f64>> = q.iter().map(|a| t.iter().map(|b| dot(a, b)).collect()).collect();
    let r_q: Vec<f64> = cos.iter().map(|row| naive_mean_top_k(row, k)).collect();
    let r_t: Vec<f64> = (0..t.len())
        .map(|j| {
            let col: Vec<f64> = cos.iter().map(|row| row[j]).collect();
            naive_mean_top_k(&col, k)
        })
        .collect();
    Ok(Array2::from_shape_fn((q.len(), t.len()), |(i, j)| {
        2.0 * cos[i][j] - r_q[i] - r_t[j]
    }))
}

/// Outcome of one train → refine → evaluate run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub difficulty: String,
    pub variant: String,
    pub epochs: usize,
    pub seed: u64,
    /// `Err` holds the failure message; failed runs count as unsuccessful.
    pub report: std::result::Result<BliReport, String>,
}

impl RunOutcome {
    pub fn success(&self) -> bool {
        matches!(&self.report, Ok(r) if r.success)
    }
}

/// One aggregated row: successes out of runs and mean P@1 over successes.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub difficulty: String,
    pub variant: String,
    pub epochs: usize,
    pub successes: usize,
    pub runs: usize,
    pub mean_p1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub runs: Vec<RunOutcome>,
}

impl SweepReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("difficulty\tvariant\tepochs\tsuccesses\truns\tmean_p1\n");
        for r in &self.rows {
            let mean = r.mean_p1.map_or_else(|| "NA".to_owned(), |m| format!("{m:.2}"));
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{mean}",
                r.difficulty, r.variant, r.epochs, r.successes, r.runs
            );
        }
        out
    }

    pub fn row(&self, difficulty: &str, variant: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.difficulty == difficulty && r.variant == variant)
    }
}

/// Trains, refines and scores one generated pair against its gold
/// dictionary (in both senses: S→T after refinement).
pub fn run_pipeline(pair: &SynthPair, train_config: &TrainConfig, refine_config: &RefineConfig) -> Result<BliReport> {
    let (model, _) = train(train_config, &pair.source, &pair.target)?;
    let (st, _) = model.export_mapping();
    let refined = refine(&st, &pair.source, &pair.target, refine_config)?;
    evaluate_bli(
        &pair.gold,
        &refined.projection,
        &pair.source,
        &pair.target,
        &[1, 5, 10],
        refine_config.csls_k,
    )
}

/// Runs every `(difficulty × aligner × seed)` combination. Seed `s` drives
/// both the generated pair (`synth.seed + s`) and training (`train.seed + s`).
/// Individual failures are recorded, never propagated.
pub fn robustness_sweep(
    align_configs: &[TrainConfig],
    synth_configs: &[(String, SynthConfig)],
    n_seeds: u64,
    refine_config: &RefineConfig,
) -> SweepReport {
    let jobs: Vec<(usize, usize, u64)> = (0..synth_configs.len())
        .flat_map(|s| (0..align_configs.len()).flat_map(move |a| (0..n_seeds).map(move |seed| (s, a, seed))))
        .collect();
    let runs: Vec<RunOutcome> = jobs
        .par_iter()
        .map(|&(s, a, seed)| {
            let (name, synth) = &synth_configs[s];
            let train_config = TrainConfig {
                seed: align_configs[a].seed + seed,
                ..align_configs[a].clone()
            };
            let synth = SynthConfig {
                seed: synth.seed + seed,
                ..*synth
            };
            let report = generate_pair(&synth)
                .and_then(|pair| run_pipeline(&pair, &train_config, refine_config))
                .map_err(|e| e.to_string());
            match &report {
                Ok(r) => info!("{name}/{}/seed {seed}: P@1 {:.2}", train_config.variant, r.p1()),
                Err(e) => warn!("{name}/{}/seed {seed}: failed: {e}", train_config.variant),
            }
            RunOutcome {
                difficulty: name.clone(),
                variant: train_config.variant.to_string(),
                epochs: train_config.epochs,
                seed,
                report,
            }
        })
        .collect();

    let mut rows = Vec::new();
    for (name, _) in synth_configs {
        for a in align_configs {
            let variant = a.variant.to_string();
            let group: Vec<&RunOutcome> = runs
                .iter()
                .filter(|r| &r.difficulty == name && r.variant == variant && r.epochs == a.epochs)
                .collect();
            let p1s: Vec<f64> = group
                .iter()
                .filter(|r| r.success())
                .filter_map(|r| r.report.as_ref().ok().map(BliReport::p1))
                .collect();
            rows.push(SweepRow {
                difficulty: name.clone(),
                variant,
                epochs: a.epochs,
                successes: p1s.len(),
                runs: group.len(),
                mean_p1: (!p1s.is_empty()).then(|| p1s.iter().sum::<f64>() / p1s.len() as f64),
            });
        }
    }
    debug_assert!(rows.iter().all(|r| r.mean_p1.is_none_or(|m| m > SUCCESS_THRESHOLD)));
    SweepReport { rows, runs }
}
