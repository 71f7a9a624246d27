//! Adversarial training loop with unsupervised model selection.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::{info, warn};
use ndarray::{s, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::archive::{Archive, KIND_CHECKPOINT, KIND_MAPPING, KIND_PROJECTION};
use crate::domainflow::{
    discriminator_objective, generator_objective, CriticParams, GenTargetMode, LossBreakdown, LossWeights,
    MappingParams, ZSchedule,
};
use crate::embedio::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::linalg::LinearMap;
use crate::nets::{adam_step, AdamState, Autoencoder, Dense, Discriminator, Generator};
use crate::retrieval::{CslsIndex, Projection, DEFAULT_CSLS_K};

/// Where `z` comes from during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZVariant {
    /// Beta schedule with a fine-tune window at `z = 1`.
    #[default]
    DomainFlow,
    /// `z = 1` throughout: a plain bidirectional adversarial autoencoder.
    FixedOne,
}

impl FromStr for ZVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "domainflow" => Ok(ZVariant::DomainFlow),
            "fixed_one" | "z1" => Ok(ZVariant::FixedOne),
            other => Err(Error::Config(format!("unknown variant `{other}`"))),
        }
    }
}

impl fmt::Display for ZVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ZVariant::DomainFlow => "domainflow",
            ZVariant::FixedOne => "fixed_one",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub epoch_size: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lambda_cyc: f64,
    pub lambda_rec: f64,
    pub latent_dim: usize,
    /// `None` resolves through [`default_finetune_epochs`].
    pub finetune_epochs: Option<usize>,
    pub sample_top_k: usize,
    pub seed: u64,
    pub gen_target_mode: GenTargetMode,
    pub disc_steps_per_gen_step: usize,
    pub disc_hidden: Vec<usize>,
    pub disc_slope: f64,
    pub disc_dropout: f64,
    pub variant: ZVariant,
    pub validation_words: usize,
    pub csls_k: usize,
    pub max_nonfinite: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            epoch_size: 100_000,
            batch_size: 32,
            lr: 0.001,
            lambda_cyc: 5.0,
            lambda_rec: 1.0,
            latent_dim: 350,
            finetune_epochs: None,
            sample_top_k: 75_000,
            seed: 0,
            gen_target_mode: GenTargetMode::Literal,
            disc_steps_per_gen_step: 1,
            disc_hidden: vec![2048, 2048],
            disc_slope: 0.2,
            disc_dropout: 0.1,
            variant: ZVariant::DomainFlow,
            validation_words: 10_000,
            csls_k: DEFAULT_CSLS_K,
            max_nonfinite: 100,
        }
    }
}

/// Fine-tune epochs at `z = 1`: 3 for a 10-epoch run, otherwise 5, always
/// leaving at least one scheduled epoch.
pub fn default_finetune_epochs(epochs: usize) -> usize {
    let base = if epochs == 10 { 3 } else { 5 };
    base.min(epochs.saturating_sub(1))
}

impl TrainConfig {
    pub fn resolved_finetune_epochs(&self) -> usize {
        self.finetune_epochs.unwrap_or_else(|| default_finetune_epochs(self.epochs))
    }

    pub fn iterations_per_epoch(&self) -> usize {
        (self.epoch_size / self.batch_size).max(1)
    }

    pub fn total_iterations(&self) -> usize {
        self.epochs * self.iterations_per_epoch()
    }

    pub fn schedule(&self) -> ZSchedule {
        ZSchedule::from_epochs(
            self.epochs as u64,
            self.iterations_per_epoch() as u64,
            self.resolved_finetune_epochs() as u64,
        )
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            lambda_cyc: self.lambda_cyc,
            lambda_rec: self.lambda_rec,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epochs", self.epochs),
            ("epoch_size", self.epoch_size),
            ("batch_size", self.batch_size),
            ("latent_dim", self.latent_dim),
            ("sample_top_k", self.sample_top_k),
            ("disc_steps_per_gen_step", self.disc_steps_per_gen_step),
            ("validation_words", self.validation_words),
            ("csls_k", self.csls_k),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.resolved_finetune_epochs() >= self.epochs {
            return Err(Error::Config("finetune_epochs must be smaller than epochs".into()));
        }
        if !(self.lr >= 0.0 && self.lambda_cyc >= 0.0 && self.lambda_rec >= 0.0) {
            return Err(Error::Config("lr and loss weights must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.disc_dropout) {
            return Err(Error::Config("disc_dropout must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// `key=value` lines describing every field, for logs and manifests.
    pub fn describe(&self) -> Vec<(String, String)> {
        let hidden: Vec<String> = self.disc_hidden.iter().map(usize::to_string).collect();
        vec![
            ("epochs".into(), self.epochs.to_string()),
            ("epoch_size".into(), self.epoch_size.to_string()),
            ("batch_size".into(), self.batch_size.to_string()),
            ("lr".into(), self.lr.to_string()),
            ("lambda1".into(), self.lambda_cyc.to_string()),
            ("lambda2".into(), self.lambda_rec.to_string()),
            ("latent_dim".into(), self.latent_dim.to_string()),
            ("finetune_epochs".into(), self.resolved_finetune_epochs().to_string()),
            ("sample_top_k".into(), self.sample_top_k.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("gen_target_mode".into(), self.gen_target_mode.to_string()),
            ("disc_steps_per_gen_step".into(), self.disc_steps_per_gen_step.to_string()),
            ("disc_hidden".into(), hidden.join(",")),
            ("disc_slope".into(), self.disc_slope.to_string()),
            ("disc_dropout".into(), self.disc_dropout.to_string()),
            ("variant".into(), self.variant.to_string()),
            ("validation_words".into(), self.validation_words.to_string()),
            ("csls_k".into(), self.csls_k.to_string()),
        ]
    }
}

/// All learnable parameters plus the configuration they were trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentModel {
    pub mapping: MappingParams,
    pub critics: CriticParams,
    pub dim: usize,
    pub config: TrainConfig,
}

impl AlignmentModel {
    /// Identity generators, one shared random orthonormal encoder (decoder =
    /// its transpose) for both languages, uniform critics.
    pub fn init<R: Rng + ?Sized>(config: &TrainConfig, dim: usize, rng: &mut R) -> Self {
        let k = config.latent_dim;
        let ae = Autoencoder::orthonormal(dim, k, rng);
        let d_s = Discriminator::new(k, &config.disc_hidden, config.disc_slope, config.disc_dropout, rng);
        let d_t = Discriminator::new(k, &config.disc_hidden, config.disc_slope, config.disc_dropout, rng);
        AlignmentModel {
            mapping: MappingParams {
                ae_s: ae.clone(),
                ae_t: ae,
                g_st: Generator::identity(k),
                g_ts: Generator::identity(k),
            },
            critics: CriticParams { d_s, d_t },
            dim,
            config: config.clone(),
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.mapping.g_st.dim()
    }

    /// `(M_ST, M_TS)`: affine maps equal to `Dec_T(W_ST·Enc_S(x))` and
    /// `Dec_S(W_TS·Enc_T(y))`.
    pub fn export_mapping(&self) -> (LinearMap, LinearMap) {
        let m = &self.mapping;
        let affine = |d: &Dense| LinearMap {
            matrix: d.weight.clone(),
            offset: d.bias.clone(),
        };
        let st = affine(&m.ae_t.decoder)
            .compose(&LinearMap::linear(m.g_st.weight.clone()))
            .compose(&affine(&m.ae_s.encoder));
        let ts = affine(&m.ae_s.decoder)
            .compose(&LinearMap::linear(m.g_ts.weight.clone()))
            .compose(&affine(&m.ae_t.encoder));
        (st, ts)
    }

    /// Exported `M_ST` and `M_TS` at on-disk (f32) precision.
    pub fn export_archive(&self) -> Archive {
        let (st, ts) = self.export_mapping();
        let mut a = Archive::new();
        a.set("kind", KIND_MAPPING);
        a.insert_map("st", &st);
        a.insert_map("ts", &ts);
        a
    }

    pub fn to_archive(&self, iteration: usize) -> Archive {
        let mut a = Archive::new();
        a.set("kind", KIND_CHECKPOINT);
        for (k, v) in self.config.describe() {
            a.set(&k, v);
        }
        a.set("dim", self.dim);
        a.set("iteration", iteration);
        a.insert_params("", &self.mapping);
        a.insert_params("", &self.critics);
        a
    }

    pub fn save(&self, dir: impl AsRef<Path>, iteration: usize) -> Result<()> {
        self.to_archive(iteration).write(dir)
    }

    pub fn from_archive(a: &Archive) -> Result<Self> {
        let hidden: Vec<usize> = a
            .get("disc_hidden")?
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| Error::Checkpoint(format!("bad disc_hidden `{s}`"))))
            .collect::<Result<_>>()?;
        let config = TrainConfig {
            epochs: a.get_parsed("epochs")?,
            epoch_size: a.get_parsed("epoch_size")?,
            batch_size: a.get_parsed("batch_size")?,
            lr: a.get_parsed("lr")?,
            lambda_cyc: a.get_parsed("lambda1")?,
            lambda_rec: a.get_parsed("lambda2")?,
            latent_dim: a.get_parsed("latent_dim")?,
            finetune_epochs: Some(a.get_parsed("finetune_epochs")?),
            sample_top_k: a.get_parsed("sample_top_k")?,
            seed: a.get_parsed("seed")?,
            gen_target_mode: a.get_parsed("gen_target_mode")?,
            disc_steps_per_gen_step: a.get_parsed("disc_steps_per_gen_step")?,
            disc_hidden: hidden,
            disc_slope: a.get_parsed("disc_slope")?,
            disc_dropout: a.get_parsed("disc_dropout")?,
            variant: a.get_parsed("variant")?,
            validation_words: a.get_parsed("validation_words")?,
            csls_k: a.get_parsed("csls_k")?,
            max_nonfinite: TrainConfig::default().max_nonfinite,
        };
        let dim: usize = a.get_parsed("dim")?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = AlignmentModel::init(&config, dim, &mut rng);
        a.load_params("", &mut model.mapping)?;
        a.load_params("", &mut model.critics)?;
        Ok(model)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        AlignmentModel::from_archive(&Archive::read(dir)?)
    }
}

/// Reads the retrieval projection stored in `dir`: a refined projection, an
/// exported mapping (`M_ST`, targets untouched) or a checkpoint, whose
/// mapping is exported at on-disk precision.
pub fn load_projection(dir: impl AsRef<Path>) -> Result<Projection> {
    let a = Archive::read(dir)?;
    match a.get("kind")? {
        KIND_PROJECTION => Ok(Projection {
            source: a.map("source")?,
            target: a.map("target")?,
        }),
        KIND_MAPPING => Ok(Projection::one_sided(a.map("st")?)),
        KIND_CHECKPOINT => {
            let (st, _) = AlignmentModel::from_archive(&a)?.export_mapping();
            Ok(Projection::one_sided(st.to_f32_precision()))
        }
        other => Err(Error::Checkpoint(format!("unknown archive kind `{other}`"))),
    }
}

/// Archive holding a refined projection.
pub fn projection_archive(p: &Projection) -> Archive {
    let mut a = Archive::new();
    a.set("kind", KIND_PROJECTION);
    a.insert_map("source", &p.source);
    a.insert_map("target", &p.target);
    a
}

/// One training iteration as recorded in the history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub z: f64,
    /// Generator-side losses.
    pub losses: LossBreakdown,
    /// Discriminator-side adversarial loss of the last critic step.
    pub disc_loss: f64,
    pub finite: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub iterations: Vec<IterationRecord>,
    /// Validation criterion of the initial model (index 0) and after every
    /// epoch (index `e` for epoch `e`).
    pub criteria: Vec<f64>,
    /// Index into `criteria` of the returned model.
    pub best: usize,
}

impl TrainHistory {
    pub fn best_criterion(&self) -> f64 {
        self.criteria[self.best]
    }

    /// Tab-separated `iteration, z, adv, cyc, rec, total` lines.
    pub fn loss_log_tsv(&self) -> String {
        let mut out = String::from("iteration\tz\tadv\tcyc\trec\ttotal\n");
        for r in &self.iterations {
            let l = &r.losses;
            out.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\n",
                r.iteration, r.z, l.adv_total, l.cyc, l.rec, l.total
            ));
        }
        out
    }

    /// Tab-separated `epoch, iteration, criterion` lines (epoch 0 = init).
    pub fn criterion_tsv(&self, iterations_per_epoch: usize) -> String {
        let mut out = String::from("epoch\titeration\tcriterion\n");
        for (e, c) in self.criteria.iter().enumerate() {
            out.push_str(&format!("{e}\t{}\t{c:.6}\n", e * iterations_per_epoch));
        }
        out
    }
}

/// Mean cosine over a CSLS pseudo-dictionary of the most frequent words.
///
/// The `n_freq` most frequent source words are mapped and matched to their
/// CSLS nearest target; pairs whose target is also among the `n_freq` most
/// frequent target words are kept. Returns −1 when no pair survives.
pub fn validation_criterion(
    mapping: &LinearMap,
    source: &EmbeddingSpace,
    target: &EmbeddingSpace,
    n_freq: usize,
    csls_k: usize,
) -> f64 {
    let n = n_freq.min(source.len());
    let n_t = n_freq.min(target.len());
    let mut mapped = mapping.apply(source.vectors().slice(s![..n, ..]));
    crate::embedio::normalize_rows(&mut mapped);
    let index = CslsIndex::build(target.vectors().view(), csls_k);
    let scorer = index.with_queries(mapped.view());
    let mut sum = 0.0f64;
    let mut kept = 0usize;
    for (q, (j, _)) in scorer.nearest_all().into_iter().enumerate() {
        if j < n_t {
            sum += scorer.queries().row(q).dot(&index.targets().row(j));
            kept += 1;
        }
    }
    if kept == 0 {
        -1.0
    } else {
        sum / kept as f64
    }
}

/// Stateful training loop. [`train`] drives it end to end; the step methods
/// are public so callers can interleave their own checks.
pub struct Trainer<'a> {
    pub config: TrainConfig,
    pub model: AlignmentModel,
    source: &'a EmbeddingSpace,
    target: &'a EmbeddingSpace,
    pool_s: usize,
    pool_t: usize,
    gen_opt: AdamState<MappingParams>,
    disc_opt: AdamState<CriticParams>,
    batch_rng: ChaCha8Rng,
    dropout_rng: ChaCha8Rng,
    z_rng: ChaCha8Rng,
    schedule: ZSchedule,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl<'a> Trainer<'a> {
    pub fn new(config: &TrainConfig, source: &'a EmbeddingSpace, target: &'a EmbeddingSpace) -> Result<Self> {
        config.validate()?;
        if source.dim() != target.dim() {
            return Err(Error::DimMismatch {
                expected: source.dim(),
                found: target.dim(),
                context: "source vs target embedding dimension",
            });
        }
        for space in [source, target] {
            if space.len() < config.batch_size {
                return Err(Error::Config(format!(
                    "vocabulary `{}` ({} words) is smaller than the batch size",
                    space.lang_tag(),
                    space.len()
                )));
            }
            if space.len() < config.sample_top_k {
                warn!(
                    "`{}` has {} words < sample_top_k {}; sampling from the full vocabulary",
                    space.lang_tag(),
                    space.len(),
                    config.sample_top_k
                );
            }
        }
        let model = AlignmentModel::init(config, source.dim(), &mut stream(config.seed, 0));
        Ok(Trainer {
            gen_opt: AdamState::new(&model.mapping),
            disc_opt: AdamState::new(&model.critics),
            model,
            config: config.clone(),
            source,
            target,
            pool_s: config.sample_top_k.min(source.len()),
            pool_t: config.sample_top_k.min(target.len()),
            batch_rng: stream(config.seed, 1),
            dropout_rng: stream(config.seed, 2),
            z_rng: stream(config.seed, 3),
            schedule: config.schedule(),
        })
    }

    pub fn schedule(&self) -> ZSchedule {
        self.schedule
    }

    /// `z` for iteration `t` under the configured variant.
    pub fn next_z(&mut self, t: usize) -> f64 {
        match self.config.variant {
            ZVariant::DomainFlow => self.schedule.sample_z(t as u64, &mut self.z_rng),
            ZVariant::FixedOne => 1.0,
        }
    }

    fn sample_batches(&mut self) -> (Array2<f64>, Array2<f64>) {
        let b = self.config.batch_size;
        let rs: Vec<usize> = (0..b).map(|_| self.batch_rng.random_range(0..self.pool_s)).collect();
        let rt: Vec<usize> = (0..b).map(|_| self.batch_rng.random_range(0..self.pool_t)).collect();
        (
            self.source.vectors().select(Axis(0), &rs),
            self.target.vectors().select(Axis(0), &rt),
        )
    }

    /// One critic update; mapping parameters are untouched.
    pub fn disc_step(&mut self, z: f64) -> Result<LossBreakdown> {
        let (xs, xt) = self.sample_batches();
        let (loss, grads) = discriminator_objective(
            &self.model.mapping,
            &self.model.critics,
            xs.view(),
            xt.view(),
            z,
            true,
            &mut self.dropout_rng,
        )?;
        adam_step(&mut self.model.critics, &grads, &mut self.disc_opt, self.config.lr)?;
        Ok(loss)
    }

    /// One autoencoder/generator update; critics are untouched.
    pub fn gen_step(&mut self, z: f64) -> Result<LossBreakdown> {
        let (xs, xt) = self.sample_batches();
        let (loss, grads) = generator_objective(
            &self.model.mapping,
            &self.model.critics,
            xs.view(),
            xt.view(),
            z,
            self.config.gen_target_mode,
            self.config.loss_weights(),
        )?;
        adam_step(&mut self.model.mapping, &grads, &mut self.gen_opt, self.config.lr)?;
        Ok(loss)
    }

    pub fn criterion(&self) -> f64 {
        let (st, _) = self.model.export_mapping();
        validation_criterion(
            &st,
            self.source,
            self.target,
            self.config.validation_words,
            self.config.csls_k,
        )
    }

    /// Runs all epochs with `z_source(t)` supplying `z`, returning the model
    /// with the highest validation criterion (the initial model included).
    pub fn run_with(mut self, z_source: &mut dyn FnMut(&mut Self, usize) -> f64) -> Result<(AlignmentModel, TrainHistory)> {
        let per_epoch = self.config.iterations_per_epoch();
        let mut history = TrainHistory {
            iterations: Vec::with_capacity(self.config.total_iterations()),
            criteria: vec![self.criterion()],
            best: 0,
        };
        let mut best_model = self.model.clone();
        let mut nonfinite_run = 0usize;
        info!("initial criterion {:.4}", history.criteria[0]);

        for epoch in 1..=self.config.epochs {
            for i in 0..per_epoch {
                let t = (epoch - 1) * per_epoch + i;
                let z = z_source(&mut self, t);
                let mut disc_loss = f64::NAN;
                let mut step = || -> Result<LossBreakdown> {
                    for _ in 0..self.config.disc_steps_per_gen_step {
                        disc_loss = self.disc_step(z)?.adv_total;
                    }
                    self.gen_step(z)
                };
                let record = match step() {
                    Ok(losses) => {
                        nonfinite_run = 0;
                        IterationRecord {
                            iteration: t,
                            z,
                            losses,
                            disc_loss,
                            finite: true,
                        }
                    }
                    Err(Error::NonFinite { term }) => {
                        nonfinite_run += 1;
                        warn!("iteration {t}: non-finite `{term}`, update skipped");
                        if nonfinite_run >= self.config.max_nonfinite {
                            return Err(Error::Diverged(nonfinite_run));
                        }
                        IterationRecord {
                            iteration: t,
                            z,
                            losses: LossBreakdown::default(),
                            disc_loss,
                            finite: false,
                        }
                    }
                    Err(e) => return Err(e),
                };
                history.iterations.push(record);
            }
            let c = self.criterion();
            history.criteria.push(c);
            info!("epoch {epoch}: criterion {c:.4}");
            if c > history.criteria[history.best] {
                history.best = epoch;
                best_model = self.model.clone();
            }
        }
        Ok((best_model, history))
    }

    pub fn run(self) -> Result<(AlignmentModel, TrainHistory)> {
        self.run_with(&mut |tr, t| tr.next_z(t))
    }
}

/// Trains on two normalized spaces; see [`Trainer`].
pub fn train(config: &TrainConfig, source: &EmbeddingSpace, target: &EmbeddingSpace) -> Result<(AlignmentModel, TrainHistory)> {
    Trainer::new(config, source, target)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, gaussian_matrix, random_orthogonal};

    #[test]
    fn finetune_defaults() {
        assert_eq!(default_finetune_epochs(10), 3);
        assert_eq!(default_finetune_epochs(20), 5);
        assert_eq!(default_finetune_epochs(30), 5);
        assert_eq!(default_finetune_epochs(1), 0);
        let cfg = TrainConfig::default();
        assert_eq!(cfg.iterations_per_epoch(), 3125);
        let sched = cfg.schedule();
        assert_eq!(sched.finetune_start, 7 * 3125);
    }

    #[test]
    fn export_identity() {
        let mut cfg = TrainConfig {
            latent_dim: 4,
            disc_hidden: vec![3],
            ..TrainConfig::default()
        };
        cfg.latent_dim = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut model = AlignmentModel::init(&cfg, 4, &mut rng);
        model.mapping.ae_s = Autoencoder::identity(4);
        model.mapping.ae_t = Autoencoder::identity(4);
        let (st, ts) = model.export_mapping();
        assert_eq!(st, LinearMap::identity(4));
        assert_eq!(ts, LinearMap::identity(4));
    }

    #[test]
    fn export_projector() {
        let cfg = TrainConfig {
            latent_dim: 3,
            disc_hidden: vec![3],
            ..TrainConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = AlignmentModel::init(&cfg, 6, &mut rng);
        let enc = &model.mapping.ae_s.encoder.weight;
        let (st, _) = model.export_mapping();
        let projector = enc.t().dot(enc);
        assert!(frobenius((&st.matrix - &projector).view()) < 1e-12);
        // projector is idempotent
        assert!(frobenius((st.matrix.dot(&st.matrix) - &st.matrix).view()) < 1e-12);
    }

    #[test]
    fn export_matches_staged_pipeline() {
        let cfg = TrainConfig {
            latent_dim: 5,
            disc_hidden: vec![3],
            ..TrainConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut model = AlignmentModel::init(&cfg, 7, &mut rng);
        let m = &mut model.mapping;
        m.ae_s.encoder.bias = gaussian_matrix(1, 5, &mut rng).row(0).to_owned();
        m.ae_t.decoder.bias = gaussian_matrix(1, 7, &mut rng).row(0).to_owned();
        m.ae_t.decoder.weight = gaussian_matrix(7, 5, &mut rng);
        m.g_st = Generator::new(random_orthogonal(5, &mut rng) * 1.3);
        let x = gaussian_matrix(100, 7, &mut rng);
        let h = model.mapping.ae_s.encode(x.view()).unwrap();
        let w = h.dot(&model.mapping.g_st.weight.t());
        let staged = model.mapping.ae_t.decode(w.view()).unwrap();
        let (st, _) = model.export_mapping();
        let fused = st.apply(x.view());
        for (a, b) in staged.rows().into_iter().zip(fused.rows()) {
            let rel = frobenius((&a - &b).insert_axis(Axis(0)).view()) / frobenius(a.insert_axis(Axis(0)));
            assert!(rel < 1e-5);
        }
    }

    #[test]
    fn shared_encoder_init_exports_identity() {
        let cfg = TrainConfig {
            latent_dim: 6,
            disc_hidden: vec![3],
            ..TrainConfig::default()
        };
        let model = AlignmentModel::init(&cfg, 6, &mut ChaCha8Rng::seed_from_u64(4));
        let (st, _) = model.export_mapping();
        assert!(frobenius((st.matrix - Array2::<f64>::eye(6)).view()) < 1e-12);
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = TrainConfig {
            latent_dim: 3,
            disc_hidden: vec![4, 4],
            seed: 9,
            ..TrainConfig::default()
        };
        let model = AlignmentModel::init(&cfg, 5, &mut ChaCha8Rng::seed_from_u64(5));
        let dir = tempfile::tempdir().unwrap();
        model.save(dir.path(), 17).unwrap();
        assert!(dir.path().join("enc_s.weight.bin").exists());
        assert!(dir.path().join("d_t.layer2.bias.bin").exists());
        let loaded = AlignmentModel::load(dir.path()).unwrap();
        assert_eq!(loaded.config.seed, 9);
        assert_eq!(loaded.critics.d_s.hidden_widths(), vec![4, 4]);
        let dir2 = tempfile::tempdir().unwrap();
        loaded.save(dir2.path(), 17).unwrap();
        for entry in std::fs::read_dir(dir.path()).unwrap() {
            let name = entry.unwrap().file_name();
            let a = std::fs::read(dir.path().join(&name)).unwrap();
            let b = std::fs::read(dir2.path().join(&name)).unwrap();
            assert_eq!(a, b, "{name:?} differs");
        }
    }

    #[test]
    fn exported_mapping_matches_checkpoint_projection() {
        let cfg = TrainConfig {
            latent_dim: 4,
            disc_hidden: vec![3],
            ..TrainConfig::default()
        };
        let mut model = AlignmentModel::init(&cfg, 6, &mut ChaCha8Rng::seed_from_u64(1));
        model.mapping.g_st.weight = gaussian_matrix(4, 4, &mut ChaCha8Rng::seed_from_u64(2));
        let ckpt = tempfile::tempdir().unwrap();
        model.save(ckpt.path(), 0).unwrap();
        let export = tempfile::tempdir().unwrap();
        AlignmentModel::load(ckpt.path()).unwrap().export_archive().write(export.path()).unwrap();
        let from_ckpt = load_projection(ckpt.path()).unwrap();
        assert_eq!(from_ckpt, load_projection(export.path()).unwrap());
        assert_eq!(from_ckpt.target, LinearMap::identity(6));

        let refined = Projection {
            source: from_ckpt.source.clone(),
            target: from_ckpt.source.to_f32_precision(),
        };
        let dir = tempfile::tempdir().unwrap();
        projection_archive(&refined).write(dir.path()).unwrap();
        assert_eq!(load_projection(dir.path()).unwrap(), refined);
    }
}
