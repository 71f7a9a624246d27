//! `clwe`: align, refine and evaluate cross-lingual word embeddings.
//!
//! Option precedence is command-line flag, then `CLWE_*` environment
//! variable, then `--config` file, then built-in default.

mod settings;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use clwe_core::embedio::{load_dictionary, load_vec, normalize, save_dictionary, save_vec};
use clwe_core::refine::refine;
use clwe_core::retrieval::{evaluate_bli, translate_words, RetrievalOptions, Translation};
use clwe_core::synth::{generate_pair, generate_pair_with, robustness_sweep};
use clwe_core::trainer::{load_projection, projection_archive, train};
use clwe_core::{
    AlignmentModel, EmbeddingSpace, GenTargetMode, NormScheme, Projection, RefineConfig, SynthConfig, TrainConfig,
    ZVariant,
};
use ndarray::Array2;

use settings::{List, Settings};

#[derive(Parser, Debug)]
#[command(name = "clwe", version, about = "Unsupervised cross-lingual word embedding alignment")]
struct Cli {
    /// key=value file supplying defaults for any long option
    #[arg(long, global = true, env = "CLWE_CONFIG")]
    config: Option<PathBuf>,

    /// More log output on stderr (repeatable)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Adversarial alignment; writes checkpoint, exported maps and logs
    Align(AlignArgs),
    /// Procrustes self-learning with symmetric re-weighting
    Refine(RefineCmd),
    /// CSLS precision@k against a gold dictionary
    Evaluate(EvaluateArgs),
    /// Ranked CSLS translation candidates for source words
    Translate(TranslateArgs),
    /// Generate a synthetic embedding pair with its gold dictionary
    Synth(SynthArgs),
    /// Success counts of both aligner variants over generated pairs
    Sweep(SweepArgs),
    /// Export M_ST and M_TS from a checkpoint
    Export(ExportArgs),
}

#[derive(Args, Debug)]
struct SpaceArgs {
    /// Source embeddings (.vec)
    #[arg(long, env = "CLWE_SRC")]
    src: PathBuf,
    /// Target embeddings (.vec)
    #[arg(long, env = "CLWE_TGT")]
    tgt: PathBuf,
    /// Keep only the first N words of each file [default: 200000]
    #[arg(long, env = "CLWE_MAX_VOCAB")]
    max_vocab: Option<usize>,
    /// unit or unit_center_unit [default: unit_center_unit]
    #[arg(long, env = "CLWE_NORM")]
    norm: Option<NormScheme>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long, env = "CLWE_EPOCHS")]
    epochs: Option<usize>,
    /// Samples per epoch
    #[arg(long, env = "CLWE_EPOCH_SIZE")]
    epoch_size: Option<usize>,
    #[arg(long, env = "CLWE_BATCH")]
    batch: Option<usize>,
    #[arg(long, env = "CLWE_LR")]
    lr: Option<f64>,
    #[arg(long, env = "CLWE_LAMBDA_CYC")]
    lambda_cyc: Option<f64>,
    #[arg(long, env = "CLWE_LAMBDA_REC")]
    lambda_rec: Option<f64>,
    #[arg(long, env = "CLWE_LATENT_DIM")]
    latent_dim: Option<usize>,
    /// Final epochs with z fixed at 1 [default: 3 for 10 epochs, else 5]
    #[arg(long, env = "CLWE_FINETUNE_EPOCHS")]
    finetune_epochs: Option<usize>,
    /// literal or classic
    #[arg(long, env = "CLWE_GEN_TARGET_MODE")]
    gen_target_mode: Option<GenTargetMode>,
    /// Batches are drawn from the N most frequent words
    #[arg(long, env = "CLWE_SAMPLE_TOP_K")]
    sample_top_k: Option<usize>,
    /// Hidden widths of each discriminator, comma separated
    #[arg(long, env = "CLWE_DISC_HIDDEN")]
    disc_hidden: Option<List<usize>>,
    #[arg(long, env = "CLWE_DISC_DROPOUT")]
    disc_dropout: Option<f64>,
    #[arg(long, env = "CLWE_DISC_STEPS")]
    disc_steps: Option<usize>,
    /// domainflow or fixed_one
    #[arg(long, env = "CLWE_VARIANT")]
    variant: Option<ZVariant>,
    /// Words per language used by the model-selection criterion
    #[arg(long, env = "CLWE_VALIDATION_WORDS")]
    validation_words: Option<usize>,
}

#[derive(Args, Debug)]
struct RefineArgs {
    /// Procrustes rounds
    #[arg(long, env = "CLWE_REFINE_ITERATIONS")]
    refine_iterations: Option<usize>,
    /// Pseudo-dictionary built over the N most frequent words
    #[arg(long, env = "CLWE_DICT_TOP_K")]
    dict_top_k: Option<usize>,
    /// Keep only mutual nearest neighbours (true/false)
    #[arg(long, env = "CLWE_MUTUAL_NN")]
    mutual_nn: Option<bool>,
    #[arg(long, env = "CLWE_REWEIGHT_POWER")]
    reweight_power: Option<f64>,
    #[arg(long, env = "CLWE_MIN_DICT_PAIRS")]
    min_dict_pairs: Option<usize>,
}

#[derive(Args, Debug)]
struct AlignArgs {
    #[command(flatten)]
    spaces: SpaceArgs,
    /// Output directory
    #[arg(long, env = "CLWE_OUT")]
    out: PathBuf,
    #[command(flatten)]
    train: TrainArgs,
    /// CSLS neighbourhood size
    #[arg(long, env = "CLWE_CSLS_K")]
    csls_k: Option<usize>,
    #[arg(long, env = "CLWE_SEED")]
    seed: Option<u64>,
    /// Print the resolved configuration and exit
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args, Debug)]
struct RefineCmd {
    #[command(flatten)]
    spaces: SpaceArgs,
    /// Checkpoint, exported mapping or projection directory
    #[arg(long, env = "CLWE_MAP")]
    map: PathBuf,
    /// Output directory
    #[arg(long, env = "CLWE_OUT")]
    out: PathBuf,
    #[command(flatten)]
    refine: RefineArgs,
    #[arg(long, env = "CLWE_CSLS_K")]
    csls_k: Option<usize>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    spaces: SpaceArgs,
    /// Gold dictionary, one `source target` pair per line
    #[arg(long, env = "CLWE_DICT")]
    dict: PathBuf,
    /// Checkpoint, exported mapping or projection; identity when omitted
    #[arg(long, env = "CLWE_MAP")]
    map: Option<PathBuf>,
    /// Precision cut-offs [default: 1,5,10]
    #[arg(long, env = "CLWE_KS")]
    ks: Option<List<usize>>,
    #[arg(long, env = "CLWE_CSLS_K")]
    csls_k: Option<usize>,
}

#[derive(Args, Debug)]
struct TranslateArgs {
    #[command(flatten)]
    spaces: SpaceArgs,
    /// Checkpoint, exported mapping or projection; identity when omitted
    #[arg(long, env = "CLWE_MAP")]
    map: Option<PathBuf>,
    /// Candidates per word [default: 10]
    #[arg(long, env = "CLWE_TOP")]
    top: Option<usize>,
    /// Frequent source words added to the CSLS query population [default: 10000]
    #[arg(long, env = "CLWE_POPULATION")]
    population: Option<usize>,
    #[arg(long, env = "CLWE_CSLS_K")]
    csls_k: Option<usize>,
    /// File with one query word per line
    #[arg(long)]
    words_file: Option<PathBuf>,
    /// Query words
    words: Vec<String>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output directory for src.vec, tgt.vec and gold.txt
    #[arg(long, env = "CLWE_OUT")]
    out: PathBuf,
    /// easy, medium or hard; sets noise and stretch
    #[arg(long, env = "CLWE_PRESET")]
    preset: Option<String>,
    #[arg(long, env = "CLWE_VOCAB")]
    vocab: Option<usize>,
    #[arg(long, env = "CLWE_DIM")]
    dim: Option<usize>,
    #[arg(long, env = "CLWE_NOISE")]
    noise: Option<f64>,
    #[arg(long, env = "CLWE_STRETCH")]
    stretch: Option<f64>,
    #[arg(long, env = "CLWE_SEED")]
    seed: Option<u64>,
    /// Identity rotation and no shuffling
    #[arg(long)]
    aligned: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Presets to run [default: easy,medium,hard]
    #[arg(long, env = "CLWE_DIFFICULTIES")]
    difficulties: Option<List<String>>,
    /// Aligner variants [default: domainflow,fixed_one]
    #[arg(long, env = "CLWE_VARIANTS")]
    variants: Option<List<ZVariant>>,
    /// Seeds per (difficulty, variant) [default: 10]
    #[arg(long, env = "CLWE_SEEDS")]
    seeds: Option<u64>,
    #[arg(long, env = "CLWE_VOCAB")]
    vocab: Option<usize>,
    #[arg(long, env = "CLWE_DIM")]
    dim: Option<usize>,
    #[command(flatten)]
    train: TrainArgs,
    #[command(flatten)]
    refine: RefineArgs,
    #[arg(long, env = "CLWE_CSLS_K")]
    csls_k: Option<usize>,
    /// Base seed for pairs and training
    #[arg(long, env = "CLWE_SEED")]
    seed: Option<u64>,
    /// Parallel runs [default: all cores]
    #[arg(long, env = "CLWE_JOBS")]
    jobs: Option<usize>,
    /// Also write the table here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(long, env = "CLWE_CHECKPOINT")]
    checkpoint: PathBuf,
    #[arg(long, env = "CLWE_OUT")]
    out: PathBuf,
}

/// Resolved `key=value` pairs, echoed as `# key=value` lines.
#[derive(Default)]
struct Echo(Vec<(String, String)>);

impl Echo {
    fn add(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_owned(), value.to_string()));
    }

    fn extend(&mut self, pairs: Vec<(String, String)>) {
        self.0.extend(pairs);
    }

    fn print(&self, out: &mut impl Write) -> Result<()> {
        for (k, v) in &self.0 {
            writeln!(out, "# {k}={v}")?;
        }
        Ok(())
    }

    fn text(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

fn resolve_train(a: &TrainArgs, seed: Option<u64>, csls_k: Option<usize>, s: &Settings) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    let config = TrainConfig {
        epochs: s.pick(a.epochs, "epochs", d.epochs)?,
        epoch_size: s.pick(a.epoch_size, "epoch-size", d.epoch_size)?,
        batch_size: s.pick(a.batch, "batch", d.batch_size)?,
        lr: s.pick(a.lr, "lr", d.lr)?,
        lambda_cyc: s.pick(a.lambda_cyc, "lambda-cyc", d.lambda_cyc)?,
        lambda_rec: s.pick(a.lambda_rec, "lambda-rec", d.lambda_rec)?,
        latent_dim: s.pick(a.latent_dim, "latent-dim", d.latent_dim)?,
        finetune_epochs: s.pick_opt(a.finetune_epochs, "finetune-epochs")?,
        sample_top_k: s.pick(a.sample_top_k, "sample-top-k", d.sample_top_k)?,
        seed: s.pick(seed, "seed", d.seed)?,
        gen_target_mode: s.pick(a.gen_target_mode, "gen-target-mode", d.gen_target_mode)?,
        disc_steps_per_gen_step: s.pick(a.disc_steps, "disc-steps", d.disc_steps_per_gen_step)?,
        disc_hidden: s.pick(a.disc_hidden.clone(), "disc-hidden", List(d.disc_hidden.clone()))?.0,
        disc_dropout: s.pick(a.disc_dropout, "disc-dropout", d.disc_dropout)?,
        variant: s.pick(a.variant, "variant", d.variant)?,
        validation_words: s.pick(a.validation_words, "validation-words", d.validation_words)?,
        csls_k: s.pick(csls_k, "csls-k", d.csls_k)?,
        ..d
    };
    config.validate()?;
    Ok(config)
}

fn resolve_refine(a: &RefineArgs, csls_k: Option<usize>, s: &Settings) -> Result<RefineConfig> {
    let d = RefineConfig::default();
    let config = RefineConfig {
        iterations: s.pick(a.refine_iterations, "refine-iterations", d.iterations)?,
        dict_top_k: s.pick(a.dict_top_k, "dict-top-k", d.dict_top_k)?,
        mutual_nn: s.pick(a.mutual_nn, "mutual-nn", d.mutual_nn)?,
        reweight_power: s.pick(a.reweight_power, "reweight-power", d.reweight_power)?,
        csls_k: s.pick(csls_k, "csls-k", d.csls_k)?,
        min_dict_pairs: s.pick(a.min_dict_pairs, "min-dict-pairs", d.min_dict_pairs)?,
    };
    config.validate()?;
    Ok(config)
}

fn describe_refine(c: &RefineConfig) -> Vec<(String, String)> {
    vec![
        ("refine_iterations".into(), c.iterations.to_string()),
        ("dict_top_k".into(), c.dict_top_k.to_string()),
        ("mutual_nn".into(), c.mutual_nn.to_string()),
        ("reweight_power".into(), c.reweight_power.to_string()),
        ("csls_k".into(), c.csls_k.to_string()),
        ("min_dict_pairs".into(), c.min_dict_pairs.to_string()),
    ]
}

struct ResolvedSpaces {
    src: PathBuf,
    tgt: PathBuf,
    max_vocab: usize,
    norm: NormScheme,
}

impl ResolvedSpaces {
    fn new(a: &SpaceArgs, s: &Settings) -> Result<Self> {
        Ok(ResolvedSpaces {
            src: a.src.clone(),
            tgt: a.tgt.clone(),
            max_vocab: s.pick(a.max_vocab, "max-vocab", 200_000)?,
            norm: s.pick(a.norm, "norm", NormScheme::default())?,
        })
    }

    fn echo(&self, e: &mut Echo) {
        e.add("src", self.src.display());
        e.add("tgt", self.tgt.display());
        e.add("max_vocab", self.max_vocab);
        e.add("norm", self.norm);
    }

    fn load(&self) -> Result<(EmbeddingSpace, EmbeddingSpace)> {
        let read = |p: &Path| -> Result<EmbeddingSpace> {
            let (space, report) = load_vec(p, self.max_vocab).with_context(|| format!("loading {}", p.display()))?;
            if report.duplicates + report.malformed > 0 {
                log::warn!(
                    "{}: skipped {} duplicate and {} malformed lines",
                    p.display(),
                    report.duplicates,
                    report.malformed
                );
            }
            Ok(normalize(space, self.norm))
        };
        let src = read(&self.src)?;
        let tgt = read(&self.tgt)?;
        if src.dim() != tgt.dim() {
            bail!("source dimension {} differs from target dimension {}", src.dim(), tgt.dim());
        }
        Ok((src, tgt))
    }
}

fn projection_or_identity(map: Option<&Path>, dim: usize) -> Result<Projection> {
    match map {
        Some(dir) => load_projection(dir).with_context(|| format!("loading map from {}", dir.display())),
        None => Ok(Projection::identity(dim)),
    }
}

fn warn_unused(s: &Settings) {
    for key in s.unused() {
        log::warn!("config key `{key}` is not used by this command");
    }
}

fn cmd_align(a: &AlignArgs, s: &Settings, out: &mut impl Write) -> Result<()> {
    let spaces = ResolvedSpaces::new(&a.spaces, s)?;
    let config = resolve_train(&a.train, a.seed, a.csls_k, s)?;
    warn_unused(s);
    let mut echo = Echo::default();
    spaces.echo(&mut echo);
    echo.add("out", a.out.display());
    echo.extend(config.describe());
    echo.print(out)?;
    if a.dry_run {
        return Ok(());
    }

    let (src, tgt) = spaces.load()?;
    let (model, history) = train(&config, &src, &tgt)?;
    let ipe = config.iterations_per_epoch();
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let ckpt = a.out.join("checkpoint");
    model.save(&ckpt, history.best * ipe)?;
    // export from the stored parameters so every consumer sees the same map
    AlignmentModel::load(&ckpt)?.export_archive().write(a.out.join("mapping"))?;
    fs::write(a.out.join("train_log.tsv"), history.loss_log_tsv())?;
    fs::write(a.out.join("criterion.tsv"), history.criterion_tsv(ipe))?;
    fs::write(a.out.join("config.txt"), echo.text())?;
    writeln!(out, "best_epoch\t{}", history.best)?;
    writeln!(out, "best_criterion\t{:.6}", history.best_criterion())?;
    writeln!(out, "checkpoint\t{}", ckpt.display())?;
    Ok(())
}

fn cmd_refine(a: &RefineCmd, s: &Settings, out: &mut impl Write) -> Result<()> {
    let spaces = ResolvedSpaces::new(&a.spaces, s)?;
    let config = resolve_refine(&a.refine, a.csls_k, s)?;
    warn_unused(s);
    let mut echo = Echo::default();
    spaces.echo(&mut echo);
    echo.add("map", a.map.display());
    echo.add("out", a.out.display());
    echo.extend(describe_refine(&config));
    echo.print(out)?;

    let (src, tgt) = spaces.load()?;
    let start = load_projection(&a.map).with_context(|| format!("loading map from {}", a.map.display()))?;
    let refined = refine(&start.source, &src, &tgt, &config)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    projection_archive(&refined.projection).write(a.out.join("projection"))?;
    save_dictionary(&refined.dictionary_words(&src, &tgt), a.out.join("dictionary.txt"))?;
    let mut log = String::from("round\tdict_size\tobjective\n");
    for (i, step) in refined.steps.iter().enumerate() {
        log.push_str(&format!("{}\t{}\t{:.6}\n", i + 1, step.dict_size, step.objective));
    }
    fs::write(a.out.join("refine_log.tsv"), &log)?;
    fs::write(a.out.join("config.txt"), echo.text())?;
    out.write_all(log.as_bytes())?;
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs, s: &Settings, out: &mut impl Write) -> Result<()> {
    let spaces = ResolvedSpaces::new(&a.spaces, s)?;
    let ks = s.pick(a.ks.clone(), "ks", List(vec![1, 5, 10]))?.0;
    let csls_k = s.pick(a.csls_k, "csls-k", RetrievalOptions::default().csls_k)?;
    let map = s.pick_opt(a.map.clone(), "map")?;
    warn_unused(s);
    if ks.is_empty() || ks.contains(&0) {
        bail!("--ks needs positive cut-offs");
    }
    let mut echo = Echo::default();
    spaces.echo(&mut echo);
    echo.add("dict", a.dict.display());
    echo.add("map", map.as_ref().map_or("identity".into(), |p| p.display().to_string()));
    echo.add("ks", List(ks.clone()));
    echo.add("csls_k", csls_k);
    echo.print(out)?;

    let (src, tgt) = spaces.load()?;
    let projection = projection_or_identity(map.as_deref(), src.dim())?;
    let dict = load_dictionary(&a.dict)?;
    let report = evaluate_bli(&dict, &projection, &src, &tgt, &ks, csls_k)?;
    out.write_all(report.to_tsv().as_bytes())?;
    writeln!(out, "P@1 {:.1} success={}", report.p1(), report.success)?;
    Ok(())
}

fn cmd_translate(a: &TranslateArgs, s: &Settings, out: &mut impl Write) -> Result<()> {
    let spaces = ResolvedSpaces::new(&a.spaces, s)?;
    let defaults = RetrievalOptions::default();
    let top = s.pick(a.top, "top", 10)?;
    let opts = RetrievalOptions {
        csls_k: s.pick(a.csls_k, "csls-k", defaults.csls_k)?,
        population: s.pick(a.population, "population", defaults.population)?,
    };
    let map = s.pick_opt(a.map.clone(), "map")?;
    warn_unused(s);
    let mut words = a.words.clone();
    if let Some(path) = &a.words_file {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        words.extend(text.split_whitespace().map(str::to_owned));
    }
    if words.is_empty() {
        bail!("no query words given");
    }
    let mut echo = Echo::default();
    spaces.echo(&mut echo);
    echo.add("map", map.as_ref().map_or("identity".into(), |p| p.display().to_string()));
    echo.add("top", top);
    echo.add("population", opts.population);
    echo.add("csls_k", opts.csls_k);
    echo.print(out)?;

    let (src, tgt) = spaces.load()?;
    let projection = projection_or_identity(map.as_deref(), src.dim())?;
    let queries: Vec<&str> = words.iter().map(String::as_str).collect();
    writeln!(out, "word\trank\tcandidate\tcsls")?;
    for t in translate_words(&queries, &projection, &src, &tgt, top, opts) {
        match t {
            Translation::Oov(w) => writeln!(out, "{w}\t-\tOOV\t-")?,
            Translation::Ranked { word, candidates } => {
                for (r, (c, score)) in candidates.iter().enumerate() {
                    writeln!(out, "{word}\t{}\t{c}\t{score:.6}", r + 1)?;
                }
            }
        }
    }
    Ok(())
}

fn resolve_synth(
    preset: Option<String>,
    vocab: Option<usize>,
    dim: Option<usize>,
    noise: Option<f64>,
    stretch: Option<f64>,
    seed: Option<u64>,
    s: &Settings,
) -> Result<SynthConfig> {
    let base = match s.pick_opt(preset, "preset")? {
        Some(name) => SynthConfig::preset(&name)?,
        None => SynthConfig::default(),
    };
    let config = SynthConfig {
        vocab_size: s.pick(vocab, "vocab", base.vocab_size)?,
        dim: s.pick(dim, "dim", base.dim)?,
        noise_sigma: s.pick(noise, "noise", base.noise_sigma)?,
        stretch: s.pick(stretch, "stretch", base.stretch)?,
        seed: s.pick(seed, "seed", base.seed)?,
    };
    config.validate()?;
    Ok(config)
}

fn cmd_synth(a: &SynthArgs, s: &Settings, out: &mut impl Write) -> Result<()> {
    let config = resolve_synth(a.preset.clone(), a.vocab, a.dim, a.noise, a.stretch, a.seed, s)?;
    warn_unused(s);
    let mut echo = Echo::default();
    echo.add("out", a.out.display());
    echo.add("vocab", config.vocab_size);
    echo.add("dim", config.dim);
    echo.add("noise", config.noise_sigma);
    echo.add("stretch", config.stretch);
    echo.add("seed", config.seed);
    echo.add("aligned", a.aligned);
    echo.print(out)?;

    let pair = if a.aligned {
        generate_pair_with(&config, Some(&Array2::eye(config.dim)))?
    } else {
        generate_pair(&config)?
    };
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    save_vec(&pair.source, a.out.join("src.vec"))?;
    save_vec(&pair.target, a.out.join("tgt.vec"))?;
    save_dictionary(&pair.gold, a.out.join("gold.txt"))?;
    writeln!(out, "wrote {} word pairs to {}", pair.gold.len(), a.out.display())?;
    Ok(())
}

fn cmd_sweep(a: &SweepArgs, s: &Settings, out: &mut impl Write) -> Result<()> {
    let difficulties = s
        .pick(
            a.difficulties.clone(),
            "difficulties",
            List(vec!["easy".into(), "medium".into(), "hard".into()]),
        )?
        .0;
    let variants = s
        .pick(a.variants.clone(), "variants", List(vec![ZVariant::DomainFlow, ZVariant::FixedOne]))?
        .0;
    let seeds = s.pick(a.seeds, "seeds", 10)?;
    let jobs = s.pick_opt(a.jobs, "jobs")?;
    let train_config = resolve_train(&a.train, a.seed, a.csls_k, s)?;
    let refine_config = resolve_refine(&a.refine, a.csls_k, s)?;
    let mut synths = Vec::new();
    for name in &difficulties {
        let c = resolve_synth(Some(name.clone()), a.vocab, a.dim, None, None, a.seed, s)?;
        synths.push((name.clone(), c));
    }
    warn_unused(s);
    if variants.is_empty() || synths.is_empty() || seeds == 0 {
        bail!("sweep needs at least one difficulty, variant and seed");
    }

    let mut echo = Echo::default();
    echo.add("difficulties", List(difficulties.clone()));
    echo.add("variants", List(variants.clone()));
    echo.add("seeds", seeds);
    echo.add("vocab", synths[0].1.vocab_size);
    echo.add("dim", synths[0].1.dim);
    echo.add("jobs", jobs.map_or("auto".into(), |j| j.to_string()));
    echo.extend(train_config.describe().into_iter().filter(|(k, _)| k != "variant").collect());
    echo.extend(describe_refine(&refine_config));
    echo.print(out)?;

    let aligners: Vec<TrainConfig> = variants
        .iter()
        .map(|&variant| TrainConfig {
            variant,
            ..train_config.clone()
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build()?;
    let report = pool.install(|| robustness_sweep(&aligners, &synths, seeds, &refine_config));
    let tsv = report.to_tsv();
    if let Some(path) = &a.out {
        fs::write(path, &tsv).with_context(|| format!("writing {}", path.display()))?;
    }
    out.write_all(tsv.as_bytes())?;
    Ok(())
}

fn cmd_export(a: &ExportArgs, s: &Settings, out: &mut impl Write) -> Result<()> {
    warn_unused(s);
    let mut echo = Echo::default();
    echo.add("checkpoint", a.checkpoint.display());
    echo.add("out", a.out.display());
    echo.print(out)?;
    let model = AlignmentModel::load(&a.checkpoint)
        .with_context(|| format!("loading checkpoint {}", a.checkpoint.display()))?;
    model.export_archive().write(&a.out)?;
    writeln!(out, "wrote M_ST and M_TS to {}", a.out.display())?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let settings = Settings::load(cli.config.as_deref())?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::Align(a) => cmd_align(a, &settings, &mut out),
        Command::Refine(a) => cmd_refine(a, &settings, &mut out),
        Command::Evaluate(a) => cmd_evaluate(a, &settings, &mut out),
        Command::Translate(a) => cmd_translate(a, &settings, &mut out),
        Command::Synth(a) => cmd_synth(a, &settings, &mut out),
        Command::Sweep(a) => cmd_sweep(a, &settings, &mut out),
        Command::Export(a) => cmd_export(a, &settings, &mut out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
