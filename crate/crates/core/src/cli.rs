//! Batch entry points: `score`, `build-dataset` and `grpo-step`.
//!
//! Every command is a pure function of its input files, configuration and
//! fixtures; repeated runs write byte-identical outputs. Reports carry the
//! crate version and the effective configuration.

use crate::aggregate::{score_group, GroupContext, RewardModels};
use crate::config::{EmbeddingBackend, KitConfig, LikelihoodBackend};
use crate::dataset::{process_film, split_by_session, SampleRecord, SessionSplit, TrainingSample};
use crate::embedding::{
    CachedTextEmbedder, DirFrameStore, FixtureTextEmbedder, FixtureTokenEmbedder, HashingEmbedder, RemoteEmbedder,
    TextEmbedder, TokenEmbedder,
};
use crate::error::{Error, Result};
use crate::grpo::{grpo_stats, TokenLogProbs};
use crate::pcg::{FixtureLikelihood, LikelihoodProvider, RemoteLikelihood, UnigramLikelihood};
use crate::structure::{parse_completion, ReferenceOutput};
use crate::visual::AlignmentVariant;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "ebm-rl", version, about = "Reward scoring, GRPO loss and dialogue dataset tools")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score completion groups and write rewards and advantages.
    Score(ScoreArgs),
    /// Build session-disjoint dialogue samples from subtitle files.
    BuildDataset(BuildDatasetArgs),
    /// Evaluate the GRPO objective on token log-probabilities.
    GrpoStep(GrpoStepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    /// Line-delimited records {sample_id, clip_id, reference, completions[, context]}.
    #[arg(long)]
    pub input: PathBuf,
    /// Directory of `<clip_id>.json` frame-embedding files.
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    /// Output records; the report goes to `<out>.report.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Fail on the first record-level error.
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub variant: Option<AlignmentVariant>,
    /// Override a config key, e.g. `--set alpha=0.3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct BuildDatasetArgs {
    /// Directory of `<film_id>.srt` files with optional `<film_id>.speakers.json`.
    #[arg(long)]
    pub srt_dir: PathBuf,
    /// JSON object mapping film id to a list of {user, assistant} role pairs.
    #[arg(long)]
    pub roles: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct GrpoStepArgs {
    /// Line-delimited {sample_id, g, new_lp, old_lp, ref_lp}.
    #[arg(long)]
    pub logprobs: PathBuf,
    /// Either `score` output records or {sample_id, g, advantage} lines.
    #[arg(long)]
    pub advantages: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    /// JSON report path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

/// Result of a command: whether it succeeded and the report it wrote.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub success: bool,
    pub report: serde_json::Value,
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Score(a) => cmd_score(a),
        Command::BuildDataset(a) => cmd_build_dataset(a),
        Command::GrpoStep(a) => cmd_grpo_step(a),
    }
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    std::fs::write(path, buf)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.push(b'\n');
    std::fs::write(path, buf)?;
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Fixture paths in a config file are relative to the file's directory.
fn resolve(base: Option<&Path>, p: &str) -> PathBuf {
    let p = Path::new(p);
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p.to_path_buf(),
    }
}

fn required<'a>(v: &'a Option<String>, key: &str) -> Result<&'a str> {
    v.as_deref().ok_or_else(|| Error::Config(format!("{key} must be set for the selected backend")))
}

/// Builds the provider set named by `cfg`.
pub fn build_models(cfg: &KitConfig, frames_dir: &Path, base: Option<&Path>) -> Result<RewardModels> {
    let (text, tokens): (Arc<dyn TextEmbedder>, Arc<dyn TokenEmbedder>) = match cfg.embedding_backend {
        EmbeddingBackend::Hashing => {
            let h = HashingEmbedder::new(cfg.embed_dim);
            (Arc::new(CachedTextEmbedder::new(h.clone())), Arc::new(h))
        }
        EmbeddingBackend::Fixture => {
            let t = FixtureTextEmbedder::from_jsonl(&resolve(base, required(&cfg.text_fixture, "text_fixture")?))?;
            let k = FixtureTokenEmbedder::from_jsonl(&resolve(base, required(&cfg.token_fixture, "token_fixture")?))?;
            (Arc::new(t), Arc::new(k))
        }
        EmbeddingBackend::Remote => {
            let rc = cfg.remote(required(&cfg.embed_endpoint, "embed_endpoint")?);
            (Arc::new(CachedTextEmbedder::new(RemoteEmbedder::new(rc.clone())?)), Arc::new(RemoteEmbedder::new(rc)?))
        }
    };
    let likelihood: Arc<dyn LikelihoodProvider> = match cfg.likelihood_backend {
        LikelihoodBackend::Unigram => Arc::new(UnigramLikelihood::default()),
        LikelihoodBackend::Fixture => Arc::new(FixtureLikelihood::from_jsonl(&resolve(
            base,
            required(&cfg.likelihood_fixture, "likelihood_fixture")?,
        ))?),
        LikelihoodBackend::Remote => {
            Arc::new(RemoteLikelihood::new(cfg.remote(required(&cfg.gtll_endpoint, "gtll_endpoint")?))?)
        }
    };
    Ok(RewardModels { frames: Arc::new(DirFrameStore::new(frames_dir)), text, tokens, likelihood })
}

// ---------------------------------------------------------------- score

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreInput {
    pub sample_id: String,
    pub clip_id: String,
    /// Reference output; its `<answer>` segment is the ground truth.
    pub reference: String,
    pub completions: Vec<String>,
    /// Prompt context given to the reference policy (default empty).
    #[serde(default)]
    pub context: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreOutput {
    pub sample_id: String,
    pub raw: Vec<[f64; 4]>,
    pub normalized: Vec<[f64; 4]>,
    pub advantages: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordError {
    /// 1-based line number in the input file.
    pub line: usize,
    pub sample_id: Option<String>,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
struct ScoreReport<'a> {
    version: &'static str,
    command: &'static str,
    config: &'a KitConfig,
    strict: bool,
    records: usize,
    scored: usize,
    errors: Vec<RecordError>,
}

fn score_record(
    line: &str,
    cfg: &KitConfig,
    models: &RewardModels,
) -> std::result::Result<ScoreOutput, (Option<String>, Error)> {
    let rec: ScoreInput = serde_json::from_str(line).map_err(|e| (None, e.into()))?;
    let id = Some(rec.sample_id.clone());
    if let Some(g) = cfg.group_size {
        if rec.completions.len() != g {
            return Err((id, Error::Config(format!("expected {g} completions, got {}", rec.completions.len()))));
        }
    }
    let completions: Vec<_> = rec.completions.iter().map(|c| parse_completion(c)).collect();
    let reference = ReferenceOutput::parse(&rec.reference);
    let ctx = GroupContext {
        clip_id: &rec.clip_id,
        reference: &reference,
        prompt_context: rec.context.as_deref().unwrap_or(""),
    };
    let batch = score_group(&completions, &ctx, &cfg.scoring(), models).map_err(|e| (id, e))?;
    Ok(ScoreOutput {
        sample_id: rec.sample_id,
        raw: batch.raw(),
        normalized: batch.normalized().to_vec(),
        advantages: batch.advantages().to_vec(),
    })
}

pub fn cmd_score(args: &ScoreArgs) -> Result<Outcome> {
    let mut overrides = args.overrides.clone();
    if let Some(v) = args.variant {
        overrides.push(format!("variant=\"{}\"", variant_name(v)));
    }
    let cfg = KitConfig::load(&args.config, &overrides)?;
    let models = build_models(&cfg, &args.frames, args.config.parent())?;
    let lines = read_lines(&args.input)?;
    log::info!("scoring {} records with {} workers", lines.len(), cfg.workers);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<_> =
        pool.install(|| lines.par_iter().map(|(_, line)| score_record(line, &cfg, &models)).collect());

    let mut outputs = Vec::new();
    let mut errors = Vec::new();
    for ((line_no, _), r) in lines.iter().zip(results) {
        match r {
            Ok(o) => outputs.push(o),
            Err((sample_id, e)) => {
                log::warn!("line {line_no}: {e}");
                errors.push(RecordError { line: *line_no, sample_id, error: e.to_string() });
                if args.strict {
                    break;
                }
            }
        }
    }
    let success = !(args.strict && !errors.is_empty());
    if success {
        write_jsonl(&args.out, &outputs)?;
    }
    let report = ScoreReport {
        version: VERSION,
        command: "score",
        config: &cfg,
        strict: args.strict,
        records: lines.len(),
        scored: if success { outputs.len() } else { 0 },
        errors,
    };
    write_json(&sibling(&args.out, ".report.json"), &report)?;
    Ok(Outcome { success, report: serde_json::to_value(&report)? })
}

fn variant_name(v: AlignmentVariant) -> &'static str {
    match v {
        AlignmentVariant::Max => "max",
        AlignmentVariant::SentTopk => "sent_topk",
    }
}

// -------------------------------------------------------- build-dataset

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolePair {
    pub user: String,
    pub assistant: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilmSummary {
    pub film_id: String,
    pub sessions: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub version: &'static str,
    pub command: &'static str,
    pub config: KitConfig,
    pub films: usize,
    pub per_film: Vec<FilmSummary>,
    pub sessions: usize,
    pub samples: usize,
    pub train_sessions: usize,
    pub test_sessions: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    /// Session ids present in both splits; always 0.
    pub overlap: usize,
    pub warnings: Vec<String>,
}

/// Config used when `build-dataset` runs without a file; the GRPO keys
/// are irrelevant to it and take their usual values.
fn dataset_config(path: Option<&Path>, overrides: &[String]) -> Result<KitConfig> {
    match path {
        Some(p) => KitConfig::load(p, overrides),
        None => KitConfig::from_toml_with_overrides("clip_eps = 0.2\nkl_beta = 0.04\n", overrides),
    }
}

pub fn cmd_build_dataset(args: &BuildDatasetArgs) -> Result<Outcome> {
    let mut overrides = args.overrides.clone();
    if let Some(s) = args.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Some(f) = args.test_fraction {
        overrides.push(format!("test_fraction={f:?}"));
    }
    let cfg = dataset_config(args.config.as_deref(), &overrides)?;
    let limits = cfg.continuity()?;

    let roles: BTreeMap<String, Vec<RolePair>> = serde_json::from_str(
        &std::fs::read_to_string(&args.roles).map_err(|e| Error::Config(format!("{}: {e}", args.roles.display())))?,
    )?;
    let mut films: Vec<(String, PathBuf)> = std::fs::read_dir(&args.srt_dir)
        .map_err(|e| Error::Dataset(format!("{}: {e}", args.srt_dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "srt"))
        .filter_map(|p| Some((p.file_stem()?.to_str()?.to_string(), p)))
        .collect();
    films.sort();
    if films.is_empty() {
        return Err(Error::Dataset(format!("no .srt files in {}", args.srt_dir.display())));
    }

    let mut warnings = Vec::new();
    for film in roles.keys() {
        if !films.iter().any(|(f, _)| f == film) {
            warnings.push(format!("{film}: listed in roles file but no subtitle file found"));
        }
    }
    let mut samples: Vec<TrainingSample> = Vec::new();
    let mut per_film = Vec::new();
    let mut sessions = 0;
    for (film_id, path) in &films {
        let Some(pairs) = roles.get(film_id) else {
            warnings.push(format!("{film_id}: no role pairs, skipped"));
            continue;
        };
        let speakers_path = path.with_extension("speakers.json");
        let speakers: HashMap<usize, String> = if speakers_path.exists() {
            serde_json::from_str(&std::fs::read_to_string(&speakers_path)?)?
        } else {
            HashMap::new()
        };
        let pairs: Vec<(String, String)> = pairs.iter().map(|p| (p.user.clone(), p.assistant.clone())).collect();
        let out = process_film(film_id, &std::fs::read_to_string(path)?, &speakers, &pairs, &limits)?;
        per_film.push(FilmSummary {
            film_id: film_id.clone(),
            sessions: out.sessions.len(),
            samples: out.samples.len(),
        });
        sessions += out.sessions.len();
        warnings.extend(out.warnings);
        samples.extend(out.samples);
    }

    let split = if sessions >= 2 {
        split_by_session(&samples, cfg.test_fraction, cfg.seed)?
    } else {
        warnings.push(format!("only {sessions} session(s); all samples go to train"));
        SessionSplit { train: samples.clone(), test: Vec::new() }
    };
    for w in &warnings {
        log::warn!("{w}");
    }

    std::fs::create_dir_all(&args.out)?;
    let records = |v: &[TrainingSample]| v.iter().map(SampleRecord::from).collect::<Vec<_>>();
    write_jsonl(&args.out.join("samples.jsonl"), &records(&samples))?;
    write_jsonl(&args.out.join("train.jsonl"), &records(&split.train))?;
    write_jsonl(&args.out.join("test.jsonl"), &records(&split.test))?;
    let manifest = Manifest {
        version: VERSION,
        command: "build-dataset",
        films: per_film.len(),
        per_film,
        sessions,
        samples: samples.len(),
        train_sessions: SessionSplit::session_ids(&split.train).len(),
        test_sessions: SessionSplit::session_ids(&split.test).len(),
        train_samples: split.train.len(),
        test_samples: split.test.len(),
        overlap: split.overlap(),
        warnings,
        config: cfg,
    };
    write_json(&args.out.join("manifest.json"), &manifest)?;
    Ok(Outcome { success: true, report: serde_json::to_value(&manifest)? })
}

// ------------------------------------------------------------ grpo-step

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogProbRecord {
    pub sample_id: String,
    pub g: usize,
    pub new_lp: Vec<f64>,
    pub old_lp: Vec<f64>,
    pub ref_lp: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum AdvantageRecord {
    Single { sample_id: String, g: usize, advantage: f64 },
    Group { sample_id: String, advantages: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupStepReport {
    pub sample_id: String,
    pub size: usize,
    pub tokens: usize,
    pub loss: f64,
    pub mean_kl: f64,
    pub clip_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrpoStepReport {
    pub version: &'static str,
    pub command: &'static str,
    pub config: KitConfig,
    /// Mean of the per-group losses.
    pub loss: f64,
    /// Token-weighted over all groups.
    pub mean_kl: f64,
    /// Share of all tokens where the clipped branch is active.
    pub clip_fraction: f64,
    pub tokens: usize,
    pub groups: Vec<GroupStepReport>,
}

fn join_error(msg: String) -> Error {
    Error::Join(msg)
}

pub fn cmd_grpo_step(args: &GrpoStepArgs) -> Result<Outcome> {
    let cfg = KitConfig::load(&args.config, &args.overrides)?;
    let grpo = cfg.grpo();

    let mut adv: BTreeMap<(String, usize), f64> = BTreeMap::new();
    for (line_no, line) in read_lines(&args.advantages)? {
        let rec: AdvantageRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Dataset(format!("{} line {line_no}: {e}", args.advantages.display())))?;
        let entries = match rec {
            AdvantageRecord::Single { sample_id, g, advantage } => vec![((sample_id, g), advantage)],
            AdvantageRecord::Group { sample_id, advantages } => {
                advantages.into_iter().enumerate().map(|(g, a)| ((sample_id.clone(), g), a)).collect()
            }
        };
        for (key, a) in entries {
            if adv.insert(key.clone(), a).is_some() {
                return Err(join_error(format!("duplicate advantage for {key:?}")));
            }
        }
    }

    // groups in order of first appearance, members sorted by g
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, BTreeMap<usize, TokenLogProbs>> = HashMap::new();
    for (line_no, line) in read_lines(&args.logprobs)? {
        let r: LogProbRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Dataset(format!("{} line {line_no}: {e}", args.logprobs.display())))?;
        let entry = groups.entry(r.sample_id.clone()).or_insert_with(|| {
            order.push(r.sample_id.clone());
            BTreeMap::new()
        });
        let lp = TokenLogProbs { new_lp: r.new_lp, old_lp: r.old_lp, ref_lp: r.ref_lp };
        if entry.insert(r.g, lp).is_some() {
            return Err(join_error(format!("duplicate log-probs for ({:?}, {})", r.sample_id, r.g)));
        }
    }
    if order.is_empty() {
        return Err(Error::EmptyInput("no log-prob records".into()));
    }
    let matched: usize = groups.values().map(BTreeMap::len).sum();
    if matched != adv.len() {
        let extra = adv.keys().find(|(s, g)| !groups.get(s).is_some_and(|m| m.contains_key(g)));
        return Err(join_error(format!("advantage without log-probs: {extra:?}")));
    }

    let mut reports = Vec::new();
    for sample_id in &order {
        let members = &groups[sample_id];
        let mut seqs = Vec::with_capacity(members.len());
        let mut a = Vec::with_capacity(members.len());
        for (&g, lp) in members {
            let v = adv
                .get(&(sample_id.clone(), g))
                .ok_or_else(|| join_error(format!("no advantage for ({sample_id:?}, {g})")))?;
            seqs.push(lp.clone());
            a.push(*v);
        }
        let s = grpo_stats(&seqs, &a, &grpo).map_err(|e| Error::Join(format!("{sample_id}: {e}")))?;
        reports.push(GroupStepReport {
            sample_id: sample_id.clone(),
            size: seqs.len(),
            tokens: s.tokens,
            loss: s.loss,
            mean_kl: s.mean_kl,
            clip_fraction: s.clip_fraction,
        });
    }

    let tokens: usize = reports.iter().map(|r| r.tokens).sum();
    let kl_sum: f64 = reports.iter().map(|r| r.mean_kl * r.tokens as f64).sum();
    // per-group fractions are exact ratios of integers
    let clipped: f64 = reports.iter().map(|r| (r.clip_fraction * r.tokens as f64).round()).sum();
    let report = GrpoStepReport {
        version: VERSION,
        command: "grpo-step",
        loss: reports.iter().map(|r| r.loss).sum::<f64>() / reports.len() as f64,
        mean_kl: kl_sum / tokens as f64,
        clip_fraction: clipped / tokens as f64,
        tokens,
        groups: reports,
        config: cfg,
    };
    write_json(&args.out, &report)?;
    let mut stdout = std::io::stdout().lock();
    writeln!(
        stdout,
        "loss {}  mean_kl {}  clip_fraction {}  ({} groups, {} tokens)",
        report.loss,
        report.mean_kl,
        report.clip_fraction,
        report.groups.len(),
        report.tokens
    )?;
    Ok(Outcome { success: true, report: serde_json::to_value(&report)? })
}
