//! The `cgedit` command line: one subcommand per pipeline stage.

use std::collections::BTreeMap;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::annotation::{self, AppState, CandidatePool, Quotas, SessionStore};
use crate::baselines::{self, AUTOGEN_PER_POSITIVE, AUTOID_PER_POSITIVE};
use crate::classifier::{self, FeaturizerConfig, MultiHeadModel, Provenance, ScoreMatrix, TrainingConfig};
use crate::contrast::{self, ContrastSet};
use crate::corpus::{self, Corpus, NGramIndex, TokenizerProfile, DEFAULT_ORDERS};
use crate::edit::{self, CandidateEdit};
use crate::error::{Error, Result};
use crate::eval::{self, MetricReport};
use crate::jsonl;
use crate::manifest::RunManifest;
use crate::quantify;

#[derive(Debug, Parser)]
#[command(name = "cgedit", version, about = "Corpus-guided contrast sets for dialect feature detection")]
pub struct Cli {
    /// Directory overriding bundled data (inventories, UI assets).
    #[arg(long, env = "CGEDIT_DATA_DIR", global = true)]
    pub data_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build and persist the n-gram index of a corpus.
    Index(IndexArgs),
    /// Generate shuffled candidate edits for every seed.
    Generate(GenerateArgs),
    /// Serve the annotation API (and UI assets, if present).
    Annotate(AnnotateArgs),
    /// Build baseline training sets.
    #[command(subcommand)]
    Baselines(BaselineCommand),
    /// Train the multi-head classifier on contrast sets.
    Train(TrainArgs),
    /// Score every corpus utterance with a trained model.
    Score(ScoreArgs),
    /// Validate and normalize scores produced by an external model.
    ImportScores(ImportArgs),
    /// Write contrast sets as a flat training file for external trainers.
    ExportTraining(ExportArgs),
    /// ROC-AUC, AP and Prec@K against gold labels, over one or more runs.
    Eval(EvalArgs),
    /// Emit the top-K utterances per feature as an annotation sheet.
    Rank(RankArgs),
    /// Per-speaker feature frequencies and social-factor group statistics.
    Quantify(QuantifyArgs),
    /// Pool several saved metric reports into one.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Lowercase before tokenizing.
    #[arg(long)]
    pub uncased: bool,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_ORDERS)]
    pub orders: Vec<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub seeds: PathBuf,
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub rng: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[arg(long)]
    pub seeds: PathBuf,
    /// Candidates from `generate`; generated on the fly from `--index` otherwise.
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    #[arg(long, required_unless_present = "candidates")]
    pub index: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub rng: u64,
    /// Feature inventory (`inde`, `aae` or a file) shown alongside sessions.
    #[arg(long)]
    pub features: Option<String>,
    /// Session event-log directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub serve_port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    /// Static UI build to serve at `/`.
    #[arg(long)]
    pub ui: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub quota_pos: usize,
    #[arg(long, default_value_t = 3)]
    pub quota_neg: usize,
}

#[derive(Debug, Subcommand)]
pub enum BaselineCommand {
    /// Seeds plus hand-written negatives.
    Manualgen {
        #[arg(long)]
        seeds: PathBuf,
        #[arg(long)]
        manual: PathBuf,
        #[arg(long)]
        uncased: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Seeds plus random chunk shuffles of each seed.
    Autogen {
        #[arg(long)]
        seeds: PathBuf,
        #[arg(long, default_value_t = 0)]
        rng: u64,
        #[arg(long, default_value_t = AUTOGEN_PER_POSITIVE)]
        count: usize,
        #[arg(long)]
        uncased: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Seeds plus random corpus draws.
    Autoid {
        #[arg(long)]
        seeds: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 0)]
        rng: u64,
        #[arg(long, default_value_t = AUTOID_PER_POSITIVE)]
        per_positive: usize,
        #[arg(long)]
        uncased: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Union of contrast-set files, per feature.
    Merge {
        #[arg(long = "contrast-set", required = true)]
        contrast_sets: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long = "contrast-set", required = true)]
    pub contrast_sets: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub rng: u64,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 150)]
    pub warmup_epochs: usize,
    #[arg(long, default_value_t = classifier::DEFAULT_HASH_BITS)]
    pub hash_bits: u32,
    #[arg(long)]
    pub uncased: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// `.tsv` for a table, anything else for JSON lines.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Inventory the scores must cover; defaults to the features in the file.
    #[arg(long)]
    pub features: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long = "contrast-set", required = true)]
    pub contrast_sets: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// One score file per run. A path containing `{run}` expands to runs 1..=N.
    #[arg(long, required = true)]
    pub scores: Vec<String>,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, default_value_t = eval::DEFAULT_K)]
    pub k: usize,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Output directory for `report.tsv`, `report.txt` and `report.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Features to rank; all scored features by default.
    #[arg(long = "feature")]
    pub features: Vec<String>,
    #[arg(long, default_value_t = eval::DEFAULT_K)]
    pub k: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct QuantifyArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub speakers: PathBuf,
    /// Feature subset averaged into each speaker's frequency; all by default.
    #[arg(long = "feature")]
    pub features: Vec<String>,
    #[arg(long, default_value_t = quantify::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// `report.json` files written by `eval`.
    #[arg(long = "report", required = true)]
    pub reports: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn profile(uncased: bool) -> TokenizerProfile {
    if uncased {
        TokenizerProfile::UNCASED
    } else {
        TokenizerProfile::CASED
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn create_parent(file: &Path) -> Result<()> {
    match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => create_dir(p),
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    create_parent(path)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load_corpus(path: &Path, speakers: Option<&Path>) -> Result<Corpus> {
    corpus::ingest_corpus(path, speakers, TokenizerProfile::CASED)
}

/// Loads contrast-set files and merges sets that share a feature.
fn load_merged(paths: &[PathBuf]) -> Result<Vec<ContrastSet>> {
    let mut out: Vec<ContrastSet> = Vec::new();
    for p in paths {
        for set in contrast::load_contrast_sets(p)? {
            match out.iter_mut().find(|s| s.feature_id == set.feature_id) {
                Some(existing) => *existing = contrast::merge_sets(existing, &set)?,
                None => out.push(set),
            }
        }
    }
    Ok(out)
}

fn expand_runs(scores: &[String], runs: Option<usize>) -> Result<Vec<PathBuf>> {
    let paths: Vec<PathBuf> = match (scores, runs) {
        ([one], Some(n)) if one.contains("{run}") => (1..=n).map(|r| PathBuf::from(one.replace("{run}", &r.to_string()))).collect(),
        _ => scores.iter().map(PathBuf::from).collect(),
    };
    if let Some(n) = runs {
        if paths.len() != n {
            return Err(Error::InvalidInput(format!("--runs {n} but {} score file(s) given", paths.len())));
        }
    }
    Ok(paths)
}

pub fn run(cli: Cli) -> Result<()> {
    let data_dir = cli.data_dir.as_deref();
    match cli.command {
        Command::Index(a) => {
            let corpus = corpus::ingest_corpus(&a.corpus, None, profile(a.uncased))?;
            let index = NGramIndex::build(&corpus, &a.orders)?;
            index.save(&a.out)?;
            log::info!("indexed {} utterances, {} n-grams", index.total_utterances(), index.len());
            RunManifest::new("index")
                .input("corpus", &a.corpus)
                .config("orders", &a.orders)
                .config("tokenizer", profile(a.uncased))
                .output(&a.out)
                .write_beside(&a.out)?;
        }
        Command::Generate(a) => {
            let index = NGramIndex::load(&a.index)?;
            let seeds = edit::load_seeds(&a.seeds, index.tokenizer_profile())?;
            let cands = edit::generate_all(&seeds, &index, a.rng)?;
            jsonl::write(&a.out, &cands)?;
            log::info!("{} candidates for {} seeds", cands.len(), seeds.len());
            RunManifest::new("generate")
                .input("seeds", &a.seeds)
                .input("index", &a.index)
                .rng(a.rng)
                .output(&a.out)
                .write_beside(&a.out)?;
        }
        Command::Annotate(a) => {
            let (seeds, candidates) = match (&a.candidates, &a.index) {
                (Some(c), _) => {
                    let cands: Vec<CandidateEdit> = jsonl::read(c)?;
                    (edit::load_seeds(&a.seeds, TokenizerProfile::CASED)?, cands)
                }
                (None, Some(i)) => {
                    let index = NGramIndex::load(i)?;
                    let seeds = edit::load_seeds(&a.seeds, index.tokenizer_profile())?;
                    let cands = edit::generate_all(&seeds, &index, a.rng)?;
                    (seeds, cands)
                }
                (None, None) => unreachable!("clap requires one of them"),
            };
            let features = match &a.features {
                Some(f) => corpus::resolve_inventory(f, data_dir)?
                    .into_iter()
                    .map(|f| (f.feature_id.clone(), f))
                    .collect(),
                None => BTreeMap::new(),
            };
            let ui = a.ui.clone().or_else(|| data_dir.map(|d| d.join("ui")).filter(|p| p.is_dir()));
            let state = AppState {
                store: Arc::new(SessionStore::open(&a.out)?),
                pool: Arc::new(CandidatePool { seeds, candidates }),
                features: Arc::new(features),
                quotas: Quotas {
                    pos: a.quota_pos,
                    neg: a.quota_neg,
                },
            };
            let mut m = RunManifest::new("annotate");
            m.input("seeds", &a.seeds);
            if let Some(c) = &a.candidates {
                m.input("candidates", c);
            }
            if let Some(i) = &a.index {
                m.input("index", i);
            }
            m.rng(a.rng)
                .config("quota_pos", a.quota_pos)
                .config("quota_neg", a.quota_neg)
                .output(&a.out)
                .write_beside(&a.out)?;
            annotation::serve_forever(state, ui, SocketAddr::new(a.host, a.serve_port))?;
        }
        Command::Baselines(b) => baseline(b)?,
        Command::Train(a) => {
            let sets = load_merged(&a.contrast_sets)?;
            let featurizer = FeaturizerConfig {
                hash_bits: a.hash_bits,
                tokenizer_profile: profile(a.uncased),
            };
            let config = TrainingConfig {
                epochs: a.epochs,
                batch_size: a.batch_size,
                learning_rate: a.learning_rate,
                warmup_epochs: a.warmup_epochs,
                rng_seed: a.rng,
                ..TrainingConfig::default()
            };
            let (model, log) = classifier::train(&sets, featurizer, &config)?;
            create_parent(&a.out)?;
            model.save(&a.out)?;
            for (f, losses) in &log.epoch_loss {
                if let Some(last) = losses.last() {
                    log::info!("{f}: final epoch loss {last:.6}");
                }
            }
            let mut m = RunManifest::new("train");
            for p in &a.contrast_sets {
                m.input("contrast_set", p);
            }
            m.config("training", &config).config("featurizer", featurizer).rng(a.rng).output(&a.out).write_beside(&a.out)?;
        }
        Command::Score(a) => {
            let model = MultiHeadModel::load(&a.model)?;
            let corpus = load_corpus(&a.corpus, None)?;
            let scores = classifier::score_corpus(&model, &corpus);
            create_parent(&a.out)?;
            classifier::write_score_records(&a.out, &scores)?;
            RunManifest::new("score")
                .input("model", &a.model)
                .input("corpus", &a.corpus)
                .output(&a.out)
                .write_beside(&a.out)?;
        }
        Command::ImportScores(a) => {
            let corpus = load_corpus(&a.corpus, None)?;
            let features: Vec<String> = match &a.features {
                Some(f) => corpus::resolve_inventory(f, data_dir)?.into_iter().map(|f| f.feature_id).collect(),
                None => ScoreMatrix::from_score_file(&a.scores, Provenance::Imported)?.feature_ids,
            };
            let scores = classifier::import_external_scores(&a.scores, &corpus, &features)?;
            create_parent(&a.out)?;
            classifier::write_score_records(&a.out, &scores)?;
            RunManifest::new("import-scores")
                .input("scores", &a.scores)
                .input("corpus", &a.corpus)
                .config("features", &features)
                .output(&a.out)
                .write_beside(&a.out)?;
        }
        Command::ExportTraining(a) => {
            let sets = load_merged(&a.contrast_sets)?;
            create_parent(&a.out)?;
            let n = classifier::export_training_jsonl(&a.out, &sets)?;
            log::info!("wrote {n} training records");
            let mut m = RunManifest::new("export-training");
            for p in &a.contrast_sets {
                m.input("contrast_set", p);
            }
            m.output(&a.out).write_beside(&a.out)?;
        }
        Command::Eval(a) => {
            let paths = expand_runs(&a.scores, a.runs)?;
            let gold = eval::read_gold(&a.gold)?;
            let mut features: Vec<String> = gold.iter().map(|g| g.feature_id.clone()).collect();
            features.sort();
            features.dedup();
            let mut runs = Vec::new();
            for p in &paths {
                let scores = ScoreMatrix::from_score_file(p, Provenance::Imported)?;
                for f in &features {
                    let ls = eval::labeled_scores(&scores, &gold, f)?;
                    if ls.len() < a.k {
                        log::warn!("{}: feature `{f}` has {} gold item(s), fewer than k={}", p.display(), ls.len(), a.k);
                    }
                }
                runs.push(eval::evaluate_run(&scores, &gold, &features, a.k)?);
            }
            let report = MetricReport::from_runs(a.k, runs)?;
            write_report(&report, &a.out)?;
            print!("{}", report.to_table());
            let mut m = RunManifest::new("eval");
            for p in &paths {
                m.input("scores", p);
            }
            m.input("gold", &a.gold).config("k", a.k).output(&a.out).write_beside(&a.out)?;
        }
        Command::Rank(a) => {
            let scores = ScoreMatrix::from_score_file(&a.scores, Provenance::Imported)?;
            let corpus = load_corpus(&a.corpus, None)?;
            let features = if a.features.is_empty() { scores.feature_ids.clone() } else { a.features.clone() };
            let mut rows = Vec::new();
            for f in &features {
                let top = eval::rank_top_k(&scores, f, a.k)?;
                if top.short {
                    log::warn!("feature `{f}`: only {} utterances for k={}", top.items.len(), a.k);
                }
                rows.extend(eval::annotation_sheet(&top, &corpus)?);
            }
            jsonl::write(&a.out, &rows)?;
            RunManifest::new("rank")
                .input("scores", &a.scores)
                .input("corpus", &a.corpus)
                .config("k", a.k)
                .config("features", &features)
                .output(&a.out)
                .write_beside(&a.out)?;
        }
        Command::Quantify(a) => {
            let scores = ScoreMatrix::from_score_file(&a.scores, Provenance::Imported)?;
            let corpus = load_corpus(&a.corpus, Some(&a.speakers))?;
            let features = if a.features.is_empty() { scores.feature_ids.clone() } else { a.features.clone() };
            let table = quantify::classify_count(&scores, &corpus, a.threshold)?;
            create_dir(&a.out)?;
            write_text(&a.out.join("frequencies.tsv"), &table.to_tsv())?;
            for factor in corpus.factor_schema.keys() {
                let gs = quantify::group_stats(&table, &corpus.speakers, factor, &features)?;
                write_text(&a.out.join(format!("groups_{factor}.tsv")), &gs.to_tsv())?;
            }
            let summary = quantify::summary(&table, &corpus, &features)?;
            write_text(&a.out.join("summary.txt"), &summary)?;
            print!("{summary}");
            RunManifest::new("quantify")
                .input("scores", &a.scores)
                .input("corpus", &a.corpus)
                .input("speakers", &a.speakers)
                .config("threshold", a.threshold)
                .config("features", &features)
                .output(&a.out)
                .write_beside(&a.out)?;
        }
        Command::Report(a) => {
            let mut reports = Vec::new();
            for p in &a.reports {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                let r: MetricReport = serde_json::from_str(&text).map_err(|e| Error::parse(p, 1, e.to_string()))?;
                reports.push(r);
            }
            let report = eval::aggregate_runs(&reports)?;
            write_report(&report, &a.out)?;
            print!("{}", report.to_table());
            let mut m = RunManifest::new("report");
            for p in &a.reports {
                m.input("report", p);
            }
            m.output(&a.out).write_beside(&a.out)?;
        }
    }
    Ok(())
}

fn write_report(report: &MetricReport, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    write_text(&dir.join("report.tsv"), &report.to_tsv())?;
    write_text(&dir.join("report.txt"), &report.to_table())?;
    write_text(
        &dir.join("report.json"),
        &(serde_json::to_string_pretty(report).expect("serializable report") + "\n"),
    )
}

fn baseline(cmd: BaselineCommand) -> Result<()> {
    let (name, sets, out, mut m) = match cmd {
        BaselineCommand::Manualgen { seeds, manual, uncased, out } => {
            let s = edit::load_seeds(&seeds, profile(uncased))?;
            let mut m = RunManifest::new("baselines manualgen");
            m.input("seeds", &seeds).input("manual", &manual);
            ("manualgen", baselines::load_manualgen(&manual, &s)?, out, m)
        }
        BaselineCommand::Autogen { seeds, rng, count, uncased, out } => {
            let s = edit::load_seeds(&seeds, profile(uncased))?;
            let mut m = RunManifest::new("baselines autogen");
            m.input("seeds", &seeds).rng(rng).config("count", count);
            ("autogen", baselines::autogen_sets(&s, rng, count)?, out, m)
        }
        BaselineCommand::Autoid {
            seeds,
            corpus: corpus_path,
            rng,
            per_positive,
            uncased,
            out,
        } => {
            let s = edit::load_seeds(&seeds, profile(uncased))?;
            let c = corpus::ingest_corpus(&corpus_path, None, profile(uncased))?;
            let mut m = RunManifest::new("baselines autoid");
            m.input("seeds", &seeds)
                .input("corpus", &corpus_path)
                .rng(rng)
                .config("per_positive", per_positive);
            ("autoid", baselines::autoid_sets(&c, &s, rng, per_positive)?, out, m)
        }
        BaselineCommand::Merge { contrast_sets, out } => {
            let mut m = RunManifest::new("baselines merge");
            for p in &contrast_sets {
                m.input("contrast_set", p);
            }
            ("merge", load_merged(&contrast_sets)?, out, m)
        }
    };
    contrast::save_contrast_sets(&out, &sets)?;
    log::info!("{name}: {} entries over {} feature(s)", sets.iter().map(ContrastSet::len).sum::<usize>(), sets.len());
    m.output(&out).write_beside(&out)?;
    Ok(())
}

/// Parses arguments, runs, and maps failures to exit codes: 2 for usage
/// errors (reported by clap), 1 for everything else.
pub fn main() -> std::process::ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn run_expansion() {
        let p = expand_runs(&["s{run}.tsv".into()], Some(3)).unwrap();
        assert_eq!(p, [PathBuf::from("s1.tsv"), "s2.tsv".into(), "s3.tsv".into()]);
        assert!(expand_runs(&["a.tsv".into()], Some(3)).is_err());
        assert_eq!(expand_runs(&["a.tsv".into(), "b.tsv".into()], None).unwrap().len(), 2);
    }
}
