use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use driftcast::corpus::{build_corpus, Corpus, CorpusConfig};
use driftcast::learner::{train_all, Hyperparams, ModelFile};
use driftcast::predictor::{
    build_feature_matrix, evaluate_random, evaluate_split, format_table, run_experiment, FeatureMatrix,
    FeatureMode, FeatureSource, Method, Protocol,
};
use driftcast::sociolab::{verify_postulates, ComparisonReport, TestMode};
use driftcast::synthgen::{generate, SynthConfig};
use driftcast::Execution;
use serde::Serialize;

use crate::manifest::ManifestBuilder;
use crate::{AnalyzeArgs, EvaluateArgs, IngestArgs, SynthArgs, TrainArgs};

/// Largest failed share of users for which `train` still succeeds.
const MAX_FAILED_SHARE: f64 = 0.1;
const MODELS_DIR: &str = "models";
const MANIFEST: &str = "manifest.json";

/// Bad flags or input files; exits with the usage status.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn is_usage_error(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        e.is::<UsageError>()
            || e.downcast_ref::<driftcast::Error>()
                .is_some_and(|e| e.is_schema() || matches!(e, driftcast::Error::InvalidConfig(_)))
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| UsageError(format!("{}:{}: {e}", path.display(), e.line())).into())
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// `report.json` -> `report.manifest.json`.
fn manifest_beside(report: &Path) -> PathBuf {
    report.with_extension(MANIFEST)
}

fn pool(jobs: u16) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(usize::from(jobs)).build()?)
}

fn execution(jobs: u16) -> Execution {
    if jobs > 1 {
        Execution::Parallel
    } else {
        Execution::Sequential
    }
}

pub fn ingest(args: IngestArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::start("ingest");
    let config = match &args.config {
        Some(path) => {
            manifest.config(path)?;
            CorpusConfig::from_file(path)?
        }
        None => CorpusConfig::default(),
    };
    manifest.input(&args.posts)?;
    manifest.input(&args.interactions)?;
    let corpus = build_corpus(&args.posts, &args.interactions, &config)?;
    corpus.save(&args.out)?;
    manifest.output(&args.out);
    manifest.write(&args.out.join(MANIFEST))?;
    println!(
        "{} users, {} candidate timelines -> {}",
        corpus.users().len(),
        corpus.timelines().len(),
        args.out.display()
    );
    Ok(())
}

/// Model file name for a user id; characters outside `[A-Za-z0-9._-]` are
/// hex-escaped so distinct ids never collide.
fn model_file_name(user_id: &str) -> String {
    let mut name = String::with_capacity(user_id.len() + 5);
    for b in user_id.bytes() {
        if b.is_ascii_alphanumeric() || b == b'-' || b == b'_' || (b == b'.' && !name.is_empty()) {
            name.push(char::from(b));
        } else {
            name.push_str(&format!("%{b:02x}"));
        }
    }
    name + ".json"
}

#[derive(Debug, Serialize)]
struct Failure {
    user_id: String,
    error: String,
}

pub fn train(args: TrainArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::start("train");
    let mut hyper = match &args.hyper {
        Some(path) => {
            manifest.config(path)?;
            read_json::<Hyperparams>(path)?
        }
        None => Hyperparams::default(),
    };
    if let Some(seed) = args.seed {
        hyper.seed = seed;
    }
    hyper.ablation_int |= args.ablation_int;
    hyper.validate()?;
    manifest.seed(hyper.seed);
    manifest.input(&args.corpus)?;
    let corpus = Corpus::load(&args.corpus)?;

    let outcomes = pool(args.jobs)?.install(|| train_all(&corpus, &hyper, execution(args.jobs)));
    let models = args.out.join(MODELS_DIR);
    if models.is_dir() {
        fs::remove_dir_all(&models).with_context(|| format!("clearing {}", models.display()))?;
    }
    fs::create_dir_all(&models).with_context(|| format!("creating {}", models.display()))?;
    let total = outcomes.len();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome.result {
            Ok(user) => ModelFile::from_trained(&user).save(&models.join(model_file_name(&user.user_id)))?,
            Err(err) => {
                log::warn!("user `{}`: {err}", outcome.user_id);
                failures.push(Failure {
                    user_id: outcome.user_id,
                    error: err.to_string(),
                });
            }
        }
    }
    let failures_path = args.out.join("failures.json");
    write_json(&failures_path, &failures)?;
    manifest.output(&models);
    manifest.output(&failures_path);
    manifest.write(&args.out.join(MANIFEST))?;
    println!(
        "trained {}/{total} users{} -> {}",
        total - failures.len(),
        if hyper.ablation_int { " (-Int)" } else { "" },
        models.display()
    );
    if failures.len() as f64 > MAX_FAILED_SHARE * total as f64 {
        bail!("{} of {total} users failed to train", failures.len());
    }
    Ok(())
}

/// Model files of a `train` output directory, in file name order.
fn load_models(dir: &Path) -> Result<Vec<ModelFile>> {
    let models = dir.join(MODELS_DIR);
    let mut paths: Vec<PathBuf> = fs::read_dir(&models)
        .with_context(|| format!("reading {}", models.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
    paths.sort();
    if paths.is_empty() {
        return Err(UsageError(format!("no model files in {}", models.display())).into());
    }
    paths.iter().map(|p| Ok(ModelFile::load(p)?)).collect()
}

/// Shared hyperparameters of a model set.
fn common_hyper(models: &[ModelFile], dir: &Path) -> Result<Hyperparams> {
    let hyper = models[0].hyper.clone();
    if models.iter().any(|m| m.hyper != hyper) {
        return Err(UsageError(format!("models in {} were trained with different settings", dir.display())).into());
    }
    Ok(hyper)
}

fn model_features(corpus: &Corpus, models: &[ModelFile], mode: FeatureMode) -> Result<FeatureMatrix> {
    let sources = models
        .iter()
        .map(|model| {
            let timeline = corpus.timeline(&model.user_id)?;
            Ok(FeatureSource {
                user_id: model.user_id.clone(),
                label: timeline
                    .label
                    .ok_or_else(|| driftcast::Error::Unlabeled(model.user_id.clone()))?,
                candidate_ts: timeline.candidate_ts,
                m: model.m(),
                v: model.v(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(build_feature_matrix(&sources, mode)?)
}

fn feature_mode(hyper: &Hyperparams, seed: u64) -> FeatureMode {
    if hyper.deterministic_predict {
        FeatureMode::Deterministic
    } else {
        FeatureMode::Sample { seed }
    }
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::start("evaluate");
    if let Some(bad) = args.train_fraction.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
        return Err(UsageError(format!("train fraction must lie in (0, 1), got {bad}")).into());
    }
    manifest.input(&args.corpus)?;
    manifest.input(&args.models.join(MODELS_DIR))?;
    let corpus = Corpus::load(&args.corpus)?;
    let models = load_models(&args.models)?;
    let hyper = common_hyper(&models, &args.models)?;
    let seed = args.seed.unwrap_or(hyper.seed);
    manifest.seed(seed);
    let mode = feature_mode(&hyper, seed);
    let features = model_features(&corpus, &models, mode)?;

    let mut reports = Vec::new();
    match &args.wreg_grid {
        Some(grid) => {
            let hyper = Hyperparams {
                seed,
                ablation_int: false,
                ..hyper.clone()
            };
            let protocol = Protocol {
                train_fractions: args.train_fraction.clone(),
                w_reg_grid: grid.clone(),
                ablation: false,
                random: false,
                feature_mode: mode,
            };
            let exec = execution(args.jobs);
            reports.extend(pool(args.jobs)?.install(|| run_experiment(&corpus, &hyper, &protocol, exec))?);
        }
        None => {
            let method = if hyper.ablation_int {
                Method::NoInteractions
            } else {
                Method::Full
            };
            let w_reg = hyper.objective_options().w_reg;
            for &fraction in &args.train_fraction {
                reports.push(evaluate_split(&features, fraction, method, Some(w_reg))?);
            }
        }
    }
    if let Some(dir) = &args.ablation_models {
        manifest.input(&dir.join(MODELS_DIR))?;
        let ablated = load_models(dir)?;
        let hyper = common_hyper(&ablated, dir)?;
        let features = model_features(&corpus, &ablated, feature_mode(&hyper, seed))?;
        let w_reg = hyper.objective_options().w_reg;
        for &fraction in &args.train_fraction {
            reports.push(evaluate_split(&features, fraction, Method::NoInteractions, Some(w_reg))?);
        }
    }
    if args.random {
        for &fraction in &args.train_fraction {
            reports.push(evaluate_random(&features, fraction, seed)?);
        }
    }
    write_json(&args.report, &reports)?;
    manifest.output(&args.report);
    manifest.write(&manifest_beside(&args.report))?;
    print!("{}", format_table(&reports));
    Ok(())
}

fn comparison_line(name: &str, c: &ComparisonReport) -> String {
    format!(
        "{name:<12} t = {:>9.3}  df = {:>7.1}  p = {:.3e}  {:?}{}",
        c.t,
        c.df,
        c.p,
        c.direction,
        if c.significant {
            format!(" (significant at {})", c.alpha)
        } else {
            String::new()
        }
    )
}

pub fn analyze(args: AnalyzeArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::start("analyze");
    let mode: TestMode = args.mode.parse().map_err(|e: driftcast::Error| UsageError(e.to_string()))?;
    manifest.seed(args.seed);
    manifest.input(&args.corpus)?;
    let corpus = Corpus::load(&args.corpus)?;
    let report = verify_postulates(&corpus, args.seed, mode)?;
    write_json(&args.report, &report)?;
    manifest.output(&args.report);
    manifest.write(&manifest_beside(&args.report))?;
    println!(
        "{:?} t-test, {} positive vs {} negative users, lexicon of {} words",
        report.mode, report.n_pos, report.n_neg, report.lexicon_size
    );
    println!("{}", comparison_line("support", &report.support));
    println!("{}", comparison_line("alternative", &report.alternative));
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::start("synth");
    let mut config = match &args.config {
        Some(path) => {
            manifest.config(path)?;
            SynthConfig::from_file(path)?
        }
        None => SynthConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;
    manifest.seed(config.seed);
    let corpus = generate(&config)?;
    corpus.write(&args.out)?;
    for name in ["posts.jsonl", "interactions.jsonl", "truth.json"] {
        manifest.output(&args.out.join(name));
    }
    manifest.write(&args.out.join(MANIFEST))?;
    let positives = corpus.truth.users.iter().filter(|u| u.label == 1).count();
    println!(
        "{} users ({positives} positive), {} posts, {} interactions -> {}",
        corpus.truth.users.len(),
        corpus.posts.len(),
        corpus.interactions.len(),
        args.out.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_names_escape_unsafe_bytes() {
        assert_eq!(model_file_name("user_01"), "user_01.json");
        assert_eq!(model_file_name("a/b"), "a%2fb.json");
        assert_eq!(model_file_name(".hidden"), "%2ehidden.json");
        assert_ne!(model_file_name("a b"), model_file_name("a_b"));
    }

    #[test]
    fn usage_errors_are_recognized() {
        assert!(is_usage_error(&UsageError("x".into()).into()));
        assert!(is_usage_error(&driftcast::Error::InvalidConfig("x".into()).into()));
        assert!(!is_usage_error(&driftcast::Error::SingleClass.into()));
        let wrapped = anyhow::Error::from(driftcast::Error::Schema {
            file: "f".into(),
            line: 7,
            message: "bad".into(),
        })
        .context("ingest");
        assert!(is_usage_error(&wrapped));
    }

    #[test]
    fn manifest_sits_beside_report() {
        assert_eq!(manifest_beside(Path::new("out/r.json")), Path::new("out/r.manifest.json"));
    }
}
