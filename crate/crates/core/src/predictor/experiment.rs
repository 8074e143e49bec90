use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    chronological_split, features_from_outcomes, fit_discriminant, roc_auc, Confusion,
    FeatureMatrix, FeatureMode, FeatureSource, LinearDiscriminant,
};
use crate::corpus::Corpus;
use crate::learner::{train_all, user_stream, Hyperparams, UserOutcome};
use crate::{Execution, Result};

pub const RANDOM_TRIALS: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "full")]
    Full,
    /// Drift factors pinned to 1 and no network term.
    #[serde(rename = "-Int")]
    NoInteractions,
    #[serde(rename = "random")]
    Random,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Full => "Full model",
            Method::NoInteractions => "Full model -Int",
            Method::Random => "Random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: Method,
    /// Regularizer weight used for training; absent for the random baseline.
    pub w_reg: Option<f64>,
    pub train_fraction: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    /// `null` when the test split holds a single class.
    pub auc: Option<f64>,
    pub f1_positive: f64,
    /// Summed over trials for the random baseline.
    pub confusion: Confusion,
    pub trials: u32,
    pub split_spec: String,
}

/// Metrics of one classifier on one test split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub auc: Option<f64>,
    pub f1_positive: f64,
    pub confusion: Confusion,
}

impl Evaluation {
    fn from_confusion(confusion: Confusion, auc: Option<f64>) -> Self {
        Self {
            accuracy: confusion.accuracy(),
            auc,
            f1_positive: confusion.f1(),
            confusion,
        }
    }
}

pub fn evaluate(classifier: &LinearDiscriminant, test: &FeatureMatrix) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(crate::Error::EmptySplit("test"));
    }
    let scores = classifier.scores(test);
    let predicted: Vec<u8> = scores.iter().map(|&s| u8::from(s > classifier.threshold)).collect();
    let auc = roc_auc(&scores, &test.labels);
    if auc.is_none() {
        log::warn!("test split holds a single class; AUC undefined");
    }
    Ok(Evaluation::from_confusion(
        Confusion::from_predictions(&predicted, &test.labels),
        auc,
    ))
}

/// Labels each test user 1 with the training positive rate, over
/// [`RANDOM_TRIALS`] trials. Accuracy and F1 come from the pooled confusion
/// counts, AUC is the mean over trials where it is defined.
pub fn random_baseline(train: &FeatureMatrix, test: &FeatureMatrix, seed: u64) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(crate::Error::EmptySplit("test"));
    }
    let rate = train.positive_rate();
    let mut rng = user_stream(seed, "random-baseline");
    let mut pooled = Confusion::default();
    let mut auc_sum = 0.0;
    let mut auc_n = 0u32;
    for _ in 0..RANDOM_TRIALS {
        let guess: Vec<u8> = (0..test.len()).map(|_| u8::from(rng.random_bool(rate))).collect();
        pooled.add(&Confusion::from_predictions(&guess, &test.labels));
        let scores: Vec<f64> = guess.iter().map(|&g| f64::from(g)).collect();
        if let Some(auc) = roc_auc(&scores, &test.labels) {
            auc_sum += auc;
            auc_n += 1;
        }
    }
    let auc = (auc_n > 0).then(|| auc_sum / f64::from(auc_n));
    Ok(Evaluation::from_confusion(pooled, auc))
}

fn split_spec(fraction: f64) -> String {
    format!(
        "earliest {:.0}% of candidate posts by timestamp train (ties by user id), the rest test",
        fraction * 100.0
    )
}

fn report(method: Method, w_reg: Option<f64>, fraction: f64, train: &FeatureMatrix, test: &FeatureMatrix, eval: Evaluation, trials: u32) -> EvalReport {
    EvalReport {
        method,
        w_reg,
        train_fraction: fraction,
        n_train: train.len(),
        n_test: test.len(),
        accuracy: eval.accuracy,
        auc: eval.auc,
        f1_positive: eval.f1_positive,
        confusion: eval.confusion,
        trials,
        split_spec: split_spec(fraction),
    }
}

/// Splits `features`, fits the discriminant on the earlier part and scores
/// the later part.
pub fn evaluate_split(features: &FeatureMatrix, fraction: f64, method: Method, w_reg: Option<f64>) -> Result<EvalReport> {
    let (train, test) = chronological_split(features, fraction)?;
    let classifier = fit_discriminant(&train)?;
    let eval = evaluate(&classifier, &test)?;
    Ok(report(method, w_reg, fraction, &train, &test, eval, 1))
}

pub fn evaluate_random(features: &FeatureMatrix, fraction: f64, seed: u64) -> Result<EvalReport> {
    let (train, test) = chronological_split(features, fraction)?;
    let eval = random_baseline(&train, &test, seed)?;
    Ok(report(Method::Random, None, fraction, &train, &test, eval, RANDOM_TRIALS))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    pub train_fractions: Vec<f64>,
    pub w_reg_grid: Vec<f64>,
    /// Also evaluate the model without interaction terms.
    pub ablation: bool,
    pub random: bool,
    pub feature_mode: FeatureMode,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            train_fractions: vec![0.5],
            w_reg_grid: vec![Hyperparams::default().w_reg],
            ablation: true,
            random: true,
            feature_mode: FeatureMode::Deterministic,
        }
    }
}

/// Users that trained; failures are logged and dropped.
pub fn successful(outcomes: Vec<UserOutcome>) -> Vec<UserOutcome> {
    let total = outcomes.len();
    let kept: Vec<UserOutcome> = outcomes
        .into_iter()
        .filter(|o| match &o.result {
            Ok(_) => true,
            Err(err) => {
                log::warn!("dropping user `{}`: {err}", o.user_id);
                false
            }
        })
        .collect();
    if kept.len() < total {
        log::warn!("{} of {total} users failed to train", total - kept.len());
    }
    kept
}

fn train_features(corpus: &Corpus, hyper: &Hyperparams, mode: FeatureMode, exec: Execution) -> Result<FeatureMatrix> {
    features_from_outcomes(&successful(train_all(corpus, hyper, exec)), mode)
}

/// Trains every candidate user for each grid point and reports each train
/// fraction: the full model over `w_reg_grid`, then the ablation, then the
/// random baseline.
pub fn run_experiment(corpus: &Corpus, hyper: &Hyperparams, protocol: &Protocol, exec: Execution) -> Result<Vec<EvalReport>> {
    hyper.validate()?;
    let mut reports = Vec::new();
    let mut labels_only: Option<FeatureMatrix> = None;
    for &w_reg in &protocol.w_reg_grid {
        let h = Hyperparams {
            w_reg,
            ablation_int: false,
            ..hyper.clone()
        };
        let features = train_features(corpus, &h, protocol.feature_mode, exec)?;
        for &fraction in &protocol.train_fractions {
            reports.push(evaluate_split(&features, fraction, Method::Full, Some(w_reg))?);
        }
        labels_only.get_or_insert(features);
    }
    if protocol.ablation {
        let h = Hyperparams {
            ablation_int: true,
            ..hyper.clone()
        };
        let features = train_features(corpus, &h, protocol.feature_mode, exec)?;
        let w_reg = h.objective_options().w_reg;
        for &fraction in &protocol.train_fractions {
            reports.push(evaluate_split(&features, fraction, Method::NoInteractions, Some(w_reg))?);
        }
        labels_only.get_or_insert(features);
    }
    if protocol.random {
        let features = match labels_only {
            Some(f) => f,
            None => label_features(corpus)?,
        };
        for &fraction in &protocol.train_fractions {
            reports.push(evaluate_random(&features, fraction, hyper.seed)?);
        }
    }
    Ok(reports)
}

/// Zero-width features carrying only ids, labels and timestamps.
fn label_features(corpus: &Corpus) -> Result<FeatureMatrix> {
    let sources: Vec<FeatureSource> = corpus
        .timelines()
        .iter()
        .filter_map(|tl| {
            tl.label.map(|label| FeatureSource {
                user_id: tl.user_id.clone(),
                label,
                candidate_ts: tl.candidate_ts,
                m: nalgebra::DVector::zeros(0),
                v: nalgebra::DVector::zeros(0),
            })
        })
        .collect();
    super::build_feature_matrix(&sources, FeatureMode::Deterministic)
}

/// Aligned text table, one line per report.
pub fn format_table(reports: &[EvalReport]) -> String {
    let header = ["Method", "w_reg", "Train", "Accuracy", "AUC", "F1"];
    let rows: Vec<[String; 6]> = reports
        .iter()
        .map(|r| {
            [
                r.method.label().to_string(),
                r.w_reg.map_or("-".into(), |w| format!("{w}")),
                format!("{:.0}%", r.train_fraction * 100.0),
                format!("{:.3}", r.accuracy),
                r.auc.map_or("n/a".into(), |a| format!("{a:.3}")),
                format!("{:.3}", r.f1_positive),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[&str]| {
        let joined: Vec<String> = cells
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", joined.join(" | ").trim_end());
    };
    line(&header);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    line(&rule.iter().map(String::as_str).collect::<Vec<_>>());
    for row in &rows {
        line(&row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}
