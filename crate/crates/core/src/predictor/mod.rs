//! Feature matrix assembly, chronological splits, the discriminant
//! classifier and evaluation metrics.

mod discriminant;
mod experiment;
mod metrics;

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use crate::learner::{predict_next_latent, user_stream, Prediction, TrainedUser, UserOutcome};
use crate::{Error, Result};

pub use discriminant::{fit_discriminant, LinearDiscriminant, SHRINKAGE};
pub use experiment::{
    evaluate, evaluate_random, evaluate_split, format_table, random_baseline, run_experiment,
    successful, EvalReport, Evaluation, Method, Protocol, RANDOM_TRIALS,
};
pub use metrics::{roc_auc, Confusion};

/// What a feature row is computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSource {
    pub user_id: String,
    pub label: u8,
    pub candidate_ts: i64,
    pub m: DVector<f64>,
    pub v: DVector<f64>,
}

impl FeatureSource {
    pub fn from_trained(user: &TrainedUser) -> Result<Self> {
        Ok(Self {
            user_id: user.user_id.clone(),
            label: user
                .label
                .ok_or_else(|| Error::Unlabeled(user.user_id.clone()))?,
            candidate_ts: user.candidate_ts,
            m: user.m.clone(),
            v: user.v.clone(),
        })
    }
}

/// How the next-post latent vector is read off `(m, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMode {
    /// `u = m`.
    Deterministic,
    /// `u ~ N(m, v^2)` from each user's seeded stream.
    Sample { seed: u64 },
}

/// One row `u` per candidate user, sorted by user id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: DMatrix<f64>,
    pub user_ids: Vec<String>,
    pub labels: Vec<u8>,
    pub candidate_ts: Vec<i64>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.user_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.user_ids.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.rows.ncols()
    }

    pub fn positive_rate(&self) -> f64 {
        self.labels.iter().filter(|&&y| y == 1).count() as f64 / self.len() as f64
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            rows: self.rows.select_rows(indices),
            user_ids: indices.iter().map(|&i| self.user_ids[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            candidate_ts: indices.iter().map(|&i| self.candidate_ts[i]).collect(),
        }
    }
}

pub fn build_feature_matrix(sources: &[FeatureSource], mode: FeatureMode) -> Result<FeatureMatrix> {
    let mut sorted: Vec<&FeatureSource> = sources.iter().collect();
    sorted.sort_by(|a, b| a.user_id.cmp(&b.user_id));
    if let Some(pair) = sorted.windows(2).find(|w| w[0].user_id == w[1].user_id) {
        return Err(Error::SizeMismatch(format!("user `{}` appears twice", pair[0].user_id)));
    }
    let dims = sorted.first().map_or(0, |s| s.m.len());
    let mut rows = DMatrix::zeros(sorted.len(), dims);
    for (r, src) in sorted.iter().enumerate() {
        if src.m.len() != dims || src.v.len() != dims {
            return Err(Error::WidthMismatch {
                what: "latent vector",
                expected: dims,
                actual: src.m.len(),
            });
        }
        let u = match mode {
            FeatureMode::Deterministic => predict_next_latent(&src.m, &src.v, Prediction::Deterministic),
            FeatureMode::Sample { seed } => {
                let mut rng = user_stream(seed, &src.user_id);
                predict_next_latent(&src.m, &src.v, Prediction::Sample(&mut rng))
            }
        };
        if !u.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite(format!("features of user `{}`", src.user_id)));
        }
        rows.set_row(r, &u.transpose());
    }
    Ok(FeatureMatrix {
        rows,
        user_ids: sorted.iter().map(|s| s.user_id.clone()).collect(),
        labels: sorted.iter().map(|s| s.label).collect(),
        candidate_ts: sorted.iter().map(|s| s.candidate_ts).collect(),
    })
}

/// Features of every user in `outcomes`; any failed user is an error.
pub fn features_from_outcomes(outcomes: &[UserOutcome], mode: FeatureMode) -> Result<FeatureMatrix> {
    let sources = outcomes
        .iter()
        .map(|o| match &o.result {
            Ok(user) => FeatureSource::from_trained(user),
            Err(err) => {
                log::debug!("user `{}` failed: {err}", o.user_id);
                Err(Error::Untrained(o.user_id.clone()))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    build_feature_matrix(&sources, mode)
}

/// Earliest `ceil(fraction * n)` candidate posts train, the rest test.
/// Equal timestamps are ordered by user id.
pub fn chronological_split(features: &FeatureMatrix, fraction: f64) -> Result<(FeatureMatrix, FeatureMatrix)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let n = features.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| match features.candidate_ts[a].cmp(&features.candidate_ts[b]) {
        Ordering::Equal => features.user_ids[a].cmp(&features.user_ids[b]),
        other => other,
    });
    // guard against 0.3 * 10 = 3.0000000000000004
    let n_train = ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
    if n_train == 0 {
        return Err(Error::EmptySplit("train"));
    }
    if n_train >= n {
        return Err(Error::EmptySplit("test"));
    }
    Ok((features.select(&order[..n_train]), features.select(&order[n_train..])))
}
