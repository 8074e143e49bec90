use std::collections::BTreeSet;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::objective::{objective, value_gradients_curvature, NetworkData, Observation};
use super::{GradientSet, Hyperparams, ModelParams};
use crate::corpus::{Corpus, SparseVec, UserTimeline};
use crate::dynamics::{elapsed_days, gaussian_summary, MentionWindow};
use crate::exec::Execution;
use crate::{Error, Result};

/// Step halvings tried before a transition is declared stuck.
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: ModelParams,
    pub m: DVector<f64>,
    pub v: DVector<f64>,
    /// Accepted gradient steps.
    pub iterations: usize,
    /// Objective before the first step and after every accepted step.
    pub trace: Vec<f64>,
}

/// Fits one status transition by projected, diagonally scaled gradient
/// descent.
///
/// Each step moves along the gradient divided elementwise by a damped
/// Gauss-Newton diagonal, with length `eta`, halved until the objective does
/// not rise (see [`backtrack`]). Iteration stops when the relative objective
/// change drops to `tol`, after `max_iters` steps, or when no halving helps.
/// Returns the updated parameters and the Gaussian summary computed from them.
pub fn fit_message(params: &ModelParams, obs: &Observation<'_>, hyper: &Hyperparams) -> Result<FitResult> {
    let opts = hyper.objective_options();
    let mut current = params.clone();
    let (mut value, grad, curv) = value_gradients_curvature(&current, obs, opts)?;
    let mut direction = grad.divided_by(&curv);
    let mut trace = vec![value];
    let mut iterations = 0;
    while iterations < hyper.max_iters {
        let Some((candidate, next)) = backtrack(&current, &direction, value, hyper.eta, obs, hyper) else {
            break;
        };
        iterations += 1;
        current = candidate;
        let previous = std::mem::replace(&mut value, next);
        trace.push(value);
        if (previous - value).abs() <= hyper.tol * previous.abs().max(1.0) {
            break;
        }
        let (_, grad, curv) = value_gradients_curvature(&current, obs, opts)?;
        direction = grad.divided_by(&curv);
    }
    let (m, v) = gaussian_summary(
        obs.log_s_prev,
        &current.drift,
        &current.basis,
        obs.window,
        obs.elapsed,
        opts.ablate_interactions,
    )?;
    Ok(FitResult {
        params: current,
        m,
        v,
        iterations,
        trace,
    })
}

/// First step along `-direction` among `eta / 2^k` that does not raise the
/// objective, with its objective value.
fn backtrack(
    current: &ModelParams,
    direction: &GradientSet,
    value: f64,
    eta: f64,
    obs: &Observation<'_>,
    hyper: &Hyperparams,
) -> Option<(ModelParams, f64)> {
    let opts = hyper.objective_options();
    let mut eta = eta;
    for _ in 0..=MAX_HALVINGS {
        let candidate = current.stepped(direction, eta, hyper.sigma_min);
        if let Ok(f) = objective(&candidate, obs, opts) {
            if f <= value {
                return Some((candidate, f));
            }
        }
        eta *= 0.5;
    }
    None
}

/// Everything needed to train one user, detached from the corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct UserData {
    pub user_id: String,
    pub label: Option<u8>,
    pub candidate_ts: i64,
    /// Interaction vocabulary width `r`.
    pub interaction_width: usize,
    /// Interactor vocabulary width `q`.
    pub interactor_width: usize,
    pub status_ts: Vec<i64>,
    /// Status messages in the interactor vocabulary.
    pub messages: Vec<SparseVec>,
    /// Mention window of each transition, `status_ts.len() - 1` of them.
    pub windows: Vec<MentionWindow>,
    /// Mentions between the last status and the candidate post.
    pub final_window: MentionWindow,
    /// Profiles of the local network users; index 0 is the user.
    pub profiles: Vec<SparseVec>,
    /// `(ts, src, dst)` in local indices, sorted by time.
    pub edge_events: Vec<(i64, usize, usize)>,
}

impl UserData {
    pub fn from_corpus(corpus: &Corpus, timeline: &UserTimeline) -> Result<Self> {
        let p = corpus.interaction_matrix();
        let w = corpus.author_matrix();
        let window_of = |range: std::ops::Range<usize>| MentionWindow {
            p_rows: timeline.mentions[range.clone()].iter().map(|m| p.row(m.row)).collect(),
            w_rows: timeline.mentions[range].iter().map(|m| w.row(m.row)).collect(),
        };
        let network = corpus.user_network(&timeline.user_id)?;
        Ok(Self {
            user_id: timeline.user_id.clone(),
            label: timeline.label,
            candidate_ts: timeline.candidate_ts,
            interaction_width: p.cols(),
            interactor_width: w.cols(),
            status_ts: timeline.statuses.iter().map(|s| s.ts).collect(),
            messages: timeline
                .statuses
                .iter()
                .map(|s| corpus.status_in_interactor_space(s.row))
                .collect(),
            windows: timeline.transition_windows().into_iter().map(window_of).collect(),
            final_window: window_of(timeline.final_window()),
            profiles: network
                .members()
                .iter()
                .map(|&u| corpus.profile_matrix().row(u))
                .collect(),
            edge_events: network.events().to_vec(),
        })
    }

    /// Connected ordered pairs among events up to `at`.
    pub fn edges_at(&self, at: i64) -> Vec<(usize, usize)> {
        let cut = self.edge_events.partition_point(|e| e.0 <= at);
        self.edge_events[..cut]
            .iter()
            .map(|&(_, i, j)| (i, j))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Runs the per-user training loop.
    ///
    /// Parameters start from a draw seeded by `hyper.seed` alone, so every
    /// user's latent coordinates share an origin. The trajectory starts at the
    /// latent vector of the earliest status; each transition is fitted with
    /// [`fit_message`] and the state is then set to the observed message's
    /// latent vector. The returned `(m, v)` describe the candidate post.
    pub fn train(&self, hyper: &Hyperparams) -> Result<TrainedUser> {
        let mut init_rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let params = ModelParams::init(
            hyper.latent_dims,
            self.interaction_width,
            self.interactor_width,
            hyper.init_spread,
            &mut init_rng,
        );
        self.train_from(params, hyper)
    }

    /// [`Self::train`] from explicit starting parameters.
    pub fn train_from(&self, mut params: ModelParams, hyper: &Hyperparams) -> Result<TrainedUser> {
        hyper.validate()?;
        if params.dims() != hyper.latent_dims
            || params.basis.u.nrows() != self.interaction_width
            || params.basis.v.nrows() != self.interactor_width
        {
            return Err(Error::SizeMismatch(format!(
                "initial parameters do not match user `{}`",
                self.user_id
            )));
        }
        let statuses = self.status_ts.len();
        if statuses < 2 {
            return Err(Error::InsufficientHistory {
                user: self.user_id.clone(),
                statuses,
            });
        }
        if self.windows.len() != statuses - 1 || self.messages.len() != statuses {
            return Err(Error::SizeMismatch(format!(
                "user `{}`: {} statuses, {} messages, {} windows",
                self.user_id,
                statuses,
                self.messages.len(),
                self.windows.len()
            )));
        }
        let mut log_s = self.messages[0].mul_mat(&params.basis.v)?;
        let mut network = NetworkData {
            profiles: self.profiles.clone(),
            edges: Vec::new(),
        };
        for k in 1..statuses {
            network.edges = self.edges_at(self.status_ts[k]);
            let obs = Observation {
                log_s_prev: &log_s,
                window: &self.windows[k - 1],
                message: &self.messages[k],
                elapsed: elapsed_days(self.status_ts[k - 1], self.status_ts[k]),
                network: &network,
            };
            let fit = fit_message(&params, &obs, hyper).or_else(|err| {
                log::debug!("user `{}` transition {k}: {err}; retrying with eta/10", self.user_id);
                let slower = Hyperparams {
                    eta: hyper.eta / 10.0,
                    ..hyper.clone()
                };
                fit_message(&params, &obs, &slower)
            });
            let fit = fit.map_err(|err| {
                log::warn!("user `{}` transition {k}: {err}", self.user_id);
                Error::Diverged {
                    user: self.user_id.clone(),
                    transition: k,
                }
            })?;
            params = fit.params;
            log_s = self.messages[k].mul_mat(&params.basis.v)?;
        }
        let last = self.status_ts[statuses - 1];
        let (m, v) = gaussian_summary(
            &log_s,
            &params.drift,
            &params.basis,
            &self.final_window,
            elapsed_days(last, self.candidate_ts),
            hyper.objective_options().ablate_interactions,
        )?;
        Ok(TrainedUser {
            user_id: self.user_id.clone(),
            label: self.label,
            candidate_ts: self.candidate_ts,
            params,
            m,
            v,
            transitions: statuses - 1,
            hyper: hyper.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedUser {
    pub user_id: String,
    pub label: Option<u8>,
    pub candidate_ts: i64,
    pub params: ModelParams,
    /// Mean of the candidate post's log state.
    pub m: DVector<f64>,
    /// Standard deviation of the candidate post's log state.
    pub v: DVector<f64>,
    pub transitions: usize,
    pub hyper: Hyperparams,
}

pub fn train_user(timeline: &UserTimeline, corpus: &Corpus, hyper: &Hyperparams) -> Result<TrainedUser> {
    UserData::from_corpus(corpus, timeline)?.train(hyper)
}

#[derive(Debug)]
pub struct UserOutcome {
    pub user_id: String,
    pub result: Result<TrainedUser>,
}

/// Trains every timeline of the corpus; results are in timeline (user id)
/// order whatever the execution mode.
pub fn train_all(corpus: &Corpus, hyper: &Hyperparams, exec: Execution) -> Vec<UserOutcome> {
    exec.map(corpus.timelines(), |tl| UserOutcome {
        user_id: tl.user_id.clone(),
        result: train_user(tl, corpus, hyper),
    })
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// The private random stream of one user, fixed by `(seed, user_id)`.
pub fn user_stream(seed: u64, user_id: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(user_id.as_bytes()));
    rng
}

pub enum Prediction<'a> {
    Deterministic,
    Sample(&'a mut ChaCha8Rng),
}

/// Next-post latent vector: `m` itself, or a draw from `N(m, v^2)`.
pub fn predict_next_latent(m: &DVector<f64>, v: &DVector<f64>, mode: Prediction<'_>) -> DVector<f64> {
    match mode {
        Prediction::Deterministic => m.clone(),
        Prediction::Sample(rng) => DVector::from_fn(m.len(), |i, _| {
            let z: f64 = rng.sample(StandardNormal);
            m[i] + v[i] * z
        }),
    }
}
