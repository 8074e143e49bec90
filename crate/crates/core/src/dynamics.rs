//! Latent projections and the geometric Brownian motion transition law.
//!
//! Each latent dimension `i` follows
//!
//! ```text
//! ds_i / s_i = mu_i * n_i dt + sigma_i dW
//! n_i        = 1 + sum_k L_ki * (T_i' . X_k')
//! ```
//!
//! where `L = P U` and `X = W V` project the mention window into latent space.
//! Over an elapsed time `t` the log state is Gaussian:
//!
//! ```text
//! ln s_i ~ N(m_i, v_i^2),  m_i = ln s_prev_i + (mu_i n_i - sigma_i^2 / 2) t,  v_i = sigma_i sqrt(t)
//! ```
//!
//! State is carried as `ln s` so large drifts never overflow. Time is in days.

use nalgebra::{DMatrix, DVector};


use crate::corpus::SparseVec;
use crate::{Error, Result};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Smallest elapsed time in days; shorter gaps are clamped up to this.
pub const MIN_ELAPSED_DAYS: f64 = 1e-3;

/// Elapsed days between two epoch-second timestamps, clamped to
/// [`MIN_ELAPSED_DAYS`].
pub fn elapsed_days(from: i64, to: i64) -> f64 {
    clamp_elapsed((to - from) as f64 / SECONDS_PER_DAY)
}

fn clamp_elapsed(t: f64) -> f64 {
    if t < MIN_ELAPSED_DAYS {
        log::debug!("elapsed time {t} days clamped to {MIN_ELAPSED_DAYS}");
        MIN_ELAPSED_DAYS
    } else {
        t
    }
}

/// Word-to-latent maps and the dimension correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBasis {
    /// Interaction words to latent dimensions, `r x I`.
    pub u: DMatrix<f64>,
    /// Interactor words to latent dimensions, `q x I`.
    pub v: DMatrix<f64>,
    /// Dimension correlation, `I x I`.
    pub t: DMatrix<f64>,
}

impl LatentBasis {
    pub fn dims(&self) -> usize {
        self.t.nrows()
    }

    pub fn is_finite(&self) -> bool {
        [&self.u, &self.v, &self.t]
            .iter()
            .all(|m| m.iter().all(|x| x.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftParams {
    /// Default drift per dimension, 1/day.
    pub mu: DVector<f64>,
    /// Volatility per dimension, 1/sqrt(day).
    pub sigma: DVector<f64>,
}

/// Latent state after the last observed status, with the Gaussian summary of
/// the next log state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub log_s: DVector<f64>,
    pub m: DVector<f64>,
    pub v: DVector<f64>,
    /// Epoch seconds of the last observed status.
    pub at: i64,
}

/// Mention messages between two consecutive statuses: interaction word rows
/// (`P`) and author profile rows (`W`), aligned.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MentionWindow {
    pub p_rows: Vec<SparseVec>,
    pub w_rows: Vec<SparseVec>,
}

impl MentionWindow {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.p_rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_rows.is_empty()
    }
}

/// Projects the window: row `k` of the first result is `P_k' U`, of the
/// second `W_k' V`. Both are `|window| x I`.
pub fn project_interactions(
    window: &MentionWindow,
    basis: &LatentBasis,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if window.p_rows.len() != window.w_rows.len() {
        return Err(Error::SizeMismatch(format!(
            "{} interaction rows vs {} author rows",
            window.p_rows.len(),
            window.w_rows.len()
        )));
    }
    let dims = basis.dims();
    let mut l = DMatrix::zeros(window.len(), dims);
    let mut x = DMatrix::zeros(window.len(), dims);
    for (k, (p, w)) in window.p_rows.iter().zip(&window.w_rows).enumerate() {
        p.check_width(basis.u.nrows(), "interaction row vs U")?;
        w.check_width(basis.v.nrows(), "author row vs V")?;
        l.set_row(k, &p.mul_mat(&basis.u)?.transpose());
        x.set_row(k, &w.mul_mat(&basis.v)?.transpose());
    }
    Ok((l, x))
}

/// `n_i = 1 + sum_k L_ki (T_i' . X_k')`.
pub fn drift_factor(l: &DMatrix<f64>, x: &DMatrix<f64>, t: &DMatrix<f64>, i: usize) -> f64 {
    let t_row = t.row(i);
    1.0 + (0..l.nrows())
        .map(|k| l[(k, i)] * t_row.dot(&x.row(k)))
        .sum::<f64>()
}

/// All drift factors at once; `ones` when the window is empty.
pub fn drift_factors(l: &DMatrix<f64>, x: &DMatrix<f64>, t: &DMatrix<f64>) -> DVector<f64> {
    // (X T') has entry (k, i) = T_i' . X_k'
    let tx = x * t.transpose();
    let mut n = DVector::from_element(t.nrows(), 1.0);
    for k in 0..l.nrows() {
        for i in 0..t.nrows() {
            n[i] += l[(k, i)] * tx[(k, i)];
        }
    }
    n
}

/// One scalar GBM transition in log space with standard-normal draw `w`.
pub fn gbm_step(log_s_prev: f64, mu: f64, sigma: f64, n: f64, t: f64, w: f64) -> Result<f64> {
    if ![log_s_prev, mu, sigma, n, t, w].iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("gbm_step input".into()));
    }
    let t = clamp_elapsed(t);
    let m = log_s_prev + (mu * n - 0.5 * sigma * sigma) * t;
    Ok(m + sigma * t.sqrt() * w)
}

/// Mean and standard deviation of the next log state given drift factors `n`.
pub fn gaussian_moments(
    log_s_prev: &DVector<f64>,
    drift: &DriftParams,
    n: &DVector<f64>,
    t: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let dims = log_s_prev.len();
    if drift.mu.len() != dims || drift.sigma.len() != dims || n.len() != dims {
        return Err(Error::SizeMismatch("gaussian moments dimensions".into()));
    }
    let t = clamp_elapsed(t);
    let m = DVector::from_fn(dims, |i, _| {
        log_s_prev[i] + (drift.mu[i] * n[i] - 0.5 * drift.sigma[i].powi(2)) * t
    });
    let v = drift.sigma.map(|s| s * t.sqrt());
    if m.iter().chain(v.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("gaussian summary".into()));
    }
    Ok((m, v))
}

/// `(m, v)` of the next log state after a window and elapsed time `t`. With
/// `ablate_interactions` the drift factor is pinned to 1.
pub fn gaussian_summary(
    log_s_prev: &DVector<f64>,
    drift: &DriftParams,
    basis: &LatentBasis,
    window: &MentionWindow,
    t: f64,
    ablate_interactions: bool,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = if ablate_interactions || window.is_empty() {
        DVector::from_element(basis.dims(), 1.0)
    } else {
        let (l, x) = project_interactions(window, basis)?;
        drift_factors(&l, &x, &basis.t)
    };
    gaussian_moments(log_s_prev, drift, &n, t)
}
