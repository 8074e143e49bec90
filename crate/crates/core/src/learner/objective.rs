//! Per-message objective `f_t = sum_i NLL_i + w_reg * f_r` and its gradient.
//!
//! With residual `c_i = a_i - m_i`, `a = g V` and `D_i = c_i / (sigma_i^2 t)`:
//!
//! ```text
//! d/d mu_i     = -D_i n_i t
//! d/d sigma_i  = 1/sigma_i + c_i/sigma_i - c_i^2 / (sigma_i^3 t)
//! d/d U[p, i]  = e_i sum_k P_kp (T_i' . X_k')           e_i = -D_i mu_i t
//! d/d T[i, j]  = e_i sum_k L_ki X_kj
//! d/d V[p, j]  = D_j g_p + sum_k W_kp ((e o L_k') T)_j
//!              + w_reg sum_edges h'(x_i . x_j) (R_ip x_j + R_jp x_i)
//! h(z) = (sig(z) - 1)^2,  h'(z) = -2 sig(z) sig(-z)^2
//! ```
//!
//! The previous log state is an input, not a parameter. See
//! `GRADIENT_NOTES.md` for the derivation.

use nalgebra::{DMatrix, DVector};

use super::{GradientSet, ModelParams};
use crate::corpus::{InteractionNetwork, SparseVec};
use crate::dynamics::{drift_factors, project_interactions, MentionWindow};
use crate::{Error, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `-ln` of the Gaussian likelihood of one latent coordinate.
pub fn neg_log_likelihood(a: f64, m: f64, sigma: f64, t: f64) -> Result<f64> {
    let out = sigma.ln() + 0.5 * t.ln() + HALF_LN_2PI + (a - m).powi(2) / (2.0 * sigma * sigma * t);
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::NonFinite("negative log-likelihood".into()))
    }
}

/// Profiles of the users in a network snapshot and its connected ordered
/// pairs, in local indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NetworkData {
    pub profiles: Vec<SparseVec>,
    pub edges: Vec<(usize, usize)>,
}

impl NetworkData {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_snapshot(profiles: Vec<SparseVec>, network: &InteractionNetwork) -> Self {
        Self {
            profiles,
            edges: network
                .edges()
                .filter(|&(_, _, n)| n >= 1)
                .map(|(i, j, _)| (i, j))
                .collect(),
        }
    }
}

/// `sum over edges of (sig(x_i . x_j) - 1)^2` for latent rows `x`.
pub fn homogeneity_penalty(x: &DMatrix<f64>, edges: &[(usize, usize)]) -> f64 {
    edges
        .iter()
        .map(|&(i, j)| sigmoid(-x.row(i).dot(&x.row(j))).powi(2))
        .sum()
}

/// Everything the objective needs for one status transition.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub log_s_prev: &'a DVector<f64>,
    pub window: &'a MentionWindow,
    /// Word vector of the observed status in the interactor vocabulary.
    pub message: &'a SparseVec,
    /// Elapsed days since the previous status.
    pub elapsed: f64,
    pub network: &'a NetworkData,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveOptions {
    pub w_reg: f64,
    /// Pin every drift factor to 1.
    pub ablate_interactions: bool,
}

/// Objective value split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveParts {
    pub likelihood: f64,
    pub regularizer: f64,
    pub total: f64,
}

struct Forward {
    l: DMatrix<f64>,
    x: DMatrix<f64>,
    tx: DMatrix<f64>,
    n: DVector<f64>,
    c: DVector<f64>,
    x_net: DMatrix<f64>,
    parts: ObjectiveParts,
}

fn forward(params: &ModelParams, obs: &Observation<'_>, opts: ObjectiveOptions) -> Result<Forward> {
    let dims = params.dims();
    let basis = &params.basis;
    let drift = &params.drift;
    if obs.log_s_prev.len() != dims {
        return Err(Error::SizeMismatch("previous state vs latent dimensions".into()));
    }
    let use_window = !opts.ablate_interactions && !obs.window.is_empty();
    let (l, x) = if use_window {
        project_interactions(obs.window, basis)?
    } else {
        (DMatrix::zeros(0, dims), DMatrix::zeros(0, dims))
    };
    let tx = &x * basis.t.transpose();
    let n = if use_window {
        drift_factors(&l, &x, &basis.t)
    } else {
        DVector::from_element(dims, 1.0)
    };
    let t = obs.elapsed;
    let a = obs.message.mul_mat(&basis.v)?;
    let mut c = DVector::zeros(dims);
    let mut likelihood = 0.0;
    for i in 0..dims {
        let sigma = drift.sigma[i];
        let m = obs.log_s_prev[i] + (drift.mu[i] * n[i] - 0.5 * sigma * sigma) * t;
        c[i] = a[i] - m;
        likelihood += neg_log_likelihood(a[i], m, sigma, t)?;
    }

    let (x_net, regularizer) = if opts.w_reg != 0.0 && !obs.network.edges.is_empty() {
        let mut x_net = DMatrix::zeros(obs.network.profiles.len(), dims);
        for (u, prof) in obs.network.profiles.iter().enumerate() {
            x_net.set_row(u, &prof.mul_mat(&basis.v)?.transpose());
        }
        let reg = homogeneity_penalty(&x_net, &obs.network.edges);
        (x_net, reg)
    } else {
        (DMatrix::zeros(0, dims), 0.0)
    };
    let total = likelihood + opts.w_reg * regularizer;
    if !total.is_finite() {
        return Err(Error::NonFinite("objective".into()));
    }
    Ok(Forward {
        l,
        x,
        tx,
        n,
        c,
        x_net,
        parts: ObjectiveParts {
            likelihood,
            regularizer,
            total,
        },
    })
}

pub fn objective_parts(
    params: &ModelParams,
    obs: &Observation<'_>,
    opts: ObjectiveOptions,
) -> Result<ObjectiveParts> {
    forward(params, obs, opts).map(|f| f.parts)
}

/// `f_t` for one transition.
pub fn objective(params: &ModelParams, obs: &Observation<'_>, opts: ObjectiveOptions) -> Result<f64> {
    objective_parts(params, obs, opts).map(|p| p.total)
}

/// Exact gradient of [`objective`] with respect to every parameter block.
pub fn gradients(
    params: &ModelParams,
    obs: &Observation<'_>,
    opts: ObjectiveOptions,
) -> Result<GradientSet> {
    let fwd = forward(params, obs, opts)?;
    let (grad, _) = gradients_from(params, obs, opts, &fwd);
    grad.check_finite()?;
    Ok(grad)
}

/// Objective, gradient and a damped diagonal Gauss-Newton curvature from one
/// forward pass.
pub(crate) fn value_gradients_curvature(
    params: &ModelParams,
    obs: &Observation<'_>,
    opts: ObjectiveOptions,
) -> Result<(f64, GradientSet, GradientSet)> {
    let fwd = forward(params, obs, opts)?;
    let (grad, value) = gradients_from(params, obs, opts, &fwd);
    grad.check_finite()?;
    let curv = curvature_from(params, obs, opts, &fwd);
    curv.check_finite()?;
    Ok((value, grad, curv))
}

/// Added to every curvature entry so flat directions fall back to plain
/// gradient steps.
const CURVATURE_DAMPING: f64 = 1.0;

/// Squared sensitivities of the whitened residuals `c_i / (sigma_i sqrt t)`
/// and regularizer residuals, plus the Fisher term of `ln sigma`. Mention
/// terms that couple `V` across latent dimensions are left out.
fn curvature_from(
    params: &ModelParams,
    obs: &Observation<'_>,
    opts: ObjectiveOptions,
    fwd: &Forward,
) -> GradientSet {
    let dims = params.dims();
    let drift = &params.drift;
    let t = obs.elapsed;
    let mut curv = GradientSet::zeros(params.basis.u.nrows(), params.basis.v.nrows(), dims);
    let w: DVector<f64> = drift.sigma.map(|s| 1.0 / (s * s * t));
    for i in 0..dims {
        curv.d_mu[i] = (fwd.n[i] * t).powi(2) * w[i];
        curv.d_sigma[i] = 2.0 / drift.sigma[i].powi(2) + t;
    }
    for (p, g) in obs.message.iter() {
        for j in 0..dims {
            curv.d_v[(p, j)] += g * g * w[j];
        }
    }
    if fwd.l.nrows() > 0 {
        let mut j_u = DMatrix::<f64>::zeros(params.basis.u.nrows(), dims);
        let mut j_t = DMatrix::<f64>::zeros(dims, dims);
        for k in 0..fwd.l.nrows() {
            for (p, val) in obs.window.p_rows[k].iter() {
                for i in 0..dims {
                    j_u[(p, i)] += val * fwd.tx[(k, i)];
                }
            }
            for i in 0..dims {
                for j in 0..dims {
                    j_t[(i, j)] += fwd.l[(k, i)] * fwd.x[(k, j)];
                }
            }
        }
        for i in 0..dims {
            let scale = (drift.mu[i] * t).powi(2) * w[i];
            for p in 0..j_u.nrows() {
                curv.d_u[(p, i)] += scale * j_u[(p, i)].powi(2);
            }
            for j in 0..dims {
                curv.d_t[(i, j)] += scale * j_t[(i, j)].powi(2);
            }
        }
    }
    if fwd.x_net.nrows() > 0 {
        for &(i, j) in &obs.network.edges {
            let h = fwd.x_net.row(i).dot(&fwd.x_net.row(j));
            let slope = (sigmoid(h) * sigmoid(-h)).powi(2) * opts.w_reg;
            let rows = [(&obs.network.profiles[i], j), (&obs.network.profiles[j], i)];
            for (profile, other) in rows {
                for (p, val) in profile.iter() {
                    for col in 0..dims {
                        curv.d_v[(p, col)] += slope * (val * fwd.x_net[(other, col)]).powi(2);
                    }
                }
            }
        }
    }
    curv.add_scalar(CURVATURE_DAMPING);
    curv
}

fn gradients_from(
    params: &ModelParams,
    obs: &Observation<'_>,
    opts: ObjectiveOptions,
    fwd: &Forward,
) -> (GradientSet, f64) {
    let dims = params.dims();
    let basis = &params.basis;
    let drift = &params.drift;
    let t = obs.elapsed;
    let mut grad = GradientSet::zeros(basis.u.nrows(), basis.v.nrows(), dims);

    let mut d = DVector::zeros(dims);
    let mut e = DVector::zeros(dims);
    for i in 0..dims {
        let sigma = drift.sigma[i];
        let s2 = sigma * sigma;
        let c = fwd.c[i];
        d[i] = c / (s2 * t);
        e[i] = -d[i] * drift.mu[i] * t;
        grad.d_mu[i] = -d[i] * fwd.n[i] * t;
        grad.d_sigma[i] = (1.0 + c) / sigma - c * c / (s2 * sigma * t);
    }

    // observed latent a = g V
    for (p, g) in obs.message.iter() {
        for j in 0..dims {
            grad.d_v[(p, j)] += d[j] * g;
        }
    }

    // drift factors n_i = 1 + sum_k L_ki (T X_k)_i
    for k in 0..fwd.l.nrows() {
        let p_row = &obs.window.p_rows[k];
        let w_row = &obs.window.w_rows[k];
        for (p, val) in p_row.iter() {
            for i in 0..dims {
                grad.d_u[(p, i)] += e[i] * val * fwd.tx[(k, i)];
            }
        }
        for i in 0..dims {
            let coef = e[i] * fwd.l[(k, i)];
            if coef == 0.0 {
                continue;
            }
            for j in 0..dims {
                grad.d_t[(i, j)] += coef * fwd.x[(k, j)];
            }
        }
        // z_k = (e o L_k') T
        let z = DVector::from_fn(dims, |j, _| {
            (0..dims).map(|i| e[i] * fwd.l[(k, i)] * basis.t[(i, j)]).sum::<f64>()
        });
        for (p, val) in w_row.iter() {
            for j in 0..dims {
                grad.d_v[(p, j)] += val * z[j];
            }
        }
    }

    if fwd.x_net.nrows() > 0 {
        for &(i, j) in &obs.network.edges {
            let h = fwd.x_net.row(i).dot(&fwd.x_net.row(j));
            let s_pos = sigmoid(h);
            let s_neg = sigmoid(-h);
            let dh = opts.w_reg * -2.0 * s_pos * s_neg * s_neg;
            for (p, val) in obs.network.profiles[i].iter() {
                for col in 0..dims {
                    grad.d_v[(p, col)] += dh * val * fwd.x_net[(j, col)];
                }
            }
            for (p, val) in obs.network.profiles[j].iter() {
                for col in 0..dims {
                    grad.d_v[(p, col)] += dh * val * fwd.x_net[(i, col)];
                }
            }
        }
    }
    (grad, fwd.parts.total)
}
