//! Regularized likelihood, analytic gradients and the per-user training loop.

mod fit;
mod model_io;
mod objective;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DriftParams, LatentBasis};
use crate::{Error, Result};

pub use fit::{
    fit_message, predict_next_latent, train_all, train_user, user_stream, FitResult, Prediction,
    TrainedUser, UserData, UserOutcome,
};
pub use model_io::{ModelFile, MODEL_FORMAT_VERSION};
pub use objective::{
    gradients, homogeneity_penalty, neg_log_likelihood, objective, objective_parts, sigmoid,
    NetworkData, ObjectiveOptions, ObjectiveParts, Observation,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Latent dimensions.
    #[serde(rename = "I")]
    pub latent_dims: usize,
    pub w_reg: f64,
    pub eta: f64,
    /// Gradient steps per status message.
    pub max_iters: usize,
    /// Relative objective change that counts as converged.
    pub tol: f64,
    pub sigma_min: f64,
    /// Half-width of the uniform draw for `U`, `V` and `T` at start.
    pub init_spread: f64,
    pub seed: u64,
    /// Predict `u = m` instead of sampling `u ~ N(m, v^2)`.
    pub deterministic_predict: bool,
    /// Likelihood-only model: drift factors pinned to 1 and no regularizer.
    pub ablation_int: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            latent_dims: 50,
            w_reg: 0.1,
            eta: 0.01,
            max_iters: 500,
            tol: 1e-6,
            sigma_min: 1e-3,
            init_spread: 0.1,
            seed: 0,
            deterministic_predict: true,
            ablation_int: false,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if self.latent_dims == 0 {
            return bad("I must be positive");
        }
        if !(self.w_reg >= 0.0 && self.w_reg.is_finite()) {
            return bad("w_reg must be a finite non-negative number");
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return bad("tol must be positive");
        }
        if !(self.sigma_min > 0.0 && self.sigma_min.is_finite()) {
            return bad("sigma_min must be positive");
        }
        if !(self.init_spread > 0.0 && self.init_spread.is_finite()) {
            return bad("init_spread must be positive");
        }
        Ok(())
    }

    pub fn objective_options(&self) -> ObjectiveOptions {
        ObjectiveOptions {
            w_reg: if self.ablation_int { 0.0 } else { self.w_reg },
            ablate_interactions: self.ablation_int,
        }
    }
}

/// The learnable set `{mu, sigma, U, V, T}` of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub drift: DriftParams,
    pub basis: LatentBasis,
}

pub const INIT_MU: f64 = 0.01;
pub const INIT_SIGMA: f64 = 0.1;

impl ModelParams {
    /// `U`, `V`, `T` uniform in `(-spread, spread)`; `mu = 0.01`, `sigma = 0.1`.
    pub fn init<R: Rng + ?Sized>(dims: usize, r: usize, q: usize, spread: f64, rng: &mut R) -> Self {
        let mut draw = |rows, cols| DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-spread..spread));
        let u = draw(r, dims);
        let v = draw(q, dims);
        let t = draw(dims, dims);
        Self {
            drift: DriftParams {
                mu: DVector::from_element(dims, INIT_MU),
                sigma: DVector::from_element(dims, INIT_SIGMA),
            },
            basis: LatentBasis { u, v, t },
        }
    }

    pub fn dims(&self) -> usize {
        self.drift.mu.len()
    }

    /// `self - eta * grad`, then `sigma` projected onto `[sigma_min, inf)`.
    pub fn stepped(&self, grad: &GradientSet, eta: f64, sigma_min: f64) -> Self {
        let mut next = self.clone();
        next.drift.mu.axpy(-eta, &grad.d_mu, 1.0);
        next.drift.sigma.axpy(-eta, &grad.d_sigma, 1.0);
        next.drift.sigma.apply(|s| *s = s.max(sigma_min));
        next.basis.u -= &grad.d_u * eta;
        next.basis.v -= &grad.d_v * eta;
        next.basis.t -= &grad.d_t * eta;
        next
    }

    pub fn is_finite(&self) -> bool {
        self.drift.mu.iter().chain(self.drift.sigma.iter()).all(|x| x.is_finite())
            && self.basis.is_finite()
    }
}

/// Gradient blocks, shaped like [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub d_mu: DVector<f64>,
    pub d_sigma: DVector<f64>,
    pub d_u: DMatrix<f64>,
    pub d_v: DMatrix<f64>,
    pub d_t: DMatrix<f64>,
}

impl GradientSet {
    pub fn zeros(r: usize, q: usize, dims: usize) -> Self {
        Self {
            d_mu: DVector::zeros(dims),
            d_sigma: DVector::zeros(dims),
            d_u: DMatrix::zeros(r, dims),
            d_v: DMatrix::zeros(q, dims),
            d_t: DMatrix::zeros(dims, dims),
        }
    }

    pub fn norm_squared(&self) -> f64 {
        self.d_mu.norm_squared()
            + self.d_sigma.norm_squared()
            + self.d_u.norm_squared()
            + self.d_v.norm_squared()
            + self.d_t.norm_squared()
    }

    pub(crate) fn add_scalar(&mut self, x: f64) {
        self.d_mu.add_scalar_mut(x);
        self.d_sigma.add_scalar_mut(x);
        self.d_u.add_scalar_mut(x);
        self.d_v.add_scalar_mut(x);
        self.d_t.add_scalar_mut(x);
    }

    /// Elementwise `self / by`.
    pub(crate) fn divided_by(&self, by: &GradientSet) -> GradientSet {
        GradientSet {
            d_mu: self.d_mu.component_div(&by.d_mu),
            d_sigma: self.d_sigma.component_div(&by.d_sigma),
            d_u: self.d_u.component_div(&by.d_u),
            d_v: self.d_v.component_div(&by.d_v),
            d_t: self.d_t.component_div(&by.d_t),
        }
    }

    fn check_finite(&self) -> Result<()> {
        let blocks: [(&str, &[f64]); 5] = [
            ("mu", self.d_mu.as_slice()),
            ("sigma", self.d_sigma.as_slice()),
            ("U", self.d_u.as_slice()),
            ("V", self.d_v.as_slice()),
            ("T", self.d_t.as_slice()),
        ];
        for (name, block) in blocks {
            if block.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("gradient block {name}")));
            }
        }
        Ok(())
    }
}
