use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Hyperparams, ModelParams, TrainedUser};
use crate::dynamics::{DriftParams, LatentBasis};
use crate::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Per-user model file. Matrices are stored as arrays of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub user_id: String,
    #[serde(rename = "I")]
    pub latent_dims: usize,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    #[serde(rename = "U")]
    pub u: Vec<Vec<f64>>,
    #[serde(rename = "V")]
    pub v_basis: Vec<Vec<f64>>,
    #[serde(rename = "T")]
    pub t: Vec<Vec<f64>>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub hyper: Hyperparams,
    pub format_version: u32,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_of(rows: &[Vec<f64>], cols: usize, what: &str) -> Result<DMatrix<f64>> {
    if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
        return Err(Error::SizeMismatch(format!(
            "{what}: row of width {} where {cols} expected",
            bad.len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

impl ModelFile {
    pub fn from_trained(user: &TrainedUser) -> Self {
        let p = &user.params;
        Self {
            user_id: user.user_id.clone(),
            latent_dims: p.dims(),
            mu: p.drift.mu.iter().copied().collect(),
            sigma: p.drift.sigma.iter().copied().collect(),
            u: rows_of(&p.basis.u),
            v_basis: rows_of(&p.basis.v),
            t: rows_of(&p.basis.t),
            m: user.m.iter().copied().collect(),
            v: user.v.iter().copied().collect(),
            hyper: user.hyper.clone(),
            format_version: MODEL_FORMAT_VERSION,
        }
    }

    pub fn params(&self) -> Result<ModelParams> {
        let dims = self.latent_dims;
        if [self.mu.len(), self.sigma.len(), self.m.len(), self.v.len(), self.t.len()]
            .iter()
            .any(|&n| n != dims)
        {
            return Err(Error::SizeMismatch(format!(
                "model `{}`: vectors do not match I = {dims}",
                self.user_id
            )));
        }
        Ok(ModelParams {
            drift: DriftParams {
                mu: DVector::from_vec(self.mu.clone()),
                sigma: DVector::from_vec(self.sigma.clone()),
            },
            basis: LatentBasis {
                u: matrix_of(&self.u, dims, "U")?,
                v: matrix_of(&self.v_basis, dims, "V")?,
                t: matrix_of(&self.t, dims, "T")?,
            },
        })
    }

    pub fn m(&self) -> DVector<f64> {
        DVector::from_vec(self.m.clone())
    }

    pub fn v(&self) -> DVector<f64> {
        DVector::from_vec(self.v.clone())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec(self)?;
        bytes.push(b'\n');
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: Self = serde_json::from_str(&text).map_err(|e| Error::Schema {
            file: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Schema {
                file: path.display().to_string(),
                line: 0,
                message: format!("unsupported format_version {}", file.format_version),
            });
        }
        Ok(file)
    }
}
