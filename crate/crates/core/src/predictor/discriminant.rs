use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::{Error, Result};

/// Shrinkage added to the within-class scatter, relative to its mean
/// diagonal entry.
pub const SHRINKAGE: f64 = 1e-3;

/// Two-class Fisher discriminant; a row is scored `w . u + bias` and called
/// positive above `threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDiscriminant {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
}

impl LinearDiscriminant {
    pub fn score(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.bias
    }

    pub fn scores(&self, features: &FeatureMatrix) -> Vec<f64> {
        (0..features.len())
            .map(|r| self.score(features.rows.row(r).transpose().as_slice()))
            .collect()
    }

    pub fn predict(&self, u: &[f64]) -> u8 {
        u8::from(self.score(u) > self.threshold)
    }
}

/// `w = (S_W + lambda I)^-1 (mean_pos - mean_neg)` with the cutoff halfway
/// between the projected class means.
pub fn fit_discriminant(train: &FeatureMatrix) -> Result<LinearDiscriminant> {
    let dims = train.dims();
    let split = |class: u8| -> Vec<DVector<f64>> {
        (0..train.len())
            .filter(|&r| train.labels[r] == class)
            .map(|r| train.rows.row(r).transpose())
            .collect()
    };
    let (pos, neg) = (split(1), split(0));
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClass);
    }
    let mean = |rows: &[DVector<f64>]| {
        rows.iter().fold(DVector::zeros(dims), |acc, r| acc + r) / rows.len() as f64
    };
    let (mean_pos, mean_neg) = (mean(&pos), mean(&neg));
    let mut scatter = DMatrix::<f64>::zeros(dims, dims);
    for (rows, m) in [(&pos, &mean_pos), (&neg, &mean_neg)] {
        for r in rows.iter() {
            let d = r - m;
            scatter.ger(1.0, &d, &d, 1.0);
        }
    }
    let lambda = (SHRINKAGE * scatter.trace() / dims as f64).max(f64::MIN_POSITIVE.sqrt());
    for i in 0..dims {
        scatter[(i, i)] += lambda;
    }
    let diff = &mean_pos - &mean_neg;
    let weights = match scatter.clone().cholesky() {
        Some(ch) => ch.solve(&diff),
        None => scatter
            .lu()
            .solve(&diff)
            .ok_or_else(|| Error::NonFinite("singular within-class scatter".into()))?,
    };
    let bias = -weights.dot(&(&mean_pos + &mean_neg)) / 2.0;
    if !weights.iter().all(|w| w.is_finite()) || !bias.is_finite() {
        return Err(Error::NonFinite("discriminant weights".into()));
    }
    Ok(LinearDiscriminant {
        weights: weights.as_slice().to_vec(),
        bias,
        threshold: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn matrix(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> FeatureMatrix {
        let n = rows.len();
        let dims = rows[0].len();
        FeatureMatrix {
            rows: DMatrix::from_fn(n, dims, |r, c| rows[r][c]),
            user_ids: (0..n).map(|i| format!("u{i:03}")).collect(),
            labels,
            candidate_ts: (0..n as i64).collect(),
        }
    }

    fn accuracy(lda: &LinearDiscriminant, f: &FeatureMatrix) -> f64 {
        let hits = (0..f.len())
            .filter(|&r| lda.predict(f.rows.row(r).transpose().as_slice()) == f.labels[r])
            .count();
        hits as f64 / f.len() as f64
    }

    #[test]
    fn separated_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for k in 0..200 {
            let y = (k % 2) as u8;
            let centre = if y == 1 { 3.0 } else { -3.0 };
            rows.push((0..5).map(|_| centre + noise.sample(&mut rng)).collect());
            labels.push(y);
        }
        let f = matrix(rows, labels);
        let lda = fit_discriminant(&f).unwrap();
        assert!(accuracy(&lda, &f) >= 0.95);
    }

    #[test]
    fn one_dimensional_sign_rule() {
        let rows: Vec<Vec<f64>> = [-1.5, -1.0, -0.5, 0.5, 1.0, 1.5].iter().map(|&x| vec![x]).collect();
        let f = matrix(rows, vec![0, 0, 0, 1, 1, 1]);
        let lda = fit_discriminant(&f).unwrap();
        assert!(lda.weights[0] > 0.0);
        assert!((lda.bias / lda.weights[0]).abs() < 1e-12);
        for x in [-0.3, -2.0, 0.01, 4.0] {
            assert_eq!(lda.predict(&[x]), u8::from(x > 0.0));
        }
    }

    #[test]
    fn equal_means_give_zero_weights() {
        let rows = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 0.0]];
        let f = matrix(rows.clone(), vec![1, 1, 0, 0, 0]);
        let lda = fit_discriminant(&f).unwrap();
        assert!(lda.weights.iter().all(|w| w.abs() < 1e-12));
        let acc = accuracy(&lda, &f);
        assert!((acc - 0.6).abs() < 1e-12);
    }

    #[test]
    fn more_dims_than_samples() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| (0..20).map(|j| ((i * j) as f64).sin()).collect()).collect();
        let f = matrix(rows, vec![0, 1, 0, 1, 0, 1]);
        let lda = fit_discriminant(&f).unwrap();
        assert!(lda.weights.iter().all(|w| w.is_finite()));
    }

    #[test]
    fn single_class_rejected() {
        let f = matrix(vec![vec![1.0], vec![2.0]], vec![1, 1]);
        assert!(matches!(fit_discriminant(&f), Err(Error::SingleClass)));
    }
}
