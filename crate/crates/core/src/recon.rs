//! Weighted, Tikhonov-regularized Kaczmarz reconstruction.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kaczmarz settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconConfig {
    /// Full sweeps over all rows.
    pub iterations: usize,
    /// Regularization relative to ‖WS‖_F²/N.
    pub lambda_rel: f64,
    /// Per-row whitening weights; uniform when absent.
    pub weights: Option<Vec<f64>>,
    pub nonnegative: bool,
    /// Shuffle the row order once with this seed; sequential when absent.
    pub shuffle_seed: Option<u64>,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            lambda_rel: 0.1,
            weights: None,
            nonnegative: true,
            shuffle_seed: None,
        }
    }
}

impl ReconConfig {
    pub fn validate(&self, n_rows: usize) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::invalid("at least one iteration is required"));
        }
        if !(self.lambda_rel >= 0.0 && self.lambda_rel.is_finite()) {
            return Err(Error::invalid("lambda_r must be nonnegative"));
        }
        if let Some(w) = &self.weights {
            if w.len() != n_rows {
                return Err(Error::invalid("one weight per row is required"));
            }
            if w.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::invalid("weights must be positive"));
            }
        }
        Ok(())
    }
}

/// Row-major complex matrix view.
#[derive(Debug, Clone, Copy)]
pub struct MatRef<'a> {
    pub data: &'a [Complex64],
    pub rows: usize,
    pub cols: usize,
}

impl<'a> MatRef<'a> {
    pub fn new(data: &'a [Complex64], rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix data of length {} does not match {rows}×{cols}",
                data.len()
            )));
        }
        Ok(Self { data, rows, cols })
    }

    pub fn row(&self, i: usize) -> &'a [Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

fn weight(weights: Option<&[f64]>, i: usize) -> f64 {
    weights.map_or(1.0, |w| w[i])
}

/// Absolute regularization `λ_r ‖WS‖_F² / N`.
pub fn lambda_abs(s: MatRef<'_>, weights: Option<&[f64]>, lambda_rel: f64) -> f64 {
    if lambda_rel == 0.0 {
        return 0.0;
    }
    let fro: f64 = (0..s.rows)
        .map(|i| weight(weights, i).powi(2) * s.row(i).iter().map(|v| v.norm_sqr()).sum::<f64>())
        .sum();
    lambda_rel * fro / s.cols as f64
}

/// Reconstruction output.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconResult {
    /// Real concentration estimate (nonnegative when enabled).
    pub c: Vec<f64>,
    /// Whitened data residual ‖W(Sc − u)‖ after every sweep.
    pub residuals: Vec<f64>,
}

/// Kaczmarz iteration on the augmented system `[WS, √λ I] [c; v] = Wu`,
/// which converges to the minimizer of `‖W(Sc − u)‖² + λ‖c‖²`.
pub fn kaczmarz(s: MatRef<'_>, u: &[Complex64], cfg: &ReconConfig) -> Result<ReconResult> {
    cfg.validate(s.rows)?;
    if u.len() != s.rows {
        return Err(Error::invalid(
            "measurement length does not match the row count",
        ));
    }
    let weights = cfg.weights.as_deref();
    let norms: Vec<f64> = (0..s.rows)
        .map(|i| weight(weights, i).powi(2) * s.row(i).iter().map(|v| v.norm_sqr()).sum::<f64>())
        .collect();
    if norms.iter().all(|&n| n == 0.0) {
        return Err(Error::invalid("system matrix is all zero"));
    }
    let lambda = lambda_abs(s, weights, cfg.lambda_rel);
    let sqrt_lambda = lambda.sqrt();
    let mut order: Vec<usize> = (0..s.rows).filter(|&i| norms[i] + lambda > 0.0).collect();
    if let Some(seed) = cfg.shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let mut c = vec![Complex64::new(0.0, 0.0); s.cols];
    let mut v = vec![Complex64::new(0.0, 0.0); s.rows];
    let mut residuals = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        for &i in &order {
            let w = weight(weights, i);
            let row = s.row(i);
            let dot: Complex64 = row.iter().zip(&c).map(|(a, x)| a * x).sum();
            let tau = (w * u[i] - w * dot - sqrt_lambda * v[i]) / (norms[i] + lambda);
            let tw = tau * w;
            for (x, a) in c.iter_mut().zip(row) {
                *x += tw * a.conj();
            }
            v[i] += sqrt_lambda * tau;
        }
        if cfg.nonnegative {
            for x in c.iter_mut() {
                *x = Complex64::new(x.re.max(0.0), 0.0);
            }
        }
        residuals.push(
            (0..s.rows)
                .map(|i| {
                    let dot: Complex64 = s.row(i).iter().zip(&c).map(|(a, x)| a * x).sum();
                    (weight(weights, i) * (dot - u[i])).norm_sqr()
                })
                .sum::<f64>()
                .sqrt(),
        );
    }
    Ok(ReconResult {
        c: c.iter().map(|x| x.re).collect(),
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity2() -> Vec<Complex64> {
        vec![1.0.into(), 0.0.into(), 0.0.into(), 1.0.into()]
    }

    #[test]
    fn identity_system() {
        let s = identity2();
        let cfg = ReconConfig {
            lambda_rel: 1e-12,
            ..Default::default()
        };
        let r = kaczmarz(
            MatRef::new(&s, 2, 2).unwrap(),
            &[1.0.into(), 2.0.into()],
            &cfg,
        )
        .unwrap();
        assert!((r.c[0] - 1.0).abs() < 1e-6 && (r.c[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn clamping_is_active() {
        let s = identity2();
        let cfg = ReconConfig {
            lambda_rel: 1e-12,
            ..Default::default()
        };
        let r = kaczmarz(
            MatRef::new(&s, 2, 2).unwrap(),
            &[(-1.0).into(), 2.0.into()],
            &cfg,
        )
        .unwrap();
        assert_eq!(r.c[0], 0.0);
        assert!((r.c[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn lambda_examples() {
        let s = identity2();
        let m = MatRef::new(&s, 2, 2).unwrap();
        assert_eq!(lambda_abs(m, None, 0.0), 0.0);
        assert!((lambda_abs(m, None, 0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_zero_matrix() {
        let s = vec![Complex64::new(0.0, 0.0); 4];
        let r = kaczmarz(
            MatRef::new(&s, 2, 2).unwrap(),
            &[1.0.into(), 1.0.into()],
            &ReconConfig::default(),
        );
        assert!(r.is_err());
    }
}
