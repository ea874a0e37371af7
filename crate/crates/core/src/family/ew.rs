//! Exponential-weights family: Langevin estimate of the exponentially
//! weighted aggregate, adaptive lasso reweighting, or-rule graphs.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GgmError, Result};
use crate::family::{path_family, EdgeRule};
use crate::graph::{GraphFamily, Provenance};
use crate::lars::{default_max_support, lasso_path_lenient, LassoPath};
use crate::linmodel::{CoefMatrix, DataMatrix};
use crate::rng::{purpose, substream};

const DIVERGENCE_NORM: f64 = 1e6;

/// Tuning of the Langevin sampler and of the prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EWParams {
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub h: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub burn_in_fraction: f64,
    pub seed: u64,
}

impl EWParams {
    /// `alpha = 0`, `beta = 2/n`, `tau = 1/sqrt(n(p-1))`, `h = 1e-3`, `T = 200`,
    /// half of the chain discarded as burn-in.
    pub fn paper_defaults(n: usize, p: usize, seed: u64) -> Self {
        let nf = n as f64;
        EWParams {
            alpha: 0.0,
            beta: 2.0 / nf,
            tau: 1.0 / (nf * (p.max(2) - 1) as f64).sqrt(),
            h: 1e-3,
            t: 200.0,
            burn_in_fraction: 0.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.h > 0.0
            && self.t > 0.0
            && self.tau > 0.0
            && self.beta > 0.0
            && self.alpha >= 0.0
            && (0.0..1.0).contains(&self.burn_in_fraction)
            && [self.h, self.t, self.tau, self.beta, self.alpha].iter().all(|v| v.is_finite());
        if !ok {
            return Err(GgmError::domain(format!("invalid EW parameters: {self:?}")));
        }
        if self.steps() == 0 || self.steps() <= self.burn_in_steps() {
            return Err(GgmError::domain("EW chain leaves no iterates after burn-in"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t / self.h).round() as usize
    }

    pub fn burn_in_steps(&self) -> usize {
        (self.burn_in_fraction * self.steps() as f64).floor() as usize
    }
}

/// Log-density (up to a constant) of the aggregate's weights for node `a`:
/// `-beta |X_a - X v|_n^2 - alpha sum_j log(1 + (v_j/tau)^2)` on `v_a = 0`.
pub struct LangevinTarget {
    a: usize,
    n: f64,
    gram: DMatrix<f64>,
    xty: DVector<f64>,
    yy: f64,
    alpha: f64,
    beta: f64,
    tau: f64,
}

impl LangevinTarget {
    pub fn new(x: &DataMatrix, a: usize, params: &EWParams) -> Result<Self> {
        if a >= x.p() {
            return Err(GgmError::domain(format!("node {a} out of range for p = {}", x.p())));
        }
        let gram = x.matrix().tr_mul(x.matrix());
        Self::from_gram(gram, x, a, params)
    }

    fn from_gram(gram: DMatrix<f64>, x: &DataMatrix, a: usize, params: &EWParams) -> Result<Self> {
        let y = x.matrix().column(a);
        Ok(LangevinTarget {
            a,
            n: x.n() as f64,
            xty: x.matrix().tr_mul(&y),
            yy: y.norm_squared(),
            gram,
            alpha: params.alpha,
            beta: params.beta,
            tau: params.tau,
        })
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.xty.len() || v[self.a] != 0.0 {
            return Err(GgmError::domain("point must have length p and a zero entry at the node"));
        }
        Ok(())
    }

    pub fn log_density(&self, v: &[f64]) -> Result<f64> {
        self.check(v)?;
        let v = DVector::from_column_slice(v);
        let rss = self.yy - 2.0 * v.dot(&self.xty) + v.dot(&(&self.gram * &v));
        let prior: f64 = v.iter().map(|vj| (1.0 + (vj / self.tau).powi(2)).ln()).sum();
        Ok(-self.beta * rss / self.n - self.alpha * prior)
    }

    pub fn gradient(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v)?;
        let mut out = vec![0.0; v.len()];
        self.gradient_into(v, &mut out);
        Ok(out)
    }

    fn gradient_into(&self, v: &[f64], out: &mut [f64]) {
        let p = v.len();
        let scale = 2.0 * self.beta / self.n;
        let tau2 = self.tau * self.tau;
        for j in 0..p {
            if j == self.a {
                out[j] = 0.0;
                continue;
            }
            let mut gv = 0.0;
            for (k, vk) in v.iter().enumerate() {
                gv += self.gram[(j, k)] * vk;
            }
            out[j] = scale * (self.xty[j] - gv) - 2.0 * self.alpha * v[j] / (tau2 + v[j] * v[j]);
        }
    }

    /// Euler discretisation of the Langevin diffusion from `v = 0`; returns
    /// the average of the iterates after burn-in.
    fn run(&self, params: &EWParams) -> Result<Vec<f64>> {
        let p = self.xty.len();
        let mut rng = substream(params.seed, &[purpose::LANGEVIN, self.a as u64]);
        let steps = params.steps();
        let burn = params.burn_in_steps();
        let noise = (2.0 * params.h).sqrt();
        let mut v = vec![0.0; p];
        let mut grad = vec![0.0; p];
        let mut sum = vec![0.0; p];
        for step in 1..=steps {
            self.gradient_into(&v, &mut grad);
            for j in 0..p {
                if j != self.a {
                    let xi: f64 = rng.sample(StandardNormal);
                    v[j] += params.h * grad[j] + noise * xi;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(norm <= DIVERGENCE_NORM) {
                return Err(GgmError::Divergence { node: self.a, step, norm });
            }
            if step > burn {
                for (s, vj) in sum.iter_mut().zip(&v) {
                    *s += vj;
                }
            }
        }
        let count = (steps - burn) as f64;
        Ok(sum.into_iter().map(|s| s / count).collect())
    }
}

fn check_unit_columns(x: &DataMatrix) -> Result<()> {
    for b in 0..x.p() {
        let norm = x.matrix().column(b).norm();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(GgmError::domain(format!(
                "column {b} has norm {norm}; scale columns to unit norm first"
            )));
        }
    }
    Ok(())
}

/// Langevin estimate of the aggregate for node `a`. Columns of `x` must have
/// unit Euclidean norm.
pub fn ew_estimator(x: &DataMatrix, a: usize, params: &EWParams) -> Result<Vec<f64>> {
    params.validate()?;
    check_unit_columns(x)?;
    LangevinTarget::new(x, a, params)?.run(params)
}

/// Estimates for every node on the unit-norm rescaling of `x`, mapped back to
/// the scale of `x`.
pub fn compute_theta_ew(x: &DataMatrix, params: &EWParams) -> Result<CoefMatrix> {
    params.validate()?;
    let (unit, norms) = x.unit_columns()?;
    let gram = unit.matrix().tr_mul(unit.matrix());
    let rows = (0..x.p())
        .into_par_iter()
        .map(|a| LangevinTarget::from_gram(gram.clone(), &unit, a, params)?.run(params))
        .collect::<Result<Vec<_>>>()?;
    let mut theta = CoefMatrix::zeros(x.p());
    for (a, row) in rows.iter().enumerate() {
        let scaled: Vec<f64> = row
            .iter()
            .enumerate()
            .map(|(b, v)| if b == a { 0.0 } else { v * norms[a] / norms[b] })
            .collect();
        theta.set_row(a, &scaled);
    }
    Ok(theta)
}

/// Adaptive-lasso paths with weights `1 / |theta_ab|`; zero entries exclude
/// the column.
pub fn adaptive_paths(x: &DataMatrix, theta_ew: &CoefMatrix, max_support: usize) -> Result<Vec<LassoPath>> {
    let p = x.p();
    if theta_ew.p() != p {
        return Err(GgmError::domain("coefficient matrix and data have different node counts"));
    }
    (0..p)
        .into_par_iter()
        .map(|a| {
            let weights: Vec<f64> = (0..p)
                .map(|b| {
                    let t = theta_ew.get(a, b).abs();
                    if b == a || t == 0.0 {
                        f64::INFINITY
                    } else {
                        1.0 / t
                    }
                })
                .collect();
            if weights.iter().all(|w| w.is_infinite()) {
                log::info!("EW coefficients of node {a} are all zero; its path is empty");
            }
            lasso_path_lenient(x, a, Some(&weights), max_support)
        })
        .collect()
}

pub fn ew_family(x: &DataMatrix, theta_ew: &CoefMatrix, d: usize) -> Result<GraphFamily> {
    let paths = adaptive_paths(x, theta_ew, default_max_support(x.n(), x.p()))?;
    path_family(&paths, d, EdgeRule::Or, Provenance::Ew)
}

pub fn build_ew(x: &DataMatrix, d: usize, params: &EWParams) -> Result<GraphFamily> {
    let theta = compute_theta_ew(x, params)?;
    ew_family(x, &theta, d)
}
