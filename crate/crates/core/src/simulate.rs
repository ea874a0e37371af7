//! Random sparse precision matrices and Gaussian samples.
//!
//! `Omega = B B^T + D` with `B` sparse lower triangular (denser inside three
//! consecutive blocks of nodes) and `D` a small positive diagonal, rescaled
//! so that `Sigma = Omega^{-1}` has unit diagonal.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GgmError, Result};
use crate::graph::{Graph, GraphJson};
use crate::linmodel::{CoefMatrix, DataMatrix};
use crate::rng::{derive, purpose, substream};

/// Off-diagonal precision entries at or below this size are not edges.
pub const EDGE_TOL: f64 = 1e-12;
const D_LOW: f64 = 0.5e-3;
const D_HIGH: f64 = 1.5e-3;
const MAX_REGENERATIONS: u64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub p: usize,
    pub eta_int: f64,
    pub eta_ext: f64,
    pub eps: f64,
    pub seed: u64,
}

impl SimParams {
    /// `eta_int = eta`, `eta_ext = eta / 5`, `eps = 0.1`.
    pub fn with_eta(p: usize, eta: f64, seed: u64) -> Self {
        SimParams { p, eta_int: eta, eta_ext: eta / 5.0, eps: 0.1, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(GgmError::domain("simulation needs p >= 2"));
        }
        if !(0.0 <= self.eta_ext && self.eta_ext <= self.eta_int && self.eta_int <= 1.0) {
            return Err(GgmError::domain(format!(
                "need 0 <= eta_ext <= eta_int <= 1, got {} and {}",
                self.eta_ext, self.eta_int
            )));
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(GgmError::domain("eps must be positive"));
        }
        Ok(())
    }
}

/// Block index of every node: sizes `ceil(p/3)`, `ceil((p - ceil(p/3))/2)`, rest.
pub fn blocks(p: usize) -> Vec<usize> {
    let s1 = p.div_ceil(3);
    let s2 = (p - s1).div_ceil(2);
    (0..p).map(|a| if a < s1 { 0 } else if a < s1 + s2 { 1 } else { 2 }).collect()
}

/// Ground-truth model.
#[derive(Debug, Clone, PartialEq)]
pub struct CovModel {
    pub sigma: DMatrix<f64>,
    pub omega: DMatrix<f64>,
    pub g_true: Graph,
    pub theta_true: CoefMatrix,
    pub sigma2: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CovModelJson {
    p: usize,
    sigma: Vec<Vec<f64>>,
    omega: Vec<Vec<f64>>,
    graph: GraphJson,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], p: usize) -> Result<DMatrix<f64>> {
    if rows.len() != p || rows.iter().any(|r| r.len() != p) {
        return Err(GgmError::Parse(format!("expected a {p} x {p} matrix")));
    }
    Ok(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
}

impl CovModel {
    /// Derives the graph, regression matrix and conditional variances from
    /// a precision matrix and its inverse.
    pub fn from_parts(sigma: DMatrix<f64>, omega: DMatrix<f64>) -> Result<Self> {
        let p = omega.nrows();
        if omega.ncols() != p || sigma.shape() != (p, p) {
            return Err(GgmError::domain("covariance and precision must be p x p"));
        }
        let mut g_true = Graph::empty(p);
        let mut theta = DMatrix::zeros(p, p);
        for a in 0..p {
            if !(omega[(a, a)] > 0.0) {
                return Err(GgmError::domain("precision diagonal must be positive"));
            }
            for b in 0..p {
                if a != b && omega[(a, b)].abs() > EDGE_TOL {
                    theta[(a, b)] = -omega[(a, b)] / omega[(a, a)];
                    if a < b {
                        g_true.add_edge(a, b)?;
                    }
                }
            }
        }
        let sigma2 = (0..p).map(|a| 1.0 / omega[(a, a)]).collect();
        Ok(CovModel { sigma, omega, g_true, theta_true: CoefMatrix::from_matrix(theta)?, sigma2 })
    }

    pub fn p(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn to_json(&self) -> Result<String> {
        let json = CovModelJson {
            p: self.p(),
            sigma: rows(&self.sigma),
            omega: rows(&self.omega),
            graph: self.g_true.to_json(),
        };
        Ok(serde_json::to_string_pretty(&json)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let json: CovModelJson = serde_json::from_str(s)?;
        let model = CovModel::from_parts(from_rows(&json.sigma, json.p)?, from_rows(&json.omega, json.p)?)?;
        if model.g_true != Graph::from_json(&json.graph)? {
            return Err(GgmError::Parse("stored graph does not match the precision matrix".into()));
        }
        Ok(model)
    }
}

fn draw_b(params: &SimParams, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let p = params.p;
    let block = blocks(p);
    let mut b = DMatrix::zeros(p, p);
    // Every candidate entry consumes the same draws whatever eta is, so the
    // sparsity pattern grows monotonically with eta for a fixed stream.
    for a in 0..p {
        for c in 0..a {
            let u: f64 = rng.random();
            let value: f64 = rng.random_range(-1.0..=1.0);
            let eta = if block[a] == block[c] { params.eta_int } else { params.eta_ext };
            if u < eta {
                b[(a, c)] = value;
            }
        }
    }
    for a in 0..p {
        b[(a, a)] = rng.random_range(0.0..=params.eps);
    }
    b
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m = (&*m + t) * 0.5;
}

fn build(params: &SimParams, rng: &mut ChaCha8Rng) -> Option<CovModel> {
    let p = params.p;
    let b = draw_b(params, rng);
    let mut omega0 = &b * b.transpose();
    for a in 0..p {
        omega0[(a, a)] += rng.random_range(D_LOW..=D_HIGH);
    }
    let chol = omega0.clone().cholesky()?;
    let mut sigma0 = chol.inverse();
    // One step of iterative refinement of the inverse.
    let resid = DMatrix::identity(p, p) - &omega0 * &sigma0;
    sigma0 += &sigma0 * resid;
    symmetrize(&mut sigma0);
    let s: Vec<f64> = (0..p).map(|a| sigma0[(a, a)].sqrt()).collect();
    if s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return None;
    }
    let mut sigma = DMatrix::from_fn(p, p, |i, j| sigma0[(i, j)] / (s[i] * s[j]));
    for a in 0..p {
        sigma[(a, a)] = 1.0;
    }
    let omega = DMatrix::from_fn(p, p, |i, j| omega0[(i, j)] * s[i] * s[j]);
    CovModel::from_parts(sigma, omega).ok()
}

pub fn gen_cov(params: &SimParams) -> Result<CovModel> {
    params.validate()?;
    for attempt in 0..MAX_REGENERATIONS {
        let mut rng = substream(params.seed, &[purpose::MODEL, attempt]);
        if let Some(model) = build(params, &mut rng) {
            return Ok(model);
        }
        log::warn!("precision matrix numerically singular (seed {}, attempt {attempt}); regenerating", params.seed);
    }
    Err(GgmError::Numeric("could not generate a positive definite precision matrix".into()))
}

/// `n` rows from `N(0, Sigma)`.
pub fn sample(model: &CovModel, n: usize, seed: u64) -> Result<DataMatrix> {
    if n == 0 {
        return Err(GgmError::domain("sample size must be positive"));
    }
    let p = model.p();
    let l = model
        .sigma
        .clone()
        .cholesky()
        .ok_or_else(|| GgmError::domain("covariance is not positive definite"))?
        .unpack();
    let mut rng = substream(seed, &[purpose::SAMPLE]);
    let z = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    DataMatrix::new(z * l.transpose())
}

/// Mean degree `2|E|/p`.
pub fn sparsity_index(g: &Graph) -> f64 {
    2.0 * g.n_edges() as f64 / g.p() as f64
}

fn mean_index(p: usize, eta: f64, trials: usize, seed: u64) -> Result<f64> {
    let mut total = 0.0;
    for t in 0..trials {
        let model = gen_cov(&SimParams::with_eta(p, eta, derive(seed, &[purpose::CALIBRATE, t as u64])))?;
        total += sparsity_index(&model.g_true);
    }
    Ok(total / trials as f64)
}

/// `eta` whose mean sparsity index over `trials` models matches `target_is`
/// within 5% (bisection with common random numbers).
pub fn calibrate_eta(p: usize, target_is: f64, trials: usize, seed: u64) -> Result<f64> {
    if !(target_is >= 0.0) || trials == 0 {
        return Err(GgmError::domain("calibration needs target_Is >= 0 and trials >= 1"));
    }
    if target_is == 0.0 {
        return Ok(0.0);
    }
    let top = mean_index(p, 1.0, trials, seed)?;
    if top < target_is {
        log::warn!("sparsity index {target_is} unreachable for p = {p} (max {top:.3}); using eta = 1");
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut best = (f64::INFINITY, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let value = mean_index(p, mid, trials, seed)?;
        let err = (value - target_is).abs();
        if err < best.0 {
            best = (err, mid);
        }
        if err <= 0.05 * target_is {
            return Ok(mid);
        }
        if value < target_is {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    log::warn!("sparsity index {target_is} matched only within {:.3}", best.0);
    Ok(best.1)
}
