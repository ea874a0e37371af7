//! LARS with the lasso modification.
//!
//! Computes the full regularisation path of
//!
//! `min_v |X_a - X v|^2 + lambda * sum_b w_b |v_b|`, `v_a = 0`,
//!
//! (plain squared Euclidean norm, no `1/n`). Weighted problems are solved on
//! the rescaled design `X_b / w_b` and mapped back; an infinite weight drops
//! the column. Along the path `lambda = 2 max_b |<X_b/w_b, r>|`.

use nalgebra::{DMatrix, DVector};

use crate::error::{GgmError, Result};
use crate::linmodel::DataMatrix;

/// Piecewise-linear lasso path for one response.
///
/// Knot `k` sits at `lambdas[k]` with coefficients `coefs[k]` (length `p`,
/// original scale); `supports[k]` is the active set on the segment just
/// below that knot. For `lambda >= lambdas[0]` the solution is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoPath {
    pub node: usize,
    pub p: usize,
    pub lambdas: Vec<f64>,
    pub supports: Vec<Vec<usize>>,
    pub coefs: Vec<Vec<f64>>,
    /// The path stopped at `max_support` before reaching `lambda = 0`;
    /// nothing is known below the last knot.
    pub truncated: bool,
}

impl LassoPath {
    fn empty(node: usize, p: usize) -> Self {
        LassoPath {
            node,
            p,
            lambdas: Vec::new(),
            supports: Vec::new(),
            coefs: Vec::new(),
            truncated: false,
        }
    }

    /// Support of the solution at `lambda - eps` for vanishing `eps`.
    pub fn support_below(&self, lambda: f64) -> &[usize] {
        let count = self.lambdas.partition_point(|&l| l >= lambda);
        if count == 0 {
            &[]
        } else {
            &self.supports[count - 1]
        }
    }

    /// Lowest `lambda` at which the support is known.
    pub fn lambda_floor(&self) -> f64 {
        if self.truncated {
            *self.lambdas.last().expect("truncated path has knots")
        } else {
            0.0
        }
    }

    /// Solution at `lambda` by linear interpolation between knots; `None`
    /// below the computed range.
    pub fn coefficients_at(&self, lambda: f64) -> Option<Vec<f64>> {
        if lambda < 0.0 {
            return None;
        }
        if self.lambdas.is_empty() || lambda >= self.lambdas[0] {
            return Some(vec![0.0; self.p]);
        }
        let k = self.lambdas.partition_point(|&l| l >= lambda);
        if k == self.lambdas.len() {
            return None;
        }
        let (hi, lo) = (self.lambdas[k - 1], self.lambdas[k]);
        let t = (hi - lambda) / (hi - lo);
        Some(
            self.coefs[k - 1]
                .iter()
                .zip(&self.coefs[k])
                .map(|(u, v)| u + t * (v - u))
                .collect(),
        )
    }
}

/// Default support cap: `min(n - 1, p - 1)`.
pub fn default_max_support(n: usize, p: usize) -> usize {
    (n.saturating_sub(1)).min(p.saturating_sub(1))
}

const STEP_TOL: f64 = 1e-12;
const PIVOT_TOL: f64 = 1e-12;

/// Lasso path of `X_a` on the other columns. `weights` (length `p`, entry
/// `a` ignored) defaults to all ones.
pub fn lasso_path(
    x: &DataMatrix,
    a: usize,
    weights: Option<&[f64]>,
    max_support: usize,
) -> Result<LassoPath> {
    path_impl(x, a, weights, max_support, false)
}

/// Like [`lasso_path`], but a numerically collinear active set ends the path
/// (flagged `truncated`) instead of failing.
pub fn lasso_path_lenient(
    x: &DataMatrix,
    a: usize,
    weights: Option<&[f64]>,
    max_support: usize,
) -> Result<LassoPath> {
    path_impl(x, a, weights, max_support, true)
}

fn path_impl(
    x: &DataMatrix,
    a: usize,
    weights: Option<&[f64]>,
    max_support: usize,
    lenient: bool,
) -> Result<LassoPath> {
    let (n, p) = (x.n(), x.p());
    if a >= p {
        return Err(GgmError::domain(format!("node {a} out of range for p = {p}")));
    }
    if max_support + 1 > n {
        return Err(GgmError::domain(format!(
            "max_support = {max_support} exceeds n - 1 = {}",
            n - 1
        )));
    }
    if let Some(w) = weights {
        if w.len() != p {
            return Err(GgmError::domain("weight vector length must equal p"));
        }
    }
    let mut cand = Vec::new();
    let mut cand_w = Vec::new();
    for b in (0..p).filter(|&b| b != a) {
        let w = weights.map_or(1.0, |w| w[b]);
        if w.is_nan() || w <= 0.0 {
            return Err(GgmError::domain(format!("weight of column {b} must be positive, got {w}")));
        }
        if w.is_finite() {
            cand.push(b);
            cand_w.push(w);
        }
    }
    let m = cand.len();
    if m == 0 || max_support == 0 {
        return Ok(LassoPath::empty(a, p));
    }

    let y = x.matrix().column(a);
    let design = DMatrix::from_fn(n, m, |i, j| x.matrix()[(i, cand[j])] / cand_w[j]);
    let gram = design.transpose() * &design;
    let c0 = design.transpose() * y;

    let to_original = |beta: &DVector<f64>| {
        let mut v = vec![0.0; p];
        for j in 0..m {
            v[cand[j]] = beta[j] / cand_w[j];
        }
        v
    };
    let support_of = |active: &[usize]| {
        let mut s: Vec<usize> = active.iter().map(|&j| cand[j]).collect();
        s.sort_unstable();
        s
    };

    let mut path = LassoPath::empty(a, p);
    let mut beta = DVector::<f64>::zeros(m);
    let mut active: Vec<usize> = Vec::new();
    let mut is_active = vec![false; m];
    let mut signs = vec![0.0f64; m];
    let mut just_dropped: Option<usize> = None;

    // First variable: largest absolute correlation, lowest index on ties.
    let (first, cmax) = c0
        .iter()
        .enumerate()
        .fold((0, -1.0), |(bj, bc), (j, c)| if c.abs() > bc { (j, c.abs()) } else { (bj, bc) });
    let scale = y.norm() * design.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    if cmax <= 1e-14 * scale {
        return Ok(path);
    }
    active.push(first);
    is_active[first] = true;
    signs[first] = c0[first].signum();
    path.lambdas.push(2.0 * cmax);
    path.supports.push(support_of(&active));
    path.coefs.push(vec![0.0; p]);

    let max_iter = 50 * m + 100;
    for _ in 0..max_iter {
        let c = &c0 - &gram * &beta;
        let big_c = active.iter().map(|&j| c[j].abs()).fold(0.0, f64::max);
        let lambda_now = 2.0 * big_c;

        let k = active.len();
        let g_aa = DMatrix::from_fn(k, k, |i, j| gram[(active[i], active[j])]);
        let chol = g_aa.clone().cholesky().filter(|chol| {
            let l = chol.l();
            (0..k).all(|i| l[(i, i)] * l[(i, i)] > PIVOT_TOL * g_aa[(i, i)])
        });
        let Some(chol) = chol else {
            if lenient {
                log::debug!("lasso path of node {a} stops at collinear active set, lambda = {lambda_now}");
                path.truncated = true;
                return Ok(path);
            }
            return Err(GgmError::DegenerateDirection { lambda: lambda_now });
        };
        let s_a = DVector::from_fn(k, |i, _| signs[active[i]]);
        let delta = chol.solve(&s_a);
        let mut dir = DVector::<f64>::zeros(m);
        for (i, &j) in active.iter().enumerate() {
            dir[j] = delta[i];
        }
        let corr_change = &gram * &dir;

        let tol = STEP_TOL * big_c;
        let mut gamma = big_c;
        let mut event: Option<(usize, bool)> = None; // (index, is_add)
        for j in 0..m {
            if is_active[j] {
                continue;
            }
            for (num, den) in [(big_c - c[j], 1.0 - corr_change[j]), (big_c + c[j], 1.0 + corr_change[j])] {
                if den <= STEP_TOL {
                    continue;
                }
                let g = (num / den).max(0.0);
                // a variable dropped at this knot may only re-enter after a positive step
                if Some(j) == just_dropped && g <= tol {
                    continue;
                }
                if g < gamma - tol || (event.is_none() && g < gamma) {
                    gamma = g;
                    event = Some((j, true));
                }
            }
        }
        for &j in &active {
            if dir[j] == 0.0 {
                continue;
            }
            let g = -beta[j] / dir[j];
            if g > tol && g < gamma {
                gamma = g;
                event = Some((j, false));
            }
        }

        beta += &dir * gamma;
        let lambda_next = 2.0 * (big_c - gamma).max(0.0);
        just_dropped = None;
        match event {
            None => {
                path.lambdas.push(0.0);
                path.supports.push(support_of(&active));
                path.coefs.push(to_original(&beta));
                return Ok(path);
            }
            Some((j, true)) => {
                let cj = c[j] - gamma * corr_change[j];
                signs[j] = cj.signum();
                active.push(j);
                is_active[j] = true;
            }
            Some((j, false)) => {
                beta[j] = 0.0;
                active.retain(|&v| v != j);
                is_active[j] = false;
                just_dropped = Some(j);
            }
        }
        let coefs = to_original(&beta);
        let last = path.lambdas.len() - 1;
        if lambda_next >= path.lambdas[last] * (1.0 - STEP_TOL) {
            // zero-length step: simultaneous event at the same knot
            path.supports[last] = support_of(&active);
            path.coefs[last] = coefs;
        } else {
            path.lambdas.push(lambda_next);
            path.supports.push(support_of(&active));
            path.coefs.push(coefs);
        }
        if active.is_empty() {
            // every variable dropped; restart from the largest correlation
            let c = &c0 - &gram * &beta;
            let (j, cj) = c
                .iter()
                .enumerate()
                .fold((0, -1.0), |(bj, bc), (j, c)| if c.abs() > bc { (j, c.abs()) } else { (bj, bc) });
            if cj <= 1e-14 * scale {
                return Ok(path);
            }
            active.push(j);
            is_active[j] = true;
            signs[j] = c[j].signum();
        }
        if active.len() >= max_support && active.len() < m {
            path.truncated = true;
            return Ok(path);
        }
    }
    Err(GgmError::Convergence(format!(
        "LARS for node {a} did not reach lambda = 0 within {max_iter} steps"
    )))
}
