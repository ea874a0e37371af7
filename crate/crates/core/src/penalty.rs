//! Penalty function of the selection criterion.
//!
//! `pen(d) = K (n-d)/(n-d-1) EDKhi[d+1, n-d-1, 1/(C(p-1,d) (d+1)^2)]`, where
//! `EDKhi` inverts the decreasing function
//! `DKhi(d, N, x) = P(F_{d+2,N} >= x/(d+2)) - (x/d) P(F_{d,N+2} >= (N+2)x/(N d))`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{GgmError, Result};
use crate::special::fisher_tail;

const MAX_DOUBLINGS: usize = 60;
const MAX_BISECTIONS: usize = 200;
const REL_WIDTH: f64 = 1e-8;

/// `DKhi(d, N, x)`.
pub fn dkhi(d: f64, big_n: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(GgmError::domain(format!("DKhi needs x > 0, got {x}")));
    }
    if !(d >= 1.0 && big_n >= 1.0) {
        return Err(GgmError::domain(format!(
            "DKhi needs d >= 1 and N >= 1, got ({d}, {big_n})"
        )));
    }
    let first = fisher_tail(d + 2.0, big_n, x / (d + 2.0))?;
    let second = fisher_tail(d, big_n + 2.0, (big_n + 2.0) * x / (big_n * d))?;
    Ok(first - x / d * second)
}

/// Inverse of `x -> DKhi(d, N, x)`: returns `x` with `DKhi(d, N, x) = q`.
///
/// Bracketed bisection: the upper end starts at `d + N` and doubles until
/// `DKhi` drops below `q`.
pub fn edkhi(d: f64, big_n: f64, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(GgmError::domain(format!("EDKhi needs 0 < q < 1, got {q}")));
    }
    let mut hi = (d + big_n).max(1.0);
    let mut doublings = 0;
    while dkhi(d, big_n, hi)? >= q {
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(GgmError::Convergence(format!(
                "EDKhi bracket for (d = {d}, N = {big_n}, q = {q:e}) exceeded {hi:e}"
            )));
        }
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= REL_WIDTH * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if dkhi(d, big_n, mid)? >= q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `ln C(m, k)` through log-gamma.
pub fn ln_binomial(m: usize, k: usize) -> f64 {
    if k > m {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == m {
        return 0.0;
    }
    ln_gamma(m as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((m - k) as f64 + 1.0)
}

/// Quantile level `1 / (C(p-1, d) (d+1)^2)` used for `pen(d)`.
pub fn penalty_level(p: usize, d: usize) -> f64 {
    (-(ln_binomial(p - 1, d) + 2.0 * ((d + 1) as f64).ln())).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    pub n: usize,
    pub p: usize,
    pub k: f64,
    pub d_max: usize,
}

impl PenaltyParams {
    pub fn new(n: usize, p: usize, k: f64, d_max: usize) -> Result<Self> {
        let params = PenaltyParams { n, p, k, d_max };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 9 {
            return Err(GgmError::domain(format!("penalty needs n >= 9, got {}", self.n)));
        }
        if self.p < 2 {
            return Err(GgmError::domain(format!("penalty needs p >= 2, got {}", self.p)));
        }
        if !(self.k > 1.0) || !self.k.is_finite() {
            return Err(GgmError::domain(format!("penalty constant K must exceed 1, got {}", self.k)));
        }
        if self.d_max + 3 > self.n {
            return Err(GgmError::domain(format!(
                "d_max = {} exceeds n - 3 = {}",
                self.d_max,
                self.n as i64 - 3
            )));
        }
        Ok(())
    }

    /// Largest degree the table can hold: no node has more than `p - 1` neighbours.
    pub fn effective_d_max(&self) -> usize {
        self.d_max.min(self.p - 1)
    }
}

/// Precomputed `pen(d)` for `d = 0..=d_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyTable {
    pub params: PenaltyParams,
    values: Vec<f64>,
}

impl PenaltyTable {
    /// Degree cap of the table.
    pub fn d_max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn pen(&self, d: usize) -> Result<f64> {
        self.values.get(d).copied().ok_or_else(|| {
            GgmError::domain(format!(
                "degree {d} exceeds the penalty table cap {}",
                self.d_max()
            ))
        })
    }

    /// Table with caller-supplied values (e.g. all zeros to recover the raw
    /// residual sum).
    pub fn from_values(params: PenaltyParams, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() + 2 > params.n {
            return Err(GgmError::domain("penalty table length must be in 1..=n-2"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(GgmError::domain("penalty values must be finite and nonnegative"));
        }
        Ok(PenaltyTable { params, values })
    }
}

/// `pen(d)` for a single degree.
pub fn pen_value(n: usize, p: usize, k: f64, d: usize) -> Result<f64> {
    if d + 3 > n {
        return Err(GgmError::domain(format!("pen({d}) needs d <= n - 3 (n = {n})")));
    }
    let level = penalty_level(p, d);
    // At d = 0 the level is exactly 1 and EDKhi(1, n-1, 1) = 0 (DKhi -> 1 as x -> 0+).
    let edk = if level >= 1.0 {
        0.0
    } else if level <= 0.0 {
        return Err(GgmError::Numeric(format!(
            "penalty level underflows for p = {p}, d = {d}"
        )));
    } else {
        edkhi((d + 1) as f64, (n - d - 1) as f64, level)?
    };
    let n = n as f64;
    let d = d as f64;
    Ok(k * (n - d) / (n - d - 1.0) * edk)
}

pub fn pen_table(params: PenaltyParams) -> Result<PenaltyTable> {
    params.validate()?;
    let values = (0..=params.effective_d_max())
        .map(|d| pen_value(params.n, params.p, params.k, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(PenaltyTable { params, values })
}
