//! Nested family from zero- and first-order partial correlation tests.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{GgmError, Result};
use crate::graph::{Graph, GraphFamily, Provenance};
use crate::linmodel::DataMatrix;

// Product of the two conditioning terms below which a partial correlation is
// considered undefined.
const DEGENERATE_TOL: f64 = 1e-12;

/// Correlation of `a` and `b` given `c` (or the plain correlation when `c`
/// is `None`).
pub fn partial_corr(r: &DMatrix<f64>, a: usize, b: usize, c: Option<usize>) -> Result<f64> {
    let p = r.nrows();
    if a == b || a >= p || b >= p {
        return Err(GgmError::domain(format!("invalid pair ({a}, {b}) for p = {p}")));
    }
    let Some(c) = c else {
        return Ok(r[(a, b)].clamp(-1.0, 1.0));
    };
    if c == a || c == b || c >= p {
        return Err(GgmError::domain(format!("invalid conditioning node {c} for pair ({a}, {b})")));
    }
    let (rab, rac, rbc) = (r[(a, b)], r[(a, c)], r[(b, c)]);
    let denom = (1.0 - rac * rac) * (1.0 - rbc * rbc);
    if !(denom > DEGENERATE_TOL) {
        return Err(GgmError::domain(format!(
            "partial correlation of ({a}, {b}) given {c} is undefined"
        )));
    }
    Ok(((rab - rac * rbc) / denom.sqrt()).clamp(-1.0, 1.0))
}

/// Likelihood-ratio statistic `n log(1 / (1 - r^2))` for a zero partial correlation.
pub fn lrt_statistic(n: usize, r: f64) -> f64 {
    let r2 = r * r;
    if r2 >= 1.0 {
        f64::INFINITY
    } else {
        -(n as f64) * (-r2).ln_1p()
    }
}

/// Upper tail of a chi-square variable with one degree of freedom.
pub fn chi2_1_tail(s: f64) -> f64 {
    if s <= 0.0 {
        1.0
    } else if s.is_infinite() {
        0.0
    } else {
        erfc((s / 2.0).sqrt())
    }
}

/// Pairwise `P_max(a, b)`: the largest test p-value over conditioning on
/// nothing or on any single other node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PMaxMatrix {
    p: usize,
    /// p-values, symmetric, zero diagonal.
    values: Vec<Vec<f64>>,
    /// Smallest test statistic per pair (the one attaining the maximum
    /// p-value); orders pairs even where p-values underflow.
    stats: Vec<Vec<f64>>,
    /// Pairs for which some partial correlation was undefined; their p-value is 1.
    pub degenerate: Vec<(usize, usize)>,
}

impl PMaxMatrix {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a][b]
    }

    pub fn statistic(&self, a: usize, b: usize) -> f64 {
        self.stats[a][b]
    }

    /// Builds a matrix from p-values alone (statistics are recovered by
    /// ordering on the p-value).
    pub fn from_pvalues(values: Vec<Vec<f64>>) -> Result<Self> {
        let p = values.len();
        for a in 0..p {
            if values[a].len() != p {
                return Err(GgmError::domain("P_max matrix must be square"));
            }
            for b in 0..p {
                let v = values[a][b];
                if a != b && (!(0.0..=1.0).contains(&v) || v != values[b][a]) {
                    return Err(GgmError::domain(format!(
                        "P_max({a}, {b}) must be a symmetric value in [0, 1]"
                    )));
                }
            }
        }
        let stats = values
            .iter()
            .enumerate()
            .map(|(a, row)| row.iter().enumerate().map(|(b, v)| if a == b { 0.0 } else { 1.0 - v }).collect())
            .collect();
        Ok(PMaxMatrix { p, values, stats, degenerate: Vec::new() })
    }
}

/// Uncentred correlation matrix of the columns.
pub fn correlation(x: &DataMatrix) -> Result<DMatrix<f64>> {
    for b in 0..x.p() {
        let col = x.matrix().column(b);
        let first = col[0];
        if col.iter().all(|&v| v == first) {
            return Err(GgmError::domain(format!("column {b} is constant")));
        }
    }
    let gram = x.matrix().tr_mul(x.matrix());
    let norms: Vec<f64> = (0..x.p()).map(|b| gram[(b, b)].sqrt()).collect();
    Ok(DMatrix::from_fn(x.p(), x.p(), |a, b| {
        if a == b {
            1.0
        } else {
            gram[(a, b)] / (norms[a] * norms[b])
        }
    }))
}

pub fn pmax(x: &DataMatrix) -> Result<PMaxMatrix> {
    let (n, p) = (x.n(), x.p());
    if n < 4 {
        return Err(GgmError::domain(format!("P_max needs n >= 4, got {n}")));
    }
    let r = correlation(x)?;
    let mut values = vec![vec![0.0; p]; p];
    let mut stats = vec![vec![0.0; p]; p];
    let mut degenerate = Vec::new();
    for a in 0..p {
        for b in a + 1..p {
            let mut min_r2 = partial_corr(&r, a, b, None)?.powi(2);
            let mut flagged = false;
            for c in (0..p).filter(|&c| c != a && c != b) {
                match partial_corr(&r, a, b, Some(c)) {
                    Ok(rc) => min_r2 = min_r2.min(rc * rc),
                    Err(_) => flagged = true,
                }
            }
            let (stat, pv) = if flagged {
                degenerate.push((a, b));
                (0.0, 1.0)
            } else {
                let s = lrt_statistic(n, min_r2.sqrt());
                (s, chi2_1_tail(s))
            };
            values[a][b] = pv;
            values[b][a] = pv;
            stats[a][b] = stat;
            stats[b][a] = stat;
        }
    }
    if !degenerate.is_empty() {
        log::warn!("{} pairs have undefined partial correlations; their P_max is set to 1", degenerate.len());
    }
    Ok(PMaxMatrix { p, values, stats, degenerate })
}

/// Graphs `{(a, b) : P_max(a, b) <= alpha}` for increasing thresholds,
/// starting from the empty graph and stopping before the first graph of
/// degree above `d`.
pub fn c01_family(pm: &PMaxMatrix, d: usize) -> Result<GraphFamily> {
    let p = pm.p();
    let mut pairs: Vec<(f64, f64, usize, usize)> = Vec::new();
    for a in 0..p {
        for b in a + 1..p {
            pairs.push((pm.get(a, b), pm.statistic(a, b), a, b));
        }
    }
    // Increasing p-value, ties in p-value split by decreasing statistic.
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(y.1.total_cmp(&x.1)).then((x.2, x.3).cmp(&(y.2, y.3))));
    let mut fam = GraphFamily::new(p, d);
    let mut g = Graph::empty(p);
    fam.push(g.clone(), Provenance::C01)?;
    let mut i = 0;
    while i < pairs.len() {
        let key = (pairs[i].0, pairs[i].1);
        while i < pairs.len() && (pairs[i].0, pairs[i].1) == key {
            g.add_edge(pairs[i].2, pairs[i].3)?;
            i += 1;
        }
        if g.max_degree() > d {
            break;
        }
        fam.push(g.clone(), Provenance::C01)?;
    }
    Ok(fam)
}

pub fn build_c01(x: &DataMatrix, d: usize) -> Result<GraphFamily> {
    c01_family(&pmax(x)?, d)
}
