//! Quasi-exhaustive family: per-node penalised subset selection, and/or
//! graphs, and every graph lying between them.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{GgmError, Result};
use crate::graph::{Graph, GraphFamily, Provenance};
use crate::linmodel::{CritCache, DataMatrix};
use crate::penalty::PenaltyTable;

/// Default bound on the number of enumerated graphs.
pub const DEFAULT_CAP: usize = 100_000;

// Relative pivot threshold below which a column is treated as lying in the
// span of the current subset.
const PIVOT_TOL: f64 = 1e-10;
// Residuals below this fraction of |X_a|^2 count as an exact fit.
const ZERO_RSS: f64 = 1e-13;

fn check_degree(x: &DataMatrix, d: usize, pt: &PenaltyTable) -> Result<()> {
    if pt.n() != x.n() {
        return Err(GgmError::domain(format!(
            "penalty table built for n = {} used with n = {}",
            pt.n(),
            x.n()
        )));
    }
    if d > pt.d_max() || d + 3 > x.n() {
        return Err(GgmError::domain(format!(
            "degree cap {d} exceeds min(table cap {}, n - 3 = {})",
            pt.d_max(),
            x.n() as i64 - 3
        )));
    }
    Ok(())
}

struct SubsetSearch<'a> {
    gram: &'a DMatrix<f64>,
    n: f64,
    d: usize,
    factors: Vec<f64>,
    cands: Vec<usize>,
    gy: Vec<f64>,
    zero_rss: f64,
    // Current subset with its Cholesky rows and projected response.
    stack: Vec<usize>,
    chol: Vec<Vec<f64>>,
    z: Vec<f64>,
    best_score: f64,
    best: Vec<usize>,
}

impl SubsetSearch<'_> {
    fn offer(&mut self, score: f64) {
        let better = score < self.best_score
            || (score == self.best_score && self.stack.len() < self.best.len());
        if better {
            self.best_score = score;
            self.best.clone_from(&self.stack);
        }
    }

    // Depth-first over increasing index sequences: same-size subsets are
    // visited in lexicographic order, so strict improvement keeps the
    // lexicographically smallest minimiser.
    fn descend(&mut self, start: usize, rss: f64) {
        let k = self.stack.len();
        for i in start..self.cands.len() {
            let j = self.cands[i];
            let mut l = Vec::with_capacity(k + 1);
            for r in 0..k {
                let row = &self.chol[r];
                let mut s = self.gram[(self.stack[r], j)];
                for (c, lc) in l.iter().enumerate() {
                    s -= row[c] * lc;
                }
                l.push(s / row[r]);
            }
            let gjj = self.gram[(j, j)];
            let piv2 = gjj - l.iter().map(|v| v * v).sum::<f64>();
            if !(piv2 > PIVOT_TOL * gjj) {
                continue;
            }
            let piv = piv2.sqrt();
            let zj = (self.gy[j] - l.iter().zip(&self.z).map(|(a, b)| a * b).sum::<f64>()) / piv;
            let new_rss = (rss - zj * zj / self.n).max(0.0);
            l.push(piv);
            self.stack.push(j);
            self.offer(new_rss * self.factors[k + 1]);
            if k + 1 < self.d && new_rss > self.zero_rss {
                self.chol.push(l);
                self.z.push(zj);
                self.descend(i + 1, new_rss);
                self.chol.pop();
                self.z.pop();
            }
            self.stack.pop();
        }
    }
}

fn search(x: &DataMatrix, gram: &DMatrix<f64>, a: usize, d: usize, pt: &PenaltyTable) -> Result<Vec<usize>> {
    let (n, p) = (x.n(), x.p());
    let nf = n as f64;
    let factors = (0..=d)
        .map(|k| Ok(1.0 + pt.pen(k)? / (n - k) as f64))
        .collect::<Result<Vec<_>>>()?;
    let y = x.matrix().column(a);
    let yy = y.norm_squared();
    let rss0 = yy / nf;
    let gy: Vec<f64> = (0..p).map(|b| x.matrix().column(b).dot(&y)).collect();
    let mut s = SubsetSearch {
        gram,
        n: nf,
        d,
        factors,
        cands: (0..p).filter(|&b| b != a).collect(),
        gy,
        zero_rss: ZERO_RSS * rss0,
        stack: Vec::with_capacity(d),
        chol: Vec::with_capacity(d),
        z: Vec::with_capacity(d),
        best_score: f64::INFINITY,
        best: Vec::new(),
    };
    s.offer(rss0 * s.factors[0]);
    if d > 0 && rss0 > 0.0 {
        s.descend(0, rss0);
    }
    Ok(s.best)
}

/// Penalised best subset of size at most `d` for node `a`.
///
/// Ties go to the smaller subset, then the lexicographically smaller one.
pub fn select_neighborhood(x: &DataMatrix, a: usize, d: usize, pt: &PenaltyTable) -> Result<Vec<usize>> {
    check_degree(x, d, pt)?;
    if a >= x.p() {
        return Err(GgmError::domain(format!("node {a} out of range for p = {}", x.p())));
    }
    let gram = x.matrix().tr_mul(x.matrix());
    search(x, &gram, a, d, pt)
}

/// [`select_neighborhood`] for every node.
pub fn select_neighborhoods(x: &DataMatrix, d: usize, pt: &PenaltyTable) -> Result<Vec<Vec<usize>>> {
    check_degree(x, d, pt)?;
    let gram = x.matrix().tr_mul(x.matrix());
    (0..x.p())
        .into_par_iter()
        .map(|a| search(x, &gram, a, d, pt))
        .collect()
}

/// And-rule and or-rule graphs of a neighbourhood map.
pub fn and_or_graphs(neighborhoods: &[Vec<usize>]) -> Result<(Graph, Graph)> {
    let p = neighborhoods.len();
    let mut directed = vec![vec![false; p]; p];
    for (a, ne) in neighborhoods.iter().enumerate() {
        for &b in ne {
            if b == a || b >= p {
                return Err(GgmError::domain(format!("invalid neighbour {b} of node {a}")));
            }
            directed[a][b] = true;
        }
    }
    let mut g_and = Graph::empty(p);
    let mut g_or = Graph::empty(p);
    for a in 0..p {
        for b in a + 1..p {
            if directed[a][b] && directed[b][a] {
                g_and.add_edge(a, b)?;
            }
            if directed[a][b] || directed[b][a] {
                g_or.add_edge(a, b)?;
            }
        }
    }
    Ok((g_and, g_or))
}

fn toggles(g_and: &Graph, g_or: &Graph) -> Result<Vec<(usize, usize)>> {
    if !g_and.is_subgraph_of(g_or) {
        return Err(GgmError::domain("and-graph must be contained in the or-graph"));
    }
    Ok(g_or.edges().filter(|&(a, b)| !g_and.has_edge(a, b)).collect())
}

// Depth-first enumeration, "edge absent" branch first; returns false once
// more than `cap` graphs would be produced.
fn enumerate(
    g: &mut Graph,
    toggles: &[(usize, usize)],
    i: usize,
    d: usize,
    cap: usize,
    out: &mut Vec<Graph>,
) -> bool {
    if i == toggles.len() {
        if out.len() >= cap {
            return false;
        }
        out.push(g.clone());
        return true;
    }
    if !enumerate(g, toggles, i + 1, d, cap, out) {
        return false;
    }
    let (a, b) = toggles[i];
    if g.degree(a) < d && g.degree(b) < d {
        g.add_edge(a, b).expect("valid toggle");
        let ok = enumerate(g, toggles, i + 1, d, cap, out);
        g.remove_edge(a, b).expect("valid toggle");
        return ok;
    }
    true
}

/// All graphs between `g_and` and `g_or` with degree at most `d`.
///
/// Returns `None` when more than `cap` graphs qualify.
pub fn enumerate_between(g_and: &Graph, g_or: &Graph, d: usize, cap: usize) -> Result<Option<Vec<Graph>>> {
    let toggles = toggles(g_and, g_or)?;
    if g_and.max_degree() > d {
        return Ok(Some(Vec::new()));
    }
    let mut out = Vec::new();
    let mut g = g_and.clone();
    Ok(enumerate(&mut g, &toggles, 0, d, cap, &mut out).then_some(out))
}

/// Greedy single-edge toggles from `g_and`, within `g_or` and the degree cap,
/// while the criterion strictly decreases. Returns the visited graphs.
pub fn stepwise_path<F>(g_and: &Graph, g_or: &Graph, d: usize, mut crit: F) -> Result<Vec<Graph>>
where
    F: FnMut(&Graph) -> Result<f64>,
{
    let toggles = toggles(g_and, g_or)?;
    if g_and.max_degree() > d {
        return Ok(Vec::new());
    }
    let mut current = g_and.clone();
    let mut current_crit = crit(&current)?;
    let mut visited = vec![current.clone()];
    loop {
        let mut best: Option<(f64, Graph)> = None;
        for &(a, b) in &toggles {
            let mut cand = current.clone();
            if cand.has_edge(a, b) {
                cand.remove_edge(a, b)?;
            } else if cand.degree(a) < d && cand.degree(b) < d {
                cand.add_edge(a, b)?;
            } else {
                continue;
            }
            let c = crit(&cand)?;
            if c < current_crit && best.as_ref().is_none_or(|(bc, _)| c < *bc) {
                best = Some((c, cand));
            }
        }
        match best {
            Some((c, g)) => {
                current_crit = c;
                current = g;
                visited.push(current.clone());
            }
            None => return Ok(visited),
        }
    }
}

/// QE family between `g_and` and `g_or`; falls back to [`stepwise_path`] on
/// the criterion when more than `cap` graphs qualify, flagging the result.
pub fn qe_family(
    g_and: &Graph,
    g_or: &Graph,
    d: usize,
    cap: usize,
    x: &DataMatrix,
    pt: &PenaltyTable,
) -> Result<GraphFamily> {
    if g_and.p() != g_or.p() || g_and.p() != x.p() {
        return Err(GgmError::domain("graphs and data have different node counts"));
    }
    let mut fam = GraphFamily::new(g_and.p(), d);
    match enumerate_between(g_and, g_or, d, cap)? {
        Some(graphs) => {
            for g in graphs {
                fam.push(g, Provenance::Qe)?;
            }
        }
        None => {
            log::warn!("quasi-exhaustive family exceeds {cap} graphs; using stepwise search");
            let mut cache = CritCache::new(x, pt)?;
            for g in stepwise_path(g_and, g_or, d, |g| cache.crit(g))? {
                fam.push(g, Provenance::Qe)?;
            }
            fam.truncated = true;
        }
    }
    Ok(fam)
}

/// Full QE construction from data.
pub fn build_qe(x: &DataMatrix, d: usize, pt: &PenaltyTable, cap: usize) -> Result<GraphFamily> {
    let ne = select_neighborhoods(x, d, pt)?;
    let (g_and, g_or) = and_or_graphs(&ne)?;
    qe_family(&g_and, &g_or, d, cap, x, pt)
}
