//! Per-node least squares, the graph estimator `theta_G` and the selection
//! criterion
//!
//! `Crit(G) = sum_a |X_a - X [theta_G]_a|_n^2 (1 + pen(d_a) / (n - d_a))`
//!
//! with `|v|_n^2 = |v|^2 / n`.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GgmError, Result};
use crate::graph::Graph;
use crate::penalty::PenaltyTable;

/// `n x p` observation matrix, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GgmError::domain("data matrix contains non-finite entries"));
        }
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(GgmError::domain("data matrix is empty"));
        }
        Ok(DataMatrix { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(GgmError::Parse("rows of unequal length".into()));
        }
        DataMatrix::new(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn column(&self, a: usize) -> DVector<f64> {
        self.values.column(a).into_owned()
    }

    /// Copy with every column rescaled to unit Euclidean norm, plus the original norms.
    pub fn unit_columns(&self) -> Result<(DataMatrix, Vec<f64>)> {
        let mut scaled = self.values.clone();
        let mut norms = Vec::with_capacity(self.p());
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            let norm = col.norm();
            if norm == 0.0 {
                return Err(GgmError::domain(format!("column {j} is identically zero")));
            }
            col /= norm;
            norms.push(norm);
        }
        Ok((DataMatrix { values: scaled }, norms))
    }

    /// Reads one sample per line, comma separated; `header` skips the first line.
    pub fn read_csv<R: Read>(reader: R, header: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(header)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| GgmError::Parse(format!("row {}: {s:?}: {e}", i + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        DataMatrix::from_rows(&rows)
    }

    pub fn from_csv_path(path: impl AsRef<Path>, header: bool) -> Result<Self> {
        DataMatrix::read_csv(std::fs::File::open(path)?, header)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for row in self.values.row_iter() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// `p x p` coefficient matrix with zero diagonal; row `a` holds the
/// regression coefficients of `X_a` on the other variables.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefMatrix(DMatrix<f64>);

impl CoefMatrix {
    pub fn zeros(p: usize) -> Self {
        CoefMatrix(DMatrix::zeros(p, p))
    }

    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(GgmError::domain("coefficient matrix must be square"));
        }
        if (0..m.nrows()).any(|a| m[(a, a)] != 0.0) {
            return Err(GgmError::domain("coefficient matrix must have a zero diagonal"));
        }
        Ok(CoefMatrix(m))
    }

    pub fn p(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.0[(a, b)]
    }

    pub fn set_row(&mut self, a: usize, row: &[f64]) {
        for (b, &v) in row.iter().enumerate() {
            self.0[(a, b)] = if a == b { 0.0 } else { v };
        }
    }

    pub fn row(&self, a: usize) -> Vec<f64> {
        self.0.row(a).iter().copied().collect()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn support(&self, a: usize) -> Vec<usize> {
        (0..self.p()).filter(|&b| self.0[(a, b)] != 0.0).collect()
    }
}

impl Serialize for CoefMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..self.p()).map(|a| self.row(a)).collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CoefMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let p = rows.len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(serde::de::Error::custom("coefficient matrix must be square"));
        }
        CoefMatrix::from_matrix(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
            .map_err(serde::de::Error::custom)
    }
}

/// Least-squares regression of `X_a` on the columns in `support`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFit {
    pub node: usize,
    pub support: Vec<usize>,
    /// Coefficients aligned with `support`.
    pub coef: Vec<f64>,
    /// `|X_a - X beta|_n^2`.
    pub rss: f64,
    /// The selected columns were numerically dependent; `coef` is the minimum-norm solution.
    pub rank_deficient: bool,
}

const RANK_TOL: f64 = 1e-10;

/// Projects `X_a` onto the span of the columns in `support` (QR, with an SVD
/// minimum-norm fallback on rank deficiency).
pub fn fit_neighborhood(x: &DataMatrix, a: usize, support: &[usize]) -> Result<NodeFit> {
    let (n, p) = (x.n(), x.p());
    if a >= p {
        return Err(GgmError::domain(format!("node {a} out of range for p = {p}")));
    }
    if support.contains(&a) {
        return Err(GgmError::domain(format!("node {a} cannot regress on itself")));
    }
    if let Some(&b) = support.iter().find(|&&b| b >= p) {
        return Err(GgmError::domain(format!("support node {b} out of range")));
    }
    if support.len() + 2 > n {
        return Err(GgmError::domain(format!(
            "support of size {} exceeds n - 2 = {}",
            support.len(),
            n as i64 - 2
        )));
    }
    let y = x.matrix().column(a);
    if support.is_empty() {
        return Ok(NodeFit {
            node: a,
            support: Vec::new(),
            coef: Vec::new(),
            rss: y.norm_squared() / n as f64,
            rank_deficient: false,
        });
    }
    let xs = x.matrix().select_columns(support);
    let qr = xs.clone().qr();
    let r = qr.r();
    let scale = xs.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let rank_deficient = (0..support.len()).any(|i| r[(i, i)].abs() <= RANK_TOL * scale.max(f64::MIN_POSITIVE));
    let beta = if rank_deficient {
        xs.clone()
            .svd(true, true)
            .solve(&y, RANK_TOL * scale)
            .map_err(|e| GgmError::Numeric(format!("minimum-norm solve failed: {e}")))?
    } else {
        let qty = qr.q().transpose() * y;
        r.solve_upper_triangular(&qty)
            .ok_or_else(|| GgmError::Numeric("singular triangular factor".into()))?
    };
    let resid = y - &xs * &beta;
    Ok(NodeFit {
        node: a,
        support: support.to_vec(),
        coef: beta.iter().copied().collect(),
        rss: resid.norm_squared() / n as f64,
        rank_deficient,
    })
}

/// `theta_G`: row `a` is the least-squares fit of `X_a` on its neighbours in `g`.
pub fn fit_graph(x: &DataMatrix, g: &Graph) -> Result<CoefMatrix> {
    if g.p() != x.p() {
        return Err(GgmError::domain("graph and data have different node counts"));
    }
    let mut theta = CoefMatrix::zeros(x.p());
    for a in 0..x.p() {
        let fit = fit_neighborhood(x, a, &g.neighborhood(a))?;
        for (&b, &c) in fit.support.iter().zip(&fit.coef) {
            theta.0[(a, b)] = c;
        }
    }
    Ok(theta)
}

fn check_table(x: &DataMatrix, pt: &PenaltyTable) -> Result<()> {
    if pt.n() != x.n() {
        return Err(GgmError::domain(format!(
            "penalty table built for n = {} used with n = {}",
            pt.n(),
            x.n()
        )));
    }
    Ok(())
}

/// Contribution of node `a` with neighbourhood `ne` to the criterion.
pub fn node_crit(x: &DataMatrix, a: usize, ne: &[usize], pt: &PenaltyTable) -> Result<f64> {
    check_table(x, pt)?;
    let d = ne.len();
    let pen = pt.pen(d)?;
    let fit = fit_neighborhood(x, a, ne)?;
    Ok(fit.rss * (1.0 + pen / (x.n() - d) as f64))
}

/// Per-node criterion terms, in node order.
pub fn crit_terms(x: &DataMatrix, g: &Graph, pt: &PenaltyTable) -> Result<Vec<f64>> {
    if g.max_degree() > pt.d_max() {
        return Err(GgmError::domain(format!(
            "graph degree {} exceeds the penalty table cap {}",
            g.max_degree(),
            pt.d_max()
        )));
    }
    (0..x.p()).map(|a| node_crit(x, a, &g.neighborhood(a), pt)).collect()
}

pub fn crit(x: &DataMatrix, g: &Graph, pt: &PenaltyTable) -> Result<f64> {
    Ok(crit_terms(x, g, pt)?.iter().sum())
}

/// Memoised criterion evaluation: many candidate graphs share node
/// neighbourhoods, and the criterion is a sum of per-node terms.
pub struct CritCache<'a> {
    x: &'a DataMatrix,
    pt: &'a PenaltyTable,
    terms: HashMap<(usize, Vec<usize>), f64>,
}

impl<'a> CritCache<'a> {
    pub fn new(x: &'a DataMatrix, pt: &'a PenaltyTable) -> Result<Self> {
        check_table(x, pt)?;
        Ok(CritCache { x, pt, terms: HashMap::new() })
    }

    pub fn term(&mut self, a: usize, ne: Vec<usize>) -> Result<f64> {
        if let Some(&v) = self.terms.get(&(a, ne.clone())) {
            return Ok(v);
        }
        let v = node_crit(self.x, a, &ne, self.pt)?;
        self.terms.insert((a, ne), v);
        Ok(v)
    }

    pub fn terms(&mut self, g: &Graph) -> Result<Vec<f64>> {
        if g.max_degree() > self.pt.d_max() {
            return Err(GgmError::domain(format!(
                "graph degree {} exceeds the penalty table cap {}",
                g.max_degree(),
                self.pt.d_max()
            )));
        }
        (0..g.p()).map(|a| self.term(a, g.neighborhood(a))).collect()
    }

    /// Same value, bit for bit, as [`crit`].
    pub fn crit(&mut self, g: &Graph) -> Result<f64> {
        Ok(self.terms(g)?.iter().sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penalty::{pen_table, PenaltyParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_data(n: usize, p: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DataMatrix::new(DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))).unwrap()
    }

    // Normal equations solved by explicit inversion of the Gram matrix.
    fn normal_equations(x: &DataMatrix, a: usize, s: &[usize]) -> (Vec<f64>, f64) {
        let xs = x.matrix().select_columns(s);
        let y = x.column(a);
        let gram = xs.transpose() * &xs;
        let beta = gram.try_inverse().unwrap() * xs.transpose() * &y;
        let r = &y - &xs * &beta;
        (beta.iter().copied().collect(), r.norm_squared() / x.n() as f64)
    }

    #[test]
    fn empty_support() {
        let x = random_data(12, 3, 1);
        let fit = fit_neighborhood(&x, 1, &[]).unwrap();
        assert!(fit.coef.is_empty());
        assert!((fit.rss - x.column(1).norm_squared() / 12.0).abs() < 1e-15);
    }

    #[test]
    fn duplicated_column_fits_exactly() {
        let mut m = random_data(15, 4, 2).matrix().clone();
        let c0 = m.column(0).into_owned();
        m.set_column(3, &c0);
        let x = DataMatrix::new(m).unwrap();
        let fit = fit_neighborhood(&x, 0, &[3]).unwrap();
        assert!(fit.rss < 1e-25);
        assert!((fit.coef[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_normal_equations() {
        let x = random_data(10, 4, 3);
        let s = [0, 2, 3];
        let fit = fit_neighborhood(&x, 1, &s).unwrap();
        let (beta, rss) = normal_equations(&x, 1, &s);
        for (u, v) in fit.coef.iter().zip(&beta) {
            assert!((u - v).abs() < 1e-10);
        }
        assert!((fit.rss - rss).abs() < 1e-12);
        assert!(!fit.rank_deficient);
    }

    #[test]
    fn residual_is_orthogonal_to_support() {
        let x = random_data(30, 6, 4);
        let s = [1, 3, 4];
        let fit = fit_neighborhood(&x, 0, &s).unwrap();
        let xs = x.matrix().select_columns(&s);
        let beta = DVector::from_vec(fit.coef.clone());
        let r = x.column(0) - &xs * beta;
        for &b in &s {
            let ip = x.column(b).dot(&r);
            assert!(ip.abs() <= 1e-8 * x.column(b).norm() * x.column(0).norm());
        }
    }

    #[test]
    fn collinear_support_is_flagged() {
        let mut m = random_data(12, 4, 5).matrix().clone();
        let c1 = m.column(1).into_owned();
        m.set_column(2, &(c1 * 2.0));
        let x = DataMatrix::new(m).unwrap();
        let fit = fit_neighborhood(&x, 0, &[1, 2]).unwrap();
        assert!(fit.rank_deficient);
        let single = fit_neighborhood(&x, 0, &[1]).unwrap();
        assert!((fit.rss - single.rss).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_supports() {
        let x = random_data(5, 6, 6);
        assert!(fit_neighborhood(&x, 0, &[0]).is_err());
        assert!(fit_neighborhood(&x, 0, &[1, 2, 3, 4]).is_err());
        assert!(fit_neighborhood(&x, 0, &[1, 2, 3]).is_ok());
    }

    #[test]
    fn fit_graph_rows_match_ols() {
        let x = random_data(20, 5, 7);
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (1, 4), (3, 4)]).unwrap();
        let theta = fit_graph(&x, &g).unwrap();
        for a in 0..5 {
            assert_eq!(theta.get(a, a), 0.0);
            let ne = g.neighborhood(a);
            let (beta, _) = normal_equations(&x, a, &ne);
            for b in 0..5 {
                let expected = ne.iter().position(|&v| v == b).map_or(0.0, |i| beta[i]);
                assert!((theta.get(a, b) - expected).abs() < 1e-10);
            }
        }
        assert_eq!(fit_graph(&x, &Graph::empty(5)).unwrap(), CoefMatrix::zeros(5));
    }

    #[test]
    fn crit_matches_term_by_term_oracle() {
        let x = random_data(12, 4, 8);
        let pt = pen_table(PenaltyParams::new(12, 4, 2.5, 3).unwrap()).unwrap();
        let g = Graph::from_edges(4, [(0, 1), (0, 2), (2, 3)]).unwrap();
        let mut expected = 0.0;
        for a in 0..4 {
            let ne = g.neighborhood(a);
            let (_, rss) = normal_equations(&x, a, &ne);
            let d = ne.len() as f64;
            expected += rss * (1.0 + pt.values()[ne.len()] / (12.0 - d));
        }
        let got = crit(&x, &g, &pt).unwrap();
        assert!((got - expected).abs() < 1e-12 * expected);

        let mut cache = CritCache::new(&x, &pt).unwrap();
        assert_eq!(cache.crit(&g).unwrap().to_bits(), got.to_bits());
    }

    #[test]
    fn crit_of_empty_graph() {
        let x = random_data(15, 3, 9);
        let pt = pen_table(PenaltyParams::new(15, 3, 2.5, 2).unwrap()).unwrap();
        let expected: f64 = (0..3)
            .map(|a| x.column(a).norm_squared() / 15.0 * (1.0 + pt.values()[0] / 15.0))
            .sum();
        assert!((crit(&x, &Graph::empty(3), &pt).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn zero_penalty_gives_raw_rss() {
        let x = random_data(14, 5, 10);
        let params = PenaltyParams::new(14, 5, 2.5, 3).unwrap();
        let pt = PenaltyTable::from_values(params, vec![0.0; 4]).unwrap();
        let g = Graph::from_edges(5, [(0, 1), (2, 3), (3, 4)]).unwrap();
        let rss: f64 = (0..5)
            .map(|a| fit_neighborhood(&x, a, &g.neighborhood(a)).unwrap().rss)
            .sum();
        assert!((crit(&x, &g, &pt).unwrap() - rss).abs() < 1e-14);
    }

    #[test]
    fn larger_neighbourhood_never_increases_rss() {
        let x = random_data(25, 6, 11);
        let small = fit_neighborhood(&x, 2, &[0, 4]).unwrap();
        let big = fit_neighborhood(&x, 2, &[0, 4, 5]).unwrap();
        assert!(big.rss <= small.rss + 1e-15);
    }

    #[test]
    fn crit_rejects_degree_beyond_table() {
        let x = random_data(12, 4, 12);
        let pt = pen_table(PenaltyParams::new(12, 4, 2.5, 1).unwrap()).unwrap();
        let g = Graph::from_edges(4, [(0, 1), (0, 2)]).unwrap();
        assert!(matches!(crit(&x, &g, &pt), Err(GgmError::Domain(_))));
    }

    #[test]
    fn csv_round_trip() {
        let x = random_data(4, 3, 13);
        let mut buf = Vec::new();
        x.write_csv(&mut buf).unwrap();
        let back = DataMatrix::read_csv(buf.as_slice(), false).unwrap();
        assert_eq!(back, x);
        let with_header = format!("a,b,c\n{}", String::from_utf8(buf).unwrap());
        assert_eq!(DataMatrix::read_csv(with_header.as_bytes(), true).unwrap(), x);
        assert!(DataMatrix::read_csv("1,2\n3\n".as_bytes(), false).is_err());
    }
}
