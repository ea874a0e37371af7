//! Data-driven families of candidate graphs.

pub mod c01;
pub mod ew;
pub mod la;
pub mod qe;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{GgmError, Result};
use crate::graph::{Graph, GraphFamily, Provenance};
use crate::lars::LassoPath;

/// Family constructions understood by the selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Qe,
    C01,
    La,
    Ew,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 4] = [FamilyKind::Qe, FamilyKind::C01, FamilyKind::La, FamilyKind::Ew];

    pub fn label(self) -> &'static str {
        self.provenance().label()
    }

    pub fn provenance(self) -> Provenance {
        match self {
            FamilyKind::Qe => Provenance::Qe,
            FamilyKind::C01 => Provenance::C01,
            FamilyKind::La => Provenance::La,
            FamilyKind::Ew => Provenance::Ew,
        }
    }

    /// Parses a list such as `"qe+c01"` or `"la,ew"`.
    pub fn parse_list(s: &str) -> Result<Vec<FamilyKind>> {
        let mut out: Vec<FamilyKind> = Vec::new();
        for part in s.split(['+', ',']).map(str::trim).filter(|t| !t.is_empty()) {
            let kind = part.parse()?;
            if !out.contains(&kind) {
                out.push(kind);
            }
        }
        if out.is_empty() {
            return Err(GgmError::Parse(format!("no family named in {s:?}")));
        }
        Ok(out)
    }
}

impl FromStr for FamilyKind {
    type Err = GgmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qe" => Ok(FamilyKind::Qe),
            "c01" => Ok(FamilyKind::C01),
            "la" => Ok(FamilyKind::La),
            "ew" => Ok(FamilyKind::Ew),
            other => Err(GgmError::Parse(format!(
                "unknown family {other:?} (expected qe, c01, la or ew)"
            ))),
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// How the two directed supports of a pair combine into an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeRule {
    And,
    Or,
}

/// Graph at `lambda` from per-node supports "just below" `lambda`.
pub fn graph_at(paths: &[LassoPath], lambda: f64, rule: EdgeRule) -> Result<Graph> {
    let p = paths.len();
    let mut directed = vec![vec![false; p]; p];
    for (a, path) in paths.iter().enumerate() {
        for &b in path.support_below(lambda) {
            directed[a][b] = true;
        }
    }
    let mut g = Graph::empty(p);
    for a in 0..p {
        for b in a + 1..p {
            let edge = match rule {
                EdgeRule::And => directed[a][b] && directed[b][a],
                EdgeRule::Or => directed[a][b] || directed[b][a],
            };
            if edge {
                g.add_edge(a, b)?;
            }
        }
    }
    Ok(g)
}

/// Walks the merged breakpoints of `paths` in decreasing order, collecting
/// distinct graphs until the first one with degree above `d`.
///
/// The empty graph comes first. If a truncated path makes supports unknown
/// before the degree cap is hit, the walk stops there and the family is
/// flagged as truncated.
pub fn path_family(
    paths: &[LassoPath],
    d: usize,
    rule: EdgeRule,
    prov: Provenance,
) -> Result<GraphFamily> {
    let p = paths.len();
    for (a, path) in paths.iter().enumerate() {
        if path.node != a || path.p != p {
            return Err(GgmError::domain(format!(
                "path {a} is for node {} of {} (expected node {a} of {p})",
                path.node, path.p
            )));
        }
    }
    let mut fam = GraphFamily::new(p, d);
    fam.push(Graph::empty(p), prov)?;
    let floor = paths.iter().map(LassoPath::lambda_floor).fold(0.0, f64::max);
    let mut knots: Vec<f64> = paths
        .iter()
        .flat_map(|path| path.lambdas.iter().copied())
        .filter(|&l| l > 0.0)
        .collect();
    knots.sort_by(|x, y| y.total_cmp(x));
    knots.dedup();
    let mut hit_cap = false;
    for &lambda in &knots {
        if lambda < floor {
            break;
        }
        let g = graph_at(paths, lambda, rule)?;
        if g.max_degree() > d {
            hit_cap = true;
            break;
        }
        fam.push(g, prov)?;
    }
    fam.truncated = floor > 0.0 && !hit_cap;
    Ok(fam)
}
