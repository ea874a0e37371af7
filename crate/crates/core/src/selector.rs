//! Graph selection: assemble candidate families and minimise the criterion.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{GgmError, Result};
use crate::family::{c01, ew, la, qe, FamilyKind};
use crate::graph::{family_union, Graph, GraphFamily, Provenance};
use crate::linmodel::{crit_terms, CritCache, DataMatrix};
use crate::penalty::{pen_table, PenaltyParams, PenaltyTable};

pub const DEFAULT_K: f64 = 2.5;

/// Inputs of [`ggmselect`] besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectOptions {
    pub families: Vec<FamilyKind>,
    #[serde(rename = "K")]
    pub k: f64,
    pub d_max: usize,
    /// Langevin settings for the EW family; `None` uses the defaults for the
    /// data size with `seed`.
    pub ew: Option<ew::EWParams>,
    pub seed: u64,
    pub qe_cap: usize,
}

impl SelectOptions {
    pub fn new(families: Vec<FamilyKind>, k: f64, d_max: usize, seed: u64) -> Self {
        SelectOptions { families, k, d_max, ew: None, seed, qe_cap: qe::DEFAULT_CAP }
    }

    pub fn ew_params(&self, n: usize, p: usize) -> ew::EWParams {
        self.ew.clone().unwrap_or_else(|| ew::EWParams::paper_defaults(n, p, self.seed))
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.k > 1.0) || !self.k.is_finite() {
            return Err(GgmError::domain(format!("K must be a finite number > 1, got {}", self.k)));
        }
        if self.d_max < 1 || self.d_max + 3 > n {
            return Err(GgmError::domain(format!(
                "degree cap must satisfy 1 <= D <= n - 3 = {}, got {}",
                n as i64 - 3,
                self.d_max
            )));
        }
        if self.families.is_empty() {
            return Err(GgmError::domain("at least one family must be requested"));
        }
        Ok(())
    }
}

/// Selected graph and the values behind the choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub graph: Graph,
    pub crit: f64,
    pub per_node_crit: Vec<f64>,
    /// Family that first produced the selected graph.
    pub provenance: Provenance,
    pub family_size: usize,
    /// Per requested family: whether its construction stopped early.
    pub truncated: BTreeMap<String, bool>,
}

/// Builds one family with degree cap `d`.
pub fn build_family(
    kind: FamilyKind,
    x: &DataMatrix,
    d: usize,
    pt: &PenaltyTable,
    opts: &SelectOptions,
) -> Result<GraphFamily> {
    match kind {
        FamilyKind::Qe => qe::build_qe(x, d, pt, opts.qe_cap),
        FamilyKind::C01 => c01::build_c01(x, d),
        FamilyKind::La => la::build_la(x, d),
        FamilyKind::Ew => ew::build_ew(x, d, &opts.ew_params(x.n(), x.p())),
    }
}

/// Penalty table shared by all families for these options.
pub fn penalty_for(x: &DataMatrix, opts: &SelectOptions) -> Result<PenaltyTable> {
    pen_table(PenaltyParams::new(x.n(), x.p(), opts.k, opts.d_max)?)
}

/// Union of the requested families, each built with the effective degree
/// cap `min(D, p - 1)`.
pub fn assemble_family(
    x: &DataMatrix,
    opts: &SelectOptions,
    pt: &PenaltyTable,
) -> Result<(GraphFamily, BTreeMap<String, bool>)> {
    opts.validate(x.n())?;
    let d = pt.d_max();
    let mut fams = Vec::with_capacity(opts.families.len());
    let mut truncated = BTreeMap::new();
    for &kind in &opts.families {
        let fam = build_family(kind, x, d, pt, opts)?;
        log::info!("{kind} family: {} graphs{}", fam.len(), if fam.truncated { " (truncated)" } else { "" });
        truncated.insert(kind.label().to_string(), fam.truncated);
        fams.push(fam);
    }
    let mut union = family_union(&fams.iter().collect::<Vec<_>>())?;
    if !union.contains(&Graph::empty(x.p())) {
        union.push(Graph::empty(x.p()), Provenance::User)?;
    }
    Ok((union, truncated))
}

/// Minimiser of the criterion over `fam`; ties go to fewer edges, then to the
/// canonical edge order.
pub fn select_from(x: &DataMatrix, fam: &GraphFamily, pt: &PenaltyTable) -> Result<(usize, f64)> {
    if fam.is_empty() {
        return Err(GgmError::domain("cannot select from an empty family"));
    }
    let mut cache = CritCache::new(x, pt)?;
    let mut best: Option<(usize, f64)> = None;
    for (i, g) in fam.graphs().iter().enumerate() {
        let c = cache.crit(g)?;
        if !c.is_finite() {
            return Err(GgmError::Numeric(format!("criterion is not finite for {g:?}")));
        }
        let better = match best {
            None => true,
            Some((bi, bc)) => c < bc || (c == bc && *g < fam.graphs()[bi]),
        };
        if better {
            best = Some((i, c));
        }
    }
    Ok(best.expect("nonempty family"))
}

fn result_for(
    x: &DataMatrix,
    fam: &GraphFamily,
    pt: &PenaltyTable,
    truncated: BTreeMap<String, bool>,
) -> Result<SelectionResult> {
    let (i, _) = select_from(x, fam, pt)?;
    let graph = fam.graphs()[i].clone();
    let per_node_crit = crit_terms(x, &graph, pt)?;
    Ok(SelectionResult {
        crit: per_node_crit.iter().sum(),
        per_node_crit,
        provenance: fam.provenance(i),
        family_size: fam.len(),
        truncated,
        graph,
    })
}

pub fn ggmselect(x: &DataMatrix, opts: &SelectOptions) -> Result<SelectionResult> {
    opts.validate(x.n())?;
    let pt = penalty_for(x, opts)?;
    let (fam, truncated) = assemble_family(x, opts, &pt)?;
    result_for(x, &fam, &pt, truncated)
}

/// Selection over a caller-supplied family, with the penalty table capped
/// at the family's largest degree.
pub fn select_my_fam(x: &DataMatrix, fam: &GraphFamily, k: f64) -> Result<SelectionResult> {
    if fam.is_empty() {
        return Err(GgmError::domain("family is empty"));
    }
    if fam.p() != x.p() {
        return Err(GgmError::domain(format!(
            "family has p = {} but the data have p = {}",
            fam.p(),
            x.p()
        )));
    }
    if let Some(g) = fam.graphs().iter().find(|g| g.max_degree() + 3 > x.n()) {
        return Err(GgmError::domain(format!(
            "graph {g:?} has degree {} above n - 3 = {}",
            g.max_degree(),
            x.n() as i64 - 3
        )));
    }
    let pt = pen_table(PenaltyParams::new(x.n(), x.p(), k, fam.max_member_degree())?)?;
    let mut truncated = BTreeMap::new();
    truncated.insert(Provenance::User.label().to_string(), fam.truncated);
    result_for(x, fam, &pt, truncated)
}
