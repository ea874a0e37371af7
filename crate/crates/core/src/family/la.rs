//! Lasso-and family: and-rule graphs along the merged lasso paths.

use rayon::prelude::*;

use crate::error::Result;
use crate::family::{path_family, EdgeRule};
use crate::graph::{GraphFamily, Provenance};
use crate::lars::{default_max_support, lasso_path_lenient, LassoPath};
use crate::linmodel::DataMatrix;

/// Unweighted lasso path of every node on the others; a collinear active
/// set truncates the path of that node.
pub fn lasso_paths(x: &DataMatrix, max_support: usize) -> Result<Vec<LassoPath>> {
    (0..x.p())
        .into_par_iter()
        .map(|a| lasso_path_lenient(x, a, None, max_support))
        .collect()
}

pub fn la_family(paths: &[LassoPath], d: usize) -> Result<GraphFamily> {
    path_family(paths, d, EdgeRule::And, Provenance::La)
}

pub fn build_la(x: &DataMatrix, d: usize) -> Result<GraphFamily> {
    let paths = lasso_paths(x, default_max_support(x.n(), x.p()))?;
    la_family(&paths, d)
}
