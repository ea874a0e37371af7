//! Graph selection for Gaussian graphical models.
//!
//! A two-stage estimator: build data-driven families of candidate graphs
//! (quasi-exhaustive, 0-1 partial correlation, lasso-and, exponential-weights
//! adaptive lasso), then pick the candidate minimising a penalised sum of
//! per-node residual variances. A simulator and an FDR/power/MSEP harness
//! are included for benchmarking.

pub mod bench;
pub mod error;
pub mod family;
pub mod graph;
pub mod lars;
pub mod linmodel;
pub mod metrics;
pub mod penalty;
pub mod rng;
pub mod selector;
pub mod simulate;
pub mod special;

pub use error::{GgmError, Result};
pub use family::ew::EWParams;
pub use family::FamilyKind;
pub use graph::{degree_profile, family_union, Graph, GraphFamily, GraphJson, Provenance};
pub use linmodel::{crit, fit_graph, fit_neighborhood, CoefMatrix, CritCache, DataMatrix, NodeFit};
pub use penalty::{dkhi, edkhi, pen_table, PenaltyParams, PenaltyTable};
pub use special::fisher_tail;
pub use selector::{ggmselect, select_my_fam, SelectOptions, SelectionResult};
pub use metrics::{fdr_power, msep};
pub use simulate::{calibrate_eta, gen_cov, sample, CovModel, SimParams};
