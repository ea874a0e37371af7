//! Simulation grid: models x data replicates x selectors, with per-run and
//! aggregate tables.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GgmError, Result};
use crate::family::ew::EWParams;
use crate::family::{qe, FamilyKind};
use crate::linmodel::fit_graph;
use crate::metrics::{fdr_power, msep};
use crate::rng::{derive, purpose};
use crate::selector::{ggmselect, SelectOptions};
use crate::simulate::{calibrate_eta, gen_cov, sample, CovModel, SimParams};

fn default_trials() -> usize {
    100
}

fn default_cap() -> usize {
    qe::DEFAULT_CAP
}

/// Experiment grid. `selectors` entries are family lists such as `"qe"` or
/// `"c01+la"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub p: usize,
    pub n: Vec<usize>,
    #[serde(rename = "Is")]
    pub is: Vec<f64>,
    #[serde(rename = "NG")]
    pub ng: usize,
    #[serde(rename = "NX")]
    pub nx: usize,
    pub selectors: Vec<String>,
    #[serde(rename = "K")]
    pub k: f64,
    pub d_max: usize,
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub calibration_trials: usize,
    #[serde(default = "default_cap")]
    pub qe_cap: usize,
    /// Overrides for the EW sampler; the seed field is replaced per run.
    #[serde(default)]
    pub ew: Option<EWParams>,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<Vec<Vec<FamilyKind>>> {
        if self.p < 2 || self.n.is_empty() || self.is.is_empty() || self.ng == 0 || self.nx == 0 {
            return Err(GgmError::domain("bench needs p >= 2 and nonempty n, Is, NG, NX"));
        }
        if self.selectors.is_empty() {
            return Err(GgmError::domain("bench needs at least one selector"));
        }
        for &n in &self.n {
            SelectOptions::new(vec![FamilyKind::Qe], self.k, self.d_max, 0).validate(n)?;
        }
        if self.is.iter().any(|v| !(*v >= 0.0)) {
            return Err(GgmError::domain("sparsity indices must be >= 0"));
        }
        self.selectors.iter().map(|s| FamilyKind::parse_list(s)).collect()
    }
}

/// Canonical label of a selector (`"qe+c01"`).
pub fn selector_label(kinds: &[FamilyKind]) -> String {
    kinds.iter().map(|k| k.label()).collect::<Vec<_>>().join("+")
}

/// One selector applied to one data set. Metric fields are empty when the
/// run failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub run: usize,
    pub graph_id: usize,
    pub rep: usize,
    pub family: String,
    pub fdr: Option<f64>,
    pub power: Option<f64>,
    pub msep: Option<f64>,
    pub crit: Option<f64>,
    pub n: usize,
    #[serde(rename = "is")]
    pub is: f64,
}

impl RunRow {
    fn ok(&self) -> bool {
        self.fdr.is_some()
    }

    /// Selected graph equals the true graph.
    pub fn exact(&self) -> Option<bool> {
        Some(self.fdr? == 0.0 && self.power? == 1.0)
    }
}

/// Means over graphs of per-graph means, with standard errors across graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggRow {
    #[serde(rename = "is")]
    pub is: f64,
    pub n: usize,
    pub family: String,
    pub graphs: usize,
    pub runs: usize,
    pub failures: usize,
    pub fdr_mean: f64,
    pub fdr_se: f64,
    pub power_mean: f64,
    pub power_se: f64,
    pub msep_mean: f64,
    pub msep_se: f64,
    pub exact_mean: f64,
    pub exact_se: f64,
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / k;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Aggregate table recomputed from per-run rows, one row per
/// `(is, n, family)` in order of first appearance.
pub fn aggregate(rows: &[RunRow]) -> Vec<AggRow> {
    let mut cells: Vec<(f64, usize, String)> = Vec::new();
    for r in rows {
        let key = (r.is, r.n, r.family.clone());
        if !cells.contains(&key) {
            cells.push(key);
        }
    }
    cells
        .into_iter()
        .map(|(is, n, family)| {
            let cell: Vec<&RunRow> = rows.iter().filter(|r| r.is == is && r.n == n && r.family == family).collect();
            let mut graph_ids: Vec<usize> = cell.iter().map(|r| r.graph_id).collect();
            graph_ids.sort_unstable();
            graph_ids.dedup();
            let per_graph = |f: &dyn Fn(&RunRow) -> f64| -> Vec<f64> {
                graph_ids
                    .iter()
                    .filter_map(|&g| {
                        let vals: Vec<f64> = cell.iter().filter(|r| r.graph_id == g && r.ok()).map(|r| f(r)).collect();
                        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
                    })
                    .collect()
            };
            let fdr = per_graph(&|r| r.fdr.unwrap());
            let power = per_graph(&|r| r.power.unwrap());
            let msep = per_graph(&|r| r.msep.unwrap());
            let exact = per_graph(&|r| if r.exact().unwrap() { 1.0 } else { 0.0 });
            let (fdr_mean, fdr_se) = mean_se(&fdr);
            let (power_mean, power_se) = mean_se(&power);
            let (msep_mean, msep_se) = mean_se(&msep);
            let (exact_mean, exact_se) = mean_se(&exact);
            AggRow {
                is,
                n,
                family,
                graphs: fdr.len(),
                runs: cell.iter().filter(|r| r.ok()).count(),
                failures: cell.iter().filter(|r| !r.ok()).count(),
                fdr_mean,
                fdr_se,
                power_mean,
                power_se,
                msep_mean,
                msep_se,
                exact_mean,
                exact_se,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub run: usize,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: BenchConfig,
    pub root_seed: u64,
    /// Substream tag paths used under the root seed.
    pub seed_scheme: Vec<String>,
    /// Calibrated fill probability per sparsity index.
    pub eta: Vec<(f64, f64)>,
    pub runs: usize,
    pub failures: Vec<Failure>,
    pub wall_time_calibration_s: f64,
    pub wall_time_runs_s: f64,
    pub threads: usize,
}

pub struct BenchReport {
    pub rows: Vec<RunRow>,
    pub aggregate: Vec<AggRow>,
    pub manifest: Manifest,
}

impl BenchReport {
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("runs.csv"))?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("aggregate.csv"))?;
        for r in &self.aggregate {
            w.serialize(r)?;
        }
        w.flush()?;
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&self.manifest)?)?;
        Ok(())
    }
}

pub fn read_runs(path: &Path) -> Result<Vec<RunRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(GgmError::from)).collect()
}

struct Task {
    is_idx: usize,
    graph_id: usize,
    n: usize,
    rep: usize,
}

fn run_task(
    cfg: &BenchConfig,
    selectors: &[Vec<FamilyKind>],
    model: &CovModel,
    t: &Task,
) -> Vec<std::result::Result<(f64, f64, f64, f64), String>> {
    let tags = [t.is_idx as u64, t.graph_id as u64, t.n as u64, t.rep as u64];
    let data_seed = derive(cfg.seed, &[purpose::SAMPLE, tags[0], tags[1], tags[2], tags[3]]);
    let x = match sample(model, t.n, data_seed) {
        Ok(x) => x,
        Err(e) => return vec![Err(e.to_string()); selectors.len()],
    };
    selectors
        .iter()
        .enumerate()
        .map(|(s, kinds)| {
            let seed = derive(cfg.seed, &[purpose::LANGEVIN, tags[0], tags[1], tags[2], tags[3], s as u64]);
            let mut opts = SelectOptions::new(kinds.clone(), cfg.k, cfg.d_max, seed);
            opts.qe_cap = cfg.qe_cap;
            opts.ew = cfg.ew.clone().map(|e| EWParams { seed, ..e });
            let eval = || -> Result<(f64, f64, f64, f64)> {
                let res = ggmselect(&x, &opts)?;
                let (fdr, power) = fdr_power(&model.g_true, &res.graph)?;
                let theta = fit_graph(&x, &res.graph)?;
                Ok((fdr, power, msep(&model.sigma, &model.theta_true, &theta)?, res.crit))
            };
            eval().map_err(|e| e.to_string())
        })
        .collect()
}

/// Runs the whole grid. Output rows are ordered by
/// `(is, graph, n, rep, selector)` whatever the scheduling.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    let selectors = cfg.validate()?;
    let labels: Vec<String> = selectors.iter().map(|k| selector_label(k)).collect();
    let t0 = Instant::now();
    let mut etas = Vec::new();
    let mut models = Vec::new();
    for (i, &is) in cfg.is.iter().enumerate() {
        let eta = calibrate_eta(cfg.p, is, cfg.calibration_trials, derive(cfg.seed, &[purpose::CALIBRATE, i as u64]))?;
        log::info!("Is = {is}: eta = {eta}");
        etas.push((is, eta));
        let ms = (0..cfg.ng)
            .map(|g| gen_cov(&SimParams::with_eta(cfg.p, eta, derive(cfg.seed, &[purpose::MODEL, i as u64, g as u64]))))
            .collect::<Result<Vec<_>>>()?;
        models.push(ms);
    }
    let wall_time_calibration_s = t0.elapsed().as_secs_f64();

    let mut tasks = Vec::new();
    for is_idx in 0..cfg.is.len() {
        for graph_id in 0..cfg.ng {
            for &n in &cfg.n {
                for rep in 0..cfg.nx {
                    tasks.push(Task { is_idx, graph_id, n, rep });
                }
            }
        }
    }
    let t1 = Instant::now();
    let outcomes: Vec<_> = tasks
        .par_iter()
        .map(|t| run_task(cfg, &selectors, &models[t.is_idx][t.graph_id], t))
        .collect();
    let wall_time_runs_s = t1.elapsed().as_secs_f64();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (t, outs) in tasks.iter().zip(outcomes) {
        for (label, out) in labels.iter().zip(outs) {
            let run = rows.len();
            let (fdr, power, msep, crit) = match out {
                Ok((a, b, c, d)) => (Some(a), Some(b), Some(c), Some(d)),
                Err(error) => {
                    log::error!("run {run} failed: {error}");
                    failures.push(Failure { run, error });
                    (None, None, None, None)
                }
            };
            rows.push(RunRow {
                run,
                graph_id: t.graph_id,
                rep: t.rep,
                family: label.clone(),
                fdr,
                power,
                msep,
                crit,
                n: t.n,
                is: cfg.is[t.is_idx],
            });
        }
    }
    let aggregate = aggregate(&rows);
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        root_seed: cfg.seed,
        seed_scheme: vec![
            format!("calibration: [{}, is_index]", purpose::CALIBRATE),
            format!("model: [{}, is_index, graph_id]", purpose::MODEL),
            format!("data: [{}, is_index, graph_id, n, rep]", purpose::SAMPLE),
            format!("langevin: [{}, is_index, graph_id, n, rep, selector_index]", purpose::LANGEVIN),
        ],
        eta: etas,
        runs: rows.len(),
        failures,
        wall_time_calibration_s,
        wall_time_runs_s,
        threads: rayon::current_num_threads(),
    };
    Ok(BenchReport { rows, aggregate, manifest })
}
