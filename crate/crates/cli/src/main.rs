use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ggmselect::bench::{run_bench, BenchConfig};
use ggmselect::family::FamilyKind;
use ggmselect::rng::{derive, purpose};
use ggmselect::simulate::{calibrate_eta, sparsity_index};
use ggmselect::{
    fdr_power, fit_graph, gen_cov, ggmselect, msep, pen_table, sample, select_my_fam, CovModel,
    DataMatrix, EWParams, GgmError, Graph, GraphFamily, GraphJson, PenaltyParams, Result,
    SelectOptions, SelectionResult, SimParams,
};
use serde_json::json;

const THREADS_ENV: &str = "GGMSELECT_THREADS";

#[derive(Parser)]
#[command(name = "ggmselect", version, about = "Gaussian graphical model selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the penalty table pen(0..=D).
    Penalty(PenaltyArgs),
    /// Generate random models and Gaussian data sets.
    Simulate(SimulateArgs),
    /// Select a graph from a data matrix.
    Select(SelectArgs),
    /// Compare a selected graph with a known model.
    Evaluate(EvaluateArgs),
    /// Run a simulation grid and write CSV tables.
    Bench(BenchArgs),
}

#[derive(Args)]
struct PenaltyArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long = "K", default_value_t = ggmselect::selector::DEFAULT_K)]
    k: f64,
    #[arg(long)]
    dmax: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    p: usize,
    /// Target sparsity index (mean degree).
    #[arg(long = "Is")]
    is: f64,
    #[arg(long)]
    n: usize,
    #[arg(long = "NG", default_value_t = 1)]
    ng: usize,
    #[arg(long = "NX", default_value_t = 1)]
    nx: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EwArgs {
    #[arg(long = "ew-alpha")]
    alpha: Option<f64>,
    #[arg(long = "ew-beta")]
    beta: Option<f64>,
    #[arg(long = "ew-tau")]
    tau: Option<f64>,
    #[arg(long = "ew-h")]
    h: Option<f64>,
    #[arg(long = "ew-T")]
    t: Option<f64>,
    #[arg(long = "ew-burn-in")]
    burn_in: Option<f64>,
}

impl EwArgs {
    fn any(&self) -> bool {
        [self.alpha, self.beta, self.tau, self.h, self.t, self.burn_in].iter().any(Option::is_some)
    }

    fn apply(&self, base: EWParams) -> EWParams {
        EWParams {
            alpha: self.alpha.unwrap_or(base.alpha),
            beta: self.beta.unwrap_or(base.beta),
            tau: self.tau.unwrap_or(base.tau),
            h: self.h.unwrap_or(base.h),
            t: self.t.unwrap_or(base.t),
            burn_in_fraction: self.burn_in.unwrap_or(base.burn_in_fraction),
            seed: base.seed,
        }
    }
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    data: PathBuf,
    /// The CSV has a header row.
    #[arg(long)]
    header: bool,
    #[arg(long, default_value = "qe,c01,la,ew")]
    families: String,
    /// JSON list of graphs to choose from instead of building families.
    #[arg(long, conflicts_with = "families")]
    graphs: Option<PathBuf>,
    #[arg(long = "K", default_value_t = ggmselect::selector::DEFAULT_K)]
    k: f64,
    #[arg(long, default_value_t = 3)]
    dmax: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "qe-cap", default_value_t = ggmselect::family::qe::DEFAULT_CAP)]
    qe_cap: usize,
    #[command(flatten)]
    ew: EwArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Selection result JSON, or a bare graph JSON.
    #[arg(long)]
    result: PathBuf,
    /// Data used for the selection; needed for MSEP.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    header: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long = "Is", value_delimiter = ',')]
    is: Option<Vec<f64>>,
    #[arg(long = "NG")]
    ng: Option<usize>,
    #[arg(long = "NX")]
    nx: Option<usize>,
    /// Selectors separated by commas, families within one selector by '+'.
    #[arg(long, value_delimiter = ',')]
    selectors: Option<Vec<String>>,
    #[arg(long = "K")]
    k: Option<f64>,
    #[arg(long)]
    dmax: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => Ok(fs::write(path, text)?),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn penalty(args: PenaltyArgs) -> Result<()> {
    let table = pen_table(PenaltyParams::new(args.n, args.p, args.k, args.dmax)?)?;
    let text = serde_json::to_string_pretty(&json!({
        "n": args.n,
        "p": args.p,
        "K": args.k,
        "d_max": table.d_max(),
        "pen": table.values(),
    }))?;
    write_or_print(args.out.as_deref(), &text)
}

fn simulate(args: SimulateArgs) -> Result<()> {
    fs::create_dir_all(&args.out)?;
    let eta = calibrate_eta(args.p, args.is, args.trials, derive(args.seed, &[purpose::CALIBRATE]))?;
    let mut graphs = Vec::new();
    for g in 0..args.ng {
        let model = gen_cov(&SimParams::with_eta(args.p, eta, derive(args.seed, &[purpose::MODEL, g as u64])))?;
        fs::write(args.out.join(format!("model_{g}.json")), model.to_json()?)?;
        for r in 0..args.nx {
            let x = sample(&model, args.n, derive(args.seed, &[purpose::SAMPLE, g as u64, r as u64]))?;
            x.write_csv(fs::File::create(args.out.join(format!("data_{g}_{r}.csv")))?)?;
        }
        graphs.push(json!({"graph_id": g, "edges": model.g_true.n_edges(), "Is": sparsity_index(&model.g_true)}));
    }
    let summary = json!({
        "p": args.p, "n": args.n, "Is_target": args.is, "eta": eta,
        "NG": args.ng, "NX": args.nx, "seed": args.seed, "graphs": graphs,
    });
    fs::write(args.out.join("simulate.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

fn select(args: SelectArgs) -> Result<()> {
    let x = DataMatrix::from_csv_path(&args.data, args.header)?;
    let result = if let Some(path) = &args.graphs {
        let list: Vec<GraphJson> = serde_json::from_str(&fs::read_to_string(path)?)?;
        let graphs = list.iter().map(Graph::from_json).collect::<Result<Vec<_>>>()?;
        let fam = GraphFamily::from_graphs(x.p(), graphs)?;
        select_my_fam(&x, &fam, args.k)?
    } else {
        let families = FamilyKind::parse_list(&args.families)?;
        let mut opts = SelectOptions::new(families, args.k, args.dmax, args.seed);
        opts.qe_cap = args.qe_cap;
        if args.ew.any() {
            opts.ew = Some(args.ew.apply(EWParams::paper_defaults(x.n(), x.p(), args.seed)));
        }
        ggmselect(&x, &opts)?
    };
    write_or_print(args.out.as_deref(), &serde_json::to_string_pretty(&result)?)
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let model = CovModel::from_json(&fs::read_to_string(&args.model)?)?;
    let text = fs::read_to_string(&args.result)?;
    let graph = match serde_json::from_str::<SelectionResult>(&text) {
        Ok(res) => res.graph,
        Err(_) => serde_json::from_str::<Graph>(&text)?,
    };
    let (fdr, power) = fdr_power(&model.g_true, &graph)?;
    let msep_value = match &args.data {
        Some(path) => {
            let x = DataMatrix::from_csv_path(path, args.header)?;
            Some(msep(&model.sigma, &model.theta_true, &fit_graph(&x, &graph)?)?)
        }
        None => None,
    };
    let out = json!({
        "fdr": fdr,
        "power": power,
        "msep": msep_value,
        "exact": graph == model.g_true,
        "edges": graph.n_edges(),
        "true_edges": model.g_true.n_edges(),
    });
    write_or_print(args.out.as_deref(), &serde_json::to_string_pretty(&out)?)
}

fn bench(args: BenchArgs) -> Result<bool> {
    let mut cfg: BenchConfig = match &args.config {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
        None => BenchConfig {
            p: 0,
            n: Vec::new(),
            is: Vec::new(),
            ng: 1,
            nx: 1,
            selectors: vec!["qe".into()],
            k: ggmselect::selector::DEFAULT_K,
            d_max: 3,
            seed: 0,
            calibration_trials: 100,
            qe_cap: ggmselect::family::qe::DEFAULT_CAP,
            ew: None,
        },
    };
    if let Some(v) = args.p {
        cfg.p = v;
    }
    if let Some(v) = args.n {
        cfg.n = v;
    }
    if let Some(v) = args.is {
        cfg.is = v;
    }
    if let Some(v) = args.ng {
        cfg.ng = v;
    }
    if let Some(v) = args.nx {
        cfg.nx = v;
    }
    if let Some(v) = args.selectors {
        cfg.selectors = v;
    }
    if let Some(v) = args.k {
        cfg.k = v;
    }
    if let Some(v) = args.dmax {
        cfg.d_max = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.trials {
        cfg.calibration_trials = v;
    }
    let report = run_bench(&cfg)?;
    report.write(&args.out)?;
    let failures = report.manifest.failures.len();
    if failures > 0 {
        log::error!("{failures} of {} runs failed; see manifest.json", report.manifest.runs);
    }
    Ok(failures == 0)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let threads: usize = v
            .parse()
            .map_err(|_| GgmError::Parse(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| GgmError::Domain(format!("cannot configure thread pool: {e}")))?;
    }
    Ok(())
}

fn exit_code(e: &GgmError) -> ExitCode {
    if e.is_numeric() {
        ExitCode::from(3)
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|()| match cli.command {
        Command::Penalty(a) => penalty(a).map(|()| true),
        Command::Simulate(a) => simulate(a).map(|()| true),
        Command::Select(a) => select(a).map(|()| true),
        Command::Evaluate(a) => evaluate(a).map(|()| true),
        Command::Bench(a) => bench(a),
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
