//! Acceptance suite: one PASS/FAIL line per criterion. Runs as a plain
//! binary so the lines always reach the test log.

use std::collections::HashMap;
use std::time::Instant;

use ggmselect::bench::{run_bench, BenchConfig, BenchReport};
use ggmselect::family::ew::{compute_theta_ew, EWParams};
use ggmselect::family::FamilyKind;
use ggmselect::lars::lasso_path;
use ggmselect::linmodel::node_crit;
use ggmselect::penalty::{ln_binomial, pen_value};
use ggmselect::selector::{assemble_family, ggmselect, penalty_for, SelectOptions};
use ggmselect::{dkhi, edkhi, fit_neighborhood, gen_cov, sample, DataMatrix, Graph, SimParams};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, start: Instant, limit_s: f64, out: Outcome) -> bool {
    let secs = start.elapsed().as_secs_f64();
    let in_time = secs < limit_s;
    let pass = out.pass && in_time;
    println!(
        "criterion {id} [{}] {name}: {} ({secs:.1} s, limit {limit_s:.0} s)",
        if pass { "PASS" } else { "FAIL" },
        out.detail
    );
    pass
}

// ---------------------------------------------------------------- 1

fn criterion_1() -> Outcome {
    let mut checked = [0usize; 3];
    let mut violations = [0usize; 3];
    for &n in &[20usize, 50, 100] {
        for &p in &[20usize, 100, 500] {
            let d_hi = ((-1.5f64).exp() * (p - 1) as f64).floor() as usize;
            let d_hi = d_hi.min(n - 3).min(12);
            for d in 1..=d_hi {
                let level = (-(ln_binomial(p - 1, d) + 2.0 * ((d + 1) as f64).ln())).exp();
                let e = edkhi((d + 1) as f64, (n - d - 1) as f64, level).expect("edkhi");
                checked[0] += 1;
                if e < (d + 1) as f64 {
                    violations[0] += 1;
                    println!("  lemma 3 violated: n={n} p={p} d={d} EDKhi={e}");
                }
            }
            for &k in &[1.5, 2.5, 3.0] {
                let pens: Vec<f64> = (0..=d_hi).map(|d| pen_value(n, p, k, d).expect("pen")).collect();
                for d1 in 1..=d_hi {
                    for d2 in 1..=d1 {
                        let bound = 2.0 * k * (d1 - d2) as f64 * (((p - d1) as f64) / d1 as f64).ln();
                        checked[1] += 1;
                        if pens[d1] - pens[d2] < bound {
                            violations[1] += 1;
                            println!("  lemma 2 violated: n={n} p={p} K={k} d1={d1} d2={d2}");
                        }
                    }
                }
            }
        }
    }
    // Monotonicity on a 100-point grid of (d, N, level).
    for d in 1..=10usize {
        for &big_n in &[5usize, 10, 20, 50, 100] {
            for &q in &[1e-1, 1e-3] {
                let base = edkhi(d as f64, big_n as f64, q).expect("edkhi");
                let up_d = edkhi((d + 1) as f64, big_n as f64, q).expect("edkhi");
                let up_n = edkhi(d as f64, (big_n + 5) as f64, q).expect("edkhi");
                checked[2] += 1;
                if !(up_d > base && up_n < base) {
                    violations[2] += 1;
                    println!("  lemma 4 violated: d={d} N={big_n} q={q}");
                }
            }
        }
    }
    Outcome {
        pass: violations.iter().all(|&v| v == 0),
        detail: format!(
            "lemma 3 {}/{} ok, lemma 2 {}/{} ok, lemma 4 {}/{} ok",
            checked[0] - violations[0],
            checked[0],
            checked[1] - violations[1],
            checked[1],
            checked[2] - violations[2],
            checked[2]
        ),
    }
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    const DRAWS: usize = 10_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut within = 0;
    for _ in 0..50 {
        let d = rng.random_range(1..=20u32) as f64;
        let big_n = rng.random_range(3..=120u32) as f64;
        let x = d * rng.random_range(0.3..3.0);
        let exact = dkhi(d, big_n, x).expect("dkhi");
        // d * DKhi(d, N, x) = E[(X_d - x X_N / N)_+] for independent chi-squares.
        let cd = ChiSquared::new(d).unwrap();
        let cn = ChiSquared::new(big_n).unwrap();
        let (mut s, mut s2) = (0.0f64, 0.0f64);
        for _ in 0..DRAWS {
            let v = (cd.sample(&mut rng) - x * cn.sample(&mut rng) / big_n).max(0.0) / d;
            s += v;
            s2 += v * v;
        }
        let m = s / DRAWS as f64;
        let se = ((s2 / DRAWS as f64 - m * m).max(0.0) / DRAWS as f64).sqrt();
        if (exact - m).abs() <= 3.0 * se {
            within += 1;
        } else {
            println!("  outside 3 SE: d={d} N={big_n} x={x:.4} exact={exact:.6e} mc={m:.6e} se={se:.2e}");
        }
    }
    Outcome { pass: within >= 47, detail: format!("{within}/50 triples within 3 MC standard errors") }
}

// ---------------------------------------------------------------- 3

fn graphs_with_degree_at_most(p: usize, d: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(
        pairs: &[(usize, usize)],
        i: usize,
        deg: &mut [usize],
        d: usize,
        cur: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if i == pairs.len() {
            out.push(cur.clone());
            return;
        }
        rec(pairs, i + 1, deg, d, cur, out);
        let (a, b) = pairs[i];
        if deg[a] < d && deg[b] < d {
            deg[a] += 1;
            deg[b] += 1;
            cur.push((a, b));
            rec(pairs, i + 1, deg, d, cur, out);
            cur.pop();
            deg[a] -= 1;
            deg[b] -= 1;
        }
    }
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|a| (a + 1..p).map(move |b| (a, b))).collect();
    let mut out = Vec::new();
    rec(&pairs, 0, &mut vec![0; p], d, &mut Vec::new(), &mut out);
    out
}

fn criterion_3() -> Outcome {
    let (p, n, d, k) = (8usize, 25usize, 2usize, 2.5);
    let all = graphs_with_degree_at_most(p, d);
    let mut qualifying = 0;
    let mut agree = 0;
    for seed in 0..50u64 {
        let model = gen_cov(&SimParams::with_eta(p, 0.4, 1000 + seed)).expect("model");
        let x = sample(&model, n, 5000 + seed).expect("sample");
        let opts = SelectOptions::new(vec![FamilyKind::Qe], k, d, seed);
        let pt = penalty_for(&x, &opts).expect("penalty");
        // Per-node terms for every neighbourhood of size <= d.
        let mut terms: HashMap<(usize, Vec<usize>), f64> = HashMap::new();
        let mut term = |a: usize, ne: Vec<usize>| -> f64 {
            *terms.entry((a, ne.clone())).or_insert_with(|| node_crit(&x, a, &ne, &pt).expect("term"))
        };
        let mut best: Option<(f64, Graph)> = None;
        for edges in &all {
            let g = Graph::from_edges(p, edges.iter().copied()).unwrap();
            let c: f64 = (0..p).map(|a| term(a, g.neighborhood(a))).collect::<Vec<_>>().iter().sum();
            let better = match &best {
                None => true,
                Some((bc, bg)) => c < *bc || (c == *bc && g < *bg),
            };
            if better {
                best = Some((c, g));
            }
        }
        let (_, oracle) = best.unwrap();
        let (fam, _) = assemble_family(&x, &opts, &pt).expect("family");
        if fam.contains(&oracle) {
            qualifying += 1;
            let sel = ggmselect(&x, &opts).expect("select");
            if sel.graph == oracle {
                agree += 1;
            } else {
                println!("  seed {seed}: selected {:?}, exhaustive minimiser {:?}", sel.graph, oracle);
            }
        }
    }
    Outcome {
        pass: qualifying > 0 && agree == qualifying,
        detail: format!(
            "{agree}/{qualifying} qualifying seeds agree; qualification rate {qualifying}/50 ({} deg<=2 graphs enumerated per seed)",
            all.len()
        ),
    }
}

// ---------------------------------------------------------------- 4

fn coordinate_descent(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let m = x.ncols();
    let norms: Vec<f64> = (0..m).map(|j| x.column(j).norm_squared()).collect();
    let mut v = DVector::<f64>::zeros(m);
    let mut r = y.clone();
    for _ in 0..100_000 {
        let mut change: f64 = 0.0;
        for j in 0..m {
            let zj = x.column(j).dot(&r) + norms[j] * v[j];
            let t = lambda / 2.0;
            let new = if zj > t { (zj - t) / norms[j] } else if zj < -t { (zj + t) / norms[j] } else { 0.0 };
            let delta = new - v[j];
            if delta != 0.0 {
                r.axpy(-delta, &x.column(j), 1.0);
                v[j] = new;
                change = change.max(delta.abs());
            }
        }
        if change < 1e-13 {
            break;
        }
    }
    v
}

fn criterion_4() -> Outcome {
    let (n, p) = (40usize, 25usize);
    let mut worst_kkt: f64 = 0.0;
    let mut worst_cd: f64 = 0.0;
    let mut errors = 0;
    for inst in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(77_000 + inst);
        let mut m = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        // Correlated design with a sparse signal in column 0.
        for j in 1..p {
            let prev = m.column(j - 1).into_owned();
            let col = m.column(j) + prev * 0.3;
            m.set_column(j, &col);
        }
        let signal = m.column(3) * 1.5 - m.column(7) + m.column(12) * 0.5;
        let col0 = m.column(0) + signal;
        m.set_column(0, &col0);
        let x = DataMatrix::new(m).unwrap();
        let path = match lasso_path(&x, 0, None, p - 1) {
            Ok(path) => path,
            Err(e) => {
                errors += 1;
                println!("  instance {inst}: {e}");
                continue;
            }
        };
        let y = x.column(0);
        for (k, &lambda) in path.lambdas.iter().enumerate() {
            let v = DVector::from_column_slice(&path.coefs[k]);
            let r = &y - x.matrix() * &v;
            for b in 1..p {
                let g = 2.0 * x.column(b).dot(&r);
                let viol = if v[b] != 0.0 {
                    (g - lambda * v[b].signum()).abs()
                } else {
                    (g.abs() - lambda).max(0.0)
                };
                worst_kkt = worst_kkt.max(viol);
            }
        }
        let design = x.matrix().columns(1, p - 1).into_owned();
        let lambda0 = path.lambdas[0];
        for i in 0..20 {
            let lambda = lambda0 * 0.95 * (0.01f64 / 0.95).powf(i as f64 / 19.0);
            let cd = coordinate_descent(&design, &y, lambda);
            let lars = path.coefficients_at(lambda).expect("path reaches lambda");
            for j in 0..p - 1 {
                worst_cd = worst_cd.max((cd[j] - lars[j + 1]).abs());
            }
        }
    }
    Outcome {
        pass: errors == 0 && worst_kkt <= 1e-6 && worst_cd <= 1e-4,
        detail: format!("max KKT residual {worst_kkt:.2e}, max |LARS - CD| {worst_cd:.2e} over 100 instances x 20 lambdas, {errors} solver errors"),
    }
}

// ---------------------------------------------------------------- 5

fn ew_vs_ols(x: &DataMatrix, base: EWParams) -> (bool, f64) {
    let p = x.p();
    let chains: Vec<_> = (0..10u64)
        .map(|s| compute_theta_ew(x, &EWParams { seed: 900 + s, ..base.clone() }).expect("ew"))
        .collect();
    let mut ok = true;
    let mut worst_ratio: f64 = 0.0;
    for a in 0..p {
        let others: Vec<usize> = (0..p).filter(|&b| b != a).collect();
        let ols = fit_neighborhood(x, a, &others).expect("ols");
        let mut dev: f64 = 0.0;
        let mut max_se: f64 = 0.0;
        for (i, &b) in others.iter().enumerate() {
            let vals: Vec<f64> = chains.iter().map(|t| t.get(a, b)).collect();
            let mean = vals.iter().sum::<f64>() / 10.0;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 9.0;
            max_se = max_se.max((var / 10.0).sqrt());
            dev = dev.max((mean - ols.coef[i]).abs());
        }
        worst_ratio = worst_ratio.max(dev / max_se);
        ok &= dev <= 3.0 * max_se;
    }
    (ok, worst_ratio)
}

fn criterion_5() -> Outcome {
    let (n, p) = (100usize, 5usize);
    let model = gen_cov(&SimParams::with_eta(p, 0.6, 55)).expect("model");
    let x = sample(&model, n, 56).expect("sample");
    let defaults = EWParams { alpha: 0.0, ..EWParams::paper_defaults(n, p, 0) };
    let (ok_default, r_default) = ew_vs_ols(&x, defaults.clone());
    // A sharper likelihood makes the chain mix within T, so the comparison
    // is informative; the flat-prior posterior mean is still the OLS fit.
    let sharp = EWParams { beta: 5.0 * n as f64, ..defaults };
    let (ok_sharp, r_sharp) = ew_vs_ols(&x, sharp);
    Outcome {
        pass: ok_default && ok_sharp,
        detail: format!(
            "max |mean - OLS| / max SE: {r_default:.2} at beta = 2/n, {r_sharp:.2} at beta = 5n (limit 3)"
        ),
    }
}

// ---------------------------------------------------------------- 6, 8

fn consistency_config(seed: u64) -> BenchConfig {
    BenchConfig {
        p: 30,
        n: vec![30, 100, 300],
        is: vec![1.0],
        ng: 10,
        nx: 10,
        selectors: vec!["qe".into()],
        k: 2.5,
        d_max: 5,
        seed,
        calibration_trials: 100,
        qe_cap: ggmselect::family::qe::DEFAULT_CAP,
        ew: None,
    }
}

fn criterion_6(report: &BenchReport) -> Outcome {
    let agg = &report.aggregate;
    let at = |n: usize| agg.iter().find(|r| r.n == n).expect("cell");
    let (a, b, c) = (at(30), at(100), at(300));
    let failures = report.manifest.failures.len();
    let exact_ok = c.exact_mean > a.exact_mean;
    let power_ok = b.power_mean >= a.power_mean - 0.03 && c.power_mean >= b.power_mean - 0.03;
    Outcome {
        pass: failures == 0 && exact_ok && power_ok,
        detail: format!(
            "exact recovery {:.2} / {:.2} / {:.2}, power {:.3} / {:.3} / {:.3}, FDR {:.3} / {:.3} / {:.3} at n = 30 / 100 / 300; {failures} failed runs",
            a.exact_mean, b.exact_mean, c.exact_mean, a.power_mean, b.power_mean, c.power_mean, a.fdr_mean,
            b.fdr_mean, c.fdr_mean
        ),
    }
}

fn criterion_8(first: &BenchReport, cfg: &BenchConfig) -> Outcome {
    let dir = std::env::temp_dir().join(format!("ggmselect-acceptance-{}", std::process::id()));
    let (d1, d2) = (dir.join("first"), dir.join("second"));
    first.write(&d1).expect("write");
    run_bench(cfg).expect("bench rerun").write(&d2).expect("write");
    let mut same = true;
    for file in ["runs.csv", "aggregate.csv"] {
        let a = std::fs::read(d1.join(file)).unwrap();
        let b = std::fs::read(d2.join(file)).unwrap();
        same &= a == b;
    }
    let _ = std::fs::remove_dir_all(&dir);
    Outcome { pass: same, detail: format!("runs.csv and aggregate.csv {}", if same { "byte-identical" } else { "differ" }) }
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let mut worst_diag: f64 = 0.0;
    let mut worst_inv: f64 = 0.0;
    let mut support_mismatch = 0;
    let mut models = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for &p in &[10usize, 30] {
        for i in 0..200u64 {
            let eta = rng.random_range(0.0..1.0);
            let m = gen_cov(&SimParams::with_eta(p, eta, 70_000 + 1000 * p as u64 + i)).expect("model");
            models += 1;
            for a in 0..p {
                worst_diag = worst_diag.max((m.sigma[(a, a)] - 1.0).abs());
            }
            worst_inv = worst_inv.max((&m.sigma * &m.omega - DMatrix::identity(p, p)).abs().max());
            for a in 0..p {
                for b in 0..p {
                    if a != b && (m.theta_true.get(a, b) != 0.0) != m.g_true.has_edge(a, b) {
                        support_mismatch += 1;
                    }
                }
            }
        }
    }
    Outcome {
        pass: worst_diag <= 1e-10 && worst_inv <= 1e-8 && support_mismatch == 0,
        detail: format!(
            "{models} models: max |diag(Sigma) - 1| {worst_diag:.1e}, max |Sigma Omega - I| {worst_inv:.1e}, {support_mismatch} support mismatches"
        ),
    }
}

fn main() {
    let mut all = true;
    let t = Instant::now();
    all &= report(1, "penalty lemmas", t, 30.0, criterion_1());
    let t = Instant::now();
    all &= report(2, "DKhi Monte-Carlo oracle", t, 120.0, criterion_2());
    let t = Instant::now();
    all &= report(3, "exhaustive-oracle equivalence", t, 300.0, criterion_3());
    let t = Instant::now();
    all &= report(4, "LARS KKT and coordinate descent", t, 120.0, criterion_4());
    let t = Instant::now();
    all &= report(5, "EW-OLS limit", t, 300.0, criterion_5());
    let t = Instant::now();
    let cfg = consistency_config(2024);
    let bench = run_bench(&cfg).expect("bench");
    all &= report(6, "consistency trend", t, 1800.0, criterion_6(&bench));
    let t = Instant::now();
    all &= report(7, "simulator invariants", t, 60.0, criterion_7());
    let t = Instant::now();
    all &= report(8, "determinism", t, 1800.0, criterion_8(&bench, &cfg));
    if !all {
        println!("acceptance: some criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
