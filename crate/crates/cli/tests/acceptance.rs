//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines are printed as they are
//! produced. A failing criterion is reported, never raised; the binary only
//! exits non-zero if the harness itself breaks. Pass substrings as arguments
//! to run a subset, e.g. `cargo test --test acceptance -- posterior`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use curate::bench::{run_experiment, ExperimentConfig, ExperimentReport, Method};
use curate::dis_gc::{self, DisGcConfig};
use curate::gp_truth::GpPrior;
use curate::grid_solver::{
    asymptotic_policy, cluster_ranges, optimize_policy, variance_max_policy, SolverOptions, CLUSTER_THRESHOLD,
};
use curate::nn_gc::{draw_noise, gradient_check, problem_objective, GeneratorNet};
use curate::objective::{expected_max_gaussian, rho_empirical, rho_exact, two_term_asymptotic};
use curate::preference::{PosteriorState, PreferenceObservation};
use curate::problem::{make_gaussian1d, Problem};
use curate::{ActionPoint, ActionSpace, DiscretePolicy, Kernel};
use curate_service::{router, Event, Session, Store};
use http_body_util::BodyExt;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Value};
use statrs::distribution::{ContinuousCDF, Normal};
use tower::ServiceExt;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict { pass, detail: detail.into() }
    }
}

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Verdict,
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria = [
        Criterion { name: "em-correctness", budget: Duration::from_secs(10), run: em_correctness },
        Criterion { name: "rho-consistency", budget: Duration::from_secs(30), run: rho_consistency },
        Criterion { name: "white-noise-uniform", budget: Duration::from_secs(5), run: white_noise_uniform },
        Criterion { name: "clump-structure", budget: Duration::from_secs(60), run: clump_structure },
        Criterion { name: "two-point-degeneracy", budget: Duration::from_secs(10), run: two_point_degeneracy },
        Criterion { name: "sigma-monotonicity", budget: Duration::from_secs(60), run: sigma_monotonicity },
        Criterion { name: "preference-posterior", budget: Duration::from_secs(60), run: preference_posterior },
        Criterion { name: "generator-gradients", budget: Duration::from_secs(30), run: generator_gradients },
        Criterion { name: "method-ordering", budget: Duration::from_secs(20 * 60), run: method_ordering },
        Criterion { name: "dis-gc-convergence", budget: Duration::from_secs(10 * 60), run: dis_gc_convergence },
        Criterion { name: "cli-determinism", budget: Duration::from_secs(10 * 60), run: cli_determinism },
        Criterion { name: "service-replay", budget: Duration::from_secs(10 * 60), run: service_replay },
    ];
    // keep panics from failing checks out of the report
    std::panic::set_hook(Box::new(|_| {}));
    let mut passed = 0;
    let mut ran = 0;
    for c in criteria.iter().filter(|c| filters.is_empty() || filters.iter().any(|f| c.name.contains(f.as_str()))) {
        ran += 1;
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(c.run))
            .unwrap_or_else(|e| Verdict::new(false, format!("check aborted: {}", panic_message(&e))));
        let took = start.elapsed();
        let in_time = took <= c.budget;
        let pass = verdict.pass && in_time;
        passed += pass as usize;
        println!(
            "{} {:<22} {} [{:.1}s of {}s{}]",
            if pass { "PASS" } else { "FAIL" },
            c.name,
            verdict.detail,
            took.as_secs_f64(),
            c.budget.as_secs(),
            if in_time { "" } else { ", over budget" }
        );
    }
    let _ = std::panic::take_hook();
    println!("acceptance: {passed}/{ran} criteria pass");
}

fn panic_message(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
}

// ---------------------------------------------------------------------------

/// E_m against Monte Carlo maxima; the maximum of m standard normals is
/// sampled exactly as Φ⁻¹(U^{1/m}).
fn em_correctness() -> Verdict {
    const SAMPLES: usize = 10_000_000;
    const TOL: f64 = 1e-3;
    let normal = Normal::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut ok = true;
    for m in [1u64, 2, 3, 5, 10, 20, 50, 100] {
        let inv_m = 1.0 / m as f64;
        let mut acc = 0.0;
        for _ in 0..SAMPLES {
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            acc += normal.inverse_cdf((u.ln() * inv_m).exp());
        }
        let mc = acc / SAMPLES as f64;
        let err = (expected_max_gaussian(m).unwrap() - mc).abs();
        worst = worst.max(err);
        ok &= err < TOL;
    }
    let one = expected_max_gaussian(1).unwrap();
    let big = expected_max_gaussian(10_000).unwrap();
    let asym = two_term_asymptotic(10_000);
    let rel = (big - asym).abs() / asym;
    let pass = ok && one == 0.0 && rel < 0.02;
    Verdict::new(
        pass,
        format!(
            "max |E_m - MC| = {worst:.2e} (tol {TOL:.0e}); E_1 = {one}; E_10000 = {big:.5} vs two-term {asym:.5}, rel gap {:.2}% (tol 2%)",
            rel * 100.0
        ),
    )
}

fn random_policy(grid: Vec<ActionPoint>, rng: &mut ChaCha8Rng) -> DiscretePolicy {
    let w: Vec<f64> = (0..grid.len()).map(|_| rng.random::<f64>() + 0.01).collect();
    DiscretePolicy::normalized(grid, w).unwrap()
}

fn draw(policy: &DiscretePolicy, count: usize, rng: &mut ChaCha8Rng) -> Vec<ActionPoint> {
    let mut cdf = Vec::with_capacity(policy.len());
    let mut acc = 0.0;
    for w in policy.weights() {
        acc += w;
        cdf.push(acc);
    }
    (0..count)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            let i = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            policy.grid()[i].clone()
        })
        .collect()
}

fn rho_consistency() -> Verdict {
    const TOL: f64 = 1e-2;
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let kernels = [
        (Kernel::squared_exponential(0.4, 1.0), false),
        (Kernel::laplacian(0.7, 1.0), false),
        (Kernel::white_noise(1.0, 1.0), false),
        (Kernel::hamming_exponential(2.0, 1.0), true),
    ];
    let mut worst = 0.0f64;
    for (k, discrete) in &kernels {
        for _ in 0..5 {
            let size = rng.random_range(4..12);
            let grid: Vec<ActionPoint> = (0..size)
                .map(|_| {
                    if *discrete {
                        ActionPoint::from_bits((0..6).map(|_| rng.random_range(0..2u8)))
                    } else {
                        ActionPoint::scalar(rng.random_range(-1.0..1.0))
                    }
                })
                .collect();
            let p = random_policy(grid, &mut rng);
            let samples = draw(&p, 100_000, &mut rng);
            let err = (rho_empirical(k, &samples).unwrap() - rho_exact(k, &p).unwrap()).abs();
            worst = worst.max(err);
        }
    }
    Verdict::new(worst < TOL, format!("max |rho_emp - rho_exact| = {worst:.2e} over 4 kernels x 5 policies (tol {TOL:.0e})"))
}

fn white_noise_uniform() -> Verdict {
    const TOL: f64 = 1e-6;
    let grid = ActionSpace::interval(-1.0, 1.0, 200).unwrap().points();
    let p = asymptotic_policy(&Kernel::white_noise(1.0, 1.0), &grid).unwrap();
    let worst = p.weights().iter().map(|w| (w - 1.0 / 200.0).abs()).fold(0.0, f64::max);
    Verdict::new(worst < TOL, format!("max |w_i - 1/200| = {worst:.2e} (tol {TOL:.0e})"))
}

fn clump_structure() -> Verdict {
    let grid = ActionSpace::interval(-1.0, 1.0, 200).unwrap().points();
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, h) in [("1", 1.0), ("1/sqrt2", 0.5f64.sqrt()), ("1/2", 0.5)] {
        let p = asymptotic_policy(&Kernel::squared_exponential(h, 1.0), &grid).unwrap();
        let w = p.weights();
        let clusters = cluster_ranges(w, CLUSTER_THRESHOLD);
        let mass = |r: &(usize, usize)| w[r.0..r.1].iter().sum::<f64>();
        let left = clusters.first().filter(|r| r.0 == 0).map(mass).unwrap_or(0.0);
        let right = clusters.last().filter(|r| r.1 == 200).map(mass).unwrap_or(0.0);
        let interior = clusters.iter().filter(|r| r.0 > 0 && r.1 < 200).count();
        let ok = left > 0.05 && right > 0.05 && interior >= 1 && (h != 0.5 || clusters.len() >= 3);
        pass &= ok;
        parts.push(format!(
            "h={label}: {} clusters, boundary mass {left:.3}/{right:.3}, {interior} interior{}",
            clusters.len(),
            if ok { "" } else { " (miss)" }
        ));
    }
    Verdict::new(pass, parts.join("; "))
}

fn two_point_degeneracy() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut failures = 0;
    for _ in 0..20 {
        let n = rng.random_range(8..40);
        let mut xs: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        xs.sort_by(f64::total_cmp);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let delta = rng.random_range(0.05..0.8);
        let grid: Vec<ActionPoint> = xs.iter().map(|&x| ActionPoint::scalar(x)).collect();
        let pol = variance_max_policy(&grid, &y, delta).unwrap();
        let top = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let feasible: Vec<usize> = (0..n).filter(|&i| y[i] >= top - delta * top).collect();
        let (lo, hi) = (feasible[0], *feasible.last().unwrap());
        let w = pol.weights();
        let exact = if lo == hi {
            w[lo] == 1.0 && w.iter().filter(|&&v| v > 0.0).count() == 1
        } else {
            w[lo] == 0.5 && w[hi] == 0.5 && w.iter().filter(|&&v| v > 0.0).count() == 2
        };
        let spread = |w: &[f64]| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += w[i] * w[j] * (xs[i] - xs[j]).powi(2);
                }
            }
            s
        };
        let mine = spread(w);
        let mut beaten = false;
        for (a, &i) in feasible.iter().enumerate() {
            for &j in &feasible[a + 1..] {
                let mut alt = vec![0.0; n];
                alt[i] = 0.5;
                alt[j] = 0.5;
                beaten |= spread(&alt) > mine + 1e-12;
            }
        }
        if !exact || beaten {
            failures += 1;
        }
    }
    Verdict::new(failures == 0, format!("{} of 20 instances exact and unbeaten by any feasible pair", 20 - failures))
}

fn sigma_monotonicity() -> Verdict {
    const TOL: f64 = 1e-3;
    let p = make_gaussian1d().unwrap();
    let grid = p.space.points();
    let mut rows = Vec::new();
    let mut pass = true;
    let mut prev: Option<(f64, f64)> = None;
    for sigma in [0.05, 0.25, 1.0, 5.0] {
        let r = optimize_policy(&grid, &p.y, &p.params(sigma, 20).unwrap(), &SolverOptions::default()).unwrap();
        if let Some((rho, ey)) = prev {
            pass &= r.rho <= rho + TOL && r.expected_y <= ey + TOL;
        }
        prev = Some((r.rho, r.expected_y));
        rows.push(format!("s={sigma}: rho {:.4} E[Y] {:.4}", r.rho, r.expected_y));
    }
    Verdict::new(pass, format!("{} (tol {TOL:.0e})", rows.join(", ")))
}

/// Moments of `U ~ N(0, gram)` conditioned on `U[w] > U[l]`, by rejection.
fn rejection_moments(gram: &DMatrix<f64>, w: usize, l: usize, accepted: usize) -> (Vec<f64>, Vec<f64>) {
    let n = gram.nrows();
    let chol = (gram + DMatrix::identity(n, n) * 1e-10).cholesky().unwrap().l();
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let (mut sum, mut sq) = (vec![0.0; n], vec![0.0; n]);
    let mut kept = 0;
    while kept < accepted {
        let u = &chol * DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        if u[w] > u[l] {
            kept += 1;
            for i in 0..n {
                sum[i] += u[i];
                sq[i] += u[i] * u[i];
            }
        }
    }
    let k = kept as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / k).collect();
    let var = sq.iter().zip(&mean).map(|(s, m)| s / k - m * m).collect();
    (mean, var)
}

fn preference_posterior() -> Verdict {
    const TOL: f64 = 2e-2;
    let obs = |w: f64, l: f64| PreferenceObservation::new(ActionPoint::scalar(w), ActionPoint::scalar(l));
    let space = ActionSpace::interval(0.0, 1.0, 11).unwrap();
    let prior = PosteriorState::prior(space, Kernel::squared_exponential(0.3, 1.0)).unwrap();
    let post = prior.updated(obs(0.2, 0.6)).unwrap();
    let (mean, var) = rejection_moments(prior.cov(), 2, 6, 1_000_000);
    let mut worst = 0.0f64;
    for q in [0, 1, 2, 3, 4, 5, 7, 8, 9, 10] {
        let p = post.predict_index(q);
        worst = worst.max((p.mean - mean[q]).abs()).max((p.variance - var[q]).abs());
    }
    let one_ok = worst < TOL;

    let space = ActionSpace::interval(0.0, 1.0, 101).unwrap();
    let mut s = PosteriorState::prior(space, Kernel::squared_exponential(1.0, 1.0)).unwrap();
    let mut prev = s.variances();
    let mut shrinks = true;
    for o in [obs(0.2, 0.5), obs(0.3, 0.7), obs(0.1, 0.4)] {
        s.update(o).unwrap();
        let now = s.variances();
        shrinks &= now.iter().zip(&prev).all(|(a, b)| *a <= b + 1e-12);
        prev = now;
    }
    let avg = |lo: usize, hi: usize| s.mean()[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
    let (near, far) = (avg(10, 30), avg(50, 70));
    Verdict::new(
        one_ok && shrinks && near > far,
        format!(
            "one update vs rejection oracle: max err {worst:.2e} (tol {TOL:.0e}); three updates: variance non-increasing {shrinks}, mean[0.1,0.3] {near:.3} vs mean[0.5,0.7] {far:.3}"
        ),
    )
}

fn generator_gradients() -> Verdict {
    const TOL: f64 = 1e-4;
    let p = make_gaussian1d().unwrap();
    let params = p.params(0.25, 20).unwrap();
    let y = problem_objective(&p).unwrap();
    let net = GeneratorNet::for_space(&p.space, 10, 64, 11).unwrap();
    let noise = draw_noise(160, 10, 0.1, 12).unwrap();
    let err = gradient_check(&net, &y, &params, &noise, usize::MAX, 0).unwrap();
    Verdict::new(err < TOL, format!("max relative error {err:.2e} over all {} parameters (tol {TOL:.0e})", net.params.len()))
}

fn mean_regret(r: &ExperimentReport, m: Method) -> f64 {
    r.row(m).and_then(|row| row.mean_regret).unwrap_or(f64::NAN)
}

fn diversity(r: &ExperimentReport, m: Method) -> f64 {
    r.row(m).and_then(|row| row.diversity).unwrap_or(f64::NAN)
}

fn method_ordering() -> Verdict {
    let mut pass = true;
    let mut misses = Vec::new();
    let mut table = Vec::new();
    for tag in ["gauss1d", "ackley2d", "knapsack"] {
        let problem = Problem::from_tag(tag, 0).unwrap();
        let mut cfg = ExperimentConfig::default();
        if tag == "knapsack" {
            cfg.methods.retain(|m| *m != Method::NnGc);
        }
        let report = run_experiment(&problem, &cfg).unwrap().report;
        let rows: Vec<String> = report
            .rows
            .iter()
            .map(|r| {
                format!("{} {:.3e}/{:.3}", r.method.tag(), r.mean_regret.unwrap_or(f64::NAN), r.diversity.unwrap_or(f64::NAN))
            })
            .collect();
        table.push(format!("{tag}: {}", rows.join(" ")));

        let mut need = |ok: bool, what: String| {
            if !ok {
                pass = false;
                misses.push(format!("{tag}: {what}"));
            }
        };
        let rivals = [Method::Qo, Method::QoNoise, Method::Random];
        let mut learners = Vec::new();
        if tag != "ackley2d" {
            learners.push(Method::DisGc);
        }
        if tag != "knapsack" {
            learners.push(Method::NnGc);
        }
        for &l in &learners {
            for &r in &rivals {
                let (a, b) = (mean_regret(&report, l), mean_regret(&report, r));
                need(a < b, format!("regret {} {a:.3e} !< {} {b:.3e}", l.tag(), r.tag()));
            }
        }
        let generative: Vec<Method> = [Method::DisGc, Method::NnGc].into_iter().filter(|m| report.row(*m).is_some()).collect();
        for &g in &generative {
            let (rd, gd, qd) = (diversity(&report, Method::Random), diversity(&report, g), diversity(&report, Method::Qo));
            need(rd >= gd, format!("diversity random {rd:.3} !>= {} {gd:.3}", g.tag()));
            need(gd >= qd, format!("diversity {} {gd:.3} !>= qo {qd:.3}", g.tag()));
        }
    }
    let detail = if misses.is_empty() {
        format!("all orderings hold; mean regret/diversity: {}", table.join(" | "))
    } else {
        format!("misses: {}; mean regret/diversity: {}", misses.join(", "), table.join(" | "))
    };
    Verdict::new(pass, detail)
}

fn sample_std(v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn dis_gc_convergence() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for tag in ["gauss1d", "ackley2d", "knapsack"] {
        let problem = Problem::from_tag(tag, 0).unwrap();
        let sigma = problem.sigma;
        let params = problem.params(sigma, 20).unwrap();
        let prior = GpPrior::new(problem.space.clone(), problem.truth_kernel(sigma)).unwrap();
        let truth = prior.realize(problem.y.clone(), 0).unwrap();
        let cfg = DisGcConfig { n: 50, iterations: 1000, sigma2_dis: 0.02, ..DisGcConfig::default() };
        let out = dis_gc::run(&problem, &params, &cfg, Some(&truth)).unwrap();
        let tail = &out.state.trace[out.state.trace.len() - 100..];
        let rho: Vec<f64> = tail.iter().map(|r| r.rho_hat).collect();
        let regret: Vec<f64> = tail.iter().map(|r| r.regret.unwrap()).collect();
        let (sr, sg) = (sample_std(&rho), sample_std(&regret));
        let ok = sr < 0.05 && sg < 0.1 * sigma;
        pass &= ok;
        parts.push(format!("{tag}: std rho {sr:.3} (tol 0.05), std regret {sg:.3} (tol {:.3})", 0.1 * sigma));
    }
    Verdict::new(pass, parts.join("; "))
}

fn cli_run(args: &[String]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_curate")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

/// Label, arguments, and output-file flags with their file names.
type Invocation = (&'static str, Vec<&'static str>, Vec<(&'static str, &'static str)>);

fn cli_determinism() -> Verdict {
    let cases: Vec<Invocation> = vec![
        ("em", vec!["em", "50"], vec![("--out", "em.txt")]),
        ("solve-grid", vec!["solve-grid", "--problem", "gauss1d", "--m", "20"], vec![("--out", "p.json")]),
        ("asymptotic", vec!["asymptotic", "--h", "0.5"], vec![("--out", "a.json")]),
        (
            "curate dis-gc",
            vec!["curate", "--problem", "ackley2d", "--method", "dis-gc", "--seed", "3", "--truth-seed", "1"],
            vec![("--out", "c.json"), ("--trace", "t.csv")],
        ),
        (
            "curate nn-gc",
            vec!["curate", "--problem", "gauss1d", "--method", "nn-gc", "--nn-iterations", "50", "--seed", "3"],
            vec![("--out", "c.json"), ("--model", "net.json")],
        ),
        ("curate qo-noise", vec!["curate", "--problem", "knapsack", "--method", "qo-noise", "--seed", "5"], vec![("--out", "c.json")]),
        (
            "bench",
            vec!["bench", "--problem", "knapsack", "--methods", "random,qo,qo-noise,is,dis-gc", "--trials", "4"],
            vec![("--out", "r.csv"), ("--log", "log.jsonl")],
        ),
    ];
    let mut differing = Vec::new();
    for (label, args, files) in &cases {
        let mut runs = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().unwrap();
            let mut full: Vec<String> = args.iter().map(|s| s.to_string()).collect();
            for (flag, name) in files {
                full.push(flag.to_string());
                full.push(dir.path().join(name).to_string_lossy().into_owned());
            }
            let stdout = match cli_run(&full) {
                Ok(s) => s,
                Err(e) => return Verdict::new(false, format!("{label} failed: {e}")),
            };
            let contents: Vec<Vec<u8>> = files.iter().map(|(_, n)| std::fs::read(dir.path().join(n)).unwrap_or_default()).collect();
            runs.push((stdout, contents));
        }
        if runs[0] != runs[1] || runs[0].1.iter().any(|c| c.is_empty()) {
            differing.push(*label);
        }
    }
    Verdict::new(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} invocations byte-identical across two runs", cases.len())
        } else {
            format!("outputs differ for: {}", differing.join(", "))
        },
    )
}

fn schemas_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../service/schemas")
}

fn validator(name: &str) -> jsonschema::Validator {
    let text = std::fs::read_to_string(schemas_dir().join(format!("{name}.schema.json"))).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn service_replay() -> Verdict {
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
    rt.block_on(async {
        let app = router(Arc::new(Store::in_memory()));
        let mut invalid = Vec::new();
        let mut check = |schema: &str, v: &Value| {
            if !validator(schema).is_valid(v) {
                invalid.push(schema.to_string());
            }
        };
        let mut mismatched = Vec::new();
        let mut responses = 0;
        let sessions = [("gauss1d", 5u64, 1u64), ("ackley2d", 4, 2), ("knapsack", 3, 3)];
        for (problem, m, seed) in sessions {
            let req = json!({"problem": problem, "m": m, "seed": seed, "generator": {"n": 12, "iterations": 60}});
            check("create_request", &req);
            let (st, created) = call(&app, "POST", "/sessions", Some(req)).await;
            if st != StatusCode::CREATED {
                return Verdict::new(false, format!("create {problem} returned {st}: {created}"));
            }
            check("create_response", &created);
            responses += 1;
            let id = created["id"].as_str().unwrap().to_string();
            let mut batch = created["batch"].clone();
            for round in 0..3 {
                let idx: Vec<u64> = batch["candidates"].as_array().unwrap().iter().map(|c| c["index"].as_u64().unwrap()).collect();
                for pair in idx.windows(2).filter(|p| p[0] != p[1]).take(2) {
                    let (w, l) = if round % 2 == 0 { (pair[0], pair[1]) } else { (pair[1], pair[0]) };
                    let body = json!({"winner": w, "loser": l});
                    check("preference_request", &body);
                    let (st, v) = call(&app, "POST", &format!("/sessions/{id}/preferences"), Some(body)).await;
                    responses += 1;
                    check(if st.is_success() { "preference_response" } else { "error" }, &v);
                }
                let (_, v) = call(&app, "POST", &format!("/sessions/{id}/next-batch"), None).await;
                check("batch", &v);
                responses += 1;
                batch = v;
            }
            let (_, cands) = call(&app, "GET", &format!("/sessions/{id}/candidates"), None).await;
            check("batch", &cands);
            let (_, view) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
            check("session", &view);
            let (_, live) = call(&app, "GET", &format!("/sessions/{id}/posterior?full_cov=true"), None).await;
            check("posterior", &live);
            let (_, missing) = call(&app, "GET", "/sessions/none", None).await;
            check("error", &missing);
            responses += 4;

            let events: Vec<Event> = serde_json::from_value(view["events"].clone()).unwrap();
            let transcript = serde_json::to_string(&events).unwrap();
            let events: Vec<Event> = serde_json::from_str(&transcript).unwrap();
            let replayed = Session::replay(id.clone(), &events).unwrap();
            // f64 values compare bit for bit once parsed
            if serde_json::to_value(replayed.snapshot(true)).unwrap() != live {
                mismatched.push(problem);
            }
        }
        let pass = invalid.is_empty() && mismatched.is_empty();
        let detail = format!(
            "{} sessions replayed, {} bit-identical posteriors; {responses} responses checked, {} schema violations{}; built without the UI",
            sessions.len(),
            sessions.len() - mismatched.len(),
            invalid.len(),
            if invalid.is_empty() { String::new() } else { format!(" ({})", invalid.join(", ")) }
        );
        Verdict::new(pass, detail)
    })
}
