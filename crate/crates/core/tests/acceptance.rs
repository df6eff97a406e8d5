//! Acceptance criteria 1 to 11, one PASS/FAIL line each.
//!
//! Criteria 1, 2, 3, 9 and 11 check exact properties of the implementation
//! and fail the target when violated. Criteria 4 to 8 are statistical
//! properties of synthetic experiments and 10 measures wall-clock scaling;
//! those are reported but only fail the target when `ACCEPTANCE_STRICT=1`.
//! `ACCEPTANCE_ONLY=4,7` runs a subset.

use std::time::{Duration, Instant};

use ancestral::classify::logistic::{fit_l1_fixed, sigmoid};
use ancestral::classify::mlp::Network;
use ancestral::classify::{LogisticConfig, MlpConfig, TrainingSet};
use ancestral::evaluate::{auc, mean_se};
use ancestral::experiment::{run_experiment, run_timing, ExperimentConfig, ExperimentKind, ExperimentOutput, Method};
use ancestral::seed;
use ancestral::simgen::{ancestral_truth, sample_scm, InterventionModel, ScmConfig, ScmSpec, Simulator};
use ndarray::{Array1, Array2};
use rand::Rng;

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    hard: bool,
    detail: String,
    elapsed: Duration,
}

/// Criteria selected by `ACCEPTANCE_ONLY` (comma-separated ids), all by default.
fn selected(id: u32) -> bool {
    match std::env::var("ACCEPTANCE_ONLY") {
        Ok(list) => list.split(',').any(|s| s.trim().parse() == Ok(id)),
        Err(_) => true,
    }
}

fn run(
    id: u32,
    name: &'static str,
    hard: bool,
    limit: Duration,
    f: impl FnOnce() -> (bool, String),
) -> Option<Outcome> {
    if !selected(id) {
        return None;
    }
    let start = Instant::now();
    let (ok, mut detail) = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        (false, format!("panicked: {msg}"))
    });
    let elapsed = start.elapsed();
    let in_time = elapsed <= limit;
    if !in_time {
        detail.push_str(&format!("; over the {} s budget", limit.as_secs()));
    }
    let out = Outcome {
        id,
        name,
        pass: ok && in_time,
        hard,
        detail,
        elapsed,
    };
    println!(
        "criterion {:>2} {} | {} | {} | {:.1} s",
        out.id,
        if out.pass { "PASS" } else { "FAIL" },
        out.name,
        out.detail,
        out.elapsed.as_secs_f64()
    );
    Some(out)
}

fn mins(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

// ---------------------------------------------------------------- criterion 1

/// Mean logistic loss plus `lambda·‖β‖₁` and the gradient of the smooth part.
fn logistic_parts(x: &Array2<f64>, y: &[f64], b0: f64, beta: &Array1<f64>) -> (f64, f64, Array1<f64>) {
    let n = x.nrows() as f64;
    let z = x.dot(beta) + b0;
    let mut loss = 0.0;
    let mut r = Array1::zeros(x.nrows());
    for t in 0..x.nrows() {
        loss += z[t].max(0.0) + (-z[t].abs()).exp().ln_1p() - y[t] * z[t];
        r[t] = sigmoid(z[t]) - y[t];
    }
    (loss / n, r.sum() / n, x.t().dot(&r) / n)
}

/// Accelerated proximal gradient with adaptive restart; the intercept is
/// not penalized.
fn proximal_oracle(x: &Array2<f64>, y: &[f64], lambda: f64) -> (f64, Array1<f64>) {
    let n = x.nrows() as f64;
    let d = x.ncols();
    let frob: f64 = x.iter().map(|v| v * v).sum::<f64>() + n;
    let step = 1.0 / (0.25 * frob / n);
    let soft = |v: f64, t: f64| v.signum() * (v.abs() - t).max(0.0);
    let objective = |b0: f64, beta: &Array1<f64>| logistic_parts(x, y, b0, beta).0 + lambda * beta.mapv(f64::abs).sum();

    // norm of the proximal gradient mapping at an iterate
    let stationarity = |b0: f64, beta: &Array1<f64>| {
        let (_, g0, g) = logistic_parts(x, y, b0, beta);
        let moved = (beta - &(step * &g)).mapv(|v| soft(v, step * lambda));
        moved
            .iter()
            .zip(beta)
            .map(|(a, b)| (a - b).abs() / step)
            .fold(g0.abs(), f64::max)
    };

    let (mut b0, mut beta) = (0.0, Array1::<f64>::zeros(d));
    let (mut v0, mut vb) = (b0, beta.clone());
    let mut t: f64 = 1.0;
    let mut f_prev = objective(b0, &beta);
    for it in 0..2_000_000 {
        if it % 50 == 0 && stationarity(b0, &beta) < 1e-12 {
            break;
        }
        let (_, g0, g) = logistic_parts(x, y, v0, &vb);
        let nb0 = v0 - step * g0;
        let nbeta = (&vb - &(step * &g)).mapv(|v| soft(v, step * lambda));
        let f = objective(nb0, &nbeta);
        if f > f_prev {
            if t == 1.0 {
                // a plain step from the iterate no longer descends
                break;
            }
            // restart the momentum from the current iterate
            t = 1.0;
            v0 = b0;
            vb = beta.clone();
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let mom = (t - 1.0) / t_next;
        v0 = nb0 + mom * (nb0 - b0);
        vb = &nbeta + &(mom * (&nbeta - &beta));
        b0 = nb0;
        beta = nbeta;
        t = t_next;
        f_prev = f;
    }
    (b0, beta)
}

fn criterion_1() -> (bool, String) {
    let mut rng = seed::rng(101);
    let cfg = LogisticConfig {
        standardize: false,
        ..LogisticConfig::default()
    };
    let mut worst_coef: f64 = 0.0;
    let mut worst_kkt: f64 = 0.0;
    for inst in 0..50 {
        let n = rng.random_range(20..=60);
        let d = rng.random_range(1..=5);
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0));
        let truth: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut y: Vec<f64> = (0..n)
            .map(|t| {
                let z: f64 = (0..d).map(|j| x[[t, j]] * truth[j]).sum();
                f64::from(rng.random::<f64>() < sigmoid(z))
            })
            .collect();
        y[0] = 0.0;
        y[1] = 1.0;
        let ybar = y.iter().sum::<f64>() / n as f64;
        let lambda_max = (0..d)
            .map(|j| (0..n).map(|t| x[[t, j]] * (y[t] - ybar)).sum::<f64>().abs() / n as f64)
            .fold(0.0, f64::max);
        let lambda = lambda_max * rng.random_range(0.05..0.6);

        let labels: Vec<u8> = y.iter().map(|&v| v as u8).collect();
        let set = TrainingSet::new(x.clone(), labels, (0..n).collect()).unwrap();
        let (model, _) = fit_l1_fixed(&set, lambda, &cfg).unwrap();
        let (b0, beta) = proximal_oracle(&x, &y, lambda);

        let diff = (model.intercept - b0).abs().max(
            model
                .coefficients
                .iter()
                .zip(&beta)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        );
        worst_coef = worst_coef.max(diff);

        let fitted = Array1::from(model.coefficients.clone());
        let (_, g0, g) = logistic_parts(&x, &y, model.intercept, &fitted);
        let mut kkt = g0.abs();
        for j in 0..d {
            let r = if fitted[j] == 0.0 {
                (g[j].abs() - lambda).max(0.0)
            } else {
                (g[j] + lambda * fitted[j].signum()).abs()
            };
            kkt = kkt.max(r);
        }
        worst_kkt = worst_kkt.max(kkt);
        if diff >= 1e-5 || kkt >= 1e-6 {
            return (
                false,
                format!("instance {inst} (n = {n}, d = {d}): coefficient gap {diff:.2e}, KKT residual {kkt:.2e}"),
            );
        }
    }
    (
        true,
        format!(
            "50 instances, max coefficient gap {worst_coef:.2e} (< 1e-5), max KKT residual {worst_kkt:.2e} (< 1e-6)"
        ),
    )
}

// ---------------------------------------------------------------- criterion 2

fn brute_force_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (s_pos, _) in scores.iter().zip(labels).filter(|(_, &y)| y == 1) {
        for (s_neg, _) in scores.iter().zip(labels).filter(|(_, &y)| y == 0) {
            pairs += 1.0;
            if s_pos > s_neg {
                wins += 1.0;
            } else if s_pos == s_neg {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

fn criterion_2() -> (bool, String) {
    let mut rng = seed::rng(202);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let m = rng.random_range(2..=200);
        let levels = rng.random_range(1..=20);
        let scores: Vec<f64> = (0..m).map(|_| f64::from(rng.random_range(0..levels)) / 7.0).collect();
        let mut labels: Vec<u8> = (0..m).map(|_| u8::from(rng.random::<f64>() < 0.4)).collect();
        labels[0] = 0;
        labels[1] = 1;
        worst = worst.max((auc(&scores, &labels).unwrap() - brute_force_auc(&scores, &labels)).abs());
    }
    (
        worst <= 1e-12,
        format!("100 tied instances, max |rank - pairwise| = {worst:.1e} (<= 1e-12)"),
    )
}

// ---------------------------------------------------------------- criterion 3

/// Reachability by recursive depth-first search over the weight support.
fn dfs_truth(spec: &ScmSpec) -> Vec<Vec<u8>> {
    fn visit(spec: &ScmSpec, v: usize, seen: &mut [bool]) {
        for c in 0..spec.weights.len() {
            if spec.weights[v][c] != 0.0 && !seen[c] {
                seen[c] = true;
                visit(spec, c, seen);
            }
        }
    }
    let p = spec.p_obs;
    (0..p)
        .map(|i| {
            let mut seen = vec![false; spec.weights.len()];
            visit(spec, i, &mut seen);
            (0..p).map(|j| u8::from(j != i && seen[j])).collect()
        })
        .collect()
}

fn criterion_3() -> (bool, String) {
    // equilibrium residual of random cyclic and acyclic systems, with and
    // without an intervention, recomputed from the weights
    let mut worst_resid: f64 = 0.0;
    for s in 0..20u64 {
        let mut cfg = ScmConfig::new(15, 3, 0.15, s % 2 == 0);
        cfg.latent_density = 0.2;
        let spec = sample_scm(&cfg, 300 + s).unwrap();
        let sim = Simulator::new(&spec, &[4]).unwrap();
        for (r, target) in [None, Some(4)].into_iter().enumerate() {
            for k in 0..25u64 {
                let smp = sim.sample(target, seed::derive(s, &[r as u64, k])).unwrap();
                let n = spec.n_vars();
                for b in 0..n {
                    let inflow: f64 = if Some(b) == target {
                        0.0
                    } else {
                        (0..n).map(|a| spec.weights[a][b] * smp.x[a]).sum()
                    };
                    worst_resid = worst_resid.max((smp.x[b] - inflow - smp.e[b]).abs());
                }
            }
        }
    }

    // two-node cycle: Σ = (I − Wᵀ)⁻¹ D (I − W)⁻¹
    let (a, b) = (0.6, -0.5);
    let sd = [0.8, 1.3];
    let spec = ScmSpec {
        p_obs: 2,
        p_lat: 0,
        weights: vec![vec![0.0, a], vec![b, 0.0]],
        intercept: vec![1.0, -2.0],
        noise_sd: sd.to_vec(),
        intervention: InterventionModel::default(),
    };
    let det = 1.0 - a * b;
    // (I − Wᵀ)⁻¹ = [[1, b], [a, 1]] / det
    let m = [[1.0 / det, b / det], [a / det, 1.0 / det]];
    let analytic = |i: usize, j: usize| (0..2).map(|k| m[i][k] * m[j][k] * sd[k] * sd[k]).sum::<f64>();
    let sim = Simulator::new(&spec, &[]).unwrap();
    let n = 100_000;
    let xs: Vec<Vec<f64>> = (0..n)
        .map(|s| sim.sample(None, seed::derive(77, &[s as u64])).unwrap().x)
        .collect();
    let mean = [0, 1].map(|c| xs.iter().map(|x| x[c]).sum::<f64>() / n as f64);
    let mut worst_z: f64 = 0.0;
    for (i, j) in [(0, 0), (0, 1), (1, 1)] {
        let cov = xs.iter().map(|x| (x[i] - mean[i]) * (x[j] - mean[j])).sum::<f64>() / (n - 1) as f64;
        let sigma = analytic(i, j);
        let se = ((analytic(i, i) * analytic(j, j) + sigma * sigma) / n as f64).sqrt();
        worst_z = worst_z.max((cov - sigma).abs() / se);
    }

    let mut rng = seed::rng(303);
    let mut mismatches = 0;
    for g in 0..100u64 {
        let p = rng.random_range(2..=20);
        let mut cfg = ScmConfig::new(
            p,
            rng.random_range(0..4),
            rng.random_range(0.05..0.4),
            rng.random::<bool>(),
        );
        cfg.latent_density = rng.random_range(0.0..0.5);
        let spec = sample_scm(&cfg, 1000 + g).unwrap();
        let fast = ancestral_truth(&spec);
        let slow = dfs_truth(&spec);
        if (0..p).any(|i| (0..p).any(|j| fast[[i, j]] != slow[i][j])) {
            mismatches += 1;
        }
    }

    let pass = worst_resid < 1e-10 && worst_z < 3.0 && mismatches == 0;
    (
        pass,
        format!(
            "max residual {worst_resid:.1e} (< 1e-10), 2-node covariance max |z| {worst_z:.2} (< 3), DFS mismatches {mismatches}/100"
        ),
    )
}

// ----------------------------------------------------------- criteria 4 to 8

fn experiment(kind: ExperimentKind, p: &[usize], learners: &[Method], fractions: &[f64]) -> ExperimentOutput {
    let cfg = ExperimentConfig {
        experiment: kind,
        p: p.to_vec(),
        learners: learners.to_vec(),
        fractions: fractions.to_vec(),
        save_models: false,
        ..ExperimentConfig::default()
    };
    run_experiment(&cfg).expect("experiment runs")
}

/// Mean and standard error of the AUC over repetitions for one case.
fn case_auc(out: &ExperimentOutput, p: usize, rho: f64, method: &str, param: Option<f64>) -> (f64, f64) {
    let aucs: Vec<f64> = out
        .records()
        .into_iter()
        .filter(|r| r.p == p && r.rho == rho && r.method == method && r.param == param)
        .map(|r| r.auc)
        .collect();
    assert!(
        !aucs.is_empty(),
        "no records for p = {p}, rho = {rho}, {method}, {param:?}"
    );
    mean_se(&aucs)
}

fn criterion_4() -> (bool, String) {
    let out = experiment(ExperimentKind::VaryP, &[50, 100, 200], &[Method::L1], &[]);
    let a: Vec<f64> = [50, 100, 200]
        .iter()
        .map(|&p| case_auc(&out, p, 0.5, "l1", None).0)
        .collect();
    let pass = a.iter().all(|&v| v >= 0.75) && a[2] >= a[0] - 0.02;
    (
        pass,
        format!(
            "mean AUC p=50 {:.3}, p=100 {:.3}, p=200 {:.3} (each >= 0.75, p=200 >= p=50 - 0.02)",
            a[0], a[1], a[2]
        ),
    )
}

fn criterion_5() -> (bool, String) {
    let out = experiment(ExperimentKind::VaryRho, &[100], &[Method::L1], &[]);
    let grid: Vec<String> = out
        .config
        .rho_values()
        .iter()
        .map(|&r| format!("{r}: {:.3}", case_auc(&out, 100, r, "l1", None).0))
        .collect();
    let lo = case_auc(&out, 100, 0.1, "l1", None).0;
    let hi = case_auc(&out, 100, 0.75, "l1", None).0;
    (
        hi - lo >= 0.05,
        format!(
            "mean AUC by rho [{}]; 0.75 minus 0.1 = {:.3} (>= 0.05)",
            grid.join(", "),
            hi - lo
        ),
    )
}

fn criterion_6() -> (bool, String) {
    let out = experiment(ExperimentKind::Perturb, &[200], &[Method::L1], &[0.0, 0.3]);
    let clean = case_auc(&out, 200, 0.5, "l1", Some(0.0)).0;
    let noisy = case_auc(&out, 200, 0.5, "l1", Some(0.3)).0;
    (
        (clean - noisy).abs() <= 0.1,
        format!("mean AUC unperturbed {clean:.3}, 30% perturbed {noisy:.3} (gap <= 0.1)"),
    )
}

fn criterion_7() -> (bool, String) {
    let out = experiment(ExperimentKind::ErrorCorrect, &[200], &[Method::L1], &[0.2]);
    let (m, se) = case_auc(&out, 200, 0.5, "l1", Some(0.2));
    let z = (m - 0.5) / se;
    (
        m >= 0.75 && z >= 5.0,
        format!("correction AUC on flipped pairs {m:.3} +/- {se:.3} (>= 0.75), {z:.1} SE above 0.5 (>= 5)"),
    )
}

fn criterion_8() -> (bool, String) {
    let out = experiment(ExperimentKind::RandomControl, &[100], &[Method::L1, Method::Nn], &[0.5]);
    let l1 = case_auc(&out, 100, 0.5, "l1", Some(0.5)).0;
    let nn = case_auc(&out, 100, 0.5, "nn", Some(0.5)).0;
    let inside = |v: f64| (0.45..=0.55).contains(&v);
    (
        inside(l1) && inside(nn),
        format!("mean AUC with random positives l1 {l1:.3}, nn {nn:.3} (both in [0.45, 0.55])"),
    )
}

// ---------------------------------------------------------------- criterion 9

fn criterion_9() -> (bool, String) {
    let widths = MlpConfig::default().widths(100);
    let expected: usize = widths.windows(2).map(|w| (w[0] + 1) * w[1]).sum();
    let net = Network::init(&widths, 909);
    let count = net.param_count();

    let mut rng = seed::rng(910);
    let rows = 20;
    let x = Array2::from_shape_fn((rows, 100), |_| rng.random_range(-1.5..1.5));
    let y: Vec<f64> = (0..rows).map(|t| (t % 2) as f64).collect();
    let w = vec![1.0; rows];
    let (_, grads) = net.loss_and_grad(x.view(), &y, &w);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for l in 0..net.layers.len() {
        // a random sample of each layer's weights plus its biases
        let (fan_in, fan_out) = net.layers[l].w.dim();
        let mut entries: Vec<(bool, usize, usize)> = (0..40)
            .map(|_| (true, rng.random_range(0..fan_in), rng.random_range(0..fan_out)))
            .collect();
        entries.extend((0..fan_out.min(10)).map(|o| (false, 0, o)));
        let (mut num, mut den) = (0.0, 0.0);
        for (is_w, a, o) in entries {
            let mut plus = net.clone();
            let mut minus = net.clone();
            if is_w {
                plus.layers[l].w[[a, o]] += h;
                minus.layers[l].w[[a, o]] -= h;
            } else {
                plus.layers[l].b[o] += h;
                minus.layers[l].b[o] -= h;
            }
            let fd = (plus.loss_and_grad(x.view(), &y, &w).0 - minus.loss_and_grad(x.view(), &y, &w).0) / (2.0 * h);
            let g = if is_w { grads[l].w[[a, o]] } else { grads[l].b[o] };
            num += (g - fd).powi(2);
            den += g.powi(2) + fd.powi(2);
        }
        worst = worst.max(num.sqrt() / den.sqrt().max(1e-12));
    }
    (
        count == 132_865 && count == expected && worst < 1e-4,
        format!("parameters {count} (132865), worst per-layer relative gradient error {worst:.1e} (< 1e-4)"),
    )
}

// --------------------------------------------------------------- criterion 10

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn criterion_10() -> (bool, String) {
    let mut cfg = ExperimentConfig {
        experiment: ExperimentKind::Timing,
        p: vec![50, 100, 200, 400],
        learners: vec![Method::L1],
        ..ExperimentConfig::default()
    };
    cfg.timing.repeats = 2;
    let report = run_timing(&cfg).expect("timing runs");
    let ps: Vec<f64> = cfg.p.iter().map(|&p| (p as f64).ln()).collect();
    let ts: Vec<f64> = cfg.p.iter().map(|&p| report.featurization_min_ms(p).ln()).collect();
    let s = slope(&ps, &ts);
    let t = &report.fixed_train;
    let (small, large) = (&t[0], &t[t.len() - 1]);
    let change = (large.train_min_ms - small.train_min_ms).abs() / small.train_min_ms;
    (
        s <= 2.3 && change < 0.2,
        format!(
            "featurization log-log slope {s:.2} (<= 2.3); train time at |T| = {} is {:.0} ms at |Q| = {} and {:.0} ms at |Q| = {} ({:.0}% change, < 20%)",
            small.train_size,
            small.train_min_ms,
            small.query_size,
            large.train_min_ms,
            large.query_size,
            100.0 * change
        ),
    )
}

// --------------------------------------------------------------- criterion 11

fn untimed(out: &ExperimentOutput) -> Vec<String> {
    out.records().iter().map(|r| r.untimed_json()).collect()
}

fn criterion_11() -> (bool, String) {
    let mut configs = Vec::new();
    for (kind, fractions) in [
        (ExperimentKind::VaryP, vec![]),
        (ExperimentKind::Perturb, vec![0.0, 0.2]),
    ] {
        let mut cfg = ExperimentConfig {
            experiment: kind,
            p: vec![40],
            repetitions: 3,
            fractions,
            learners: vec![Method::L1, Method::Nn, Method::Pearson, Method::Kendall],
            pca_dim: 20,
            ..ExperimentConfig::default()
        };
        cfg.learner_params.nn.epochs = 5;
        configs.push(cfg);
    }
    let in_pool = |threads: usize, cfg: &ExperimentConfig| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_experiment(cfg).unwrap())
    };
    let mut records = 0;
    for cfg in &configs {
        let reference = untimed(&in_pool(1, cfg));
        records += reference.len();
        for threads in [1, 4] {
            if untimed(&in_pool(threads, cfg)) != reference {
                return (
                    false,
                    format!("{} records differ at {threads} threads", cfg.experiment.name()),
                );
            }
        }
    }
    (
        true,
        format!("{records} records identical across reruns at 1 and 4 threads"),
    )
}

fn main() {
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let outcomes: Vec<Outcome> = [
        run(
            1,
            "L1 solver vs proximal-gradient oracle",
            true,
            Duration::from_secs(30),
            criterion_1,
        ),
        run(
            2,
            "rank AUC vs pairwise counting",
            true,
            Duration::from_secs(5),
            criterion_2,
        ),
        run(
            3,
            "simulator equilibrium, covariance, reachability",
            true,
            mins(1),
            criterion_3,
        ),
        run(4, "AUC across dimension", false, mins(10), criterion_4),
        run(5, "AUC across training fraction", false, mins(10), criterion_5),
        run(6, "robustness to label perturbation", false, mins(5), criterion_6),
        run(7, "error correction", false, mins(5), criterion_7),
        run(8, "random-positive control", false, mins(5), criterion_8),
        run(9, "network size and gradients", true, mins(1), criterion_9),
        run(10, "scaling shape", false, mins(10), criterion_10),
        run(
            11,
            "determinism across reruns and threads",
            true,
            mins(10),
            criterion_11,
        ),
    ]
    .into_iter()
    .flatten()
    .collect();
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} criteria pass", outcomes.len());
    let blocking: Vec<u32> = outcomes
        .iter()
        .filter(|o| !o.pass && (o.hard || strict))
        .map(|o| o.id)
        .collect();
    if !blocking.is_empty() {
        eprintln!("failing criteria: {blocking:?}");
        std::process::exit(1);
    }
}
