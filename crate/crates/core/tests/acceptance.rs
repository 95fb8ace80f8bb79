//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criterion 10 runs only when `E2LMVSC_HANDWRITTEN_DIR` points at a Hand
//! Written dataset directory and never affects the exit status.

use std::alloc::{GlobalAlloc, Layout, System};
use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use e2lmvsc::cluster::{
    hungarian, kmeans, metric_acc, metric_fscore, metric_nmi, metric_purity, spectral_cluster, KMeansConfig,
};
use e2lmvsc::dataio::{save_dataset, synth_generate, MatrixFormat, SynthSpec};
use e2lmvsc::losses::{
    coding_rate_global, coding_rate_local, dis_term, ib_term, ortho_term, recon_term, rel_term, ss_term,
    weighted_total, LossWeights,
};
use e2lmvsc::model::{materialize_affinity, ModelShape, ModelState};
use e2lmvsc::numcore::{cholesky_logdet, grad_check, Matrix, Param, RngStream};
use e2lmvsc::pipeline::{model_grad_check, run_experiment, RunReport, TrainConfig, LABELS_PRED_FILE, METRICS_FILE};

struct Counting;

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            let now = CURRENT.fetch_add(layout.size(), Ordering::SeqCst) + layout.size();
            PEAK.fetch_max(now, Ordering::SeqCst);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        CURRENT.fetch_sub(layout.size(), Ordering::SeqCst);
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc_zeroed(layout);
        if !p.is_null() {
            let now = CURRENT.fetch_add(layout.size(), Ordering::SeqCst) + layout.size();
            PEAK.fetch_max(now, Ordering::SeqCst);
        }
        p
    }
}

#[global_allocator]
static ALLOC: Counting = Counting;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---- 1 ----

const TERMS: [&str; 7] = ["recon", "ortho", "ss", "ib", "dis", "rel", "total"];

fn tiny_params(data: &mut RngStream, n: usize, d: usize) -> Vec<Param> {
    let mut p = Vec::new();
    for (name, rows) in [("x0", 4), ("x1", 5), ("xh0", 4), ("xh1", 5)] {
        p.push(Param::new(name, data.uniform_matrix(rows, n, 0.0, 1.0)));
    }
    p.push(Param::new("c", data.normal_matrix(d, n, 1.0)));
    for name in ["d0", "d1", "r0", "r1"] {
        p.push(Param::new(name, data.uniform_matrix(d, n, 0.0, 1.0)));
    }
    for name in ["logits", "logits_d", "logits_r"] {
        p.push(Param::new(name, data.normal_matrix(n, 3, 1.0)));
    }
    for name in ["mu", "lv", "pm0", "pv0", "pm1", "pv1", "pmc", "pvc"] {
        let sd = if name == "mu" || name.starts_with("pm") { 0.4 } else { 0.3 };
        let m = data.normal_matrix(d, n, sd);
        p.push(Param::new(name, if name == "lv" { m.map(|v| v - 2.0) } else { m }));
    }
    p.push(Param::new("theta_raw", Matrix::scalar(-2.0)));
    p
}

fn criterion_gradients() -> Outcome {
    let started = Instant::now();
    let (n, d) = (12, 3);
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let mut rng = RngStream::new(1, 100);
    let mut worst = (0.0f64, String::new());
    for seed in 0..10 {
        let mut data = RngStream::new(300 + seed, 0);
        let base = tiny_params(&mut data, n, d);
        let noise = data.normal_matrix(d, n, 1.0);
        for (which, name) in TERMS.iter().enumerate() {
            let mut params = base.clone();
            let report = grad_check(
                &mut params,
                |g, v| {
                    let half = g.scale(v[13], 0.5);
                    let sd = g.exp(half);
                    let eps = g.leaf(noise.clone());
                    let jitter = g.mul(sd, eps);
                    let u = g.add(v[12], jitter);
                    let aes = recon_term(g, &v[0..2], &v[2..4]);
                    let ortho = ortho_term(g, v[4], &v[5..7], &v[7..9]);
                    let q = g.softmax_rows(v[9]);
                    let qd = g.softmax_rows(v[10]);
                    let qr = g.softmax_rows(v[11]);
                    let ss = ss_term(g, q, qd, qr);
                    let ib = ib_term(g, v[12], v[13], u, &[(v[14], v[15]), (v[16], v[17])], (v[18], v[19]), 2);
                    let dis = dis_term(g, u, &labels, 3, 0.5)?;
                    let theta = g.softplus(v[20]);
                    let rel = rel_term(g, u, theta, 5)?;
                    let parts = [aes, ortho, ss, ib, dis, rel];
                    Ok(if which < 6 { parts[which] } else { weighted_total(g, parts, &LossWeights::default()) })
                },
                &mut rng,
                1e-4,
            )
            .map_err(|e| e.to_string())?;
            if report.max_rel_error() > worst.0 {
                worst = (report.max_rel_error(), format!("{name} seed {seed}, {}", report.worst().map_or("", |e| e.name.as_str())));
            }
        }
    }
    let mut model_worst = 0.0f64;
    for seed in 0..10 {
        let report = model_grad_check(seed, 1e-4).map_err(|e| e.to_string())?;
        model_worst = model_worst.max(report.max_rel_error());
    }
    let secs = started.elapsed().as_secs_f64();
    check(
        worst.0 <= 1e-4 && model_worst <= 1e-4 && secs < 60.0,
        format!(
            "7 terms x 10 instances max rel err {:.2e} ({}); full model x 10 seeds {:.2e}; {:.1}s",
            worst.0, worst.1, model_worst, secs
        ),
    )
}

// ---- 2 ----

fn criterion_logdet() -> Outcome {
    let mut rng = RngStream::new(2, 100);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let d = 1 + rng.below(8);
        let n = 1 + rng.below(32);
        let alpha = rng.uniform_range(0.01, 5.0);
        let u = rng.normal_matrix(d, n, 1.0);
        let a = cholesky_logdet(&Matrix::identity(d).add(&u.matmul_nt(&u).scale(alpha))).map_err(|e| e.to_string())?;
        let b = cholesky_logdet(&Matrix::identity(n).add(&u.matmul_tn(&u).scale(alpha))).map_err(|e| e.to_string())?;
        worst = worst.max((a - b).abs() / a.abs().max(1.0));
    }
    check(worst <= 1e-8, format!("100 instances, max scaled gap {worst:.2e}"))
}

// ---- 3 ----

fn criterion_rate_reduction() -> Outcome {
    let mut rng = RngStream::new(3, 100);
    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let d = 1 + rng.below(8);
        let n = 2 + rng.below(40);
        let k = 1 + rng.below(5);
        let scale = rng.uniform_range(0.1, 3.0);
        let u = rng.normal_matrix(d, n, scale);
        let labels: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
        let gap = coding_rate_global(&u, 0.5).map_err(|e| e.to_string())?
            - coding_rate_local(&u, &labels, k, 0.5).map_err(|e| e.to_string())?;
        worst = worst.min(gap);
    }
    check(worst >= -1e-9, format!("100 instances, min R - Rc = {worst:.3e}"))
}

// ---- 4 ----

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

fn oracle_metrics(pred: &[usize], truth: &[usize], k: usize) -> [f64; 4] {
    let n = pred.len() as f64;
    let acc = permutations(k)
        .iter()
        .map(|p| pred.iter().zip(truth).filter(|(&a, &b)| p[a] == b).count())
        .max()
        .unwrap() as f64
        / n;
    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    let mut pa: HashMap<usize, f64> = HashMap::new();
    let mut pb: HashMap<usize, f64> = HashMap::new();
    for (&a, &b) in pred.iter().zip(truth) {
        *joint.entry((a, b)).or_default() += 1.0 / n;
        *pa.entry(a).or_default() += 1.0 / n;
        *pb.entry(b).or_default() += 1.0 / n;
    }
    let h = |m: &HashMap<usize, f64>| -> f64 { m.values().map(|p| -p * p.ln()).sum() };
    let mi: f64 = joint.iter().map(|(&(a, b), &p)| p * (p / (pa[&a] * pb[&b])).ln()).sum();
    let nmi = (mi / (h(&pa) * h(&pb)).sqrt()).clamp(0.0, 1.0);
    let mut pur = 0;
    for c in pa.keys() {
        pur += pb.keys().map(|t| (0..pred.len()).filter(|&i| pred[i] == *c && truth[i] == *t).count()).max().unwrap();
    }
    let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
    for i in 0..pred.len() {
        for j in (i + 1)..pred.len() {
            match (pred[i] == pred[j], truth[i] == truth[j]) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fneg += 1.0,
                _ => {}
            }
        }
    }
    let (p, r) = (tp / (tp + fp), tp / (tp + fneg));
    let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    [acc, nmi, pur as f64 / n, f]
}

fn wcss(x: &Matrix, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for c in 0..2 {
        let members: Vec<usize> = (0..x.rows()).filter(|&i| labels[i] == c).collect();
        if members.is_empty() {
            continue;
        }
        for dim in 0..x.cols() {
            let mean = members.iter().map(|&i| x[(i, dim)]).sum::<f64>() / members.len() as f64;
            total += members.iter().map(|&i| (x[(i, dim)] - mean).powi(2)).sum::<f64>();
        }
    }
    total
}

fn criterion_combinatorial() -> Outcome {
    let mut rng = RngStream::new(4, 100);
    let mut failures = Vec::new();

    for _ in 0..200 {
        let k = 1 + rng.below(7);
        let cost: Vec<Vec<f64>> =
            (0..k).map(|_| (0..k).map(|_| rng.below(50) as f64 + rng.uniform()).collect()).collect();
        let brute = permutations(k)
            .iter()
            .map(|p| (0..k).map(|i| cost[i][p[i]]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        if hungarian(&cost).1 != brute {
            failures.push("hungarian");
            break;
        }
    }

    for _ in 0..50 {
        let n = 2 + rng.below(7);
        let dims = 1 + rng.below(3);
        let x = rng.normal_matrix(n, dims, 1.0);
        let brute = (0..1u32 << n)
            .map(|mask| wcss(&x, &(0..n).map(|i| ((mask >> i) & 1) as usize).collect::<Vec<_>>()))
            .fold(f64::INFINITY, f64::min);
        let fit = kmeans(&x, 2, &KMeansConfig::default(), &mut rng).map_err(|e| e.to_string())?;
        if (fit.inertia - brute).abs() > 1e-9 * brute.max(1.0) {
            failures.push("kmeans");
            break;
        }
    }

    let mut metric_gap = 0.0f64;
    let mut tested = 0;
    while tested < 200 {
        let n = 4 + rng.below(30);
        let k = 2 + rng.below(4);
        let pred: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
        let truth: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
        let distinct = |l: &[usize]| l.iter().collect::<std::collections::BTreeSet<_>>().len();
        if distinct(&pred) < 2 || distinct(&truth) < 2 {
            continue;
        }
        tested += 1;
        let oracle = oracle_metrics(&pred, &truth, k);
        let got = [
            metric_acc(&pred, &truth).unwrap(),
            metric_nmi(&pred, &truth).unwrap(),
            metric_purity(&pred, &truth).unwrap(),
            metric_fscore(&pred, &truth).unwrap(),
        ];
        for (a, b) in got.iter().zip(oracle) {
            metric_gap = metric_gap.max((a - b).abs());
        }
    }
    if metric_gap > 1e-12 {
        failures.push("metrics");
    }

    let worked = [
        metric_acc(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap(),
        metric_nmi(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap(),
        metric_purity(&[0, 0, 1, 1], &[0, 1, 1, 1]).unwrap(),
        metric_fscore(&[0, 0, 0, 1], &[0, 0, 1, 1]).unwrap(),
    ];
    let expected = [0.5, 0.0, 0.75, 0.4];
    if worked.iter().zip(expected).any(|(a, b)| (a - b).abs() > 1e-12) {
        failures.push("worked values");
    }
    check(
        failures.is_empty(),
        format!(
            "hungarian 200, kmeans 50, metrics 200 (max gap {metric_gap:.1e}), worked {worked:?}; failures {failures:?}"
        ),
    )
}

// ---- 5 ----

fn criterion_ideal_recovery() -> Outcome {
    let mut rng = RngStream::new(5, 100);
    let mut runs = 0;
    for k in [2, 3, 5] {
        for seed in 0..50u64 {
            let sizes: Vec<usize> = (0..k).map(|_| 3 + rng.below(38)).collect();
            let truth: Vec<usize> =
                sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
            let n = truth.len();
            let s = Matrix::from_fn(n, n, |i, j| f64::from(u8::from(i != j && truth[i] == truth[j])));
            let labels = spectral_cluster(&s, k, &mut RngStream::new(seed, 7)).map_err(|e| e.to_string())?;
            let acc = metric_acc(labels.labels(), &truth).unwrap();
            if acc != 1.0 {
                return Err(format!("K={k} seed {seed} sizes {sizes:?}: ACC {acc}"));
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} block-diagonal affinities recovered exactly"))
}

// ---- 6, 8, 9 ----

struct E2eRun {
    seed: u64,
    report: RunReport,
    secs: f64,
    out: tempfile::TempDir,
    data: tempfile::TempDir,
}

fn e2e_config(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs_pretrain: 200,
        epochs_finetune: 100,
        eval_every: 10,
        seed,
        ..TrainConfig::default()
    }
}

fn e2e_runs() -> Result<Vec<E2eRun>, String> {
    let mut runs = Vec::new();
    for seed in 1..=5u64 {
        let spec = SynthSpec {
            noise_scale: 0.05,
            ..SynthSpec::new(400, 3, 4, seed)
        };
        let ds = synth_generate(&spec).map_err(|e| e.to_string())?;
        let data = tempfile::tempdir().map_err(|e| e.to_string())?;
        save_dataset(&ds, data.path(), MatrixFormat::F64Bin).map_err(|e| e.to_string())?;
        let out = tempfile::tempdir().map_err(|e| e.to_string())?;
        let started = Instant::now();
        let report = run_experiment(data.path(), &e2e_config(seed), out.path()).map_err(|e| e.to_string())?;
        runs.push(E2eRun {
            seed,
            report,
            secs: started.elapsed().as_secs_f64(),
            out,
            data,
        });
    }
    Ok(runs)
}

fn criterion_end_to_end(runs: &[E2eRun]) -> Outcome {
    let mut good = 0;
    let mut lines = Vec::new();
    let mut slowest = 0.0f64;
    for r in runs {
        let m = r.report.final_metrics.unwrap_or_default();
        if m.acc >= 0.95 && m.nmi >= 0.90 {
            good += 1;
        }
        slowest = slowest.max(r.secs);
        lines.push(format!("s{}: acc {:.3} nmi {:.3} {:.0}s", r.seed, m.acc, m.nmi, r.secs));
    }
    check(good >= 4 && slowest < 300.0, format!("{good}/5 seeds pass [{}]", lines.join("; ")))
}

fn criterion_determinism(runs: &[E2eRun]) -> Outcome {
    let first = runs.first().ok_or("no runs")?;
    let again = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_experiment(first.data.path(), &e2e_config(first.seed), again.path()).map_err(|e| e.to_string())?;
    let same = |f: &str| std::fs::read(first.out.path().join(f)).ok() == std::fs::read(again.path().join(f)).ok();
    check(
        same(METRICS_FILE) && same(LABELS_PRED_FILE),
        format!("seed {} rerun: metrics.json identical {}, labels_pred.csv identical {}", first.seed, same(METRICS_FILE), same(LABELS_PRED_FILE)),
    )
}

fn criterion_convergence(runs: &[E2eRun]) -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for r in runs {
        let h = &r.report.history;
        let (Some(first), Some(fifty)) = (h.first(), h.get(49)) else {
            ok = false;
            lines.push(format!("s{}: only {} epochs", r.seed, h.len()));
            continue;
        };
        let acc1 = r.report.evaluations.iter().find(|e| e.epoch == 1).map(|e| e.metrics.acc);
        let final_acc = r.report.final_metrics.map(|m| m.acc);
        let pass = fifty.losses.total < first.losses.total
            && matches!((acc1, final_acc), (Some(a), Some(b)) if b >= a);
        ok &= pass;
        lines.push(format!(
            "s{}: L1 {:.3e} L50 {:.3e} acc1 {:.3} final {:.3}",
            r.seed,
            first.losses.total,
            fifty.losses.total,
            acc1.unwrap_or(f64::NAN),
            final_acc.unwrap_or(f64::NAN)
        ));
    }
    check(ok, lines.join("; "))
}

// ---- 7 ----

fn criterion_efficiency() -> Outcome {
    let shape = |n| ModelShape {
        view_dims: vec![10, 12],
        n,
        k: 4,
        d: 20,
        hidden: 16,
    };
    let mut counts = Vec::new();
    for n in [100, 1_000, 10_000] {
        let state = ModelState::new(shape(n), &mut RngStream::new(0, 0)).map_err(|e| e.to_string())?;
        counts.push(state.self_expression_param_count());
    }

    let (n, block) = (10_000usize, 256usize);
    let u = RngStream::new(7, 0).normal_matrix(20, n, 0.3);
    // Warm up the worker pool so its one-off allocations fall outside the window.
    let _ = materialize_affinity(&u.select_columns(&(0..600).collect::<Vec<_>>()), 0.1, block);
    let baseline = CURRENT.load(Ordering::SeqCst);
    PEAK.store(baseline, Ordering::SeqCst);
    let s = materialize_affinity(&u, 0.1, block);
    let peak = PEAK.load(Ordering::SeqCst);
    let output = n * n * std::mem::size_of::<f64>();
    let transient = peak.saturating_sub(baseline + output);
    let bound = 2 * block * n * 8;
    let symmetric = s[(3, 9_000)] == s[(9_000, 3)] && s[(17, 17)] == 0.0;
    drop(s);
    check(
        counts == [1, 1, 1] && transient <= bound && symmetric,
        format!("theta params {counts:?}; transient {transient} B <= bound {bound} B at n={n}, block={block}"),
    )
}

// ---- 10 ----

fn criterion_handwritten() -> Option<Outcome> {
    let dir = std::env::var_os("E2LMVSC_HANDWRITTEN_DIR")?;
    let out = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return Some(Err(e.to_string())),
    };
    let cfg = TrainConfig::default();
    Some(match run_experiment(Path::new(&dir), &cfg, out.path()) {
        Ok(report) => {
            let m = report.final_metrics.unwrap_or_default();
            check(m.acc >= 0.90, format!("acc {:.4} nmi {:.4} (reference 0.9730)", m.acc, m.nmi))
        }
        Err(e) => Err(e.to_string()),
    })
}

fn main() {
    let mut failed = 0;
    let mut report = |id: &str, name: &str, outcome: Outcome| {
        match &outcome {
            Ok(detail) => println!("PASS {id} {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id} {name}: {detail}");
            }
        }
    };
    report("1", "gradient suite", criterion_gradients());
    report("2", "log-det identity", criterion_logdet());
    report("3", "coding-rate reduction", criterion_rate_reduction());
    report("4", "combinatorial oracles", criterion_combinatorial());
    report("5", "ideal recovery", criterion_ideal_recovery());
    match e2e_runs() {
        Ok(runs) => {
            report("6", "end-to-end synthetic", criterion_end_to_end(&runs));
            report("7", "efficiency", criterion_efficiency());
            report("8", "determinism", criterion_determinism(&runs));
            report("9", "convergence shape", criterion_convergence(&runs));
        }
        Err(e) => {
            report("6", "end-to-end synthetic", Err(e.clone()));
            report("7", "efficiency", criterion_efficiency());
            report("8", "determinism", Err(e.clone()));
            report("9", "convergence shape", Err(e));
        }
    }
    match criterion_handwritten() {
        None => println!("SKIP 10 hand written benchmark (non-gating): set E2LMVSC_HANDWRITTEN_DIR to run"),
        Some(Ok(d)) => println!("PASS 10 hand written benchmark (non-gating): {d}"),
        Some(Err(d)) => println!("FAIL 10 hand written benchmark (non-gating): {d}"),
    }
    if failed > 0 {
        println!("{failed} gating criteria failed");
        std::process::exit(1);
    }
}
