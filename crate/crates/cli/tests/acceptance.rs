//! End-to-end acceptance checks. Each criterion prints one PASS, FAIL or SKIP
//! line; the process exits non-zero if any criterion fails.

use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tactslip_cli::commands::{cmd_demo, cmd_eval, default_model, DemoOptions, EvalOptions};
use tactslip_core::classifiers::{
    fit_knn, fit_random_forest, logistic_objective, ForestConfig, LabeledDataset, MaxFeatures,
};
use tactslip_core::detector::{run_demo, DemoConfig, EpisodeLog, Stage};
use tactslip_core::features::{entropy, magnitude_histogram};
use tactslip_core::simkit::{episode_features, generate_episode, DatasetConfig, Scenario, ScenarioKind};
use tactslip_core::{
    compute_metrics, Detector, DetectorConfig, DisplacementField, FeatureSet, HistogramSpec, Label,
    ModelKind, TrainedModel,
};

type Check = Result<String, String>;

struct Outcome {
    failed: usize,
}

impl Outcome {
    fn report(&mut self, name: &str, check: Check) {
        match check {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                self.failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
}

fn verdict(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn label(rng: &mut impl Rng, p: f64) -> Label {
    Label::from(rng.random_bool(p))
}

fn ablation() -> (Check, Check) {
    let start = Instant::now();
    let report = match cmd_eval(&EvalOptions {
        kinds: vec![ModelKind::Lr, ModelKind::Rf],
        ..Default::default()
    }) {
        Ok(r) => r,
        Err(e) => return (Err(format!("{e:#}")), Err(format!("{e:#}"))),
    };
    let secs = start.elapsed().as_secs_f64();
    let acc = |set, kind| report.row(set, kind).map(|r| 100.0 * r.metrics.accuracy).unwrap_or(f64::NAN);
    let rf_all = acc(FeatureSet::All, ModelKind::Rf);
    let lr_vel = acc(FeatureSet::Velocity, ModelKind::Lr);
    let lr_all = acc(FeatureSet::All, ModelKind::Lr);
    let gap = rf_all - lr_vel;
    let lift = lr_all - lr_vel;
    (
        verdict(
            rf_all >= 97.0 && gap >= 30.0 && secs <= 120.0,
            format!(
                "RF(all) {rf_all:.2}% (>= 97), LR(velocity) {lr_vel:.2}%, gap {gap:.2} pp (>= 30), {secs:.1} s (<= 120)"
            ),
        ),
        verdict(
            lift >= 15.0,
            format!("LR(all) {lr_all:.2}% - LR(velocity) {lr_vel:.2}% = {lift:.2} pp (>= 15)"),
        ),
    )
}

fn entropy_signature() -> Check {
    let spec = HistogramSpec::default();
    let mut hits = 0;
    for seed in 0..100u64 {
        let kind = if seed % 2 == 0 { ScenarioKind::TransSlipX } else { ScenarioKind::TransSlipY };
        let ep = generate_episode(&Scenario::new(kind), seed).map_err(|e| e.to_string())?;
        let rows = episode_features(&ep, &spec).map_err(|e| e.to_string())?;
        let (mut s, mut ns, mut t, mut nt) = (0.0, 0usize, 0.0, 0usize);
        for r in &rows {
            if r.label == Some(Label::Slip) {
                s += r.entropy;
                ns += 1;
            } else {
                t += r.entropy;
                nt += 1;
            }
        }
        if ns > 0 && nt > 0 && s / ns as f64 > t / nt as f64 {
            hits += 1;
        }
    }
    verdict(hits >= 95, format!("slip entropy above stable entropy in {hits}/100 episodes (>= 95)"))
}

fn accel_immunity(model: &TrainedModel) -> Check {
    let spec = HistogramSpec::default();
    let (mut nonzero, mut flags, mut frames) = (0usize, 0usize, 0usize);
    for seed in 0..100u64 {
        let scenario = Scenario::new(ScenarioKind::AccelNoSlip).with_noise(0.0);
        let ep = generate_episode(&scenario, seed).map_err(|e| e.to_string())?;
        let rows = episode_features(&ep, &spec).map_err(|e| e.to_string())?;
        nonzero += rows.iter().filter(|r| r.entropy != 0.0).count();
        let mut det = Detector::new(model.clone(), DetectorConfig::default())
            .and_then(|d| d.with_reference(ep.reference.clone()))
            .map_err(|e| e.to_string())?;
        for f in &ep.frames {
            let out = det.ingest_frame(f).map_err(|e| e.to_string())?;
            frames += 1;
            nonzero += (out.features.entropy != 0.0) as usize;
            flags += out.slip as usize;
        }
    }
    verdict(
        nonzero == 0 && flags == 0,
        format!("{frames} replayed frames, {nonzero} with nonzero entropy, {flags} slip flags (both must be 0)"),
    )
}

fn metric_oracle() -> Check {
    let mut mismatches = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // A few seeds use one-sided rates so the degenerate branches run.
        let (pp, pl) = match seed {
            0 => (0.0, 0.0),
            1 => (1.0, 1.0),
            2 => (0.0, 0.7),
            3 => (0.6, 0.0),
            _ => (rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)),
        };
        let pred: Vec<Label> = (0..1000).map(|_| label(&mut rng, pp)).collect();
        let truth: Vec<Label> = (0..1000).map(|_| label(&mut rng, pl)).collect();
        let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
        for i in 0..pred.len() {
            let p = pred[i] == Label::Slip;
            let t = truth[i] == Label::Slip;
            if p && t {
                tp += 1;
            } else if p {
                fp += 1;
            } else if t {
                fn_ += 1;
            } else {
                tn += 1;
            }
        }
        let accuracy = (tp + tn) as f64 / 1000.0;
        let precision = if tp + fp == 0 {
            if tp + fn_ == 0 { 1.0 } else { 0.0 }
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_ == 0 {
            if fp == 0 { 1.0 } else { 0.0 }
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let m = compute_metrics(&pred, &truth).map_err(|e| e.to_string())?;
        let c = m.confusion;
        let same = (c.tp, c.fp, c.fn_, c.tn) == (tp, fp, fn_, tn)
            && m.accuracy == accuracy
            && m.precision == precision
            && m.recall == recall
            && m.f1 == f1;
        mismatches += (!same) as usize;
    }
    verdict(mismatches == 0, format!("{mismatches} of 20 seeds x 1000 pairs differ (must be 0)"))
}

fn lr_gradient_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (n, dim) = (60, 4);
        let x: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_bool(0.5) as u8 as f64).collect();
        let theta: Vec<f64> = (0..=dim).map(|_| rng.random_range(-1.5..1.5)).collect();
        let c = rng.random_range(0.1..10.0);
        let (_, grad) = logistic_objective(&theta, &x, dim, &y, c);
        let h = 1e-5;
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..=dim {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (logistic_objective(&up, &x, dim, &y, c).0 - logistic_objective(&dn, &x, dim, &y, c).0) / (2.0 * h);
            num += (grad[j] - fd).powi(2);
            den += fd.powi(2);
        }
        worst = worst.max(num.sqrt() / den.sqrt().max(1e-12));
    }
    verdict(worst < 1e-4, format!("max relative gradient error {worst:.2e} (< 1e-4)"))
}

fn entropy_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let spec = HistogramSpec::default();
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let n = rng.random_range(1..200);
        let scale = rng.random_range(0.0..20.0);
        let mut field = DisplacementField::zeros(n, 0.0);
        for i in 0..n {
            field.dx[i] = rng.random_range(-scale..=scale);
            field.dy[i] = rng.random_range(-scale..=scale);
        }
        let hist = magnitude_histogram(&field, &spec).map_err(|e| e.to_string())?;
        let got = entropy(&hist).map_err(|e| e.to_string())?;
        let total: u64 = hist.counts.iter().sum();
        let mut want = 0.0;
        for &c in &hist.counts {
            if c > 0 {
                let p = c as f64 / total as f64;
                want -= p * p.ln();
            }
        }
        worst = worst.max((got - want).abs());
    }
    verdict(worst <= 1e-12, format!("max |difference| {worst:.2e} over 500 fields (<= 1e-12)"))
}

fn random_dataset(rng: &mut impl Rng, n: usize, dim: usize, grid: bool) -> LabeledDataset {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    let v = rng.random_range(-3.0f64..3.0);
                    if grid { (v * 4.0).round() / 4.0 } else { v }
                })
                .collect()
        })
        .collect();
    let labels = rows
        .iter()
        .map(|r| Label::from(r[0] * r[1] + 0.4 * r[dim - 1] + rng.random_range(-0.6..0.6) > 0.0))
        .collect();
    LabeledDataset::new((0..dim).map(|i| format!("x{i}")).collect(), rows, labels).unwrap()
}

fn knn_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut mismatches = 0;
    let mut queries = 0;
    for &k in &[1usize, 3, 5, 8] {
        // Quarter-step grid values make distance ties common.
        let data = random_dataset(&mut rng, 300, 3, true);
        let (s, p) = fit_knn(&data, k).map_err(|e| e.to_string())?;
        for _ in 0..200 {
            let q: Vec<f64> = (0..3).map(|_| (rng.random_range(-3.0f64..3.0) * 4.0).round() / 4.0).collect();
            let z = s.transform(&q);
            let mut all: Vec<(f64, usize)> = p
                .points
                .chunks(p.dim)
                .enumerate()
                .map(|(i, r)| (r.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum(), i))
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let want: Vec<usize> = all[..k].iter().map(|&(_, i)| i).collect();
            let slip = want.iter().filter(|&&i| p.labels[i] == 1).count();
            let want_label = Label::from(2 * slip > k);
            queries += 1;
            if p.neighbours(&z) != want || p.vote(&z).0 != want_label {
                mismatches += 1;
            }
        }
    }
    verdict(mismatches == 0, format!("{mismatches} of {queries} queries differ from an exhaustive scan"))
}

/// Independent CART: every feature, every midpoint, weighted Gini, first
/// best split kept, leaves take the strict majority (ties are stable).
enum Cart {
    Leaf(u8),
    Split(usize, f64, Box<Cart>, Box<Cart>),
}

fn cart(rows: &[Vec<f64>], labels: &[u8]) -> Cart {
    let n1 = labels.iter().filter(|&&l| l == 1).count();
    let n0 = labels.len() - n1;
    if n0 == 0 || n1 == 0 {
        return Cart::Leaf((n1 > n0) as u8);
    }
    let gini = |a: usize, b: usize| {
        let n = (a + b) as f64;
        n * (1.0 - (a as f64 / n).powi(2) - (b as f64 / n).powi(2))
    };
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..rows[0].len() {
        let mut vals: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let mut t = 0.5 * (w[0] + w[1]);
            if t >= w[1] {
                t = w[0];
            }
            let mut c = [[0usize; 2]; 2];
            for (r, &l) in rows.iter().zip(labels) {
                c[(r[f] > t) as usize][l as usize] += 1;
            }
            let score = gini(c[0][0], c[0][1]) + gini(c[1][0], c[1][1]);
            if best.is_none_or(|(b, _, _)| score < b - 1e-10) {
                best = Some((score, f, t));
            }
        }
    }
    let Some((_, f, t)) = best else {
        return Cart::Leaf((n1 > n0) as u8);
    };
    let (mut lr, mut ll, mut rr, mut rl) = (vec![], vec![], vec![], vec![]);
    for (r, &l) in rows.iter().zip(labels) {
        if r[f] <= t {
            lr.push(r.clone());
            ll.push(l);
        } else {
            rr.push(r.clone());
            rl.push(l);
        }
    }
    Cart::Split(f, t, Box::new(cart(&lr, &ll)), Box::new(cart(&rr, &rl)))
}

fn cart_predict(t: &Cart, z: &[f64]) -> u8 {
    match t {
        Cart::Leaf(l) => *l,
        Cart::Split(f, th, l, r) => cart_predict(if z[*f] <= *th { l } else { r }, z),
    }
}

fn forest_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut mismatches = 0;
    let mut queries = 0;
    for (n, dim, grid) in [(200, 2, true), (400, 4, false), (300, 3, true)] {
        let data = random_dataset(&mut rng, n, dim, grid);
        let cfg = ForestConfig {
            trees: 1,
            bootstrap: false,
            max_features: MaxFeatures::All,
            ..Default::default()
        };
        let (s, p) = fit_random_forest(&data, &cfg).map_err(|e| e.to_string())?;
        let z: Vec<Vec<f64>> = data.rows().map(|r| s.transform(r)).collect();
        let labels: Vec<u8> = data.labels().iter().map(|l| l.as_u8()).collect();
        let reference = cart(&z, &labels);
        let probes = z.iter().cloned().chain(
            (0..500).map(|_| (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<f64>>()),
        );
        for q in probes {
            queries += 1;
            mismatches += (p.trees[0].predict(&q) != cart_predict(&reference, &q)) as usize;
        }
    }
    verdict(mismatches == 0, format!("{mismatches} of {queries} probes differ from a reference tree"))
}

fn latency(model: &TrainedModel) -> Check {
    let cfg = DemoConfig {
        duration: 400.0,
        ..Default::default()
    };
    let run = run_demo(model, &cfg).map_err(|e| e.to_string())?;
    let stats = run.log.latency_stats().ok_or("empty log")?;
    verdict(
        stats.count >= 10_000 && stats.p99_ms <= 40.0 && stats.mean_ms <= 10.0,
        format!(
            "{} frames, mean {:.4} ms (<= 10), p99 {:.4} ms (<= 40), max {:.4} ms",
            stats.count, stats.mean_ms, stats.p99_ms, stats.max_ms
        ),
    )
}

/// Rechecks the demo from the written log alone.
fn demo(model_path: &std::path::Path, dir: &std::path::Path) -> Check {
    let log_path = dir.join("demo_log.csv");
    let run = cmd_demo(&DemoOptions {
        model: Some(model_path.to_path_buf()),
        config: None,
        seed: None,
        out: Some(log_path.clone()),
        report: None,
    })
    .map_err(|e| format!("{e:#}"))?;
    let file = std::fs::File::open(&log_path).map_err(|e| e.to_string())?;
    let log = EpisodeLog::read_csv(file).map_err(|e| e.to_string())?;
    let mut runs: Vec<Stage> = Vec::new();
    for r in &log.records {
        let s = Stage::parse_label(&r.phase).ok_or_else(|| format!("bad phase label {}", r.phase))?;
        if runs.last() != Some(&s) {
            runs.push(s);
        }
    }
    let ordered = runs == Stage::ORDER;
    let force = |r: &tactslip_core::detector::LogRecord| r.force_cmd.unwrap_or(f64::NAN);
    let first = log.records.first().map(force).unwrap_or(f64::NAN);
    let last = log.records.last().map(force).unwrap_or(f64::NAN);
    let t_end = log.records.last().map(|r| r.t).unwrap_or(0.0);
    let window_start = t_end - DemoConfig::default().final_window;
    let tail: Vec<_> = log.records.iter().filter(|r| r.t > window_start + 1e-9).collect();
    let flags = tail.iter().filter(|r| r.slip).count();
    let rate = tail.iter().map(|r| r.entropy_rate).sum::<f64>() / tail.len().max(1) as f64;
    let delta = DemoConfig::default().rate_delta;
    let sequence: Vec<&str> = runs.iter().map(|s| s.as_str()).collect();
    verdict(
        ordered && last > first && flags == 0 && rate.abs() < delta && run.report.reproduces_sequence(),
        format!(
            "phases {}, force {first} -> {last} N, {flags} flags in final 2 s, |mean dE/dt| {:.4} < {delta}",
            sequence.join(" > "),
            rate.abs()
        ),
    )
}

fn settling(model: &TrainedModel) -> Check {
    let mut lines = Vec::new();
    let mut ok = true;
    for (peak, mu) in [(4.0, 0.5), (5.2, 0.6), (2.7, 0.4), (3.0, 0.5), (6.0, 0.8)] {
        let mut cfg = DemoConfig {
            peak_load: peak,
            load_ramp: 6.0,
            duration: 14.0,
            ..Default::default()
        };
        cfg.physics.mu = mu;
        let df = cfg.grip.delta_f;
        let want = (peak / mu / df).ceil() * df;
        match run_demo(model, &cfg) {
            Ok(run) => {
                let got = run.report.final_force;
                ok &= (got - want).abs() <= df + 1e-9;
                lines.push(format!("T={peak} mu={mu}: {got} vs {want}"));
            }
            Err(e) => {
                ok = false;
                lines.push(format!("T={peak} mu={mu}: {e}"));
            }
        }
    }
    verdict(ok, format!("settled force vs oracle within +-dF: {}", lines.join("; ")))
}

fn real_data() -> Option<Check> {
    let path = std::env::var_os("TACTSLIP_DATASET")?;
    let check = cmd_eval(&EvalOptions {
        data: Some(PathBuf::from(path)),
        folds: Some(5),
        kinds: vec![ModelKind::Rf],
        feature_sets: vec![FeatureSet::All],
        ..Default::default()
    })
    .map_err(|e| format!("{e:#}"))
    .and_then(|r| {
        let acc = 100.0 * r.rows[0].metrics.accuracy;
        verdict(acc >= 95.0, format!("RF 5-fold CV accuracy {acc:.2}% (>= 95)"))
    });
    Some(check)
}

fn main() {
    let mut out = Outcome { failed: 0 };
    let total = Instant::now();
    assert_eq!(DatasetConfig::default().seed, 42);

    let (ablation_check, lift_check) = ablation();
    out.report("1 ablation structure", ablation_check);
    out.report("2 LR feature lift", lift_check);
    out.report("3 entropy slip signature", entropy_signature());

    let model = default_model().expect("training the default detector model");
    out.report("4 acceleration confound immunity", accel_immunity(&model));
    out.report("5 metric oracle", metric_oracle());
    out.report("6a LR gradient oracle", lr_gradient_oracle());
    out.report("6b entropy oracle", entropy_oracle());
    out.report("6c KNN oracle", knn_oracle());
    out.report("6d RF single-tree oracle", forest_oracle());
    out.report("7 real-time budget", latency(&model));

    let dir = tempfile::tempdir().expect("temp dir");
    let model_path = dir.path().join("rf_all.json");
    model.save(&model_path).expect("saving model");
    out.report("8 demo reproduction", demo(&model_path, dir.path()));
    out.report("9 closed-loop force settling", settling(&model));
    match real_data() {
        Some(c) => out.report("10 published dataset", c),
        None => println!("SKIP  10 published dataset: TACTSLIP_DATASET not set"),
    }

    println!("{} failed, total {:.1} s", out.failed, total.elapsed().as_secs_f64());
    if out.failed > 0 {
        std::process::exit(1);
    }
}
