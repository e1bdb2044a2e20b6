//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test -p isocluster --test acceptance -- 7 10`.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use isocluster::datagen::{generate_mixture, ClassSizes, MixtureSpec, MultilabelSpec};
use isocluster::geometry::{variance_from_pairs, PointCloud};
use isocluster::labels::{Label, LabelAssignment};
use isocluster::loss::{bce_multilabel_loss, cross_entropy_loss, LossGrad};
use isocluster::metrics::{chord_cos_identity_residual, isoscore, reoriented_variance, silhouette};
use isocluster::objectives::{classifier_objective, triplet_objective_and_bound, ClassifierHead};
use isocluster::stats::correlate;
use isocluster::train::{run_experiment, LossKind, TrainConfig};
use isocluster::trajectory::Trajectory;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize, d: usize) -> PointCloud {
    // per-axis scale and offset so the variances differ by orders of magnitude
    let scales: Vec<f64> = (0..d).map(|_| 10f64.powf(rng.random_range(-2.0..2.0))).collect();
    let offsets: Vec<f64> = (0..d).map(|_| rng.random_range(-50.0..50.0)).collect();
    let data = (0..n * d)
        .map(|i| offsets[i % d] + scales[i % d] * gauss(rng))
        .collect();
    PointCloud::new(data, d).unwrap()
}

/// Labels `0..k` with every class used at least once, shuffled.
fn random_labels(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
    for i in (1..n).rev() {
        ids.swap(i, rng.random_range(0..=i));
    }
    ids
}

fn assignment(ids: &[usize]) -> LabelAssignment {
    let names: Vec<String> = ids.iter().map(|i| format!("k{i}")).collect();
    LabelAssignment::from_symbols(&names).unwrap()
}

fn two_pass_variance(cloud: &PointCloud) -> Vec<f64> {
    let n = cloud.len() as f64;
    (0..cloud.dim())
        .map(|j| {
            let mean = cloud.rows().map(|r| r[j]).sum::<f64>() / n;
            cloud.rows().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=64);
        let d = rng.random_range(1..=16);
        let cloud = random_cloud(&mut rng, n, d);
        let got = variance_from_pairs(&cloud);
        let want = two_pass_variance(&cloud);
        for (g, w) in got.values().iter().zip(&want) {
            let rel = (g - w).abs() / w.abs().max(f64::MIN_POSITIVE);
            worst = worst.max(if *w == 0.0 { g.abs() } else { rel });
        }
    }
    let t = start.elapsed();
    outcome(
        worst < 1e-9 && t < Duration::from_secs(10),
        format!("1000 clouds, worst relative error {worst:.2e}, {:.2}s", t.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(3..=64);
        let d = rng.random_range(2..=16);
        let cloud = random_cloud(&mut rng, n, d);
        let library = chord_cos_identity_residual(&cloud).unwrap();
        // half-angle form cos^2(a/2) = (1 + cos a) / 2, no inverse trig
        let v = reoriented_variance(&cloud).unwrap();
        let v = v.values();
        let df = d as f64;
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let chord2: f64 = v.iter().map(|x| (x * df.sqrt() / len - 1.0).powi(2)).sum();
        let cos = v.iter().sum::<f64>() / (len * df.sqrt());
        let oracle = (chord2 / (4.0 * df) - 1.0 + (1.0 + cos) / 2.0).abs();
        worst = worst.max(library).max(oracle);
    }
    let t = start.elapsed();
    outcome(
        worst < 1e-9 && t < Duration::from_secs(5),
        format!("100 clouds, worst residual {worst:.2e}, {:.2}s", t.as_secs_f64()),
    )
}

fn sign(a: usize, b: usize) -> f64 {
    if a == b {
        -1.0
    } else {
        1.0
    }
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    let mut worst_balanced: f64 = 0.0;
    for instance in 0..200 {
        // every fourth instance is balanced binary
        let balanced = instance % 4 == 0;
        let (n, k) = if balanced {
            (2 * rng.random_range(1..=6), 2)
        } else {
            (rng.random_range(2..=12), rng.random_range(2..=3usize))
        };
        let k = k.min(n);
        let ids = if balanced {
            let mut ids: Vec<usize> = (0..n).map(|i| i % 2).collect();
            for i in (1..n).rev() {
                ids.swap(i, rng.random_range(0..=i));
            }
            ids
        } else {
            random_labels(&mut rng, n, k)
        };
        let d = rng.random_range(1..=6);
        let cloud = random_cloud(&mut rng, n, d);
        let columns: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| 3.0 * gauss(&mut rng)).collect()).collect();
        let head = ClassifierHead::from_class_vectors(&columns).unwrap();
        let labels = assignment(&ids);
        let lib = classifier_objective(&cloud, &labels, &head).unwrap();

        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        let mut direct = 0.0;
        let mut dist_term = 0.0;
        let mut data_term = 0.0;
        for (row, &t) in cloud.rows().zip(&ids) {
            for (w, c) in columns.iter().enumerate() {
                direct -= sign(w, t) * dot(row, c);
                dist_term += 0.5 * sign(w, t) * sq(row, c);
            }
            data_term -= (k as f64 - 2.0) / 2.0 * dot(row, row);
        }
        let class_term: f64 = columns
            .iter()
            .enumerate()
            .map(|(w, c)| {
                let size = ids.iter().filter(|&&t| t == w).count() as f64;
                -(n as f64 - 2.0 * size) / 2.0 * dot(c, c)
            })
            .sum();
        let expanded = data_term + class_term + dist_term;
        let scale = direct.abs().max(1.0);
        for diff in [
            direct - expanded,
            lib.direct - direct,
            lib.expanded() - expanded,
            lib.direct - lib.expanded(),
        ] {
            worst = worst.max(diff.abs() / scale);
        }
        if balanced {
            worst_balanced = worst_balanced
                .max(lib.data_norm_term.abs())
                .max(lib.class_norm_term.abs())
                .max(data_term.abs())
                .max(class_term.abs());
        }
    }
    outcome(
        worst < 1e-9 && worst_balanced < 1e-9,
        format!("200 instances, worst direct/expanded gap {worst:.2e}, balanced norm terms {worst_balanced:.2e}"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut all_one = true;
    let mut all_decrease = true;
    let mut perturbations = 0;
    let mut max_after: f64 = f64::NEG_INFINITY;
    for _ in 0..20 {
        let k = rng.random_range(2..=5);
        let d = rng.random_range(1..=8);
        let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(2..=6)).collect();
        let centers: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| 5.0 * gauss(&mut rng)).collect()).collect();
        let mut data = Vec::new();
        let mut ids = Vec::new();
        for (c, &s) in sizes.iter().enumerate() {
            for _ in 0..s {
                data.extend(&centers[c]);
                ids.push(c);
            }
        }
        let labels = assignment(&ids);
        let cloud = PointCloud::new(data.clone(), d).unwrap();
        let base = silhouette(&cloud, &labels).unwrap().mean;
        all_one &= base == 1.0;
        for i in 0..ids.len() {
            let dir: Vec<f64> = (0..d).map(|_| gauss(&mut rng)).collect();
            let len = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            let mut moved = data.clone();
            for (j, x) in dir.iter().enumerate() {
                moved[i * d + j] += 1e-3 * x / len;
            }
            let after = silhouette(&PointCloud::new(moved, d).unwrap(), &labels).unwrap().mean;
            all_decrease &= after < base;
            max_after = max_after.max(after);
            perturbations += 1;
        }
    }
    outcome(
        all_one && all_decrease,
        format!(
            "20 collapsed layouts at exactly 1: {all_one}; {perturbations} perturbations all lower: {all_decrease} (max after {max_after:.9})"
        ),
    )
}

fn fd_check(
    rng: &mut ChaCha8Rng,
    eval: &dyn Fn(&[f64], &ClassifierHead) -> LossGrad,
    points: &[f64],
    head: &ClassifierHead,
) -> f64 {
    let h = 1e-5;
    let analytic = eval(points, head);
    let rel = |a: f64, f: f64| (a - f).abs() / a.abs().max(f.abs()).max(1e-3);
    let mut worst: f64 = 0.0;
    // a random subset of point coordinates plus every head parameter
    for _ in 0..12 {
        let i = rng.random_range(0..points.len());
        let mut plus = points.to_vec();
        let mut minus = points.to_vec();
        plus[i] += h;
        minus[i] -= h;
        let f = (eval(&plus, head).loss - eval(&minus, head).loss) / (2.0 * h);
        worst = worst.max(rel(analytic.points[i], f));
    }
    for i in 0..head.weights().len() {
        let mut plus = head.clone();
        let mut minus = head.clone();
        plus.weights_mut()[i] += h;
        minus.weights_mut()[i] -= h;
        let f = (eval(points, &plus).loss - eval(points, &minus).loss) / (2.0 * h);
        worst = worst.max(rel(analytic.weights[i], f));
    }
    if let Some(gb) = &analytic.bias {
        for (i, g) in gb.iter().enumerate() {
            let mut plus = head.clone();
            let mut minus = head.clone();
            plus.bias_mut().unwrap()[i] += h;
            minus.bias_mut().unwrap()[i] -= h;
            let f = (eval(points, &plus).loss - eval(points, &minus).loss) / (2.0 * h);
            worst = worst.max(rel(*g, f));
        }
    }
    worst
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst_ce: f64 = 0.0;
    let mut worst_bce: f64 = 0.0;
    for instance in 0..50 {
        let n = rng.random_range(2..=8);
        let d = rng.random_range(1..=5);
        let k = rng.random_range(2..=4);
        let with_bias = instance % 2 == 0;
        let cloud = random_cloud(&mut rng, n, d).map(|x| x / 10.0).unwrap();
        let mut head = ClassifierHead::random(d, k, with_bias, &mut rng).unwrap();
        if let Some(b) = head.bias_mut() {
            b.iter_mut().for_each(|x| *x = gauss(&mut rng));
        }

        let ids = random_labels(&mut rng, n, k.min(n));
        let symbols: Vec<String> = (0..k).map(|c| format!("k{c}")).collect();
        let single: Vec<Label> = ids.iter().map(|&i| Label::single(symbols[i].clone()).unwrap()).collect();
        let ce_labels = LabelAssignment::new(single, symbols.clone()).unwrap();
        let ce = |p: &[f64], h: &ClassifierHead| {
            cross_entropy_loss(&PointCloud::new(p.to_vec(), d).unwrap(), &ce_labels, h).unwrap()
        };
        worst_ce = worst_ce.max(fd_check(&mut rng, &ce, cloud.as_slice(), &head));

        let multi: Vec<Label> = ids
            .iter()
            .map(|&i| {
                let mut set = vec![symbols[i].clone()];
                set.extend(symbols.iter().filter(|_| rng.random_bool(0.4)).cloned());
                Label::new(set).unwrap()
            })
            .collect();
        let bce_labels = LabelAssignment::new(multi, symbols).unwrap();
        let bce = |p: &[f64], h: &ClassifierHead| {
            bce_multilabel_loss(&PointCloud::new(p.to_vec(), d).unwrap(), &bce_labels, h).unwrap()
        };
        worst_bce = worst_bce.max(fd_check(&mut rng, &bce, cloud.as_slice(), &head));
    }
    outcome(
        worst_ce < 1e-4 && worst_bce < 1e-4,
        format!("50 instances, worst relative error CE {worst_ce:.2e}, BCE {worst_bce:.2e}"),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut violations = 0;
    let mut oracle_gap: f64 = 0.0;
    let mut min_slack = f64::INFINITY;
    for _ in 0..200 {
        let n = rng.random_range(3..=10);
        let k = rng.random_range(2..=3usize).min(n - 1);
        let d = rng.random_range(1..=4);
        // k < n, so some class has two members and a valid triple exists
        let ids = random_labels(&mut rng, n, k);
        let cloud = random_cloud(&mut rng, n, d);
        let labels = assignment(&ids);
        let lib = triplet_objective_and_bound(&cloud, &labels).unwrap();

        let dist = |a: usize, b: usize| {
            cloud.row(a).iter().zip(cloud.row(b)).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
        };
        let mut objective = 0.0;
        for a in 0..n {
            for p in 0..n {
                for q in 0..n {
                    if p != a && ids[p] == ids[a] && ids[q] != ids[a] {
                        objective -= (dist(a, p) - dist(a, q)).max(0.0);
                    }
                }
            }
        }
        let mut size = BTreeMap::new();
        for &t in &ids {
            *size.entry(t).or_insert(0i64) += 1;
        }
        let mut bound = 0.0;
        for j in 0..n {
            for l in 0..n {
                let w = if ids[j] == ids[l] { size[&ids[j]] - n as i64 } else { size[&ids[j]] - 1 };
                bound += w as f64 * dist(j, l);
            }
        }
        let scale = bound.abs().max(1.0);
        oracle_gap = oracle_gap
            .max((objective - lib.objective).abs() / scale)
            .max((bound - lib.bound).abs() / scale);
        // the bound is attained when every hinge is active; allow rounding there
        if objective > bound + 1e-12 * scale {
            violations += 1;
        }
        min_slack = min_slack.min(bound - objective);
    }
    outcome(
        violations == 0 && oracle_gap < 1e-9,
        format!("200 instances, {violations} violations, min slack {min_slack:.3e}, library vs oracle {oracle_gap:.1e}"),
    )
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

fn headline_data() -> (PointCloud, LabelAssignment) {
    generate_mixture(&MixtureSpec {
        num_classes: 4,
        dim: 64,
        points_per_class: ClassSizes::Uniform(500),
        center_spread: 1.0,
        within_std: 1.0,
        multilabel: None,
        seed: 7,
    })
    .unwrap()
}

fn headline_config(seed: u64) -> TrainConfig {
    TrainConfig {
        steps: 500,
        loss: LossKind::CrossEntropy,
        metric_cadence: 1,
        seed,
        ..TrainConfig::default()
    }
}

/// Directional and correlation checks shared by both replication criteria.
fn replication_summary(t: &Trajectory, rho_max: f64) -> (bool, String) {
    let first = t.first().unwrap();
    let last = t.last().unwrap();
    let (s0, s1) = (first.silhouette.unwrap(), last.silhouette.unwrap());
    let (i0, i1) = (first.isoscore.unwrap(), last.isoscore.unwrap());
    let c = correlate(&t.silhouettes(), &t.isoscores()).unwrap();
    let pass = s1 > s0 && i1 < i0 && c.pearson_r <= -0.8 && c.spearman_rho <= rho_max;
    (
        pass,
        format!(
            "sil {s0:.4}->{s1:.4}, iso {i0:.4}->{i1:.4}, r {:.4}, rho {:.4}",
            c.pearson_r, c.spearman_rho
        ),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let (cloud, labels) = headline_data();
    let mut pass = true;
    let mut final_sil = Vec::new();
    let mut final_iso = Vec::new();
    for seed in 0..5 {
        let t = run_experiment(&cloud, &labels, &headline_config(seed)).unwrap();
        let (ok, line) = replication_summary(&t, -0.95);
        pass &= ok && t.len() == 500;
        println!("  criterion 7 seed {seed}: {} {line}", if ok { "ok" } else { "FAIL" });
        final_sil.push(t.last().unwrap().silhouette.unwrap());
        final_iso.push(t.last().unwrap().isoscore.unwrap());
    }
    let (sd_sil, sd_iso) = (std_dev(&final_sil), std_dev(&final_iso));
    let elapsed = start.elapsed();
    pass &= sd_sil < 0.05 && sd_iso < 0.05 && elapsed < Duration::from_secs(300);
    outcome(
        pass,
        format!(
            "5 seeds, final sil {:.4} (sd {sd_sil:.4}), final iso {:.4} (sd {sd_iso:.4}), {:.1}s",
            mean(&final_sil),
            mean(&final_iso),
            elapsed.as_secs_f64(),
        ),
    )
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let (cloud, labels) = generate_mixture(&MixtureSpec {
        num_classes: 4,
        dim: 32,
        points_per_class: ClassSizes::Uniform(250),
        center_spread: 1.0,
        within_std: 1.0,
        multilabel: Some(MultilabelSpec {
            num_symbols: 4,
            symbol_prob: 0.1,
        }),
        seed: 8,
    })
    .unwrap();
    let config = TrainConfig {
        steps: 500,
        loss: LossKind::BinaryCrossEntropy,
        ..TrainConfig::default()
    };
    let t = run_experiment(&cloud, &labels, &config).unwrap();
    let (pass, line) = replication_summary(&t, -0.9);
    outcome(
        pass,
        format!(
            "{} composite labels, {line}, {:.1}s",
            labels.counts().len(),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let d = 8;
    let mut line = vec![0.0; 200 * d];
    for i in 0..200 {
        line[i * d] = rng.random_range(-5.0..5.0);
    }
    let axis = isoscore(&PointCloud::new(line, d).unwrap()).unwrap().score;
    let blob: Vec<f64> = (0..10_000 * d).map(|_| gauss(&mut rng)).collect();
    let gaussian = isoscore(&PointCloud::new(blob, d).unwrap()).unwrap().score;
    outcome(
        axis <= 0.02 && gaussian >= 0.95,
        format!("axis line {axis:.3e}, identity Gaussian {gaussian:.4}"),
    )
}

fn criterion_10() -> Outcome {
    let (cloud, labels) = headline_data();
    let a = run_experiment(&cloud, &labels, &headline_config(0)).unwrap().to_csv_string();
    let b = run_experiment(&cloud, &labels, &headline_config(0)).unwrap().to_csv_string();
    outcome(
        a.as_bytes() == b.as_bytes(),
        format!("{} bytes, {} rows", a.len(), a.lines().count() - 1),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (1, "variance identity", criterion_1),
        (2, "chord-cosine identity", criterion_2),
        (3, "classifier objective expansion", criterion_3),
        (4, "collapsed-cluster optimum", criterion_4),
        (5, "gradient correctness", criterion_5),
        (6, "triplet upper bound", criterion_6),
        (7, "headline replication", criterion_7),
        (8, "multi-label replication", criterion_8),
        (9, "IsoScore endpoints", criterion_9),
        (10, "determinism", criterion_10),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {name}: {} ({})",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
