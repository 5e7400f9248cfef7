//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::HashSet;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use papq::audit::{audit_mechanism, EmpiricalMean, PrvqMechanism, TraceConfig};
use papq::cover::threshold_cover_disagreement;
use papq::pmw::{pmw_release, required_private_samples, required_private_samples_raw, LabelMatrix, PmwConfig};
use papq::release::{evaluate_error, theorem1_samples, EmpiricalRelease, PrvqOptions};
use papq::repdomain::{from_hypotheses, DEFAULT_SIZE_CAP};
use papq::{
    build_cover, build_representative_domain, evaluate, map_dataset, prvq_with_options, public_sample_size,
    sauer_bound, Distribution, DomainPoint, DomainSpec, Hypothesis, HypothesisClass, Label,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Independent VC oracle: a set is shattered iff the class realizes all
/// `2^k` labelings of it.
fn naive_vc(rows: &[Vec<Label>], ncols: usize) -> usize {
    let mut best = 0;
    for k in 1..=ncols {
        let mut found = false;
        for mask in 0u32..(1u32 << ncols) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let cols: Vec<usize> = (0..ncols).filter(|c| mask >> c & 1 == 1).collect();
            let seen: HashSet<Vec<Label>> = rows.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect();
            if seen.len() == 1 << k {
                found = true;
                break;
            }
        }
        if !found {
            break;
        }
        best = k;
    }
    best
}

fn random_class(rng: &mut ChaCha8Rng, max_domain: usize) -> HypothesisClass {
    let n = rng.gen_range(1..=max_domain);
    let k = rng.gen_range(1..=20usize.min(1 << n));
    let mut rows: Vec<Vec<Label>> = Vec::new();
    let mut seen = HashSet::new();
    while rows.len() < k {
        let r: Vec<Label> = (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
        if seen.insert(r.clone()) {
            rows.push(r);
        }
    }
    HypothesisClass::explicit((0..n).map(serde_json::Value::from).collect(), rows).unwrap()
}

fn elements(class: &HypothesisClass) -> usize {
    match &class.kind {
        papq::ClassKind::Explicit(c) => c.domain.len(),
        _ => unreachable!(),
    }
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut violations = 0;
    for _ in 0..500 {
        let class = random_class(&mut rng, 16);
        let size = elements(&class);
        let t_len = rng.gen_range(0..=size);
        let mut ids: Vec<usize> = (0..size).collect();
        for i in 0..t_len {
            let j = rng.gen_range(i..size);
            ids.swap(i, j);
        }
        let t: Vec<DomainPoint> = ids[..t_len].iter().map(|&e| DomainPoint::Element(e)).collect();
        let cover = build_cover(&class, &t).unwrap();
        let restricted: Vec<Vec<Label>> = class
            .enumerate()
            .unwrap()
            .iter()
            .map(|h| t.iter().map(|x| evaluate(h, x).unwrap()).collect())
            .collect();
        let d = naive_vc(&restricted, t_len);
        if cover.len() as f64 > sauer_bound(t_len, d) + 1e-9 {
            violations += 1;
        }
        let all: Vec<DomainPoint> = (0..size).map(DomainPoint::Element).collect();
        let rep = build_representative_domain(&cover, DomainSpec::for_class(&class), DEFAULT_SIZE_CAP).unwrap();
        let dual_rows: Vec<Vec<Label>> = all
            .iter()
            .map(|x| {
                cover
                    .representatives()
                    .iter()
                    .map(|h| evaluate(h, x).unwrap())
                    .collect()
            })
            .collect();
        let p_dual = naive_vc(&dual_rows, cover.len());
        if rep.len() as f64 > sauer_bound(cover.len(), p_dual) + 1e-9 {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("{violations} violations over 500 classes"))
}

fn criterion_2() -> Outcome {
    let m = public_sample_size(1, 0.2, 0.1, 4.0).unwrap();
    let dist = Distribution::uniform(0.0, 1.0).unwrap();
    let class = HypothesisClass::thresholds(0.0, 1.0).unwrap();
    let mut ok = 0;
    for trial in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + trial);
        let cover = build_cover(&class, &dist.sample_n(m, &mut rng)).unwrap();
        if threshold_cover_disagreement(&cover, &dist).unwrap() <= 0.05 {
            ok += 1;
        }
    }
    outcome(
        ok >= 180,
        format!("m = {m}, alpha/4-cover in {ok}/200 trials (need 180)"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut violations = 0;
    // Exhaustive: random finite classes with at most 12 elements.
    for _ in 0..300 {
        let class = random_class(&mut rng, 12);
        let size = elements(&class);
        let w: Vec<DomainPoint> = (0..rng.gen_range(0..=size))
            .map(|_| DomainPoint::Element(rng.gen_range(0..size)))
            .collect();
        let cover = build_cover(&class, &w).unwrap();
        let rep = build_representative_domain(&cover, DomainSpec::for_class(&class), DEFAULT_SIZE_CAP).unwrap();
        for e in 0..size {
            let x = DomainPoint::Element(e);
            let r = rep.point(rep.locate(&x).unwrap()).clone();
            for h in cover.representatives() {
                if evaluate(h, &x).unwrap() != evaluate(h, &r).unwrap() {
                    violations += 1;
                }
            }
        }
    }
    // Sampled pairs: thresholds.
    let dist = Distribution::uniform(0.0, 1.0).unwrap();
    let thresholds = HypothesisClass::thresholds(0.0, 1.0).unwrap();
    let cover = build_cover(&thresholds, &dist.sample_n(200, &mut rng)).unwrap();
    let rep = build_representative_domain(&cover, DomainSpec::Reals, DEFAULT_SIZE_CAP).unwrap();
    for _ in 0..10_000 {
        let x = DomainPoint::Real(rng.gen_range(-0.5..1.5));
        let h = &cover.representatives()[rng.gen_range(0..cover.len())];
        if evaluate(h, &x).unwrap() != evaluate(h, rep.point(rep.locate(&x).unwrap())).unwrap() {
            violations += 1;
        }
    }
    // Sampled pairs: stumps.
    let p = 40;
    let hs: Vec<Hypothesis> = (0..12).map(|_| Hypothesis::stump(rng.gen_range(1..=p))).collect();
    let rep_s = from_hypotheses(&hs, DomainSpec::Hypercube { p }, DEFAULT_SIZE_CAP).unwrap();
    let cube = Distribution::product_hypercube(vec![0.0; p]).unwrap();
    for _ in 0..10_000 {
        let x = cube.sample(&mut rng);
        let h = &hs[rng.gen_range(0..hs.len())];
        if evaluate(h, &x).unwrap() != evaluate(h, rep_s.point(rep_s.locate(&x).unwrap())).unwrap() {
            violations += 1;
        }
    }
    // Neighbor preservation.
    let mut neighbor_bad = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..50);
        let a = dist.sample_n(n, &mut rng);
        let mut b = a.clone();
        b[rng.gen_range(0..n)] = DomainPoint::Real(rng.gen_range(-0.5..1.5));
        let (ma, mb) = (map_dataset(&rep, &a).unwrap(), map_dataset(&rep, &b).unwrap());
        let diff = ma.iter().zip(&mb).filter(|(u, v)| u != v).count();
        if ma.len() != mb.len() || diff > 1 {
            neighbor_bad += 1;
        }
    }
    outcome(
        violations == 0 && neighbor_bad == 0,
        format!("{violations} fidelity violations, {neighbor_bad} neighbor violations"),
    )
}

fn random_labels(rng: &mut ChaCha8Rng, q: usize, x: usize) -> Vec<Vec<Label>> {
    (0..q)
        .map(|_| (0..x).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect())
        .collect()
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst_ratio = 0.0f64;
    let mut bad = 0;
    for alpha in [0.05, 0.1, 0.2] {
        for _ in 0..20 {
            let x = rng.gen_range(2..=256);
            let q = rng.gen_range(1..=64);
            let labels = random_labels(&mut rng, q, x);
            let skew: Vec<f64> = (0..x).map(|_| rng.gen::<f64>().powi(3)).collect();
            let total: f64 = skew.iter().sum();
            let cum: Vec<f64> = skew
                .iter()
                .scan(0.0, |a, w| {
                    *a += w / total;
                    Some(*a)
                })
                .collect();
            let n = rng.gen_range(1..5000);
            let s: Vec<usize> = (0..n)
                .map(|_| {
                    let u: f64 = rng.gen();
                    cum.partition_point(|&c| c < u).min(x - 1)
                })
                .collect();
            let cfg = PmwConfig::new(alpha, 0.1, 1.0, 1e-5).unwrap().with_noise_off(true);
            let out = pmw_release(&s, &LabelMatrix::new(labels.clone()).unwrap(), &cfg, &mut rng).unwrap();
            for (row, g) in labels.iter().zip(&out.answers) {
                let a = s.iter().map(|&i| f64::from(row[i])).sum::<f64>() / n as f64;
                let gap = (g - a).abs();
                worst_ratio = worst_ratio.max(gap / alpha);
                if gap > alpha / 2.0 + 1e-12 {
                    bad += 1;
                }
            }
        }
    }
    outcome(
        bad == 0,
        format!("{bad} queries off by more than alpha/2; worst gap = {worst_ratio:.3}·alpha"),
    )
}

fn criterion_5() -> Outcome {
    let mut setup = ChaCha8Rng::seed_from_u64(505);
    let labels = random_labels(&mut setup, 32, 128);
    let raw: Vec<f64> = (0..128).map(|_| -setup.gen::<f64>().ln()).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let truth: Vec<f64> = labels
        .iter()
        .map(|row| row.iter().zip(&weights).map(|(&l, w)| f64::from(l) * w).sum())
        .collect();
    let cum: Vec<f64> = weights
        .iter()
        .scan(0.0, |a, w| {
            *a += w;
            Some(*a)
        })
        .collect();
    let queries = LabelMatrix::new(labels).unwrap();
    let cfg = PmwConfig::new(0.1, 0.1, 1.0, 1e-5).unwrap();
    let mut ok = 0;
    let mut errs = Vec::new();
    for trial in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + trial);
        let s: Vec<usize> = (0..50_000)
            .map(|_| {
                let u: f64 = rng.gen();
                cum.partition_point(|&c| c < u).min(127)
            })
            .collect();
        let out = pmw_release(&s, &queries, &cfg, &mut rng).unwrap();
        let err = out
            .answers
            .iter()
            .zip(&truth)
            .map(|(g, t)| (g - t).abs())
            .fold(0.0, f64::max);
        errs.push(err);
        if err <= 0.1 {
            ok += 1;
        }
    }
    errs.sort_by(f64::total_cmp);
    outcome(
        ok >= 45,
        format!("error <= 0.1 in {ok}/50 trials (need 45), median {:.4}", errs[25]),
    )
}

fn threshold_trials(m: usize, trials: u64, seed: u64) -> (usize, usize) {
    let dist = Distribution::uniform(0.0, 1.0).unwrap();
    let class = HypothesisClass::thresholds(0.0, 1.0).unwrap();
    let (mut pap_ok, mut public_fail) = (0, 0);
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + trial);
        let w = dist.sample_n(m, &mut rng);
        let x = dist.sample_n(20_000, &mut rng);
        let g = prvq_with_options(&x, &w, &class, 0.15, 0.1, 1.0, 1e-5, &PrvqOptions::default(), &mut rng).unwrap();
        if evaluate_error(&g, &dist, &class, None).unwrap().error <= 0.15 {
            pap_ok += 1;
        }
        if evaluate_error(&EmpiricalRelease::new(w), &dist, &class, None)
            .unwrap()
            .error
            > 0.15
        {
            public_fail += 1;
        }
    }
    (pap_ok, public_fail)
}

fn criterion_6() -> Outcome {
    let (ok_500, _) = threshold_trials(500, 50, 6000);
    let m_small = (9.0f64 / 0.15).ceil() as usize;
    let (ok_small, public_fail) = threshold_trials(m_small, 200, 7000);
    let pass = ok_500 >= 45 && ok_small * 10 >= 9 * 200 && public_fail * 10 >= 8 * 200;
    outcome(
        pass,
        format!(
            "m=500: {ok_500}/50 within 0.15; m={m_small}: pap {ok_small}/200 within 0.15, public-only above 0.15 in {public_fail}/200"
        ),
    )
}

fn criterion_7() -> Outcome {
    let cfg = TraceConfig {
        p: 4096,
        n: 32,
        m: 0,
        alpha: 0.1,
        trials: 200,
        fpr_target: 0.01,
        null_calibration_draws: 5000,
        nonmember_draws: 0,
    };
    let emp = audit_mechanism(&EmpiricalMean, &cfg, 77).unwrap();
    let pap = audit_mechanism(&PrvqMechanism::new(0.1, 0.1, 1.0, 1e-5), &cfg, 77).unwrap();
    let pass = emp.member_in_rate >= 0.10 && emp.nonmember_in_rate <= 0.02 && pap.member_in_rate <= 0.03;
    outcome(
        pass,
        format!(
            "empirical mean: member {:.4}, nonmember {:.4}; prvq: member {:.4}, nonmember {:.4}",
            emp.member_in_rate, emp.nonmember_in_rate, pap.member_in_rate, pap.nonmember_in_rate
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut failures = Vec::new();
    let base = theorem1_samples(3, 1, 0.1, 0.1, 1.0, 1e-5, 1.0, 1.0).unwrap();
    for p in [4usize, 9, 16, 100] {
        let b = theorem1_samples(3, p, 0.1, 0.1, 1.0, 1e-5, 1.0, 1.0).unwrap();
        let ratio = b.n_raw / base.n_raw;
        if (ratio - (p as f64).sqrt()).abs() > 1e-12 * ratio {
            failures.push(format!("sqrt(p) scaling at p={p}: {ratio}"));
        }
    }
    for eps in [0.5, 0.25, 0.125] {
        let b = theorem1_samples(3, 1, 0.1, 0.1, eps, 1e-5, 1.0, 1.0).unwrap();
        if b.n_raw * eps != base.n_raw {
            failures.push(format!("1/eps scaling at eps={eps}"));
        }
    }
    for (eps, delta) in [(0.1, 1e-9), (0.5, 0.3), (1.0, 1e-2)] {
        let b = theorem1_samples(3, 7, 0.1, 0.1, eps, delta, 1.0, 1.0).unwrap();
        if b.m != base.m || b.m_raw != base.m_raw {
            failures.push(format!("m changed at eps={eps}, delta={delta}"));
        }
    }
    let mut prev = u64::MAX;
    for i in 1..=10 {
        let alpha = 0.05 * i as f64;
        let n = required_private_samples(256, 64, alpha, 0.1, 1.0, 1e-5).unwrap();
        if n > prev {
            failures.push(format!("private sample size increased at alpha={alpha}"));
        }
        prev = n;
    }
    let half = required_private_samples_raw(256, 64, 0.1, 0.1, 0.5, 1e-5).unwrap();
    let full = required_private_samples_raw(256, 64, 0.1, 0.1, 1.0, 1e-5).unwrap();
    if half != 2.0 * full {
        failures.push("private sample size not exactly 1/eps".into());
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "all exact assertions hold".into()
        } else {
            failures.join("; ")
        },
    )
}

fn run_cli(args: &[&str], workers: usize, dir: &Path) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_papq"))
        .args(args)
        .args(["--workers", &workers.to_string()])
        .env_remove("PAPQ_OUT_DIR")
        .current_dir(dir)
        .output()
        .expect("run papq");
    assert!(
        out.status.success(),
        "papq {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let thresholds = r#"{"kind":"thresholds","lo":0,"hi":1}"#;
    let uniform = r#"{"uniform_interval":{"lo":0,"hi":1}}"#;
    let release = [
        "--seed", "9", "release", "--class", thresholds, "--dist", uniform, "--n", "5000", "--m", "100", "--alpha",
        "0.2", "--eps", "1", "--delta", "1e-5",
    ];
    let saved = run_cli(&release, 1, d);
    std::fs::write(d.join("r.json"), &saved).unwrap();
    let commands: Vec<(&str, Vec<&str>)> = vec![
        ("release", release.to_vec()),
        (
            "query",
            vec!["--seed", "9", "query", "--release", "r.json", "--cutoff", "0.3"],
        ),
        (
            "eval",
            vec!["--seed", "9", "eval", "--release", "r.json", "--dist", uniform],
        ),
        (
            "audit",
            vec![
                "--seed",
                "9",
                "audit",
                "--p",
                "512",
                "--n",
                "16,32",
                "--trials",
                "12",
                "--null-draws",
                "500",
                "--mechanism",
                "empirical-mean,prvq",
            ],
        ),
        (
            "bench",
            vec![
                "--seed", "9", "bench", "--class", thresholds, "--dist", uniform, "--n", "5000", "--m", "100",
                "--alpha", "0.2", "--eps", "1", "--delta", "1e-5", "--trials", "16",
            ],
        ),
        (
            "calc-samples",
            vec![
                "--seed",
                "9",
                "calc-samples",
                "--d",
                "1",
                "--p",
                "1",
                "--alpha",
                "0.1",
                "--beta",
                "0.1",
                "--eps",
                "1",
                "--delta",
                "1e-5",
            ],
        ),
    ];
    let mut bad = Vec::new();
    for (name, args) in &commands {
        let a = run_cli(args, 1, d);
        let b = run_cli(args, 1, d);
        let c = run_cli(args, 8, d);
        if a.is_empty() || a != b || a != c {
            bad.push(*name);
        }
    }
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            format!(
                "{} subcommands byte-identical across runs and 1 vs 8 workers",
                commands.len()
            )
        } else {
            format!("differing output: {}", bad.join(", "))
        },
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome, Duration);

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [Criterion; 9] = [
        (1, "sauer bounds", criterion_1, Duration::from_secs(60)),
        (2, "cover quality", criterion_2, Duration::from_secs(60)),
        (
            3,
            "representative-domain fidelity",
            criterion_3,
            Duration::from_secs(600),
        ),
        (4, "pmw oracle equivalence", criterion_4, Duration::from_secs(60)),
        (5, "pmw statistical accuracy", criterion_5, Duration::from_secs(300)),
        (6, "end-to-end release", criterion_6, Duration::from_secs(600)),
        (7, "tracing separation", criterion_7, Duration::from_secs(600)),
        (8, "calculator properties", criterion_8, Duration::from_secs(600)),
        (9, "cli determinism", criterion_9, Duration::from_secs(600)),
    ];
    let mut failed = 0;
    for (id, name, run, budget) in criteria {
        let label = format!("criterion {id}");
        if !filter.is_empty()
            && !filter
                .iter()
                .any(|f| label.contains(f.as_str()) || name.contains(f.as_str()))
        {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let pass = out.pass && elapsed <= budget;
        if !pass {
            failed += 1;
        }
        println!(
            "{} {label} ({name}): {} [{:.1}s, limit {}s]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
