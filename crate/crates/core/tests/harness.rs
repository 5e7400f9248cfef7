use papq::experiment::{
    run_experiment, run_experiment_with_workers, write_experiment_csv, ClassSpec, ExperimentSpec, Mode,
};
use papq::{Distribution, DomainPoint};

fn thresholds_spec(mode: Mode, m: usize, alpha: f64) -> ExperimentSpec {
    ExperimentSpec {
        class: ClassSpec::Thresholds { lo: 0.0, hi: 1.0 },
        distribution: Distribution::uniform(0.0, 1.0).unwrap(),
        mode,
        n: 20_000,
        m,
        alpha,
        beta: 0.1,
        epsilon: Some(1.0),
        delta: Some(1e-5),
        trials: 50,
        seed: 12,
        output: None,
        grid_size: None,
        noise_off: false,
    }
}

/// 1000 atoms at `(i/1000)^4`: most of the mass sits near 0.
fn skewed() -> Distribution {
    let points = (1..=1000)
        .map(|i| DomainPoint::Real((i as f64 / 1000.0).powi(4)))
        .collect();
    Distribution::discrete(points, vec![0.001; 1000]).unwrap()
}

#[test]
fn public_only_converges_with_many_samples() {
    let mut spec = thresholds_spec(Mode::PublicOnly, 5000, 0.1);
    spec.epsilon = None;
    spec.delta = None;
    let rows = run_experiment(&spec).unwrap();
    let mean = rows.iter().map(|r| r.error).sum::<f64>() / rows.len() as f64;
    assert!(mean <= 0.05, "mean error {mean}");
}

#[test]
fn pap_csv_is_reproducible() {
    let mut spec = thresholds_spec(Mode::Pap, 200, 0.2);
    spec.trials = 6;
    let csv = |workers| {
        let rows = run_experiment_with_workers(&spec, Some(workers)).unwrap();
        let mut buf = Vec::new();
        write_experiment_csv(&rows, &mut buf).unwrap();
        buf
    };
    let a = csv(1);
    assert_eq!(a, csv(1));
    assert_eq!(a, csv(4));
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("trial,mode,n,m,alpha,epsilon,delta,error,budget_exhausted,updates_used\n"));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn pap_beats_private_only_on_a_fine_grid() {
    let mut pap = thresholds_spec(Mode::Pap, 500, 0.15);
    pap.distribution = skewed();
    pap.trials = 25;
    let private = ExperimentSpec {
        mode: Mode::PrivateOnly,
        grid_size: Some(1 << 16),
        ..pap.clone()
    };
    let a = run_experiment(&pap).unwrap();
    let b = run_experiment(&private).unwrap();
    let wins = a.iter().zip(&b).filter(|(x, y)| x.error <= y.error).count();
    assert!(wins * 10 >= 8 * a.len(), "pap won {wins}/{}", a.len());
}

#[test]
fn invalid_spec_names_the_field() {
    let mut spec = thresholds_spec(Mode::Pap, 10, 0.1);
    spec.alpha = 1.5;
    let err = run_experiment(&spec).unwrap_err().to_string();
    assert!(err.contains("alpha"), "{err}");
}
