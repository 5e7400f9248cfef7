//! Seeded Monte Carlo experiments comparing the public-data-assisted release
//! with public-only and private-only baselines.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audit::trial_rngs;
use crate::classes::{ClassKind, Distribution, DomainPoint, HypothesisClass, Label};
use crate::error::{Error, Result};
use crate::release::{
    evaluate_error, private_only_finite, private_only_grid, prvq_with_options, EmpiricalRelease, PrvqOptions,
    QueryRelease, ReleaseFlags,
};

pub const DEFAULT_GRID_SIZE: usize = 1 << 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassSpec {
    Thresholds {
        lo: f64,
        hi: f64,
    },
    Stumps {
        p: usize,
    },
    Explicit {
        domain: Vec<serde_json::Value>,
        hypotheses: Vec<Vec<Label>>,
    },
}

impl ClassSpec {
    pub fn build(&self) -> Result<HypothesisClass> {
        match self {
            ClassSpec::Thresholds { lo, hi } => HypothesisClass::thresholds(*lo, *hi),
            ClassSpec::Stumps { p } => HypothesisClass::stumps(*p),
            ClassSpec::Explicit { domain, hypotheses } => HypothesisClass::explicit(domain.clone(), hypotheses.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Pap,
    PublicOnly,
    PrivateOnly,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Pap => "pap",
            Mode::PublicOnly => "public-only",
            Mode::PrivateOnly => "private-only",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub class: ClassSpec,
    pub distribution: Distribution,
    pub mode: Mode,
    /// Private sample size.
    pub n: usize,
    /// Public sample size.
    pub m: usize,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Grid size of the private-only threshold baseline.
    #[serde(default)]
    pub grid_size: Option<usize>,
    #[serde(default)]
    pub noise_off: bool,
}

impl ExperimentSpec {
    /// Field-level validation; the messages name the offending field.
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: String| Err(Error::InvalidParameter { name, reason });
        if self.trials == 0 {
            return bad("trials", "must be at least 1".into());
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(name, format!("{v} is not in (0, 1)"));
            }
        }
        match self.mode {
            Mode::PublicOnly => {
                if self.m == 0 {
                    return bad("m", "public-only mode needs public samples".into());
                }
            }
            Mode::Pap | Mode::PrivateOnly => {
                let Some(eps) = self.epsilon else {
                    return bad("epsilon", format!("required in {} mode", self.mode.as_str()));
                };
                let Some(delta) = self.delta else {
                    return bad("delta", format!("required in {} mode", self.mode.as_str()));
                };
                if !(eps > 0.0 && eps <= 1.0) {
                    return bad("epsilon", format!("{eps} is not in (0, 1]"));
                }
                if !(delta > 0.0 && delta < 1.0) {
                    return bad("delta", format!("{delta} is not in (0, 1)"));
                }
                let private_rows = if self.mode == Mode::Pap {
                    self.n
                } else {
                    self.n + self.m
                };
                if private_rows == 0 {
                    return bad("n", "no private samples".into());
                }
            }
        }
        self.class.build()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub trial: usize,
    pub mode: String,
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub error: f64,
    pub budget_exhausted: bool,
    pub updates_used: usize,
}

pub const EXPERIMENT_CSV_HEADER: [&str; 10] = [
    "trial",
    "mode",
    "n",
    "m",
    "alpha",
    "epsilon",
    "delta",
    "error",
    "budget_exhausted",
    "updates_used",
];

fn run_trial(spec: &ExperimentSpec, class: &HypothesisClass, trial: usize) -> Result<ExperimentRow> {
    let (mut data_rng, mut mech_rng) = trial_rngs(spec.seed, trial);
    let w = spec.distribution.sample_n(spec.m, &mut data_rng);
    let x = spec.distribution.sample_n(spec.n, &mut data_rng);
    let opts = PrvqOptions {
        noise_off: spec.noise_off,
        ..PrvqOptions::default()
    };
    let eps = spec.epsilon.unwrap_or(1.0);
    let delta = spec.delta.unwrap_or(1e-5);
    let (release, flags): (Box<dyn QueryRelease>, ReleaseFlags) = match spec.mode {
        Mode::PublicOnly => (Box::new(EmpiricalRelease::new(w)), ReleaseFlags::default()),
        Mode::Pap => {
            let g = prvq_with_options(&x, &w, class, spec.alpha, spec.beta, eps, delta, &opts, &mut mech_rng)?;
            let f = g.flags();
            (Box::new(g), f)
        }
        Mode::PrivateOnly => {
            // All samples are treated as private.
            let all: Vec<DomainPoint> = x.into_iter().chain(w).collect();
            match class.kind {
                ClassKind::Thresholds { lo, hi } => {
                    let grid = spec.grid_size.unwrap_or(DEFAULT_GRID_SIZE);
                    let g = private_only_grid(
                        &all,
                        lo,
                        hi,
                        grid,
                        spec.alpha,
                        spec.beta,
                        eps,
                        delta,
                        &opts,
                        &mut mech_rng,
                    )?;
                    let f = g.flags;
                    (Box::new(g), f)
                }
                _ => {
                    let g = private_only_finite(&all, class, spec.alpha, spec.beta, eps, delta, &opts, &mut mech_rng)?;
                    let f = g.flags;
                    (Box::new(g), f)
                }
            }
        }
    };
    let error = evaluate_error(release.as_ref(), &spec.distribution, class, None)?.error;
    Ok(ExperimentRow {
        trial,
        mode: spec.mode.as_str().into(),
        n: spec.n,
        m: spec.m,
        alpha: spec.alpha,
        epsilon: spec.epsilon,
        delta: spec.delta,
        error,
        budget_exhausted: flags.budget_exhausted,
        updates_used: flags.updates_used,
    })
}

/// Runs every trial on the current rayon pool; rows come back in trial
/// order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ExperimentRow>> {
    spec.validate()?;
    let class = spec.class.build()?;
    (0..spec.trials)
        .into_par_iter()
        .map(|t| run_trial(spec, &class, t))
        .collect()
}

/// As [`run_experiment`] on a dedicated pool of `workers` threads (`None`
/// uses the global pool).
pub fn run_experiment_with_workers(spec: &ExperimentSpec, workers: Option<usize>) -> Result<Vec<ExperimentRow>> {
    with_workers(workers, || run_experiment(spec))
}

/// Runs `f` inside a rayon pool with the given number of threads.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        None => f(),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::Internal(format!("thread pool: {e}")))?
            .install(f),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_experiment_csv<W: std::io::Write>(rows: &[ExperimentRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EXPERIMENT_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.trial.to_string(),
            r.mode.clone(),
            r.n.to_string(),
            r.m.to_string(),
            r.alpha.to_string(),
            opt(r.epsilon),
            opt(r.delta),
            r.error.to_string(),
            r.budget_exhausted.to_string(),
            r.updates_used.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
