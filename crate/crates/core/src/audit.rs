//! Fingerprinting audit for decision stumps: draw a product distribution on
//! the hypercube, run a mechanism on member rows, and test every row with a
//! centered inner-product score against a threshold calibrated on fresh rows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classes::{Distribution, DomainPoint, HypothesisClass, Label, SignVector};
use crate::error::{Error, Result};
use crate::release::{prvq_with_options, query, PrvqOptions};

/// Biases drawn i.i.d. uniform on `[-1, 1]`.
pub fn fingerprinting_distribution<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Result<Distribution> {
    if p == 0 {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: "dimension must be at least 1".into(),
        });
    }
    Distribution::product_hypercube((0..p).map(|_| rng.gen_range(-1.0..=1.0)).collect())
}

/// `Σ_j q_j (y_j - y_ref_j)`.
pub fn attack_score(q: &[f64], y: &[Label], y_ref: &[Label]) -> Result<f64> {
    if q.len() != y.len() || q.len() != y_ref.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: q has {}, y has {}, y_ref has {}",
            q.len(),
            y.len(),
            y_ref.len()
        )));
    }
    Ok(q.iter()
        .zip(y.iter().zip(y_ref))
        .map(|(qj, (a, b))| qj * f64::from(a - b))
        .sum())
}

/// Fast sampler for a product distribution: `x_j = +1` iff a uniform 32-bit
/// word falls below `cut[j]`.
struct RowSampler {
    cut: Vec<u64>,
}

impl RowSampler {
    fn new(bias: &[f64]) -> Self {
        RowSampler {
            cut: bias
                .iter()
                .map(|b| ((1.0 + b) / 2.0 * 4_294_967_296.0).round() as u64)
                .collect(),
        }
    }

    fn bit(cut: u64, word: u32) -> bool {
        u64::from(word) < cut
    }

    fn row<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Label> {
        let mut out = Vec::with_capacity(self.cut.len());
        for pair in self.cut.chunks(2) {
            let r = rng.next_u64();
            for (k, &c) in pair.iter().enumerate() {
                out.push(if Self::bit(c, (r >> (32 * k)) as u32) { 1 } else { -1 });
            }
        }
        out
    }

    /// `q · y` for a fresh row `y`, without storing it.
    fn dot<R: Rng + ?Sized>(&self, q: &[f64], rng: &mut R) -> f64 {
        let mut acc = 0.0;
        for (cuts, qs) in self.cut.chunks(2).zip(q.chunks(2)) {
            let r = rng.next_u64();
            for (k, (&c, &qj)) in cuts.iter().zip(qs).enumerate() {
                let s = f64::from(u8::from(Self::bit(c, (r >> (32 * k)) as u32)));
                acc += qj * (2.0 * s - 1.0);
            }
        }
        acc
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    pub p: usize,
    pub n: usize,
    pub m: usize,
    /// Target accuracy handed to mechanisms that take one.
    pub alpha: f64,
    pub trials: usize,
    pub fpr_target: f64,
    pub null_calibration_draws: usize,
    /// Held-out rows scored per trial; 0 means `n + m`.
    #[serde(default)]
    pub nonmember_draws: usize,
}

impl TraceConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if self.p == 0 {
            return bad("p", "must be at least 1");
        }
        if self.trials == 0 {
            return bad("trials", "must be at least 1");
        }
        if !(self.fpr_target > 0.0 && self.fpr_target < 0.5) {
            return bad("fpr_target", "must lie in (0, 0.5)");
        }
        if self.null_calibration_draws == 0 {
            return bad("null_calibration_draws", "must be at least 1");
        }
        if self.n + self.m == 0 {
            return bad("n", "the dataset needs at least one row");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha", "must lie in (0, 1)");
        }
        Ok(())
    }

    fn nonmembers(&self) -> usize {
        if self.nonmember_draws == 0 {
            self.n + self.m
        } else {
            self.nonmember_draws
        }
    }

    /// Reference orders of magnitude `(√p/α, 1/α²)` for the private and
    /// public sample sizes at which tracing stops being possible, scaled by
    /// the given constants.
    pub fn reference_sizes(&self, c_private: f64, c_public: f64) -> (f64, f64) {
        (
            c_private * (self.p as f64).sqrt() / self.alpha,
            c_public / (self.alpha * self.alpha),
        )
    }
}

/// A release mechanism for all `p` stump queries.
pub trait Mechanism: Sync {
    fn name(&self) -> String;

    /// Answers for stumps `1..=p`, given private and public rows.
    fn answer(&self, private: &[Vec<Label>], public: &[Vec<Label>], p: usize, rng: &mut ChaCha8Rng)
        -> Result<Vec<f64>>;
}

fn column_means<'a>(rows: impl Iterator<Item = &'a Vec<Label>>, p: usize) -> Result<Vec<f64>> {
    let mut acc = vec![0i64; p];
    let mut count = 0usize;
    for r in rows {
        for (a, &v) in acc.iter_mut().zip(r) {
            *a += i64::from(v);
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(acc.into_iter().map(|a| a as f64 / count as f64).collect())
}

/// Exact column means of the private rows.
#[derive(Clone, Copy, Debug, Default)]
pub struct EmpiricalMean;

impl Mechanism for EmpiricalMean {
    fn name(&self) -> String {
        "empirical_mean".into()
    }

    fn answer(&self, private: &[Vec<Label>], _: &[Vec<Label>], p: usize, _: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        column_means(private.iter(), p)
    }
}

/// Exact column means of private and public rows together.
#[derive(Clone, Copy, Debug, Default)]
pub struct PooledMean;

impl Mechanism for PooledMean {
    fn name(&self) -> String {
        "pooled_mean".into()
    }

    fn answer(&self, private: &[Vec<Label>], public: &[Vec<Label>], p: usize, _: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        column_means(private.iter().chain(public), p)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConstantMechanism(pub f64);

impl Mechanism for ConstantMechanism {
    fn name(&self) -> String {
        "constant".into()
    }

    fn answer(&self, _: &[Vec<Label>], _: &[Vec<Label>], p: usize, _: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        Ok(vec![self.0; p])
    }
}

/// The composed public-data-assisted release on stumps.
#[derive(Clone, Copy, Debug)]
pub struct PrvqMechanism {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub options: PrvqOptions,
}

impl PrvqMechanism {
    pub fn new(alpha: f64, beta: f64, epsilon: f64, delta: f64) -> Self {
        PrvqMechanism {
            alpha,
            beta,
            epsilon,
            delta,
            options: PrvqOptions::default(),
        }
    }
}

impl Mechanism for PrvqMechanism {
    fn name(&self) -> String {
        "prvq".into()
    }

    fn answer(
        &self,
        private: &[Vec<Label>],
        public: &[Vec<Label>],
        p: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<f64>> {
        let class = HypothesisClass::stumps(p)?;
        let to_points = |rows: &[Vec<Label>]| -> Result<Vec<DomainPoint>> {
            rows.iter()
                .map(|r| SignVector::new(r.clone()).map(DomainPoint::Signs))
                .collect()
        };
        let g = prvq_with_options(
            &to_points(private)?,
            &to_points(public)?,
            &class,
            self.alpha,
            self.beta,
            self.epsilon,
            self.delta,
            &self.options,
            rng,
        )?;
        (1..=p)
            .map(|j| query(&g, &crate::classes::Hypothesis::stump(j)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialFlags {
    pub trial: usize,
    pub tau: f64,
    pub members: usize,
    pub member_flags: usize,
    pub public_rows: usize,
    pub public_flags: usize,
    pub nonmembers: usize,
    pub nonmember_flags: usize,
    /// `max_j |q_j - b_j|`.
    pub max_query_error: f64,
}

impl TrialFlags {
    pub fn member_in_rate(&self) -> f64 {
        rate(self.member_flags, self.members)
    }

    pub fn nonmember_in_rate(&self) -> f64 {
        rate(self.nonmember_flags, self.nonmembers)
    }
}

fn rate(k: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        k as f64 / n as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub mechanism: String,
    pub config: TraceConfig,
    /// IN rate over private member rows.
    pub member_in_rate: f64,
    /// IN rate over public rows (not privacy-protected).
    pub public_in_rate: f64,
    pub nonmember_in_rate: f64,
    /// Mean of the per-trial thresholds.
    pub calibrated_threshold: f64,
    pub trials: Vec<TrialFlags>,
}

/// Independent per-trial streams: data on `2·trial`, mechanism on
/// `2·trial + 1`.
pub fn trial_rngs(seed: u64, trial: usize) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut data = ChaCha8Rng::seed_from_u64(seed);
    data.set_stream(2 * trial as u64);
    let mut mech = ChaCha8Rng::seed_from_u64(seed);
    mech.set_stream(2 * trial as u64 + 1);
    (data, mech)
}

/// `(1 - fpr)` empirical quantile.
fn upper_quantile(mut scores: Vec<f64>, fpr: f64) -> f64 {
    scores.sort_by(f64::total_cmp);
    let k = ((1.0 - fpr) * scores.len() as f64).ceil() as usize;
    scores[k.clamp(1, scores.len()) - 1]
}

fn run_trial<M: Mechanism + ?Sized>(mech: &M, cfg: &TraceConfig, seed: u64, trial: usize) -> Result<TrialFlags> {
    let (mut data_rng, mut mech_rng) = trial_rngs(seed, trial);
    let dist = fingerprinting_distribution(cfg.p, &mut data_rng)?;
    let Distribution::ProductHypercube { bias } = &dist else {
        return Err(Error::Internal("fingerprinting distribution is not a product".into()));
    };
    let sampler = RowSampler::new(bias);
    let private: Vec<Vec<Label>> = (0..cfg.n).map(|_| sampler.row(&mut data_rng)).collect();
    let public: Vec<Vec<Label>> = (0..cfg.m).map(|_| sampler.row(&mut data_rng)).collect();
    let q = mech.answer(&private, &public, cfg.p, &mut mech_rng)?;
    if q.len() != cfg.p || q.iter().any(|v| !(-1.0..=1.0).contains(v)) {
        return Err(Error::InvalidInput(format!(
            "mechanism `{}` must return {} answers in [-1, 1]",
            mech.name(),
            cfg.p
        )));
    }
    let null: Vec<f64> = (0..cfg.null_calibration_draws)
        .map(|_| sampler.dot(&q, &mut data_rng) - sampler.dot(&q, &mut data_rng))
        .collect();
    let tau = upper_quantile(null, cfg.fpr_target);
    let flagged = |rows: &[Vec<Label>], rng: &mut ChaCha8Rng| -> usize {
        rows.iter()
            .filter(|y| {
                let own: f64 = q.iter().zip(y.iter()).map(|(a, &b)| a * f64::from(b)).sum();
                own - sampler.dot(&q, rng) > tau
            })
            .count()
    };
    let member_flags = flagged(&private, &mut data_rng);
    let public_flags = flagged(&public, &mut data_rng);
    let nonmembers = cfg.nonmembers();
    let mut nonmember_flags = 0;
    for _ in 0..nonmembers {
        if sampler.dot(&q, &mut data_rng) - sampler.dot(&q, &mut data_rng) > tau {
            nonmember_flags += 1;
        }
    }
    let max_query_error = q.iter().zip(bias).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(TrialFlags {
        trial,
        tau,
        members: cfg.n,
        member_flags,
        public_rows: cfg.m,
        public_flags,
        nonmembers,
        nonmember_flags,
        max_query_error,
    })
}

/// Runs `cfg.trials` independent audits on the current rayon pool. Results
/// depend only on `(mechanism, cfg, seed)`.
pub fn audit_mechanism<M: Mechanism + ?Sized>(mech: &M, cfg: &TraceConfig, seed: u64) -> Result<AuditReport> {
    cfg.validate()?;
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(mech, cfg, seed, t))
        .collect::<Result<Vec<_>>>()?;
    let sum = |f: fn(&TrialFlags) -> usize| trials.iter().map(f).sum::<usize>();
    Ok(AuditReport {
        mechanism: mech.name(),
        config: cfg.clone(),
        member_in_rate: rate(sum(|t| t.member_flags), sum(|t| t.members)),
        public_in_rate: rate(sum(|t| t.public_flags), sum(|t| t.public_rows)),
        nonmember_in_rate: rate(sum(|t| t.nonmember_flags), sum(|t| t.nonmembers)),
        calibrated_threshold: trials.iter().map(|t| t.tau).sum::<f64>() / trials.len() as f64,
        trials,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
}

/// One audit per grid point; `make` builds the mechanism for each point.
pub fn frontier_sweep<F>(base: &TraceConfig, grid: &[FrontierPoint], make: F, seed: u64) -> Result<Vec<AuditReport>>
where
    F: Fn(&FrontierPoint) -> Box<dyn Mechanism>,
{
    if grid.is_empty() {
        return Err(Error::InvalidInput("frontier grid is empty".into()));
    }
    grid.iter()
        .map(|pt| {
            let cfg = TraceConfig {
                n: pt.n,
                m: pt.m,
                alpha: pt.alpha,
                ..base.clone()
            };
            audit_mechanism(make(pt).as_ref(), &cfg, seed)
        })
        .collect()
}

pub const AUDIT_CSV_HEADER: [&str; 10] = [
    "trial",
    "p",
    "n",
    "m",
    "alpha",
    "mechanism",
    "tau",
    "member_in_rate",
    "nonmember_in_rate",
    "max_query_error",
];

/// One row per (report, trial).
pub fn write_audit_csv<W: std::io::Write>(reports: &[AuditReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AUDIT_CSV_HEADER)?;
    for r in reports {
        for t in &r.trials {
            w.write_record([
                t.trial.to_string(),
                r.config.p.to_string(),
                r.config.n.to_string(),
                r.config.m.to_string(),
                r.config.alpha.to_string(),
                r.mechanism.clone(),
                t.tau.to_string(),
                t.member_in_rate().to_string(),
                t.nonmember_in_rate().to_string(),
                t.max_query_error.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
