//! Offline private multiplicative weights over a finite domain `X̃` and a
//! finite query list `H̃`, using the sparse vector technique to decide which
//! queries trigger an update.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classes::Label;
use crate::error::{check_positive, check_unit_open, Error, Result};

/// One draw from a zero-mean Laplace distribution.
pub fn laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    check_positive("scale", scale)?;
    Ok(laplace_unchecked(scale, rng))
}

fn laplace_unchecked<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen::<f64>() - 0.5;
        if u > -0.5 {
            return -scale * u.signum() * (-2.0 * u.abs()).ln_1p();
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    /// Exponential tilt along the query that moves the synthetic answer
    /// exactly onto the released one.
    #[default]
    Projection,
    /// Classic step `w(u) ∝ w(u)·exp(±η·h(u))`.
    FixedStep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmwConfig {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// `None` picks the budget from the domain size, query count and
    /// noise level (see [`effective_budget`]).
    #[serde(default)]
    pub update_budget: Option<usize>,
    pub learning_rate: f64,
    pub svt_threshold: f64,
    #[serde(default)]
    pub update_rule: UpdateRule,
    #[serde(default)]
    pub noise_off: bool,
}

impl PmwConfig {
    pub fn new(alpha: f64, beta: f64, epsilon: f64, delta: f64) -> Result<Self> {
        let cfg = PmwConfig {
            alpha,
            beta,
            epsilon,
            delta,
            update_budget: None,
            learning_rate: alpha / 4.0,
            svt_threshold: alpha / 2.0,
            update_rule: UpdateRule::default(),
            noise_off: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_noise_off(mut self, noise_off: bool) -> Self {
        self.noise_off = noise_off;
        self
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.update_budget = Some(budget);
        self
    }

    pub fn with_update_rule(mut self, rule: UpdateRule) -> Self {
        self.update_rule = rule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_unit_open("alpha", self.alpha)?;
        check_unit_open("beta", self.beta)?;
        check_unit_open("delta", self.delta)?;
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("{} is not in (0, 1]", self.epsilon),
            });
        }
        check_unit_open("learning_rate", self.learning_rate)?;
        check_unit_open("svt_threshold", self.svt_threshold)?;
        if self.update_budget == Some(0) {
            return Err(Error::InvalidParameter {
                name: "update_budget",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Noise scales for one run of `k` above-threshold rounds on `n` rows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvtCalibration {
    /// Privacy spent per above-threshold round.
    pub eps_round: f64,
    pub threshold_scale: f64,
    pub query_scale: f64,
    pub answer_scale: f64,
}

const ROUND_SPLIT_COMPARE: f64 = 0.8;

/// Largest per-round `ε0` such that `k` rounds compose to `(ε, δ)`: the
/// better of advanced composition and plain summation.
pub fn per_round_epsilon(epsilon: f64, delta: f64, k: usize) -> f64 {
    let k = k.max(1) as f64;
    let spent = |e0: f64| (2.0 * k * (1.0 / delta).ln()).sqrt() * e0 + k * e0 * e0.exp_m1();
    let (mut lo, mut hi) = (0.0, epsilon);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if spent(mid) <= epsilon {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo.max(epsilon / k)
}

pub fn calibrate(epsilon: f64, delta: f64, k: usize, n: usize) -> SvtCalibration {
    let sensitivity = 2.0 / n as f64;
    let eps_round = per_round_epsilon(epsilon, delta, k);
    let eps_cmp = ROUND_SPLIT_COMPARE * eps_round;
    let eps_ans = (1.0 - ROUND_SPLIT_COMPARE) * eps_round;
    SvtCalibration {
        eps_round,
        threshold_scale: 2.0 * sensitivity / eps_cmp,
        query_scale: 4.0 * sensitivity / eps_cmp,
        answer_scale: sensitivity / eps_ans,
    }
}

/// Update budget used when the config leaves it open: the classical
/// `⌈16 ln|X̃| / α²⌉`, capped by the query count (one pass never needs more)
/// and by the largest `k` whose noise still fits under the threshold.
pub fn effective_budget(cfg: &PmwConfig, domain_size: usize, num_queries: usize, n: usize) -> usize {
    if let Some(c) = cfg.update_budget {
        return c;
    }
    let classical = ((16.0 * (domain_size.max(2) as f64).ln() / (cfg.alpha * cfg.alpha)).ceil() as usize).max(1);
    let cap = classical.min(num_queries.max(1));
    if cfg.noise_off {
        return cap;
    }
    let log_q = (num_queries.max(3) as f64).ln();
    let mut best = 1;
    for k in 1..=cap {
        let cal = calibrate(cfg.epsilon, cfg.delta, k, n);
        if cal.query_scale.max(cal.answer_scale) * log_q <= cfg.svt_threshold {
            best = k;
        } else {
            break;
        }
    }
    best
}

/// A finite list of ±1 queries over the domain `{0, .., domain_size-1}`.
pub trait QuerySet: Sync {
    fn num_queries(&self) -> usize;
    fn domain_size(&self) -> usize;
    fn label(&self, query: usize, point: usize) -> Label;

    /// `Σ_u weights[u]·[h_q(u) = +1]` for every query `q`.
    fn positive_masses(&self, weights: &[f64]) -> Vec<f64> {
        (0..self.num_queries())
            .map(|q| {
                weights
                    .iter()
                    .enumerate()
                    .filter(|&(u, _)| self.label(q, u) > 0)
                    .map(|(_, w)| w)
                    .sum()
            })
            .collect()
    }
}

/// Dense label matrix, `labels[q][u]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMatrix {
    labels: Vec<Vec<Label>>,
    domain_size: usize,
}

impl LabelMatrix {
    pub fn new(labels: Vec<Vec<Label>>) -> Result<Self> {
        let domain_size = labels.first().map_or(0, Vec::len);
        for row in &labels {
            if row.len() != domain_size {
                return Err(Error::InvalidInput("ragged label matrix".into()));
            }
            if row.iter().any(|&l| l != 1 && l != -1) {
                return Err(Error::InvalidInput("labels must be ±1".into()));
            }
        }
        Ok(LabelMatrix { labels, domain_size })
    }

    pub fn rows(&self) -> &[Vec<Label>] {
        &self.labels
    }
}

impl QuerySet for LabelMatrix {
    fn num_queries(&self) -> usize {
        self.labels.len()
    }

    fn domain_size(&self) -> usize {
        self.domain_size
    }

    fn label(&self, query: usize, point: usize) -> Label {
        self.labels[query][point]
    }

    fn positive_masses(&self, weights: &[f64]) -> Vec<f64> {
        self.labels
            .iter()
            .map(|row| row.iter().zip(weights).filter(|(&l, _)| l > 0).map(|(_, w)| w).sum())
            .collect()
    }
}

/// Query `q` is `+1` exactly on the prefix `{0, .., prefix[q]-1}` of an
/// ordered domain (thresholds over sorted points).
#[derive(Clone, Debug, PartialEq)]
pub struct PrefixQueries {
    prefix: Vec<usize>,
    domain_size: usize,
}

impl PrefixQueries {
    pub fn new(prefix: Vec<usize>, domain_size: usize) -> Result<Self> {
        if prefix.iter().any(|&p| p > domain_size) {
            return Err(Error::InvalidInput("prefix longer than the domain".into()));
        }
        Ok(PrefixQueries { prefix, domain_size })
    }
}

impl QuerySet for PrefixQueries {
    fn num_queries(&self) -> usize {
        self.prefix.len()
    }

    fn domain_size(&self) -> usize {
        self.domain_size
    }

    fn label(&self, query: usize, point: usize) -> Label {
        if point < self.prefix[query] {
            1
        } else {
            -1
        }
    }

    fn positive_masses(&self, weights: &[f64]) -> Vec<f64> {
        let mut cum = Vec::with_capacity(weights.len() + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for w in weights {
            acc += w;
            cum.push(acc);
        }
        self.prefix.iter().map(|&p| cum[p]).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmwState {
    pub weights: Vec<f64>,
    pub updates_used: usize,
}

impl PmwState {
    pub fn uniform(domain_size: usize) -> Self {
        PmwState {
            weights: vec![1.0 / domain_size as f64; domain_size],
            updates_used: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmwOutput {
    /// `G̃`, indexed like the query set.
    pub answers: Vec<f64>,
    /// Set when the budget ran out with queries left; those queries were
    /// answered from the synthetic distribution.
    pub budget_exhausted: bool,
    pub budget: usize,
    pub state: PmwState,
}

/// Runs PMW on the dataset `s` (indices into the domain of `queries`).
pub fn pmw_release<Q: QuerySet + ?Sized, R: Rng + ?Sized>(
    s: &[usize],
    queries: &Q,
    cfg: &PmwConfig,
    rng: &mut R,
) -> Result<PmwOutput> {
    cfg.validate()?;
    if s.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let size = queries.domain_size();
    if size == 0 {
        return Err(Error::InvalidInput("empty representative domain".into()));
    }
    let n = s.len();
    let mut hist = vec![0.0; size];
    for &i in s {
        *hist
            .get_mut(i)
            .ok_or_else(|| Error::DomainMismatch(format!("dataset index {i} outside a domain of size {size}")))? += 1.0;
    }
    hist.iter_mut().for_each(|c| *c /= n as f64);
    let data: Vec<f64> = queries
        .positive_masses(&hist)
        .into_iter()
        .map(|m| 2.0 * m - 1.0)
        .collect();

    let num_q = queries.num_queries();
    let budget = effective_budget(cfg, size, num_q, n);
    let cal = calibrate(cfg.epsilon, cfg.delta, budget, n);
    let noise = |scale: f64, rng: &mut R| {
        if cfg.noise_off {
            0.0
        } else {
            laplace_unchecked(scale, rng)
        }
    };

    let mut state = PmwState::uniform(size);
    let mut masses = queries.positive_masses(&state.weights);
    let mut answers = Vec::with_capacity(num_q);
    let mut exhausted = false;
    let mut rho = noise(cal.threshold_scale, rng);
    for q in 0..num_q {
        let synth = 2.0 * masses[q] - 1.0;
        if state.updates_used >= budget {
            exhausted = true;
            answers.push(synth);
            continue;
        }
        let gap = (data[q] - synth).abs() + noise(cal.query_scale, rng);
        if gap <= cfg.svt_threshold + rho {
            answers.push(synth);
            continue;
        }
        let released = (data[q] + noise(cal.answer_scale, rng)).clamp(-1.0, 1.0);
        answers.push(released);
        update(queries, q, masses[q], released, synth, cfg, &mut state.weights);
        state.updates_used += 1;
        masses = queries.positive_masses(&state.weights);
        rho = noise(cal.threshold_scale, rng);
    }
    Ok(PmwOutput {
        answers,
        budget_exhausted: exhausted,
        budget,
        state,
    })
}

fn update<Q: QuerySet + ?Sized>(
    queries: &Q,
    q: usize,
    mass: f64,
    released: f64,
    synth: f64,
    cfg: &PmwConfig,
    weights: &mut [f64],
) {
    const CLAMP: f64 = 1e-9;
    let lambda = match cfg.update_rule {
        UpdateRule::FixedStep => {
            if released > synth {
                cfg.learning_rate
            } else {
                -cfg.learning_rate
            }
        }
        UpdateRule::Projection if released.abs() >= 1.0 => {
            let keep = if released > 0.0 { 1 } else { -1 };
            let kept = if keep > 0 { mass } else { 1.0 - mass };
            if kept > 0.0 {
                for (u, w) in weights.iter_mut().enumerate() {
                    if queries.label(q, u) != keep {
                        *w = 0.0;
                    }
                }
                let total: f64 = weights.iter().sum();
                weights.iter_mut().for_each(|w| *w /= total);
                return;
            }
            0.0
        }
        UpdateRule::Projection => {
            let p = mass.clamp(CLAMP, 1.0 - CLAMP);
            let t = (0.5 * (1.0 + released)).clamp(CLAMP, 1.0 - CLAMP);
            0.5 * (t * (1.0 - p) / ((1.0 - t) * p)).ln()
        }
    };
    let (up, down) = (lambda.exp(), (-lambda).exp());
    for (u, w) in weights.iter_mut().enumerate() {
        *w *= if queries.label(q, u) > 0 { up } else { down };
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
}

fn check_calculator_inputs(alpha: f64, beta: f64, epsilon: f64, delta: f64) -> Result<()> {
    check_unit_open("alpha", alpha)?;
    check_unit_open("beta", beta)?;
    check_unit_open("delta", delta)?;
    check_positive("epsilon", epsilon)
}

/// Private sample size sufficient for PMW, before rounding up (natural
/// logarithms throughout).
pub fn required_private_samples_raw(
    size_x: u64,
    size_h: u64,
    alpha: f64,
    beta: f64,
    epsilon: f64,
    delta: f64,
) -> Result<f64> {
    check_calculator_inputs(alpha, beta, epsilon, delta)?;
    if size_x < 2 || size_h < 1 {
        return Err(Error::InvalidParameter {
            name: "size",
            reason: format!("need |X| >= 2 and |H| >= 1, got {size_x} and {size_h}"),
        });
    }
    let ln_x = (size_x as f64).ln();
    let a2 = alpha * alpha;
    Ok(
        200.0 * (ln_x * (2.0 / delta).ln()).sqrt() * ((size_h as f64).ln() + (128.0 * ln_x / (a2 * beta)).ln())
            / (epsilon * a2),
    )
}

pub fn required_private_samples(
    size_x: u64,
    size_h: u64,
    alpha: f64,
    beta: f64,
    epsilon: f64,
    delta: f64,
) -> Result<u64> {
    required_private_samples_raw(size_x, size_h, alpha, beta, epsilon, delta).map(|v| v.ceil() as u64)
}
