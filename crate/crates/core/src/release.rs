//! The composed public-data-assisted release: cover from public data,
//! representative-domain reduction of the private data, PMW, and the final
//! structure `G(h) = G̃(project(h))`.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classes::{evaluate, true_mean, ClassKind, Distribution, DomainPoint, Hypothesis, HypothesisClass};
use crate::cover::{build_cover, CoverResult};
use crate::error::{check_positive, check_unit_open, Error, Result};
use crate::pmw::{pmw_release, LabelMatrix, PmwConfig, PrefixQueries, UpdateRule};
use crate::profile::{sup_abs_diff, ThresholdProfile};
use crate::repdomain::{build_representative_domain, map_dataset, DomainSpec, DEFAULT_SIZE_CAP};

/// Anything that answers every query of a class.
pub trait QueryRelease {
    fn answer(&self, h: &Hypothesis) -> Result<f64>;

    /// Knots of the answer as a function of the threshold cutoff, when that
    /// function is right-continuous and piecewise affine with these knots.
    fn threshold_knots(&self) -> Option<Vec<f64>> {
        None
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReleaseFlags {
    pub budget_exhausted: bool,
    pub updates_used: usize,
    pub budget: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternAnswer {
    pub pattern_id: usize,
    pub answer: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ReleaseRecord", into = "ReleaseRecord")]
pub struct ReleaseStructure {
    cover: CoverResult,
    answers: Vec<f64>,
    flags: ReleaseFlags,
    /// Sorted distinct public reals and the pattern id for each count of
    /// public points below the cutoff (threshold covers only).
    threshold_lookup: Option<(Vec<f64>, Vec<usize>)>,
}

#[derive(Serialize, Deserialize)]
struct ReleaseRecord {
    cover: CoverResult,
    answers: Vec<PatternAnswer>,
    flags: ReleaseFlags,
}

impl From<ReleaseStructure> for ReleaseRecord {
    fn from(r: ReleaseStructure) -> Self {
        ReleaseRecord {
            answers: r
                .answers
                .iter()
                .enumerate()
                .map(|(pattern_id, &answer)| PatternAnswer { pattern_id, answer })
                .collect(),
            cover: r.cover,
            flags: r.flags,
        }
    }
}

impl TryFrom<ReleaseRecord> for ReleaseStructure {
    type Error = Error;

    fn try_from(r: ReleaseRecord) -> Result<Self> {
        let mut answers = vec![f64::NAN; r.cover.len()];
        for a in &r.answers {
            let slot = answers
                .get_mut(a.pattern_id)
                .ok_or_else(|| Error::InvalidInput(format!("unknown pattern id {}", a.pattern_id)))?;
            if !slot.is_nan() {
                return Err(Error::InvalidInput(format!("pattern {} answered twice", a.pattern_id)));
            }
            *slot = a.answer;
        }
        ReleaseStructure::new(r.cover, answers, r.flags)
    }
}

impl ReleaseStructure {
    /// `answers[i]` is `G̃` at the `i`-th representative of `cover`.
    pub fn new(cover: CoverResult, answers: Vec<f64>, flags: ReleaseFlags) -> Result<Self> {
        if answers.len() != cover.len() {
            return Err(Error::InvalidInput(format!(
                "{} answers for {} patterns",
                answers.len(),
                cover.len()
            )));
        }
        if answers.iter().any(|a| !(-1.0..=1.0).contains(a)) {
            return Err(Error::InvalidInput("answers must lie in [-1, 1]".into()));
        }
        let threshold_lookup = match cover.class().kind {
            ClassKind::Thresholds { .. } => {
                let sorted = cover.sorted_real_points();
                let mut by_count = vec![usize::MAX; sorted.len() + 1];
                for (id, pat) in cover.patterns().iter().enumerate() {
                    let k = pat.iter().filter(|&&l| l > 0).count();
                    by_count[k] = id;
                }
                if by_count.contains(&usize::MAX) {
                    return Err(Error::InvalidInput("threshold cover is missing a pattern".into()));
                }
                Some((sorted, by_count))
            }
            _ => None,
        };
        Ok(ReleaseStructure {
            cover,
            answers,
            flags,
            threshold_lookup,
        })
    }

    pub fn cover(&self) -> &CoverResult {
        &self.cover
    }

    pub fn answers(&self) -> &[f64] {
        &self.answers
    }

    pub fn flags(&self) -> ReleaseFlags {
        self.flags
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl QueryRelease for ReleaseStructure {
    fn answer(&self, h: &Hypothesis) -> Result<f64> {
        query(self, h)
    }

    fn threshold_knots(&self) -> Option<Vec<f64>> {
        self.threshold_lookup.as_ref().map(|(s, _)| s.clone())
    }
}

/// `G(h) = G̃(project(h))`.
pub fn query(g: &ReleaseStructure, h: &Hypothesis) -> Result<f64> {
    if !g.cover.class().contains(h) {
        return Err(Error::DomainMismatch(format!("{h:?} is not in the released class")));
    }
    if let (Some((sorted, by_count)), Hypothesis::Threshold { cutoff }) = (&g.threshold_lookup, h) {
        return Ok(g.answers[by_count[sorted.partition_point(|v| v <= cutoff)]]);
    }
    Ok(g.answers[g.cover.pattern_id(h)?])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrvqOptions {
    pub noise_off: bool,
    pub size_cap: u128,
    pub update_rule: UpdateRule,
    pub update_budget: Option<usize>,
}

impl Default for PrvqOptions {
    fn default() -> Self {
        PrvqOptions {
            noise_off: false,
            size_cap: DEFAULT_SIZE_CAP,
            update_rule: UpdateRule::default(),
            update_budget: None,
        }
    }
}

/// The composed release with default options.
#[allow(clippy::too_many_arguments)]
pub fn prvq<R: Rng + ?Sized>(
    x: &[DomainPoint],
    w: &[DomainPoint],
    class: &HypothesisClass,
    alpha: f64,
    beta: f64,
    epsilon: f64,
    delta: f64,
    rng: &mut R,
) -> Result<ReleaseStructure> {
    prvq_with_options(x, w, class, alpha, beta, epsilon, delta, &PrvqOptions::default(), rng)
}

#[allow(clippy::too_many_arguments)]
pub fn prvq_with_options<R: Rng + ?Sized>(
    x: &[DomainPoint],
    w: &[DomainPoint],
    class: &HypothesisClass,
    alpha: f64,
    beta: f64,
    epsilon: f64,
    delta: f64,
    opts: &PrvqOptions,
    rng: &mut R,
) -> Result<ReleaseStructure> {
    let mut cfg = PmwConfig::new(alpha / 2.0, beta / 2.0, epsilon, delta)?
        .with_noise_off(opts.noise_off)
        .with_update_rule(opts.update_rule);
    cfg.update_budget = opts.update_budget;
    cfg.validate()?;
    // The cover sees only public data.
    let cover = build_cover(class, w)?;
    class.check_points(x)?;
    if x.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let rep = build_representative_domain(&cover, DomainSpec::for_class(class), opts.size_cap)?;
    let s = map_dataset(&rep, x)?;
    let queries = LabelMatrix::new(rep.label_matrix(cover.representatives())?)?;
    let out = pmw_release(&s, &queries, &cfg, rng)?;
    let flags = ReleaseFlags {
        budget_exhausted: out.budget_exhausted,
        updates_used: out.state.updates_used,
        budget: out.budget,
    };
    ReleaseStructure::new(cover, out.answers, flags)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleBounds {
    pub n: u64,
    pub m: u64,
    pub n_raw: f64,
    pub m_raw: f64,
}

#[allow(clippy::too_many_arguments)]
fn sample_bounds_with_p(
    d: usize,
    p: f64,
    alpha: f64,
    beta: f64,
    epsilon: f64,
    delta: f64,
    c_n: f64,
    c_m: f64,
) -> Result<SampleBounds> {
    check_unit_open("alpha", alpha)?;
    check_unit_open("beta", beta)?;
    check_unit_open("delta", delta)?;
    check_positive("epsilon", epsilon)?;
    check_positive("c_n", c_n)?;
    check_positive("c_m", c_m)?;
    if d == 0 {
        return Err(Error::InvalidParameter {
            name: "d",
            reason: "must be at least 1".into(),
        });
    }
    let core = d as f64 * (1.0 / alpha).ln() + (1.0 / beta).ln();
    let n_raw = c_n * core.powf(1.5) * (p * (1.0 / delta).ln()).sqrt() / (epsilon * alpha * alpha);
    let m_raw = c_m * core / alpha;
    Ok(SampleBounds {
        n: n_raw.ceil() as u64,
        m: m_raw.ceil() as u64,
        n_raw,
        m_raw,
    })
}

/// Private and public sample sizes for VC dimension `d` and dual VC
/// dimension `p`, with the leading constants exposed.
#[allow(clippy::too_many_arguments)]
pub fn theorem1_samples(
    d: usize,
    p: usize,
    alpha: f64,
    beta: f64,
    epsilon: f64,
    delta: f64,
    c_n: f64,
    c_m: f64,
) -> Result<SampleBounds> {
    if p == 0 {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: "must be at least 1".into(),
        });
    }
    sample_bounds_with_p(d, p as f64, alpha, beta, epsilon, delta, c_n, c_m)
}

/// As [`theorem1_samples`] with the dual VC dimension bounded by `2^{d+1}`.
#[allow(clippy::too_many_arguments)]
pub fn theorem1_samples_dual_from_vc(
    d: usize,
    alpha: f64,
    beta: f64,
    epsilon: f64,
    delta: f64,
    c_n: f64,
    c_m: f64,
) -> Result<SampleBounds> {
    let p = 2f64.powi(i32::try_from(d).unwrap_or(i32::MAX).saturating_add(1));
    sample_bounds_with_p(d, p, alpha, beta, epsilon, delta, c_n, c_m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ErrorMethod {
    /// Supremum over all thresholds from piecewise-affine profiles.
    ThresholdProfile,
    /// Maximum over every member of a finite class.
    Finite {
        queries: usize,
    },
    Grid {
        grid: Vec<Hypothesis>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub error: f64,
    #[serde(flatten)]
    pub method: ErrorMethod,
}

/// `sup_h |a(h) - b(h)|` over `class`, exactly when possible and over
/// `grid` otherwise.
pub fn sup_gap(
    a: &dyn QueryRelease,
    b: &dyn QueryRelease,
    class: &HypothesisClass,
    grid: Option<&[Hypothesis]>,
) -> Result<ErrorReport> {
    let max_over = |hs: &[Hypothesis]| -> Result<f64> {
        let mut sup = 0.0f64;
        for h in hs {
            sup = sup.max((a.answer(h)? - b.answer(h)?).abs());
        }
        Ok(sup)
    };
    match &class.kind {
        ClassKind::Thresholds { .. } => {
            if let (Some(ka), Some(kb)) = (a.threshold_knots(), b.threshold_knots()) {
                // Surface failures before entering the closures.
                a.answer(&Hypothesis::threshold(0.0))?;
                b.answer(&Hypothesis::threshold(0.0))?;
                let pa = ThresholdProfile::new(ka, |t| a.answer(&Hypothesis::threshold(t)).unwrap_or(f64::NAN));
                let pb = ThresholdProfile::new(kb, |t| b.answer(&Hypothesis::threshold(t)).unwrap_or(f64::NAN));
                let error = sup_abs_diff(&pa, &pb);
                if error.is_nan() {
                    return Err(Error::Internal("threshold answer failed during evaluation".into()));
                }
                return Ok(ErrorReport {
                    error,
                    method: ErrorMethod::ThresholdProfile,
                });
            }
        }
        _ => {
            let all = class.enumerate()?;
            return Ok(ErrorReport {
                error: max_over(&all)?,
                method: ErrorMethod::Finite { queries: all.len() },
            });
        }
    }
    match grid {
        Some(g) if !g.is_empty() => Ok(ErrorReport {
            error: max_over(g)?,
            method: ErrorMethod::Grid { grid: g.to_vec() },
        }),
        _ => Err(Error::Unsupported(
            "no exact error method for this release and no query grid given".into(),
        )),
    }
}

/// Worst-case error `sup_h |G(h) - E_D h|`.
pub fn evaluate_error(
    g: &dyn QueryRelease,
    dist: &Distribution,
    class: &HypothesisClass,
    grid: Option<&[Hypothesis]>,
) -> Result<ErrorReport> {
    sup_gap(g, &ExactMeans::new(dist.clone()), class, grid)
}

/// The two terms of the triangle inequality behind the release guarantee,
/// measured exactly: `sup_h |E h - E project(h)|` and
/// `max_{h̃} |G̃(h̃) - E h̃|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorDecomposition {
    pub cover_defect: f64,
    pub pmw_defect: f64,
}

pub fn error_decomposition(g: &ReleaseStructure, dist: &Distribution) -> Result<ErrorDecomposition> {
    let cover = g.cover();
    let mut pmw_defect = 0.0f64;
    for (h, a) in cover.representatives().iter().zip(g.answers()) {
        pmw_defect = pmw_defect.max((a - true_mean(dist, h)?).abs());
    }
    let cover_defect = match cover.class().kind {
        ClassKind::Thresholds { .. } => {
            let projected = ProjectedMeans { cover, dist };
            sup_gap(&projected, &ExactMeans::new(dist.clone()), cover.class(), None)?.error
        }
        _ => {
            let mut sup = 0.0f64;
            for h in cover.class().enumerate()? {
                let diff = true_mean(dist, &h)? - true_mean(dist, cover.project(&h)?)?;
                sup = sup.max(diff.abs());
            }
            sup
        }
    };
    Ok(ErrorDecomposition {
        cover_defect,
        pmw_defect,
    })
}

struct ProjectedMeans<'a> {
    cover: &'a CoverResult,
    dist: &'a Distribution,
}

impl QueryRelease for ProjectedMeans<'_> {
    fn answer(&self, h: &Hypothesis) -> Result<f64> {
        true_mean(self.dist, self.cover.project(h)?)
    }

    fn threshold_knots(&self) -> Option<Vec<f64>> {
        Some(self.cover.sorted_real_points())
    }
}

pub const DEFAULT_SYNTHETIC_ATTEMPTS: usize = 200;

/// Searches for a dataset of size `⌈vc/α²⌉ + 1` whose empirical answers are
/// within `2α` of `g` on the whole class, by sampling from `sampler`.
pub fn structure_to_synthetic<R: Rng + ?Sized>(
    g: &dyn QueryRelease,
    class: &HypothesisClass,
    sampler: &Distribution,
    alpha: f64,
    attempts: usize,
    rng: &mut R,
) -> Result<Vec<DomainPoint>> {
    check_unit_open("alpha", alpha)?;
    let size = (class.vc as f64 / (alpha * alpha)).ceil() as usize + 1;
    for _ in 0..attempts {
        let v = sampler.sample_n(size, rng);
        class.check_points(&v)?;
        let emp = EmpiricalRelease::new(v);
        if sup_gap(&emp, g, class, None)?.error <= 2.0 * alpha {
            return Ok(emp.points);
        }
    }
    Err(Error::AttemptsExhausted { attempts })
}

/// Empirical means of a sample (the public-only baseline).
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalRelease {
    points: Vec<DomainPoint>,
    sorted_reals: Option<Vec<f64>>,
}

impl EmpiricalRelease {
    pub fn new(points: Vec<DomainPoint>) -> Self {
        let sorted_reals = points
            .iter()
            .map(|p| match p {
                DomainPoint::Real(v) => Some(*v),
                _ => None,
            })
            .collect::<Option<Vec<f64>>>()
            .filter(|v| !v.is_empty())
            .map(|mut v| {
                v.sort_by(f64::total_cmp);
                v
            });
        EmpiricalRelease { points, sorted_reals }
    }

    pub fn points(&self) -> &[DomainPoint] {
        &self.points
    }
}

impl QueryRelease for EmpiricalRelease {
    fn answer(&self, h: &Hypothesis) -> Result<f64> {
        if self.points.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let (Some(s), Hypothesis::Threshold { cutoff }) = (&self.sorted_reals, h) {
            let below = s.partition_point(|v| v <= cutoff);
            return Ok(2.0 * below as f64 / s.len() as f64 - 1.0);
        }
        let mut acc = 0i64;
        for x in &self.points {
            acc += i64::from(evaluate(h, x)?);
        }
        Ok(acc as f64 / self.points.len() as f64)
    }

    fn threshold_knots(&self) -> Option<Vec<f64>> {
        let mut k = self.sorted_reals.clone()?;
        k.dedup();
        Some(k)
    }
}

/// The exact means of a distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactMeans {
    dist: Distribution,
}

impl ExactMeans {
    pub fn new(dist: Distribution) -> Self {
        ExactMeans { dist }
    }
}

impl QueryRelease for ExactMeans {
    fn answer(&self, h: &Hypothesis) -> Result<f64> {
        match (&self.dist, h) {
            (Distribution::Discrete { .. }, Hypothesis::Threshold { cutoff }) => {
                Ok(2.0 * self.dist.cdf(*cutoff)? - 1.0)
            }
            _ => true_mean(&self.dist, h),
        }
    }

    fn threshold_knots(&self) -> Option<Vec<f64>> {
        self.dist.cdf_knots().ok()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantRelease(pub f64);

impl QueryRelease for ConstantRelease {
    fn answer(&self, _: &Hypothesis) -> Result<f64> {
        Ok(self.0)
    }

    fn threshold_knots(&self) -> Option<Vec<f64>> {
        Some(Vec::new())
    }
}

/// Thresholds released by PMW over a fixed grid with no public data (the
/// private-only baseline). Answers are indexed by the number of grid points
/// at or below the cutoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRelease {
    grid: Vec<f64>,
    answers: Vec<f64>,
    pub flags: ReleaseFlags,
}

impl QueryRelease for GridRelease {
    fn answer(&self, h: &Hypothesis) -> Result<f64> {
        match h {
            Hypothesis::Threshold { cutoff } => Ok(self.answers[self.grid.partition_point(|g| g <= cutoff)]),
            _ => Err(Error::DomainMismatch("grid release answers thresholds only".into())),
        }
    }

    fn threshold_knots(&self) -> Option<Vec<f64>> {
        Some(self.grid.clone())
    }
}

/// Private-only threshold release: PMW with parameters `(α/2, β/2, ε, δ)`
/// over the grid `lo + (j+1)(hi-lo)/K`, `j < K`, plus one element for points
/// above `hi`. Each private point is rounded up to the next grid point,
/// which preserves every grid threshold.
#[allow(clippy::too_many_arguments)]
pub fn private_only_grid<R: Rng + ?Sized>(
    x: &[DomainPoint],
    lo: f64,
    hi: f64,
    grid_size: usize,
    alpha: f64,
    beta: f64,
    epsilon: f64,
    delta: f64,
    opts: &PrvqOptions,
    rng: &mut R,
) -> Result<GridRelease> {
    if grid_size == 0 || lo >= hi || lo.is_nan() || hi.is_nan() {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: format!("need a nonempty grid over a nonempty interval, got {grid_size} on [{lo}, {hi}]"),
        });
    }
    if grid_size as u128 + 1 > opts.size_cap {
        return Err(Error::SizeLimit {
            what: "grid domain",
            size: grid_size as u128 + 1,
            limit: opts.size_cap,
        });
    }
    let mut cfg = PmwConfig::new(alpha / 2.0, beta / 2.0, epsilon, delta)?
        .with_noise_off(opts.noise_off)
        .with_update_rule(opts.update_rule);
    cfg.update_budget = opts.update_budget;
    cfg.validate()?;
    let k = grid_size as f64;
    let grid: Vec<f64> = (0..grid_size).map(|j| lo + (j as f64 + 1.0) * (hi - lo) / k).collect();
    let s = x
        .iter()
        .map(|p| match p {
            DomainPoint::Real(v) if v.is_finite() => Ok(grid.partition_point(|g| g < v)),
            _ => Err(Error::DomainMismatch(format!("{p:?} is not a real point"))),
        })
        .collect::<Result<Vec<usize>>>()?;
    let queries = PrefixQueries::new((0..=grid_size).collect(), grid_size + 1)?;
    let out = pmw_release(&s, &queries, &cfg, rng)?;
    Ok(GridRelease {
        grid,
        answers: out.answers,
        flags: ReleaseFlags {
            budget_exhausted: out.budget_exhausted,
            updates_used: out.state.updates_used,
            budget: out.budget,
        },
    })
}

/// A finite class released query by query (private-only baseline for
/// stumps and explicit classes).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRelease {
    hypotheses: Vec<Hypothesis>,
    answers: Vec<f64>,
    pub flags: ReleaseFlags,
}

impl QueryRelease for TableRelease {
    fn answer(&self, h: &Hypothesis) -> Result<f64> {
        self.hypotheses
            .iter()
            .position(|k| k == h)
            .map(|i| self.answers[i])
            .ok_or_else(|| Error::DomainMismatch(format!("{h:?} was not released")))
    }
}

/// Private-only release of a finite class: PMW with `(α/2, β/2, ε, δ)` over
/// the representative domain of the whole class.
#[allow(clippy::too_many_arguments)]
pub fn private_only_finite<R: Rng + ?Sized>(
    x: &[DomainPoint],
    class: &HypothesisClass,
    alpha: f64,
    beta: f64,
    epsilon: f64,
    delta: f64,
    opts: &PrvqOptions,
    rng: &mut R,
) -> Result<TableRelease> {
    let mut cfg = PmwConfig::new(alpha / 2.0, beta / 2.0, epsilon, delta)?
        .with_noise_off(opts.noise_off)
        .with_update_rule(opts.update_rule);
    cfg.update_budget = opts.update_budget;
    cfg.validate()?;
    class.check_points(x)?;
    let hypotheses = class.enumerate()?;
    let rep = crate::repdomain::from_hypotheses(&hypotheses, DomainSpec::for_class(class), opts.size_cap)?;
    let s = map_dataset(&rep, x)?;
    let queries = LabelMatrix::new(rep.label_matrix(&hypotheses)?)?;
    let out = pmw_release(&s, &queries, &cfg, rng)?;
    Ok(TableRelease {
        hypotheses,
        answers: out.answers,
        flags: ReleaseFlags {
            budget_exhausted: out.budget_exhausted,
            updates_used: out.state.updates_used,
            budget: out.budget,
        },
    })
}

/// Answers of `g` on every member of a finite class, keyed by hypothesis.
pub fn answer_table(g: &dyn QueryRelease, class: &HypothesisClass) -> Result<HashMap<usize, f64>> {
    class
        .enumerate()?
        .iter()
        .enumerate()
        .map(|(i, h)| g.answer(h).map(|a| (i, a)))
        .collect()
}
