//! Domain points, ±1-valued hypotheses, the built-in query classes and the
//! data distributions they are evaluated under.
//!
//! Three domain kinds are supported: the real line (threshold queries), the
//! hypercube `{±1}^p` (decision stumps) and abstract finite domains whose
//! elements are referenced by id (explicit hypothesis tables).

use rand::distributions::{Distribution as _, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cover;
use crate::error::{Error, Result};

/// A query label, always `+1` or `-1`.
pub type Label = i8;

/// Largest point set on which the brute-force shattering search will run.
pub const MAX_BRUTE_FORCE: usize = 20;

/// Sign vector in `{±1}^p`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct SignVector(Vec<Label>);

impl SignVector {
    pub fn new(entries: Vec<Label>) -> Result<Self> {
        if let Some(bad) = entries.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Error::InvalidInput(format!("sign vector entry {bad} is not +1 or -1")));
        }
        Ok(SignVector(entries))
    }

    /// Caller guarantees every entry is ±1.
    pub(crate) fn from_trusted(entries: Vec<Label>) -> Self {
        debug_assert!(entries.iter().all(|&v| v == 1 || v == -1));
        SignVector(entries)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Label] {
        &self.0
    }
}

impl TryFrom<Vec<i8>> for SignVector {
    type Error = Error;
    fn try_from(v: Vec<i8>) -> Result<Self> {
        SignVector::new(v)
    }
}

impl From<SignVector> for Vec<i8> {
    fn from(v: SignVector) -> Self {
        v.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainPoint {
    Real(f64),
    Signs(SignVector),
    Element(usize),
}

impl DomainPoint {
    pub fn signs(entries: Vec<Label>) -> Result<Self> {
        SignVector::new(entries).map(DomainPoint::Signs)
    }

    fn kind_name(&self) -> &'static str {
        match self {
            DomainPoint::Real(_) => "real",
            DomainPoint::Signs(_) => "sign vector",
            DomainPoint::Element(_) => "finite element",
        }
    }

    /// Equality used for deduplication. Reals compare bitwise so that the
    /// relation is an equivalence even in the presence of `-0.0`.
    pub(crate) fn same_as(&self, other: &DomainPoint) -> bool {
        match (self, other) {
            (DomainPoint::Real(a), DomainPoint::Real(b)) => a.to_bits() == b.to_bits(),
            _ => self == other,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    /// `+1` iff `x <= cutoff`.
    Threshold { cutoff: f64 },
    /// `h_i(x) = x_i`, with a 1-based coordinate index.
    Stump { index: usize },
    /// Label table over the elements of a finite domain. `id` is the
    /// position of the hypothesis in its class.
    Table { id: usize, labels: Vec<Label> },
}

impl Hypothesis {
    pub fn threshold(cutoff: f64) -> Self {
        Hypothesis::Threshold { cutoff }
    }

    pub fn stump(index: usize) -> Self {
        Hypothesis::Stump { index }
    }
}

/// Label of `h` on `x`.
pub fn evaluate(h: &Hypothesis, x: &DomainPoint) -> Result<Label> {
    match (h, x) {
        (Hypothesis::Threshold { cutoff }, DomainPoint::Real(v)) => Ok(if *v <= *cutoff { 1 } else { -1 }),
        (Hypothesis::Stump { index }, DomainPoint::Signs(s)) => {
            if *index == 0 || *index > s.len() {
                return Err(Error::DomainMismatch(format!(
                    "stump index {index} outside 1..={}",
                    s.len()
                )));
            }
            Ok(s.0[index - 1])
        }
        (Hypothesis::Table { labels, .. }, DomainPoint::Element(e)) => labels.get(*e).copied().ok_or_else(|| {
            Error::DomainMismatch(format!("element {e} outside finite domain of size {}", labels.len()))
        }),
        (h, x) => Err(Error::DomainMismatch(format!(
            "{} hypothesis applied to {} point",
            match h {
                Hypothesis::Threshold { .. } => "threshold",
                Hypothesis::Stump { .. } => "stump",
                Hypothesis::Table { .. } => "table",
            },
            x.kind_name()
        ))),
    }
}

/// Componentwise labels of `h` on `points`.
pub fn signature(h: &Hypothesis, points: &[DomainPoint]) -> Result<Vec<Label>> {
    points.iter().map(|x| evaluate(h, x)).collect()
}

/// An explicitly listed finite class over the elements `0..domain.len()`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplicitClass {
    /// Opaque element descriptions, in id order.
    pub domain: Vec<serde_json::Value>,
    pub hypotheses: Vec<Vec<Label>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassKind {
    /// All thresholds over the real line. The interval is the declared
    /// region of interest; cutoffs in both unbounded tails are members too.
    Thresholds {
        lo: f64,
        hi: f64,
    },
    Stumps {
        p: usize,
    },
    Explicit(ExplicitClass),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisClass {
    pub kind: ClassKind,
    /// VC dimension (analytic for built-in kinds).
    pub vc: usize,
    /// Dual VC dimension.
    pub dual_vc: usize,
}

impl HypothesisClass {
    pub fn thresholds(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter {
                name: "interval",
                reason: format!("[{lo}, {hi}] is not a finite nonempty interval"),
            });
        }
        Ok(HypothesisClass {
            kind: ClassKind::Thresholds { lo, hi },
            vc: 1,
            dual_vc: 1,
        })
    }

    pub fn stumps(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter {
                name: "p",
                reason: "dimension must be at least 1".into(),
            });
        }
        Ok(HypothesisClass {
            kind: ClassKind::Stumps { p },
            vc: p.ilog2() as usize,
            dual_vc: p,
        })
    }

    /// Builds an explicit class, rejecting malformed rows and duplicate
    /// label behavior. VC and dual VC are brute-forced when the instance is
    /// small enough, otherwise the `log2` counting bounds are stored.
    pub fn explicit(domain: Vec<serde_json::Value>, hypotheses: Vec<Vec<Label>>) -> Result<Self> {
        let n = domain.len();
        if n == 0 {
            return Err(Error::InvalidInput("explicit class has an empty domain".into()));
        }
        if hypotheses.is_empty() {
            return Err(Error::InvalidInput("explicit class has no hypotheses".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for (k, row) in hypotheses.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidInput(format!(
                    "hypothesis {k} has {} labels, domain has {n} elements",
                    row.len()
                )));
            }
            if row.iter().any(|&v| v != 1 && v != -1) {
                return Err(Error::InvalidInput(format!(
                    "hypothesis {k} has a label other than +1/-1"
                )));
            }
            if !seen.insert(row.clone()) {
                return Err(Error::InvalidInput(format!(
                    "hypothesis {k} duplicates the behavior of an earlier hypothesis"
                )));
            }
        }
        let vc = if n <= MAX_BRUTE_FORCE {
            vc_of_rows(&hypotheses, n)?
        } else {
            hypotheses.len().ilog2() as usize
        };
        let dual_vc = if hypotheses.len() <= MAX_BRUTE_FORCE {
            vc_of_rows(&transpose(&hypotheses, n), hypotheses.len())?
        } else {
            n.ilog2() as usize
        };
        Ok(HypothesisClass {
            kind: ClassKind::Explicit(ExplicitClass { domain, hypotheses }),
            vc,
            dual_vc,
        })
    }

    /// Hypothesis `id` of an explicit class.
    pub fn table(&self, id: usize) -> Result<Hypothesis> {
        match &self.kind {
            ClassKind::Explicit(c) => c
                .hypotheses
                .get(id)
                .map(|labels| Hypothesis::Table {
                    id,
                    labels: labels.clone(),
                })
                .ok_or_else(|| Error::InvalidInput(format!("no hypothesis with id {id}"))),
            _ => Err(Error::DomainMismatch("class is not explicit".into())),
        }
    }

    /// Every member of a finite class, in declaration order.
    pub fn enumerate(&self) -> Result<Vec<Hypothesis>> {
        match &self.kind {
            ClassKind::Thresholds { .. } => Err(Error::Unsupported("threshold class is infinite".into())),
            ClassKind::Stumps { p } => Ok((1..=*p).map(Hypothesis::stump).collect()),
            ClassKind::Explicit(c) => Ok((0..c.hypotheses.len())
                .map(|id| Hypothesis::Table {
                    id,
                    labels: c.hypotheses[id].clone(),
                })
                .collect()),
        }
    }

    /// Whether `h` is a member of this class.
    pub fn contains(&self, h: &Hypothesis) -> bool {
        match (&self.kind, h) {
            (ClassKind::Thresholds { .. }, Hypothesis::Threshold { cutoff }) => !cutoff.is_nan(),
            (ClassKind::Stumps { p }, Hypothesis::Stump { index }) => (1..=*p).contains(index),
            (ClassKind::Explicit(c), Hypothesis::Table { id, labels }) => c.hypotheses.get(*id) == Some(labels),
            _ => false,
        }
    }

    /// Whether `x` lies in the domain of this class.
    pub fn admits(&self, x: &DomainPoint) -> bool {
        match (&self.kind, x) {
            (ClassKind::Thresholds { .. }, DomainPoint::Real(v)) => v.is_finite(),
            (ClassKind::Stumps { p }, DomainPoint::Signs(s)) => s.len() == *p,
            (ClassKind::Explicit(c), DomainPoint::Element(e)) => *e < c.domain.len(),
            _ => false,
        }
    }

    pub(crate) fn check_points(&self, points: &[DomainPoint]) -> Result<()> {
        match points.iter().find(|x| !self.admits(x)) {
            Some(x) => Err(Error::DomainMismatch(format!(
                "point {x:?} is outside the class domain"
            ))),
            None => Ok(()),
        }
    }
}

/// The JSON document used to load explicit classes:
/// `{"domain": [...], "hypotheses": [[±1,...],...], "weights": [...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FiniteClassDocument {
    pub domain: Vec<serde_json::Value>,
    pub hypotheses: Vec<Vec<Label>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl FiniteClassDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// The class and, when weights are present, the discrete distribution
    /// over the domain elements.
    pub fn into_parts(self) -> Result<(HypothesisClass, Option<Distribution>)> {
        let n = self.domain.len();
        let dist = match self.weights {
            Some(w) => {
                if w.len() != n {
                    return Err(Error::InvalidInput(format!(
                        "{} weights for a domain of {n} elements",
                        w.len()
                    )));
                }
                Some(Distribution::discrete((0..n).map(DomainPoint::Element).collect(), w)?)
            }
            None => None,
        };
        let class = HypothesisClass::explicit(self.domain, self.hypotheses)?;
        Ok((class, dist))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    UniformInterval {
        lo: f64,
        hi: f64,
    },
    Discrete {
        points: Vec<DomainPoint>,
        weights: Vec<f64>,
    },
    ProductHypercube {
        bias: Vec<f64>,
    },
}

impl Distribution {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter {
                name: "interval",
                reason: format!("[{lo}, {hi}] is not a finite nonempty interval"),
            });
        }
        Ok(Distribution::UniformInterval { lo, hi })
    }

    pub fn discrete(points: Vec<DomainPoint>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "discrete distribution needs matching nonempty points ({}) and weights ({})",
                points.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "weights",
                reason: "weights must be nonnegative".into(),
            });
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter {
                name: "weights",
                reason: format!("weights sum to {total}, not 1"),
            });
        }
        Ok(Distribution::Discrete { points, weights })
    }

    pub fn point_mass(x: DomainPoint) -> Self {
        Distribution::Discrete {
            points: vec![x],
            weights: vec![1.0],
        }
    }

    pub fn product_hypercube(bias: Vec<f64>) -> Result<Self> {
        if bias.is_empty() {
            return Err(Error::InvalidParameter {
                name: "bias",
                reason: "dimension must be at least 1".into(),
            });
        }
        if bias.iter().any(|b| !(-1.0..=1.0).contains(b)) {
            return Err(Error::InvalidParameter {
                name: "bias",
                reason: "biases must lie in [-1, 1]".into(),
            });
        }
        Ok(Distribution::ProductHypercube { bias })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DomainPoint {
        match self {
            Distribution::UniformInterval { lo, hi } => DomainPoint::Real(rng.gen_range(*lo..*hi)),
            Distribution::Discrete { points, weights } => {
                // Weights were validated at construction.
                let idx = WeightedIndex::new(weights).expect("validated weights");
                points[idx.sample(rng)].clone()
            }
            Distribution::ProductHypercube { bias } => {
                DomainPoint::Signs(SignVector::from_trusted(sample_signs(bias, rng)))
            }
        }
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<DomainPoint> {
        match self {
            Distribution::Discrete { points, weights } => {
                let idx = WeightedIndex::new(weights).expect("validated weights");
                (0..n).map(|_| points[idx.sample(rng)].clone()).collect()
            }
            _ => (0..n).map(|_| self.sample(rng)).collect(),
        }
    }

    /// `P(x <= t)` for distributions over the real line.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        match self {
            Distribution::UniformInterval { lo, hi } => Ok(((t - lo) / (hi - lo)).clamp(0.0, 1.0)),
            Distribution::Discrete { points, weights } => {
                let mut acc = 0.0;
                for (x, w) in points.iter().zip(weights) {
                    match x {
                        DomainPoint::Real(v) if *v <= t => acc += w,
                        DomainPoint::Real(_) => {}
                        _ => return Err(Error::DomainMismatch("distribution is not over reals".into())),
                    }
                }
                Ok(acc.min(1.0))
            }
            Distribution::ProductHypercube { .. } => {
                Err(Error::DomainMismatch("hypercube distribution has no CDF".into()))
            }
        }
    }

    /// Points where the CDF is not affine.
    pub fn cdf_knots(&self) -> Result<Vec<f64>> {
        match self {
            Distribution::UniformInterval { lo, hi } => Ok(vec![*lo, *hi]),
            Distribution::Discrete { points, .. } => points
                .iter()
                .map(|x| match x {
                    DomainPoint::Real(v) => Ok(*v),
                    _ => Err(Error::DomainMismatch("distribution is not over reals".into())),
                })
                .collect(),
            Distribution::ProductHypercube { .. } => {
                Err(Error::DomainMismatch("hypercube distribution has no CDF".into()))
            }
        }
    }
}

/// One draw from the product distribution with the given biases
/// (`E x_j = bias_j`).
pub fn sample_signs<R: Rng + ?Sized>(bias: &[f64], rng: &mut R) -> Vec<Label> {
    bias.iter()
        .map(|b| if rng.gen::<f64>() < (1.0 + b) / 2.0 { 1 } else { -1 })
        .collect()
}

/// Exact `E_{x~D}[h(x)]` where a closed form exists.
pub fn true_mean(dist: &Distribution, h: &Hypothesis) -> Result<f64> {
    match (dist, h) {
        (Distribution::UniformInterval { .. }, Hypothesis::Threshold { cutoff }) => Ok(2.0 * dist.cdf(*cutoff)? - 1.0),
        (Distribution::ProductHypercube { bias }, Hypothesis::Stump { index }) => {
            if *index == 0 || *index > bias.len() {
                return Err(Error::DomainMismatch(format!(
                    "stump index {index} outside 1..={}",
                    bias.len()
                )));
            }
            Ok(bias[index - 1])
        }
        (Distribution::Discrete { points, weights }, h) => {
            let mut acc = 0.0;
            for (x, w) in points.iter().zip(weights) {
                acc += w * f64::from(evaluate(h, x)?);
            }
            Ok(acc.clamp(-1.0, 1.0))
        }
        _ => Err(Error::Unsupported(format!(
            "no closed-form mean for {h:?} under this distribution; use estimate_mean"
        ))),
    }
}

pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;

/// Monte Carlo estimate of `E_{x~D}[h(x)]`.
pub fn estimate_mean<R: Rng + ?Sized>(dist: &Distribution, h: &Hypothesis, samples: usize, rng: &mut R) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidParameter {
            name: "samples",
            reason: "need at least one sample".into(),
        });
    }
    let mut acc = 0i64;
    for _ in 0..samples {
        acc += i64::from(evaluate(h, &dist.sample(rng))?);
    }
    Ok(acc as f64 / samples as f64)
}

/// `true_mean` when available, otherwise a Monte Carlo estimate.
pub fn mean_or_estimate<R: Rng + ?Sized>(
    dist: &Distribution,
    h: &Hypothesis,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    match true_mean(dist, h) {
        Err(Error::Unsupported(_)) => estimate_mean(dist, h, samples, rng),
        other => other,
    }
}

/// VC dimension of `class` restricted to `domain`, by exhaustive search.
pub fn compute_vc(class: &HypothesisClass, domain: &[DomainPoint]) -> Result<usize> {
    let domain = dedup_points(domain);
    if domain.len() > MAX_BRUTE_FORCE {
        return Err(Error::SizeLimit {
            what: "domain",
            size: domain.len() as u128,
            limit: MAX_BRUTE_FORCE as u128,
        });
    }
    let rows = cover::projection_patterns(class, &domain)?;
    vc_of_rows(&rows, domain.len())
}

/// Dual VC dimension of `class` restricted to `domain`: the VC dimension of
/// the transposed label matrix (points as functions of hypotheses).
pub fn compute_dual_vc(class: &HypothesisClass, domain: &[DomainPoint]) -> Result<usize> {
    let domain = dedup_points(domain);
    let rows = cover::projection_patterns(class, &domain)?;
    if rows.len() > MAX_BRUTE_FORCE {
        return Err(Error::SizeLimit {
            what: "restricted class",
            size: rows.len() as u128,
            limit: MAX_BRUTE_FORCE as u128,
        });
    }
    vc_of_rows(&transpose(&rows, domain.len()), rows.len())
}

/// VC dimension of the set system whose rows are label vectors over
/// `ncols` points.
pub fn vc_of_rows(rows: &[Vec<Label>], ncols: usize) -> Result<usize> {
    if ncols > MAX_BRUTE_FORCE {
        return Err(Error::SizeLimit {
            what: "point set",
            size: ncols as u128,
            limit: MAX_BRUTE_FORCE as u128,
        });
    }
    let masks: Vec<u32> = rows
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .filter(|(_, &v)| v == 1)
                .fold(0u32, |m, (j, _)| m | (1 << j))
        })
        .collect();
    let mut best = 0;
    let mut scratch = Vec::with_capacity(masks.len());
    for k in 1..=ncols {
        if (1usize << k) > masks.len() {
            break;
        }
        let shattered = k_subsets(ncols, k).any(|subset| {
            scratch.clear();
            scratch.extend(masks.iter().map(|m| m & subset));
            scratch.sort_unstable();
            scratch.dedup();
            scratch.len() == 1 << k
        });
        if !shattered {
            break;
        }
        best = k;
    }
    Ok(best)
}

/// All `k`-element subsets of `0..n` as bitmasks (Gosper's hack).
fn k_subsets(n: usize, k: usize) -> impl Iterator<Item = u32> {
    let limit = 1u64 << n;
    let mut cur = (1u64 << k) - 1;
    std::iter::from_fn(move || {
        if cur >= limit {
            return None;
        }
        let out = cur as u32;
        let c = cur & cur.wrapping_neg();
        let r = cur + c;
        cur = (((r ^ cur) >> 2) / c) | r;
        Some(out)
    })
}

pub(crate) fn transpose(rows: &[Vec<Label>], ncols: usize) -> Vec<Vec<Label>> {
    (0..ncols).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
}

pub(crate) fn dedup_points(points: &[DomainPoint]) -> Vec<DomainPoint> {
    let mut out: Vec<DomainPoint> = Vec::new();
    for p in points {
        if !out.iter().any(|q| q.same_as(p)) {
            out.push(p.clone());
        }
    }
    out
}

/// Sauer–Shelah style bound `(e n / d)^d`, with the `d = 0` limit of 1.
pub fn sauer_bound(n: usize, d: usize) -> f64 {
    if d == 0 {
        1.0
    } else {
        (std::f64::consts::E * n as f64 / d as f64).powi(d as i32)
    }
}
