//! Finite covers built from public data.
//!
//! The public sample `w` is deduplicated into `T`, the distinct label
//! vectors `Π(T)` realized by the class are enumerated, and one
//! representative hypothesis is fixed per vector. Any hypothesis of the
//! class is then projected onto the representative that agrees with it on
//! every public point.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::classes::{
    dedup_points, signature, ClassKind, Distribution, DomainPoint, Hypothesis, HypothesisClass, Label,
};
use crate::error::{check_positive, check_unit_open, Error, Result};
use crate::profile::{sup_abs_diff, ThresholdProfile};

pub const DEFAULT_C_COVER: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CoverRecord", into = "CoverRecord")]
pub struct CoverResult {
    class: HypothesisClass,
    public_points: Vec<DomainPoint>,
    patterns: Vec<Vec<Label>>,
    representatives: Vec<Hypothesis>,
    full_public_sample: Vec<DomainPoint>,
    index: HashMap<Vec<Label>, usize>,
}

#[derive(Clone, Serialize, Deserialize)]
struct CoverRecord {
    class: HypothesisClass,
    public_points: Vec<DomainPoint>,
    patterns: Vec<Vec<Label>>,
    representatives: Vec<Hypothesis>,
    full_public_sample: Vec<DomainPoint>,
}

impl From<CoverResult> for CoverRecord {
    fn from(c: CoverResult) -> Self {
        CoverRecord {
            class: c.class,
            public_points: c.public_points,
            patterns: c.patterns,
            representatives: c.representatives,
            full_public_sample: c.full_public_sample,
        }
    }
}

impl TryFrom<CoverRecord> for CoverResult {
    type Error = Error;

    fn try_from(r: CoverRecord) -> Result<Self> {
        if r.patterns.len() != r.representatives.len() || r.patterns.is_empty() {
            return Err(Error::InvalidInput("cover needs one representative per pattern".into()));
        }
        let mut index = HashMap::with_capacity(r.patterns.len());
        for (i, (pat, rep)) in r.patterns.iter().zip(&r.representatives).enumerate() {
            if signature(rep, &r.public_points)? != *pat {
                return Err(Error::InvalidInput(format!(
                    "representative {i} does not realize its pattern"
                )));
            }
            if index.insert(pat.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("pattern {i} is duplicated")));
            }
        }
        Ok(CoverResult {
            class: r.class,
            public_points: r.public_points,
            patterns: r.patterns,
            representatives: r.representatives,
            full_public_sample: r.full_public_sample,
            index,
        })
    }
}

impl CoverResult {
    pub fn class(&self) -> &HypothesisClass {
        &self.class
    }

    /// The deduplicated public points `T`, in first-appearance order.
    pub fn public_points(&self) -> &[DomainPoint] {
        &self.public_points
    }

    pub fn patterns(&self) -> &[Vec<Label>] {
        &self.patterns
    }

    /// `H̃`, aligned with `patterns()`.
    pub fn representatives(&self) -> &[Hypothesis] {
        &self.representatives
    }

    pub fn full_public_sample(&self) -> &[DomainPoint] {
        &self.full_public_sample
    }

    pub fn len(&self) -> usize {
        self.representatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.representatives.is_empty()
    }

    /// Id of the pattern `h` realizes on `T`.
    pub fn pattern_id(&self, h: &Hypothesis) -> Result<usize> {
        let sig = signature(h, &self.public_points)?;
        self.index.get(&sig).copied().ok_or(Error::UnknownPattern)
    }

    /// The unique representative agreeing with `h` on every public point.
    pub fn project(&self, h: &Hypothesis) -> Result<&Hypothesis> {
        self.pattern_id(h).map(|i| &self.representatives[i])
    }

    /// Public points as reals, sorted. Only meaningful for threshold covers.
    pub(crate) fn sorted_real_points(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .public_points
            .iter()
            .filter_map(|p| match p {
                DomainPoint::Real(x) => Some(*x),
                _ => None,
            })
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Distinct label vectors the class realizes on `points`, in canonical
/// order (increasing cutoff / stump index / declaration order).
pub fn projection_patterns(class: &HypothesisClass, points: &[DomainPoint]) -> Result<Vec<Vec<Label>>> {
    Ok(patterns_with_representatives(class, points)?
        .into_iter()
        .map(|(p, _)| p)
        .collect())
}

fn patterns_with_representatives(
    class: &HypothesisClass,
    points: &[DomainPoint],
) -> Result<Vec<(Vec<Label>, Hypothesis)>> {
    class.check_points(points)?;
    let mut out: Vec<(Vec<Label>, Hypothesis)> = Vec::new();
    let mut seen: HashMap<Vec<Label>, usize> = HashMap::new();
    let mut push = |rep: Hypothesis| -> Result<()> {
        let sig = signature(&rep, points)?;
        if !seen.contains_key(&sig) {
            seen.insert(sig.clone(), out.len());
            out.push((sig, rep));
        }
        Ok(())
    };
    match &class.kind {
        ClassKind::Thresholds { lo, hi } => {
            let mut vals: Vec<f64> = points
                .iter()
                .map(|p| match p {
                    DomainPoint::Real(v) => *v,
                    _ => unreachable!("checked by check_points"),
                })
                .collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            if vals.is_empty() {
                push(Hypothesis::threshold(lo + (hi - lo) / 2.0))?;
            } else {
                push(Hypothesis::threshold(vals[0] - 1.0))?;
                for pair in vals.windows(2) {
                    let mid = pair[0] + (pair[1] - pair[0]) / 2.0;
                    // Adjacent floats: the midpoint may round up onto pair[1].
                    let cut = if mid < pair[1] { mid } else { pair[0] };
                    push(Hypothesis::threshold(cut))?;
                }
                push(Hypothesis::threshold(vals[vals.len() - 1] + 1.0))?;
            }
        }
        ClassKind::Stumps { p } => {
            for i in 1..=*p {
                push(Hypothesis::stump(i))?;
            }
        }
        ClassKind::Explicit(_) => {
            for h in class.enumerate()? {
                push(h)?;
            }
        }
    }
    Ok(out)
}

/// Builds the cover `H̃` from the public sample `w`.
pub fn build_cover(class: &HypothesisClass, w: &[DomainPoint]) -> Result<CoverResult> {
    class.check_points(w)?;
    let public_points = dedup_points(w);
    let pairs = patterns_with_representatives(class, &public_points)?;
    let mut index = HashMap::with_capacity(pairs.len());
    let mut patterns = Vec::with_capacity(pairs.len());
    let mut representatives = Vec::with_capacity(pairs.len());
    for (i, (pat, rep)) in pairs.into_iter().enumerate() {
        index.insert(pat.clone(), i);
        patterns.push(pat);
        representatives.push(rep);
    }
    if patterns.is_empty() {
        return Err(Error::Internal("class realized no pattern".into()));
    }
    Ok(CoverResult {
        class: class.clone(),
        public_points,
        patterns,
        representatives,
        full_public_sample: w.to_vec(),
        index,
    })
}

/// `⌈c_cover · (d ln(1/α) + ln(1/β)) / α⌉` public samples.
pub fn public_sample_size(d: usize, alpha: f64, beta: f64, c_cover: f64) -> Result<usize> {
    check_unit_open("alpha", alpha)?;
    check_unit_open("beta", beta)?;
    check_positive("c_cover", c_cover)?;
    if d == 0 {
        return Err(Error::InvalidParameter {
            name: "d",
            reason: "VC dimension must be at least 1".into(),
        });
    }
    let m = c_cover * (d as f64 * (1.0 / alpha).ln() + (1.0 / beta).ln()) / alpha;
    Ok(m.ceil() as usize)
}

/// `sup_h Pr_{x~D}[h(x) != project(h)(x)]` over every threshold, computed
/// exactly from the CDF of `dist`.
pub fn threshold_cover_disagreement(cover: &CoverResult, dist: &Distribution) -> Result<f64> {
    if !matches!(cover.class.kind, ClassKind::Thresholds { .. }) {
        return Err(Error::Unsupported("exact disagreement needs a threshold cover".into()));
    }
    // Validate once so the closures below cannot fail.
    dist.cdf(0.0)?;
    let cdf = ThresholdProfile::new(dist.cdf_knots()?, |t| dist.cdf(t).unwrap_or(f64::NAN));
    let projected = ThresholdProfile::new(cover.sorted_real_points(), |t| {
        match cover.project(&Hypothesis::threshold(t)) {
            Ok(Hypothesis::Threshold { cutoff }) => dist.cdf(*cutoff).unwrap_or(f64::NAN),
            _ => f64::NAN,
        }
    });
    let sup = sup_abs_diff(&cdf, &projected);
    if sup.is_nan() {
        return Err(Error::Internal("projection failed inside cover".into()));
    }
    Ok(sup)
}
