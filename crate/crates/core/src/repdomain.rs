//! Representative domains: one point per equivalence class of
//! "every hypothesis of `H̃` agrees", plus the map sending any domain point
//! to its representative.

use serde::{Deserialize, Serialize};

use crate::classes::{evaluate, ClassKind, DomainPoint, Hypothesis, HypothesisClass, Label, SignVector};
use crate::cover::CoverResult;
use crate::error::{Error, Result};

pub const DEFAULT_SIZE_CAP: u128 = 1 << 20;

/// The domain a finite class `H̃` is reduced over.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainSpec {
    /// The real line (threshold classes).
    Reals,
    Hypercube {
        p: usize,
    },
    Finite {
        size: usize,
    },
}

impl DomainSpec {
    pub fn for_class(class: &HypothesisClass) -> Self {
        match &class.kind {
            ClassKind::Thresholds { .. } => DomainSpec::Reals,
            ClassKind::Stumps { p } => DomainSpec::Hypercube { p: *p },
            ClassKind::Explicit(c) => DomainSpec::Finite { size: c.domain.len() },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Locator {
    /// Sorted distinct cutoffs; interval `i` is `(t_i, t_{i+1}]`.
    Intervals {
        cutoffs: Vec<f64>,
    },
    /// 0-based coordinates queried by `H̃`; the representative code packs
    /// `x_j == -1` into bit `k` for `coords[k] = j`.
    Coordinates {
        p: usize,
        coords: Vec<usize>,
    },
    Table {
        of_element: Vec<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeDomain {
    representatives: Vec<DomainPoint>,
    locator: Locator,
}

impl RepresentativeDomain {
    pub fn representatives(&self) -> &[DomainPoint] {
        &self.representatives
    }

    pub fn len(&self) -> usize {
        self.representatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.representatives.is_empty()
    }

    pub fn point(&self, index: usize) -> &DomainPoint {
        &self.representatives[index]
    }

    /// Index of the representative equivalent to `x`.
    pub fn locate(&self, x: &DomainPoint) -> Result<usize> {
        match (&self.locator, x) {
            (Locator::Intervals { cutoffs }, DomainPoint::Real(v)) if v.is_finite() => {
                Ok(cutoffs.partition_point(|c| c < v))
            }
            (Locator::Coordinates { p, coords }, DomainPoint::Signs(s)) if s.len() == *p => {
                let s = s.as_slice();
                Ok(coords
                    .iter()
                    .enumerate()
                    .fold(0usize, |code, (k, &j)| code | (usize::from(s[j] == -1) << k)))
            }
            (Locator::Table { of_element }, DomainPoint::Element(e)) => of_element
                .get(*e)
                .copied()
                .ok_or_else(|| Error::DomainMismatch(format!("element {e} outside the finite domain"))),
            _ => Err(Error::DomainMismatch(format!(
                "point {x:?} is outside the representative domain"
            ))),
        }
    }

    /// Label matrix `labels[q][u] = h_q(rep_u)`.
    pub fn label_matrix(&self, hypotheses: &[Hypothesis]) -> Result<Vec<Vec<Label>>> {
        hypotheses
            .iter()
            .map(|h| self.representatives.iter().map(|u| evaluate(h, u)).collect())
            .collect()
    }
}

/// Builds `X̃` for the representatives of `cover`.
pub fn build_representative_domain(
    cover: &CoverResult,
    spec: DomainSpec,
    size_cap: u128,
) -> Result<RepresentativeDomain> {
    from_hypotheses(cover.representatives(), spec, size_cap)
}

/// Builds the representative domain induced by an arbitrary finite list of
/// hypotheses.
pub fn from_hypotheses(hypotheses: &[Hypothesis], spec: DomainSpec, size_cap: u128) -> Result<RepresentativeDomain> {
    if hypotheses.is_empty() {
        return Err(Error::InvalidInput("representative domain of an empty class".into()));
    }
    let check_cap = |size: u128| {
        if size > size_cap {
            Err(Error::SizeLimit {
                what: "representative domain",
                size,
                limit: size_cap,
            })
        } else {
            Ok(())
        }
    };
    match spec {
        DomainSpec::Reals => {
            let mut cutoffs = hypotheses
                .iter()
                .map(|h| match h {
                    Hypothesis::Threshold { cutoff } if cutoff.is_finite() => Ok(*cutoff),
                    _ => Err(Error::DomainMismatch(format!("{h:?} is not a finite threshold"))),
                })
                .collect::<Result<Vec<f64>>>()?;
            cutoffs.sort_by(f64::total_cmp);
            cutoffs.dedup();
            check_cap(cutoffs.len() as u128 + 1)?;
            let mut reps = Vec::with_capacity(cutoffs.len() + 1);
            reps.push(DomainPoint::Real(cutoffs[0] - 1.0));
            for pair in cutoffs.windows(2) {
                let mid = pair[0] + (pair[1] - pair[0]) / 2.0;
                // The interval is open on the left.
                reps.push(DomainPoint::Real(if mid > pair[0] { mid } else { pair[1] }));
            }
            reps.push(DomainPoint::Real(cutoffs[cutoffs.len() - 1] + 1.0));
            Ok(RepresentativeDomain {
                representatives: reps,
                locator: Locator::Intervals { cutoffs },
            })
        }
        DomainSpec::Hypercube { p } => {
            let mut coords = hypotheses
                .iter()
                .map(|h| match h {
                    Hypothesis::Stump { index } if (1..=p).contains(index) => Ok(index - 1),
                    _ => Err(Error::DomainMismatch(format!("{h:?} is not a stump over {{±1}}^{p}"))),
                })
                .collect::<Result<Vec<usize>>>()?;
            coords.sort_unstable();
            coords.dedup();
            if coords.len() >= 127 {
                return Err(Error::SizeLimit {
                    what: "representative domain",
                    size: u128::MAX,
                    limit: size_cap,
                });
            }
            let size = 1u128 << coords.len();
            check_cap(size)?;
            let reps = (0..size as usize)
                .map(|code| {
                    let mut v = vec![1 as Label; p];
                    for (k, &j) in coords.iter().enumerate() {
                        if code >> k & 1 == 1 {
                            v[j] = -1;
                        }
                    }
                    DomainPoint::Signs(SignVector::from_trusted(v))
                })
                .collect();
            Ok(RepresentativeDomain {
                representatives: reps,
                locator: Locator::Coordinates { p, coords },
            })
        }
        DomainSpec::Finite { size } => {
            let mut sigs: Vec<Vec<Label>> = Vec::new();
            let mut reps = Vec::new();
            let mut of_element = Vec::with_capacity(size);
            let mut index = std::collections::HashMap::new();
            for e in 0..size {
                let x = DomainPoint::Element(e);
                let sig = hypotheses
                    .iter()
                    .map(|h| evaluate(h, &x))
                    .collect::<Result<Vec<Label>>>()?;
                let id = *index.entry(sig.clone()).or_insert_with(|| {
                    sigs.push(sig);
                    reps.push(x);
                    reps.len() - 1
                });
                of_element.push(id);
            }
            check_cap(reps.len() as u128)?;
            Ok(RepresentativeDomain {
                representatives: reps,
                locator: Locator::Table { of_element },
            })
        }
    }
}

/// Replaces every point by the index of its representative, preserving
/// length and order.
pub fn map_dataset(rep: &RepresentativeDomain, points: &[DomainPoint]) -> Result<Vec<usize>> {
    points.iter().map(|x| rep.locate(x)).collect()
}

/// Like [`map_dataset`] but returns the representative points themselves.
pub fn map_points(rep: &RepresentativeDomain, points: &[DomainPoint]) -> Result<Vec<DomainPoint>> {
    points
        .iter()
        .map(|x| rep.locate(x).map(|i| rep.point(i).clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::signature;

    fn thresholds(cuts: &[f64]) -> Vec<Hypothesis> {
        cuts.iter().map(|&c| Hypothesis::threshold(c)).collect()
    }

    #[test]
    fn two_thresholds_three_representatives() {
        let rep = from_hypotheses(&thresholds(&[0.2, 0.8]), DomainSpec::Reals, DEFAULT_SIZE_CAP).unwrap();
        assert_eq!(rep.len(), 3);
        let mapped = map_dataset(&rep, &[0.1, 0.5, 0.95].map(DomainPoint::Real)).unwrap();
        assert_eq!(mapped, vec![0, 1, 2]);
        // Boundary: x = t belongs to (-inf, t].
        assert_eq!(rep.locate(&DomainPoint::Real(0.2)).unwrap(), 0);
        assert_eq!(rep.locate(&DomainPoint::Real(0.8)).unwrap(), 1);
    }

    #[test]
    fn single_hypothesis_at_most_two() {
        let rep = from_hypotheses(&thresholds(&[0.3]), DomainSpec::Reals, DEFAULT_SIZE_CAP).unwrap();
        assert!(rep.len() <= 2);
        let rep = from_hypotheses(
            &[Hypothesis::stump(3)],
            DomainSpec::Hypercube { p: 5 },
            DEFAULT_SIZE_CAP,
        )
        .unwrap();
        assert_eq!(rep.len(), 2);
    }

    #[test]
    fn map_dataset_trivia() {
        let rep = from_hypotheses(&thresholds(&[0.5]), DomainSpec::Reals, DEFAULT_SIZE_CAP).unwrap();
        assert!(map_dataset(&rep, &[]).unwrap().is_empty());
        let x = DomainPoint::Real(0.77);
        let m = map_dataset(&rep, &[x.clone(), x]).unwrap();
        assert_eq!(m[0], m[1]);
        assert!(map_dataset(&rep, &[DomainPoint::Element(0)]).is_err());
    }

    #[test]
    fn stump_representatives_pad_with_plus_one() {
        let hs = [Hypothesis::stump(2), Hypothesis::stump(4)];
        let rep = from_hypotheses(&hs, DomainSpec::Hypercube { p: 4 }, DEFAULT_SIZE_CAP).unwrap();
        assert_eq!(rep.len(), 4);
        for u in rep.representatives() {
            let DomainPoint::Signs(s) = u else { panic!() };
            assert_eq!(s.as_slice()[0], 1);
            assert_eq!(s.as_slice()[2], 1);
        }
        let x = DomainPoint::signs(vec![-1, -1, -1, 1]).unwrap();
        let r = rep.point(rep.locate(&x).unwrap());
        for h in &hs {
            assert_eq!(evaluate(h, &x).unwrap(), evaluate(h, r).unwrap());
        }
    }

    #[test]
    fn stump_size_cap_refuses() {
        let hs: Vec<_> = (1..=21).map(Hypothesis::stump).collect();
        assert!(matches!(
            from_hypotheses(&hs, DomainSpec::Hypercube { p: 30 }, DEFAULT_SIZE_CAP),
            Err(Error::SizeLimit { .. })
        ));
        let hs: Vec<_> = (1..=200).map(Hypothesis::stump).collect();
        assert!(from_hypotheses(&hs, DomainSpec::Hypercube { p: 200 }, DEFAULT_SIZE_CAP).is_err());
    }

    #[test]
    fn finite_dedupes_in_declaration_order() {
        let hs = vec![
            Hypothesis::Table {
                id: 0,
                labels: vec![1, 1, -1, -1, 1],
            },
            Hypothesis::Table {
                id: 1,
                labels: vec![1, -1, 1, -1, 1],
            },
        ];
        let rep = from_hypotheses(&hs, DomainSpec::Finite { size: 5 }, DEFAULT_SIZE_CAP).unwrap();
        assert_eq!(rep.representatives(), &[0, 1, 2, 3].map(DomainPoint::Element));
        assert_eq!(rep.locate(&DomainPoint::Element(4)).unwrap(), 0);
        let sigs: Vec<_> = rep
            .representatives()
            .iter()
            .map(|u| hs.iter().map(|h| evaluate(h, u).unwrap()).collect::<Vec<_>>())
            .collect();
        let mut uniq = sigs.clone();
        uniq.dedup();
        assert_eq!(uniq.len(), sigs.len());
        let _ = signature(&hs[0], rep.representatives()).unwrap();
    }
}
