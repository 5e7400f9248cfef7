//! Exact suprema over all threshold cutoffs.
//!
//! Every function of the cutoff `t` that shows up in this crate (released
//! answers, true means `2F(t) - 1`, projected CDFs, empirical means) is
//! right-continuous, affine between finitely many knots and constant beyond
//! the outermost knots. The supremum of the absolute difference of two such
//! functions is then attained at a knot or as a left limit at a knot, so it
//! can be computed exactly from finitely many evaluations.

pub struct ThresholdProfile<'a> {
    knots: Vec<f64>,
    value: Box<dyn Fn(f64) -> f64 + 'a>,
}

impl<'a> ThresholdProfile<'a> {
    /// `value` must be right-continuous, affine between consecutive knots
    /// and constant outside `[min knot, max knot]`.
    pub fn new(knots: Vec<f64>, value: impl Fn(f64) -> f64 + 'a) -> Self {
        ThresholdProfile {
            knots,
            value: Box::new(value),
        }
    }

    pub fn constant(c: f64) -> Self {
        ThresholdProfile::new(Vec::new(), move |_| c)
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.value)(t)
    }
}

/// `sup_t |a(t) - b(t)|` over the whole real line.
pub fn sup_abs_diff(a: &ThresholdProfile<'_>, b: &ThresholdProfile<'_>) -> f64 {
    let mut knots: Vec<f64> = a.knots.iter().chain(&b.knots).copied().collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let diff = |t: f64| (a.eval(t) - b.eval(t)).abs();
    let Some(&first) = knots.first() else {
        return diff(0.0);
    };
    let mut sup = diff(first - 1.0);
    for (i, &k) in knots.iter().enumerate() {
        sup = sup.max(diff(k));
        if let Some(&next) = knots.get(i + 1) {
            let mid = k + (next - k) / 2.0;
            let left_a = 2.0 * a.eval(mid) - a.eval(k);
            let left_b = 2.0 * b.eval(mid) - b.eval(k);
            sup = sup.max((left_a - left_b).abs());
        }
    }
    sup
}
