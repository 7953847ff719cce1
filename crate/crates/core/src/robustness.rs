//! Worst-case robustness of a chosen design to misspecified weights.
//!
//! For a chosen design p_c (optimal under v_c) and true variances confined
//! to \[a,b\], the worst relative loss R_max is attained at one of three
//! boundary patterns of the true v, (b,a,a,a), (b,b,a,a) or (b,b,b,a), all
//! expressible in closed form through θ = b/a and the triple products of the
//! sorted p_c. The uniform design minimizes R_max; its worst loss is the
//! piecewise function of θ implemented in [`r_max_uniform`], with the branch
//! crossover at θ* ≈ 1.3245 (a sextic root).

use std::fmt;
use std::sync::OnceLock;

use crate::design::{
    objective_l, variance_from_weight, DesignMeasure, VarianceVector, WeightVector,
};
use crate::error::{Error, Result};
use crate::solver::{is_saturated, solve, SolverConfig};

/// Interval bounds \[a,b\] on the variances v = 1/w (equivalently
/// [1/b, 1/a] on the weights). `b = ∞` models an unbounded range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeSpec {
    a: f64,
    b: f64,
}

impl RangeSpec {
    pub fn bounded(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a <= 0.0 || b < a {
            return Err(Error::InvalidConfig(format!(
                "range requires 0 < a <= b < inf, got [{a}, {b}]"
            )));
        }
        Ok(RangeSpec { a, b })
    }

    pub fn unbounded(a: f64) -> Result<Self> {
        if !a.is_finite() || a <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "range requires a > 0, got {a}"
            )));
        }
        Ok(RangeSpec {
            a,
            b: f64::INFINITY,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn theta(&self) -> f64 {
        self.b / self.a
    }

    pub fn is_unbounded(&self) -> bool {
        self.b.is_infinite()
    }
}

/// Triple products of the descending-sorted chosen design:
/// q₄ = p₁p₂p₃ ≥ q₃ = p₁p₂p₄ ≥ q₂ = p₁p₃p₄ ≥ q₁ = p₂p₃p₄.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QProducts {
    q: [f64; 4],
}

impl QProducts {
    /// qᵢ, i in 1..=4.
    pub fn q(&self, i: usize) -> f64 {
        self.q[i - 1]
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.q
    }
}

/// Sorts p_c descending and forms the four triple products.
pub fn q_products(p_c: &DesignMeasure) -> QProducts {
    let (sorted, _) = sort_desc_with_perm(&p_c.as_array());
    QProducts {
        q: [
            sorted[1] * sorted[2] * sorted[3],
            sorted[0] * sorted[2] * sorted[3],
            sorted[0] * sorted[1] * sorted[3],
            sorted[0] * sorted[1] * sorted[2],
        ],
    }
}

/// Descending sort returning the permutation: `perm[k]` is the original
/// index of the k-th sorted component.
fn sort_desc_with_perm(x: &[f64; 4]) -> ([f64; 4], [usize; 4]) {
    let mut idx = [0usize, 1, 2, 3];
    idx.sort_by(|&a, &b| x[b].partial_cmp(&x[a]).unwrap().then(a.cmp(&b)));
    (idx.map(|i| x[i]), idx)
}

/// Efficiency ratio Q = det(w_t, p_c)/det(w_t, p_t) = L(v_t, p_c)/L(v_t, p_t);
/// the relative loss is R(t,c) = 1 − Q^{1/3}. `p_t` must be optimal for `v_t`.
pub fn q_ratio(v_t: &VarianceVector, p_c: &DesignMeasure, p_t: &DesignMeasure) -> Result<f64> {
    let denom = objective_l(v_t, p_t);
    if denom <= 0.0 {
        return Err(Error::DegenerateOptimum);
    }
    Ok(objective_l(v_t, p_c) / denom)
}

/// The three worst-case patterns for the true variance vector, written in
/// the sorted frame (v_c ascending, p_c descending).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RmaxPattern {
    /// v_t = (b,a,a,a)
    Baaa,
    /// v_t = (b,b,a,a)
    Bbaa,
    /// v_t = (b,b,b,a)
    Bbba,
}

impl RmaxPattern {
    pub const ALL: [RmaxPattern; 3] = [RmaxPattern::Baaa, RmaxPattern::Bbaa, RmaxPattern::Bbba];

    /// Number of components set to b.
    fn b_count(self) -> usize {
        match self {
            RmaxPattern::Baaa => 1,
            RmaxPattern::Bbaa => 2,
            RmaxPattern::Bbba => 3,
        }
    }
}

impl fmt::Display for RmaxPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            RmaxPattern::Baaa => "baaa",
            RmaxPattern::Bbaa => "bbaa",
            RmaxPattern::Bbba => "bbba",
        };
        f.write_str(name)
    }
}

/// Closed-form Q at a worst-case pattern, as a function of θ = b/a and the
/// sorted triple products. The (b,b,a,a) form is evaluated through an exact
/// rationalization that removes the 0/0 at θ = 1.
pub fn closed_q(theta: f64, pattern: RmaxPattern, q: &QProducts) -> f64 {
    debug_assert!(theta >= 1.0);
    let [q1, q2, q3, q4] = q.as_array();
    match pattern {
        RmaxPattern::Baaa => {
            let s = theta * q1 + q2 + q3 + q4;
            if theta >= 3.0 {
                27.0 / theta * s
            } else {
                (9.0 - theta) * (9.0 - theta) / 4.0 * s
            }
        }
        RmaxPattern::Bbaa => {
            // 108(θ−1)²·s / ((2θ−1−ρ)(θ−2+ρ)(θ+1+ρ))
            //   = 12·s·(2θ−1+ρ)(ρ+2−θ) / (θ(θ+1+ρ))
            let s = theta * (q1 + q2) + q3 + q4;
            let rho = (theta * theta - theta + 1.0).sqrt();
            12.0 * s * (2.0 * theta - 1.0 + rho) * (rho + 2.0 - theta)
                / (theta * (theta + 1.0 + rho))
        }
        RmaxPattern::Bbba => {
            let s = theta * (q1 + q2 + q3) + q4;
            let nine_t = 9.0 * theta - 1.0;
            nine_t * nine_t / (4.0 * theta * theta * theta) * s
        }
    }
}

/// Where the reported worst case lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RmaxCase {
    /// Chosen v_c saturated: the closed formula of the saturated branch.
    SaturatedCaseI,
    /// Chosen v_c interior: minimum over the three candidate patterns.
    InteriorCaseII,
    /// b = ∞.
    Unbounded,
}

impl fmt::Display for RmaxCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            RmaxCase::SaturatedCaseI => "saturated_case_i",
            RmaxCase::InteriorCaseII => "interior_case_ii",
            RmaxCase::Unbounded => "unbounded",
        };
        f.write_str(name)
    }
}

/// Worst-case relative loss over the stated range, with the attaining
/// true-variance vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmaxReport {
    pub value: f64,
    /// Worst-case pattern in the sorted frame; None for an unbounded range
    /// (the supremum is a limit, not attained).
    pub pattern: Option<RmaxPattern>,
    /// The attaining v_t mapped back to original design-point order.
    pub attaining_vt: Option<[f64; 4]>,
    pub case: RmaxCase,
}

const SAT_TOL: f64 = 1e-10;

/// Worst-case relative loss of the design `p_c` (optimal for `v_c`) when the
/// true variances may lie anywhere in `range`.
pub fn r_max(p_c: &DesignMeasure, v_c: &VarianceVector, range: &RangeSpec) -> Result<RmaxReport> {
    let slack = 1e-9 * range.b().min(f64::MAX);
    for (i, vi) in v_c.iter().enumerate() {
        if vi < range.a() - 1e-9 * range.a() || vi > range.b() + slack {
            return Err(Error::InconsistentInput(format!(
                "v_c[{i}] = {vi} lies outside the stated range [{}, {}]",
                range.a(),
                range.b()
            )));
        }
    }

    if range.is_unbounded() {
        return Ok(RmaxReport {
            value: r_max_unbounded(p_c, v_c),
            pattern: None,
            attaining_vt: None,
            case: RmaxCase::Unbounded,
        });
    }

    let theta = range.theta();
    let (a, b) = (range.a(), range.b());

    // permutation carrying sorted-frame positions to original indices,
    // chosen by v_c ascending so p_c is descending in the same frame
    let mut perm = [0usize, 1, 2, 3];
    let vca = v_c.as_array();
    perm.sort_by(|&x, &y| vca[x].partial_cmp(&vca[y]).unwrap().then(x.cmp(&y)));

    let unsort = |sorted_vt: [f64; 4]| {
        let mut vt = [0.0; 4];
        for (k, &orig) in perm.iter().enumerate() {
            vt[orig] = sorted_vt[k];
        }
        vt
    };

    if is_saturated(v_c, SAT_TOL).0 {
        // saturation inside [a,b] forces v_c4 ≥ 3a, hence θ ≥ 3
        if theta < 3.0 {
            return Err(Error::InconsistentInput(format!(
                "v_c is saturated but θ = {theta} < 3; saturation within [a,b] requires b ≥ 3a"
            )));
        }
        let value = 1.0 - ((9.0 * theta - 1.0) / 2.0).powf(2.0 / 3.0) / (3.0 * theta);
        return Ok(RmaxReport {
            value,
            pattern: Some(RmaxPattern::Bbba),
            attaining_vt: Some(unsort([b, b, b, a])),
            case: RmaxCase::SaturatedCaseI,
        });
    }

    let q = q_products(p_c);
    let mut best = (RmaxPattern::Baaa, f64::INFINITY);
    for pattern in RmaxPattern::ALL {
        let qv = closed_q(theta, pattern, &q);
        if qv < best.1 {
            best = (pattern, qv);
        }
    }
    let (pattern, q_min) = best;
    let mut sorted_vt = [a; 4];
    for slot in sorted_vt.iter_mut().take(pattern.b_count()) {
        *slot = b;
    }
    Ok(RmaxReport {
        value: 1.0 - q_min.cbrt(),
        pattern: Some(pattern),
        attaining_vt: Some(unsort(sorted_vt)),
        case: RmaxCase::InteriorCaseII,
    })
}

/// Worst-case loss when the true variances are unbounded above:
/// 1 for a saturated v_c, otherwise 1 − 3(p₂p₃p₄)^{1/3} with p sorted
/// descending.
pub fn r_max_unbounded(p_c: &DesignMeasure, v_c: &VarianceVector) -> f64 {
    if is_saturated(v_c, SAT_TOL).0 {
        return 1.0;
    }
    let q = q_products(p_c);
    1.0 - 3.0 * q.q(1).cbrt()
}

/// Relative loss R_u of running the uniform design when the truth is `w`:
/// 1 − ¼·(Σvᵢ / L(p_opt))^{1/3}.
pub fn uniform_loss(w: &WeightVector) -> Result<f64> {
    let v = variance_from_weight(w)?;
    let sol = solve(&v, &SolverConfig::default())?;
    Ok(1.0 - 0.25 * (v.sum() / sol.l_max).cbrt())
}

/// Worst-case loss of the uniform design over a weight range with ratio θ.
/// Piecewise in θ with joins at θ* and 3; the middle-low branch is evaluated
/// through the same rationalization as [`closed_q`].
pub fn r_max_uniform(theta: f64) -> f64 {
    assert!(theta >= 1.0, "theta = b/a must be at least 1");
    if theta == 1.0 {
        return 0.0;
    }
    if theta >= 3.0 {
        return 1.0 - 0.75 * (1.0 + 3.0 / theta).cbrt();
    }
    if theta >= theta_star() {
        return 1.0 - (2.0 * (theta + 3.0) * (9.0 - theta) * (9.0 - theta)).cbrt() / 8.0;
    }
    let rho = (theta * theta - theta + 1.0).sqrt();
    // (θ+1)(θ−1)²/((2θ−1−ρ)(θ−2+ρ)(θ+1+ρ)) = (θ+1)(2θ−1+ρ)(ρ+2−θ)/(9θ(θ+1+ρ))
    let ratio = (theta + 1.0) * (2.0 * theta - 1.0 + rho) * (rho + 2.0 - theta)
        / (9.0 * theta * (theta + 1.0 + rho));
    1.0 - 1.5 * ratio.cbrt()
}

/// Sextic whose root in (1,3) is the crossover ratio θ*.
fn crossover_sextic(t: f64) -> f64 {
    // 3456 − 5184θ + 3561θ² + 596θ³ − 1506θ⁴ + 100θ⁵ + θ⁶, Horner form
    (((((t + 100.0) * t - 1506.0) * t + 596.0) * t + 3561.0) * t - 5184.0) * t + 3456.0
}

/// The crossover ratio θ* ≈ 1.3245 where the binding worst-case pattern
/// switches between (b,a,a,a) and (b,b,a,a); computed once by bisection.
pub fn theta_star() -> f64 {
    static THETA_STAR: OnceLock<f64> = OnceLock::new();
    *THETA_STAR.get_or_init(|| {
        let (mut lo, mut hi) = (1.0f64, 3.0f64);
        debug_assert!(crossover_sextic(lo) > 0.0 && crossover_sextic(hi) < 0.0);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if crossover_sextic(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    })
}

/// Standardized distance to the saturation boundary:
/// (2·v_max − Σv)/v_max ∈ [−2, 1); nonnegative iff saturated, −2 iff all
/// components are equal.
pub fn standardized_distance(v: &VarianceVector) -> f64 {
    let (vmax, _) = v.max_with_index();
    (2.0 * vmax - v.sum()) / vmax
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::solve_corollary2;

    fn dm(p: [f64; 4]) -> DesignMeasure {
        DesignMeasure::new(p).unwrap()
    }

    fn vv(v: [f64; 4]) -> VarianceVector {
        VarianceVector::new(v).unwrap()
    }

    fn uniform_q() -> QProducts {
        q_products(&DesignMeasure::uniform())
    }

    #[test]
    fn q_products_examples() {
        let q = uniform_q();
        for i in 1..=4 {
            assert!((q.q(i) - 1.0 / 64.0).abs() < 1e-18);
        }

        let q = q_products(&dm([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]));
        assert_eq!(q.as_array(), [0.0, 0.0, 0.0, 1.0 / 27.0]);

        let q = q_products(&dm([0.4, 0.3, 0.2, 0.1]));
        let expected = [0.006, 0.008, 0.012, 0.024];
        for i in 0..4 {
            assert!((q.as_array()[i] - expected[i]).abs() < 1e-15);
        }
        // sorting is internal: a permuted input gives the same products
        let q2 = q_products(&dm([0.2, 0.4, 0.1, 0.3]));
        assert_eq!(q.as_array(), q2.as_array());
    }

    #[test]
    fn q_ordering_invariant() {
        let q = q_products(&dm([0.37, 0.29, 0.21, 0.13])).as_array();
        assert!(q[3] >= q[2] && q[2] >= q[1] && q[1] >= q[0]);
    }

    #[test]
    fn q_ratio_identity_and_range() {
        let v = vv([1.0, 2.0, 3.0, 4.0]);
        let p_t = solve(&v, &SolverConfig::default()).unwrap().p;
        assert!((q_ratio(&v, &p_t, &p_t).unwrap() - 1.0).abs() < 1e-15);

        let r = q_ratio(&v, &DesignMeasure::uniform(), &p_t).unwrap();
        assert!(r > 0.0 && r <= 1.0);
        // cross-check against the relative-loss route
        let w = WeightVector::new([1.0, 0.5, 1.0 / 3.0, 0.25]).unwrap();
        let loss = crate::design::relative_loss(&w, &p_t, &DesignMeasure::uniform()).unwrap();
        assert!((1.0 - r.cbrt() - loss).abs() < 1e-12);
    }

    #[test]
    fn q_ratio_scale_invariant() {
        let v = vv([1.0, 2.0, 3.0, 4.0]);
        let v_scaled = vv([2.5, 5.0, 7.5, 10.0]);
        let p_t = solve(&v, &SolverConfig::default()).unwrap().p;
        let p_c = dm([0.3, 0.3, 0.2, 0.2]);
        let a = q_ratio(&v, &p_c, &p_t).unwrap();
        let b = q_ratio(&v_scaled, &p_c, &p_t).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn closed_q_is_one_at_theta_one() {
        let q = uniform_q();
        for pattern in RmaxPattern::ALL {
            let val = closed_q(1.0, pattern, &q);
            assert!((val - 1.0).abs() < 1e-12, "{pattern}: {val}");
        }
    }

    #[test]
    fn closed_q_baaa_continuous_at_three() {
        let q = uniform_q();
        let upper = 27.0 / 3.0 * (3.0 * q.q(1) + q.q(2) + q.q(3) + q.q(4));
        let lower = (9.0 - 3.0) * (9.0 - 3.0) / 4.0 * (3.0 * q.q(1) + q.q(2) + q.q(3) + q.q(4));
        assert!((upper - lower).abs() < 1e-12);
        assert!((closed_q(3.0, RmaxPattern::Baaa, &q) - upper).abs() < 1e-15);
    }

    #[test]
    fn closed_q_bbaa_matches_solver_route() {
        // direct oracle: v_t = (2,2,1,1), p_t from the matched-pair closed form
        let theta = 2.0;
        let q = uniform_q();
        let closed = closed_q(theta, RmaxPattern::Bbaa, &q);
        let v_t = vv([2.0, 2.0, 1.0, 1.0]);
        let p_t = solve_corollary2(&v_t).unwrap().p;
        let direct = q_ratio(&v_t, &DesignMeasure::uniform(), &p_t).unwrap();
        assert!((closed - direct).abs() < 1e-9, "{closed} vs {direct}");
    }

    #[test]
    fn rationalized_bbaa_matches_plain_form_away_from_one() {
        // the rationalized (b,b,a,a) expression equals the printed one
        let q = q_products(&dm([0.4, 0.3, 0.2, 0.1]));
        for theta in [1.1f64, 1.5, 2.0, 4.0, 9.0] {
            let rho = (theta * theta - theta + 1.0).sqrt();
            let s = theta * (q.q(1) + q.q(2)) + q.q(3) + q.q(4);
            let printed = 108.0 * (theta - 1.0) * (theta - 1.0) * s
                / ((2.0 * theta - 1.0 - rho) * (theta - 2.0 + rho) * (theta + 1.0 + rho));
            let ours = closed_q(theta, RmaxPattern::Bbaa, &q);
            assert!(
                (printed - ours).abs() < 1e-12 * printed.abs(),
                "theta={theta}"
            );
        }
    }

    #[test]
    fn r_max_saturated_case() {
        let v_c = vv([1.0, 1.0, 1.0, 3.0]);
        let range = RangeSpec::bounded(1.0, 3.0).unwrap();
        let p_c = dm([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]);
        let rep = r_max(&p_c, &v_c, &range).unwrap();
        assert_eq!(rep.case, RmaxCase::SaturatedCaseI);
        // 1 − (1/9)·13^{2/3}
        let expected = 1.0 - 13f64.powf(2.0 / 3.0) / 9.0;
        assert!((rep.value - expected).abs() < 1e-12);
        assert!((rep.value - 0.3857).abs() < 1e-4);
        // the small component sits where v_c is largest
        assert_eq!(rep.attaining_vt.unwrap(), [3.0, 3.0, 3.0, 1.0]);
    }

    #[test]
    fn r_max_saturated_value_matches_reevaluation() {
        // case (i): solving the attaining pattern reproduces the closed value
        let v_c = vv([1.2, 1.0, 1.1, 4.0]);
        let range = RangeSpec::bounded(1.0, 4.4).unwrap();
        let p_c = crate::solver::solve(&v_c, &SolverConfig::default())
            .unwrap()
            .p;
        let rep = r_max(&p_c, &v_c, &range).unwrap();
        assert_eq!(rep.case, RmaxCase::SaturatedCaseI);
        let v_att = vv(rep.attaining_vt.unwrap());
        let p_att = crate::solver::solve(&v_att, &SolverConfig::default())
            .unwrap()
            .p;
        let re_eval = 1.0 - q_ratio(&v_att, &p_c, &p_att).unwrap().cbrt();
        assert!(
            (re_eval - rep.value).abs() < 1e-9,
            "{re_eval} vs {}",
            rep.value
        );
    }

    #[test]
    fn r_max_saturated_theta_below_three_is_inconsistent() {
        let v_c = vv([1.0, 1.0, 1.0, 3.0]);
        let p_c = dm([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]);
        // v_c not within [a,b] → range violation; use a containing range with θ<3
        // impossible: saturation forces max ≥ 3·min ≥ 3a, so b ≥ 3a. Widen a instead.
        let range = RangeSpec::bounded(0.8, 2.2).unwrap();
        assert!(r_max(&p_c, &v_c, &range).is_err());
    }

    #[test]
    fn r_max_of_uniform_candidate_matches_worst_case_curve() {
        for theta in [1.0, 1.2, theta_star(), 2.0, 3.0, 5.0, 20.0] {
            let a = 1.0;
            let b = theta;
            let v_c = vv([0.5 * (a + b); 4]);
            let range = RangeSpec::bounded(a, b).unwrap();
            let rep = r_max(&DesignMeasure::uniform(), &v_c, &range).unwrap();
            let expected = r_max_uniform(theta);
            assert!(
                (rep.value - expected).abs() < 1e-12,
                "theta={theta}: {} vs {expected}",
                rep.value
            );
        }
    }

    #[test]
    fn r_max_zero_at_theta_one() {
        let v_c = vv([2.0; 4]);
        let range = RangeSpec::bounded(2.0, 2.0).unwrap();
        let rep = r_max(&DesignMeasure::uniform(), &v_c, &range).unwrap();
        assert!(rep.value.abs() < 1e-12);
    }

    #[test]
    fn r_max_rejects_out_of_range_vc() {
        let v_c = vv([1.0, 2.0, 3.0, 4.0]);
        let range = RangeSpec::bounded(2.0, 5.0).unwrap();
        let p_c = solve(&v_c, &SolverConfig::default()).unwrap().p;
        assert!(matches!(
            r_max(&p_c, &v_c, &range),
            Err(Error::InconsistentInput(_))
        ));
    }

    #[test]
    fn r_max_unbounded_cases() {
        // saturated chosen variances: total loss possible
        let v_c = vv([5.0, 1.0, 1.0, 1.0]);
        let p_c = dm([0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(r_max_unbounded(&p_c, &v_c), 1.0);

        let v_c = vv([1.0; 4]);
        assert!((r_max_unbounded(&DesignMeasure::uniform(), &v_c) - 0.25).abs() < 1e-15);

        let p_c = dm([0.4, 0.3, 0.2, 0.1]);
        let v_c = vv([1.0, 1.1, 1.2, 1.3]);
        let expected = 1.0 - 3.0 * 0.006f64.cbrt();
        assert!((r_max_unbounded(&p_c, &v_c) - expected).abs() < 1e-12);
        assert!((expected - 0.4548).abs() < 1e-4);
    }

    #[test]
    fn r_max_delegates_unbounded_range() {
        let v_c = vv([1.0; 4]);
        let range = RangeSpec::unbounded(1.0).unwrap();
        let rep = r_max(&DesignMeasure::uniform(), &v_c, &range).unwrap();
        assert_eq!(rep.case, RmaxCase::Unbounded);
        assert!((rep.value - 0.25).abs() < 1e-15);
        assert!(rep.attaining_vt.is_none());
    }

    #[test]
    fn uniform_loss_examples() {
        let w = WeightVector::constant(0.17).unwrap();
        assert!(uniform_loss(&w).unwrap().abs() < 1e-12);

        let w = WeightVector::new([0.244, 0.128, 0.221, 0.221]).unwrap();
        let r = uniform_loss(&w).unwrap();
        assert!((r - 0.009).abs() < 1e-3, "plum loss = {r}");

        let beta = crate::link::BetaVector::new(2.0, 2.0, 0.05).unwrap();
        let w = crate::link::weights_from_beta(crate::link::LinkFunction::Logit, &beta);
        let r = uniform_loss(&w).unwrap();
        assert!((r - 0.05).abs() < 5e-3, "intro loss = {r}");
    }

    #[test]
    fn uniform_worst_case_values() {
        assert_eq!(r_max_uniform(1.0), 0.0);
        let at3 = r_max_uniform(3.0);
        assert!((at3 - (1.0 - 0.75 * 2f64.cbrt())).abs() < 1e-15);
        assert!((at3 - 0.0551).abs() < 1e-4);
        // middle branch evaluated at 3 gives the same value
        let mid = 1.0 - (2.0 * 6.0 * 36.0f64).cbrt() / 8.0;
        assert!((at3 - mid).abs() < 1e-12);
        // bounded by 1/4 with the limit approached from below
        assert!(r_max_uniform(1e6) < 0.25);
        assert!(r_max_uniform(1e6) > 0.2499);
    }

    #[test]
    fn uniform_worst_case_continuity_at_joins() {
        let ts = theta_star();
        for join in [ts, 3.0] {
            let lo = r_max_uniform(join * (1.0 - 1e-12));
            let hi = r_max_uniform(join * (1.0 + 1e-12));
            assert!((lo - hi).abs() < 1e-9, "join {join}: {lo} vs {hi}");
        }
        // continuous at 1 as well
        assert!(r_max_uniform(1.0 + 1e-12) < 1e-9);
    }

    #[test]
    fn theta_star_bracket_and_residual() {
        let ts = theta_star();
        assert!((1.32..=1.33).contains(&ts), "theta* = {ts}");
        // residual after scaling coefficients by 1e-3
        assert!(crossover_sextic(ts).abs() * 1e-3 < 1e-6);
        assert!(crossover_sextic(1.32) > 0.0);
        assert!(crossover_sextic(1.33) < 0.0);
    }

    #[test]
    fn standardized_distance_examples() {
        assert_eq!(standardized_distance(&vv([1.0; 4])), -2.0);
        assert_eq!(standardized_distance(&vv([6.0, 1.0, 2.0, 3.0])), 0.0);
        assert!((standardized_distance(&vv([10.0, 1.0, 2.0, 3.0])) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn range_spec_validation() {
        assert!(RangeSpec::bounded(0.0, 1.0).is_err());
        assert!(RangeSpec::bounded(2.0, 1.0).is_err());
        assert!(RangeSpec::bounded(1.0, 1.0).is_ok());
        let r = RangeSpec::unbounded(0.5).unwrap();
        assert!(r.is_unbounded());
        assert!(r.theta().is_infinite());
    }
}
