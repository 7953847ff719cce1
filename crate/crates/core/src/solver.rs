//! Locally D-optimal design solver.
//!
//! Dispatches between the saturated three-point solution (active when
//! 2·max vᵢ ≥ Σvᵢ), two closed-form special patterns, and a general
//! numerical maximizer of L(p) on the simplex. The general path runs
//! multiplicative-gradient ascent (with a projected-gradient fallback)
//! and finishes with a guarded Newton polish on the interior stationarity
//! system, so the returned design satisfies the KKT conditions to ~1e-12.

use std::fmt;

use crate::design::{objective_l_raw, DesignMeasure, VarianceVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Stop when the criterion improves by less than this (relative).
    pub convergence_tol: f64,
    pub max_iter: usize,
    /// Relative tolerance on the saturation condition 2·max v ≥ Σv.
    pub saturation_tol: f64,
    /// Divisions per axis used by [`grid_oracle`].
    pub grid_resolution: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            convergence_tol: 1e-12,
            max_iter: 10_000,
            saturation_tol: 1e-10,
            grid_resolution: 200,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.convergence_tol <= 0.0 || self.saturation_tol <= 0.0 {
            return Err(Error::InvalidConfig(
                "solver tolerances must be positive".into(),
            ));
        }
        if self.max_iter == 0 || self.grid_resolution == 0 {
            return Err(Error::InvalidConfig(
                "max_iter and grid_resolution must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Which solution path produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Saturated,
    Corollary1,
    Corollary2,
    General,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Branch::Saturated => "saturated",
            Branch::Corollary1 => "corollary1",
            Branch::Corollary2 => "corollary2",
            Branch::General => "general",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveResult {
    pub p: DesignMeasure,
    pub l_max: f64,
    pub branch: Branch,
    pub iterations: usize,
    /// max_{i,j in support} |∂L/∂pᵢ − ∂L/∂pⱼ| / max gradient component.
    pub kkt_residual: f64,
}

/// Relative equality used for closed-form pattern detection.
const PATTERN_TOL: f64 = 1e-12;

fn nearly_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= PATTERN_TOL * a.abs().max(b.abs())
}

/// Saturation check: true iff 2·max vᵢ ≥ (1−tol)·Σvᵢ.
/// Returns the smallest index attaining the maximum.
pub fn is_saturated(v: &VarianceVector, tol: f64) -> (bool, usize) {
    let (vmax, idx) = v.max_with_index();
    (2.0 * vmax >= (1.0 - tol) * v.sum(), idx)
}

/// Gradient of L: gᵢ = ∂L/∂pᵢ = Σ_{j≠i} vⱼ·Π_{k≠i,j} pₖ.
fn gradient(v: &[f64; 4], p: &[f64; 4]) -> [f64; 4] {
    [
        v[1] * p[2] * p[3] + v[2] * p[1] * p[3] + v[3] * p[1] * p[2],
        v[0] * p[2] * p[3] + v[2] * p[0] * p[3] + v[3] * p[0] * p[2],
        v[0] * p[1] * p[3] + v[1] * p[0] * p[3] + v[3] * p[0] * p[1],
        v[0] * p[1] * p[2] + v[1] * p[0] * p[2] + v[2] * p[0] * p[1],
    ]
}

/// KKT stationarity residual over the support of p, relative to the largest
/// gradient component.
fn kkt_residual(v: &[f64; 4], p: &[f64; 4]) -> f64 {
    let g = gradient(v, p);
    let gmax = g.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if gmax == 0.0 {
        return 0.0;
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..4 {
        if p[i] > 0.0 {
            lo = lo.min(g[i]);
            hi = hi.max(g[i]);
        }
    }
    (hi - lo) / gmax
}

fn result_from(v: &VarianceVector, p: [f64; 4], branch: Branch, iterations: usize) -> SolveResult {
    let va = v.as_array();
    SolveResult {
        p: DesignMeasure::new(p).expect("solver produced an invalid design"),
        l_max: objective_l_raw(&va, &p),
        branch,
        iterations,
        kkt_residual: kkt_residual(&va, &p),
    }
}

/// Three-point solution: p = 0 at the argmax of v, 1/3 elsewhere.
pub fn solve_saturated(v: &VarianceVector) -> Result<SolveResult> {
    let (sat, idx) = is_saturated(v, SolverConfig::default().saturation_tol);
    if !sat {
        return Err(Error::InconsistentInput(
            "saturated branch requires 2·max v ≥ Σv".into(),
        ));
    }
    let mut p = [1.0 / 3.0; 4];
    p[idx] = 0.0;
    Ok(result_from(v, p, Branch::Saturated, 0))
}

/// Closed form for v = (v₁', v̄, v̄, v̄) up to permutation with v₁' ≤ 3v̄:
/// the odd point gets (3v̄−v₁')/(9v̄−v₁'), the rest 2v̄/(9v̄−v₁') each.
pub fn solve_corollary1(v: &VarianceVector) -> Result<SolveResult> {
    let va = v.as_array();
    // find a distinguished index whose complement is three equal values
    let odd = (0..4).find(|&i| {
        let rest: Vec<f64> = (0..4).filter(|&j| j != i).map(|j| va[j]).collect();
        nearly_equal(rest[0], rest[1]) && nearly_equal(rest[1], rest[2])
    });
    let Some(odd) = odd else {
        return Err(Error::PatternMismatch(
            "corollary 1 needs three equal variances".into(),
        ));
    };
    let vbar = (0..4).filter(|&j| j != odd).map(|j| va[j]).sum::<f64>() / 3.0;
    let v1 = va[odd];
    if v1 > 3.0 * vbar * (1.0 + PATTERN_TOL) {
        return Err(Error::PatternMismatch(
            "corollary 1 needs the odd variance below three times the common one".into(),
        ));
    }
    let denom = 9.0 * vbar - v1;
    let p_odd = ((3.0 * vbar - v1) / denom).max(0.0);
    let p_rest = 2.0 * vbar / denom;
    let mut p = [p_rest; 4];
    p[odd] = p_odd;
    Ok(result_from(v, p, Branch::Corollary1, 0))
}

/// Closed form for v = (u,u,v̄,v̄) up to matched-pair permutation with u > v̄.
/// Evaluated through rationalized expressions (no cancellation as u → v̄):
/// p_u = u/(2(2u−v̄+d)), p_v = v̄/(2(d+2v̄−u)) with d = √(u²−uv̄+v̄²).
pub fn solve_corollary2(v: &VarianceVector) -> Result<SolveResult> {
    let va = v.as_array();
    let mut idx = [0usize, 1, 2, 3];
    idx.sort_by(|&a, &b| va[a].partial_cmp(&va[b]).unwrap().then(a.cmp(&b)));
    let (lo0, lo1, hi0, hi1) = (idx[0], idx[1], idx[2], idx[3]);
    if !(nearly_equal(va[lo0], va[lo1]) && nearly_equal(va[hi0], va[hi1])) {
        return Err(Error::PatternMismatch(
            "corollary 2 needs two matched pairs of variances".into(),
        ));
    }
    if nearly_equal(va[lo1], va[hi0]) {
        return Err(Error::PatternMismatch(
            "corollary 2 needs strictly distinct pair values".into(),
        ));
    }
    let u = 0.5 * (va[hi0] + va[hi1]);
    let vbar = 0.5 * (va[lo0] + va[lo1]);
    let d = (u * u - u * vbar + vbar * vbar).sqrt();
    let p_u = u / (2.0 * (2.0 * u - vbar + d));
    let p_v = vbar / (2.0 * (d + 2.0 * vbar - u));
    let mut p = [0.0; 4];
    p[hi0] = p_u;
    p[hi1] = p_u;
    p[lo0] = p_v;
    p[lo1] = p_v;
    // rationalized form of (2u−v−d)(u−2v+d)(u+v+d)/(108(u−v)²)
    let l_max = u * vbar * (u + vbar + d) / (12.0 * (2.0 * u - vbar + d) * (d + 2.0 * vbar - u));
    let mut res = result_from(v, p, Branch::Corollary2, 0);
    res.l_max = l_max;
    Ok(res)
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(x: &[f64; 4]) -> [f64; 4] {
    let mut sorted = *x;
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    // largest k with sorted[k] > (sum of the top k+1 entries − 1)/(k+1)
    let mut cum = 0.0;
    let mut rho = 0;
    for (k, &s) in sorted.iter().enumerate() {
        cum += s;
        if s > (cum - 1.0) / (k + 1) as f64 {
            rho = k;
        }
    }
    let cum_rho: f64 = sorted[..=rho].iter().sum();
    let theta = (cum_rho - 1.0) / (rho + 1) as f64;
    x.map(|xi| (xi - theta).max(0.0))
}

/// One Newton step on the interior stationarity system g₁ = g₂ = g₃ = g₄
/// with Σp = 1, in the reduced coordinates (p₁,p₂,p₃). The raw proposal may
/// leave the simplex; [`safeguard_step`] handles that. Returns None when the
/// 3×3 system is singular.
#[allow(clippy::needless_range_loop)]
fn newton_step(v: &[f64; 4], p: &[f64; 4]) -> Option<[f64; 4]> {
    let g = gradient(v, p);
    // H[i][j] = ∂²L/∂pᵢ∂pⱼ = v_m·p_l + v_l·p_m with {m,l} = complement of {i,j}
    let mut h = [[0.0f64; 4]; 4];
    for i in 0..4 {
        for j in (i + 1)..4 {
            let mut others = (0..4).filter(|&k| k != i && k != j);
            let m = others.next().unwrap();
            let l = others.next().unwrap();
            let hij = v[m] * p[l] + v[l] * p[m];
            h[i][j] = hij;
            h[j][i] = hij;
        }
    }
    // F_i = g_i − g_4, J_ij = H[i][j] − H[i][3] − H[3][j]  (H[3][3] = 0)
    let mut a = [[0.0f64; 3]; 3];
    let mut f = [0.0f64; 3];
    for i in 0..3 {
        f[i] = g[i] - g[3];
        for j in 0..3 {
            a[i][j] = h[i][j] - h[i][3] - h[3][j];
        }
    }
    let delta = solve3(a, [-f[0], -f[1], -f[2]])?;
    let mut q = [p[0] + delta[0], p[1] + delta[1], p[2] + delta[2], 0.0];
    q[3] = 1.0 - q[0] - q[1] - q[2];
    if q.iter().any(|&x| !x.is_finite()) {
        return None;
    }
    Some(q)
}

/// Keeps a Newton proposal strictly inside the simplex: components the step
/// would push to zero or below shrink geometrically instead (a tiny optimal
/// coordinate near the saturation boundary is approached on a log scale),
/// then the point is renormalized.
fn safeguard_step(p: &[f64; 4], proposal: &[f64; 4]) -> [f64; 4] {
    let mut q = *proposal;
    for i in 0..4 {
        if q[i] <= 0.0 {
            q[i] = p[i] * 0.1;
        }
    }
    let sum: f64 = q.iter().sum();
    q.map(|x| x / sum)
}

/// 3×3 linear solve by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot =
            (col..3).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..3 {
            let factor = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = b[row];
        for k in (row + 1)..3 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

/// General maximizer for non-saturated v: multiplicative-gradient ascent
/// pᵢ ← pᵢ·gᵢ/(Σⱼpⱼgⱼ) with a projected-gradient backtracking fallback,
/// plus a Newton polish once the iterate is near stationarity.
pub fn solve_general(v: &VarianceVector, cfg: &SolverConfig) -> Result<SolveResult> {
    let (sat, idx) = is_saturated(v, cfg.saturation_tol);
    if sat {
        return Err(Error::InconsistentInput(
            "general solver requires a non-saturated variance vector".into(),
        ));
    }
    // Near the saturation boundary the optimum has one tiny component;
    // start beside the three-point design instead of crawling from uniform.
    let near_boundary = 2.0 * v.max_with_index().0 / v.sum() > 1.0 - 1e-6;
    let start = if near_boundary {
        let eps = 1e-3;
        let mut p = [(1.0 - eps) / 3.0; 4];
        p[idx] = eps;
        p
    } else {
        [0.25; 4]
    };
    solve_general_from(v, cfg, start)
}

/// [`solve_general`] from an explicit interior starting point; the criterion
/// is strictly concave after the cube root, so every interior start reaches
/// the same optimum.
pub fn solve_general_from(
    v: &VarianceVector,
    cfg: &SolverConfig,
    start: [f64; 4],
) -> Result<SolveResult> {
    cfg.validate()?;
    let va = v.as_array();
    if is_saturated(v, cfg.saturation_tol).0 {
        return Err(Error::InconsistentInput(
            "general solver requires a non-saturated variance vector".into(),
        ));
    }
    let sum: f64 = start.iter().sum();
    if start.iter().any(|&x| !x.is_finite() || x <= 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDesign(
            "starting point must be strictly interior to the simplex".into(),
        ));
    }
    let mut p = start.map(|x| x / sum);

    const TARGET: f64 = 1e-13;
    let mut l_prev = objective_l_raw(&va, &p);
    let mut residual = kkt_residual(&va, &p);
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        iterations += 1;
        if residual <= TARGET {
            break;
        }

        if residual < 0.1 {
            if let Some(raw) = newton_step(&va, &p) {
                let q = safeguard_step(&p, &raw);
                let r_new = kkt_residual(&va, &q);
                if r_new < residual {
                    p = q;
                    residual = r_new;
                    l_prev = objective_l_raw(&va, &p);
                    continue;
                }
            }
        }

        let g = gradient(&va, &p);
        let lp3: f64 = (0..4).map(|i| p[i] * g[i]).sum();
        let mut q = std::array::from_fn(|i| p[i] * g[i] / lp3);
        let mut l_new = objective_l_raw(&va, &q);

        if l_new < l_prev {
            // projected gradient with backtracking
            let gnorm = g.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1e-300);
            let mut step = 1.0 / gnorm;
            let mut accepted = false;
            for _ in 0..60 {
                let trial = project_simplex(&std::array::from_fn(|i| p[i] + step * g[i]));
                let l_trial = objective_l_raw(&va, &trial);
                if l_trial >= l_prev {
                    q = trial;
                    l_new = l_trial;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                // no ascent direction left at floating-point resolution
                break;
            }
        }

        let stalled = (l_new - l_prev).abs() <= cfg.convergence_tol * l_prev.abs();
        p = q;
        l_prev = l_new;
        residual = kkt_residual(&va, &p);
        if stalled && residual <= 1e-8 {
            break;
        }
    }

    if residual > 1e-8 {
        return Err(Error::NoConvergence {
            iterations,
            residual,
        });
    }

    // exact simplex membership for the returned value
    let sum: f64 = p.iter().sum();
    let p = p.map(|x| x / sum);
    let mut res = result_from(v, p, Branch::General, iterations);
    res.kkt_residual = residual;
    Ok(res)
}

/// Locally D-optimal design for `v`: saturated three-point branch,
/// closed-form patterns, or the general maximizer.
pub fn solve(v: &VarianceVector, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    if is_saturated(v, cfg.saturation_tol).0 {
        return solve_saturated(v);
    }
    if let Ok(res) = solve_corollary1(v) {
        return Ok(res);
    }
    if let Ok(res) = solve_corollary2(v) {
        return Ok(res);
    }
    solve_general(v, cfg)
}

/// Exhaustive lattice maximizer of L over {(i,j,k,n−i−j−k)/n}: the
/// verification oracle for the analytic branches.
pub fn grid_oracle(v: &VarianceVector, resolution: usize) -> DesignMeasure {
    assert!(resolution >= 1, "grid oracle needs a positive resolution");
    let va = v.as_array();
    let n = resolution;
    let inv = 1.0 / n as f64;
    let mut best = [0.25; 4];
    let mut best_l = f64::NEG_INFINITY;
    for i in 0..=n {
        for j in 0..=(n - i) {
            for k in 0..=(n - i - j) {
                let p = [
                    i as f64 * inv,
                    j as f64 * inv,
                    k as f64 * inv,
                    (n - i - j - k) as f64 * inv,
                ];
                let l = objective_l_raw(&va, &p);
                if l > best_l {
                    best_l = l;
                    best = p;
                }
            }
        }
    }
    DesignMeasure::new(best).expect("lattice points lie on the simplex")
}

/// Largest-remainder rounding of n·p into integer unit counts.
/// Ties go to the lowest index.
pub fn allocate(p: &DesignMeasure, n: u64) -> [u64; 4] {
    let raw: [f64; 4] = std::array::from_fn(|i| p[i] * n as f64);
    let mut counts = raw.map(|x| x.floor() as u64);
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take((n - assigned) as usize) {
        counts[i] += 1;
    }
    counts
}
