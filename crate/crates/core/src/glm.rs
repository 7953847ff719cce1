//! Maximum-likelihood fitting of the 2×2 main-effects binary GLM by
//! iteratively reweighted least squares, and the full design analysis
//! (implied weights, optimal allocation, efficiency of the uniform design).

use std::path::Path;

use crate::design::{
    det_criterion, variance_from_weight, DesignMeasure, VarianceVector, WeightVector,
};
use crate::error::{Error, Result};
use crate::link::{weights_from_beta, BetaVector, LinkFunction, DESIGN_POINTS};
use crate::solver::{solve, SolverConfig};

/// Cell counts for one factor-level combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellCount {
    pub successes: u64,
    pub trials: u64,
}

/// 2×2 cell data in [`DESIGN_POINTS`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinomialTable {
    cells: [CellCount; 4],
}

impl BinomialTable {
    pub fn new(cells: [CellCount; 4]) -> Result<Self> {
        for (i, c) in cells.iter().enumerate() {
            if c.trials == 0 {
                return Err(Error::Parse(format!("cell {i} has zero trials")));
            }
            if c.successes > c.trials {
                return Err(Error::Parse(format!(
                    "cell {i} has {} successes out of {} trials",
                    c.successes, c.trials
                )));
            }
        }
        Ok(BinomialTable { cells })
    }

    /// Builds a table from rows carrying explicit (x₁,x₂) coding; the rows
    /// may come in any order but must cover all four combinations exactly once.
    pub fn from_rows(rows: &[(f64, f64, u64, u64)]) -> Result<Self> {
        if rows.len() != 4 {
            return Err(Error::Parse(format!(
                "expected 4 data rows, got {}",
                rows.len()
            )));
        }
        let mut cells = [None; 4];
        for &(x1, x2, successes, trials) in rows {
            let slot = DESIGN_POINTS
                .iter()
                .position(|&(a, b)| a == x1 && b == x2)
                .ok_or_else(|| {
                    Error::Parse(format!(
                        "({x1}, {x2}) is not a valid design point; coordinates must be -1 or +1"
                    ))
                })?;
            if cells[slot].is_some() {
                return Err(Error::Parse(format!("duplicate design point ({x1}, {x2})")));
            }
            cells[slot] = Some(CellCount { successes, trials });
        }
        BinomialTable::new(cells.map(|c| c.expect("all four points present")))
    }

    /// Parses the `x1,x2,successes,trials` CSV schema (header required).
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty data file".into()))?;
        let normalized: String = header.chars().filter(|c| !c.is_whitespace()).collect();
        if !normalized.eq_ignore_ascii_case("x1,x2,successes,trials") {
            return Err(Error::Parse(format!(
                "expected header 'x1,x2,successes,trials', got '{header}'"
            )));
        }
        for line in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(Error::Parse(format!("bad data row '{line}'")));
            }
            let x1: f64 = fields[0]
                .parse()
                .map_err(|_| Error::Parse(format!("bad x1 '{}'", fields[0])))?;
            let x2: f64 = fields[1]
                .parse()
                .map_err(|_| Error::Parse(format!("bad x2 '{}'", fields[1])))?;
            let successes: u64 = fields[2]
                .parse()
                .map_err(|_| Error::Parse(format!("bad successes '{}'", fields[2])))?;
            let trials: u64 = fields[3]
                .parse()
                .map_err(|_| Error::Parse(format!("bad trials '{}'", fields[3])))?;
            rows.push((x1, x2, successes, trials));
        }
        BinomialTable::from_rows(&rows)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        BinomialTable::from_csv_str(&text)
    }

    pub fn cells(&self) -> [CellCount; 4] {
        self.cells
    }

    pub fn proportions(&self) -> [f64; 4] {
        self.cells.map(|c| c.successes as f64 / c.trials as f64)
    }

    pub fn trials(&self) -> [f64; 4] {
        self.cells.map(|c| c.trials as f64)
    }
}

/// Outcome of the IRLS fit alone.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit {
    pub beta: BetaVector,
    pub iterations: usize,
    pub converged: bool,
    /// Max-norm of the score (log-likelihood gradient) at the estimate.
    pub score_norm: f64,
    /// Cells whose observed proportion is exactly 0 or 1 (separation risk;
    /// the fit proceeds but convergence is not guaranteed).
    pub boundary_cells: Vec<usize>,
}

/// Full design analysis built on a fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub beta: BetaVector,
    pub w_hat: WeightVector,
    pub p_opt: DesignMeasure,
    pub det_opt: f64,
    pub det_uniform: f64,
    /// (det_uniform/det_opt)^{1/3} ∈ (0,1].
    pub uniform_efficiency: f64,
    pub iterations: usize,
    pub converged: bool,
    pub boundary_cells: Vec<usize>,
}

const MAX_IRLS_ITER: usize = 50;
const SCORE_TOL: f64 = 1e-9;

/// Score vector U(β) = Σᵢ nᵢ(ȳᵢ − μᵢ)·(dμ/dη)/(μ(1−μ))·xᵢ.
fn score(link: LinkFunction, beta: &BetaVector, props: &[f64; 4], trials: &[f64; 4]) -> [f64; 3] {
    let mut u = [0.0; 3];
    for (i, (x1, x2)) in DESIGN_POINTS.iter().enumerate() {
        let eta = beta.eta(*x1, *x2);
        let mu = link.mean(eta);
        let slope = link.mean_slope(eta);
        let factor = trials[i] * (props[i] - mu) * slope / (mu * (1.0 - mu));
        u[0] += factor;
        u[1] += factor * x1;
        u[2] += factor * x2;
    }
    u
}

fn log_likelihood(
    link: LinkFunction,
    beta: &BetaVector,
    props: &[f64; 4],
    trials: &[f64; 4],
) -> f64 {
    let mut ll = 0.0;
    for (i, (x1, x2)) in DESIGN_POINTS.iter().enumerate() {
        let mu = link.mean(beta.eta(*x1, *x2));
        ll += trials[i] * (props[i] * mu.ln() + (1.0 - props[i]) * (1.0 - mu).ln());
    }
    ll
}

fn max_abs(u: &[f64; 3]) -> f64 {
    u.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

/// IRLS on real-valued cell proportions. Exposed so that consistency tests
/// can refit fitted means directly.
pub fn fit_proportions(props: &[f64; 4], trials: &[f64; 4], link: LinkFunction) -> Result<GlmFit> {
    for (i, (&y, &n)) in props.iter().zip(trials.iter()).enumerate() {
        if !(0.0..=1.0).contains(&y) || !n.is_finite() || n <= 0.0 {
            return Err(Error::Parse(format!(
                "cell {i}: proportion {y} must lie in [0,1] with positive trials {n}"
            )));
        }
    }
    let boundary_cells: Vec<usize> = (0..4)
        .filter(|&i| props[i] == 0.0 || props[i] == 1.0)
        .collect();

    // start at the pooled mean on the link scale, no factor effects
    let total: f64 = trials.iter().sum();
    let pooled = (0..4).map(|i| props[i] * trials[i]).sum::<f64>() / total;
    let mut beta = BetaVector::new(link.linear_predictor(pooled), 0.0, 0.0)?;
    let mut ll = log_likelihood(link, &beta, props, trials);
    let mut score_norm = max_abs(&score(link, &beta, props, trials));
    let mut iterations = 0;

    while score_norm > SCORE_TOL && iterations < MAX_IRLS_ITER {
        iterations += 1;

        // weighted least squares on the working response
        let mut a = [[0.0f64; 3]; 3];
        let mut rhs = [0.0f64; 3];
        for (i, (x1, x2)) in DESIGN_POINTS.iter().enumerate() {
            let x = [1.0, *x1, *x2];
            let eta = beta.eta(*x1, *x2);
            let mu = link.mean(eta);
            let slope = link.mean_slope(eta).max(1e-300);
            let weight = trials[i] * slope * slope / (mu * (1.0 - mu));
            let z = eta + (props[i] - mu) / slope;
            for r in 0..3 {
                rhs[r] += weight * z * x[r];
                for c in 0..3 {
                    a[r][c] += weight * x[r] * x[c];
                }
            }
        }
        let solved = solve3(a, rhs).ok_or(Error::NoConvergence {
            iterations,
            residual: score_norm,
        })?;
        let mut candidate = BetaVector::new(solved[0], solved[1], solved[2])?;

        // step-halving toward the current iterate if the likelihood drops;
        // the margin keeps rounding noise near the maximum from triggering it
        let ll_noise = 1e-10 * (1.0 + ll.abs());
        let mut ll_new = log_likelihood(link, &candidate, props, trials);
        let mut halvings = 0;
        while ll_new < ll - ll_noise && halvings < 30 {
            candidate = BetaVector::new(
                0.5 * (candidate.b0 + beta.b0),
                0.5 * (candidate.b1 + beta.b1),
                0.5 * (candidate.b2 + beta.b2),
            )?;
            ll_new = log_likelihood(link, &candidate, props, trials);
            halvings += 1;
        }

        let moved = (candidate.b0 - beta.b0).abs()
            + (candidate.b1 - beta.b1).abs()
            + (candidate.b2 - beta.b2).abs();
        beta = candidate;
        ll = ll_new;
        score_norm = max_abs(&score(link, &beta, props, trials));
        if moved < 1e-15 {
            break;
        }
    }

    let converged = score_norm <= 1e-8;
    if !converged && boundary_cells.is_empty() {
        return Err(Error::NoConvergence {
            iterations,
            residual: score_norm,
        });
    }
    Ok(GlmFit {
        beta,
        iterations,
        converged,
        score_norm,
        boundary_cells,
    })
}

/// 3×3 normal-equations solve, partial pivoting.
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
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
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

/// Maximum-likelihood fit of the main-effects model to the cell counts.
pub fn fit_glm(table: &BinomialTable, link: LinkFunction) -> Result<GlmFit> {
    fit_proportions(&table.proportions(), &table.trials(), link)
}

/// Fit plus the implied optimal design and uniform-design efficiency.
pub fn analyze(table: &BinomialTable, link: LinkFunction) -> Result<FitResult> {
    let fit = fit_glm(table, link)?;
    let w_hat = weights_from_beta(link, &fit.beta);
    let v: VarianceVector = variance_from_weight(&w_hat)?;
    let sol = solve(&v, &SolverConfig::default())?;
    let det_opt = det_criterion(&w_hat, &sol.p)?;
    let det_uniform = det_criterion(&w_hat, &DesignMeasure::uniform())?;
    Ok(FitResult {
        beta: fit.beta,
        w_hat,
        p_opt: sol.p,
        det_opt,
        det_uniform,
        uniform_efficiency: (det_uniform / det_opt).cbrt(),
        iterations: fit.iterations,
        converged: fit.converged,
        boundary_cells: fit.boundary_cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Survival of plum root-stock cuttings, 240 per cell:
    /// x1 = +1 short cutting, x2 = +1 planted at once.
    pub(crate) fn plum() -> BinomialTable {
        BinomialTable::from_rows(&[
            (1.0, 1.0, 107, 240),
            (1.0, -1.0, 31, 240),
            (-1.0, 1.0, 156, 240),
            (-1.0, -1.0, 84, 240),
        ])
        .unwrap()
    }

    #[test]
    fn plum_logit_beta() {
        let fit = fit_glm(&plum(), LinkFunction::Logit).unwrap();
        assert!(fit.converged);
        assert!(fit.score_norm <= 1e-8);
        assert!(
            (fit.beta.b0 - (-0.5088)).abs() < 5e-4,
            "b0 = {}",
            fit.beta.b0
        );
        assert!(
            (fit.beta.b1 - (-0.5088)).abs() < 5e-4,
            "b1 = {}",
            fit.beta.b1
        );
        assert!((fit.beta.b2 - 0.7138).abs() < 5e-4, "b2 = {}", fit.beta.b2);
    }

    #[test]
    fn plum_logit_observed_information_positive_definite() {
        // leading principal minors of X'WX at the estimate
        let fit = fit_glm(&plum(), LinkFunction::Logit).unwrap();
        let w = weights_from_beta(LinkFunction::Logit, &fit.beta);
        let mut m = [[0.0f64; 3]; 3];
        for (i, (x1, x2)) in DESIGN_POINTS.iter().enumerate() {
            let x = [1.0, *x1, *x2];
            for r in 0..3 {
                for c in 0..3 {
                    m[r][c] += 240.0 * w[i] * x[r] * x[c];
                }
            }
        }
        let m1 = m[0][0];
        let m2 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let m3 = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        assert!(m1 > 0.0 && m2 > 0.0 && m3 > 0.0);
    }

    #[test]
    fn plum_logit_analysis() {
        let res = analyze(&plum(), LinkFunction::Logit).unwrap();
        let w_expected = [0.244, 0.128, 0.221, 0.221];
        for i in 0..4 {
            assert!((res.w_hat[i] - w_expected[i]).abs() < 5e-4);
        }
        let p_expected = [0.2818, 0.1686, 0.2748, 0.2748];
        for i in 0..4 {
            assert!((res.p_opt[i] - p_expected[i]).abs() < 1e-3);
        }
        assert!((res.det_opt - 8.197e-3).abs() < 2e-5, "{}", res.det_opt);
        assert!(
            (res.det_uniform - 7.975e-3).abs() < 2e-5,
            "{}",
            res.det_uniform
        );
        assert!((res.uniform_efficiency - 0.991).abs() < 2e-3);
    }

    #[test]
    fn plum_probit_fit() {
        // oracle: probit MLE cross-checked externally,
        // beta = (-0.3098704, -0.3098704, 0.4356716)
        let res = analyze(&plum(), LinkFunction::Probit).unwrap();
        assert!(
            (res.beta.b0 - (-0.309_870_4)).abs() < 1e-6,
            "{}",
            res.beta.b0
        );
        assert!((res.beta.b1 - (-0.309_870_4)).abs() < 1e-6);
        assert!((res.beta.b2 - 0.435_671_6).abs() < 1e-6);
        // honest efficiency of uniform vs the probit-optimal design
        assert!(
            (res.uniform_efficiency - 0.997_038_4).abs() < 1e-6,
            "{}",
            res.uniform_efficiency
        );
    }

    #[test]
    fn symmetric_table_fits_zero() {
        let table = BinomialTable::new(
            [CellCount {
                successes: 120,
                trials: 240,
            }; 4],
        )
        .unwrap();
        for link in [LinkFunction::Logit, LinkFunction::Probit] {
            let res = analyze(&table, link).unwrap();
            assert!(res.beta.b0.abs() < 1e-10);
            assert!(res.beta.b1.abs() < 1e-10);
            assert!(res.beta.b2.abs() < 1e-10);
            for i in 0..4 {
                assert!((res.p_opt[i] - 0.25).abs() < 1e-9);
            }
            assert!((res.uniform_efficiency - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn refit_fitted_proportions_is_fixed_point() {
        let fit = fit_glm(&plum(), LinkFunction::Logit).unwrap();
        let mu: [f64; 4] =
            DESIGN_POINTS.map(|(x1, x2)| LinkFunction::Logit.mean(fit.beta.eta(x1, x2)));
        let refit = fit_proportions(&mu, &[240.0; 4], LinkFunction::Logit).unwrap();
        assert!((refit.beta.b0 - fit.beta.b0).abs() < 1e-10);
        assert!((refit.beta.b1 - fit.beta.b1).abs() < 1e-10);
        assert!((refit.beta.b2 - fit.beta.b2).abs() < 1e-10);
    }

    #[test]
    fn factor_swap_swaps_main_effects() {
        // permuting cells 2 and 3 exchanges the two factors
        let base = plum();
        let cells = base.cells();
        let swapped = BinomialTable::new([cells[0], cells[2], cells[1], cells[3]]).unwrap();
        let a = fit_glm(&base, LinkFunction::Logit).unwrap();
        let b = fit_glm(&swapped, LinkFunction::Logit).unwrap();
        assert!((a.beta.b0 - b.beta.b0).abs() < 1e-10);
        assert!((a.beta.b1 - b.beta.b2).abs() < 1e-10);
        assert!((a.beta.b2 - b.beta.b1).abs() < 1e-10);
    }

    #[test]
    fn boundary_cell_is_flagged() {
        let table = BinomialTable::from_rows(&[
            (1.0, 1.0, 240, 240),
            (1.0, -1.0, 31, 240),
            (-1.0, 1.0, 156, 240),
            (-1.0, -1.0, 84, 240),
        ])
        .unwrap();
        let fit = fit_glm(&table, LinkFunction::Logit).unwrap();
        assert_eq!(fit.boundary_cells, vec![0]);
    }

    #[test]
    fn csv_parsing() {
        let text = "x1,x2,successes,trials\n1,1,107,240\n1,-1,31,240\n-1,1,156,240\n-1,-1,84,240\n";
        let table = BinomialTable::from_csv_str(text).unwrap();
        assert_eq!(table, plum());

        assert!(BinomialTable::from_csv_str("x1,x2,successes,trials\n1,1,10,20\n").is_err());
        assert!(BinomialTable::from_csv_str("nope\n1,1,10,20\n").is_err());
        assert!(BinomialTable::from_csv_str(
            "x1,x2,successes,trials\n1,1,10,20\n1,1,5,20\n-1,1,5,20\n-1,-1,5,20\n"
        )
        .is_err());
        assert!(BinomialTable::from_csv_str(
            "x1,x2,successes,trials\n2,1,10,20\n1,-1,5,20\n-1,1,5,20\n-1,-1,5,20\n"
        )
        .is_err());
    }

    #[test]
    fn table_validation() {
        assert!(BinomialTable::new(
            [CellCount {
                successes: 5,
                trials: 0
            }; 4]
        )
        .is_err());
        assert!(BinomialTable::new(
            [CellCount {
                successes: 25,
                trials: 20
            }; 4]
        )
        .is_err());
    }
}
