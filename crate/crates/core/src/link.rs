//! Binary-response link functions and their GLM weights.
//!
//! For a binary response the per-point information weight is
//! `w = (dμ/dη)² / (μ(1-μ))`, where μ is the mean response and η the linear
//! predictor. The weight caps are 0.25 (logit), 2/π (probit) and ≈0.648 for
//! the two log-log links.

use std::fmt;
use std::str::FromStr;

use statrs::function::erf;

use crate::design::WeightVector;
use crate::error::{Error, Result};

/// The four factor-level combinations of the 2×2 experiment, in the fixed
/// order used by every vector in this crate: (+1,+1), (+1,−1), (−1,+1), (−1,−1).
pub const DESIGN_POINTS: [(f64, f64); 4] = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];

/// Mean responses are clamped into the open interval (0,1) before any
/// division so that weights degrade to 0 instead of 0/0 at extreme η.
const MU_EPS: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkFunction {
    Logit,
    Probit,
    /// μ = exp(−exp(−η)); mirror image of the complementary log-log link.
    LogLog,
    /// μ = 1 − exp(−exp(η)).
    CLogLog,
}

impl LinkFunction {
    pub const ALL: [LinkFunction; 4] = [
        LinkFunction::Logit,
        LinkFunction::Probit,
        LinkFunction::LogLog,
        LinkFunction::CLogLog,
    ];

    /// Mean response μ = inverse-link(η). Saturates toward 0/1 but never
    /// returns exactly 0 or 1 for |η| ≤ 30.
    pub fn mean(self, eta: f64) -> f64 {
        let mu = match self {
            LinkFunction::Logit => 1.0 / (1.0 + (-eta).exp()),
            LinkFunction::Probit => normal_cdf(eta),
            // -expm1(-t) = 1 - exp(-t) without cancellation for small t
            LinkFunction::CLogLog => -f64::exp_m1(-eta.exp()),
            LinkFunction::LogLog => (-(-eta).exp()).exp(),
        };
        mu.clamp(MU_EPS, 1.0 - MU_EPS)
    }

    /// Slope of the mean response, dμ/dη.
    pub fn mean_slope(self, eta: f64) -> f64 {
        match self {
            LinkFunction::Logit => {
                // e^η/(1+e^η)² written symmetrically
                1.0 / (2.0 + eta.exp() + (-eta).exp())
            }
            LinkFunction::Probit => normal_pdf(eta),
            LinkFunction::CLogLog => (eta - eta.exp()).exp(),
            LinkFunction::LogLog => (-eta - (-eta).exp()).exp(),
        }
    }

    /// GLM weight w = (dμ/dη)²/(μ(1−μ)).
    pub fn weight(self, eta: f64) -> f64 {
        match self {
            // simplifies to μ(1-μ) = 1/(2 + (e^η + e^{-η})); summing the
            // exponentials first makes the value bit-exact under η → −η
            LinkFunction::Logit => {
                let s = eta.exp() + (-eta).exp();
                1.0 / (2.0 + s)
            }
            LinkFunction::Probit => {
                // Φ(η)(1−Φ(η)) evaluated as Φ(η)Φ(−η) keeps the tails accurate
                // and the product commutative under η → −η
                let num = normal_pdf(eta);
                let denom = (normal_cdf(eta) * normal_cdf(-eta)).max(MU_EPS * MU_EPS);
                num * num / denom
            }
            // with t = e^η: slope²/(μ(1-μ)) = t²e^{-t}/(1-e^{-t}); the expm1
            // form avoids the cancellation in 1-μ as μ → 1
            LinkFunction::CLogLog => loglog_weight_from_t(eta.exp()),
            LinkFunction::LogLog => loglog_weight_from_t((-eta).exp()),
        }
    }

    /// Largest attainable weight for this link (the log-log value is the
    /// 3-decimal constant used throughout as a check tolerance).
    pub fn weight_cap(self) -> f64 {
        match self {
            LinkFunction::Logit => 0.25,
            LinkFunction::Probit => std::f64::consts::FRAC_2_PI,
            LinkFunction::LogLog | LinkFunction::CLogLog => 0.648,
        }
    }

    /// Linear predictor η with mean(η) = μ (the link function itself).
    pub fn linear_predictor(self, mu: f64) -> f64 {
        let mu = mu.clamp(MU_EPS, 1.0 - MU_EPS);
        match self {
            LinkFunction::Logit => (mu / (1.0 - mu)).ln(),
            LinkFunction::Probit => normal_quantile(mu),
            LinkFunction::CLogLog => (-f64::ln_1p(-mu)).ln(),
            LinkFunction::LogLog => -(-mu.ln()).ln(),
        }
    }
}

impl fmt::Display for LinkFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            LinkFunction::Logit => "logit",
            LinkFunction::Probit => "probit",
            LinkFunction::LogLog => "loglog",
            LinkFunction::CLogLog => "cloglog",
        };
        f.write_str(name)
    }
}

impl FromStr for LinkFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logit" => Ok(LinkFunction::Logit),
            "probit" => Ok(LinkFunction::Probit),
            "loglog" | "log-log" => Ok(LinkFunction::LogLog),
            "cloglog" | "complementary-log-log" => Ok(LinkFunction::CLogLog),
            other => Err(Error::Parse(format!(
                "unknown link '{other}' (expected logit, probit, loglog or cloglog)"
            ))),
        }
    }
}

/// Regression parameters of the main-effects model η = β₀ + β₁x₁ + β₂x₂.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaVector {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
}

impl BetaVector {
    pub fn new(b0: f64, b1: f64, b2: f64) -> Result<Self> {
        if !(b0.is_finite() && b1.is_finite() && b2.is_finite()) {
            return Err(Error::Parse(format!(
                "beta components must be finite, got ({b0}, {b1}, {b2})"
            )));
        }
        Ok(BetaVector { b0, b1, b2 })
    }

    /// Linear predictor at a design point.
    pub fn eta(&self, x1: f64, x2: f64) -> f64 {
        self.b0 + self.b1 * x1 + self.b2 * x2
    }
}

/// The four GLM weights at the design points, in [`DESIGN_POINTS`] order.
pub fn weights_from_beta(link: LinkFunction, beta: &BetaVector) -> WeightVector {
    let w = DESIGN_POINTS.map(|(x1, x2)| link.weight(beta.eta(x1, x2)));
    WeightVector::new(w).expect("weights from finite beta are finite and nonnegative")
}

/// One row of weight-curve plot data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub eta: f64,
    pub mu: f64,
    pub w: f64,
}

/// Per-point evaluation of (η, μ, w) over a grid, ready for CSV emission.
pub fn weight_curve(link: LinkFunction, eta_grid: &[f64]) -> Result<Vec<CurvePoint>> {
    if eta_grid.is_empty() {
        return Err(Error::InvalidConfig("weight curve grid is empty".into()));
    }
    if let Some(bad) = eta_grid.iter().find(|e| !e.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "weight curve grid contains non-finite value {bad}"
        )));
    }
    Ok(eta_grid
        .iter()
        .map(|&eta| CurvePoint {
            eta,
            mu: link.mean(eta),
            w: link.weight(eta),
        })
        .collect())
}

/// Shared log-log weight kernel: w = t²·e^{−t}/(1−e^{−t}) with t = e^η for
/// the complementary link and t = e^{−η} for its mirror.
fn loglog_weight_from_t(t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let em = (-t).exp();
    let denom = -f64::exp_m1(-t);
    t * t * em / denom
}

/// Standard normal density.
fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF via erfc, accurate far into the tails.
fn normal_cdf(x: f64) -> f64 {
    0.5 * erf::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal quantile (used only to seat the IRLS initializer).
fn normal_quantile(p: f64) -> f64 {
    // erfc_inv gives ~1e-9 accuracy; polish with one Newton step on the CDF.
    let mut x = -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p);
    let pdf = normal_pdf(x);
    if pdf > 0.0 {
        x += (p - normal_cdf(x)) / pdf;
    }
    x
}
