//! Core value types and the D-criterion of the 2×2 main-effects model.
//!
//! The criterion factors as det(X'WX) = 16·w₁w₂w₃w₄·L(p) with
//! L(p) = v₄p₁p₂p₃ + v₃p₁p₂p₄ + v₂p₁p₃p₄ + v₁p₂p₃p₄ and vᵢ = 1/wᵢ,
//! so maximizing the determinant over the simplex reduces to maximizing L.

use std::fmt;
use std::ops::Index;

use crate::error::{Error, Result};
use crate::link::DESIGN_POINTS;

/// How far a design measure's components may miss summing to 1.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// GLM weights (w₁..w₄) at the four design points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightVector([f64; 4]);

impl WeightVector {
    pub fn new(w: [f64; 4]) -> Result<Self> {
        for (i, &wi) in w.iter().enumerate() {
            if !wi.is_finite() || wi < 0.0 {
                return Err(Error::InvalidVariance(format!(
                    "weight w[{i}] = {wi} must be finite and nonnegative"
                )));
            }
        }
        Ok(WeightVector(w))
    }

    pub fn constant(c: f64) -> Result<Self> {
        WeightVector::new([c; 4])
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }
}

impl Index<usize> for WeightVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Reciprocal weights v = 1/w; the quantity the optimal design depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceVector([f64; 4]);

impl VarianceVector {
    pub fn new(v: [f64; 4]) -> Result<Self> {
        for (i, &vi) in v.iter().enumerate() {
            if !vi.is_finite() || vi <= 0.0 {
                return Err(Error::InvalidVariance(format!(
                    "variance v[{i}] = {vi} must be finite and strictly positive"
                )));
            }
        }
        Ok(VarianceVector(v))
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// (max value, smallest index attaining it).
    pub fn max_with_index(&self) -> (f64, usize) {
        let mut idx = 0;
        for i in 1..4 {
            if self.0[i] > self.0[idx] {
                idx = i;
            }
        }
        (self.0[idx], idx)
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }
}

impl Index<usize> for VarianceVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// vᵢ = 1/wᵢ; rejects zero weights naming the offending index.
pub fn variance_from_weight(w: &WeightVector) -> Result<VarianceVector> {
    let mut v = [0.0; 4];
    for i in 0..4 {
        if w[i] <= 0.0 {
            return Err(Error::DegenerateWeight {
                index: i,
                value: w[i],
            });
        }
        v[i] = 1.0 / w[i];
    }
    VarianceVector::new(v)
}

/// Allocation proportions p = (p₁..p₄) on the 3-simplex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignMeasure([f64; 4]);

impl DesignMeasure {
    pub fn new(p: [f64; 4]) -> Result<Self> {
        for (i, &pi) in p.iter().enumerate() {
            if !pi.is_finite() || pi < 0.0 {
                return Err(Error::InvalidDesign(format!(
                    "proportion p[{i}] = {pi} must be finite and nonnegative"
                )));
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidDesign(format!(
                "proportions sum to {sum}, expected 1 within {SIMPLEX_TOL:e}"
            )));
        }
        Ok(DesignMeasure(p))
    }

    pub fn uniform() -> Self {
        DesignMeasure([0.25; 4])
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }
}

impl Index<usize> for DesignMeasure {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Display for DesignMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {})",
            self.0[0], self.0[1], self.0[2], self.0[3]
        )
    }
}

/// L(p) on raw components; the solver iterates on unvalidated arrays.
pub(crate) fn objective_l_raw(v: &[f64; 4], p: &[f64; 4]) -> f64 {
    v[3] * p[0] * p[1] * p[2]
        + v[2] * p[0] * p[1] * p[3]
        + v[1] * p[0] * p[2] * p[3]
        + v[0] * p[1] * p[2] * p[3]
}

/// The reduced objective L(p) = v₄p₁p₂p₃ + v₃p₁p₂p₄ + v₂p₁p₃p₄ + v₁p₂p₃p₄.
pub fn objective_l(v: &VarianceVector, p: &DesignMeasure) -> f64 {
    objective_l_raw(&v.0, &p.0)
}

/// det(w,p) = 16·w₁w₂w₃w₄·L(p), evaluated as 16·e₃(w₁p₁,…,w₄p₄) so no
/// division by w is needed. Equals det(X'WX) with W = diag(wᵢpᵢ).
pub fn det_criterion(w: &WeightVector, p: &DesignMeasure) -> Result<f64> {
    for i in 0..4 {
        if w[i] <= 0.0 {
            return Err(Error::DegenerateWeight {
                index: i,
                value: w[i],
            });
        }
    }
    let m: [f64; 4] = std::array::from_fn(|i| w[i] * p[i]);
    Ok(16.0 * (m[0] * m[1] * m[2] + m[0] * m[1] * m[3] + m[0] * m[2] * m[3] + m[1] * m[2] * m[3]))
}

/// Symmetric 3×3 information matrix X'WX.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoMatrix([[f64; 3]; 3]);

impl InfoMatrix {
    pub fn as_rows(&self) -> [[f64; 3]; 3] {
        self.0
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }
}

impl Index<(usize, usize)> for InfoMatrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.0[r][c]
    }
}

/// X'WX with X rows (1, x₁ᵢ, x₂ᵢ) over [`DESIGN_POINTS`] and W = diag(wᵢpᵢ).
pub fn information_matrix(w: &WeightVector, p: &DesignMeasure) -> InfoMatrix {
    let mut m = [[0.0; 3]; 3];
    for (i, (x1, x2)) in DESIGN_POINTS.iter().enumerate() {
        let row = [1.0, *x1, *x2];
        let mass = w[i] * p[i];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] += mass * row[r] * row[c];
            }
        }
    }
    InfoMatrix(m)
}

/// Relative loss of efficiency R(t,c) of running design `p_c` when the truth
/// is `w_t` with optimal design `p_t`:
/// (det(w,p_t)^{1/3} − det(w,p_c)^{1/3}) / det(w,p_t)^{1/3}.
///
/// `p_t` must be the optimal design for `w_t`; it is taken as given so that
/// solved designs can be reused across many comparisons.
pub fn relative_loss(w_t: &WeightVector, p_t: &DesignMeasure, p_c: &DesignMeasure) -> Result<f64> {
    let det_t = det_criterion(w_t, p_t)?;
    if det_t <= 0.0 {
        return Err(Error::DegenerateOptimum);
    }
    let det_c = det_criterion(w_t, p_c)?;
    Ok(1.0 - (det_c / det_t).cbrt())
}
