//! Monte Carlo sensitivity study: sample weight vectors from a link-specific
//! range, solve every design, and summarize the full pairwise relative-loss
//! matrix by per-candidate percentiles (R_99 and friends) together with the
//! standardized distance to the saturation boundary.
//!
//! Sampling is keyed by (seed, sample index) so results are identical for
//! any thread count and evaluation order.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::design::{objective_l, DesignMeasure, VarianceVector, WeightVector};
use crate::error::{Error, Result};
use crate::link::LinkFunction;
use crate::robustness::standardized_distance;
use crate::solver::{is_saturated, solve, Branch, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub link: LinkFunction,
    pub w_low: f64,
    pub w_high: f64,
    pub n_samples: usize,
    /// Requested upper percentiles, each in (0, 100].
    pub percentiles: Vec<f64>,
    pub seed: u64,
    /// Keep the full pairwise loss matrix in the result (and export it).
    pub retain_losses: bool,
}

impl StudyConfig {
    /// Study defaults per link: w ∈ [0.05, 0.25] for logit, [0.05, 0.65]
    /// for the other links capped at the link's weight bound.
    pub fn new(link: LinkFunction, seed: u64) -> Self {
        let w_high = match link {
            LinkFunction::Logit => 0.25,
            other => 0.65f64.min(other.weight_cap()),
        };
        StudyConfig {
            link,
            w_low: 0.05,
            w_high,
            n_samples: 1000,
            percentiles: vec![25.0, 50.0, 75.0, 95.0, 99.0],
            seed,
            retain_losses: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w_low > 0.0 && self.w_low < self.w_high) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < w_low < w_high, got [{}, {}]",
                self.w_low, self.w_high
            )));
        }
        if self.w_high > self.link.weight_cap() + 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "w_high = {} exceeds the {} weight cap {}",
                self.w_high,
                self.link,
                self.link.weight_cap()
            )));
        }
        if self.n_samples < 2 {
            return Err(Error::InvalidConfig("need at least 2 samples".into()));
        }
        if self.percentiles.is_empty()
            || self
                .percentiles
                .iter()
                .any(|q| !q.is_finite() || *q <= 0.0 || *q > 100.0)
        {
            return Err(Error::InvalidConfig(
                "percentiles must lie in (0, 100]".into(),
            ));
        }
        let mut sorted = self.percentiles.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if sorted != self.percentiles {
            return Err(Error::InvalidConfig(
                "percentile list must be sorted ascending".into(),
            ));
        }
        Ok(())
    }
}

/// One solved sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub w: WeightVector,
    pub v: VarianceVector,
    pub p: DesignMeasure,
    pub branch: Branch,
    pub distance: f64,
}

/// Loss percentiles for one candidate design, aligned with
/// `StudyConfig::percentiles`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSummary {
    pub candidate_index: usize,
    pub r_values: Vec<f64>,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub percentiles: Vec<f64>,
    pub samples: Vec<SampleRecord>,
    pub summaries: Vec<CandidateSummary>,
    pub saturated_fraction: f64,
    /// Samples whose solve failed, with the error text; they are excluded
    /// from all summaries.
    pub failures: Vec<(usize, String)>,
    /// Full pairwise matrix (row = candidate, column = true sample in
    /// ascending index order, the candidate itself skipped); present only
    /// when `retain_losses` was set.
    pub losses: Option<Vec<Vec<f64>>>,
}

/// Deterministic per-sample weight draws: sample i depends only on
/// (seed, i), never on evaluation order.
pub fn sample_weights(cfg: &StudyConfig) -> Result<Vec<WeightVector>> {
    cfg.validate()?;
    let dist = Uniform::new_inclusive(cfg.w_low, cfg.w_high)
        .map_err(|e| Error::InvalidConfig(format!("bad sampling range: {e}")))?;
    Ok((0..cfg.n_samples)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let w: [f64; 4] = std::array::from_fn(|_| dist.sample(&mut rng));
            WeightVector::new(w).expect("uniform draws are finite and positive")
        })
        .collect())
}

/// Share of samples whose variances satisfy the saturation condition.
pub fn saturated_fraction(samples: &[WeightVector]) -> f64 {
    assert!(!samples.is_empty(), "saturated_fraction of no samples");
    let tol = SolverConfig::default().saturation_tol;
    let count = samples
        .iter()
        .filter(|w| {
            let v = VarianceVector::new(w.as_array().map(|x| 1.0 / x))
                .expect("positive weights invert");
            is_saturated(&v, tol).0
        })
        .count();
    count as f64 / samples.len() as f64
}

/// Nearest-rank percentile of an ascending-sorted slice.
fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    let rank = ((q / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Runs the full study: one solve per sample, all ordered loss pairs
/// R(t,c), per-candidate percentile summaries.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let weights = sample_weights(cfg)?;
    let solver_cfg = SolverConfig::default();

    let mut samples = Vec::with_capacity(cfg.n_samples);
    let mut failures = Vec::new();
    let solved: Vec<Option<SampleRecord>> = weights
        .par_iter()
        .map(|w| {
            let v = VarianceVector::new(w.as_array().map(|x| 1.0 / x)).ok()?;
            let sol = solve(&v, &solver_cfg).ok()?;
            Some(SampleRecord {
                w: *w,
                v,
                p: sol.p,
                branch: sol.branch,
                distance: standardized_distance(&v),
            })
        })
        .collect();
    for (i, rec) in solved.into_iter().enumerate() {
        match rec {
            Some(r) => samples.push(r),
            None => failures.push((i, "solver failed".to_string())),
        }
    }
    if samples.len() < 2 {
        return Err(Error::InvalidConfig(
            "fewer than two samples solved successfully".into(),
        ));
    }

    let l_max: Vec<f64> = samples.iter().map(|s| objective_l(&s.v, &s.p)).collect();

    let losses_of = |c: usize| -> Vec<f64> {
        let p_c = &samples[c].p;
        (0..samples.len())
            .filter(|&t| t != c)
            .map(|t| {
                let ratio = objective_l(&samples[t].v, p_c) / l_max[t];
                // solver tolerance can leave a ~1e-12 negative loss
                (1.0 - ratio.cbrt()).max(0.0)
            })
            .collect()
    };

    let summaries: Vec<CandidateSummary> = (0..samples.len())
        .into_par_iter()
        .map(|c| {
            let mut losses = losses_of(c);
            losses.sort_by(|a, b| a.partial_cmp(b).unwrap());
            CandidateSummary {
                candidate_index: c,
                r_values: cfg
                    .percentiles
                    .iter()
                    .map(|&q| nearest_rank(&losses, q))
                    .collect(),
                distance: samples[c].distance,
            }
        })
        .collect();

    let losses = cfg
        .retain_losses
        .then(|| (0..samples.len()).into_par_iter().map(losses_of).collect());

    Ok(StudyResult {
        percentiles: cfg.percentiles.clone(),
        saturated_fraction: saturated_fraction(&weights),
        samples,
        summaries,
        failures,
        losses,
    })
}

fn percentile_label(q: f64) -> String {
    if q == q.trunc() {
        format!("R_{}", q as i64)
    } else {
        format!("R_{q}")
    }
}

/// Writes `samples.csv` and `summary.csv` (plus `losses.csv` when the full
/// matrix was retained) into `dir`. Float columns use shortest round-trip
/// formatting so re-parsing reproduces the in-memory values exactly.
pub fn export_study(result: &StudyResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let samples_path = dir.join("samples.csv");
    let mut out = String::new();
    out.push_str("w1,w2,w3,w4,v1,v2,v3,v4,p1,p2,p3,p4,branch,distance\n");
    for s in &result.samples {
        let w = s.w.as_array();
        let v = s.v.as_array();
        let p = s.p.as_array();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            w[0],
            w[1],
            w[2],
            w[3],
            v[0],
            v[1],
            v[2],
            v[3],
            p[0],
            p[1],
            p[2],
            p[3],
            s.branch,
            s.distance
        ));
    }
    fs::write(&samples_path, out).map_err(|e| Error::io(&samples_path, e))?;

    let summary_path = dir.join("summary.csv");
    let file = fs::File::create(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
    let mut out = std::io::BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(out, "# saturated_fraction={}", result.saturated_fraction)?;
        let header: Vec<String> = result
            .percentiles
            .iter()
            .map(|&q| percentile_label(q))
            .collect();
        writeln!(out, "candidate_index,{},distance", header.join(","))?;
        for s in &result.summaries {
            let values: Vec<String> = s.r_values.iter().map(|r| r.to_string()).collect();
            writeln!(
                out,
                "{},{},{}",
                s.candidate_index,
                values.join(","),
                s.distance
            )?;
        }
        out.flush()
    })()
    .map_err(|e| Error::io(&summary_path, e))?;

    if let Some(losses) = &result.losses {
        let losses_path = dir.join("losses.csv");
        let file = fs::File::create(&losses_path).map_err(|e| Error::io(&losses_path, e))?;
        let mut out = std::io::BufWriter::new(file);
        (|| -> std::io::Result<()> {
            writeln!(out, "candidate_index,losses")?;
            for (c, row) in losses.iter().enumerate() {
                let cells: Vec<String> = row.iter().map(|r| r.to_string()).collect();
                writeln!(out, "{},{}", c, cells.join(","))?;
            }
            out.flush()
        })()
        .map_err(|e| Error::io(&losses_path, e))?;
    }
    Ok(())
}

/// Spearman rank correlation (average ranks over ties).
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    pearson(&rx, &ry)
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}
