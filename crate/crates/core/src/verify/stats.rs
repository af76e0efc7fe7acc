//! Replica statistics, log-log slope fits and seed bookkeeping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample mean with its standard error over independent replicas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub mean: f64,
    pub std_error: f64,
    pub replicas: usize,
    /// Seed of the replica streams that produced the samples.
    pub seed: u64,
}

impl EstimateWithError {
    pub fn from_samples(samples: &[f64], seed: u64) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(Error::Config(format!("an estimate needs at least 2 replicas, got {n}")));
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        Ok(EstimateWithError {
            mean,
            std_error: (var / n as f64).sqrt(),
            replicas: n,
            seed,
        })
    }

    /// `|mean - target| <= z * std_error`.
    pub fn consistent_with(&self, target: f64, z: f64) -> bool {
        (self.mean - target).abs() <= z * self.std_error
    }

    /// Number of standard errors between the mean and `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.std_error > 0.0 {
            (self.mean - target) / self.std_error
        } else if self.mean == target {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Standard error of the difference of two independent means.
pub fn pooled_se(a: &EstimateWithError, b: &EstimateWithError) -> f64 {
    a.std_error.hypot(b.std_error)
}

/// Least-squares line through `(x, y)` with the standard error of the slope
/// propagated from per-point standard errors of `y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

pub fn fit_line(x: &[f64], y: &[f64], y_se: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / sxx;
    let var: f64 = x.iter().zip(y_se).map(|(a, s)| ((a - mx) / sxx).powi(2) * s * s).sum();
    LineFit {
        slope,
        intercept: my - slope * mx,
        slope_se: var.sqrt(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(if self.passed() { "PASS" } else { "FAIL" })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n: f64,
    pub estimate: EstimateWithError,
}

/// Log-log fit of an error statistic against a scale parameter.
///
/// The band is `slope +- z * slope_se`; the verdict is PASS iff the target
/// exponent lies in the band widened by `tolerance` on both sides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub label: String,
    pub points: Vec<ScalingPoint>,
    pub slope: f64,
    pub slope_se: f64,
    pub band: (f64, f64),
    pub target_exponent: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl ScalingReport {
    pub fn fit(label: &str, points: Vec<ScalingPoint>, target_exponent: f64, tolerance: f64, z: f64) -> Result<Self> {
        let mut distinct: Vec<f64> = points.iter().map(|p| p.n).collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() < 3 {
            return Err(Error::Config(format!(
                "{label}: a scaling fit needs at least 3 distinct n values"
            )));
        }
        if let Some(p) = points.iter().find(|p| !(p.estimate.mean > 0.0)) {
            return Err(Error::Config(format!(
                "{label}: non-positive statistic {} at n = {} cannot be fitted on a log scale",
                p.estimate.mean, p.n
            )));
        }
        let x: Vec<f64> = points.iter().map(|p| p.n.ln()).collect();
        let y: Vec<f64> = points.iter().map(|p| p.estimate.mean.ln()).collect();
        // Delta method: se(log m) = se(m) / m.
        let se: Vec<f64> = points.iter().map(|p| p.estimate.std_error / p.estimate.mean).collect();
        let line = fit_line(&x, &y, &se);
        let band = (line.slope - z * line.slope_se, line.slope + z * line.slope_se);
        let inside = target_exponent >= band.0 - tolerance && target_exponent <= band.1 + tolerance;
        Ok(ScalingReport {
            label: label.to_string(),
            points,
            slope: line.slope,
            slope_se: line.slope_se,
            band,
            target_exponent,
            tolerance,
            verdict: Verdict::from_bool(inside),
        })
    }

    /// Whether the point estimate of the slope lies in `(lo, hi)`.
    pub fn slope_within(&self, lo: f64, hi: f64) -> bool {
        self.slope > lo && self.slope < hi
    }
}

/// One block of replica streams drawn from the master seed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedEntry {
    pub label: String,
    pub seed: u64,
    pub replicas: usize,
}

/// Record of every stream used by a suite; replica `i` of an entry uses
/// `replica_rng(seed, i)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLedger {
    pub master: u64,
    pub entries: Vec<SeedEntry>,
}

impl SeedLedger {
    pub fn new(master: u64) -> Self {
        SeedLedger {
            master,
            entries: Vec::new(),
        }
    }

    /// Derives and records the seed for a labelled block of replicas.
    pub fn derive(&mut self, label: &str, replicas: usize) -> u64 {
        let seed = derive_seed(self.master, label);
        self.entries.push(SeedEntry {
            label: label.to_string(),
            seed,
            replicas,
        });
        seed
    }
}

/// SplitMix64 finalizer over the master seed and an FNV-1a hash of the label.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = master ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Like [`ScalingReport::fit`], but a statistic that is exactly zero at every
/// `n` yields `None` instead of an error.
pub fn fit_unless_vanishing(
    label: &str,
    points: Vec<ScalingPoint>,
    target_exponent: f64,
    tolerance: f64,
    z: f64,
) -> Result<Option<ScalingReport>> {
    if points
        .iter()
        .all(|p| p.estimate.mean == 0.0 && p.estimate.std_error == 0.0)
    {
        return Ok(None);
    }
    ScalingReport::fit(label, points, target_exponent, tolerance, z).map(Some)
}
