//! JSON run configuration shared by the suites and the command line.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::TestFunction;
use crate::model::{kernel_from_pairs, Geometry, Kernel, ModelSpec, Torus};
use crate::orthopoly::{
    build_generating_pair, resolution_geometry, resolve_convention, table_for_pair, ConventionReport, DualityTable,
    GeneratingPair, RESOLUTION_DEGREE,
};
use crate::rational::{serde_q, RationalInput, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteName {
    Duality,
    Orthogonality,
    Recursion,
    Gradient,
    CarreDuChamp,
    DriftScaling,
    QvReplacement,
    Martingale,
    Covariance,
    Taylor,
    Moments,
}

impl SuiteName {
    pub const ALL: [SuiteName; 11] = [
        SuiteName::Duality,
        SuiteName::Orthogonality,
        SuiteName::Recursion,
        SuiteName::Gradient,
        SuiteName::CarreDuChamp,
        SuiteName::DriftScaling,
        SuiteName::QvReplacement,
        SuiteName::Martingale,
        SuiteName::Covariance,
        SuiteName::Taylor,
        SuiteName::Moments,
    ];

    /// Identity suites run by `check`; they have no Monte Carlo noise in
    /// their verdicts apart from the duality semigroup comparison.
    pub const CHECK: [SuiteName; 6] = [
        SuiteName::Duality,
        SuiteName::Orthogonality,
        SuiteName::Recursion,
        SuiteName::Gradient,
        SuiteName::CarreDuChamp,
        SuiteName::Taylor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::Duality => "duality",
            SuiteName::Orthogonality => "orthogonality",
            SuiteName::Recursion => "recursion",
            SuiteName::Gradient => "gradient",
            SuiteName::CarreDuChamp => "carre_du_champ",
            SuiteName::DriftScaling => "drift_scaling",
            SuiteName::QvReplacement => "qv_replacement",
            SuiteName::Martingale => "martingale",
            SuiteName::Covariance => "covariance",
            SuiteName::Taylor => "taylor",
            SuiteName::Moments => "moments",
        }
    }
}

impl fmt::Display for SuiteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SuiteName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SuiteName::ALL
            .iter()
            .copied()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite `{s}`")))
    }
}

/// Lattice offset given either as a bare integer (`d = 1`) or a vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OffsetInput {
    Scalar(i64),
    Vector(Vec<i64>),
}

impl OffsetInput {
    fn to_vec(&self) -> Vec<i64> {
        match self {
            OffsetInput::Scalar(v) => vec![*v],
            OffsetInput::Vector(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelWeights {
    /// Only `"nearest_neighbor"` is recognised.
    Named(String),
    Pairs(Vec<(OffsetInput, RationalInput)>),
}

impl Default for KernelWeights {
    fn default() -> Self {
        KernelWeights::Named("nearest_neighbor".into())
    }
}

fn one() -> usize {
    1
}

/// Model and lattice block: `sigma, alpha, rho, d, L, R, kernel_weights`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub sigma: i64,
    #[serde(with = "serde_q")]
    pub alpha: Q,
    #[serde(with = "serde_q")]
    pub rho: Q,
    #[serde(default = "one")]
    pub d: usize,
    #[serde(rename = "L")]
    pub side: usize,
    #[serde(rename = "R", default = "one")]
    pub radius: usize,
    #[serde(default)]
    pub kernel_weights: KernelWeights,
}

impl ModelConfig {
    pub fn new(sigma: i64, alpha: Q, rho: Q, d: usize, side: usize) -> Self {
        ModelConfig {
            sigma,
            alpha,
            rho,
            d,
            side,
            radius: 1,
            kernel_weights: KernelWeights::default(),
        }
    }

    pub fn spec(&self) -> Result<ModelSpec> {
        ModelSpec::new(self.sigma, self.alpha.clone(), self.rho.clone())
    }

    pub fn kernel(&self) -> Result<Kernel> {
        match &self.kernel_weights {
            KernelWeights::Named(name) if name == "nearest_neighbor" => {
                if self.radius != 1 {
                    return Err(Error::Config(format!(
                        "nearest_neighbor kernel needs R = 1, got R = {}",
                        self.radius
                    )));
                }
                Ok(Kernel::nearest_neighbor(self.d))
            }
            KernelWeights::Named(name) => Err(Error::Config(format!("unknown kernel `{name}`"))),
            KernelWeights::Pairs(pairs) => {
                let pairs = pairs
                    .iter()
                    .map(|(o, w)| {
                        let w = w.clone().into_q()?;
                        Ok((o.to_vec(), crate::rational::fmt_q(&w)))
                    })
                    .collect::<Result<Vec<_>>>()?;
                kernel_from_pairs(self.d, self.radius, &pairs)
            }
        }
    }

    pub fn geometry_with_side(&self, side: usize) -> Result<Geometry> {
        Geometry::new(Torus::new(self.d, side)?, self.kernel()?)
    }

    pub fn geometry(&self) -> Result<Geometry> {
        self.geometry_with_side(self.side)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    /// Defaults to `sin(2 pi u_1)`.
    #[serde(default)]
    pub phi: Option<TestFunction>,
    /// Second test function of the covariance suite; defaults to `cos(2 pi u_1)`.
    #[serde(default)]
    pub psi: Option<TestFunction>,
}

fn default_k() -> usize {
    2
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            k: default_k(),
            phi: None,
            psi: None,
        }
    }
}

/// Pass/fail thresholds of all suites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Width of statistical acceptance intervals in standard errors.
    pub se_multiplier: f64,
    /// Allowed deviation of a fitted exponent from its target.
    pub slope_tolerance: f64,
    /// Allowed `|slope|` for moments that should stay flat in `n`.
    pub moment_slope_tolerance: f64,
    /// Relative tolerance of the first-order quadratic variation target.
    pub qv_relative: f64,
    /// Absolute tolerance for float Gram off-diagonals.
    pub gram_tolerance: f64,
    /// Relative tolerance for constancy of `Lambda / mu`.
    pub ratio_tolerance: f64,
    /// Relative tolerance for the gradient decomposition.
    pub gradient_relative: f64,
    /// Relative tolerance between the analytic and dual-semigroup covariances at `t = 0`.
    pub analytic_tolerance: f64,
    /// Allowed relative growth between consecutive Taylor remainders.
    pub growth_tolerance: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            se_multiplier: 3.0,
            slope_tolerance: 0.3,
            moment_slope_tolerance: 0.1,
            qv_relative: 0.05,
            gram_tolerance: 1e-12,
            ratio_tolerance: 1e-10,
            gradient_relative: 1e-8,
            analytic_tolerance: 1e-10,
            growth_tolerance: 0.1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub suite: Option<SuiteName>,
    /// Macroscopic horizon.
    #[serde(rename = "T")]
    pub horizon: f64,
    pub replicas: usize,
    pub n_list: Vec<usize>,
    pub t_list: Vec<f64>,
    /// Occupancy cap used when drawing test configurations for unbounded models.
    pub eta_cap: u32,
    /// Random occupancies per dual configuration when exhaustive enumeration is too large.
    pub eta_samples: usize,
    /// Largest occupancy set enumerated exhaustively.
    pub exhaustive_eta_limit: usize,
    /// Dual/occupancy pairs in the Monte Carlo duality comparison.
    pub duality_pairs: usize,
    /// Microscopic times of the Monte Carlo duality comparison.
    pub duality_times: Vec<f64>,
    /// Highest polynomial degree in the orthogonality suite.
    pub m_max: usize,
    /// Degree and occupancy range of the recursion suite.
    pub recursion_degree: usize,
    pub recursion_n: u32,
    /// Random dual configurations per order for the `Lambda / mu` check.
    pub ratio_samples: usize,
    /// Randomized cases of the gradient suite.
    pub cases: usize,
    /// Occupancies per order in the carre du champ suite.
    pub instances: usize,
    /// Cap on dual state spaces for exact semigroup computations.
    pub state_limit: usize,
    pub tolerances: Tolerances,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            suite: None,
            horizon: 0.1,
            replicas: 1000,
            n_list: vec![8, 16, 32, 64],
            t_list: vec![0.01, 0.05, 0.1],
            eta_cap: 3,
            eta_samples: 200,
            exhaustive_eta_limit: 1024,
            duality_pairs: 4,
            duality_times: vec![0.1, 0.5],
            m_max: 6,
            recursion_degree: 6,
            recursion_n: 40,
            ratio_samples: 20,
            cases: 100,
            instances: 4,
            state_limit: crate::dynamics::DEFAULT_STATE_LIMIT,
            tolerances: Tolerances::default(),
        }
    }
}

/// Forces a specific printed sign pair instead of resolving the convention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConventionOverride {
    pub sign_e: i8,
    pub sign_h: i8,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub convention_override: Option<ConventionOverride>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn new(model: ModelConfig) -> Self {
        RunConfig {
            model,
            field: FieldConfig::default(),
            experiment: ExperimentConfig::default(),
            seed: 0,
            output_dir: default_output(),
            convention_override: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn phi(&self) -> TestFunction {
        self.field
            .phi
            .clone()
            .unwrap_or_else(|| TestFunction::sine(self.model.d))
    }

    pub fn psi(&self) -> TestFunction {
        self.field
            .psi
            .clone()
            .unwrap_or_else(|| TestFunction::cosine(self.model.d))
    }

    /// Checks every invariant that does not need a suite to run.
    pub fn validate(&self) -> Result<()> {
        self.model.spec()?;
        self.model.geometry()?;
        let exp = &self.experiment;
        if exp.replicas < 2 {
            return Err(Error::Config(format!(
                "replicas must be at least 2, got {}",
                exp.replicas
            )));
        }
        if !(exp.horizon > 0.0) {
            return Err(Error::Config(format!("T must be positive, got {}", exp.horizon)));
        }
        for &n in &exp.n_list {
            if n <= 2 * self.model.radius {
                return Err(Error::Config(format!(
                    "n_list entry {n} must exceed 2R = {}",
                    2 * self.model.radius
                )));
            }
        }
        if exp.t_list.iter().any(|t| !(*t >= 0.0)) || exp.t_list.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config("t_list must be non-negative and non-decreasing".into()));
        }
        if exp.duality_times.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::Config("duality_times must be positive".into()));
        }
        if self.field.k == 0 || self.field.k + 1 > crate::fields::tracker::MAX_SERIES_LEN {
            return Err(Error::Config(format!(
                "field order k must be in 1..={}, got {}",
                crate::fields::tracker::MAX_SERIES_LEN - 1,
                self.field.k
            )));
        }
        self.phi().validate(self.model.d)?;
        self.psi().validate(self.model.d)?;
        if let Some(o) = self.convention_override {
            if o.sign_e.abs() != 1 || o.sign_h.abs() != 1 {
                return Err(Error::Config("convention_override signs must be +1 or -1".into()));
            }
        }
        Ok(())
    }
}

/// Validated objects built once from a configuration.
#[derive(Clone, Debug)]
pub struct Context {
    pub config: RunConfig,
    pub spec: ModelSpec,
    pub geom: Geometry,
    pub pair: GeneratingPair,
    /// `None` when the convention was overridden.
    pub convention: Option<ConventionReport>,
}

impl Context {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let spec = config.model.spec()?;
        let geom = config.model.geometry()?;
        let (pair, convention) = match config.convention_override {
            Some(o) => (
                build_generating_pair(&spec, RESOLUTION_DEGREE, o.sign_e, o.sign_h),
                None,
            ),
            None => {
                let small = resolution_geometry(&geom)?;
                let (pair, report) = resolve_convention(&spec, &small)?;
                (pair, Some(report))
            }
        };
        Ok(Context {
            config,
            spec,
            geom,
            pair,
            convention,
        })
    }

    pub fn experiment(&self) -> &ExperimentConfig {
        &self.config.experiment
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.config.experiment.tolerances
    }

    pub fn k(&self) -> usize {
        self.config.field.k
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn table(&self, m_max: usize) -> Result<DualityTable> {
        table_for_pair(&self.spec, &self.pair, m_max)
    }

    pub fn geometry_with_side(&self, side: usize) -> Result<Geometry> {
        self.config.model.geometry_with_side(side)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"model": {"sigma": 1, "alpha": 1, "rho": "1/2", "L": 8}}"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.model.d, 1);
        assert_eq!(cfg.field.k, 2);
        assert_eq!(cfg.experiment.replicas, 1000);
        assert_eq!(cfg.experiment.tolerances.se_multiplier, 3.0);
        let again = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(again.to_json(), cfg.to_json());
    }

    #[test]
    fn kernel_pairs_accept_scalar_and_vector_offsets() {
        let text = r#"{"model": {"sigma": 0, "alpha": 1, "rho": "1/2", "L": 9, "R": 2,
            "kernel_weights": [[1, "1/4"], [-1, "1/4"], [[2], "1/4"], [[-2], 0.25]]}}"#;
        let cfg = RunConfig::from_json(text).unwrap();
        assert_eq!(cfg.model.kernel().unwrap().len(), 4);
    }

    #[test]
    fn asymmetric_kernel_is_reported() {
        let text = r#"{"model": {"sigma": 0, "alpha": 1, "rho": "1/2", "L": 9,
            "kernel_weights": [[1, "2/3"], [-1, "1/3"]]}}"#;
        assert!(matches!(
            RunConfig::from_json(text),
            Err(Error::SymmetryViolation { .. })
        ));
    }

    #[test]
    fn invariants_are_enforced() {
        let mut cfg = RunConfig::from_json(MINIMAL).unwrap();
        cfg.experiment.replicas = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::from_json(MINIMAL).unwrap();
        cfg.experiment.n_list = vec![2, 8, 16];
        assert!(cfg.validate().is_err());
        assert!(RunConfig::from_json(
            r#"{"model": {"sigma": 1, "alpha": 1, "rho": "1/2", "L": 8}, "experiment": {"suite": "nope"}}"#
        )
        .is_err());
        assert!("martingale".parse::<SuiteName>().is_ok());
        assert!("nope".parse::<SuiteName>().is_err());
    }

    #[test]
    fn override_skips_resolution() {
        let mut cfg = RunConfig::from_json(MINIMAL).unwrap();
        cfg.convention_override = Some(ConventionOverride { sign_e: -1, sign_h: -1 });
        let ctx = Context::new(cfg).unwrap();
        assert!(ctx.convention.is_none());
        assert_eq!(ctx.pair.label(), "(-,-)");
    }
}
