//! Run configuration, read from TOML.
//!
//! Every field has a default, so an empty file (or no file) reproduces the
//! reference setup: 4818 grid samples, a 3-5-3 tansig network trained for up
//! to 222 epochs, a 20-neuron RBF with spread 2 (normalized) or 200 (real),
//! and a report goal MSE of 1e-3.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::dataset::{SamplingScheme, SplitRatios};
use crate::error::{Error, Result};
use crate::kinematics::{PoseDomain, Range, TriceptGeometry};
use crate::mlp::{Activation, LmOptions};
use crate::rbf::{RbfOptions, Selection};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub a: f64,
    pub b: f64,
    pub d: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let g = TriceptGeometry::default();
        GeometryConfig {
            a: g.a(),
            b: g.b(),
            d: g.d(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub theta: [f64; 2],
    pub psi: [f64; 2],
    pub c: [f64; 2],
}

impl Default for DomainConfig {
    fn default() -> Self {
        let d = PoseDomain::default();
        DomainConfig {
            theta: [d.theta.min, d.theta.max],
            psi: [d.psi.min, d.psi.max],
            c: [d.c.min, d.c.max],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub scheme: String,
    pub n: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            scheme: SamplingScheme::Grid.to_string(),
            n: 4818,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let r = SplitRatios::default();
        SplitConfig {
            train: r.train,
            validation: r.validation,
            test: r.test,
            seed: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub activation: String,
    pub max_epochs: usize,
    /// Training stops early at this MSE; 0 trains until another criterion.
    pub goal_mse: f64,
    pub lambda_init: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub lambda_max: f64,
    pub max_validation_failures: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        let lm = LmOptions::default();
        MlpConfig {
            hidden: vec![5],
            activation: Activation::Tansig.to_string(),
            max_epochs: lm.max_epochs,
            goal_mse: 0.0,
            lambda_init: lm.lambda_init,
            lambda_up: lm.lambda_up,
            lambda_down: lm.lambda_down,
            lambda_max: lm.lambda_max,
            max_validation_failures: lm.max_validation_failures,
            seed: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbfConfig {
    pub max_neurons: usize,
    pub spread_normalized: f64,
    pub spread_real: f64,
    /// Growth stops early at this MSE; 0 grows to `max_neurons`.
    pub goal_mse: f64,
    pub use_bias: bool,
}

impl Default for RbfConfig {
    fn default() -> Self {
        RbfConfig {
            max_neurons: 20,
            spread_normalized: 2.0,
            spread_real: 200.0,
            goal_mse: 0.0,
            use_bias: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Verdict threshold for the comparison report.
    pub goal_mse: f64,
    pub histogram_bins: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            goal_mse: 1e-3,
            histogram_bins: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub domain: DomainConfig,
    pub sampling: SamplingConfig,
    pub split: SplitConfig,
    pub mlp: MlpConfig,
    pub rbf: RbfConfig,
    pub report: ReportConfig,
    pub output: OutputConfig,
}

/// Which data space a model is trained and evaluated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Normalized,
    Real,
}

impl Space {
    pub fn name(self) -> &'static str {
        match self {
            Space::Normalized => "normalized",
            Space::Real => "real",
        }
    }
}

fn field_err(field: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| Error::config(field, e.to_string())
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let field = e
                .span()
                .and_then(|s| text.get(s))
                .map(|s| s.lines().next().unwrap_or("").trim().to_string())
                .filter(|s| !s.is_empty())
                .unwrap_or_else(|| "<file>".into());
            Error::Config { field, message }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_toml_str(&text)
    }

    /// Replaces the sampling, split and network-initialization seeds.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sampling.seed = seed;
        self.split.seed = seed;
        self.mlp.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry()?;
        self.domain()?;
        self.scheme()?;
        if self.sampling.n == 0 {
            return Err(Error::config("sampling.n", "must be >= 1"));
        }
        let s = &self.split;
        for (name, v) in [("split.train", s.train), ("split.validation", s.validation), ("split.test", s.test)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(name, format!("must be in [0, 1], got {v}")));
            }
        }
        if (s.train + s.validation + s.test - 1.0).abs() > 1e-9 {
            return Err(Error::config("split", "ratios must sum to 1"));
        }
        if s.train == 0.0 {
            return Err(Error::config("split.train", "must be > 0"));
        }
        if self.mlp.hidden.is_empty() || self.mlp.hidden.contains(&0) {
            return Err(Error::config("mlp.hidden", "need at least one layer, each of size >= 1"));
        }
        self.activation()?;
        self.lm_options().validate().map_err(field_err("mlp"))?;
        if self.rbf.max_neurons == 0 {
            return Err(Error::config("rbf.max_neurons", "must be >= 1"));
        }
        for (name, v) in [
            ("rbf.spread_normalized", self.rbf.spread_normalized),
            ("rbf.spread_real", self.rbf.spread_real),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, format!("must be > 0, got {v}")));
            }
        }
        if !(self.rbf.goal_mse >= 0.0) {
            return Err(Error::config("rbf.goal_mse", "must be >= 0"));
        }
        if !(self.report.goal_mse >= 0.0) {
            return Err(Error::config("report.goal_mse", "must be >= 0"));
        }
        if self.report.histogram_bins == 0 {
            return Err(Error::config("report.histogram_bins", "must be >= 1"));
        }
        if self.output.dir.as_os_str().is_empty() {
            return Err(Error::config("output.dir", "must not be empty"));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<TriceptGeometry> {
        let g = &self.geometry;
        TriceptGeometry::new(g.a, g.b, g.d).map_err(field_err("geometry"))
    }

    pub fn domain(&self) -> Result<PoseDomain> {
        let d = &self.domain;
        let range = |name: &'static str, r: [f64; 2]| Range::new(r[0], r[1]).map_err(field_err(name));
        PoseDomain::new(
            range("domain.theta", d.theta)?,
            range("domain.psi", d.psi)?,
            range("domain.c", d.c)?,
        )
        .map_err(field_err("domain"))
    }

    pub fn scheme(&self) -> Result<SamplingScheme> {
        self.sampling.scheme.parse().map_err(field_err("sampling.scheme"))
    }

    pub fn split_ratios(&self) -> SplitRatios {
        SplitRatios {
            train: self.split.train,
            validation: self.split.validation,
            test: self.split.test,
        }
    }

    pub fn activation(&self) -> Result<Activation> {
        self.mlp.activation.parse().map_err(field_err("mlp.activation"))
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![3];
        sizes.extend(&self.mlp.hidden);
        sizes.push(3);
        sizes
    }

    pub fn lm_options(&self) -> LmOptions {
        let m = &self.mlp;
        LmOptions {
            max_epochs: m.max_epochs,
            goal_mse: m.goal_mse,
            lambda_init: m.lambda_init,
            lambda_up: m.lambda_up,
            lambda_down: m.lambda_down,
            lambda_max: m.lambda_max,
            max_validation_failures: m.max_validation_failures,
        }
    }

    pub fn rbf_options(&self, space: Space) -> RbfOptions {
        RbfOptions {
            max_neurons: self.rbf.max_neurons,
            spread: match space {
                Space::Normalized => self.rbf.spread_normalized,
                Space::Real => self.rbf.spread_real,
            },
            goal_mse: self.rbf.goal_mse,
            use_bias: self.rbf.use_bias,
            selection: Selection::Orthogonal,
        }
    }
}
