//! Experiment configuration: TOML file with flat keys under a few section
//! headers. Every key has a default; `pinn --help` documents them all.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irk::choose_q;
use crate::sampling;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    SolveCt,
    SolveDt,
    IdentifyCt,
    IdentifyDt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    Burgers,
    Kdv,
}

/// Stage count: `"auto"` resolves through [`choose_q`] at Δt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QSpec {
    Fixed(usize),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

impl Default for QSpec {
    fn default() -> Self {
        QSpec::Auto(AutoTag::Auto)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchitectureConfig {
    /// Hidden layers (the paper's "L layers × W neurons" tables count hidden
    /// layers).
    pub hidden_layers: usize,
    pub width: usize,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        ArchitectureConfig { hidden_layers: 8, width: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Labeled initial/boundary points (continuous forward) or training
    /// points (continuous identification).
    pub n_u: usize,
    /// Collocation points (continuous forward).
    pub n_f: usize,
    /// Snapshot sizes (discrete modes).
    pub n_n: usize,
    pub n_n1: usize,
    /// First-snapshot time (discrete modes).
    pub t_n: f64,
    /// Time step / snapshot gap (discrete modes).
    pub dt: f64,
    /// Noise fraction on training labels (identification).
    pub noise_level: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            n_u: 100,
            n_f: 10_000,
            n_n: 199,
            n_n1: 201,
            t_n: 0.1,
            dt: 0.8,
            noise_level: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IrkConfig {
    pub q: QSpec,
}

impl Default for IrkConfig {
    fn default() -> Self {
        IrkConfig { q: QSpec::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// KdV generator settings (used when `equation = "kdv"`).
    pub kdv_modes: usize,
    pub kdv_dt_sim: f64,
    pub kdv_lambda1: f64,
    pub kdv_lambda2: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            kdv_modes: 256,
            kdv_dt_sim: 1e-5,
            kdv_lambda1: 1.0,
            kdv_lambda2: 0.0025,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub memory: usize,
    pub max_iterations: usize,
    pub grad_tol: f64,
    pub f_rel_tol: f64,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    pub adam_warmup: usize,
    pub adam_lr: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let d = crate::optimizer::LbfgsOptions::default();
        OptimizerConfig {
            memory: d.memory,
            max_iterations: 20_000,
            grad_tol: d.grad_tol,
            f_rel_tol: d.f_rel_tol,
            wolfe_c1: d.wolfe_c1,
            wolfe_c2: d.wolfe_c2,
            adam_warmup: 0,
            adam_lr: d.adam_lr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Evaluation grid for the relative L2 norm.
    pub nt: usize,
    pub nx: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { nt: 100, nx: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Loss engine: `"fused"` (structured derivative propagation) or
    /// `"graph"` (the computational-graph reference path). Both produce the
    /// same loss and gradient; `graph` is slower and exists for checks.
    pub loss: LossEngine,
    /// Evaluate loss shards on the thread pool (identical results).
    pub parallel: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossEngine {
    Fused,
    Graph,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { loss: LossEngine::Fused, parallel: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default = "default_equation")]
    pub equation: Equation,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub architecture: ArchitectureConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub irk: IrkConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub engine: EngineConfig,
}

fn default_equation() -> Equation {
    Equation::Burgers
}

impl ExperimentConfig {
    pub fn new(mode: Mode) -> Self {
        let mut cfg = ExperimentConfig {
            mode,
            equation: Equation::Burgers,
            seed: 0,
            architecture: ArchitectureConfig::default(),
            data: DataConfig::default(),
            irk: IrkConfig::default(),
            oracle: OracleConfig::default(),
            optimizer: OptimizerConfig::default(),
            eval: EvalConfig::default(),
            engine: EngineConfig::default(),
        };
        // discrete-time modes default to the paper's 4 × 50 stage networks
        if matches!(mode, Mode::SolveDt | Mode::IdentifyDt) {
            cfg.architecture = ArchitectureConfig { hidden_layers: 4, width: 50 };
        }
        match mode {
            Mode::IdentifyCt => cfg.data.n_u = 2000,
            Mode::SolveDt => cfg.data.n_n = 250,
            _ => {}
        }
        cfg
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.equation == Equation::Kdv && self.mode != Mode::IdentifyDt {
            return Err(Error::config(
                "the KdV equation is only supported in identify_dt mode",
            ));
        }
        if self.architecture.hidden_layers == 0 || self.architecture.width == 0 {
            return Err(Error::config("architecture sizes must be positive"));
        }
        if matches!(self.mode, Mode::SolveDt | Mode::IdentifyDt) {
            if !(self.data.dt > 0.0 && self.data.dt < 1.0) {
                return Err(Error::config("discrete modes need 0 < dt < 1"));
            }
            if self.data.t_n < 0.0 || self.data.t_n + self.data.dt > 1.0 + 1e-12 {
                return Err(Error::config("snapshot times must lie inside [0, 1]"));
            }
        }
        if !(0.0..=1.0).contains(&self.data.noise_level) {
            return Err(Error::config("noise_level must lie in [0, 1]"));
        }
        if self.eval.nt < 2 || self.eval.nx < 2 {
            return Err(Error::config("evaluation grid needs at least 2×2 points"));
        }
        Ok(())
    }

    /// Resolve `q = "auto"` through the stage-count formula.
    pub fn resolved_q(&self) -> Result<usize> {
        match self.irk.q {
            QSpec::Fixed(q) => Ok(q),
            QSpec::Auto(_) => choose_q(f64::EPSILON, self.data.dt),
        }
    }

    /// Complete config echo with every derived quantity pinned, written into
    /// reports so a run can be reproduced exactly.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let q = if matches!(self.mode, Mode::SolveDt | Mode::IdentifyDt) {
            Some(self.resolved_q()?)
        } else {
            None
        };
        Ok(ResolvedConfig {
            config: self.clone(),
            q_resolved: q,
            generator: sampling::GENERATOR.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    #[serde(flatten)]
    pub config: ExperimentConfig,
    pub q_resolved: Option<usize>,
    pub generator: String,
}

/// Key documentation for `--help`.
pub const CONFIG_KEYS: &str = "\
Configuration file keys (TOML; every key optional unless noted):
  mode                     solve_ct | solve_dt | identify_ct | identify_dt (required;
                           the CLI subcommand overrides it)
  equation                 burgers | kdv (kdv only with identify_dt; default burgers)
  seed                     base RNG seed (default 0)
  [architecture]
  hidden_layers, width     hidden-layer count and width (defaults 8, 20; discrete
                           modes default to 4, 50)
  [data]
  n_u                      labeled points: initial/boundary (solve_ct) or training
                           points (identify_ct) (default 100, identify default 2000
                           comes from the paper tables)
  n_f                      collocation points for solve_ct (default 10000)
  n_n, n_n1                snapshot sizes for discrete modes (defaults 199, 201;
                           solve_dt uses n_n = 250 by convention)
  t_n                      first snapshot time (default 0.1)
  dt                       time step / snapshot gap (default 0.8)
  noise_level              label noise fraction, e.g. 0.01 (default 0)
  [irk]
  q                        stage count, integer or \"auto\" (default auto:
                           q = ceil(0.5 ln eps / ln dt))
  [oracle]
  kdv_modes, kdv_dt_sim    KdV generator resolution (defaults 256, 1e-5)
  kdv_lambda1, kdv_lambda2 true KdV coefficients (defaults 1.0, 0.0025)
  [optimizer]
  memory, max_iterations, grad_tol, f_rel_tol, wolfe_c1, wolfe_c2,
  adam_warmup, adam_lr     L-BFGS settings (defaults 50, 20000, 1e-9, 2.2e-15,
                           1e-4, 0.9, 0, 1e-3)
  [eval]
  nt, nx                   evaluation grid for relative L2 (defaults 100, 256)
  [engine]
  loss                     fused | graph (default fused)
  parallel                 evaluate loss shards on the thread pool (default true)
";
