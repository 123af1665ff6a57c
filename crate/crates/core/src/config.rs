//! Run configuration file.
//!
//! A TOML file with the sections `model`, `run`, `initial`, `oracle`,
//! `sigma`, `cumulants` and `scan`; every key is optional and falls back to
//! the reference experiment (κ = γ₁ = γ₂ = 1, ε = 1.5, χ = 0.33, positive-W,
//! start at the symmetry-broken steady state α = β = 1). `section.key=value`
//! overrides are applied on top of the file. The JSON sidecar written next
//! to every output embeds the resolved configuration under `config` and is
//! itself accepted as a configuration file.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensemble::RunConfig;
use crate::error::{Error, Result};
use crate::integrators::{InitialMode, InitialStateSpec, Representation, StepConfig};
use crate::model::ModelParams;
use crate::noise::{numerical_sigma_params, optimal_sigma_params, SigmaParams};
use crate::oracle::{FockDims, OracleConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kappa: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub epsilon_re: f64,
    pub epsilon_im: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kappa: 1.0,
            gamma1: 1.0,
            gamma2: 1.0,
            epsilon_re: 1.5,
            epsilon_im: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub representation: Representation,
    pub dt: f64,
    pub t_end: f64,
    pub n_traj: u64,
    pub record_every: u64,
    pub seed: u64,
    pub chi: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            representation: Representation::PositiveW,
            dt: 0.01,
            t_end: 1.0,
            n_traj: 10_000,
            record_every: 5,
            seed: 1,
            chi: 0.33,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    /// Defaults per representation when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<InitialMode>,
    pub alpha0_re: f64,
    pub alpha0_im: f64,
    pub beta0_re: f64,
    pub beta0_im: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection {
            mode: None,
            alpha0_re: 1.0,
            alpha0_im: 0.0,
            beta0_re: 1.0,
            beta0_im: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub n_a: usize,
    pub n_b: usize,
    pub dt: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        let d = OracleConfig::default();
        OracleSection {
            n_a: d.dims.n_a,
            n_b: d.dims.n_b,
            dt: d.dt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMethod {
    /// p = κ^{1/3}/(4(χπ)^{1/6}), s = χ^{1/4}
    #[default]
    ClosedForm,
    /// Direct minimization of the σ noise weight.
    Numerical,
    /// All eight constants given as `[re, im]` pairs.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SigmaSection {
    pub method: SigmaMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_dag: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_dag: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_dag: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_dag: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CumulantSection {
    pub n_samples: u64,
}

impl Default for CumulantSection {
    fn default() -> Self {
        CumulantSection {
            n_samples: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub dt_list: Vec<f64>,
}

impl Default for ScanSection {
    fn default() -> Self {
        ScanSection {
            dt_list: vec![0.02, 0.01, 0.005, 0.0025],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: ModelSection,
    pub run: RunSection,
    pub initial: InitialSection,
    pub oracle: OracleSection,
    pub sigma: SigmaSection,
    pub cumulants: CumulantSection,
    pub scan: ScanSection,
}

impl Config {
    /// Reads a TOML config or a JSON sidecar (`.json`, resolved config under
    /// `config`) and applies `section.key=value` overrides on top.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let table = match path {
            None => toml::Table::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
                    table_from_sidecar(&text)?
                } else {
                    text.parse::<toml::Table>()
                        .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
                }
            }
        };
        Self::from_table(table, overrides)
    }

    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let table = text
            .parse::<toml::Table>()
            .map_err(|e| Error::Config(e.to_string()))?;
        Self::from_table(table, overrides)
    }

    fn from_table(mut table: toml::Table, overrides: &[String]) -> Result<Self> {
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Config = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Fills in the representation-dependent initial mode so the echoed
    /// config does not depend on defaults.
    pub fn resolved(mut self) -> Self {
        if self.initial.mode.is_none() {
            self.initial.mode = Some(InitialMode::default_for(self.run.representation));
        }
        self
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        let m = &self.model;
        ModelParams::new(
            m.kappa,
            m.gamma1,
            m.gamma2,
            Complex64::new(m.epsilon_re, m.epsilon_im),
        )
    }

    pub fn sigma_params(&self) -> Result<SigmaParams> {
        let kappa = self.model.kappa;
        let chi = self.run.chi;
        let sg = &self.sigma;
        match sg.method {
            SigmaMethod::ClosedForm => optimal_sigma_params(kappa, chi),
            SigmaMethod::Numerical => numerical_sigma_params(kappa, chi),
            SigmaMethod::Explicit => {
                let get = |name: &str, v: Option<[f64; 2]>| {
                    v.map(|[re, im]| Complex64::new(re, im)).ok_or_else(|| {
                        Error::Config(format!("sigma.method = \"explicit\" needs sigma.{name}"))
                    })
                };
                SigmaParams::new(
                    kappa,
                    get("p", sg.p)?,
                    get("p_dag", sg.p_dag)?,
                    get("q", sg.q)?,
                    get("q_dag", sg.q_dag)?,
                    get("r", sg.r)?,
                    get("r_dag", sg.r_dag)?,
                    get("s", sg.s)?,
                    get("s_dag", sg.s_dag)?,
                    chi,
                )
            }
        }
    }

    pub fn initial_state(&self) -> InitialStateSpec {
        let i = &self.initial;
        InitialStateSpec {
            mode: i
                .mode
                .unwrap_or_else(|| InitialMode::default_for(self.run.representation)),
            alpha0: Complex64::new(i.alpha0_re, i.alpha0_im),
            beta0: Complex64::new(i.beta0_re, i.beta0_im),
        }
    }

    /// Validated ensemble configuration.
    pub fn run_config(&self) -> Result<RunConfig> {
        let r = &self.run;
        let model = self.model_params()?;
        let sigma = if r.representation == Representation::PositiveW {
            Some(self.sigma_params()?)
        } else {
            None
        };
        let cfg = RunConfig {
            model,
            step: StepConfig::new(r.dt, r.representation)?,
            sigma,
            initial: self.initial_state(),
            n_traj: r.n_traj,
            t_end: r.t_end,
            record_every: r.record_every,
            seed: r.seed,
            chi: r.chi,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn oracle_config(&self) -> Result<OracleConfig> {
        let o = &self.oracle;
        if !(o.dt.is_finite() && o.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("oracle.dt must be > 0, got {}", o.dt)));
        }
        Ok(OracleConfig {
            dims: FockDims::new(o.n_a, o.n_b)?,
            dt: o.dt,
        })
    }
}

fn table_from_sidecar(text: &str) -> Result<toml::Table> {
    let v: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("sidecar: {e}")))?;
    let cfg = v
        .get("config")
        .ok_or_else(|| Error::Config("sidecar has no \"config\" field".into()))?;
    serde_json::from_value(cfg.clone()).map_err(|e| Error::Config(format!("sidecar config: {e}")))
}

/// `section.key=value`; the value is parsed as a TOML value and taken as a
/// bare string if that fails (so `run.representation=positive_p` works).
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not key=value")))?;
    let (section, key) = path
        .trim()
        .split_once('.')
        .ok_or_else(|| Error::Config(format!("override key {path:?} is not section.key")))?;
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let sec = entry
        .as_table_mut()
        .ok_or_else(|| Error::Config(format!("[{section}] is not a table")))?;
    sec.insert(key.to_string(), value);
    Ok(())
}
