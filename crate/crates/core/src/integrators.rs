//! Explicit Euler stepping kernels for the four representations and the
//! representation-aware initial-state samplers.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{classical_drift, ModelParams, PhasePoint};
use crate::noise::{draw_sigma, RngStream, SigmaParams};

/// Any amplitude above this modulus marks the trajectory as diverged.
pub const DIVERGENCE_BOUND: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    PositiveW,
    PositiveP,
    TruncatedWigner,
    Classical,
}

impl Representation {
    pub const ALL: [Representation; 4] = [
        Representation::PositiveW,
        Representation::PositiveP,
        Representation::TruncatedWigner,
        Representation::Classical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Representation::PositiveW => "positive_w",
            Representation::PositiveP => "positive_p",
            Representation::TruncatedWigner => "truncated_wigner",
            Representation::Classical => "classical",
        }
    }

    /// Wigner-family representations sample symmetrically ordered moments.
    pub fn is_wigner_family(self) -> bool {
        matches!(self, Representation::PositiveW | Representation::TruncatedWigner)
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Representation::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown representation '{s}' (expected positive_w, positive_p, truncated_wigner or classical)"
                ))
            })
    }
}

/// Switches for the noise terms. Both are on in production runs; turning
/// one off is a diagnostic (drift-only checks, Wiener-only Δt scans).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSwitches {
    pub wiener: bool,
    pub sigma: bool,
}

impl Default for NoiseSwitches {
    fn default() -> Self {
        NoiseSwitches {
            wiener: true,
            sigma: true,
        }
    }
}

impl NoiseSwitches {
    pub const OFF: NoiseSwitches = NoiseSwitches {
        wiener: false,
        sigma: false,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    dt: f64,
    dt_sqrt: f64,
    dt_cbrt: f64,
    representation: Representation,
    noise: NoiseSwitches,
}

impl StepConfig {
    pub fn new(dt: f64, representation: Representation) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
        }
        Ok(StepConfig {
            dt,
            dt_sqrt: dt.sqrt(),
            dt_cbrt: dt.cbrt(),
            representation,
            noise: NoiseSwitches::default(),
        })
    }

    pub fn with_noise(mut self, noise: NoiseSwitches) -> Self {
        self.noise = noise;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Δt^{1/2}
    pub fn dt_sqrt(&self) -> f64 {
        self.dt_sqrt
    }

    /// Δt^{1/3}
    pub fn dt_cbrt(&self) -> f64 {
        self.dt_cbrt
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn noise(&self) -> NoiseSwitches {
        self.noise
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepError {
    /// Non-finite input or an amplitude beyond [`DIVERGENCE_BOUND`].
    Diverged,
    /// Truncated-Wigner input with `alpha_dag != conj(alpha)` or the β pair.
    NotConjugate,
}

impl From<StepError> for Error {
    fn from(e: StepError) -> Self {
        match e {
            StepError::Diverged => Error::Diverged,
            StepError::NotConjugate => Error::Contract(
                "truncated Wigner state must satisfy alpha_dag = conj(alpha), beta_dag = conj(beta)"
                    .into(),
            ),
        }
    }
}

#[inline]
fn check_bounds(x: PhasePoint) -> std::result::Result<PhasePoint, StepError> {
    if x.is_finite() && x.max_norm() <= DIVERGENCE_BOUND {
        Ok(x)
    } else {
        Err(StepError::Diverged)
    }
}

#[inline]
fn check_input(x: &PhasePoint) -> std::result::Result<(), StepError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(StepError::Diverged)
    }
}

/// Positive-W step: drift·Δt + Gaussian diffusion·Δt^{1/2} + σ·Δt^{1/3}.
/// The same η₁ (η₂) drives α and, conjugated, α† (β and β†).
#[inline]
pub fn step_positive_w(
    x: &PhasePoint,
    params: &ModelParams,
    sp: &SigmaParams,
    cfg: &StepConfig,
    stream: &mut RngStream,
) -> std::result::Result<PhasePoint, StepError> {
    debug_assert_eq!(cfg.representation, Representation::PositiveW);
    check_input(x)?;
    let d = classical_drift(x, params) * cfg.dt;
    let mut out = *x + d;
    if cfg.noise.wiener {
        let eta1 = stream.complex_gaussian();
        let eta2 = stream.complex_gaussian();
        let a = params.gamma1().sqrt() * cfg.dt_sqrt;
        let b = params.gamma2().sqrt() * cfg.dt_sqrt;
        out.alpha += a * eta1;
        out.alpha_dag += a * eta1.conj();
        out.beta += b * eta2;
        out.beta_dag += b * eta2.conj();
    }
    if cfg.noise.sigma {
        let s = draw_sigma(sp, stream);
        let h = cfg.dt_cbrt;
        out.alpha += s.s1 * h;
        out.alpha_dag += s.s1_dag * h;
        out.beta += s.s2 * h;
        out.beta_dag += s.s2_dag * h;
    }
    check_bounds(out)
}

/// Positive-P Euler–Itô step with diagonal diffusion √(κβ)·w₁ and
/// √(κβ†)·w₂ (independent real normals). The pump mode carries no noise at
/// zero temperature.
#[inline]
pub fn step_positive_p(
    x: &PhasePoint,
    params: &ModelParams,
    cfg: &StepConfig,
    stream: &mut RngStream,
) -> std::result::Result<PhasePoint, StepError> {
    debug_assert_eq!(cfg.representation, Representation::PositiveP);
    check_input(x)?;
    let mut out = *x + classical_drift(x, params) * cfg.dt;
    if cfg.noise.wiener {
        let w1 = stream.normal() * cfg.dt_sqrt;
        let w2 = stream.normal() * cfg.dt_sqrt;
        let k = params.kappa();
        out.alpha += (k * x.beta).sqrt() * w1;
        out.alpha_dag += (k * x.beta_dag).sqrt() * w2;
    }
    check_bounds(out)
}

/// Truncated-Wigner step; the conjugate components are recomputed from the
/// updated amplitudes so the constraint holds bit-for-bit.
#[inline]
pub fn step_truncated_wigner(
    x: &PhasePoint,
    params: &ModelParams,
    cfg: &StepConfig,
    stream: &mut RngStream,
) -> std::result::Result<PhasePoint, StepError> {
    debug_assert_eq!(cfg.representation, Representation::TruncatedWigner);
    check_input(x)?;
    if !x.is_conjugate_pair() {
        return Err(StepError::NotConjugate);
    }
    let d = classical_drift(x, params);
    let mut alpha = x.alpha + d.alpha * cfg.dt;
    let mut beta = x.beta + d.beta * cfg.dt;
    if cfg.noise.wiener {
        alpha += stream.complex_gaussian() * (params.gamma1().sqrt() * cfg.dt_sqrt);
        beta += stream.complex_gaussian() * (params.gamma2().sqrt() * cfg.dt_sqrt);
    }
    check_bounds(PhasePoint::conjugate_pair(alpha, beta))
}

/// Deterministic Euler step of the drift.
#[inline]
pub fn step_classical(
    x: &PhasePoint,
    params: &ModelParams,
    cfg: &StepConfig,
) -> std::result::Result<PhasePoint, StepError> {
    check_input(x)?;
    check_bounds(*x + classical_drift(x, params) * cfg.dt)
}

/// Bundles everything one trajectory step needs.
#[derive(Debug, Clone, Copy)]
pub struct Stepper {
    params: ModelParams,
    sigma: Option<SigmaParams>,
    cfg: StepConfig,
}

impl Stepper {
    /// `sigma` is required for positive-W and ignored otherwise.
    pub fn new(params: ModelParams, sigma: Option<SigmaParams>, cfg: StepConfig) -> Result<Self> {
        if cfg.representation == Representation::PositiveW {
            let sp = sigma.ok_or_else(|| {
                Error::InvalidParameter("positive_w needs sigma parameters".into())
            })?;
            sp.validate()?;
            if (sp.kappa() - params.kappa()).abs() > 1e-12 * params.kappa() {
                return Err(Error::InvalidParameter(format!(
                    "sigma parameters were built for kappa = {}, model has kappa = {}",
                    sp.kappa(),
                    params.kappa()
                )));
            }
        }
        Ok(Stepper { params, sigma, cfg })
    }

    pub fn config(&self) -> &StepConfig {
        &self.cfg
    }

    #[inline]
    pub fn step(
        &self,
        x: &PhasePoint,
        stream: &mut RngStream,
    ) -> std::result::Result<PhasePoint, StepError> {
        match self.cfg.representation {
            Representation::PositiveW => {
                let sp = self.sigma.as_ref().expect("checked in Stepper::new");
                step_positive_w(x, &self.params, sp, &self.cfg, stream)
            }
            Representation::PositiveP => step_positive_p(x, &self.params, &self.cfg, stream),
            Representation::TruncatedWigner => {
                step_truncated_wigner(x, &self.params, &self.cfg, stream)
            }
            Representation::Classical => step_classical(x, &self.params, &self.cfg),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialMode {
    /// Coherent state |α₀, β₀⟩, transcribed exactly for the representation.
    Coherent,
    /// The point (α₀, α₀*, β₀, β₀*) with no smearing.
    Deterministic,
}

impl InitialMode {
    /// Coherent for the Wigner family, deterministic otherwise. For positive-P
    /// and classical runs the two coincide anyway.
    pub fn default_for(rep: Representation) -> Self {
        if rep.is_wigner_family() {
            InitialMode::Coherent
        } else {
            InitialMode::Deterministic
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialStateSpec {
    pub mode: InitialMode,
    pub alpha0: Complex64,
    pub beta0: Complex64,
}

/// Draws an initial phase point. A coherent state is a delta function in the
/// P family and a Gaussian of variance E|ζ|² = 1/2 per mode (vacuum
/// half-width) in the Wigner family.
pub fn sample_initial(
    spec: &InitialStateSpec,
    representation: Representation,
    stream: &mut RngStream,
) -> PhasePoint {
    let smear = spec.mode == InitialMode::Coherent && representation.is_wigner_family();
    if !smear {
        return PhasePoint::conjugate_pair(spec.alpha0, spec.beta0);
    }
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let za = stream.complex_gaussian() * half;
    let zb = stream.complex_gaussian() * half;
    PhasePoint::conjugate_pair(spec.alpha0 + za, spec.beta0 + zb)
}
