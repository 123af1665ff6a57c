//! OPO parameters, the doubled phase-space point and the deterministic
//! (classical) part of the dynamics.

use std::ops::{Add, Mul};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants of the degenerate OPO, all in units of inverse time.
///
/// `kappa` is the nonlinear coupling, `gamma1`/`gamma2` the signal and pump
/// cavity loss rates, and `epsilon` the classical pump amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModelParams", into = "RawModelParams")]
pub struct ModelParams {
    kappa: f64,
    gamma1: f64,
    gamma2: f64,
    epsilon: Complex64,
}

#[derive(Serialize, Deserialize)]
struct RawModelParams {
    kappa: f64,
    gamma1: f64,
    gamma2: f64,
    epsilon_re: f64,
    epsilon_im: f64,
}

impl TryFrom<RawModelParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawModelParams) -> Result<Self> {
        ModelParams::new(
            raw.kappa,
            raw.gamma1,
            raw.gamma2,
            Complex64::new(raw.epsilon_re, raw.epsilon_im),
        )
    }
}

impl From<ModelParams> for RawModelParams {
    fn from(p: ModelParams) -> Self {
        RawModelParams {
            kappa: p.kappa,
            gamma1: p.gamma1,
            gamma2: p.gamma2,
            epsilon_re: p.epsilon.re,
            epsilon_im: p.epsilon.im,
        }
    }
}

impl ModelParams {
    pub fn new(kappa: f64, gamma1: f64, gamma2: f64, epsilon: Complex64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidParameter(format!("kappa must be > 0, got {kappa}")));
        }
        for (name, g) in [("gamma1", gamma1), ("gamma2", gamma2)] {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be >= 0, got {g}")));
            }
        }
        if !(epsilon.re.is_finite() && epsilon.im.is_finite()) {
            return Err(Error::InvalidParameter("epsilon must be finite".into()));
        }
        Ok(ModelParams {
            kappa,
            gamma1,
            gamma2,
            epsilon,
        })
    }

    /// Equal losses `gamma` on both modes and a real pump.
    pub fn symmetric(kappa: f64, gamma: f64, epsilon: f64) -> Result<Self> {
        Self::new(kappa, gamma, gamma, Complex64::new(epsilon, 0.0))
    }

    /// κ = γ₁ = γ₂ = 1 and ε = 1.5 ε_c, the strongly interacting operating
    /// point used throughout the acceptance runs.
    pub fn reference() -> Self {
        Self::symmetric(1.0, 1.0, 1.5).expect("reference parameters are valid")
    }

    #[inline]
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    #[inline]
    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }

    #[inline]
    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }

    #[inline]
    pub fn epsilon(&self) -> Complex64 {
        self.epsilon
    }

    pub fn with_epsilon(self, epsilon: Complex64) -> Result<Self> {
        Self::new(self.kappa, self.gamma1, self.gamma2, epsilon)
    }

    pub fn with_kappa(self, kappa: f64) -> Result<Self> {
        Self::new(kappa, self.gamma1, self.gamma2, self.epsilon)
    }
}

/// Point of the doubled phase space. In the positive-P and positive-W
/// representations `alpha_dag` and `beta_dag` are independent variables; the
/// single-phase-space kernels keep them equal to the conjugates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePoint {
    pub alpha: Complex64,
    pub alpha_dag: Complex64,
    pub beta: Complex64,
    pub beta_dag: Complex64,
}

impl PhasePoint {
    pub const ZERO: PhasePoint = PhasePoint {
        alpha: Complex64::new(0.0, 0.0),
        alpha_dag: Complex64::new(0.0, 0.0),
        beta: Complex64::new(0.0, 0.0),
        beta_dag: Complex64::new(0.0, 0.0),
    };

    pub fn new(alpha: Complex64, alpha_dag: Complex64, beta: Complex64, beta_dag: Complex64) -> Self {
        PhasePoint {
            alpha,
            alpha_dag,
            beta,
            beta_dag,
        }
    }

    /// Point with `alpha_dag = conj(alpha)` and `beta_dag = conj(beta)`.
    pub fn conjugate_pair(alpha: Complex64, beta: Complex64) -> Self {
        PhasePoint {
            alpha,
            alpha_dag: alpha.conj(),
            beta,
            beta_dag: beta.conj(),
        }
    }

    /// Exact (bitwise) check of the single-phase-space constraint.
    pub fn is_conjugate_pair(&self) -> bool {
        self.alpha_dag == self.alpha.conj() && self.beta_dag == self.beta.conj()
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest modulus among the four amplitudes.
    pub fn max_norm(&self) -> f64 {
        self.components().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn components(&self) -> [Complex64; 4] {
        [self.alpha, self.alpha_dag, self.beta, self.beta_dag]
    }

    /// Signal quadrature α + α†. Complex in the doubled phase space.
    pub fn quadrature_a(&self) -> Complex64 {
        self.alpha + self.alpha_dag
    }

    pub fn quadrature_b(&self) -> Complex64 {
        self.beta + self.beta_dag
    }

    /// α†α
    pub fn photon_number_a(&self) -> Complex64 {
        self.alpha_dag * self.alpha
    }
}

impl Add for PhasePoint {
    type Output = PhasePoint;

    fn add(self, rhs: PhasePoint) -> PhasePoint {
        PhasePoint {
            alpha: self.alpha + rhs.alpha,
            alpha_dag: self.alpha_dag + rhs.alpha_dag,
            beta: self.beta + rhs.beta,
            beta_dag: self.beta_dag + rhs.beta_dag,
        }
    }
}

impl Mul<f64> for PhasePoint {
    type Output = PhasePoint;

    fn mul(self, k: f64) -> PhasePoint {
        PhasePoint {
            alpha: self.alpha * k,
            alpha_dag: self.alpha_dag * k,
            beta: self.beta * k,
            beta_dag: self.beta_dag * k,
        }
    }
}

/// Which of the two symmetry-broken signal states to pick above threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Positive,
    Negative,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Positive => 1.0,
            Branch::Negative => -1.0,
        }
    }
}

/// Pump threshold ε_c = γ₁γ₂/κ.
pub fn critical_pump(params: &ModelParams) -> f64 {
    params.gamma1 * params.gamma2 / params.kappa
}

/// Deterministic drift of all four amplitudes (the Δt-proportional part of
/// every stepping kernel).
#[inline]
pub fn classical_drift(x: &PhasePoint, params: &ModelParams) -> PhasePoint {
    let k = params.kappa;
    let g1 = params.gamma1;
    let g2 = params.gamma2;
    let eps = params.epsilon;
    PhasePoint {
        alpha: -g1 * x.alpha + k * x.alpha_dag * x.beta,
        alpha_dag: -g1 * x.alpha_dag + k * x.alpha * x.beta_dag,
        beta: eps - g2 * x.beta - 0.5 * k * x.alpha * x.alpha,
        beta_dag: eps.conj() - g2 * x.beta_dag - 0.5 * k * x.alpha_dag * x.alpha_dag,
    }
}

/// Closed-form classical fixed point for a real, non-negative pump.
///
/// Above threshold the signal amplitude is `branch · sqrt(2(ε − ε_c)/κ)` with
/// the pump clamped at β = γ₁/κ; at or below threshold the signal is empty
/// and β = ε/γ₂.
pub fn semiclassical_steady_state(params: &ModelParams, branch: Branch) -> Result<PhasePoint> {
    let eps = params.epsilon;
    if eps.im != 0.0 {
        return Err(Error::Unsupported(format!(
            "closed-form steady state needs a real pump, got epsilon = {eps}"
        )));
    }
    let eps = eps.re;
    if eps < 0.0 {
        return Err(Error::Unsupported(format!(
            "closed-form steady state needs epsilon >= 0, got {eps}"
        )));
    }
    let eps_c = critical_pump(params);
    let (alpha, beta) = if eps > eps_c {
        let a = branch.sign() * (2.0 * (eps - eps_c) / params.kappa).sqrt();
        (a, params.gamma1 / params.kappa)
    } else if params.gamma2 > 0.0 {
        (0.0, eps / params.gamma2)
    } else {
        // γ₂ = 0 forces ε = 0 here; every β is stationary.
        (0.0, 0.0)
    };
    Ok(PhasePoint::conjugate_pair(
        Complex64::new(alpha, 0.0),
        Complex64::new(beta, 0.0),
    ))
}
