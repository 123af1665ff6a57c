//! Third-order σ noises built from nested complex Hubbard–Stratonovich
//! factorizations.
//!
//! With four independent standardized complex Gaussians ξ₁, ξ₁†, ξ₂, ξ₂† and
//! the shared square roots A = √(p†·ξ₂*) and B = √(p·ξ₂†*):
//!
//! ```text
//! σ₁  = q ξ₂  + s  ξ₁†* A        σ₂† = r† ξ₁† A
//! σ₁† = q†ξ₂† + s† ξ₁*  B        σ₂  = r  ξ₁  B
//! ```
//!
//! As long as no complex conjugates of the σ's enter an average, the only
//! nonzero cumulants are ⟨⟨σ₁σ₁σ₂†⟩⟩ = 2p†q·r†s = −κ/4 and its mirror
//! ⟨⟨σ₁†σ₁†σ₂⟩⟩ = −κ/4. The pairing p·q† = p†·q = −κ/8, r·s† = r†·s = 1
//! is what fixes that value; everything else is free and only shapes the
//! sampling noise.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::RngStream;
use crate::error::{Error, Result};

/// E|ξ| for the standardized complex Gaussian density e^{−|ξ|²}/π.
pub const MEAN_ABS_XI: f64 = 0.886_226_925_452_758; // √π / 2

const CONSTRAINT_RTOL: f64 = 1e-12;

/// Factorization constants of the σ noises together with the coupling κ
/// they were built for and the mode weighting χ used to choose them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaParams {
    kappa: f64,
    pub(crate) p: Complex64,
    pub(crate) p_dag: Complex64,
    pub(crate) q: Complex64,
    pub(crate) q_dag: Complex64,
    pub(crate) r: Complex64,
    pub(crate) r_dag: Complex64,
    pub(crate) s: Complex64,
    pub(crate) s_dag: Complex64,
    chi: f64,
}

impl SigmaParams {
    /// Explicit parameter set; rejected unless p·q† = p†·q = −κ/8 and
    /// r·s† = r†·s = 1 hold to 1e-12 relative.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kappa: f64,
        p: Complex64,
        p_dag: Complex64,
        q: Complex64,
        q_dag: Complex64,
        r: Complex64,
        r_dag: Complex64,
        s: Complex64,
        s_dag: Complex64,
        chi: f64,
    ) -> Result<Self> {
        let sp = SigmaParams {
            kappa,
            p,
            p_dag,
            q,
            q_dag,
            r,
            r_dag,
            s,
            s_dag,
            chi,
        };
        sp.validate()?;
        Ok(sp)
    }

    /// Real p = p†, s = s† with q and r fixed by the pairing constraints.
    pub fn from_p_s(kappa: f64, p: f64, s: f64, chi: f64) -> Result<Self> {
        if !(p.is_finite() && p > 0.0 && s.is_finite() && s > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "p and s must be finite and > 0, got p = {p}, s = {s}"
            )));
        }
        let p = Complex64::new(p, 0.0);
        let s = Complex64::new(s, 0.0);
        let q = Complex64::new(-kappa / 8.0, 0.0) / p;
        let r = s.inv();
        Self::new(kappa, p, p, q, q, r, r, s, s, chi)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("kappa", self.kappa)?;
        check_positive("chi", self.chi)?;
        let target_pq = Complex64::new(-self.kappa / 8.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let checks = [
            ("p*q_dag", self.p * self.q_dag, target_pq),
            ("p_dag*q", self.p_dag * self.q, target_pq),
            ("r*s_dag", self.r * self.s_dag, one),
            ("r_dag*s", self.r_dag * self.s, one),
        ];
        for (name, got, want) in checks {
            let err = (got - want).norm();
            if err.is_nan() || err > CONSTRAINT_RTOL * want.norm() {
                return Err(Error::InvalidParameter(format!(
                    "sigma constraint {name} = {got} must equal {want}"
                )));
            }
        }
        Ok(())
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn p(&self) -> (Complex64, Complex64) {
        (self.p, self.p_dag)
    }

    pub fn q(&self) -> (Complex64, Complex64) {
        (self.q, self.q_dag)
    }

    pub fn r(&self) -> (Complex64, Complex64) {
        (self.r, self.r_dag)
    }

    pub fn s(&self) -> (Complex64, Complex64) {
        (self.s, self.s_dag)
    }

    /// E|σ₁|² + E|σ₁†|² + χ(E|σ₂|² + E|σ₂†|²) for this parameter set.
    pub fn noise_weight(&self) -> f64 {
        let e = MEAN_ABS_XI;
        let s1 = self.q.norm_sqr() + self.s.norm_sqr() * self.p_dag.norm() * e;
        let s1d = self.q_dag.norm_sqr() + self.s_dag.norm_sqr() * self.p.norm() * e;
        let s2 = self.r.norm_sqr() * self.p.norm() * e;
        let s2d = self.r_dag.norm_sqr() * self.p_dag.norm() * e;
        s1 + s1d + self.chi * (s2 + s2d)
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")))
    }
}

/// The published minimizer: p = p† = κ^{1/3}/(4(χπ)^{1/6}), s = s† = χ^{1/4}.
pub fn optimal_sigma_params(kappa: f64, chi: f64) -> Result<SigmaParams> {
    check_positive("kappa", kappa)?;
    check_positive("chi", chi)?;
    let p = kappa.cbrt() / (4.0 * (chi * PI).powf(1.0 / 6.0));
    SigmaParams::from_p_s(kappa, p, chi.powf(0.25), chi)
}

/// f(p, s) = 2[(κ/(8p))² + p·E|ξ|·(s² + χ/s²)], the sampling-noise weight
/// for real p = p†, s = s† with q, r eliminated.
pub fn sigma_objective(kappa: f64, chi: f64, p: f64, s: f64) -> f64 {
    let q = kappa / (8.0 * p);
    2.0 * (q * q + p * MEAN_ABS_XI * (s * s + chi / (s * s)))
}

/// Minimizes [`sigma_objective`] by damped Newton iteration in (ln p, ln s),
/// where the objective is convex.
pub fn numerical_sigma_params(kappa: f64, chi: f64) -> Result<SigmaParams> {
    check_positive("kappa", kappa)?;
    check_positive("chi", chi)?;
    const MAX_ITER: usize = 200;
    let c2 = (kappa / 8.0).powi(2);
    let e = MEAN_ABS_XI;
    let f = |u: f64, v: f64| sigma_objective(kappa, chi, u.exp(), v.exp());

    let (mut u, mut v) = (0.0f64, 0.0f64);
    let mut grad_norm = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let (eu, e2v, em2v) = (u.exp(), (2.0 * v).exp(), (-2.0 * v).exp());
        let sum = e2v + chi * em2v;
        let diff = 2.0 * (e2v - chi * em2v);
        let gu = 2.0 * (-2.0 * c2 / (eu * eu) + e * eu * sum);
        let gv = 2.0 * e * eu * diff;
        let huu = 2.0 * (4.0 * c2 / (eu * eu) + e * eu * sum);
        let huv = 2.0 * e * eu * diff;
        let hvv = 2.0 * e * eu * 4.0 * sum;

        let scale = f(u, v);
        grad_norm = gu.hypot(gv);
        if grad_norm <= 1e-14 * scale {
            let sp = SigmaParams::from_p_s(kappa, u.exp(), v.exp(), chi)?;
            return Ok(sp);
        }
        let det = huu * hvv - huv * huv;
        let (mut du, mut dv) = if det > 0.0 && huu > 0.0 {
            (-(hvv * gu - huv * gv) / det, -(huu * gv - huv * gu) / det)
        } else {
            (-gu, -gv)
        };
        let f0 = scale;
        let mut step_ok = false;
        for _ in 0..60 {
            if f(u + du, v + dv) <= f0 {
                step_ok = true;
                break;
            }
            du *= 0.5;
            dv *= 0.5;
        }
        if !step_ok {
            break;
        }
        u += du;
        v += dv;
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITER,
        p: u.exp(),
        s: v.exp(),
        grad_norm,
    })
}

/// One realization of (σ₁, σ₁†, σ₂, σ₂†), without the Δt^{1/3} factor.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SigmaDraw {
    pub s1: Complex64,
    pub s1_dag: Complex64,
    pub s2: Complex64,
    pub s2_dag: Complex64,
}

impl SigmaDraw {
    pub fn as_array(&self) -> [Complex64; 4] {
        [self.s1, self.s1_dag, self.s2, self.s2_dag]
    }
}

/// Draws one σ tuple. Each square root is evaluated once (principal branch)
/// and shared between the two σ's that contain it; independent redraws would
/// zero the third cumulant.
#[inline]
pub fn draw_sigma(sp: &SigmaParams, stream: &mut RngStream) -> SigmaDraw {
    let xi1 = stream.complex_gaussian();
    let xi1_dag = stream.complex_gaussian();
    let xi2 = stream.complex_gaussian();
    let xi2_dag = stream.complex_gaussian();

    let root_a = (sp.p_dag * xi2.conj()).sqrt();
    let root_b = (sp.p * xi2_dag.conj()).sqrt();

    SigmaDraw {
        s1: sp.q * xi2 + sp.s * xi1_dag.conj() * root_a,
        s1_dag: sp.q_dag * xi2_dag + sp.s_dag * xi1.conj() * root_b,
        s2: sp.r * xi1 * root_b,
        s2_dag: sp.r_dag * xi1_dag * root_a,
    }
}

/// Monte Carlo check of e^{xy} = E[e^{xξ + yξ*}]: returns the relative error
/// of the sample mean over `n` draws.
pub fn hubbard_stratonovich_check(
    x: Complex64,
    y: Complex64,
    n: u64,
    stream: &mut RngStream,
) -> Result<f64> {
    if (x * y).norm() > 1.0 {
        return Err(Error::Contract(format!("|xy| must be <= 1, got {}", (x * y).norm())));
    }
    if n < 100_000 {
        return Err(Error::Contract(format!("need n >= 1e5 draws, got {n}")));
    }
    let mut acc = Complex64::default();
    for _ in 0..n {
        let xi = stream.complex_gaussian();
        acc += (x * xi + y * xi.conj()).exp();
    }
    let exact = (x * y).exp();
    Ok((acc / n as f64 - exact).norm() / exact.norm())
}
