//! Reference solution: the two-mode OPO master equation in a truncated Fock
//! space,
//!
//! ```text
//! dρ/dt = (κ/2)[a†²b − a²b†, ρ] + [εb† − ε*b, ρ]
//!       + γ₁(2aρa† − a†aρ − ρa†a) + γ₂(2bρb† − b†bρ − ρb†b)
//! ```
//!
//! so that d⟨a⟩/dt = −γ₁⟨a⟩ + κ⟨a†b⟩, the same drift the phase-space
//! kernels integrate. Amplitudes therefore decay as e^{−γt}.
//!
//! The density matrix is stored densely; the mode operators only ever act
//! through sparse index maps, so one Liouvillian evaluation costs O(D²) for
//! Hilbert-space dimension D = N_a·N_b.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensemble::ObservableSeries;
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Largest cutoff population P(n_a = N_a−1) + P(n_b = N_b−1) tolerated.
pub const TRUNCATION_TOLERANCE: f64 = 1e-6;
const XA_IMAG_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockDims {
    pub n_a: usize,
    pub n_b: usize,
}

impl FockDims {
    pub fn new(n_a: usize, n_b: usize) -> Result<Self> {
        if n_a < 2 || n_b < 2 {
            return Err(Error::InvalidParameter(format!(
                "Fock cutoffs must be >= 2, got ({n_a}, {n_b})"
            )));
        }
        Ok(FockDims { n_a, n_b })
    }

    pub fn dim(&self) -> usize {
        self.n_a * self.n_b
    }

    #[inline]
    fn index(&self, na: usize, nb: usize) -> usize {
        na * self.n_b + nb
    }

    #[inline]
    fn split(&self, i: usize) -> (usize, usize) {
        (i / self.n_b, i % self.n_b)
    }
}

/// Sparse operator as (row, col, value) triples.
#[derive(Debug, Clone, Default)]
struct SparseOp {
    entries: Vec<(usize, usize, Complex64)>,
}

impl SparseOp {
    fn push(&mut self, row: usize, col: usize, v: Complex64) {
        if v != Complex64::default() {
            self.entries.push((row, col, v));
        }
    }

    /// out += self · rho
    fn left_mul_add(&self, rho: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        let d = rho.nrows();
        let (src, dst) = (rho.as_slice(), out.as_mut_slice());
        for j in 0..d {
            let (sc, dc) = (&src[j * d..(j + 1) * d], &mut dst[j * d..(j + 1) * d]);
            for &(r, c, v) in &self.entries {
                dc[r] += v * sc[c];
            }
        }
    }

    /// out += rho · self†
    fn right_mul_dag_add(&self, rho: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        let d = rho.nrows();
        let (src, dst) = (rho.as_slice(), out.as_mut_slice());
        for &(r, c, v) in &self.entries {
            let vc = v.conj();
            let sc = &src[c * d..(c + 1) * d];
            for (o, x) in dst[r * d..(r + 1) * d].iter_mut().zip(sc) {
                *o += vc * x;
            }
        }
    }

    /// Tr[self · rho]
    fn expectation(&self, rho: &DMatrix<Complex64>) -> Complex64 {
        self.entries.iter().map(|&(r, c, v)| v * rho[(c, r)]).sum()
    }
}

/// Generator pieces of the master equation for fixed parameters and dims.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    dims: FockDims,
    /// K = G − γ₁a†a − γ₂b†b with G the anti-Hermitian coherent part, so
    /// dρ/dt = Kρ + ρK† + 2γ₁aρa† + 2γ₂bρb†.
    k: SparseOp,
    /// Per damped mode: index stride of one quantum and the (index, weight)
    /// pairs of the lowering operator's source levels.
    jumps: Vec<(usize, Vec<(usize, f64)>)>,
}

impl Liouvillian {
    pub fn new(params: &ModelParams, dims: FockDims) -> Self {
        let kappa = params.kappa();
        let eps = params.epsilon();
        let mut k = SparseOp::default();
        for i in 0..dims.dim() {
            let (na, nb) = dims.split(i);
            let (naf, nbf) = (na as f64, nb as f64);
            // damping: −γ₁n_a − γ₂n_b on the diagonal
            k.push(i, i, Complex64::new(-params.gamma1() * naf - params.gamma2() * nbf, 0.0));
            // (κ/2) a†² b
            if nb >= 1 && na + 2 < dims.n_a {
                let v = 0.5 * kappa * (nbf * (naf + 1.0) * (naf + 2.0)).sqrt();
                k.push(dims.index(na + 2, nb - 1), i, Complex64::new(v, 0.0));
            }
            // −(κ/2) a² b†
            if na >= 2 && nb + 1 < dims.n_b {
                let v = -0.5 * kappa * (naf * (naf - 1.0) * (nbf + 1.0)).sqrt();
                k.push(dims.index(na - 2, nb + 1), i, Complex64::new(v, 0.0));
            }
            // ε b†
            if nb + 1 < dims.n_b {
                k.push(dims.index(na, nb + 1), i, eps * (nbf + 1.0).sqrt());
            }
            // −ε* b
            if nb >= 1 {
                k.push(dims.index(na, nb - 1), i, -eps.conj() * nbf.sqrt());
            }
        }
        let mut jumps = Vec::new();
        for (stride, gamma, mode_a) in [(dims.n_b, params.gamma1(), true), (1, params.gamma2(), false)] {
            if gamma == 0.0 {
                continue;
            }
            let top = if mode_a { dims.n_a } else { dims.n_b };
            let rows = (0..dims.dim())
                .filter_map(|i| {
                    let (na, nb) = dims.split(i);
                    let n = if mode_a { na } else { nb };
                    (n + 1 < top).then(|| (i, (2.0 * gamma * (n + 1) as f64).sqrt()))
                })
                .collect();
            jumps.push((stride, rows));
        }
        Liouvillian { dims, k, jumps }
    }

    pub fn dims(&self) -> FockDims {
        self.dims
    }

    /// dρ/dt
    pub fn apply(&self, rho: &DensityMatrix) -> DensityMatrix {
        let d = self.dims.dim();
        let m = &rho.matrix;
        let mut out = DMatrix::zeros(d, d);
        self.k.left_mul_add(m, &mut out);
        self.k.right_mul_dag_add(m, &mut out);

        // 2γ aρa† with a|n+1⟩ = √(n+1)|n⟩: entry (i, j) picks up
        // ρ(i + stride, j + stride) weighted by √(2γ(n_i+1))·√(2γ(n_j+1)).
        let (src, dst) = (m.as_slice(), out.as_mut_slice());
        for (stride, rows) in &self.jumps {
            for &(j, wj) in rows {
                let sc = &src[(j + stride) * d..(j + stride + 1) * d];
                let dc = &mut dst[j * d..(j + 1) * d];
                for &(i, wi) in rows {
                    dc[i] += (wi * wj) * sc[i + stride];
                }
            }
        }
        DensityMatrix {
            dims: self.dims,
            matrix: out,
        }
    }
}

/// Convenience wrapper for a single evaluation of dρ/dt.
pub fn liouvillian_rhs(rho: &DensityMatrix, params: &ModelParams) -> DensityMatrix {
    Liouvillian::new(params, rho.dims).apply(rho)
}

/// Two-mode density matrix on the truncated Fock basis |n_a, n_b⟩ with
/// flat index n_a·N_b + n_b.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dims: FockDims,
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn from_matrix(dims: FockDims, matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != dims.dim() || matrix.ncols() != dims.dim() {
            return Err(Error::Contract(format!(
                "matrix is {}x{}, dims need {}",
                matrix.nrows(),
                matrix.ncols(),
                dims.dim()
            )));
        }
        Ok(DensityMatrix { dims, matrix })
    }

    pub fn vacuum(dims: FockDims) -> Self {
        let mut matrix = DMatrix::zeros(dims.dim(), dims.dim());
        matrix[(0, 0)] = Complex64::new(1.0, 0.0);
        DensityMatrix { dims, matrix }
    }

    pub fn dims(&self) -> FockDims {
        self.dims
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// max |ρ − ρ†|
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dims.dim();
        let mut worst = 0.0f64;
        for j in 0..d {
            for i in 0..=j {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// (P(n_a = N_a−1), P(n_b = N_b−1))
    pub fn cutoff_populations(&self) -> (f64, f64) {
        let (mut pa, mut pb) = (0.0, 0.0);
        for i in 0..self.dims.dim() {
            let (na, nb) = self.dims.split(i);
            let p = self.matrix[(i, i)].re;
            if na + 1 == self.dims.n_a {
                pa += p;
            }
            if nb + 1 == self.dims.n_b {
                pb += p;
            }
        }
        (pa, pb)
    }

    fn check_truncation(&self, t: f64) -> Result<()> {
        let (pa, pb) = self.cutoff_populations();
        if pa + pb < TRUNCATION_TOLERANCE {
            Ok(())
        } else {
            Err(Error::Truncation {
                t,
                population: pa + pb,
                pop_a: pa,
                pop_b: pb,
                top_a: self.dims.n_a - 1,
                top_b: self.dims.n_b - 1,
            })
        }
    }

    /// ⟨a⟩
    pub fn expect_a(&self) -> Complex64 {
        let nb = self.dims.n_b;
        (0..self.dims.dim() - nb)
            .map(|i| {
                let na = self.dims.split(i).0;
                ((na + 1) as f64).sqrt() * self.matrix[(i + nb, i)]
            })
            .sum()
    }

    /// ⟨b⟩
    pub fn expect_b(&self) -> Complex64 {
        (0..self.dims.dim())
            .filter(|&i| self.dims.split(i).1 + 1 < self.dims.n_b)
            .map(|i| ((self.dims.split(i).1 + 1) as f64).sqrt() * self.matrix[(i + 1, i)])
            .sum()
    }

    /// ⟨a†b⟩
    pub fn expect_adag_b(&self) -> Complex64 {
        let mut op = SparseOp::default();
        for i in 0..self.dims.dim() {
            let (na, nb) = self.dims.split(i);
            if nb >= 1 && na + 1 < self.dims.n_a {
                let v = ((nb as f64) * (na + 1) as f64).sqrt();
                op.push(self.dims.index(na + 1, nb - 1), i, Complex64::new(v, 0.0));
            }
        }
        op.expectation(&self.matrix)
    }

    /// ⟨a†a⟩
    pub fn expect_na(&self) -> f64 {
        (0..self.dims.dim())
            .map(|i| self.dims.split(i).0 as f64 * self.matrix[(i, i)].re)
            .sum()
    }

    fn scaled_add(&self, k: &DensityMatrix, h: f64) -> DensityMatrix {
        DensityMatrix {
            dims: self.dims,
            matrix: &self.matrix + &k.matrix * Complex64::new(h, 0.0),
        }
    }
}

fn real_part_checked(z: Complex64, what: &str) -> Result<f64> {
    if z.im.abs() < XA_IMAG_TOLERANCE {
        Ok(z.re)
    } else {
        Err(Error::Hermiticity(format!("{what} has imaginary part {:e}", z.im)))
    }
}

/// Tr[(a + a†)ρ]
pub fn expectation_xa(rho: &DensityMatrix) -> Result<f64> {
    let a = rho.expect_a();
    let nb = rho.dims.n_b;
    let a_dag: Complex64 = (0..rho.dims.dim() - nb)
        .map(|i| ((rho.dims.split(i).0 + 1) as f64).sqrt() * rho.matrix[(i, i + nb)])
        .sum();
    real_part_checked(a + a_dag, "Tr[(a + a†)ρ]")
}

/// Tr[(b + b†)ρ]
pub fn expectation_xb(rho: &DensityMatrix) -> Result<f64> {
    let b = rho.expect_b();
    let b_dag: Complex64 = (0..rho.dims.dim())
        .filter(|&i| rho.dims.split(i).1 + 1 < rho.dims.n_b)
        .map(|i| ((rho.dims.split(i).1 + 1) as f64).sqrt() * rho.matrix[(i, i + 1)])
        .sum();
    real_part_checked(b + b_dag, "Tr[(b + b†)ρ]")
}

fn truncated_coherent(alpha: Complex64, n: usize) -> Result<Vec<Complex64>> {
    let mut v = Vec::with_capacity(n);
    let mut c = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for k in 0..n {
        v.push(c);
        c = c * alpha / ((k + 1) as f64).sqrt();
    }
    let kept: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    if 1.0 - kept > TRUNCATION_TOLERANCE {
        return Err(Error::InvalidParameter(format!(
            "coherent amplitude |{alpha}| too large for a cutoff of {n}: {:e} of the norm is lost",
            1.0 - kept
        )));
    }
    let norm = kept.sqrt();
    Ok(v.into_iter().map(|z| z / norm).collect())
}

/// |α₀, β₀⟩⟨α₀, β₀| with each mode's coherent vector truncated and
/// renormalized.
pub fn coherent_density(alpha0: Complex64, beta0: Complex64, dims: FockDims) -> Result<DensityMatrix> {
    let va = truncated_coherent(alpha0, dims.n_a)?;
    let vb = truncated_coherent(beta0, dims.n_b)?;
    let psi: Vec<Complex64> = va.iter().flat_map(|a| vb.iter().map(move |b| a * b)).collect();
    let d = dims.dim();
    let matrix = DMatrix::from_fn(d, d, |i, j| psi[i] * psi[j].conj());
    Ok(DensityMatrix { dims, matrix })
}

/// Classical RK4 on the master equation. Returns the states at step 0 and
/// every `record_every` steps; each recorded state is checked against the
/// truncation tolerance. The trace is never renormalized.
pub fn evolve(
    rho0: &DensityMatrix,
    params: &ModelParams,
    dt: f64,
    steps: usize,
    record_every: usize,
) -> Result<Vec<(f64, DensityMatrix)>> {
    evolve_with(rho0, params, dt, steps, record_every, true)
}

/// [`evolve`] without the truncation check, for diagnostics.
pub fn evolve_unchecked(
    rho0: &DensityMatrix,
    params: &ModelParams,
    dt: f64,
    steps: usize,
    record_every: usize,
) -> Result<Vec<(f64, DensityMatrix)>> {
    evolve_with(rho0, params, dt, steps, record_every, false)
}

fn evolve_with(
    rho0: &DensityMatrix,
    params: &ModelParams,
    dt: f64,
    steps: usize,
    record_every: usize,
    check: bool,
) -> Result<Vec<(f64, DensityMatrix)>> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter(format!("oracle dt must be > 0, got {dt}")));
    }
    if record_every == 0 {
        return Err(Error::InvalidParameter("record_every must be >= 1".into()));
    }
    let l = Liouvillian::new(params, rho0.dims);
    let mut rho = rho0.clone();
    if check {
        rho.check_truncation(0.0)?;
    }
    let mut out = vec![(0.0, rho.clone())];
    for n in 1..=steps {
        let k1 = l.apply(&rho);
        let k2 = l.apply(&rho.scaled_add(&k1, 0.5 * dt));
        let k3 = l.apply(&rho.scaled_add(&k2, 0.5 * dt));
        let k4 = l.apply(&rho.scaled_add(&k3, dt));
        let sum = &k1.matrix + (&k2.matrix + &k3.matrix) * Complex64::new(2.0, 0.0) + &k4.matrix;
        rho.matrix += sum * Complex64::new(dt / 6.0, 0.0);
        if n % record_every == 0 {
            let t = n as f64 * dt;
            if check {
                rho.check_truncation(t)?;
            }
            out.push((t, rho.clone()));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub dims: FockDims,
    pub dt: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            dims: FockDims { n_a: 20, n_b: 14 },
            dt: 1e-3,
        }
    }
}

/// Oracle expectation values on the grid k·`interval`, k = 0..=floor(t_end/interval),
/// in the ensemble series layout with zero standard errors. `mean_n_a` holds
/// the normally ordered ⟨a†a⟩.
pub fn oracle_series(
    params: &ModelParams,
    alpha0: Complex64,
    beta0: Complex64,
    cfg: &OracleConfig,
    t_end: f64,
    interval: f64,
) -> Result<ObservableSeries> {
    let record_every = whole_ratio(interval, cfg.dt, "record interval", "oracle dt")?;
    let n_points = ((t_end / interval) * (1.0 + 1e-12)).floor() as usize + 1;
    let rho0 = coherent_density(alpha0, beta0, cfg.dims)?;
    let states = evolve(&rho0, params, cfg.dt, (n_points - 1) * record_every, record_every)?;
    series_from_states(&states, n_points, interval)
}

pub(crate) fn series_from_states(
    states: &[(f64, DensityMatrix)],
    n_points: usize,
    interval: f64,
) -> Result<ObservableSeries> {
    let mut s = ObservableSeries {
        label: "oracle".into(),
        times: Vec::with_capacity(n_points),
        mean: Default::default(),
        stderr: Default::default(),
        n_effective: Vec::new(),
        diverged_fraction: Vec::new(),
        truncated: false,
    };
    for (k, (_, rho)) in states.iter().enumerate().take(n_points) {
        s.times.push(k as f64 * interval);
        s.mean[0].push(expectation_xa(rho)?);
        s.mean[1].push(rho.expect_na());
        s.mean[2].push(expectation_xb(rho)?);
        for o in 0..3 {
            s.stderr[o].push(0.0);
        }
        s.n_effective.push(1);
        s.diverged_fraction.push(0.0);
    }
    Ok(s)
}

fn whole_ratio(num: f64, den: f64, what_num: &str, what_den: &str) -> Result<usize> {
    let r = num / den;
    let n = r.round();
    if n < 1.0 || (r - n).abs() > 1e-9 * n {
        return Err(Error::InvalidParameter(format!(
            "{what_num} {num} is not a whole multiple of {what_den} {den}"
        )));
    }
    Ok(n as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn dims(a: usize, b: usize) -> FockDims {
        FockDims::new(a, b).unwrap()
    }

    /// Dense reference generator built from explicit operator matrices.
    fn dense_rhs(rho: &DMatrix<Complex64>, p: &ModelParams, d: FockDims) -> DMatrix<Complex64> {
        let n = d.dim();
        let mut a = DMatrix::<Complex64>::zeros(n, n);
        let mut b = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            let (na, nb) = d.split(i);
            if na >= 1 {
                a[(d.index(na - 1, nb), i)] = c((na as f64).sqrt(), 0.0);
            }
            if nb >= 1 {
                b[(d.index(na, nb - 1), i)] = c((nb as f64).sqrt(), 0.0);
            }
        }
        let ad = a.adjoint();
        let bd = b.adjoint();
        let comm = |x: &DMatrix<Complex64>| x * rho - rho * x;
        let h = (&ad * &ad * &b - &a * &a * &bd) * c(0.5 * p.kappa(), 0.0)
            + &bd * p.epsilon()
            - &b * p.epsilon().conj();
        let damp = |l: &DMatrix<Complex64>, g: f64| {
            let ld = l.adjoint();
            (l * rho * &ld * c(2.0, 0.0) - &ld * l * rho - rho * &ld * l) * c(g, 0.0)
        };
        comm(&h) + damp(&a, p.gamma1()) + damp(&b, p.gamma2())
    }

    fn random_hermitian(d: FockDims, seed: u64) -> DMatrix<Complex64> {
        let mut rng = crate::noise::RngStream::new(seed, 0);
        let n = d.dim();
        let g = DMatrix::from_fn(n, n, |_, _| rng.complex_gaussian());
        let h = &g * g.adjoint();
        let tr = h.trace();
        h / tr
    }

    #[test]
    fn sparse_generator_matches_dense_operators() {
        let d = dims(5, 4);
        let p = ModelParams::new(0.7, 0.9, 1.3, c(1.2, -0.4)).unwrap();
        let rho = random_hermitian(d, 3);
        let fast = Liouvillian::new(&p, d).apply(&DensityMatrix::from_matrix(d, rho.clone()).unwrap());
        let slow = dense_rhs(&rho, &p, d);
        assert!((fast.matrix - slow).norm() < 1e-12);
    }

    #[test]
    fn rhs_examples() {
        let d = dims(15, 10);
        let vac = DensityMatrix::vacuum(d);
        let off = ModelParams::symmetric(1.0, 1.0, 0.0).unwrap();
        assert_eq!(liouvillian_rhs(&vac, &off).matrix.norm(), 0.0);

        let p = ModelParams::reference();
        let drho = liouvillian_rhs(&vac, &p);
        let db = drho.expect_b();
        assert!((db - c(1.5, 0.0)).norm() < 1e-14, "{db}");

        let rho = DensityMatrix::from_matrix(d, random_hermitian(d, 8)).unwrap();
        assert!(liouvillian_rhs(&rho, &p).trace().norm() < 1e-12);
    }

    #[test]
    fn coherent_states() {
        let d = dims(15, 10);
        let vac = coherent_density(c(0.0, 0.0), c(0.0, 0.0), d).unwrap();
        assert_eq!(vac, DensityMatrix::vacuum(d));

        let rho = coherent_density(c(1.0, 0.0), c(0.5, 0.0), d).unwrap();
        assert!((rho.trace() - c(1.0, 0.0)).norm() < 1e-14);
        assert!((rho.expect_a() - c(1.0, 0.0)).norm() < 1e-8);
        assert!((rho.expect_na() - 1.0).abs() < 1e-6);
        assert!((expectation_xa(&rho).unwrap() - 2.0).abs() < 1e-8);

        let imag = coherent_density(c(0.0, 1.0), c(0.0, 0.0), d).unwrap();
        assert!(expectation_xa(&imag).unwrap().abs() < 1e-12);
        assert_eq!(expectation_xa(&DensityMatrix::vacuum(d)).unwrap(), 0.0);

        assert!(coherent_density(c(4.0, 0.0), c(0.0, 0.0), d).is_err());
    }

    #[test]
    fn linear_decay_without_nonlinearity() {
        // κ only enters through the a†²b terms; a tiny κ leaves ⟨a⟩ = e^{−γt}.
        let p = ModelParams::new(1e-300, 1.0, 1.0, c(0.0, 0.0)).unwrap();
        let d = dims(15, 4);
        let rho = coherent_density(c(1.0, 0.0), c(0.0, 0.0), d).unwrap();
        let states = evolve(&rho, &p, 1e-3, 1000, 250).unwrap();
        for (t, r) in &states {
            assert!((r.expect_a().re - (-t).exp()).abs() < 1e-10, "t = {t}");
        }
    }

    #[test]
    fn truncation_breach_is_reported() {
        let p = ModelParams::symmetric(1.0, 1.0, 3.0).unwrap();
        let rho = DensityMatrix::vacuum(dims(4, 3));
        let err = evolve(&rho, &p, 1e-3, 2000, 100).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }), "{err}");
        assert!(err.to_string().contains("increase the oracle dims"));
    }

    #[test]
    fn evolution_is_linear() {
        let d = dims(6, 4);
        let p = ModelParams::reference();
        let r1 = random_hermitian(d, 1);
        let r2 = random_hermitian(d, 2);
        let mix = &r1 * c(0.3, 0.0) + &r2 * c(0.7, 0.0);
        let run = |m: DMatrix<Complex64>| {
            evolve_unchecked(&DensityMatrix::from_matrix(d, m).unwrap(), &p, 1e-3, 200, 200)
                .unwrap()
                .pop()
                .unwrap()
                .1
                .matrix
        };
        let lhs = run(mix);
        let rhs = run(r1) * c(0.3, 0.0) + run(r2) * c(0.7, 0.0);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn first_moment_follows_the_drift() {
        let d = dims(20, 14);
        let p = ModelParams::reference();
        let rho = coherent_density(c(1.0, 0.0), c(0.8, 0.0), d).unwrap();
        let dt = 1e-3;
        let states = evolve_unchecked(&rho, &p, dt, 400, 1).unwrap();
        for k in [50, 200, 399] {
            let fd = (states[k + 1].1.expect_a() - states[k - 1].1.expect_a()) / (2.0 * dt);
            let r = &states[k].1;
            let drift = -p.gamma1() * r.expect_a() + p.kappa() * r.expect_adag_b();
            assert!((fd - drift).norm() < 1e-5, "k = {k}: {fd} vs {drift}");
        }
    }

    #[test]
    fn parity_flip_negates_the_quadrature() {
        let d = dims(10, 7);
        let p = ModelParams::reference();
        let run = |a0: f64| {
            let rho = coherent_density(c(a0, 0.0), c(0.5, 0.0), d).unwrap();
            evolve_unchecked(&rho, &p, 1e-3, 300, 100)
                .unwrap()
                .iter()
                .map(|(_, r)| expectation_xa(r).unwrap())
                .collect::<Vec<_>>()
        };
        for (x, y) in run(0.7).iter().zip(run(-0.7)) {
            assert!((x + y).abs() < 1e-10, "{x} vs {y}");
        }
    }

    #[test]
    fn halving_dt_leaves_the_trace_fixed() {
        let d = dims(8, 6);
        let p = ModelParams::reference();
        let rho = coherent_density(c(0.5, 0.0), c(0.5, 0.0), d).unwrap();
        let coarse = evolve_unchecked(&rho, &p, 2e-3, 250, 250).unwrap().pop().unwrap().1;
        let fine = evolve_unchecked(&rho, &p, 1e-3, 500, 500).unwrap().pop().unwrap().1;
        assert!((coarse.trace() - c(1.0, 0.0)).norm() < 1e-12);
        assert!((coarse.matrix() - fine.matrix()).norm() < 1e-9);
        assert!(coarse.min_eigenvalue() > -1e-10);
    }

    #[test]
    fn oracle_series_rejects_incommensurate_grid() {
        let p = ModelParams::reference();
        let cfg = OracleConfig::default();
        assert!(oracle_series(&p, c(1.0, 0.0), c(1.0, 0.0), &cfg, 1.0, 0.00125).is_err());
        assert!(oracle_series(&p, c(1.0, 0.0), c(1.0, 0.0), &cfg, 1.0, 0.0).is_err());
    }
}
