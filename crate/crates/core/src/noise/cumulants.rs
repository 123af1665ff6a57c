//! Joint cumulants (up to third order) of the four σ components, with block
//! jackknife standard errors.
//!
//! Only products of the variables themselves enter; complex conjugates never
//! do, matching how the σ's appear in the stepping equations.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{draw_sigma, RngStream, SigmaParams};
use crate::error::{Error, Result};

pub const JACKKNIFE_BLOCKS: usize = 100;
pub const MIN_CUMULANT_SAMPLES: usize = 10_000;

const LABELS: [&str; 4] = ["s1", "s1d", "s2", "s2d"];

/// Sorted multiset of component indices (0 = σ₁, 1 = σ₁†, 2 = σ₂, 3 = σ₂†).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial(Vec<u8>);

impl Monomial {
    pub fn new(mut idx: Vec<u8>) -> Self {
        idx.sort_unstable();
        Monomial(idx)
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn indices(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|&i| LABELS[i as usize]).collect();
        f.write_str(&names.join("*"))
    }
}

/// All monomials of order 1..=max_order in canonical order.
pub fn monomials(max_order: usize) -> Vec<Monomial> {
    let mut out = Vec::new();
    for i in 0..4u8 {
        out.push(Monomial(vec![i]));
    }
    if max_order >= 2 {
        for i in 0..4u8 {
            for j in i..4 {
                out.push(Monomial(vec![i, j]));
            }
        }
    }
    if max_order >= 3 {
        for i in 0..4u8 {
            for j in i..4 {
                for k in j..4 {
                    out.push(Monomial(vec![i, j, k]));
                }
            }
        }
    }
    out
}

/// Analytic cumulant of the σ tuple: −κ/4 for σ₁σ₁σ₂† and σ₁†σ₁†σ₂, zero
/// otherwise.
pub fn analytic_target(m: &Monomial, kappa: f64) -> Complex64 {
    match m.indices() {
        [0, 0, 3] | [1, 1, 2] => Complex64::new(-kappa / 4.0, 0.0),
        _ => Complex64::default(),
    }
}

fn position(idx: &[u8]) -> usize {
    // Offsets follow the enumeration order of `monomials`.
    match idx {
        [i] => *i as usize,
        [i, j] => {
            let (i, j) = (*i as usize, *j as usize);
            4 + (0..i).map(|a| 4 - a).sum::<usize>() + (j - i)
        }
        [i, j, k] => {
            let (i, j, k) = (*i as usize, *j as usize, *k as usize);
            let tri = |n: usize| n * (n + 1) / 2;
            let before_i: usize = (0..i).map(|a| tri(4 - a)).sum();
            let before_j: usize = (i..j).map(|b| 4 - b).sum();
            14 + before_i + before_j + (k - j)
        }
        _ => unreachable!("orders above 3 are not tracked"),
    }
}

/// Raw (uncentred) moment sums of one sample block.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMoments {
    max_order: usize,
    n: u64,
    sums: Vec<Complex64>,
}

impl RawMoments {
    pub fn new(max_order: usize) -> Result<Self> {
        if !(1..=3).contains(&max_order) {
            return Err(Error::InvalidParameter(format!(
                "max_order must be 1, 2 or 3, got {max_order}"
            )));
        }
        Ok(RawMoments {
            max_order,
            n: 0,
            sums: vec![Complex64::default(); monomials(max_order).len()],
        })
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn push(&mut self, x: &[Complex64; 4]) {
        self.n += 1;
        let s = &mut self.sums;
        for i in 0..4 {
            s[i] += x[i];
        }
        if self.max_order < 2 {
            return;
        }
        let mut k2 = 4;
        let mut k3 = 14;
        for i in 0..4 {
            for j in i..4 {
                let xij = x[i] * x[j];
                s[k2] += xij;
                k2 += 1;
                if self.max_order >= 3 {
                    // third-order entries with leading pair (i, j)
                    for xk in &x[j..4] {
                        s[k3] += xij * xk;
                        k3 += 1;
                    }
                }
            }
        }
    }

    pub fn merge(&mut self, other: &RawMoments) -> Result<()> {
        if self.max_order != other.max_order {
            return Err(Error::Contract("cannot merge moment blocks of different order".into()));
        }
        self.n += other.n;
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
        Ok(())
    }

    fn subtract(&self, other: &RawMoments) -> RawMoments {
        RawMoments {
            max_order: self.max_order,
            n: self.n - other.n,
            sums: self.sums.iter().zip(&other.sums).map(|(a, b)| a - b).collect(),
        }
    }

    /// Cumulants from the normalized moments, in `monomials` order.
    fn cumulants(&self) -> Vec<Complex64> {
        let n = self.n as f64;
        let m: Vec<Complex64> = self.sums.iter().map(|s| s / n).collect();
        monomials(self.max_order)
            .iter()
            .map(|mono| match *mono.indices() {
                [i] => m[position(&[i])],
                [i, j] => m[position(&[i, j])] - m[position(&[i])] * m[position(&[j])],
                [i, j, k] => {
                    let m1 = |a: u8| m[position(&[a])];
                    let m2 = |a: u8, b: u8| m[position(&[a, b])];
                    m[position(&[i, j, k])] - m2(i, j) * m1(k) - m2(i, k) * m1(j) - m2(j, k) * m1(i)
                        + 2.0 * m1(i) * m1(j) * m1(k)
                }
                _ => unreachable!(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CumulantEntry {
    pub monomial: Monomial,
    pub value: Complex64,
    /// Jackknife standard errors of the real and imaginary parts.
    pub se_re: f64,
    pub se_im: f64,
}

impl CumulantEntry {
    /// Largest of the real/imaginary deviations from `target`, in units of
    /// the respective standard error.
    pub fn z_score(&self, target: Complex64) -> f64 {
        let z = |d: f64, se: f64| {
            if se > 0.0 {
                d.abs() / se
            } else if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        };
        z(self.value.re - target.re, self.se_re).max(z(self.value.im - target.im, self.se_im))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CumulantTable {
    pub n_samples: u64,
    pub entries: Vec<CumulantEntry>,
}

impl CumulantTable {
    /// Point estimates from the pooled blocks, standard errors by
    /// leave-one-block-out jackknife.
    pub fn from_blocks(blocks: &[RawMoments]) -> Result<Self> {
        if blocks.len() < 2 {
            return Err(Error::Contract("jackknife needs at least two blocks".into()));
        }
        let mut total = blocks[0].clone();
        for b in &blocks[1..] {
            total.merge(b)?;
        }
        if (total.n as usize) < MIN_CUMULANT_SAMPLES {
            return Err(Error::Contract(format!(
                "need at least {MIN_CUMULANT_SAMPLES} samples, got {}",
                total.n
            )));
        }
        if blocks.iter().any(|b| b.is_empty()) {
            return Err(Error::Contract("empty jackknife block".into()));
        }
        let full = total.cumulants();
        let loo: Vec<Vec<Complex64>> = blocks.iter().map(|b| total.subtract(b).cumulants()).collect();
        let nb = blocks.len() as f64;
        let entries = monomials(total.max_order)
            .into_iter()
            .enumerate()
            .map(|(k, monomial)| {
                let mean: Complex64 = loo.iter().map(|c| c[k]).sum::<Complex64>() / nb;
                let (mut vr, mut vi) = (0.0, 0.0);
                for c in &loo {
                    vr += (c[k].re - mean.re).powi(2);
                    vi += (c[k].im - mean.im).powi(2);
                }
                let f = (nb - 1.0) / nb;
                CumulantEntry {
                    monomial,
                    value: full[k],
                    se_re: (f * vr).sqrt(),
                    se_im: (f * vi).sqrt(),
                }
            })
            .collect();
        Ok(CumulantTable {
            n_samples: total.n,
            entries,
        })
    }

    pub fn get(&self, m: &Monomial) -> Option<&CumulantEntry> {
        self.entries.iter().find(|e| &e.monomial == m)
    }

    /// Largest z-score against the analytic σ targets for coupling `kappa`.
    pub fn max_z_against_targets(&self, kappa: f64) -> f64 {
        self.entries
            .iter()
            .map(|e| e.z_score(analytic_target(&e.monomial, kappa)))
            .fold(0.0, f64::max)
    }
}

/// Cumulant table of a stored sample, split into [`JACKKNIFE_BLOCKS`]
/// contiguous blocks.
pub fn empirical_cumulants(samples: &[[Complex64; 4]], max_order: usize) -> Result<CumulantTable> {
    if samples.len() < MIN_CUMULANT_SAMPLES {
        return Err(Error::Contract(format!(
            "need at least {MIN_CUMULANT_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    let n = samples.len();
    let blocks = (0..JACKKNIFE_BLOCKS)
        .map(|b| {
            let lo = b * n / JACKKNIFE_BLOCKS;
            let hi = (b + 1) * n / JACKKNIFE_BLOCKS;
            let mut m = RawMoments::new(max_order)?;
            for x in &samples[lo..hi] {
                m.push(x);
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    CumulantTable::from_blocks(&blocks)
}

fn streamed_table(
    n_samples: u64,
    seed: u64,
    draw: impl Fn(&mut RngStream) -> [Complex64; 4] + Sync,
) -> Result<CumulantTable> {
    if (n_samples as usize) < MIN_CUMULANT_SAMPLES {
        return Err(Error::Contract(format!(
            "need at least {MIN_CUMULANT_SAMPLES} samples, got {n_samples}"
        )));
    }
    let nb = JACKKNIFE_BLOCKS as u64;
    let blocks: Vec<RawMoments> = (0..nb)
        .into_par_iter()
        .map(|b| {
            let size = (b + 1) * n_samples / nb - b * n_samples / nb;
            let mut stream = RngStream::new(seed, b);
            let mut m = RawMoments::new(3).expect("order 3 is supported");
            for _ in 0..size {
                m.push(&draw(&mut stream));
            }
            m
        })
        .collect();
    CumulantTable::from_blocks(&blocks)
}

/// Streams `n_samples` σ tuples (one random stream per jackknife block) into
/// an order-3 cumulant table without storing them.
pub fn sigma_cumulant_table(sp: &SigmaParams, n_samples: u64, seed: u64) -> Result<CumulantTable> {
    sp.validate()?;
    streamed_table(n_samples, seed, |s| draw_sigma(sp, s).as_array())
}

/// Same as [`sigma_cumulant_table`] for four independent standardized
/// complex Gaussians, whose third cumulants vanish.
pub fn gaussian_cumulant_table(n_samples: u64, seed: u64) -> Result<CumulantTable> {
    streamed_table(n_samples, seed, |s| {
        [
            s.complex_gaussian(),
            s.complex_gaussian(),
            s.complex_gaussian(),
            s.complex_gaussian(),
        ]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_enumeration_and_positions_agree() {
        let all = monomials(3);
        assert_eq!(all.len(), 34);
        for (k, m) in all.iter().enumerate() {
            assert_eq!(position(m.indices()), k, "{m}");
        }
        assert_eq!(monomials(1).len(), 4);
        assert_eq!(monomials(2).len(), 14);
        assert_eq!(Monomial::new(vec![3, 0, 0]).to_string(), "s1*s1*s2d");
    }

    #[test]
    fn targets() {
        assert_eq!(analytic_target(&Monomial::new(vec![0, 0, 3]), 1.0).re, -0.25);
        assert_eq!(analytic_target(&Monomial::new(vec![2, 1, 1]), 2.0).re, -0.5);
        assert_eq!(analytic_target(&Monomial::new(vec![0, 0, 2]), 1.0).re, 0.0);
        let nonzero = monomials(3)
            .iter()
            .filter(|m| analytic_target(m, 1.0) != Complex64::default())
            .count();
        assert_eq!(nonzero, 2);
    }

    /// Direct two-pass evaluation of central moments, used as the oracle for
    /// the raw-moment cumulant formulas.
    fn centred_third(samples: &[[Complex64; 4]], i: usize, j: usize, k: usize) -> Complex64 {
        let n = samples.len() as f64;
        let mean = |a: usize| samples.iter().map(|x| x[a]).sum::<Complex64>() / n;
        let (mi, mj, mk) = (mean(i), mean(j), mean(k));
        samples.iter().map(|x| (x[i] - mi) * (x[j] - mj) * (x[k] - mk)).sum::<Complex64>() / n
    }

    #[test]
    fn third_cumulant_equals_third_central_moment() {
        let mut s = RngStream::new(5, 0);
        let samples: Vec<[Complex64; 4]> = (0..20_000)
            .map(|_| {
                let a = s.complex_gaussian();
                let b = s.complex_gaussian();
                [a + 0.3, a * a + b, b * Complex64::new(0.0, 1.0), a * b * b]
            })
            .collect();
        let t = empirical_cumulants(&samples, 3).unwrap();
        for (i, j, k) in [(0, 0, 0), (0, 1, 2), (1, 1, 3), (2, 3, 3)] {
            let m = Monomial::new(vec![i as u8, j as u8, k as u8]);
            let got = t.get(&m).unwrap().value;
            let want = centred_third(&samples, i, j, k);
            assert!((got - want).norm() < 1e-10 * (1.0 + want.norm()), "{m}: {got} vs {want}");
        }
    }

    #[test]
    fn constant_input_has_no_fluctuation_cumulants() {
        let cst = [
            Complex64::new(0.5, -1.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(0.0, 0.25),
            Complex64::new(-3.0, 1.0),
        ];
        let t = empirical_cumulants(&vec![cst; 10_000], 3).unwrap();
        for e in &t.entries {
            if e.monomial.order() == 1 {
                let want = cst[e.monomial.indices()[0] as usize];
                assert!((e.value - want).norm() < 1e-12);
            } else {
                assert!(e.value.norm() < 1e-11, "{}: {}", e.monomial, e.value);
            }
        }
    }

    #[test]
    fn too_few_samples_rejected() {
        let x = [Complex64::default(); 4];
        assert!(empirical_cumulants(&vec![x; 9_999], 3).is_err());
        assert!(RawMoments::new(4).is_err());
        assert!(sigma_cumulant_table(&super::super::optimal_sigma_params(1.0, 1.0).unwrap(), 100, 0).is_err());
    }

    #[test]
    fn gaussian_third_cumulants_vanish() {
        let t = gaussian_cumulant_table(400_000, 3).unwrap();
        for e in t.entries.iter().filter(|e| e.monomial.order() == 3) {
            assert!(e.z_score(Complex64::default()) < 5.0, "{}", e.monomial);
        }
    }

    #[test]
    fn block_streaming_is_reproducible() {
        let sp = super::super::optimal_sigma_params(1.0, 0.33).unwrap();
        let a = sigma_cumulant_table(&sp, 20_000, 9).unwrap();
        let b = sigma_cumulant_table(&sp, 20_000, 9).unwrap();
        assert_eq!(a, b);
    }
}
