use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Per-trajectory random stream keyed by `(seed, stream_id)`.
///
/// The seed selects the ChaCha key and the stream id selects the ChaCha
/// stream, so every pair gives an independent, bit-reproducible sequence
/// regardless of which worker consumes it.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Real standard normal.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform on [0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }

    /// Standardized complex Gaussian ξ = (u + iv)/√2 with density
    /// e^{−|ξ|²}/π: E[ξ] = E[ξ²] = 0, E[|ξ|²] = 1.
    #[inline]
    pub fn complex_gaussian(&mut self) -> Complex64 {
        let u = self.normal();
        let v = self.normal();
        Complex64::new(u, v) * std::f64::consts::FRAC_1_SQRT_2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_gaussian_moments() {
        let mut s = RngStream::new(7, 0);
        let n = 1_000_000;
        let (mut m1, mut m2, mut m_abs2) = (Complex64::default(), Complex64::default(), 0.0);
        for _ in 0..n {
            let z = s.complex_gaussian();
            m1 += z;
            m2 += z * z;
            m_abs2 += z.norm_sqr();
        }
        let n = n as f64;
        assert!((m1 / n).norm() < 4e-3);
        assert!((m2 / n).norm() < 4e-3);
        assert!((m_abs2 / n - 1.0).abs() < 4e-3);
    }

    #[test]
    fn same_key_reproduces_bit_for_bit() {
        let mut a = RngStream::new(42, 9);
        let mut b = RngStream::new(42, 9);
        for _ in 0..1000 {
            assert_eq!(a.complex_gaussian(), b.complex_gaussian());
        }
    }

    #[test]
    fn distinct_streams_are_uncorrelated() {
        let n = 200_000;
        let mut a = RngStream::new(42, 0);
        let mut b = RngStream::new(42, 1);
        let mut c = RngStream::new(43, 0);
        let (mut ab, mut ac) = (0.0, 0.0);
        for _ in 0..n {
            let x = a.normal();
            ab += x * b.normal();
            ac += x * c.normal();
        }
        // Correlation SE is 1/sqrt(n) ≈ 2.2e-3.
        assert!((ab / n as f64).abs() < 1.2e-2);
        assert!((ac / n as f64).abs() < 1.2e-2);
    }
}
