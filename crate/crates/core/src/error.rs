use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    /// A caller broke a documented precondition (grid mismatch, conjugation
    /// constraint, too few samples).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("trajectory diverged")]
    Diverged,

    #[error("all {n_traj} trajectories diverged before t = {t:.6}")]
    AllDiverged { n_traj: u64, t: f64 },

    #[error("optimizer did not converge after {iterations} iterations (last iterate p = {p}, s = {s}, |grad| = {grad_norm:e})")]
    NoConvergence {
        iterations: usize,
        p: f64,
        s: f64,
        grad_norm: f64,
    },

    #[error("Fock truncation breached at t = {t:.4}: cutoff population {population:e} (P(n_a = {top_a}) = {pop_a:e}, P(n_b = {top_b}) = {pop_b:e}); increase the oracle dims")]
    Truncation {
        t: f64,
        population: f64,
        pop_a: f64,
        pop_b: f64,
        top_a: usize,
        top_b: usize,
    },

    #[error("density matrix lost Hermiticity: {0}")]
    Hermiticity(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
