//! Random streams, standardized complex Gaussians, the third-order σ noises
//! and the statistical instruments that verify them.

mod cumulants;
mod rng;
mod sigma;

pub use cumulants::{
    analytic_target, empirical_cumulants, gaussian_cumulant_table, monomials,
    sigma_cumulant_table, CumulantEntry, CumulantTable, Monomial, RawMoments, JACKKNIFE_BLOCKS,
    MIN_CUMULANT_SAMPLES,
};
pub use rng::RngStream;
pub use sigma::{
    draw_sigma, hubbard_stratonovich_check, numerical_sigma_params, optimal_sigma_params,
    sigma_objective, SigmaDraw, SigmaParams, MEAN_ABS_XI,
};
