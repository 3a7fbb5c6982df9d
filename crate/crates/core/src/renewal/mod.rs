//! Ladder variables, renewal sums, the Lindley chain and the constants `κ`.

pub mod cdf;
pub mod kappa;
pub mod ladder;
pub mod lindley;

pub use cdf::{wasserstein_1, EmpiricalCdf};
pub use kappa::{kappa_hat, kappa_hat_from_heights, kappa_hat_with_cap, kappa_tilde, second_moment_ratio, KappaHat, KappaTilde};
pub use ladder::{ladder_samples, LadderBatch, LadderDirection, LadderMode, LadderSample, DEFAULT_EPOCH_CAP};
pub use lindley::{
    asymptote_fit, kappa_hat_one, kappa_hat_two, lindley_cdf_renewal, lindley_occupation, lindley_step, m_gamma_exact,
    m_gamma_functional, patched_measure, AsymptoteFit, FitWindow, MGamma, PatchedMeasure, RenewalCdf,
};
