//! Diffusion coefficients from dynamics, and the closed-form predictors
//! they are compared against.

mod collapse;
mod fit;
mod green_kubo;
mod laws;
pub mod quad;

pub use collapse::{collapse_integral_d, collapse_integral_fn, WaitingTime, MAX_TAIL_FRACTION};
pub use fit::{
    default_window, fit_diffusion, fit_power_law, linear_fit, power_law_fit, DiffusionMethod,
    DiffusionResult, LinearFit, PowerLaw, EXPONENT_TOLERANCE, MIN_FIT_SAMPLES, MIN_R_SQ,
};
pub use green_kubo::{green_kubo_d, GreenKubo, MAX_SITES as GREEN_KUBO_MAX_SITES};
pub use laws::{
    ballistic_dephased_variance, fibonacci_analytic_d, generalized_exp_integral, limit_d, naive_law,
    universal_law, upper_incomplete_gamma, Regime, UniversalPoint, UNIVERSAL_CSV_HEADER,
};
