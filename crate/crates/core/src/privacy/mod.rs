//! Gaussian-DP accounting, (ε, δ) conversion, Gaussian-mechanism calibration
//! and a composition ledger.

mod gdp;
mod ledger;
mod mechanism;

pub use gdp::{
    calibrate_rho, eps_for_delta, gdp_of_dpsgd, gdp_to_eps_delta, mu_for_eps_delta, normal_cdf, GdpParam,
    ASYMPTOTIC_MIN_ITERATIONS,
};
pub use ledger::{
    ledger_compose, BudgetFraction, CompositionRule, EpsDelta, LedgerEntry, Mechanism, PrivacyLedger, PrivacyParams,
    PrivacyReport, RuleBreakdown,
};
pub use mechanism::{gaussian_mechanism_sigma, warm_start_noise_std};
