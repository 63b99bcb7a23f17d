//! Log-concave density estimation with an optional mode constraint.
//!
//! The crate computes the unconstrained and the mode-constrained maximum
//! likelihood estimators of a log-concave density, certifies them against
//! their integrated distribution-function characterizations, and simulates the
//! Gaussian limit problem that describes their local behaviour.

mod active_set;
pub mod augment;
pub mod characterization;
pub mod error;
pub mod kernels;
pub mod limit;
pub mod linalg;
pub mod mle;
pub mod oracle;
pub mod processes;
pub mod pwl;
pub mod quad;
pub mod sample;
pub mod simulate;
pub mod stats;

pub use augment::{augment, AugmentedSample};
pub use characterization::{
    crossing_diagnostics, interlacing_windows, verify_constrained, verify_unconstrained,
    CharacterizationReport, CrossingDiagnostics, CrossingKind,
};
pub use error::{Error, Result};
pub use kernels::j_value;
pub use limit::{
    check_constrained, check_unconstrained, invelope_constrained, invelope_unconstrained,
    limit_constants, limit_distribution_experiment, refine_halving, simulate_driver, DriverPath,
    LimitCheck, LimitConstants, LimitFit, LimitOptions, LimitSamples,
};
pub use mle::{fit_constrained, fit_unconstrained, lr_from_fits, lr_statistic, Fit, SolverOptions};
pub use oracle::{fit_exact_small, OracleResult};
pub use processes::{lr_processes, LrRow, Processes};
pub use pwl::{KnotClass, ModeConstraint, PwlConcave};
pub use sample::SortedSample;
pub use simulate::{
    figure_panels, hellinger, rate_experiment, sample_density, Metric, PanelTable, RateReport,
    TrueDensity,
};
