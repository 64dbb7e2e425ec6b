//! Analytical PI tuning for first-order-plus-dead-time (FOTD) plants.
//!
//! Constraining `kp = T ki` reduces the closed loop to
//! `K ki e^{-sL} / (s + K ki e^{-sL})`, whose dominant poles are given by
//! the Lambert W function of `-gamma/e` with `gamma = K ki e L`. Choosing
//! `gamma = 1` gives a critically damped, overshoot-free loop; larger values
//! trade overshoot for speed.
//!
//! ```
//! use fotd_lambert::{gains_from_gamma, FotdPlant};
//!
//! let plant = FotdPlant::new(1.0, 1.0, 1.0).unwrap();
//! let gains = gains_from_gamma(&plant, 1.0).unwrap();
//! assert!((gains.ki - 0.3679).abs() < 1e-4);
//! assert_eq!(gains.kp, gains.ki);
//! ```

// negated float comparisons double as NaN rejection
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod lambertw;
pub mod metrics;
pub mod model;
pub mod simulator;
pub mod tuner;

pub use error::{Error, Result};
pub use lambertw::{
    lambert_w, lambert_w_real, lambert_w_residual, Branch, ComplexValue, BRANCH_POINT,
};
pub use metrics::{evaluate, peak_overshoot, settling_time, Overshoot, ResponseMetrics, Settling};
pub use model::{
    characteristic_residual, classify_damping, closed_loop_poles, gains_from_gamma,
    gamma_from_gains, Damping, FotdPlant, GammaSpec, PiGains, PolePair,
};
pub use simulator::{
    method_of_steps_reference, simulate, simulate_general, simulate_reduced, LoopForm, SimConfig,
    StepResponse,
};
pub use tuner::{
    chr_compare, sweep, tune_no_overshoot, tune_target_overshoot, ChrComparison, SweepRow,
    TunerOptions, TuningReport, TuningSpec,
};

/// Version of the CSV/JSON output layouts.
pub const SCHEMA_VERSION: &str = "1";
