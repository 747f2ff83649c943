//! EM-test for homogeneity in two-component location-scale mixtures.
//!
//! The crate fits penalized two-component mixtures of a location-scale
//! kernel (logistic, extreme-value, Student-t or normal), computes the EM-test
//! statistic, calibrates it against its limiting law (a simulated
//! nonstandard law or chi-square with two degrees of freedom, depending on
//! the kernel's score geometry), and provides a penalized likelihood ratio
//! baseline together with size, power and tuning experiments.
//!
//! Numerical routines are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what the tolerances in
//! this crate are tuned for.

pub mod calibration;
pub mod em;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod lrt;
pub mod mixture;
pub mod null_fit;
pub mod optim;
pub mod penalty;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod stats;

pub use calibration::{critical_value, limit_draw, limit_law_for, p_value, simulate_limit, LimitLaw};
pub use em::{em_fit, em_statistic, m_step_alpha, EmConfig, EmFit, EmTestResult, PiTrack};
pub use error::{Error, Result};
pub use experiment::{
    discrepancy, fit_tuning_model, model_e4, model_l1, power_experiment, published_design, type1_experiment,
    DesignRow, ExperimentSpec, TuningModel,
};
pub use geometry::{classify_limit, score_covariance, CaseTag, LimitCase, ScoreMatrices};
pub use kernel::{Family, Kernel, ScoreVector, Theta};
pub use lrt::{bootstrap_null, fit_full_penalized, lrt_statistic, LrtConfig, LrtResult, NullStatistic};
pub use mixture::{e_step, MixingDistribution};
pub use null_fit::{fit_null, fit_null_with, NullFit};
pub use penalty::{a_n_formula, p_alpha, p_sigma, PenaltyConfig, TuningConstant};
pub use scalar::Real;

pub type Theta64 = Theta<f64>;
pub type Theta32 = Theta<f32>;
pub type Mixing64 = MixingDistribution<f64>;
pub type Mixing32 = MixingDistribution<f32>;
pub type NullFit64 = NullFit<f64>;
pub type ScoreMatrices64 = ScoreMatrices<f64>;
pub type PenaltyConfig64 = PenaltyConfig<f64>;
pub type EmTestResult64 = EmTestResult<f64>;
pub type EmFit64 = EmFit<f64>;
pub type LrtResult64 = LrtResult<f64>;
