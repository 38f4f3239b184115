//! Kernel calibration errors and calibration tests for probabilistic
//! predictive models.
//!
//! A model is calibrated when the conditional law of the target given the
//! prediction equals the prediction itself. The squared kernel calibration
//! error (SKCE) measures the distance between the joint laws of
//! `(prediction, target)` and `(prediction, sample from the prediction)` in
//! a reproducing kernel Hilbert space. This crate provides
//!
//! * predictive-distribution families and transport distances between them
//!   ([`distributions`]),
//! * tensor-product kernels with analytic expectations and the `h` function
//!   ([`kernels`]),
//! * plug-in, block, and U-statistic SKCE estimators and the UCME
//!   ([`estimators`]),
//! * calibration tests ([`hypothesis`]),
//! * classical diagnostics such as ECE and quantile curves ([`metrics`]),
//! * synthetic benchmark scenarios ([`synthetic`]), and
//! * the line-delimited dataset format ([`io`]).

pub mod distributions;
pub mod error;
pub mod estimators;
pub mod hypothesis;
pub mod io;
pub mod kernels;
pub mod metrics;
pub mod rng;
pub mod special;
pub mod synthetic;

pub use distributions::{
    mixture_wasserstein, wasserstein2, Categorical, DiagNormal, Family, Laplace, Mixture,
    Prediction, Target, Temperature, TruncatedCountable,
};
pub use error::{Error, Result};
pub use estimators::{Dataset, EstimateReport, EstimatorKind, TestLocations};
pub use hypothesis::{BlockVariance, TestMethod, TestReport};
pub use kernels::{ExpectationMode, KernelSpec, PredictionKernel, PredictionMetric, TargetKernel};
