//! # pecs-core
//!
//! Analysis and simulation library for photon emission correlation
//! spectroscopy (PECS) of quantum emitters.
//!
//! The crate covers the full desk-side pipeline:
//!
//! - [`timetag`]: ingest two-channel time-tagged photon streams (TTAG1
//!   binary or CSV) into validated [`timetag::AcquisitionRecord`]s.
//! - [`correlator`]: compute normalized cross-correlations g²(τ) with
//!   Poisson uncertainties on linear or logarithmic delay axes, intensity
//!   traces, and intensity-thresholded blinking partitions.
//! - [`corrections`]: background correction via the signal fraction ρ and
//!   detector-jitter handling through IRF convolution.
//! - [`fitting`]: weighted multi-exponential fits of g²(τ) with AIC-based
//!   model selection.
//! - [`dynamics`]: n-level rate models covering steady states, eigenrates,
//!   ODE propagation, simulated g²(τ), spin- and power-dependent model
//!   templates, and Gillespie photon-stream synthesis.
//! - [`waiting_time`]: analytic and numerical waiting-time distributions
//!   and the convolution-series reconstruction of g² from W.

pub mod conv;
pub mod corrections;
pub mod correlator;
pub mod dynamics;
pub mod fitting;
pub mod timetag;
pub mod waiting_time;

pub(crate) mod levmar;
