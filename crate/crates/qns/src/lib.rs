//! Band-limited quantum noise spectroscopy toolkit.
//!
//! This crate implements an end-to-end pipeline for characterizing classical
//! noise acting on a driven qubit sensor:
//!
//! * [`dpss`] — discrete prolate spheroidal sequences (Slepian tapers), their
//!   concentration eigenvalues and frequency-domain waveforms;
//! * [`waveforms`] — control-waveform synthesis: plain and cosine-shifted
//!   Slepian drives, finite-difference modulation, finite-difference with
//!   embedded decoupling, CPMG trains, rotary spin echoes, and pulsed Slepian
//!   sequences;
//! * [`filters`] — numeric and closed-form filter functions describing the
//!   sensor's frequency response in the dephasing and amplitude quadratures;
//! * [`noise`] — target power spectral densities and stationary Gaussian-model
//!   noise realizations synthesized from them;
//! * [`simulator`] — exact toggling-frame propagation and first-order
//!   error-vector estimates, three-axis tomography with optional shot noise;
//! * [`reconstruction`] — spectrum estimators: single-taper, multitaper,
//!   two-stage Bayesian, simultaneous multi-axis, frequency-comb inversion,
//!   and n-pulse estimation;
//! * [`cli`] — configuration-driven experiment runner behind the `qns` binary.
//!
//! Frequencies are handled in rad/s internally. All text I/O (CLI
//! configuration and output files) uses Hz; the conversion factor is `2*PI` at
//! every boundary and is noted where it happens.

pub mod cli;
pub mod dpss;
pub mod filters;
pub mod noise;
pub mod reconstruction;
pub mod simulator;
pub mod waveforms;

pub use dpss::{compute_dpss, evaluate_dpswf, DpssParams, DpssSet, Dpswf};
pub use waveforms::{DriveProfile, PulseSequence, RotationAngle, Waveform};
