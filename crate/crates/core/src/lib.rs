//! Numerical engine for a fixed-frequency three-transmon processor with two
//! tunable couplers.
//!
//! The crate models one concrete device family end to end:
//!
//! * [`circuit`] — capacitance-network reduction and transmon quantization,
//!   turning a capacitance/Josephson description into bare mode parameters;
//! * [`model`] — Hamiltonian builders for the full five-mode circuit, the
//!   coupler-eliminated three-mode effective model, and an eight-dimensional
//!   two-level reference model, plus the effective-parameter dressing;
//! * [`perturbation`] — closed-form dispersive shifts (second and third
//!   order) with resonance guards;
//! * [`spectrum`] — exact diagonalization, dressed-state labeling, and
//!   numerically exact shifts;
//! * [`pulse`] — Gaussian/DRAG drive signals and coupler bias schedules;
//! * [`dynamics`] — adaptive propagation of the driven Schrödinger equation
//!   and computational-subspace unitary extraction;
//! * [`fidelity`] — i-Toffoli target, idle-phase corrections, and process
//!   fidelity;
//! * [`calibration`] — restarted Nelder–Mead pulse calibration;
//! * [`sweep`] — parallel parameter sweeps with per-point error isolation.
//!
//! Frequencies are angular (rad/ns) inside the crate and linear GHz at the
//! serialization boundary; see [`units`].

pub mod calibration;
pub mod circuit;
pub mod dynamics;
pub mod error;
pub mod fidelity;
pub mod hilbert;
pub mod linalg;
pub mod model;
pub mod perturbation;
pub mod pulse;
pub mod spectrum;
pub mod sweep;
pub mod units;

pub use error::{Error, Result};
pub use hilbert::{C64, ModeLayout};
