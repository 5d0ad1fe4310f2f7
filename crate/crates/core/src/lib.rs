//! Asymptotic secret-key-rate bounds for decoy-state BB84 with two
//! modulator-free transmitters: a fully passive post-selection source and an
//! optical-injection-locking (OIL) source. Both are analysed in the presence
//! of residual leakage pulses from a finite-extinction-ratio intensity
//! modulator.
//!
//! The pipeline runs bottom-up through the modules:
//!
//! * [`linalg`] dense Hermitian eigendecomposition, PSD square roots, fidelity
//! * [`mode_basis`] n-photon Fock bases over several optical modes
//! * [`passive`] post-selected passive-source states via region quadrature
//! * [`oil`] OIL-source states per (bit, basis, intensity) setting
//! * [`bounds`] quantum-coin functions, tangent linearisations, fidelity bounds
//! * [`lp`] dense simplex solver and the yield / bit-error estimation programs
//! * [`channel`] simulated observables and LP reference points
//! * [`keyrate`] key-rate assembly, optimisation and sweeps
//! * [`report`] CSV and JSON serialisation of key-rate reports
//! * [`validation`] independent oracles used by the `validate` command

pub mod bounds;
pub mod channel;
pub mod error;
pub mod keyrate;
pub mod linalg;
pub mod lp;
pub mod mode_basis;
pub mod oil;
pub mod par;
pub mod passive;
pub mod report;
pub mod types;
pub mod validation;

pub use error::{Error, Result};
pub use linalg::{HermitianMatrix, C64};
