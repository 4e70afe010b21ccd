//! Two-tone Floquet quantum sensing.
//!
//! The crate is organised as a pipeline:
//!
//! * [`opspace`] — qudit and two-mode operator algebra, phase/number transforms;
//! * [`floquet`] — classical two-tone propagators, quasienergy bands, power operators
//!   and the model gallery;
//! * [`lattice`] — quantized drives in the phase-lattice picture, functional power
//!   operators and path-entangled state (PES) generation;
//! * [`fock`] — the full quantized model on a truncated two-mode Fock space;
//! * [`metrology`] — quantum Fisher information, the P²\[f\] window, the path-entanglement
//!   witness and ancilla-phase optimisation;
//! * [`readout`] — parity readout, sensitivity scaling and the critical-point classifier;
//! * [`channels`] — photon loss, Bayesian prior uncertainty and noise.
//!
//! Units: ħ = 1, energies in units of the qudit splitting ω₀ unless stated otherwise,
//! times in units of the common drive period T_com where an API says so.

pub mod channels;
pub mod error;
pub mod fit;
pub mod floquet;
pub mod fock;
pub mod lattice;
pub mod linalg;
pub mod metrology;
pub mod opspace;
pub mod readout;

pub use error::{Error, Result};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use num_complex::Complex64 as C64;

/// Dense complex matrix used for qudit operators and small density matrices.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;
