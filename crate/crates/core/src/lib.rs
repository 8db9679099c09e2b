//! Stationary scattering of a flying spin-1/2 qubit off a register of static
//! spin-1/2 qubits terminated by a perfect mirror.
//!
//! The crate is organised bottom-up:
//!
//! * [`spin_algebra`]: spin operators on the product space, singlet/triplet
//!   projectors, SWAP unitaries, Racah 6j coefficients and coupled bases.
//! * [`amplitudes`]: closed-form barrier and mirror amplitudes, the design
//!   curves `g̃(kd)` and `h(kd)`, and operator-valued composition of scatterers.
//! * [`solver`]: brute-force multichannel matching for matrix-valued delta
//!   barriers, used as the ground truth for every closed form.
//! * [`protocol`]: register designs that implement a selective SWAP between
//!   the flying qubit and one static qubit, and their verification.
//! * [`robustness`]: positional disorder and finite-bandwidth averaging.
//!
//! All quantities are dimensionless: distances enter as optical distances
//! `k·d`, couplings as `g = G/k`. Qubit 0 is the flying qubit; static qubits
//! are numbered `1..=N` starting from the one closest to the mirror.

pub mod amplitudes;
pub mod error;
pub mod linalg;
pub mod protocol;
pub mod robustness;
pub mod solver;
pub mod spin_algebra;

pub use error::{Error, Result};
pub use linalg::CMatrix;
