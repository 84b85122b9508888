//! Simulation of heterodyne-detected nonlinear optical signals for small
//! ensembles of few-level molecules.
//!
//! The crate computes, in both time and frequency domains:
//!
//! * the additive semi-classical **baseline** signal (each molecule responds
//!   independently to the classical pulses, orders 1–3), and
//! * the leading **vacuum-mediated interaction (2VMI)** corrections, in which
//!   one molecule's response is relayed to another through two interactions
//!   with the vacuum field: the first-order correction built from two linear
//!   responses coupled by the retarded dipole–dipole tensor, the second-order
//!   **local-field** correction (one second-order and one first-order
//!   response), and the third-order **cascading** correction (two second-order
//!   responses).
//!
//! Molecules are few-level systems with diagonal Hamiltonians, pairwise
//! dephasing rates and (generally complex) transition dipoles; their dynamics
//! are handled in Liouville space where the dissipative evolution is diagonal.
//! Pulses are Gaussian with carrier frequency, width, arrival time, wavevector
//! direction and polarization. Units: ħ = 1, angular frequencies throughout,
//! the speed of light is a scenario parameter (default 1).
//!
//! Module map:
//!
//! * [`core_model`] — molecular models, Liouville-space superoperators,
//!   resolvent and propagator.
//! * [`response`] — bare and time-ordered response functions (linear through
//!   third order) in time and frequency representations.
//! * [`fields`] — Gaussian pulses: time/frequency envelopes, spatial phases.
//! * [`geometry`] — retarded and static dipole–dipole coupling tensors,
//!   lattice constructions, phase-matching sums.
//! * [`diagrams`] — enumeration, counting and classification of the two-vacuum
//!   interaction diagrams.
//! * [`signals`] — assembly of baseline and 2VMI signals over scan grids,
//!   effective (relayed) fields, scaling probes.
//! * [`cli_io`] — TOML run configuration (strict schema), presets, CSV/JSON
//!   grid output.
//! * [`quad`] — complex adaptive quadrature, the complex scaled complementary
//!   error function, and closed-form Gaussian×exponential integrals.
//! * [`linalg`] — small dense complex solves used by the resolvent.

// Validation deliberately writes `!(x > 0.0)` so that NaN fails alongside
// nonpositive values; a `partial_cmp` rewrite would hide that intent.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops over small fixed ranges mirror the tensor/mode notation used
// in the module docs (d[nu][nup], out[i][j]); iterator chains over two
// parallel 3×3 arrays obscure the i↔j symmetry the code relies on.
#![allow(clippy::needless_range_loop)]

pub mod cli_io;
pub mod core_model;
pub mod diagrams;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod linalg;
pub mod quad;
pub mod response;
pub mod signals;

pub use error::VmiError;

/// Convenience alias used throughout the crate.
pub type Complex64 = num_complex::Complex<f64>;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, VmiError>;
