//! Truncated Fock-space numerics for a driven optomechanical cavity with a
//! Kerr medium.
//!
//! The crate is `no_std` and only needs an allocator. It provides
//!
//! * [`fock`]: dense operators and states on one or two truncated bosonic
//!   modes, spectral propagation and partial traces,
//! * [`specfun`]: Laguerre polynomials, the terminating Tricomi function and
//!   matrix elements of the displacement operator,
//! * [`hamiltonians`]: the optomechanical Hamiltonian, its polaron-displaced
//!   form, the ion-laser-like and sideband interactions and the coupled
//!   oscillator limit,
//! * [`dynamics`]: closed-form coherent-state evolution and the numeric
//!   propagation paths used to check it,
//! * [`phase_space`]: Husimi-Q grids, normalization and peak finding.
//!
//! All frequencies are measured in units of the mechanical frequency.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod dynamics;
pub mod error;
pub mod fock;
pub mod hamiltonians;
pub mod phase_space;
pub mod specfun;

pub use error::{Error, Result};

/// Complex double used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);
