//! Construction of Best Complex Antipodal Spherical Codes (BCASCs) and their
//! evaluation as compressive-sensing measurement matrices.
//!
//! A spherical code here is an `m x n` complex matrix with unit-norm columns.
//! Codes are built by a damped fixed-point iteration of repulsive forces in
//! which every complex phase rotation of a codeword acts as an antipodal copy.
//! The force on each codeword is restricted to its nearest rotations, found
//! with a k-d tree over the rotations packed into `R^{2m}`, which brings the
//! per-iteration cost down from quadratic to roughly linear in `n`.
//!
//! The crate is `no_std` (it needs `alloc`). The default `std` feature adds
//! wall-clock timing to construction traces; `parallel` evaluates the
//! per-codeword forces with rayon.
//!
//! ```
//! use bcasc_core::{bounds, codes, constructor::{construct, ConstructionConfig}};
//!
//! let initial = codes::random_spherical_code(4, 5, 1).unwrap();
//! let config = ConstructionConfig { tau_max: 200, nu_max: 64, ..Default::default() };
//! let (code, _trace) = construct(&config, &initial).unwrap();
//! let mu = codes::coherence(&code).unwrap().mu;
//! assert!(mu >= bounds::composite_bound_complex(4, 5).value - 1e-9);
//! ```

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod ann;
pub mod bounds;
pub mod codes;
pub mod constructor;
pub mod cs;
pub mod ensembles;
mod error;
pub mod forces;
mod math;
pub mod seed;

pub use num_complex::Complex64;

pub use error::{Error, Result};
