//! Exact density-operator simulation of quantum-repeater building blocks.
//!
//! The crate is organized around a small linear-algebra core ([`state`])
//! that carries every quantum state as an explicit complex density matrix,
//! plus the physics layers built on top of it:
//!
//! - [`source`]: the spin-photon entangled-pair source of a charged quantum
//!   dot in a Voigt-geometry field, with timing-resolution and depolarization
//!   imperfections.
//! - [`optics`]: fiber transmission, propagation delay, and the midpoint
//!   beamsplitter Bell-state measurement with its Monte Carlo herald model.
//! - [`network`]: memory decay, entanglement swapping, purification, and the
//!   discrete-event link/chain simulators.
//! - [`tomography`]: coincidence-count simulation, direct and
//!   maximum-likelihood density-matrix reconstruction, and bootstrap
//!   uncertainty.
//!
//! All registers use the little-endian qubit convention: qubit 0 is the
//! least significant bit of a basis index, and `tensor_product(a, b)` puts
//! `a` in the high bits. Every operation is a pure function over immutable
//! values; stochastic operations take an explicit RNG handle.

pub mod network;
pub mod optics;
pub mod source;
pub mod state;
pub mod tomography;

mod error;

pub use error::{Error, Result};

/// Derives an independent stream seed from a master seed.
///
/// Workers, replicas, and bootstrap resamples each get
/// `derive_seed(master, index)` so that results are reproducible and
/// independent of how work is partitioned.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    // SplitMix64 finalizer over the (master, index) pair.
    let mut z = master ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
