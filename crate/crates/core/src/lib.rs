//! Equivariant representation learning for group actions with nontrivial
//! stabilizers.
//!
//! The encoder maps each datapoint to a set of `N` group elements (a candidate
//! coset of its stabilizer) plus a unit orbit embedding. Training combines a
//! Chamfer equivariance loss, a head-dispersion penalty and a contrastive
//! orbit loss; no reconstruction is involved.

pub mod encoder;
pub mod evaluation;
pub mod group;
pub mod oracle;
mod scalar;
pub mod set_metrics;
pub mod synthetic;
pub mod training;

pub use scalar::Scalar;

/// Random stream used everywhere a seed is accepted.
pub type RandomStream = rand_chacha::ChaCha8Rng;

/// Deterministic stream from a seed.
pub fn random_stream(seed: u64) -> RandomStream {
    <RandomStream as rand::SeedableRng>::seed_from_u64(seed)
}

pub type GroupElementF64 = group::GroupElement<f64>;
pub type GroupElementF32 = group::GroupElement<f32>;
pub type GroupSetF64 = group::GroupSet<f64>;
pub type GroupSetF32 = group::GroupSet<f32>;
