//! Harness around the [`pknn`] crate: CSV ingestion, k-fold cross-validation
//! benchmarks, posterior density dumps and density comparisons. The `pknn`
//! binary in this crate exposes all of it on the command line.

pub mod bench;
pub mod compare;
pub mod cv;
mod error;
pub mod io;
pub mod posterior;

pub use error::HarnessError;

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Derive a sub-seed from a base seed and two indices (splitmix64 finalizer);
/// used to give every fold/chain its own reproducible RNG stream.
pub fn mix_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut x = base
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}
