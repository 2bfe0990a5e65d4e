//! Brute-force dense references used to validate the scalable engines.

pub mod dense;
pub mod floquet;
pub mod kernels;
pub mod superop;
pub mod trajectory;

pub use dense::{dense_channel_evolve, local_superop, DenseDensity, DenseEvolution};
pub use floquet::{eigenphases, floquet_unitary};
pub use superop::{dense_superoperator, interleaved_index, slowest_exponents, spectrum_by_real_part, SUPEROP_SITE_CAP};
pub use trajectory::{trajectory_run, trajectory_run_on, DenseVector};
