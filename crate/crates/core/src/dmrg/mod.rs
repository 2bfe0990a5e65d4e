//! Open-system DMRG for the slowest decay mode of the Floquet channel.
//!
//! The channel of one period is a matrix-product superoperator over the
//! vectorized index μ = 2·ket + bra. The trace-preserving left fixed point ⟨⟨I|
//! is deflated, so the dominant eigenvalue of the modified operator is the
//! slowest decay mode.

mod eigen;
mod scaling;
mod superop;
mod sweep;

pub use eigen::{
    dense_from_map, largest_real_arnoldi, largest_real_dense, select_largest_real, ArnoldiOptions, LocalEigen,
};
pub use scaling::{finite_size_critical, rl_ratio, FiniteSizeOutcome};
pub use superop::{
    build_superoperator, build_superoperator_with, SuperopOptions, SuperoperatorMpo, COMPRESSION_TOL,
    DEFAULT_D_O, DENSE_MPO_CAP, RESIDUAL_FLOOR,
};
pub use sweep::{exponent_and_tau, quasi_steady_state, DmrgOptions, GapResult, VectorizedMps};
