//! Simulation and analysis of the one-dimensional Floquet quantum contact process.
//!
//! Engines: a sparse Markov-chain sampler for the classical point (`classical`),
//! dense reference oracles (`oracle`), matrix-product-operator dynamics (`mpo`)
//! and open-system DMRG for the dissipative gap (`dmrg`). `analysis` holds the
//! critical-point estimators and `circuit` compiles the model into a
//! conditional, qubit-reusing instruction stream.

pub mod analysis;
pub mod circuit;
pub mod classical;
pub mod dmrg;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod mpo;
pub mod mps;
pub mod observables;
pub mod oracle;
pub mod rng;
pub mod schedule;
pub mod series;
pub mod stats;

pub use error::{FqcpError, Result};
pub use model::{
    Axis, AxisAssignment, Chain, ChannelVariant, DpConstants, InitialState, ModelParams,
    Probability, RotationVariant,
};
pub use observables::ObservableSnapshot;
pub use schedule::{build_schedule, GateOp, Layer, LayerSchedule};
pub use series::{ObservableSeries, SeriesPoint};

pub use num_complex::Complex64 as C64;
