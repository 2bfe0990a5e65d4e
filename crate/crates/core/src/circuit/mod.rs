//! Compiler from a single-seed FQCP run to a conditional instruction stream.
//!
//! Lattice sites are mapped onto a recycled qubit pool by a list scheduler;
//! gates controlled by a qubit known to be |0⟩ are skipped at run time using
//! the `z` bits, reset channels draw their random bits from an ancilla
//! prologue, and controlled rotations are lowered to RZZ plus single-qubit
//! gates, optionally folded for zero-noise extrapolation.

pub mod emit;
pub mod interp;
pub mod ir;
pub mod resources;
pub mod text;

pub use emit::{
    decompose_controlled_rotation, emit, fold_rzz, qubit_count, schedule_cone, Allocation, ConeOp, EmitOptions,
    NativeGate, QubitSchedule, ScheduledOp, Wire, DEFAULT_FULL_CONE_BUDGET, DEFAULT_REUSE_THRESHOLD,
};
pub use interp::{
    conditional_totals, run, run_control_flow, run_state_vector, single_qubit_matrix, two_qubit_matrix,
    ProductState, QubitBackend, Shot, StateVector,
};
pub use ir::{
    BitExpr, BitRef, Instruction, InstructionCounts, Program, ProgramMeta, Register, SingleQubitKind, SiteReadout,
    TwoQubitKind,
};
pub use resources::{control_flow_stats, resource_stats, resource_stats_with, ResourceStats};
pub use text::parse_program;
