//! Critical-point estimators and post-processing.

mod bst;
mod collapse;
pub(crate) mod crossing;
mod exponent;
mod levels;
mod zne;

pub use bst::{
    bst_extrapolate, bst_prefix_table, bst_scan, bst_scan_on, omega_grid, BstExtrapolation,
    BstPrefixRow, BstResult, BST_EXACT_FLOOR, BST_REG_EPS, OMEGA_GRID_POINTS, OMEGA_MAX, OMEGA_MIN,
};
pub use collapse::{collapse_residual, scaling_collapse, CollapseRow, TimeProfile};
pub use crossing::{
    crossing_sequence, find_crossings, CrossingOptions, CrossingOutcome, CrossingPoint,
    QUANTUM_MAX_BRACKET,
};
pub use exponent::{effective_exponent, EffectiveExponentCurve, ExponentPoint};
pub use levels::{level_spacing_ratio, LevelStats, DEGENERATE_GAP};
pub use zne::{bootstrap_stderr, zne_combine, zne_combine_estimates, Estimate};
