//! Transfer functions sampled on a uniform unit-circle grid: evaluation,
//! norms, inner products and causal projection.

mod grid;
mod ops;
mod transfer;

pub use grid::{FrequencyGrid, GridSamples};
pub use ops::{
    adjoint, anticausal_energy_fraction, causal_projection, causal_projection_checked, fir_projection, fir_truncation,
    h2_norm_sq, inner_product, l1_norm, wraparound_energy_fraction, ALIASING_TOLERANCE,
};
pub use transfer::{evaluate_on_grid, is_min_phase, TransferFunction, SINGULAR_DENOMINATOR};
