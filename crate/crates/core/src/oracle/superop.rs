use ndarray::Array2;

use super::dense::DenseDensity;
use crate::error::{FqcpError, Result};
use crate::linalg;
use crate::model::{Chain, ModelParams};
use crate::schedule::period_schedule;
use crate::C64;

/// Largest chain for the dense superoperator (dimension 4^L).
pub const SUPEROP_SITE_CAP: usize = 5;

/// Index of |ket⟩⟨bra| in the per-site interleaved basis μ_i = 2·ket_i + bra_i,
/// leftmost site most significant.
pub fn interleaved_index(l: usize, ket: usize, bra: usize) -> usize {
    (0..l).fold(0, |acc, i| {
        let shift = l - 1 - i;
        acc * 4 + 2 * ((ket >> shift) & 1) + ((bra >> shift) & 1)
    })
}

/// One-period channel as a dense 4^L matrix, built column by column by
/// evolving each operator basis element |s⟩⟨s'|.
pub fn dense_superoperator(params: &ModelParams, l: usize) -> Result<Array2<C64>> {
    if l == 0 || l > SUPEROP_SITE_CAP {
        return Err(FqcpError::Resource(format!(
            "dense superoperator on {l} sites outside 1..={SUPEROP_SITE_CAP}"
        )));
    }
    let chain = Chain::open(l);
    let schedule = period_schedule(params, chain);
    let dim = 1usize << l;
    let mut e = Array2::<C64>::zeros((dim * dim, dim * dim));
    for ket in 0..dim {
        for bra in 0..dim {
            let mut basis = Array2::<C64>::zeros((dim, dim));
            basis[[ket, bra]] = C64::new(1.0, 0.0);
            let mut state = DenseDensity::from_matrix(chain, &basis)?;
            for layer in &schedule.layers {
                state.apply_layer(layer, params);
            }
            let col = interleaved_index(l, ket, bra);
            for k2 in 0..dim {
                for b2 in 0..dim {
                    e[[interleaved_index(l, k2, b2), col]] = state.rho[k2 * dim + b2];
                }
            }
        }
    }
    Ok(e)
}

/// Leading eigenvalues of a dense superoperator ordered by descending real part.
pub fn spectrum_by_real_part(e: &Array2<C64>) -> Result<Vec<C64>> {
    let mut vals = linalg::eigvals(e)?.to_vec();
    vals.sort_by(|a, b| b.re.total_cmp(&a.re));
    Ok(vals)
}

/// (ε₀, ε₁): logs of the two eigenvalues with largest real part.
pub fn slowest_exponents(e: &Array2<C64>) -> Result<(C64, C64)> {
    let vals = spectrum_by_real_part(e)?;
    Ok((vals[0].ln(), vals[1].ln()))
}
