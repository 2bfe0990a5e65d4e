use std::f64::consts::TAU;

use ndarray::Array2;

use super::kernels::{apply_two, flat4};
use crate::error::{config, FqcpError, Result};
use crate::linalg;
use crate::model::{gate_matrix, Chain, ModelParams};
use crate::schedule::{period_schedule, Layer};
use crate::C64;

/// Largest chain for the one-period unitary.
pub const UNITARY_SITE_CAP: usize = 12;

/// Unitary of one Floquet period (two time steps) at p = 0 on an open chain of `l` sites.
pub fn floquet_unitary(params: &ModelParams, l: usize) -> Result<Array2<C64>> {
    if params.p() != 0.0 {
        return config("the Floquet unitary is defined only at p = 0");
    }
    if l == 0 || l > UNITARY_SITE_CAP {
        return Err(FqcpError::Resource(format!(
            "unitary on {l} sites outside 1..={UNITARY_SITE_CAP}"
        )));
    }
    if l % 2 == 1 {
        log::warn!("odd chain length {l}: reflection symmetry contaminates level statistics");
    }
    let chain = Chain::open(l);
    let dim = 1usize << l;
    // rows of the identity as a 2L-bit register; gates act on the row (high) bits
    let mut u: Vec<C64> = linalg::identity(dim).iter().copied().collect();
    for layer in &period_schedule(params, chain).layers {
        if let Layer::Gates(gates) = layer {
            for g in gates {
                let f = flat4(&gate_matrix(g.axis, params.theta));
                let (c, t) = (chain.index(g.control).unwrap(), chain.index(g.target).unwrap());
                apply_two(&mut u, 2 * l, c, t, &f);
            }
        }
    }
    Ok(Array2::from_shape_vec((dim, dim), u).unwrap())
}

/// Quasienergies −arg λ mapped to [0, 2π), ascending.
pub fn eigenphases(u: &Array2<C64>) -> Result<Vec<f64>> {
    let mut phases: Vec<f64> = linalg::eigvals(u)?
        .iter()
        .map(|l| (-l.arg()).rem_euclid(TAU))
        .map(|x| if x >= TAU { 0.0 } else { x })
        .collect();
    phases.sort_by(f64::total_cmp);
    Ok(phases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn two_site_classical_unitary() {
        let params = ModelParams::classical_point(0.0).unwrap();
        let u = floquet_unitary(&params, 2).unwrap();
        let uu = linalg::dagger(&u).dot(&u);
        assert!(linalg::max_abs_diff(&uu, &linalg::identity(4)) < 1e-14);
        // every column is a single basis state up to phase
        for j in 0..4 {
            let nz = (0..4).filter(|&i| u[[i, j]].norm() > 1e-12).count();
            assert_eq!(nz, 1);
            assert!(u.column(j).iter().any(|x| (x.norm() - 1.0).abs() < 1e-14));
        }
    }

    #[test]
    fn unitarity_generic() {
        let params = ModelParams::new(0.75 * PI, 0.0).unwrap();
        let u = floquet_unitary(&params, 6).unwrap();
        let uu = linalg::dagger(&u).dot(&u);
        assert!(linalg::max_abs_diff(&uu, &linalg::identity(64)) < 1e-12);
        let phases = eigenphases(&u).unwrap();
        assert_eq!(phases.len(), 64);
        assert!(phases.iter().all(|x| (0.0..TAU).contains(x)));
    }

    #[test]
    fn requires_zero_reset() {
        let params = ModelParams::new(1.0, 0.1).unwrap();
        assert!(floquet_unitary(&params, 4).is_err());
    }
}
