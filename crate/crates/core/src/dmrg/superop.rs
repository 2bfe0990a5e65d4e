use ndarray::{Array2, Array3, Array4};
use serde::{Deserialize, Serialize};

use crate::error::{config, FqcpError, Result};
use crate::linalg;
use crate::model::{Chain, ModelParams};
use crate::mpo::{one_site_superop, two_site_superop, TRACE_VEC};
use crate::mps::TensorTrain;
use crate::schedule::{period_schedule, Layer};
use crate::C64;

pub const DEFAULT_D_O: usize = 256;
/// Relative discarded weight allowed per bond after each layer product
/// (1e-12 in Frobenius amplitude).
pub const COMPRESSION_TOL: f64 = 1e-24;
/// Largest accumulated relative discarded weight before the build is rejected.
pub const RESIDUAL_FLOOR: f64 = 1e-8;
/// Largest chain whose superoperator can be expanded to a dense matrix.
pub const DENSE_MPO_CAP: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperopOptions {
    pub d_o: usize,
    pub rel_tol: f64,
    pub residual_floor: f64,
}

impl Default for SuperopOptions {
    fn default() -> Self {
        Self {
            d_o: DEFAULT_D_O,
            rel_tol: COMPRESSION_TOL,
            residual_floor: RESIDUAL_FLOOR,
        }
    }
}

/// One Floquet period as a matrix-product superoperator. The physical index of
/// each site is 4·out + in, with out/in the vectorized index 2·ket + bra.
#[derive(Clone, Debug)]
pub struct SuperoperatorMpo {
    pub params: ModelParams,
    pub train: TensorTrain,
    pub d_o_cap: usize,
    /// 1 − Π(1 − discarded) over all layer compressions.
    pub residual: f64,
}

fn lift_out(s: &Array2<C64>) -> Array2<C64> {
    Array2::from_shape_fn((16, 16), |(m, n)| {
        if m % 4 == n % 4 {
            s[[m / 4, n / 4]]
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Operator-Schmidt factors of a two-site superoperator: G = Σ_k A_k ⊗ B_k with
/// A as (1, 4, 4, k) and B as (k, 4, 4, 1) over (bond, out, in, bond).
fn gate_factors(g: &Array2<C64>) -> Result<(Array4<C64>, Array4<C64>)> {
    let m = Array2::from_shape_fn((16, 16), |(l, r)| g[[4 * (l / 4) + r / 4, 4 * (l % 4) + r % 4]]);
    let svd = linalg::svd(&m)?;
    let cut = svd.s[0] * 1e-13;
    let k = svd.s.iter().take_while(|&&x| x > cut).count().max(1);
    let a = Array4::from_shape_fn((1, 4, 4, k), |(_, o, i, x)| svd.u[[4 * o + i, x]] * svd.s[x].sqrt());
    let b = Array4::from_shape_fn((k, 4, 4, 1), |(x, o, i, _)| svd.vt[[x, 4 * o + i]] * svd.s[x].sqrt());
    Ok((a, b))
}

/// W'[(x,a), o', i, (y,b)] = Σ_o X[x, o', o, y] W[a, o, i, b].
fn apply_site_operator(w: &Array3<C64>, x: &Array4<C64>) -> Array3<C64> {
    let (dl, _, dr) = w.dim();
    let (xl, _, _, xr) = x.dim();
    let wf = w
        .view()
        .into_shape_with_order((dl, 4, 4, dr))
        .unwrap()
        .permuted_axes([1, 0, 2, 3])
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((4, dl * 4 * dr))
        .unwrap();
    let xf = x
        .view()
        .permuted_axes([0, 1, 3, 2])
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((xl * 4 * xr, 4))
        .unwrap();
    xf.dot(&wf)
        .into_shape_with_order((xl, 4, xr, dl, 4, dr))
        .unwrap()
        .permuted_axes([0, 3, 1, 4, 2, 5])
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((xl * dl, 16, xr * dr))
        .unwrap()
}

pub fn build_superoperator(params: &ModelParams, l: usize, d_o: usize) -> Result<SuperoperatorMpo> {
    build_superoperator_with(params, l, SuperopOptions { d_o, ..Default::default() })
}

pub fn build_superoperator_with(params: &ModelParams, l: usize, opts: SuperopOptions) -> Result<SuperoperatorMpo> {
    if l < 2 {
        return config("the superoperator needs at least two sites");
    }
    if opts.d_o == 0 {
        return config("D_O must be at least 1");
    }
    params.validate()?;
    let chain = Chain::open(l);
    let identity: Vec<C64> = (0..16)
        .map(|m| C64::new(if m / 4 == m % 4 { 1.0 } else { 0.0 }, 0.0))
        .collect();
    let mut train = TensorTrain::product(&vec![identity; l]);
    let mut fidelity = 1.0;
    let reset = (params.p() > 0.0).then(|| lift_out(&one_site_superop(&params.kraus())));
    for layer in &period_schedule(params, chain).layers {
        match layer {
            Layer::Resets(sites) => {
                let Some(s) = &reset else { continue };
                for r in sites {
                    let j = chain.index(*r).expect("reset inside chain");
                    train.apply_local(j, s);
                }
            }
            Layer::Gates(gates) => {
                for g in gates {
                    let j = chain.index(g.left()).expect("gate inside chain");
                    let (a, b) = gate_factors(&two_site_superop(&g.matrix_lr(params.theta)))?;
                    train.tensors[j] = apply_site_operator(&train.tensors[j], &a);
                    train.tensors[j + 1] = apply_site_operator(&train.tensors[j + 1], &b);
                }
                fidelity *= train.compress(opts.d_o, opts.rel_tol)?;
            }
        }
    }
    let residual = 1.0 - fidelity;
    if residual > opts.residual_floor {
        return Err(FqcpError::Compression {
            residual,
            floor: opts.residual_floor,
        });
    }
    Ok(SuperoperatorMpo {
        params: params.clone(),
        train,
        d_o_cap: opts.d_o,
        residual,
    })
}

impl SuperoperatorMpo {
    pub fn len(&self) -> usize {
        self.train.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train.is_empty()
    }

    pub fn max_bond(&self) -> usize {
        self.train.max_bond()
    }

    /// Site tensor as (D_left, out, in, D_right).
    pub fn site(&self, j: usize) -> Array4<C64> {
        let (dl, _, dr) = self.train.tensors[j].dim();
        self.train.tensors[j]
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((dl, 4, 4, dr))
            .unwrap()
    }

    /// Dense 4^L × 4^L matrix in the per-site μ = 2·ket + bra basis, leftmost site most significant.
    pub fn to_dense(&self) -> Result<Array2<C64>> {
        let l = self.len();
        if l > DENSE_MPO_CAP {
            return Err(FqcpError::Resource(format!(
                "dense superoperator on {l} sites exceeds {DENSE_MPO_CAP}"
            )));
        }
        let flat = self.train.to_dense();
        let dim = 1usize << (2 * l);
        let mut e = Array2::<C64>::zeros((dim, dim));
        for (idx, v) in flat.iter().enumerate() {
            let (mut row, mut col) = (0, 0);
            for j in 0..l {
                let mu = (idx >> (4 * (l - 1 - j))) & 15;
                row = row * 4 + mu / 4;
                col = col * 4 + mu % 4;
            }
            e[[row, col]] = *v;
        }
        Ok(e)
    }

    /// ‖⟨⟨I|E − ⟨⟨I|‖ in the Frobenius norm.
    pub fn left_identity_defect(&self) -> Result<f64> {
        let contracted: Vec<Array3<C64>> = self
            .train
            .tensors
            .iter()
            .map(|w| {
                let (dl, _, dr) = w.dim();
                Array3::from_shape_fn((dl, 4, dr), |(a, i, b)| {
                    (0..4).map(|o| TRACE_VEC[o] * w[[a, 4 * o + i, b]]).sum()
                })
            })
            .collect();
        let left = TensorTrain {
            tensors: contracted,
            center: 0,
            d: 4,
        };
        let identity = TensorTrain::product(&vec![TRACE_VEC.to_vec(); self.len()]);
        let mut diff = left.difference(&identity);
        diff.canonicalize(0)?;
        Ok(diff.norm_sqr().sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use crate::oracle::{dense_superoperator, spectrum_by_real_part};
    use std::f64::consts::PI;

    #[test]
    fn matches_dense_oracle() {
        for (theta, p) in [(0.75 * PI, 0.3), (PI, 0.4), (1.1, 0.0), (2.0, 1.0)] {
            let params = ModelParams::new(theta, p).unwrap();
            for l in 2..=4 {
                let mpo = build_superoperator(&params, l, DEFAULT_D_O).unwrap();
                let dense = dense_superoperator(&params, l).unwrap();
                let diff = max_abs_diff(&mpo.to_dense().unwrap(), &dense);
                assert!(diff < 1e-10, "θ={theta} p={p} L={l}: {diff:e}");
                assert!(mpo.residual < 1e-12);
            }
        }
    }

    #[test]
    fn trace_preserving() {
        for l in [2, 3, 7] {
            for p in [0.0, 0.3944, 1.0] {
                let mpo = build_superoperator(&ModelParams::new(0.75 * PI, p).unwrap(), l, DEFAULT_D_O).unwrap();
                let defect = mpo.left_identity_defect().unwrap();
                assert!(defect < 1e-10, "L={l} p={p}: {defect:e}");
            }
        }
    }

    #[test]
    fn unitary_spectrum_on_unit_circle() {
        let params = ModelParams::new(0.75 * PI, 0.0).unwrap();
        for l in 2..=3 {
            let e = build_superoperator(&params, l, DEFAULT_D_O).unwrap().to_dense().unwrap();
            for v in spectrum_by_real_part(&e).unwrap() {
                assert!((v.norm() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn tight_cap_is_reported() {
        let params = ModelParams::new(0.75 * PI, 0.3).unwrap();
        match build_superoperator(&params, 6, 2) {
            Err(FqcpError::Compression { residual, floor }) => assert!(residual > floor),
            other => panic!("expected a compression error, got {:?}", other.map(|m| m.residual)),
        }
    }

    #[test]
    fn short_chain_rejected() {
        let params = ModelParams::new(0.75 * PI, 0.3).unwrap();
        assert!(build_superoperator(&params, 1, DEFAULT_D_O).is_err());
    }
}
