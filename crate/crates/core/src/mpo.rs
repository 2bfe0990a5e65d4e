//! Density-matrix evolution as a matrix product operator.
//!
//! ρ is stored as a tensor train over the per-site index μ = 2·ket + bra, so a
//! unitary U acts as U ⊗ U* and a channel as Σ K ⊗ K*.

use ndarray::{Array1, Array2, Axis as NdAxis};
use serde::{Deserialize, Serialize};

use crate::error::{config, FqcpError, Result};
use crate::linalg;
use crate::model::{completeness_defect, Chain, InitialState, ModelParams};
use crate::mps::{transfer, TensorTrain};
use crate::observables::{ObservableSnapshot, RawObservables};
use crate::schedule::{build_schedule, Layer};
use crate::C64;

const O: C64 = C64 { re: 0.0, im: 0.0 };
const I: C64 = C64 { re: 1.0, im: 0.0 };
/// ⟨⟨𝟙| on one site.
pub const TRACE_VEC: [C64; 4] = [I, O, O, I];
/// ⟨⟨n| = |1⟩⟨1| on one site.
pub const ACTIVE_VEC: [C64; 4] = [O, O, O, I];
/// ⟨⟨0| = |0⟩⟨0| on one site.
pub const ZERO_VEC: [C64; 4] = [I, O, O, O];
/// μ = 2s + s' ↦ 2s' + s.
const SWAP_KET_BRA: [usize; 4] = [0, 2, 1, 3];

/// Singular values below this are always discarded.
pub const SVD_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackedObservable {
    TotalActive,
    Survival,
}

/// Cumulative truncation error of a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TruncationLedger {
    pub delta_l2: f64,
    pub delta_n: Option<f64>,
    pub delta_p: Option<f64>,
    pub svd_count: usize,
}

impl TruncationLedger {
    pub fn tracking(tracked: &[TrackedObservable]) -> Self {
        Self {
            delta_n: tracked.contains(&TrackedObservable::TotalActive).then_some(0.0),
            delta_p: tracked.contains(&TrackedObservable::Survival).then_some(0.0),
            ..Default::default()
        }
    }
}

/// Local superoperator of a 4×4 two-site unitary in the (μ_left, μ_right) basis.
pub fn two_site_superop(u: &Array2<C64>) -> Array2<C64> {
    let mut s = Array2::<C64>::zeros((16, 16));
    for m in 0..16 {
        let (ml, mr) = (m / 4, m % 4);
        let (ket_out, bra_out) = (2 * (ml / 2) + mr / 2, 2 * (ml % 2) + mr % 2);
        for n in 0..16 {
            let (nl, nr) = (n / 4, n % 4);
            let (ket_in, bra_in) = (2 * (nl / 2) + nr / 2, 2 * (nl % 2) + nr % 2);
            s[[m, n]] = u[[ket_out, ket_in]] * u[[bra_out, bra_in]].conj();
        }
    }
    s
}

/// Σ_k K ⊗ K* as a 4×4 matrix on μ = 2·ket + bra.
pub fn one_site_superop(kraus: &[Array2<C64>]) -> Array2<C64> {
    let flat = crate::oracle::local_superop(kraus);
    Array2::from_shape_fn((4, 4), |(i, j)| flat[4 * i + j])
}

#[derive(Clone, Debug)]
pub struct MpoState {
    pub train: TensorTrain,
    pub chain: Chain,
    pub bond_cap: usize,
    pub ledger: TruncationLedger,
}

/// Product MPO of |bits⟩⟨bits| on `chain`.
pub fn mpo_from_bitstring(chain: Chain, bits: &[bool], bond_cap: usize) -> Result<MpoState> {
    if bits.is_empty() || bits.len() != chain.len {
        return config("bitstring must be non-empty and match the chain length");
    }
    if bond_cap == 0 {
        return config("bond dimension must be at least 1");
    }
    let vectors: Vec<Vec<C64>> = bits
        .iter()
        .map(|&b| if b { ACTIVE_VEC.to_vec() } else { ZERO_VEC.to_vec() })
        .collect();
    Ok(MpoState {
        train: TensorTrain::product(&vectors),
        chain,
        bond_cap,
        ledger: TruncationLedger::tracking(&[
            TrackedObservable::TotalActive,
            TrackedObservable::Survival,
        ]),
    })
}

/// Left environments: trace, and trace with one ⟨⟨n| inserted anywhere.
fn left_envs(train: &TensorTrain, upto: usize) -> (Array1<C64>, Array1<C64>) {
    let mut tr = Array1::from_elem(1, I);
    let mut n = Array1::from_elem(1, O);
    for a in &train.tensors[..upto] {
        let te = transfer(a, &TRACE_VEC);
        n = n.dot(&te) + tr.dot(&transfer(a, &ACTIVE_VEC));
        tr = tr.dot(&te);
    }
    (tr, n)
}

fn right_envs(train: &TensorTrain, from: usize) -> (Array1<C64>, Array1<C64>) {
    let mut tr = Array1::from_elem(1, I);
    let mut n = Array1::from_elem(1, O);
    for a in train.tensors[from..].iter().rev() {
        let te = transfer(a, &TRACE_VEC);
        n = te.dot(&n) + transfer(a, &ACTIVE_VEC).dot(&tr);
        tr = te.dot(&tr);
    }
    (tr, n)
}

/// Σ_{μν} v_μ w_ν θ[:, μ, ν, :].
fn block_transfer(theta: &ndarray::Array4<C64>, v: &[C64; 4], w: &[C64; 4]) -> Array2<C64> {
    let (dl, _, _, dr) = theta.dim();
    let mut out = Array2::<C64>::zeros((dl, dr));
    for mu in 0..4 {
        for nu in 0..4 {
            let c = v[mu] * w[nu];
            if c != O {
                out.scaled_add(c, &theta.index_axis(NdAxis(1), mu).index_axis(NdAxis(1), nu));
            }
        }
    }
    out
}

struct BlockEnvs {
    lt: Array1<C64>,
    ln: Array1<C64>,
    lz: Array1<C64>,
    rt: Array1<C64>,
    rn: Array1<C64>,
    rz: Array1<C64>,
}

impl BlockEnvs {
    fn new(train: &TensorTrain, j: usize) -> Self {
        let (lt, ln) = left_envs(train, j);
        let (rt, rn) = right_envs(train, j + 2);
        Self {
            lz: train.left_env(j, |_| &ZERO_VEC),
            rz: train.right_env(j + 2, |_| &ZERO_VEC),
            lt,
            ln,
            rt,
            rn,
        }
    }

    /// (N, P) of the whole chain with `theta` on the block.
    fn observables(&self, theta: &ndarray::Array4<C64>) -> (f64, f64) {
        let tee = block_transfer(theta, &TRACE_VEC, &TRACE_VEC);
        let tr = self.lt.dot(&tee).dot(&self.rt);
        let inner = block_transfer(theta, &ACTIVE_VEC, &TRACE_VEC)
            + block_transfer(theta, &TRACE_VEC, &ACTIVE_VEC);
        let n = self.ln.dot(&tee).dot(&self.rt)
            + self.lt.dot(&inner).dot(&self.rt)
            + self.lt.dot(&tee).dot(&self.rn);
        let zero = self
            .lz
            .dot(&block_transfer(theta, &ZERO_VEC, &ZERO_VEC))
            .dot(&self.rz);
        ((n / tr).re, ((tr - zero) / tr).re)
    }
}

impl MpoState {
    pub fn len(&self) -> usize {
        self.train.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train.is_empty()
    }

    pub fn trace(&self) -> C64 {
        self.train.contract(|_| &TRACE_VEC)
    }

    fn renormalize(&mut self) -> Result<()> {
        let tr = self.trace();
        if tr.norm() < 1e-300 || !tr.is_finite() {
            return Err(FqcpError::Linalg(format!("MPO trace collapsed to {tr}")));
        }
        self.train.scale(1.0 / tr);
        Ok(())
    }

    /// Apply a two-site unitary in (left, right) order to sites `left`, `left+1`.
    pub fn apply_gate(&mut self, gate: &Array2<C64>, left: usize) -> Result<f64> {
        if left + 1 >= self.len() {
            return Err(FqcpError::Index {
                index: left,
                len: self.len(),
            });
        }
        self.train.move_center(left)?;
        let theta = self.train.two_site(left);
        let (dl, _, _, dr) = theta.dim();
        let flat = theta
            .into_shape_with_order((dl, 16, dr))
            .unwrap()
            .permuted_axes([1, 0, 2])
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((16, dl * dr))
            .unwrap();
        let updated = two_site_superop(gate)
            .dot(&flat)
            .into_shape_with_order((16, dl, dr))
            .unwrap()
            .permuted_axes([1, 0, 2])
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((dl, 4, 4, dr))
            .unwrap();
        let tracking = self.ledger.delta_n.is_some() || self.ledger.delta_p.is_some();
        let envs = tracking.then(|| BlockEnvs::new(&self.train, left));
        let before = envs.as_ref().map(|e| e.observables(&updated));
        let trunc = self
            .train
            .split_two_site(left, &updated, self.bond_cap, SVD_FLOOR, true)?;
        self.renormalize()?;
        self.ledger.delta_l2 += trunc.discarded;
        self.ledger.svd_count += 1;
        if let (Some(envs), Some((n0, p0))) = (envs, before) {
            let (n1, p1) = envs.observables(&self.train.two_site(left));
            if let Some(d) = self.ledger.delta_n.as_mut() {
                *d += (n1 - n0).abs();
            }
            if let Some(d) = self.ledger.delta_p.as_mut() {
                *d += (p1 - p0).abs();
            }
        }
        Ok(trunc.discarded)
    }

    fn apply_local_superop(&mut self, site: usize, s: &Array2<C64>) -> Result<()> {
        if site >= self.len() {
            return Err(FqcpError::Index {
                index: site,
                len: self.len(),
            });
        }
        self.train.move_center(site)?;
        self.train.apply_local(site, s);
        Ok(())
    }

    /// Apply a single-site channel given by its Kraus operators.
    pub fn apply_channel(&mut self, site: usize, kraus: &[Array2<C64>]) -> Result<()> {
        let defect = completeness_defect(kraus);
        if defect > 1e-12 {
            return config(format!("Kraus operators not trace preserving (defect {defect:e})"));
        }
        self.apply_local_superop(site, &one_site_superop(kraus))?;
        self.renormalize()
    }

    pub fn apply_layer(&mut self, layer: &Layer, params: &ModelParams) -> Result<()> {
        match layer {
            Layer::Resets(sites) => {
                if params.p() == 0.0 {
                    return Ok(());
                }
                let s = one_site_superop(&params.kraus());
                for r in sites {
                    let i = self.chain.index(*r).expect("reset inside chain");
                    self.apply_local_superop(i, &s)?;
                }
                self.renormalize()
            }
            Layer::Gates(gates) => {
                for g in gates {
                    let left = self.chain.index(g.left()).expect("gate inside chain");
                    self.apply_gate(&g.matrix_lr(params.theta), left)?;
                }
                Ok(())
            }
        }
    }

    /// tr(ρ_X²) for X = sites `from..to`, the rest traced out.
    fn pair_purity(&self, from: usize, to: usize) -> C64 {
        let lt = self.train.left_env(from, |_| &TRACE_VEC);
        let rt = self.train.right_env(to, |_| &TRACE_VEC);
        let mut env = Array2::from_shape_fn((lt.len(), lt.len()), |(a, b)| lt[a] * lt[b]);
        for a in &self.train.tensors[from..to] {
            let (_, _, dr) = a.dim();
            let mut next = Array2::<C64>::zeros((dr, dr));
            for mu in 0..4 {
                let am = a.index_axis(NdAxis(1), mu);
                let bm = a.index_axis(NdAxis(1), SWAP_KET_BRA[mu]);
                next = next + am.t().dot(&env).dot(&bm);
            }
            env = next;
        }
        rt.dot(&env).dot(&rt)
    }

    pub fn raw_observables(&mut self) -> Result<RawObservables> {
        let l = self.len();
        let tr = self.trace();
        let mut n_profile = Vec::with_capacity(l);
        let mut left = Array1::from_elem(1, I);
        let rights: Vec<Array1<C64>> = {
            let mut v = vec![Array1::from_elem(1, I); l + 1];
            for j in (0..l).rev() {
                v[j] = transfer(&self.train.tensors[j], &TRACE_VEC).dot(&v[j + 1]);
            }
            v
        };
        for (j, a) in self.train.tensors.iter().enumerate() {
            n_profile.push((left.dot(&transfer(a, &ACTIVE_VEC)).dot(&rights[j + 1]) / tr).re);
            left = left.dot(&transfer(a, &TRACE_VEC));
        }
        let zero = self.train.contract(|_| &ZERO_VEC);
        let right_vecs: Vec<&[C64; 4]> = self
            .chain
            .sites()
            .map(|r| if r < 0 { &TRACE_VEC } else { &ZERO_VEC })
            .collect();
        let left_zero = self.train.contract(|j| right_vecs[j]);
        let tr2 = tr * tr;
        let purity = (self.pair_purity(0, l) / tr2).re;
        let k = l / 2;
        let pa = (self.pair_purity(0, k) / tr2).re;
        let pb = (self.pair_purity(k, l) / tr2).re;
        let s2 = |x: f64| -x.ln();
        let s_mpo = linalg::schmidt_entropy(&self.train.bond_spectrum(k)?);
        Ok(RawObservables {
            n_profile,
            survival: ((tr - zero) / tr).re,
            survival_right: ((tr - left_zero) / tr).re,
            purity,
            s_mpo,
            i2: s2(pa) + s2(pb) - s2(purity),
        })
    }

    pub fn measure(&mut self, t: usize, reweight: f64) -> Result<ObservableSnapshot> {
        let raw = self.raw_observables()?;
        Ok(ObservableSnapshot::assemble(t, &self.chain, raw, reweight))
    }

    /// Dense 2^L × 2^L matrix, for small-chain tests.
    pub fn to_dense_matrix(&self) -> Array2<C64> {
        let l = self.len();
        let v = self.train.to_dense();
        let dim = 1usize << l;
        let mut m = Array2::<C64>::zeros((dim, dim));
        for (idx, x) in v.iter().enumerate() {
            let (mut ket, mut bra) = (0usize, 0usize);
            for j in 0..l {
                let mu = (idx >> (2 * (l - 1 - j))) & 3;
                ket = (ket << 1) | (mu >> 1);
                bra = (bra << 1) | (mu & 1);
            }
            m[[ket, bra]] = *x;
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub t: usize,
    pub delta_l2: f64,
    pub delta_n: Option<f64>,
    pub delta_p: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct MpoRun {
    pub snapshots: Vec<ObservableSnapshot>,
    pub ledger: Vec<LedgerRow>,
    pub state: MpoState,
}

/// Evolve `initial` on `chain` for `t_max` steps with bond cap `bond_cap`,
/// measuring before each reset layer.
pub fn evolve(
    params: &ModelParams,
    initial: &InitialState,
    chain: Chain,
    t_max: usize,
    bond_cap: usize,
    tracked: &[TrackedObservable],
) -> Result<MpoRun> {
    let schedule = build_schedule(params, t_max, chain, initial)?;
    let mut state = mpo_from_bitstring(chain, &initial.bits(&chain)?, bond_cap)?;
    state.ledger = TruncationLedger::tracking(tracked);
    let mut snapshots = Vec::with_capacity(t_max + 1);
    let mut ledger = Vec::with_capacity(t_max + 1);
    let row = |t: usize, s: &MpoState| LedgerRow {
        t,
        delta_l2: s.ledger.delta_l2,
        delta_n: s.ledger.delta_n,
        delta_p: s.ledger.delta_p,
    };
    for s in 0..t_max {
        snapshots.push(state.measure(s, schedule.reweight)?);
        ledger.push(row(s, &state));
        for layer in schedule.step(s) {
            state.apply_layer(layer, params)?;
        }
    }
    snapshots.push(state.measure(t_max, schedule.reweight)?);
    ledger.push(row(t_max, &state));
    Ok(MpoRun {
        snapshots,
        ledger,
        state,
    })
}

/// Thermodynamic-limit density from the uniformly active state.
#[derive(Clone, Debug)]
pub struct UniformRun {
    /// (n(0, t) + n(1, t)) / 2 for t = 0..=t_max.
    pub density: Vec<f64>,
    pub run: MpoRun,
}

pub fn evolve_uniform_on(
    params: &ModelParams,
    chain: Chain,
    t_max: usize,
    bond_cap: usize,
) -> Result<UniformRun> {
    if chain != Chain::uniform(t_max) {
        return config(format!(
            "uniform evolution to t={t_max} needs sites [{}, {}]",
            -2 * t_max as i64,
            2 * t_max + 1
        ));
    }
    let run = evolve(
        params,
        &InitialState::UniformActive,
        chain,
        t_max,
        bond_cap,
        &[TrackedObservable::TotalActive, TrackedObservable::Survival],
    )?;
    let (i0, i1) = (chain.index(0).unwrap(), chain.index(1).unwrap());
    let density = run
        .snapshots
        .iter()
        .map(|s| 0.5 * (s.n_profile[i0] + s.n_profile[i1]))
        .collect();
    Ok(UniformRun { density, run })
}

pub fn evolve_uniform(params: &ModelParams, t_max: usize, bond_cap: usize) -> Result<UniformRun> {
    evolve_uniform_on(params, Chain::uniform(t_max), t_max, bond_cap)
}
