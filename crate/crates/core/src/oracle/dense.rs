use ndarray::Array2;

use super::kernels::{apply_two, conj16, flat4};
use crate::error::{FqcpError, Result};
use crate::linalg;
use crate::model::{Chain, InitialState, ModelParams};
use crate::observables::{ObservableSnapshot, RawObservables};
use crate::schedule::{build_schedule, GateOp, Layer, LayerSchedule};
use crate::C64;

/// Largest chain held as a dense density matrix.
pub const RHO_SITE_CAP: usize = 12;

/// Local superoperator Σ K ⊗ K* in the basis 2·ket + bra.
pub fn local_superop(kraus: &[Array2<C64>]) -> [C64; 16] {
    let mut s = [C64::new(0.0, 0.0); 16];
    for k in kraus {
        for (ks, kb) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            for (ls, lb) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                s[4 * (2 * ks + kb) + 2 * ls + lb] += k[[ks, ls]] * k[[kb, lb]].conj();
            }
        }
    }
    s
}

/// Dense density matrix, stored row-major as a register of 2L bits with the
/// row (ket) bits most significant.
#[derive(Clone, Debug)]
pub struct DenseDensity {
    pub chain: Chain,
    pub rho: Vec<C64>,
}

impl DenseDensity {
    fn check_cap(chain: &Chain) -> Result<()> {
        if chain.len > RHO_SITE_CAP {
            return Err(FqcpError::Resource(format!(
                "dense density matrix of {} sites exceeds cap {RHO_SITE_CAP}",
                chain.len
            )));
        }
        Ok(())
    }

    pub fn from_bits(chain: Chain, bits: &[bool]) -> Result<Self> {
        Self::check_cap(&chain)?;
        let dim = 1usize << chain.len;
        let idx = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        let mut rho = vec![C64::new(0.0, 0.0); dim * dim];
        rho[idx * dim + idx] = C64::new(1.0, 0.0);
        Ok(Self { chain, rho })
    }

    pub fn from_matrix(chain: Chain, m: &Array2<C64>) -> Result<Self> {
        Self::check_cap(&chain)?;
        let dim = 1usize << chain.len;
        if m.dim() != (dim, dim) {
            return Err(FqcpError::Config("matrix shape does not match chain".into()));
        }
        Ok(Self {
            chain,
            rho: m.iter().copied().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        1 << self.chain.len
    }

    pub fn matrix(&self) -> Array2<C64> {
        Array2::from_shape_vec((self.dim(), self.dim()), self.rho.clone()).unwrap()
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|b| self.rho[b * self.dim() + b]).sum()
    }

    /// ρ → UρU† for a 4×4 `u` on sites `a`, `b` (chain indices, basis 2·a + b).
    pub fn apply_two_site(&mut self, a: usize, b: usize, u: &Array2<C64>) {
        let l = self.chain.len;
        let f = flat4(u);
        apply_two(&mut self.rho, 2 * l, a, b, &f);
        apply_two(&mut self.rho, 2 * l, l + a, l + b, &conj16(&f));
    }

    pub fn apply_gate(&mut self, op: &GateOp, theta: f64) {
        let c = self.chain.index(op.control).expect("gate inside chain");
        let t = self.chain.index(op.target).expect("gate inside chain");
        self.apply_two_site(c, t, &crate::model::gate_matrix(op.axis, theta));
    }

    pub fn apply_superop(&mut self, site: usize, s: &[C64; 16]) {
        let l = self.chain.len;
        apply_two(&mut self.rho, 2 * l, site, l + site, s);
    }

    pub fn apply_layer(&mut self, layer: &Layer, params: &ModelParams) {
        match layer {
            Layer::Resets(sites) => {
                let s = local_superop(&params.kraus());
                for r in sites {
                    self.apply_superop(self.chain.index(*r).unwrap(), &s);
                }
            }
            Layer::Gates(gates) => {
                for g in gates {
                    self.apply_gate(g, params.theta);
                }
            }
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|b| self.rho[b * self.dim() + b].re).collect()
    }

    fn purity_of(m: &Array2<C64>) -> f64 {
        let n = m.nrows();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += m[[i, j]] * m[[j, i]];
            }
        }
        acc.re
    }

    /// (ρ_A, ρ_B) for A = the first `k` sites.
    fn reduced(&self, k: usize) -> (Array2<C64>, Array2<C64>) {
        let l = self.chain.len;
        let (da, db) = (1usize << k, 1usize << (l - k));
        let dim = self.dim();
        let mut ra = Array2::<C64>::zeros((da, da));
        let mut rb = Array2::<C64>::zeros((db, db));
        for a in 0..da {
            for a2 in 0..da {
                for b in 0..db {
                    ra[[a, a2]] += self.rho[(a * db + b) * dim + a2 * db + b];
                }
            }
        }
        for b in 0..db {
            for b2 in 0..db {
                for a in 0..da {
                    rb[[b, b2]] += self.rho[(a * db + b) * dim + a * db + b2];
                }
            }
        }
        (ra, rb)
    }

    /// Entropy of the operator-Schmidt spectrum across the cut after `k` sites.
    fn operator_entropy(&self, k: usize) -> Result<f64> {
        let l = self.chain.len;
        let (da, db) = (1usize << k, 1usize << (l - k));
        let dim = self.dim();
        let m = Array2::from_shape_fn((da * da, db * db), |(row, col)| {
            let (a, a2) = (row / da, row % da);
            let (b, b2) = (col / db, col % db);
            self.rho[(a * db + b) * dim + a2 * db + b2]
        });
        Ok(linalg::schmidt_entropy(&linalg::svd(&m)?.s))
    }

    pub fn raw_observables(&self) -> Result<RawObservables> {
        let l = self.chain.len;
        let probs = self.diagonal();
        let mut n_profile = vec![0.0; l];
        let right_mask = self
            .chain
            .sites()
            .enumerate()
            .filter(|(_, r)| *r >= 0)
            .fold(0usize, |m, (i, _)| m | (1 << (l - 1 - i)));
        let (mut survival, mut survival_right) = (0.0, 0.0);
        for (b, p) in probs.iter().enumerate() {
            for (i, n) in n_profile.iter_mut().enumerate() {
                if b >> (l - 1 - i) & 1 == 1 {
                    *n += p;
                }
            }
            if b != 0 {
                survival += p;
            }
            if b & right_mask != 0 {
                survival_right += p;
            }
        }
        let purity = Self::purity_of(&self.matrix());
        let k = l / 2;
        let (ra, rb) = self.reduced(k);
        let s2 = |x: f64| -x.ln();
        Ok(RawObservables {
            n_profile,
            survival,
            survival_right,
            purity,
            s_mpo: self.operator_entropy(k)?,
            i2: s2(Self::purity_of(&ra)) + s2(Self::purity_of(&rb)) - s2(purity),
        })
    }

    pub fn snapshot(&self, t: usize, reweight: f64) -> Result<ObservableSnapshot> {
        Ok(ObservableSnapshot::assemble(
            t,
            &self.chain,
            self.raw_observables()?,
            reweight,
        ))
    }

    /// (|tr ρ − 1|, max |ρ − ρ†|, smallest eigenvalue of the Hermitian part).
    pub fn physicality(&self) -> Result<(f64, f64, f64)> {
        let m = self.matrix();
        let md = linalg::dagger(&m);
        let herm = linalg::max_abs_diff(&m, &md);
        let h = (&m + &md).mapv(|x| x * 0.5);
        let min_eig = linalg::eigvalsh(&h)?.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(((self.trace() - 1.0).norm(), herm, min_eig))
    }
}

pub struct DenseEvolution {
    pub snapshots: Vec<ObservableSnapshot>,
    pub state: DenseDensity,
}

pub fn evolve_schedule(
    params: &ModelParams,
    schedule: &LayerSchedule,
    mut state: DenseDensity,
) -> Result<DenseEvolution> {
    let mut snapshots = Vec::with_capacity(schedule.num_steps() + 1);
    for s in 0..schedule.num_steps() {
        snapshots.push(state.snapshot(s, schedule.reweight)?);
        for layer in schedule.step(s) {
            state.apply_layer(layer, params);
        }
    }
    snapshots.push(state.snapshot(schedule.num_steps(), schedule.reweight)?);
    Ok(DenseEvolution { snapshots, state })
}

/// Exact channel evolution of `initial` on `chain` for `t_steps` steps.
pub fn dense_channel_evolve(
    params: &ModelParams,
    initial: &InitialState,
    t_steps: usize,
    chain: Chain,
) -> Result<DenseEvolution> {
    let schedule = build_schedule(params, t_steps, chain, initial)?;
    let state = DenseDensity::from_bits(chain, &initial.bits(&chain)?)?;
    evolve_schedule(params, &schedule, state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ChannelVariant;
    use std::f64::consts::PI;

    #[test]
    fn reset_superop_on_active_site() {
        let p = 0.3;
        let chain = Chain::new(0, 1).unwrap();
        let mut s = DenseDensity::from_bits(chain, &[true]).unwrap();
        let kraus = crate::model::channel_kraus(ChannelVariant::ProbabilisticReset, p).unwrap();
        s.apply_superop(0, &local_superop(&kraus));
        let m = s.matrix();
        assert!((m[[0, 0]].re - p).abs() < 1e-15);
        assert!((m[[1, 1]].re - (1.0 - p)).abs() < 1e-15);
        let snap = s.snapshot(0, 1.0).unwrap();
        assert!((snap.purity - (p * p + (1.0 - p) * (1.0 - p))).abs() < 1e-15);
        let full = crate::model::channel_kraus(ChannelVariant::ProbabilisticReset, 1.0).unwrap();
        s.apply_superop(0, &local_superop(&full));
        assert!((s.matrix()[[0, 0]].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn absorbing_input_stays_trivial() {
        for (theta, p) in [(0.3, 0.1), (PI, 0.5), (2.0, 0.0)] {
            let params = ModelParams::new(theta, p).unwrap();
            let chain = Chain::open(5);
            let ev = dense_channel_evolve(&params, &InitialState::CustomBitstring(vec![]), 3, chain).unwrap();
            for s in &ev.snapshots {
                assert_eq!(s.n_total, 0.0);
                assert_eq!(s.survival, 0.0);
                assert!((s.purity - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn classical_point_single_step() {
        let params = ModelParams::classical_point(0.0).unwrap();
        let ev = dense_channel_evolve(&params, &InitialState::SingleSeed, 1, Chain::seed_cone(1)).unwrap();
        let n = &ev.snapshots[1].n_profile;
        let expected = [0.0, 1.0, 1.0, 1.0, 0.0];
        for (a, b) in n.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn seed_snapshot() {
        let chain = Chain::seed_cone(1);
        let s = DenseDensity::from_bits(chain, &InitialState::SingleSeed.bits(&chain).unwrap()).unwrap();
        let snap = s.snapshot(0, 1.0).unwrap();
        assert_eq!(snap.n_total, 1.0);
        assert_eq!(snap.r2, Some(0.0));
        assert_eq!(snap.survival, 1.0);
        assert_eq!(snap.survival_right, 1.0);
        assert!(snap.s_mpo.abs() < 1e-12 && snap.i2.abs() < 1e-12);
    }

    #[test]
    fn channel_stays_physical_and_reflection_symmetric() {
        let params = ModelParams::new(0.75 * PI, 0.3).unwrap();
        let chain = Chain::seed_cone(2);
        let ev = dense_channel_evolve(&params, &InitialState::SingleSeed, 2, chain).unwrap();
        let (tr, herm, min_eig) = ev.state.physicality().unwrap();
        assert!(tr < 1e-12 && herm < 1e-12 && min_eig > -1e-10);
        for snap in &ev.snapshots {
            let n = &snap.n_profile;
            for i in 0..n.len() {
                assert!((n[i] - n[n.len() - 1 - i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn left_right_layer_order_commutes() {
        // swap the two layers of each sublattice and compare channels
        let params = ModelParams::new(1.1, 0.2).unwrap();
        let chain = Chain::open(6);
        let initial = InitialState::CustomBitstring(vec![0, 1]);
        let schedule = build_schedule(&params, 2, chain, &initial).unwrap();
        let mut swapped = schedule.clone();
        for s in 0..2 {
            let base = 5 * s;
            swapped.layers.swap(base + 1, base + 2);
            swapped.layers.swap(base + 3, base + 4);
        }
        let start = DenseDensity::from_bits(chain, &initial.bits(&chain).unwrap()).unwrap();
        let a = evolve_schedule(&params, &schedule, start.clone()).unwrap().state;
        let b = evolve_schedule(&params, &swapped, start).unwrap().state;
        assert!(linalg::max_abs_diff(&a.matrix(), &b.matrix()) < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let chain = Chain::open(RHO_SITE_CAP + 1);
        assert!(matches!(
            DenseDensity::from_bits(chain, &vec![false; chain.len]),
            Err(FqcpError::Resource(_))
        ));
    }
}
