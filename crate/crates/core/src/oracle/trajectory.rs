use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;

use super::kernels::{apply_one, apply_two, bit, flat4};
use crate::error::{FqcpError, Result};
use crate::linalg::dagger;
use crate::model::{gate_matrix, Chain, InitialState, ModelParams};
use crate::rng::stream_rng;
use crate::schedule::{build_schedule, Layer, LayerSchedule};
use crate::series::{sample_obs, SampledRun};
use crate::stats::Moments;
use crate::C64;

/// Largest chain held as a dense state vector.
pub const PSI_SITE_CAP: usize = 22;

const SHOT_BLOCK: u64 = 256;

/// Pure state of a chain, leftmost site most significant.
#[derive(Clone, Debug)]
pub struct DenseVector {
    pub chain: Chain,
    pub psi: Vec<C64>,
}

impl DenseVector {
    pub fn from_bits(chain: Chain, bits: &[bool]) -> Result<Self> {
        if chain.len > PSI_SITE_CAP {
            return Err(FqcpError::Resource(format!(
                "state vector of {} sites exceeds cap {PSI_SITE_CAP}",
                chain.len
            )));
        }
        let idx = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        let mut psi = vec![C64::new(0.0, 0.0); 1 << chain.len];
        psi[idx] = C64::new(1.0, 0.0);
        Ok(Self { chain, psi })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.psi.iter().map(|x| x.norm_sqr()).sum()
    }

    /// 2×2 reduced density matrix of site `i`.
    pub fn local_density(&self, i: usize) -> [[C64; 2]; 2] {
        let m = bit(self.chain.len, i);
        let mut r = [[C64::new(0.0, 0.0); 2]; 2];
        for base in 0..self.psi.len() {
            if base & m != 0 {
                continue;
            }
            let (a, b) = (self.psi[base], self.psi[base | m]);
            r[0][0] += a * a.conj();
            r[0][1] += a * b.conj();
            r[1][0] += b * a.conj();
            r[1][1] += b * b.conj();
        }
        r
    }

    /// Sample one Kraus branch at site `i` with Born weights and renormalize.
    pub fn sample_kraus(&mut self, i: usize, kraus: &[Array2<C64>], kdk: &[Array2<C64>], u: f64) {
        let rho = self.local_density(i);
        let weights: Vec<f64> = kdk
            .iter()
            .map(|m| {
                let mut w = C64::new(0.0, 0.0);
                for a in 0..2 {
                    for b in 0..2 {
                        w += m[[a, b]] * rho[b][a];
                    }
                }
                w.re.max(0.0)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let mut pick = weights.iter().rposition(|w| *w > 0.0).unwrap_or(0);
        let mut acc = 0.0;
        for (k, w) in weights.iter().enumerate() {
            acc += w / total;
            if u < acc && *w > 0.0 {
                pick = k;
                break;
            }
        }
        apply_one(&mut self.psi, self.chain.len, i, &kraus[pick]);
        let scale = 1.0 / weights[pick].sqrt();
        self.psi.iter_mut().for_each(|x| *x *= scale);
    }

    fn sample_vector(&self) -> [f64; sample_obs::COUNT] {
        use sample_obs::*;
        let l = self.chain.len;
        let right_mask = self
            .chain
            .sites()
            .enumerate()
            .filter(|(_, r)| *r >= 0)
            .fold(0usize, |m, (i, _)| m | bit(l, i));
        let mut profile = vec![0.0; l];
        let (mut survival, mut survival_right) = (0.0, 0.0);
        for (b, amp) in self.psi.iter().enumerate() {
            let p = amp.norm_sqr();
            if p == 0.0 {
                continue;
            }
            for (i, n) in profile.iter_mut().enumerate() {
                if b & bit(l, i) != 0 {
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
        let mut x = [0.0; COUNT];
        for (i, n) in profile.iter().enumerate() {
            let r = self.chain.site(i) as f64;
            x[N] += n;
            x[S2] += r * r * n;
        }
        x[P] = survival;
        x[N0] = self.chain.index(0).map_or(0.0, |i| profile[i]);
        x[P_RIGHT] = survival_right;
        x
    }
}

fn run_block(
    params: &ModelParams,
    schedule: &LayerSchedule,
    start: &DenseVector,
    seed: u64,
    shots: std::ops::Range<u64>,
) -> Vec<Moments<{ sample_obs::COUNT }>> {
    let kraus = params.kraus();
    let kdk: Vec<Array2<C64>> = kraus.iter().map(|k| dagger(k).dot(k)).collect();
    let chain = schedule.chain;
    let steps = schedule.num_steps();
    let mut sums = vec![Moments::default(); steps + 1];
    for shot in shots {
        let mut rng = stream_rng(seed, shot);
        let mut state = start.clone();
        for s in 0..=steps {
            sums[s].push(&state.sample_vector());
            if s == steps {
                break;
            }
            for layer in schedule.step(s) {
                match layer {
                    Layer::Resets(sites) => {
                        for r in sites {
                            let u: f64 = rng.random();
                            state.sample_kraus(chain.index(*r).unwrap(), &kraus, &kdk, u);
                        }
                    }
                    Layer::Gates(gates) => {
                        for g in gates {
                            let u = flat4(&gate_matrix(g.axis, params.theta));
                            apply_two(
                                &mut state.psi,
                                chain.len,
                                chain.index(g.control).unwrap(),
                                chain.index(g.target).unwrap(),
                                &u,
                            );
                        }
                    }
                }
            }
        }
    }
    sums
}

/// Shot-averaged pure-state unraveling on an explicit chain.
pub fn trajectory_run_on(
    params: &ModelParams,
    chain: Chain,
    initial: &InitialState,
    t_max: usize,
    shots: u64,
    seed: u64,
) -> Result<SampledRun> {
    if shots == 0 {
        return Err(FqcpError::Config("shots must be at least 1".into()));
    }
    let schedule = build_schedule(params, t_max, chain, initial)?;
    let start = DenseVector::from_bits(chain, &initial.bits(&chain)?)?;
    let blocks: Vec<u64> = (0..shots.div_ceil(SHOT_BLOCK)).collect();
    let per_block: Vec<Vec<Moments<{ sample_obs::COUNT }>>> = blocks
        .par_iter()
        .map(|&b| {
            let range = b * SHOT_BLOCK..((b + 1) * SHOT_BLOCK).min(shots);
            run_block(params, &schedule, &start, seed, range)
        })
        .collect();
    let mut total = vec![Moments::default(); t_max + 1];
    for block in &per_block {
        for (acc, m) in total.iter_mut().zip(block) {
            acc.merge(m);
        }
    }
    let provenance = format!(
        "trajectories theta={} p={} shots={shots} seed={seed}",
        params.theta,
        params.p()
    );
    SampledRun::from_moments(&total, schedule.reweight, &provenance)
}

/// Trajectories from a single seed on its full 4t+1 site causal cone.
pub fn trajectory_run(params: &ModelParams, t_max: usize, shots: u64, seed: u64) -> Result<SampledRun> {
    trajectory_run_on(
        params,
        Chain::seed_cone(t_max),
        &InitialState::SingleSeed,
        t_max,
        shots,
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::dense::dense_channel_evolve;
    use std::f64::consts::PI;

    #[test]
    fn unitary_limit_is_deterministic() {
        let params = ModelParams::new(0.75 * PI, 0.0).unwrap();
        let run = trajectory_run(&params, 2, 20, 4).unwrap();
        let dense = dense_channel_evolve(&params, &InitialState::SingleSeed, 2, Chain::seed_cone(2)).unwrap();
        for t in 0..=2 {
            let p = run.n.get(t).unwrap();
            assert!(p.stderr < 1e-12);
            assert!((p.value.unwrap() - dense.snapshots[t].n_total).abs() < 1e-12);
        }
    }

    #[test]
    fn cone_over_cap_is_resource_error() {
        let params = ModelParams::new(1.0, 0.1).unwrap();
        assert!(matches!(trajectory_run(&params, 6, 1, 0), Err(FqcpError::Resource(_))));
    }
}
