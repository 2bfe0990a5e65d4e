//! Sparse Markov-chain sampler for the classical point θ = π, where every
//! controlled rotation flips its target and the dynamics is a cellular
//! automaton with random resets.

use rayon::prelude::*;

use crate::error::{config, Result};
use crate::model::ModelParams;
use crate::rng::SiteNoise;
use crate::schedule::GATE_LAYERS;
use crate::series::{sample_obs, SampledRun};
use crate::stats::{Moments, RawSums};

/// Sorted, duplicate-free active site coordinates.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ActiveSet(Vec<i64>);

impl ActiveSet {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn single_seed() -> Self {
        Self(vec![0])
    }

    pub fn from_sites(sites: impl IntoIterator<Item = i64>) -> Self {
        let mut v: Vec<i64> = sites.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    pub fn sites(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, r: i64) -> bool {
        self.0.binary_search(&r).is_ok()
    }
}

/// Toggle `c + dir` for every active control `c` of the given parity.
fn flip_layer(state: &[i64], parity: i64, dir: i64, out: &mut Vec<i64>) {
    out.clear();
    let mut targets = state
        .iter()
        .filter(|c| c.rem_euclid(2) == parity)
        .map(|c| c + dir)
        .peekable();
    let mut current = state.iter().copied().peekable();
    loop {
        match (current.peek().copied(), targets.peek().copied()) {
            (Some(a), Some(b)) if a == b => {
                current.next();
                targets.next();
            }
            (Some(a), Some(b)) if a < b => {
                out.push(a);
                current.next();
            }
            (Some(_), Some(b)) | (None, Some(b)) => {
                out.push(b);
                targets.next();
            }
            (Some(a), None) => {
                out.push(a);
                current.next();
            }
            (None, None) => break,
        }
    }
}

fn step_in_place(
    state: &mut Vec<i64>,
    scratch: &mut Vec<i64>,
    p: f64,
    noise: &SiteNoise,
    step: u64,
    reset: bool,
) {
    if reset && p > 0.0 {
        state.retain(|&r| noise.uniform(step, r) >= p);
    }
    for (parity, dir) in GATE_LAYERS {
        flip_layer(state, parity, dir, scratch);
        std::mem::swap(state, scratch);
    }
}

/// One time step: independent resets with probability `p`, then the four flip layers.
pub fn classical_step(state: &ActiveSet, p: f64, noise: &SiteNoise, step: u64) -> ActiveSet {
    let mut s = state.0.clone();
    let mut scratch = Vec::with_capacity(s.len() + 4);
    step_in_place(&mut s, &mut scratch, p, noise, step, true);
    ActiveSet(s)
}

/// Samples per block of the deterministic reduction.
pub const CHUNK: u64 = 2048;

fn run_chunk(
    p: f64,
    skip_first: bool,
    t_max: usize,
    seed: u64,
    samples: std::ops::Range<u64>,
) -> Vec<RawSums<{ sample_obs::COUNT }>> {
    use sample_obs::*;
    let mut sums = vec![RawSums::default(); t_max + 1];
    let mut state = Vec::with_capacity(4 * t_max + 1);
    let mut scratch = Vec::with_capacity(4 * t_max + 1);
    for sample in samples {
        let noise = SiteNoise::new(seed, sample);
        state.clear();
        state.push(0i64);
        for (t, acc) in sums.iter_mut().enumerate() {
            if state.is_empty() {
                break;
            }
            let mut x = [0.0; COUNT];
            x[N] = state.len() as f64;
            x[S2] = state.iter().map(|&r| (r * r) as f64).sum();
            x[P] = 1.0;
            x[N0] = state.binary_search(&0).is_ok() as u8 as f64;
            x[P_RIGHT] = (*state.last().unwrap() >= 0) as u8 as f64;
            acc.add(&x);
            if t < t_max {
                let reset = !(t == 0 && skip_first);
                step_in_place(&mut state, &mut scratch, p, &noise, t as u64, reset);
            }
        }
    }
    sums
}

/// Monte Carlo estimates of N, R², P, n(0) and P_right for t = 0..=t_max from a single seed.
///
/// The result depends only on `(params, t_max, n_samples, seed)`: samples are
/// grouped in fixed blocks whose moments are merged in block order.
pub fn run_classical(
    params: &ModelParams,
    t_max: usize,
    n_samples: u64,
    seed: u64,
) -> Result<SampledRun> {
    params.validate()?;
    if !params.is_classical() {
        return config(format!(
            "the classical engine requires theta = π, got {}",
            params.theta
        ));
    }
    if n_samples == 0 {
        return config("n_samples must be at least 1");
    }
    let p = params.p();
    let skip = params.skip_first_reset_layer;
    let blocks: Vec<u64> = (0..n_samples.div_ceil(CHUNK)).collect();
    let per_block: Vec<Vec<Moments<{ sample_obs::COUNT }>>> = blocks
        .par_iter()
        .map(|&b| {
            let range = b * CHUNK..((b + 1) * CHUNK).min(n_samples);
            let count = range.end - range.start;
            run_chunk(p, skip, t_max, seed, range)
                .iter()
                .map(|s| s.to_moments(count))
                .collect()
        })
        .collect();
    let mut total = vec![Moments::default(); t_max + 1];
    for block in &per_block {
        for (acc, m) in total.iter_mut().zip(block) {
            acc.merge(m);
        }
    }
    let provenance = format!(
        "classical p={p} skip_first_reset_layer={skip} samples={n_samples} seed={seed}"
    );
    SampledRun::from_moments(&total, params.reweight(), &provenance)
}
