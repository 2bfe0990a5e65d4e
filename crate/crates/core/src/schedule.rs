use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::model::{gate_matrix, Axis, Chain, InitialState, ModelParams};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateOp {
    pub control: i64,
    pub target: i64,
    pub axis: Axis,
}

impl GateOp {
    pub fn left(&self) -> i64 {
        self.control.min(self.target)
    }

    /// The gate as a 4×4 matrix in (left site, right site) order.
    pub fn matrix_lr(&self, theta: f64) -> Array2<C64> {
        let g = gate_matrix(self.axis, theta);
        if self.control < self.target {
            g
        } else {
            swap_sites(&g)
        }
    }
}

/// Conjugate a two-site operator by SWAP.
pub fn swap_sites(g: &Array2<C64>) -> Array2<C64> {
    const PERM: [usize; 4] = [0, 2, 1, 3];
    Array2::from_shape_fn((4, 4), |(i, j)| g[[PERM[i], PERM[j]]])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Layer {
    Resets(Vec<i64>),
    Gates(Vec<GateOp>),
}

/// Control sublattice parity and target direction of the four gate layers of a step.
pub const GATE_LAYERS: [(i64, i64); 4] = [(1, -1), (1, 1), (0, -1), (0, 1)];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSchedule {
    pub chain: Chain,
    pub layers: Vec<Layer>,
    step_starts: Vec<usize>,
    pub reweight: f64,
}

impl LayerSchedule {
    pub fn num_steps(&self) -> usize {
        self.step_starts.len()
    }

    pub fn step(&self, s: usize) -> &[Layer] {
        let start = self.step_starts[s];
        let end = self
            .step_starts
            .get(s + 1)
            .copied()
            .unwrap_or(self.layers.len());
        &self.layers[start..end]
    }

    pub fn gate_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Gates(g) => g.len(),
                Layer::Resets(_) => 0,
            })
            .sum()
    }
}

pub fn gate_layer(params: &ModelParams, chain: &Chain, step: usize, parity: i64, dir: i64) -> Vec<GateOp> {
    chain
        .sites()
        .filter(|c| c.rem_euclid(2) == parity && chain.contains(c + dir))
        .map(|c| GateOp {
            control: c,
            target: c + dir,
            axis: params.axis(c, step),
        })
        .collect()
}

fn assemble(params: &ModelParams, chain: Chain, steps: usize, skip_first: bool) -> LayerSchedule {
    let mut layers = Vec::with_capacity(5 * steps);
    let mut step_starts = Vec::with_capacity(steps);
    for s in 0..steps {
        step_starts.push(layers.len());
        if !(s == 0 && skip_first) {
            layers.push(Layer::Resets(chain.sites().collect()));
        }
        for (parity, dir) in GATE_LAYERS {
            layers.push(Layer::Gates(gate_layer(params, &chain, s, parity, dir)));
        }
    }
    LayerSchedule {
        chain,
        layers,
        step_starts,
        reweight: if skip_first { 1.0 - params.p() } else { 1.0 },
    }
}

/// Schedule for `t_steps` time steps on `chain` starting from `initial`.
pub fn build_schedule(
    params: &ModelParams,
    t_steps: usize,
    chain: Chain,
    initial: &InitialState,
) -> Result<LayerSchedule> {
    params.validate()?;
    initial.active_sites(&chain)?;
    match initial {
        InitialState::SingleSeed => {
            let cone = 2 * t_steps as i64;
            if !chain.contains(-cone) || !chain.contains(cone) {
                return config(format!(
                    "chain [{}, {}] does not contain the causal cone [-{cone}, {cone}]",
                    chain.first,
                    chain.last()
                ));
            }
        }
        _ if params.skip_first_reset_layer => {
            return config("skipping the first reset layer is only valid for a single seed");
        }
        _ => {}
    }
    Ok(assemble(params, chain, t_steps, params.skip_first_reset_layer))
}

/// One Floquet period (two time steps, resets included) on an open chain.
pub fn period_schedule(params: &ModelParams, chain: Chain) -> LayerSchedule {
    assemble(params, chain, 2, false)
}
