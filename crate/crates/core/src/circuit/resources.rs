use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::emit::{emit, EmitOptions};
use crate::circuit::interp::{conditional_totals, run_control_flow};
use crate::circuit::ir::Program;
use crate::error::{config, Result};
use crate::model::ModelParams;
use crate::rng::stream_rng;

/// Activation statistics of the conditional instructions of one program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceStats {
    pub t: usize,
    pub p: f64,
    pub samples: u64,
    pub mean_activated_tq: f64,
    pub total_tq: usize,
    /// Undefined when the program has no conditional two-qubit gates.
    pub fraction_tq: Option<f64>,
    pub mean_activated_mr: f64,
    pub total_mr: usize,
    /// Undefined when the program has no reset channels.
    pub fraction_mr: Option<f64>,
    /// Shots in which a set z bit met a qubit that was not |0⟩.
    pub elision_violations: u64,
}

/// Bit-level control-flow statistics over `n_samples` shots of `program`.
/// Shot k draws from stream k of `seed`, so results do not depend on the worker count.
pub fn control_flow_stats(program: &Program, n_samples: u64, seed: u64) -> Result<ResourceStats> {
    if n_samples == 0 {
        return config("resource statistics need at least one sample");
    }
    let (total_tq, total_mr) = conditional_totals(program);
    let (tq, mr, bad) = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let shot = run_control_flow(program, &mut stream_rng(seed, k))?;
            Ok::<_, crate::error::FqcpError>((
                shot.tq_activated as u64,
                shot.mr_activated as u64,
                u64::from(!shot.elision_violations.is_empty()),
            ))
        })
        .try_reduce(|| (0, 0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1, a.2 + b.2)))?;
    let n = n_samples as f64;
    let mean_tq = tq as f64 / n;
    let mean_mr = mr as f64 / n;
    let fraction = |mean: f64, total: usize| (total > 0).then(|| mean / total as f64);
    Ok(ResourceStats {
        t: program.meta.t,
        p: program.meta.p,
        samples: n_samples,
        mean_activated_tq: mean_tq,
        total_tq,
        fraction_tq: fraction(mean_tq, total_tq),
        mean_activated_mr: mean_mr,
        total_mr,
        fraction_mr: fraction(mean_mr, total_mr),
        elision_violations: bad,
    })
}

/// Emit the program at the θ = π point, where every qubit stays in a product
/// state, and collect its control-flow statistics. The first reset layer is
/// skipped as `params.skip_first_reset_layer` says; other options are defaults.
pub fn resource_stats(params: &ModelParams, t: usize, n_samples: u64, seed: u64) -> Result<ResourceStats> {
    let opts = EmitOptions {
        skip_first_reset_layer: params.skip_first_reset_layer,
        ..EmitOptions::default()
    };
    resource_stats_with(params, t, n_samples, seed, &opts)
}

pub fn resource_stats_with(
    params: &ModelParams,
    t: usize,
    n_samples: u64,
    seed: u64,
    opts: &EmitOptions,
) -> Result<ResourceStats> {
    let classical = ModelParams { theta: PI, ..*params };
    let program = emit(&classical, t, opts)?;
    control_flow_stats(&program, n_samples, seed)
}
