use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use fqcp_core::analysis::{
    bst_scan, collapse_residual, crossing_sequence, effective_exponent, level_spacing_ratio,
    scaling_collapse, zne_combine_estimates, BstResult, CrossingOutcome, EffectiveExponentCurve,
    Estimate, ExponentPoint, TimeProfile,
};
use fqcp_core::circuit::{emit, resource_stats, EmitOptions, DEFAULT_FULL_CONE_BUDGET};
use fqcp_core::classical::run_classical;
use fqcp_core::dmrg::{
    build_superoperator, finite_size_critical, quasi_steady_state, rl_ratio, DmrgOptions, FiniteSizeOutcome,
    DEFAULT_D_O,
};
use fqcp_core::io::{fmt_f64, fmt_opt, read_series, series_table, Manifest, OutputDir, Schema, Table};
use fqcp_core::model::DpConstants;
use fqcp_core::mpo::{evolve, evolve_uniform, TrackedObservable};
use fqcp_core::oracle::{eigenphases, floquet_unitary, trajectory_run};
use fqcp_core::series::SampledRun;
use fqcp_core::{
    Chain, FqcpError, InitialState, ModelParams, ObservableSeries, ObservableSnapshot, Probability, RotationVariant,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{overlay, parse_threshold, CommonArgs, ModelArgs, Threshold};
use crate::error::{CliError, CliResult};

/// Thread cap for subcommands whose jobs hold large tensors.
const HEAVY_WORKER_CAP: usize = 4;
const SERIES_FILES: [&str; 5] = ["N.csv", "R2.csv", "P.csv", "n0.csv", "P_right.csv"];

/// Output directory, timer and non-convergence notes of one invocation.
struct Run {
    command: &'static str,
    out: OutputDir,
    start: Instant,
    notes: BTreeMap<String, String>,
    unconverged: Vec<String>,
}

impl Run {
    fn start(command: &'static str, common: &mut CommonArgs, cap: Option<usize>, files: &[&str]) -> CliResult<Self> {
        let workers = common.workers(cap);
        common.workers = Some(workers);
        let root = common.out_dir();
        common.out = Some(root.clone());
        let out = OutputDir::create(root, common.force)?;
        out.check_free(files)?;
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
        Ok(Self {
            command,
            out,
            start: Instant::now(),
            notes: BTreeMap::new(),
            unconverged: Vec::new(),
        })
    }

    fn finish<A: Serialize>(mut self, args: &A) -> CliResult<Manifest> {
        let config = serde_json::to_value(args).map_err(CliError::internal)?;
        if !self.unconverged.is_empty() {
            self.notes.insert("unconverged".into(), self.unconverged.join("; "));
        }
        let wall = self.start.elapsed().as_secs_f64();
        let manifest = self.out.finish(self.command, config, wall, self.notes)?;
        if self.unconverged.is_empty() {
            Ok(manifest)
        } else {
            Err(CliError::NotConverged(self.unconverged.join("; ")))
        }
    }
}

fn write_sampled(run: &mut Run, sampled: &SampledRun) -> CliResult<()> {
    for s in sampled.all() {
        run.out.write_table(&format!("{}.csv", s.name), &series_table(s))?;
    }
    Ok(())
}

fn snapshot_series(snaps: &[ObservableSnapshot], provenance: &str) -> CliResult<Vec<ObservableSeries>> {
    let pick = |name: &str, f: &dyn Fn(&ObservableSnapshot) -> Option<f64>| {
        ObservableSeries::exact(name, provenance, snaps.iter().map(|s| (s.t, f(s))))
    };
    Ok(vec![
        pick("N", &|s| Some(s.n_total))?,
        pick("R2", &|s| s.r2)?,
        pick("P", &|s| Some(s.survival))?,
        pick("n0", &|s| Some(s.n_center))?,
        pick("P_right", &|s| Some(s.survival_right))?,
    ])
}

fn observables_table(snaps: &[ObservableSnapshot]) -> Table {
    let mut table = Table::new(Schema::Observables);
    for s in snaps {
        for (name, value) in s.scalars() {
            table.push(vec![s.t.to_string(), name.into(), fmt_opt(value), s.flagged.to_string()]);
        }
    }
    table
}

fn profile_table(snaps: &[ObservableSnapshot]) -> Table {
    let mut table = Table::new(Schema::Profile);
    for s in snaps {
        for (i, n) in s.n_profile.iter().enumerate() {
            table.push(vec![s.t.to_string(), (s.first_site + i as i64).to_string(), fmt_f64(*n)]);
        }
    }
    table
}

fn check_sorted(name: &str, grid: &[f64]) -> CliResult<()> {
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(CliError::config(format!("{name} must be strictly ascending")));
    }
    Ok(())
}

fn required<'a, T>(name: &str, v: &'a Option<T>) -> CliResult<&'a T> {
    v.as_ref().ok_or_else(|| CliError::config(format!("--{} is required", name.replace('_', "-"))))
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassicalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Last time step
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<usize>,
    /// Markov-chain samples
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub fn classical(args: ClassicalArgs) -> CliResult<Manifest> {
    let mut a = overlay(args.clone(), args.common.config.as_deref())?;
    let params = a.model.resolve(PI, 0.3944)?;
    let t_max = *a.t_max.get_or_insert(1000);
    let samples = *a.samples.get_or_insert(100_000);
    let seed = *a.seed.get_or_insert(1);
    let mut run = Run::start("classical", &mut a.common, None, &SERIES_FILES)?;
    let sampled = run_classical(&params, t_max, samples, seed)?;
    write_sampled(&mut run, &sampled)?;
    run.finish(&a)
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MpoArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<usize>,
    /// Bond dimension cap D
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bond_dim: Option<usize>,
}

pub fn mpo(args: MpoArgs) -> CliResult<Manifest> {
    let mut a = overlay(args.clone(), args.common.config.as_deref())?;
    let params = a.model.resolve(0.75 * PI, 0.3)?;
    let t_max = *a.t_max.get_or_insert(10);
    let bond = *a.bond_dim.get_or_insert(64);
    let mut files = SERIES_FILES.to_vec();
    files.extend(["observables.csv", "profile.csv", "ledger.csv"]);
    let mut run = Run::start("mpo", &mut a.common, Some(HEAVY_WORKER_CAP), &files)?;
    let out = evolve(
        &params,
        &InitialState::SingleSeed,
        Chain::seed_cone(t_max),
        t_max,
        bond,
        &[TrackedObservable::TotalActive, TrackedObservable::Survival],
    )?;
    for s in snapshot_series(&out.snapshots, &format!("mpo D={bond}"))? {
        run.out.write_table(&format!("{}.csv", s.name), &series_table(&s))?;
    }
    run.out.write_table("observables.csv", &observables_table(&out.snapshots))?;
    run.out.write_table("profile.csv", &profile_table(&out.snapshots))?;
    let mut ledger = Table::new(Schema::Ledger);
    for r in &out.ledger {
        ledger.push(vec![r.t.to_string(), fmt_f64(r.delta_l2), fmt_opt(r.delta_n), fmt_opt(r.delta_p)]);
    }
    run.out.write_table("ledger.csv", &ledger)?;
    let flagged: Vec<String> = out.snapshots.iter().filter(|s| s.flagged).map(|s| s.t.to_string()).collect();
    if !flagged.is_empty() {
        run.unconverged.push(format!("flagged snapshots at t = {}", flagged.join(",")));
    }
    run.notes.insert("snapshot_timing".into(), "before reset layer".into());
    run.finish(&a)
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MpoUniformArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bond_dim: Option<usize>,
}

pub fn mpo_uniform(args: MpoUniformArgs) -> CliResult<Manifest> {
    let mut a = overlay(args.clone(), args.common.config.as_deref())?;
    let params = a.model.resolve(0.75 * PI, 0.3)?;
    let t_max = *a.t_max.get_or_insert(6);
    let bond = *a.bond_dim.get_or_insert(64);
    let mut run = Run::start("mpo-uniform", &mut a.common, Some(HEAVY_WORKER_CAP), &["density.csv", "ledger.csv"])?;
    let out = evolve_uniform(&params, t_max, bond)?;
    let density = ObservableSeries::exact(
        "density",
        format!("mpo-uniform D={bond}"),
        out.density.iter().enumerate().map(|(t, d)| (t, Some(*d))),
    )?;
    run.out.write_table("density.csv", &series_table(&density))?;
    let mut ledger = Table::new(Schema::Ledger);
    for r in &out.run.ledger {
        ledger.push(vec![r.t.to_string(), fmt_f64(r.delta_l2), fmt_opt(r.delta_n), fmt_opt(r.delta_p)]);
    }
    run.out.write_table("ledger.csv", &ledger)?;
    if out.run.snapshots.iter().any(|s| s.flagged) {
        run.unconverged.push("flagged snapshots".into());
    }
    run.finish(&a)
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DmrgArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Chain lengths, comma separated
    #[arg(long, value_delimiter = ',')]
    pub l_grid: Vec<usize>,
    /// Reset probabilities, comma separated and ascending (default: --p)
    #[arg(long, value_delimiter = ',')]
    pub p_grid: Vec<f64>,
    /// Bond dimension D of the vectorized state
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bond_dim: Option<usize>,
    /// Bond cap of the superoperator MPO
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_o: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_sweeps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub fn dmrg_gap(args: DmrgArgs) -> CliResult<Manifest> {
    let mut a = overlay(args.clone(), args.common.config.as_deref())?;
    let base = a.model.resolve(PI, 0.3944)?;
    if a.l_grid.is_empty() {
        a.l_grid = vec![5, 7, 9];
    }
    if a.p_grid.is_empty() {
        a.p_grid = vec![base.p()];
    }
    check_sorted("p_grid", &a.p_grid)?;
    let opts = DmrgOptions {
        bond_dim: *a.bond_dim.get_or_insert(16),
        max_sweeps: *a.max_sweeps.get_or_insert(30),
        seed: *a.seed.get_or_insert(0),
        ..DmrgOptions::default()
    };
    let d_o = *a.d_o.get_or_insert(DEFAULT_D_O);
    let jobs: Vec<(usize, f64)> = a
        .l_grid
        .iter()
        .flat_map(|&l| a.p_grid.iter().map(move |&p| (l, p)))
        .collect();
    let params: Vec<_> = jobs
        .iter()
        .map(|&(_, p)| Ok(ModelParams { p: Probability::new(p)?, ..base }))
        .collect::<Result<_, FqcpError>>()?;
    let mut run = Run::start("dmrg-gap", &mut a.common, Some(HEAVY_WORKER_CAP), &["gap.csv"])?;
    let results = jobs
        .par_iter()
        .zip(&params)
        .map(|(&(l, _), params)| {
            let e = build_superoperator(params, l, d_o)?;
            quasi_steady_state(&e, &opts).map(|(g, _)| g)
        })
        .collect::<Result<Vec<_>, FqcpError>>()?;
    let mut table = Table::new(Schema::Gap);
    for g in &results {
        table.push(vec![
            g.l.to_string(),
            fmt_f64(g.p),
            g.bond_dim.to_string(),
            g.d_o.to_string(),
            fmt_f64(g.epsilon1.re),
            fmt_f64(g.epsilon1.im),
            fmt_f64(g.tau),
            g.converged.to_string(),
            g.sweeps.to_string(),
        ]);
        if !g.converged {
            run.unconverged.push(format!("L={} p={} after {} sweeps", g.l, g.p, g.sweeps));
        }
    }
    run.out.write_table("gap.csv", &table)?;
    run.finish(&a)
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectoryArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<usize>,
    /// Trajectory shots
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub fn trajectories(args: TrajectoryArgs) -> CliResult<Manifest> {
    let mut a = overlay(args.clone(), args.common.config.as_deref())?;
    let params = a.model.resolve(0.75 * PI, 0.3)?;
    let t_max = *a.t_max.get_or_insert(3);
    let samples = *a.samples.get_or_insert(10_000);
    let seed = *a.seed.get_or_insert(1);
    let mut run = Run::start("trajectories", &mut a.common, None, &SERIES_FILES)?;
    let sampled = trajectory_run(&params, t_max, samples, seed)?;
    write_sampled(&mut run, &sampled)?;
    run.finish(&a)
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EdArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Chain lengths, comma separated
    #[arg(long, value_delimiter = ',')]
    pub l_grid: Vec<usize>,
}

pub fn ed_levels(args: EdArgs) -> CliResult<Manifest> {
    let mut a = overlay(args.clone(), args.common.config.as_deref())?;
    let params = a.model.resolve(0.75 * PI, 0.0)?;
    if a.l_grid.is_empty() {
        a.l_grid = vec![10];
    }
    let mut run = Run::start("ed-levels", &mut a.common, Some(HEAVY_WORKER_CAP), &["levels.csv"])?;
    let variant = match params.rotation_variant {
        RotationVariant::Xy => "xy",
        RotationVariant::AllX => "all_x",
    };
    let stats = a
        .l_grid
        .par_iter()
        .map(|&l| level_spacing_ratio(&eigenphases(&floquet_unitary(&params, l)?)?))
        .collect::<Result<Vec<_>, FqcpError>>()?;
    let mut table = Table::new(Schema::Levels);
    for (l, s) in a.l_grid.iter().zip(&stats) {
        table.push(vec![
            l.to_string(),
            variant.into(),
            fmt_f64(s.mean_ratio),
            s.ratios_used.to_string(),
            s.ratios_skipped.to_string(),
        ]);
    }
    run.out.write_table("levels.csv", &table)?;
    run.finish(&a)
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ExponentArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    /// Run directories of one engine at different p
    #[arg(long, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Series file stem: N, P, n0, ...
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observable: Option<String>,
    /// Time offset of the logarithmic derivative
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<usize>,
}

fn run_p(dir: &Path) -> CliResult<f64> {
    let path = dir.join(fqcp_core::io::MANIFEST_FILE);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(FqcpError::from)?;
    manifest.config["p"]
        .as_f64()
        .ok_or_else(|| CliError::config(format!("no p in {}", path.display())))
}

pub fn analyze_exponents(args: ExponentArgs) -> CliResult<Manifest> {
    let mut a = overlay(args.clone(), args.common.config.as_deref())?;
    if a.input.is_empty() {
        return Err(CliError::config("--input needs at least one run directory"));
    }
    let observable = a.observable.get_or_insert_with(|| "N".into()).clone();
    let dt = *a.dt.get_or_insert(1);
    let mut curves = Vec::new();
    for dir in &a.input {
        let series = read_series(&dir.join(format!("{observable}.csv")))?;
        curves.push((run_p(dir)?, effective_exponent(&series, dt)?));
    }
    curves.sort_by(|x, y| x.0.total_cmp(&y.0));
    if curves.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(CliError::config("two inputs share the same p"));
    }
    let mut run = Run::start("analyze-exponents", &mut a.common, None, &["exponents.csv"])?;
    let mut table = Table::new(Schema::Exponents);
    for (p, c) in &curves {
        for pt in &c.points {
            table.push(vec![fmt_f64(*p), pt.t.to_string(), fmt_f64(pt.value), fmt_f64(pt.stderr)]);
        }
    }
    run.out.write_table("exponents.csv", &table)?;
    run.finish(&a)
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CrossingArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    /// exponents.csv or gap.csv
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Time shift between the compared exponent curves
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<usize>,
    /// Times at which to locate crossings (default: all available)
    #[arg(long, value_delimiter = ',')]
    pub times: Vec<usize>,
    /// Largest accepted bracket width in p
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_bracket: Option<f64>,
}

fn exponent_curves(table: &Table) -> CliResult<Vec<(f64, EffectiveExponentCurve)>> {
    let mut by_p: Vec<(f64, EffectiveExponentCurve)> = Vec::new();
    for row in &table.rows {
        let p = table.f64(row, "p")?;
        let point = ExponentPoint {
            t: table.usize(row, "t")?,
            value: table.f64(row, "delta")?,
            stderr: table.f64(row, "stderr")?,
        };
        match by_p.last_mut() {
            Some((q, c)) if *q == p => c.points.push(point),
            Some((q, _)) if *q > p => return Err(CliError::config("exponent table is not sorted by p")),
            _ => by_p.push((
                p,
                EffectiveExponentCurve {
                    dt: 0,
                    points: vec![point],
                    skipped: Vec::new(),
                },
            )),
        }
    }
    Ok(by_p)
}

fn crossing_row(t: usize, p: Option<(f64, f64, f64, f64, bool)>) -> Vec<String> {
    match p {
        Some((p_c, delta, lo, hi, wide)) => vec![
            t.to_string(),
            fmt_f64(p_c),
            fmt_f64(delta),
            fmt_f64(lo),
            fmt_f64(hi),
            wide.to_string(),
        ],
        None => vec![t.to_string(), String::new(), String::new(), String::new(), String::new(), String::new()],
    }
}

pub fn analyze_crossings(args: CrossingArgs) -> CliResult<Manifest> {
    let mut a = overlay(args.clone(), args.common.config.as_deref())?;
    let input = required("input", &a.input)?.clone();
    let tau = *a.tau.get_or_insert(1);
    let max_bracket = *a.max_bracket.get_or_insert(f64::INFINITY);
    let mut table = Table::new(Schema::Crossings);
    match Table::read(&input, Schema::Exponents) {
        Ok(exps) => {
            let curves = exponent_curves(&exps)?;
            if a.times.is_empty() {
                let Some((_, first)) = curves.first() else {
                    return Err(CliError::config("empty exponent table"));
                };
                a.times = first
                    .points
                    .iter()
                    .map(|p| p.t)
                    .filter(|&t| curves.iter().all(|(_, c)| c.at(t).is_some() && c.at(t + tau).is_some()))
                    .collect();
            }
            for outcome in crossing_sequence(&curves, &a.times, tau, max_bracket)? {
                table.push(match outcome {
                    CrossingOutcome::Crossing(c) => {
                        crossing_row(c.t, Some((c.p_c, c.delta, c.p_lo, c.p_hi, c.wide_bracket)))
                    }
                    CrossingOutcome::NoCrossing { t } => crossing_row(t, None),
                });
            }
        }
        Err(FqcpError::Schema { .. }) => {
            let gaps = Table::read(&input, Schema::Gap)?;
            let mut tau_by_p: BTreeMap<u64, (f64, BTreeMap<usize, f64>)> = BTreeMap::new();
            for row in &gaps.rows {
                let p = gaps.f64(row, "p")?;
                tau_by_p
                    .entry(p.to_bits())
                    .or_insert_with(|| (p, BTreeMap::new()))
                    .1
                    .insert(gaps.usize(row, "L")?, gaps.f64(row, "tau")?);
            }
            let mut curves: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
            for (p, taus) in tau_by_p.values() {
                for (l, r) in rl_ratio(taus) {
                    curves.entry(l).or_default().push((*p, r));
                }
            }
            for outcome in finite_size_critical(&curves) {
                table.push(match outcome {
                    FiniteSizeOutcome::Crossing { l, p_c, z, p_lo, p_hi } => {
                        crossing_row(l, Some((p_c, z, p_lo, p_hi, p_hi - p_lo > max_bracket)))
                    }
                    FiniteSizeOutcome::NoCrossing { l } => crossing_row(l, None),
                });
            }
        }
        Err(e) => return Err(e.into()),
    }
    let mut run = Run::start("analyze-crossings", &mut a.common, None, &["crossings.csv"])?;
    run.out.write_table("crossings.csv", &table)?;
    run.finish(&a)
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct BstArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    /// crossings.csv
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
}

/// Extrapolated critical point and exponent from a crossing table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BstSummary {
    pub points: usize,
    pub p_c: Option<BstResult>,
    pub exponent: Option<BstResult>,
}

pub fn analyze_bst(args: BstArgs) -> CliResult<Manifest> {
    let mut a = overlay(args.clone(), args.common.config.as_deref())?;
    let input = required("input", &a.input)?.clone();
    let table = Table::read(&input, Schema::Crossings)?;
    let mut pc = Vec::new();
    let mut exponent = Vec::new();
    for row in &table.rows {
        let t = table.usize(row, "t")? as f64;
        if let (Some(p), Some(d)) = (table.opt_f64(row, "p_c")?, table.opt_f64(row, "delta")?) {
            pc.push((t, p));
            exponent.push((t, d));
        }
    }
    if pc.len() < 3 {
        return Err(CliError::config(format!(
            "BST needs at least 3 crossings, {} has {}",
            input.display(),
            pc.len()
        )));
    }
    let summary = BstSummary {
        points: pc.len(),
        p_c: bst_scan(&pc)?,
        exponent: bst_scan(&exponent)?,
    };
    let mut run = Run::start("analyze-bst", &mut a.common, None, &["bst.json"])?;
    run.out.write_json("bst.json", &summary)?;
    if summary.p_c.is_none() || summary.exponent.is_none() {
        run.unconverged.push("no admissible omega in the scan".into());
    }
    run.finish(&a)
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ZneArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    /// Run directory at unit noise
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_1x: Option<PathBuf>,
    /// Run directory at tripled noise
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_3x: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observable: Option<String>,
}

pub fn zne(args: ZneArgs) -> CliResult<Manifest> {
    let mut a = overlay(args.clone(), args.common.config.as_deref())?;
    let observable = a.observable.get_or_insert_with(|| "N".into()).clone();
    let file = format!("{observable}.csv");
    let one = read_series(&required("input_1x", &a.input_1x)?.join(&file))?;
    let three = read_series(&required("input_3x", &a.input_3x)?.join(&file))?;
    let mut table = Table::new(Schema::Zne);
    for p1 in &one.points {
        let Some(p3) = three.get(p1.t) else { continue };
        let (Some(v1), Some(v3)) = (p1.value, p3.value) else { continue };
        let (e1, e3) = (
            Estimate {
                value: v1,
                stderr: p1.stderr,
            },
            Estimate {
                value: v3,
                stderr: p3.stderr,
            },
        );
        let z = zne_combine_estimates(e1, e3);
        table.push(vec![
            p1.t.to_string(),
            fmt_f64(v1),
            fmt_f64(p1.stderr),
            fmt_f64(v3),
            fmt_f64(p3.stderr),
            fmt_f64(z.value),
            fmt_f64(z.stderr),
        ]);
    }
    let mut run = Run::start("zne", &mut a.common, None, &["zne.csv"])?;
    run.out.write_table("zne.csv", &table)?;
    run.finish(&a)
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CollapseArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    /// Run directory holding profile.csv
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Growth exponent Θ
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    /// Dynamic exponent z
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    /// Earliest time included
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_min: Option<usize>,
    /// Interpolation points of the collapse residual
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

fn read_profiles(path: &Path) -> CliResult<Vec<TimeProfile>> {
    let table = Table::read(path, Schema::Profile)?;
    let mut profiles: Vec<TimeProfile> = Vec::new();
    for row in &table.rows {
        let t = table.usize(row, "t")?;
        let r: i64 = table
            .cell(row, "r")?
            .parse()
            .map_err(|_| CliError::config("bad site in profile table"))?;
        let n = table.f64(row, "n")?;
        match profiles.last_mut() {
            Some(p) if p.t == t => {
                if r != p.first_site + p.n.len() as i64 {
                    return Err(CliError::config(format!("profile at t={t} is not contiguous")));
                }
                p.n.push(n);
            }
            _ => profiles.push(TimeProfile {
                t,
                first_site: r,
                n: vec![n],
            }),
        }
    }
    Ok(profiles)
}

pub fn collapse(args: CollapseArgs) -> CliResult<Manifest> {
    let mut a = overlay(args.clone(), args.common.config.as_deref())?;
    let input = required("input", &a.input)?.clone();
    let theta = *a.exponent.get_or_insert(DpConstants::THETA);
    let z = *a.z.get_or_insert(DpConstants::Z);
    let t_min = *a.t_min.get_or_insert(1);
    let samples = *a.samples.get_or_insert(64);
    let profiles: Vec<TimeProfile> = read_profiles(&input.join("profile.csv"))?
        .into_iter()
        .filter(|p| p.t >= t_min.max(1))
        .collect();
    let rows = scaling_collapse(&profiles, theta, z)?;
    let residual = collapse_residual(&rows, samples);
    let mut table = Table::new(Schema::Collapse);
    for r in &rows {
        table.push(vec![r.t.to_string(), r.r.to_string(), fmt_f64(r.x), fmt_f64(r.y)]);
    }
    let mut run = Run::start("collapse", &mut a.common, None, &["collapse.csv"])?;
    run.out.write_table("collapse.csv", &table)?;
    run.notes.insert("residual".into(), fmt_opt(residual));
    run.finish(&a)
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EmitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Measured time step
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    /// Noise amplification of every RZZ (1 or 3)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zne: Option<usize>,
    /// Pool size at which freed qubits are reused, or `none`
    #[arg(long, value_parser = parse_threshold)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reuse_threshold: Option<Threshold>,
    /// Largest full cone (4t+1 sites) emitted without pruning
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_cone_budget: Option<usize>,
}

#[derive(Serialize)]
struct CircuitSummary {
    qubits: usize,
    z_bits: usize,
    r_bits: usize,
    m_bits: usize,
    counts: fqcp_core::circuit::InstructionCounts,
}

pub fn emit_circuit(args: EmitArgs) -> CliResult<Manifest> {
    let mut a = overlay(args.clone(), args.common.config.as_deref())?;
    let defaults = EmitOptions::default();
    a.model.skip_first_reset_layer.get_or_insert(defaults.skip_first_reset_layer);
    let params = a.model.resolve(0.75 * PI, 0.3)?;
    let t = *a.t.get_or_insert(18);
    let opts = EmitOptions {
        zne_fold: *a.zne.get_or_insert(defaults.zne_fold),
        reuse_threshold: a
            .reuse_threshold
            .get_or_insert(defaults.reuse_threshold.map_or(Threshold::Never, Threshold::At))
            .get(),
        skip_first_reset_layer: params.skip_first_reset_layer,
        full_cone_budget: *a.full_cone_budget.get_or_insert(DEFAULT_FULL_CONE_BUDGET),
        ..defaults
    };
    let program = emit(&params, t, &opts)?;
    let mut run = Run::start("emit-circuit", &mut a.common, None, &["program.fqcp", "circuit.json"])?;
    run.out.write_bytes("program.fqcp", program.to_text().as_bytes())?;
    run.out.write_json(
        "circuit.json",
        &CircuitSummary {
            qubits: program.qubit_pool_size,
            z_bits: program.z_bits,
            r_bits: program.r_bits,
            m_bits: program.m_bits,
            counts: program.counts(),
        },
    )?;
    run.finish(&a)
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ResourceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Time steps, comma separated
    #[arg(long, value_delimiter = ',')]
    pub t_grid: Vec<usize>,
    /// Shots per time step
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub fn resources(args: ResourceArgs) -> CliResult<Manifest> {
    let mut a = overlay(args.clone(), args.common.config.as_deref())?;
    let params = a.model.resolve(PI, 0.3)?;
    if a.t_grid.is_empty() {
        a.t_grid = (2..=18).collect();
    }
    let samples = *a.samples.get_or_insert(1000);
    let seed = *a.seed.get_or_insert(1);
    let mut run = Run::start("resources", &mut a.common, None, &["resources.csv"])?;
    let mut table = Table::new(Schema::Resources);
    for &t in &a.t_grid {
        let s = resource_stats(&params, t, samples, seed)?;
        table.push(vec![
            t.to_string(),
            fmt_f64(s.p),
            fmt_f64(s.mean_activated_tq),
            s.total_tq.to_string(),
            fmt_opt(s.fraction_tq),
            fmt_f64(s.mean_activated_mr),
            s.total_mr.to_string(),
            fmt_opt(s.fraction_mr),
        ]);
        if s.elision_violations > 0 {
            run.unconverged.push(format!("t={t}: {} shots broke gate elision", s.elision_violations));
        }
    }
    run.out.write_table("resources.csv", &table)?;
    run.finish(&a)
}
