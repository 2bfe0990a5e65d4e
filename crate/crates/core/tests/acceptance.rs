//! Acceptance criteria. Prints one PASS/FAIL line per criterion.
//!
//! Criteria 7 and 8 run only with `FQCP_SLOW=1`; otherwise they are reported
//! as failing with the reason. Set `FQCP_ACCEPTANCE_STRICT=1` to make any
//! failure a nonzero exit. Numeric arguments select criteria, e.g.
//! `cargo test --test acceptance -- 1 11`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use fqcp_core::analysis::{
    bst_scan, crossing_sequence, effective_exponent, find_crossings, level_spacing_ratio, zne_combine,
    zne_combine_estimates, CrossingOptions, Estimate, QUANTUM_MAX_BRACKET,
};
use fqcp_core::circuit::{
    decompose_controlled_rotation, emit, fold_rzz, qubit_count, resource_stats, single_qubit_matrix,
    two_qubit_matrix, EmitOptions, NativeGate, TwoQubitKind, Wire,
};
use fqcp_core::classical::{classical_step, run_classical, ActiveSet};
use fqcp_core::dmrg::{
    build_superoperator, exponent_and_tau, finite_size_critical, quasi_steady_state, rl_ratio, DmrgOptions,
    FiniteSizeOutcome, DEFAULT_D_O,
};
use fqcp_core::model::{gate_matrix, DpConstants};
use fqcp_core::mpo::evolve;
use fqcp_core::oracle::{
    dense_channel_evolve, dense_superoperator, eigenphases, floquet_unitary, interleaved_index, slowest_exponents,
    trajectory_run, trajectory_run_on,
};
use fqcp_core::rng::{stream_rng, SiteNoise};
use fqcp_core::series::SampledRun;
use fqcp_core::{Axis, Chain, InitialState, ModelParams, ObservableSnapshot, RotationVariant, C64};
use ndarray::Array2;
use rand::Rng;

type Check = Result<(bool, String), Box<dyn std::error::Error>>;

fn slow() -> bool {
    std::env::var("FQCP_SLOW").is_ok_and(|v| v == "1")
}

fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn snapshot_activity_is_zero(s: &ObservableSnapshot) -> bool {
    s.n_total == 0.0
        && s.survival == 0.0
        && s.survival_right == 0.0
        && s.n_center == 0.0
        && s.r2.is_none()
        && s.n_profile.iter().all(|&n| n == 0.0)
}

fn oracle_equivalence() -> Check {
    let mut rng = stream_rng(2024, 1);
    let mut worst: f64 = 0.0;
    for k in 0..10 {
        let theta = rng.random_range(0.0..2.0 * PI);
        let p = rng.random_range(0.0..1.0);
        // a single seed needs its 4t+1 site cone, so seeds run one step
        let (chain, t, initial) = if k % 2 == 0 {
            (Chain::seed_cone(1), 1, InitialState::SingleSeed)
        } else {
            let l = 5 + k % 3;
            let chain = Chain::new(-(l as i64) / 2, l)?;
            let bits = chain.sites().filter(|_| rng.random_bool(0.5)).collect();
            (chain, 1 + k % 3, InitialState::CustomBitstring(bits))
        };
        let params = ModelParams::new(theta, p)?.with_skip_first_reset(k == 4);
        let mpo = evolve(&params, &initial, chain, t, 64, &[])?;
        let dense = dense_channel_evolve(&params, &initial, t, chain)?;
        for (a, b) in mpo.snapshots.iter().zip(&dense.snapshots) {
            worst = worst.max(a.max_deviation(b));
            if a.flagged != b.flagged {
                worst = f64::INFINITY;
            }
        }
    }
    Ok((worst <= 1e-8, format!("max deviation {worst:.2e} over 10 (θ, p) pairs, L ≤ 7, t ≤ 3")))
}

fn classical_cross_engine() -> Check {
    let mut worst_z: f64 = 0.0;
    let mut exact_miss: f64 = 0.0;
    for p in [0.2, 0.3944, 0.6] {
        let params = ModelParams::classical_point(p)?;
        let mpo = evolve(&params, &InitialState::SingleSeed, Chain::seed_cone(10), 10, 64, &[])?;
        let mc = run_classical(&params, 10, 100_000, 7)?;
        for s in &mpo.snapshots {
            let pairs = [
                (Some(s.n_total), &mc.n),
                (s.r2, &mc.r2),
                (Some(s.survival), &mc.survival),
                (Some(s.survival_right), &mc.survival_right),
                (Some(s.n_center), &mc.n_center),
            ];
            for (value, series) in pairs {
                let point = series.get(s.t).ok_or("missing classical time")?;
                let (Some(x), Some(y)) = (value, point.value) else {
                    if value.is_some() != point.value.is_some() {
                        exact_miss = f64::INFINITY;
                    }
                    continue;
                };
                if point.stderr == 0.0 {
                    exact_miss = exact_miss.max((x - y).abs());
                } else {
                    worst_z = worst_z.max((x - y).abs() / point.stderr);
                }
            }
        }
    }
    Ok((
        worst_z <= 3.0 && exact_miss <= 1e-9,
        format!("largest deviation {worst_z:.2} standard errors (deterministic points off by {exact_miss:.1e})"),
    ))
}

fn classical_criticality() -> Check {
    let grid = [0.390, 0.392, 0.3944, 0.396, 0.398];
    let mut curves = Vec::new();
    for p in grid {
        let run = run_classical(&ModelParams::classical_point(p)?, 1000, 100_000, 1)?;
        curves.push((p, effective_exponent(&run.n, 500)?));
    }
    let at_pc = curves[2].1.at(500).ok_or("no exponent at t=500")?.value;
    let crossing = find_crossings(&curves, 450, 50, CrossingOptions::default())?;
    let p_c = crossing.point().map(|c| c.p_c);
    let ok_exp = (at_pc - DpConstants::THETA).abs() <= 0.03;
    let ok_pc = p_c.is_some_and(|p| (0.390..=0.399).contains(&p));
    Ok((
        ok_exp && ok_pc,
        format!(
            "δ(500) = {at_pc:.4} at p=0.3944 (Θ = {}), t=450/500 crossing at {}",
            DpConstants::THETA,
            p_c.map_or("none".into(), |p| format!("{p:.4}"))
        ),
    ))
}

fn off_critical() -> Check {
    let active = run_classical(&ModelParams::classical_point(0.2)?, 200, 2000, 3)?;
    let delta = effective_exponent(&active.n, 100)?.at(100).ok_or("no exponent at t=100")?.value;
    let absorbing = run_classical(&ModelParams::classical_point(0.6)?, 100, 100_000, 3)?;
    let survival = absorbing.survival.value(100).ok_or("no survival at t=100")?;
    Ok((
        delta > 0.8 && survival < 1e-3,
        format!("p=0.2: δ(100) = {delta:.3}; p=0.6: P(100) = {survival:.2e}"),
    ))
}

fn level_statistics() -> Check {
    let ratio = |variant| -> Result<f64, Box<dyn std::error::Error>> {
        let params = ModelParams::new(0.75 * PI, 0.0)?.with_variant(variant);
        Ok(level_spacing_ratio(&eigenphases(&floquet_unitary(&params, 10)?)?)?.mean_ratio)
    };
    let xy = ratio(RotationVariant::Xy)?;
    let all_x = ratio(RotationVariant::AllX)?;
    Ok((
        (0.50..=0.56).contains(&xy) && (0.36..=0.42).contains(&all_x),
        format!("L=10: ⟨r⟩ = {xy:.4} (xy), {all_x:.4} (all_x)"),
    ))
}

fn dmrg_small_l() -> Check {
    let (mut e0, mut e1, mut defect): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let opts = DmrgOptions {
        bond_dim: 64,
        ..DmrgOptions::default()
    };
    for (theta, p) in [(PI, 0.3944), (0.75 * PI, 0.3), (1.3, 0.6)] {
        let params = ModelParams::new(theta, p)?;
        for l in 2..=4 {
            let e = build_superoperator(&params, l, DEFAULT_D_O)?;
            defect = defect.max(e.left_identity_defect()?);
            let (steady, _) = quasi_steady_state(&e, &DmrgOptions { w: 0.0, ..opts })?;
            e0 = e0.max(exponent_and_tau(steady.lambda).0.norm());
            let (gap, _) = quasi_steady_state(&e, &opts)?;
            let (_, want) = slowest_exponents(&dense_superoperator(&params, l)?)?;
            let got = gap.epsilon1;
            e1 = e1.max((got.re - want.re).abs()).max((got.im.abs() - want.im.abs()).abs());
        }
    }
    Ok((
        e0 <= 1e-10 && e1 <= 1e-8 && defect <= 1e-10,
        format!("|ε₀| ≤ {e0:.1e}, |Δε₁| ≤ {e1:.1e}, ‖⟨⟨I|E − ⟨⟨I|‖ ≤ {defect:.1e} for L = 2, 3, 4"),
    ))
}

fn dmrg_scaling() -> Check {
    if !slow() {
        return Ok((
            false,
            "not run: needs FQCP_SLOW=1 and weeks of CPU on one core (about 1 s per two-site matvec already at \
             L=9, D=16; the cost grows as D³)"
                .into(),
        ));
    }
    let ls = [11, 13, 15, 17, 19];
    let grid = [0.388, 0.392, 0.396, 0.400];
    let opts = DmrgOptions {
        bond_dim: 128,
        ..DmrgOptions::default()
    };
    let mut curves: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for p in grid {
        let params = ModelParams::classical_point(p)?;
        let mut taus = BTreeMap::new();
        for l in ls {
            let e = build_superoperator(&params, l, DEFAULT_D_O)?;
            taus.insert(l, quasi_steady_state(&e, &opts)?.0.tau);
        }
        for (l, r) in rl_ratio(&taus) {
            curves.entry(l).or_default().push((p, r));
        }
    }
    let mut pc = Vec::new();
    let mut z = Vec::new();
    for o in finite_size_critical(&curves) {
        if let FiniteSizeOutcome::Crossing { l, p_c, z: zl, .. } = o {
            pc.push((l as f64, p_c));
            z.push((l as f64, zl));
        }
    }
    let (Some(pc), Some(z)) = (bst_scan(&pc)?, bst_scan(&z)?) else {
        return Ok((false, "too few finite-size crossings to extrapolate".into()));
    };
    Ok((
        (z.limit / 1.5807 - 1.0).abs() <= 0.07 && (0.388..=0.401).contains(&pc.limit),
        format!("BST p_c = {:.4}, z = {:.4}", pc.limit, z.limit),
    ))
}

fn quantum_criticality() -> Check {
    if !slow() {
        return Ok((
            false,
            "not run: needs FQCP_SLOW=1 (seven MPO runs at D=128 to t=14, about 30 min on one core)".into(),
        ));
    }
    let t_max = 14;
    let run = |p: f64| -> Result<_, Box<dyn std::error::Error>> {
        let params = ModelParams::quantum_point(p)?;
        let out = evolve(&params, &InitialState::SingleSeed, Chain::seed_cone(t_max), t_max, 128, &[])?;
        let series = fqcp_core::ObservableSeries::exact(
            "N",
            "mpo",
            out.snapshots.iter().map(|s| (s.t, Some(s.n_total))),
        )?;
        Ok((p, effective_exponent(&series, 2)?))
    };
    // coarse scan, then a bracket of width QUANTUM_MAX_BRACKET around the latest crossing
    let mut curves = [0.28, 0.30, 0.32, 0.33, 0.34].map(run).into_iter().collect::<Result<Vec<_>, _>>()?;
    let ts: Vec<usize> = (6..=t_max - 4).collect();
    let coarse = crossing_sequence(&curves, &ts, 2, f64::INFINITY)?;
    let c = coarse.iter().rev().find_map(|c| c.point()).ok_or("no coarse crossing")?;
    let lo = (c.p_c / QUANTUM_MAX_BRACKET).floor() * QUANTUM_MAX_BRACKET;
    for p in [lo, lo + QUANTUM_MAX_BRACKET] {
        curves.push(run(p)?);
    }
    curves.sort_by(|a, b| a.0.total_cmp(&b.0));
    let fine = crossing_sequence(&curves, &ts, 2, QUANTUM_MAX_BRACKET)?;
    let last = fine.iter().rev().find_map(|c| c.point()).ok_or("no crossing")?;
    Ok((
        (0.28..=0.32).contains(&last.p_c) && (last.delta / DpConstants::THETA - 1.0).abs() <= 0.15,
        format!("crossing at t={}: p_c = {:.4}, δ = {:.4}", last.t, last.p_c, last.delta),
    ))
}

fn bst_synthetic() -> Check {
    let mut rng = stream_rng(77, 0);
    let ts: [f64; 7] = [10.0, 14.0, 20.0, 28.0, 40.0, 56.0, 80.0];
    let mut worst_limit: f64 = 0.0;
    let mut worst_omega: f64 = 0.0;
    for k in 0..10 {
        let a = rng.random_range(-1.0..1.0);
        let b = rng.random_range(0.5..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let omega = rng.random_range(0.3..2.0);
        let n = 6 + k % 2;
        let seq: Vec<(f64, f64)> = ts[..n].iter().map(|&t| (t, a + b * t.powf(-omega))).collect();
        let r = bst_scan(&seq)?.ok_or("scan found no ω")?;
        worst_limit = worst_limit.max((r.limit - a).abs());
        worst_omega = worst_omega.max((r.omega / omega - 1.0).abs());
    }
    Ok((
        worst_limit <= 1e-6 && worst_omega <= 0.1,
        format!("10 sequences: |limit − a| ≤ {worst_limit:.1e}, relative ω error ≤ {worst_omega:.3}"),
    ))
}

fn zne_identities() -> Check {
    let mut rng = stream_rng(5, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let [x1, x3, y1, y3, al, be]: [f64; 6] = std::array::from_fn(|_| rng.random_range(-10.0..10.0));
        let lhs = zne_combine(al * x1 + be * y1, al * x3 + be * y3);
        let rhs = al * zne_combine(x1, x3) + be * zne_combine(y1, y3);
        worst = worst.max((lhs - rhs).abs() / (1.0 + rhs.abs()));
        worst = worst.max((zne_combine(x1, x3) - (1.5 * x1 - 0.5 * x3)).abs());
        let e = zne_combine_estimates(Estimate { value: x1, stderr: y1.abs() }, Estimate { value: x3, stderr: y3.abs() });
        worst = worst.max((e.stderr - (2.25 * y1 * y1 + 0.25 * y3 * y3).sqrt()).abs());
    }
    Ok((worst <= 1e-12, format!("largest violation {worst:.1e} over 100 random cases")))
}

fn absorbing_invariance() -> Check {
    let mut rng = stream_rng(11, 0);
    let empty = InitialState::CustomBitstring(Vec::new());
    for k in 0..5 {
        let theta = rng.random_range(0.0..2.0 * PI);
        let p = rng.random_range(0.0..1.0);
        let params = ModelParams::new(theta, p)?;
        let noise = SiteNoise::new(k, 0);
        let mut state = ActiveSet::empty();
        for step in 0..20 {
            state = classical_step(&state, p, &noise, step);
            if !state.is_empty() {
                return Ok((false, format!("classical engine left the absorbing state at p={p}")));
            }
        }
        let mpo = evolve(&params, &empty, Chain::symmetric(4), 20, 32, &[])?;
        if !mpo.snapshots.iter().all(snapshot_activity_is_zero) {
            return Ok((false, format!("MPO engine left the absorbing state at θ={theta}, p={p}")));
        }
        let dense = dense_channel_evolve(&params, &empty, 20, Chain::symmetric(2))?;
        if !dense.snapshots.iter().all(snapshot_activity_is_zero) {
            return Ok((false, format!("dense oracle left the absorbing state at θ={theta}, p={p}")));
        }
        let traj = trajectory_run_on(&params, Chain::symmetric(3), &empty, 20, 50, k)?;
        let sampled_zero = |run: &SampledRun| {
            [&run.n, &run.survival, &run.survival_right, &run.n_center]
                .iter()
                .all(|s| s.points.iter().all(|p| p.value == Some(0.0)))
                && run.r2.points.iter().all(|p| p.value.is_none())
        };
        if !sampled_zero(&traj) {
            return Ok((false, format!("trajectories left the absorbing state at θ={theta}, p={p}")));
        }
        let e = build_superoperator(&params, 3, DEFAULT_D_O)?.to_dense()?;
        let zero = interleaved_index(3, 0, 0);
        let column_defect = (0..e.nrows())
            .map(|i| (e[[i, zero]] - if i == zero { 1.0 } else { 0.0 }).norm())
            .fold(0.0, f64::max);
        if column_defect > 1e-12 {
            return Ok((false, format!("superoperator moves |0⟩⟩ by {column_defect:.1e}")));
        }
    }
    Ok((
        true,
        "classical, MPO, dense, trajectory and superoperator engines fix the empty state for 20 steps at 5 (θ, p)".into(),
    ))
}

fn native_unitary(seq: &[(NativeGate, Wire)]) -> Array2<C64> {
    let kron = |a: &Array2<C64>, b: &Array2<C64>| Array2::from_shape_fn((4, 4), |(r, c)| a[[r / 2, c / 2]] * b[[r % 2, c % 2]]);
    let id = Array2::<C64>::eye(2);
    seq.iter().fold(Array2::<C64>::eye(4), |u, (gate, wire)| {
        let g = match (gate, wire) {
            (NativeGate::Rzz(phi), _) => two_qubit_matrix(TwoQubitKind::Rzz(*phi)),
            (NativeGate::One(k), Wire::Control) => kron(&single_qubit_matrix(*k), &id),
            (NativeGate::One(k), _) => kron(&id, &single_qubit_matrix(*k)),
        };
        g.dot(&u)
    })
}

fn emitter_contracts() -> Check {
    let mut problems = Vec::new();
    if qubit_count(18, Some(10)) != 20 {
        problems.push(format!("qubit_count(18, 10) = {}", qubit_count(18, Some(10))));
    }
    let counts: Vec<usize> = (2..=18).map(|t| qubit_count(t, Some(10))).collect();
    if counts.iter().any(|n| !(9..=20).contains(n)) {
        problems.push(format!("counts for t=2..18: {counts:?}"));
    }
    let params = ModelParams::quantum_point(0.3)?;
    for t in [2, 7, 18] {
        let rzz = |fold| -> Result<usize, Box<dyn std::error::Error>> {
            let opts = EmitOptions {
                zne_fold: fold,
                ..EmitOptions::default()
            };
            Ok(emit(&params, t, &opts)?.counts().rzz)
        };
        let (one, three) = (rzz(1)?, rzz(3)?);
        if three != 3 * one {
            problems.push(format!("t={t}: {three} folded RZZ vs {one}"));
        }
    }
    let mut unitary_gap: f64 = 0.0;
    for axis in [Axis::X, Axis::Y] {
        for theta in [0.4, 0.75 * PI, PI] {
            let one = native_unitary(&decompose_controlled_rotation(axis, theta, 1));
            let three = native_unitary(&decompose_controlled_rotation(axis, theta, 3));
            unitary_gap = unitary_gap
                .max(max_abs_diff(&one, &three))
                .max(max_abs_diff(&one, &gate_matrix(axis, theta)));
        }
    }
    for phi in [-0.7, 0.3, PI / 2.0] {
        unitary_gap = unitary_gap.max(max_abs_diff(
            &native_unitary(&fold_rzz(phi, 3)),
            &two_qubit_matrix(TwoQubitKind::Rzz(phi)),
        ));
    }
    if unitary_gap > 1e-12 {
        problems.push(format!("fold composition differs by {unitary_gap:.1e}"));
    }
    let classical = ModelParams::classical_point(0.3)?;
    let mut largest: f64 = 0.0;
    for t in 2..=18 {
        let s = resource_stats(&classical, t, 2000, 1)?;
        largest = largest.max(s.fraction_tq.ok_or("no conditional gates")?);
    }
    if !(largest < 0.7) {
        problems.push(format!("activated TQ fraction reaches {largest:.3}"));
    }
    let detail = if problems.is_empty() {
        format!(
            "20 qubits at t=18, counts {}..{} for t=2..18, fold gap {unitary_gap:.1e}, max TQ fraction {largest:.3}",
            counts.iter().min().unwrap(),
            counts.iter().max().unwrap()
        )
    } else {
        problems.join("; ")
    };
    Ok((problems.is_empty(), detail))
}

fn survival_ordering() -> Check {
    let mut worst = f64::NEG_INFINITY;
    let mut cases = 0;
    let mut check = |p: f64, pr: f64| {
        worst = worst.max(pr - p);
        cases += 1;
    };
    for p in [0.2, 0.3944, 0.6] {
        let params = ModelParams::classical_point(p)?;
        let run = run_classical(&params, 100, 5000, 9)?;
        for (a, b) in run.survival.points.iter().zip(&run.survival_right.points) {
            check(a.value.unwrap_or(0.0), b.value.unwrap_or(0.0));
        }
        let skipped = run_classical(&params.with_skip_first_reset(true), 50, 2000, 9)?;
        for (a, b) in skipped.survival.points.iter().zip(&skipped.survival_right.points) {
            check(a.value.unwrap_or(0.0), b.value.unwrap_or(0.0));
        }
    }
    for (theta, p) in [(0.75 * PI, 0.3), (1.9, 0.15), (PI, 0.4)] {
        let params = ModelParams::new(theta, p)?;
        for s in evolve(&params, &InitialState::SingleSeed, Chain::seed_cone(4), 4, 64, &[])?.snapshots {
            check(s.survival, s.survival_right);
        }
        for s in dense_channel_evolve(&params, &InitialState::SingleSeed, 2, Chain::seed_cone(2))?.snapshots {
            check(s.survival, s.survival_right);
        }
        let traj = trajectory_run(&params, 3, 1000, 4)?;
        for (a, b) in traj.survival.points.iter().zip(&traj.survival_right.points) {
            check(a.value.unwrap_or(0.0), b.value.unwrap_or(0.0));
        }
    }
    Ok((
        worst <= 1e-9,
        format!("max P_right − P = {worst:.1e} over {cases} points (classical, MPO, dense, trajectories)"),
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 13] = [
        ("oracle equivalence", oracle_equivalence),
        ("classical-point cross-engine", classical_cross_engine),
        ("classical criticality", classical_criticality),
        ("off-critical phenomenology", off_critical),
        ("level statistics", level_statistics),
        ("DMRG small-L oracle", dmrg_small_l),
        ("DMRG classical-point scaling", dmrg_scaling),
        ("quantum-point criticality", quantum_criticality),
        ("BST synthetic recovery", bst_synthetic),
        ("ZNE identities", zne_identities),
        ("absorbing-state invariance", absorbing_invariance),
        ("emitter contracts", emitter_contracts),
        ("survival-probability ordering", survival_ordering),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        if !selected.is_empty() && !selected.contains(&(k + 1)) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f));
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match outcome {
            Ok(Ok(r)) => r,
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(_) => (false, "panicked".into()),
        };
        failed += usize::from(!pass);
        println!(
            "{} criterion {:>2} ({name}): {detail} [{secs:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            k + 1
        );
    }
    println!("{} of {ran} criteria passed", ran - failed);
    if failed > 0 && std::env::var("FQCP_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
