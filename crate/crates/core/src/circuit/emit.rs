use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::circuit::ir::{
    BitExpr, BitRef, Instruction, Program, ProgramMeta, SingleQubitKind, SiteReadout, TwoQubitKind,
};
use crate::error::{config, Result};
use crate::model::{Axis, ChannelVariant, ModelParams};
use crate::schedule::{GateOp, GATE_LAYERS};

pub const DEFAULT_REUSE_THRESHOLD: usize = 10;
/// The whole 4t+1-site light cone is simulated when it fits in this many qubits.
pub const DEFAULT_FULL_CONE_BUDGET: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmitOptions {
    /// 1 (plain) or 3 (each RZZ folded into three).
    pub zne_fold: usize,
    /// Freed qubits are recycled only once this many have been allocated; `None` never recycles.
    pub reuse_threshold: Option<usize>,
    pub skip_first_reset_layer: bool,
    pub full_cone_budget: usize,
    /// Lower controlled rotations to RZZ plus single-qubit gates.
    pub decompose: bool,
}

impl Default for EmitOptions {
    fn default() -> Self {
        Self {
            zne_fold: 1,
            reuse_threshold: Some(DEFAULT_REUSE_THRESHOLD),
            skip_first_reset_layer: true,
            full_cone_budget: DEFAULT_FULL_CONE_BUDGET,
            decompose: true,
        }
    }
}

impl EmitOptions {
    pub fn full_cone(&self, t: usize) -> bool {
        4 * t + 1 <= self.full_cone_budget
    }
}

/// A lattice-level operation of the compiled cone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeOp {
    Reset { site: i64 },
    Gate(GateOp),
}

impl ConeOp {
    fn sites(&self) -> ([i64; 2], usize) {
        match self {
            ConeOp::Reset { site } => ([*site, *site], 1),
            ConeOp::Gate(g) => ([g.control, g.target], 2),
        }
    }

    fn left(&self) -> i64 {
        match self {
            ConeOp::Reset { site } => *site,
            ConeOp::Gate(g) => g.left(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledOp {
    /// Time step, starting at 0.
    pub step: usize,
    /// Index of the layer (reset or gate) in the unscheduled circuit.
    pub layer: usize,
    pub op: ConeOp,
}

/// Live range of one lattice site on one physical qubit, in scheduled-op indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub site: i64,
    pub qubit: usize,
    pub first: usize,
    pub last: usize,
    /// Whether the qubit held another site before.
    pub reused: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitSchedule {
    pub t: usize,
    pub full_cone: bool,
    pub ops: Vec<ScheduledOp>,
    pub allocations: Vec<Allocation>,
    pub pool_size: usize,
    /// Sites read out at the final time, ascending.
    pub measured: Vec<i64>,
}

/// Site window of step `s` (1-based). The half cone keeps only what can still
/// reach r ≥ 0 by time t; both windows contain the forward cone of the seed.
fn window(t: usize, s: usize, full: bool) -> (i64, i64) {
    let (t, s) = (t as i64, s as i64);
    let hi = 2 * s;
    let lo = if full { -2 * s } else { (-2 * s).max(-(2 * (t - s) + 1)) };
    (lo, hi)
}

fn cone_ops(params: &ModelParams, t: usize, full: bool, skip_first: bool) -> Vec<ScheduledOp> {
    let mut ops = Vec::new();
    let mut layer = 0;
    for s in 1..=t {
        let step = s - 1;
        let (lo, hi) = window(t, s, full);
        if !(skip_first && s == 1) {
            ops.extend((lo..=hi).map(|site| ScheduledOp {
                step,
                layer,
                op: ConeOp::Reset { site },
            }));
            layer += 1;
        }
        for (parity, dir) in GATE_LAYERS {
            for c in lo..=hi {
                if c.rem_euclid(2) == parity && (lo..=hi).contains(&(c + dir)) {
                    ops.push(ScheduledOp {
                        step,
                        layer,
                        op: ConeOp::Gate(GateOp {
                            control: c,
                            target: c + dir,
                            axis: params.axis(c, step),
                        }),
                    });
                }
            }
            layer += 1;
        }
    }
    ops
}

/// List scheduling over per-site dependency chains. Among ready operations the
/// one minimizing 4·(left site) + layer runs first, which sweeps the cone as a
/// diagonal front; a qubit is allocated at a site's first operation and freed
/// after its last.
pub fn schedule_cone(params: &ModelParams, t: usize, opts: &EmitOptions) -> Result<QubitSchedule> {
    if t < 1 {
        return config("circuit emission needs t ≥ 1");
    }
    let full = opts.full_cone(t);
    let ops = cone_ops(params, t, full, opts.skip_first_reset_layer);
    let n = ops.len();
    let mut indegree = vec![0usize; n];
    let mut successors: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut previous: BTreeMap<i64, usize> = BTreeMap::new();
    for (i, o) in ops.iter().enumerate() {
        let (sites, k) = o.op.sites();
        for &site in &sites[..k] {
            if let Some(p) = previous.insert(site, i) {
                successors[p].push(i);
                indegree[i] += 1;
            }
        }
    }
    let key = |i: usize| (4 * ops[i].op.left() + ops[i].layer as i64, ops[i].layer, i);
    let mut ready: BinaryHeap<Reverse<(i64, usize, usize)>> =
        (0..n).filter(|&i| indegree[i] == 0).map(|i| Reverse(key(i))).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse((_, _, i))) = ready.pop() {
        order.push(ops[i]);
        for &j in &successors[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                ready.push(Reverse(key(j)));
            }
        }
    }
    let mut last: BTreeMap<i64, usize> = BTreeMap::new();
    for (i, o) in order.iter().enumerate() {
        let (sites, k) = o.op.sites();
        for &site in &sites[..k] {
            last.insert(site, i);
        }
    }
    let threshold = opts.reuse_threshold.unwrap_or(usize::MAX);
    let mut live: BTreeMap<i64, usize> = BTreeMap::new();
    let mut free: Vec<usize> = Vec::new();
    let mut pool = 0;
    let mut allocations = Vec::new();
    for (i, o) in order.iter().enumerate() {
        let (sites, k) = o.op.sites();
        for &site in &sites[..k] {
            if live.contains_key(&site) {
                continue;
            }
            let (qubit, reused) = match free.pop() {
                Some(q) if pool >= threshold => (q, true),
                other => {
                    free.extend(other);
                    pool += 1;
                    (pool - 1, false)
                }
            };
            live.insert(site, allocations.len());
            allocations.push(Allocation {
                site,
                qubit,
                first: i,
                last: last[&site],
                reused,
            });
        }
        for &site in &sites[..k] {
            if last[&site] == i {
                if let Some(a) = live.remove(&site) {
                    free.push(allocations[a].qubit);
                }
            }
        }
    }
    let (lo, hi) = window(t, t, full);
    let measured = (if full { lo } else { 0 }..=hi).collect();
    Ok(QubitSchedule {
        t,
        full_cone: full,
        ops: order,
        allocations,
        pool_size: pool,
        measured,
    })
}

/// Largest number of simultaneously live qubits for the default emission.
pub fn qubit_count(t: usize, reuse_threshold: Option<usize>) -> usize {
    let params = ModelParams::classical_point(0.0).expect("valid parameters");
    let opts = EmitOptions {
        reuse_threshold,
        ..EmitOptions::default()
    };
    schedule_cone(&params, t.max(1), &opts).map_or(1, |s| s.pool_size)
}

/// Basis change B with B·Z·B† = σ_axis, as gates in time order.
fn basis_change(axis: Axis) -> &'static [SingleQubitKind] {
    match axis {
        Axis::X => &[SingleQubitKind::H],
        Axis::Y => &[SingleQubitKind::H, SingleQubitKind::S],
    }
}

fn basis_change_inverse(axis: Axis) -> &'static [SingleQubitKind] {
    match axis {
        Axis::X => &[SingleQubitKind::H],
        Axis::Y => &[SingleQubitKind::Sdg, SingleQubitKind::H],
    }
}

/// Controlled rotation as (time-ordered) native gates on (control, target):
/// CR_a(θ) = R_a(θ/2)_t · B_t · RZZ(−θ/2) · B_t†.
pub fn decompose_controlled_rotation(axis: Axis, theta: f64, zne_fold: usize) -> Vec<(NativeGate, Wire)> {
    let mut out: Vec<(NativeGate, Wire)> = basis_change_inverse(axis)
        .iter()
        .map(|&g| (NativeGate::One(g), Wire::Target))
        .collect();
    out.extend(fold_rzz(-theta / 2.0, zne_fold));
    out.extend(basis_change(axis).iter().map(|&g| (NativeGate::One(g), Wire::Target)));
    let half = match axis {
        Axis::X => SingleQubitKind::Rx(theta / 2.0),
        Axis::Y => SingleQubitKind::Ry(theta / 2.0),
    };
    out.push((NativeGate::One(half), Wire::Target));
    out
}

/// RZZ(φ), or RZZ(φ)·X_c·RZZ(φ)·X_c·RZZ(φ) when folded, which equals RZZ(φ).
pub fn fold_rzz(phi: f64, zne_fold: usize) -> Vec<(NativeGate, Wire)> {
    let rzz = (NativeGate::Rzz(phi), Wire::Both);
    if zne_fold == 3 {
        let x = (NativeGate::One(SingleQubitKind::X), Wire::Control);
        vec![rzz, x, rzz, x, rzz]
    } else {
        vec![rzz]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NativeGate {
    Rzz(f64),
    One(SingleQubitKind),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wire {
    Control,
    Target,
    Both,
}

struct Emitter {
    out: Vec<Instruction>,
    z_static: BTreeMap<i64, bool>,
}

impl Emitter {
    fn push(&mut self, ins: Instruction) {
        self.out.push(ins);
    }

    fn set(&mut self, assignments: Vec<(BitRef, BitExpr)>) {
        self.push(Instruction::BitOp(assignments));
    }

    /// Whether the site is |0⟩ on every control path, so its operations can be dropped.
    fn known_zero(&self, site: i64) -> bool {
        self.z_static.get(&site).copied().unwrap_or(true)
    }
}

/// Compile the single-seed FQCP run to time `t` into a conditional program.
pub fn emit(params: &ModelParams, t: usize, opts: &EmitOptions) -> Result<Program> {
    params.validate()?;
    if opts.zne_fold != 1 && opts.zne_fold != 3 {
        return config(format!("zne_fold must be 1 or 3, got {}", opts.zne_fold));
    }
    if params.channel_variant != ChannelVariant::ProbabilisticReset {
        return config("circuit emission supports the probabilistic reset channel only");
    }
    let sched = schedule_cone(params, t, opts)?;
    let p = params.p();
    let resets_fire = p > 0.0;
    let theta_p = 2.0 * p.sqrt().asin();

    // static activity, used both to drop dead operations and to number channels
    let mut z_static: BTreeMap<i64, bool> = BTreeMap::from([(0, false)]);
    let mut channel_of_op: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, o) in sched.ops.iter().enumerate() {
        match o.op {
            ConeOp::Reset { site } => {
                if resets_fire && !z_static.get(&site).copied().unwrap_or(true) {
                    let l = channel_of_op.len();
                    channel_of_op.insert(i, l);
                }
            }
            ConeOp::Gate(g) => {
                if !z_static.get(&g.control).copied().unwrap_or(true) {
                    z_static.insert(g.target, false);
                }
            }
        }
    }
    let n_channels = channel_of_op.len();

    let mut em = Emitter {
        out: Vec::new(),
        z_static: BTreeMap::from([(0, false)]),
    };
    // random bits on one recycled ancilla; qubit 0 is handed out fresh afterwards
    for l in 0..n_channels {
        em.push(Instruction::SingleQubitGate {
            kind: SingleQubitKind::Rx(theta_p),
            q: 0,
            condition: None,
        });
        em.push(Instruction::Measure {
            q: 0,
            target: BitRef::r(l),
            condition: None,
        });
        em.push(Instruction::Reset { q: 0, condition: None });
    }

    let mut starts: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut ends: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (a, alloc) in sched.allocations.iter().enumerate() {
        starts.entry(alloc.first).or_default().push(a);
        ends.entry(alloc.last).or_default().push(a);
    }
    let measured: BTreeMap<i64, usize> = sched
        .measured
        .iter()
        .enumerate()
        .map(|(k, &site)| (site, n_channels + k))
        .collect();
    let mut qubit_of: BTreeMap<i64, usize> = BTreeMap::new();
    let z = BitRef::z;

    for (i, o) in sched.ops.iter().enumerate() {
        for &a in starts.get(&i).into_iter().flatten() {
            let alloc = sched.allocations[a];
            let q = alloc.qubit;
            if alloc.reused {
                em.push(Instruction::Reset {
                    q,
                    condition: Some(BitExpr::not_bit(z(q))),
                });
            }
            if alloc.site == 0 {
                em.push(Instruction::SingleQubitGate {
                    kind: SingleQubitKind::X,
                    q,
                    condition: None,
                });
            }
            em.set(vec![(z(q), BitExpr::Const(alloc.site != 0))]);
            qubit_of.insert(alloc.site, q);
        }
        match o.op {
            ConeOp::Reset { site } => {
                if let Some(&l) = channel_of_op.get(&i) {
                    let q = qubit_of[&site];
                    let cond = BitExpr::bit(BitRef::r(l)).and(BitExpr::not_bit(z(q)));
                    em.push(Instruction::Measure {
                        q,
                        target: BitRef::m(l),
                        condition: Some(cond.clone()),
                    });
                    em.push(Instruction::Reset { q, condition: Some(cond) });
                    em.set(vec![(z(q), BitExpr::bit(z(q)).or(BitExpr::bit(BitRef::r(l))))]);
                }
            }
            ConeOp::Gate(g) => {
                if !em.known_zero(g.control) {
                    let (qc, qt) = (qubit_of[&g.control], qubit_of[&g.target]);
                    let cond = BitExpr::not_bit(z(qc));
                    if opts.decompose {
                        for (gate, wire) in decompose_controlled_rotation(g.axis, params.theta, opts.zne_fold) {
                            let q = if wire == Wire::Control { qc } else { qt };
                            em.push(match gate {
                                NativeGate::Rzz(phi) => Instruction::TwoQubitGate {
                                    kind: TwoQubitKind::Rzz(phi),
                                    a: qc,
                                    b: qt,
                                    condition: Some(cond.clone()),
                                },
                                NativeGate::One(kind) => Instruction::SingleQubitGate {
                                    kind,
                                    q,
                                    condition: Some(cond.clone()),
                                },
                            });
                        }
                    } else {
                        em.push(Instruction::TwoQubitGate {
                            kind: TwoQubitKind::ControlledRotation {
                                axis: g.axis,
                                angle: params.theta,
                            },
                            a: qc,
                            b: qt,
                            condition: Some(cond),
                        });
                    }
                    em.set(vec![(z(qt), BitExpr::bit(z(qt)).and(BitExpr::bit(z(qc))))]);
                    em.z_static.insert(g.target, false);
                }
            }
        }
        for &a in ends.get(&i).into_iter().flatten() {
            let alloc = sched.allocations[a];
            if let Some(&bit) = measured.get(&alloc.site) {
                if !em.known_zero(alloc.site) {
                    em.push(Instruction::Measure {
                        q: alloc.qubit,
                        target: BitRef::m(bit),
                        condition: Some(BitExpr::not_bit(z(alloc.qubit))),
                    });
                }
            }
            qubit_of.remove(&alloc.site);
        }
    }

    Ok(Program {
        qubit_pool_size: sched.pool_size,
        z_bits: sched.pool_size,
        r_bits: n_channels,
        m_bits: n_channels + sched.measured.len(),
        meta: ProgramMeta {
            t,
            theta: params.theta,
            p,
            zne_fold: opts.zne_fold,
            reuse_threshold: opts.reuse_threshold,
            reweight: if opts.skip_first_reset_layer { 1.0 - p } else { 1.0 },
            full_cone: sched.full_cone,
        },
        readout: measured
            .into_iter()
            .map(|(site, bit)| SiteReadout { site, bit })
            .collect(),
        instructions: em.out,
    })
}
