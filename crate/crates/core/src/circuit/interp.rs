//! Program interpreters.
//!
//! The classical registers start at 0 and `z[j]` refers to qubit `j`. A `set`
//! evaluates every right-hand side before assigning. Measurements sample the
//! Born rule; a reset is a measurement followed by a flip on outcome 1.

use ndarray::{array, Array2};
use rand::Rng;

use crate::circuit::ir::{BitRef, Instruction, Program, Register, SingleQubitKind, TwoQubitKind};
use crate::error::{FqcpError, Result};
use crate::model::{gate_matrix, rotation, Axis};
use crate::oracle::kernels;
use crate::C64;

const ZERO_TOL: f64 = 1e-12;

pub fn single_qubit_matrix(kind: SingleQubitKind) -> Array2<C64> {
    let (o, z, i) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 1.0));
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    match kind {
        SingleQubitKind::X => array![[z, o], [o, z]],
        SingleQubitKind::H => array![[h, h], [h, -h]],
        SingleQubitKind::S => array![[o, z], [z, i]],
        SingleQubitKind::Sdg => array![[o, z], [z, -i]],
        SingleQubitKind::Rx(a) => rotation(Axis::X, a),
        SingleQubitKind::Ry(a) => rotation(Axis::Y, a),
    }
}

/// 4×4 matrix in the basis 2·bit(a) + bit(b).
pub fn two_qubit_matrix(kind: TwoQubitKind) -> Array2<C64> {
    match kind {
        TwoQubitKind::Rzz(phi) => {
            let mut m = Array2::<C64>::zeros((4, 4));
            for k in 0..4 {
                let parity = if (k >> 1) ^ (k & 1) == 0 { 1.0 } else { -1.0 };
                m[[k, k]] = C64::from_polar(1.0, -0.5 * phi * parity);
            }
            m
        }
        TwoQubitKind::ControlledRotation { axis, angle } => gate_matrix(axis, angle),
    }
}

/// Quantum state of the qubit register.
pub trait QubitBackend {
    fn apply_one(&mut self, q: usize, u: &Array2<C64>) -> Result<()>;
    fn apply_two(&mut self, a: usize, b: usize, u: &Array2<C64>) -> Result<()>;
    fn prob_one(&self, q: usize) -> f64;
    /// Project qubit `q` onto `outcome` and renormalize.
    fn project(&mut self, q: usize, outcome: bool);
}

/// Dense state vector; qubit 0 is the most significant bit.
#[derive(Clone, Debug)]
pub struct StateVector {
    pub n: usize,
    pub psi: Vec<C64>,
}

/// Largest register the state-vector backend accepts.
pub const STATE_VECTOR_QUBIT_CAP: usize = 24;

impl StateVector {
    pub fn zeros(n: usize) -> Result<Self> {
        if n > STATE_VECTOR_QUBIT_CAP {
            return Err(FqcpError::Resource(format!(
                "state vector of {n} qubits exceeds {STATE_VECTOR_QUBIT_CAP}"
            )));
        }
        let mut psi = vec![C64::new(0.0, 0.0); 1 << n];
        psi[0] = C64::new(1.0, 0.0);
        Ok(Self { n, psi })
    }
}

impl QubitBackend for StateVector {
    fn apply_one(&mut self, q: usize, u: &Array2<C64>) -> Result<()> {
        kernels::apply_one(&mut self.psi, self.n, q, u);
        Ok(())
    }

    fn apply_two(&mut self, a: usize, b: usize, u: &Array2<C64>) -> Result<()> {
        kernels::apply_two(&mut self.psi, self.n, a, b, &kernels::flat4(u));
        Ok(())
    }

    fn prob_one(&self, q: usize) -> f64 {
        let m = kernels::bit(self.n, q);
        self.psi
            .iter()
            .enumerate()
            .filter(|(k, _)| k & m != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    fn project(&mut self, q: usize, outcome: bool) {
        let m = kernels::bit(self.n, q);
        let mut norm = 0.0;
        for (k, a) in self.psi.iter_mut().enumerate() {
            if (k & m != 0) != outcome {
                *a = C64::new(0.0, 0.0);
            } else {
                norm += a.norm_sqr();
            }
        }
        let scale = 1.0 / norm.sqrt();
        self.psi.iter_mut().for_each(|a| *a *= scale);
    }
}

/// Unentangled register: one amplitude pair per qubit. Two-qubit gates must
/// keep the pair in a product state, which holds for the θ = π dynamics.
#[derive(Clone, Debug)]
pub struct ProductState {
    pub qubits: Vec<[C64; 2]>,
}

impl ProductState {
    pub fn zeros(n: usize) -> Self {
        Self {
            qubits: vec![[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]; n],
        }
    }
}

impl QubitBackend for ProductState {
    fn apply_one(&mut self, q: usize, u: &Array2<C64>) -> Result<()> {
        let [x, y] = self.qubits[q];
        self.qubits[q] = [u[[0, 0]] * x + u[[0, 1]] * y, u[[1, 0]] * x + u[[1, 1]] * y];
        Ok(())
    }

    fn apply_two(&mut self, a: usize, b: usize, u: &Array2<C64>) -> Result<()> {
        let (qa, qb) = (self.qubits[a], self.qubits[b]);
        let v: Vec<C64> = (0..4)
            .map(|r| (0..4).map(|c| u[[r, c]] * qa[c >> 1] * qb[c & 1]).sum())
            .collect();
        let rows = [[v[0], v[1]], [v[2], v[3]]];
        let norm = |r: &[C64; 2]| (r[0].norm_sqr() + r[1].norm_sqr()).sqrt();
        let big = if norm(&rows[0]) >= norm(&rows[1]) { 0 } else { 1 };
        let nb = norm(&rows[big]);
        let fb = [rows[big][0] / nb, rows[big][1] / nb];
        let fa: [C64; 2] = [0, 1].map(|i| fb[0].conj() * rows[i][0] + fb[1].conj() * rows[i][1]);
        let defect: f64 = (0..4)
            .map(|k| (v[k] - fa[k >> 1] * fb[k & 1]).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if defect > 1e-9 {
            return Err(FqcpError::Config(format!(
                "gate on qubits {a}, {b} entangles them; the product-state interpreter needs θ = π"
            )));
        }
        self.qubits[a] = fa;
        self.qubits[b] = fb;
        Ok(())
    }

    fn prob_one(&self, q: usize) -> f64 {
        let [x, y] = self.qubits[q];
        y.norm_sqr() / (x.norm_sqr() + y.norm_sqr())
    }

    fn project(&mut self, q: usize, outcome: bool) {
        let phase = |c: C64| if c.norm() > 0.0 { c / c.norm() } else { C64::new(1.0, 0.0) };
        let [x, y] = self.qubits[q];
        self.qubits[q] = if outcome {
            [C64::new(0.0, 0.0), phase(y)]
        } else {
            [phase(x), C64::new(0.0, 0.0)]
        };
    }
}

/// Record of one execution.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Shot {
    pub z: Vec<bool>,
    pub r: Vec<bool>,
    pub m: Vec<bool>,
    /// Conditional two-qubit gates executed.
    pub tq_activated: usize,
    /// Conditional measures/resets of reset channels (conditions reading `r`) executed.
    pub mr_activated: usize,
    /// Instructions whose condition read a set `z[j]` while qubit j was not |0⟩.
    pub elision_violations: Vec<usize>,
    pub executed: Vec<bool>,
}

impl Shot {
    pub fn read(&self, b: BitRef) -> bool {
        match b.reg {
            Register::Z => self.z[b.index],
            Register::R => self.r[b.index],
            Register::M => self.m[b.index],
        }
    }

    fn write(&mut self, b: BitRef, v: bool) {
        match b.reg {
            Register::Z => self.z[b.index] = v,
            Register::R => self.r[b.index] = v,
            Register::M => self.m[b.index] = v,
        }
    }

    /// Readout value of each measured site, in the program's readout order.
    pub fn site_values(&self, program: &Program) -> Vec<(i64, bool)> {
        program.readout.iter().map(|r| (r.site, self.m[r.bit])).collect()
    }
}

fn reads_random_bit(ins: &Instruction) -> bool {
    let mut bits = Vec::new();
    if let Some(c) = ins.condition() {
        c.bits(&mut bits);
    }
    bits.iter().any(|b| b.reg == Register::R)
}

/// Static totals matching the activation counters of [`Shot`].
pub fn conditional_totals(program: &Program) -> (usize, usize) {
    let mut tq = 0;
    let mut mr = 0;
    for ins in &program.instructions {
        match ins {
            Instruction::TwoQubitGate { condition: Some(_), .. } => tq += 1,
            Instruction::Measure { .. } | Instruction::Reset { .. } if reads_random_bit(ins) => mr += 1,
            _ => {}
        }
    }
    (tq, mr)
}

fn sample_outcome<B: QubitBackend, R: Rng>(backend: &mut B, q: usize, rng: &mut R) -> bool {
    let p1 = backend.prob_one(q).clamp(0.0, 1.0);
    let outcome = rng.random::<f64>() < p1;
    backend.project(q, outcome);
    outcome
}

/// Execute `program` once. With `check_elision`, every condition that reads a
/// set `z[j]` also checks that qubit j is in |0⟩.
pub fn run<B: QubitBackend, R: Rng>(
    program: &Program,
    backend: &mut B,
    rng: &mut R,
    check_elision: bool,
) -> Result<Shot> {
    let mut shot = Shot {
        z: vec![false; program.z_bits],
        r: vec![false; program.r_bits],
        m: vec![false; program.m_bits],
        executed: Vec::with_capacity(program.instructions.len()),
        ..Default::default()
    };
    let x = single_qubit_matrix(SingleQubitKind::X);
    for (k, ins) in program.instructions.iter().enumerate() {
        let go = match ins.condition() {
            Some(c) => {
                if check_elision {
                    let mut bits = Vec::new();
                    c.bits(&mut bits);
                    let unsound = bits
                        .iter()
                        .any(|b| b.reg == Register::Z && shot.z[b.index] && backend.prob_one(b.index) > ZERO_TOL);
                    if unsound {
                        shot.elision_violations.push(k);
                    }
                }
                c.eval(&|b| shot.read(b))
            }
            None => true,
        };
        shot.executed.push(go);
        if go {
            match ins {
                Instruction::TwoQubitGate { kind, a, b, condition } => {
                    backend.apply_two(*a, *b, &two_qubit_matrix(*kind))?;
                    shot.tq_activated += usize::from(condition.is_some());
                }
                Instruction::SingleQubitGate { kind, q, .. } => backend.apply_one(*q, &single_qubit_matrix(*kind))?,
                Instruction::Measure { q, target, .. } => {
                    let v = sample_outcome(backend, *q, rng);
                    shot.write(*target, v);
                }
                Instruction::Reset { q, .. } => {
                    if sample_outcome(backend, *q, rng) {
                        backend.apply_one(*q, &x)?;
                    }
                }
                Instruction::BitOp(assignments) => {
                    let values: Vec<bool> = assignments.iter().map(|(_, e)| e.eval(&|b| shot.read(b))).collect();
                    for ((b, _), v) in assignments.iter().zip(values) {
                        shot.write(*b, v);
                    }
                }
            }
            if matches!(ins, Instruction::Measure { .. } | Instruction::Reset { .. }) && reads_random_bit(ins) {
                shot.mr_activated += 1;
            }
        }
    }
    Ok(shot)
}

/// Full quantum trajectory of one shot.
pub fn run_state_vector<R: Rng>(program: &Program, rng: &mut R, check_elision: bool) -> Result<Shot> {
    let mut sv = StateVector::zeros(program.qubit_pool_size)?;
    run(program, &mut sv, rng, check_elision)
}

/// Bit-level control flow of one shot; needs a program whose gates keep qubits unentangled.
pub fn run_control_flow<R: Rng>(program: &Program, rng: &mut R) -> Result<Shot> {
    let mut ps = ProductState::zeros(program.qubit_pool_size);
    run(program, &mut ps, rng, true)
}
