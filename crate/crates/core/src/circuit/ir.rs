use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::Axis;

/// Classical registers: `z` marks qubits known to be |0⟩, `r` holds the random
/// reset bits, `m` the measurement record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Register {
    Z,
    R,
    M,
}

impl Register {
    pub const ALL: [Register; 3] = [Register::Z, Register::R, Register::M];

    pub fn name(self) -> &'static str {
        match self {
            Register::Z => "z",
            Register::R => "r",
            Register::M => "m",
        }
    }

    pub(crate) fn slot(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BitRef {
    pub reg: Register,
    pub index: usize,
}

impl BitRef {
    pub fn z(index: usize) -> Self {
        Self { reg: Register::Z, index }
    }

    pub fn r(index: usize) -> Self {
        Self { reg: Register::R, index }
    }

    pub fn m(index: usize) -> Self {
        Self { reg: Register::M, index }
    }
}

impl fmt::Display for BitRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.reg.name(), self.index)
    }
}

/// Boolean expression over classical bits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BitExpr {
    Const(bool),
    Bit(BitRef),
    Not(Box<BitExpr>),
    And(Box<BitExpr>, Box<BitExpr>),
    Or(Box<BitExpr>, Box<BitExpr>),
}

impl BitExpr {
    pub fn bit(b: BitRef) -> Self {
        BitExpr::Bit(b)
    }

    pub fn not_bit(b: BitRef) -> Self {
        BitExpr::Not(Box::new(BitExpr::Bit(b)))
    }

    pub fn and(self, other: BitExpr) -> Self {
        BitExpr::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: BitExpr) -> Self {
        BitExpr::Or(Box::new(self), Box::new(other))
    }

    pub fn eval(&self, read: &impl Fn(BitRef) -> bool) -> bool {
        match self {
            BitExpr::Const(c) => *c,
            BitExpr::Bit(b) => read(*b),
            BitExpr::Not(e) => !e.eval(read),
            BitExpr::And(a, b) => a.eval(read) && b.eval(read),
            BitExpr::Or(a, b) => a.eval(read) || b.eval(read),
        }
    }

    pub fn bits(&self, out: &mut Vec<BitRef>) {
        match self {
            BitExpr::Const(_) => {}
            BitExpr::Bit(b) => out.push(*b),
            BitExpr::Not(e) => e.bits(out),
            BitExpr::And(a, b) | BitExpr::Or(a, b) => {
                a.bits(out);
                b.bits(out);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            BitExpr::Or(..) => 0,
            BitExpr::And(..) => 1,
            _ => 2,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.precedence() < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            BitExpr::Const(c) => f.write_str(if *c { "1" } else { "0" })?,
            BitExpr::Bit(b) => write!(f, "{b}")?,
            BitExpr::Not(e) => {
                f.write_str("!")?;
                e.fmt_at(f, 2)?;
            }
            // operators are left-associative, so the right operand binds one level tighter
            BitExpr::And(a, b) => {
                a.fmt_at(f, 1)?;
                f.write_str(" & ")?;
                b.fmt_at(f, 2)?;
            }
            BitExpr::Or(a, b) => {
                a.fmt_at(f, 0)?;
                f.write_str(" | ")?;
                b.fmt_at(f, 1)?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for BitExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TwoQubitKind {
    /// exp(−i·φ·Z⊗Z/2)
    Rzz(f64),
    /// Rotation of the second qubit about `axis` when the first is |1⟩.
    ControlledRotation { axis: Axis, angle: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SingleQubitKind {
    X,
    H,
    S,
    Sdg,
    Rx(f64),
    Ry(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Instruction {
    TwoQubitGate {
        kind: TwoQubitKind,
        a: usize,
        b: usize,
        condition: Option<BitExpr>,
    },
    SingleQubitGate {
        kind: SingleQubitKind,
        q: usize,
        condition: Option<BitExpr>,
    },
    Measure {
        q: usize,
        target: BitRef,
        condition: Option<BitExpr>,
    },
    Reset {
        q: usize,
        condition: Option<BitExpr>,
    },
    BitOp(Vec<(BitRef, BitExpr)>),
}

impl Instruction {
    pub fn condition(&self) -> Option<&BitExpr> {
        match self {
            Instruction::TwoQubitGate { condition, .. }
            | Instruction::SingleQubitGate { condition, .. }
            | Instruction::Measure { condition, .. }
            | Instruction::Reset { condition, .. } => condition.as_ref(),
            Instruction::BitOp(_) => None,
        }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Instruction::TwoQubitGate { a, b, .. } => vec![*a, *b],
            Instruction::SingleQubitGate { q, .. } | Instruction::Measure { q, .. } | Instruction::Reset { q, .. } => {
                vec![*q]
            }
            Instruction::BitOp(_) => Vec::new(),
        }
    }

    pub fn is_rzz(&self) -> bool {
        matches!(self, Instruction::TwoQubitGate { kind: TwoQubitKind::Rzz(_), .. })
    }
}

/// Final-time measurement of lattice site `site` into `m[bit]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteReadout {
    pub site: i64,
    pub bit: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgramMeta {
    pub t: usize,
    pub theta: f64,
    pub p: f64,
    pub zne_fold: usize,
    /// `None` disables qubit reuse.
    pub reuse_threshold: Option<usize>,
    /// Factor for linear observables (1 − p when the first reset layer is skipped).
    pub reweight: f64,
    /// Whether the full light cone, not only its r ≥ 0 half, is simulated.
    pub full_cone: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub qubit_pool_size: usize,
    pub z_bits: usize,
    pub r_bits: usize,
    pub m_bits: usize,
    pub meta: ProgramMeta,
    pub readout: Vec<SiteReadout>,
    pub instructions: Vec<Instruction>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionCounts {
    pub rzz: usize,
    pub controlled_rotation: usize,
    pub single_qubit: usize,
    pub measure: usize,
    pub reset: usize,
    pub bit_op: usize,
    pub conditional_two_qubit: usize,
}

impl Program {
    pub fn register_size(&self, reg: Register) -> usize {
        match reg {
            Register::Z => self.z_bits,
            Register::R => self.r_bits,
            Register::M => self.m_bits,
        }
    }

    pub fn counts(&self) -> InstructionCounts {
        let mut c = InstructionCounts::default();
        for ins in &self.instructions {
            match ins {
                Instruction::TwoQubitGate { kind, condition, .. } => {
                    match kind {
                        TwoQubitKind::Rzz(_) => c.rzz += 1,
                        TwoQubitKind::ControlledRotation { .. } => c.controlled_rotation += 1,
                    }
                    c.conditional_two_qubit += usize::from(condition.is_some());
                }
                Instruction::SingleQubitGate { .. } => c.single_qubit += 1,
                Instruction::Measure { .. } => c.measure += 1,
                Instruction::Reset { .. } => c.reset += 1,
                Instruction::BitOp(_) => c.bit_op += 1,
            }
        }
        c
    }

    /// Checks qubit and bit ranges and that every condition or right-hand side
    /// reads only bits written earlier. Returns a description of the first violation.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let mut written: [Vec<bool>; 3] = [
            vec![false; self.z_bits],
            vec![false; self.r_bits],
            vec![false; self.m_bits],
        ];
        let check_bit = |b: &BitRef, written: &[Vec<bool>; 3], k: usize, need_written: bool| {
            match written[b.reg.slot()].get(b.index) {
                None => Err(format!("instruction {k}: {b} outside its register")),
                Some(false) if need_written => Err(format!("instruction {k}: {b} read before it is written")),
                _ => Ok(()),
            }
        };
        for (k, ins) in self.instructions.iter().enumerate() {
            for q in ins.qubits() {
                if q >= self.qubit_pool_size {
                    return Err(format!("instruction {k}: qubit {q} outside a pool of {}", self.qubit_pool_size));
                }
            }
            if let Instruction::TwoQubitGate { a, b, .. } = ins {
                if a == b {
                    return Err(format!("instruction {k}: two-qubit gate on a single qubit"));
                }
            }
            let mut reads = Vec::new();
            if let Some(c) = ins.condition() {
                c.bits(&mut reads);
            }
            if let Instruction::BitOp(assignments) = ins {
                for (_, e) in assignments {
                    e.bits(&mut reads);
                }
            }
            for b in &reads {
                check_bit(b, &written, k, true)?;
            }
            let targets: Vec<BitRef> = match ins {
                Instruction::Measure { target, .. } => vec![*target],
                Instruction::BitOp(assignments) => assignments.iter().map(|(b, _)| *b).collect(),
                _ => Vec::new(),
            };
            for b in &targets {
                check_bit(b, &written, k, false)?;
                written[b.reg.slot()][b.index] = true;
            }
        }
        for r in &self.readout {
            if r.bit >= self.m_bits {
                return Err(format!("readout of site {} into m[{}] outside the register", r.site, r.bit));
            }
        }
        Ok(())
    }
}
