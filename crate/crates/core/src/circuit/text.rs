//! Line-oriented program text.
//!
//! Every non-blank line that does not start with `#` is one statement ending
//! in `;`. Headers come first:
//!
//! ```text
//! fqcp-program 1;
//! qubits <n>;
//! creg z <n>;  creg r <n>;  creg m <n>;
//! meta t <n>;  meta theta <f64>;  meta p <f64>;  meta zne_fold <n>;
//! meta reuse_threshold <n | inf>;  meta reweight <f64>;  meta full_cone <true | false>;
//! readout <site> m[<k>];
//! ```
//!
//! followed by instructions, each optionally prefixed by `if (<expr>)`:
//!
//! ```text
//! rzz(<f64>) q[a], q[b];          crx(<f64>) q[c], q[t];     cry(<f64>) q[c], q[t];
//! x q[a];  h q[a];  s q[a];  sdg q[a];  rx(<f64>) q[a];  ry(<f64>) q[a];
//! measure q[a] -> <bit>;          reset q[a];
//! set <bit> = <expr>, <bit> = <expr>, ...;
//! ```
//!
//! `<bit>` is `z[k]`, `r[k]` or `m[k]`. Expressions use `!`, `&`, `|` (in
//! decreasing precedence, left-associative), parentheses and the constants
//! `0`, `1`. Angles are printed in shortest round-trip form, so
//! `parse(print(p)) == p` exactly.

use std::fmt::{self, Write as _};

use crate::circuit::ir::{
    BitExpr, BitRef, Instruction, Program, ProgramMeta, Register, SingleQubitKind, SiteReadout, TwoQubitKind,
};
use crate::error::{FqcpError, Result};
use crate::model::Axis;

pub const PROGRAM_MAGIC: &str = "fqcp-program";
pub const PROGRAM_VERSION: u32 = 1;

fn fmt_condition(f: &mut fmt::Formatter<'_>, c: &Option<BitExpr>) -> fmt::Result {
    match c {
        Some(e) => write!(f, "if ({e}) "),
        None => Ok(()),
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::TwoQubitGate { kind, a, b, condition } => {
                fmt_condition(f, condition)?;
                match kind {
                    TwoQubitKind::Rzz(phi) => write!(f, "rzz({phi})")?,
                    TwoQubitKind::ControlledRotation { axis, angle } => write!(f, "cr{axis}({angle})")?,
                }
                write!(f, " q[{a}], q[{b}];")
            }
            Instruction::SingleQubitGate { kind, q, condition } => {
                fmt_condition(f, condition)?;
                match kind {
                    SingleQubitKind::X => f.write_str("x")?,
                    SingleQubitKind::H => f.write_str("h")?,
                    SingleQubitKind::S => f.write_str("s")?,
                    SingleQubitKind::Sdg => f.write_str("sdg")?,
                    SingleQubitKind::Rx(a) => write!(f, "rx({a})")?,
                    SingleQubitKind::Ry(a) => write!(f, "ry({a})")?,
                }
                write!(f, " q[{q}];")
            }
            Instruction::Measure { q, target, condition } => {
                fmt_condition(f, condition)?;
                write!(f, "measure q[{q}] -> {target};")
            }
            Instruction::Reset { q, condition } => {
                fmt_condition(f, condition)?;
                write!(f, "reset q[{q}];")
            }
            Instruction::BitOp(assignments) => {
                f.write_str("set ")?;
                for (k, (b, e)) in assignments.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{b} = {e}")?;
                }
                f.write_str(";")
            }
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.meta;
        writeln!(f, "{PROGRAM_MAGIC} {PROGRAM_VERSION};")?;
        writeln!(f, "qubits {};", self.qubit_pool_size)?;
        for reg in Register::ALL {
            writeln!(f, "creg {} {};", reg.name(), self.register_size(reg))?;
        }
        writeln!(f, "meta t {};", m.t)?;
        writeln!(f, "meta theta {};", m.theta)?;
        writeln!(f, "meta p {};", m.p)?;
        writeln!(f, "meta zne_fold {};", m.zne_fold)?;
        match m.reuse_threshold {
            Some(n) => writeln!(f, "meta reuse_threshold {n};")?,
            None => writeln!(f, "meta reuse_threshold inf;")?,
        }
        writeln!(f, "meta reweight {};", m.reweight)?;
        writeln!(f, "meta full_cone {};", m.full_cone)?;
        for r in &self.readout {
            writeln!(f, "readout {} m[{}];", r.site, r.bit)?;
        }
        for ins in &self.instructions {
            writeln!(f, "{ins}")?;
        }
        Ok(())
    }
}

impl Program {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        write!(s, "{self}").expect("writing to a String");
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(String),
    Sym(&'static str),
}

fn lex(line: &str, n: usize) -> Result<Vec<Tok>> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '-' && chars.get(i + 1) == Some(&'>') {
            out.push(Tok::Sym("->"));
            i += 2;
        } else if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' {
            let start = i;
            i += 1;
            while i < chars.len() {
                let d = chars[i];
                let exp_sign = (d == '-' || d == '+') && matches!(chars[i - 1], 'e' | 'E');
                if d.is_ascii_alphanumeric() || d == '.' || exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            out.push(Tok::Num(chars[start..i].iter().collect()));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '-') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else {
            let sym = match c {
                '(' => "(",
                ')' => ")",
                '[' => "[",
                ']' => "]",
                ',' => ",",
                ';' => ";",
                '!' => "!",
                '&' => "&",
                '|' => "|",
                '=' => "=",
                other => return Err(parse_err(n, format!("unexpected character `{other}`"))),
            };
            out.push(Tok::Sym(sym));
            i += 1;
        }
    }
    Ok(out)
}

fn parse_err(line: usize, msg: impl Into<String>) -> FqcpError {
    FqcpError::Parse { line, msg: msg.into() }
}

struct Cursor<'a> {
    toks: &'a [Tok],
    pos: usize,
    line: usize,
}

impl Cursor<'_> {
    fn err(&self, msg: impl Into<String>) -> FqcpError {
        parse_err(self.line, msg)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Result<Tok> {
        let t = self.toks.get(self.pos).cloned().ok_or_else(|| self.err("unexpected end of line"))?;
        self.pos += 1;
        Ok(t)
    }

    fn at_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn sym(&mut self, s: &str) -> Result<()> {
        match self.next()? {
            Tok::Sym(x) if x == s => Ok(()),
            other => Err(self.err(format!("expected `{s}`, found {other:?}"))),
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.next()? {
            Tok::Ident(s) => Ok(s),
            other => Err(self.err(format!("expected a name, found {other:?}"))),
        }
    }

    fn number<T: std::str::FromStr>(&mut self) -> Result<T> {
        match self.next()? {
            Tok::Num(s) => s.parse().map_err(|_| self.err(format!("invalid number `{s}`"))),
            other => Err(self.err(format!("expected a number, found {other:?}"))),
        }
    }

    fn angle(&mut self) -> Result<f64> {
        self.sym("(")?;
        let a: f64 = self.number()?;
        if !a.is_finite() {
            return Err(self.err("angles must be finite"));
        }
        self.sym(")")?;
        Ok(a)
    }

    fn qubit(&mut self) -> Result<usize> {
        let name = self.ident()?;
        if name != "q" {
            return Err(self.err(format!("expected a qubit `q[..]`, found `{name}`")));
        }
        self.sym("[")?;
        let k = self.number()?;
        self.sym("]")?;
        Ok(k)
    }

    fn bit(&mut self) -> Result<BitRef> {
        let name = self.ident()?;
        self.bit_after(&name)
    }

    fn bit_after(&mut self, name: &str) -> Result<BitRef> {
        let reg = match name {
            "z" => Register::Z,
            "r" => Register::R,
            "m" => Register::M,
            other => return Err(self.err(format!("unknown register `{other}`"))),
        };
        self.sym("[")?;
        let index = self.number()?;
        self.sym("]")?;
        Ok(BitRef { reg, index })
    }

    fn expr(&mut self) -> Result<BitExpr> {
        let mut e = self.and_expr()?;
        while self.at_sym("|") {
            self.pos += 1;
            e = e.or(self.and_expr()?);
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> Result<BitExpr> {
        let mut e = self.unary()?;
        while self.at_sym("&") {
            self.pos += 1;
            e = e.and(self.unary()?);
        }
        Ok(e)
    }

    fn unary(&mut self) -> Result<BitExpr> {
        match self.next()? {
            Tok::Sym("!") => Ok(BitExpr::Not(Box::new(self.unary()?))),
            Tok::Sym("(") => {
                let e = self.expr()?;
                self.sym(")")?;
                Ok(e)
            }
            Tok::Num(s) if s == "0" => Ok(BitExpr::Const(false)),
            Tok::Num(s) if s == "1" => Ok(BitExpr::Const(true)),
            Tok::Ident(name) => Ok(BitExpr::Bit(self.bit_after(&name)?)),
            other => Err(self.err(format!("unexpected {other:?} in expression"))),
        }
    }

    fn end(&mut self) -> Result<()> {
        self.sym(";")?;
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(self.err(format!("trailing {t:?}"))),
        }
    }
}

fn parse_instruction(c: &mut Cursor<'_>, head: &str) -> Result<Instruction> {
    let (head, condition) = if head == "if" {
        c.sym("(")?;
        let e = c.expr()?;
        c.sym(")")?;
        (c.ident()?, Some(e))
    } else {
        (head.to_string(), None)
    };
    let single = |kind, c: &mut Cursor<'_>, condition| -> Result<Instruction> {
        let q = c.qubit()?;
        Ok(Instruction::SingleQubitGate { kind, q, condition })
    };
    let ins = match head.as_str() {
        "rzz" | "crx" | "cry" => {
            let angle = c.angle()?;
            let a = c.qubit()?;
            c.sym(",")?;
            let b = c.qubit()?;
            let kind = match head.as_str() {
                "rzz" => TwoQubitKind::Rzz(angle),
                "crx" => TwoQubitKind::ControlledRotation { axis: Axis::X, angle },
                _ => TwoQubitKind::ControlledRotation { axis: Axis::Y, angle },
            };
            Instruction::TwoQubitGate { kind, a, b, condition }
        }
        "x" => single(SingleQubitKind::X, c, condition)?,
        "h" => single(SingleQubitKind::H, c, condition)?,
        "s" => single(SingleQubitKind::S, c, condition)?,
        "sdg" => single(SingleQubitKind::Sdg, c, condition)?,
        "rx" => {
            let a = c.angle()?;
            single(SingleQubitKind::Rx(a), c, condition)?
        }
        "ry" => {
            let a = c.angle()?;
            single(SingleQubitKind::Ry(a), c, condition)?
        }
        "measure" => {
            let q = c.qubit()?;
            c.sym("->")?;
            let target = c.bit()?;
            Instruction::Measure { q, target, condition }
        }
        "reset" => Instruction::Reset { q: c.qubit()?, condition },
        "set" => {
            if condition.is_some() {
                return Err(c.err("`set` cannot be conditioned; fold the condition into the expression"));
            }
            let mut assignments = Vec::new();
            loop {
                let b = c.bit()?;
                c.sym("=")?;
                assignments.push((b, c.expr()?));
                if !c.at_sym(",") {
                    break;
                }
                c.pos += 1;
            }
            Instruction::BitOp(assignments)
        }
        other => return Err(c.err(format!("unknown instruction `{other}`"))),
    };
    c.end()?;
    Ok(ins)
}

#[derive(Default)]
struct Headers {
    version: Option<u32>,
    qubits: Option<usize>,
    regs: [Option<usize>; 3],
    t: Option<usize>,
    theta: Option<f64>,
    p: Option<f64>,
    zne_fold: Option<usize>,
    reuse_threshold: Option<Option<usize>>,
    reweight: Option<f64>,
    full_cone: Option<bool>,
}

fn parse_header(c: &mut Cursor<'_>, head: &str, h: &mut Headers, readout: &mut Vec<SiteReadout>) -> Result<bool> {
    match head {
        PROGRAM_MAGIC => h.version = Some(c.number()?),
        "qubits" => h.qubits = Some(c.number()?),
        "creg" => {
            let name = c.ident()?;
            let reg = Register::ALL
                .into_iter()
                .find(|r| r.name() == name)
                .ok_or_else(|| c.err(format!("unknown register `{name}`")))?;
            h.regs[reg.slot()] = Some(c.number()?);
        }
        "meta" => {
            let key = c.ident()?;
            match key.as_str() {
                "t" => h.t = Some(c.number()?),
                "theta" => h.theta = Some(c.number()?),
                "p" => h.p = Some(c.number()?),
                "zne_fold" => h.zne_fold = Some(c.number()?),
                "reweight" => h.reweight = Some(c.number()?),
                "reuse_threshold" => {
                    h.reuse_threshold = Some(match c.peek() {
                        Some(Tok::Ident(s)) if s == "inf" => {
                            c.pos += 1;
                            None
                        }
                        _ => Some(c.number()?),
                    })
                }
                "full_cone" => {
                    h.full_cone = Some(match c.ident()?.as_str() {
                        "true" => true,
                        "false" => false,
                        other => return Err(c.err(format!("expected true or false, found `{other}`"))),
                    })
                }
                other => return Err(c.err(format!("unknown meta key `{other}`"))),
            }
        }
        "readout" => {
            let site = c.number()?;
            let b = c.bit()?;
            if b.reg != Register::M {
                return Err(c.err("readout bits live in the m register"));
            }
            readout.push(SiteReadout { site, bit: b.index });
        }
        _ => return Ok(false),
    }
    c.end()?;
    Ok(true)
}

/// Parse program text as produced by [`Program::to_text`].
pub fn parse_program(text: &str) -> Result<Program> {
    let mut h = Headers::default();
    let mut readout = Vec::new();
    let mut instructions = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks = lex(line, k + 1)?;
        let mut c = Cursor {
            toks: &toks,
            pos: 0,
            line: k + 1,
        };
        let head = c.ident()?;
        if instructions.is_empty() && parse_header(&mut c, &head, &mut h, &mut readout)? {
            continue;
        }
        instructions.push(parse_instruction(&mut c, &head)?);
    }
    let missing = |what: &str| parse_err(0, format!("missing header `{what}`"));
    match h.version {
        Some(PROGRAM_VERSION) => {}
        Some(v) => return Err(parse_err(1, format!("unsupported program version {v}"))),
        None => return Err(missing(PROGRAM_MAGIC)),
    }
    let program = Program {
        qubit_pool_size: h.qubits.ok_or_else(|| missing("qubits"))?,
        z_bits: h.regs[0].ok_or_else(|| missing("creg z"))?,
        r_bits: h.regs[1].ok_or_else(|| missing("creg r"))?,
        m_bits: h.regs[2].ok_or_else(|| missing("creg m"))?,
        meta: ProgramMeta {
            t: h.t.ok_or_else(|| missing("meta t"))?,
            theta: h.theta.ok_or_else(|| missing("meta theta"))?,
            p: h.p.ok_or_else(|| missing("meta p"))?,
            zne_fold: h.zne_fold.ok_or_else(|| missing("meta zne_fold"))?,
            reuse_threshold: h.reuse_threshold.ok_or_else(|| missing("meta reuse_threshold"))?,
            reweight: h.reweight.ok_or_else(|| missing("meta reweight"))?,
            full_cone: h.full_cone.ok_or_else(|| missing("meta full_cone"))?,
        },
        readout,
        instructions,
    };
    program.validate().map_err(|msg| parse_err(0, msg))?;
    Ok(program)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Program {
        let z = |k| BitRef::z(k);
        Program {
            qubit_pool_size: 3,
            z_bits: 3,
            r_bits: 1,
            m_bits: 2,
            meta: ProgramMeta {
                t: 1,
                theta: 2.356194490192345,
                p: 0.3,
                zne_fold: 1,
                reuse_threshold: None,
                reweight: 0.7,
                full_cone: false,
            },
            readout: vec![SiteReadout { site: 0, bit: 1 }],
            instructions: vec![
                Instruction::SingleQubitGate {
                    kind: SingleQubitKind::Rx(1.1592794807274085),
                    q: 0,
                    condition: None,
                },
                Instruction::Measure {
                    q: 0,
                    target: BitRef::r(0),
                    condition: None,
                },
                Instruction::Reset { q: 0, condition: None },
                Instruction::BitOp(vec![(z(0), BitExpr::Const(false)), (z(1), BitExpr::Const(true))]),
                Instruction::TwoQubitGate {
                    kind: TwoQubitKind::Rzz(-1e-300),
                    a: 0,
                    b: 1,
                    condition: Some(BitExpr::not_bit(z(0))),
                },
                Instruction::BitOp(vec![(
                    z(2),
                    BitExpr::Not(Box::new(BitExpr::bit(z(0)).or(BitExpr::bit(BitRef::r(0))))).and(BitExpr::bit(z(1))),
                )]),
                Instruction::BitOp(vec![(
                    BitRef::m(0),
                    BitExpr::bit(z(0)).or(BitExpr::bit(z(1)).or(BitExpr::bit(z(2)))),
                )]),
                Instruction::Measure {
                    q: 1,
                    target: BitRef::m(1),
                    condition: Some(BitExpr::bit(BitRef::r(0)).and(BitExpr::not_bit(z(1)))),
                },
            ],
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let p = sample();
        let text = p.to_text();
        let back = parse_program(&text).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn precedence_and_parentheses() {
        let text = sample().to_text();
        assert!(text.contains("set z[2] = !(z[0] | r[0]) & z[1];"), "{text}");
        assert!(text.contains("set m[0] = z[0] | (z[1] | z[2]);"), "{text}");
        assert!(text.contains("if (r[0] & !z[1]) measure q[1] -> m[1];"), "{text}");
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = format!("# header comment\n\n{}", sample().to_text());
        assert_eq!(parse_program(&text).unwrap(), sample());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let mut text = sample().to_text();
        text.push_str("bogus q[0];\n");
        match parse_program(&text) {
            Err(FqcpError::Parse { line, .. }) => assert_eq!(line, text.lines().count()),
            other => panic!("{other:?}"),
        }
        let bad = sample().to_text().replace("qubits 3;", "qubits 1;");
        assert!(matches!(parse_program(&bad), Err(FqcpError::Parse { .. })));
        let unread = sample().to_text().replace("if (!z[0])", "if (!m[1])");
        assert!(parse_program(&unread).is_err());
    }
}
