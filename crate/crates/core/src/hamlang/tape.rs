//! Forward-mode evaluation over a flattened post-order tape.
//!
//! Each slot holds a jet `[value, d/dq_1.., d/dp_1.., d/dz]` of width
//! `2n + 2`; slots are laid out contiguously in one scratch buffer so an
//! evaluation allocates at most once.

use std::ops::Range;

use super::ast::{BinOp, Expr, Func, Node, Var, SMOOTH_ABS_EPS};

#[derive(Debug, Clone)]
pub(crate) enum Op {
    Const(f64),
    Var(Var),
    Neg(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    PowConst(usize, f64),
    Pow(usize, usize),
    Call(Func, usize),
    Cutoff { r0: f64, w: f64 },
}

#[derive(Debug, Clone)]
pub(crate) struct Instr {
    pub op: Op,
    pub span: Range<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct Tape {
    pub instrs: Vec<Instr>,
    pub dim: usize,
}

/// Failure inside the tape; the caller turns it into a located error.
#[derive(Debug)]
pub(crate) struct DomainFault {
    pub span: Range<usize>,
    pub message: String,
}

impl Tape {
    pub fn compile(expr: &Expr, dim: usize) -> Tape {
        let mut instrs = Vec::new();
        emit(expr, &mut instrs);
        Tape { instrs, dim }
    }

    pub fn width(&self) -> usize {
        2 * self.dim + 2
    }

    /// Evaluates at `state = [q.., p.., z]`. On success the returned slice
    /// is the root jet.
    pub fn eval<'s>(
        &self,
        t: f64,
        state: &[f64],
        scratch: &'s mut Vec<f64>,
    ) -> Result<&'s [f64], DomainFault> {
        let n = self.dim;
        let w = self.width();
        let m = w - 1;
        scratch.clear();
        scratch.resize(self.instrs.len() * w, 0.0);

        for (slot, instr) in self.instrs.iter().enumerate() {
            let (done, rest) = scratch.split_at_mut(slot * w);
            let out = &mut rest[..w];
            let jet = |i: usize| &done[i * w..(i + 1) * w];
            let fault = |message: String| DomainFault {
                span: instr.span.clone(),
                message,
            };
            match instr.op {
                Op::Const(c) => out[0] = c,
                Op::Var(v) => match v {
                    Var::T => out[0] = t,
                    Var::Q(i) => {
                        out[0] = state[i];
                        out[1 + i] = 1.0;
                    }
                    Var::P(i) => {
                        out[0] = state[n + i];
                        out[1 + n + i] = 1.0;
                    }
                    Var::Z => {
                        out[0] = state[2 * n];
                        out[m] = 1.0;
                    }
                },
                Op::Neg(a) => {
                    for (o, x) in out.iter_mut().zip(jet(a)) {
                        *o = -x;
                    }
                }
                Op::Add(a, b) => {
                    for ((o, x), y) in out.iter_mut().zip(jet(a)).zip(jet(b)) {
                        *o = x + y;
                    }
                }
                Op::Sub(a, b) => {
                    for ((o, x), y) in out.iter_mut().zip(jet(a)).zip(jet(b)) {
                        *o = x - y;
                    }
                }
                Op::Mul(a, b) => {
                    let (x, y) = (jet(a), jet(b));
                    out[0] = x[0] * y[0];
                    for k in 1..w {
                        out[k] = x[k] * y[0] + x[0] * y[k];
                    }
                }
                Op::Div(a, b) => {
                    let (x, y) = (jet(a), jet(b));
                    if y[0] == 0.0 {
                        return Err(fault("division by zero".into()));
                    }
                    let v = x[0] / y[0];
                    out[0] = v;
                    for k in 1..w {
                        out[k] = (x[k] - v * y[k]) / y[0];
                    }
                }
                Op::PowConst(a, c) => {
                    let x = jet(a);
                    let (v, d) = pow_const(x[0], c).map_err(|m| fault(m.into()))?;
                    out[0] = v;
                    for k in 1..w {
                        out[k] = d * x[k];
                    }
                }
                Op::Pow(a, b) => {
                    let (x, y) = (jet(a), jet(b));
                    if x[0] <= 0.0 {
                        return Err(fault(format!(
                            "variable exponent requires a positive base, got {}",
                            x[0]
                        )));
                    }
                    let ln = x[0].ln();
                    let v = (y[0] * ln).exp();
                    out[0] = v;
                    for k in 1..w {
                        out[k] = v * (y[k] * ln + y[0] * x[k] / x[0]);
                    }
                }
                Op::Call(func, a) => {
                    let x = jet(a);
                    let (v, d) = call(func, x[0]).map_err(|m| fault(m.into()))?;
                    out[0] = v;
                    for k in 1..w {
                        out[k] = d * x[k];
                    }
                }
                Op::Cutoff { r0, w: width } => {
                    let r = state.iter().map(|s| s * s).sum::<f64>().sqrt();
                    let (v, dr) = radial_cutoff(r, r0, width);
                    out[0] = v;
                    if dr != 0.0 {
                        for k in 1..w {
                            out[k] = dr * state[k - 1] / r;
                        }
                    }
                }
            }
        }
        let root = self.instrs.len() - 1;
        Ok(&scratch[root * w..(root + 1) * w])
    }
}

fn emit(expr: &Expr, out: &mut Vec<Instr>) -> usize {
    let op = match &expr.node {
        Node::Const(c) => Op::Const(*c),
        Node::Var(v) => Op::Var(*v),
        Node::Neg(a) => Op::Neg(emit(a, out)),
        Node::Binary(op, a, b) => {
            if let (BinOp::Pow, Some(c)) = (op, b.as_const()) {
                Op::PowConst(emit(a, out), c)
            } else {
                let ia = emit(a, out);
                let ib = emit(b, out);
                match op {
                    BinOp::Add => Op::Add(ia, ib),
                    BinOp::Sub => Op::Sub(ia, ib),
                    BinOp::Mul => Op::Mul(ia, ib),
                    BinOp::Div => Op::Div(ia, ib),
                    BinOp::Pow => Op::Pow(ia, ib),
                }
            }
        }
        Node::Call(f, a) => Op::Call(*f, emit(a, out)),
        Node::Cutoff { r0, w } => Op::Cutoff { r0: *r0, w: *w },
    };
    out.push(Instr {
        op,
        span: expr.span.clone(),
    });
    out.len() - 1
}

/// Value and derivative of `x^c` for a constant exponent.
fn pow_const(x: f64, c: f64) -> Result<(f64, f64), &'static str> {
    if c == 0.0 {
        return Ok((1.0, 0.0));
    }
    if c.fract() == 0.0 && c.abs() < 2f64.powi(31) {
        let k = c as i32;
        if x == 0.0 && k < 0 {
            return Err("negative power of zero");
        }
        return Ok((x.powi(k), c * x.powi(k - 1)));
    }
    if x < 0.0 {
        return Err("fractional power of a negative number");
    }
    if x == 0.0 {
        if c < 1.0 {
            return Err("fractional power of zero has no derivative");
        }
        return Ok((0.0, 0.0));
    }
    let v = x.powf(c);
    Ok((v, c * v / x))
}

fn call(func: Func, x: f64) -> Result<(f64, f64), &'static str> {
    Ok(match func {
        Func::Sin => (x.sin(), x.cos()),
        Func::Cos => (x.cos(), -x.sin()),
        Func::Exp => {
            let e = x.exp();
            (e, e)
        }
        Func::Log => {
            if x <= 0.0 {
                return Err("logarithm of a nonpositive number");
            }
            (x.ln(), 1.0 / x)
        }
        Func::Tanh => {
            let th = x.tanh();
            (th, 1.0 - th * th)
        }
        Func::Sqrt => {
            if x < 0.0 {
                return Err("square root of a negative number");
            }
            if x == 0.0 {
                return Err("square root at zero has no derivative");
            }
            let s = x.sqrt();
            (s, 0.5 / s)
        }
        Func::SmoothAbs => {
            let s = (x * x + SMOOTH_ABS_EPS * SMOOTH_ABS_EPS).sqrt();
            (s, x / s)
        }
    })
}

/// `exp(-1/s)` for `s > 0`, else 0, with its derivative.
fn sigma(s: f64) -> (f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0);
    }
    let v = (-1.0 / s).exp();
    if v == 0.0 {
        (0.0, 0.0)
    } else {
        (v, v / (s * s))
    }
}

/// Smooth partition-of-unity cutoff `chi(r)` and `chi'(r)`.
pub(crate) fn radial_cutoff(r: f64, r0: f64, w: f64) -> (f64, f64) {
    if r <= r0 {
        return (1.0, 0.0);
    }
    if r >= r0 + w {
        return (0.0, 0.0);
    }
    let (a, da) = sigma((r0 + w - r) / w);
    let (b, db) = sigma((r - r0) / w);
    let da = -da / w;
    let db = db / w;
    let sum = a + b;
    (a / sum, (da * b - a * db) / (sum * sum))
}
