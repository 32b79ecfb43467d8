//! Contact Hamiltonians `H(t, q, p, z)` written as expressions.
//!
//! Expressions are parsed once into an immutable tree plus a compiled tape;
//! evaluation returns the value together with exact first partials by
//! forward-mode differentiation. See [`parse`](self::parse) for the grammar.

mod ast;
mod parse;
mod tape;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use ast::{BinOp, Expr, Func, Node, Var, SMOOTH_ABS_EPS};

use crate::contact::ContactPoint;
use crate::error::{Error, Result};
use tape::Tape;

/// Value and first partials of a Hamiltonian at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetValue {
    pub value: f64,
    pub d_q: Vec<f64>,
    pub d_p: Vec<f64>,
    pub d_z: f64,
}

/// A parsed contact Hamiltonian on `J^1 R^n`.
#[derive(Debug, Clone)]
pub struct HamiltonianExpr {
    source: String,
    ast: Expr,
    tape: Tape,
    dim: usize,
    support_radius: Option<f64>,
}

impl HamiltonianExpr {
    pub fn parse(src: &str, dim: usize) -> Result<Self> {
        let ast = parse::parse_expr(src, dim)?;
        let tape = Tape::compile(&ast, dim);
        Ok(HamiltonianExpr {
            source: src.to_string(),
            ast,
            tape,
            dim,
            support_radius: None,
        })
    }

    /// The identically zero Hamiltonian.
    pub fn zero(dim: usize) -> Result<Self> {
        Self::parse("0", dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    /// Radius outside of which `H` is claimed to vanish, if known.
    pub fn support_radius(&self) -> Option<f64> {
        self.support_radius
    }

    pub fn with_support_radius(mut self, radius: Option<f64>) -> Self {
        self.support_radius = radius;
        self
    }

    /// True when `z` never occurs in the expression (cutoffs count as
    /// `z`-dependent).
    pub fn is_syntactically_z_free(&self) -> bool {
        !self.ast.depends_on_z()
    }

    pub fn evaluator(&self) -> Evaluator<'_> {
        Evaluator {
            expr: self,
            scratch: Vec::with_capacity(self.tape.instrs.len() * self.tape.width()),
            state: Vec::with_capacity(2 * self.dim + 1),
        }
    }

    pub fn eval(&self, t: f64, y: &ContactPoint) -> Result<f64> {
        self.evaluator().value(t, y)
    }

    pub fn eval_with_partials(&self, t: f64, y: &ContactPoint) -> Result<JetValue> {
        self.evaluator().jet(t, y)
    }

    /// Multiplies `H` by the smooth radial cutoff that is 1 for
    /// `|(q,p,z)| <= r0` and exactly 0 for `|(q,p,z)| >= r0 + w`.
    ///
    /// The profile is `chi(r) = s(a) / (s(a) + s(b))` with
    /// `a = (r0 + w - r) / w`, `b = (r - r0) / w` and `s(x) = exp(-1/x)`
    /// for `x > 0`, `s(x) = 0` otherwise.
    pub fn compactify(&self, r0: f64, w: f64) -> Result<Self> {
        if !(r0 > 0.0 && r0.is_finite()) || !(w > 0.0 && w.is_finite()) {
            return Err(Error::invalid(format!(
                "compactify needs positive finite radius and width, got r0 = {r0}, w = {w}"
            )));
        }
        let src = format!("({})*cutoff({r0:?}, {w:?})", self.source);
        Ok(Self::parse(&src, self.dim)?.with_support_radius(Some(r0 + w)))
    }

    fn check_point(&self, len: usize) -> Result<()> {
        if len != 2 * self.dim + 1 {
            return Err(Error::DimensionMismatch {
                expected: 2 * self.dim + 1,
                found: len,
            });
        }
        Ok(())
    }

    /// Root jet at a flat state `[q.., p.., z]`, written into `out`.
    pub(crate) fn jet_into(
        &self,
        t: f64,
        state: &[f64],
        scratch: &mut Vec<f64>,
        out: &mut [f64],
    ) -> Result<()> {
        match self.tape.eval(t, state, scratch) {
            Ok(root) => {
                out.copy_from_slice(root);
                Ok(())
            }
            Err(fault) => Err(self.domain_error(fault)),
        }
    }

    fn domain_error(&self, fault: tape::DomainFault) -> Error {
        let expr = self
            .source
            .get(fault.span.clone())
            .unwrap_or(&self.source)
            .to_string();
        Error::Domain {
            expr,
            span: fault.span,
            message: fault.message,
        }
    }
}

/// Renders the (constant-folded) tree; parsing the output yields an
/// expression with identical values.
impl fmt::Display for HamiltonianExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.ast)
    }
}

/// Reusable evaluation buffers for one Hamiltonian.
pub struct Evaluator<'a> {
    expr: &'a HamiltonianExpr,
    scratch: Vec<f64>,
    state: Vec<f64>,
}

impl Evaluator<'_> {
    fn load(&mut self, y: &ContactPoint) -> Result<()> {
        if y.q.len() != self.expr.dim || y.p.len() != self.expr.dim {
            return Err(Error::DimensionMismatch {
                expected: self.expr.dim,
                found: y.q.len().max(y.p.len()),
            });
        }
        self.state.clear();
        self.state.extend_from_slice(&y.q);
        self.state.extend_from_slice(&y.p);
        self.state.push(y.z);
        Ok(())
    }

    pub fn value(&mut self, t: f64, y: &ContactPoint) -> Result<f64> {
        self.load(y)?;
        self.value_flat_inner(t)
    }

    fn value_flat_inner(&mut self, t: f64) -> Result<f64> {
        let expr = self.expr;
        match expr.tape.eval(t, &self.state, &mut self.scratch) {
            Ok(root) => Ok(root[0]),
            Err(fault) => Err(expr.domain_error(fault)),
        }
    }

    /// Value at a flat state `[q.., p.., z]`.
    pub fn value_flat(&mut self, t: f64, state: &[f64]) -> Result<f64> {
        self.expr.check_point(state.len())?;
        self.state.clear();
        self.state.extend_from_slice(state);
        self.value_flat_inner(t)
    }

    pub fn jet(&mut self, t: f64, y: &ContactPoint) -> Result<JetValue> {
        self.load(y)?;
        let n = self.expr.dim;
        let expr = self.expr;
        let root = expr
            .tape
            .eval(t, &self.state, &mut self.scratch)
            .map_err(|f| expr.domain_error(f))?;
        Ok(JetValue {
            value: root[0],
            d_q: root[1..1 + n].to_vec(),
            d_p: root[1 + n..1 + 2 * n].to_vec(),
            d_z: root[1 + 2 * n],
        })
    }

    /// Jet `[H, H_q.., H_p.., H_z]` at a flat state, into `out`.
    pub fn jet_flat(&mut self, t: f64, state: &[f64], out: &mut [f64]) -> Result<()> {
        self.expr.check_point(state.len())?;
        self.expr.jet_into(t, state, &mut self.scratch, out)
    }
}
