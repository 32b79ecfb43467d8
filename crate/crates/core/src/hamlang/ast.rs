use std::fmt;
use std::ops::Range;

/// A state or time variable. Indices are zero-based internally; the source
/// syntax is one-based (`q1` is `Var::Q(0)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    Q(usize),
    P(usize),
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Tanh,
    Sqrt,
    /// `sabs(x) = sqrt(x^2 + SMOOTH_ABS_EPS^2)`.
    SmoothAbs,
}

/// Regularization scale of `sabs`.
pub const SMOOTH_ABS_EPS: f64 = 1e-4;

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Tanh => "tanh",
            Func::Sqrt => "sqrt",
            Func::SmoothAbs => "sabs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "tanh" => Func::Tanh,
            "sqrt" => Func::Sqrt,
            "sabs" => Func::SmoothAbs,
            _ => return None,
        })
    }

    pub const ALL: [Func; 7] = [
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Log,
        Func::Tanh,
        Func::Sqrt,
        Func::SmoothAbs,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    /// Smooth radial cutoff of the state `(q, p, z)`: 1 on the ball of
    /// radius `r0`, 0 outside radius `r0 + w`.
    Cutoff { r0: f64, w: f64 },
}

/// Expression node with the byte span of the source text it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub node: Node,
    pub span: Range<usize>,
}

impl Expr {
    pub fn new(node: Node, span: Range<usize>) -> Self {
        Expr { node, span }
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.node {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    /// True when `z` occurs syntactically, counting the implicit state
    /// dependence of a cutoff.
    pub fn depends_on_z(&self) -> bool {
        match &self.node {
            Node::Const(_) => false,
            Node::Var(v) => *v == Var::Z,
            Node::Neg(a) | Node::Call(_, a) => a.depends_on_z(),
            Node::Binary(_, a, b) => a.depends_on_z() || b.depends_on_z(),
            Node::Cutoff { .. } => true,
        }
    }
}

fn write_const(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    // `{:?}` is the shortest representation that reparses to the same bits.
    if c.is_sign_negative() {
        write!(f, "(-{:?})", -c)
    } else {
        write!(f, "{c:?}")
    }
}

/// Fully parenthesized rendering; reparsing it yields the same tree
/// (up to spans).
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Node::Const(c) => write_const(f, *c),
            Node::Var(Var::T) => f.write_str("t"),
            Node::Var(Var::Z) => f.write_str("z"),
            Node::Var(Var::Q(i)) => write!(f, "q{}", i + 1),
            Node::Var(Var::P(i)) => write!(f, "p{}", i + 1),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
            Node::Cutoff { r0, w } => write!(f, "cutoff({r0:?}, {w:?})"),
        }
    }
}
