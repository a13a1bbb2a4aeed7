//! Drift expressions over the single real variable `z`.
//!
//! The grammar is ordinary infix arithmetic:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' integer)?
//! primary := number | 'z' | 'pi' | func '(' expr ')' | '(' expr ')'
//! func    := exp | log | sin | cos | sqrt
//! ```
//!
//! Exponents must be integers (`z^2`, `z^-1`, `z^(-3)`). `log` is the natural
//! logarithm. Unary minus binds looser than `^`, so `-z^2` is `-(z^2)`.

mod diff;
mod parse;
mod program;

use std::fmt;

pub use parse::{parse, ParseError};
pub use program::Program;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Sqrt => v.sqrt(),
        }
    }
}

/// Expression tree over one real variable.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var => z,
            Expr::Neg(e) => -e.eval(z),
            Expr::Add(l, r) => l.eval(z) + r.eval(z),
            Expr::Sub(l, r) => l.eval(z) - r.eval(z),
            Expr::Mul(l, r) => l.eval(z) * r.eval(z),
            Expr::Div(l, r) => l.eval(z) / r.eval(z),
            Expr::Pow(b, n) => b.eval(z).powi(*n),
            Expr::Call(f, e) => f.apply(e.eval(z)),
        }
    }

    /// Symbolic derivative with respect to `z`.
    pub fn derivative(&self) -> Expr {
        diff::differentiate(self)
    }

    pub fn compile(&self) -> Program {
        Program::compile(self)
    }

    pub fn is_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    // Smart constructors. They fold constants and drop additive zeros and
    // multiplicative ones so derivative trees stay small.

    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(e: Expr) -> Expr {
        match e {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(l: Expr, r: Expr) -> Expr {
        match (l.is_const(), r.is_const()) {
            (Some(a), Some(b)) => Expr::Const(a + b),
            (Some(a), None) if a == 0.0 => r,
            (None, Some(b)) if b == 0.0 => l,
            _ => Expr::Add(Box::new(l), Box::new(r)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(l: Expr, r: Expr) -> Expr {
        match (l.is_const(), r.is_const()) {
            (Some(a), Some(b)) => Expr::Const(a - b),
            (Some(a), None) if a == 0.0 => Expr::neg(r),
            (None, Some(b)) if b == 0.0 => l,
            _ => Expr::Sub(Box::new(l), Box::new(r)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(l: Expr, r: Expr) -> Expr {
        match (l.is_const(), r.is_const()) {
            (Some(a), Some(b)) => Expr::Const(a * b),
            (Some(a), None) | (None, Some(a)) if a == 0.0 => Expr::Const(0.0),
            (Some(a), None) if a == 1.0 => r,
            (None, Some(b)) if b == 1.0 => l,
            (Some(a), None) if a == -1.0 => Expr::neg(r),
            (None, Some(b)) if b == -1.0 => Expr::neg(l),
            _ => Expr::Mul(Box::new(l), Box::new(r)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(l: Expr, r: Expr) -> Expr {
        match (l.is_const(), r.is_const()) {
            (Some(a), Some(b)) if b != 0.0 => Expr::Const(a / b),
            (Some(a), None) if a == 0.0 => Expr::Const(0.0),
            (None, Some(b)) if b == 1.0 => l,
            _ => Expr::Div(Box::new(l), Box::new(r)),
        }
    }

    pub fn pow(base: Expr, n: i32) -> Expr {
        match (n, base.is_const()) {
            (0, _) => Expr::Const(1.0),
            (1, _) => base,
            (_, Some(c)) => Expr::Const(c.powi(n)),
            _ => Expr::Pow(Box::new(base), n),
        }
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::Call(f, Box::new(arg))
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Pow(..) => 4,
            Expr::Const(_) | Expr::Var | Expr::Call(..) => 5,
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Expr, paren: bool) -> fmt::Result {
    if paren {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.precedence();
        match self {
            // `{:?}` prints the shortest string that parses back to the same f64.
            Expr::Const(c) if c.is_sign_negative() => write!(f, "({c:?})"),
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var => f.write_str("z"),
            Expr::Neg(e) => {
                f.write_str("-")?;
                write_child(f, e, e.precedence() < p)
            }
            Expr::Add(l, r) | Expr::Sub(l, r) | Expr::Mul(l, r) | Expr::Div(l, r) => {
                let op = match self {
                    Expr::Add(..) => " + ",
                    Expr::Sub(..) => " - ",
                    Expr::Mul(..) => " * ",
                    _ => " / ",
                };
                write_child(f, l, l.precedence() < p)?;
                f.write_str(op)?;
                write_child(f, r, r.precedence() <= p)
            }
            Expr::Pow(b, n) => {
                write_child(f, b, b.precedence() < 5)?;
                if *n < 0 {
                    write!(f, "^({n})")
                } else {
                    write!(f, "^{n}")
                }
            }
            Expr::Call(func, arg) => write!(f, "{}({arg})", func.name()),
        }
    }
}
