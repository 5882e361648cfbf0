//! Contractivity-factor expressions.
//!
//! A factor is a small arithmetic expression in `x` (and `y` for surface
//! factors) built from literals, `+`, `-`, `*`, unary minus and the
//! functions `abs`, `sin`, `cos`. There is no division, so evaluation is
//! total on finite inputs and Lipschitz bounds can be computed recursively.

mod bounds;
mod parse;

use std::fmt;
use std::str::FromStr;

pub use bounds::{Domain, Interval, SPLIT_COUNT};
pub use parse::ParseError;

use crate::error::Error;

/// Unary functions admitted by the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Abs,
    Sin,
    Cos,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    #[inline]
    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Abs => v.abs(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
        }
    }
}

/// Binary operators admitted by the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul => 2,
        }
    }
}

/// Parsed factor expression.
#[derive(Debug, Clone, PartialEq)]
pub enum FactorExpr {
    Num(f64),
    X,
    Y,
    Neg(Box<FactorExpr>),
    Call(Func, Box<FactorExpr>),
    Bin(BinOp, Box<FactorExpr>, Box<FactorExpr>),
}

/// Evaluation point: scalar for curve factors, pair for surface factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Point {
    X(f64),
    XY(f64, f64),
}

impl From<f64> for Point {
    fn from(x: f64) -> Self {
        Point::X(x)
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point::XY(x, y)
    }
}

impl FactorExpr {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        parse::parse(text)
    }

    pub fn constant(v: f64) -> Self {
        FactorExpr::Num(v)
    }

    /// True when the expression mentions `y`.
    pub fn is_bivariate(&self) -> bool {
        match self {
            FactorExpr::Y => true,
            FactorExpr::Num(_) | FactorExpr::X => false,
            FactorExpr::Neg(a) | FactorExpr::Call(_, a) => a.is_bivariate(),
            FactorExpr::Bin(_, a, b) => a.is_bivariate() || b.is_bivariate(),
        }
    }

    /// Returns the literal value when the tree is a single number.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            FactorExpr::Num(v) => Some(*v),
            _ => None,
        }
    }

    /// Evaluates at `point`, rejecting a scalar point for a bivariate expression.
    pub fn eval(&self, point: impl Into<Point>) -> Result<f64, Error> {
        match point.into() {
            Point::X(x) => {
                if self.is_bivariate() {
                    Err(Error::DimensionMismatch)
                } else {
                    Ok(self.eval_xy(x, 0.0))
                }
            }
            Point::XY(x, y) => Ok(self.eval_xy(x, y)),
        }
    }

    /// Total evaluation; `y` is ignored by curve factors.
    pub fn eval_xy(&self, x: f64, y: f64) -> f64 {
        match self {
            FactorExpr::Num(v) => *v,
            FactorExpr::X => x,
            FactorExpr::Y => y,
            FactorExpr::Neg(a) => -a.eval_xy(x, y),
            FactorExpr::Call(f, a) => f.apply(a.eval_xy(x, y)),
            FactorExpr::Bin(op, a, b) => {
                let (u, v) = (a.eval_xy(x, y), b.eval_xy(x, y));
                match op {
                    BinOp::Add => u + v,
                    BinOp::Sub => u - v,
                    BinOp::Mul => u * v,
                }
            }
        }
    }

    /// Replaces `x` by `x_sub` and `y` by `y_sub`.
    pub fn substitute(&self, x_sub: &FactorExpr, y_sub: &FactorExpr) -> FactorExpr {
        match self {
            FactorExpr::Num(v) => FactorExpr::Num(*v),
            FactorExpr::X => x_sub.clone(),
            FactorExpr::Y => y_sub.clone(),
            FactorExpr::Neg(a) => FactorExpr::Neg(Box::new(a.substitute(x_sub, y_sub))),
            FactorExpr::Call(f, a) => FactorExpr::Call(*f, Box::new(a.substitute(x_sub, y_sub))),
            FactorExpr::Bin(op, a, b) => FactorExpr::Bin(
                *op,
                Box::new(a.substitute(x_sub, y_sub)),
                Box::new(b.substitute(x_sub, y_sub)),
            ),
        }
    }

    /// `self ∘ (scale·x + offset)` for curve factors.
    pub fn compose_affine(&self, scale: f64, offset: f64) -> FactorExpr {
        self.substitute(&FactorExpr::affine_x(scale, offset), &FactorExpr::Y)
    }

    /// The expression `scale*x + offset`, folded when possible.
    pub fn affine_x(scale: f64, offset: f64) -> FactorExpr {
        FactorExpr::affine_in(FactorExpr::X, scale, offset)
    }

    pub fn affine_y(scale: f64, offset: f64) -> FactorExpr {
        FactorExpr::affine_in(FactorExpr::Y, scale, offset)
    }

    fn affine_in(var: FactorExpr, scale: f64, offset: f64) -> FactorExpr {
        let scaled = if scale == 1.0 {
            var
        } else {
            FactorExpr::Num(scale) * var
        };
        if offset == 0.0 {
            scaled
        } else {
            scaled + FactorExpr::Num(offset)
        }
    }

    /// Collapses variable-free subtrees into literals. Evaluation order of the
    /// folded operations is unchanged, so results are bit-identical.
    pub fn fold_constants(&self) -> FactorExpr {
        match self {
            FactorExpr::Num(_) | FactorExpr::X | FactorExpr::Y => self.clone(),
            FactorExpr::Neg(a) => match a.fold_constants() {
                FactorExpr::Num(v) => FactorExpr::Num(-v),
                a => FactorExpr::Neg(Box::new(a)),
            },
            FactorExpr::Call(f, a) => match a.fold_constants() {
                FactorExpr::Num(v) => FactorExpr::Num(f.apply(v)),
                a => FactorExpr::Call(*f, Box::new(a)),
            },
            FactorExpr::Bin(op, a, b) => {
                let (a, b) = (a.fold_constants(), b.fold_constants());
                match (&a, &b) {
                    (FactorExpr::Num(_), FactorExpr::Num(_)) => FactorExpr::Num(
                        FactorExpr::Bin(*op, Box::new(a), Box::new(b)).eval_xy(0.0, 0.0),
                    ),
                    _ => FactorExpr::Bin(*op, Box::new(a), Box::new(b)),
                }
            }
        }
    }

    /// Serializes to the concrete syntax accepted by [`FactorExpr::parse`].
    pub fn to_source(&self) -> String {
        self.to_string()
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        match self {
            FactorExpr::Num(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    // a negative literal reads back as Neg(Num), which evaluates identically
                    if min_prec > 0 {
                        write!(f, "(-{})", -v)
                    } else {
                        write!(f, "-{}", -v)
                    }
                } else {
                    write!(f, "{v}")
                }
            }
            FactorExpr::X => f.write_str("x"),
            FactorExpr::Y => f.write_str("y"),
            FactorExpr::Neg(a) => {
                f.write_str("-")?;
                match **a {
                    FactorExpr::Bin(..) | FactorExpr::Num(_) => {
                        f.write_str("(")?;
                        a.fmt_prec(f, 0)?;
                        f.write_str(")")
                    }
                    _ => a.fmt_prec(f, 3),
                }
            }
            FactorExpr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.fmt_prec(f, 0)?;
                f.write_str(")")
            }
            FactorExpr::Bin(op, a, b) => {
                let p = op.precedence();
                let paren = p < min_prec;
                if paren {
                    f.write_str("(")?;
                }
                a.fmt_prec(f, p)?;
                write!(f, " {} ", op.symbol())?;
                // all operators are left-associative, so an equal-precedence
                // right operand needs parentheses to keep the tree shape
                b.fmt_prec(f, p + 1)?;
                if paren {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for FactorExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl FromStr for FactorExpr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse::parse(s)
    }
}

impl std::ops::Add for FactorExpr {
    type Output = FactorExpr;
    fn add(self, rhs: FactorExpr) -> FactorExpr {
        FactorExpr::Bin(BinOp::Add, Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Sub for FactorExpr {
    type Output = FactorExpr;
    fn sub(self, rhs: FactorExpr) -> FactorExpr {
        FactorExpr::Bin(BinOp::Sub, Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Mul for FactorExpr {
    type Output = FactorExpr;
    fn mul(self, rhs: FactorExpr) -> FactorExpr {
        FactorExpr::Bin(BinOp::Mul, Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Neg for FactorExpr {
    type Output = FactorExpr;
    fn neg(self) -> FactorExpr {
        FactorExpr::Neg(Box::new(self))
    }
}
