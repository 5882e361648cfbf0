//! Interval enclosures and Lipschitz bounds for factor expressions.
//!
//! Bounds are computed on a fixed subdivision of the domain (64 subintervals,
//! or an 8×8 grid of sub-rectangles for surface factors) using the natural
//! interval extension on each piece. `sin`/`cos` enclosures are exact images
//! over the argument interval, found from the monotone branches between
//! critical points.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use super::{BinOp, FactorExpr, Func};

/// Number of pieces the domain is split into.
pub const SPLIT_COUNT: usize = 64;
const SPLIT_SIDE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    /// Panics when `lo > hi`.
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "interval with lo > hi: [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn hull(self, other: Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Largest absolute value in the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Smallest absolute value in the interval.
    pub fn mig(&self) -> f64 {
        if self.lo <= 0.0 && self.hi >= 0.0 {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    /// Splits into `k` equal pieces; the last piece ends exactly at `hi`.
    pub fn split(&self, k: usize) -> Vec<Interval> {
        let step = self.width() / k as f64;
        (0..k)
            .map(|i| {
                let lo = self.lo + step * i as f64;
                let hi = if i + 1 == k {
                    self.hi
                } else {
                    self.lo + step * (i + 1) as f64
                };
                Interval { lo, hi: hi.max(lo) }
            })
            .collect()
    }

    fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    fn add(self, o: Interval) -> Interval {
        Interval {
            lo: self.lo + o.lo,
            hi: self.hi + o.hi,
        }
    }

    fn sub(self, o: Interval) -> Interval {
        Interval {
            lo: self.lo - o.hi,
            hi: self.hi - o.lo,
        }
    }

    fn mul(self, o: Interval) -> Interval {
        let p = [
            self.lo * o.lo,
            self.lo * o.hi,
            self.hi * o.lo,
            self.hi * o.hi,
        ];
        Interval {
            lo: p.iter().copied().fold(f64::INFINITY, f64::min),
            hi: p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    fn abs(self) -> Interval {
        if self.lo >= 0.0 {
            self
        } else if self.hi <= 0.0 {
            self.neg()
        } else {
            Interval {
                lo: 0.0,
                hi: (-self.lo).max(self.hi),
            }
        }
    }

    /// Exact image of `sin` over the interval.
    fn sin(self) -> Interval {
        periodic_image(self, f64::sin, FRAC_PI_2, -FRAC_PI_2)
    }

    /// Exact image of `cos` over the interval.
    fn cos(self) -> Interval {
        periodic_image(self, f64::cos, 0.0, PI)
    }
}

/// Image of a 2π-periodic function with a maximum of 1 at `peak + 2kπ` and a
/// minimum of −1 at `trough + 2kπ`; monotone in between.
fn periodic_image(iv: Interval, f: fn(f64) -> f64, peak: f64, trough: f64) -> Interval {
    if iv.width() >= TAU {
        return Interval { lo: -1.0, hi: 1.0 };
    }
    let hits = |c: f64| ((iv.lo - c) / TAU).ceil() <= ((iv.hi - c) / TAU).floor();
    let (a, b) = (f(iv.lo), f(iv.hi));
    Interval {
        lo: if hits(trough) { -1.0 } else { a.min(b) },
        hi: if hits(peak) { 1.0 } else { a.max(b) },
    }
}

/// Domain of a factor: an interval for curves, a rectangle for surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Interval(Interval),
    Rect(Interval, Interval),
}

impl From<Interval> for Domain {
    fn from(iv: Interval) -> Self {
        Domain::Interval(iv)
    }
}

impl From<(Interval, Interval)> for Domain {
    fn from((x, y): (Interval, Interval)) -> Self {
        Domain::Rect(x, y)
    }
}

impl Domain {
    /// The fixed set of sub-boxes as (x, y) interval pairs.
    fn pieces(&self) -> Vec<(Interval, Interval)> {
        match *self {
            Domain::Interval(x) => x
                .split(SPLIT_COUNT)
                .into_iter()
                .map(|p| (p, Interval::point(0.0)))
                .collect(),
            Domain::Rect(x, y) => {
                let ys = y.split(SPLIT_SIDE);
                x.split(SPLIT_SIDE)
                    .into_iter()
                    .flat_map(|px| ys.iter().map(move |&py| (px, py)))
                    .collect()
            }
        }
    }
}

// Natural interval extension plus a first-order Lipschitz bound on one box.
fn enclose(e: &FactorExpr, x: Interval, y: Interval) -> (Interval, f64) {
    match e {
        FactorExpr::Num(v) => (Interval::point(*v), 0.0),
        FactorExpr::X => (x, 1.0),
        FactorExpr::Y => (y, 1.0),
        FactorExpr::Neg(a) => {
            let (r, l) = enclose(a, x, y);
            (r.neg(), l)
        }
        FactorExpr::Call(f, a) => {
            let (r, l) = enclose(a, x, y);
            let img = match f {
                Func::Abs => r.abs(),
                Func::Sin => r.sin(),
                Func::Cos => r.cos(),
            };
            (img, l)
        }
        FactorExpr::Bin(op, a, b) => {
            let (ra, la) = enclose(a, x, y);
            let (rb, lb) = enclose(b, x, y);
            match op {
                BinOp::Add => (ra.add(rb), la + lb),
                BinOp::Sub => (ra.sub(rb), la + lb),
                BinOp::Mul => (ra.mul(rb), ra.mag() * lb + rb.mag() * la),
            }
        }
    }
}

fn has_variable(e: &FactorExpr) -> bool {
    match e {
        FactorExpr::Num(_) => false,
        FactorExpr::X | FactorExpr::Y => true,
        FactorExpr::Neg(a) | FactorExpr::Call(_, a) => has_variable(a),
        FactorExpr::Bin(_, a, b) => has_variable(a) || has_variable(b),
    }
}

// A few ulps of outward slack for expressions whose enclosure went through
// rounded arithmetic on a variable; constants are exact.
fn widen_up(e: &FactorExpr, v: f64) -> f64 {
    if has_variable(e) {
        v + v.abs() * 4.0 * f64::EPSILON
    } else {
        v
    }
}

fn widen_down(e: &FactorExpr, v: f64) -> f64 {
    if has_variable(e) {
        v - v.abs() * 4.0 * f64::EPSILON
    } else {
        v
    }
}

impl FactorExpr {
    /// Enclosure of the expression's range over `domain`.
    pub fn range(&self, domain: impl Into<Domain>) -> Interval {
        let r = domain
            .into()
            .pieces()
            .into_iter()
            .map(|(x, y)| enclose(self, x, y).0)
            .reduce(Interval::hull)
            .expect("domain has pieces");
        Interval {
            lo: widen_down(self, r.lo),
            hi: widen_up(self, r.hi),
        }
    }

    /// Upper bound on `sup |expr|` over `domain`.
    pub fn sup_abs_bound(&self, domain: impl Into<Domain>) -> f64 {
        let m = domain
            .into()
            .pieces()
            .into_iter()
            .map(|(x, y)| enclose(self, x, y).0.mag())
            .fold(0.0, f64::max);
        widen_up(self, m)
    }

    /// Lower bound on `inf |expr|` over `domain`.
    pub fn inf_abs_bound(&self, domain: impl Into<Domain>) -> f64 {
        let m = domain
            .into()
            .pieces()
            .into_iter()
            .map(|(x, y)| enclose(self, x, y).0.mig())
            .fold(f64::INFINITY, f64::min);
        widen_down(self, m).max(0.0)
    }

    /// Upper bound on the Lipschitz constant over `domain`.
    ///
    /// The piecewise maximum is a valid global constant because the domain
    /// is convex: any segment splits into pieces, each bounded locally.
    pub fn lipschitz_bound(&self, domain: impl Into<Domain>) -> f64 {
        domain
            .into()
            .pieces()
            .into_iter()
            .map(|(x, y)| enclose(self, x, y).1)
            .fold(0.0, f64::max)
    }
}
