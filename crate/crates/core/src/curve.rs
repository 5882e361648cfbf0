//! Univariate hidden-variable IFS: extended data, interval maps, factor
//! quadruples and the contraction certificate.
//!
//! For each subinterval `I_i` the system carries the map
//!
//! ```text
//! W_i(x, y, z) = (L_i(x), F_i(x, y, z))
//! F_i(x, y, z) = [ s_i(L_i x)  s'_i(L_i x) ] [y] + [ q_i(x) ]
//!                [ s̃_i(L_i x) s̃'_i(L_i x) ] [z]   [ q̃_i(x) ]
//! ```
//!
//! with `q_i = −s_i(L_i x) g(x) − s'_i(L_i x) g'(x) + h_i(L_i x)` built from the
//! Lagrange lines `g, g'` through the end data and `h_i, h̃_i` through the
//! data at the ends of `I_i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::{FactorExpr, Interval};

/// Absolute tolerance (scaled by data magnitude) for exact identities.
pub const IDENTITY_TOL: f64 = 1e-9;

/// Fraction by which the data bounding box is widened for κ.
pub const KAPPA_INFLATION: f64 = 0.10;

/// Nodes `(x_i, y_i, z_i)`, `i = 0..=n`, with strictly increasing abscissae.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedDataSet {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
}

impl ExtendedDataSet {
    pub fn new(x: Vec<f64>, y: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        if x.len() < 3 {
            return Err(Error::TooFewNodes {
                min: 3,
                found: x.len(),
            });
        }
        for (what, v) in [("y", &y), ("z", &z)] {
            if v.len() != x.len() {
                return Err(Error::LengthMismatch {
                    what: format!("{what} ordinates"),
                    expected: x.len(),
                    found: v.len(),
                });
            }
        }
        if let Some(bad) = x.iter().chain(&y).chain(&z).find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite data value {bad}")));
        }
        if let Some(k) = (1..x.len()).find(|&k| x[k] <= x[k - 1]) {
            return Err(Error::NonIncreasing { index: k });
        }
        Ok(ExtendedDataSet { x, y, z })
    }

    /// Uniform nodes on `[a, b]` with the given ordinates.
    pub fn uniform(a: f64, b: f64, y: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        let n = y.len().saturating_sub(1).max(1);
        let x = (0..y.len())
            .map(|k| {
                if k == n {
                    b
                } else {
                    a + (b - a) * k as f64 / n as f64
                }
            })
            .collect();
        ExtendedDataSet::new(x, y, z)
    }

    /// Number of subintervals `n`.
    pub fn n(&self) -> usize {
        self.x.len() - 1
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn domain(&self) -> Interval {
        Interval::new(self.x[0], self.x[self.n()])
    }

    /// Subinterval `I_i` for `i = 1..=n`.
    pub fn subinterval(&self, i: usize) -> Interval {
        Interval::new(self.x[i - 1], self.x[i])
    }

    /// Index `i` of the subinterval holding `x`; `x_0` belongs to `I_1` and
    /// every other node `x_i` to `I_i`.
    pub fn interval_of(&self, x: f64) -> usize {
        let k = self.x.partition_point(|&node| node < x);
        k.clamp(1, self.n())
    }

    /// Index of the node equal to `x` within `tol`, if any.
    pub fn node_index(&self, x: f64, tol: f64) -> Option<usize> {
        let k = self.x.partition_point(|&node| node < x - tol);
        (k <= self.n() && (self.x[k] - x).abs() <= tol).then_some(k)
    }

    pub fn is_uniform(&self, rel_tol: f64) -> bool {
        let n = self.n() as f64;
        let w = self.x[self.n()] - self.x[0];
        self.x
            .iter()
            .enumerate()
            .all(|(k, &xk)| (xk - (self.x[0] + w * k as f64 / n)).abs() <= rel_tol * w)
    }

    /// Largest absolute data value, floored at 1; scales identity tolerances.
    pub fn magnitude(&self) -> f64 {
        self.y
            .iter()
            .chain(&self.z)
            .fold(1.0f64, |m, v| m.max(v.abs()))
    }

    pub fn bounding_box(&self) -> DomainBox {
        let range = |v: &[f64]| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Interval::new(lo, hi)
        };
        DomainBox {
            y: range(&self.y),
            z: range(&self.z),
        }
    }

    pub(crate) fn with_ordinates(&self, y: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        ExtendedDataSet::new(self.x.clone(), y, z)
    }
}

/// Box in the `(y, z)` plane used as the bounded domain for κ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub y: Interval,
    pub z: Interval,
}

impl DomainBox {
    /// Widens each side so the total width grows by `frac`; degenerate sides
    /// get a pad proportional to their magnitude.
    pub fn inflate(&self, frac: f64) -> DomainBox {
        let grow = |iv: Interval| {
            let pad = if iv.width() > 0.0 {
                0.5 * frac * iv.width()
            } else {
                0.5 * frac * iv.mag().max(1.0)
            };
            Interval::new(iv.lo - pad, iv.hi + pad)
        };
        DomainBox {
            y: grow(self.y),
            z: grow(self.z),
        }
    }

    pub fn contains(&self, y: f64, z: f64) -> bool {
        self.y.contains(y) && self.z.contains(z)
    }

    pub fn hull_point(&self, y: f64, z: f64) -> DomainBox {
        DomainBox {
            y: self.y.hull(Interval::point(y)),
            z: self.z.hull(Interval::point(z)),
        }
    }

    /// `sup ‖(y, z)‖₁` over the box.
    pub fn kappa(&self) -> f64 {
        self.y.mag() + self.z.mag()
    }

    /// ℓ¹ diameter of the box.
    pub fn diameter(&self) -> f64 {
        self.y.width() + self.z.width()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    #[default]
    Forward,
    Reversed,
}

/// Affine similarity `L_i : I → I_i` with `L_i({x_0, x_n}) = {x_{i−1}, x_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalMap {
    pub index: usize,
    pub source: Interval,
    pub target: Interval,
    pub orientation: Orientation,
}

impl IntervalMap {
    pub fn new(index: usize, source: Interval, target: Interval, orientation: Orientation) -> Self {
        IntervalMap {
            index,
            source,
            target,
            orientation,
        }
    }

    // image end points in the order L(source.lo), L(source.hi)
    fn ends(&self) -> (f64, f64) {
        match self.orientation {
            Orientation::Forward => (self.target.lo, self.target.hi),
            Orientation::Reversed => (self.target.hi, self.target.lo),
        }
    }

    /// `L_i(u)`; exact at both end points of the source.
    #[inline]
    pub fn apply(&self, u: f64) -> f64 {
        let t = (u - self.source.lo) / self.source.width();
        let (a, b) = self.ends();
        (1.0 - t) * a + t * b
    }

    /// `L_i^{-1}(x)`; exact at both end points of the target.
    #[inline]
    pub fn invert(&self, x: f64) -> f64 {
        let (a, b) = self.ends();
        let t = (x - a) / (b - a);
        (1.0 - t) * self.source.lo + t * self.source.hi
    }

    /// Contraction ratio `c_{L_i} = |I_i| / |I|`.
    pub fn ratio(&self) -> f64 {
        self.target.width() / self.source.width()
    }

    /// `(scale, offset)` with `L_i(u) = scale·u + offset`.
    pub fn affine(&self) -> (f64, f64) {
        let (a, b) = self.ends();
        let scale = (b - a) / self.source.width();
        (scale, a - scale * self.source.lo)
    }

    /// `(scale, offset)` of the inverse map.
    pub fn inverse_affine(&self) -> (f64, f64) {
        let (a, b) = self.ends();
        let scale = self.source.width() / (b - a);
        (scale, self.source.lo - scale * a)
    }
}

/// The four contractivity factors `s, s', s̃, s̃'` of one subinterval (or cell).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorQuad {
    pub s: FactorExpr,
    pub s_prime: FactorExpr,
    pub s_tilde: FactorExpr,
    pub s_tilde_prime: FactorExpr,
}

impl FactorQuad {
    pub fn new(
        s: FactorExpr,
        s_prime: FactorExpr,
        s_tilde: FactorExpr,
        s_tilde_prime: FactorExpr,
    ) -> Self {
        FactorQuad {
            s,
            s_prime,
            s_tilde,
            s_tilde_prime,
        }
    }

    /// Four constant factors.
    pub fn constant(s: f64, s_prime: f64, s_tilde: f64, s_tilde_prime: f64) -> Self {
        FactorQuad::new(
            FactorExpr::Num(s),
            FactorExpr::Num(s_prime),
            FactorExpr::Num(s_tilde),
            FactorExpr::Num(s_tilde_prime),
        )
    }

    /// Same constant in all four slots.
    pub fn uniform(c: f64) -> Self {
        FactorQuad::constant(c, c, c, c)
    }

    pub fn parse(s: &str, s_prime: &str, s_tilde: &str, s_tilde_prime: &str) -> Result<Self> {
        Ok(FactorQuad::new(
            FactorExpr::parse(s)?,
            FactorExpr::parse(s_prime)?,
            FactorExpr::parse(s_tilde)?,
            FactorExpr::parse(s_tilde_prime)?,
        ))
    }

    pub fn named(&self) -> [(&'static str, &FactorExpr); 4] {
        [
            ("s", &self.s),
            ("s_prime", &self.s_prime),
            ("s_tilde", &self.s_tilde),
            ("s_tilde_prime", &self.s_tilde_prime),
        ]
    }

    pub fn map(&self, f: impl Fn(&FactorExpr) -> FactorExpr) -> FactorQuad {
        FactorQuad::new(
            f(&self.s),
            f(&self.s_prime),
            f(&self.s_tilde),
            f(&self.s_tilde_prime),
        )
    }

    /// Values `(s, s', s̃, s̃')` at a point.
    #[inline]
    pub fn values(&self, x: f64, y: f64) -> [f64; 4] {
        [
            self.s.eval_xy(x, y),
            self.s_prime.eval_xy(x, y),
            self.s_tilde.eval_xy(x, y),
            self.s_tilde_prime.eval_xy(x, y),
        ]
    }
}

/// Monotone piecewise-linear map through `(from_k, to_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    from: Vec<f64>,
    to: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(from: Vec<f64>, to: Vec<f64>) -> Self {
        assert_eq!(from.len(), to.len());
        assert!(from.len() >= 2);
        PiecewiseLinear { from, to }
    }

    pub fn apply(&self, u: f64) -> f64 {
        let k = self
            .from
            .partition_point(|&v| v < u)
            .clamp(1, self.from.len() - 1);
        let (a, b) = (self.from[k - 1], self.from[k]);
        let t = (u - a) / (b - a);
        (1.0 - t) * self.to[k - 1] + t * self.to[k]
    }

    pub fn lipschitz(&self) -> f64 {
        self.from
            .windows(2)
            .zip(self.to.windows(2))
            .map(|(f, t)| ((t[1] - t[0]) / (f[1] - f[0])).abs())
            .fold(0.0, f64::max)
    }
}

/// Offset function `q_i` or `q̃_i`: an expression on `I`, optionally
/// precomposed with a chain of piecewise-linear reparametrizations.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    pub expr: FactorExpr,
    pub premaps: Vec<PiecewiseLinear>,
}

impl Coefficient {
    pub fn new(expr: FactorExpr) -> Self {
        Coefficient {
            expr,
            premaps: Vec::new(),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let u = self.premaps.iter().rev().fold(x, |u, m| m.apply(u));
        self.expr.eval_xy(u, 0.0)
    }

    pub fn lipschitz_bound(&self, domain: Interval) -> f64 {
        self.premaps
            .iter()
            .fold(self.expr.lipschitz_bound(domain), |l, m| l * m.lipschitz())
    }

    fn precompose(&self, map: PiecewiseLinear) -> Coefficient {
        let mut premaps = self.premaps.clone();
        premaps.push(map);
        Coefficient {
            expr: self.expr.clone(),
            premaps,
        }
    }
}

/// Straight line through `(a, fa)` and `(b, fb)` as an expression in `x`.
pub(crate) fn line_expr(a: f64, fa: f64, b: f64, fb: f64) -> FactorExpr {
    let slope = (fb - fa) / (b - a);
    FactorExpr::affine_x(slope, fa - slope * a)
}

/// Options for [`Hvfif::build_with`].
#[derive(Debug, Clone, Default)]
pub struct BuildOptions {
    /// Per-interval orientation; empty means all forward.
    pub orientations: Vec<Orientation>,
    /// Record factor-bound and `S ≥ 1` violations instead of failing.
    pub permissive: bool,
}

/// Per-interval contributions to the contraction certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalContraction {
    pub index: usize,
    pub c_l: f64,
    /// `[‖s‖, ‖s'‖, ‖s̃‖, ‖s̃'‖]` upper bounds over `I_i`.
    pub sup: [f64; 4],
    /// `[L_s, L_s', L_s̃, L_s̃']` over `I_i`.
    pub lipschitz: [f64; 4],
    pub s: f64,
    pub l_s: f64,
    pub l_q: f64,
}

/// Constants of the contraction metric `ρ_θ = |x − x'| + θ‖ȳ − ȳ'‖₁`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub s: f64,
    pub c_l: f64,
    pub l_s: f64,
    pub kappa: f64,
    pub l_q: f64,
    /// `(1 − c_L)/(L_S κ + L_Q)`; infinite when the denominator vanishes.
    pub theta_max: f64,
    pub theta: f64,
    /// `max{c_L + θ(L_S κ + L_Q), S}` at `theta`.
    pub c_theta: f64,
    pub domain: DomainBox,
    pub contractive: bool,
    pub violations: Vec<String>,
    pub intervals: Vec<IntervalContraction>,
}

/// `(1 − c_L)/(L_S κ + L_Q)`, or `+∞` when `L_S κ + L_Q = 0`.
pub fn theta_max(c_l: f64, l_s: f64, kappa: f64, l_q: f64) -> f64 {
    let denom = l_s * kappa + l_q;
    if denom > 0.0 {
        (1.0 - c_l) / denom
    } else {
        f64::INFINITY
    }
}

/// `max{c_L + θ(L_S κ + L_Q), S}`.
pub fn contraction_constant(theta: f64, c_l: f64, l_s: f64, kappa: f64, l_q: f64, s: f64) -> f64 {
    (c_l + theta * (l_s * kappa + l_q)).max(s)
}

/// One subinterval's map, factors and offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub map: IntervalMap,
    pub factors: FactorQuad,
    pub q: Coefficient,
    pub q_tilde: Coefficient,
}

/// The assembled hidden-variable IFS for a curve.
#[derive(Debug, Clone)]
pub struct Hvfif {
    data: ExtendedDataSet,
    pieces: Vec<Piece>,
    contraction: ContractionReport,
}

impl Hvfif {
    /// Builds with forward maps, rejecting non-contractive factor sets.
    pub fn build(data: ExtendedDataSet, factors: Vec<FactorQuad>) -> Result<Self> {
        Hvfif::build_with(data, factors, &BuildOptions::default())
    }

    pub fn build_with(
        data: ExtendedDataSet,
        factors: Vec<FactorQuad>,
        opts: &BuildOptions,
    ) -> Result<Self> {
        let n = data.n();
        if factors.len() != n {
            return Err(Error::LengthMismatch {
                what: "factor quadruples".into(),
                expected: n,
                found: factors.len(),
            });
        }
        if !opts.orientations.is_empty() && opts.orientations.len() != n {
            return Err(Error::LengthMismatch {
                what: "orientations".into(),
                expected: n,
                found: opts.orientations.len(),
            });
        }
        if let Some(f) = factors
            .iter()
            .flat_map(|q| q.named())
            .find(|(_, e)| e.is_bivariate())
        {
            return Err(Error::InvalidInput(format!(
                "curve factor {} = `{}` uses `y`",
                f.0, f.1
            )));
        }
        let domain = data.domain();
        let (x0, xn) = (domain.lo, domain.hi);
        let (y, z) = (data.y(), data.z());
        let g = line_expr(x0, y[0], xn, y[n]);
        let g_prime = line_expr(x0, z[0], xn, z[n]);

        let pieces = factors
            .into_iter()
            .enumerate()
            .map(|(k, factors)| {
                let i = k + 1;
                let orientation = opts.orientations.get(k).copied().unwrap_or_default();
                let map = IntervalMap::new(i, domain, data.subinterval(i), orientation);
                let (scale, offset) = map.affine();
                let h = line_expr(data.x()[i - 1], y[i - 1], data.x()[i], y[i])
                    .compose_affine(scale, offset);
                let h_tilde = line_expr(data.x()[i - 1], z[i - 1], data.x()[i], z[i])
                    .compose_affine(scale, offset);
                let pulled = factors.map(|e| e.compose_affine(scale, offset));
                let q = h - pulled.s.clone() * g.clone() - pulled.s_prime.clone() * g_prime.clone();
                let q_tilde =
                    h_tilde - pulled.s_tilde * g.clone() - pulled.s_tilde_prime * g_prime.clone();
                Piece {
                    map,
                    factors,
                    q: Coefficient::new(q.fold_constants()),
                    q_tilde: Coefficient::new(q_tilde.fold_constants()),
                }
            })
            .collect();
        Hvfif::assemble(data, pieces, opts.permissive)
    }

    /// Validates factor bounds, computes the certificate and checks the
    /// endpoint identities.
    pub(crate) fn assemble(
        data: ExtendedDataSet,
        pieces: Vec<Piece>,
        permissive: bool,
    ) -> Result<Self> {
        let mut violations = Vec::new();
        for p in &pieces {
            for (name, e) in p.factors.named() {
                let bound = e.sup_abs_bound(p.map.target);
                if bound >= 1.0 {
                    let err =
                        factor_too_large(p.map.index.to_string(), name, e, p.map.target, bound);
                    if permissive {
                        violations.push(err.to_string());
                    } else {
                        return Err(err);
                    }
                }
            }
        }
        let domain = data.bounding_box().inflate(KAPPA_INFLATION);
        let contraction = certificate(&data, &pieces, domain, violations);
        if !permissive {
            if let Some(iv) = contraction.intervals.iter().find(|iv| iv.s >= 1.0) {
                return Err(Error::NotContractive {
                    interval: iv.index.to_string(),
                    s: iv.s,
                });
            }
        }
        let h = Hvfif {
            data,
            pieces,
            contraction,
        };
        h.verify_endpoints()?;
        Ok(h)
    }

    fn verify_endpoints(&self) -> Result<()> {
        let n = self.n();
        let tol = IDENTITY_TOL * self.data.magnitude();
        for p in &self.pieces {
            let i = p.map.index;
            for alpha in [0, n] {
                let xa = self.data.x()[alpha];
                let a = match (p.map.orientation, alpha == 0) {
                    (Orientation::Forward, true) | (Orientation::Reversed, false) => i - 1,
                    _ => i,
                };
                let (f1, f2) = self.apply_piece(p, xa, self.data.y()[alpha], self.data.z()[alpha]);
                let residual = (f1 - self.data.y()[a])
                    .abs()
                    .max((f2 - self.data.z()[a]).abs());
                let image = p.map.apply(xa);
                if residual > tol || image != self.data.x()[a] {
                    return Err(Error::EndpointMismatch {
                        interval: i.to_string(),
                        residual,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn data(&self) -> &ExtendedDataSet {
        &self.data
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn maps(&self) -> impl Iterator<Item = &IntervalMap> {
        self.pieces.iter().map(|p| &p.map)
    }

    pub fn factors(&self) -> impl Iterator<Item = &FactorQuad> {
        self.pieces.iter().map(|p| &p.factors)
    }

    pub fn contraction(&self) -> &ContractionReport {
        &self.contraction
    }

    /// `S = max_i max(‖s_i‖ + ‖s̃_i‖, ‖s'_i‖ + ‖s̃'_i‖)`.
    pub fn s(&self) -> f64 {
        self.contraction.s
    }

    pub fn piece(&self, i: usize) -> Result<&Piece> {
        if i == 0 || i > self.n() {
            return Err(Error::IntervalIndex {
                index: i,
                n: self.n(),
            });
        }
        Ok(&self.pieces[i - 1])
    }

    #[inline]
    fn apply_piece(&self, p: &Piece, xi: f64, f1: f64, f2: f64) -> (f64, f64) {
        let [s, sp, st, stp] = p.factors.values(p.map.apply(xi), 0.0);
        (
            s * f1 + sp * f2 + p.q.eval(xi),
            st * f1 + stp * f2 + p.q_tilde.eval(xi),
        )
    }

    /// `(F_i¹, F_i²)(ξ, f₁, f₂)`: the value pair assigned at `x = L_i(ξ)`.
    pub fn rhs_recursion(&self, i: usize, xi: f64, f1: f64, f2: f64) -> Result<(f64, f64)> {
        let p = self.piece(i)?;
        Ok(self.apply_piece(p, xi, f1, f2))
    }

    /// Unchecked kernel for the evaluators; `k` is zero-based.
    #[inline]
    pub(crate) fn step(&self, k: usize, xi: f64, f1: f64, f2: f64) -> (f64, f64) {
        self.apply_piece(&self.pieces[k], xi, f1, f2)
    }

    /// Baseline `(g(x), g'(x))`: the lines through the end data.
    pub fn baseline(&self, x: f64) -> (f64, f64) {
        let (x0, xn) = (self.data.x()[0], self.data.x()[self.n()]);
        let t = (x - x0) / (xn - x0);
        let n = self.n();
        (
            (1.0 - t) * self.data.y()[0] + t * self.data.y()[n],
            (1.0 - t) * self.data.z()[0] + t * self.data.z()[n],
        )
    }

    /// Recomputes the certificate over a box that also holds the samples
    /// `(f1, f2)`. The box is re-inflated at most once; the boolean reports
    /// whether it changed.
    pub fn refit_domain(
        &self,
        samples: impl IntoIterator<Item = (f64, f64)> + Clone,
    ) -> (Hvfif, bool) {
        let current = self.contraction.domain;
        if samples
            .clone()
            .into_iter()
            .all(|(a, b)| current.contains(a, b))
        {
            return (self.clone(), false);
        }
        let hull = samples
            .into_iter()
            .fold(self.data.bounding_box(), |b, (a, c)| b.hull_point(a, c))
            .inflate(KAPPA_INFLATION);
        let mut out = self.clone();
        out.contraction = certificate(
            &self.data,
            &self.pieces,
            hull,
            self.contraction.violations.clone(),
        );
        (out, true)
    }

    /// The system for the same ordinates on perturbed abscissae `x*` with
    /// `x*_0 = x_0`, `x*_n = x_n`: maps `R ∘ L_i`, factors `s_i ∘ R⁻¹` and
    /// offsets `q_i ∘ R⁻¹`, where `R` is the piecewise-linear map sending
    /// `x_k` to `x*_k`.
    pub fn remap_abscissae(&self, new_x: &[f64], permissive: bool) -> Result<Hvfif> {
        let n = self.n();
        if new_x.len() != n + 1 {
            return Err(Error::LengthMismatch {
                what: "perturbed abscissae".into(),
                expected: n + 1,
                found: new_x.len(),
            });
        }
        let old_x = self.data.x();
        if new_x[0] != old_x[0] || new_x[n] != old_x[n] {
            return Err(Error::InvalidInput(
                "perturbed abscissae must keep both end points fixed".into(),
            ));
        }
        let data = ExtendedDataSet::new(
            new_x.to_vec(),
            self.data.y().to_vec(),
            self.data.z().to_vec(),
        )?;
        let r_inverse = PiecewiseLinear::new(new_x.to_vec(), old_x.to_vec());
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let i = p.map.index;
                let target = data.subinterval(i);
                // R⁻¹ restricted to I*_i is affine onto I_i
                let scale = (old_x[i] - old_x[i - 1]) / (new_x[i] - new_x[i - 1]);
                let offset = old_x[i - 1] - scale * new_x[i - 1];
                Piece {
                    map: IntervalMap::new(i, p.map.source, target, p.map.orientation),
                    factors: p
                        .factors
                        .map(|e| e.compose_affine(scale, offset).fold_constants()),
                    q: p.q.precompose(r_inverse.clone()),
                    q_tilde: p.q_tilde.precompose(r_inverse.clone()),
                }
            })
            .collect();
        Hvfif::assemble(data, pieces, permissive)
    }

    /// Same factors on the same abscissae with new ordinates.
    pub fn with_ordinates(&self, y: Vec<f64>, z: Vec<f64>, permissive: bool) -> Result<Hvfif> {
        let data = self.data.with_ordinates(y, z)?;
        if self.pieces.iter().any(|p| !p.q.premaps.is_empty()) {
            return Err(Error::InvalidInput(
                "cannot replace ordinates of a remapped system".into(),
            ));
        }
        let opts = BuildOptions {
            orientations: self.pieces.iter().map(|p| p.map.orientation).collect(),
            permissive,
        };
        Hvfif::build_with(data, self.factors().cloned().collect(), &opts)
    }
}

fn factor_too_large(
    interval: String,
    name: &'static str,
    e: &FactorExpr,
    domain: Interval,
    bound: f64,
) -> Error {
    let sampled = (0..=4096)
        .map(|k| domain.lo + domain.width() * k as f64 / 4096.0)
        .map(|x| e.eval_xy(x, 0.0).abs())
        .fold(0.0, f64::max);
    let note = if sampled < 1.0 {
        format!(" (conservative bound; dense sampling peaks at {sampled:.6})")
    } else {
        String::new()
    };
    Error::FactorTooLarge {
        interval,
        factor: name,
        bound,
        note,
    }
}

fn certificate(
    data: &ExtendedDataSet,
    pieces: &[Piece],
    domain: DomainBox,
    violations: Vec<String>,
) -> ContractionReport {
    let whole = data.domain();
    let intervals: Vec<IntervalContraction> = pieces
        .iter()
        .map(|p| {
            let target = p.map.target;
            let c_l = p.map.ratio();
            let sup = p.factors.named().map(|(_, e)| e.sup_abs_bound(target));
            let lip = p.factors.named().map(|(_, e)| e.lipschitz_bound(target));
            IntervalContraction {
                index: p.map.index,
                c_l,
                sup,
                lipschitz: lip,
                s: (sup[0] + sup[2]).max(sup[1] + sup[3]),
                l_s: ((lip[0] + lip[2]) * c_l).max((lip[1] + lip[3]) * c_l),
                l_q: p.q.lipschitz_bound(whole) + p.q_tilde.lipschitz_bound(whole),
            }
        })
        .collect();
    let s = intervals.iter().map(|iv| iv.s).fold(0.0, f64::max);
    let c_l = intervals.iter().map(|iv| iv.c_l).fold(0.0, f64::max);
    let l_s = intervals.iter().map(|iv| iv.l_s).fold(0.0, f64::max);
    let l_q = intervals.iter().map(|iv| iv.l_q).fold(0.0, f64::max);
    let kappa = domain.kappa();
    let theta_max = theta_max(c_l, l_s, kappa, l_q);
    let theta = if theta_max.is_finite() {
        0.5 * theta_max
    } else {
        1.0
    };
    let mut violations = violations;
    if s >= 1.0 {
        let worst = intervals
            .iter()
            .find(|iv| iv.s >= 1.0)
            .map(|iv| iv.index)
            .unwrap_or(0);
        violations.push(format!("S = {s} >= 1 at interval {worst}"));
    }
    ContractionReport {
        s,
        c_l,
        l_s,
        kappa,
        l_q,
        theta_max,
        theta,
        c_theta: contraction_constant(theta, c_l, l_s, kappa, l_q, s),
        domain,
        contractive: s < 1.0,
        violations,
        intervals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn example_data() -> ExtendedDataSet {
        ExtendedDataSet::new(
            vec![0.0, 0.25, 0.5, 0.75, 1.0],
            vec![20.0, 30.0, 10.0, 50.0, 40.0],
            vec![2.0, 3.0, 1.0, 5.0, 4.0],
        )
        .unwrap()
    }

    fn example_a() -> Vec<FactorQuad> {
        let s = [0.3, 0.85, 0.8, 0.5];
        let st = [0.0; 4];
        let sp = [0.8, 0.6, 0.4, 0.5];
        let stp = [0.19, 0.37, 0.48, 0.43];
        (0..4)
            .map(|k| FactorQuad::constant(s[k], sp[k], st[k], stp[k]))
            .collect()
    }

    #[test]
    fn example_a_has_s_099() {
        let h = Hvfif::build(example_data(), example_a()).unwrap();
        assert!((h.s() - 0.99).abs() < 1e-15, "{}", h.s());
        assert!(h.contraction().contractive);
        assert!(h.contraction().theta_max > 0.0);
        assert!(h.contraction().c_theta < 1.0);
    }

    #[test]
    fn zero_factors_reduce_to_lines() {
        let h = Hvfif::build(example_data(), vec![FactorQuad::uniform(0.0); 4]).unwrap();
        let p = h.piece(1).unwrap();
        for u in [0.0, 0.3, 0.5, 1.0] {
            // q_1(u) = h_1(L_1(u)) = 20 + 10·(L_1(u)/0.25)
            let expected = 20.0 + 10.0 * p.map.apply(u) / 0.25;
            assert!((p.q.eval(u) - expected).abs() < 1e-12);
            let (f1, _) = h.rhs_recursion(1, u, 123.0, -7.0).unwrap();
            assert!((f1 - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn sum_above_one_is_rejected_with_index() {
        let mut f = vec![FactorQuad::uniform(0.1); 4];
        f[0] = FactorQuad::constant(0.1, 0.9, 0.0, 0.2);
        let err = Hvfif::build(example_data(), f).unwrap_err();
        match err {
            Error::NotContractive { ref interval, s } => {
                assert_eq!(interval, "1");
                assert!((s - 1.1).abs() < 1e-12);
            }
            other => panic!("unexpected {other}"),
        }
        assert!(err.to_string().contains("at interval 1"));
    }

    #[test]
    fn factor_bound_rejected_unless_permissive() {
        let mut f = vec![FactorQuad::uniform(0.1); 4];
        f[1].s = FactorExpr::parse("cos(30*x)").unwrap();
        let err = Hvfif::build(example_data(), f.clone()).unwrap_err();
        assert!(matches!(err, Error::FactorTooLarge { .. }), "{err}");
        let opts = BuildOptions {
            permissive: true,
            ..Default::default()
        };
        let h = Hvfif::build_with(example_data(), f, &opts).unwrap();
        assert!(!h.contraction().contractive);
        assert!(!h.contraction().violations.is_empty());
    }

    #[test]
    fn non_increasing_abscissae() {
        let err =
            ExtendedDataSet::new(vec![0.0, 0.5, 0.5, 1.0], vec![0.0; 4], vec![0.0; 4]).unwrap_err();
        assert!(matches!(err, Error::NonIncreasing { index: 2 }));
        assert!(ExtendedDataSet::new(vec![0.0, 1.0], vec![0.0; 2], vec![0.0; 2]).is_err());
    }

    #[test]
    fn maps_hit_endpoints_exactly() {
        let data = ExtendedDataSet::new(
            vec![0.1, 0.37, 0.52, 0.9],
            vec![1.0, 2.0, 3.0, 4.0],
            vec![0.0; 4],
        )
        .unwrap();
        for i in 1..=3 {
            for o in [Orientation::Forward, Orientation::Reversed] {
                let m = IntervalMap::new(i, data.domain(), data.subinterval(i), o);
                let (a, b) = (m.apply(0.1), m.apply(0.9));
                let mut ends = [a, b];
                ends.sort_by(f64::total_cmp);
                assert_eq!(ends, [data.x()[i - 1], data.x()[i]]);
                assert_eq!(m.invert(a), 0.1);
                assert_eq!(m.invert(b), 0.9);
                let u = 0.4;
                assert!(
                    (m.apply(u)
                        - m.apply(0.5)
                        - m.ratio()
                            * (u - 0.5)
                            * if o == Orientation::Forward { 1.0 } else { -1.0 })
                    .abs()
                        < 1e-15
                );
            }
        }
    }

    #[test]
    fn reversed_orientation_matches_corners() {
        let opts = BuildOptions {
            orientations: vec![
                Orientation::Reversed,
                Orientation::Forward,
                Orientation::Reversed,
                Orientation::Forward,
            ],
            permissive: false,
        };
        let h = Hvfif::build_with(example_data(), example_a(), &opts).unwrap();
        // reversed: L_1(x_0) = x_1, so F_1(x_0, ȳ_0) = ȳ_1
        let (f1, f2) = h.rhs_recursion(1, 0.0, 20.0, 2.0).unwrap();
        assert!((f1 - 30.0).abs() < 1e-12 && (f2 - 3.0).abs() < 1e-12);
    }

    #[test]
    fn theta_formula() {
        let t = theta_max(0.25, 0.0, 123.0, 100.0);
        assert!((t - 0.0075).abs() < 1e-15);
        assert!(theta_max(0.25, 0.0, 1.0, 0.0).is_infinite());
        assert!(contraction_constant(t / 2.0, 0.25, 0.0, 1.0, 100.0, 0.9) < 1.0);
    }

    #[test]
    fn uniform_c_l() {
        let h = Hvfif::build(example_data(), vec![FactorQuad::uniform(0.2); 4]).unwrap();
        assert_eq!(h.contraction().c_l, 0.25);
        assert_eq!(h.contraction().l_s, 0.0);
    }

    #[test]
    fn collinear_zero_factors_contract() {
        let data = ExtendedDataSet::uniform(0.0, 1.0, vec![0.0, 1.0, 2.0, 3.0, 4.0], vec![1.0; 5])
            .unwrap();
        let h = Hvfif::build(data, vec![FactorQuad::uniform(0.0); 4]).unwrap();
        let c = h.contraction();
        assert!(c.c_theta < 1.0, "{c:?}");
    }

    #[test]
    fn interval_lookup_convention() {
        let d = example_data();
        assert_eq!(d.interval_of(0.0), 1);
        assert_eq!(d.interval_of(0.25), 1);
        assert_eq!(d.interval_of(0.2500001), 2);
        assert_eq!(d.interval_of(1.0), 4);
        assert_eq!(d.node_index(0.75, 1e-14), Some(3));
        assert_eq!(d.node_index(0.7, 1e-14), None);
    }
}
