//! Hidden-variable bivariate fractal interpolation on rectangular grids.
//!
//! Cell `E_ij = I_{x_i} × I_{y_j}` carries the map
//! `W_ij(x̄, z̄) = (L_{x_i}(x), L_{y_j}(y), F_ij(x̄, z̄))` with `F_ij` of the
//! same shape as the curve case. The offsets are
//! `q_ij = −s_ij(L̄_ij x̄) ḡ(x̄) − s'_ij(L̄_ij x̄) ḡ′(x̄) + h_ij(L̄_ij x̄)` where
//! `ḡ, ḡ′` interpolate the four corners of `E` bilinearly and `h_ij, h̃_ij`
//! the four corners of `E_ij`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{least_squares, BoxCountRecord, LinearFit, MIN_COLUMN_SAMPLES};
use crate::curve::{FactorQuad, IntervalMap, Orientation, IDENTITY_TOL};
use crate::error::{Error, Result};
use crate::factor::{Domain, FactorExpr, Interval};

/// Largest `(n·m)^depth` allowed for surface subdivision.
pub const MAX_SURFACE_MAPS_POWER: f64 = 16_777_216.0;

/// Largest number of samples a surface subdivision may produce.
pub const MAX_SURFACE_POINTS: usize = 1 << 26;

/// Nodes `(x_i, y_j, z_ij, t_ij)` on a uniform tensor grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDataSet {
    x: Vec<f64>,
    y: Vec<f64>,
    /// `z[i][j]` at `(x_i, y_j)`
    z: Vec<Vec<f64>>,
    t: Vec<Vec<f64>>,
}

fn check_axis(v: &[f64], axis: &'static str) -> Result<()> {
    if v.len() < 3 {
        return Err(Error::TooFewNodes {
            min: 3,
            found: v.len(),
        });
    }
    if let Some(k) = (1..v.len()).find(|&k| !(v[k] > v[k - 1])) {
        return Err(Error::NonIncreasing { index: k });
    }
    let n = (v.len() - 1) as f64;
    let w = v[v.len() - 1] - v[0];
    if v.iter()
        .enumerate()
        .any(|(k, &vk)| (vk - (v[0] + w * k as f64 / n)).abs() > 1e-12 * w)
    {
        return Err(Error::NonUniformGrid { axis });
    }
    Ok(())
}

impl GridDataSet {
    pub fn new(x: Vec<f64>, y: Vec<f64>, z: Vec<Vec<f64>>, t: Vec<Vec<f64>>) -> Result<Self> {
        check_axis(&x, "x")?;
        check_axis(&y, "y")?;
        for (what, m) in [("z", &z), ("t", &t)] {
            if m.len() != x.len() {
                return Err(Error::LengthMismatch {
                    what: format!("{what} rows"),
                    expected: x.len(),
                    found: m.len(),
                });
            }
            if let Some(row) = m.iter().find(|r| r.len() != y.len()) {
                return Err(Error::LengthMismatch {
                    what: format!("{what} columns"),
                    expected: y.len(),
                    found: row.len(),
                });
            }
            if m.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("non-finite {what} value")));
            }
        }
        Ok(GridDataSet { x, y, z, t })
    }

    /// Uniform grid on `[x0, x1] × [y0, y1]`.
    pub fn uniform(
        x_range: (f64, f64),
        y_range: (f64, f64),
        z: Vec<Vec<f64>>,
        t: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let axis = |(a, b): (f64, f64), len: usize| -> Vec<f64> {
            let n = len.saturating_sub(1).max(1);
            (0..len)
                .map(|k| {
                    if k == n {
                        b
                    } else {
                        a + (b - a) * k as f64 / n as f64
                    }
                })
                .collect()
        };
        let x = axis(x_range, z.len());
        let y = axis(y_range, z.first().map_or(0, Vec::len));
        GridDataSet::new(x, y, z, t)
    }

    /// Cells along x.
    pub fn n(&self) -> usize {
        self.x.len() - 1
    }

    /// Cells along y.
    pub fn m(&self) -> usize {
        self.y.len() - 1
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self, i: usize, j: usize) -> f64 {
        self.z[i][j]
    }

    pub fn t(&self, i: usize, j: usize) -> f64 {
        self.t[i][j]
    }

    pub fn magnitude(&self) -> f64 {
        self.z
            .iter()
            .chain(&self.t)
            .flatten()
            .fold(1.0f64, |m, v| m.max(v.abs()))
    }

    fn x_domain(&self) -> Interval {
        Interval::new(self.x[0], self.x[self.n()])
    }

    fn y_domain(&self) -> Interval {
        Interval::new(self.y[0], self.y[self.m()])
    }

    /// `E_ij` for `1 ≤ i ≤ n`, `1 ≤ j ≤ m`.
    pub fn cell(&self, i: usize, j: usize) -> (Interval, Interval) {
        (
            Interval::new(self.x[i - 1], self.x[i]),
            Interval::new(self.y[j - 1], self.y[j]),
        )
    }
}

/// Bilinear interpolant of corner values `[f(a0,b0), f(a1,b0), f(a0,b1), f(a1,b1)]`.
fn bilinear_expr(xs: Interval, ys: Interval, f: [f64; 4]) -> FactorExpr {
    let u = FactorExpr::affine_x(1.0 / xs.width(), -xs.lo / xs.width());
    let v = FactorExpr::affine_y(1.0 / ys.width(), -ys.lo / ys.width());
    let one = || FactorExpr::Num(1.0);
    let term = |c: f64, a: FactorExpr, b: FactorExpr| FactorExpr::Num(c) * a * b;
    (term(f[0], one() - u.clone(), one() - v.clone())
        + term(f[1], u.clone(), one() - v.clone())
        + term(f[2], one() - u.clone(), v.clone())
        + term(f[3], u, v))
    .fold_constants()
}

/// One cell of the surface system.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceCell {
    pub i: usize,
    pub j: usize,
    pub map_x: IntervalMap,
    pub map_y: IntervalMap,
    pub factors: FactorQuad,
    pub q: FactorExpr,
    pub q_tilde: FactorExpr,
    /// Upper bounds `[‖s‖, ‖s'‖, ‖s̃‖, ‖s̃'‖]` over `E_ij`.
    pub sup: [f64; 4],
}

impl SurfaceCell {
    fn domain(&self) -> Domain {
        Domain::Rect(self.map_x.target, self.map_y.target)
    }

    #[inline]
    fn apply(&self, u: f64, v: f64, f1: f64, f2: f64) -> (f64, f64) {
        let (x, y) = (self.map_x.apply(u), self.map_y.apply(v));
        let [s, sp, st, stp] = self.factors.values(x, y);
        (
            s * f1 + sp * f2 + self.q.eval_xy(u, v),
            st * f1 + stp * f2 + self.q_tilde.eval_xy(u, v),
        )
    }
}

/// Build options for [`Hvbfif::build_with`].
#[derive(Debug, Clone, Copy, Default)]
pub struct SurfaceOptions {
    /// Record factor-bound and `S̄ ≥ 1` violations instead of failing.
    pub permissive: bool,
}

/// The assembled bivariate system.
#[derive(Debug, Clone)]
pub struct Hvbfif {
    data: GridDataSet,
    cells: Vec<SurfaceCell>,
    s_bar: f64,
    sign_condition: bool,
    violations: Vec<String>,
}

impl Hvbfif {
    /// `factors[(i−1)·m + (j−1)]` belongs to cell `E_ij`.
    pub fn build(data: GridDataSet, factors: Vec<FactorQuad>) -> Result<Self> {
        Hvbfif::build_with(data, factors, SurfaceOptions::default())
    }

    pub fn build_with(
        data: GridDataSet,
        factors: Vec<FactorQuad>,
        opts: SurfaceOptions,
    ) -> Result<Self> {
        let (n, m) = (data.n(), data.m());
        if factors.len() != n * m {
            return Err(Error::LengthMismatch {
                what: "cell factor quadruples".into(),
                expected: n * m,
                found: factors.len(),
            });
        }
        let (ex, ey) = (data.x_domain(), data.y_domain());
        let corners = |v: &Vec<Vec<f64>>, i0: usize, i1: usize, j0: usize, j1: usize| {
            [v[i0][j0], v[i1][j0], v[i0][j1], v[i1][j1]]
        };
        let g = bilinear_expr(ex, ey, corners(&data.z, 0, n, 0, m));
        let g_prime = bilinear_expr(ex, ey, corners(&data.t, 0, n, 0, m));
        let mut violations = Vec::new();
        let mut cells = Vec::with_capacity(n * m);
        for (k, f) in factors.into_iter().enumerate() {
            let (i, j) = (k / m + 1, k % m + 1);
            let (cx, cy) = data.cell(i, j);
            let map_x = IntervalMap::new(i, ex, cx, Orientation::Forward);
            let map_y = IntervalMap::new(j, ey, cy, Orientation::Forward);
            let (ax, bx) = map_x.affine();
            let (ay, by) = map_y.affine();
            let lx = FactorExpr::affine_x(ax, bx);
            let ly = FactorExpr::affine_y(ay, by);
            let pull = |e: &FactorExpr| e.substitute(&lx, &ly);
            let h = pull(&bilinear_expr(cx, cy, corners(&data.z, i - 1, i, j - 1, j)));
            let h_tilde = pull(&bilinear_expr(cx, cy, corners(&data.t, i - 1, i, j - 1, j)));
            let q =
                (h - pull(&f.s) * g.clone() - pull(&f.s_prime) * g_prime.clone()).fold_constants();
            let q_tilde =
                (h_tilde - pull(&f.s_tilde) * g.clone() - pull(&f.s_tilde_prime) * g_prime.clone())
                    .fold_constants();
            let dom = Domain::Rect(cx, cy);
            let sup = f.named().map(|(_, e)| e.sup_abs_bound(dom));
            for ((name, _), b) in f.named().iter().zip(sup) {
                if b >= 1.0 {
                    let err = Error::FactorTooLarge {
                        interval: format!("({i}, {j})"),
                        factor: name,
                        bound: b,
                        note: String::new(),
                    };
                    if opts.permissive {
                        violations.push(err.to_string());
                    } else {
                        return Err(err);
                    }
                }
            }
            cells.push(SurfaceCell {
                i,
                j,
                map_x,
                map_y,
                factors: f,
                q,
                q_tilde,
                sup,
            });
        }
        let mut s_bar = 0.0f64;
        for c in &cells {
            let s = (c.sup[0] + c.sup[2]).max(c.sup[1] + c.sup[3]);
            if s >= 1.0 {
                let err = Error::NotContractive {
                    interval: format!("({}, {})", c.i, c.j),
                    s,
                };
                if opts.permissive {
                    violations.push(err.to_string());
                } else {
                    return Err(err);
                }
            }
            s_bar = s_bar.max(s);
        }
        let sign_condition = cells.iter().all(|c| {
            let f = &c.factors;
            (f.s.clone() * f.s_prime.clone()).range(c.domain()).lo >= 0.0
                && (f.s_tilde.clone() * f.s_tilde_prime.clone())
                    .range(c.domain())
                    .lo
                    >= 0.0
        });
        let out = Hvbfif {
            data,
            cells,
            s_bar,
            sign_condition,
            violations,
        };
        out.verify_corners()?;
        Ok(out)
    }

    fn verify_corners(&self) -> Result<()> {
        let (n, m) = (self.data.n(), self.data.m());
        let tol = IDENTITY_TOL * self.data.magnitude();
        for c in &self.cells {
            for (alpha, a) in [(0, c.i - 1), (n, c.i)] {
                for (beta, b) in [(0, c.j - 1), (m, c.j)] {
                    let (u, v) = (self.data.x[alpha], self.data.y[beta]);
                    let (f1, f2) =
                        c.apply(u, v, self.data.z[alpha][beta], self.data.t[alpha][beta]);
                    let residual = (f1 - self.data.z[a][b])
                        .abs()
                        .max((f2 - self.data.t[a][b]).abs());
                    if residual > tol {
                        return Err(Error::EndpointMismatch {
                            interval: format!("({}, {})", c.i, c.j),
                            residual,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn data(&self) -> &GridDataSet {
        &self.data
    }

    pub fn cells(&self) -> &[SurfaceCell] {
        &self.cells
    }

    pub fn cell(&self, i: usize, j: usize) -> Result<&SurfaceCell> {
        let (n, m) = (self.data.n(), self.data.m());
        if i == 0 || i > n {
            return Err(Error::IntervalIndex { index: i, n });
        }
        if j == 0 || j > m {
            return Err(Error::IntervalIndex { index: j, n: m });
        }
        Ok(&self.cells[(i - 1) * m + (j - 1)])
    }

    /// `S̄ = max_ij max(‖s_ij‖ + ‖s̃_ij‖, ‖s'_ij‖ + ‖s̃'_ij‖)`.
    pub fn s_bar(&self) -> f64 {
        self.s_bar
    }

    pub fn contractive(&self) -> bool {
        self.s_bar < 1.0
    }

    /// `s_ij s'_ij ≥ 0` and `s̃_ij s̃'_ij ≥ 0` on every cell.
    pub fn sign_condition(&self) -> bool {
        self.sign_condition
    }

    pub fn violations(&self) -> &[String] {
        &self.violations
    }

    /// `F_ij(ū, f₁, f₂)`: the value pair assigned at `L̄_ij(ū)`.
    pub fn rhs_recursion(
        &self,
        i: usize,
        j: usize,
        u: f64,
        v: f64,
        f1: f64,
        f2: f64,
    ) -> Result<(f64, f64)> {
        Ok(self.cell(i, j)?.apply(u, v, f1, f2))
    }
}

/// Gridded surface samples; `f1[i·ny + j]` sits at `(x[i], y[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSamples {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    pub depth: usize,
}

impl SurfaceSamples {
    pub fn len(&self) -> usize {
        self.f1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f1.is_empty()
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> (f64, f64) {
        let k = i * self.y.len() + j;
        (self.f1[k], self.f2[k])
    }

    /// Largest deviation from the data at the grid nodes.
    pub fn node_error(&self, data: &GridDataSet) -> f64 {
        let sx = (self.x.len() - 1) / data.n();
        let sy = (self.y.len() - 1) / data.m();
        let mut err = 0.0f64;
        for a in 0..=data.n() {
            for b in 0..=data.m() {
                let (f1, f2) = self.at(a * sx, b * sy);
                err = err
                    .max((f1 - data.z[a][b]).abs())
                    .max((f2 - data.t[a][b]).abs());
            }
        }
        err
    }

    /// Rows `x,y,f1,f2`, x outer.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,f1,f2")?;
        for (i, x) in self.x.iter().enumerate() {
            for (j, y) in self.y.iter().enumerate() {
                let (a, b) = self.at(i, j);
                writeln!(w, "{x:.16e},{y:.16e},{a:.16e},{b:.16e}")?;
            }
        }
        Ok(())
    }

    /// Binary graymap of `f₁` (8 bit when `maxval < 256`, else 16 bit
    /// big-endian). Image column `i` is `x_i`, image row `j` is `y_j`.
    pub fn write_pgm<W: Write>(&self, mut w: W, maxval: u16) -> std::io::Result<()> {
        let (lo, hi) = self
            .f1
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
                (l.min(v), h.max(v))
            });
        let scale = if hi > lo {
            (hi - lo) / maxval as f64
        } else {
            0.0
        };
        write!(
            w,
            "P5\n# f1 = {lo:.16e} + pixel * {scale:.16e}\n{} {}\n{maxval}\n",
            self.x.len(),
            self.y.len()
        )?;
        let wide = maxval > 255;
        let mut buf = Vec::with_capacity(self.len() * if wide { 2 } else { 1 });
        for j in 0..self.y.len() {
            for i in 0..self.x.len() {
                let v = self.at(i, j).0;
                let p = if scale > 0.0 {
                    ((v - lo) / scale).round().clamp(0.0, maxval as f64) as u16
                } else {
                    0
                };
                if wide {
                    buf.extend_from_slice(&p.to_be_bytes());
                } else {
                    buf.push(p as u8);
                }
            }
        }
        w.write_all(&buf)
    }
}

/// Checks both surface point-count guards.
pub fn check_surface_depth(n: usize, m: usize, depth: usize) -> Result<()> {
    let maps = ((n * m) as f64).powi(depth as i32);
    let points =
        ((n as f64).powi(depth as i32 + 1) + 1.0) * ((m as f64).powi(depth as i32 + 1) + 1.0);
    if maps > MAX_SURFACE_MAPS_POWER || points > MAX_SURFACE_POINTS as f64 {
        return Err(Error::TooManyPoints(format!(
            "surface depth {depth} on a {n}x{m} grid needs {points} samples"
        )));
    }
    Ok(())
}

// source cell (1-based) and local index for position p on a refined axis
#[inline]
fn source(p: usize, len: usize) -> (usize, usize) {
    let seg = len - 1;
    let cell = p.div_ceil(seg).max(1);
    (cell, p - (cell - 1) * seg)
}

/// Exact attractor samples on the tensor grid after `depth` levels. Points on
/// internal cell edges take the value from the lower-indexed cell.
pub fn subdivide_surface(h: &Hvbfif, depth: usize) -> Result<SurfaceSamples> {
    let d = &h.data;
    let (n, m) = (d.n(), d.m());
    check_surface_depth(n, m, depth)?;
    let mut xs = d.x.clone();
    let mut ys = d.y.clone();
    let mut f1: Vec<f64> = d.z.iter().flatten().copied().collect();
    let mut f2: Vec<f64> = d.t.iter().flatten().copied().collect();
    for _ in 0..depth {
        let (nx, ny) = (n * (xs.len() - 1) + 1, m * (ys.len() - 1) + 1);
        let new_x: Vec<f64> = (0..nx)
            .map(|p| {
                let (i, r) = source(p, xs.len());
                h.cells[(i - 1) * m].map_x.apply(xs[r])
            })
            .collect();
        let new_y: Vec<f64> = (0..ny)
            .map(|q| {
                let (j, s) = source(q, ys.len());
                h.cells[j - 1].map_y.apply(ys[s])
            })
            .collect();
        let old_ny = ys.len();
        let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..nx)
            .into_par_iter()
            .map(|p| {
                let (i, r) = source(p, xs.len());
                let mut a = Vec::with_capacity(ny);
                let mut b = Vec::with_capacity(ny);
                for q in 0..ny {
                    let (j, s) = source(q, old_ny);
                    let k = r * old_ny + s;
                    let (v1, v2) = h.cells[(i - 1) * m + (j - 1)].apply(xs[r], ys[s], f1[k], f2[k]);
                    a.push(v1);
                    b.push(v2);
                }
                (a, b)
            })
            .collect();
        f1 = Vec::with_capacity(nx * ny);
        f2 = Vec::with_capacity(nx * ny);
        for (a, b) in rows {
            f1.extend(a);
            f2.extend(b);
        }
        xs = new_x;
        ys = new_y;
    }
    Ok(SurfaceSamples {
        x: xs,
        y: ys,
        f1,
        f2,
        depth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SliceAxis {
    /// Fixed `x_α`, varying `y`.
    X,
    /// Fixed `y_β`, varying `x`.
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceTriple {
    pub axis: SliceAxis,
    pub index: usize,
    pub triple: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceHypothesisCheck {
    pub uniform_nodes: bool,
    pub square_grid: bool,
    pub sign_condition: bool,
    pub slice: Option<SliceTriple>,
    pub z_noncollinear: bool,
    pub t_noncollinear: bool,
    pub zt_comonotone: bool,
    #[serde(rename = "H")]
    pub big_h: f64,
    #[serde(rename = "h")]
    pub small_h: f64,
}

impl SurfaceHypothesisCheck {
    pub fn all_hold(&self) -> bool {
        self.uniform_nodes && self.square_grid && self.sign_condition && self.slice.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceDimensionReport {
    pub lambda_low: f64,
    pub lambda_up: f64,
    pub bound_low: Option<f64>,
    pub bound_up: Option<f64>,
    pub case: crate::analysis::DimensionCase,
    pub hypothesis: SurfaceHypothesisCheck,
    pub empirical: Option<SurfaceEmpirical>,
}

fn chord_gap(s: [f64; 3], v: [f64; 3]) -> f64 {
    let r = (s[1] - s[0]) / (s[2] - s[0]);
    (v[1] - ((1.0 - r) * v[0] + r * v[2])).abs()
}

fn surface_hypothesis(h: &Hvbfif) -> SurfaceHypothesisCheck {
    let d = &h.data;
    let tol = 1e-12 * d.magnitude();
    let mut best: Option<(SliceTriple, f64, f64)> = None;
    let (mut any_z, mut any_t, mut any_mono) = (false, false, false);
    let mut scan = |axis: SliceAxis,
                    index: usize,
                    pos: &[f64],
                    z: &dyn Fn(usize) -> f64,
                    t: &dyn Fn(usize) -> f64| {
        let len = pos.len();
        for a in 0..len {
            for b in a + 1..len {
                for c in b + 1..len {
                    let s = [pos[a], pos[b], pos[c]];
                    let gz = chord_gap(s, [z(a), z(b), z(c)]);
                    let gt = chord_gap(s, [t(a), t(b), t(c)]);
                    let mono = [(a, b), (a, c), (b, c)]
                        .iter()
                        .all(|&(k, l)| (z(k) - z(l)) * (t(k) - t(l)) > 0.0);
                    any_z |= gz > tol;
                    any_t |= gt > tol;
                    any_mono |= mono;
                    if gz > tol
                        && gt > tol
                        && mono
                        && best.is_none_or(|(_, bz, bt)| gz * gt > bz * bt)
                    {
                        best = Some((
                            SliceTriple {
                                axis,
                                index,
                                triple: [a, b, c],
                            },
                            gz,
                            gt,
                        ));
                    }
                }
            }
        }
    };
    for alpha in 0..=d.n() {
        scan(SliceAxis::X, alpha, &d.y, &|j| d.z[alpha][j], &|j| {
            d.t[alpha][j]
        });
    }
    for beta in 0..=d.m() {
        scan(SliceAxis::Y, beta, &d.x, &|i| d.z[i][beta], &|i| {
            d.t[i][beta]
        });
    }
    let (slice, big_h, small_h, z_ok, t_ok, mono_ok) = match best {
        Some((s, gz, gt)) => (Some(s), gz, gt, true, true, true),
        None => (None, 0.0, 0.0, any_z, any_t, any_mono),
    };
    SurfaceHypothesisCheck {
        uniform_nodes: true,
        square_grid: d.n() == d.m(),
        sign_condition: h.sign_condition,
        slice,
        z_noncollinear: z_ok,
        t_noncollinear: t_ok,
        zt_comonotone: mono_ok,
        big_h,
        small_h,
    }
}

/// Surface dimension bounds; needs the same cell count on both axes.
/// The upper bound is clamped to 3.
pub fn dimension_bounds_surface(h: &Hvbfif) -> Result<SurfaceDimensionReport> {
    let n = h.data.n();
    if n != h.data.m() {
        return Err(Error::InvalidInput(format!(
            "surface dimension bounds need an n x n grid, got {n} x {}",
            h.data.m()
        )));
    }
    let mut lambda_low = 0.0;
    let mut lambda_up = 0.0;
    for c in &h.cells {
        let dom = c.domain();
        let f = &c.factors;
        let inf = |e: &FactorExpr| e.inf_abs_bound(dom);
        lambda_low += inf(&f.s).min(inf(&f.s_prime)) + inf(&f.s_tilde).min(inf(&f.s_tilde_prime));
        lambda_up += c.sup[0].max(c.sup[1]) + c.sup[2].max(c.sup[3]);
    }
    let nf = n as f64;
    let log_n = |v: f64| v.ln() / nf.ln();
    use crate::analysis::DimensionCase;
    let (case, bound_low, bound_up) = if lambda_low > nf {
        let up = (1.0 + log_n(lambda_up)).min(3.0);
        (
            DimensionCase::A,
            Some((1.0 + log_n(lambda_low)).min(up)),
            Some(up),
        )
    } else if lambda_up <= nf {
        (DimensionCase::B, Some(2.0), Some(2.0))
    } else {
        (DimensionCase::Inconclusive, None, None)
    };
    Ok(SurfaceDimensionReport {
        lambda_low,
        lambda_up,
        bound_low,
        bound_up,
        case,
        hypothesis: surface_hypothesis(h),
        empirical: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceEmpirical {
    pub depth: usize,
    pub records: Vec<BoxCountRecord>,
    pub fitted_levels: Vec<u32>,
    pub slope: f64,
    pub stderr: Option<f64>,
}

/// `N(ε)` over `ε_x × ε_y` cells at mesh level `k` (`ε = n^{-k}` of each
/// side), boxes of height `ε_x`. Cells are closed.
pub fn surface_box_count(s: &SurfaceSamples, n: usize, m: usize, k: u32) -> Result<BoxCountRecord> {
    let (cx, cy) = ((n as u64).pow(k) as usize, (m as u64).pow(k) as usize);
    let (sx, sy) = (s.x.len() - 1, s.y.len() - 1);
    if sx % cx != 0 || sy % cy != 0 {
        return Err(Error::MisalignedEpsilon {
            epsilon: (s.x[sx] - s.x[0]) / cx as f64,
        });
    }
    let (px, py) = (sx / cx, sy / cy);
    let eps = (s.x[sx] - s.x[0]) / cx as f64;
    let per_cell = (px + 1) * (py + 1);
    if per_cell < MIN_COLUMN_SAMPLES {
        return Err(Error::Undersampled {
            column: 0,
            count: per_cell,
            required: MIN_COLUMN_SAMPLES,
        });
    }
    let count: u64 = (0..cx * cy)
        .into_par_iter()
        .map(|cell| {
            let (a, b) = (cell / cy, cell % cy);
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for i in a * px..=(a + 1) * px {
                for j in b * py..=(b + 1) * py {
                    let v = s.f1[i * s.y.len() + j];
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            crate::analysis::column_boxes(lo, hi, eps)
        })
        .sum();
    Ok(BoxCountRecord {
        epsilon: eps,
        count,
    })
}

/// Regression of `log N` on `−log ε` for levels `k ≥ 2`; with no explicit
/// levels, every level the samples support is used.
pub fn estimate_dimension_surface(
    s: &SurfaceSamples,
    n: usize,
    m: usize,
    levels: Option<&[u32]>,
) -> Result<SurfaceEmpirical> {
    let levels: Vec<u32> = match levels {
        Some(l) => l.to_vec(),
        None => (1..=s.depth as u32 + 1)
            .filter(|&k| surface_box_count(s, n, m, k).is_ok())
            .collect(),
    };
    let records = levels
        .iter()
        .map(|&k| surface_box_count(s, n, m, k))
        .collect::<Result<Vec<_>>>()?;
    let fitted: Vec<(u32, BoxCountRecord)> = levels
        .iter()
        .copied()
        .zip(records.iter().copied())
        .filter(|(k, _)| *k >= 2)
        .collect();
    if fitted.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "surface box counting needs at least 2 levels with k >= 2, got {}",
            fitted.len()
        )));
    }
    let lx: Vec<f64> = fitted.iter().map(|(_, r)| -r.epsilon.ln()).collect();
    let ly: Vec<f64> = fitted.iter().map(|(_, r)| (r.count as f64).ln()).collect();
    let LinearFit { slope, stderr, .. } = least_squares(&lx, &ly);
    Ok(SurfaceEmpirical {
        depth: s.depth,
        records,
        fitted_levels: fitted.iter().map(|(k, _)| *k).collect(),
        slope,
        stderr,
    })
}
