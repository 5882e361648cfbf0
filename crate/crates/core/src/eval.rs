//! Evaluators for the vector interpolant `(f₁, f₂)`.
//!
//! [`subdivide`] pushes the data nodes through the maps `W_i` repeatedly and
//! so produces exact attractor points. [`rb_iterate`] iterates the
//! Read–Bajraktarevic operator on a fixed grid. Both use
//! [`Hvfif::rhs_recursion`] as their kernel.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{Hvfif, IDENTITY_TOL};
use crate::error::{Error, Result};

/// Bound on `depth · log₂ n` for subdivision.
pub const MAX_SUBDIVISION_BITS: f64 = 24.0;

/// Abscissae closer than this (relative to `|I|`) are merged.
pub const DEDUP_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Subdivision,
    RbIteration,
}

/// Sorted samples `(x, f₁(x), f₂(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub x: Vec<f64>,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    pub method: Method,
    /// Subdivision depth or number of sweeps performed.
    pub steps: usize,
    /// Sup change in the last sweep (operator iteration only).
    pub residual: Option<f64>,
    pub converged: bool,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.x
            .iter()
            .zip(&self.f1)
            .zip(&self.f2)
            .map(|((&x, &a), &b)| (x, a, b))
    }

    /// `(f₁, f₂)` pairs, e.g. for [`Hvfif::refit_domain`].
    pub fn values(&self) -> impl Iterator<Item = (f64, f64)> + Clone + '_ {
        self.f1.iter().copied().zip(self.f2.iter().copied())
    }

    /// Index of the sample at `x` (within `tol`), if present.
    pub fn find(&self, x: f64, tol: f64) -> Option<usize> {
        let k = self.x.partition_point(|&v| v < x - tol);
        (k < self.len() && (self.x[k] - x).abs() <= tol).then_some(k)
    }

    /// Largest node-value error `max |f(x_i) − ȳ_i|`; infinite if a node is missing.
    pub fn node_error(&self, h: &Hvfif) -> f64 {
        let data = h.data();
        let tol = DEDUP_TOL * data.domain().width();
        (0..=data.n())
            .map(|i| match self.find(data.x()[i], tol) {
                Some(k) => (self.f1[k] - data.y()[i])
                    .abs()
                    .max((self.f2[k] - data.z()[i]).abs()),
                None => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|f₁|` over the samples.
    pub fn sup_f1(&self) -> f64 {
        self.f1.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_f2(&self) -> f64 {
        self.f2.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Writes `x,f1,f2` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,f1,f2")?;
        for (x, a, b) in self.iter() {
            writeln!(w, "{x:.16e},{a:.16e},{b:.16e}")?;
        }
        Ok(())
    }
}

/// Checks the subdivision point-count guard `depth · log₂ n ≤ 24`.
pub fn check_depth(n: usize, depth: usize) -> Result<()> {
    let bits = depth as f64 * (n as f64).log2();
    if bits > MAX_SUBDIVISION_BITS + 1e-12 {
        return Err(Error::TooManyPoints(format!(
            "depth {depth} with {n} maps needs {bits:.1} bits, limit is {MAX_SUBDIVISION_BITS}"
        )));
    }
    Ok(())
}

/// Exact attractor samples after `depth` rounds of the Hutchinson map.
pub fn subdivide(h: &Hvfif, depth: usize) -> Result<SampleSet> {
    let n = h.n();
    check_depth(n, depth)?;
    let data = h.data();
    let mut x = data.x().to_vec();
    let mut f1 = data.y().to_vec();
    let mut f2 = data.z().to_vec();
    let tol = DEDUP_TOL * data.domain().width();

    for _ in 0..depth {
        let images: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..n)
            .into_par_iter()
            .map(|k| {
                let p = &h.pieces()[k];
                let mut ix = Vec::with_capacity(x.len());
                let mut i1 = Vec::with_capacity(x.len());
                let mut i2 = Vec::with_capacity(x.len());
                for j in 0..x.len() {
                    let (a, b) = h.step(k, x[j], f1[j], f2[j]);
                    ix.push(p.map.apply(x[j]));
                    i1.push(a);
                    i2.push(b);
                }
                if ix.first() > ix.last() {
                    ix.reverse();
                    i1.reverse();
                    i2.reverse();
                }
                (ix, i1, i2)
            })
            .collect();
        let total = n * (x.len() - 1) + 1;
        let (mut nx, mut n1, mut n2) = (
            Vec::with_capacity(total),
            Vec::with_capacity(total),
            Vec::with_capacity(total),
        );
        for (ix, i1, i2) in images {
            // the first image point repeats the previous piece's last one;
            // the lower interval keeps it
            let skip = usize::from(
                nx.last()
                    .is_some_and(|&last: &f64| (ix[0] - last).abs() < tol),
            );
            nx.extend_from_slice(&ix[skip..]);
            n1.extend_from_slice(&i1[skip..]);
            n2.extend_from_slice(&i2[skip..]);
        }
        x = nx;
        f1 = n1;
        f2 = n2;
    }
    Ok(SampleSet {
        x,
        f1,
        f2,
        method: Method::Subdivision,
        steps: depth,
        residual: None,
        converged: true,
    })
}

// Precomputed action of the operator at one grid point.
#[derive(Debug, Clone, Copy)]
struct Stencil {
    lo: usize,
    t: f64,
    coef: [f64; 4],
    q: f64,
    q_tilde: f64,
}

/// The discretized Read–Bajraktarevic operator on a fixed grid: at each grid
/// point `x ∈ I_i` it reads `h(L_i⁻¹ x)` by linear interpolation and applies
/// the kernel.
#[derive(Debug, Clone)]
pub struct RbOperator {
    grid: Vec<f64>,
    stencils: Vec<Stencil>,
}

impl RbOperator {
    /// Grid of `grid_size` uniform points united with the data nodes.
    pub fn new(h: &Hvfif, grid_size: usize) -> Result<Self> {
        let n = h.n();
        if grid_size < 2 * n + 1 {
            return Err(Error::InvalidInput(format!(
                "grid_size must be at least 2n+1 = {}, got {grid_size}",
                2 * n + 1
            )));
        }
        let data = h.data();
        let dom = data.domain();
        let tol = DEDUP_TOL * dom.width();
        let mut grid: Vec<f64> = (0..grid_size)
            .map(|k| {
                let t = k as f64 / (grid_size - 1) as f64;
                (1.0 - t) * dom.lo + t * dom.hi
            })
            .chain(data.x().iter().copied())
            .collect();
        grid.sort_by(f64::total_cmp);
        // keep node abscissae bit-exact when a uniform point nearly coincides
        let mut merged: Vec<f64> = Vec::with_capacity(grid.len());
        for v in grid {
            match merged.last_mut() {
                Some(last) if (v - *last).abs() < tol => {
                    if data.node_index(v, 0.0).is_some() {
                        *last = v;
                    }
                }
                _ => merged.push(v),
            }
        }
        Ok(RbOperator::on_grid(h, merged))
    }

    /// Operator on a caller-supplied sorted grid containing every node.
    pub fn on_grid(h: &Hvfif, grid: Vec<f64>) -> Self {
        let data = h.data();
        let stencils = grid
            .iter()
            .map(|&x| {
                let i = data.interval_of(x);
                let p = &h.pieces()[i - 1];
                let xi = p.map.invert(x).clamp(grid[0], grid[grid.len() - 1]);
                let k = grid.partition_point(|&g| g < xi);
                let (lo, t) = if k == 0 {
                    (0, 0.0)
                } else if grid[k.min(grid.len() - 1)] == xi {
                    (k, 0.0)
                } else {
                    (k - 1, (xi - grid[k - 1]) / (grid[k] - grid[k - 1]))
                };
                Stencil {
                    lo,
                    t,
                    coef: p.factors.values(x, 0.0),
                    q: p.q.eval(xi),
                    q_tilde: p.q_tilde.eval(xi),
                }
            })
            .collect();
        RbOperator { grid, stencils }
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// `(Th)` for grid values `(h₁, h₂)`.
    pub fn apply(&self, h1: &[f64], h2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.stencils
            .par_iter()
            .map(|st| {
                let read = |h: &[f64]| {
                    if st.t == 0.0 {
                        h[st.lo]
                    } else {
                        (1.0 - st.t) * h[st.lo] + st.t * h[st.lo + 1]
                    }
                };
                let (a, b) = (read(h1), read(h2));
                let [s, sp, st_, stp] = st.coef;
                (s * a + sp * b + st.q, st_ * a + stp * b + st.q_tilde)
            })
            .unzip()
    }
}

/// Piecewise-linear interpolant of the data on `grid`.
pub fn linear_interpolant(h: &Hvfif, grid: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = h.data();
    grid.iter()
        .map(|&x| {
            let i = d.interval_of(x);
            let (a, b) = (d.x()[i - 1], d.x()[i]);
            let t = (x - a) / (b - a);
            (
                (1.0 - t) * d.y()[i - 1] + t * d.y()[i],
                (1.0 - t) * d.z()[i - 1] + t * d.z()[i],
            )
        })
        .unzip()
}

/// `sup_x |a₁ − b₁| + |a₂ − b₂|`.
pub fn pair_sup_distance(a1: &[f64], a2: &[f64], b1: &[f64], b2: &[f64]) -> f64 {
    a1.iter()
        .zip(a2)
        .zip(b1.iter().zip(b2))
        .map(|((p, q), (r, s))| (p - r).abs() + (q - s).abs())
        .fold(0.0, f64::max)
}

/// Fixed-point iteration of the operator from the piecewise-linear
/// interpolant. Stops when the sup change is at most `tol`; if `max_iters`
/// sweeps do not get there the result has `converged == false`.
pub fn rb_iterate(h: &Hvfif, grid_size: usize, max_iters: usize, tol: f64) -> Result<SampleSet> {
    let op = RbOperator::new(h, grid_size)?;
    Ok(iterate_operator(&op, h, max_iters, tol))
}

pub(crate) fn iterate_operator(
    op: &RbOperator,
    h: &Hvfif,
    max_iters: usize,
    tol: f64,
) -> SampleSet {
    let (mut f1, mut f2) = linear_interpolant(h, op.grid());
    let mut residual = f64::INFINITY;
    let mut steps = 0;
    while steps < max_iters {
        let (n1, n2) = op.apply(&f1, &f2);
        residual = pair_sup_distance(&n1, &n2, &f1, &f2);
        f1 = n1;
        f2 = n2;
        steps += 1;
        if residual <= tol {
            break;
        }
    }
    SampleSet {
        x: op.grid().to_vec(),
        f1,
        f2,
        method: Method::RbIteration,
        steps,
        residual: Some(residual),
        converged: residual <= tol,
    }
}

/// Pointwise value with an a-priori error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointValue {
    pub f1: f64,
    pub f2: f64,
    pub err_bound: f64,
}

/// Evaluates `(f₁, f₂)(x)` by following `depth` address digits of `x`,
/// seeding with the baseline lines and applying the recursion outward.
/// The bound is `S^depth · κ′` with `κ′` the ℓ¹ diameter of the κ box; it is
/// zero when the address reaches a data node.
pub fn evaluate_at(h: &Hvfif, x: f64, depth: usize) -> Result<PointValue> {
    let data = h.data();
    let dom = data.domain();
    if !(dom.lo..=dom.hi).contains(&x) {
        return Err(Error::InvalidInput(format!(
            "x = {x} outside [{}, {}]",
            dom.lo, dom.hi
        )));
    }
    let mut path = Vec::with_capacity(depth);
    let mut u = x;
    let mut seed = None;
    for _ in 0..=depth {
        if let Some(k) = data.node_index(u, 0.0) {
            seed = Some((data.y()[k], data.z()[k]));
            break;
        }
        if path.len() == depth {
            break;
        }
        let i = data.interval_of(u);
        let xi = h.pieces()[i - 1].map.invert(u).clamp(dom.lo, dom.hi);
        path.push((i - 1, xi));
        u = xi;
    }
    let exact = seed.is_some();
    let (mut f1, mut f2) = seed.unwrap_or_else(|| h.baseline(u));
    for &(k, xi) in path.iter().rev() {
        (f1, f2) = h.step(k, xi, f1, f2);
    }
    let err_bound = if exact {
        0.0
    } else {
        h.s().powi(depth as i32) * h.contraction().domain.diameter()
    };
    Ok(PointValue { f1, f2, err_bound })
}

/// Largest node error allowed for a sample set built from `h`.
pub fn node_tolerance(h: &Hvfif) -> f64 {
    IDENTITY_TOL * h.data().magnitude()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{ExtendedDataSet, FactorQuad};

    fn data() -> ExtendedDataSet {
        ExtendedDataSet::new(
            vec![0.0, 0.25, 0.5, 0.75, 1.0],
            vec![20.0, 30.0, 10.0, 50.0, 40.0],
            vec![2.0, 3.0, 1.0, 5.0, 4.0],
        )
        .unwrap()
    }

    fn constant(c: f64) -> Hvfif {
        Hvfif::build(data(), vec![FactorQuad::uniform(c); 4]).unwrap()
    }

    #[test]
    fn depth_one_has_17_points() {
        let s = subdivide(&constant(0.2), 1).unwrap();
        assert_eq!(s.len(), 17);
        assert!(s.x.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(
            subdivide(&constant(0.2), 3).unwrap().len(),
            4usize.pow(4) + 1
        );
    }

    #[test]
    fn zero_factors_give_polyline() {
        let s = subdivide(&constant(0.0), 2).unwrap();
        let k = s.find(0.125, 1e-15).unwrap();
        assert!((s.f1[k] - 25.0).abs() < 1e-12);
    }

    #[test]
    fn nested_refinement() {
        let h = constant(0.3);
        let a = subdivide(&h, 3).unwrap();
        let b = subdivide(&h, 4).unwrap();
        for (x, f1, f2) in a.iter() {
            let k = b.find(x, 1e-14).unwrap();
            assert!((b.f1[k] - f1).abs() < 1e-12 && (b.f2[k] - f2).abs() < 1e-12);
        }
    }

    #[test]
    fn guard_rejects_deep_subdivision() {
        assert!(check_depth(4, 12).is_ok());
        assert!(matches!(check_depth(4, 13), Err(Error::TooManyPoints(_))));
    }

    #[test]
    fn zero_factors_converge_in_one_sweep() {
        let s = rb_iterate(&constant(0.0), 65, 10, 1e-12).unwrap();
        assert!(s.converged);
        // the first sweep reproduces the interpolant, so it already is the fixed point
        assert_eq!(s.steps, 1);
        assert!(s.residual.unwrap() < 1e-12);
    }

    #[test]
    fn geometric_residual_decay() {
        let h = constant(0.4); // S = 0.8
                               // a 4^k + 1 grid would reach the fixed point exactly after k sweeps
        let op = RbOperator::new(&h, 301).unwrap();
        let (h1, h2) = linear_interpolant(&h, op.grid());
        let (t1, t2) = op.apply(&h1, &h2);
        let first = pair_sup_distance(&t1, &t2, &h1, &h2);
        let s = rb_iterate(&h, 301, 50, 0.0).unwrap();
        assert_eq!(s.steps, 50);
        assert!(!s.converged);
        assert!(s.residual.unwrap() <= 0.8f64.powi(49) * first * (1.0 + 1e-9));
    }

    #[test]
    fn methods_agree() {
        let h = constant(0.4);
        let sub = subdivide(&h, 6).unwrap();
        let rb = rb_iterate(&h, 1025, 10_000, 1e-12).unwrap();
        for (x, f1, _) in rb.iter() {
            let k = sub.find(x, 1e-14).unwrap();
            assert!((sub.f1[k] - f1).abs() < 1e-9, "{x}");
        }
    }

    #[test]
    fn evaluate_nodes_and_baseline() {
        let h = constant(0.4);
        for depth in [0, 3, 20] {
            let v = evaluate_at(&h, 0.75, depth).unwrap();
            assert_eq!((v.f1, v.f2, v.err_bound), (50.0, 5.0, 0.0));
        }
        let v = evaluate_at(&h, 0.3, 0).unwrap();
        let (g, gp) = h.baseline(0.3);
        assert_eq!((v.f1, v.f2), (g, gp));
        assert_eq!(v.err_bound, h.contraction().domain.diameter());
        assert!(evaluate_at(&h, 1.5, 3).is_err());
    }

    #[test]
    fn evaluate_matches_subdivision() {
        let h = constant(0.4);
        let sub = subdivide(&h, 6).unwrap();
        for k in (1..sub.len() - 1).step_by(97) {
            let v = evaluate_at(&h, sub.x[k], 20).unwrap();
            assert!((v.f1 - sub.f1[k]).abs() <= v.err_bound + 1e-9);
        }
    }

    #[test]
    fn csv_header_and_precision() {
        let s = subdivide(&constant(0.1), 0).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,f1,f2"));
        let row: Vec<f64> = lines
            .nth(1)
            .unwrap()
            .split(',')
            .map(|v| v.parse().unwrap())
            .collect();
        assert_eq!(row, vec![0.25, 30.0, 3.0]);
    }
}
