//! Dimension bounds from the factor bounds `ω` and the Perron–Frobenius
//! eigenvalue of the factor matrix.

use serde::{Deserialize, Serialize};

use super::boxcount::EmpiricalDimension;
use crate::curve::{FactorQuad, Hvfif};
use crate::factor::Interval;

/// Bounds of the factor magnitudes on one subinterval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaBounds {
    /// `min(inf|s_k|, inf|s'_k|)`
    pub lower: f64,
    /// `min(inf|s̃_k|, inf|s̃'_k|)`
    pub lower_tilde: f64,
    /// `max(sup|s_k|, sup|s'_k|)`
    pub upper: f64,
    /// `max(sup|s̃_k|, sup|s̃'_k|)`
    pub upper_tilde: f64,
}

impl OmegaBounds {
    /// Bounds over the factor domain `dom`.
    pub fn of(f: &FactorQuad, dom: Interval) -> Self {
        let inf = |e: &crate::FactorExpr| e.inf_abs_bound(dom);
        let sup = |e: &crate::FactorExpr| e.sup_abs_bound(dom);
        OmegaBounds {
            lower: inf(&f.s).min(inf(&f.s_prime)),
            lower_tilde: inf(&f.s_tilde).min(inf(&f.s_tilde_prime)),
            upper: sup(&f.s).max(sup(&f.s_prime)),
            upper_tilde: sup(&f.s_tilde).max(sup(&f.s_tilde_prime)),
        }
    }
}

pub fn omega_bounds(h: &Hvfif) -> Vec<OmegaBounds> {
    h.pieces()
        .iter()
        .map(|p| OmegaBounds::of(&p.factors, p.map.target))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DimensionCase {
    /// `λ̲ > 1`: `1 + log_n λ̲ ≤ dim ≤ 1 + log_n λ̄`.
    A,
    /// `λ̄ < 1`: `dim = 1`.
    B,
    Inconclusive,
}

/// Whether the data satisfy the hypotheses behind the dimension bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub uniform_nodes: bool,
    /// `s_k s'_k ≥ 0` and `s̃_k s̃'_k ≥ 0` on every `I_k`.
    pub sign_condition: bool,
    /// Indices `α₁ < α₂ < α₃` maximizing `H·h` among admissible triples.
    pub triple: Option<[usize; 3]>,
    pub y_noncollinear: bool,
    pub z_noncollinear: bool,
    pub yz_comonotone: bool,
    /// Vertical distance of `(x_α₂, y_α₂)` to the chord through the outer points.
    #[serde(rename = "H")]
    pub big_h: f64,
    /// Same for the hidden ordinates.
    #[serde(rename = "h")]
    pub small_h: f64,
}

impl HypothesisCheck {
    pub fn all_hold(&self) -> bool {
        self.uniform_nodes && self.sign_condition && self.triple.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub lambda_low: f64,
    pub lambda_up: f64,
    /// `None` when the case is inconclusive.
    pub bound_low: Option<f64>,
    pub bound_up: Option<f64>,
    pub case: DimensionCase,
    pub omegas: Vec<OmegaBounds>,
    pub hypothesis: HypothesisCheck,
    pub empirical: Option<EmpiricalDimension>,
}

/// Vertical distance from `(x2, v2)` to the chord through `(x1, v1)`, `(x3, v3)`.
fn chord_gap(x: [f64; 3], v: [f64; 3]) -> f64 {
    let t = (x[1] - x[0]) / (x[2] - x[0]);
    (v[1] - ((1.0 - t) * v[0] + t * v[2])).abs()
}

pub fn hypothesis_check(h: &Hvfif) -> HypothesisCheck {
    let d = h.data();
    let sign_condition = h.pieces().iter().all(|p| {
        let f = &p.factors;
        let a = (f.s.clone() * f.s_prime.clone()).range(p.map.target);
        let b = (f.s_tilde.clone() * f.s_tilde_prime.clone()).range(p.map.target);
        a.lo >= 0.0 && b.lo >= 0.0
    });
    let tol = 1e-12 * d.magnitude();
    let (x, y, z) = (d.x(), d.y(), d.z());
    let mut best: Option<([usize; 3], f64, f64)> = None;
    let (mut any_y, mut any_z, mut any_mono) = (false, false, false);
    let m = x.len();
    for a in 0..m {
        for b in a + 1..m {
            for c in b + 1..m {
                let xs = [x[a], x[b], x[c]];
                let gh = chord_gap(xs, [y[a], y[b], y[c]]);
                let gz = chord_gap(xs, [z[a], z[b], z[c]]);
                let mono = [(a, b), (a, c), (b, c)]
                    .iter()
                    .all(|&(i, j)| (y[i] - y[j]) * (z[i] - z[j]) > 0.0);
                any_y |= gh > tol;
                any_z |= gz > tol;
                any_mono |= mono;
                if gh > tol && gz > tol && mono && best.is_none_or(|(_, bh, bz)| gh * gz > bh * bz)
                {
                    best = Some(([a, b, c], gh, gz));
                }
            }
        }
    }
    let (triple, big_h, small_h, y_ok, z_ok, mono_ok) = match best {
        Some((t, gh, gz)) => (Some(t), gh, gz, true, true, true),
        None => (None, 0.0, 0.0, any_y, any_z, any_mono),
    };
    HypothesisCheck {
        uniform_nodes: d.is_uniform(1e-12),
        sign_condition,
        triple,
        y_noncollinear: y_ok,
        z_noncollinear: z_ok,
        yz_comonotone: mono_ok,
        big_h,
        small_h,
    }
}

/// `λ̲, λ̄`, the case split and the resulting bounds; the upper bound (and a
/// lower bound above it) is clamped to 2.
pub fn dimension_bounds(h: &Hvfif) -> DimensionReport {
    let omegas = omega_bounds(h);
    let lambda_low: f64 = omegas.iter().map(|o| o.lower + o.lower_tilde).sum();
    let lambda_up: f64 = omegas.iter().map(|o| o.upper + o.upper_tilde).sum();
    let log_n = |v: f64| v.ln() / (h.n() as f64).ln();
    let (case, bound_low, bound_up) = if lambda_low > 1.0 {
        let up = (1.0 + log_n(lambda_up)).min(2.0);
        (
            DimensionCase::A,
            Some((1.0 + log_n(lambda_low)).min(up)),
            Some(up),
        )
    } else if lambda_up < 1.0 {
        (DimensionCase::B, Some(1.0), Some(1.0))
    } else {
        (DimensionCase::Inconclusive, None, None)
    };
    DimensionReport {
        lambda_low,
        lambda_up,
        bound_low,
        bound_up,
        case,
        omegas,
        hypothesis: hypothesis_check(h),
        empirical: None,
    }
}

/// The matrix `S̄C` with `S̄ = diag(w)` and `C` all ones: row `i` is `w_i` repeated.
pub fn sc_matrix(w: &[f64]) -> Vec<Vec<f64>> {
    w.iter().map(|&wi| vec![wi; w.len()]).collect()
}

/// Spectral radius of a nonnegative irreducible matrix by power iteration.
pub fn power_iteration(a: &[Vec<f64>], tol: f64, max_iters: usize) -> (f64, Vec<f64>) {
    let n = a.len();
    let mut v = vec![1.0 / n as f64; n];
    let mut lambda = 0.0;
    for _ in 0..max_iters {
        let av: Vec<f64> = a
            .iter()
            .map(|row| row.iter().zip(&v).map(|(r, x)| r * x).sum())
            .collect();
        // ‖v‖₁ = 1 and v ≥ 0, so ‖Av‖₁ is the Collatz–Wielandt estimate
        let norm: f64 = av.iter().map(|x| x.abs()).sum();
        if norm == 0.0 {
            return (0.0, v);
        }
        let next: Vec<f64> = av.iter().map(|x| x / norm).collect();
        let change: f64 = next.iter().zip(&v).map(|(p, q)| (p - q).abs()).sum();
        v = next;
        lambda = norm;
        if change <= tol {
            break;
        }
    }
    (lambda, v)
}
