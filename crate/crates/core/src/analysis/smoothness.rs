//! Hölder constants of `f₁` and an oscillation-based empirical exponent.
//!
//! Lengths are measured relative to `|I|` (so the domain behaves like
//! `[0, 1]`), and Lipschitz constants of factors and offsets are scaled
//! accordingly.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::boxcount::least_squares;
use super::dimension::omega_bounds;
use crate::curve::Hvfif;
use crate::error::{Error, Result};
use crate::eval::SampleSet;

/// Inflation applied to sampled sup norms.
pub const SUP_NORM_INFLATION: f64 = 1.05;

/// `α` used when `δ = 1`.
pub const ALPHA: f64 = 0.5;

/// Half-width of the band treated as `δ = 1`.
pub const DELTA_EQ_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothnessCase {
    DeltaLt1,
    DeltaEq1,
    DeltaGt1,
}

/// `ω = max_k ω̄_k`, `ω̃ = max_k ω̃̄_k` and the mesh ratio `|I_min|/(2|I_max|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaSummary {
    pub omega: f64,
    pub omega_tilde: f64,
    pub mesh_limit: f64,
}

impl OmegaSummary {
    pub fn of(h: &Hvfif) -> Self {
        let om = omega_bounds(h);
        let widths: Vec<f64> = h.maps().map(|m| m.target.width()).collect();
        let min = widths.iter().copied().fold(f64::INFINITY, f64::min);
        let max = widths.iter().copied().fold(0.0, f64::max);
        OmegaSummary {
            omega: om.iter().map(|o| o.upper).fold(0.0, f64::max),
            omega_tilde: om.iter().map(|o| o.upper_tilde).fold(0.0, f64::max),
            mesh_limit: min / (2.0 * max),
        }
    }

    /// `max{ω, ω̃} < |I_min|/(2|I_max|)`.
    pub fn check_mesh(&self) -> Result<()> {
        let m = self.omega.max(self.omega_tilde);
        if m < self.mesh_limit {
            Ok(())
        } else {
            Err(Error::Hypothesis(format!(
                "max(omega, omega_tilde) = {m} is not below |I_min|/(2|I_max|) = {}",
                self.mesh_limit
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessConstants {
    pub m_k: Vec<f64>,
    pub m_tilde_k: Vec<f64>,
    pub m: f64,
    pub delta: f64,
    pub d: f64,
    pub case: SmoothnessCase,
    pub l1: f64,
    pub tau1: f64,
    pub l2: f64,
    pub tau2: f64,
    /// Only meaningful when `δ = 1`.
    pub alpha: f64,
    pub sup_f1: f64,
    pub sup_f2: f64,
    /// Maximal normalized Lipschitz constants of `q_k` and `q̃_k`.
    pub l_q: f64,
    pub l_q_tilde: f64,
    pub omega: OmegaSummary,
    /// True when the nodes are not uniform, so `|I_max|` stands in for the
    /// contraction ratio of the maps in the `δ > 1` exponent.
    pub nonuniform_mesh: bool,
}

/// Constants of the Hölder estimate `|f₁(x) − f₁(x̄)| ≤ L₁|x − x̄|^τ₁` from
/// sampled sup norms of `f₁, f₂` (inflated by 5%).
pub fn smoothness_constants(h: &Hvfif, samples: &SampleSet) -> Result<SmoothnessConstants> {
    let omega = OmegaSummary::of(h);
    omega.check_mesh()?;
    let width = h.data().domain().width();
    let sup_f1 = samples.sup_f1() * SUP_NORM_INFLATION;
    let sup_f2 = samples.sup_f2() * SUP_NORM_INFLATION;
    let om = omega_bounds(h);

    let mut m_k = Vec::new();
    let mut m_tilde_k = Vec::new();
    let mut l_q = 0.0f64;
    let mut l_q_tilde = 0.0f64;
    let mut delta = 0.0f64;
    let mut i_min = f64::INFINITY;
    let mut i_max = 0.0f64;
    for (p, o) in h.pieces().iter().zip(&om) {
        let dom = p.map.target;
        let len = dom.width() / width;
        let lip = |e: &crate::FactorExpr| e.lipschitz_bound(dom) * width;
        let (ls, lsp, lst, lstp) = (
            lip(&p.factors.s),
            lip(&p.factors.s_prime),
            lip(&p.factors.s_tilde),
            lip(&p.factors.s_tilde_prime),
        );
        let whole = h.data().domain();
        let lq = p.q.lipschitz_bound(whole) * width;
        let lqt = p.q_tilde.lipschitz_bound(whole) * width;
        m_k.push(ls * sup_f1 + lsp * sup_f2 + lq / len);
        // the printed M̃_k swaps the roles of s and s'; the second row of the
        // system gives the tilde analogue, and the larger of the two is kept
        let printed = lsp * sup_f1 + ls * sup_f2 + lq / len;
        let second_row = lst * sup_f1 + lstp * sup_f2 + lqt / len;
        m_tilde_k.push(printed.max(second_row));
        l_q = l_q.max(lq);
        l_q_tilde = l_q_tilde.max(lqt);
        delta = delta.max(2.0 * o.upper.max(o.upper_tilde) / len);
        i_min = i_min.min(len);
        i_max = i_max.max(len);
    }
    let m = m_k.iter().chain(&m_tilde_k).copied().fold(0.0, f64::max);
    let d = m.max(2.0 * (sup_f1 + sup_f2) / (i_min * i_min));
    let (case, l1, tau1) = holder_case(delta, d, i_max);
    Ok(SmoothnessConstants {
        m_k,
        m_tilde_k,
        m,
        delta,
        d,
        case,
        l1,
        tau1,
        // the same derivation applied to f₂ gives the same constants
        l2: l1,
        tau2: tau1,
        alpha: ALPHA,
        sup_f1,
        sup_f2,
        l_q,
        l_q_tilde,
        omega,
        nonuniform_mesh: !h.data().is_uniform(1e-12),
    })
}

/// `(case, L₁, τ₁)` from `δ`, `D` and the normalized `|I_max|`.
pub fn holder_case(delta: f64, d: f64, i_max: f64) -> (SmoothnessCase, f64, f64) {
    if (delta - 1.0).abs() <= DELTA_EQ_TOL {
        let l1 = d * (1.0 + 1.0 / (ALPHA * std::f64::consts::E * i_max.ln().abs()));
        (SmoothnessCase::DeltaEq1, l1, 1.0 - ALPHA)
    } else if delta < 1.0 {
        (SmoothnessCase::DeltaLt1, d / (1.0 - delta), 1.0)
    } else {
        let tau = (delta.ln() / i_max.ln() + 1.0).clamp(f64::MIN_POSITIVE, 1.0);
        (SmoothnessCase::DeltaGt1, d / (delta - 1.0), tau)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub tau: f64,
    /// `(window width, max oscillation)` per dyadic scale.
    pub scales: Vec<(f64, f64)>,
    /// Set when `f` is constant and the exponent defaults to 1.
    pub degenerate: bool,
}

// max − min of f over every window x[r] − x[l] ≤ w
fn max_oscillation(x: &[f64], f: &[f64], w: f64) -> f64 {
    let mut hi: VecDeque<usize> = VecDeque::new();
    let mut lo: VecDeque<usize> = VecDeque::new();
    let mut left = 0;
    let mut best = 0.0f64;
    let tol = 1e-12 * w;
    for r in 0..x.len() {
        while hi.back().is_some_and(|&k| f[k] <= f[r]) {
            hi.pop_back();
        }
        hi.push_back(r);
        while lo.back().is_some_and(|&k| f[k] >= f[r]) {
            lo.pop_back();
        }
        lo.push_back(r);
        while x[r] - x[left] > w + tol {
            left += 1;
        }
        while hi.front().is_some_and(|&k| k < left) {
            hi.pop_front();
        }
        while lo.front().is_some_and(|&k| k < left) {
            lo.pop_front();
        }
        best = best.max(f[hi[0]] - f[lo[0]]);
    }
    best
}

/// Slope of `log(max oscillation)` against `log(window)` over windows
/// `2^{-j}|I|`, `j = 2..J`, where `J` keeps at least 8 sample spacings per window.
pub fn empirical_holder(samples: &SampleSet) -> Result<HolderEstimate> {
    empirical_holder_values(&samples.x, &samples.f1)
}

pub fn empirical_holder_values(x: &[f64], f: &[f64]) -> Result<HolderEstimate> {
    let width = x[x.len() - 1] - x[0];
    let spacing = width / (x.len() - 1) as f64;
    let mut scales = Vec::new();
    let mut j = 2;
    loop {
        let w = width / 2f64.powi(j);
        if w < 8.0 * spacing {
            break;
        }
        scales.push((w / width, max_oscillation(x, f, w)));
        j += 1;
    }
    if scales.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "{} samples are too few for oscillation scaling",
            x.len()
        )));
    }
    let magnitude = f.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if scales.iter().any(|&(_, osc)| osc <= 1e-12 * magnitude) {
        return Ok(HolderEstimate {
            tau: 1.0,
            scales,
            degenerate: true,
        });
    }
    let lx: Vec<f64> = scales.iter().map(|s| s.0.ln()).collect();
    let ly: Vec<f64> = scales.iter().map(|s| s.1.ln()).collect();
    Ok(HolderEstimate {
        tau: least_squares(&lx, &ly).slope,
        scales,
        degenerate: false,
    })
}
