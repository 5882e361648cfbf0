//! Sensitivity of `f₁` to perturbations of the data: closed-form bounds and
//! seeded perturbation experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::smoothness::{OmegaSummary, SmoothnessConstants};
use crate::curve::Hvfif;
use crate::error::{Error, Result};
use crate::eval::{iterate_operator, subdivide, RbOperator, DEDUP_TOL};

/// Slack added to a bound when deciding whether a trial satisfied it.
pub const SATISFIED_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Perturbed {
    X,
    Y,
    Z,
    All,
}

impl Perturbed {
    pub const ALL: [Perturbed; 4] = [Perturbed::X, Perturbed::Y, Perturbed::Z, Perturbed::All];

    pub fn name(self) -> &'static str {
        match self {
            Perturbed::X => "x",
            Perturbed::Y => "y",
            Perturbed::Z => "z",
            Perturbed::All => "all",
        }
    }
}

/// Largest absolute perturbations `max|Δx|`, `max|Δy|`, `max|Δz|`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Magnitudes {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// `(1 + 2ω − ω̃)/(1 − ω − ω̃)`.
pub fn ordinate_factor(omega: f64, omega_tilde: f64) -> f64 {
    (1.0 + 2.0 * omega - omega_tilde) / (1.0 - omega - omega_tilde)
}

/// Closed-form bound on `‖f₁ − f₁*‖_∞`. `smooth` is needed when abscissae
/// move. `Δx` is measured relative to `|I|`.
pub fn stability_bound(
    which: Perturbed,
    omega: &OmegaSummary,
    delta: Magnitudes,
    smooth: Option<&SmoothnessConstants>,
    width: f64,
) -> Result<f64> {
    let (w, wt) = (omega.omega, omega.omega_tilde);
    if w + wt >= 1.0 {
        return Err(Error::Hypothesis(format!(
            "omega + omega_tilde = {} >= 1",
            w + wt
        )));
    }
    omega.check_mesh()?;
    let denom = 1.0 - w - wt;
    let k = ordinate_factor(w, wt);
    let x_term = || -> Result<f64> {
        let s = smooth.ok_or_else(|| {
            Error::InvalidInput("abscissa perturbation needs the smoothness constants".into())
        })?;
        let tau = s.tau1.max(s.tau2);
        let dx = delta.x / width;
        let coef = (1.0 - wt) * (s.l1 + s.l_q) + w * (s.l2 + s.l_q_tilde);
        Ok(if dx == 0.0 { 0.0 } else { coef * dx.powf(tau) })
    };
    Ok(match which {
        Perturbed::Y => k * delta.y,
        Perturbed::Z => k * delta.z,
        Perturbed::X => x_term()? / denom,
        Perturbed::All => (x_term()? + (1.0 + 2.0 * w - wt) * (delta.y + delta.z)) / denom,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub which: Perturbed,
    pub trial: usize,
    pub max_dx: f64,
    pub max_dy: f64,
    pub max_dz: f64,
    pub omega: f64,
    pub omega_tilde: f64,
    pub bound: f64,
    pub measured_sup_diff: f64,
    pub satisfied: bool,
}

/// Evaluation settings for the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSettings {
    /// Subdivision depth when both systems share abscissae.
    pub depth: usize,
    /// Operator grid when the meshes differ.
    pub grid_size: usize,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        ExperimentSettings {
            depth: 8,
            grid_size: 4097,
            tol: 1e-12,
            max_iters: 100_000,
        }
    }
}

/// Concrete perturbation of the data.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPerturbation {
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub dz: Vec<f64>,
}

impl DataPerturbation {
    pub fn zero(len: usize) -> Self {
        DataPerturbation {
            dx: vec![0.0; len],
            dy: vec![0.0; len],
            dz: vec![0.0; len],
        }
    }

    /// Uniform draws in `[−m, m]`; end abscissae stay fixed.
    pub fn random(which: Perturbed, len: usize, m: Magnitudes, rng: &mut impl Rng) -> Self {
        let mut draw = |on: bool, mag: f64, fixed_ends: bool| -> Vec<f64> {
            (0..len)
                .map(|i| {
                    if !on || mag == 0.0 || (fixed_ends && (i == 0 || i + 1 == len)) {
                        0.0
                    } else {
                        rng.gen_range(-mag..=mag)
                    }
                })
                .collect()
        };
        let all = which == Perturbed::All;
        let dx = draw(which == Perturbed::X || all, m.x, true);
        let dy = draw(which == Perturbed::Y || all, m.y, false);
        let dz = draw(which == Perturbed::Z || all, m.z, false);
        DataPerturbation { dx, dy, dz }
    }

    pub fn magnitudes(&self) -> Magnitudes {
        let max = |v: &[f64]| v.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        Magnitudes {
            x: max(&self.dx),
            y: max(&self.dy),
            z: max(&self.dz),
        }
    }
}

/// The system for the perturbed data: same factors, ordinates replaced, and
/// abscissae moved through the remap `R`.
pub fn perturbed_system(h: &Hvfif, p: &DataPerturbation) -> Result<Hvfif> {
    let d = h.data();
    let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u + v).collect::<Vec<f64>>();
    let mut out = h.clone();
    if p.dy.iter().chain(&p.dz).any(|v| *v != 0.0) {
        out = out.with_ordinates(add(d.y(), &p.dy), add(d.z(), &p.dz), false)?;
    }
    if p.dx.iter().any(|v| *v != 0.0) {
        out = out.remap_abscissae(&add(d.x(), &p.dx), false)?;
    }
    Ok(out)
}

/// `sup |f₁ − f₁*|` on shared abscissae: subdivision samples when the meshes
/// agree, otherwise operator iteration on the uniform grid joined with both
/// node sets.
pub fn measure_sup_diff(a: &Hvfif, b: &Hvfif, settings: &ExperimentSettings) -> Result<f64> {
    if a.data().x() == b.data().x() {
        let sa = subdivide(a, settings.depth)?;
        let sb = subdivide(b, settings.depth)?;
        return Ok(sa
            .f1
            .iter()
            .zip(&sb.f1)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max));
    }
    let base = RbOperator::new(a, settings.grid_size)?;
    let mut grid: Vec<f64> = base.grid().iter().chain(b.data().x()).copied().collect();
    grid.sort_by(f64::total_cmp);
    let tol = DEDUP_TOL * a.data().domain().width();
    grid.dedup_by(|next, prev| (*next - *prev).abs() < tol);
    let ra = iterate_operator(
        &RbOperator::on_grid(a, grid.clone()),
        a,
        settings.max_iters,
        settings.tol,
    );
    let rb = iterate_operator(
        &RbOperator::on_grid(b, grid),
        b,
        settings.max_iters,
        settings.tol,
    );
    Ok(ra
        .f1
        .iter()
        .zip(&rb.f1)
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max))
}

/// Builds the perturbed system, evaluates the bound for the realized
/// magnitudes and measures the actual deviation.
pub fn stability_experiment(
    h: &Hvfif,
    which: Perturbed,
    p: &DataPerturbation,
    smooth: Option<&SmoothnessConstants>,
    settings: &ExperimentSettings,
) -> Result<StabilityReport> {
    let omega = OmegaSummary::of(h);
    let mags = p.magnitudes();
    let bound = stability_bound(which, &omega, mags, smooth, h.data().domain().width())?;
    let starred = perturbed_system(h, p)?;
    let measured = measure_sup_diff(h, &starred, settings)?;
    Ok(StabilityReport {
        which,
        trial: 0,
        max_dx: mags.x,
        max_dy: mags.y,
        max_dz: mags.z,
        omega: omega.omega,
        omega_tilde: omega.omega_tilde,
        bound,
        measured_sup_diff: measured,
        satisfied: measured <= bound + SATISFIED_SLACK,
    })
}

/// `trials` seeded experiments; trial `t` draws from stream `t` of a
/// ChaCha8 generator seeded with `seed`, so results do not depend on
/// scheduling.
pub fn stability_trials(
    h: &Hvfif,
    which: Perturbed,
    magnitudes: Magnitudes,
    trials: usize,
    seed: u64,
    smooth: Option<&SmoothnessConstants>,
    settings: &ExperimentSettings,
) -> Result<Vec<StabilityReport>> {
    let len = h.data().x().len();
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64 + 1);
            let p = DataPerturbation::random(which, len, magnitudes, &mut rng);
            let mut r = stability_experiment(h, which, &p, smooth, settings)?;
            r.trial = t;
            Ok(r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::smoothness::smoothness_constants;
    use crate::curve::{ExtendedDataSet, FactorQuad};

    fn constant(c: f64) -> Hvfif {
        let data = ExtendedDataSet::new(
            vec![0.0, 0.25, 0.5, 0.75, 1.0],
            vec![20.0, 30.0, 10.0, 50.0, 40.0],
            vec![2.0, 3.0, 1.0, 5.0, 4.0],
        )
        .unwrap();
        Hvfif::build(data, vec![FactorQuad::uniform(c); 4]).unwrap()
    }

    fn omega(w: f64, wt: f64) -> OmegaSummary {
        OmegaSummary {
            omega: w,
            omega_tilde: wt,
            mesh_limit: 0.5,
        }
    }

    #[test]
    fn y_bound_arithmetic() {
        let m = Magnitudes {
            x: 0.0,
            y: 0.1,
            z: 0.0,
        };
        let b = stability_bound(Perturbed::Y, &omega(0.4, 0.0), m, None, 1.0).unwrap();
        assert!((b - 0.3).abs() < 1e-15);
        let zero = stability_bound(
            Perturbed::Y,
            &omega(0.4, 0.0),
            Magnitudes::default(),
            None,
            1.0,
        )
        .unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn all_degenerates_to_y() {
        let h = constant(0.2);
        let s = smoothness_constants(&h, &subdivide(&h, 6).unwrap()).unwrap();
        let m = Magnitudes {
            x: 0.0,
            y: 0.1,
            z: 0.0,
        };
        let o = OmegaSummary::of(&h);
        let all = stability_bound(Perturbed::All, &o, m, Some(&s), 1.0).unwrap();
        let y = stability_bound(Perturbed::Y, &o, m, None, 1.0).unwrap();
        assert!((all - y).abs() < 1e-15);
    }

    #[test]
    fn preconditions() {
        let m = Magnitudes {
            x: 0.0,
            y: 0.1,
            z: 0.0,
        };
        assert!(stability_bound(Perturbed::Y, &omega(0.45, 0.6), m, None, 1.0).is_err());
        assert!(stability_bound(Perturbed::X, &omega(0.1, 0.1), m, None, 1.0).is_err());
    }

    #[test]
    fn zero_perturbation_measures_zero() {
        let h = constant(0.4);
        let r = stability_experiment(
            &h,
            Perturbed::Y,
            &DataPerturbation::zero(5),
            None,
            &ExperimentSettings::default(),
        )
        .unwrap();
        assert!(r.measured_sup_diff <= 1e-8);
        assert!(r.satisfied);
    }

    #[test]
    fn y_and_z_trials_hold() {
        let h = constant(0.4);
        let m = Magnitudes {
            x: 0.0,
            y: 0.1,
            z: 0.1,
        };
        let settings = ExperimentSettings {
            depth: 6,
            ..Default::default()
        };
        for which in [Perturbed::Y, Perturbed::Z] {
            let reports = stability_trials(&h, which, m, 5, 7, None, &settings).unwrap();
            for r in &reports {
                assert!(r.satisfied, "{r:?}");
                assert!(r.measured_sup_diff > 0.0);
            }
        }
    }

    #[test]
    fn x_remap_keeps_nodes() {
        let h = constant(0.3);
        let p = DataPerturbation {
            dx: vec![0.0, 0.05, -0.02, 0.01, 0.0],
            dy: vec![0.0; 5],
            dz: vec![0.0; 5],
        };
        let starred = perturbed_system(&h, &p).unwrap();
        for (a, b) in starred.data().x().iter().zip([0.0, 0.3, 0.48, 0.76, 1.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        let s = crate::eval::rb_iterate(&starred, 1025, 10_000, 1e-12).unwrap();
        assert!(s.node_error(&starred) < 1e-9);
        let smooth = smoothness_constants(&h, &subdivide(&h, 6).unwrap()).unwrap();
        let r = stability_experiment(
            &h,
            Perturbed::X,
            &p,
            Some(&smooth),
            &ExperimentSettings::default(),
        )
        .unwrap();
        assert!(r.satisfied, "{r:?}");
    }

    #[test]
    fn trials_are_reproducible() {
        let h = constant(0.2);
        let m = Magnitudes {
            x: 0.0,
            y: 0.1,
            z: 0.0,
        };
        let settings = ExperimentSettings {
            depth: 4,
            ..Default::default()
        };
        let a = stability_trials(&h, Perturbed::Y, m, 4, 11, None, &settings).unwrap();
        let b = stability_trials(&h, Perturbed::Y, m, 4, 11, None, &settings).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].max_dy, a[1].max_dy);
    }
}
