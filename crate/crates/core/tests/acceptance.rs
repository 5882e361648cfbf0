//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hvfif::analysis::{
    dimension_bounds, empirical_holder, estimate_dimension, omega_bounds, power_iteration,
    sc_matrix, smoothness_constants, stability_trials, DimensionCase, ExperimentSettings,
    Magnitudes, Perturbed,
};
use hvfif::cli::{run, CommandKind};
use hvfif::config::{load_config, Problem, RunConfig};
use hvfif::curve::{BuildOptions, ExtendedDataSet, FactorQuad, Hvfif};
use hvfif::eval::{evaluate_at, pair_sup_distance, rb_iterate, subdivide, RbOperator};
use hvfif::factor::FactorExpr;
use hvfif::surface::{
    dimension_bounds_surface, estimate_dimension_surface, subdivide_surface, GridDataSet, Hvbfif,
};

const NODE_TOL: f64 = 1e-9;
const CONTRACTION_SLACK: f64 = 1e-9;
const CROSS_REL_TOL: f64 = 1e-6;
const DIM_04: f64 = 0.12;
const DIM_005: f64 = 0.08;
const EXAMPLE_A_SLACK: f64 = 0.05;
const TAU_TOL: f64 = 5e-5;
const HOLDER_TOL: f64 = 0.08;
const PF_TOL: f64 = 1e-10;
const SURFACE_FLAT_TOL: f64 = 0.15;
const SURFACE_02_TOL: f64 = 0.2;
const SEED: u64 = 20_240_601;

type Outcome = Result<String, String>;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(name: &str) -> RunConfig {
    load_config(&configs_dir().join(format!("{name}.json"))).expect("config loads")
}

fn curve(name: &str) -> Hvfif {
    curve_of(&config(name))
}

fn curve_of(cfg: &RunConfig) -> Hvfif {
    let Problem::Curve {
        data,
        factors,
        orientations,
    } = &cfg.problem
    else {
        panic!("not a curve config")
    };
    let opts = BuildOptions {
        orientations: orientations.clone(),
        permissive: cfg.evaluator.permissive,
    };
    Hvfif::build_with(data.clone(), factors.clone(), &opts).expect("curve builds")
}

fn curve_configs() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(configs_dir())
        .unwrap()
        .filter_map(|e| {
            let p = e.ok()?.path();
            (p.extension()? == "json")
                .then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .filter(|n| matches!(config(n).problem, Problem::Curve { .. }))
        .collect();
    names.sort();
    names
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let t = start.elapsed();
    if t <= limit {
        Ok(())
    } else {
        Err(format!("took {t:.2?}, limit {limit:?}"))
    }
}

fn grid_surface(c: f64) -> Hvbfif {
    let n = 4;
    let z: Vec<Vec<f64>> = (0..=n)
        .map(|i| {
            (0..=n)
                .map(|j| ((i * 7 + j * 3) % 5) as f64 + 0.5 * i as f64)
                .collect()
        })
        .collect();
    let t: Vec<Vec<f64>> = (0..=n)
        .map(|i| {
            (0..=n)
                .map(|j| 0.1 * ((i * 2 + j * 5) % 4) as f64)
                .collect()
        })
        .collect();
    let d = GridDataSet::uniform((0.0, 1.0), (0.0, 1.0), z, t).unwrap();
    Hvbfif::build(d, vec![FactorQuad::uniform(c); n * n]).unwrap()
}

/// 1. Every evaluator reproduces the data at the nodes.
fn interpolation_exactness() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for name in curve_configs() {
        let start = Instant::now();
        let h = curve(&name);
        let sub = subdivide(&h, 8).map_err(|e| e.to_string())?;
        let rb = rb_iterate(&h, 4097, 100_000, 1e-10).map_err(|e| e.to_string())?;
        let d = h.data();
        let mut err = sub.node_error(&h).max(rb.node_error(&h));
        for k in 0..=d.n() {
            let v = evaluate_at(&h, d.x()[k], 20).map_err(|e| e.to_string())?;
            err = err
                .max((v.f1 - d.y()[k]).abs())
                .max((v.f2 - d.z()[k]).abs());
        }
        if err > NODE_TOL {
            return Err(format!("{name}: node error {err:e}"));
        }
        within(Duration::from_secs(1), start).map_err(|e| format!("{name}: {e}"))?;
        worst = worst.max(err);
        count += 1;
    }
    let start = Instant::now();
    let s = grid_surface(0.2);
    let samples = subdivide_surface(&s, 3).map_err(|e| e.to_string())?;
    let err = samples.node_error(s.data());
    within(Duration::from_secs(1), start)?;
    check(
        err <= NODE_TOL,
        format!(
            "{count} curve configs + 1 surface, worst node error {:e}",
            worst.max(err)
        ),
    )
}

/// 2. The discretized operator contracts by S in the sup-ℓ¹ norm.
fn contraction_property() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst_ratio: f64 = 0.0;
    let mut configs = 0;
    for name in curve_configs() {
        let h = curve(&name);
        if !h.contraction().contractive {
            continue;
        }
        configs += 1;
        let op = RbOperator::new(&h, 1025).map_err(|e| e.to_string())?;
        let len = op.grid().len();
        let d = h.data();
        let scale = d.magnitude();
        for _ in 0..50 {
            let mut rand_vec =
                || -> Vec<f64> { (0..len).map(|_| rng.gen_range(-scale..scale)).collect() };
            let (a1, a2, b1, b2) = (rand_vec(), rand_vec(), rand_vec(), rand_vec());
            let before = pair_sup_distance(&a1, &a2, &b1, &b2);
            let (ta1, ta2) = op.apply(&a1, &a2);
            let (tb1, tb2) = op.apply(&b1, &b2);
            let after = pair_sup_distance(&ta1, &ta2, &tb1, &tb2);
            if after > h.s() * before + CONTRACTION_SLACK {
                return Err(format!("{name}: {after} > S·{before} with S = {}", h.s()));
            }
            worst_ratio = worst_ratio.max(after / before / h.s().max(f64::MIN_POSITIVE));
        }
    }
    check(
        configs >= 5,
        format!("{configs} configs x 50 pairs, max ratio to S {worst_ratio:.6}"),
    )
}

/// 3. Subdivision and operator iteration agree on common abscissae.
fn evaluator_cross_validation() -> Outcome {
    let start = Instant::now();
    let names = [
        "zero",
        "constant_04",
        "example_a",
        "example_b",
        "example_c",
        "example_d",
        "varying",
    ];
    let mut worst: f64 = 0.0;
    for name in names {
        let h = curve(name);
        let sub = subdivide(&h, 8).map_err(|e| e.to_string())?;
        let rb = rb_iterate(&h, 4097, 100_000, 1e-10).map_err(|e| e.to_string())?;
        if !rb.converged {
            return Err(format!("{name}: operator iteration did not converge"));
        }
        let y = h.data().y();
        let range = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - y.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut common = 0;
        let mut diff: f64 = 0.0;
        for (x, f1, _) in rb.iter() {
            if let Some(k) = sub.find(x, 1e-12) {
                common += 1;
                diff = diff.max((sub.f1[k] - f1).abs());
            }
        }
        if common < 4097 {
            return Err(format!("{name}: only {common} common abscissae"));
        }
        let rel = diff / range;
        if rel > CROSS_REL_TOL {
            return Err(format!("{name}: max difference {diff:e} = {rel:e} x range"));
        }
        worst = worst.max(rel);
    }
    within(Duration::from_secs(10), start)?;
    Ok(format!(
        "{} configs, worst difference {worst:e} x data range",
        names.len()
    ))
}

/// 4. Constant 0.4 factors: collapsed bounds and the box-counting slope.
fn dimension_collapsed() -> Outcome {
    let start = Instant::now();
    let h = curve("constant_04");
    let r = dimension_bounds(&h);
    let theory = 1.0 + 3.2f64.ln() / 4f64.ln();
    let (lo, up) = (
        r.bound_low.unwrap_or(f64::NAN),
        r.bound_up.unwrap_or(f64::NAN),
    );
    let e = estimate_dimension(&h, &[2, 3, 4, 5, 6]).map_err(|e| e.to_string())?;
    within(Duration::from_secs(30), start)?;
    check(
        (lo - theory).abs() < 1e-12
            && (up - theory).abs() < 1e-12
            && (e.slope - theory).abs() <= DIM_04,
        format!(
            "bounds [{lo:.6}, {up:.6}], theory {theory:.5}, slope {:.4} (tol {DIM_04})",
            e.slope
        ),
    )
}

/// 5. Constant 0.05 factors: dimension one.
fn dimension_degenerate() -> Outcome {
    let h = curve("constant_005");
    let r = dimension_bounds(&h);
    let e = estimate_dimension(&h, &[2, 3, 4, 5, 6]).map_err(|e| e.to_string())?;
    check(
        r.case == DimensionCase::B && (e.slope - 1.0).abs() <= DIM_005,
        format!("case {:?}, slope {:.4} (tol {DIM_005})", r.case, e.slope),
    )
}

/// 6. Example (a) factors: λ values and the slope between the bounds.
fn dimension_example_a() -> Outcome {
    let h = curve("example_a");
    let r = dimension_bounds(&h);
    let e = estimate_dimension(&h, &[2, 3, 4, 5, 6]).map_err(|e| e.to_string())?;
    let low = 1.0 + 1.8f64.ln() / 4f64.ln();
    check(
        (r.lambda_low - 1.8).abs() < 1e-12
            && (r.lambda_up - 4.42).abs() < 1e-12
            && e.slope >= low - EXAMPLE_A_SLACK
            && e.slope <= 2.0,
        format!(
            "lambda [{:.4}, {:.4}], slope {:.4} in [{:.4}, 2]",
            r.lambda_low,
            r.lambda_up,
            e.slope,
            low - EXAMPLE_A_SLACK
        ),
    )
}

/// 7. Hölder exponent against the dimension for constant 0.4 factors.
fn smoothness_consistency() -> Outcome {
    let h = curve("constant_04");
    let samples = subdivide(&h, 8).map_err(|e| e.to_string())?;
    let c = smoothness_constants(&h, &samples).map_err(|e| e.to_string())?;
    let holder = empirical_holder(&samples).map_err(|e| e.to_string())?;
    let e = estimate_dimension(&h, &[2, 3, 4, 5, 6]).map_err(|e| e.to_string())?;
    let gap = (holder.tau - (2.0 - e.slope)).abs();
    check(
        (c.tau1 - 0.16096).abs() < TAU_TOL && gap <= HOLDER_TOL,
        format!(
            "tau1 {:.5}, empirical tau {:.4}, 2 - slope {:.4}, gap {gap:.4} (tol {HOLDER_TOL})",
            c.tau1,
            holder.tau,
            2.0 - e.slope
        ),
    )
}

/// 8. Seeded perturbations stay within the closed-form bounds.
fn stability() -> Outcome {
    let start = Instant::now();
    let h = curve("constant_04");
    let samples = subdivide(&h, 8).map_err(|e| e.to_string())?;
    let smooth = smoothness_constants(&h, &samples).map_err(|e| e.to_string())?;
    let settings = ExperimentSettings::default();
    let cases = [
        (
            Perturbed::Y,
            Magnitudes {
                x: 0.0,
                y: 0.1,
                z: 0.0,
            },
        ),
        (
            Perturbed::Z,
            Magnitudes {
                x: 0.0,
                y: 0.0,
                z: 0.1,
            },
        ),
        (
            Perturbed::All,
            Magnitudes {
                x: 0.1,
                y: 0.1,
                z: 0.1,
            },
        ),
    ];
    let mut worst: f64 = 0.0;
    let mut trials = 0;
    for (which, m) in cases {
        let reports = stability_trials(&h, which, m, 20, SEED, Some(&smooth), &settings)
            .map_err(|e| e.to_string())?;
        for r in &reports {
            if !r.satisfied {
                return Err(format!(
                    "{} trial {}: measured {:e} > bound {:e}",
                    which.name(),
                    r.trial,
                    r.measured_sup_diff,
                    r.bound
                ));
            }
            worst = worst.max(r.measured_sup_diff / r.bound);
        }
        trials += reports.len();
    }
    let visible = curve("visible_04");
    let reports = stability_trials(
        &visible,
        Perturbed::Y,
        Magnitudes {
            x: 0.0,
            y: 0.1,
            z: 0.0,
        },
        5,
        SEED,
        None,
        &settings,
    )
    .map_err(|e| e.to_string())?;
    let arithmetic = reports.iter().all(|r| {
        r.omega == 0.4
            && r.omega_tilde == 0.0
            && (r.bound - 3.0 * r.max_dy).abs() <= 1e-12 * r.bound
    });
    within(Duration::from_secs(60), start)?;
    check(
        arithmetic && reports.iter().all(|r| r.satisfied),
        format!("{trials} trials satisfied, max measured/bound {worst:.4}; y-bound = 3 max|dy|: {arithmetic}"),
    )
}

/// 9. Power iteration on S̄C matches Σ(ω̄ + ω̃̄).
fn perron_frobenius() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let data = ExtendedDataSet::new(
        vec![0.0, 0.2, 0.45, 0.7, 1.0],
        vec![1.0, 3.0, -2.0, 4.0, 0.5],
        vec![0.5, -1.0, 2.0, 1.0, 0.0],
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let factors: Vec<FactorQuad> = (0..4)
            .map(|_| {
                let mut f = || {
                    let a = rng.gen_range(0.0..0.2);
                    let b = rng.gen_range(-0.2..0.2);
                    let c = rng.gen_range(1.0..8.0);
                    FactorExpr::parse(&format!("{a} + {b} * sin({c} * x)")).unwrap()
                };
                FactorQuad::new(f(), f(), f(), f())
            })
            .collect();
        let h = Hvfif::build(data.clone(), factors).map_err(|e| e.to_string())?;
        let w: Vec<f64> = omega_bounds(&h)
            .iter()
            .map(|o| o.upper + o.upper_tilde)
            .collect();
        let (lambda, _) = power_iteration(&sc_matrix(&w), 1e-14, 10_000);
        let sum: f64 = w.iter().sum();
        worst = worst.max((lambda - sum).abs());
        if (dimension_bounds(&h).lambda_up - sum).abs() > PF_TOL {
            return Err("lambda_up differs from the omega sum".into());
        }
    }
    check(
        worst <= PF_TOL,
        format!("10 configs, max |rho - sum| {worst:e}"),
    )
}

/// 10. Surfaces: flat and constant 0.2.
fn bivariate() -> Outcome {
    let start = Instant::now();
    let flat = grid_surface(0.0);
    let s = subdivide_surface(&flat, 4).map_err(|e| e.to_string())?;
    let e0 = estimate_dimension_surface(&s, 4, 4, None).map_err(|e| e.to_string())?;
    let h = grid_surface(0.2);
    let r = dimension_bounds_surface(&h).map_err(|e| e.to_string())?;
    let s = subdivide_surface(&h, 4).map_err(|e| e.to_string())?;
    let e2 = estimate_dimension_surface(&s, 4, 4, None).map_err(|e| e.to_string())?;
    within(Duration::from_secs(120), start)?;
    let bound = r.bound_low.unwrap_or(f64::NAN);
    check(
        (e0.slope - 2.0).abs() <= SURFACE_FLAT_TOL
            && (bound - 2.3390).abs() < 5e-5
            && r.bound_up == r.bound_low
            && (e2.slope - bound).abs() <= SURFACE_02_TOL,
        format!(
            "flat slope {:.4}; constant 0.2 bound {bound:.4}, slope {:.4} (levels {:?})",
            e0.slope, e2.slope, e2.fitted_levels
        ),
    )
}

/// 11. Two full runs with the same seed write identical files.
fn determinism() -> Outcome {
    let runs: Vec<Vec<(String, Vec<u8>)>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let mut files = Vec::new();
            for (kind, name) in [
                (CommandKind::Generate, "constant_04"),
                (CommandKind::Analyze, "constant_04"),
                (CommandKind::Analyze, "example_c"),
                (CommandKind::Stability, "constant_04"),
                (CommandKind::Surface, "surface_02"),
            ] {
                let mut cfg = config(name);
                cfg.evaluator.depth = Some(if kind == CommandKind::Surface { 3 } else { 7 });
                let out = dir.path().join(format!("{name}-{kind:?}"));
                let outcome = run(kind, &cfg, &out).expect("run succeeds");
                for f in outcome.files {
                    files.push((
                        f.strip_prefix(dir.path()).unwrap().display().to_string(),
                        std::fs::read(&f).unwrap(),
                    ));
                }
            }
            files
        })
        .collect();
    let differing: Vec<&str> = runs[0]
        .iter()
        .zip(&runs[1])
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.as_str())
        .collect();
    check(
        runs[0].len() == runs[1].len() && differing.is_empty() && !runs[0].is_empty(),
        format!("{} files compared, differing: {differing:?}", runs[0].len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("interpolation exactness", interpolation_exactness),
        ("operator contraction", contraction_property),
        ("evaluator cross-validation", evaluator_cross_validation),
        ("dimension, collapsed bounds", dimension_collapsed),
        ("dimension, degenerate case", dimension_degenerate),
        ("dimension bounds, example (a)", dimension_example_a),
        ("smoothness/dimension consistency", smoothness_consistency),
        ("stability bounds", stability),
        ("Perron-Frobenius closed form", perron_frobenius),
        ("bivariate dimension", bivariate),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let t = start.elapsed().as_secs_f64();
        match result {
            Ok(d) => println!("PASS {:>2} {name}: {d} [{t:.2}s]", k + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d} [{t:.2}s]", k + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
