//! C ABI over the `hvfif` crate.
//!
//! Objects are opaque handles created by `*_new`/`*_from_*` functions and
//! released with the matching `*_free`. Every fallible call returns an
//! [`HvfifStatus`]; on failure the message is available from
//! [`hvfif_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hvfif::analysis::{dimension_bounds, DimensionCase};
use hvfif::config::{parse_config, Problem};
use hvfif::curve::{BuildOptions, ExtendedDataSet, FactorQuad, Hvfif};
use hvfif::eval::{evaluate_at, rb_iterate, subdivide, SampleSet};
use hvfif::factor::{FactorExpr, Interval};
use hvfif::surface::{
    dimension_bounds_surface, subdivide_surface, Hvbfif, SurfaceOptions, SurfaceSamples,
};
use hvfif::Error;

/// Result codes. `HVFIF_STATUS_OK` is zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HvfifStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Config = 4,
    NotContractive = 5,
    InvalidInput = 6,
    Panic = 7,
}

/// A built curve system.
pub struct HvfifCurve(Hvfif);

/// Curve samples `(x, f1, f2)`.
pub struct HvfifSamples(SampleSet);

/// A built surface system.
pub struct HvfifSurface(Hvbfif);

/// Gridded surface samples.
pub struct HvfifSurfaceSamples(SurfaceSamples);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(HvfifStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parse(_) => HvfifStatus::Parse,
            Error::Config { .. } => HvfifStatus::Config,
            Error::NotContractive { .. } | Error::FactorTooLarge { .. } => {
                HvfifStatus::NotContractive
            }
            _ => HvfifStatus::InvalidInput,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(HvfifStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HvfifStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HvfifStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            HvfifStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(HvfifStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

unsafe fn copy_out(dst: *mut f64, src: &[f64]) {
    if !dst.is_null() {
        ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    }
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hvfif_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a curve from a JSON configuration document (curve mode).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hvfif_curve_from_config_json(
    json: *const c_char,
    out: *mut *mut HvfifCurve,
) -> HvfifStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let cfg = parse_config(text)?;
        let Problem::Curve {
            data,
            factors,
            orientations,
        } = cfg.problem
        else {
            return Err(Failure(
                HvfifStatus::Config,
                "mode: expected a curve configuration".into(),
            ));
        };
        let opts = BuildOptions {
            orientations,
            permissive: cfg.evaluator.permissive,
        };
        let h = Hvfif::build_with(data, factors, &opts)?;
        put(out, Box::into_raw(Box::new(HvfifCurve(h))), "out")
    })
}

/// Builds a curve from `len` nodes and `4·(len − 1)` factor expressions,
/// ordered `s, s', s̃, s̃'` per interval.
///
/// # Safety
/// `x`, `y`, `z` must point to `len` doubles; `factors` to `4·(len − 1)`
/// NUL-terminated strings; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hvfif_curve_new(
    x: *const f64,
    y: *const f64,
    z: *const f64,
    len: usize,
    factors: *const *const c_char,
    out: *mut *mut HvfifCurve,
) -> HvfifStatus {
    guard(|| {
        let data = ExtendedDataSet::new(
            slice_arg(x, len, "x")?.to_vec(),
            slice_arg(y, len, "y")?.to_vec(),
            slice_arg(z, len, "z")?.to_vec(),
        )?;
        if factors.is_null() {
            return Err(null("factors"));
        }
        let quads = (0..data.n())
            .map(|i| {
                let e = |k: usize| -> Result<FactorExpr, Failure> {
                    Ok(
                        FactorExpr::parse(str_arg(*factors.add(4 * i + k), "factor")?)
                            .map_err(Error::from)?,
                    )
                };
                Ok(FactorQuad::new(e(0)?, e(1)?, e(2)?, e(3)?))
            })
            .collect::<Result<Vec<_>, Failure>>()?;
        let h = Hvfif::build(data, quads)?;
        put(out, Box::into_raw(Box::new(HvfifCurve(h))), "out")
    })
}

/// # Safety
/// `curve` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn hvfif_curve_free(curve: *mut HvfifCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

/// Number of subintervals `n`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hvfif_curve_intervals(
    curve: *const HvfifCurve,
    out: *mut usize,
) -> HvfifStatus {
    guard(|| put(out, handle(curve, "curve")?.0.n(), "out"))
}

/// Contraction constant `S` and whether the system is contractive.
///
/// # Safety
/// `curve` must be valid; `contractive` may be null.
#[no_mangle]
pub unsafe extern "C" fn hvfif_curve_contraction(
    curve: *const HvfifCurve,
    s: *mut f64,
    contractive: *mut bool,
) -> HvfifStatus {
    guard(|| {
        let h = &handle(curve, "curve")?.0;
        if !contractive.is_null() {
            contractive.write(h.contraction().contractive);
        }
        put(s, h.s(), "s")
    })
}

/// Dimension bounds; both are NaN when the case is inconclusive. `case` is
/// 0 for `λ̲ > 1`, 1 for `λ̄ < 1` and 2 otherwise.
///
/// # Safety
/// `curve` must be valid; outputs may be null.
#[no_mangle]
pub unsafe extern "C" fn hvfif_curve_dimension_bounds(
    curve: *const HvfifCurve,
    low: *mut f64,
    up: *mut f64,
    case: *mut i32,
) -> HvfifStatus {
    guard(|| {
        let r = dimension_bounds(&handle(curve, "curve")?.0);
        if !low.is_null() {
            low.write(r.bound_low.unwrap_or(f64::NAN));
        }
        if !up.is_null() {
            up.write(r.bound_up.unwrap_or(f64::NAN));
        }
        if !case.is_null() {
            case.write(match r.case {
                DimensionCase::A => 0,
                DimensionCase::B => 1,
                DimensionCase::Inconclusive => 2,
            });
        }
        Ok(())
    })
}

/// Value of the interpolant at `x` with an a priori error bound.
///
/// # Safety
/// `curve` must be valid; outputs may be null.
#[no_mangle]
pub unsafe extern "C" fn hvfif_curve_evaluate_at(
    curve: *const HvfifCurve,
    x: f64,
    depth: usize,
    f1: *mut f64,
    f2: *mut f64,
    err_bound: *mut f64,
) -> HvfifStatus {
    guard(|| {
        let v = evaluate_at(&handle(curve, "curve")?.0, x, depth)?;
        for (p, val) in [(f1, v.f1), (f2, v.f2), (err_bound, v.err_bound)] {
            if !p.is_null() {
                p.write(val);
            }
        }
        Ok(())
    })
}

/// Exact attractor samples after `depth` subdivision levels.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hvfif_curve_subdivide(
    curve: *const HvfifCurve,
    depth: usize,
    out: *mut *mut HvfifSamples,
) -> HvfifStatus {
    guard(|| {
        let s = subdivide(&handle(curve, "curve")?.0, depth)?;
        put(out, Box::into_raw(Box::new(HvfifSamples(s))), "out")
    })
}

/// Fixed-point iteration of the discretized operator on a uniform grid.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hvfif_curve_rb_iterate(
    curve: *const HvfifCurve,
    grid_size: usize,
    max_iters: usize,
    tol: f64,
    out: *mut *mut HvfifSamples,
) -> HvfifStatus {
    guard(|| {
        let s = rb_iterate(&handle(curve, "curve")?.0, grid_size, max_iters, tol)?;
        put(out, Box::into_raw(Box::new(HvfifSamples(s))), "out")
    })
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `samples` must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn hvfif_samples_len(samples: *const HvfifSamples) -> usize {
    samples.as_ref().map_or(0, |s| s.0.len())
}

/// Copies the samples into caller buffers of `len` doubles each; any of
/// the buffers may be null. `len` must equal [`hvfif_samples_len`].
///
/// # Safety
/// Non-null buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hvfif_samples_copy(
    samples: *const HvfifSamples,
    x: *mut f64,
    f1: *mut f64,
    f2: *mut f64,
    len: usize,
) -> HvfifStatus {
    guard(|| {
        let s = &handle(samples, "samples")?.0;
        if len != s.len() {
            return Err(Failure(
                HvfifStatus::InvalidInput,
                format!("buffer length {len} does not match {} samples", s.len()),
            ));
        }
        copy_out(x, &s.x);
        copy_out(f1, &s.f1);
        copy_out(f2, &s.f2);
        Ok(())
    })
}

/// # Safety
/// `samples` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn hvfif_samples_free(samples: *mut HvfifSamples) {
    if !samples.is_null() {
        drop(Box::from_raw(samples));
    }
}

/// Rigorous upper bounds on `sup |e|` and the Lipschitz constant of a
/// univariate factor expression over `[lo, hi]`.
///
/// # Safety
/// `expr` must be NUL-terminated; outputs may be null.
#[no_mangle]
pub unsafe extern "C" fn hvfif_factor_bounds(
    expr: *const c_char,
    lo: f64,
    hi: f64,
    sup_abs: *mut f64,
    lipschitz: *mut f64,
) -> HvfifStatus {
    guard(|| {
        let e = FactorExpr::parse(str_arg(expr, "expr")?).map_err(Error::from)?;
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Failure(
                HvfifStatus::InvalidInput,
                format!("invalid interval [{lo}, {hi}]"),
            ));
        }
        let dom = Interval::new(lo, hi);
        if !sup_abs.is_null() {
            sup_abs.write(e.sup_abs_bound(dom));
        }
        if !lipschitz.is_null() {
            lipschitz.write(e.lipschitz_bound(dom));
        }
        Ok(())
    })
}

/// Builds a surface from a JSON configuration document (surface mode).
///
/// # Safety
/// `json` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hvfif_surface_from_config_json(
    json: *const c_char,
    out: *mut *mut HvfifSurface,
) -> HvfifStatus {
    guard(|| {
        let cfg = parse_config(str_arg(json, "json")?)?;
        let Problem::Surface { data, factors } = cfg.problem else {
            return Err(Failure(
                HvfifStatus::Config,
                "mode: expected a surface configuration".into(),
            ));
        };
        let opts = SurfaceOptions {
            permissive: cfg.evaluator.permissive,
        };
        let h = Hvbfif::build_with(data, factors, opts)?;
        put(out, Box::into_raw(Box::new(HvfifSurface(h))), "out")
    })
}

/// # Safety
/// `surface` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn hvfif_surface_free(surface: *mut HvfifSurface) {
    if !surface.is_null() {
        drop(Box::from_raw(surface));
    }
}

/// `S̄` and the surface dimension bounds (NaN when inconclusive or when
/// the grid is not square).
///
/// # Safety
/// `surface` must be valid; outputs may be null.
#[no_mangle]
pub unsafe extern "C" fn hvfif_surface_summary(
    surface: *const HvfifSurface,
    s_bar: *mut f64,
    low: *mut f64,
    up: *mut f64,
) -> HvfifStatus {
    guard(|| {
        let h = &handle(surface, "surface")?.0;
        let (l, u) = dimension_bounds_surface(h)
            .map(|r| (r.bound_low, r.bound_up))
            .unwrap_or((None, None));
        for (p, v) in [
            (s_bar, h.s_bar()),
            (low, l.unwrap_or(f64::NAN)),
            (up, u.unwrap_or(f64::NAN)),
        ] {
            if !p.is_null() {
                p.write(v);
            }
        }
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hvfif_surface_subdivide(
    surface: *const HvfifSurface,
    depth: usize,
    out: *mut *mut HvfifSurfaceSamples,
) -> HvfifStatus {
    guard(|| {
        let s = subdivide_surface(&handle(surface, "surface")?.0, depth)?;
        put(out, Box::into_raw(Box::new(HvfifSurfaceSamples(s))), "out")
    })
}

/// Grid shape: `nx` abscissae along x, `ny` along y.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hvfif_surface_samples_shape(
    samples: *const HvfifSurfaceSamples,
    nx: *mut usize,
    ny: *mut usize,
) -> HvfifStatus {
    guard(|| {
        let s = &handle(samples, "samples")?.0;
        put(nx, s.x.len(), "nx")?;
        put(ny, s.y.len(), "ny")
    })
}

/// Copies axes (`nx` and `ny` doubles) and values (`nx·ny` doubles, row
/// `i` holding `x_i`). Any buffer may be null.
///
/// # Safety
/// Non-null buffers must have the sizes above.
#[no_mangle]
pub unsafe extern "C" fn hvfif_surface_samples_copy(
    samples: *const HvfifSurfaceSamples,
    x: *mut f64,
    y: *mut f64,
    f1: *mut f64,
    f2: *mut f64,
) -> HvfifStatus {
    guard(|| {
        let s = &handle(samples, "samples")?.0;
        copy_out(x, &s.x);
        copy_out(y, &s.y);
        copy_out(f1, &s.f1);
        copy_out(f2, &s.f2);
        Ok(())
    })
}

/// # Safety
/// `samples` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn hvfif_surface_samples_free(samples: *mut HvfifSurfaceSamples) {
    if !samples.is_null() {
        drop(Box::from_raw(samples));
    }
}
