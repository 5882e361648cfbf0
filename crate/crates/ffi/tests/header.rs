use std::path::Path;
use std::process::Command;

const HEADER: &str = include_str!("../include/hvfif.h");

#[test]
fn header_declares_the_api() {
    for name in [
        "hvfif_last_error",
        "hvfif_curve_from_config_json",
        "hvfif_curve_new",
        "hvfif_curve_free",
        "hvfif_curve_subdivide",
        "hvfif_curve_rb_iterate",
        "hvfif_curve_evaluate_at",
        "hvfif_curve_dimension_bounds",
        "hvfif_samples_copy",
        "hvfif_factor_bounds",
        "hvfif_surface_subdivide",
        "hvfif_surface_samples_copy",
        "typedef struct HvfifCurve HvfifCurve",
        "HVFIF_STATUS_OK = 0",
        "HVFIF_STATUS_PANIC = 7",
    ] {
        assert!(HEADER.contains(name), "missing {name}");
    }
}

// The header must be valid C on its own.
#[test]
fn header_compiles_as_c() {
    let Ok(out) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/hvfif.h"))
        .output()
    else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
