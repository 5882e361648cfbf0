use proptest::prelude::*;

use hvfif::curve::{BuildOptions, ExtendedDataSet, FactorQuad, Hvfif, Orientation};
use hvfif::eval::{rb_iterate, subdivide};

fn data() -> ExtendedDataSet {
    ExtendedDataSet::new(
        vec![0.0, 0.25, 0.5, 0.75, 1.0],
        vec![20.0, 30.0, 10.0, 50.0, 40.0],
        vec![2.0, 3.0, 1.0, 5.0, 4.0],
    )
    .unwrap()
}

fn example_c() -> Vec<FactorQuad> {
    let s = ["sin(x)", "cos(30*x)", "sin(x)", "cos(5*x)"];
    let sp = ["2.9*x", "1.9*x", "x", "x"];
    let stp = ["0.9 - 2.9*x", "0.95 - 1.9*x", "0.9 - x", "0.99 - x"];
    (0..4)
        .map(|k| FactorQuad::parse(s[k], sp[k], "0", stp[k]).unwrap())
        .collect()
}

fn permissive(factors: Vec<FactorQuad>, orientations: Vec<Orientation>) -> Hvfif {
    let opts = BuildOptions {
        orientations,
        permissive: true,
    };
    Hvfif::build_with(data(), factors, &opts).unwrap()
}

// each depth-(m+1) sample is F_i applied to a depth-m sample
fn assert_self_consistent(h: &Hvfif) {
    let coarse = subdivide(h, 3).unwrap();
    let fine = subdivide(h, 4).unwrap();
    for (i, map) in h.maps().enumerate() {
        for (xi, f1, f2) in coarse.iter() {
            let (a, b) = h.rhs_recursion(i + 1, xi, f1, f2).unwrap();
            let k = fine
                .find(map.apply(xi), 1e-13)
                .expect("image sample present");
            // the lower interval owns shared junction points
            if k > 0
                && h.data().node_index(fine.x[k], 1e-13).is_some()
                && h.data().interval_of(fine.x[k]) != i + 1
            {
                continue;
            }
            assert!(
                (fine.f1[k] - a).abs() < 1e-12 * a.abs().max(1.0),
                "{} vs {a}",
                fine.f1[k]
            );
            assert!((fine.f2[k] - b).abs() < 1e-12 * b.abs().max(1.0));
        }
    }
}

#[test]
fn functional_factors_self_consistent() {
    let h = permissive(example_c(), vec![]);
    assert!(!h.contraction().contractive);
    assert_self_consistent(&h);
}

#[test]
fn reversed_maps_self_consistent_and_interpolating() {
    use Orientation::*;
    let h = permissive(
        vec![FactorQuad::uniform(0.3); 4],
        vec![Forward, Reversed, Reversed, Forward],
    );
    assert_self_consistent(&h);
    let s = subdivide(&h, 5).unwrap();
    assert!(s.node_error(&h) < 1e-9);
    let r = rb_iterate(&h, 1025, 10_000, 1e-12).unwrap();
    assert!(r.converged);
    for (x, f1, _) in r.iter() {
        let k = s.find(x, 1e-12).unwrap();
        assert!((s.f1[k] - f1).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // on a 4^k + 1 grid every pullback is a grid point, so the iteration
    // reproduces subdivision at the grid abscissae
    #[test]
    fn evaluators_agree(a in 0.0f64..0.45, b in 0.0f64..0.45, c in 0.0f64..0.45) {
        let h = Hvfif::build(data(), vec![FactorQuad::constant(a, b, c, 0.5 - c); 4]).unwrap();
        let s = subdivide(&h, 5).unwrap();
        let r = rb_iterate(&h, 257, 10_000, 1e-12).unwrap();
        prop_assert!(r.converged);
        for (x, f1, f2) in r.iter() {
            let k = s.find(x, 1e-12).unwrap();
            prop_assert!((s.f1[k] - f1).abs() < 1e-9 && (s.f2[k] - f2).abs() < 1e-9);
        }
    }
}
