use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use treehjb::*;

fn random_sites(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..2 * n).map(|_| rng.random_range(0.0..1.0)).collect()
}

#[test]
fn nodal_reproduction_all_methods() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(5);
    let sites = random_sites(&mut rng, 300);
    let values: Vec<f64> = (0..300).map(|_| rng.random_range(-5.0..5.0)).collect();
    for method in [InterpMethod::DelaunayLinear, InterpMethod::Idw { k: 3, power: 2.0 }, InterpMethod::Nearest] {
        let f = build_interpolant(2, &sites, &values, method).unwrap();
        for (x, v) in sites.chunks_exact(2).zip(&values) {
            assert!((f.eval(x) - v).abs() <= 1e-12, "{method:?}");
        }
    }
}

#[test]
fn affine_exactness_inside_hull() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(6);
    let sites = random_sites(&mut rng, 200);
    let affine = |x: &[f64]| 1.5 - 2.0 * x[0] + 0.75 * x[1];
    let values: Vec<f64> = sites.chunks_exact(2).map(affine).collect();
    let f = build_interpolant(2, &sites, &values, InterpMethod::DelaunayLinear).unwrap();
    for _ in 0..1000 {
        // Convex combinations of sites are inside the hull.
        let w: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
        let s: f64 = w.iter().sum();
        let mut q = [0.0; 2];
        for wk in &w {
            let i = rng.random_range(0..200);
            q[0] += wk / s * sites[2 * i];
            q[1] += wk / s * sites[2 * i + 1];
        }
        assert!((f.eval(&q) - affine(&q)).abs() <= 1e-9, "{q:?}");
    }
}


proptest! {
    #[test]
    fn idw_stays_within_data_range(
        pts in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, -10.0f64..10.0), 1..40),
        q in (-5.0f64..5.0, -5.0f64..5.0),
        k in 1usize..6,
    ) {
        let sites: Vec<f64> = pts.iter().flat_map(|p| [p.0, p.1]).collect();
        let values: Vec<f64> = pts.iter().map(|p| p.2).collect();
        let f = build_interpolant(2, &sites, &values, InterpMethod::Idw { k, power: 2.0 }).unwrap();
        let v = f.eval(&[q.0, q.1]);
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
    }

    #[test]
    fn linear_interpolant_is_a_convex_combination(
        pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, -10.0f64..10.0), 4..60),
        q in (-0.5f64..1.5, -0.5f64..1.5),
    ) {
        let sites: Vec<f64> = pts.iter().flat_map(|p| [p.0, p.1]).collect();
        let values: Vec<f64> = pts.iter().map(|p| p.2).collect();
        let f = match build_interpolant(2, &sites, &values, InterpMethod::DelaunayLinear) {
            Ok(f) => f,
            Err(Error::DegenerateSites(_)) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        let v = f.eval(&[q.0, q.1]);
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
    }
}
