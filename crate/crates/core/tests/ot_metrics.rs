use awavo::ot_metrics::{
    gswd, project, swd, wasserstein_1d, wasserstein_oracle, DefiningFunction, DiscreteMeasure, OneDMeasure, Order,
    SliceParameterSet,
};
use proptest::prelude::*;

fn order() -> impl Strategy<Value = Order> {
    prop_oneof![
        Just(Order::Finite(1.0)),
        Just(Order::Finite(2.0)),
        (1.0f64..4.0).prop_map(Order::Finite),
        Just(Order::Infinity),
    ]
}

/// Up to `n` atoms on a coarse grid (so ties and merges happen) with random weights.
fn measure_1d(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    prop::collection::vec(((-20i32..20).prop_map(|v| v as f64 * 0.25), 0.05f64..1.0), 1..=n).prop_map(|atoms| {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        atoms.into_iter().map(|(x, w)| (x, w / total)).unzip()
    })
}

fn measure_2d(n: usize) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 1..=n)
        .prop_map(|atoms| DiscreteMeasure::uniform(atoms).unwrap())
}

fn slice_set(seed: u64, degree: Option<u32>) -> SliceParameterSet {
    let mut rng = awavo::rng_from_seed(seed);
    match degree {
        None => SliceParameterSet::random_linear(2, 12, &mut rng).unwrap(),
        Some(m) => SliceParameterSet::random_polynomial(2, m, 12, &mut rng).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn exact_distance_matches_coupling_lp((xa, wa) in measure_1d(10), (xb, wb) in measure_1d(10), k in order()) {
        let fast = wasserstein_1d(&OneDMeasure::new(xa.clone(), wa.clone()).unwrap(), &OneDMeasure::new(xb.clone(), wb.clone()).unwrap(), k).unwrap();
        let lp = wasserstein_oracle(
            &DiscreteMeasure::from_scalars(&xa, wa).unwrap(),
            &DiscreteMeasure::from_scalars(&xb, wb).unwrap(),
            k,
        ).unwrap();
        prop_assert!((fast - lp).abs() <= 1e-9, "fast {fast} lp {lp}");
    }

    #[test]
    fn sliced_distances_are_pseudo_metrics(
        a in measure_2d(5), b in measure_2d(5), c in measure_2d(5),
        seed in any::<u64>(), poly in any::<bool>(), k in order(),
    ) {
        let slices = slice_set(seed, poly.then_some(3));
        let ab = gswd(&a, &b, k, &slices).unwrap();
        let ba = gswd(&b, &a, k, &slices).unwrap();
        let bc = gswd(&b, &c, k, &slices).unwrap();
        let ac = gswd(&a, &c, k, &slices).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(gswd(&a, &a, k, &slices).unwrap(), 0.0);
        prop_assert!((ab - ba).abs() <= 1e-12);
        prop_assert!(ab + bc - ac >= -1e-9, "{ac} > {ab} + {bc}");
    }

    #[test]
    fn projection_is_homogeneous(atoms in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 2), 1..5), c in 0.1f64..3.0, seed in any::<u64>()) {
        let mut rng = awavo::rng_from_seed(seed);
        let m = DiscreteMeasure::uniform(atoms.clone()).unwrap();
        let scaled = DiscreteMeasure::uniform(atoms.iter().map(|x| x.iter().map(|v| c * v).collect()).collect()).unwrap();
        for (f, power) in [
            (DefiningFunction::random_linear(2, &mut rng), 1),
            (DefiningFunction::random_polynomial(2, 3, &mut rng).unwrap(), 3),
        ] {
            let base = project(&m, &f, 0.0).unwrap();
            let big = project(&scaled, &f, 0.0).unwrap();
            // canonical order may flip only for c < 0, which is excluded
            for (u, v) in base.positions().iter().zip(big.positions()) {
                let want = c.powi(power) * u;
                prop_assert!((v - want).abs() <= 1e-10 * (1.0 + want.abs()), "{v} vs {want}");
            }
        }
    }
}

fn std_dev(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

#[test]
fn monte_carlo_error_shrinks_as_inverse_root_of_projections() {
    let mu = DiscreteMeasure::uniform(vec![vec![0.0, 0.0], vec![1.0, 2.0], vec![-1.5, 0.5]]).unwrap();
    let nu = DiscreteMeasure::uniform(vec![vec![0.5, -1.0], vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let spread = |l: usize| {
        let v: Vec<f64> = (0..400).map(|s| swd(&mu, &nu, Order::Finite(2.0), l, s).unwrap()).collect();
        std_dev(&v)
    };
    // 1/√L: quadrupling the projection count halves the spread
    let ratio = spread(40) / spread(160);
    assert!((ratio - 2.0).abs() <= 0.4, "ratio {ratio}");
}

#[test]
fn many_projections_match_angular_quadrature() {
    let mu = DiscreteMeasure::uniform(vec![vec![0.0, 0.0], vec![1.0, 2.0], vec![-1.5, 0.5]]).unwrap();
    let nu = DiscreteMeasure::uniform(vec![vec![0.5, -1.0], vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
    for k in [Order::Finite(1.0), Order::Finite(2.0)] {
        let grid = 20_000;
        let dirs = (0..grid)
            .map(|i| {
                let a = std::f64::consts::TAU * (i as f64 + 0.5) / grid as f64;
                DefiningFunction::linear(vec![a.cos(), a.sin()]).unwrap()
            })
            .collect();
        let quadrature = gswd(&mu, &nu, k, &SliceParameterSet::new(dirs).unwrap()).unwrap();
        let mc = swd(&mu, &nu, k, 10_000, 3).unwrap();
        assert!((mc - quadrature).abs() <= 0.02 * quadrature, "{k}: {mc} vs {quadrature}");
    }
}

#[test]
fn half_shift_example_matches_lp() {
    let mu = DiscreteMeasure::from_scalars(&[0.0, 1.0], vec![0.5, 0.5]).unwrap();
    let nu = DiscreteMeasure::from_scalars(&[0.25, 0.75], vec![0.5, 0.5]).unwrap();
    let lp = wasserstein_oracle(&mu, &nu, Order::Finite(1.0)).unwrap();
    let fast = wasserstein_1d(
        &OneDMeasure::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap(),
        &OneDMeasure::new(vec![0.25, 0.75], vec![0.5, 0.5]).unwrap(),
        Order::Finite(1.0),
    )
    .unwrap();
    assert!((lp - 0.25).abs() < 1e-12 && (fast - lp).abs() < 1e-12);
}
