use awavo::harness::verify::nn_gradient_suite;
use awavo::nn::MlpParams;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn spectral_norm(w: &ndarray::Array2<f64>) -> f64 {
    let m = DMatrix::from_row_slice(w.nrows(), w.ncols(), w.as_slice().unwrap());
    m.singular_values().max()
}

#[test]
fn backward_matches_central_differences() {
    let report = nn_gradient_suite(100, 11).unwrap();
    assert!(report.max_violation < 1e-5, "{report}");
}

#[test]
fn seeded_init_is_bit_identical() {
    let a = MlpParams::init_seeded(&[3, 16, 16, 2], 42).unwrap();
    let b = MlpParams::init_seeded(&[3, 16, 16, 2], 42).unwrap();
    let c = MlpParams::init_seeded(&[3, 16, 16, 2], 43).unwrap();
    let bits = |p: &MlpParams| p.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    assert_ne!(bits(&a), bits(&c));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn output_is_lipschitz_in_the_product_of_operator_norms(
        seed in any::<u64>(),
        x in prop::collection::vec(-3.0f64..3.0, 4),
        y in prop::collection::vec(-3.0f64..3.0, 4),
    ) {
        let params = MlpParams::init_seeded(&[4, 8, 8, 3], seed).unwrap();
        let bound: f64 = params.layers().iter().map(|l| spectral_norm(&l.weights)).product();
        let fx = params.forward(&x).unwrap();
        let fy = params.forward(&y).unwrap();
        let out: f64 = fx.iter().zip(&fy).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let inp: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!(out <= bound * inp * (1.0 + 1e-12) + 1e-12, "{out} > {bound} * {inp}");
    }
}
