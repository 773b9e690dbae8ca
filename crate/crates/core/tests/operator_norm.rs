use std::f64::consts::PI;

use starm::harness::experiments::angle_rotation;
use starm::linalg::Matrix;
use starm::tensor::Tensor3;
use starm::transforms;
use starm::tsvdm::{operator_norm, pseudoinverse};

fn tensor_one() -> Tensor3 {
    Tensor3::from_slices(&[Matrix::identity(2, 2), Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])]).unwrap()
}

fn tensor_two() -> Tensor3 {
    Tensor3::from_slices(&[
        Matrix::from_row_slice(2, 2, &[1.0, 1.0, -1.0, 1.0]),
        Matrix::from_row_slice(2, 2, &[1.0, -1.0, 1.0, 1.0]),
    ])
    .unwrap()
}

/// Under the rotation the slices become diag(c − s, c) and diag(c + s, s),
/// so ‖A†‖ = max(1/|c − s|, 1/c, 1/(c + s), 1/s) over nonzero entries.
fn tensor_one_expected(theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    [c - s, c, c + s, s].iter().filter(|v| v.abs() > 1e-12).map(|v| 1.0 / v.abs()).fold(0.0, f64::max)
}

#[test]
fn transform_domain_slices_of_tensor_one() {
    let theta = 0.3f64;
    let (s, c) = theta.sin_cos();
    let a_hat = angle_rotation(theta).forward(&tensor_one()).unwrap();
    let expect = [Matrix::from_row_slice(2, 2, &[c - s, 0.0, 0.0, c]), Matrix::from_row_slice(2, 2, &[c + s, 0.0, 0.0, s])];
    for (k, e) in expect.iter().enumerate() {
        assert!((a_hat.slice(k) - e).norm() <= 1e-15);
    }
}

#[test]
fn tensor_one_pseudoinverse_norm_depends_on_the_angle() {
    let a = tensor_one();
    for theta in [PI / 6.0, PI / 4.0, PI / 3.0, 0.05, 0.3] {
        let m = angle_rotation(theta);
        let got = operator_norm(&pseudoinverse(&a, &m).unwrap(), &m).unwrap();
        assert!((got - tensor_one_expected(theta)).abs() <= 1e-10, "θ={theta}: {got}");
    }
    assert!((tensor_one_expected(PI / 4.0) - 2f64.sqrt()).abs() <= 1e-12);
    assert!((tensor_one_expected(PI / 6.0) - 1.0 / (3f64.sqrt() / 2.0 - 0.5)).abs() <= 1e-12);
    // Unbounded as θ approaches 0 from above.
    let m = angle_rotation(1e-4);
    assert!(operator_norm(&pseudoinverse(&a, &m).unwrap(), &m).unwrap() >= 9.9e3);
}

#[test]
fn tensor_two_pseudoinverse_norm_is_constant() {
    let a = tensor_two();
    for seed in 0..10u64 {
        let m = transforms::random_orthogonal(2, seed);
        let got = operator_norm(&pseudoinverse(&a, &m).unwrap(), &m).unwrap();
        assert!((got - 1.0 / 2f64.sqrt()).abs() <= 1e-10, "seed {seed}: {got}");
        assert!((operator_norm(&a, &m).unwrap() - 2f64.sqrt()).abs() <= 1e-12);
    }
}
