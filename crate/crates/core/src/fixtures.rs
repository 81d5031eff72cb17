//! Reference covariance pairs and random fixture generators.

use nalgebra::DMatrix;
use rand::Rng;

use crate::linalg::{complex_gaussian, Covariance, GrassmannVector};
use crate::C64;

fn cov2(a: f64, b: C64, d: f64) -> Covariance {
    Covariance::from_rows(&[
        vec![C64::new(a, 0.0), b],
        vec![b.conj(), C64::new(d, 0.0)],
    ])
    .expect("fixture is a valid covariance")
}

/// Strongly correlated pair (both condition numbers around 28-38); the
/// candidate family clearly beats both asymptotic designs at moderate SNR.
pub fn correlated_pair_a() -> (Covariance, Covariance) {
    (
        cov2(1.7745, C64::new(-0.5178, 0.0247), 0.2255),
        cov2(1.2522, C64::new(-0.8739, -0.2711), 0.7478),
    )
}

/// Mildly correlated pair (condition numbers 2.3 and 3).
pub fn correlated_pair_b() -> (Covariance, Covariance) {
    (
        cov2(1.3042, C64::new(0.0543, -0.2540), 0.6958),
        cov2(1.1161, C64::new(-0.2195, 0.4340), 0.8839),
    )
}

/// Real 2x2 pairs with known generalized eigenvalues; `k` in 1..=3.
/// The interference covariance has off-diagonal -20/29 (printed as -0.6897
/// to four decimals), which makes the reference values exact.
pub fn tau_fixture(k: usize) -> (Covariance, Covariance) {
    let off = -20.0 / 29.0;
    let sigma2 = Covariance::from_real_rows(&[&[1.0, off], &[off, 1.0]]).unwrap();
    let sigma1 = match k {
        1 => Covariance::from_real_rows(&[&[1.0, 0.8], &[0.8, 1.0]]),
        2 => Covariance::from_real_rows(&[&[1.0, -0.8], &[-0.8, 1.0]]),
        3 => Covariance::from_real_rows(&[&[2.0 / 3.0, -0.34485], &[-0.34485, 1.0 / 3.0]]),
        _ => panic!("tau fixtures are numbered 1 to 3"),
    }
    .unwrap();
    (sigma1, sigma2)
}

/// Covariance and three beamformers for which the weighted distance
/// violates the triangle inequality.
pub fn triangle() -> (Covariance, GrassmannVector, GrassmannVector, GrassmannVector) {
    let s = Covariance::diag(&[20.0, 1.0]).unwrap();
    let w1 = GrassmannVector::from_real(&[1.0 / 3f64.sqrt(), (2.0f64 / 3.0).sqrt()]).unwrap();
    let w2 = GrassmannVector::from_real(&[1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt()]).unwrap();
    let w3 = GrassmannVector::from_real(&[-(3.3f64 / 7.0).sqrt(), (3.7f64 / 7.0).sqrt()]).unwrap();
    (s, w1, w2, w3)
}

/// Random positive-definite covariance with trace equal to `dim`.
pub fn random_pd<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Covariance {
    let cols: Vec<_> = (0..dim).map(|_| complex_gaussian(dim, rng)).collect();
    let x = DMatrix::from_columns(&cols);
    let mut m = &x * x.adjoint() + DMatrix::identity(dim, dim) * C64::new(0.05, 0.0);
    let trace: f64 = (0..dim).map(|i| m[(i, i)].re).sum();
    m *= C64::new(dim as f64 / trace, 0.0);
    Covariance::new(m).expect("Gram matrix plus ridge is positive definite")
}
