#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sdmm::linalg::ComplexMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub fn real_gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| Complex64::new(rng.sample(StandardNormal), 0.0))
}

pub fn to_na(m: &ComplexMatrix) -> DMatrix<Complex64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Plain triple loop, written independently of the library kernel.
pub fn naive_matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    assert_eq!(a.cols(), b.rows());
    let mut out = vec![Complex64::new(0.0, 0.0); a.rows() * b.cols()];
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..a.cols() {
                acc += a[(i, k)] * b[(k, j)];
            }
            out[i * b.cols() + j] = acc;
        }
    }
    ComplexMatrix::new(a.rows(), b.cols(), out).unwrap()
}

pub fn rel_err(got: &ComplexMatrix, want: &ComplexMatrix) -> f64 {
    assert_eq!(got.shape(), want.shape());
    let num: f64 = got
        .as_slice()
        .iter()
        .zip(want.as_slice())
        .map(|(g, w)| (g - w).norm_sqr())
        .sum();
    let den: f64 = want.as_slice().iter().map(|w| w.norm_sqr()).sum();
    (num / den).sqrt()
}

pub fn root(n: usize, k: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64)
}

/// Property-test config without on-disk regression files (integration test
/// crates have no lib.rs for proptest to anchor them to).
pub fn cases(n: u32) -> proptest::prelude::ProptestConfig {
    proptest::prelude::ProptestConfig {
        cases: n,
        failure_persistence: None,
        ..Default::default()
    }
}
