//! Dense complex linear algebra used by the codecs and the leakage analysis.

pub mod cmat;
mod matrix;
mod qr;
mod svd;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use self::matrix::ComplexMatrix;
pub use self::qr::PivotedQr;
pub use self::svd::singular_values;
use crate::error::{Error, Result};

const UNIT_CIRCLE_TOL: f64 = 1e-12;

/// Evaluation points on the unit circle, one per server.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationPoints {
    points: Vec<Complex64>,
}

impl EvaluationPoints {
    /// `points[k] = exp(2πi (k+1) / n)`: server `k` gets the `(k+1)`-th power
    /// of the primitive `n`-th root of unity.
    pub fn canonical(n: usize) -> Self {
        let points = (0..n)
            .map(|k| {
                let angle = 2.0 * PI * (((k + 1) % n) as f64) / n as f64;
                Complex64::new(angle.cos(), angle.sin())
            })
            .collect();
        Self { points }
    }

    pub fn from_points(points: Vec<Complex64>) -> Result<Self> {
        for (i, z) in points.iter().enumerate() {
            let modulus = z.norm();
            if (modulus - 1.0).abs() > UNIT_CIRCLE_TOL {
                return Err(Error::OffUnitCircle { index: i, modulus });
            }
        }
        check_distinct(&points)?;
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.points
    }

    pub fn get(&self, server: usize) -> Complex64 {
        self.points[server]
    }

    /// Exponent of the primitive root carried on the wire for `server`.
    pub fn point_index(server: usize) -> u32 {
        (server + 1) as u32
    }

    pub fn subset(&self, servers: &[usize]) -> Vec<Complex64> {
        servers.iter().map(|&s| self.points[s]).collect()
    }
}

fn check_distinct(points: &[Complex64]) -> Result<()> {
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if points[i] == points[j] {
                return Err(Error::DuplicatePoints { first: i, second: j });
            }
        }
    }
    Ok(())
}

/// `[1, z, z^2, ..., z^(count-1)]` by repeated multiplication.
pub(crate) fn powers(z: Complex64, count: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(count);
    let mut acc = Complex64::new(1.0, 0.0);
    for _ in 0..count {
        out.push(acc);
        acc *= z;
    }
    out
}

/// Matrix product with a fixed accumulation order: every output entry sums
/// its terms in increasing inner index.
pub fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.cols() != b.rows() {
        return Err(Error::mismatch(a.shape(), b.shape()));
    }
    let (n, inner, m) = (a.rows(), a.cols(), b.cols());
    let mut out = ComplexMatrix::zeros(n, m);
    let bs = b.as_slice();
    let dst = out.as_mut_slice();
    for i in 0..n {
        let row = &mut dst[i * m..(i + 1) * m];
        for k in 0..inner {
            let aik = a[(i, k)];
            for (c, bkj) in row.iter_mut().zip(&bs[k * m..(k + 1) * m]) {
                *c += aik * bkj;
            }
        }
    }
    Ok(out)
}

/// `V[i][j] = points[i]^j` for `j < degree`.
pub fn vandermonde(points: &[Complex64], degree: usize) -> Result<ComplexMatrix> {
    if degree == 0 {
        return Err(Error::InvalidParams("Vandermonde degree must be >= 1".into()));
    }
    check_distinct(points)?;
    let mut v = ComplexMatrix::zeros(points.len(), degree);
    for (i, &z) in points.iter().enumerate() {
        for (j, pw) in powers(z, degree).into_iter().enumerate() {
            v[(i, j)] = pw;
        }
    }
    Ok(v)
}

/// Finds coefficient matrices `C_j` with `Σ_j C_j points[i]^j = rhs[i]`.
///
/// All entries share the same square Vandermonde system, so it is factored
/// once and applied to every entry position at the same time.
pub fn solve_vandermonde(points: &[Complex64], rhs: &[ComplexMatrix]) -> Result<Vec<ComplexMatrix>> {
    if points.len() != rhs.len() {
        return Err(Error::InvalidParams(format!(
            "{} points but {} right-hand sides",
            points.len(),
            rhs.len()
        )));
    }
    let k = points.len();
    let shape = rhs.first().map(|m| m.shape()).ok_or_else(|| {
        Error::InvalidParams("cannot interpolate from zero points".into())
    })?;
    if let Some(bad) = rhs.iter().find(|m| m.shape() != shape) {
        return Err(Error::mismatch(shape, bad.shape()));
    }
    let v = vandermonde(points, k)?;
    let qr = PivotedQr::new(&v)?;

    let width = shape.0 * shape.1;
    let mut stacked = Vec::with_capacity(k * width);
    for m in rhs {
        stacked.extend_from_slice(m.as_slice());
    }
    let stacked = ComplexMatrix::new(k, width, stacked)?;
    let coeffs = qr.solve(&stacked)?;

    Ok((0..k)
        .map(|j| {
            ComplexMatrix::new(shape.0, shape.1, coeffs.row(j).to_vec())
                .expect("solution shape matches rhs")
        })
        .collect())
}

/// 2-norm condition number `σ_max / σ_min`; infinite when `σ_min` is zero.
pub fn condition_number(m: &ComplexMatrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let sv = singular_values(m);
    let (max, min) = match (sv.first(), sv.last()) {
        (Some(&max), Some(&min)) => (max, min),
        _ => return Ok(1.0),
    };
    if min == 0.0 || !(max / min).is_finite() {
        return Ok(f64::INFINITY);
    }
    Ok(max / min)
}

/// `‖a − b‖_F`.
pub fn frobenius_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    Ok(a.sub(b)?.frobenius_norm())
}

/// `‖a − b‖_F / ‖b‖_F`. Returns the absolute distance when `b` is zero.
pub fn relative_frobenius_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    let dist = frobenius_distance(a, b)?;
    let norm = b.frobenius_norm();
    Ok(if norm == 0.0 { dist } else { dist / norm })
}

/// `m · m^H`.
pub fn hermitian_gram(m: &ComplexMatrix) -> ComplexMatrix {
    let n = m.rows();
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: Complex64 = m.row(i).iter().zip(m.row(j)).map(|(a, b)| a * b.conj()).sum();
            out[(i, j)] = v;
            out[(j, i)] = v.conj();
        }
        out[(i, i)] = Complex64::new(out[(i, i)].re, 0.0);
    }
    out
}

/// `Re Tr(gram^{-1} rhs)` for Hermitian positive-definite `gram` and
/// Hermitian PSD `rhs`.
pub fn trace_of_solve(gram: &ComplexMatrix, rhs: &ComplexMatrix) -> Result<f64> {
    if !gram.is_square() {
        return Err(Error::NotSquare {
            rows: gram.rows(),
            cols: gram.cols(),
        });
    }
    if gram.shape() != rhs.shape() {
        return Err(Error::mismatch(gram.shape(), rhs.shape()));
    }
    let solved = PivotedQr::new(gram)?.solve(rhs)?;
    let tr = solved.trace()?;
    if tr.im.abs() > 1e-9 * tr.re.abs().max(1.0) {
        return Err(Error::ComplexTrace {
            real: tr.re,
            imag: tr.im,
        });
    }
    Ok(tr.re)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn canonical_points_are_roots_of_unity() {
        let pts = EvaluationPoints::canonical(6);
        assert_eq!(pts.len(), 6);
        // Last point is zeta^N = 1 exactly.
        assert_eq!(pts.get(5), c(1.0, 0.0));
        for (k, z) in pts.as_slice().iter().enumerate() {
            let angle = 2.0 * PI * (k + 1) as f64 / 6.0;
            assert!((z - Complex64::from_polar(1.0, angle)).norm() < 1e-15);
        }
        assert_eq!(EvaluationPoints::point_index(0), 1);
    }

    #[test]
    fn from_points_validates() {
        assert!(matches!(
            EvaluationPoints::from_points(vec![c(1.0, 0.0), c(0.5, 0.0)]),
            Err(Error::OffUnitCircle { index: 1, .. })
        ));
        assert!(matches!(
            EvaluationPoints::from_points(vec![c(1.0, 0.0), c(1.0, 0.0)]),
            Err(Error::DuplicatePoints { .. })
        ));
        assert!(EvaluationPoints::from_points(vec![c(1.0, 0.0), c(-1.0, 0.0)]).is_ok());
    }

    #[test]
    fn matmul_identity_and_zero() {
        let m = ComplexMatrix::new(2, 2, vec![c(1.0, 2.0), c(-3.0, 0.5), c(0.0, 1.0), c(4.0, -4.0)])
            .unwrap();
        assert_eq!(matmul(&ComplexMatrix::identity(2), &m).unwrap(), m);
        assert_eq!(
            matmul(&ComplexMatrix::zeros(2, 2), &m).unwrap(),
            ComplexMatrix::zeros(2, 2)
        );
        let err = matmul(&m, &ComplexMatrix::zeros(3, 1)).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                left_rows: 2,
                left_cols: 2,
                right_rows: 3,
                right_cols: 1
            }
        ));
    }

    #[test]
    fn vandermonde_small_cases() {
        let v = vandermonde(&[c(1.0, 0.0)], 1).unwrap();
        assert_eq!(v, ComplexMatrix::identity(1));
        let v = vandermonde(&[c(1.0, 0.0), c(-1.0, 0.0)], 2).unwrap();
        let expected =
            ComplexMatrix::new(2, 2, vec![c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)])
                .unwrap();
        assert_eq!(v, expected);
        assert!(matches!(
            vandermonde(&[c(0.0, 1.0), c(0.0, 1.0)], 2),
            Err(Error::DuplicatePoints { first: 0, second: 1 })
        ));
        assert!(vandermonde(&[c(1.0, 0.0)], 0).is_err());
    }

    #[test]
    fn fourth_roots_vandermonde_is_scaled_unitary() {
        let pts = EvaluationPoints::canonical(4);
        let v = vandermonde(pts.as_slice(), 4).unwrap();
        let g = matmul(&v, &v.conj_transpose()).unwrap();
        let target = ComplexMatrix::identity(4).scaled(c(4.0, 0.0));
        for (a, b) in g.as_slice().iter().zip(target.as_slice()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn solve_single_point() {
        let m = ComplexMatrix::new(1, 2, vec![c(3.0, 1.0), c(-1.0, 0.0)]).unwrap();
        let out = solve_vandermonde(&[c(1.0, 0.0)], std::slice::from_ref(&m)).unwrap();
        assert_eq!(out, vec![m]);
    }

    #[test]
    fn solve_rejects_mismatched_inputs() {
        let m = ComplexMatrix::zeros(1, 1);
        assert!(solve_vandermonde(&[c(1.0, 0.0), c(-1.0, 0.0)], std::slice::from_ref(&m)).is_err());
        assert!(solve_vandermonde(
            &[c(1.0, 0.0), c(-1.0, 0.0)],
            &[m, ComplexMatrix::zeros(2, 1)]
        )
        .is_err());
    }

    #[test]
    fn condition_number_basics() {
        assert!((condition_number(&ComplexMatrix::identity(3)).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            condition_number(&ComplexMatrix::zeros(2, 3)),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
        assert_eq!(
            condition_number(&ComplexMatrix::zeros(2, 2)).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn frobenius_examples() {
        let m = ComplexMatrix::from_real(1, 2, &[3.0, 4.0]).unwrap();
        assert_eq!(frobenius_distance(&m, &m).unwrap(), 0.0);
        assert_eq!(frobenius_distance(&m, &ComplexMatrix::zeros(1, 2)).unwrap(), 5.0);
        assert!((relative_frobenius_distance(&ComplexMatrix::zeros(1, 2), &m).unwrap() - 1.0).abs()
            < 1e-15);
        assert!(frobenius_distance(&m, &ComplexMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn gram_examples() {
        assert_eq!(hermitian_gram(&ComplexMatrix::identity(3)), ComplexMatrix::identity(3));
        let row = ComplexMatrix::new(1, 2, vec![c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        assert_eq!(hermitian_gram(&row), ComplexMatrix::from_real(1, 1, &[2.0]).unwrap());
    }

    #[test]
    fn trace_of_solve_examples() {
        let id = ComplexMatrix::identity(4);
        assert!((trace_of_solve(&id, &id).unwrap() - 4.0).abs() < 1e-15);
        let two = ComplexMatrix::identity(3).scaled(c(2.0, 0.0));
        assert!((trace_of_solve(&two, &ComplexMatrix::identity(3)).unwrap() - 1.5).abs() < 1e-15);
        let singular = ComplexMatrix::zeros(2, 2);
        assert!(matches!(
            trace_of_solve(&singular, &ComplexMatrix::identity(2)),
            Err(Error::Singular { .. })
        ));
    }
}
