//! Householder QR with column pivoting.
//!
//! Used for every small dense solve in the crate: Vandermonde interpolation
//! during decoding and the Gram solves inside the leakage trace. One
//! factorization is applied to a whole block of right-hand sides at once.

use num_complex::Complex64;

use super::ComplexMatrix;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug)]
pub struct PivotedQr {
    rows: usize,
    cols: usize,
    /// Upper triangle holds R; below-diagonal storage is unused.
    r: ComplexMatrix,
    /// Householder vectors, `reflectors[k]` acts on rows `k..rows`.
    reflectors: Vec<(Vec<Complex64>, f64)>,
    /// `perm[k]` is the original column now in position `k`.
    perm: Vec<usize>,
}

impl PivotedQr {
    pub fn new(a: &ComplexMatrix) -> Result<Self> {
        let (rows, cols) = a.shape();
        if rows < cols {
            return Err(Error::InvalidParams(format!(
                "QR needs rows >= cols, got {rows}x{cols}"
            )));
        }
        let mut r = a.clone();
        let mut perm: Vec<usize> = (0..cols).collect();
        let mut reflectors = Vec::with_capacity(cols);

        for k in 0..cols {
            // Pivot on the largest remaining column norm. Norms are recomputed
            // from scratch each step; sizes here are tiny.
            let (pivot, _) = (k..cols)
                .map(|j| (j, (k..rows).map(|i| r[(i, j)].norm_sqr()).sum::<f64>()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot != k {
                for i in 0..rows {
                    let tmp = r[(i, k)];
                    r[(i, k)] = r[(i, pivot)];
                    r[(i, pivot)] = tmp;
                }
                perm.swap(k, pivot);
            }

            let norm = (k..rows).map(|i| r[(i, k)].norm_sqr()).sum::<f64>().sqrt();
            let mut v: Vec<Complex64> = (k..rows).map(|i| r[(i, k)]).collect();
            if norm == 0.0 {
                reflectors.push((v, 0.0));
                continue;
            }
            let head = v[0];
            let phase = if head.norm() == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                head / head.norm()
            };
            let alpha = -phase * norm;
            v[0] -= alpha;
            let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            let beta = if vnorm2 == 0.0 { 0.0 } else { 2.0 / vnorm2 };

            for j in k..cols {
                let dot: Complex64 = v
                    .iter()
                    .enumerate()
                    .map(|(off, vi)| vi.conj() * r[(k + off, j)])
                    .sum();
                let s = dot * beta;
                for (off, vi) in v.iter().enumerate() {
                    r[(k + off, j)] -= vi * s;
                }
            }
            r[(k, k)] = alpha;
            for i in k + 1..rows {
                r[(i, k)] = ZERO;
            }
            reflectors.push((v, beta));
        }

        Ok(Self {
            rows,
            cols,
            r,
            reflectors,
            perm,
        })
    }

    /// Ratio of the largest to smallest diagonal magnitude of R. A cheap
    /// lower estimate of the 2-norm condition number.
    pub fn condition_estimate(&self) -> f64 {
        let diag: Vec<f64> = (0..self.cols).map(|k| self.r[(k, k)].norm()).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    fn check_solvable(&self) -> Result<()> {
        let cond = self.condition_estimate();
        let limit = 1.0 / (self.cols.max(1) as f64 * f64::EPSILON);
        if !cond.is_finite() || cond > limit {
            return Err(Error::Singular { condition: cond });
        }
        Ok(())
    }

    /// Least-squares solve of `A X = B` for a block right-hand side
    /// (`B` has `rows` rows and any number of columns).
    pub fn solve(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        if b.rows() != self.rows {
            return Err(Error::mismatch((self.rows, self.cols), b.shape()));
        }
        self.check_solvable()?;
        let width = b.cols();
        let mut y = b.clone();

        // y <- Q^H y
        for (k, (v, beta)) in self.reflectors.iter().enumerate() {
            if *beta == 0.0 {
                continue;
            }
            let mut dots = vec![ZERO; width];
            for (off, vi) in v.iter().enumerate() {
                let vc = vi.conj();
                for (d, yv) in dots.iter_mut().zip(y.row(k + off)) {
                    *d += vc * yv;
                }
            }
            for (off, vi) in v.iter().enumerate() {
                let row = k + off;
                let dst = &mut y.as_mut_slice()[row * width..(row + 1) * width];
                for (yv, d) in dst.iter_mut().zip(&dots) {
                    *yv -= vi * d * *beta;
                }
            }
        }

        // Back substitution R z = y[0..cols]
        let n = self.cols;
        let mut z = ComplexMatrix::zeros(n, width);
        for k in (0..n).rev() {
            let mut acc: Vec<Complex64> = y.row(k).to_vec();
            for j in k + 1..n {
                let rkj = self.r[(k, j)];
                for (a, zv) in acc.iter_mut().zip(z.row(j)) {
                    *a -= rkj * zv;
                }
            }
            let inv = Complex64::new(1.0, 0.0) / self.r[(k, k)];
            let dst = &mut z.as_mut_slice()[k * width..(k + 1) * width];
            for (d, a) in dst.iter_mut().zip(acc) {
                *d = a * inv;
            }
        }

        // Undo the column permutation.
        let mut x = ComplexMatrix::zeros(n, width);
        for (k, &orig) in self.perm.iter().enumerate() {
            x.set_block(orig, 0, &z.block(k, 0, 1, width));
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matmul;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn solves_small_system() {
        let a = ComplexMatrix::new(2, 2, vec![c(1.0, 0.0), c(2.0, 1.0), c(0.0, -1.0), c(3.0, 0.0)])
            .unwrap();
        let x_true = ComplexMatrix::new(2, 1, vec![c(1.0, 1.0), c(-2.0, 0.5)]).unwrap();
        let b = matmul(&a, &x_true).unwrap();
        let x = PivotedQr::new(&a).unwrap().solve(&b).unwrap();
        assert!(x.sub(&x_true).unwrap().frobenius_norm() < 1e-14);
    }

    #[test]
    fn singular_is_reported() {
        let a = ComplexMatrix::new(2, 2, vec![c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)])
            .unwrap();
        let qr = PivotedQr::new(&a).unwrap();
        let err = qr.solve(&ComplexMatrix::identity(2)).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
    }
}
