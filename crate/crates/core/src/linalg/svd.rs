//! Singular values by one-sided (Hestenes) Jacobi rotations.

use num_complex::Complex64;

use super::ComplexMatrix;

const MAX_SWEEPS: usize = 80;

/// Singular values in descending order.
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    // Orthogonalize the columns of the taller orientation.
    let work = if m.rows() >= m.cols() {
        m.clone()
    } else {
        m.conj_transpose()
    };
    let (rows, cols) = work.shape();
    // Column-major copy so each column is contiguous.
    let mut columns: Vec<Vec<Complex64>> = (0..cols)
        .map(|c| (0..rows).map(|r| work[(r, c)]).collect())
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (left, right) = columns.split_at_mut(q);
                let up = &mut left[p];
                let uq = &mut right[0];
                let alpha: f64 = up.iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = uq.iter().map(|z| z.norm_sqr()).sum();
                let gamma: Complex64 = up.iter().zip(uq.iter()).map(|(a, b)| a.conj() * b).sum();
                let g = gamma.norm();
                if g == 0.0 || g <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // Rotate u_q by the phase of gamma so the pair becomes a real problem.
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for (a, b) in up.iter_mut().zip(uq.iter_mut()) {
                    let bq = *b * phase.conj();
                    let new_a = *a * c - bq * s;
                    let new_b = *a * s + bq * c;
                    *a = new_a;
                    *b = new_b;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sv: Vec<f64> = columns
        .iter()
        .map(|col| col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}
