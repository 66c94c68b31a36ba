use alloc::vec;
use alloc::vec::Vec;

use crate::rng::{self, Rng};

/// Orthogonal `rows x cols` matrix (row-major) from the QR decomposition of
/// a Gaussian matrix, sign-corrected so the distribution is uniform.
///
/// Rows are orthonormal when `rows <= cols`, columns otherwise.
pub fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut Rng) -> Vec<f64> {
    // Orthonormalize the shorter dimension: build `short` vectors of
    // length `long`.
    let (short, long) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut q = vec![0.0; short * long];
    for v in q.iter_mut() {
        *v = rng::standard_normal(rng);
    }
    for i in 0..short {
        // Two passes of modified Gram-Schmidt keep the basis orthogonal to
        // rounding precision.
        for _ in 0..2 {
            for j in 0..i {
                let (head, tail) = q.split_at_mut(i * long);
                let qj = &head[j * long..(j + 1) * long];
                let qi = &mut tail[..long];
                let dot: f64 = qi.iter().zip(qj).map(|(a, b)| a * b).sum();
                qi.iter_mut().zip(qj).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let qi = &mut q[i * long..(i + 1) * long];
        let norm = libm::sqrt(qi.iter().map(|v| v * v).sum::<f64>());
        qi.iter_mut().for_each(|v| *v *= gain / norm);
    }
    if rows <= cols {
        q
    } else {
        let mut t = vec![0.0; rows * cols];
        for i in 0..short {
            for j in 0..long {
                t[j * cols + i] = q[i * long + j];
            }
        }
        t
    }
}
