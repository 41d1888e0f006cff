//! Dense complex linear algebra: matrix exponential and a Hermitian
//! eigensolver. Kept self-contained so the crate needs no BLAS/LAPACK
//! backend; the matrices involved are at most a few hundred rows.

use ndarray::Array2;

use crate::C64;

pub use ndarray::linalg::kron;

/// One-norm (maximum absolute column sum).
fn norm_one(a: &Array2<C64>) -> f64 {
    let mut best = 0.0_f64;
    for col in a.columns() {
        let s: f64 = col.iter().map(|z| z.norm()).sum();
        best = best.max(s);
    }
    best
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
///
/// The scaled matrix has one-norm at most 1/2, for which 24 Taylor terms
/// reach double-precision roundoff.
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    let d = a.nrows();
    assert_eq!(d, a.ncols(), "expm requires a square matrix");
    let norm = norm_one(a);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = C64::new(1.0 / f64::powi(2.0, squarings as i32), 0.0);
    let b = a.mapv(|z| z * scale);

    let mut result = Array2::<C64>::eye(d);
    let mut term = Array2::<C64>::eye(d);
    for k in 1..=24u32 {
        term = term.dot(&b).mapv(|z| z / C64::new(k as f64, 0.0));
        result = &result + &term;
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

/// Eigenvalues of a Hermitian matrix via cyclic complex Jacobi rotations,
/// returned in ascending order. Optionally accumulates eigenvectors
/// (column `k` of the returned matrix pairs with eigenvalue `k`).
pub fn hermitian_eigen(a: &Array2<C64>, want_vectors: bool) -> (Vec<f64>, Option<Array2<C64>>) {
    let d = a.nrows();
    assert_eq!(d, a.ncols(), "eigensolver requires a square matrix");
    let mut m = a.clone();
    let mut vecs = want_vectors.then(|| Array2::<C64>::eye(d));

    // Off-diagonal Frobenius weight relative to the matrix scale.
    let scale: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
    let tol = 1e-14 * scale;

    for _sweep in 0..60 {
        let mut off = 0.0_f64;
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = m[(p, q)];
                let mag = apq.norm();
                off += 2.0 * mag * mag;
                if mag <= tol / (d as f64) {
                    continue;
                }
                let phase = apq / C64::new(mag, 0.0);
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let sp = C64::new(s, 0.0) * phase;

                // Columns: B = M * U with U = [[c, s*phase], [-s*conj(phase), c]].
                for k in 0..d {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = mkp * c - mkq * sp.conj();
                    m[(k, q)] = mkp * sp + mkq * c;
                }
                // Rows: M = U^H * B.
                for k in 0..d {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = mpk * c - mqk * sp;
                    m[(q, k)] = mpk * sp.conj() + mqk * c;
                }
                if let Some(v) = vecs.as_mut() {
                    for k in 0..d {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = vkp * c - vkq * sp.conj();
                        v[(k, q)] = vkp * sp + vkq * c;
                    }
                }
            }
        }
        if off.sqrt() <= tol {
            break;
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    let diag: Vec<f64> = (0..d).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let vectors = vecs.map(|v| {
        let mut sorted = Array2::<C64>::zeros((d, d));
        for (new, &old) in order.iter().enumerate() {
            sorted.column_mut(new).assign(&v.column(old));
        }
        sorted
    });
    (values, vectors)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_hermitian_eigenvalue(a: &Array2<C64>) -> f64 {
    let (values, _) = hermitian_eigen(a, false);
    values.first().copied().unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn expm_of_zero_is_identity() {
        let z = Array2::<C64>::zeros((3, 3));
        let e = expm(&z);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((e[(i, j)] - C64::new(want, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn expm_matches_scalar_series_on_diagonal() {
        let a = array![
            [C64::new(0.3, 0.0), C64::new(0.0, 0.0)],
            [C64::new(0.0, 0.0), C64::new(0.0, -1.2)]
        ];
        let e = expm(&a);
        assert!((e[(0, 0)] - C64::new(0.3_f64.exp(), 0.0)).norm() < 1e-13);
        let want = C64::new(0.0, -1.2).exp();
        assert!((e[(1, 1)] - want).norm() < 1e-13);
    }

    #[test]
    fn jacobi_diagonalises_a_pauli_like_matrix() {
        // [[1, i], [-i, -1]] has eigenvalues -sqrt(2), sqrt(2).
        let a = array![
            [C64::new(1.0, 0.0), C64::new(0.0, 1.0)],
            [C64::new(0.0, -1.0), C64::new(-1.0, 0.0)]
        ];
        let (vals, vecs) = hermitian_eigen(&a, true);
        assert!((vals[0] + 2.0_f64.sqrt()).abs() < 1e-12);
        assert!((vals[1] - 2.0_f64.sqrt()).abs() < 1e-12);
        let v = vecs.unwrap();
        // Residual A v = lambda v for both columns.
        for k in 0..2 {
            for i in 0..2 {
                let av: C64 = (0..2).map(|j| a[(i, j)] * v[(j, k)]).sum();
                assert!((av - v[(i, k)] * vals[k]).norm() < 1e-12);
            }
        }
    }
}
