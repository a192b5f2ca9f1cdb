//! Small dense decompositions used by the precoder and the readout trainer.
//!
//! The matrices involved are tiny (K×K Gram matrices, readout normal
//! equations, reservoir weight blocks), so plain dense algorithms are used
//! and kept generic over the scalar type.

use ndarray::{Array1, Array2};
use num_complex::Complex;
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("shape mismatch: {context}")]
    ShapeMismatch { context: String },
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { pivot: f64, index: usize },
    #[error("eigenvalue iteration did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
}

/// Solves `A · X = B` for symmetric positive-definite `A` via Cholesky.
pub fn cholesky_solve<T: Scalar>(
    a: &Array2<T>,
    b: &Array2<T>,
) -> Result<Array2<T>, LinalgError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(LinalgError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if b.nrows() != n {
        return Err(LinalgError::ShapeMismatch {
            context: format!("rhs has {} rows, matrix has {}", b.nrows(), n),
        });
    }

    // Lower-triangular factor, stored dense.
    let mut l = Array2::<T>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum = sum - l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= T::zero() {
                    return Err(LinalgError::NotPositiveDefinite {
                        pivot: sum.to_f64_lossy(),
                        index: i,
                    });
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }

    // Forward solve L·Y = B, then back solve Lᵀ·X = Y.
    let m = b.ncols();
    let mut x = b.clone();
    for col in 0..m {
        for i in 0..n {
            let mut sum = x[[i, col]];
            for k in 0..i {
                sum = sum - l[[i, k]] * x[[k, col]];
            }
            x[[i, col]] = sum / l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut sum = x[[i, col]];
            for k in (i + 1)..n {
                sum = sum - l[[k, i]] * x[[k, col]];
            }
            x[[i, col]] = sum / l[[i, i]];
        }
    }
    Ok(x)
}

/// Eigendecomposition of a Hermitian matrix: `A = V · diag(λ) · Vᴴ`.
pub struct HermitianEigen<T> {
    /// Real eigenvalues, unsorted.
    pub values: Array1<T>,
    /// Unitary matrix whose columns are the eigenvectors.
    pub vectors: Array2<Complex<T>>,
}

/// Cyclic Jacobi sweeps for Hermitian matrices. Intended for the small
/// Gram matrices of the zero-forcing precoder (K ≤ a few dozen).
pub fn hermitian_eigen<T: Scalar>(
    a: &Array2<Complex<T>>,
) -> Result<HermitianEigen<T>, LinalgError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(LinalgError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let mut m = a.clone();
    let mut v = Array2::<Complex<T>>::zeros((n, n));
    for i in 0..n {
        v[[i, i]] = Complex::new(T::one(), T::zero());
    }

    let total: T = m.iter().map(|z| z.norm_sqr()).sum();
    // Roundoff floors the off-diagonal mass near (n·eps·‖A‖)²; stop there.
    let floor = T::from_usize(100 * n * n).unwrap();
    let tol = total * T::epsilon() * T::epsilon() * floor;
    let max_sweeps = 60;

    for _ in 0..max_sweeps {
        let off: T = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| m[[p, q]].norm_sqr())
            .sum::<T>()
            * T::from_f64_lossy(2.0);
        if off <= tol || n < 2 {
            let values = Array1::from_iter((0..n).map(|i| m[[i, i]].re));
            return Ok(HermitianEigen { values, vectors: v });
        }

        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                let r = apq.norm();
                if r <= T::epsilon() * total.sqrt() {
                    continue;
                }
                let alpha = apq / Complex::new(r, T::zero());
                let app = m[[p, p]].re;
                let aqq = m[[q, q]].re;
                let theta = (aqq - app) / (r + r);
                let t = if theta == T::zero() {
                    T::one()
                } else {
                    theta.signum() / (theta.abs() + (T::one() + theta * theta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                let cs = Complex::new(c, T::zero());
                let s_alpha = alpha * s; // J[p][q]  =  s·e^{iα}
                let s_alpha_conj = s_alpha.conj(); // −J[q][p]

                // Row update: M ← Jᴴ · M
                for k in 0..n {
                    let mp = m[[p, k]];
                    let mq = m[[q, k]];
                    m[[p, k]] = cs * mp - s_alpha * mq;
                    m[[q, k]] = s_alpha_conj * mp + cs * mq;
                }
                // Column update: M ← M · J, and accumulate V ← V · J
                for k in 0..n {
                    let mp = m[[k, p]];
                    let mq = m[[k, q]];
                    m[[k, p]] = mp * cs - mq * s_alpha_conj;
                    m[[k, q]] = mp * s_alpha + mq * cs;

                    let vp = v[[k, p]];
                    let vq = v[[k, q]];
                    v[[k, p]] = vp * cs - vq * s_alpha_conj;
                    v[[k, q]] = vp * s_alpha + vq * cs;
                }
            }
        }
    }
    Err(LinalgError::NoConvergence { sweeps: max_sweeps })
}

/// Spectral radius of a real square matrix, estimated by repeated squaring
/// with per-step normalization: `ρ(A) = lim ‖A^(2^j)‖^(1/2^j)`.
///
/// Unlike plain power iteration this handles dominant complex-conjugate
/// eigenvalue pairs, which random reservoir matrices routinely have.
pub fn spectral_radius(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "spectral_radius requires a square matrix");
    if n == 0 {
        return 0.0;
    }
    let norm0 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm0 == 0.0 {
        return 0.0;
    }

    let mut b = a.mapv(|x| x / norm0);
    let mut log_rho = norm0.ln();
    let mut halving = 1.0_f64;
    let mut last_log_s = 0.0_f64;
    for _ in 0..48 {
        let c = b.dot(&b);
        let s = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        halving *= 0.5;
        if s == 0.0 {
            return 0.0; // nilpotent
        }
        last_log_s = s.ln();
        log_rho += halving * last_log_s;
        b = c.mapv(|x| x / s);
    }
    // Geometric tail: the per-step norms have stabilized by now.
    log_rho += halving * last_log_s;
    log_rho.exp()
}
