//! Naive reference implementations used as independent oracles by the
//! integration tests. These deliberately avoid the library's linear-algebra
//! paths: covariance by triple loop, eigendecomposition by classical complex
//! Jacobi rotations.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

/// (1/M) Σ_m z[m] z[m]†, accumulated entry by entry.
pub fn naive_covariance(z_samples: &CMat) -> CMat {
    let n = z_samples.nrows();
    let m = z_samples.ncols();
    let mut acc = CMat::zeros(n, n);
    for s in 0..m {
        for i in 0..n {
            for j in 0..n {
                acc[(i, j)] += z_samples[(i, s)] * z_samples[(j, s)].conj();
            }
        }
    }
    acc / Complex64::new(m as f64, 0.0)
}

/// Eigenvalues (descending) and eigenvectors of a complex Hermitian matrix
/// via cyclic Jacobi rotations.
pub fn jacobi_hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut m = a.clone();
    let mut v = CMat::identity(n, n);
    let scale: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
    for _sweep in 0..200 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.norm() <= 1e-300 {
                    continue;
                }
                let phase = apq / Complex64::new(apq.norm(), 0.0);
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let tau = (aqq - app) / (2.0 * apq.norm());
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // columns update: [p q] ← [p q] · [[c, s·e^{iφ}], [−s·e^{−iφ}, c]]†-style
                let cs = Complex64::new(c, 0.0);
                let sn = phase * Complex64::new(s, 0.0);
                for r in 0..n {
                    let mp = m[(r, p)];
                    let mq = m[(r, q)];
                    m[(r, p)] = mp * cs - mq * sn.conj();
                    m[(r, q)] = mp * sn + mq * cs;
                }
                for col in 0..n {
                    let pp = m[(p, col)];
                    let qq = m[(q, col)];
                    m[(p, col)] = pp * cs - qq * sn;
                    m[(q, col)] = pp * sn.conj() + qq * cs;
                }
                for r in 0..n {
                    let vp = v[(r, p)];
                    let vq = v[(r, q)];
                    v[(r, p)] = vp * cs - vq * sn.conj();
                    v[(r, q)] = vp * sn + vq * cs;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&x, &y| diag[y].partial_cmp(&diag[x]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &v.column(src));
    }
    (values, vectors)
}

/// Frobenius distance between the spectral projectors of eigenvalue
/// clusters, tolerant to phase and intra-cluster rotation.
pub fn projector_mismatch(
    values: &[f64],
    impl_vectors: &CMat,
    oracle_vectors: &CMat,
    rel_tol: f64,
) -> f64 {
    let n = values.len();
    let lmax = values[0].abs().max(1e-300);
    let mut worst = 0.0f64;
    let mut start = 0usize;
    while start < n {
        let mut end = start + 1;
        while end < n && (values[end - 1] - values[end]).abs() <= rel_tol * lmax {
            end += 1;
        }
        let mut p_impl = CMat::zeros(n, n);
        let mut p_orac = CMat::zeros(n, n);
        for c in start..end {
            for i in 0..n {
                for j in 0..n {
                    p_impl[(i, j)] += impl_vectors[(i, c)] * impl_vectors[(j, c)].conj();
                    p_orac[(i, j)] += oracle_vectors[(i, c)] * oracle_vectors[(j, c)].conj();
                }
            }
        }
        worst = worst.max((p_impl - p_orac).norm());
        start = end;
    }
    worst
}
