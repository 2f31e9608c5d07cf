//! Dense complex linear algebra: BLAS-backed matrix products, Hermitian
//! eigendecomposition with descending eigenvalue order, and the Bessel J0
//! kernel used for array correlation.
//!
//! Matrix storage is nalgebra's column-major `DMatrix`, which maps directly
//! onto the CBLAS column-major interface of the system OpenBLAS.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;
pub type RMat = DMatrix<f64>;

const CBLAS_COL_MAJOR: i32 = 102;
const CBLAS_NO_TRANS: i32 = 111;
const CBLAS_CONJ_TRANS: i32 = 113;

#[link(name = "openblas")]
extern "C" {
    fn cblas_zgemm(
        layout: i32,
        transa: i32,
        transb: i32,
        m: i32,
        n: i32,
        k: i32,
        alpha: *const Complex64,
        a: *const Complex64,
        lda: i32,
        b: *const Complex64,
        ldb: i32,
        beta: *const Complex64,
        c: *mut Complex64,
        ldc: i32,
    );
    fn cblas_dgemm(
        layout: i32,
        transa: i32,
        transb: i32,
        m: i32,
        n: i32,
        k: i32,
        alpha: f64,
        a: *const f64,
        lda: i32,
        b: *const f64,
        ldb: i32,
        beta: f64,
        c: *mut f64,
        ldc: i32,
    );
    fn openblas_set_num_threads(n: i32);
}

/// Pin OpenBLAS to one thread so drop-level rayon workers do not
/// oversubscribe the cores. Idempotent.
pub fn configure_blas_single_threaded() {
    use std::sync::Once;
    static ONCE: Once = Once::new();
    ONCE.call_once(|| unsafe { openblas_set_num_threads(1) });
}

/// Operand side transformation for [`zgemm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    NoTrans,
    ConjTrans,
}

impl Op {
    fn cblas(self) -> i32 {
        match self {
            Op::NoTrans => CBLAS_NO_TRANS,
            Op::ConjTrans => CBLAS_CONJ_TRANS,
        }
    }

    fn dims(self, m: &CMat) -> (usize, usize) {
        match self {
            Op::NoTrans => (m.nrows(), m.ncols()),
            Op::ConjTrans => (m.ncols(), m.nrows()),
        }
    }
}

/// C = alpha * op(A) * op(B) + beta * C.
pub fn zgemm(alpha: Complex64, a: &CMat, op_a: Op, b: &CMat, op_b: Op, beta: Complex64, c: &mut CMat) {
    let (m, ka) = op_a.dims(a);
    let (kb, n) = op_b.dims(b);
    assert_eq!(ka, kb, "zgemm inner dimension mismatch: {ka} vs {kb}");
    assert_eq!((c.nrows(), c.ncols()), (m, n), "zgemm output shape mismatch");
    if m == 0 || n == 0 {
        return;
    }
    if ka == 0 {
        c.iter_mut().for_each(|x| *x *= beta);
        return;
    }
    unsafe {
        cblas_zgemm(
            CBLAS_COL_MAJOR,
            op_a.cblas(),
            op_b.cblas(),
            m as i32,
            n as i32,
            ka as i32,
            &alpha,
            a.as_slice().as_ptr(),
            a.nrows() as i32,
            b.as_slice().as_ptr(),
            b.nrows() as i32,
            &beta,
            c.as_mut_slice().as_mut_ptr(),
            m as i32,
        );
    }
}

/// Convenience: op(A) * op(B) into a fresh matrix.
pub fn zgemm_new(a: &CMat, op_a: Op, b: &CMat, op_b: Op) -> CMat {
    let (m, _) = op_a.dims(a);
    let (_, n) = op_b.dims(b);
    let mut c = CMat::zeros(m, n);
    zgemm(Complex64::new(1.0, 0.0), a, op_a, b, op_b, Complex64::new(0.0, 0.0), &mut c);
    c
}

/// C = A * B for real matrices (no transposition needed by callers).
pub fn dgemm_new(a: &RMat, b: &RMat) -> RMat {
    assert_eq!(a.ncols(), b.nrows(), "dgemm inner dimension mismatch");
    let (m, n, k) = (a.nrows(), b.ncols(), a.ncols());
    let mut c = RMat::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    unsafe {
        cblas_dgemm(
            CBLAS_COL_MAJOR,
            CBLAS_NO_TRANS,
            CBLAS_NO_TRANS,
            m as i32,
            n as i32,
            k as i32,
            1.0,
            a.as_slice().as_ptr(),
            m as i32,
            b.as_slice().as_ptr(),
            k as i32,
            0.0,
            c.as_mut_slice().as_mut_ptr(),
            m as i32,
        );
    }
    c
}

/// (M + M†)/2, forcing exact Hermitian symmetry onto a numerically
/// near-Hermitian matrix.
pub fn hermitian_part(m: &CMat) -> CMat {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    let mut h = m.clone();
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            h[(i, j)] = avg;
            h[(j, i)] = avg.conj();
        }
        h[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
    }
    h
}

/// Hermitian eigendecomposition with eigenvalues sorted descending and
/// eigenvector columns permuted to match.
pub struct HermitianEigen {
    /// Real eigenvalues, λ₁ ≥ λ₂ ≥ … ≥ λ_N.
    pub values: Vec<f64>,
    /// Unitary matrix whose k-th column is the eigenvector of λ_k.
    pub vectors: CMat,
}

/// Decompose a Hermitian matrix. The input is symmetrized first so that
/// accumulated round-off in a product like Z·Z† cannot poison the solve.
pub fn eigh_descending(m: &CMat) -> HermitianEigen {
    let h = hermitian_part(m);
    let se = h.symmetric_eigen();
    let n = se.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps the decomposition's own ordering within ties
    order.sort_by(|&a, &b| se.eigenvalues[b].partial_cmp(&se.eigenvalues[a]).unwrap());
    let mut vectors = CMat::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(se.eigenvalues[src]);
        vectors.set_column(dst, &se.eigenvectors.column(src));
    }
    HermitianEigen { values, vectors }
}

/// Bessel function of the first kind, order zero.
///
/// Rational approximations from Abramowitz & Stegun 9.4.1 / 9.4.3
/// (|error| < 1e-7 over the real line), sufficient for building the array
/// correlation kernel.
pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 8.0 {
        let y = x * x;
        let p1 = 57568490574.0 + y * (-13362590354.0 + y * (651619640.7 + y * (-11214424.18 + y * (77392.33017 + y * (-184.9052456)))));
        let p2 = 57568490411.0 + y * (1029532985.0 + y * (9494680.718 + y * (59272.64853 + y * (267.8532712 + y))));
        p1 / p2
    } else {
        let z = 8.0 / ax;
        let y = z * z;
        let xx = ax - 0.785398164;
        let p1 = 1.0 + y * (-0.1098628627e-2 + y * (0.2734510407e-4 + y * (-0.2073370639e-5 + y * 0.2093887211e-6)));
        let p2 = -0.1562499995e-1 + y * (0.1430488765e-3 + y * (-0.6911147651e-5 + y * (0.7621095161e-6 + y * (-0.934935152e-7))));
        (2.0 / (std::f64::consts::PI * ax)).sqrt() * (xx.cos() * p1 - z * xx.sin() * p2)
    }
}

/// Squared Euclidean norm of a complex matrix column.
#[inline]
pub fn col_norm_sq(m: &CMat, col: usize) -> f64 {
    m.column(col).iter().map(|z| z.norm_sqr()).sum()
}
