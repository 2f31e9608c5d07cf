//! Signal-processing core: silent-period sensing, sample covariance and its
//! spectral decomposition, spatial d.o.f. allocation, and null-constrained
//! zero-forcing precoder synthesis.

use crate::error::{Result, SimError};
use crate::linalg::{col_norm_sq, eigh_descending, hermitian_part, zgemm, zgemm_new, CMat, Op};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Diagonal regularization strength applied when S†S is ill conditioned.
pub const REGULARIZATION_EPSILON: f64 = 1e-10;
/// Condition-number cap beyond which regularization kicks in.
pub const CONDITION_CAP: f64 = 1e12;

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Received samples of one BS silent period.
pub struct SilenceSnapshot {
    /// N × M matrix, column m = z[m].
    pub z_samples: CMat,
    pub noise_var: f64,
    pub tx_powers: Vec<f64>,
}

/// z[m] = Σ_ℓ √P_ℓ · g_ℓ · s_ℓ[m] + η[m] over M samples, with unit-variance
/// complex Gaussian symbols and CN(0, σ²_η I) noise.
///
/// `g_active` holds one column per transmitting device, aligned with
/// `tx_powers`. RNG order: per sample, one complex symbol per device; then
/// per sample, one complex noise entry per antenna.
pub fn simulate_silence<R: Rng>(
    g_active: &CMat,
    tx_powers: &[f64],
    m_samples: usize,
    noise_var: f64,
    rng: &mut R,
) -> SilenceSnapshot {
    assert!(m_samples >= 1, "need at least one sample");
    assert_eq!(g_active.ncols(), tx_powers.len());
    let n = g_active.nrows();
    let l = g_active.ncols();
    let half = 0.5f64.sqrt();
    let mut symbols = CMat::zeros(l, m_samples);
    for m in 0..m_samples {
        for dev in 0..l {
            symbols[(dev, m)] = Complex64::new(
                half * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng),
                half * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng),
            );
        }
    }
    let noise_amp = (noise_var / 2.0).sqrt();
    let mut z = CMat::zeros(n, m_samples);
    for m in 0..m_samples {
        for a in 0..n {
            z[(a, m)] = Complex64::new(
                noise_amp * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng),
                noise_amp * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng),
            );
        }
    }
    if l > 0 {
        let mut g_scaled = g_active.clone();
        for dev in 0..l {
            let s = tx_powers[dev].sqrt();
            for a in 0..n {
                g_scaled[(a, dev)] *= s;
            }
        }
        zgemm(ONE, &g_scaled, Op::NoTrans, &symbols, Op::NoTrans, ONE, &mut z);
    }
    SilenceSnapshot { z_samples: z, noise_var, tx_powers: tx_powers.to_vec() }
}

/// Sample covariance with its spectral decomposition, eigenvalues descending.
pub struct CovarianceEstimate {
    pub z_hat: CMat,
    pub u_hat: CMat,
    pub lambda_hat: Vec<f64>,
    pub m: usize,
}

/// Ẑ = (1/M) Σ_m z[m] z[m]†, eigendecomposed.
pub fn estimate_covariance(snap: &SilenceSnapshot) -> Result<CovarianceEstimate> {
    let m = snap.z_samples.ncols();
    if snap.z_samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(SimError::data("non-finite silence samples"));
    }
    let mut z_hat = zgemm_new(&snap.z_samples, Op::NoTrans, &snap.z_samples, Op::ConjTrans);
    z_hat /= Complex64::new(m as f64, 0.0);
    let z_hat = hermitian_part(&z_hat);
    let eig = eigh_descending(&z_hat);
    Ok(CovarianceEstimate { z_hat, u_hat: eig.vectors, lambda_hat: eig.values, m })
}

impl CovarianceEstimate {
    /// Check the structural invariants of the estimate (tested; not on the
    /// hot path).
    pub fn validate(&self) -> Result<()> {
        let n = self.z_hat.nrows();
        let herm_dev = (&self.z_hat - self.z_hat.adjoint()).norm();
        if herm_dev > 1e-12 * self.z_hat.norm().max(1e-300) {
            return Err(SimError::data("covariance not Hermitian"));
        }
        let lmax = self.lambda_hat.first().copied().unwrap_or(0.0);
        if self.lambda_hat.last().copied().unwrap_or(0.0) < -1e-10 * lmax.max(1e-300) {
            return Err(SimError::data("covariance not positive semidefinite"));
        }
        for w in self.lambda_hat.windows(2) {
            if w[0] < w[1] - 1e-12 * lmax.abs().max(1e-300) {
                return Err(SimError::data("eigenvalues not sorted descending"));
            }
        }
        let lam = CMat::from_fn(n, n, |i, j| {
            if i == j { Complex64::new(self.lambda_hat[i], 0.0) } else { ZERO }
        });
        let rec = &self.u_hat * lam * self.u_hat.adjoint();
        if (rec - &self.z_hat).norm() > 1e-9 * self.z_hat.norm().max(1e-300) {
            return Err(SimError::data("eigendecomposition does not reconstruct"));
        }
        let uu = self.u_hat.adjoint() * &self.u_hat;
        if (uu - CMat::identity(n, n)).norm() > 1e-9 {
            return Err(SimError::data("eigenvectors not unitary"));
        }
        Ok(())
    }
}

/// Fixed-scheduled-UE criterion: D = ⌊c1 (N − K)⌋.
pub fn allocate_dof_fixed_k(n: usize, k: usize, c1: f64) -> Result<usize> {
    if k > n {
        return Err(SimError::config(format!("scheduled UEs K={k} exceeds antennas N={n}")));
    }
    if !(0.0..1.0).contains(&c1) || c1 <= 0.0 {
        return Err(SimError::config(format!("c1 = {c1} outside (0, 1)")));
    }
    Ok((c1 * (n - k) as f64).floor() as usize)
}

/// Controlled-interference criterion: D = |{λ̂ > γ}|, K = ⌊c2 (N − D)⌋.
/// K = 0 means no transmission opportunity this drop.
pub fn allocate_dof_threshold(lambda_hat: &[f64], gamma: f64, c2: f64, n: usize) -> (usize, usize) {
    assert!(gamma >= 0.0 && c2 > 0.0 && c2 < 1.0);
    let d = lambda_hat.iter().take(n).filter(|&&l| l > gamma).count();
    let k = (c2 * (n - d) as f64).floor() as usize;
    (d, k)
}

/// Uniformly random subset of at most `k` UE ids. Deterministic under a
/// fixed seed; an empty association list idles the sector.
pub fn schedule_ues<R: Rng>(associated: &[usize], k: usize, rng: &mut R) -> Vec<usize> {
    let take = k.min(associated.len());
    let mut pool: Vec<usize> = associated.to_vec();
    for i in 0..take {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(take);
    pool
}

/// How the total transmit power constraint Σ‖w‖² = 1 is distributed over
/// beams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerNormalization {
    /// Single ζ scaling of the raw pseudo-inverse columns (equal effective
    /// receive amplitudes across scheduled UEs).
    Aggregate,
    /// Each column rescaled to ‖w_k‖² = 1/K (equal power per beam); the
    /// zero-forcing and null constraints are unaffected by per-column scale.
    PerBeam,
}

/// Zero-forcing precoders with embedded nulls.
#[derive(Clone)]
pub struct PrecoderSet {
    /// N × K matrix of normalized precoding vectors.
    pub w: CMat,
    /// Aggregate normalizer Σ‖w̃_k‖² of the raw pseudo-inverse columns.
    pub zeta: f64,
    /// Constraint matrix S = [ĥ_1 … ĥ_K  û_1 … û_D].
    pub s: CMat,
    /// True when S†S needed diagonal regularization.
    pub regularized: bool,
}

/// w_k ∝ S (S†S)⁻¹ v_k for the K estimated-CSI columns, normalized so
/// Σ_k ‖w_k‖² = 1. The first `d` columns of `u_hat` become null constraints.
pub fn compute_precoders(
    h_hat: &CMat,
    u_hat: &CMat,
    d: usize,
    norm: PowerNormalization,
) -> Result<PrecoderSet> {
    let n = h_hat.nrows();
    let k = h_hat.ncols();
    if k == 0 {
        return Err(SimError::config("cannot precode zero scheduled UEs"));
    }
    if k + d > n {
        return Err(SimError::config(format!(
            "K + D = {} exceeds antenna count N = {n}",
            k + d
        )));
    }
    if d > 0 && (u_hat.nrows() != n || u_hat.ncols() < d) {
        return Err(SimError::config("eigenbasis shape incompatible with requested nulls"));
    }
    let cols = k + d;
    let mut s = CMat::zeros(n, cols);
    for c in 0..k {
        s.set_column(c, &h_hat.column(c));
    }
    for c in 0..d {
        s.set_column(k + c, &u_hat.column(c));
    }

    let gram = zgemm_new(&s, Op::ConjTrans, &s, Op::NoTrans);
    let eig = eigh_descending(&gram);
    let lmax = eig.values[0].max(0.0);
    let lmin = eig.values[cols - 1];
    let regularized = !(lmin > 0.0 && lmax / lmin <= CONDITION_CAP);
    let ridge = if regularized {
        REGULARIZATION_EPSILON * eig.values.iter().sum::<f64>() / cols as f64
    } else {
        0.0
    };
    // (S†S)⁻¹ from the spectral factors, with the optional ridge on the
    // eigenvalues (equivalent to S†S + ridge·I).
    let mut inv = CMat::zeros(cols, cols);
    for c in 0..cols {
        let lam = eig.values[c] + ridge;
        if lam <= 0.0 {
            return Err(SimError::data("constraint Gram matrix is singular beyond repair"));
        }
        let q = eig.vectors.column(c);
        let scale = Complex64::new(1.0 / lam, 0.0);
        for i in 0..cols {
            for j in 0..cols {
                inv[(i, j)] += q[i] * q[j].conj() * scale;
            }
        }
    }
    let w_raw_all = zgemm_new(&s, Op::NoTrans, &inv, Op::NoTrans);
    let mut w = CMat::zeros(n, k);
    for c in 0..k {
        w.set_column(c, &w_raw_all.column(c));
    }
    let zeta: f64 = (0..k).map(|c| col_norm_sq(&w, c)).sum();
    if zeta <= 0.0 || !zeta.is_finite() {
        return Err(SimError::data("degenerate precoder normalization"));
    }
    match norm {
        PowerNormalization::Aggregate => {
            let inv_sqrt = Complex64::new(1.0 / zeta.sqrt(), 0.0);
            w *= inv_sqrt;
        }
        PowerNormalization::PerBeam => {
            let per = 1.0 / (k as f64).sqrt();
            for c in 0..k {
                let nrm = col_norm_sq(&w, c).sqrt();
                let scale = Complex64::new(per / nrm, 0.0);
                for r in 0..n {
                    w[(r, c)] *= scale;
                }
            }
        }
    }
    Ok(PrecoderSet { w, zeta, s, regularized })
}

/// Conventional zero-forcing baseline: identical to [`compute_precoders`]
/// with zero nulls.
pub fn baseline_zf_precoders(h_hat: &CMat, norm: PowerNormalization) -> Result<PrecoderSet> {
    let empty = CMat::zeros(h_hat.nrows(), 0);
    compute_precoders(h_hat, &empty, 0, norm)
}
