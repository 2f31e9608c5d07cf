//! Channel-access decisions: conventional energy-detection LBT at the BS,
//! the subspace-filtered enhanced LBT, and the Wi-Fi defer rule.

use crate::linalg::{zgemm_new, CMat, Op};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LbtMode {
    Conventional,
    Enhanced,
}

/// Outcome of one listen-before-talk evaluation over a sensing window.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LbtDecision {
    pub granted: bool,
    /// The quantity compared against the threshold: max over the window of
    /// the (possibly subspace-filtered) received power.
    pub sensed_power_w: f64,
    pub threshold_w: f64,
    pub mode: LbtMode,
}

/// Conventional LBT: grant iff ‖z[m]‖² < γ_LBT for every sample of the
/// designated window.
pub fn conventional_lbt(z_samples: &CMat, gamma_lbt: f64) -> LbtDecision {
    assert!(z_samples.ncols() >= 1, "need at least one sensing sample");
    let mut max_p = 0.0f64;
    for m in 0..z_samples.ncols() {
        let p: f64 = z_samples.column(m).iter().map(|z| z.norm_sqr()).sum();
        max_p = max_p.max(p);
    }
    LbtDecision {
        granted: max_p < gamma_lbt,
        sensed_power_w: max_p,
        threshold_w: gamma_lbt,
        mode: LbtMode::Conventional,
    }
}

/// Enhanced LBT: the received signal is filtered through the non-nulled
/// eigendirections; grant iff Σ_{n>D} |û_n† z[m]|² < γ_LBT for every sample.
pub fn enhanced_lbt(z_samples: &CMat, u_hat: &CMat, d: usize, gamma_lbt: f64) -> LbtDecision {
    let n = u_hat.nrows();
    assert!(d <= n, "cannot null more dimensions than antennas");
    assert_eq!(z_samples.nrows(), n);
    let m = z_samples.ncols();
    assert!(m >= 1);
    let mut max_p = 0.0f64;
    if d < n {
        let tail = u_hat.columns(d, n - d).into_owned();
        let filtered = zgemm_new(&tail, Op::ConjTrans, z_samples, Op::NoTrans);
        for col in 0..m {
            let p: f64 = filtered.column(col).iter().map(|z| z.norm_sqr()).sum();
            max_p = max_p.max(p);
        }
    }
    LbtDecision {
        granted: max_p < gamma_lbt,
        sensed_power_w: max_p,
        threshold_w: gamma_lbt,
        mode: LbtMode::Enhanced,
    }
}

/// Wi-Fi defer rule: the device deems the channel occupied when the total
/// received power reaches the threshold.
pub fn wifi_defer(interference_w: f64, gamma_lbt: f64) -> bool {
    debug_assert!(interference_w >= 0.0);
    interference_w >= gamma_lbt
}
