//! Observables: per-UE SINR with full term accounting, Wi-Fi-received
//! interference, BS-sensed powers, Shannon rates with the receiver
//! sensitivity cutoff, airtime-shared Wi-Fi rates, and empirical CDFs.

use crate::channel::ChannelSet;
use crate::error::{Result, SimError};
use crate::lbt::{conventional_lbt, enhanced_lbt, LbtMode};
use crate::linalg::CMat;
use crate::spatial::PrecoderSet;
use num_complex::Complex64;
use serde::Serialize;

/// Term-by-term SINR decomposition at one UE (all terms in watts).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SinrTerms {
    pub signal_w: f64,
    pub intra_cell_w: f64,
    pub inter_cell_w: f64,
    pub wifi_w: f64,
    pub noise_w: f64,
}

impl SinrTerms {
    /// Linear SINR with the denominator floored to stay finite.
    pub fn sinr(&self) -> f64 {
        let den = self.intra_cell_w + self.inter_cell_w + self.wifi_w + self.noise_w;
        self.signal_w / den.max(1e-300)
    }

    pub fn total_received_w(&self) -> f64 {
        self.signal_w + self.intra_cell_w + self.inter_cell_w + self.wifi_w + self.noise_w
    }
}

/// Per-drop activity context for metric evaluation.
pub struct ActivitySets<'a> {
    /// Per sector: does the BS transmit this drop.
    pub active_bs: &'a [bool],
    /// Row indices (into `ChannelSet::tracked_wifi` order) of Wi-Fi devices
    /// transmitting during the BS downlink, with their transmit powers.
    pub active_wifi: &'a [(usize, f64)],
}

/// Downlink SINR of one scheduled UE, evaluated term by term from the same
/// channel instance used everywhere else in the drop.
///
/// `precoders[i]` are BS i's precoders; `scheduled[i]` maps precoder columns
/// onto global UE indices.
pub fn ue_sinr(
    channels: &ChannelSet,
    precoders: &[Option<PrecoderSet>],
    scheduled: &[Vec<usize>],
    activity: &ActivitySets,
    p_b: f64,
    noise_w: f64,
    ue: usize,
) -> SinrTerms {
    let mut serving: Option<(usize, usize)> = None;
    for (sector, list) in scheduled.iter().enumerate() {
        if let Some(col) = list.iter().position(|&u| u == ue) {
            serving = Some((sector, col));
            break;
        }
    }
    let (serving_sector, serving_col) =
        serving.expect("ue_sinr called for a UE that is not scheduled anywhere");

    let mut signal = 0.0;
    let mut intra = 0.0;
    let mut inter = 0.0;
    for (sector, ps) in precoders.iter().enumerate() {
        if !activity.active_bs[sector] {
            continue;
        }
        let Some(ps) = ps.as_ref() else { continue };
        let h_col = channels.h[sector].column(ue);
        for col in 0..ps.w.ncols() {
            let dot: Complex64 = h_col
                .iter()
                .zip(ps.w.column(col).iter())
                .map(|(h, w)| h.conj() * w)
                .sum();
            let p = p_b * dot.norm_sqr();
            if sector == serving_sector {
                if col == serving_col {
                    signal = p;
                } else {
                    intra += p;
                }
            } else {
                inter += p;
            }
        }
    }
    let mut wifi = 0.0;
    for &(row, power) in activity.active_wifi {
        wifi += power * channels.q[(row, ue)].norm_sqr();
    }
    SinrTerms {
        signal_w: signal,
        intra_cell_w: intra,
        inter_cell_w: inter,
        wifi_w: wifi,
        noise_w,
    }
}

/// Same SINR decomposition assembled from precomputed effective-channel
/// matrices E_i = H_i† W_i (row = UE, column = beam). This is the batched
/// route used by the drop pipeline; it must agree with [`ue_sinr`].
#[allow(clippy::too_many_arguments)]
pub fn sinr_terms_from_effective(
    effective: &[Option<CMat>],
    serving_sector: usize,
    serving_col: usize,
    q: &CMat,
    active_wifi: &[(usize, f64)],
    p_b: f64,
    noise_w: f64,
    ue: usize,
) -> SinrTerms {
    let mut signal = 0.0;
    let mut intra = 0.0;
    let mut inter = 0.0;
    for (sector, eff) in effective.iter().enumerate() {
        let Some(eff) = eff.as_ref() else { continue };
        for col in 0..eff.ncols() {
            let p = p_b * eff[(ue, col)].norm_sqr();
            if sector == serving_sector {
                if col == serving_col {
                    signal = p;
                } else {
                    intra += p;
                }
            } else {
                inter += p;
            }
        }
    }
    let mut wifi = 0.0;
    for &(row, power) in active_wifi {
        wifi += power * q[(row, ue)].norm_sqr();
    }
    SinrTerms { signal_w: signal, intra_cell_w: intra, inter_cell_w: inter, wifi_w: wifi, noise_w }
}

/// Aggregate downlink interference received at one Wi-Fi device:
/// I = P_b Σ_i Σ_k |g_iℓ† w_ik|², in expectation over unit-power symbols.
pub fn wifi_interference(
    channels: &ChannelSet,
    precoders: &[Option<PrecoderSet>],
    active_bs: &[bool],
    p_b: f64,
    device_row: usize,
) -> f64 {
    let mut total = 0.0;
    for (sector, ps) in precoders.iter().enumerate() {
        if !active_bs[sector] {
            continue;
        }
        let Some(ps) = ps.as_ref() else { continue };
        let g_col = channels.g[sector].column(device_row);
        for col in 0..ps.w.ncols() {
            let dot: Complex64 = g_col
                .iter()
                .zip(ps.w.column(col).iter())
                .map(|(g, w)| g.conj() * w)
                .sum();
            total += p_b * dot.norm_sqr();
        }
    }
    total
}

/// The sensed quantity behind the fig3 CSV curves: max over the window of total
/// (conventional) or subspace-filtered (enhanced) received power.
pub fn bs_sensed_power(z_samples: &CMat, u_hat: Option<&CMat>, d: usize, mode: LbtMode) -> f64 {
    match mode {
        LbtMode::Conventional => conventional_lbt(z_samples, f64::INFINITY).sensed_power_w,
        LbtMode::Enhanced => {
            let u = u_hat.expect("enhanced sensing requires the eigenbasis");
            enhanced_lbt(z_samples, u, d, f64::INFINITY).sensed_power_w
        }
    }
}

/// Shannon rate with the receiver-sensitivity cutoff.
pub fn cell_rate(sinr_linear: f64, bandwidth_hz: f64, rx_power_w: f64, sensitivity_w: f64) -> f64 {
    if rx_power_w < sensitivity_w {
        0.0
    } else {
        bandwidth_hz * (1.0 + sinr_linear).log2()
    }
}

/// Sector Wi-Fi rate: Σ over clusters of airtime share × per-cluster rate.
pub fn wifi_rate(cluster_airtime_shares: &[f64], per_cluster_rate_bps: f64) -> f64 {
    cluster_airtime_shares.iter().map(|s| s * per_cluster_rate_bps).sum()
}

/// Equal-share airtime model: the BS receives 1/(1+n) of the medium when it
/// shares with n Wi-Fi contenders.
pub fn lbt_airtime_split(n_contenders: usize) -> f64 {
    1.0 / (1.0 + n_contenders as f64)
}

/// Empirical CDF over finite samples.
#[derive(Debug, Clone, Serialize)]
pub struct CdfSeries {
    pub values: Vec<f64>,
    pub probabilities: Vec<f64>,
}

pub fn build_cdf(samples: &[f64]) -> Result<CdfSeries> {
    if samples.is_empty() {
        return Err(SimError::data("cannot build a CDF from zero samples"));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(SimError::data("non-finite sample in CDF input"));
    }
    let mut values = samples.to_vec();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len() as f64;
    let probabilities = (1..=values.len()).map(|i| i as f64 / n).collect();
    Ok(CdfSeries { values, probabilities })
}

impl CdfSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Fraction of samples strictly below `x`.
    pub fn fraction_below(&self, x: f64) -> f64 {
        let idx = self.values.partition_point(|&v| v < x);
        idx as f64 / self.values.len() as f64
    }

    /// Quantile by nearest-rank (p in [0, 1]).
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.values.len();
        let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
        self.values[rank - 1]
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }
}

/// Everything measured in one Monte-Carlo drop.
#[derive(Debug, Clone, Serialize)]
pub struct DropMetrics {
    /// Aggregate downlink interference at each contending Wi-Fi device (dBm).
    pub wifi_interference_dbm: Vec<f64>,
    /// Per-BS sensed powers (dBm); enhanced entries only under mMIMO-U.
    pub bs_sensed_conventional_dbm: Vec<f64>,
    pub bs_sensed_enhanced_dbm: Vec<f64>,
    /// Linear-domain SINR per scheduled UE, reported in dB.
    pub ue_sinr_db: Vec<f64>,
    pub sector_cell_rate_bps: Vec<f64>,
    pub sector_wifi_rate_bps: Vec<f64>,
    /// Conventional-LBT rates under the all-devices airtime case (empty for
    /// mMIMO-U drops).
    pub sector_cell_rate_case2_bps: Vec<f64>,
    pub sector_wifi_rate_case2_bps: Vec<f64>,
    /// LBT outcomes: BS grants and per-contending-device defer states.
    pub bs_granted: Vec<bool>,
    pub wifi_deferred: Vec<bool>,
    /// Quality flags.
    pub regularized_precoders: usize,
    pub resample_attempts: usize,
}
