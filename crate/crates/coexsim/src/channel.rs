//! Propagation model: 3GPP-style UMa and D2D path loss with LOS/NLOS states,
//! lognormal shadowing, the sectorized element pattern, distance-dependent
//! Ricean fading over a half-wavelength ULA with Jakes spatial correlation,
//! and the imperfect-CSI model.
//!
//! Every model constant lives in [`ChannelParams`] with Table-1-sourced
//! defaults so alternates can be swapped from the harness config.

use crate::error::{Result, SimError};
use crate::linalg::{bessel_j0, dgemm_new, CMat, CVec, RMat};
use crate::units::db_to_linear;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Line-of-sight state of a propagation link, drawn once per link per drop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LosState {
    Los,
    Nlos,
}

/// Propagation-model constants. Defaults follow the cited 3GPP models at the
/// Table-1 geometry (BS 25 m, devices 1.5 m, 5.15 GHz carrier).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub carrier_ghz: f64,
    pub bs_height_m: f64,
    pub device_height_m: f64,
    /// UMa NLOS environment constants.
    pub street_width_m: f64,
    pub building_height_m: f64,
    /// Lognormal shadowing standard deviations (dB).
    pub shadow_uma_los_db: f64,
    pub shadow_uma_nlos_db: f64,
    pub shadow_d2d_los_db: f64,
    pub shadow_d2d_nlos_db: f64,
    /// Ricean K factor model: K_dB = intercept − slope · d.
    pub ricean_k_intercept_db: f64,
    pub ricean_k_slope_db_per_m: f64,
    /// Element pattern (sectorized urban-macro shape).
    pub pattern_max_gain_dbi: f64,
    pub pattern_az_3db_deg: f64,
    pub pattern_az_max_att_db: f64,
    pub pattern_el_3db_deg: f64,
    pub pattern_el_max_att_db: f64,
    pub downtilt_deg: f64,
    /// CSI error power fraction τ².
    pub tau2: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            carrier_ghz: 5.15,
            bs_height_m: 25.0,
            device_height_m: 1.5,
            street_width_m: 20.0,
            building_height_m: 20.0,
            shadow_uma_los_db: 4.0,
            shadow_uma_nlos_db: 6.0,
            shadow_d2d_los_db: 3.0,
            shadow_d2d_nlos_db: 7.0,
            ricean_k_intercept_db: 13.0,
            ricean_k_slope_db_per_m: 0.03,
            pattern_max_gain_dbi: 6.0,
            pattern_az_3db_deg: 70.0,
            pattern_az_max_att_db: 25.0,
            pattern_el_3db_deg: 10.0,
            pattern_el_max_att_db: 20.0,
            downtilt_deg: 12.0,
            tau2: 0.1,
        }
    }
}

fn warn_distance_clamp_once() {
    use std::sync::Once;
    static ONCE: Once = Once::new();
    ONCE.call_once(|| {
        eprintln!("warning: path-loss distance below 10 m clamped to model validity range");
    });
}

/// LOS probability of the macro (BS-to-ground-device) model.
pub fn los_probability_uma(d_m: f64) -> f64 {
    let d = d_m.max(1e-9);
    (18.0 / d).min(1.0) * (1.0 - (-d / 63.0).exp()) + (-d / 63.0).exp()
}

/// LOS probability of the device-to-device model.
pub fn los_probability_d2d(d_m: f64) -> f64 {
    let d = d_m.max(1e-9);
    (18.0 / d).min(1.0) * (1.0 - (-d / 36.0).exp()) + (-d / 36.0).exp()
}

/// Urban-macro path loss in dB (BS to ground device).
pub fn pathloss_uma(d_m: f64, f_ghz: f64, los: LosState, p: &ChannelParams) -> f64 {
    let d = if d_m < 10.0 {
        warn_distance_clamp_once();
        10.0
    } else {
        d_m
    };
    match los {
        LosState::Los => {
            let hb = p.bs_height_m - 1.0;
            let hu = p.device_height_m - 1.0;
            let d_bp = 4.0 * hb * hu * f_ghz * 1e9 / SPEED_OF_LIGHT;
            if d < d_bp {
                22.0 * d.log10() + 28.0 + 20.0 * f_ghz.log10()
            } else {
                40.0 * d.log10() + 7.8 - 18.0 * hb.log10() - 18.0 * hu.log10()
                    + 2.0 * f_ghz.log10()
            }
        }
        LosState::Nlos => {
            let w = p.street_width_m;
            let h = p.building_height_m;
            let hb = p.bs_height_m;
            let hu = p.device_height_m;
            161.04 - 7.1 * w.log10() + 7.5 * h.log10()
                - (24.37 - 3.7 * (h / hb).powi(2)) * hb.log10()
                + (43.42 - 3.1 * hb.log10()) * (d.log10() - 3.0)
                + 20.0 * f_ghz.log10()
                - (3.2 * (11.75 * hu).log10().powi(2) - 4.97)
        }
    }
}

/// Device-to-device path loss in dB (both ends at device height).
pub fn pathloss_d2d(d_m: f64, f_ghz: f64, los: LosState, p: &ChannelParams) -> f64 {
    let d = if d_m < 10.0 {
        warn_distance_clamp_once();
        10.0
    } else {
        d_m
    };
    match los {
        LosState::Los => {
            let h = p.device_height_m - 1.0;
            let d_bp = 4.0 * h * h * f_ghz * 1e9 / SPEED_OF_LIGHT;
            if d < d_bp {
                22.0 * d.log10() + 28.0 + 20.0 * f_ghz.log10()
            } else {
                40.0 * d.log10() + 7.8 - 36.0 * h.log10() + 2.0 * f_ghz.log10()
            }
        }
        LosState::Nlos => 36.7 * d.log10() + 22.7 + 26.0 * f_ghz.log10(),
    }
}

/// Sectorized element gain in dBi for a direction in the sector-local frame.
/// Downtilt rotates the vertical pattern, not the steering phase reference.
pub fn element_pattern(azimuth_rad: f64, elevation_rad: f64, p: &ChannelParams) -> f64 {
    let az = azimuth_rad.to_degrees();
    let el = elevation_rad.to_degrees();
    let att_h = (12.0 * (az / p.pattern_az_3db_deg).powi(2)).min(p.pattern_az_max_att_db);
    // boresight points `downtilt` degrees below the horizon
    let att_v = (12.0 * ((el + p.downtilt_deg) / p.pattern_el_3db_deg).powi(2))
        .min(p.pattern_el_max_att_db);
    p.pattern_max_gain_dbi - (att_h + att_v).min(p.pattern_az_max_att_db)
}

/// Distance-dependent Ricean K factor (linear ratio).
pub fn ricean_k_factor(d_m: f64, p: &ChannelParams) -> f64 {
    db_to_linear(p.ricean_k_intercept_db - p.ricean_k_slope_db_per_m * d_m)
}

/// Per-link large-scale budget.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LinkBudget {
    pub path_loss_db: f64,
    pub shadowing_db: f64,
    pub antenna_gain_db: f64,
    pub distance_m: f64,
    pub los: LosState,
}

impl LinkBudget {
    pub fn mean_gain_db(&self) -> f64 {
        self.antenna_gain_db - self.path_loss_db + self.shadowing_db
    }

    /// Mean channel-entry power (linear).
    pub fn mean_gain_linear(&self) -> f64 {
        db_to_linear(self.mean_gain_db())
    }
}

/// Direction of a link in the serving array's local frame.
#[derive(Debug, Clone, Copy)]
pub struct LinkGeometry {
    pub azimuth_rad: f64,
    pub elevation_rad: f64,
    pub distance_3d_m: f64,
}

/// Geometry of a BS→point link: wrap displacement resolved by the caller.
pub fn link_geometry(
    displacement: crate::topology::Point,
    sector_azimuth_rad: f64,
    p: &ChannelParams,
) -> LinkGeometry {
    let ground = displacement.norm();
    let dh = p.device_height_m - p.bs_height_m;
    let az = displacement.y.atan2(displacement.x) - sector_azimuth_rad;
    let az = az.sin().atan2(az.cos()); // wrap to (−π, π]
    LinkGeometry {
        azimuth_rad: az,
        elevation_rad: dh.atan2(ground),
        distance_3d_m: (ground * ground + dh * dh).sqrt(),
    }
}

/// Draw the LOS state and shadowing of a BS→device link and assemble its
/// budget. RNG order: LOS uniform, then shadowing normal.
pub fn draw_bs_link<R: Rng>(geom: &LinkGeometry, p: &ChannelParams, rng: &mut R) -> LinkBudget {
    let plos = los_probability_uma(geom.distance_3d_m);
    let los = if rng.random::<f64>() < plos { LosState::Los } else { LosState::Nlos };
    let sigma = match los {
        LosState::Los => p.shadow_uma_los_db,
        LosState::Nlos => p.shadow_uma_nlos_db,
    };
    let shadow: f64 = sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
    LinkBudget {
        path_loss_db: pathloss_uma(geom.distance_3d_m, p.carrier_ghz, los, p),
        shadowing_db: shadow,
        antenna_gain_db: element_pattern(geom.azimuth_rad, geom.elevation_rad, p),
        distance_m: geom.distance_3d_m,
        los,
    }
}

/// Same for a device→device link (omnidirectional ends).
pub fn draw_d2d_link<R: Rng>(distance_m: f64, p: &ChannelParams, rng: &mut R) -> LinkBudget {
    let d = distance_m.max(1.0);
    let plos = los_probability_d2d(d);
    let los = if rng.random::<f64>() < plos { LosState::Los } else { LosState::Nlos };
    let sigma = match los {
        LosState::Los => p.shadow_d2d_los_db,
        LosState::Nlos => p.shadow_d2d_nlos_db,
    };
    let shadow: f64 = sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
    LinkBudget {
        path_loss_db: pathloss_d2d(d, p.carrier_ghz, los, p),
        shadowing_db: shadow,
        antenna_gain_db: 0.0,
        distance_m: d,
        los,
    }
}

/// Spatial correlation of the ULA snapshot: Toeplitz J₀(2π·Δd/λ) kernel at
/// half-wavelength spacing, factored once per antenna count.
#[derive(Debug, Clone)]
pub struct JakesCorrelation {
    n: usize,
    chol: RMat,
}

impl JakesCorrelation {
    pub fn new(n: usize) -> Self {
        let r = Self::correlation_matrix(n);
        // tiny diagonal jitter: the bandlimited kernel is near-singular
        let mut jitter = 1e-9;
        loop {
            let mut rj = r.clone();
            for i in 0..n {
                rj[(i, i)] += jitter;
            }
            if let Some(ch) = rj.cholesky() {
                return JakesCorrelation { n, chol: ch.unpack() };
            }
            jitter *= 10.0;
            assert!(jitter < 1e-3, "Jakes correlation matrix not factorable");
        }
    }

    pub fn correlation_matrix(n: usize) -> RMat {
        RMat::from_fn(n, n, |i, j| bessel_j0(PI * (i as f64 - j as f64).abs()))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn factor(&self) -> &RMat {
        &self.chol
    }
}

/// Unit-modulus ULA steering vector at half-wavelength spacing.
pub fn steering_vector(azimuth_rad: f64, elevation_rad: f64, n: usize) -> CVec {
    let phase = PI * azimuth_rad.sin() * elevation_rad.cos();
    CVec::from_fn(n, |k, _| Complex64::from_polar(1.0, phase * k as f64))
}

fn scaled_column(
    link: &LinkBudget,
    geom: &LinkGeometry,
    k_factor: f64,
    phase: f64,
    w_corr_re: &[f64],
    w_corr_im: &[f64],
    out: &mut [Complex64],
) {
    let n = out.len();
    let amp = link.mean_gain_linear().sqrt();
    let los_w = (k_factor / (k_factor + 1.0)).sqrt();
    let diff_w = (1.0 / (k_factor + 1.0)).sqrt();
    let steer_phase = PI * geom.azimuth_rad.sin() * geom.elevation_rad.cos();
    for k in 0..n {
        let steer = Complex64::from_polar(1.0, phase + steer_phase * k as f64);
        let diff = Complex64::new(w_corr_re[k], w_corr_im[k]);
        out[k] = amp * (los_w * steer + diff_w * diff);
    }
}

/// Draw one Ricean channel vector over the correlated ULA.
///
/// RNG order per link: n pairs of N(0, 1/2) for the diffuse component, then
/// one uniform LOS phase, identical to the batched path.
pub fn draw_channel_vector<R: Rng>(
    link: &LinkBudget,
    geom: &LinkGeometry,
    k_factor: f64,
    n: usize,
    jakes: &JakesCorrelation,
    rng: &mut R,
) -> CVec {
    assert!(n >= 1 && jakes.n() == n);
    let half = 0.5f64.sqrt();
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];
    for k in 0..n {
        wr[k] = half * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
        wi[k] = half * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
    }
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    // lower-triangular apply
    let l = jakes.factor();
    let mut cr = vec![0.0; n];
    let mut ci = vec![0.0; n];
    for row in 0..n {
        let mut sr = 0.0;
        let mut si = 0.0;
        for col in 0..=row {
            let lv = l[(row, col)];
            sr += lv * wr[col];
            si += lv * wi[col];
        }
        cr[row] = sr;
        ci[row] = si;
    }
    let mut out = CVec::zeros(n);
    scaled_column(link, geom, k_factor, phase, &cr, &ci, out.as_mut_slice());
    out
}

/// Batched channel draw: one column per link, correlated via two real GEMMs.
/// Consumes the random stream exactly as sequential [`draw_channel_vector`]
/// calls would.
pub fn draw_channel_matrix<R: Rng>(
    links: &[(LinkBudget, LinkGeometry, f64)],
    n: usize,
    jakes: &JakesCorrelation,
    rng: &mut R,
) -> CMat {
    let v = links.len();
    let mut wr = RMat::zeros(n, v);
    let mut wi = RMat::zeros(n, v);
    let mut phases = vec![0.0; v];
    let half = 0.5f64.sqrt();
    for c in 0..v {
        for r in 0..n {
            wr[(r, c)] = half * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
            wi[(r, c)] = half * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
        }
        phases[c] = rng.random_range(0.0..std::f64::consts::TAU);
    }
    let cr = dgemm_new(jakes.factor(), &wr);
    let ci = dgemm_new(jakes.factor(), &wi);
    let mut out = CMat::zeros(n, v);
    for c in 0..v {
        let (link, geom, kf) = &links[c];
        let re_col: Vec<f64> = (0..n).map(|r| cr[(r, c)]).collect();
        let im_col: Vec<f64> = (0..n).map(|r| ci[(r, c)]).collect();
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        scaled_column(link, geom, *kf, phases[c], &re_col, &im_col, &mut col);
        for r in 0..n {
            out[(r, c)] = col[r];
        }
    }
    out
}

/// Draw a scalar Ricean device→device channel coefficient.
pub fn draw_scalar_channel<R: Rng>(link: &LinkBudget, k_factor: f64, rng: &mut R) -> Complex64 {
    let half = 0.5f64.sqrt();
    let re = half * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
    let im = half * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let amp = link.mean_gain_linear().sqrt();
    let los_w = (k_factor / (k_factor + 1.0)).sqrt();
    let diff_w = (1.0 / (k_factor + 1.0)).sqrt();
    amp * (los_w * Complex64::from_polar(1.0, phase) + diff_w * Complex64::new(re, im))
}

/// Imperfect CSI: ĥ = √(1−τ²)·h + τ·σ_h·e with e ~ CN(0, I) and σ_h the
/// vector's RMS entry amplitude, the physical rendering of the normalized
/// CSI-error model. τ² = 0 returns the input bit-exactly.
pub fn corrupt_csi<R: Rng>(h: &CVec, tau2: f64, rng: &mut R) -> Result<CVec> {
    if !(0.0..=1.0).contains(&tau2) {
        return Err(SimError::config(format!("tau2 = {tau2} outside [0, 1]")));
    }
    if tau2 == 0.0 {
        return Ok(h.clone());
    }
    let n = h.len();
    let entry_rms = (h.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64).sqrt();
    let half = 0.5f64.sqrt();
    let keep = (1.0 - tau2).sqrt();
    let err = tau2.sqrt() * entry_rms;
    let mut out = CVec::zeros(n);
    for k in 0..n {
        let e = Complex64::new(
            half * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng),
            half * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng),
        );
        out[k] = keep * h[k] + err * e;
    }
    Ok(out)
}

/// Deterministic association metric: LOS-probability-blended path loss plus
/// element gain, no shadowing or fast fading.
pub fn mean_sector_gain_db(
    grid: &crate::topology::SiteGrid,
    sector: usize,
    pos: crate::topology::Point,
    p: &ChannelParams,
) -> f64 {
    let site = grid.sector_site(sector);
    let disp = grid.wrap_displacement(grid.site_positions[site], pos);
    let geom = link_geometry(disp, grid.sector_azimuth_rad(sector), p);
    let plos = los_probability_uma(geom.distance_3d_m);
    let pl = plos * pathloss_uma(geom.distance_3d_m, p.carrier_ghz, LosState::Los, p)
        + (1.0 - plos) * pathloss_uma(geom.distance_3d_m, p.carrier_ghz, LosState::Nlos, p);
    element_pattern(geom.azimuth_rad, geom.elevation_rad, p) - pl
}

/// All propagation coefficients of one drop, stored per BS so sensing and
/// transmit directions reuse the same instance (channel reciprocity within
/// the coherence block).
pub struct ChannelSet {
    pub n_antennas: usize,
    /// Per BS: N × n_ues, column u = channel to UE u.
    pub h: Vec<CMat>,
    /// Per BS: N × n_tracked, column j = channel to tracked Wi-Fi device j.
    pub g: Vec<CMat>,
    /// Tracked Wi-Fi device indices (the per-cluster active sets), aligned
    /// with `g` columns and `q` rows.
    pub tracked_wifi: Vec<usize>,
    /// Wi-Fi→UE scalars: n_tracked × n_ues.
    pub q: CMat,
    /// Per BS: N × K_i noisy CSI of its scheduled UEs.
    pub h_hat: Vec<CMat>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p() -> ChannelParams {
        ChannelParams::default()
    }

    #[test]
    fn uma_pathloss_frozen_values() {
        // oracle: independent closed-form arithmetic
        assert!((pathloss_uma(250.0, 5.15, LosState::Los, &p()) - 94.990825).abs() < 1e-5);
        assert!((pathloss_uma(250.0, 5.15, LosState::Nlos, &p()) - 121.507650).abs() < 1e-5);
        assert!((pathloss_uma(1000.0, 5.15, LosState::Los, &p()) - 109.798352).abs() < 1e-5);
    }

    #[test]
    fn uma_pathloss_monotone_and_frequency_ordering() {
        for los in [LosState::Los, LosState::Nlos] {
            let mut prev = f64::NEG_INFINITY;
            for d in (10..5000).step_by(7) {
                let pl = pathloss_uma(d as f64, 5.15, los, &p());
                assert!(pl.is_finite());
                assert!(pl >= prev - 1e-12, "PL not monotone at d={d}");
                prev = pl;
            }
        }
        assert!(
            pathloss_uma(100.0, 5.15, LosState::Los, &p())
                < pathloss_uma(500.0, 5.15, LosState::Los, &p())
        );
        assert!(
            pathloss_uma(250.0, 5.15, LosState::Los, &p())
                > pathloss_uma(250.0, 2.0, LosState::Los, &p())
        );
        // LOS branch continuity at the breakpoint
        let d_bp = 4.0 * 24.0 * 0.5 * 5.15e9 / SPEED_OF_LIGHT;
        let lo = pathloss_uma(d_bp - 1e-6, 5.15, LosState::Los, &p());
        let hi = pathloss_uma(d_bp + 1e-6, 5.15, LosState::Los, &p());
        assert!((lo - hi).abs() < 0.5, "UMa breakpoint gap {} dB", (lo - hi).abs());
    }

    #[test]
    fn uma_below_validity_clamps() {
        let a = pathloss_uma(3.0, 5.15, LosState::Los, &p());
        let b = pathloss_uma(10.0, 5.15, LosState::Los, &p());
        assert_eq!(a, b);
    }

    #[test]
    fn d2d_pathloss_properties() {
        assert!(
            pathloss_d2d(60.0, 5.15, LosState::Nlos, &p())
                < pathloss_d2d(150.0, 5.15, LosState::Nlos, &p())
        );
        // breakpoint continuity: both LOS branches at d_bp within 0.5 dB
        let h: f64 = 0.5;
        let d_bp = 4.0 * h * h * 5.15e9 / SPEED_OF_LIGHT;
        let lo = 22.0 * d_bp.log10() + 28.0 + 20.0 * 5.15f64.log10();
        let hi = 40.0 * d_bp.log10() + 7.8 - 36.0 * h.log10() + 2.0 * 5.15f64.log10();
        assert!((lo - hi).abs() < 0.5, "breakpoint gap {} dB", (lo - hi).abs());
        // devices at 1.5 m suffer more loss than the macro link at 50 m, per branch
        assert!(
            pathloss_d2d(50.0, 5.15, LosState::Los, &p())
                > pathloss_uma(50.0, 5.15, LosState::Los, &p())
        );
        assert!(
            pathloss_d2d(50.0, 5.15, LosState::Nlos, &p())
                > pathloss_uma(50.0, 5.15, LosState::Nlos, &p())
        );
        // frozen oracle values
        assert!((pathloss_d2d(50.0, 5.15, LosState::Los, &p()) - 88.019494).abs() < 1e-5);
        assert!((pathloss_d2d(50.0, 5.15, LosState::Nlos, &p()) - 103.559187).abs() < 1e-5);
    }

    #[test]
    fn element_pattern_shape() {
        let par = p();
        let tilt = -par.downtilt_deg.to_radians();
        // boresight at downtilt elevation → max gain
        assert!((element_pattern(0.0, tilt, &par) - 6.0).abs() < 1e-12);
        // azimuth symmetry
        for az_deg in [10.0f64, 35.0, 60.0, 120.0] {
            let a = element_pattern(az_deg.to_radians(), tilt, &par);
            let b = element_pattern(-az_deg.to_radians(), tilt, &par);
            assert!((a - b).abs() < 1e-12);
        }
        // 3 dB at the half-beamwidth edge (az = 35°)
        let edge = element_pattern((35.0f64).to_radians(), tilt, &par);
        assert!((6.0 - edge - 3.0).abs() < 0.01);
        // never above the max element gain
        for az in -18..=18 {
            for el in -9..=9 {
                let g = element_pattern((az as f64 * 10.0).to_radians(), (el as f64 * 10.0).to_radians(), &par);
                assert!(g <= 6.0 + 1e-12);
            }
        }
    }

    #[test]
    fn ricean_k_model() {
        let par = p();
        assert!((ricean_k_factor(30.0, &par) - db_to_linear(12.1)).abs() < 1e-9);
        let mut prev = f64::INFINITY;
        for d in (1..2000).step_by(13) {
            let k = ricean_k_factor(d as f64, &par);
            assert!(k >= 0.0 && k <= prev);
            prev = k;
        }
        assert!(ricean_k_factor(5000.0, &par) < 1e-10); // Rayleigh limit
    }

    #[test]
    fn steering_vector_basics() {
        let a = steering_vector(0.0, 0.0, 6);
        for z in a.iter() {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
        let b = steering_vector(0.4, -0.2, 16);
        for z in b.iter() {
            assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }

    fn test_link(ml_db: f64, d: f64) -> (LinkBudget, LinkGeometry) {
        (
            LinkBudget {
                path_loss_db: -ml_db,
                shadowing_db: 0.0,
                antenna_gain_db: 0.0,
                distance_m: d,
                los: LosState::Los,
            },
            LinkGeometry { azimuth_rad: 0.35, elevation_rad: -0.1, distance_3d_m: d },
        )
    }

    #[test]
    fn pure_los_limit_has_equal_moduli() {
        let (link, geom) = test_link(-80.0, 100.0);
        let jakes = JakesCorrelation::new(8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = draw_channel_vector(&link, &geom, 1e12, 8, &jakes, &mut rng);
        let m0 = v[0].norm();
        for z in v.iter() {
            assert!((z.norm() - m0).abs() < 1e-5 * m0);
        }
    }

    #[test]
    fn mean_vector_power_matches_budget() {
        let (link, geom) = test_link(-87.0, 120.0);
        let jakes = JakesCorrelation::new(8);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let k = ricean_k_factor(120.0, &p());
        let draws = 10_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let v = draw_channel_vector(&link, &geom, k, 8, &jakes, &mut rng);
            acc += v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        let mean = acc / draws as f64;
        let expect = 8.0 * link.mean_gain_linear();
        assert!(
            (mean - expect).abs() < 0.01 * expect,
            "mean power {mean} vs expected {expect}"
        );
    }

    #[test]
    fn sample_covariance_matches_jakes_target() {
        // Rayleigh case (K = 0): target covariance is exactly the Jakes kernel
        let n = 4;
        let (link, geom) = test_link(0.0, 50.0);
        let jakes = JakesCorrelation::new(n);
        let target = JakesCorrelation::correlation_matrix(n);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = 100_000;
        let mut cov = CMat::zeros(n, n);
        for _ in 0..draws {
            let v = draw_channel_vector(&link, &geom, 0.0, n, &jakes, &mut rng);
            for i in 0..n {
                for j in 0..n {
                    cov[(i, j)] += v[i] * v[j].conj();
                }
            }
        }
        cov /= Complex64::new(draws as f64, 0.0);
        let mut err = 0.0;
        let mut nrm = 0.0;
        for i in 0..n {
            for j in 0..n {
                let t = Complex64::new(target[(i, j)], 0.0);
                err += (cov[(i, j)] - t).norm_sqr();
                nrm += t.norm_sqr();
            }
        }
        assert!(
            (err / nrm).sqrt() < 0.02,
            "covariance Frobenius error {}",
            (err / nrm).sqrt()
        );
    }

    #[test]
    fn batched_draw_equals_sequential_vectors() {
        let jakes = JakesCorrelation::new(12);
        let links: Vec<_> = (0..5)
            .map(|i| {
                let (l, g) = test_link(-80.0 - i as f64, 100.0 + 10.0 * i as f64);
                (l, g, 4.0 + i as f64)
            })
            .collect();
        let mut rng_a = ChaCha8Rng::seed_from_u64(9);
        let batch = draw_channel_matrix(&links, 12, &jakes, &mut rng_a);
        let mut rng_b = ChaCha8Rng::seed_from_u64(9);
        for (c, (l, g, k)) in links.iter().enumerate() {
            let v = draw_channel_vector(l, g, *k, 12, &jakes, &mut rng_b);
            for r in 0..12 {
                assert!(
                    (batch[(r, c)] - v[r]).norm() < 1e-12 * v[r].norm().max(1e-12),
                    "batch/sequential mismatch at ({r},{c})"
                );
            }
        }
    }

    #[test]
    fn corrupt_csi_zero_error_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = CVec::from_fn(6, |i, _| Complex64::new(i as f64 * 1e-5, -1e-5));
        let out = corrupt_csi(&h, 0.0, &mut rng).unwrap();
        for (a, b) in h.iter().zip(out.iter()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn corrupt_csi_full_error_decorrelates() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = CVec::from_fn(4, |i, _| Complex64::new(1e-4 * (i as f64 + 1.0), 5e-5));
        let draws = 20_000;
        let mut corr = Complex64::new(0.0, 0.0);
        let mut pow_h = 0.0;
        let mut pow_e = 0.0;
        for _ in 0..draws {
            let out = corrupt_csi(&h, 1.0, &mut rng).unwrap();
            for k in 0..4 {
                corr += out[k] * h[k].conj();
                pow_h += h[k].norm_sqr();
                pow_e += out[k].norm_sqr();
            }
        }
        let rho = corr.norm() / (pow_h.sqrt() * pow_e.sqrt());
        assert!(rho < 0.02, "correlation {rho} should vanish at tau2=1");
    }

    #[test]
    fn corrupt_csi_relative_error_at_default_tau() {
        // model: E‖ĥ−h‖²/‖h‖² = (1−√(1−τ²))² + τ² ≈ 0.102633 at τ² = 0.1
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = CVec::from_fn(8, |i, _| Complex64::new(2e-5 * ((i % 3) as f64 + 0.5), -1e-5));
        let hn = h.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let draws = 10_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let out = corrupt_csi(&h, 0.1, &mut rng).unwrap();
            acc += (0..8).map(|k| (out[k] - h[k]).norm_sqr()).sum::<f64>();
        }
        let rel = acc / draws as f64 / hn;
        let expect = (1.0 - 0.9f64.sqrt()).powi(2) + 0.1;
        assert!((rel - expect).abs() < 0.05 * expect, "relative error {rel} vs {expect}");
    }

    #[test]
    fn corrupt_csi_rejects_bad_tau() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = CVec::zeros(3);
        assert!(corrupt_csi(&h, -0.1, &mut rng).is_err());
        assert!(corrupt_csi(&h, 1.5, &mut rng).is_err());
    }

    #[test]
    fn shadowing_std_matches_sigma() {
        let mut par = p();
        par.shadow_uma_los_db = 6.0;
        par.shadow_uma_nlos_db = 6.0;
        let geom = LinkGeometry { azimuth_rad: 0.0, elevation_rad: -0.1, distance_3d_m: 200.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let draws = 10_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..draws {
            let l = draw_bs_link(&geom, &par, &mut rng);
            sum += l.shadowing_db;
            sum2 += l.shadowing_db * l.shadowing_db;
        }
        let var = sum2 / draws as f64 - (sum / draws as f64).powi(2);
        let std = var.sqrt();
        assert!((std - 6.0).abs() < 0.05 * 6.0, "shadowing std {std}");
    }
}
