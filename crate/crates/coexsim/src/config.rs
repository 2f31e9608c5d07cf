//! Harness configuration: TOML ingestion with Table-1 defaults, validation,
//! and a deterministic content hash for the run manifest.

use crate::channel::ChannelParams;
use crate::error::{Result, SimError};
use crate::spatial::PowerNormalization;
use crate::topology::DropParams;
use crate::units::dbm_to_watt;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    MmimoU,
    ConventionalLbt,
    Both,
}

impl Scheme {
    /// Concrete schemes a run expands to.
    pub fn expand(self) -> Vec<SchemeKind> {
        match self {
            Scheme::MmimoU => vec![SchemeKind::MmimoU],
            Scheme::ConventionalLbt => vec![SchemeKind::ConventionalLbt],
            Scheme::Both => vec![SchemeKind::MmimoU, SchemeKind::ConventionalLbt],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    MmimoU,
    ConventionalLbt,
}

impl SchemeKind {
    pub fn label(self) -> &'static str {
        match self {
            SchemeKind::MmimoU => "mmimo-u",
            SchemeKind::ConventionalLbt => "conventional-lbt",
        }
    }
}

/// Spatial-processing knobs (d.o.f. allocation, sensing window, precoding).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpatialConfig {
    /// "fixed-k" (D = ⌊c1(N−K)⌋) or "threshold" (D = |{λ̂ > γ}|, K = ⌊c2(N−D)⌋).
    pub criterion: DofCriterion,
    pub c1: f64,
    pub c2: f64,
    /// Eigenvalue threshold γ for the threshold criterion (dBm).
    pub gamma_threshold_dbm: f64,
    /// Covariance/sensing window length M.
    pub samples_m: usize,
    pub power_normalization: PowerNormalization,
    /// BS-side sensing noise σ²_η (dBm over the band).
    pub bs_sensing_noise_dbm: f64,
    /// Cap on scheduled UEs per sector (clamped to N at run time).
    pub max_scheduled_ues: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DofCriterion {
    FixedK,
    Threshold,
}

impl Default for SpatialConfig {
    fn default() -> Self {
        SpatialConfig {
            criterion: DofCriterion::FixedK,
            c1: 0.5,
            c2: 0.5,
            gamma_threshold_dbm: -90.0,
            samples_m: 200,
            power_normalization: PowerNormalization::PerBeam,
            bs_sensing_noise_dbm: -120.0,
            max_scheduled_ues: usize::MAX,
        }
    }
}

/// Transmit powers and LBT threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    pub bs_tx_dbm: f64,
    pub ap_tx_dbm: f64,
    pub sta_tx_dbm: f64,
    pub gamma_lbt_dbm: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig { bs_tx_dbm: 30.0, ap_tx_dbm: 24.0, sta_tx_dbm: 18.0, gamma_lbt_dbm: -62.0 }
    }
}

/// Rate-model constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateConfig {
    pub bandwidth_hz: f64,
    pub wifi_cluster_rate_bps: f64,
    pub thermal_noise_dbm_hz: f64,
    pub ue_noise_figure_db: f64,
    pub ue_sensitivity_dbm: f64,
}

impl Default for RateConfig {
    fn default() -> Self {
        RateConfig {
            bandwidth_hz: 20e6,
            wifi_cluster_rate_bps: 65e6,
            thermal_noise_dbm_hz: -174.0,
            ue_noise_figure_db: 9.0,
            ue_sensitivity_dbm: -94.0,
        }
    }
}

/// Grid geometry.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub inter_site_distance_m: f64,
    pub rings: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { inter_site_distance_m: 500.0, rings: 2 }
    }
}

/// Full simulation configuration. An empty file yields Table-1 defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub scheme: Scheme,
    /// Antenna counts swept per run.
    pub antennas: Vec<usize>,
    pub drops: usize,
    pub seed: u64,
    /// Worker threads (0 = one per core).
    pub workers: usize,
    pub output_dir: String,
    /// Cap on whole-drop regeneration attempts after placement exhaustion.
    pub drop_retry_cap: usize,
    pub grid: GridConfig,
    pub topology: DropParams,
    pub channel: ChannelParams,
    pub radio: RadioConfig,
    pub spatial: SpatialConfig,
    pub rates: RateConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            scheme: Scheme::Both,
            antennas: vec![64],
            drops: 1000,
            seed: 42,
            workers: 0,
            output_dir: "results".to_string(),
            drop_retry_cap: 64,
            grid: GridConfig::default(),
            topology: DropParams::default(),
            channel: ChannelParams::default(),
            radio: RadioConfig::default(),
            spatial: SpatialConfig::default(),
            rates: RateConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn ue_noise_w(&self) -> f64 {
        crate::units::thermal_noise_watt(
            self.rates.thermal_noise_dbm_hz,
            self.rates.bandwidth_hz,
            self.rates.ue_noise_figure_db,
        )
    }

    pub fn gamma_lbt_w(&self) -> f64 {
        dbm_to_watt(self.radio.gamma_lbt_dbm)
    }

    pub fn validate(&self) -> Result<()> {
        if self.antennas.is_empty() {
            return Err(SimError::config("antennas sweep must be nonempty"));
        }
        for &n in &self.antennas {
            if n == 0 || n > 1024 {
                return Err(SimError::config(format!("antenna count {n} outside 1..=1024")));
            }
        }
        if self.drops == 0 {
            return Err(SimError::config("drops must be ≥ 1"));
        }
        if !(0.0..1.0).contains(&self.spatial.c1) || self.spatial.c1 <= 0.0 {
            return Err(SimError::config(format!("c1 = {} outside (0, 1)", self.spatial.c1)));
        }
        if !(0.0..1.0).contains(&self.spatial.c2) || self.spatial.c2 <= 0.0 {
            return Err(SimError::config(format!("c2 = {} outside (0, 1)", self.spatial.c2)));
        }
        if self.spatial.samples_m == 0 {
            return Err(SimError::config("sensing window samples_m must be ≥ 1"));
        }
        if !(0.0..=1.0).contains(&self.channel.tau2) {
            return Err(SimError::config(format!("tau2 = {} outside [0, 1]", self.channel.tau2)));
        }
        for (name, v) in [
            ("bs_tx_dbm", self.radio.bs_tx_dbm),
            ("ap_tx_dbm", self.radio.ap_tx_dbm),
            ("sta_tx_dbm", self.radio.sta_tx_dbm),
            ("gamma_lbt_dbm", self.radio.gamma_lbt_dbm),
        ] {
            if dbm_to_watt(v) <= 0.0 || !dbm_to_watt(v).is_finite() {
                return Err(SimError::config(format!("{name} = {v} dBm is not a positive power")));
            }
        }
        if self.topology.mean_ues_per_sector <= 0.0 {
            return Err(SimError::config("mean_ues_per_sector must be positive"));
        }
        if self.topology.hotspot_center_min_m >= self.topology.hotspot_center_max_m {
            return Err(SimError::config("hotspot center radius band is empty"));
        }
        if self.rates.bandwidth_hz <= 0.0 {
            return Err(SimError::config("bandwidth must be positive"));
        }
        Ok(())
    }

    /// Deterministic hash over the semantic content (independent of key
    /// ordering in the source file).
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let canon = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(canon.as_bytes());
        let out = h.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Parse and validate a TOML config file. Unknown keys are rejected with the
/// parser's list of valid fields.
pub fn load_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<SimConfig> {
    let cfg: SimConfig =
        toml::from_str(text).map_err(|e| SimError::config(format!("config parse: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn save_config(cfg: &SimConfig, path: &Path) -> Result<()> {
    let text = toml::to_string_pretty(cfg).map_err(|e| SimError::config(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_yields_table_defaults() {
        let cfg = parse_config("").unwrap();
        assert!((cfg.radio.bs_tx_dbm - 30.0).abs() < 1e-12);
        assert!((cfg.radio.gamma_lbt_dbm - (-62.0)).abs() < 1e-12);
        assert!((cfg.spatial.c1 - 0.5).abs() < 1e-12);
        assert!((cfg.channel.tau2 - 0.1).abs() < 1e-12);
        assert!((cfg.grid.inter_site_distance_m - 500.0).abs() < 1e-12);
        assert_eq!(cfg.drops, 1000);
        assert!((cfg.topology.mean_ues_per_sector - 8.0).abs() < 1e-12);
    }

    #[test]
    fn zero_drops_rejected() {
        let err = parse_config("drops = 0").unwrap_err();
        assert!(matches!(err, SimError::Config(_)));
    }

    #[test]
    fn unknown_key_lists_valid_fields() {
        let err = parse_config("not_a_real_key = 3").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("unknown field"), "{msg}");
        assert!(msg.contains("drops"), "error should enumerate valid keys: {msg}");
    }

    #[test]
    fn out_of_range_values_carry_bounds() {
        let err = parse_config("[spatial]\nc1 = 1.5").unwrap_err();
        assert!(format!("{err}").contains("(0, 1)"));
        let err = parse_config("[channel]\ntau2 = 2.0").unwrap_err();
        assert!(format!("{err}").contains("[0, 1]"));
    }

    #[test]
    fn save_load_roundtrip() {
        let mut cfg = SimConfig::default();
        cfg.antennas = vec![32, 64, 112];
        cfg.drops = 17;
        cfg.seed = 777;
        cfg.spatial.criterion = DofCriterion::Threshold;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        save_config(&cfg, &path).unwrap();
        let back = load_config(&path).unwrap();
        assert_eq!(serde_json::to_string(&cfg).unwrap(), serde_json::to_string(&back).unwrap());
        assert_eq!(cfg.content_hash(), back.content_hash());
    }

    #[test]
    fn content_hash_tracks_semantics_not_formatting() {
        let a = parse_config("drops = 5\nseed = 9").unwrap();
        let b = parse_config("seed = 9\n\n# comment\ndrops = 5").unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        let c = parse_config("drops = 6\nseed = 9").unwrap();
        assert_ne!(a.content_hash(), c.content_hash());
    }
}
