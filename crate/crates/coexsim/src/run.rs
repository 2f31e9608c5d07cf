//! Monte-Carlo orchestration: seeded drop generation across the antenna
//! sweep, the per-drop processing pipeline of both schemes, parallel workers
//! over independent substreams, aggregation and result serialization.

use crate::channel::{
    self, draw_bs_link, draw_channel_matrix, draw_d2d_link, draw_scalar_channel, corrupt_csi,
    link_geometry, ricean_k_factor, ChannelSet, JakesCorrelation,
};
use crate::config::{DofCriterion, SchemeKind, SimConfig};
use crate::error::{Result, SimError};
use crate::lbt::{conventional_lbt, enhanced_lbt, wifi_defer, LbtMode};
use crate::linalg::{self, zgemm_new, CMat, Op};
use crate::metrics::{bs_sensed_power, build_cdf, cell_rate, lbt_airtime_split, wifi_rate, DropMetrics};
use crate::spatial::{
    allocate_dof_fixed_k, allocate_dof_threshold, baseline_zf_precoders, compute_precoders,
    estimate_covariance, schedule_ues, simulate_silence, PrecoderSet,
};
use crate::topology::{build_grid, drop_nodes, NodeSet, SiteGrid, WifiRole};
use crate::units::{dbm_to_watt, watt_to_dbm};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;
use std::time::Instant;

/// One (scheme, antenna-count) Monte-Carlo run.
pub struct SchemeRun {
    pub scheme: SchemeKind,
    pub antennas: usize,
    pub drops: Vec<DropMetrics>,
    pub layout_sample: Option<NodeSet>,
    /// Realized RNG stream id per drop (after placement retries).
    pub drop_streams: Vec<u64>,
}

pub struct ExperimentResult {
    pub runs: Vec<SchemeRun>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestRun {
    pub scheme: String,
    pub antennas: usize,
    pub drops: usize,
    pub drop_streams: Vec<u64>,
    pub resampled_drops: usize,
    pub regularized_precoders: usize,
}

/// Reproducibility record emitted next to the result files.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub master_seed: u64,
    pub software_version: String,
    pub wall_clock_s: f64,
    pub runs: Vec<ManifestRun>,
}

/// Collision-free stream id over (antenna index, drop index, retry).
pub fn drop_stream_id(n_index: usize, drop: usize, retry: usize) -> u64 {
    assert!(n_index < (1 << 12) && retry < (1 << 8));
    assert!((drop as u64) < (1u64 << 38));
    ((n_index as u64 + 1) << 48) | ((drop as u64) << 8) | retry as u64
}

struct DropContext<'a> {
    cfg: &'a SimConfig,
    grid: &'a SiteGrid,
    jakes: &'a JakesCorrelation,
    n_antennas: usize,
    scheme: SchemeKind,
    want_layout: bool,
}

struct DropOutput {
    metrics: DropMetrics,
    layout: Option<NodeSet>,
}

/// Wi-Fi activity of one drop: per cluster, the contending transmitter
/// drawn uniformly over the 8 devices, plus the AP, are active during the
/// BS sensing window; the contender alone transmits during the BS downlink.
struct WifiActivity {
    /// Global device index of each cluster's contender.
    data_tx: Vec<usize>,
    /// Sorted global indices of all sensing-active devices (the fig2 CSV
    /// and defer-statistic population).
    tracked: Vec<usize>,
    /// Row in `tracked` of each cluster's contender.
    data_rows: Vec<usize>,
}

fn draw_wifi_activity<R: rand::Rng>(nodes: &NodeSet, rng: &mut R) -> WifiActivity {
    let n_clusters = nodes.hotspots.len();
    let per_cluster = nodes.wifi.len() / n_clusters;
    let mut data_tx = Vec::with_capacity(n_clusters);
    let mut tracked = Vec::new();
    for c in 0..n_clusters {
        let base = c * per_cluster;
        let pick = base + rng.random_range(0..per_cluster);
        data_tx.push(pick);
        tracked.push(base); // the AP sits first in its cluster
        if pick != base {
            tracked.push(pick);
        }
    }
    tracked.sort_unstable();
    let data_rows = data_tx
        .iter()
        .map(|&d| tracked.binary_search(&d).expect("contender is tracked"))
        .collect();
    WifiActivity { data_tx, tracked, data_rows }
}

fn device_tx_power_w(cfg: &SimConfig, role: WifiRole) -> f64 {
    match role {
        WifiRole::Ap => dbm_to_watt(cfg.radio.ap_tx_dbm),
        WifiRole::Sta => dbm_to_watt(cfg.radio.sta_tx_dbm),
    }
}

/// Full per-drop pipeline shared by both schemes: placement → channels →
/// (sensing → covariance → allocation → precoders → LBT) → metrics.
fn run_drop<R: rand::Rng>(ctx: &DropContext, rng: &mut R) -> Result<DropOutput> {
    let cfg = ctx.cfg;
    let grid = ctx.grid;
    let n = ctx.n_antennas;
    let chan = &cfg.channel;
    let n_sectors = grid.num_sectors();
    let gain = |sector: usize, pos: crate::topology::Point| {
        channel::mean_sector_gain_db(grid, sector, pos, chan)
    };
    let nodes = drop_nodes(grid, rng, &cfg.topology, n, gain)?;
    let n_ues = nodes.ues.len();

    let activity = draw_wifi_activity(&nodes, rng);
    let tracked_powers: Vec<f64> = activity
        .tracked
        .iter()
        .map(|&d| device_tx_power_w(cfg, nodes.wifi[d].role))
        .collect();

    let p_b = dbm_to_watt(cfg.radio.bs_tx_dbm);
    let gamma = cfg.gamma_lbt_w();
    let sensing_noise = dbm_to_watt(cfg.spatial.bs_sensing_noise_dbm);
    let ue_noise = cfg.ue_noise_w();
    let mmimo = ctx.scheme == SchemeKind::MmimoU;

    let mut precoders: Vec<Option<PrecoderSet>> = Vec::with_capacity(n_sectors);
    let mut scheduled: Vec<Vec<usize>> = Vec::with_capacity(n_sectors);
    let mut effective: Vec<Option<CMat>> = Vec::with_capacity(n_sectors);
    let mut sensed_conv = Vec::with_capacity(n_sectors);
    let mut sensed_enh = Vec::with_capacity(n_sectors);
    let mut granted = Vec::with_capacity(n_sectors);
    let mut interference_w = vec![0.0f64; activity.tracked.len()];
    let mut regularized = 0usize;
    let mut h_per_bs: Vec<CMat> = Vec::with_capacity(n_sectors);
    let mut g_per_bs: Vec<CMat> = Vec::with_capacity(n_sectors);
    let mut h_hat_per_bs: Vec<CMat> = Vec::with_capacity(n_sectors);

    for sector in 0..n_sectors {
        let site = grid.sector_site(sector);
        let origin = grid.site_positions[site];
        let az = grid.sector_azimuth_rad(sector);
        // one correlated batch per BS: UE columns first, tracked devices after
        let mut links = Vec::with_capacity(n_ues + activity.tracked.len());
        for ue in &nodes.ues {
            let geom = link_geometry(grid.wrap_displacement(origin, ue.position), az, chan);
            let budget = draw_bs_link(&geom, chan, rng);
            let k = ricean_k_factor(geom.distance_3d_m, chan);
            links.push((budget, geom, k));
        }
        for &dev in &activity.tracked {
            let geom =
                link_geometry(grid.wrap_displacement(origin, nodes.wifi[dev].position), az, chan);
            let budget = draw_bs_link(&geom, chan, rng);
            let k = ricean_k_factor(geom.distance_3d_m, chan);
            links.push((budget, geom, k));
        }
        let all = draw_channel_matrix(&links, n, ctx.jakes, rng);
        let h_i = all.columns(0, n_ues).into_owned();
        let g_i = all.columns(n_ues, activity.tracked.len()).into_owned();

        // silent-period sensing over the same tracked activity set
        let snap = simulate_silence(&g_i, &tracked_powers, cfg.spatial.samples_m, sensing_noise, rng);
        sensed_conv.push(watt_to_dbm(bs_sensed_power(&snap.z_samples, None, 0, LbtMode::Conventional)));

        let associated = nodes.ues_of_sector(sector);
        let (cov, d_i, k_target) = if mmimo {
            let cov = estimate_covariance(&snap)?;
            match cfg.spatial.criterion {
                DofCriterion::FixedK => {
                    let k_cap = cfg.spatial.max_scheduled_ues.min(n);
                    let k_i = associated.len().min(k_cap);
                    let d = allocate_dof_fixed_k(n, k_i, cfg.spatial.c1)?;
                    (Some(cov), d, k_i)
                }
                DofCriterion::Threshold => {
                    let (d, k) = allocate_dof_threshold(
                        &cov.lambda_hat,
                        dbm_to_watt(cfg.spatial.gamma_threshold_dbm),
                        cfg.spatial.c2,
                        n,
                    );
                    (Some(cov), d, k)
                }
            }
        } else {
            let k_cap = cfg.spatial.max_scheduled_ues.min(n);
            (None, 0usize, associated.len().min(k_cap))
        };
        let sched = schedule_ues(&associated, k_target, rng);
        let k_i = sched.len();

        // noisy CSI for the scheduled UEs
        let mut h_hat = CMat::zeros(n, k_i);
        for (c, &ue) in sched.iter().enumerate() {
            let col: crate::linalg::CVec = h_i.column(ue).into();
            h_hat.set_column(c, &corrupt_csi(&col, chan.tau2, rng)?);
        }

        let precoder = if k_i == 0 {
            None
        } else if mmimo {
            let cov_ref = cov.as_ref().unwrap();
            let d_eff = d_i.min(n - k_i);
            Some(compute_precoders(&h_hat, &cov_ref.u_hat, d_eff, cfg.spatial.power_normalization)?)
        } else {
            Some(baseline_zf_precoders(&h_hat, cfg.spatial.power_normalization)?)
        };
        if precoder.as_ref().is_some_and(|p| p.regularized) {
            regularized += 1;
        }

        if mmimo {
            let cov_ref = cov.as_ref().unwrap();
            let d_eff = if k_i == 0 { d_i } else { d_i.min(n - k_i) };
            let dec = enhanced_lbt(&snap.z_samples, &cov_ref.u_hat, d_eff, gamma);
            sensed_enh.push(watt_to_dbm(dec.sensed_power_w));
            granted.push(dec.granted);
        } else {
            let dec = conventional_lbt(&snap.z_samples, gamma);
            granted.push(dec.granted);
        }

        // effective channels and device interference contributions
        if let Some(ps) = &precoder {
            let eff = zgemm_new(&h_i, Op::ConjTrans, &ps.w, Op::NoTrans);
            let dev_eff = zgemm_new(&g_i, Op::ConjTrans, &ps.w, Op::NoTrans);
            for row in 0..activity.tracked.len() {
                let mut acc = 0.0;
                for col in 0..dev_eff.ncols() {
                    acc += dev_eff[(row, col)].norm_sqr();
                }
                interference_w[row] += p_b * acc;
            }
            effective.push(Some(eff));
        } else {
            effective.push(None);
        }
        precoders.push(precoder);
        scheduled.push(sched);
        h_per_bs.push(h_i);
        g_per_bs.push(g_i);
        h_hat_per_bs.push(h_hat);
    }

    // Wi-Fi→UE scalars for the per-cluster data transmitters
    let mut q = CMat::zeros(activity.tracked.len(), n_ues);
    for (cluster, &dev) in activity.data_tx.iter().enumerate() {
        let row = activity.data_rows[cluster];
        for (u, ue) in nodes.ues.iter().enumerate() {
            let dist = grid.wrap_distance(nodes.wifi[dev].position, ue.position);
            let budget = draw_d2d_link(dist, chan, rng);
            let k = ricean_k_factor(budget.distance_m, chan);
            q[(row, u)] = draw_scalar_channel(&budget, k, rng);
        }
    }
    let channels = ChannelSet {
        n_antennas: n,
        h: h_per_bs,
        g: g_per_bs,
        tracked_wifi: activity.tracked.clone(),
        q,
        h_hat: h_hat_per_bs,
    };

    // defer states at the contending devices (cellular interference only;
    // inter-cluster Wi-Fi power neglected)
    let deferred: Vec<bool> = interference_w.iter().map(|&i| wifi_defer(i, gamma)).collect();

    // per-UE SINR terms assembled from the effective-channel matrices
    let data_powers: Vec<f64> = activity
        .data_tx
        .iter()
        .map(|&d| device_tx_power_w(cfg, nodes.wifi[d].role))
        .collect();
    let mut sinr_with_wifi = vec![0.0f64; n_ues];
    let mut sinr_no_wifi = vec![0.0f64; n_ues];
    let mut rx_power = vec![0.0f64; n_ues];
    let mut is_scheduled = vec![false; n_ues];
    let active_wifi: Vec<(usize, f64)> = activity
        .data_rows
        .iter()
        .zip(data_powers.iter())
        .map(|(&row, &p)| (row, p))
        .collect();
    for (sector, sched) in scheduled.iter().enumerate() {
        for (col, &ue) in sched.iter().enumerate() {
            is_scheduled[ue] = true;
            let t = crate::metrics::sinr_terms_from_effective(
                &effective, sector, col, &channels.q, &active_wifi, p_b, ue_noise, ue,
            );
            rx_power[ue] = t.signal_w;
            sinr_with_wifi[ue] = t.sinr();
            sinr_no_wifi[ue] =
                t.signal_w / (t.intra_cell_w + t.inter_cell_w + t.noise_w).max(1e-300);
        }
    }

    // rates
    let bw = cfg.rates.bandwidth_hz;
    let sens = dbm_to_watt(cfg.rates.ue_sensitivity_dbm);
    let cluster_rate = cfg.rates.wifi_cluster_rate_bps;
    let mut sector_cell = vec![0.0f64; n_sectors];
    let mut sector_wifi = vec![0.0f64; n_sectors];
    let mut sector_cell_case2 = vec![0.0f64; n_sectors];
    let mut sector_wifi_case2 = vec![0.0f64; n_sectors];
    let cluster_clear = |cluster: usize| -> bool {
        activity
            .tracked
            .iter()
            .zip(deferred.iter())
            .filter(|(&d, _)| nodes.wifi[d].hotspot == cluster)
            .all(|(_, &def)| !def)
    };
    for sector in 0..n_sectors {
        let sum_rate = |sinrs: &[f64]| -> f64 {
            scheduled[sector]
                .iter()
                .map(|&ue| cell_rate(sinrs[ue], bw, rx_power[ue], sens))
                .sum()
        };
        let clusters: Vec<usize> = (0..nodes.hotspots.len())
            .filter(|&c| nodes.hotspots[c].sector == sector)
            .collect();
        if mmimo {
            sector_cell[sector] = if granted[sector] { sum_rate(&sinr_with_wifi) } else { 0.0 };
            let shares: Vec<f64> =
                clusters.iter().map(|&c| if cluster_clear(c) { 1.0 } else { 0.0 }).collect();
            sector_wifi[sector] = wifi_rate(&shares, cluster_rate);
        } else if granted[sector] {
            // concurrent access: BS transmits full time alongside Wi-Fi
            let r = sum_rate(&sinr_with_wifi);
            sector_cell[sector] = r;
            sector_cell_case2[sector] = r;
            let shares: Vec<f64> =
                clusters.iter().map(|&c| if cluster_clear(c) { 1.0 } else { 0.0 }).collect();
            sector_wifi[sector] = wifi_rate(&shares, cluster_rate);
            sector_wifi_case2[sector] = sector_wifi[sector];
        } else {
            // equal-share airtime split under mutual exclusion
            let r = sum_rate(&sinr_no_wifi);
            let n_aps = clusters.len();
            let share1 = lbt_airtime_split(n_aps);
            sector_cell[sector] = share1 * r;
            sector_wifi[sector] = wifi_rate(&vec![share1; n_aps], cluster_rate);
            let devices_per_cluster = nodes.wifi.len() / nodes.hotspots.len();
            let n_dev = n_aps * devices_per_cluster;
            let share2 = lbt_airtime_split(n_dev);
            sector_cell_case2[sector] = share2 * r;
            sector_wifi_case2[sector] =
                wifi_rate(&vec![share2 * devices_per_cluster as f64; n_aps], cluster_rate);
        }
    }

    let ue_sinr_db: Vec<f64> = (0..n_ues)
        .filter(|&u| is_scheduled[u])
        .map(|u| 10.0 * sinr_with_wifi[u].max(1e-300).log10())
        .collect();
    let metrics = DropMetrics {
        wifi_interference_dbm: interference_w.iter().map(|&w| watt_to_dbm(w.max(1e-300))).collect(),
        bs_sensed_conventional_dbm: sensed_conv,
        bs_sensed_enhanced_dbm: sensed_enh,
        ue_sinr_db,
        sector_cell_rate_bps: sector_cell,
        sector_wifi_rate_bps: sector_wifi,
        sector_cell_rate_case2_bps: if mmimo { Vec::new() } else { sector_cell_case2 },
        sector_wifi_rate_case2_bps: if mmimo { Vec::new() } else { sector_wifi_case2 },
        bs_granted: granted,
        wifi_deferred: deferred,
        regularized_precoders: regularized,
        resample_attempts: 0,
    };

    Ok(DropOutput { metrics, layout: if ctx.want_layout { Some(nodes) } else { None } })
}

fn run_drop_with_retries(
    ctx: &DropContext,
    master_seed: u64,
    n_index: usize,
    drop: usize,
    retry_cap: usize,
) -> Result<(DropOutput, u64)> {
    for retry in 0..retry_cap {
        let stream = drop_stream_id(n_index, drop, retry);
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream);
        match run_drop(ctx, &mut rng) {
            Ok(mut out) => {
                out.metrics.resample_attempts = retry;
                return Ok((out, stream));
            }
            // placement conflicts and in-drop data degeneracies regenerate
            // the drop from its next substream; config/IO errors abort
            Err(SimError::PlacementExhausted { .. }) | Err(SimError::Data(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(SimError::data(format!(
        "drop {drop} could not be placed within {retry_cap} regenerations"
    )))
}

/// Run the configured experiment: every scheme of the selection, every
/// antenna count of the sweep, `drops` independent drops each. Deterministic
/// for a given (seed, config) regardless of worker count.
pub fn run_experiment(cfg: &SimConfig) -> Result<(ExperimentResult, RunManifest)> {
    cfg.validate()?;
    linalg::configure_blas_single_threaded();
    let started = Instant::now();
    let grid = build_grid(cfg.grid.inter_site_distance_m, cfg.grid.rings)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| SimError::config(format!("worker pool: {e}")))?;

    let mut runs = Vec::new();
    let mut manifest_runs = Vec::new();
    for scheme in cfg.scheme.expand() {
        for (n_index, &n) in cfg.antennas.iter().enumerate() {
            let jakes = JakesCorrelation::new(n);
            let results: Result<Vec<(DropOutput, u64)>> = pool.install(|| {
                (0..cfg.drops)
                    .into_par_iter()
                    .map(|drop| {
                        let ctx = DropContext {
                            cfg,
                            grid: &grid,
                            jakes: &jakes,
                            n_antennas: n,
                            scheme,
                            want_layout: drop == 0,
                        };
                        run_drop_with_retries(&ctx, cfg.seed, n_index, drop, cfg.drop_retry_cap)
                    })
                    .collect()
            });
            let results = results?;
            let mut drops = Vec::with_capacity(results.len());
            let mut streams = Vec::with_capacity(results.len());
            let mut layout_sample = None;
            for (i, (out, stream)) in results.into_iter().enumerate() {
                if i == 0 {
                    layout_sample = out.layout;
                }
                drops.push(out.metrics);
                streams.push(stream);
            }
            let resampled = drops.iter().filter(|d| d.resample_attempts > 0).count();
            let reg_total: usize = drops.iter().map(|d| d.regularized_precoders).sum();
            manifest_runs.push(ManifestRun {
                scheme: scheme.label().to_string(),
                antennas: n,
                drops: drops.len(),
                drop_streams: streams.clone(),
                resampled_drops: resampled,
                regularized_precoders: reg_total,
            });
            runs.push(SchemeRun { scheme, antennas: n, drops, layout_sample, drop_streams: streams });
        }
    }
    let manifest = RunManifest {
        config_hash: cfg.content_hash(),
        master_seed: cfg.seed,
        software_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_s: started.elapsed().as_secs_f64(),
        runs: manifest_runs,
    };
    Ok((ExperimentResult { runs }, manifest))
}

impl SchemeRun {
    pub fn interference_samples_dbm(&self) -> Vec<f64> {
        self.drops.iter().flat_map(|d| d.wifi_interference_dbm.iter().copied()).collect()
    }

    pub fn defer_fraction(&self) -> f64 {
        let total: usize = self.drops.iter().map(|d| d.wifi_deferred.len()).sum();
        let deferred: usize =
            self.drops.iter().map(|d| d.wifi_deferred.iter().filter(|&&x| x).count()).sum();
        deferred as f64 / total.max(1) as f64
    }

    pub fn grant_fraction(&self) -> f64 {
        let total: usize = self.drops.iter().map(|d| d.bs_granted.len()).sum();
        let granted: usize =
            self.drops.iter().map(|d| d.bs_granted.iter().filter(|&&x| x).count()).sum();
        granted as f64 / total.max(1) as f64
    }

    pub fn sensed_conventional_dbm(&self) -> Vec<f64> {
        self.drops.iter().flat_map(|d| d.bs_sensed_conventional_dbm.iter().copied()).collect()
    }

    pub fn sensed_enhanced_dbm(&self) -> Vec<f64> {
        self.drops.iter().flat_map(|d| d.bs_sensed_enhanced_dbm.iter().copied()).collect()
    }

    fn mean_over_sectors(&self, pick: impl Fn(&DropMetrics) -> &[f64]) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for d in &self.drops {
            for &v in pick(d) {
                sum += v;
                count += 1;
            }
        }
        sum / count.max(1) as f64
    }

    /// Mean cellular rate per sector (bps).
    pub fn mean_cell_rate_bps(&self) -> f64 {
        self.mean_over_sectors(|d| &d.sector_cell_rate_bps)
    }

    pub fn mean_wifi_rate_bps(&self) -> f64 {
        self.mean_over_sectors(|d| &d.sector_wifi_rate_bps)
    }

    pub fn mean_cell_rate_case2_bps(&self) -> f64 {
        self.mean_over_sectors(|d| &d.sector_cell_rate_case2_bps)
    }

    pub fn mean_wifi_rate_case2_bps(&self) -> f64 {
        self.mean_over_sectors(|d| &d.sector_wifi_rate_case2_bps)
    }
}

// ---------------------------------------------------------------------------
// Result serialization
// ---------------------------------------------------------------------------

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Thin a CDF to at most `cap` evenly spaced rank points (the last point,
/// probability 1, is always kept).
fn thin_cdf(values: &[f64], cap: usize) -> Vec<(f64, f64)> {
    let n = values.len();
    let cdf = build_cdf(values).expect("nonempty samples");
    if n <= cap {
        return cdf.values.iter().zip(cdf.probabilities.iter()).map(|(&v, &p)| (v, p)).collect();
    }
    let mut out = Vec::with_capacity(cap);
    for i in 0..cap {
        let rank = ((i + 1) as f64 / cap as f64 * n as f64).round() as usize;
        let rank = rank.clamp(1, n);
        out.push((cdf.values[rank - 1], cdf.probabilities[rank - 1]));
    }
    out
}

#[derive(Serialize)]
struct SummaryRun {
    scheme: String,
    antennas: usize,
    drops: usize,
    wifi_defer_fraction: f64,
    wifi_interference_median_dbm: f64,
    wifi_interference_below_threshold_fraction: f64,
    bs_sensed_conventional_above_threshold_fraction: f64,
    bs_sensed_enhanced_below_threshold_fraction: Option<f64>,
    bs_sensed_enhanced_median_dbm: Option<f64>,
    bs_grant_fraction: f64,
    cell_rate_mbps: f64,
    wifi_rate_mbps: f64,
    aggregate_rate_mbps: f64,
    case2_cell_rate_mbps: Option<f64>,
    case2_wifi_rate_mbps: Option<f64>,
    case2_aggregate_rate_mbps: Option<f64>,
    regularized_precoders: usize,
    resampled_drops: usize,
}

#[derive(Serialize)]
struct Summary {
    gamma_lbt_dbm: f64,
    runs: Vec<SummaryRun>,
    /// mMIMO-U aggregate at N = 128 next to the published reference point.
    mmimo_u_aggregate_n128_mbps: Option<f64>,
    reference_aggregate_n128_mbps: f64,
}

/// Write fig2/fig3/fig4 CSVs, summary.json, manifest.json (and layout dumps
/// when requested) into `out_dir`.
pub fn emit_results(
    result: &ExperimentResult,
    cfg: &SimConfig,
    manifest: &RunManifest,
    dump_layout: bool,
) -> Result<()> {
    let out_dir = Path::new(&cfg.output_dir);
    std::fs::create_dir_all(out_dir)?;
    let gamma_dbm = cfg.radio.gamma_lbt_dbm;

    // fig2: Wi-Fi interference CDF per (scheme, N)
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["scheme", "antennas", "interference_dbm", "cdf"])
            .map_err(|e| SimError::data(e.to_string()))?;
        for run in &result.runs {
            let samples = run.interference_samples_dbm();
            for (v, p) in thin_cdf(&samples, 1024) {
                w.write_record([
                    run.scheme.label().to_string(),
                    run.antennas.to_string(),
                    format!("{v}"),
                    format!("{p}"),
                ])
                .map_err(|e| SimError::data(e.to_string()))?;
            }
        }
        let bytes = w.into_inner().map_err(|e| SimError::data(e.to_string()))?;
        atomic_write(&out_dir.join("fig2_wifi_interference_cdf.csv"), &bytes)?;
    }

    // fig3: BS-sensed interference CDFs (conventional always, enhanced for mMIMO-U)
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["scheme", "antennas", "mode", "sensed_dbm", "cdf"])
            .map_err(|e| SimError::data(e.to_string()))?;
        for run in &result.runs {
            let conv = run.sensed_conventional_dbm();
            for (v, p) in thin_cdf(&conv, 1024) {
                w.write_record([
                    run.scheme.label().to_string(),
                    run.antennas.to_string(),
                    "conventional".to_string(),
                    format!("{v}"),
                    format!("{p}"),
                ])
                .map_err(|e| SimError::data(e.to_string()))?;
            }
            let enh = run.sensed_enhanced_dbm();
            if !enh.is_empty() {
                for (v, p) in thin_cdf(&enh, 1024) {
                    w.write_record([
                        run.scheme.label().to_string(),
                        run.antennas.to_string(),
                        "enhanced".to_string(),
                        format!("{v}"),
                        format!("{p}"),
                    ])
                    .map_err(|e| SimError::data(e.to_string()))?;
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| SimError::data(e.to_string()))?;
        atomic_write(&out_dir.join("fig3_bs_interference_cdf.csv"), &bytes)?;
    }

    // fig4: rates per (scheme, N); conventional-LBT contributes both airtime cases
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["scheme", "antennas", "cell_mbps", "wifi_mbps", "aggregate_mbps"])
            .map_err(|e| SimError::data(e.to_string()))?;
        for run in &result.runs {
            let rows: Vec<(String, f64, f64)> = match run.scheme {
                SchemeKind::MmimoU => vec![(
                    "mmimo-u".to_string(),
                    run.mean_cell_rate_bps(),
                    run.mean_wifi_rate_bps(),
                )],
                SchemeKind::ConventionalLbt => vec![
                    (
                        "conventional-lbt-case1".to_string(),
                        run.mean_cell_rate_bps(),
                        run.mean_wifi_rate_bps(),
                    ),
                    (
                        "conventional-lbt-case2".to_string(),
                        run.mean_cell_rate_case2_bps(),
                        run.mean_wifi_rate_case2_bps(),
                    ),
                ],
            };
            for (label, cell, wifi) in rows {
                let cell_mbps = cell / 1e6;
                let wifi_mbps = wifi / 1e6;
                w.write_record([
                    label,
                    run.antennas.to_string(),
                    format!("{cell_mbps}"),
                    format!("{wifi_mbps}"),
                    format!("{}", cell_mbps + wifi_mbps),
                ])
                .map_err(|e| SimError::data(e.to_string()))?;
            }
        }
        let bytes = w.into_inner().map_err(|e| SimError::data(e.to_string()))?;
        atomic_write(&out_dir.join("fig4_rates.csv"), &bytes)?;
    }

    // summary.json
    {
        let mut runs = Vec::new();
        let mut mmimo_128 = None;
        for run in &result.runs {
            let interference = build_cdf(&run.interference_samples_dbm())?;
            let conv = build_cdf(&run.sensed_conventional_dbm())?;
            let enh_samples = run.sensed_enhanced_dbm();
            let enh = if enh_samples.is_empty() { None } else { Some(build_cdf(&enh_samples)?) };
            let cell = run.mean_cell_rate_bps() / 1e6;
            let wifi = run.mean_wifi_rate_bps() / 1e6;
            if run.scheme == SchemeKind::MmimoU && run.antennas == 128 {
                mmimo_128 = Some(cell + wifi);
            }
            let (c2c, c2w, c2a) = if run.scheme == SchemeKind::ConventionalLbt {
                let c = run.mean_cell_rate_case2_bps() / 1e6;
                let w2 = run.mean_wifi_rate_case2_bps() / 1e6;
                (Some(c), Some(w2), Some(c + w2))
            } else {
                (None, None, None)
            };
            runs.push(SummaryRun {
                scheme: run.scheme.label().to_string(),
                antennas: run.antennas,
                drops: run.drops.len(),
                wifi_defer_fraction: run.defer_fraction(),
                wifi_interference_median_dbm: interference.median(),
                wifi_interference_below_threshold_fraction: interference.fraction_below(gamma_dbm),
                bs_sensed_conventional_above_threshold_fraction: 1.0 - conv.fraction_below(gamma_dbm),
                bs_sensed_enhanced_below_threshold_fraction: enh.as_ref().map(|c| c.fraction_below(gamma_dbm)),
                bs_sensed_enhanced_median_dbm: enh.as_ref().map(|c| c.median()),
                bs_grant_fraction: run.grant_fraction(),
                cell_rate_mbps: cell,
                wifi_rate_mbps: wifi,
                aggregate_rate_mbps: cell + wifi,
                case2_cell_rate_mbps: c2c,
                case2_wifi_rate_mbps: c2w,
                case2_aggregate_rate_mbps: c2a,
                regularized_precoders: run.drops.iter().map(|d| d.regularized_precoders).sum(),
                resampled_drops: run.drops.iter().filter(|d| d.resample_attempts > 0).count(),
            });
        }
        let summary = Summary {
            gamma_lbt_dbm: gamma_dbm,
            runs,
            mmimo_u_aggregate_n128_mbps: mmimo_128,
            reference_aggregate_n128_mbps: 660.0,
        };
        let bytes = serde_json::to_vec_pretty(&summary).map_err(|e| SimError::data(e.to_string()))?;
        atomic_write(&out_dir.join("summary.json"), &bytes)?;
    }

    // manifest.json
    {
        let bytes = serde_json::to_vec_pretty(manifest).map_err(|e| SimError::data(e.to_string()))?;
        atomic_write(&out_dir.join("manifest.json"), &bytes)?;
    }

    if dump_layout {
        for run in &result.runs {
            if let Some(layout) = &run.layout_sample {
                let bytes =
                    serde_json::to_vec_pretty(layout).map_err(|e| SimError::data(e.to_string()))?;
                atomic_write(
                    &out_dir.join(format!("layout_{}_n{}.json", run.scheme.label(), run.antennas)),
                    &bytes,
                )?;
            }
        }
    }
    Ok(())
}

/// Pre-flight check that the output directory is writable, run before any
/// simulation work starts.
pub fn check_output_writable(cfg: &SimConfig) -> Result<()> {
    let out_dir = Path::new(&cfg.output_dir);
    std::fs::create_dir_all(out_dir)?;
    let probe = out_dir.join(".write_probe");
    std::fs::write(&probe, b"ok")?;
    std::fs::remove_file(&probe)?;
    Ok(())
}
