//! Hexagonal cellular layout with wrap-around, and per-drop random placement
//! of UEs, Wi-Fi hotspots and Wi-Fi devices.

use crate::error::{Result, SimError};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

/// 2-D position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn polar(radius: f64, angle_rad: f64) -> Point {
        Point::new(radius * angle_rad.cos(), radius * angle_rad.sin())
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

/// Fixed sector azimuths per site (degrees): boresights of the three sectors.
pub const SECTOR_AZIMUTHS_DEG: [f64; 3] = [30.0, 150.0, 270.0];

/// Deterministic hexagonal site grid with toroidal wrap-around.
#[derive(Debug, Clone, Serialize)]
pub struct SiteGrid {
    pub site_positions: Vec<Point>,
    pub sectors_per_site: usize,
    pub inter_site_distance: f64,
    /// Seven translations: identity plus the six cluster shifts.
    pub wrap_vectors: Vec<Point>,
}

/// Canonical hex grid: `rings = 2` gives the 19-site / 57-sector layout.
pub fn build_grid(inter_site_distance: f64, rings: usize) -> Result<SiteGrid> {
    if inter_site_distance <= 0.0 {
        return Err(SimError::config("inter_site_distance must be > 0"));
    }
    if rings > 8 {
        return Err(SimError::config(format!(
            "ring count {rings} out of supported range 0..=8"
        )));
    }
    let r = rings as i64;
    let mut site_positions = Vec::new();
    for a in -r..=r {
        for b in -r..=r {
            if (a + b).abs() <= r {
                site_positions.push(Point::new(
                    inter_site_distance * (a as f64 + 0.5 * b as f64),
                    inter_site_distance * (3f64.sqrt() / 2.0 * b as f64),
                ));
            }
        }
    }
    // Cluster tiling shift for a hex cluster of 3r²+3r+1 sites is the lattice
    // vector (r+1)·e1 + r·e2; its six 60°-rotations generate the wrap group.
    let e1 = Point::new(1.0, 0.0);
    let e2 = Point::new(0.5, 3f64.sqrt() / 2.0);
    let shift = Point::new(
        inter_site_distance * ((r + 1) as f64 * e1.x + r as f64 * e2.x),
        inter_site_distance * ((r + 1) as f64 * e1.y + r as f64 * e2.y),
    );
    let mut wrap_vectors = vec![Point::new(0.0, 0.0)];
    for k in 0..6 {
        let ang = k as f64 * std::f64::consts::FRAC_PI_3;
        let (c, s) = (ang.cos(), ang.sin());
        wrap_vectors.push(Point::new(shift.x * c - shift.y * s, shift.x * s + shift.y * c));
    }
    Ok(SiteGrid {
        site_positions,
        sectors_per_site: 3,
        inter_site_distance,
        wrap_vectors,
    })
}

impl SiteGrid {
    pub fn num_sites(&self) -> usize {
        self.site_positions.len()
    }

    pub fn num_sectors(&self) -> usize {
        self.site_positions.len() * self.sectors_per_site
    }

    pub fn sector_site(&self, sector: usize) -> usize {
        sector / self.sectors_per_site
    }

    pub fn sector_azimuth_rad(&self, sector: usize) -> f64 {
        SECTOR_AZIMUTHS_DEG[sector % self.sectors_per_site].to_radians()
    }

    /// Displacement `to − from` minimized over wrap translations.
    pub fn wrap_displacement(&self, from: Point, to: Point) -> Point {
        let mut best = to - from;
        let mut best_n = best.norm();
        for t in &self.wrap_vectors[1..] {
            let d = *t + to - from;
            let n = d.norm();
            if n < best_n {
                best_n = n;
                best = d;
            }
        }
        best
    }

    /// Toroidal distance: min over wrap translations of the Euclidean distance.
    pub fn wrap_distance(&self, a: Point, b: Point) -> f64 {
        self.wrap_displacement(a, b).norm()
    }

    /// Wrap-nearest site index for a point (lowest index wins ties).
    pub fn nearest_site(&self, p: Point) -> usize {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, s) in self.site_positions.iter().enumerate() {
            let d = self.wrap_distance(*s, p);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// Associate a node with the sector offering the largest average received
/// power (no fast fading); ties break to the lowest sector id.
pub fn associate<F>(pos: Point, grid: &SiteGrid, mean_gain_db: F) -> usize
where
    F: Fn(usize, Point) -> f64,
{
    let mut best = 0usize;
    let mut best_gain = f64::NEG_INFINITY;
    for sector in 0..grid.num_sectors() {
        let g = mean_gain_db(sector, pos);
        if g > best_gain {
            best_gain = g;
            best = sector;
        }
    }
    best
}

/// Density and placement-constraint parameters for one Monte-Carlo drop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DropParams {
    pub mean_ues_per_sector: f64,
    pub hotspots_per_sector: usize,
    pub hotspot_radius_m: f64,
    pub stas_per_hotspot: usize,
    pub ue_bs_min_m: f64,
    pub ue_bs_max_m: f64,
    pub ue_hotspot_min_m: f64,
    pub hotspot_separation_min_m: f64,
    /// Hotspot centers are drawn with radius uniform in this band (meters),
    /// clipped to the sector's wrap-around Voronoi cell.
    pub hotspot_center_min_m: f64,
    pub hotspot_center_max_m: f64,
    /// Per-node rejection-sampling attempt cap.
    pub retry_cap: usize,
}

impl Default for DropParams {
    fn default() -> Self {
        DropParams {
            mean_ues_per_sector: 8.0,
            hotspots_per_sector: 2,
            hotspot_radius_m: 20.0,
            stas_per_hotspot: 7,
            ue_bs_min_m: 25.0,
            ue_bs_max_m: 150.0,
            ue_hotspot_min_m: 60.0,
            hotspot_separation_min_m: 40.0,
            hotspot_center_min_m: 20.0,
            hotspot_center_max_m: 220.0,
            retry_cap: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WifiRole {
    Ap,
    Sta,
}

#[derive(Debug, Clone, Serialize)]
pub struct BaseStation {
    pub position: Point,
    pub sector_azimuth_rad: f64,
    pub antennas: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct UserEquipment {
    pub position: Point,
    pub serving_sector: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Hotspot {
    pub center: Point,
    pub radius_m: f64,
    pub sector: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct WifiDevice {
    pub position: Point,
    pub role: WifiRole,
    pub hotspot: usize,
    /// Index into the device list of this device's serving AP.
    pub serving_ap: usize,
}

/// All node positions and roles for one Monte-Carlo drop.
#[derive(Debug, Clone, Serialize)]
pub struct NodeSet {
    pub bs: Vec<BaseStation>,
    pub ues: Vec<UserEquipment>,
    pub hotspots: Vec<Hotspot>,
    pub wifi: Vec<WifiDevice>,
}

impl NodeSet {
    /// UE indices served by `sector`, in placement order.
    pub fn ues_of_sector(&self, sector: usize) -> Vec<usize> {
        (0..self.ues.len())
            .filter(|&u| self.ues[u].serving_sector == sector)
            .collect()
    }

    /// Device indices of one hotspot cluster (AP first).
    pub fn devices_of_hotspot(&self, hotspot: usize) -> Vec<usize> {
        (0..self.wifi.len())
            .filter(|&d| self.wifi[d].hotspot == hotspot)
            .collect()
    }
}

/// Generate the random node placement for one drop.
///
/// `mean_gain_db(sector, pos)` supplies the association metric (path loss
/// plus antenna gain, no fast fading). Placement constraints are enforced by
/// rejection sampling; exhausting the retry cap returns
/// [`SimError::PlacementExhausted`] and the caller regenerates the drop from
/// its next substream.
pub fn drop_nodes<R, F>(
    grid: &SiteGrid,
    rng: &mut R,
    params: &DropParams,
    antennas: usize,
    mean_gain_db: F,
) -> Result<NodeSet>
where
    R: Rng,
    F: Fn(usize, Point) -> f64,
{
    let n_sectors = grid.num_sectors();
    let mut bs = Vec::with_capacity(n_sectors);
    for sector in 0..n_sectors {
        bs.push(BaseStation {
            position: grid.site_positions[grid.sector_site(sector)],
            sector_azimuth_rad: grid.sector_azimuth_rad(sector),
            antennas,
        });
    }

    // Hotspot centers: radius uniform in the configured band, azimuth uniform
    // in the sector wedge, confined to the site's wrap Voronoi cell and kept
    // pairwise separated within the sector.
    let mut hotspots: Vec<Hotspot> = Vec::with_capacity(n_sectors * params.hotspots_per_sector);
    for sector in 0..n_sectors {
        let site = grid.sector_site(sector);
        let origin = grid.site_positions[site];
        let az = grid.sector_azimuth_rad(sector);
        let first_of_sector = hotspots.len();
        for _ in 0..params.hotspots_per_sector {
            let mut placed = false;
            for _ in 0..params.retry_cap {
                let r = rng.random_range(params.hotspot_center_min_m..params.hotspot_center_max_m);
                let th = az + rng.random_range(-std::f64::consts::FRAC_PI_3..std::f64::consts::FRAC_PI_3);
                let pos = origin + Point::polar(r, th);
                if grid.nearest_site(pos) != site {
                    continue;
                }
                if hotspots[first_of_sector..]
                    .iter()
                    .any(|h| grid.wrap_distance(h.center, pos) < params.hotspot_separation_min_m)
                {
                    continue;
                }
                hotspots.push(Hotspot {
                    center: pos,
                    radius_m: params.hotspot_radius_m,
                    sector,
                });
                placed = true;
                break;
            }
            if !placed {
                return Err(SimError::PlacementExhausted {
                    what: "hotspot center",
                    attempts: params.retry_cap,
                });
            }
        }
    }

    // Devices: AP at the hotspot center, STAs uniform in the disc.
    let mut wifi: Vec<WifiDevice> = Vec::with_capacity(hotspots.len() * (1 + params.stas_per_hotspot));
    for (h_idx, h) in hotspots.iter().enumerate() {
        let ap_index = wifi.len();
        wifi.push(WifiDevice {
            position: h.center,
            role: WifiRole::Ap,
            hotspot: h_idx,
            serving_ap: ap_index,
        });
        for _ in 0..params.stas_per_hotspot {
            let r = h.radius_m * rng.random::<f64>().sqrt();
            let th = rng.random_range(0.0..std::f64::consts::TAU);
            wifi.push(WifiDevice {
                position: h.center + Point::polar(r, th),
                role: WifiRole::Sta,
                hotspot: h_idx,
                serving_ap: ap_index,
            });
        }
    }

    // UEs: Poisson count per sector; positions rejected until all placement
    // constraints and the association rule hold.
    let poisson = Poisson::new(params.mean_ues_per_sector)
        .map_err(|e| SimError::config(format!("invalid UE density: {e}")))?;
    let mut ues = Vec::new();
    for sector in 0..n_sectors {
        let site = grid.sector_site(sector);
        let origin = grid.site_positions[site];
        let az = grid.sector_azimuth_rad(sector);
        let count = poisson.sample(rng) as usize;
        for _ in 0..count {
            let mut placed = false;
            for _ in 0..params.retry_cap {
                let r2 = rng.random_range(params.ue_bs_min_m.powi(2)..params.ue_bs_max_m.powi(2));
                let r = r2.sqrt();
                let th = az + rng.random_range(-std::f64::consts::FRAC_PI_3..std::f64::consts::FRAC_PI_3);
                let pos = origin + Point::polar(r, th);
                if hotspots
                    .iter()
                    .any(|h| grid.wrap_distance(h.center, pos) < params.ue_hotspot_min_m)
                {
                    continue;
                }
                if associate(pos, grid, &mean_gain_db) != sector {
                    continue;
                }
                ues.push(UserEquipment {
                    position: pos,
                    serving_sector: sector,
                });
                placed = true;
                break;
            }
            if !placed {
                return Err(SimError::PlacementExhausted {
                    what: "UE position",
                    attempts: params.retry_cap,
                });
            }
        }
    }

    Ok(NodeSet { bs, ues, hotspots, wifi })
}
