//! Lidar and radar observation models.
//!
//! Lidar is a fan of horizontal beams at a few heights returning exact ranges
//! plus Gaussian noise. Radar sees everything but the lowest primitives, blurs
//! each return over neighbouring range bins, keeps the strongest of several
//! sub-rays across the azimuth beam width, and adds speckle, saturation
//! streaks and ghost echoes.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::world::World;
use crate::descriptor::RadarPolarScan;
use crate::error::{Error, Result};
use crate::rng::keyed_rng;
use crate::submap::PointCloud3D;
use crate::trajectory::Pose2D;

#[derive(Debug, Clone, PartialEq)]
pub struct SensorConfig {
    pub lidar_beams: usize,
    /// Standard deviation of lidar range noise, meters.
    pub lidar_noise: f64,
    /// Beam heights in the sensor frame.
    pub lidar_levels: Vec<f64>,
    pub lidar_max_range: f64,
    pub radar_azimuth_bins: usize,
    pub radar_range_bins: usize,
    pub radar_resolution: f64,
    /// Sub-rays per azimuth bin; each bin keeps the strongest return.
    pub radar_subrays: usize,
    /// Standard deviation of multiplicative speckle.
    pub speckle: f64,
    pub streak_probability: f64,
    pub ghost_probability: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            lidar_beams: 360,
            lidar_noise: 0.02,
            lidar_levels: vec![-0.5, 0.0, 0.5, 1.0],
            lidar_max_range: 80.0,
            radar_azimuth_bins: 120,
            radar_range_bins: 200,
            radar_resolution: 0.5,
            radar_subrays: 3,
            speckle: 0.05,
            streak_probability: 0.1,
            ghost_probability: 0.02,
        }
    }
}

impl SensorConfig {
    /// Same geometry with every random artifact switched off.
    pub fn noiseless(&self) -> Self {
        Self { lidar_noise: 0.0, speckle: 0.0, streak_probability: 0.0, ghost_probability: 0.0, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("lidar_beams", self.lidar_beams),
            ("lidar_levels", self.lidar_levels.len()),
            ("radar_azimuth_bins", self.radar_azimuth_bins),
            ("radar_range_bins", self.radar_range_bins),
            ("radar_subrays", self.radar_subrays),
        ];
        for (name, n) in counts {
            if n == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        for (name, p) in [("streak_probability", self.streak_probability), ("ghost_probability", self.ghost_probability)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        for (name, v) in [
            ("lidar_noise", self.lidar_noise),
            ("speckle", self.speckle),
            ("lidar_max_range", self.lidar_max_range),
            ("radar_resolution", self.radar_resolution),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.radar_resolution == 0.0 {
            return Err(Error::InvalidConfig("radar_resolution must be > 0".into()));
        }
        Ok(())
    }
}

/// Standard deviation of the range blur, in range bins.
const RADAR_SPREAD: f64 = 0.3;
/// Radar misses primitives whose top lies below this height.
const RADAR_MIN_TOP: f64 = -0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sensor {
    Lidar,
    Radar,
}

/// Random stream for one sensor at one pose, independent of render order.
pub fn sensor_rng(seed: u64, pose_index: usize, sensor: Sensor) -> rand_chacha::ChaCha8Rng {
    let tag = match sensor {
        Sensor::Lidar => 0x11DA,
        Sensor::Radar => 0x4ADA,
    };
    keyed_rng(seed, &[pose_index as u64, tag])
}

/// Beam azimuths in the sensor frame, starting at `-pi`.
pub fn lidar_azimuth(beam: usize, beams: usize) -> f64 {
    beam as f64 / beams as f64 * TAU - PI
}

/// One lidar sweep in the sensor frame at `pose`.
pub fn render_lidar(world: &World, pose: &Pose2D, cfg: &SensorConfig, rng: &mut impl Rng) -> PointCloud3D {
    let origin = [pose.x, pose.y];
    let local = world.visible_from(origin, cfg.lidar_max_range);
    let noise = Normal::new(0.0, cfg.lidar_noise).expect("validated noise");
    let mut points = Vec::new();
    for b in 0..cfg.lidar_beams {
        let az = lidar_azimuth(b, cfg.lidar_beams);
        for &z in &cfg.lidar_levels {
            let Some(hit) = local.cast(origin, pose.yaw + az, z) else { continue };
            let r = hit.range + if cfg.lidar_noise > 0.0 { noise.sample(rng) } else { 0.0 };
            if r > 0.0 && r < cfg.lidar_max_range {
                points.push([r * az.cos(), r * az.sin(), z]);
            }
        }
    }
    PointCloud3D::new(points, *pose)
}

/// One radar sweep at `pose`; azimuth bin `a` starts at `-pi + a * width`.
pub fn render_radar(world: &World, pose: &Pose2D, cfg: &SensorConfig, rng: &mut impl Rng) -> RadarPolarScan {
    let (n_az, n_range, res) = (cfg.radar_azimuth_bins, cfg.radar_range_bins, cfg.radar_resolution);
    let mut scan = RadarPolarScan::zeros(n_az, n_range, res);
    let origin = [pose.x, pose.y];
    let max_range = n_range as f64 * res;
    let local = world.visible_from(origin, max_range);
    let width = TAU / n_az as f64;
    let share = 1.0 / cfg.radar_subrays as f64;
    let deposit = |scan: &mut RadarPolarScan, a: usize, range: f64, intensity: f64| {
        let center = (range / res).floor() as isize;
        for b in center - 1..=center + 1 {
            if b < 0 || b as usize >= n_range {
                continue;
            }
            let offset = ((b as f64 + 0.5) * res - range) / res;
            let w = (-0.5 * (offset / RADAR_SPREAD) * (offset / RADAR_SPREAD)).exp();
            let v = scan.get(a, b as usize).max(intensity * w);
            scan.set(a, b as usize, v);
        }
    };
    for a in 0..n_az {
        for k in 0..cfg.radar_subrays {
            let az = -PI + (a as f64 + k as f64 * share) * width;
            let Some(hit) = local.cast(origin, pose.yaw + az, RADAR_MIN_TOP) else { continue };
            if hit.range >= max_range {
                continue;
            }
            deposit(&mut scan, a, hit.range, hit.reflectivity);
            if cfg.ghost_probability > 0.0 && rng.random_bool(cfg.ghost_probability) {
                deposit(&mut scan, a, 2.0 * hit.range, 0.5 * hit.reflectivity);
            }
        }
    }
    if cfg.speckle > 0.0 {
        let speckle = Normal::new(1.0, cfg.speckle).expect("validated speckle");
        for a in 0..n_az {
            for r in 0..n_range {
                let v = scan.get(a, r);
                if v > 0.0 {
                    scan.set(a, r, v * speckle.sample(rng));
                }
            }
        }
    }
    if cfg.streak_probability > 0.0 && rng.random_bool(cfg.streak_probability) {
        let a = rng.random_range(0..n_az);
        for r in 0..n_range {
            let v = rng.random_range(0.8..=1.0);
            scan.set(a, r, v);
        }
    }
    for a in 0..n_az {
        for r in 0..n_range {
            scan.set(a, r, scan.get(a, r).clamp(0.0, 1.0));
        }
    }
    scan
}
