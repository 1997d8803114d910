//! Lidar submap construction around a center pose.
//!
//! The boundaries are found by a greedy walk away from the center that stops at
//! the first pose violating either the travelled-distance bound or the heading
//! bound. Accumulated scans are then expressed in the center pose's frame.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::trajectory::{angular_difference, Pose2D, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubmapConfig {
    /// Maximum planar distance from the center pose, meters.
    pub r_max: f64,
    /// Maximum heading change from the center pose, radians.
    pub theta_max: f64,
    /// Height band `[lo, hi]` kept relative to the sensor origin.
    pub z_band: (f64, f64),
}

impl Default for SubmapConfig {
    fn default() -> Self {
        Self { r_max: 80.0, theta_max: FRAC_PI_2, z_band: (-1.0, 3.0) }
    }
}

impl SubmapConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_max > 0.0) {
            return Err(Error::InvalidConfig(format!("r_max must be > 0, got {}", self.r_max)));
        }
        if !(self.theta_max > 0.0 && self.theta_max <= std::f64::consts::PI) {
            return Err(Error::InvalidConfig(format!(
                "theta_max must lie in (0, pi], got {}",
                self.theta_max
            )));
        }
        if !(self.z_band.0 <= self.z_band.1) {
            return Err(Error::InvalidConfig("z_band lower bound exceeds upper bound".into()));
        }
        Ok(())
    }

    #[inline]
    fn admits(&self, center: &Pose2D, other: &Pose2D) -> bool {
        center.planar_distance(other) <= self.r_max
            && angular_difference(center.yaw, other.yaw) <= self.theta_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubmapBounds {
    pub start_index: usize,
    pub center_index: usize,
    pub end_index: usize,
}

impl SubmapBounds {
    pub fn len(&self) -> usize {
        self.end_index - self.start_index + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud3D {
    pub points: Vec<[f64; 3]>,
    /// Pose the points are expressed in.
    pub frame: Pose2D,
}

impl PointCloud3D {
    pub fn new(points: Vec<[f64; 3]>, frame: Pose2D) -> Self {
        Self { points, frame }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn search_backward_bound(traj: &Trajectory, center: usize, cfg: &SubmapConfig) -> Result<usize> {
    let poses = traj.poses();
    let c = *traj.get(center)?;
    let mut s = center;
    while s > 0 && cfg.admits(&c, &poses[s - 1]) {
        s -= 1;
    }
    Ok(s)
}

pub fn search_forward_bound(traj: &Trajectory, center: usize, cfg: &SubmapConfig) -> Result<usize> {
    let poses = traj.poses();
    let c = *traj.get(center)?;
    let mut e = center;
    while e + 1 < poses.len() && cfg.admits(&c, &poses[e + 1]) {
        e += 1;
    }
    Ok(e)
}

pub fn submap_bounds(traj: &Trajectory, center: usize, cfg: &SubmapConfig) -> Result<SubmapBounds> {
    Ok(SubmapBounds {
        start_index: search_backward_bound(traj, center, cfg)?,
        center_index: center,
        end_index: search_forward_bound(traj, center, cfg)?,
    })
}

/// Accumulates the scans in `bounds` into the center pose's frame.
///
/// `clouds[k]` must hold the scan taken at pose `bounds.start_index + k`,
/// expressed in that pose's own frame.
pub fn build_submap(
    traj: &Trajectory,
    clouds: &[PointCloud3D],
    bounds: SubmapBounds,
    cfg: &SubmapConfig,
) -> Result<PointCloud3D> {
    if !(bounds.start_index <= bounds.center_index && bounds.center_index <= bounds.end_index) {
        return Err(Error::InvalidConfig(format!("malformed submap bounds {bounds:?}")));
    }
    traj.get(bounds.end_index)?;
    if clouds.len() != bounds.len() {
        return Err(Error::ShapeMismatch(format!(
            "submap spans {} poses but {} clouds were supplied",
            bounds.len(),
            clouds.len()
        )));
    }
    let poses = traj.poses();
    let center = poses[bounds.center_index];
    let (z_lo, z_hi) = cfg.z_band;
    let r2 = cfg.r_max * cfg.r_max;

    let mut out = Vec::new();
    for (k, cloud) in clouds.iter().enumerate() {
        let pose = poses[bounds.start_index + k];
        for p in &cloud.points {
            if p[2] < z_lo || p[2] > z_hi {
                continue;
            }
            let (wx, wy) = pose.to_world(p[0], p[1]);
            let (lx, ly) = center.to_local(wx, wy);
            if lx * lx + ly * ly <= r2 {
                out.push([lx, ly, p[2]]);
            }
        }
    }
    Ok(PointCloud3D::new(out, center))
}
