//! Planar poses and timestamped trajectories.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Absolute wrapped difference between two headings, in `[0, pi]`.
pub fn angular_difference(a: f64, b: f64) -> f64 {
    normalize_angle(a - b).abs()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2D {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// Heading in `(-pi, pi]`.
    pub yaw: f64,
}

impl Pose2D {
    pub fn new(t: f64, x: f64, y: f64, yaw: f64) -> Self {
        Self { t, x, y, yaw: normalize_angle(yaw) }
    }

    pub fn planar_distance(&self, other: &Pose2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Maps a point expressed in this pose's frame into the world frame.
    #[inline]
    pub fn to_world(&self, px: f64, py: f64) -> (f64, f64) {
        let (s, c) = self.yaw.sin_cos();
        (c * px - s * py + self.x, s * px + c * py + self.y)
    }

    /// Maps a world point into this pose's frame.
    #[inline]
    pub fn to_local(&self, wx: f64, wy: f64) -> (f64, f64) {
        let (s, c) = self.yaw.sin_cos();
        let (dx, dy) = (wx - self.x, wy - self.y);
        (c * dx + s * dy, -s * dx + c * dy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    poses: Vec<Pose2D>,
    pub session_id: String,
}

impl Trajectory {
    pub fn new(poses: Vec<Pose2D>, session_id: impl Into<String>) -> Result<Self> {
        if poses.is_empty() {
            return Err(Error::InvalidTrajectory("a trajectory needs at least one pose".into()));
        }
        for (i, p) in poses.iter().enumerate() {
            if !(p.t.is_finite() && p.x.is_finite() && p.y.is_finite() && p.yaw.is_finite()) {
                return Err(Error::InvalidTrajectory(format!("pose {i} has non-finite fields")));
            }
        }
        if let Some(i) = poses.windows(2).position(|w| w[1].t <= w[0].t) {
            return Err(Error::InvalidTrajectory(format!(
                "timestamps not strictly increasing at pose {}",
                i + 1
            )));
        }
        let poses = poses
            .into_iter()
            .map(|p| Pose2D { yaw: normalize_angle(p.yaw), ..p })
            .collect();
        Ok(Self { poses, session_id: session_id.into() })
    }

    pub fn poses(&self) -> &[Pose2D] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn get(&self, index: usize) -> Result<&Pose2D> {
        self.poses
            .get(index)
            .ok_or(Error::IndexOutOfRange { index, len: self.poses.len() })
    }

    /// Returns the sub-trajectory `[start, end)` as a new session.
    pub fn slice(&self, start: usize, end: usize, session_id: impl Into<String>) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::IndexOutOfRange { index: end, len: self.len() });
        }
        Self::new(self.poses[start..end].to_vec(), session_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angular_difference_examples() {
        assert!((angular_difference(0.1, -0.1) - 0.2).abs() < 1e-15);
        assert!((angular_difference(PI - 0.05, -PI + 0.05) - 0.1).abs() < 1e-12);
        assert_eq!(angular_difference(1.0, 1.0), 0.0);
    }

    #[test]
    fn normalize_angle_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(7.0) - (7.0 - 2.0 * PI)).abs() < 1e-12);
        for k in -20..20 {
            let a = normalize_angle(k as f64 * 0.77);
            assert!(a > -PI && a <= PI);
        }
    }

    #[test]
    fn rejects_non_monotone_timestamps() {
        let p = |t| Pose2D::new(t, 0.0, 0.0, 0.0);
        assert!(Trajectory::new(vec![p(0.0), p(1.0), p(1.0)], "s").is_err());
        assert!(Trajectory::new(vec![], "s").is_err());
    }

    #[test]
    fn local_world_round_trip() {
        let p = Pose2D::new(0.0, 3.0, -2.0, 0.7);
        let (wx, wy) = p.to_world(1.5, 4.0);
        let (lx, ly) = p.to_local(wx, wy);
        assert!((lx - 1.5).abs() < 1e-12 && (ly - 4.0).abs() < 1e-12);
    }
}
