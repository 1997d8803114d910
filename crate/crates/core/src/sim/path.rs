//! Smooth exploratory trajectories that end by retracing their own path.
//!
//! The exploring part advances a fixed step per pose and steers away from
//! obstacles, the world border and its own earlier track. The revisit part
//! walks the explored path backwards with a small smooth lateral offset and a
//! heading offset drawn once from the full circle, so revisited places are
//! observed from a rotated sensor frame.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::world::World;
use crate::error::{Error, Result};
use crate::rng::keyed_rng;
use crate::trajectory::{normalize_angle, Pose2D, Trajectory};

/// Distance between consecutive exploring poses, meters.
pub const STEP: f64 = 0.42;
/// Seconds between consecutive poses.
pub const PERIOD: f64 = 0.1;
const MAX_TURN: f64 = 0.05;
const TURN_CHOICES: usize = 13;
const LOOKAHEAD_POINTS: usize = 10;
const LOOKAHEAD_SPACING: f64 = 2.0;
const OBSTACLE_MARGIN: f64 = 3.0;
const TRACK_MARGIN: f64 = 10.0;
/// Poses this recent are not treated as "old track" by the avoidance check.
const TRACK_AGE: usize = 60;
const LATERAL_AMPLITUDE: (f64, f64) = (0.15, 0.5);
const LATERAL_PERIOD: (f64, f64) = (150.0, 300.0);
const POSITION_JITTER: f64 = 0.008;
const YAW_JITTER: f64 = 0.01;

fn border_margin(extent: f64) -> f64 {
    (0.1 * extent).min(25.0)
}

struct Explorer<'a> {
    world: &'a World,
    points: Vec<[f64; 2]>,
    headings: Vec<f64>,
}

impl Explorer<'_> {
    /// Smallest slack over the straight lookahead along `heading`; negative
    /// means some lookahead point violates a margin.
    fn slack(&self, local: &World, pos: [f64; 2], heading: f64) -> f64 {
        let e = self.world.extent;
        let bm = border_margin(e);
        let old = self.points.len().saturating_sub(TRACK_AGE);
        let mut worst = f64::INFINITY;
        for k in 1..=LOOKAHEAD_POINTS {
            let s = k as f64 * LOOKAHEAD_SPACING;
            let p = [pos[0] + s * heading.cos(), pos[1] + s * heading.sin()];
            let border = p[0].min(p[1]).min(e - p[0]).min(e - p[1]) - bm;
            let obstacle = local.clearance(p) - OBSTACLE_MARGIN;
            let track = self.points[..old]
                .iter()
                .map(|q| (p[0] - q[0]).hypot(p[1] - q[1]))
                .fold(f64::INFINITY, f64::min)
                - TRACK_MARGIN;
            worst = worst.min(border).min(obstacle).min(track);
        }
        worst
    }
}

/// A pose sequence exploring `world` for the first `(1 - revisit_fraction)`
/// share of poses, then retracing it.
pub fn generate_trajectory(world: &World, pose_count: usize, revisit_fraction: f64, seed: u64) -> Result<Trajectory> {
    if pose_count < 2 {
        return Err(Error::InvalidConfig(format!("pose count must be >= 2, got {pose_count}")));
    }
    if !(0.0..=1.0).contains(&revisit_fraction) {
        return Err(Error::InvalidConfig(format!("revisit fraction must lie in [0, 1], got {revisit_fraction}")));
    }
    let revisits = ((pose_count as f64 * revisit_fraction).round() as usize).min(pose_count - 2);
    let explore = pose_count - revisits;
    let mut rng = keyed_rng(seed, &[0x7A7B]);

    let e = world.extent;
    let bm = border_margin(e);
    let mut start = [e / 2.0, e / 2.0];
    for _ in 0..1000 {
        let p = [rng.random_range(bm..=e - bm), rng.random_range(bm..=e - bm)];
        if world.clearance(p) >= 2.0 * OBSTACLE_MARGIN {
            start = p;
            break;
        }
    }
    let mut ex = Explorer { world, points: vec![start], headings: vec![rng.random_range(-PI..PI)] };
    let drift = Normal::new(0.0, 0.2 * MAX_TURN).expect("valid std");
    let mut preferred = 0.0f64;
    let reach = LOOKAHEAD_POINTS as f64 * LOOKAHEAD_SPACING + OBSTACLE_MARGIN + STEP;
    while ex.points.len() < explore {
        let pos = *ex.points.last().expect("non-empty");
        let heading = *ex.headings.last().expect("non-empty");
        preferred = (0.9 * preferred + drift.sample(&mut rng)).clamp(-MAX_TURN, MAX_TURN);
        let local = world.visible_from(pos, reach);
        let mut best: Option<(bool, f64, f64)> = None;
        for c in 0..TURN_CHOICES {
            let turn = -MAX_TURN + 2.0 * MAX_TURN * c as f64 / (TURN_CHOICES - 1) as f64;
            let slack = ex.slack(&local, pos, heading + turn);
            let feasible = slack >= 0.0;
            // Feasible turns closest to the preferred one win; otherwise the
            // turn with the most slack.
            let key = if feasible { -(turn - preferred).abs() } else { slack };
            if best.is_none_or(|(bf, bk, _)| (feasible, key) > (bf, bk)) {
                best = Some((feasible, key, turn));
            }
        }
        let turn = best.expect("at least one candidate").2;
        let h = normalize_angle(heading + turn);
        ex.points.push([pos[0] + STEP * h.cos(), pos[1] + STEP * h.sin()]);
        ex.headings.push(h);
    }

    let mut poses: Vec<Pose2D> = ex
        .points
        .iter()
        .zip(&ex.headings)
        .enumerate()
        .map(|(i, (p, &h))| Pose2D::new(i as f64 * PERIOD, p[0], p[1], h))
        .collect();

    if revisits > 0 {
        let amplitude = rng.random_range(LATERAL_AMPLITUDE.0..LATERAL_AMPLITUDE.1);
        let period = rng.random_range(LATERAL_PERIOD.0..LATERAL_PERIOD.1);
        // The offset starts at zero so the first revisit step stays short.
        // One heading offset for the whole revisit, anywhere on the circle.
        let offset = PI - rng.random_range(0.0..TAU);
        let last = explore - 1;
        for k in 0..revisits {
            let m = (k + 1) % (2 * last);
            let s = if m <= last { last - m } else { m - last };
            let h = ex.headings[s];
            let lateral = amplitude * (TAU * k as f64 / period).sin();
            let jx = rng.random_range(-POSITION_JITTER..=POSITION_JITTER);
            let jy = rng.random_range(-POSITION_JITTER..=POSITION_JITTER);
            let jyaw = rng.random_range(-YAW_JITTER..=YAW_JITTER);
            let p = ex.points[s];
            poses.push(Pose2D::new(
                (explore + k) as f64 * PERIOD,
                p[0] - lateral * h.sin() + jx,
                p[1] + lateral * h.cos() + jy,
                h + PI + offset + jyaw,
            ));
        }
    }
    Trajectory::new(poses, format!("sim-{seed}"))
}
