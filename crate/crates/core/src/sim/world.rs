//! Static 2D worlds of walls and poles, and ray casting against them.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::keyed_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    /// Side of the square world `[0, extent]^2`, meters.
    pub extent: f64,
    pub wall_count: usize,
    pub pole_count: usize,
    pub reflectivity: (f64, f64),
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self { extent: 400.0, wall_count: 60, pole_count: 200, reflectivity: (0.3, 1.0), seed: 0 }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.extent.is_finite() && self.extent > 0.0) {
            return Err(Error::InvalidConfig(format!("world extent must be > 0, got {}", self.extent)));
        }
        let (lo, hi) = self.reflectivity;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(Error::InvalidConfig(format!("reflectivity range [{lo}, {hi}] must lie in [0, 1]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wall {
    pub a: [f64; 2],
    pub b: [f64; 2],
    /// Top edge in the sensor frame; lidar beams above it pass over.
    pub top: f64,
    pub reflectivity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pole {
    pub center: [f64; 2],
    pub radius: f64,
    pub top: f64,
    pub reflectivity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub extent: f64,
    pub walls: Vec<Wall>,
    pub poles: Vec<Pole>,
}

/// First intersection of a ray with the world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub range: f64,
    pub reflectivity: f64,
}

const WALL_LENGTH: (f64, f64) = (8.0, 40.0);
const POLE_RADIUS: (f64, f64) = (0.15, 0.6);

pub fn generate_world(cfg: &WorldConfig) -> Result<World> {
    cfg.validate()?;
    let e = cfg.extent;
    let mut rng = keyed_rng(cfg.seed, &[0x5701]);
    let refl = |rng: &mut ChaCha8Rng| {
        let (lo, hi) = cfg.reflectivity;
        if hi > lo {
            rng.random_range(lo..hi)
        } else {
            lo
        }
    };
    let mut walls = Vec::with_capacity(cfg.wall_count);
    while walls.len() < cfg.wall_count {
        let a = [rng.random_range(0.0..e), rng.random_range(0.0..e)];
        let len = rng.random_range(WALL_LENGTH.0..WALL_LENGTH.1).min(e);
        let dir = rng.random_range(0.0..std::f64::consts::PI);
        let b = [a[0] + len * dir.cos(), a[1] + len * dir.sin()];
        let top = rng.random_range(0.5..4.0);
        let reflectivity = refl(&mut rng);
        // Rejection keeps every wall inside the square.
        if (0.0..=e).contains(&b[0]) && (0.0..=e).contains(&b[1]) {
            walls.push(Wall { a, b, top, reflectivity });
        }
    }
    let mut poles = Vec::with_capacity(cfg.pole_count);
    for _ in 0..cfg.pole_count {
        let radius = rng.random_range(POLE_RADIUS.0..POLE_RADIUS.1).min(e / 2.0);
        let center = [rng.random_range(radius..=e - radius), rng.random_range(radius..=e - radius)];
        let top = rng.random_range(0.2..6.0);
        let reflectivity = refl(&mut rng);
        poles.push(Pole { center, radius, top, reflectivity });
    }
    Ok(World { extent: e, walls, poles })
}

/// Ray parameter of the intersection with segment `a..b`, if any.
fn ray_segment(o: [f64; 2], d: [f64; 2], a: [f64; 2], b: [f64; 2]) -> Option<f64> {
    let e = [b[0] - a[0], b[1] - a[1]];
    let denom = d[0] * e[1] - d[1] * e[0];
    if denom.abs() < 1e-12 {
        return None;
    }
    let w = [a[0] - o[0], a[1] - o[1]];
    let t = (w[0] * e[1] - w[1] * e[0]) / denom;
    let u = (w[0] * d[1] - w[1] * d[0]) / denom;
    (t >= 0.0 && (0.0..=1.0).contains(&u)).then_some(t)
}

/// Ray parameter of the entry point into a disk; `None` from inside.
fn ray_disk(o: [f64; 2], d: [f64; 2], c: [f64; 2], r: f64) -> Option<f64> {
    let w = [o[0] - c[0], o[1] - c[1]];
    let b = w[0] * d[0] + w[1] * d[1];
    let cc = w[0] * w[0] + w[1] * w[1] - r * r;
    if cc <= 0.0 {
        return None;
    }
    let disc = b * b - cc;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t >= 0.0).then_some(t)
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let e = [b[0] - a[0], b[1] - a[1]];
    let len2 = e[0] * e[0] + e[1] * e[1];
    let s = if len2 > 0.0 { (((p[0] - a[0]) * e[0] + (p[1] - a[1]) * e[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p[0] - a[0] - s * e[0]).hypot(p[1] - a[1] - s * e[1])
}

impl World {
    pub fn is_empty(&self) -> bool {
        self.walls.is_empty() && self.poles.is_empty()
    }

    /// Distance from `p` to the nearest primitive surface (infinite when empty).
    pub fn clearance(&self, p: [f64; 2]) -> f64 {
        let walls = self.walls.iter().map(|w| point_segment_distance(p, w.a, w.b));
        let poles = self.poles.iter().map(|q| (p[0] - q.center[0]).hypot(p[1] - q.center[1]) - q.radius);
        walls.chain(poles).fold(f64::INFINITY, f64::min)
    }

    /// Primitives that can be hit within `max_range` of `origin`.
    pub fn visible_from(&self, origin: [f64; 2], max_range: f64) -> World {
        let walls = self
            .walls
            .iter()
            .filter(|w| point_segment_distance(origin, w.a, w.b) <= max_range)
            .copied()
            .collect();
        let poles = self
            .poles
            .iter()
            .filter(|q| (origin[0] - q.center[0]).hypot(origin[1] - q.center[1]) - q.radius <= max_range)
            .copied()
            .collect();
        World { extent: self.extent, walls, poles }
    }

    /// Nearest hit along `angle` among primitives whose top is at least `min_top`.
    pub fn cast(&self, origin: [f64; 2], angle: f64, min_top: f64) -> Option<Hit> {
        let d = [angle.cos(), angle.sin()];
        let mut best: Option<Hit> = None;
        let mut consider = |t: Option<f64>, reflectivity: f64| {
            if let Some(t) = t {
                if best.is_none_or(|b| t < b.range) {
                    best = Some(Hit { range: t, reflectivity });
                }
            }
        };
        for w in self.walls.iter().filter(|w| w.top >= min_top) {
            consider(ray_segment(origin, d, w.a, w.b), w.reflectivity);
        }
        for q in self.poles.iter().filter(|q| q.top >= min_top) {
            consider(ray_disk(origin, d, q.center, q.radius), q.reflectivity);
        }
        best
    }
}
