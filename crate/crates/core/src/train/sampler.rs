//! Random triplet mining by planar distance.

use rand::Rng;

use crate::error::{Error, Result};
use crate::trajectory::Pose2D;

/// Indices of an anchor, a nearby positive and a distant negative location.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TripletSample {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Tries of uniform rejection sampling before falling back to enumeration.
const REJECTION_TRIES: usize = 64;

#[derive(Debug, Clone)]
pub struct TripletSampler {
    points: Vec<[f64; 2]>,
    positives: Vec<Vec<usize>>,
    /// Locations with at least one negative; anchors are drawn from these.
    anchors: Vec<usize>,
    d_neg: f64,
}

impl TripletSampler {
    pub fn new(poses: &[Pose2D], d_pos: f64, d_neg: f64) -> Result<Self> {
        if !(d_pos >= 0.0 && d_pos < d_neg) {
            return Err(Error::InvalidConfig(format!("need 0 <= d_pos < d_neg, got {d_pos} and {d_neg}")));
        }
        let points: Vec<[f64; 2]> = poses.iter().map(|p| [p.x, p.y]).collect();
        let dist = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
        let mut positives = Vec::with_capacity(points.len());
        let mut anchors = Vec::new();
        for (i, &p) in points.iter().enumerate() {
            positives.push((0..points.len()).filter(|&j| dist(p, points[j]) <= d_pos).collect());
            if points.iter().any(|&q| dist(p, q) >= d_neg) {
                anchors.push(i);
            }
        }
        if anchors.is_empty() {
            return Err(Error::DegenerateDataset(format!("no two locations are {d_neg} m or more apart")));
        }
        Ok(Self { points, positives, anchors, d_neg })
    }

    fn is_negative(&self, a: usize, j: usize) -> bool {
        let (p, q) = (self.points[a], self.points[j]);
        (p[0] - q[0]).hypot(p[1] - q[1]) >= self.d_neg
    }

    fn negative_for(&self, a: usize, rng: &mut impl Rng) -> usize {
        for _ in 0..REJECTION_TRIES {
            let j = rng.random_range(0..self.points.len());
            if self.is_negative(a, j) {
                return j;
            }
        }
        let all: Vec<usize> = (0..self.points.len()).filter(|&j| self.is_negative(a, j)).collect();
        all[rng.random_range(0..all.len())]
    }

    pub fn sample_one(&self, rng: &mut impl Rng) -> TripletSample {
        let anchor = self.anchors[rng.random_range(0..self.anchors.len())];
        let pos = &self.positives[anchor];
        let positive = pos[rng.random_range(0..pos.len())];
        let negative = self.negative_for(anchor, rng);
        TripletSample { anchor, positive, negative }
    }

    pub fn sample(&self, count: usize, rng: &mut impl Rng) -> Vec<TripletSample> {
        (0..count).map(|_| self.sample_one(rng)).collect()
    }
}

/// One batch of `batch_size` triplets over `poses`.
pub fn sample_triplets(poses: &[Pose2D], d_pos: f64, d_neg: f64, batch_size: usize, rng: &mut impl Rng) -> Result<Vec<TripletSample>> {
    Ok(TripletSampler::new(poses, d_pos, d_neg)?.sample(batch_size, rng))
}
