//! Ground truth, recall@1, precision-recall sweeps and loop extraction.
//!
//! Curves are per query: each query contributes its single best match, which
//! is predicted as a place match when its distance is under the threshold.
//! Queries with no database entry within the distance threshold cannot be
//! recalled, so they are left out of recall's denominator, but a prediction
//! for them still counts as a false positive.

use crate::error::{Error, Result};
use crate::retrieval::SimilarityMatrix;
use crate::trajectory::Pose2D;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    /// Planar distance within which a retrieval counts as correct, meters.
    pub distance_threshold: f64,
    pub pr_thresholds: usize,
    /// Loop candidates closer than this many indices are ignored.
    pub exclusion_window: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { distance_threshold: 3.0, pr_thresholds: 200, exclusion_window: 50 }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.distance_threshold > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "distance threshold must be > 0, got {}",
                self.distance_threshold
            )));
        }
        if self.pr_thresholds == 0 {
            return Err(Error::InvalidConfig("pr threshold count must be >= 1".into()));
        }
        Ok(())
    }
}

/// Best database match of one query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Top1 {
    /// Index into the database pose list.
    pub index: usize,
    pub distance: f64,
}

/// `gt[i][j]` is true when query `i` lies within `d` of database entry `j`.
pub fn ground_truth_matrix(query_poses: &[Pose2D], db_poses: &[Pose2D], d: f64) -> Vec<Vec<bool>> {
    query_poses
        .iter()
        .map(|q| db_poses.iter().map(|p| q.planar_distance(p) <= d).collect())
        .collect()
}

fn check_results(results: &[Top1], query_poses: &[Pose2D], db_poses: &[Pose2D]) -> Result<()> {
    if results.len() != query_poses.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} results for {} queries",
            results.len(),
            query_poses.len()
        )));
    }
    if let Some(r) = results.iter().find(|r| r.index >= db_poses.len()) {
        return Err(Error::ShapeMismatch(format!(
            "result index {} outside a database of {}",
            r.index,
            db_poses.len()
        )));
    }
    Ok(())
}

/// Whether each query's best match lies within `d` of it.
pub fn top1_correct(results: &[Top1], query_poses: &[Pose2D], db_poses: &[Pose2D], d: f64) -> Result<Vec<bool>> {
    check_results(results, query_poses, db_poses)?;
    Ok(results.iter().zip(query_poses).map(|(r, q)| q.planar_distance(&db_poses[r.index]) <= d).collect())
}

/// Percentage of queries whose best match lies within `d`.
pub fn recall_at_1(results: &[Top1], query_poses: &[Pose2D], db_poses: &[Pose2D], d: f64) -> Result<f64> {
    let correct = top1_correct(results, query_poses, db_poses, d)?;
    if correct.is_empty() {
        return Ok(0.0);
    }
    Ok(100.0 * correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

impl PrPoint {
    pub fn f1(&self) -> f64 {
        let s = self.precision + self.recall;
        if s > 0.0 {
            2.0 * self.precision * self.recall / s
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub max_f1: f64,
}

/// `count` thresholds evenly spanning `[min, max]` of `distances`.
pub fn sweep_thresholds(distances: &[f64], count: usize) -> Vec<f64> {
    let lo = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = distances.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if distances.is_empty() {
        return Vec::new();
    }
    (0..count)
        .map(|k| if k + 1 == count { hi } else { lo + (hi - lo) * k as f64 / (count - 1) as f64 })
        .collect()
}

/// Precision-recall sweep over top-1 distances.
///
/// `correct[i]` marks a top-1 within the distance threshold, `has_match[i]`
/// a query with at least one true database entry.
pub fn pr_curve(distances: &[f64], correct: &[bool], has_match: &[bool], cfg: &EvalConfig) -> Result<PrCurve> {
    cfg.validate()?;
    if distances.len() != correct.len() || distances.len() != has_match.len() {
        return Err(Error::ShapeMismatch("distances, correctness and match flags differ in length".into()));
    }
    if distances.is_empty() {
        return Err(Error::InvalidConfig("a precision-recall sweep needs at least one query".into()));
    }
    let positives = has_match.iter().filter(|&&m| m).count();
    let points: Vec<PrPoint> = sweep_thresholds(distances, cfg.pr_thresholds)
        .into_iter()
        .map(|tau| {
            let (mut tp, mut fp) = (0usize, 0usize);
            for (d, &c) in distances.iter().zip(correct) {
                if *d <= tau {
                    if c {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
            let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
            let recall = if positives == 0 { 0.0 } else { tp as f64 / positives as f64 };
            PrPoint { threshold: tau, precision, recall }
        })
        .collect();
    let max_f1 = points.iter().map(PrPoint::f1).fold(0.0, f64::max);
    Ok(PrCurve { points, max_f1 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub recall_at_1: f64,
    pub max_f1: f64,
    pub curve: Vec<PrPoint>,
}

impl Metrics {
    pub fn to_csv(&self) -> String {
        format!("metric,value\nrecall_at_1,{:?}\nmax_f1,{:?}\n", self.recall_at_1, self.max_f1)
    }

    pub fn curve_csv(&self) -> String {
        let mut out = String::from("threshold,precision,recall\n");
        for p in &self.curve {
            out.push_str(&format!("{:?},{:?},{:?}\n", p.threshold, p.precision, p.recall));
        }
        out
    }
}

/// Recall@1 and the precision-recall sweep for one set of top-1 results.
pub fn evaluate(results: &[Top1], query_poses: &[Pose2D], db_poses: &[Pose2D], cfg: &EvalConfig) -> Result<Metrics> {
    cfg.validate()?;
    let d = cfg.distance_threshold;
    let correct = top1_correct(results, query_poses, db_poses, d)?;
    let has_match: Vec<bool> = ground_truth_matrix(query_poses, db_poses, d).iter().map(|row| row.iter().any(|&g| g)).collect();
    let distances: Vec<f64> = results.iter().map(|r| r.distance).collect();
    let curve = pr_curve(&distances, &correct, &has_match, cfg)?;
    Ok(Metrics { recall_at_1: recall_at_1(results, query_poses, db_poses, d)?, max_f1: curve.max_f1, curve: curve.points })
}

/// Pairs `(i, j)` with `j + exclusion_window <= i` and similarity at least
/// `threshold`, in row-major order.
pub fn detect_loops(sim: &SimilarityMatrix, threshold: f64, exclusion_window: usize) -> Result<Vec<(usize, usize)>> {
    let (rows, cols) = sim.values.shape();
    if rows != cols {
        return Err(Error::ShapeMismatch(format!("loop detection needs a square matrix, got {rows}x{cols}")));
    }
    let mut pairs = Vec::new();
    for i in 0..rows {
        for j in 0..(i + 1).saturating_sub(exclusion_window) {
            if sim.values.get(i, j) >= threshold {
                pairs.push((i, j));
            }
        }
    }
    Ok(pairs)
}
