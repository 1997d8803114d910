//! Triplet and cross-modal losses over signatures, with exact (sub)gradients.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// A scalar loss and its gradient with respect to each input signature.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub grads: Vec<Grid>,
}

/// Slot of a signature in the six-signature layout used by
/// [`joint_triplet_loss`]: role-major, radar before lidar.
pub const fn slot(role: Role, radar: bool) -> usize {
    role as usize * 2 + if radar { 0 } else { 1 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Anchor = 0,
    Positive = 1,
    Negative = 2,
}

fn same_shape(sigs: &[&Grid]) -> Result<()> {
    if let Some(first) = sigs.first() {
        if let Some(bad) = sigs.iter().find(|s| s.shape() != first.shape()) {
            return Err(Error::ShapeMismatch(format!(
                "signature shapes {:?} and {:?} differ",
                first.shape(),
                bad.shape()
            )));
        }
    }
    Ok(())
}

/// `||a - b||` and its gradient with respect to `a` (zero where `a == b`).
fn distance_and_direction(a: &Grid, b: &Grid) -> (f64, Vec<f64>) {
    let diff: Vec<f64> = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x - y).collect();
    let d = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    if d == 0.0 {
        return (0.0, vec![0.0; diff.len()]);
    }
    (d, diff.into_iter().map(|v| v / d).collect())
}

fn axpy(g: &mut Grid, s: f64, dir: &[f64]) {
    g.as_mut_slice().iter_mut().zip(dir).for_each(|(x, d)| *x += s * d);
}

/// Hinge `max(0, m + ||a - p|| - ||a - n||)`, accumulating `scale` times its
/// subgradient into `grads` at slots `ia`, `ip`, `i_n`. Returns the unscaled hinge value.
fn hinge(a: &Grid, p: &Grid, n: &Grid, margin: f64, scale: f64, grads: &mut [Grid], ia: usize, ip: usize, i_n: usize) -> f64 {
    let (dp, up) = distance_and_direction(a, p);
    let (dn, un) = distance_and_direction(a, n);
    let h = margin + dp - dn;
    if h <= 0.0 {
        return 0.0;
    }
    // d(dp)/da = up, d(dp)/dp = -up; d(dn)/da = un, d(dn)/dn = -un.
    axpy(&mut grads[ia], scale, &up);
    axpy(&mut grads[ia], -scale, &un);
    axpy(&mut grads[ip], -scale, &up);
    axpy(&mut grads[i_n], scale, &un);
    h
}

/// Mean of the triplet hinge over all eight radar/lidar role assignments.
///
/// `sigs` follows [`slot`]: anchor radar, anchor lidar, positive radar,
/// positive lidar, negative radar, negative lidar.
pub fn joint_triplet_loss(sigs: [&Grid; 6], margin: f64) -> Result<LossGrad> {
    same_shape(&sigs)?;
    let (r, c) = sigs[0].shape();
    let mut grads = vec![Grid::zeros(r, c); 6];
    let mut value = 0.0;
    for code in 0..8 {
        let ia = slot(Role::Anchor, code & 1 == 0);
        let ip = slot(Role::Positive, code & 2 == 0);
        let i_n = slot(Role::Negative, code & 4 == 0);
        value += hinge(sigs[ia], sigs[ip], sigs[i_n], margin, 0.125, &mut grads, ia, ip, i_n);
    }
    Ok(LossGrad { value: value / 8.0, grads })
}

/// Plain triplet hinge within one modality; gradients for `[a, p, n]`.
pub fn triplet_loss(a: &Grid, p: &Grid, n: &Grid, margin: f64) -> Result<LossGrad> {
    same_shape(&[a, p, n])?;
    let (r, c) = a.shape();
    let mut grads = vec![Grid::zeros(r, c); 3];
    let value = hinge(a, p, n, margin, 1.0, &mut grads, 0, 1, 2);
    Ok(LossGrad { value, grads })
}

/// Mean over same-place pairs of `||radar - lidar||`. Gradients come back
/// interleaved: radar of pair 0, lidar of pair 0, radar of pair 1, ...
pub fn transform_loss(pairs: &[(&Grid, &Grid)]) -> Result<LossGrad> {
    if pairs.is_empty() {
        return Ok(LossGrad { value: 0.0, grads: Vec::new() });
    }
    let flat: Vec<&Grid> = pairs.iter().flat_map(|(r, l)| [*r, *l]).collect();
    same_shape(&flat)?;
    let scale = 1.0 / pairs.len() as f64;
    let (rows, cols) = pairs[0].0.shape();
    let mut value = 0.0;
    let mut grads = Vec::with_capacity(2 * pairs.len());
    for (r, l) in pairs {
        let (d, u) = distance_and_direction(r, l);
        value += d;
        let mut gr = Grid::zeros(rows, cols);
        let mut gl = Grid::zeros(rows, cols);
        axpy(&mut gr, scale, &u);
        axpy(&mut gl, -scale, &u);
        grads.push(gr);
        grads.push(gl);
    }
    Ok(LossGrad { value: value * scale, grads })
}

/// `l1 + alpha * l2`; both must carry gradients for the same signatures.
pub fn combined_loss(l1: &LossGrad, l2: &LossGrad, alpha: f64) -> Result<LossGrad> {
    if l1.grads.len() != l2.grads.len() {
        return Err(Error::ShapeMismatch(format!(
            "combining losses over {} and {} signatures",
            l1.grads.len(),
            l2.grads.len()
        )));
    }
    let mut grads = l1.grads.clone();
    for (g, h) in grads.iter_mut().zip(&l2.grads) {
        if g.shape() != h.shape() {
            return Err(Error::ShapeMismatch("gradient shapes differ".into()));
        }
        g.as_mut_slice().iter_mut().zip(h.as_slice()).for_each(|(x, y)| *x += alpha * y);
    }
    Ok(LossGrad { value: l1.value + alpha * l2.value, grads })
}
