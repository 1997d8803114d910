//! Rotation-invariant spectral signatures.
//!
//! A heading change of the vehicle is a circular shift of the polar map along
//! the sector axis, and the magnitude of the 2D DFT is invariant to circular
//! shifts. The signature keeps the central 32x32 block of the centered
//! magnitude spectrum and L2-normalizes it.

use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Stabilizer inside the magnitude square root so its gradient is defined at zero.
pub const MAGNITUDE_EPS: f64 = 1e-12;
/// Side length of the square low-frequency crop.
pub const SIGNATURE_SIZE: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSignature {
    pub values: Grid,
}

impl SpectralSignature {
    pub fn zeros() -> Self {
        Self { values: Grid::zeros(SIGNATURE_SIZE, SIGNATURE_SIZE) }
    }

    pub fn norm(&self) -> f64 {
        self.values.norm()
    }
}

pub fn signature_distance(a: &SpectralSignature, b: &SpectralSignature) -> Result<f64> {
    if a.values.shape() != b.values.shape() {
        return Err(Error::ShapeMismatch(format!(
            "signature shapes {:?} and {:?} differ",
            a.values.shape(),
            b.values.shape()
        )));
    }
    Ok(flat_distance(a.values.as_slice(), b.values.as_slice()))
}

#[inline]
pub(crate) fn flat_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Cached DFT plans for one map shape. Plans are immutable and shareable.
pub struct SpectralEngine {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

/// Everything the backward pass needs from a signature evaluation.
#[derive(Debug, Clone)]
pub struct SignatureTrace {
    /// Uncentered complex spectrum, row-major.
    spectrum: Vec<Complex<f64>>,
    /// Centered magnitude spectrum.
    magnitude: Grid,
    /// Norm of the crop before normalization; zero marks the all-zero input case.
    crop_norm: f64,
    pub signature: SpectralSignature,
}

impl SpectralEngine {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            col_fwd: planner.plan_fft_forward(rows),
            row_inv: planner.plan_fft_inverse(cols),
            col_inv: planner.plan_fft_inverse(rows),
        }
    }

    /// Shared engine for the standard 40x120 map.
    pub fn standard() -> &'static SpectralEngine {
        static ENGINE: OnceLock<SpectralEngine> = OnceLock::new();
        ENGINE.get_or_init(|| SpectralEngine::new(40, 120))
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn transform(&self, buf: &mut [Complex<f64>], inverse: bool) {
        let (rows, cols) = (self.rows, self.cols);
        let (row_plan, col_plan) =
            if inverse { (&self.row_inv, &self.col_inv) } else { (&self.row_fwd, &self.col_fwd) };
        row_plan.process(buf);
        let mut t = vec![Complex::new(0.0, 0.0); rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                t[c * rows + r] = buf[r * cols + c];
            }
        }
        col_plan.process(&mut t);
        for c in 0..cols {
            for r in 0..rows {
                buf[r * cols + c] = t[c * rows + r];
            }
        }
    }

    fn spectrum(&self, map: &Grid) -> Result<Vec<Complex<f64>>> {
        map.ensure_shape(self.rows, self.cols, "spectral input")?;
        let mut buf: Vec<Complex<f64>> = map.as_slice().iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.transform(&mut buf, false);
        Ok(buf)
    }

    /// Centered magnitude of the 2D DFT; the zero frequency lands at `(rows/2, cols/2)`.
    pub fn dft2_magnitude(&self, map: &Grid) -> Result<Grid> {
        let spec = self.spectrum(map)?;
        Ok(self.centered_magnitude(&spec))
    }

    fn centered_magnitude(&self, spec: &[Complex<f64>]) -> Grid {
        let (rows, cols) = (self.rows, self.cols);
        Grid::from_fn(rows, cols, |r, c| {
            let z = spec[((r + rows / 2) % rows) * cols + (c + cols / 2) % cols];
            (z.norm_sqr() + MAGNITUDE_EPS).sqrt()
        })
    }

    pub fn signature(&self, embedding: &Grid) -> Result<SpectralSignature> {
        Ok(self.signature_traced(embedding)?.signature)
    }

    pub fn signature_traced(&self, embedding: &Grid) -> Result<SignatureTrace> {
        let spectrum = self.spectrum(embedding)?;
        let magnitude = self.centered_magnitude(&spectrum);
        if embedding.is_all_zero() {
            return Ok(SignatureTrace { spectrum, magnitude, crop_norm: 0.0, signature: SpectralSignature::zeros() });
        }
        let mut crop = lowpass_crop(&magnitude)?;
        let crop_norm = crop.norm();
        crop.as_mut_slice().iter_mut().for_each(|v| *v /= crop_norm);
        Ok(SignatureTrace { spectrum, magnitude, crop_norm, signature: SpectralSignature { values: crop } })
    }

    /// Gradient of a scalar loss with respect to the embedding, given its
    /// gradient with respect to the signature.
    pub fn signature_backward(&self, trace: &SignatureTrace, grad_signature: &Grid) -> Result<Grid> {
        grad_signature.ensure_shape(SIGNATURE_SIZE, SIGNATURE_SIZE, "signature gradient")?;
        let (rows, cols) = (self.rows, self.cols);
        if trace.crop_norm == 0.0 {
            return Ok(Grid::zeros(rows, cols));
        }
        // Through the normalization: (g - s (s.g)) / |c|.
        let s = trace.signature.values.as_slice();
        let g = grad_signature.as_slice();
        let sg: f64 = s.iter().zip(g).map(|(a, b)| a * b).sum();
        let (r0, c0) = crop_origin(rows, cols);
        let mut buf = vec![Complex::new(0.0, 0.0); rows * cols];
        for i in 0..SIGNATURE_SIZE {
            for j in 0..SIGNATURE_SIZE {
                let k = i * SIGNATURE_SIZE + j;
                let g_mag = (g[k] - s[k] * sg) / trace.crop_norm;
                let (r, c) = (r0 + i, c0 + j);
                // Undo the centering to address the raw spectrum.
                let idx = ((r + rows / 2) % rows) * cols + (c + cols / 2) % cols;
                buf[idx] = trace.spectrum[idx] * (g_mag / trace.magnitude.get(r, c));
            }
        }
        // d|F_k|/dx_n = Re(conj(F_k) w^{kn}) / |F_k|, which sums to the real
        // part of an unnormalized inverse DFT.
        self.transform(&mut buf, true);
        Grid::from_vec(rows, cols, buf.into_iter().map(|z| z.re).collect())
    }
}

fn crop_origin(rows: usize, cols: usize) -> (usize, usize) {
    (rows / 2 - SIGNATURE_SIZE / 2, cols / 2 - SIGNATURE_SIZE / 2)
}

/// Central 32x32 block of a centered spectrum (rows 4..=35, cols 44..=75 for 40x120).
pub fn lowpass_crop(magnitude: &Grid) -> Result<Grid> {
    let (rows, cols) = magnitude.shape();
    if rows < SIGNATURE_SIZE || cols < SIGNATURE_SIZE {
        return Err(Error::ShapeMismatch(format!(
            "cannot crop {SIGNATURE_SIZE}x{SIGNATURE_SIZE} from a {rows}x{cols} spectrum"
        )));
    }
    let (r0, c0) = crop_origin(rows, cols);
    Ok(Grid::from_fn(SIGNATURE_SIZE, SIGNATURE_SIZE, |i, j| magnitude.get(r0 + i, c0 + j)))
}

pub fn dft2_magnitude(map: &Grid) -> Result<Grid> {
    SpectralEngine::new(map.rows(), map.cols()).dft2_magnitude(map)
}

/// Signature of a 40x120 embedding using the shared engine.
pub fn signature(embedding: &Grid) -> Result<SpectralSignature> {
    SpectralEngine::standard().signature(embedding)
}
