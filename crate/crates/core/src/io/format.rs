//! Little-endian binary records: point clouds, radar scans, descriptors,
//! signatures and model checkpoints.
//!
//! Every record starts with a four-byte magic and a `u32` version. Decoders
//! validate every length field against the bytes actually present before
//! allocating, and reject trailing garbage, so a corrupted file surfaces as a
//! typed error instead of a silently different payload.

use crate::descriptor::{Modality, PolarDescriptor, RadarPolarScan};
use crate::error::{Error, FormatError, Result};
use crate::grid::Grid;
use crate::net::{Architecture, ConvLayer, NetParams, LAYER_COUNT};
use crate::spectral::SpectralSignature;
use crate::train::{AdamState, Model, TrainState};

pub const VERSION: u32 = 1;
pub const CLOUD_MAGIC: [u8; 4] = *b"PLCD";
pub const SCAN_MAGIC: [u8; 4] = *b"RADR";
pub const DESCRIPTOR_MAGIC: [u8; 4] = *b"SCTX";
pub const SIGNATURE_MAGIC: [u8; 4] = *b"SIGF";
pub const CHECKPOINT_MAGIC: [u8; 4] = *b"HPRN";

type FResult<T> = std::result::Result<T, FormatError>;

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn header(magic: [u8; 4]) -> Self {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(&magic);
        w.u32(VERSION);
        w
    }
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32s(&mut self, vs: &[f64]) {
        self.0.reserve(vs.len() * 4);
        for &v in vs {
            self.0.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fn len_u32(&mut self, n: usize, field: &'static str) -> Result<()> {
        let v = u32::try_from(n).map_err(|_| FormatError::InvalidField { field, reason: format!("{n} exceeds u32") })?;
        self.u32(v);
        Ok(())
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn open(buf: &'a [u8], magic: [u8; 4]) -> FResult<Self> {
        let mut r = Reader { buf, pos: 0 };
        let found: [u8; 4] = r.take(4)?.try_into().expect("four bytes");
        if found != magic {
            return Err(FormatError::BadMagic { expected: magic, found });
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        Ok(r)
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> FResult<&'a [u8]> {
        if n > self.remaining() {
            return Err(FormatError::Truncated { needed: n, available: self.remaining() });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> FResult<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> FResult<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("four bytes")))
    }
    fn u64(&mut self) -> FResult<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }
    fn f64(&mut self) -> FResult<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }

    /// `count` items of `width` bytes, checked against the remaining length
    /// before anything is allocated.
    fn block(&mut self, count: u64, width: usize) -> FResult<&'a [u8]> {
        let bytes = usize::try_from(count)
            .ok()
            .and_then(|c| c.checked_mul(width))
            .ok_or(FormatError::Truncated { needed: usize::MAX, available: self.remaining() })?;
        self.take(bytes)
    }

    fn f32s(&mut self, count: u64) -> FResult<Vec<f64>> {
        Ok(self.block(count, 4)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("four bytes")) as f64).collect())
    }

    fn finish(self) -> FResult<()> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(FormatError::TrailingBytes(n)),
        }
    }
}

fn finite(values: &[f64], field: &'static str) -> FResult<()> {
    match values.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(i) => Err(FormatError::InvalidField { field, reason: format!("non-finite value at {i}") }),
    }
}

fn dims(rows: u32, cols: u32, what: &str) -> FResult<u64> {
    if rows == 0 || cols == 0 {
        return Err(FormatError::Shape(format!("{what} has zero extent {rows}x{cols}")));
    }
    Ok(rows as u64 * cols as u64)
}

pub fn encode_cloud(points: &[[f64; 3]]) -> Vec<u8> {
    let mut w = Writer::header(CLOUD_MAGIC);
    w.u64(points.len() as u64);
    for p in points {
        p.iter().for_each(|&v| w.f64(v));
    }
    w.0
}

pub fn decode_cloud(buf: &[u8]) -> Result<Vec<[f64; 3]>> {
    let mut r = Reader::open(buf, CLOUD_MAGIC)?;
    let count = r.u64()?;
    let block = r.block(count, 24)?;
    r.finish()?;
    let values: Vec<f64> = block.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes"))).collect();
    finite(&values, "points")?;
    Ok(values.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
}

pub fn encode_scan(scan: &RadarPolarScan) -> Result<Vec<u8>> {
    let mut w = Writer::header(SCAN_MAGIC);
    w.len_u32(scan.n_azimuth, "n_azimuth")?;
    w.len_u32(scan.n_range, "n_range")?;
    w.f64(scan.range_resolution);
    w.f32s(&scan.intensities);
    Ok(w.0)
}

pub fn decode_scan(buf: &[u8]) -> Result<RadarPolarScan> {
    let mut r = Reader::open(buf, SCAN_MAGIC)?;
    let (n_az, n_range) = (r.u32()?, r.u32()?);
    let res = r.f64()?;
    let count = dims(n_az, n_range, "radar scan")?;
    let intensities = r.f32s(count)?;
    r.finish()?;
    if !(res > 0.0 && res.is_finite()) {
        return Err(FormatError::InvalidField { field: "range_resolution", reason: format!("{res}") }.into());
    }
    finite(&intensities, "intensities")?;
    RadarPolarScan::new(n_az as usize, n_range as usize, res, intensities)
}

pub fn encode_descriptor(d: &PolarDescriptor) -> Result<Vec<u8>> {
    let mut w = Writer::header(DESCRIPTOR_MAGIC);
    w.u8(d.modality.code());
    w.len_u32(d.rings(), "rings")?;
    w.len_u32(d.sectors(), "sectors")?;
    w.f32s(d.values.as_slice());
    Ok(w.0)
}

pub fn decode_descriptor(buf: &[u8]) -> Result<PolarDescriptor> {
    let mut r = Reader::open(buf, DESCRIPTOR_MAGIC)?;
    let code = r.u8()?;
    let modality = Modality::from_code(code)
        .ok_or_else(|| FormatError::InvalidField { field: "modality", reason: format!("unknown code {code}") })?;
    let (rings, sectors) = (r.u32()?, r.u32()?);
    let values = r.f32s(dims(rings, sectors, "descriptor")?)?;
    r.finish()?;
    finite(&values, "values")?;
    Ok(PolarDescriptor { modality, values: Grid::from_vec(rings as usize, sectors as usize, values)? })
}

pub fn encode_signature(s: &SpectralSignature) -> Result<Vec<u8>> {
    let mut w = Writer::header(SIGNATURE_MAGIC);
    w.len_u32(s.values.rows(), "h")?;
    w.len_u32(s.values.cols(), "w")?;
    w.f32s(s.values.as_slice());
    Ok(w.0)
}

pub fn decode_signature(buf: &[u8]) -> Result<SpectralSignature> {
    let mut r = Reader::open(buf, SIGNATURE_MAGIC)?;
    let (h, w) = (r.u32()?, r.u32()?);
    let values = r.f32s(dims(h, w, "signature")?)?;
    r.finish()?;
    finite(&values, "values")?;
    Ok(SpectralSignature { values: Grid::from_vec(h as usize, w as usize, values)? })
}

/// Encodes a training state. A shared model is stored as its nine layers, a
/// dual model as the radar layers followed by the lidar layers.
pub fn encode_checkpoint(state: &TrainState) -> Result<Vec<u8>> {
    let nets = state.model.nets();
    if state.optimizers.len() != nets.len() {
        return Err(Error::ShapeMismatch("one optimizer state per network is required".into()));
    }
    let mut w = Writer::header(CHECKPOINT_MAGIC);
    w.u64(state.step);
    w.u64(state.seed);
    w.len_u32(nets.len() * LAYER_COUNT, "layer_count")?;
    for net in &nets {
        for l in &net.layers {
            for d in [l.out_channels, l.in_channels, 3, 3] {
                w.len_u32(d, "shape")?;
            }
            w.f32s(&l.weights);
            w.f32s(&l.bias);
        }
    }
    // Moments follow the parameter layout: first moments, then second, per network.
    for opt in &state.optimizers {
        w.f32s(&opt.m);
        w.f32s(&opt.v);
    }
    Ok(w.0)
}

pub fn decode_checkpoint(buf: &[u8]) -> Result<TrainState> {
    let mut r = Reader::open(buf, CHECKPOINT_MAGIC)?;
    let step = r.u64()?;
    let seed = r.u64()?;
    let layer_count = r.u32()? as usize;
    if layer_count != LAYER_COUNT && layer_count != 2 * LAYER_COUNT {
        return Err(FormatError::Shape(format!("{layer_count} layers; expected {LAYER_COUNT} or {}", 2 * LAYER_COUNT)).into());
    }
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let (o, i, kh, kw) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?);
        if kh != 3 || kw != 3 || o == 0 || i == 0 {
            return Err(FormatError::Shape(format!("layer shape {o}x{i}x{kh}x{kw}")).into());
        }
        let weights = r.f32s(o as u64 * i as u64 * 9)?;
        let bias = r.f32s(o as u64)?;
        let mut layer = ConvLayer::zeros(o as usize, i as usize);
        layer.weights = weights;
        layer.bias = bias;
        layers.push(layer);
    }
    let mut nets = Vec::new();
    for chunk in layers.chunks(LAYER_COUNT) {
        let shapes: Vec<(usize, usize)> = chunk.iter().map(|l| (l.out_channels, l.in_channels)).collect();
        let arch: Architecture = Architecture::from_layer_shapes(&shapes).map_err(FormatError::Shape)?;
        nets.push(NetParams { arch, layers: chunk.to_vec() });
    }
    let mut optimizers = Vec::with_capacity(nets.len());
    for net in &nets {
        let n = net.parameter_count() as u64;
        let mut opt = AdamState::new(0);
        opt.m = r.f32s(n)?;
        opt.v = r.f32s(n)?;
        opt.step = step;
        optimizers.push(opt);
    }
    r.finish()?;
    for (net, opt) in nets.iter().zip(&optimizers) {
        finite(&net.flat_values(), "weights")?;
        finite(&opt.m, "first_moment")?;
        finite(&opt.v, "second_moment")?;
        if opt.v.iter().any(|v| *v < 0.0) {
            return Err(FormatError::InvalidField { field: "second_moment", reason: "negative entry".into() }.into());
        }
    }
    let model = Model::from_nets(nets)?;
    Ok(TrainState { model, optimizers, step, epoch: 0, seed, history: Vec::new() })
}
