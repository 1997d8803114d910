//! Feature-map primitives: 3x3 convolution (circular along sectors, zero along
//! rings), 2x2 average pooling and nearest-neighbour upsampling, each with its
//! hand-written adjoint.

/// A `channels x height x width` feature map, row-major per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width, data: vec![0.0; channels * height * width] }
    }

    #[inline]
    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    pub fn concat(a: &FeatureMap, b: &FeatureMap) -> FeatureMap {
        debug_assert_eq!((a.height, a.width), (b.height, b.width));
        let mut data = Vec::with_capacity(a.data.len() + b.data.len());
        data.extend_from_slice(&a.data);
        data.extend_from_slice(&b.data);
        FeatureMap { channels: a.channels + b.channels, height: a.height, width: a.width, data }
    }

    /// Splits channel-wise into the first `first` channels and the rest.
    pub fn split(self, first: usize) -> (FeatureMap, FeatureMap) {
        let cut = first * self.plane();
        let mut head = self.data;
        let tail = head.split_off(cut);
        (
            FeatureMap { channels: first, height: self.height, width: self.width, data: head },
            FeatureMap { channels: self.channels - first, height: self.height, width: self.width, data: tail },
        )
    }

    pub fn relu(mut self) -> FeatureMap {
        self.data.iter_mut().for_each(|v| *v = v.max(0.0));
        self
    }

    /// Zeroes gradient entries whose pre-activation was not strictly positive.
    pub fn mask_relu(mut self, pre: &FeatureMap) -> FeatureMap {
        for (g, z) in self.data.iter_mut().zip(&pre.data) {
            if *z <= 0.0 {
                *g = 0.0;
            }
        }
        self
    }

    pub fn add_assign(&mut self, other: &FeatureMap) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// Pixels per vector block in the direct convolution kernels.
const LANES: usize = 8;

thread_local! {
    static POOL: std::cell::RefCell<Vec<Vec<f64>>> = const { std::cell::RefCell::new(Vec::new()) };
}

/// Zeroed temporary buffer recycled through a per-thread pool. Fresh large
/// allocations come straight from the OS and fault on first touch, which
/// costs more than the convolutions of the smaller layers.
struct Scratch(Vec<f64>);

impl Scratch {
    fn zeroed(len: usize) -> Self {
        let mut v = POOL.with(|p| p.borrow_mut().pop()).unwrap_or_default();
        v.clear();
        v.resize(len, 0.0);
        Scratch(v)
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let v = std::mem::take(&mut self.0);
        POOL.with(|p| {
            let mut p = p.borrow_mut();
            if p.len() < 16 {
                p.push(v);
            }
        });
    }
}

impl std::ops::Deref for Scratch {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::DerefMut for Scratch {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Input with a one-pixel halo: zero rows above and below, circular columns.
/// Rows are widened to a multiple of [`LANES`] (plus the halo) so every output
/// block is full width; columns past the real width wrap around as well.
struct Padded {
    height: usize,
    row_len: usize,
    data: Scratch,
}

fn padded_width(w: usize) -> usize {
    w.div_ceil(LANES) * LANES
}

impl Padded {
    fn new(input: &FeatureMap) -> Self {
        let (c, h, w) = (input.channels, input.height, input.width);
        let row_len = padded_width(w) + 2;
        let mut data = Scratch::zeroed(c * (h + 2) * row_len);
        for ci in 0..c {
            for y in 0..h {
                let src = &input.data[(ci * h + y) * w..][..w];
                let dst = &mut data[(ci * (h + 2) + y + 1) * row_len..][..row_len];
                dst[0] = src[w - 1];
                dst[1..=w].copy_from_slice(src);
                for j in w + 1..row_len {
                    dst[j] = src[(j - 1) % w];
                }
            }
        }
        Self { height: h, row_len, data }
    }

    #[inline(always)]
    fn row(&self, ci: usize, py: usize) -> &[f64] {
        &self.data[(ci * (self.height + 2) + py) * self.row_len..][..self.row_len]
    }
}

/// Eight f64 lanes. Implementations differ only in instruction set; the
/// portable one does an unfused multiply-add.
trait Lane8: Copy {
    unsafe fn load(p: *const f64) -> Self;
    unsafe fn store(self, p: *mut f64);
    unsafe fn splat(v: f64) -> Self;
    /// `a * b + c`
    unsafe fn mul_add(a: Self, b: Self, c: Self) -> Self;
    unsafe fn sum(self) -> f64;
}

#[derive(Clone, Copy)]
struct Portable([f64; LANES]);

impl Lane8 for Portable {
    #[inline(always)]
    unsafe fn load(p: *const f64) -> Self {
        Portable(std::ptr::read_unaligned(p as *const [f64; LANES]))
    }
    #[inline(always)]
    unsafe fn store(self, p: *mut f64) {
        std::ptr::write_unaligned(p as *mut [f64; LANES], self.0)
    }
    #[inline(always)]
    unsafe fn splat(v: f64) -> Self {
        Portable([v; LANES])
    }
    #[inline(always)]
    unsafe fn mul_add(a: Self, b: Self, c: Self) -> Self {
        let mut out = c.0;
        for l in 0..LANES {
            out[l] += a.0[l] * b.0[l];
        }
        Portable(out)
    }
    #[inline(always)]
    unsafe fn sum(self) -> f64 {
        self.0.iter().sum()
    }
}

#[cfg(target_arch = "x86_64")]
mod x86 {
    use super::{Lane8, LANES};
    use std::arch::x86_64::*;

    #[derive(Clone, Copy)]
    pub(super) struct Avx512(__m512d);

    impl Lane8 for Avx512 {
        #[inline(always)]
        unsafe fn load(p: *const f64) -> Self {
            Avx512(_mm512_loadu_pd(p))
        }
        #[inline(always)]
        unsafe fn store(self, p: *mut f64) {
            _mm512_storeu_pd(p, self.0)
        }
        #[inline(always)]
        unsafe fn splat(v: f64) -> Self {
            Avx512(_mm512_set1_pd(v))
        }
        #[inline(always)]
        unsafe fn mul_add(a: Self, b: Self, c: Self) -> Self {
            Avx512(_mm512_fmadd_pd(a.0, b.0, c.0))
        }
        #[inline(always)]
        unsafe fn sum(self) -> f64 {
            let mut buf = [0.0; LANES];
            _mm512_storeu_pd(buf.as_mut_ptr(), self.0);
            buf.iter().sum()
        }
    }

    #[derive(Clone, Copy)]
    pub(super) struct Avx2(__m256d, __m256d);

    impl Lane8 for Avx2 {
        #[inline(always)]
        unsafe fn load(p: *const f64) -> Self {
            Avx2(_mm256_loadu_pd(p), _mm256_loadu_pd(p.add(4)))
        }
        #[inline(always)]
        unsafe fn store(self, p: *mut f64) {
            _mm256_storeu_pd(p, self.0);
            _mm256_storeu_pd(p.add(4), self.1);
        }
        #[inline(always)]
        unsafe fn splat(v: f64) -> Self {
            Avx2(_mm256_set1_pd(v), _mm256_set1_pd(v))
        }
        #[inline(always)]
        unsafe fn mul_add(a: Self, b: Self, c: Self) -> Self {
            Avx2(_mm256_fmadd_pd(a.0, b.0, c.0), _mm256_fmadd_pd(a.1, b.1, c.1))
        }
        #[inline(always)]
        unsafe fn sum(self) -> f64 {
            let mut buf = [0.0; LANES];
            _mm256_storeu_pd(buf.as_mut_ptr(), self.0);
            _mm256_storeu_pd(buf.as_mut_ptr().add(4), self.1);
            buf.iter().sum()
        }
    }
}

/// Output rows for channels `[ob, ob+OB)`, written to `out` laid out
/// `c_out x h x padded_width(w)`.
///
/// # Safety
/// `V` must be supported by the running CPU; buffer shapes must match `padded`.
#[inline(always)]
unsafe fn conv_rows<V: Lane8, const OB: usize>(
    padded: &Padded,
    c_in: usize,
    wt: &[f64],
    bias: &[f64],
    ob: usize,
    c_out: usize,
    out: &mut [f64],
) {
    let h = padded.height;
    let wp = padded.row_len - 2;
    debug_assert!(out.len() >= c_out * h * wp && wt.len() == c_in * 9 * c_out);
    let wt = wt.as_ptr();
    for y in 0..h {
        for x0 in (0..wp).step_by(LANES) {
            let mut acc = [V::splat(0.0); OB];
            for o in 0..OB {
                acc[o] = V::splat(bias[ob + o]);
            }
            for ci in 0..c_in {
                for ky in 0..3 {
                    let row = padded.row(ci, y + ky).as_ptr().add(x0);
                    let taps = wt.add((ci * 3 + ky) * 3 * c_out + ob);
                    for kx in 0..3 {
                        let v = V::load(row.add(kx));
                        for o in 0..OB {
                            acc[o] = V::mul_add(V::splat(*taps.add(kx * c_out + o)), v, acc[o]);
                        }
                    }
                }
            }
            for o in 0..OB {
                acc[o].store(out.as_mut_ptr().add(((ob + o) * h + y) * wp + x0));
            }
        }
    }
}

#[inline(always)]
unsafe fn conv_all<V: Lane8>(padded: &Padded, c_in: usize, wt: &[f64], bias: &[f64], c_out: usize, out: &mut [f64]) {
    let mut ob = 0;
    while ob < c_out {
        match c_out - ob {
            r if r >= 8 => {
                conv_rows::<V, 8>(padded, c_in, wt, bias, ob, c_out, out);
                ob += 8;
            }
            r if r >= 4 => {
                conv_rows::<V, 4>(padded, c_in, wt, bias, ob, c_out, out);
                ob += 4;
            }
            r if r >= 2 => {
                conv_rows::<V, 2>(padded, c_in, wt, bias, ob, c_out, out);
                ob += 2;
            }
            _ => {
                conv_rows::<V, 1>(padded, c_in, wt, bias, ob, c_out, out);
                ob += 1;
            }
        }
    }
}

/// Accumulates `dW[ob..ob+OB][ci][ky][0..3]`. `grad` is the output gradient
/// laid out `c_out x h x padded_width(w)` with zeros past `w`.
#[inline(always)]
unsafe fn weight_grad_block<V: Lane8, const OB: usize>(
    padded: &Padded,
    grad: &[f64],
    ob: usize,
    ci: usize,
    ky: usize,
    c_in: usize,
    grad_w: &mut [f64],
) {
    let h = padded.height;
    let wp = padded.row_len - 2;
    let mut acc = [[V::splat(0.0); OB]; 3];
    for y in 0..h {
        let row = padded.row(ci, y + ky).as_ptr();
        for x0 in (0..wp).step_by(LANES) {
            let v = [V::load(row.add(x0)), V::load(row.add(x0 + 1)), V::load(row.add(x0 + 2))];
            for o in 0..OB {
                let d = V::load(grad.as_ptr().add(((ob + o) * h + y) * wp + x0));
                for kx in 0..3 {
                    acc[kx][o] = V::mul_add(d, v[kx], acc[kx][o]);
                }
            }
        }
    }
    for kx in 0..3 {
        for o in 0..OB {
            grad_w[(((ob + o) * c_in + ci) * 3 + ky) * 3 + kx] += acc[kx][o].sum();
        }
    }
}

#[inline(always)]
unsafe fn weight_grad_all<V: Lane8>(padded: &Padded, c_in: usize, grad: &[f64], c_out: usize, grad_w: &mut [f64]) {
    debug_assert!(grad.len() >= c_out * padded.height * (padded.row_len - 2));
    let mut ob = 0;
    while ob < c_out {
        let step = match c_out - ob {
            r if r >= 4 => 4,
            r if r >= 2 => 2,
            _ => 1,
        };
        for ci in 0..c_in {
            for ky in 0..3 {
                match step {
                    4 => weight_grad_block::<V, 4>(padded, grad, ob, ci, ky, c_in, grad_w),
                    2 => weight_grad_block::<V, 2>(padded, grad, ob, ci, ky, c_in, grad_w),
                    _ => weight_grad_block::<V, 1>(padded, grad, ob, ci, ky, c_in, grad_w),
                }
            }
        }
        ob += step;
    }
}

#[cfg(target_arch = "x86_64")]
mod simd {
    use super::x86::{Avx2, Avx512};
    use super::*;

    #[target_feature(enable = "avx512f,avx2,fma")]
    pub(super) unsafe fn conv_avx512(p: &Padded, c_in: usize, wt: &[f64], bias: &[f64], c_out: usize, out: &mut [f64]) {
        conv_all::<Avx512>(p, c_in, wt, bias, c_out, out)
    }

    #[target_feature(enable = "avx2,fma")]
    pub(super) unsafe fn conv_avx2(p: &Padded, c_in: usize, wt: &[f64], bias: &[f64], c_out: usize, out: &mut [f64]) {
        conv_all::<Avx2>(p, c_in, wt, bias, c_out, out)
    }

    #[target_feature(enable = "avx512f,avx2,fma")]
    pub(super) unsafe fn wgrad_avx512(p: &Padded, c_in: usize, g: &[f64], c_out: usize, gw: &mut [f64]) {
        weight_grad_all::<Avx512>(p, c_in, g, c_out, gw)
    }

    #[target_feature(enable = "avx2,fma")]
    pub(super) unsafe fn wgrad_avx2(p: &Padded, c_in: usize, g: &[f64], c_out: usize, gw: &mut [f64]) {
        weight_grad_all::<Avx2>(p, c_in, g, c_out, gw)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Isa {
    Avx512,
    Avx2,
    Portable,
}

fn isa() -> Isa {
    #[cfg(target_arch = "x86_64")]
    {
        if is_x86_feature_detected!("avx512f") && is_x86_feature_detected!("fma") {
            return Isa::Avx512;
        }
        if is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma") {
            return Isa::Avx2;
        }
    }
    Isa::Portable
}

fn dispatch_conv(p: &Padded, c_in: usize, wt: &[f64], bias: &[f64], c_out: usize, out: &mut [f64]) {
    // SAFETY: each SIMD path runs only when its CPU features were detected,
    // and every buffer was sized from `p` by the caller.
    unsafe {
        match isa() {
            #[cfg(target_arch = "x86_64")]
            Isa::Avx512 => simd::conv_avx512(p, c_in, wt, bias, c_out, out),
            #[cfg(target_arch = "x86_64")]
            Isa::Avx2 => simd::conv_avx2(p, c_in, wt, bias, c_out, out),
            _ => conv_all::<Portable>(p, c_in, wt, bias, c_out, out),
        }
    }
}

fn dispatch_weight_grad(p: &Padded, c_in: usize, g: &[f64], c_out: usize, gw: &mut [f64]) {
    assert_eq!(gw.len(), c_out * c_in * 9);
    // SAFETY: as in `dispatch_conv`.
    unsafe {
        match isa() {
            #[cfg(target_arch = "x86_64")]
            Isa::Avx512 => simd::wgrad_avx512(p, c_in, g, c_out, gw),
            #[cfg(target_arch = "x86_64")]
            Isa::Avx2 => simd::wgrad_avx2(p, c_in, g, c_out, gw),
            _ => weight_grad_all::<Portable>(p, c_in, g, c_out, gw),
        }
    }
}

/// Copies a map into rows of width `padded_width(w)`, zero-filling the tail.
fn widen(map: &FeatureMap) -> Scratch {
    let (w, wp) = (map.width, padded_width(map.width));
    let mut out = Scratch::zeroed(map.channels * map.height * wp);
    for (src, dst) in map.data.chunks_exact(w).zip(out.chunks_exact_mut(wp)) {
        dst[..w].copy_from_slice(src);
    }
    out
}

fn narrow(data: &[f64], channels: usize, h: usize, w: usize) -> FeatureMap {
    let wp = padded_width(w);
    let mut out = FeatureMap::zeros(channels, h, w);
    for (src, dst) in data.chunks_exact(wp).zip(out.data.chunks_exact_mut(w)) {
        dst.copy_from_slice(&src[..w]);
    }
    out
}

/// Reorders `out x in x 3 x 3` weights to `in x 3 x 3 x out` so a block of
/// output channels reads contiguous taps.
fn tap_major(weights: &[f64], c_out: usize, c_in: usize) -> Scratch {
    let mut wt = Scratch::zeroed(weights.len());
    for o in 0..c_out {
        for ci in 0..c_in {
            for k in 0..9 {
                wt[(ci * 9 + k) * c_out + o] = weights[(o * c_in + ci) * 9 + k];
            }
        }
    }
    wt
}

/// 3x3 convolution; `weights` is `out x in x 3 x 3`.
pub fn conv3x3(input: &FeatureMap, weights: &[f64], bias: &[f64], c_out: usize) -> FeatureMap {
    debug_assert_eq!(weights.len(), c_out * input.channels * 9);
    let (h, w) = (input.height, input.width);
    let padded = Padded::new(input);
    let wt = tap_major(weights, c_out, input.channels);
    let mut out = Scratch::zeroed(c_out * h * padded_width(w));
    assert_eq!(bias.len(), c_out);
    dispatch_conv(&padded, input.channels, &wt, bias, c_out, &mut out);
    narrow(&out, c_out, h, w)
}

/// Backward of [`conv3x3`]. Accumulates into `grad_w`/`grad_b` and returns the
/// input gradient when requested.
pub fn conv3x3_backward(
    input: &FeatureMap,
    weights: &[f64],
    grad_out: &FeatureMap,
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    want_input_grad: bool,
) -> Option<FeatureMap> {
    let (c_in, c_out) = (input.channels, grad_out.channels);
    let hw = grad_out.plane();
    for (o, gb) in grad_b.iter_mut().enumerate() {
        *gb += grad_out.data[o * hw..(o + 1) * hw].iter().sum::<f64>();
    }
    dispatch_weight_grad(&Padded::new(input), c_in, &widen(grad_out), c_out, grad_w);
    if !want_input_grad {
        return None;
    }
    // The input gradient is a convolution of the output gradient with the
    // spatially flipped, channel-transposed kernels.
    let mut flipped = Scratch::zeroed(weights.len());
    for o in 0..c_out {
        for ci in 0..c_in {
            for k in 0..9 {
                flipped[(ci * c_out + o) * 9 + 8 - k] = weights[(o * c_in + ci) * 9 + k];
            }
        }
    }
    Some(conv3x3(grad_out, &flipped, &vec![0.0; c_in], c_in))
}

pub fn avg_pool2(input: &FeatureMap) -> FeatureMap {
    let (h, w) = (input.height / 2, input.width / 2);
    let mut out = FeatureMap::zeros(input.channels, h, w);
    let iw = input.width;
    for c in 0..input.channels {
        let src = &input.data[c * input.plane()..(c + 1) * input.plane()];
        for y in 0..h {
            for x in 0..w {
                let i = 2 * y * iw + 2 * x;
                out.data[c * h * w + y * w + x] = 0.25 * (src[i] + src[i + 1] + src[i + iw] + src[i + iw + 1]);
            }
        }
    }
    out
}

pub fn avg_pool2_backward(grad_out: &FeatureMap) -> FeatureMap {
    let (h, w) = (grad_out.height * 2, grad_out.width * 2);
    let mut out = FeatureMap::zeros(grad_out.channels, h, w);
    for c in 0..grad_out.channels {
        for y in 0..h {
            for x in 0..w {
                out.data[c * h * w + y * w + x] =
                    0.25 * grad_out.data[c * grad_out.plane() + (y / 2) * grad_out.width + x / 2];
            }
        }
    }
    out
}

pub fn upsample2(input: &FeatureMap) -> FeatureMap {
    let (h, w) = (input.height * 2, input.width * 2);
    let mut out = FeatureMap::zeros(input.channels, h, w);
    for c in 0..input.channels {
        for y in 0..h {
            for x in 0..w {
                out.data[c * h * w + y * w + x] = input.data[c * input.plane() + (y / 2) * input.width + x / 2];
            }
        }
    }
    out
}

pub fn upsample2_backward(grad_out: &FeatureMap) -> FeatureMap {
    let (h, w) = (grad_out.height / 2, grad_out.width / 2);
    let mut out = FeatureMap::zeros(grad_out.channels, h, w);
    let gw = grad_out.width;
    for c in 0..grad_out.channels {
        let src = &grad_out.data[c * grad_out.plane()..(c + 1) * grad_out.plane()];
        for y in 0..h {
            for x in 0..w {
                let i = 2 * y * gw + 2 * x;
                out.data[c * h * w + y * w + x] = src[i] + src[i + 1] + src[i + gw] + src[i + gw + 1];
            }
        }
    }
    out
}
