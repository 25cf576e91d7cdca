//! Forward pass of the multi-scale precoding network.
//!
//! Topology (K = 4 feature channels throughout the streams):
//!
//! * root: 3×3 conv 1→8 + PReLU, 1×1 conv 8→4. Its pre-activation output
//!   `r` feeds the global residual; `PReLU(r)` feeds every stream.
//! * block: `c = C1(x)` (3×3 4→8, strided or preceded by a linear
//!   downscale), `d = P3(C2(P2(Cmid(P1(c)))))`, `q = Cout(c + d) + D(r)`,
//!   output `Pout(q)`. `Cmid` and `Cout` are 1×1 8→4 / 8→4 convs, `C2` is
//!   3×3 4→8.
//! * projection `F` (3×3 4→1) per scale turns a block output into luma.
//!
//! All layers use zero padding; stride is the only thing that shrinks a map.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::frame::{PlanarFrame, Plane};
use crate::resample::{self, FilterKind};
use crate::scale::{ScaleFactor, STREAM_SCALES};
use crate::Error;

/// Channel count of root features and block outputs.
pub const FEATURES: usize = 4;
/// Output channels of every 3×3 layer except projections.
pub const WIDE: usize = 8;

/// Channel-major feature maps (`channels × height × width`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        FeatureMap {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    /// Luma plane mapped to `[0, 1]`.
    pub fn from_luma(plane: &Plane) -> Self {
        FeatureMap {
            channels: 1,
            height: plane.height,
            width: plane.width,
            data: plane.data.iter().map(|&v| f32::from(v) / 255.0).collect(),
        }
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Linear resize of every channel to `width × height`.
    pub fn resized(&self, width: usize, height: usize, filter: FilterKind) -> Result<Self, Error> {
        if (width, height) == self.dims() {
            return Ok(self.clone());
        }
        let mut data = Vec::with_capacity(self.channels * width * height);
        for c in 0..self.channels {
            data.extend(resample::resize_f32(
                self.channel(c),
                self.width,
                self.height,
                width,
                height,
                filter,
            )?);
        }
        Ok(FeatureMap {
            channels: self.channels,
            height,
            width,
            data,
        })
    }

    fn add_assign(&mut self, other: &FeatureMap) -> Result<(), Error> {
        if (self.channels, self.height, self.width) != (other.channels, other.height, other.width) {
            return Err(Error::ShapeMismatch("feature map sum"));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }
}

/// One convolution with optional per-channel PReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub kernel: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    /// `(out, in, kh, kw)` row-major.
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
    pub prelu: Option<Vec<f32>>,
}

impl ConvLayer {
    pub fn zeros(kernel: usize, in_channels: usize, out_channels: usize, prelu: bool) -> Self {
        ConvLayer {
            kernel,
            in_channels,
            out_channels,
            stride: 1,
            weight: vec![0.0; out_channels * in_channels * kernel * kernel],
            bias: vec![0.0; out_channels],
            prelu: prelu.then(|| vec![1.0; out_channels]),
        }
    }

    pub fn weight_dims(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel, self.kernel]
    }

    #[inline]
    pub fn weight_at(&self, o: usize, i: usize, ky: usize, kx: usize) -> f32 {
        let k = self.kernel;
        self.weight[((o * self.in_channels + i) * k + ky) * k + kx]
    }

    pub fn set_weight(&mut self, o: usize, i: usize, ky: usize, kx: usize, v: f32) {
        let k = self.kernel;
        self.weight[((o * self.in_channels + i) * k + ky) * k + kx] = v;
    }

    /// Weights, biases and PReLU slopes.
    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len() + self.prelu.as_ref().map_or(0, Vec::len)
    }

    pub fn macs(&self, out_w: usize, out_h: usize) -> u64 {
        (out_w * out_h * self.out_channels * self.in_channels * self.kernel * self.kernel) as u64
    }

    fn check(&self, name: &str) -> Result<(), String> {
        let n = self.out_channels * self.in_channels * self.kernel * self.kernel;
        if self.weight.len() != n || self.bias.len() != self.out_channels {
            return Err(format!("{name}: tensor length does not match declared shape"));
        }
        if let Some(p) = &self.prelu {
            if p.len() != self.out_channels {
                return Err(format!("{name}: PReLU slope count != out_channels"));
            }
        }
        Ok(())
    }

    /// Convolution producing exactly `out_w × out_h`; output sample `(x, y)`
    /// is centred on input `(x·stride, y·stride)`. No activation.
    pub fn convolve(&self, input: &FeatureMap, out_w: usize, out_h: usize) -> Result<FeatureMap, Error> {
        if input.channels != self.in_channels {
            return Err(Error::ShapeMismatch("conv input channels"));
        }
        let (iw, ih) = input.dims();
        let k = self.kernel;
        let pad = (k / 2) as isize;
        let s = self.stride;
        let mut out = FeatureMap::zeros(self.out_channels, out_h, out_w);
        let plane = out_w * out_h;
        for o in 0..self.out_channels {
            let dst = &mut out.data[o * plane..(o + 1) * plane];
            dst.fill(self.bias[o]);
            for i in 0..self.in_channels {
                let src = input.channel(i);
                for ky in 0..k {
                    for kx in 0..k {
                        let w = self.weight_at(o, i, ky, kx);
                        if w == 0.0 {
                            continue;
                        }
                        let dx = kx as isize - pad;
                        let dy = ky as isize - pad;
                        // output columns whose source column lies inside the map
                        let x_lo = if dx < 0 { ((-dx) as usize).div_ceil(s) } else { 0 };
                        let x_hi = {
                            let lim = iw as isize - dx; // need x*s < lim
                            if lim <= 0 {
                                0
                            } else {
                                ((lim as usize).div_ceil(s)).min(out_w)
                            }
                        };
                        if x_lo >= x_hi {
                            continue;
                        }
                        for y in 0..out_h {
                            let sy = (y * s) as isize + dy;
                            if sy < 0 || sy >= ih as isize {
                                continue;
                            }
                            let srow = &src[sy as usize * iw..(sy as usize + 1) * iw];
                            let drow = &mut dst[y * out_w..(y + 1) * out_w];
                            if s == 1 {
                                let start = (x_lo as isize + dx) as usize;
                                let n = x_hi - x_lo;
                                for (d, v) in drow[x_lo..x_hi].iter_mut().zip(&srow[start..start + n]) {
                                    *d += w * v;
                                }
                            } else {
                                for x in x_lo..x_hi {
                                    let sx = (x * s) as isize + dx;
                                    drow[x] += w * srow[sx as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// In-place PReLU with per-channel slopes.
pub fn prelu(map: &mut FeatureMap, slopes: &[f32]) {
    let n = map.plane_len();
    for (c, &a) in slopes.iter().enumerate().take(map.channels) {
        for v in &mut map.data[c * n..(c + 1) * n] {
            if *v < 0.0 {
                *v *= a;
            }
        }
    }
}

fn activated(mut map: FeatureMap, layer: &ConvLayer) -> FeatureMap {
    if let Some(s) = &layer.prelu {
        prelu(&mut map, s);
    }
    map
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootWeights {
    /// 3×3, 1→8, with PReLU.
    pub conv1: ConvLayer,
    /// 1×1, 8→4; its PReLU is applied to the stream input only.
    pub conv2: ConvLayer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockWeights {
    /// Cumulative downscale reached by this block.
    pub scale: ScaleFactor,
    /// Ratio to the previous block's scale.
    pub alpha: ScaleFactor,
    pub conv1: ConvLayer,
    pub conv_mid: ConvLayer,
    /// Its PReLU is the one right before the block skip.
    pub conv2: ConvLayer,
    pub conv_out: ConvLayer,
}

impl BlockWeights {
    pub fn layers(&self) -> [&ConvLayer; 4] {
        [&self.conv1, &self.conv_mid, &self.conv2, &self.conv_out]
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.param_count()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamWeights {
    pub scales: Vec<ScaleFactor>,
    pub blocks: Vec<BlockWeights>,
    /// One 3×3 4→1 projection per scale.
    pub projections: Vec<ConvLayer>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightsMeta {
    pub version: u32,
    pub run_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    pub root: RootWeights,
    pub streams: Vec<StreamWeights>,
    pub meta: WeightsMeta,
}

/// Shape of one learnable tensor in the canonical topology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub dims: Vec<usize>,
}

/// Canonical layer path of a block layer, e.g. `s1.b2.conv_mid`.
pub fn block_layer_name(stream: usize, block: usize, layer: &str) -> String {
    format!("s{}.b{}.{}", stream + 1, block + 1, layer)
}

pub fn projection_name(stream: usize, index: usize) -> String {
    format!("s{}.f{}", stream + 1, index + 1)
}

pub const BLOCK_LAYERS: [&str; 4] = ["conv1", "conv_mid", "conv2", "conv_out"];

impl NetworkWeights {
    /// All-zero canonical network, PReLU slopes at one.
    pub fn zeros() -> Self {
        let root = RootWeights {
            conv1: ConvLayer::zeros(3, 1, WIDE, true),
            conv2: ConvLayer::zeros(1, WIDE, FEATURES, true),
        };
        let streams = STREAM_SCALES
            .iter()
            .map(|scales| {
                let mut prev = ScaleFactor::ONE;
                let blocks = scales
                    .iter()
                    .map(|&s| {
                        let alpha = s.ratio_to(prev);
                        prev = s;
                        let mut conv1 = ConvLayer::zeros(3, FEATURES, WIDE, true);
                        if alpha.is_integer() {
                            conv1.stride = alpha.num() as usize;
                        }
                        BlockWeights {
                            scale: s,
                            alpha,
                            conv1,
                            conv_mid: ConvLayer::zeros(1, WIDE, FEATURES, true),
                            conv2: ConvLayer::zeros(3, FEATURES, WIDE, true),
                            conv_out: ConvLayer::zeros(1, WIDE, FEATURES, true),
                        }
                    })
                    .collect();
                StreamWeights {
                    scales: scales.to_vec(),
                    blocks,
                    projections: scales.iter().map(|_| ConvLayer::zeros(3, FEATURES, 1, false)).collect(),
                }
            })
            .collect();
        NetworkWeights {
            root,
            streams,
            meta: WeightsMeta {
                version: 1,
                run_id: String::new(),
            },
        }
    }

    /// Hand-built weights whose every output is the linear (D↓) downscale
    /// of the input luma: channel 0 carries the luma through the root,
    /// every block reduces to its global residual and each projection
    /// reads channel 0.
    pub fn passthrough() -> Self {
        let mut w = Self::zeros();
        w.root.conv1.set_weight(0, 0, 1, 1, 1.0);
        w.root.conv2.set_weight(0, 0, 0, 0, 1.0);
        for stream in &mut w.streams {
            for f in &mut stream.projections {
                f.set_weight(0, 0, 1, 1, 1.0);
            }
        }
        w.meta.run_id = String::from("passthrough");
        w
    }

    /// Glorot-uniform kernels, zero biases, PReLU slopes 0.25 except the
    /// pre-skip activation of each block, which starts as identity.
    pub fn xavier(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Self::zeros();
        w.visit_layers_mut(|name, layer| {
            let fan_in = (layer.in_channels * layer.kernel * layer.kernel) as f32;
            let fan_out = (layer.out_channels * layer.kernel * layer.kernel) as f32;
            let bound = libm::sqrtf(6.0 / (fan_in + fan_out));
            for v in &mut layer.weight {
                let u = (rng.next_u32() >> 8) as f32 / (1u32 << 24) as f32;
                *v = (2.0 * u - 1.0) * bound;
            }
            if let Some(p) = &mut layer.prelu {
                let slope = if name.ends_with(".conv2") && !name.starts_with("root") {
                    1.0
                } else {
                    0.25
                };
                p.fill(slope);
            }
        });
        w.meta.run_id = format!("xavier-{seed}");
        w
    }

    /// Every layer with its canonical path, in file order.
    pub fn visit_layers(&self, mut f: impl FnMut(&str, &ConvLayer)) {
        f("root.conv1", &self.root.conv1);
        f("root.conv2", &self.root.conv2);
        for (m, s) in self.streams.iter().enumerate() {
            for (n, b) in s.blocks.iter().enumerate() {
                for (tag, l) in BLOCK_LAYERS.iter().zip(b.layers()) {
                    f(&block_layer_name(m, n, tag), l);
                }
            }
            for (n, p) in s.projections.iter().enumerate() {
                f(&projection_name(m, n), p);
            }
        }
    }

    pub fn visit_layers_mut(&mut self, mut f: impl FnMut(&str, &mut ConvLayer)) {
        f("root.conv1", &mut self.root.conv1);
        f("root.conv2", &mut self.root.conv2);
        for (m, s) in self.streams.iter_mut().enumerate() {
            for (n, b) in s.blocks.iter_mut().enumerate() {
                let BlockWeights {
                    conv1,
                    conv_mid,
                    conv2,
                    conv_out,
                    ..
                } = b;
                for (tag, l) in BLOCK_LAYERS.iter().zip([conv1, conv_mid, conv2, conv_out]) {
                    f(&block_layer_name(m, n, tag), l);
                }
            }
            for (n, p) in s.projections.iter_mut().enumerate() {
                f(&projection_name(m, n), p);
            }
        }
    }

    /// Canonical tensor list: per layer the kernel, then `.bias`, then
    /// `.prelu` when the layer has one.
    pub fn tensor_specs() -> Vec<TensorSpec> {
        let mut out = Vec::new();
        Self::zeros().visit_layers(|name, l| {
            out.push(TensorSpec {
                name: String::from(name),
                dims: l.weight_dims().to_vec(),
            });
            out.push(TensorSpec {
                name: format!("{name}.bias"),
                dims: vec![l.out_channels],
            });
            if l.prelu.is_some() {
                out.push(TensorSpec {
                    name: format!("{name}.prelu"),
                    dims: vec![l.out_channels],
                });
            }
        });
        out
    }

    /// Structural validation against the canonical topology.
    pub fn validate(&self) -> Result<(), String> {
        let reference = Self::zeros();
        if self.streams.len() != reference.streams.len() {
            return Err(String::from("stream count differs from canonical topology"));
        }
        let mut shapes = Vec::new();
        reference.visit_layers(|name, l| {
            shapes.push((String::from(name), l.weight_dims(), l.stride, l.prelu.is_some()))
        });
        let mut idx = 0;
        let mut err = None;
        self.visit_layers(|name, l| {
            if err.is_some() {
                return;
            }
            match shapes.get(idx) {
                Some((n, dims, stride, has_prelu))
                    if n == name && *dims == l.weight_dims() && *stride == l.stride && *has_prelu == l.prelu.is_some() =>
                {
                    if let Err(e) = l.check(name) {
                        err = Some(e);
                    } else if l.weight.iter().chain(&l.bias).chain(l.prelu.iter().flatten()).any(|v| v.is_nan()) {
                        err = Some(format!("{name}: NaN in tensor"));
                    }
                }
                _ => err = Some(format!("{name}: layer does not match canonical topology")),
            }
            idx += 1;
        });
        if let Some(e) = err {
            return Err(e);
        }
        if idx != shapes.len() {
            return Err(String::from("layer count differs from canonical topology"));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit_layers(|_, l| n += l.param_count());
        n
    }

    /// Stream index and block index producing scale `s`.
    pub fn locate(&self, s: ScaleFactor) -> Option<(usize, usize)> {
        self.streams
            .iter()
            .enumerate()
            .find_map(|(m, st)| st.scales.iter().position(|&x| x == s).map(|n| (m, n)))
    }
}

/// Root mapping: returns the pre-activation features `r` (4 channels,
/// input resolution).
pub fn root_forward(luma: &FeatureMap, w: &NetworkWeights) -> Result<FeatureMap, Error> {
    if luma.channels != 1 {
        return Err(Error::ShapeMismatch("root expects one luma channel"));
    }
    let (iw, ih) = luma.dims();
    let h = activated(w.root.conv1.convolve(luma, iw, ih)?, &w.root.conv1);
    w.root.conv2.convolve(&h, iw, ih)
}

/// Block output before the block's final PReLU is applied; see
/// [`block_forward`].
pub fn block_forward_preact(
    input: &FeatureMap,
    block: &BlockWeights,
    r_ds: &FeatureMap,
    downscaler: FilterKind,
) -> Result<FeatureMap, Error> {
    let (tw, th) = r_ds.dims();
    let c = if block.alpha.is_integer() {
        block.conv1.convolve(input, tw, th)?
    } else {
        let pre = input.resized(tw, th, downscaler)?;
        block.conv1.convolve(&pre, tw, th)?
    };
    let a1 = activated(c.clone(), &block.conv1);
    let a_mid = activated(block.conv_mid.convolve(&a1, tw, th)?, &block.conv_mid);
    let mut d = activated(block.conv2.convolve(&a_mid, tw, th)?, &block.conv2);
    d.add_assign(&c)?;
    let mut q = block.conv_out.convolve(&d, tw, th)?;
    q.add_assign(r_ds)?;
    Ok(q)
}

/// One precoding block. `r_ds` is the root output linearly resized to the
/// block's target resolution and fixes the output geometry.
pub fn block_forward(
    input: &FeatureMap,
    block: &BlockWeights,
    r_ds: &FeatureMap,
    downscaler: FilterKind,
) -> Result<FeatureMap, Error> {
    Ok(activated(block_forward_preact(input, block, r_ds, downscaler)?, &block.conv_out))
}

/// Knobs of [`precode_frame`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecodeOptions {
    /// Linear D↓ used for fractional block ratios and the root residual.
    pub downscaler: FilterKind,
    pub chroma_filter: FilterKind,
}

impl Default for PrecodeOptions {
    fn default() -> Self {
        PrecodeOptions {
            downscaler: FilterKind::Bilinear,
            chroma_filter: FilterKind::BICUBIC,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecodeOutput {
    pub frames: BTreeMap<ScaleFactor, PlanarFrame>,
    /// Number of precoding-block evaluations performed.
    pub block_evaluations: usize,
}

/// Denormalise a one-channel map to 8-bit luma clipped to `[lo, hi]`.
pub fn quantize_luma(map: &FeatureMap, lo: u8, hi: u8) -> Plane {
    let data = map.data[..map.plane_len()]
        .iter()
        .map(|&v| resample::quantize(v * 255.0).clamp(lo, hi))
        .collect();
    Plane {
        width: map.width,
        height: map.height,
        data,
    }
}

/// Float luma outputs (normalised units) for the requested downscales,
/// sharing every block evaluation along a stream.
pub fn precode_luma_f32(
    luma: &Plane,
    w: &NetworkWeights,
    scales: &[ScaleFactor],
    opts: &PrecodeOptions,
) -> Result<(BTreeMap<ScaleFactor, FeatureMap>, usize), Error> {
    let mut wanted: Vec<Vec<usize>> = vec![Vec::new(); w.streams.len()];
    for &s in scales {
        if s.is_native() {
            continue;
        }
        let (m, n) = w.locate(s).ok_or(Error::UnsupportedScale(s))?;
        if !wanted[m].contains(&n) {
            wanted[m].push(n);
        }
    }
    let mut out = BTreeMap::new();
    let mut evals = 0;
    if wanted.iter().all(Vec::is_empty) {
        return Ok((out, evals));
    }
    let x = FeatureMap::from_luma(luma);
    let (iw, ih) = x.dims();
    let r = root_forward(&x, w)?;
    let mut stream_in = r.clone();
    if let Some(s) = &w.root.conv2.prelu {
        prelu(&mut stream_in, s);
    }
    for (stream, needed) in w.streams.iter().zip(&wanted) {
        let Some(&last) = needed.iter().max() else {
            continue;
        };
        let mut prev = stream_in.clone();
        for (n, block) in stream.blocks.iter().enumerate().take(last + 1) {
            let (tw, th) = block.scale.apply_dims(iw, ih);
            let r_ds = r.resized(tw, th, opts.downscaler)?;
            let p = block_forward(&prev, block, &r_ds, opts.downscaler)?;
            evals += 1;
            if needed.contains(&n) {
                let y = stream.projections[n].convolve(&p, tw, th)?;
                out.insert(block.scale, y);
            }
            prev = p;
        }
    }
    Ok((out, evals))
}

/// Precode one frame into every requested scale. Luma goes through the
/// network and is clipped to the frame's nominal luma range; chroma is
/// resized with `opts.chroma_filter`. Scale one returns the input as is.
pub fn precode_frame(
    frame: &PlanarFrame,
    w: &NetworkWeights,
    scales: &[ScaleFactor],
    opts: &PrecodeOptions,
) -> Result<PrecodeOutput, Error> {
    let (luma, evals) = precode_luma_f32(&frame.y, w, scales, opts)?;
    let (lo, hi) = frame.range.luma_bounds();
    let (clo, chi) = frame.range.chroma_bounds();
    let mut frames = BTreeMap::new();
    for &s in scales {
        if s.is_native() {
            frames.insert(s, frame.clone());
            continue;
        }
        let y = quantize_luma(&luma[&s], lo, hi);
        let (mut cb, mut cr) = resample::resize_chroma(frame, y.width, y.height, opts.chroma_filter)?;
        cb.clamp_in_place(clo, chi);
        cr.clamp_in_place(clo, chi);
        frames.insert(s, PlanarFrame::from_planes(y, cb, cr, frame.range)?);
    }
    Ok(PrecodeOutput {
        frames,
        block_evaluations: evals,
    })
}

/// Analytic parameter and multiply-accumulate counts.
#[derive(Debug, Clone, PartialEq)]
pub struct NetCost {
    pub params: usize,
    pub root_macs: u64,
    /// MACs of the block producing each scale plus its projection.
    pub per_scale_macs: BTreeMap<ScaleFactor, u64>,
    pub total_macs: u64,
}

/// MACs of one block on an unscaled `width × height × 4` map.
pub fn block_macs_unscaled(block: &BlockWeights, width: usize, height: usize) -> u64 {
    block.layers().iter().map(|l| l.macs(width, height)).sum()
}

pub fn count_params_and_macs(w: &NetworkWeights, width: usize, height: usize) -> NetCost {
    let root_macs = w.root.conv1.macs(width, height) + w.root.conv2.macs(width, height);
    let mut per_scale = BTreeMap::new();
    for stream in &w.streams {
        for (block, proj) in stream.blocks.iter().zip(&stream.projections) {
            let (tw, th) = block.scale.apply_dims(width, height);
            per_scale.insert(block.scale, block_macs_unscaled(block, tw, th) + proj.macs(tw, th));
        }
    }
    let total_macs = root_macs + per_scale.values().sum::<u64>();
    NetCost {
        params: w.param_count(),
        root_macs,
        per_scale_macs: per_scale,
        total_macs,
    }
}
