//! Single-image feature maps (channels × height × width) and the layer
//! primitives of the generator. Every reduction runs in a fixed order, so
//! results do not depend on how rayon schedules output channels.

use rayon::prelude::*;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ShapeError {
    #[error("{op}: {detail}")]
    Mismatch { op: &'static str, detail: String },
}

fn mismatch(op: &'static str, detail: String) -> ShapeError {
    ShapeError::Mismatch { op, detail }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width, data: vec![0.0; channels * height * width] }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self, ShapeError> {
        if data.len() != channels * height * width {
            return Err(mismatch("tensor", format!("{} values for {channels}x{height}x{width}", data.len())));
        }
        Ok(Self { channels, height, width, data })
    }

    #[inline]
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn same_shape(&self, o: &Tensor) -> bool {
        (self.channels, self.height, self.width) == (o.channels, o.height, o.width)
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Output size `ceil(in / stride)`, zero padding split with the smaller
    /// half before.
    Same,
    Valid,
}

/// Output size and leading pad along one axis.
pub fn conv_out_dim(n: usize, k: usize, stride: usize, padding: Padding) -> Option<(usize, usize)> {
    match padding {
        Padding::Valid => (n >= k).then(|| ((n - k) / stride + 1, 0)),
        Padding::Same => {
            let out = n.div_ceil(stride);
            let total = ((out - 1) * stride + k).saturating_sub(n);
            Some((out, total / 2))
        }
    }
}

/// Weight layout `[out, in, kh, kw]`.
#[derive(Debug, Clone, Copy)]
pub struct ConvShape {
    pub out: usize,
    pub inp: usize,
    pub kh: usize,
    pub kw: usize,
}

/// Direct cross-correlation. `weight` holds `out·in·kh·kw` values.
pub fn conv2d(
    input: &Tensor,
    weight: &[f32],
    shape: ConvShape,
    bias: Option<&[f32]>,
    stride: usize,
    padding: Padding,
) -> Result<Tensor, ShapeError> {
    let ConvShape { out, inp, kh, kw } = shape;
    if input.channels != inp {
        return Err(mismatch("conv2d", format!("input has {} channels, kernel expects {inp}", input.channels)));
    }
    if weight.len() != out * inp * kh * kw {
        return Err(mismatch("conv2d", format!("kernel has {} values for {out}x{inp}x{kh}x{kw}", weight.len())));
    }
    if let Some(b) = bias {
        if b.len() != out {
            return Err(mismatch("conv2d", format!("bias has {} values for {out} outputs", b.len())));
        }
    }
    if stride == 0 || kh == 0 || kw == 0 {
        return Err(mismatch("conv2d", "stride and kernel size must be positive".into()));
    }
    let (oh, pt) = conv_out_dim(input.height, kh, stride, padding)
        .ok_or_else(|| mismatch("conv2d", format!("kernel {kh} exceeds height {}", input.height)))?;
    let (ow, pl) = conv_out_dim(input.width, kw, stride, padding)
        .ok_or_else(|| mismatch("conv2d", format!("kernel {kw} exceeds width {}", input.width)))?;
    let (h, w) = (input.height as isize, input.width as isize);
    let mut result = Tensor::zeros(out, oh, ow);
    result.data.par_chunks_mut(oh * ow).enumerate().for_each(|(o, dst)| {
        dst.fill(bias.map_or(0.0, |b| b[o]));
        for i in 0..inp {
            let src = input.plane(i);
            for ky in 0..kh {
                for kx in 0..kw {
                    let wv = weight[((o * inp + i) * kh + ky) * kw + kx];
                    // ox range with a valid input column
                    let off = kx as isize - pl as isize;
                    let lo = if off < 0 { ((-off) as usize).div_ceil(stride) } else { 0 };
                    let hi = if w - 1 - off < 0 { 0 } else { (((w - 1 - off) as usize) / stride + 1).min(ow) };
                    if lo >= hi {
                        continue;
                    }
                    for oy in 0..oh {
                        let iy = (oy * stride) as isize + ky as isize - pt as isize;
                        if iy < 0 || iy >= h {
                            continue;
                        }
                        let row = &src[iy as usize * input.width..(iy as usize + 1) * input.width];
                        let drow = &mut dst[oy * ow..(oy + 1) * ow];
                        if stride == 1 {
                            let base = (lo as isize + off) as usize;
                            for (d, s) in drow[lo..hi].iter_mut().zip(&row[base..base + (hi - lo)]) {
                                *d += wv * *s;
                            }
                        } else {
                            for (ox, d) in drow.iter_mut().enumerate().take(hi).skip(lo) {
                                *d += wv * row[((ox * stride) as isize + off) as usize];
                            }
                        }
                    }
                }
            }
        }
    });
    Ok(result)
}

/// 3×3 depthwise convolution, stride 1, zero "same" padding.
/// `weight` layout `[channels, 1, 3, 3]`.
pub fn depthwise_conv3x3(input: &Tensor, weight: &[f32], bias: &[f32]) -> Result<Tensor, ShapeError> {
    let c = input.channels;
    if weight.len() != c * 9 || bias.len() != c {
        return Err(mismatch("depthwise", format!("{c} channels, {} weights, {} biases", weight.len(), bias.len())));
    }
    let (h, w) = (input.height, input.width);
    let mut result = Tensor::zeros(c, h, w);
    result.data.par_chunks_mut(h * w).enumerate().for_each(|(ch, dst)| {
        dst.fill(bias[ch]);
        let src = input.plane(ch);
        for ky in 0..3usize {
            for kx in 0..3usize {
                let wv = weight[ch * 9 + ky * 3 + kx];
                let (x0, x1) = (usize::from(kx == 0), if kx == 2 { w.saturating_sub(1) } else { w });
                for y in 0..h {
                    let iy = y as isize + ky as isize - 1;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let row = &src[iy as usize * w..(iy as usize + 1) * w];
                    let drow = &mut dst[y * w..(y + 1) * w];
                    for x in x0..x1 {
                        drow[x] += wv * row[x + kx - 1];
                    }
                }
            }
        }
    });
    Ok(result)
}

/// Per-pixel normalization across channels with per-channel affine.
pub fn layer_norm_channels(input: &Tensor, gamma: &[f32], beta: &[f32], eps: f32) -> Result<Tensor, ShapeError> {
    let c = input.channels;
    if gamma.len() != c || beta.len() != c {
        return Err(mismatch("layer_norm", format!("{c} channels, {} scales, {} offsets", gamma.len(), beta.len())));
    }
    let n = input.plane_len();
    let mut mean = vec![0.0f32; n];
    for ch in 0..c {
        for (m, v) in mean.iter_mut().zip(input.plane(ch)) {
            *m += v;
        }
    }
    let inv_c = 1.0 / c as f32;
    mean.iter_mut().for_each(|m| *m *= inv_c);
    let mut var = vec![0.0f32; n];
    for ch in 0..c {
        for ((s, v), m) in var.iter_mut().zip(input.plane(ch)).zip(&mean) {
            let d = v - m;
            *s += d * d;
        }
    }
    let inv_std: Vec<f32> = var.iter().map(|s| 1.0 / (s * inv_c + eps).sqrt()).collect();
    let mut out = Tensor::zeros(c, input.height, input.width);
    out.data.par_chunks_mut(n).enumerate().for_each(|(ch, dst)| {
        let src = input.plane(ch);
        for p in 0..n {
            dst[p] = (src[p] - mean[p]) * inv_std[p] * gamma[ch] + beta[ch];
        }
    });
    Ok(out)
}

/// Splits channels in half and multiplies the halves elementwise.
pub fn simple_gate(input: &Tensor) -> Result<Tensor, ShapeError> {
    if !input.channels.is_multiple_of(2) {
        return Err(mismatch("simple_gate", format!("odd channel count {}", input.channels)));
    }
    let half = input.data.len() / 2;
    let (a, b) = input.data.split_at(half);
    Ok(Tensor {
        channels: input.channels / 2,
        height: input.height,
        width: input.width,
        data: a.iter().zip(b).map(|(x, y)| x * y).collect(),
    })
}

/// Channel attention: global average pool, 1×1 conv (`[c, c]` weight plus
/// bias), then per-channel scaling of the input.
pub fn channel_attention(input: &Tensor, weight: &[f32], bias: &[f32]) -> Result<Tensor, ShapeError> {
    let c = input.channels;
    if weight.len() != c * c || bias.len() != c {
        return Err(mismatch("channel_attention", format!("{c} channels, {} weights, {} biases", weight.len(), bias.len())));
    }
    let n = input.plane_len() as f64;
    let pooled: Vec<f32> = (0..c)
        .map(|ch| (input.plane(ch).iter().map(|&v| v as f64).sum::<f64>() / n) as f32)
        .collect();
    let att: Vec<f32> = (0..c)
        .map(|o| {
            let mut s = bias[o];
            for i in 0..c {
                s += weight[o * c + i] * pooled[i];
            }
            s
        })
        .collect();
    let mut out = input.clone();
    out.data.par_chunks_mut(input.plane_len()).enumerate().for_each(|(ch, dst)| {
        dst.iter_mut().for_each(|v| *v *= att[ch]);
    });
    Ok(out)
}

/// `a + b · scale[c]` per channel.
pub fn scaled_residual(a: &Tensor, b: &Tensor, scale: &[f32]) -> Result<Tensor, ShapeError> {
    if !a.same_shape(b) || scale.len() != a.channels {
        return Err(mismatch("residual", format!("{}x{}x{} vs {}x{}x{}", a.channels, a.height, a.width, b.channels, b.height, b.width)));
    }
    let n = a.plane_len();
    let mut out = a.clone();
    out.data.par_chunks_mut(n).enumerate().for_each(|(ch, dst)| {
        for (d, v) in dst.iter_mut().zip(b.plane(ch)) {
            *d += v * scale[ch];
        }
    });
    Ok(out)
}

pub fn upsample_nearest2x(input: &Tensor) -> Tensor {
    let (h, w) = (input.height * 2, input.width * 2);
    let mut out = Tensor::zeros(input.channels, h, w);
    out.data.par_chunks_mut(h * w).enumerate().for_each(|(ch, dst)| {
        let src = input.plane(ch);
        for y in 0..h {
            for x in 0..w {
                dst[y * w + x] = src[(y / 2) * input.width + x / 2];
            }
        }
    });
    out
}

pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor, ShapeError> {
    if a.height != b.height || a.width != b.width {
        return Err(mismatch("concat", format!("{}x{} vs {}x{}", a.height, a.width, b.height, b.width)));
    }
    let mut data = Vec::with_capacity(a.data.len() + b.data.len());
    data.extend_from_slice(&a.data);
    data.extend_from_slice(&b.data);
    Ok(Tensor { channels: a.channels + b.channels, height: a.height, width: a.width, data })
}

/// Mirror index into `[0, n)` without repeating the edge sample.
#[inline]
pub fn reflect_index(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i % period;
    if m >= n {
        period - m
    } else {
        m
    }
}

/// Extends the bottom and right edges by reflection to `h × w`.
pub fn reflect_pad(input: &Tensor, h: usize, w: usize) -> Tensor {
    if h == input.height && w == input.width {
        return input.clone();
    }
    let mut out = Tensor::zeros(input.channels, h, w);
    for ch in 0..input.channels {
        let src = input.plane(ch);
        for y in 0..h {
            let sy = reflect_index(y, input.height);
            for x in 0..w {
                out.data[(ch * h + y) * w + x] = src[sy * input.width + reflect_index(x, input.width)];
            }
        }
    }
    out
}

pub fn crop(input: &Tensor, h: usize, w: usize) -> Tensor {
    if h == input.height && w == input.width {
        return input.clone();
    }
    let mut data = Vec::with_capacity(input.channels * h * w);
    for ch in 0..input.channels {
        for y in 0..h {
            let s = (ch * input.height + y) * input.width;
            data.extend_from_slice(&input.data[s..s + w]);
        }
    }
    Tensor { channels: input.channels, height: h, width: w, data }
}

#[inline]
pub fn logistic(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_1x1() {
        let input = Tensor::from_vec(3, 2, 2, (0..12).map(|v| v as f32).collect()).unwrap();
        let mut eye = vec![0.0; 9];
        for i in 0..3 {
            eye[i * 3 + i] = 1.0;
        }
        let out = conv2d(&input, &eye, ConvShape { out: 3, inp: 3, kh: 1, kw: 1 }, None, 1, Padding::Same).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn zero_kernel_gives_bias() {
        let input = Tensor::from_vec(2, 3, 3, vec![0.7; 18]).unwrap();
        let out = conv2d(&input, &[0.0; 36], ConvShape { out: 2, inp: 2, kh: 3, kw: 3 }, Some(&[0.25, -1.0]), 1, Padding::Same).unwrap();
        assert!(out.plane(0).iter().all(|&v| v == 0.25));
        assert!(out.plane(1).iter().all(|&v| v == -1.0));
    }

    #[test]
    fn same_padding_dims() {
        assert_eq!(conv_out_dim(5, 3, 1, Padding::Same), Some((5, 1)));
        assert_eq!(conv_out_dim(8, 2, 2, Padding::Valid), Some((4, 0)));
        assert_eq!(conv_out_dim(7, 3, 2, Padding::Same), Some((4, 1)));
        assert_eq!(conv_out_dim(2, 3, 1, Padding::Valid), None);
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let input = Tensor::zeros(2, 4, 4);
        assert!(conv2d(&input, &[0.0; 27], ConvShape { out: 1, inp: 3, kh: 3, kw: 3 }, None, 1, Padding::Same).is_err());
    }

    #[test]
    fn gate_with_unit_half() {
        let mut data = vec![1.0; 8];
        data.extend((0..8).map(|v| v as f32 * 0.5));
        let t = Tensor::from_vec(4, 2, 2, data).unwrap();
        let g = simple_gate(&t).unwrap();
        assert_eq!(g.data, (0..8).map(|v| v as f32 * 0.5).collect::<Vec<_>>());
    }

    #[test]
    fn layer_norm_normalizes() {
        let t = Tensor::from_vec(4, 1, 2, vec![1.0, 5.0, 2.0, 5.0, 3.0, 5.0, 4.0, 5.0]).unwrap();
        let out = layer_norm_channels(&t, &[1.0; 4], &[0.0; 4], 1e-6).unwrap();
        let col: Vec<f32> = (0..4).map(|c| out.at(c, 0, 0)).collect();
        assert!(col.iter().sum::<f32>().abs() < 1e-5);
        assert!((col.iter().map(|v| v * v).sum::<f32>() / 4.0 - 1.0).abs() < 1e-4);
        // constant column normalizes to zero
        assert!((0..4).all(|c| out.at(c, 0, 1) == 0.0));
    }

    #[test]
    fn reflect_and_crop() {
        assert_eq!((0..7).map(|i| reflect_index(i, 3)).collect::<Vec<_>>(), [0, 1, 2, 1, 0, 1, 2]);
        let t = Tensor::from_vec(1, 2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let p = reflect_pad(&t, 4, 4);
        assert_eq!(p.data, [1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 6.0, 5.0, 1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 6.0, 5.0]);
        assert_eq!(crop(&p, 2, 3), t);
    }

    #[test]
    fn upsample_repeats() {
        let t = Tensor::from_vec(1, 1, 2, vec![1.0, 2.0]).unwrap();
        assert_eq!(upsample_nearest2x(&t).data, [1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0]);
    }
}
