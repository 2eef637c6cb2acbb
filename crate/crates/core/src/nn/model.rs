//! U-Net generator: NAFBlock encoder/decoder trunk and four two-channel
//! adapters, mapping a guiding map to eight lightmap channels.

use super::tensor::{
    channel_attention, concat_channels, conv2d, crop, depthwise_conv3x3, layer_norm_channels, logistic, reflect_pad,
    scaled_residual, simple_gate, upsample_nearest2x, ConvShape, Padding, ShapeError, Tensor,
};
use super::weights::{channel_index, NetArchitecture, WeightError, WeightStore};
use crate::guiding::GuidingMap;
use crate::image::ScalarMap;
use crate::runtime::{ColorSpace, SixWayLightmaps};
use std::collections::HashMap;

#[derive(Debug, thiserror::Error)]
pub enum InferenceError {
    #[error(transparent)]
    Weights(#[from] WeightError),
    #[error("layer {layer}: {source}")]
    Shape { layer: String, source: ShapeError },
    #[error("layer {layer} produced a non-finite activation at index {index}")]
    NonFinite { layer: String, index: usize },
    #[error("input must have 3 channels and non-zero size, got {0}x{1}x{2}")]
    Input(usize, usize, usize),
}

/// Radius (in input pixels) of the region one output pixel can depend on,
/// ignoring the global pooling inside channel attention.
pub fn receptive_radius(arch: &NetArchitecture) -> usize {
    let mut r = 1; // intro 3x3
    let mut s = 1;
    for _ in 0..arch.encoder_levels {
        r += arch.blocks_per_level * s;
        // 2x2 stride-2 windows tile the footprint exactly
        s *= 2;
    }
    r += arch.middle_blocks * s;
    for _ in 0..arch.encoder_levels {
        s /= 2;
        r += s; // nearest upsample
        r += s; // 3x3 conv after upsampling
        r += arch.blocks_per_level * s;
    }
    r + arch.adapter_blocks
}

pub struct Generator {
    store: WeightStore,
    index: HashMap<String, usize>,
}

impl Generator {
    pub fn new(store: WeightStore) -> Result<Self, InferenceError> {
        store.validate()?;
        let index = store.records.iter().enumerate().map(|(i, r)| (r.name.clone(), i)).collect();
        Ok(Self { store, index })
    }

    pub fn architecture(&self) -> &NetArchitecture {
        &self.store.architecture
    }

    pub fn store(&self) -> &WeightStore {
        &self.store
    }

    fn param(&self, name: &str) -> &[f32] {
        // presence is guaranteed by validation at construction
        &self.store.records[self.index[name]].data
    }

    fn shape(&self, name: &str) -> &[usize] {
        &self.store.records[self.index[name]].shape
    }

    fn conv(&self, x: &Tensor, name: &str, stride: usize, padding: Padding) -> Result<Tensor, InferenceError> {
        let w = format!("{name}.weight");
        let sh = self.shape(&w);
        let shape = ConvShape { out: sh[0], inp: sh[1], kh: sh[2], kw: sh[3] };
        let out = conv2d(x, self.param(&w), shape, Some(self.param(&format!("{name}.bias"))), stride, padding)
            .map_err(|source| InferenceError::Shape { layer: name.to_string(), source })?;
        check(out, name)
    }

    fn naf_block(&self, x: &Tensor, p: &str) -> Result<Tensor, InferenceError> {
        let eps = self.store.architecture.norm_eps;
        let tag = |e: ShapeError| InferenceError::Shape { layer: p.to_string(), source: e };
        let n1 = layer_norm_channels(x, self.param(&format!("{p}.norm1.weight")), self.param(&format!("{p}.norm1.bias")), eps)
            .map_err(tag)?;
        let h = self.conv(&n1, &format!("{p}.conv1"), 1, Padding::Same)?;
        let h = depthwise_conv3x3(&h, self.param(&format!("{p}.conv2.weight")), self.param(&format!("{p}.conv2.bias")))
            .map_err(tag)?;
        let h = simple_gate(&h).map_err(tag)?;
        let h = channel_attention(&h, self.param(&format!("{p}.sca.weight")), self.param(&format!("{p}.sca.bias")))
            .map_err(tag)?;
        let h = self.conv(&h, &format!("{p}.conv3"), 1, Padding::Same)?;
        let y = scaled_residual(x, &h, self.param(&format!("{p}.beta"))).map_err(tag)?;
        let n2 = layer_norm_channels(&y, self.param(&format!("{p}.norm2.weight")), self.param(&format!("{p}.norm2.bias")), eps)
            .map_err(tag)?;
        let h = self.conv(&n2, &format!("{p}.conv4"), 1, Padding::Same)?;
        let h = simple_gate(&h).map_err(tag)?;
        let h = self.conv(&h, &format!("{p}.conv5"), 1, Padding::Same)?;
        check(scaled_residual(&y, &h, self.param(&format!("{p}.gamma"))).map_err(tag)?, p)
    }

    fn blocks(&self, mut x: Tensor, prefix: &str, count: usize) -> Result<Tensor, InferenceError> {
        for b in 0..count {
            x = self.naf_block(&x, &format!("{prefix}.blocks.{b}"))?;
        }
        Ok(x)
    }

    /// Raw forward pass on a `3 × H × W` tensor; returns `8 × H × W` in
    /// (0, 1), channels in lightmap order.
    pub fn forward_tensor(&self, input: &Tensor) -> Result<Tensor, InferenceError> {
        let arch = &self.store.architecture;
        if input.channels != arch.input_channels || input.height == 0 || input.width == 0 {
            return Err(InferenceError::Input(input.channels, input.height, input.width));
        }
        let m = 1usize << arch.encoder_levels;
        let (h, w) = (input.height, input.width);
        let x = reflect_pad(input, h.div_ceil(m) * m, w.div_ceil(m) * m);

        let mut x = self.conv(&x, "intro", 1, Padding::Same)?;
        let mut skips = Vec::with_capacity(arch.encoder_levels);
        for l in 0..arch.encoder_levels {
            x = self.blocks(x, &format!("enc.{l}"), arch.blocks_per_level)?;
            let down = self.conv(&x, &format!("enc.{l}.down"), 2, Padding::Valid)?;
            debug_assert_eq!((down.height * 2, down.width * 2), (x.height, x.width));
            skips.push(x);
            x = down;
        }
        x = self.blocks(x, "mid", arch.middle_blocks)?;
        for l in (0..arch.encoder_levels).rev() {
            let skip = skips.pop().expect("one skip per level");
            let up = self.conv(&upsample_nearest2x(&x), &format!("dec.{l}.up"), 1, Padding::Same)?;
            if (up.height, up.width) != (skip.height, skip.width) {
                return Err(InferenceError::Shape {
                    layer: format!("dec.{l}"),
                    source: ShapeError::Mismatch {
                        op: "skip",
                        detail: format!("{}x{} vs {}x{}", up.height, up.width, skip.height, skip.width),
                    },
                });
            }
            let cat = concat_channels(&up, &skip)
                .map_err(|source| InferenceError::Shape { layer: format!("dec.{l}"), source })?;
            x = self.conv(&cat, &format!("dec.{l}.fuse"), 1, Padding::Same)?;
            x = self.blocks(x, &format!("dec.{l}"), arch.blocks_per_level)?;
        }

        let mut out = Tensor::zeros(arch.output_channels, x.height, x.width);
        let plane = x.plane_len();
        for (g, group) in arch.groups.iter().enumerate() {
            let prefix = format!("adapters.{g}");
            let a = self.blocks(x.clone(), &prefix, arch.adapter_blocks)?;
            let proj = self.conv(&a, &format!("{prefix}.proj"), 1, Padding::Same)?;
            for (k, name) in group.channels.iter().enumerate() {
                let c = channel_index(name).expect("validated channel name");
                out.data[c * plane..(c + 1) * plane]
                    .iter_mut()
                    .zip(proj.plane(k))
                    .for_each(|(d, v)| *d = logistic(*v));
            }
        }
        Ok(crop(&out, h, w))
    }

    /// Network input: `L̃`, `T`, and `D / depth_scale`.
    pub fn guiding_tensor(guiding: &GuidingMap) -> Tensor {
        let scale = if guiding.depth_scale > 0.0 { guiding.depth_scale } else { 1.0 };
        let mut data = Vec::with_capacity(guiding.width * guiding.height * 3);
        data.extend_from_slice(&guiding.radiance.data);
        data.extend_from_slice(&guiding.transparency.data);
        data.extend(guiding.depth.data.iter().map(|&d| (d as f64 / scale) as f32));
        Tensor { channels: 3, height: guiding.height, width: guiding.width, data }
    }

    /// Predicted lightmaps, sRGB-encoded scattering channels.
    pub fn forward(&self, guiding: &GuidingMap) -> Result<SixWayLightmaps, InferenceError> {
        let out = self.forward_tensor(&Self::guiding_tensor(guiding))?;
        let planes = std::array::from_fn(|c| ScalarMap { width: out.width, height: out.height, data: out.plane(c).to_vec() });
        Ok(SixWayLightmaps { width: out.width, height: out.height, planes, color_space: ColorSpace::Srgb })
    }
}

fn check(t: Tensor, layer: &str) -> Result<Tensor, InferenceError> {
    match t.first_non_finite() {
        Some(index) => Err(InferenceError::NonFinite { layer: layer.to_string(), index }),
        None => Ok(t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(h: usize, w: usize, seed: u32) -> Tensor {
        let mut s = seed | 1;
        let data = (0..3 * h * w)
            .map(|_| {
                s ^= s << 13;
                s ^= s >> 17;
                s ^= s << 5;
                (s % 1000) as f32 / 1000.0
            })
            .collect();
        Tensor::from_vec(3, h, w, data).unwrap()
    }

    #[test]
    fn zero_weights_give_half() {
        let g = Generator::new(WeightStore::zeros(&NetArchitecture::tiny())).unwrap();
        let out = g.forward_tensor(&input(12, 10, 3)).unwrap();
        assert_eq!((out.channels, out.height, out.width), (8, 12, 10));
        assert!(out.data.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn zero_block_keeps_zero_input() {
        let arch = NetArchitecture::tiny();
        let mut store = WeightStore::zeros(&arch);
        for r in &mut store.records {
            if r.name.ends_with("norm1.weight") || r.name.ends_with("norm2.weight") {
                r.data.fill(1.0);
            }
        }
        let g = Generator::new(store).unwrap();
        let x = Tensor::zeros(4, 6, 6);
        let y = g.naf_block(&x, "enc.0.blocks.0").unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn random_weights_shapes_and_range() {
        let g = Generator::new(WeightStore::random(&NetArchitecture::tiny(), 1)).unwrap();
        let out = g.forward_tensor(&input(13, 7, 9)).unwrap();
        assert_eq!((out.channels, out.height, out.width), (8, 13, 7));
        assert!(out.data.iter().all(|&v| v > 0.0 && v < 1.0));
        let again = g.forward_tensor(&input(13, 7, 9)).unwrap();
        assert!(out.data.iter().zip(&again.data).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn radius_formula() {
        let arch = NetArchitecture::tiny();
        // intro 1, enc 1 + 2, mid 4, dec (2+2+2) + (1+1+1), adapter 1
        assert_eq!(receptive_radius(&arch), 1 + 3 + 4 + 6 + 3 + 1);
    }
}
