//! Reference implementations shared by the integration and acceptance tests.

use sixway_core::nn::{ConvShape, Padding, Tensor};
use sixway_core::runtime::Occluder;
use sixway_core::Vec3;

/// Six nested loops straight from the definition of cross-correlation.
pub fn naive_conv(x: &Tensor, w: &[f32], s: ConvShape, bias: &[f32], stride: usize, padding: Padding) -> Tensor {
    let (oh, ow, pt, pl) = match padding {
        Padding::Valid => ((x.height - s.kh) / stride + 1, (x.width - s.kw) / stride + 1, 0, 0),
        Padding::Same => {
            let oh = x.height.div_ceil(stride);
            let ow = x.width.div_ceil(stride);
            let th = ((oh - 1) * stride + s.kh).saturating_sub(x.height);
            let tw = ((ow - 1) * stride + s.kw).saturating_sub(x.width);
            (oh, ow, th / 2, tw / 2)
        }
    };
    let mut out = Tensor::zeros(s.out, oh, ow);
    for o in 0..s.out {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = bias[o] as f64;
                for i in 0..s.inp {
                    for ky in 0..s.kh {
                        for kx in 0..s.kw {
                            let iy = (oy * stride + ky) as isize - pt as isize;
                            let ix = (ox * stride + kx) as isize - pl as isize;
                            if iy < 0 || ix < 0 || iy >= x.height as isize || ix >= x.width as isize {
                                continue;
                            }
                            let wv = w[((o * s.inp + i) * s.kh + ky) * s.kw + kx] as f64;
                            acc += wv * x.at(i, iy as usize, ix as usize) as f64;
                        }
                    }
                }
                out.data[(o * oh + oy) * ow + ox] = acc as f32;
            }
        }
    }
    out
}

/// Parallelogram hit by solving `p + s·d = o + a·u + b·v` with Cramer's rule.
pub fn occluder_hit(o: &Occluder, p: Vec3, d: Vec3) -> Option<(f64, f64, f64)> {
    let (u, v) = (o.edge_u, o.edge_v);
    let m = [[u.x, v.x, -d.x], [u.y, v.y, -d.y], [u.z, v.z, -d.z]];
    let r = p - o.origin;
    let det3 = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let det = det3(m);
    if det.abs() < 1e-12 {
        return None;
    }
    let col = |k: usize| {
        let mut n = m;
        for (row, val) in n.iter_mut().zip([r.x, r.y, r.z]) {
            row[k] = val;
        }
        det3(n) / det
    };
    Some((col(0), col(1), col(2)))
}
