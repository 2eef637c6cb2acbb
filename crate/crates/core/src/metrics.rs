//! MSE and PSNR on sRGB-encoded images in [0, 1] (peak 1.0).

use crate::image::RgbImage;
use serde::{Deserialize, Serialize};

pub const PSNR_CAP_DB: f64 = 99.0;

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("image sizes differ: {0}x{1} vs {2}x{3}")]
pub struct MetricError(pub usize, pub usize, pub usize, pub usize);

pub fn mse(a: &RgbImage, b: &RgbImage) -> Result<f64, MetricError> {
    if a.width != b.width || a.height != b.height {
        return Err(MetricError(a.width, a.height, b.width, b.height));
    }
    let n = (a.data.len() * 3).max(1) as f64;
    let sum: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .flat_map(|(p, q)| (0..3).map(move |c| (p[c] as f64 - q[c] as f64).powi(2)))
        .sum();
    Ok(sum / n)
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP_DB
    } else {
        (-10.0 * mse.log10()).min(PSNR_CAP_DB)
    }
}

pub fn psnr(a: &RgbImage, b: &RgbImage) -> Result<f64, MetricError> {
    Ok(psnr_from_mse(mse(a, b)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameMetric {
    pub frame: usize,
    pub mse: f64,
    pub psnr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub avg: f64,
    pub max: f64,
    pub min: f64,
}

impl Summary {
    fn of(values: impl Iterator<Item = f64> + Clone) -> Self {
        let n = values.clone().count().max(1) as f64;
        Self {
            avg: values.clone().sum::<f64>() / n,
            max: values.clone().fold(f64::NEG_INFINITY, f64::max),
            min: values.fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub frames: Vec<FrameMetric>,
    pub mse: Summary,
    pub psnr: Summary,
}

impl MetricReport {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a RgbImage, &'a RgbImage)>) -> Result<Self, MetricError> {
        let frames = pairs
            .into_iter()
            .enumerate()
            .map(|(frame, (a, b))| {
                let m = mse(a, b)?;
                Ok(FrameMetric { frame, mse: m, psnr: psnr_from_mse(m) })
            })
            .collect::<Result<Vec<_>, MetricError>>()?;
        Ok(Self {
            mse: Summary::of(frames.iter().map(|f| f.mse)),
            psnr: Summary::of(frames.iter().map(|f| f.psnr)),
            frames,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("frame,mse,psnr\n");
        for f in &self.frames {
            s.push_str(&format!("{},{:.9},{:.4}\n", f.frame, f.mse, f.psnr));
        }
        s
    }
}
