//! Label and image quality metrics.

use serde::Serialize;
use thiserror::Error;

use crate::asset_io::TextureImage;
use crate::seg_backend::{MaterialClass, BACKGROUND, NUM_CLASSES};
use crate::uv_bake::LabelUV;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("ground truth has no labelled texels")]
    EmptyOverlap,
    #[error("image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")]
    TooSmall,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassIoU {
    pub class: &'static str,
    pub id: u8,
    pub iou: f64,
    pub intersection: u64,
    pub union: u64,
    pub gt_count: u64,
    pub pred_count: u64,
}

/// Per-class IoU over texels where the ground truth is labelled. Only
/// classes present in the ground truth are listed and averaged.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IoUReport {
    pub classes: Vec<ClassIoU>,
    pub mean_iou: f64,
    pub evaluated_texels: u64,
}

impl IoUReport {
    pub fn class(&self, id: u8) -> Option<&ClassIoU> {
        self.classes.iter().find(|c| c.id == id)
    }
}

pub fn miou(pred: &LabelUV, gt: &LabelUV) -> Result<IoUReport, MetricError> {
    miou_labels(&pred.labels, &gt.labels)
}

pub fn miou_labels(pred: &[u8], gt: &[u8]) -> Result<IoUReport, MetricError> {
    if pred.len() != gt.len() {
        return Err(MetricError::ShapeMismatch(format!(
            "{} vs {} texels",
            pred.len(),
            gt.len()
        )));
    }
    let mut inter = [0u64; NUM_CLASSES];
    let mut gt_n = [0u64; NUM_CLASSES];
    let mut pred_n = [0u64; NUM_CLASSES];
    let mut evaluated = 0;
    for (&p, &g) in pred.iter().zip(gt) {
        if g == BACKGROUND {
            continue;
        }
        evaluated += 1;
        if (g as usize) < NUM_CLASSES {
            gt_n[g as usize] += 1;
        }
        if (p as usize) < NUM_CLASSES {
            pred_n[p as usize] += 1;
            if p == g {
                inter[p as usize] += 1;
            }
        }
    }
    if evaluated == 0 {
        return Err(MetricError::EmptyOverlap);
    }
    let classes: Vec<ClassIoU> = MaterialClass::ALL
        .iter()
        .filter(|c| gt_n[c.id() as usize] > 0)
        .map(|c| {
            let i = c.id() as usize;
            let union = gt_n[i] + pred_n[i] - inter[i];
            ClassIoU {
                class: c.name(),
                id: c.id(),
                iou: inter[i] as f64 / union as f64,
                intersection: inter[i],
                union,
                gt_count: gt_n[i],
                pred_count: pred_n[i],
            }
        })
        .collect();
    let mean_iou = if classes.is_empty() {
        0.0
    } else {
        classes.iter().map(|c| c.iou).sum::<f64>() / classes.len() as f64
    };
    Ok(IoUReport {
        classes,
        mean_iou,
        evaluated_texels: evaluated,
    })
}

fn same_shape(a: &TextureImage, b: &TextureImage) -> Result<(), MetricError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(MetricError::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// PSNR over the RGB channels in dB; `f64::INFINITY` for identical images.
pub fn psnr(a: &TextureImage, b: &TextureImage) -> Result<f64, MetricError> {
    same_shape(a, b)?;
    let mut sum = 0u64;
    for (pa, pb) in a.pixels().chunks_exact(4).zip(b.pixels().chunks_exact(4)) {
        for c in 0..3 {
            let d = pa[c] as i64 - pb[c] as i64;
            sum += (d * d) as u64;
        }
    }
    if sum == 0 {
        return Ok(f64::INFINITY);
    }
    let mse = sum as f64 / (a.width() as f64 * a.height() as f64 * 3.0);
    Ok(10.0 * (255.0f64 * 255.0 / mse).log10())
}

pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const SSIM_L: f64 = 255.0;

fn luma(img: &TextureImage) -> Vec<f64> {
    img.pixels()
        .chunks_exact(4)
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect()
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut k = [0.0; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let x = i as f64 - r;
        *v = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Separable Gaussian filter keeping only windows fully inside the image.
fn filter_valid(data: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ow, oh) = (w - SSIM_WINDOW + 1, h - SSIM_WINDOW + 1);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * data[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW)
                .map(|i| k[i] * rows[(y + i) * ow + x])
                .sum();
        }
    }
    out
}

/// Mean SSIM on luma (BT.601 weights) over all fully-contained 11×11
/// Gaussian windows (σ = 1.5, K1 = 0.01, K2 = 0.03, L = 255).
pub fn ssim(a: &TextureImage, b: &TextureImage) -> Result<f64, MetricError> {
    same_shape(a, b)?;
    let (w, h) = (a.width() as usize, a.height() as usize);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricError::TooSmall);
    }
    let (x, y) = (luma(a), luma(b));
    let k = gaussian_kernel();
    let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(u, v)| u * v).collect::<Vec<_>>();
    let mx = filter_valid(&x, w, h, &k);
    let my = filter_valid(&y, w, h, &k);
    let mxx = filter_valid(&prod(&x, &x), w, h, &k);
    let myy = filter_valid(&prod(&y, &y), w, h, &k);
    let mxy = filter_valid(&prod(&x, &y), w, h, &k);
    let c1 = (SSIM_K1 * SSIM_L).powi(2);
    let c2 = (SSIM_K2 * SSIM_L).powi(2);
    let n = mx.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = mxx[i] - ux * ux;
            let vy = myy[i] - uy * uy;
            let cov = mxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / n as f64)
}
