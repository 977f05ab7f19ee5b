//! Weighted voting over the per-view label UV stack, followed by region
//! unification.
//!
//! Each view contributes its label at a texel with weight `alpha` if it is
//! one of the manual inspection views and 1 otherwise; the fused label is
//! the heaviest class, ties going to the lowest class id. Tallies are kept
//! as integer counts per view kind so the weighted sums are exact and
//! independent of accumulation order.

mod nearest;
mod unify;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::multiview::ViewSchedule;
use crate::seg_backend::{BACKGROUND, NUM_CLASSES};
use crate::uv_bake::{LabelUV, ViewTag};

pub use self::nearest::nearest_source;
pub use self::unify::{region_unify, region_unify_with_stats, UnifyStats};

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("invalid fusion config: {0}")]
    InvalidConfig(String),
    #[error("label UV resolution mismatch: {0}")]
    ShapeMismatch(String),
    #[error("stack has {stack} maps but the schedule has {schedule} views")]
    LengthMismatch { stack: usize, schedule: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    /// Vote weight of the manual views.
    pub alpha: f64,
    /// Regions smaller than this fraction of the assigned texels are absorbed.
    pub unify_min_region: f64,
    /// A face takes part in unification only if its most frequent label
    /// covers at least this fraction of its texels.
    pub unify_dominance: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            alpha: 2.0,
            unify_min_region: 0.005,
            unify_dominance: 0.8,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        if !(self.alpha >= 1.0) || !self.alpha.is_finite() {
            return Err(FusionError::InvalidConfig(format!(
                "alpha {} must be >= 1",
                self.alpha
            )));
        }
        if !(self.unify_min_region > 0.0 && self.unify_min_region < 1.0) {
            return Err(FusionError::InvalidConfig(format!(
                "unify_min_region {} must lie in (0, 1)",
                self.unify_min_region
            )));
        }
        if !(self.unify_dominance > 0.5 && self.unify_dominance <= 1.0) {
            return Err(FusionError::InvalidConfig(format!(
                "unify_dominance {} must lie in (0.5, 1]",
                self.unify_dominance
            )));
        }
        Ok(())
    }
}

/// Per-texel vote tallies, split into manual-view and other-view counts.
#[derive(Clone, Debug, PartialEq)]
pub struct VoteHistogram {
    pub resolution: u32,
    pub alpha: f64,
    manual: Vec<[u16; NUM_CLASSES]>,
    auto: Vec<[u16; NUM_CLASSES]>,
}

impl VoteHistogram {
    pub fn texel_count(&self) -> usize {
        self.manual.len()
    }

    pub fn manual_counts(&self, texel: usize) -> &[u16; NUM_CLASSES] {
        &self.manual[texel]
    }

    pub fn auto_counts(&self, texel: usize) -> &[u16; NUM_CLASSES] {
        &self.auto[texel]
    }

    pub fn weights(&self, texel: usize) -> [f64; NUM_CLASSES] {
        let (m, a) = (&self.manual[texel], &self.auto[texel]);
        std::array::from_fn(|c| self.alpha * m[c] as f64 + a[c] as f64)
    }

    pub fn total(&self, texel: usize) -> f64 {
        self.weights(texel).iter().sum()
    }

    /// Flat little-endian u16 dump: per texel (row-major), 14 manual-view
    /// counts followed by 14 other-view counts.
    pub fn dump_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.manual.len() * NUM_CLASSES * 4);
        for (m, a) in self.manual.iter().zip(&self.auto) {
            for v in m.iter().chain(a.iter()) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }
}

/// Tally the stack. `manual[i]` marks views weighted by `alpha`.
pub fn accumulate_flags(
    stack: &[LabelUV],
    manual: &[bool],
    alpha: f64,
) -> Result<VoteHistogram, FusionError> {
    if stack.len() != manual.len() {
        return Err(FusionError::LengthMismatch {
            stack: stack.len(),
            schedule: manual.len(),
        });
    }
    let resolution = stack.first().map(|m| m.resolution).unwrap_or(0);
    for m in stack {
        if m.resolution != resolution || m.labels.len() != (resolution as usize).pow(2) {
            return Err(FusionError::ShapeMismatch(format!(
                "{} vs {}",
                m.resolution, resolution
            )));
        }
    }
    let n = (resolution as usize).pow(2);
    let mut manual_counts = vec![[0u16; NUM_CLASSES]; n];
    let mut auto_counts = vec![[0u16; NUM_CLASSES]; n];

    let tally =
        |start: usize, m_out: &mut [[u16; NUM_CLASSES]], a_out: &mut [[u16; NUM_CLASSES]]| {
            for (view, map) in stack.iter().enumerate() {
                let target = if manual[view] {
                    &mut *m_out
                } else {
                    &mut *a_out
                };
                for (k, bins) in target.iter_mut().enumerate() {
                    let label = map.labels[start + k];
                    if label != BACKGROUND {
                        bins[label as usize] += 1;
                    }
                }
            }
        };

    const CHUNK: usize = 4096;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        manual_counts
            .par_chunks_mut(CHUNK)
            .zip(auto_counts.par_chunks_mut(CHUNK))
            .enumerate()
            .for_each(|(c, (m, a))| tally(c * CHUNK, m, a));
    }
    #[cfg(not(feature = "parallel"))]
    for (c, (m, a)) in manual_counts
        .chunks_mut(CHUNK)
        .zip(auto_counts.chunks_mut(CHUNK))
        .enumerate()
    {
        tally(c * CHUNK, m, a);
    }

    Ok(VoteHistogram {
        resolution,
        alpha,
        manual: manual_counts,
        auto: auto_counts,
    })
}

pub fn accumulate(
    stack: &[LabelUV],
    schedule: &ViewSchedule,
    cfg: &FusionConfig,
) -> Result<VoteHistogram, FusionError> {
    cfg.validate()?;
    let manual: Vec<bool> = schedule.poses.iter().map(|p| p.manual).collect();
    accumulate_flags(stack, &manual, cfg.alpha)
}

/// Heaviest class per texel; ties go to the lowest id, empty tallies to 255.
pub fn vote(hist: &VoteHistogram) -> LabelUV {
    let labels = (0..hist.texel_count())
        .map(|t| {
            let w = hist.weights(t);
            let mut best = BACKGROUND;
            let mut best_weight = 0.0;
            for (c, &v) in w.iter().enumerate() {
                if v > best_weight {
                    best_weight = v;
                    best = c as u8;
                }
            }
            best
        })
        .collect();
    LabelUV {
        resolution: hist.resolution,
        labels,
        view: ViewTag::Fused,
    }
}
