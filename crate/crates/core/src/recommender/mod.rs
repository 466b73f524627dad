//! Color imputation: the arbitrary-conditioning VAE, a chained-equations
//! baseline and a column-mean baseline, all behind [`Imputer`].

mod mice;
mod nn;
mod vaeac;

pub use mice::{mice_impute, MiceConfig, MiceImputer};
pub use nn::{Dense, Mlp};
pub use vaeac::{
    train, Batch, BatchLoss, ColumnSpec, Optimizer, TrainConfig, TrainReport, VaeacModel,
    VaeacNetwork, CHECKPOINT_FORMAT,
};

use serde::{Deserialize, Serialize};

use crate::color::LabColor;
use crate::error::ModelError;
use crate::features::{strip_spatial, FeatureKind, FeatureVector, Layout};

/// A vector whose hidden (`mask = true`) color triples are to be generated.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputationRequest {
    pub vector: FeatureVector,
    pub n_samples: usize,
}

impl ImputationRequest {
    pub fn new(vector: FeatureVector, n_samples: usize) -> Result<Self, ModelError> {
        validate_request_mask(&vector)?;
        if n_samples == 0 {
            return Err(ModelError::InvalidRequest("n_samples must be at least 1".into()));
        }
        Ok(Self { vector, n_samples })
    }
}

/// Hidden entries may only be whole color triples of colorable slots.
pub fn validate_request_mask(v: &FeatureVector) -> Result<(), ModelError> {
    v.check_layout(&v.layout)?;
    let l = v.layout;
    if v.mask[..l.non_color_width()].iter().any(|&m| m) {
        return Err(ModelError::InvalidRequest("non-color features must be observed".into()));
    }
    if v.values.iter().any(|x| !x.is_finite()) {
        return Err(ModelError::InvalidRequest("feature values must be finite".into()));
    }
    for s in 0..l.max_nodes {
        let o = l.color_offset(s);
        let m = &v.mask[o..o + 3];
        if m[0] != m[1] || m[1] != m[2] {
            return Err(ModelError::InvalidRequest(format!("slot {s}: color triple partly hidden")));
        }
        if m[0] && !v.slot_colorable(s) {
            return Err(ModelError::InvalidRequest(format!("slot {s} has no color to generate")));
        }
    }
    Ok(())
}

/// Anything that fills hidden color triples.
pub trait Imputer: Sync {
    fn name(&self) -> &str;

    /// `n` completed vectors. Observed entries are copied unchanged; the
    /// returned vectors keep the request's mask.
    fn impute(&self, request: &FeatureVector, n: usize, seed: u64) -> Result<Vec<FeatureVector>, ModelError>;
}

/// Per-column standardization statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Continuous columns get mean/std over known values (colors: only
    /// present, observed triples); zero-variance columns get std 1. Other
    /// columns pass through unscaled.
    pub fn fit(corpus: &[FeatureVector], layout: &Layout) -> Result<Self, ModelError> {
        if corpus.is_empty() {
            return Err(ModelError::EmptyCorpus);
        }
        for v in corpus {
            v.check_layout(layout)?;
        }
        let kinds = layout.kinds();
        let width = layout.width();
        let mut sum = vec![0.0; width];
        let mut sq = vec![0.0; width];
        let mut count = vec![0usize; width];
        for v in corpus {
            let known = known_columns(v);
            let present = present_color_slots(v);
            for c in 0..width {
                let counted = if layout.is_color_column(c) {
                    present.contains(&((c - layout.non_color_width()) / 3))
                } else {
                    known[c]
                };
                if counted {
                    sum[c] += v.values[c];
                    sq[c] += v.values[c] * v.values[c];
                    count[c] += 1;
                }
            }
        }
        let mut mean = vec![0.0; width];
        let mut std = vec![1.0; width];
        for c in 0..width {
            if kinds[c] != FeatureKind::Continuous || count[c] == 0 {
                continue;
            }
            let n = count[c] as f64;
            let m = sum[c] / n;
            let var = (sq[c] / n - m * m).max(0.0);
            mean[c] = m;
            std[c] = if var.sqrt() > 1e-9 { var.sqrt() } else { 1.0 };
        }
        Ok(Self { mean, std })
    }

    pub fn normalize(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&x, (&m, &s))| (x - m) / s)
            .collect()
    }

    pub fn denormalize(&self, col: usize, z: f64) -> f64 {
        z * self.std[col] + self.mean[col]
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }
}

/// Columns holding a real, known value: everything except colors that are
/// hidden or belong to colorable slots flagged unknown. Padding is known.
pub fn known_columns(v: &FeatureVector) -> Vec<bool> {
    let l = v.layout;
    let mut known = vec![true; v.width()];
    for s in 0..l.max_nodes {
        if v.color_hidden(s) {
            let o = l.color_offset(s);
            known[o..o + 3].fill(false);
        }
    }
    known
}

/// Colors present in the ground truth: colorable slots with observed triples.
pub fn present_color_slots(v: &FeatureVector) -> Vec<usize> {
    v.colorable_slots()
        .into_iter()
        .filter(|&s| !v.color_hidden(s))
        .collect()
}

/// Copy generated values into the hidden entries of `request`, snapping
/// hidden color triples to displayable colors.
pub(crate) fn complete(request: &FeatureVector, generated: &[f64], snap_colors: bool) -> FeatureVector {
    let mut out = request.clone();
    for (c, &hidden) in request.mask.iter().enumerate() {
        if hidden {
            out.values[c] = generated[c];
        }
    }
    if snap_colors {
        for s in request.hidden_color_slots() {
            let c = out.color(s);
            let c = LabColor::new(c.l.clamp(0.0, 100.0), c.a, c.b).displayable();
            out.set_color(s, c);
        }
    }
    out
}

/// Run `f` on the non-spatial form of `request` when `target` is a
/// non-spatial layout, then carry the generated colors back.
pub(crate) fn with_layout<F>(request: &FeatureVector, target: &Layout, f: F) -> Result<Vec<FeatureVector>, ModelError>
where
    F: FnOnce(&FeatureVector) -> Result<Vec<FeatureVector>, ModelError>,
{
    if request.layout == *target {
        return f(request);
    }
    if request.layout.spatial && !target.spatial && request.layout.max_nodes == target.max_nodes {
        let stripped = strip_spatial(request)?;
        let outs = f(&stripped)?;
        return Ok(outs
            .into_iter()
            .map(|o| {
                let mut full = request.clone();
                for s in request.hidden_color_slots() {
                    full.set_color(s, o.color(s));
                }
                full
            })
            .collect());
    }
    Err(ModelError::WidthMismatch {
        expected: target.width(),
        got: request.width(),
    })
}

/// Fills hidden entries with training-set column means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanImputer {
    pub layout: Layout,
    pub normalizer: Normalizer,
}

impl MeanImputer {
    pub fn fit(corpus: &[FeatureVector]) -> Result<Self, ModelError> {
        let layout = corpus.first().ok_or(ModelError::EmptyCorpus)?.layout;
        Ok(Self {
            layout,
            normalizer: Normalizer::fit(corpus, &layout)?,
        })
    }
}

impl Imputer for MeanImputer {
    fn name(&self) -> &str {
        "mean"
    }

    fn impute(&self, request: &FeatureVector, n: usize, _seed: u64) -> Result<Vec<FeatureVector>, ModelError> {
        validate_request_mask(request)?;
        with_layout(request, &self.layout, |req| {
            Ok(vec![complete(req, &self.normalizer.mean, false); n])
        })
    }
}
