//! Chained-equations baseline.
//!
//! Every hidden column is redrawn in turn from a ridge regression on all
//! other columns. The regressions are read off the precision matrix of the
//! (ridge-regularized) training covariance, so fitting happens once.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{complete, known_columns, validate_request_mask, with_layout, Imputer, Normalizer};
use crate::error::ModelError;
use crate::features::{FeatureVector, Layout};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiceConfig {
    pub iterations: usize,
    /// Added to the covariance diagonal before inversion.
    pub ridge: f64,
}

impl Default for MiceConfig {
    fn default() -> Self {
        Self {
            iterations: 10,
            ridge: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiceImputer {
    pub layout: Layout,
    pub config: MiceConfig,
    normalizer: Normalizer,
    /// Normalized column means.
    mean: Vec<f64>,
    precision: DMatrix<f64>,
}

impl MiceImputer {
    pub fn fit(corpus: &[FeatureVector], config: MiceConfig) -> Result<Self, ModelError> {
        let layout = corpus.first().ok_or(ModelError::EmptyCorpus)?.layout;
        if !(config.ridge > 0.0) || config.iterations == 0 {
            return Err(ModelError::Config("ridge must be positive and iterations non-zero".into()));
        }
        let normalizer = Normalizer::fit(corpus, &layout)?;
        let w = layout.width();
        let n = corpus.len();
        // Unknown entries sit at the column mean, i.e. 0 after normalizing
        // continuous columns (categoricals are always known).
        let mut data = DMatrix::zeros(n, w);
        for (i, v) in corpus.iter().enumerate() {
            let k = known_columns(v);
            let z = normalizer.normalize(&v.values);
            for c in 0..w {
                if k[c] {
                    data[(i, c)] = z[c];
                }
            }
        }
        let mean: Vec<f64> = (0..w).map(|c| data.column(c).mean()).collect();
        for c in 0..w {
            let m = mean[c];
            data.column_mut(c).add_scalar_mut(-m);
        }
        let mut cov = data.transpose() * &data / n as f64;
        for c in 0..w {
            cov[(c, c)] += config.ridge;
        }
        let precision = cov
            .cholesky()
            .ok_or_else(|| ModelError::Config("covariance is not positive definite".into()))?
            .inverse();
        Ok(Self {
            layout,
            config,
            normalizer,
            mean,
            precision,
        })
    }

    fn chain(&self, req: &FeatureVector, rng: &mut ChaCha8Rng) -> FeatureVector {
        let w = self.layout.width();
        let mut x = self.normalizer.normalize(&req.values);
        let hidden: Vec<usize> = (0..w).filter(|&c| req.mask[c]).collect();
        for &c in &hidden {
            x[c] = self.mean[c];
        }
        for _ in 0..self.config.iterations {
            for &j in &hidden {
                let tjj = self.precision[(j, j)];
                let mut mu = self.mean[j];
                for k in 0..w {
                    if k != j {
                        mu -= self.precision[(j, k)] / tjj * (x[k] - self.mean[k]);
                    }
                }
                let e: f64 = rng.sample(StandardNormal);
                x[j] = mu + e / tjj.sqrt();
            }
        }
        let gen: Vec<f64> = (0..w).map(|c| self.normalizer.denormalize(c, x[c])).collect();
        complete(req, &gen, true)
    }
}

impl Imputer for MiceImputer {
    fn name(&self) -> &str {
        "mice"
    }

    fn impute(&self, request: &FeatureVector, n: usize, seed: u64) -> Result<Vec<FeatureVector>, ModelError> {
        validate_request_mask(request)?;
        with_layout(request, &self.layout, |req| {
            Ok((0..n)
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
                    self.chain(req, &mut rng)
                })
                .collect())
        })
    }
}

/// Fit on `corpus` and impute `request` in one call.
pub fn mice_impute(corpus: &[FeatureVector], request: &FeatureVector, n: usize, seed: u64) -> Result<Vec<FeatureVector>, ModelError> {
    MiceImputer::fit(corpus, MiceConfig::default())?.impute(request, n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::LabColor;
    use crate::features::featurize;
    use crate::recommender::tests::small_doc;

    /// Slot 1 lightness tracks slot 0 lightness exactly.
    fn corpus() -> Vec<FeatureVector> {
        (0..60)
            .map(|i| {
                let l = 20.0 + (i % 11) as f64 * 5.0;
                let mut doc = small_doc(LabColor::new(l, 0.0, 0.0));
                doc.nodes[0].color = Some(LabColor::new(100.0 - l, 0.0, 0.0));
                featurize(&doc).unwrap()
            })
            .collect()
    }

    #[test]
    fn all_observed_is_unchanged() {
        let c = corpus();
        let out = mice_impute(&c, &c[3], 2, 0).unwrap();
        assert_eq!(out, vec![c[3].clone(); 2]);
    }

    #[test]
    fn recovers_linear_relation_and_is_seeded() {
        let c = corpus();
        let mut req = c[5].clone();
        req.set_color_hidden(1, true);
        let m = MiceImputer::fit(&c, MiceConfig::default()).unwrap();
        let a = m.impute(&req, 4, 7).unwrap();
        assert_eq!(a, m.impute(&req, 4, 7).unwrap());
        let truth = c[5].color(1).l;
        for o in &a {
            assert!((o.color(1).l - truth).abs() < 5.0, "{} vs {truth}", o.color(1).l);
            assert_eq!(o.color(0), req.color(0));
        }
    }
}
