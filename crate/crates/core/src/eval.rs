//! Imputation quality: NRMSE, color relevance (CRS) and color variance
//! (CVS) under a random-drop protocol.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::color::{ciede2000, LabColor};
use crate::error::{EvalError, ModelError};
use crate::features::FeatureVector;
use crate::recommender::{present_color_slots, Imputer};

/// Mean over imputations of the std-normalized RMSE on the dropped scalars.
/// Zero stds count as 1.
pub fn nrmse(truth: &[f64], imputations: &[Vec<f64>], stds: &[f64]) -> Result<f64, EvalError> {
    if imputations.is_empty() {
        return Err(EvalError::NoImputations);
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = imputations
        .iter()
        .map(|imp| {
            let mse = truth
                .iter()
                .zip(imp)
                .zip(stds)
                .map(|((t, x), s)| {
                    let s = if *s > 0.0 { *s } else { 1.0 };
                    ((x - t) / s).powi(2)
                })
                .sum::<f64>()
                / truth.len() as f64;
            mse.sqrt()
        })
        .sum();
    Ok(total / imputations.len() as f64)
}

/// Mean CIEDE2000 between corresponding colors.
pub fn palette_distance(a: &[LabColor], b: &[LabColor]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| ciede2000(*x, *y)).sum::<f64>() / a.len() as f64
}

/// Σᵢ d(truth, Cᵢ).
pub fn crs(truth: &[LabColor], imputations: &[Vec<LabColor>]) -> f64 {
    imputations.iter().map(|c| palette_distance(truth, c)).sum()
}

/// Σ_{i<j} d(Cᵢ, Cⱼ).
pub fn cvs(imputations: &[Vec<LabColor>]) -> f64 {
    let mut total = 0.0;
    for i in 0..imputations.len() {
        for j in i + 1..imputations.len() {
            total += palette_distance(&imputations[i], &imputations[j]);
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalProtocolConfig {
    pub drop_fraction: f64,
    pub replicates_per_item: usize,
    pub samples_per_replicate: usize,
    pub seed: u64,
}

impl Default for EvalProtocolConfig {
    fn default() -> Self {
        Self {
            drop_fraction: 0.5,
            replicates_per_item: 5,
            samples_per_replicate: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub method: String,
    pub nrmse: f64,
    pub crs: f64,
    pub cvs: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricTable {
    pub rows: Vec<MetricRow>,
    /// Item × replicate cases averaged per row.
    pub cases: usize,
}

impl MetricTable {
    pub fn get(&self, method: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,nrmse,crs,cvs\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.method, r.nrmse, r.crs, r.cvs);
        }
        out
    }

    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.method.len()).max().unwrap_or(6).max(6);
        let mut out = format!("{:<width$}  {:>8}  {:>8}  {:>8}\n", "method", "NRMSE", "CRS", "CVS");
        for r in &self.rows {
            let _ = writeln!(out, "{:<width$}  {:>8.4}  {:>8.4}  {:>8.4}", r.method, r.nrmse, r.crs, r.cvs);
        }
        out
    }

    /// All metrics finite and non-negative.
    pub fn invariants_hold(&self) -> bool {
        self.rows
            .iter()
            .all(|r| [r.nrmse, r.crs, r.cvs].iter().all(|x| x.is_finite() && *x >= 0.0))
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Seed shared by every method for one (item, replicate) case.
pub fn case_seed(protocol_seed: u64, item_id: &str, replicate: usize) -> u64 {
    fnv1a(item_id.as_bytes()) ^ protocol_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (replicate as u64).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Color slots to drop: `max(1, round(fraction · m))` of the `m` present
/// triples, chosen by the case seed.
pub fn drop_slots(truth: &FeatureVector, fraction: f64, seed: u64) -> Vec<usize> {
    let mut present = present_color_slots(truth);
    if present.is_empty() {
        return present;
    }
    let k = ((fraction * present.len() as f64).round() as usize).clamp(1, present.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    present.shuffle(&mut rng);
    let mut out = present[..k].to_vec();
    out.sort_unstable();
    out
}

fn case_metrics(
    truth: &FeatureVector,
    slots: &[usize],
    outs: &[FeatureVector],
    stds: &[f64],
) -> Result<[f64; 3], EvalError> {
    let cols: Vec<usize> = slots
        .iter()
        .flat_map(|&s| {
            let o = truth.layout.color_offset(s);
            o..o + 3
        })
        .collect();
    let t: Vec<f64> = cols.iter().map(|&c| truth.values[c]).collect();
    let sd: Vec<f64> = cols.iter().map(|&c| stds[c]).collect();
    let imps: Vec<Vec<f64>> = outs.iter().map(|o| cols.iter().map(|&c| o.values[c]).collect()).collect();
    let tc: Vec<LabColor> = slots.iter().map(|&s| truth.color(s)).collect();
    let ic: Vec<Vec<LabColor>> = outs.iter().map(|o| slots.iter().map(|&s| o.color(s)).collect()).collect();
    Ok([nrmse(&t, &imps, &sd)?, crs(&tc, &ic), cvs(&ic)])
}

/// Run every method on the same dropped-color requests and average the
/// metrics. `stds` are training-set column stds (full layout).
pub fn run_protocol(
    methods: &[&dyn Imputer],
    test: &[(String, FeatureVector)],
    stds: &[f64],
    config: &EvalProtocolConfig,
) -> Result<MetricTable, EvalError> {
    if !(config.drop_fraction > 0.0 && config.drop_fraction < 1.0)
        || config.replicates_per_item == 0
        || config.samples_per_replicate == 0
    {
        return Err(EvalError::Model(ModelError::Config(
            "drop_fraction must lie in (0, 1) and counts must be positive".into(),
        )));
    }
    let cases: Vec<(usize, usize)> = test
        .iter()
        .enumerate()
        .filter(|(_, (_, v))| !present_color_slots(v).is_empty())
        .flat_map(|(i, _)| (0..config.replicates_per_item).map(move |r| (i, r)))
        .collect();
    if cases.is_empty() {
        return Err(EvalError::EmptySplit);
    }

    let run_case = |&(i, r): &(usize, usize)| -> Result<Vec<[f64; 3]>, EvalError> {
        let (id, truth) = &test[i];
        let seed = case_seed(config.seed, id, r);
        let slots = drop_slots(truth, config.drop_fraction, seed);
        let mut req = truth.clone();
        for &s in &slots {
            req.set_color_hidden(s, true);
        }
        methods
            .iter()
            .map(|m| {
                let outs = m.impute(&req, config.samples_per_replicate, seed)?;
                if outs.is_empty() {
                    return Err(EvalError::NoImputations);
                }
                case_metrics(truth, &slots, &outs, stds)
            })
            .collect()
    };

    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(cases.len());
    let chunk = cases.len().div_ceil(threads);
    let results: Vec<Result<Vec<[f64; 3]>, EvalError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cases
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(run_case).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("evaluation worker panicked"))
            .collect()
    });

    // Summed in case order, so the result does not depend on threading.
    let mut sums = vec![[0.0; 3]; methods.len()];
    for r in results {
        for (acc, m) in sums.iter_mut().zip(r?) {
            for k in 0..3 {
                acc[k] += m[k];
            }
        }
    }
    let n = cases.len() as f64;
    Ok(MetricTable {
        rows: methods
            .iter()
            .zip(sums)
            .map(|(m, s)| MetricRow {
                method: m.name().to_string(),
                nrmse: s[0] / n,
                crs: s[1] / n,
                cvs: s[2] / n,
            })
            .collect(),
        cases: cases.len(),
    })
}

/// Seeded shuffle, then the first `1 - test_fraction` for training.
pub fn train_test_split<T>(items: Vec<T>, test_fraction: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    let mut items = items;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    items.shuffle(&mut rng);
    let n_test = ((items.len() as f64 * test_fraction).round() as usize).min(items.len());
    let test = items.split_off(items.len() - n_test);
    (items, test)
}

/// Returns the ground truth for any request whose observed entries match a
/// known vector; used to check the protocol end to end.
pub struct OracleImputer {
    truths: Vec<FeatureVector>,
}

impl OracleImputer {
    pub fn new(truths: Vec<FeatureVector>) -> Self {
        Self { truths }
    }
}

impl Imputer for OracleImputer {
    fn name(&self) -> &str {
        "oracle"
    }

    fn impute(&self, request: &FeatureVector, n: usize, _seed: u64) -> Result<Vec<FeatureVector>, ModelError> {
        let truth = self
            .truths
            .iter()
            .find(|t| {
                t.layout == request.layout
                    && (0..t.width()).all(|c| request.mask[c] || t.values[c] == request.values[c])
            })
            .ok_or_else(|| ModelError::InvalidRequest("no matching ground truth".into()))?;
        let mut out = request.clone();
        out.values = truth.values.clone();
        Ok(vec![out; n])
    }
}
