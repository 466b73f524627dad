//! User preferences — exact colors, vague words and binding sets — turned
//! into masked imputation requests, and the post-processing that turns
//! imputed vectors into presentable palettes.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize};

use crate::color::{ciede2000, rgb_to_lab, LabColor, RgbColor};
use crate::doc::InfographicDoc;
use crate::error::{ModelError, PreferenceError};
use crate::eval::fnv1a;
use crate::features::{featurize, FeatureVector};
use crate::recommender::{ImputationRequest, Imputer};

/// The lexicon shipped with the crate.
pub const BUILTIN_LEXICON: &str = include_str!("../data/lexicon.v1.json");
/// Concrete variants drawn per vague preference set.
pub const DEFAULT_VARIANTS: usize = 3;
/// Palettes returned by [`recommend`] unless asked otherwise.
pub const DEFAULT_RECOMMENDATIONS: usize = 5;
/// Two palettes are duplicates when no node differs by this much or more.
pub const DUPLICATE_DELTA_E: f64 = 2.0;
/// Sampling rounds [`recommend`] spends trying to fill `n` distinct palettes.
const MAX_ROUNDS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    ColorName,
    Object,
    Affect,
    Lightness,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry {
    pub category: Category,
    pub colors: Vec<LabColor>,
}

#[derive(Deserialize)]
struct LexiconRecord {
    word: String,
    category: Category,
    colors: Vec<RgbColor>,
}

/// Word → candidate colors.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    entries: BTreeMap<String, LexiconEntry>,
}

impl Lexicon {
    /// Parse a JSON list of `{word, category, colors: ["#RRGGBB", ..]}`.
    pub fn from_json(s: &str) -> Result<Self, PreferenceError> {
        let records: Vec<LexiconRecord> =
            serde_json::from_str(s).map_err(|e| PreferenceError::BadLexicon("<file>".into(), e.to_string()))?;
        let mut entries = BTreeMap::new();
        for r in records {
            let bad = |why: &str| PreferenceError::BadLexicon(r.word.clone(), why.into());
            if r.word.is_empty() || r.word != r.word.to_lowercase() {
                return Err(bad("words must be non-empty and lowercase"));
            }
            if r.colors.is_empty() {
                return Err(bad("entry has no colors"));
            }
            let entry = LexiconEntry {
                category: r.category,
                colors: r.colors.into_iter().map(rgb_to_lab).collect(),
            };
            if entries.insert(r.word.clone(), entry).is_some() {
                return Err(bad("duplicate word"));
            }
        }
        Ok(Self { entries })
    }

    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_LEXICON).expect("bundled lexicon is valid")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = (&str, &LexiconEntry)> {
        self.entries.iter().map(|(w, e)| (w.as_str(), e))
    }

    /// Case-insensitive lookup; unknown words report their nearest
    /// neighbors by edit similarity.
    pub fn get(&self, word: &str) -> Result<&LexiconEntry, PreferenceError> {
        let key = word.trim().to_lowercase();
        self.entries.get(&key).ok_or_else(|| PreferenceError::UnknownWord {
            word: word.to_string(),
            suggestions: self.suggestions(&key, 3),
        })
    }

    pub fn suggestions(&self, word: &str, n: usize) -> Vec<String> {
        let mut scored: Vec<(f64, &String)> = self
            .entries
            .keys()
            .map(|w| (strsim::jaro_winkler(word, w), w))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        scored.into_iter().take(n).map(|(_, w)| w.clone()).collect()
    }
}

/// Accepts `"#RRGGBB"` or `{"l":..,"a":..,"b":..}`.
#[derive(Deserialize)]
#[serde(untagged)]
enum ColorInput {
    Hex(RgbColor),
    Lab(LabColor),
}

fn deserialize_pins<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, LabColor>, D::Error> {
    let raw: BTreeMap<String, ColorInput> = BTreeMap::deserialize(d)?;
    raw.into_iter()
        .map(|(k, c)| {
            let lab = match c {
                ColorInput::Hex(rgb) => rgb_to_lab(rgb),
                ColorInput::Lab(lab) if lab.is_finite() => lab,
                ColorInput::Lab(_) => return Err(serde::de::Error::custom(format!("pin for {k:?} is not finite"))),
            };
            Ok((k, lab))
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PreferenceSet {
    /// Pinned colors.
    #[serde(default, deserialize_with = "deserialize_pins")]
    pub exact: BTreeMap<String, LabColor>,
    /// Lexicon words, expanded by [`expand_vague`].
    #[serde(default)]
    pub vague: BTreeMap<String, String>,
    /// Disjoint sets of nodes that must share one color.
    #[serde(default)]
    pub bindings: Vec<Vec<String>>,
}

impl PreferenceSet {
    pub fn is_concrete(&self) -> bool {
        self.vague.is_empty()
    }

    pub fn validate(&self, doc: &InfographicDoc) -> Result<(), PreferenceError> {
        let check = |id: &str| match doc.node(id) {
            None => Err(PreferenceError::UnknownNode(id.into())),
            Some(n) if !n.kind.is_colorable() => Err(PreferenceError::NotColorable(id.into())),
            Some(_) => Ok(()),
        };
        for id in self.exact.keys().chain(self.vague.keys()) {
            check(id)?;
        }
        if let Some(id) = self.exact.keys().find(|id| self.vague.contains_key(*id)) {
            return Err(PreferenceError::Conflicting(id.clone()));
        }
        let mut seen = BTreeSet::new();
        for set in &self.bindings {
            for id in set {
                check(id)?;
                if !seen.insert(id) {
                    return Err(PreferenceError::OverlappingBindings(id.clone()));
                }
            }
            let pins: Vec<LabColor> = set.iter().filter_map(|id| self.exact.get(id).copied()).collect();
            if pins.windows(2).any(|w| w[0] != w[1]) {
                return Err(PreferenceError::BindingConflict(set.join(", ")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaletteSource {
    Model,
    User,
}

/// One color per colorable node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    pub assignment: BTreeMap<String, LabColor>,
    pub source: PaletteSource,
    pub request_hash: u64,
    pub sample_index: usize,
}

impl Palette {
    /// Read the colors of every colorable slot.
    pub fn from_vector(v: &FeatureVector, request_hash: u64, sample_index: usize, source: PaletteSource) -> Self {
        let assignment = v
            .colorable_slots()
            .into_iter()
            .filter_map(|s| v.slot_map[s].clone().map(|id| (id, v.color(s))))
            .collect();
        Self {
            assignment,
            source,
            request_hash,
            sample_index,
        }
    }

    /// Largest per-node CIEDE2000 difference; infinite when the palettes
    /// cover different nodes.
    pub fn max_delta_e(&self, other: &Palette) -> f64 {
        if self.assignment.len() != other.assignment.len() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for (id, &c) in &self.assignment {
            match other.assignment.get(id) {
                Some(&o) => worst = worst.max(ciede2000(c, o)),
                None => return f64::INFINITY,
            }
        }
        worst
    }

    pub fn is_duplicate_of(&self, other: &Palette) -> bool {
        self.max_delta_e(other) < DUPLICATE_DELTA_E
    }

    pub fn to_hex(&self) -> BTreeMap<String, String> {
        self.assignment.iter().map(|(k, c)| (k.clone(), c.to_hex())).collect()
    }

    /// Write the colors into `doc`.
    pub fn apply_to(&self, doc: &mut InfographicDoc) {
        for (id, &c) in &self.assignment {
            if let Some(n) = doc.node_mut(id) {
                n.color = Some(c);
            }
        }
    }
}

/// `k` concrete variants: each vague node gets one color per variant,
/// drawn without replacement from its entry (with replacement when the
/// entry has fewer than `k` colors). Exact pins and bindings are kept.
pub fn expand_vague(
    prefs: &PreferenceSet,
    lexicon: &Lexicon,
    k: usize,
    seed: u64,
) -> Result<Vec<PreferenceSet>, PreferenceError> {
    if prefs.vague.is_empty() {
        return Ok(vec![prefs.clone()]);
    }
    if k == 0 {
        return Err(ModelError::InvalidRequest("k must be at least 1".into()).into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut variants = vec![
        PreferenceSet {
            vague: BTreeMap::new(),
            ..prefs.clone()
        };
        k
    ];
    for (id, word) in &prefs.vague {
        let colors = &lexicon.get(word)?.colors;
        let picks: Vec<usize> = if colors.len() >= k {
            rand::seq::index::sample(&mut rng, colors.len(), k).into_vec()
        } else {
            (0..k).map(|_| rng.gen_range(0..colors.len())).collect()
        };
        for (variant, i) in variants.iter_mut().zip(picks) {
            variant.exact.insert(id.clone(), colors[i]);
        }
    }
    Ok(variants)
}

/// Masked request for a concrete preference set: pinned nodes observed with
/// their pins, every other color hidden.
pub fn to_request(doc: &InfographicDoc, prefs: &PreferenceSet) -> Result<ImputationRequest, PreferenceError> {
    if !prefs.is_concrete() {
        return Err(PreferenceError::NotConcrete);
    }
    prefs.validate(doc)?;
    let mut v = featurize(doc)?;
    for s in v.colorable_slots() {
        v.set_color_hidden(s, true);
    }
    for (id, &c) in &prefs.exact {
        let slot = v.slot_of(id).ok_or_else(|| PreferenceError::UnknownNode(id.clone()))?;
        v.set_color(slot, c);
        v.set_color_hidden(slot, false);
    }
    Ok(ImputationRequest::new(v, DEFAULT_RECOMMENDATIONS)?)
}

/// Hash of a request's values and mask, recorded on palettes.
pub fn request_hash(v: &FeatureVector) -> u64 {
    let mut bytes = Vec::with_capacity(v.width() * 9);
    for (x, &m) in v.values.iter().zip(&v.mask) {
        bytes.extend_from_slice(&x.to_bits().to_le_bytes());
        bytes.push(m as u8);
    }
    fnv1a(&bytes)
}

/// Make every binding set monochrome: one member, drawn with probability
/// proportional to its pixel area (uniformly if all areas are zero), lends
/// its color to the rest. Draws are independent per palette.
pub fn apply_bindings(
    palettes: &[Palette],
    bindings: &[Vec<String>],
    node_areas: &HashMap<String, u64>,
    seed: u64,
) -> Vec<Palette> {
    apply_bindings_ranked(palettes, bindings, node_areas, &BTreeMap::new(), seed)
}

/// As [`apply_bindings`], but only the members of highest `rank` are
/// candidates, so pinned members win over unpinned ones.
fn apply_bindings_ranked(
    palettes: &[Palette],
    bindings: &[Vec<String>],
    node_areas: &HashMap<String, u64>,
    rank: &BTreeMap<String, u8>,
    seed: u64,
) -> Vec<Palette> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    palettes
        .iter()
        .map(|p| {
            let mut out = p.clone();
            for set in bindings {
                let members: Vec<&String> = set.iter().filter(|id| p.assignment.contains_key(*id)).collect();
                if members.len() < 2 {
                    continue;
                }
                let top = members.iter().map(|id| rank.get(*id).copied().unwrap_or(0)).max().unwrap();
                let candidates: Vec<&String> = members
                    .iter()
                    .copied()
                    .filter(|id| rank.get(*id).copied().unwrap_or(0) == top)
                    .collect();
                let weights: Vec<f64> = candidates
                    .iter()
                    .map(|id| node_areas.get(*id).copied().unwrap_or(0) as f64)
                    .collect();
                let pick = match WeightedIndex::new(&weights) {
                    Ok(w) => w.sample(&mut rng),
                    Err(_) => rng.gen_range(0..candidates.len()),
                };
                let color = p.assignment[candidates[pick]];
                for id in members {
                    out.assignment.insert(id.clone(), color);
                }
            }
            out
        })
        .collect()
}

fn round_seed(seed: u64, round: usize, variant: usize) -> u64 {
    seed ^ (round as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (variant as u64 + 1).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

/// Up to `n` distinct palettes honoring `prefs`: vague words are expanded
/// into [`DEFAULT_VARIANTS`] concrete requests, each imputed `n` times;
/// bindings are applied, the pooled samples shuffled (seeded) and
/// near-duplicates dropped. More rounds are sampled while fewer than `n`
/// distinct palettes are found. Never empty when imputation succeeds.
pub fn recommend(
    doc: &InfographicDoc,
    prefs: &PreferenceSet,
    n: usize,
    model: &dyn Imputer,
    lexicon: &Lexicon,
    seed: u64,
) -> Result<Vec<Palette>, PreferenceError> {
    if n == 0 {
        return Err(ModelError::InvalidRequest("n must be at least 1".into()).into());
    }
    prefs.validate(doc)?;
    let variants = expand_vague(prefs, lexicon, DEFAULT_VARIANTS, seed)?;
    let areas: HashMap<String, u64> = doc.nodes.iter().map(|n| (n.id.clone(), n.pixel_area)).collect();
    let mut rank: BTreeMap<String, u8> = prefs.vague.keys().map(|id| (id.clone(), 1)).collect();
    rank.extend(prefs.exact.keys().map(|id| (id.clone(), 2)));

    let requests = variants
        .iter()
        .map(|v| to_request(doc, v))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept: Vec<Palette> = Vec::with_capacity(n);
    for round in 0..MAX_ROUNDS {
        let mut pool = Vec::new();
        for (vi, req) in requests.iter().enumerate() {
            let hash = request_hash(&req.vector);
            let samples = model.impute(&req.vector, n, round_seed(seed, round, vi))?;
            let palettes: Vec<Palette> = samples
                .iter()
                .enumerate()
                .map(|(si, s)| Palette::from_vector(s, hash, round * n + si, PaletteSource::Model))
                .collect();
            pool.extend(apply_bindings_ranked(&palettes, &prefs.bindings, &areas, &rank, round_seed(seed, round, vi) ^ 1));
        }
        pool.shuffle(&mut rng);
        for p in pool {
            if kept.len() == n {
                break;
            }
            if !kept.iter().any(|q| p.is_duplicate_of(q)) {
                kept.push(p);
            }
        }
        if kept.len() == n {
            break;
        }
    }
    Ok(kept)
}
