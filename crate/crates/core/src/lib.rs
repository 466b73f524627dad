//! Data-driven color palette recommendation for infographics.
//!
//! The crate covers the whole engine: structure extraction from rasters
//! ([`extract`]), the tree document model ([`doc`], [`nested_set`]), the
//! feature encoding ([`features`]), an arbitrary-conditioning variational
//! autoencoder and baselines ([`recommender`]), preference handling
//! ([`prefs`]) and the evaluation protocol ([`eval`]).

pub mod color;
pub mod doc;
pub mod eval;
pub mod error;
pub mod extract;
pub mod features;
pub mod nested_set;
pub mod prefs;
pub mod raster;
pub mod recommender;
pub mod synth;

pub use color::{ciede2000, lab_to_rgb_clamped, rgb_to_lab, LabColor, RgbColor};
pub use doc::{BBox, ElementNode, ElementType, InfographicDoc, NodeKind, VifType};
pub use features::{featurize, strip_spatial, FeatureVector, Layout};
pub use nested_set::{decode_nested_set, encode_nested_set, NestedSetIndex};
pub use prefs::{recommend, Lexicon, Palette, PreferenceSet};
