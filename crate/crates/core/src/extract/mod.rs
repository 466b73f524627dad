//! Raster infographic + data-element annotations -> [`InfographicDoc`].
//!
//! Steps: repaint annotated data elements with their surrounding color,
//! grow color regions under a CIEDE2000 threshold, merge gradient pieces
//! whose hues share a KDE mode, classify each region's outline, then build
//! the containment tree and insert visual groups.

mod cleanup;
mod merge;
mod segment;
mod shape;
mod tree;

pub use cleanup::{remove_data_elements, ring_color};
pub use merge::{merge_gradient_segments, ACHROMATIC_CHROMA};
pub use segment::{segment_regions, segment_regions_with, Segment};
pub use shape::{classify_shape, classify_shape_with, simplify_closed, trace_outer_contour};
pub use tree::build_tree;

use serde::{Deserialize, Serialize};

use crate::doc::{InfographicDoc, DEFAULT_MAX_NODES};
use crate::error::ExtractError;
use crate::raster::{AnnotationSet, RasterImage};

/// Tunables of the extraction pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractParams {
    /// CIEDE2000 region-growing threshold.
    pub threshold: f64,
    /// Gaussian KDE bandwidth on hue (degrees) / lightness.
    pub bandwidth: f64,
    /// Regions smaller than this fraction of the image are absorbed.
    pub min_segment_fraction: f64,
    /// RDP tolerance as a fraction of contour length.
    pub rdp_eps_fraction: f64,
    /// A simplified outline needs more vertices than this to be a circle.
    pub circle_min_vertices: usize,
    /// Longest/shortest side ratio at or below which a quadrilateral is a square.
    pub square_ratio: f64,
    /// Proximity-grouping distance as a fraction of the image diagonal.
    pub group_gap: f64,
    /// Width in pixels of the ring sampled around a data element.
    pub ring_width: u32,
    pub max_nodes: usize,
}

impl Default for ExtractParams {
    fn default() -> Self {
        Self {
            threshold: 4.0,
            bandwidth: 3.0,
            min_segment_fraction: 0.0005,
            rdp_eps_fraction: 0.01,
            circle_min_vertices: 8,
            square_ratio: 1.2,
            group_gap: 0.08,
            ring_width: 2,
            max_nodes: DEFAULT_MAX_NODES,
        }
    }
}

impl ExtractParams {
    pub fn min_segment_area(&self, pixels: usize) -> usize {
        ((pixels as f64 * self.min_segment_fraction).ceil() as usize).max(1)
    }
}

/// Full pipeline.
pub fn extract_document(
    img: &RasterImage,
    ann: &AnnotationSet,
    params: &ExtractParams,
) -> Result<InfographicDoc, ExtractError> {
    ann.validate(img)?;
    let clean = remove_data_elements(img, ann, params.ring_width);
    let segments = segment_regions_with(&clean, params.threshold, params.min_segment_area(img.len()));
    let merged = merge_gradient_segments(&segments, params.bandwidth);
    build_tree(img, ann, &merged, params)
}
