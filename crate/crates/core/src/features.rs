//! Fixed-width numeric encoding `[F, C]` of a document.
//!
//! Column order (also the CSV header order, see [`Layout::column_names`]):
//!
//! 1. `vif_<type>` one-hot over the 12 VIF types
//! 2. `group_count`, `group_distance`
//! 3. per node slot `s` (pre-order position, `max_nodes` slots):
//!    `s{s}_exists`, `s{s}_type_<class>` one-hot over 12 classes,
//!    `s{s}_rel_w`, `s{s}_rel_h`, `s{s}_rel_area`, `s{s}_group_elems`,
//!    and when spatial features are kept `s{s}_left`, `s{s}_right`
//! 4. per node slot `s`: `s{s}_L`, `s{s}_a`, `s{s}_b`
//!
//! Slots past the node count are zero and observed. Visual-group slots
//! have no color; their color triple is zero and observed.

use serde::{Deserialize, Serialize};

use crate::color::LabColor;
use crate::doc::{ElementType, InfographicDoc, NodeKind, VifType, DEFAULT_MAX_NODES};
use crate::error::{ModelError, StructureError};
use crate::nested_set::encode_nested_set;

/// Node classes for the per-slot type one-hot.
pub const TYPE_CLASSES: [&str; 12] = [
    "background",
    "visual_group",
    "triangle",
    "square",
    "rectangle",
    "pentagon",
    "circle",
    "others",
    "index",
    "text",
    "icon",
    "arrow",
];

const VIF_WIDTH: usize = 12;
const GLOBAL_WIDTH: usize = VIF_WIDTH + 2;
const SLOT_BASE_WIDTH: usize = 1 + TYPE_CLASSES.len() + 4;
const TYPE_OFFSET: usize = 1;
const GROUP_ELEMS_OFFSET: usize = 1 + TYPE_CLASSES.len() + 3;

fn type_class(kind: NodeKind, t: Option<ElementType>) -> usize {
    match kind {
        NodeKind::Background => 0,
        NodeKind::VisualGroup => 1,
        _ => match t.unwrap_or(ElementType::Others) {
            ElementType::Triangle => 2,
            ElementType::Square => 3,
            ElementType::Rectangle => 4,
            ElementType::Pentagon => 5,
            ElementType::Circle => 6,
            ElementType::Others => 7,
            ElementType::Index => 8,
            ElementType::Text => 9,
            ElementType::Icon => 10,
            ElementType::Arrow => 11,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    /// Standardized real value.
    Continuous,
    /// 0/1 indicator, left unscaled.
    Binary,
    /// Member of a one-hot group, left unscaled.
    Categorical { group: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub max_nodes: usize,
    pub spatial: bool,
}

impl Default for Layout {
    fn default() -> Self {
        Self::new(DEFAULT_MAX_NODES)
    }
}

impl Layout {
    pub fn new(max_nodes: usize) -> Self {
        Self {
            max_nodes,
            spatial: true,
        }
    }

    pub fn slot_width(&self) -> usize {
        SLOT_BASE_WIDTH + if self.spatial { 2 } else { 0 }
    }

    pub fn non_color_width(&self) -> usize {
        GLOBAL_WIDTH + self.max_nodes * self.slot_width()
    }

    pub fn width(&self) -> usize {
        self.non_color_width() + 3 * self.max_nodes
    }

    pub fn slot_offset(&self, slot: usize) -> usize {
        GLOBAL_WIDTH + slot * self.slot_width()
    }

    pub fn color_offset(&self, slot: usize) -> usize {
        self.non_color_width() + 3 * slot
    }

    /// Column of the left index for `slot` (spatial layouts only).
    pub fn left_offset(&self, slot: usize) -> Option<usize> {
        self.spatial
            .then(|| self.slot_offset(slot) + SLOT_BASE_WIDTH)
    }

    pub fn is_color_column(&self, col: usize) -> bool {
        col >= self.non_color_width() && col < self.width()
    }

    pub fn kinds(&self) -> Vec<FeatureKind> {
        let mut out = Vec::with_capacity(self.width());
        out.extend((0..VIF_WIDTH).map(|_| FeatureKind::Categorical { group: 0 }));
        out.extend([FeatureKind::Continuous; 2]);
        for s in 0..self.max_nodes {
            out.push(FeatureKind::Binary);
            out.extend((0..TYPE_CLASSES.len()).map(|_| FeatureKind::Categorical { group: 1 + s }));
            out.extend([FeatureKind::Continuous; 4]);
            if self.spatial {
                out.extend([FeatureKind::Continuous; 2]);
            }
        }
        out.extend((0..3 * self.max_nodes).map(|_| FeatureKind::Continuous));
        out
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.width());
        for v in VifType::ALL {
            out.push(format!("vif_{}", serde_json::to_value(v).unwrap().as_str().unwrap()));
        }
        out.push("group_count".into());
        out.push("group_distance".into());
        for s in 0..self.max_nodes {
            out.push(format!("s{s}_exists"));
            out.extend(TYPE_CLASSES.iter().map(|c| format!("s{s}_type_{c}")));
            for f in ["rel_w", "rel_h", "rel_area", "group_elems"] {
                out.push(format!("s{s}_{f}"));
            }
            if self.spatial {
                out.push(format!("s{s}_left"));
                out.push(format!("s{s}_right"));
            }
        }
        for s in 0..self.max_nodes {
            for ch in ["L", "a", "b"] {
                out.push(format!("s{s}_{ch}"));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub layout: Layout,
    pub values: Vec<f64>,
    /// Per column; `true` = unobserved.
    pub mask: Vec<bool>,
    /// Node id held in each slot.
    pub slot_map: Vec<Option<String>>,
}

impl FeatureVector {
    pub fn zeros(layout: Layout) -> Self {
        Self {
            layout,
            values: vec![0.0; layout.width()],
            mask: vec![false; layout.width()],
            slot_map: vec![None; layout.max_nodes],
        }
    }

    pub fn width(&self) -> usize {
        self.values.len()
    }

    pub fn slot_exists(&self, slot: usize) -> bool {
        self.values[self.layout.slot_offset(slot)] > 0.5
    }

    /// Real, non-group slot: owns a color.
    pub fn slot_colorable(&self, slot: usize) -> bool {
        let base = self.layout.slot_offset(slot);
        self.slot_exists(slot) && self.values[base + TYPE_OFFSET + 1] < 0.5
    }

    pub fn colorable_slots(&self) -> Vec<usize> {
        (0..self.layout.max_nodes)
            .filter(|&s| self.slot_colorable(s))
            .collect()
    }

    pub fn color(&self, slot: usize) -> LabColor {
        LabColor::from_slice(&self.values[self.layout.color_offset(slot)..][..3])
    }

    pub fn set_color(&mut self, slot: usize, c: LabColor) {
        let o = self.layout.color_offset(slot);
        self.values[o..o + 3].copy_from_slice(&c.to_array());
    }

    pub fn color_hidden(&self, slot: usize) -> bool {
        self.mask[self.layout.color_offset(slot)]
    }

    /// Mark a color triple observed (`false`) or unobserved (`true`).
    pub fn set_color_hidden(&mut self, slot: usize, hidden: bool) {
        let o = self.layout.color_offset(slot);
        self.mask[o..o + 3].fill(hidden);
    }

    pub fn hidden_color_slots(&self) -> Vec<usize> {
        (0..self.layout.max_nodes)
            .filter(|&s| self.color_hidden(s))
            .collect()
    }

    pub fn slot_of(&self, id: &str) -> Option<usize> {
        self.slot_map.iter().position(|s| s.as_deref() == Some(id))
    }

    pub fn check_layout(&self, layout: &Layout) -> Result<(), ModelError> {
        if self.values.len() != layout.width() || self.mask.len() != layout.width() {
            return Err(ModelError::WidthMismatch {
                expected: layout.width(),
                got: self.values.len(),
            });
        }
        if self.layout != *layout {
            return Err(ModelError::LayoutMismatch);
        }
        Ok(())
    }

    pub fn to_csv_row(&self) -> String {
        self.values
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

pub fn featurize(doc: &InfographicDoc) -> Result<FeatureVector, StructureError> {
    featurize_with(doc, Layout::default())
}

pub fn featurize_with(doc: &InfographicDoc, layout: Layout) -> Result<FeatureVector, StructureError> {
    let visits = doc.preorder()?;
    if visits.len() > layout.max_nodes {
        return Err(StructureError::Capacity {
            count: visits.len(),
            max: layout.max_nodes,
        });
    }
    let nested = encode_nested_set(doc)?;
    let mut v = FeatureVector::zeros(layout);

    v.values[doc.vif_type.index()] = 1.0;
    v.values[VIF_WIDTH] = doc.visual_groups.len() as f64;
    v.values[VIF_WIDTH + 1] = group_distance(doc);

    let (w, h) = (doc.width.max(1) as f64, doc.height.max(1) as f64);
    let scale = 1.0 / (2 * layout.max_nodes) as f64;
    for (slot, visit) in visits.iter().enumerate() {
        let n = visit.node;
        let base = layout.slot_offset(slot);
        v.values[base] = 1.0;
        v.values[base + TYPE_OFFSET + type_class(n.kind, n.element_type)] = 1.0;
        v.values[base + GROUP_ELEMS_OFFSET - 3] = n.bbox.w as f64 / w;
        v.values[base + GROUP_ELEMS_OFFSET - 2] = n.bbox.h as f64 / h;
        v.values[base + GROUP_ELEMS_OFFSET - 1] = n.pixel_area as f64 / (w * h);
        if n.kind == NodeKind::VisualGroup {
            let entry = nested.get(&n.id).unwrap();
            v.values[base + GROUP_ELEMS_OFFSET] = ((entry.right - entry.left - 1) / 2) as f64;
        }
        if let Some(left) = layout.left_offset(slot) {
            let entry = nested.get(&n.id).unwrap();
            v.values[left] = entry.left as f64 * scale;
            v.values[left + 1] = entry.right as f64 * scale;
        }
        v.slot_map[slot] = Some(n.id.clone());
        if n.kind.is_colorable() {
            match n.color {
                Some(c) => v.set_color(slot, c),
                None => v.set_color_hidden(slot, true),
            }
        }
    }
    Ok(v)
}

/// Mean centroid distance between consecutive backbone groups, divided by
/// the image diagonal. Zero with fewer than two groups.
pub fn group_distance(doc: &InfographicDoc) -> f64 {
    let centers: Vec<(f64, f64)> = doc
        .visual_groups
        .iter()
        .filter_map(|g| doc.node(g))
        .map(|n| n.bbox.center())
        .collect();
    if centers.len() < 2 {
        return 0.0;
    }
    let total: f64 = centers
        .windows(2)
        .map(|p| (p[0].0 - p[1].0).hypot(p[0].1 - p[1].1))
        .sum();
    let diag = (doc.width as f64).hypot(doc.height as f64);
    total / (centers.len() - 1) as f64 / diag
}

/// Drop the left/right index columns.
pub fn strip_spatial(vec: &FeatureVector) -> Result<FeatureVector, ModelError> {
    if !vec.layout.spatial {
        return Err(ModelError::AlreadyStripped);
    }
    vec.check_layout(&vec.layout)?;
    let layout = Layout {
        spatial: false,
        ..vec.layout
    };
    let keep: Vec<usize> = (0..vec.width())
        .filter(|&c| {
            !(0..vec.layout.max_nodes).any(|s| {
                let l = vec.layout.left_offset(s).unwrap();
                c == l || c == l + 1
            })
        })
        .collect();
    Ok(FeatureVector {
        layout,
        values: keep.iter().map(|&c| vec.values[c]).collect(),
        mask: keep.iter().map(|&c| vec.mask[c]).collect(),
        slot_map: vec.slot_map.clone(),
    })
}
