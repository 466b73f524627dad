//! The tree-structured infographic document.
//!
//! The root is the background canvas; visual-group nodes sit directly under
//! it; below a group, a parent-child edge means the child lies on top of and
//! inside the parent, and siblings are adjacent elements.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::color::{hex_lab_opt, LabColor};
use crate::error::StructureError;

pub const SCHEMA: &str = "palettizer/1";
pub const DEFAULT_MAX_NODES: usize = 19;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Artistic,
    Data,
    VisualGroup,
    Background,
}

impl NodeKind {
    /// Whether nodes of this kind own a color slot.
    pub fn is_colorable(self) -> bool {
        !matches!(self, NodeKind::VisualGroup)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementType {
    Triangle,
    Square,
    Rectangle,
    Pentagon,
    Circle,
    Others,
    Index,
    Text,
    Icon,
    Arrow,
}

impl ElementType {
    pub const ARTISTIC: [ElementType; 6] = [
        ElementType::Triangle,
        ElementType::Square,
        ElementType::Rectangle,
        ElementType::Pentagon,
        ElementType::Circle,
        ElementType::Others,
    ];
    pub const DATA: [ElementType; 4] = [
        ElementType::Index,
        ElementType::Text,
        ElementType::Icon,
        ElementType::Arrow,
    ];

    pub fn is_artistic(self) -> bool {
        Self::ARTISTIC.contains(&self)
    }

    pub fn is_data(self) -> bool {
        Self::DATA.contains(&self)
    }
}

/// Visual information flow types. Only the names are used; they are opaque
/// category labels for the feature encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VifType {
    Landscape,
    Portrait,
    Clock,
    Star,
    UpLadder,
    DownLadder,
    LeftWing,
    RightWing,
    Bowl,
    Dome,
    Spiral,
    Zigzag,
}

impl VifType {
    pub const ALL: [VifType; 12] = [
        VifType::Landscape,
        VifType::Portrait,
        VifType::Clock,
        VifType::Star,
        VifType::UpLadder,
        VifType::DownLadder,
        VifType::LeftWing,
        VifType::RightWing,
        VifType::Bowl,
        VifType::Dome,
        VifType::Spiral,
        VifType::Zigzag,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|v| *v == self).unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct BBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BBox {
    pub const fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + self.w as f64 / 2.0,
            self.y as f64 + self.h as f64 / 2.0,
        )
    }

    pub fn contains(&self, other: &BBox) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.right() <= self.right()
            && other.bottom() <= self.bottom()
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        (x1 > x0 && y1 > y0).then(|| BBox::new(x0, y0, x1 - x0, y1 - y0))
    }

    pub fn union(&self, other: &BBox) -> BBox {
        let x0 = self.x.min(other.x);
        let y0 = self.y.min(other.y);
        let x1 = self.right().max(other.right());
        let y1 = self.bottom().max(other.bottom());
        BBox::new(x0, y0, x1 - x0, y1 - y0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementNode {
    pub id: String,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element_type: Option<ElementType>,
    pub bbox: BBox,
    pub pixel_area: u64,
    /// `None` for wireframe elements and visual groups.
    #[serde(with = "hex_lab_opt", default)]
    pub color: Option<LabColor>,
    #[serde(default)]
    pub children: Vec<String>,
}

impl ElementNode {
    pub fn new(id: impl Into<String>, kind: NodeKind, bbox: BBox) -> Self {
        Self {
            id: id.into(),
            kind,
            element_type: None,
            bbox,
            pixel_area: bbox.area(),
            color: None,
            children: Vec::new(),
        }
    }

    pub fn with_type(mut self, t: ElementType) -> Self {
        self.element_type = Some(t);
        self
    }

    pub fn with_color(mut self, c: LabColor) -> Self {
        self.color = Some(c);
        self
    }

    pub fn with_area(mut self, area: u64) -> Self {
        self.pixel_area = area;
        self
    }

    pub fn with_children<I, S>(mut self, children: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.children = children.into_iter().map(Into::into).collect();
        self
    }
}

/// A node visited during a pre-order walk.
#[derive(Debug, Clone, Copy)]
pub struct Visit<'a> {
    pub node: &'a ElementNode,
    pub depth: usize,
    pub parent: Option<&'a ElementNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfographicDoc {
    pub schema: String,
    pub width: u32,
    pub height: u32,
    pub vif_type: VifType,
    /// Id of the background node.
    pub root: String,
    /// Visual-group node ids in backbone order.
    #[serde(default)]
    pub visual_groups: Vec<String>,
    pub nodes: Vec<ElementNode>,
}

impl InfographicDoc {
    pub fn new(width: u32, height: u32, vif_type: VifType, root: ElementNode) -> Self {
        Self {
            schema: SCHEMA.to_string(),
            width,
            height,
            vif_type,
            root: root.id.clone(),
            visual_groups: Vec::new(),
            nodes: vec![root],
        }
    }

    pub fn node(&self, id: &str) -> Option<&ElementNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn node_mut(&mut self, id: &str) -> Option<&mut ElementNode> {
        self.nodes.iter_mut().find(|n| n.id == id)
    }

    pub fn root_node(&self) -> Option<&ElementNode> {
        self.node(&self.root)
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes")
    }

    /// Pre-order walk from the root with children in stored order.
    pub fn preorder(&self) -> Result<Vec<Visit<'_>>, StructureError> {
        let index: HashMap<&str, &ElementNode> =
            self.nodes.iter().map(|n| (n.id.as_str(), n)).collect();
        let root = *index
            .get(self.root.as_str())
            .ok_or_else(|| StructureError::UnknownChild {
                parent: "<document>".into(),
                child: self.root.clone(),
            })?;
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(root, 0usize, None)];
        while let Some((node, depth, parent)) = stack.pop() {
            if !seen.insert(node.id.as_str()) {
                return Err(StructureError::Cycle(node.id.clone()));
            }
            out.push(Visit {
                node,
                depth,
                parent,
            });
            for child in node.children.iter().rev() {
                let c = *index
                    .get(child.as_str())
                    .ok_or_else(|| StructureError::UnknownChild {
                        parent: node.id.clone(),
                        child: child.clone(),
                    })?;
                stack.push((c, depth + 1, Some(node)));
            }
        }
        Ok(out)
    }

    pub fn parent_of(&self, id: &str) -> Option<&ElementNode> {
        self.nodes
            .iter()
            .find(|n| n.children.iter().any(|c| c == id))
    }

    /// Reorders every child list into reading order (top-to-bottom, then
    /// left-to-right by bbox origin, then id).
    pub fn sort_reading_order(&mut self) {
        let boxes: HashMap<String, BBox> =
            self.nodes.iter().map(|n| (n.id.clone(), n.bbox)).collect();
        for node in &mut self.nodes {
            node.children.sort_by(|a, b| {
                let ba = boxes.get(a).copied().unwrap_or_default();
                let bb = boxes.get(b).copied().unwrap_or_default();
                (ba.y, ba.x, a).cmp(&(bb.y, bb.x, b))
            });
        }
    }

    /// Depth of every reachable node, root = 0.
    pub fn depths(&self) -> Result<HashMap<String, usize>, StructureError> {
        Ok(self
            .preorder()?
            .into_iter()
            .map(|v| (v.node.id.clone(), v.depth))
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Schema,
    DuplicateId,
    MissingRoot,
    RootNotBackground,
    ExtraBackground,
    UnknownChild,
    Cycle,
    Unreachable,
    Containment,
    NodeCount,
    ElementTypeMismatch,
    VisualGroupList,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub node: String,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} @ {}: {}", self.rule, self.node, self.detail)
    }
}

pub fn validate_doc(doc: &InfographicDoc) -> Vec<Violation> {
    validate_doc_with(doc, DEFAULT_MAX_NODES)
}

pub fn validate_doc_with(doc: &InfographicDoc, max_nodes: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |node: &str, rule: Rule, detail: String| {
        out.push(Violation {
            node: node.to_string(),
            rule,
            detail,
        })
    };

    if doc.schema != SCHEMA {
        push("<document>", Rule::Schema, format!("schema {:?}", doc.schema));
    }

    let mut ids = HashSet::new();
    for n in &doc.nodes {
        if !ids.insert(n.id.as_str()) {
            push(&n.id, Rule::DuplicateId, "id used more than once".into());
        }
    }
    let index: HashMap<&str, &ElementNode> =
        doc.nodes.iter().map(|n| (n.id.as_str(), n)).collect();

    if doc.nodes.len() > max_nodes {
        push(
            &doc.root,
            Rule::NodeCount,
            format!("{} nodes exceed the maximum of {}", doc.nodes.len(), max_nodes),
        );
    }

    match index.get(doc.root.as_str()) {
        None => push(&doc.root, Rule::MissingRoot, "root id not found".into()),
        Some(root) if root.kind != NodeKind::Background => push(
            &root.id,
            Rule::RootNotBackground,
            format!("root kind is {:?}", root.kind),
        ),
        _ => {}
    }
    for n in &doc.nodes {
        if n.kind == NodeKind::Background && n.id != doc.root {
            push(&n.id, Rule::ExtraBackground, "only the root may be background".into());
        }
        let type_ok = match n.kind {
            NodeKind::Background | NodeKind::VisualGroup => n.element_type.is_none(),
            NodeKind::Artistic => n.element_type.is_some_and(ElementType::is_artistic),
            NodeKind::Data => n.element_type.is_some_and(ElementType::is_data),
        };
        if !type_ok {
            push(
                &n.id,
                Rule::ElementTypeMismatch,
                format!("kind {:?} with element type {:?}", n.kind, n.element_type),
            );
        }
        for c in &n.children {
            match index.get(c.as_str()) {
                None => push(&n.id, Rule::UnknownChild, format!("child {c:?} not found")),
                Some(child) if !n.bbox.contains(&child.bbox) => push(
                    c,
                    Rule::Containment,
                    format!("bbox {:?} not inside parent {:?} {:?}", child.bbox, n.id, n.bbox),
                ),
                _ => {}
            }
        }
    }

    // Reachability: each node reached exactly once from the root.
    if let Some(root) = index.get(doc.root.as_str()) {
        let mut visits: HashMap<&str, usize> = HashMap::new();
        let mut stack = vec![*root];
        while let Some(n) = stack.pop() {
            let count = visits.entry(n.id.as_str()).or_default();
            *count += 1;
            if *count > 1 {
                continue;
            }
            for c in &n.children {
                if let Some(child) = index.get(c.as_str()) {
                    stack.push(child);
                }
            }
        }
        for n in &doc.nodes {
            match visits.get(n.id.as_str()) {
                None => push(&n.id, Rule::Unreachable, "not reachable from root".into()),
                Some(&k) if k > 1 => push(&n.id, Rule::Cycle, format!("reached {k} times")),
                _ => {}
            }
        }
    }

    let listed: HashSet<&str> = doc.visual_groups.iter().map(String::as_str).collect();
    for g in &doc.visual_groups {
        match index.get(g.as_str()) {
            Some(n) if n.kind == NodeKind::VisualGroup => {
                let under_root = index
                    .get(doc.root.as_str())
                    .is_some_and(|r| r.children.contains(g));
                if !under_root {
                    push(g, Rule::VisualGroupList, "visual group is not a child of root".into());
                }
            }
            _ => push(g, Rule::VisualGroupList, "listed id is not a visual group".into()),
        }
    }
    for n in &doc.nodes {
        if n.kind == NodeKind::VisualGroup && !listed.contains(n.id.as_str()) {
            push(&n.id, Rule::VisualGroupList, "group missing from visual_groups".into());
        }
    }
    out
}
