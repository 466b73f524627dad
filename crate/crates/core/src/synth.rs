//! Synthetic infographics with known ground truth.
//!
//! # Generative law
//!
//! A document has 2–4 visual groups laid out along a landscape (row) or
//! portrait (column) backbone. Each group holds one container shape
//! (circle, square, rectangle or pentagon) and one data element (text with
//! probability 0.7, else an icon), arranged by one of two equally likely
//! templates:
//!
//! | template | structure |
//! |---|---|
//! | `Badge` | shape ⊃ data element |
//! | `Caption` | shape, data element below it (siblings) |
//!
//! Colors:
//! * background: near-neutral (|a|, |b| < 2), light (L 90–97) with
//!   probability 0.65, else dark (L 15–25);
//! * group `i` hue is `h0 + i·step` (`step` ∈ ±[25°, 60°]), chroma 35–50;
//! * a shape contrasts with the background: L = L_bg ∓ (35 + 25u), with `u`
//!   shared by the document up to ±0.2 per group;
//! * data elements are near-black (L 10) on parents lighter than L 55 and
//!   near-white (L 97) otherwise, where the parent is the shape for `Badge`
//!   and the background for `Caption`;
//! * every channel gets N(0, 1.5²) noise, then the color is snapped to the
//!   sRGB gamut.
//!
//! Every group takes three pre-order slots (group, shape, data element), so
//! a slot plays the same role across documents. A group's box is its layout
//! cell, sized independently of the template, and both templates draw the
//! same shapes and data elements with the same size distributions. Only the
//! nested-set indices tell whether the data element sits on the shape or on
//! the background, so its color is predictable from spatial features but
//! not without them.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::color::{ciede2000, lab_to_rgb_clamped, LabColor};
use crate::doc::{BBox, ElementNode, ElementType, InfographicDoc, NodeKind, VifType};
use crate::extract::Segment;
use crate::features::{FeatureVector, Layout};
use crate::raster::{AnnotationSet, DataElement, RasterImage};

const COLOR_NOISE: f64 = 1.5;
const DARK_TEXT: f64 = 10.0;
const LIGHT_TEXT: f64 = 97.0;
const TEXT_FLIP_L: f64 = 55.0;

/// Filled geometry of an artistic element.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Geometry {
    Rect,
    Disc,
    Triangle,
    Pentagon,
}

fn geometry_of(t: ElementType) -> Geometry {
    match t {
        ElementType::Circle => Geometry::Disc,
        ElementType::Triangle => Geometry::Triangle,
        ElementType::Pentagon => Geometry::Pentagon,
        _ => Geometry::Rect,
    }
}

fn convex_contains(poly: &[(f64, f64)], p: (f64, f64)) -> bool {
    let n = poly.len();
    let mut sign = 0.0;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
        if cross != 0.0 {
            if sign == 0.0 {
                sign = cross.signum();
            } else if cross.signum() != sign {
                return false;
            }
        }
    }
    true
}

fn regular_polygon(cx: f64, cy: f64, r: f64, sides: usize, rotation_deg: f64) -> Vec<(f64, f64)> {
    (0..sides)
        .map(|k| {
            let t = (rotation_deg - 90.0 + 360.0 * k as f64 / sides as f64).to_radians();
            (cx + r * t.cos(), cy + r * t.sin())
        })
        .collect()
}

/// Pixel indices of `geom` drawn in the nominal box `b`.
fn rasterize(geom: Geometry, b: BBox, width: u32) -> Vec<u32> {
    let (cx, cy) = b.center();
    let r = b.w.min(b.h) as f64 / 2.0;
    let tri = [
        (b.x as f64 + b.w as f64 / 2.0, b.y as f64),
        (b.right() as f64, b.bottom() as f64),
        (b.x as f64, b.bottom() as f64),
    ];
    let pent = regular_polygon(cx, cy, r, 5, 0.0);
    let mut out = Vec::new();
    for y in b.y..b.bottom() {
        for x in b.x..b.right() {
            let p = (x as f64 + 0.5, y as f64 + 0.5);
            let inside = match geom {
                Geometry::Rect => true,
                Geometry::Disc => (p.0 - cx).hypot(p.1 - cy) < r,
                Geometry::Triangle => convex_contains(&tri, p),
                Geometry::Pentagon => convex_contains(&pent, p),
            };
            if inside {
                out.push(y * width + x);
            }
        }
    }
    out
}

/// Foreground pixels of a data element: text is a stack of 2-pixel bars,
/// icons a disc, other marks fill their box.
fn data_pixels(t: ElementType, b: BBox, width: u32) -> Vec<u32> {
    match t {
        ElementType::Text => (b.y..b.bottom())
            .filter(|y| (y - b.y) % 4 < 2)
            .flat_map(|y| (b.x..b.right()).map(move |x| y * width + x))
            .collect(),
        ElementType::Icon => rasterize(Geometry::Disc, b, width),
        _ => rasterize(Geometry::Rect, b, width),
    }
}

fn pixel_bbox(pixels: &[u32], width: u32) -> BBox {
    let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
    for &p in pixels {
        let (x, y) = (p % width, p / width);
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    BBox::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    /// Data element drawn on the shape (its child).
    Badge,
    /// Data element below the shape (its sibling).
    Caption,
}

/// Node of the generator's own tree.
#[derive(Debug, Clone)]
struct Draft {
    id: String,
    kind: NodeKind,
    element_type: Option<ElementType>,
    /// Nominal box used for drawing.
    frame: BBox,
    color: Option<LabColor>,
    children: Vec<Draft>,
}

impl Draft {
    fn new(id: String, kind: NodeKind, t: Option<ElementType>, frame: BBox, color: Option<LabColor>) -> Self {
        Self {
            id,
            kind,
            element_type: t,
            frame,
            color,
            children: Vec::new(),
        }
    }
}

/// One generated document with its raster annotations.
#[derive(Debug, Clone)]
pub struct SynthItem {
    pub id: String,
    pub doc: InfographicDoc,
    pub annotations: AnnotationSet,
    pub templates: Vec<Template>,
    draft: Draft,
}

fn noisy<R: Rng>(rng: &mut R, c: LabColor) -> LabColor {
    let n = Normal::new(0.0, COLOR_NOISE).unwrap();
    LabColor::new(
        (c.l + n.sample(rng)).clamp(0.0, 100.0),
        c.a + n.sample(rng),
        c.b + n.sample(rng),
    )
    .displayable()
}

fn chromatic(l: f64, chroma: f64, hue_deg: f64) -> LabColor {
    let h = hue_deg.to_radians();
    LabColor::new(l, chroma * h.cos(), chroma * h.sin())
}

fn contrast_text(parent_l: f64) -> LabColor {
    if parent_l > TEXT_FLIP_L {
        LabColor::new(DARK_TEXT, 0.0, 0.0)
    } else {
        LabColor::new(LIGHT_TEXT, 0.0, 0.0)
    }
}

fn centered(cx: f64, cy: f64, w: u32, h: u32) -> BBox {
    BBox::new((cx - w as f64 / 2.0).round() as u32, (cy - h as f64 / 2.0).round() as u32, w, h)
}

const CONTAINERS: [ElementType; 4] = [
    ElementType::Circle,
    ElementType::Square,
    ElementType::Rectangle,
    ElementType::Pentagon,
];

fn shape_frame(t: ElementType, cx: f64, cy: f64, s: u32) -> BBox {
    match t {
        ElementType::Rectangle => centered(cx, cy, s, (s as f64 * 0.6).round() as u32),
        _ => centered(cx, cy, s, s),
    }
}

/// Generate item `index` of the corpus seeded with `seed`. Items are
/// independent, so any prefix of a corpus is itself a valid corpus.
pub fn generate_item(seed: u64, index: u64) -> SynthItem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let landscape = rng.gen_bool(0.5);
    let (w, h) = if landscape { (480u32, 300u32) } else { (300, 480) };
    let k = rng.gen_range(2..=4u32);

    let dark = rng.gen_bool(0.35);
    let bg_l = if dark { rng.gen_range(15.0..25.0) } else { rng.gen_range(90.0..97.0) };
    // Kept neutral (chroma < 3) so it never shares a hue mode with a shape.
    let bg = LabColor::new(bg_l, rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)).displayable();
    let h0: f64 = rng.gen_range(0.0..360.0);
    let step = rng.gen_range(25.0..60.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let u_global: f64 = rng.gen_range(0.0..1.0);

    let mut root = Draft::new("bg".into(), NodeKind::Background, None, BBox::new(0, 0, w, h), Some(bg));
    let mut templates = Vec::new();
    let margin = 8.0;
    for i in 0..k {
        let (cx0, cy0, cw, ch) = if landscape {
            (i as f64 * w as f64 / k as f64, 0.0, w as f64 / k as f64, h as f64)
        } else {
            (0.0, i as f64 * h as f64 / k as f64, w as f64, h as f64 / k as f64)
        };
        let template = if rng.gen_bool(0.5) { Template::Badge } else { Template::Caption };
        templates.push(template);
        let hue = h0 + i as f64 * step;
        let chroma = rng.gen_range(35.0..50.0);
        let u = (u_global + rng.gen_range(-0.2..0.2)).clamp(0.0, 1.0);
        let shape_l = if dark { bg.l + 35.0 + 25.0 * u } else { bg.l - 35.0 - 25.0 * u };

        let s = (cw.min(ch) * rng.gen_range(0.45..0.62)).round() as u32;
        let data_t = if rng.gen_bool(0.7) { ElementType::Text } else { ElementType::Icon };
        let (data_w, data_h) = match data_t {
            ElementType::Text => ((s as f64 * 0.5).round() as u32, ((s as f64 * 0.15).round() as u32).max(6)),
            _ => {
                let side = ((s as f64 * 0.3).round() as u32).max(6);
                (side, side)
            }
        };
        // Room for the caption layout: shape, 6 px gap, data element.
        let block_h = s as f64 + 6.0 + data_h as f64;
        let jitter = |rng: &mut ChaCha8Rng, room: f64| if room > 0.0 { rng.gen_range(-room..=room) } else { 0.0 };
        let cx = cx0 + cw / 2.0 + jitter(&mut rng, (cw - s as f64) / 2.0 - margin);
        let cy_block = cy0 + ch / 2.0 + jitter(&mut rng, (ch - block_h) / 2.0 - margin);
        let gid = format!("g{i}");
        // The group's layout cell; its size does not depend on the template.
        let cell = centered(cx, cy_block, s, block_h.round() as u32);
        let mut group = Draft::new(gid.clone(), NodeKind::VisualGroup, None, cell, None);

        let t = CONTAINERS[rng.gen_range(0..CONTAINERS.len())];
        let top = cy_block - block_h / 2.0;
        let frame = shape_frame(t, cx, top + s as f64 / 2.0, s);
        let color = noisy(&mut rng, chromatic(shape_l, chroma, hue));
        let mut shape = Draft::new(format!("{gid}s"), NodeKind::Artistic, Some(t), frame, Some(color));
        match template {
            Template::Badge => {
                let (fx, fy) = frame.center();
                let dc = noisy(&mut rng, contrast_text(color.l));
                shape.children.push(Draft::new(format!("{gid}d"), NodeKind::Data, Some(data_t), centered(fx, fy, data_w, data_h), Some(dc)));
                group.children.push(shape);
            }
            Template::Caption => {
                let dc = noisy(&mut rng, contrast_text(bg.l));
                let data = Draft::new(
                    format!("{gid}d"),
                    NodeKind::Data,
                    Some(data_t),
                    centered(cx, top + s as f64 + 6.0 + data_h as f64 / 2.0, data_w, data_h),
                    Some(dc),
                );
                group.children.push(shape);
                group.children.push(data);
            }
        }
        root.children.push(group);
    }

    let vif = if landscape { VifType::Landscape } else { VifType::Portrait };
    let (doc, annotations) = build_doc(&root, w, h, vif);
    SynthItem {
        id: format!("synth-{seed}-{index}"),
        doc,
        annotations,
        templates,
        draft: root,
    }
}

pub fn generate_corpus(n: usize, seed: u64) -> Vec<SynthItem> {
    (0..n as u64).map(|i| generate_item(seed, i)).collect()
}

/// Exclusive pixel ownership: an artistic element loses the pixels of the
/// artistic elements drawn on top of it; data elements are ignored because
/// extraction paints them over.
struct Raster {
    bbox: HashMap<String, BBox>,
    area: HashMap<String, u64>,
}

fn measure(root: &Draft, w: u32) -> Raster {
    let mut bbox = HashMap::new();
    let mut area = HashMap::new();
    fn walk(d: &Draft, w: u32, bbox: &mut HashMap<String, BBox>, area: &mut HashMap<String, u64>) {
        match d.kind {
            NodeKind::Artistic => {
                let px = rasterize(geometry_of(d.element_type.unwrap()), d.frame, w);
                let covered: usize = d
                    .children
                    .iter()
                    .filter(|c| c.kind == NodeKind::Artistic)
                    .map(|c| rasterize(geometry_of(c.element_type.unwrap()), c.frame, w).len())
                    .sum();
                bbox.insert(d.id.clone(), pixel_bbox(&px, w));
                area.insert(d.id.clone(), (px.len() - covered) as u64);
            }
            NodeKind::Data => {
                let px = data_pixels(d.element_type.unwrap(), d.frame, w);
                bbox.insert(d.id.clone(), d.frame);
                area.insert(d.id.clone(), px.len() as u64);
            }
            _ => {}
        }
        for c in &d.children {
            walk(c, w, bbox, area);
        }
    }
    walk(root, w, &mut bbox, &mut area);
    Raster { bbox, area }
}

fn build_doc(root: &Draft, w: u32, h: u32, vif: VifType) -> (InfographicDoc, AnnotationSet) {
    let r = measure(root, w);
    let mut doc = InfographicDoc::new(
        w,
        h,
        vif,
        ElementNode::new("bg", NodeKind::Background, root.frame)
            .with_area(w as u64 * h as u64)
            .with_children(root.children.iter().map(|g| g.id.clone())),
    );
    doc.nodes[0].color = root.color;
    let mut ann = AnnotationSet {
        vif_type: Some(vif),
        visual_groups: Some(Vec::new()),
        ..Default::default()
    };
    fn walk(d: &Draft, r: &Raster, doc: &mut InfographicDoc, ann: &mut AnnotationSet, group: usize) {
        if d.kind == NodeKind::Data {
            ann.visual_groups.as_mut().unwrap()[group].push(ann.data_elements.len());
            ann.data_elements.push(DataElement {
                bbox: d.frame,
                element_type: d.element_type.unwrap(),
            });
        }
        let mut node = ElementNode::new(&d.id, d.kind, r.bbox[&d.id])
            .with_area(r.area[&d.id])
            .with_children(d.children.iter().map(|c| c.id.clone()));
        node.element_type = d.element_type;
        node.color = d.color;
        doc.nodes.push(node);
        for c in &d.children {
            walk(c, r, doc, ann, group);
        }
    }
    for (gi, g) in root.children.iter().enumerate() {
        ann.visual_groups.as_mut().unwrap().push(Vec::new());
        let bbox = g.frame;
        let area = g.children.iter().map(|c| r.area[&c.id]).sum();
        doc.nodes.push(
            ElementNode::new(&g.id, NodeKind::VisualGroup, bbox)
                .with_area(area)
                .with_children(g.children.iter().map(|c| c.id.clone())),
        );
        for c in &g.children {
            walk(c, &r, &mut doc, &mut ann, gi);
        }
    }
    doc.visual_groups = root.children.iter().map(|g| g.id.clone()).collect();
    (doc, ann)
}

impl SynthItem {
    /// Paint the document: background, artistic elements top-down, then
    /// data elements.
    pub fn render(&self) -> RasterImage {
        let d = &self.doc;
        let mut img = RasterImage::filled(d.width, d.height, lab_to_rgb_clamped(self.draft.color.unwrap()));
        let w = d.width;
        fn paint(d: &Draft, img: &mut RasterImage, w: u32, data: bool) {
            let px = match (d.kind, data) {
                (NodeKind::Artistic, false) => rasterize(geometry_of(d.element_type.unwrap()), d.frame, w),
                (NodeKind::Data, true) => data_pixels(d.element_type.unwrap(), d.frame, w),
                _ => Vec::new(),
            };
            let c = d.color.map(lab_to_rgb_clamped);
            for p in px {
                img.set(p % w, p / w, c.unwrap());
            }
            for ch in &d.children {
                paint(ch, img, w, data);
            }
        }
        paint(&self.draft, &mut img, w, false);
        paint(&self.draft, &mut img, w, true);
        img
    }

    /// Feature vector computed straight from the generator's tree, without
    /// going through the document model.
    pub fn reference_features(&self, layout: Layout) -> FeatureVector {
        let names = layout.column_names();
        let col: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mut v = FeatureVector::zeros(layout);
        let (w, h) = (self.doc.width as f64, self.doc.height as f64);
        let vif_name = match self.doc.vif_type {
            VifType::Landscape => "landscape",
            _ => "portrait",
        };
        v.values[col[format!("vif_{vif_name}").as_str()]] = 1.0;
        let groups = &self.draft.children;
        v.values[col["group_count"]] = groups.len() as f64;
        let r = measure(&self.draft, self.doc.width);
        let group_box = |g: &Draft| g.frame;
        let centers: Vec<(f64, f64)> = groups.iter().map(|g| group_box(g).center()).collect();
        let mut dist = 0.0;
        for i in 1..centers.len() {
            dist += (centers[i].0 - centers[i - 1].0).hypot(centers[i].1 - centers[i - 1].1);
        }
        v.values[col["group_distance"]] = dist / (centers.len() - 1) as f64 / w.hypot(h);

        // (node, left) in pre-order; rights filled on exit.
        let mut order: Vec<(&Draft, usize, usize)> = Vec::new();
        fn visit<'a>(d: &'a Draft, counter: &mut usize, order: &mut Vec<(&'a Draft, usize, usize)>) {
            *counter += 1;
            let at = order.len();
            order.push((d, *counter, 0));
            for c in &d.children {
                visit(c, counter, order);
            }
            *counter += 1;
            order[at].2 = *counter;
        }
        let mut counter = 0;
        visit(&self.draft, &mut counter, &mut order);

        for (s, (d, left, right)) in order.iter().enumerate() {
            let set = |v: &mut FeatureVector, name: String, x: f64| v.values[col[name.as_str()]] = x;
            set(&mut v, format!("s{s}_exists"), 1.0);
            let class = match (d.kind, d.element_type) {
                (NodeKind::Background, _) => "background",
                (NodeKind::VisualGroup, _) => "visual_group",
                (_, Some(ElementType::Circle)) => "circle",
                (_, Some(ElementType::Square)) => "square",
                (_, Some(ElementType::Rectangle)) => "rectangle",
                (_, Some(ElementType::Triangle)) => "triangle",
                (_, Some(ElementType::Pentagon)) => "pentagon",
                (_, Some(ElementType::Text)) => "text",
                (_, Some(ElementType::Icon)) => "icon",
                (_, Some(ElementType::Index)) => "index",
                (_, Some(ElementType::Arrow)) => "arrow",
                _ => "others",
            };
            set(&mut v, format!("s{s}_type_{class}"), 1.0);
            let (bw, bh, area) = match d.kind {
                NodeKind::Background => (w, h, w * h),
                NodeKind::VisualGroup => {
                    let b = group_box(d);
                    let a: u64 = d.children.iter().map(|c| r.area[&c.id]).sum();
                    (b.w as f64, b.h as f64, a as f64)
                }
                _ => {
                    let b = r.bbox[&d.id];
                    (b.w as f64, b.h as f64, r.area[&d.id] as f64)
                }
            };
            set(&mut v, format!("s{s}_rel_w"), bw / w);
            set(&mut v, format!("s{s}_rel_h"), bh / h);
            set(&mut v, format!("s{s}_rel_area"), area / (w * h));
            if d.kind == NodeKind::VisualGroup {
                set(&mut v, format!("s{s}_group_elems"), ((right - left - 1) / 2) as f64);
            }
            if layout.spatial {
                let scale = 2.0 * layout.max_nodes as f64;
                set(&mut v, format!("s{s}_left"), *left as f64 / scale);
                set(&mut v, format!("s{s}_right"), *right as f64 / scale);
            }
            if let Some(c) = d.color {
                set(&mut v, format!("s{s}_L"), c.l);
                set(&mut v, format!("s{s}_a"), c.a);
                set(&mut v, format!("s{s}_b"), c.b);
            }
            v.slot_map[s] = Some(d.id.clone());
        }
        v
    }
}

/// Flat-color image with the region label of every pixel.
#[derive(Debug, Clone)]
pub struct TestCard {
    pub image: RasterImage,
    /// Region per pixel; 0 is the background.
    pub labels: Vec<u32>,
    pub regions: usize,
}

impl TestCard {
    /// Pixel sets of the ground-truth regions, sorted for comparison.
    pub fn region_masks(&self) -> Vec<Vec<u32>> {
        let mut masks = vec![Vec::new(); self.regions];
        for (p, &l) in self.labels.iter().enumerate() {
            masks[l as usize].push(p as u32);
        }
        masks.sort();
        masks
    }
}

/// Distinct flat colors: achromatic light background plus chromatic shape
/// colors at least 25° apart in hue and more than 10 ΔE00 from each other.
fn card_colors<R: Rng>(rng: &mut R, n: usize) -> Vec<LabColor> {
    loop {
        let bg = LabColor::new(rng.gen_range(85.0..97.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)).displayable();
        let mut out = vec![bg];
        let mut hues: Vec<f64> = Vec::new();
        for _ in 0..200 {
            if out.len() == n + 1 {
                break;
            }
            let hue = rng.gen_range(0.0..360.0);
            if hues.iter().any(|&h: &f64| {
                let d = (h - hue).rem_euclid(360.0);
                d.min(360.0 - d) < 25.0
            }) {
                continue;
            }
            let c = chromatic(rng.gen_range(35.0..75.0), rng.gen_range(25.0..50.0), hue).displayable();
            if c.chroma() < 15.0 || out.iter().any(|&o| ciede2000(o, c) <= 10.0) {
                continue;
            }
            hues.push(hue);
            out.push(c);
        }
        if out.len() == n + 1 {
            return out;
        }
    }
}

/// `shapes` flat rectangles and discs on a 160×120 background: disjoint
/// top-level shapes with gaps, and shapes nested well inside others.
pub fn flat_card(seed: u64, shapes: usize) -> TestCard {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (160u32, 120u32);
    let colors = card_colors(&mut rng, shapes);
    'retry: loop {
        // (geometry, frame, parent)
        let mut placed: Vec<(Geometry, BBox, Option<usize>)> = Vec::new();
        for _ in 0..shapes {
            let mut ok = false;
            for _ in 0..200 {
                let geom = if rng.gen_bool(0.5) { Geometry::Rect } else { Geometry::Disc };
                let nest = !placed.is_empty() && rng.gen_bool(0.3);
                if nest {
                    let pi = rng.gen_range(0..placed.len());
                    let (pg, pf, _) = placed[pi];
                    if placed.iter().any(|p| p.2 == Some(pi)) {
                        continue;
                    }
                    // Usable inner square, 4 px away from the parent's edge.
                    let inner = match pg {
                        Geometry::Rect => pf.w.min(pf.h) as f64 - 8.0,
                        _ => pf.w as f64 / 2f64.sqrt() - 8.0,
                    };
                    if inner < 14.0 {
                        continue;
                    }
                    let s = rng.gen_range(12.0..=inner).round() as u32;
                    let (cx, cy) = pf.center();
                    let (sw, sh) = if geom == Geometry::Rect { (s, (s as f64 * rng.gen_range(0.6..1.0)) as u32) } else { (s, s) };
                    placed.push((geom, centered(cx, cy, sw, sh.max(12)), Some(pi)));
                } else {
                    let sw = rng.gen_range(18..48u32);
                    let sh = if geom == Geometry::Rect { rng.gen_range(18..48u32) } else { sw };
                    let frame = BBox::new(rng.gen_range(3..w - sw - 3), rng.gen_range(3..h - sh - 3), sw, sh);
                    let grown = BBox::new(frame.x - 3, frame.y - 3, frame.w + 6, frame.h + 6);
                    if placed
                        .iter()
                        .any(|p| p.2.is_none() && p.1.intersection(&grown).is_some())
                    {
                        continue;
                    }
                    placed.push((geom, frame, None));
                }
                ok = true;
                break;
            }
            if !ok {
                continue 'retry;
            }
        }
        let mut labels = vec![0u32; (w * h) as usize];
        for (k, (g, f, _)) in placed.iter().enumerate() {
            for p in rasterize(*g, *f, w) {
                labels[p as usize] = k as u32 + 1;
            }
        }
        // Every region must be present (nesting can hide nothing here, but
        // keep the invariant explicit).
        let mut seen = vec![false; shapes + 1];
        for &l in &labels {
            seen[l as usize] = true;
        }
        if seen.iter().any(|s| !s) {
            continue;
        }
        let pixels = labels.iter().map(|&l| lab_to_rgb_clamped(colors[l as usize])).collect();
        return TestCard {
            image: RasterImage::new(w, h, pixels).expect("size matches"),
            labels,
            regions: shapes + 1,
        };
    }
}

/// One shape on a light background whose lightness ramps top to bottom at
/// a fixed hue; after gradient merging it should be a single region.
pub fn gradient_card(seed: u64) -> TestCard {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (160u32, 120u32);
    let bg = LabColor::new(rng.gen_range(90.0..97.0), 0.0, 0.0);
    let hue = rng.gen_range(0.0..360.0);
    let chroma = rng.gen_range(25.0..35.0);
    let (l0, l1) = (rng.gen_range(40.0..50.0), rng.gen_range(65.0..72.0));
    let geom = if rng.gen_bool(0.5) { Geometry::Rect } else { Geometry::Disc };
    let s = rng.gen_range(60..90u32);
    let frame = BBox::new(rng.gen_range(5..w - s - 5), rng.gen_range(5..h - s - 5), s, s);
    let mut labels = vec![0u32; (w * h) as usize];
    let mut pixels = vec![lab_to_rgb_clamped(bg); (w * h) as usize];
    for p in rasterize(geom, frame, w) {
        let t = ((p / w) - frame.y) as f64 / (s - 1) as f64;
        labels[p as usize] = 1;
        pixels[p as usize] = lab_to_rgb_clamped(chromatic(l0 + t * (l1 - l0), chroma, hue));
    }
    TestCard {
        image: RasterImage::new(w, h, pixels).expect("size matches"),
        labels,
        regions: 2,
    }
}

/// A filled shape mask with its expected class.
#[derive(Debug, Clone)]
pub struct ShapeCase {
    pub expected: ElementType,
    pub rotation_deg: f64,
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u32>,
}

impl ShapeCase {
    pub fn segment(&self) -> Segment {
        let lab = vec![LabColor::default(); (self.width * self.height) as usize];
        Segment::from_pixels(self.pixels.clone(), &lab, self.width, self.height)
    }
}

pub fn shape_case(expected: ElementType, rotation_deg: f64) -> ShapeCase {
    let (w, h) = (160u32, 160u32);
    let (cx, cy) = (80.0, 80.0);
    let poly: Option<Vec<(f64, f64)>> = match expected {
        ElementType::Triangle => Some(regular_polygon(cx, cy, 55.0, 3, rotation_deg)),
        ElementType::Square => Some(regular_polygon(cx, cy, 45.0 * 2f64.sqrt(), 4, rotation_deg + 45.0)),
        ElementType::Pentagon => Some(regular_polygon(cx, cy, 60.0, 5, rotation_deg)),
        ElementType::Rectangle => {
            let t = rotation_deg.to_radians();
            let (c, s) = (t.cos(), t.sin());
            Some(
                [(-55.0, -27.5), (55.0, -27.5), (55.0, 27.5), (-55.0, 27.5)]
                    .iter()
                    .map(|&(x, y)| (cx + x * c - y * s, cy + x * s + y * c))
                    .collect(),
            )
        }
        _ => None,
    };
    let mut pixels = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let p = (x as f64 + 0.5, y as f64 + 0.5);
            let inside = match &poly {
                Some(poly) => convex_contains(poly, p),
                None => (p.0 - cx).hypot(p.1 - cy) < 55.0,
            };
            if inside {
                pixels.push(y * w + x);
            }
        }
    }
    ShapeCase {
        expected,
        rotation_deg,
        width: w,
        height: h,
        pixels,
    }
}

/// Triangle, square, rectangle, pentagon and circle at 0°, 15°, …, 345°.
pub fn shape_suite() -> Vec<ShapeCase> {
    let kinds = [
        ElementType::Triangle,
        ElementType::Square,
        ElementType::Rectangle,
        ElementType::Pentagon,
        ElementType::Circle,
    ];
    kinds
        .iter()
        .flat_map(|&k| (0..24).map(move |r| shape_case(k, r as f64 * 15.0)))
        .collect()
}

/// Single shape containing a text block, the smallest analyzable card.
/// Returns the image, its annotations and the expected document.
pub fn badge_card() -> (RasterImage, AnnotationSet, InfographicDoc) {
    let (w, h) = (200u32, 160u32);
    let bg = LabColor::new(95.0, 0.0, 0.0).displayable();
    let shape_c = chromatic(50.0, 45.0, 30.0).displayable();
    let text_c = LabColor::new(LIGHT_TEXT, 0.0, 0.0).displayable();
    let mut root = Draft::new("bg".into(), NodeKind::Background, None, BBox::new(0, 0, w, h), Some(bg));
    let mut group = Draft::new("g0".into(), NodeKind::VisualGroup, None, BBox::new(0, 0, 0, 0), None);
    let mut shape = Draft::new("g0s".into(), NodeKind::Artistic, Some(ElementType::Circle), centered(100.0, 80.0, 100, 100), Some(shape_c));
    shape.children.push(Draft::new(
        "g0t".into(),
        NodeKind::Data,
        Some(ElementType::Text),
        centered(100.0, 80.0, 50, 14),
        Some(text_c),
    ));
    group.children.push(shape);
    root.children.push(group);
    let (doc, ann) = build_doc(&root, w, h, VifType::Portrait);
    let item = SynthItem {
        id: "badge".into(),
        doc: doc.clone(),
        annotations: ann.clone(),
        templates: vec![Template::Badge],
        draft: root,
    };
    (item.render(), ann, doc)
}
