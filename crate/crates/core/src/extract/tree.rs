use std::collections::HashMap;

use crate::color::{ciede2000, rgb_to_lab, LabColor};
use crate::doc::{BBox, ElementNode, ElementType, InfographicDoc, NodeKind, VifType};
use crate::error::{ExtractError, StructureError};
use crate::raster::{AnnotationSet, RasterImage};

use super::cleanup::ring_color;
use super::segment::Segment;
use super::shape::classify_shape_with;
use super::ExtractParams;

/// Minimum share of a child's bbox that must overlap a candidate parent
/// before a partial overlap counts as containment.
const MIN_OVERLAP_FRACTION: f64 = 0.5;

struct Element {
    id: String,
    kind: NodeKind,
    element_type: ElementType,
    bbox: BBox,
    area: u64,
    color: Option<LabColor>,
    /// Index into the annotation list for data elements.
    data_index: Option<usize>,
}

/// Build the document tree from segments (background included) and
/// annotations. `img` is the original raster, used to measure data
/// elements. The background is the segment with the most border pixels.
pub fn build_tree(
    img: &RasterImage,
    ann: &AnnotationSet,
    segments: &[Segment],
    params: &ExtractParams,
) -> Result<InfographicDoc, ExtractError> {
    ann.validate(img)?;
    let bg_index = segments
        .iter()
        .enumerate()
        .max_by_key(|(i, s)| (s.border_pixels(), s.area(), std::cmp::Reverse(*i)))
        .map(|(i, _)| i);

    let mut root = ElementNode::new("bg", NodeKind::Background, img.bounds())
        .with_area(img.len() as u64);
    root.color = bg_index.map(|i| segments[i].mean);

    let mut elements: Vec<Element> = Vec::new();
    for (i, seg) in segments.iter().enumerate() {
        if Some(i) == bg_index {
            continue;
        }
        elements.push(Element {
            id: format!("a{}", elements.len()),
            kind: NodeKind::Artistic,
            element_type: classify_shape_with(seg, params),
            bbox: seg.bbox,
            area: seg.area() as u64,
            color: Some(seg.mean),
            data_index: None,
        });
    }
    let data_boxes: Vec<BBox> = ann.data_elements.iter().map(|d| d.bbox).collect();
    for (i, d) in ann.data_elements.iter().enumerate() {
        let (color, area) = measure_data_element(img, d.bbox, &data_boxes, params);
        elements.push(Element {
            id: format!("d{i}"),
            kind: NodeKind::Data,
            element_type: d.element_type,
            bbox: d.bbox,
            area,
            color,
            data_index: Some(i),
        });
    }

    // Containment parent for each element (None = root).
    let parents: Vec<Option<usize>> = (0..elements.len())
        .map(|i| direct_container(&elements, i))
        .collect();
    for (i, p) in parents.iter().enumerate() {
        if let Some(p) = *p {
            // Partial overlaps attach to the best-overlapping candidate; clip
            // the child so the tree keeps bbox containment.
            if !elements[p].bbox.contains(&elements[i].bbox) {
                let clipped = elements[p]
                    .bbox
                    .intersection(&elements[i].bbox)
                    .expect("overlap checked");
                elements[i].bbox = clipped;
            }
        }
    }

    let groups = data_groups(ann, &elements, img, params);

    // Top-level branches and the data elements beneath them.
    let top_level: Vec<usize> = (0..elements.len()).filter(|&i| parents[i].is_none()).collect();
    let top_of = |mut i: usize| {
        while let Some(p) = parents[i] {
            i = p;
        }
        i
    };
    let mut branch_votes: HashMap<usize, Vec<usize>> = HashMap::new();
    for (gi, members) in groups.iter().enumerate() {
        for &d in members {
            branch_votes.entry(top_of(d)).or_default().push(gi);
        }
    }
    let mut group_branches: Vec<Vec<usize>> = vec![Vec::new(); groups.len()];
    let mut loose: Vec<usize> = Vec::new();
    for &t in &top_level {
        match branch_votes.get(&t) {
            Some(votes) => {
                let mut counts = vec![0usize; groups.len()];
                for &g in votes {
                    counts[g] += 1;
                }
                let best = (0..groups.len())
                    .max_by_key(|&g| (counts[g], std::cmp::Reverse(g)))
                    .unwrap();
                group_branches[best].push(t);
            }
            None => loose.push(t),
        }
    }

    // A branch without data elements joins the nearest group when it lies
    // within the proximity gap of it (e.g. a shape captioned by a text).
    let diag = (img.width() as f64).hypot(img.height() as f64);
    let group_boxes: Vec<Option<BBox>> = group_branches
        .iter()
        .map(|b| b.iter().map(|&i| elements[i].bbox).reduce(|a, c| a.union(&c)))
        .collect();
    let mut still_loose = Vec::new();
    for &t in &loose {
        let nearest = group_boxes
            .iter()
            .enumerate()
            .filter_map(|(g, b)| b.map(|b| (g, bbox_gap(&b, &elements[t].bbox))))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        match nearest {
            Some((g, d)) if d <= params.group_gap * diag => group_branches[g].push(t),
            _ => still_loose.push(t),
        }
    }
    let loose = still_loose;

    let mut doc = InfographicDoc::new(img.width(), img.height(), VifType::Portrait, root);
    let mut group_ids = Vec::new();
    for branches in group_branches.iter().filter(|b| !b.is_empty()) {
        let id = format!("g{}", group_ids.len());
        let bbox = branches
            .iter()
            .map(|&b| elements[b].bbox)
            .reduce(|a, b| a.union(&b))
            .unwrap();
        let area = branches.iter().map(|&b| elements[b].area).sum();
        let node = ElementNode::new(&id, NodeKind::VisualGroup, bbox)
            .with_area(area)
            .with_children(branches.iter().map(|&b| elements[b].id.clone()));
        doc.nodes[0].children.push(id.clone());
        doc.nodes.push(node);
        group_ids.push(id);
    }
    for &t in &loose {
        doc.nodes[0].children.push(elements[t].id.clone());
    }
    for (i, e) in elements.iter().enumerate() {
        let mut node = ElementNode::new(&e.id, e.kind, e.bbox)
            .with_type(e.element_type)
            .with_area(e.area);
        node.color = e.color;
        node.children = (0..elements.len())
            .filter(|&c| parents[c] == Some(i))
            .map(|c| elements[c].id.clone())
            .collect();
        doc.nodes.push(node);
    }

    if doc.nodes.len() > params.max_nodes {
        return Err(StructureError::Capacity {
            count: doc.nodes.len(),
            max: params.max_nodes,
        }
        .into());
    }

    // Backbone order: explicit groups keep annotation order, inferred groups
    // follow reading order.
    let explicit = ann.visual_groups.is_some();
    if !explicit {
        group_ids.sort_by_key(|id| {
            let b = doc.node(id).unwrap().bbox;
            (b.y, b.x)
        });
    }
    doc.vif_type = ann.vif_type.unwrap_or_else(|| infer_vif(&doc, &group_ids));
    doc.sort_reading_order();
    // Groups hang off the root in backbone order, ahead of loose elements.
    let loose_sorted: Vec<String> = doc.nodes[0]
        .children
        .iter()
        .filter(|c| !group_ids.contains(c))
        .cloned()
        .collect();
    doc.nodes[0].children = group_ids.iter().cloned().chain(loose_sorted).collect();
    doc.visual_groups = group_ids;
    Ok(doc)
}

/// Euclidean distance between two boxes; 0 when they touch or overlap.
fn bbox_gap(a: &BBox, b: &BBox) -> f64 {
    let dx = (b.x as f64 - a.right() as f64).max(a.x as f64 - b.right() as f64).max(0.0);
    let dy = (b.y as f64 - a.bottom() as f64).max(a.y as f64 - b.bottom() as f64).max(0.0);
    dx.hypot(dy)
}

/// Landscape when group centers spread wider than tall, else portrait.
fn infer_vif(doc: &InfographicDoc, groups: &[String]) -> VifType {
    if groups.len() < 2 {
        return VifType::Portrait;
    }
    let centers: Vec<(f64, f64)> = groups
        .iter()
        .map(|g| doc.node(g).unwrap().bbox.center())
        .collect();
    let spread = |f: fn(&(f64, f64)) -> f64| {
        let lo = centers.iter().map(f).fold(f64::MAX, f64::min);
        let hi = centers.iter().map(f).fold(f64::MIN, f64::max);
        hi - lo
    };
    if spread(|c| c.0) > spread(|c| c.1) {
        VifType::Landscape
    } else {
        VifType::Portrait
    }
}

/// Foreground color and pixel count of a data element: pixels inside its
/// bbox that differ from the surrounding ring color.
fn measure_data_element(
    img: &RasterImage,
    bbox: BBox,
    all_boxes: &[BBox],
    params: &ExtractParams,
) -> (Option<LabColor>, u64) {
    let ring = rgb_to_lab(ring_color(img, bbox, params.ring_width, all_boxes));
    let mut sum = [0.0; 3];
    let mut n = 0u64;
    for y in bbox.y..bbox.bottom() {
        for x in bbox.x..bbox.right() {
            let c = rgb_to_lab(img.get(x, y));
            if ciede2000(c, ring) >= params.threshold {
                sum[0] += c.l;
                sum[1] += c.a;
                sum[2] += c.b;
                n += 1;
            }
        }
    }
    if n == 0 {
        return (None, 0);
    }
    let k = n as f64;
    (Some(LabColor::new(sum[0] / k, sum[1] / k, sum[2] / k)), n)
}

/// Does `outer` rank above `inner` when their boxes coincide?
fn outranks(elements: &[Element], outer: usize, inner: usize) -> bool {
    let (a, b) = (&elements[outer], &elements[inner]);
    match (a.kind, b.kind) {
        (NodeKind::Artistic, NodeKind::Data) => true,
        (NodeKind::Data, NodeKind::Artistic) => false,
        _ => a.area > b.area || (a.area == b.area && outer < inner),
    }
}

/// The smallest element whose bbox contains element `i`; failing that, the
/// larger element overlapping most of `i`'s bbox.
fn direct_container(elements: &[Element], i: usize) -> Option<usize> {
    let child = &elements[i];
    let contains = |j: usize| {
        let p = &elements[j];
        j != i
            && p.bbox.contains(&child.bbox)
            && (p.bbox.area() > child.bbox.area() || outranks(elements, j, i))
    };
    if let Some(j) = (0..elements.len())
        .filter(|&j| contains(j))
        .min_by_key(|&j| (elements[j].bbox.area(), std::cmp::Reverse(elements[j].area), j))
    {
        return Some(j);
    }
    let child_area = child.bbox.area() as f64;
    (0..elements.len())
        .filter(|&j| j != i && elements[j].bbox.area() > child.bbox.area())
        .filter_map(|j| {
            let inter = elements[j].bbox.intersection(&child.bbox)?.area() as f64 / child_area;
            (inter >= MIN_OVERLAP_FRACTION).then_some((j, inter))
        })
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(j, _)| j)
}

/// Data elements per visual group, as element indices.
fn data_groups(
    ann: &AnnotationSet,
    elements: &[Element],
    img: &RasterImage,
    params: &ExtractParams,
) -> Vec<Vec<usize>> {
    let data: Vec<usize> = (0..elements.len())
        .filter(|&i| elements[i].data_index.is_some())
        .collect();
    let by_annotation = |a: usize| {
        data.iter()
            .copied()
            .find(|&i| elements[i].data_index == Some(a))
            .unwrap()
    };
    if let Some(groups) = &ann.visual_groups {
        return groups
            .iter()
            .map(|g| g.iter().map(|&a| by_annotation(a)).collect::<Vec<_>>())
            .filter(|g: &Vec<usize>| !g.is_empty())
            .collect();
    }
    // Single-linkage on bbox centers.
    let diag = (img.width() as f64).hypot(img.height() as f64);
    let gap = params.group_gap * diag;
    let n = data.len();
    let mut label: Vec<usize> = (0..n).collect();
    let centers: Vec<(f64, f64)> = data.iter().map(|&i| elements[i].bbox.center()).collect();
    loop {
        let mut changed = false;
        for a in 0..n {
            for b in a + 1..n {
                let d = (centers[a].0 - centers[b].0).hypot(centers[a].1 - centers[b].1);
                if d <= gap && label[a] != label[b] {
                    let (lo, hi) = (label[a].min(label[b]), label[a].max(label[b]));
                    for l in label.iter_mut() {
                        if *l == hi {
                            *l = lo;
                        }
                    }
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut keys: Vec<usize> = label.clone();
    keys.sort_unstable();
    keys.dedup();
    keys.into_iter()
        .map(|k| (0..n).filter(|&m| label[m] == k).map(|m| data[m]).collect())
        .collect()
}
