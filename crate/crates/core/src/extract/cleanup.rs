use std::collections::HashMap;

use crate::color::RgbColor;
use crate::doc::BBox;
use crate::raster::{AnnotationSet, RasterImage};

/// Most frequent color in the `width`-pixel ring just outside `bbox`,
/// ignoring pixels covered by any of `exclude`. Falls back to the full ring
/// if every ring pixel is excluded, and to the bbox interior if the ring is
/// empty (bbox covers the image). Ties go to the smaller packed RGB value.
pub fn ring_color(img: &RasterImage, bbox: BBox, width: u32, exclude: &[BBox]) -> RgbColor {
    let x0 = bbox.x.saturating_sub(width);
    let y0 = bbox.y.saturating_sub(width);
    let x1 = (bbox.right() + width).min(img.width());
    let y1 = (bbox.bottom() + width).min(img.height());

    let mut counts: HashMap<RgbColor, usize> = HashMap::new();
    let mut fallback: HashMap<RgbColor, usize> = HashMap::new();
    let inside = |b: &BBox, x: u32, y: u32| x >= b.x && x < b.right() && y >= b.y && y < b.bottom();
    for y in y0..y1 {
        for x in x0..x1 {
            if inside(&bbox, x, y) {
                continue;
            }
            let c = img.get(x, y);
            *fallback.entry(c).or_default() += 1;
            if !exclude.iter().any(|b| inside(b, x, y)) {
                *counts.entry(c).or_default() += 1;
            }
        }
    }
    if counts.is_empty() {
        counts = fallback;
    }
    if counts.is_empty() {
        for y in bbox.y..bbox.bottom().min(img.height()) {
            for x in bbox.x..bbox.right().min(img.width()) {
                *counts.entry(img.get(x, y)).or_default() += 1;
            }
        }
    }
    let pack = |c: &RgbColor| (c.r as u32) << 16 | (c.g as u32) << 8 | c.b as u32;
    counts
        .into_iter()
        .max_by(|(ca, na), (cb, nb)| na.cmp(nb).then(pack(cb).cmp(&pack(ca))))
        .map(|(c, _)| c)
        .unwrap_or_default()
}

/// Repaint every annotated data element's bbox with the dominant color of
/// the ring around it. Ring colors are sampled from the input image.
pub fn remove_data_elements(img: &RasterImage, ann: &AnnotationSet, ring_width: u32) -> RasterImage {
    let boxes: Vec<BBox> = ann.data_elements.iter().map(|d| d.bbox).collect();
    let fills: Vec<RgbColor> = boxes
        .iter()
        .map(|&b| ring_color(img, b, ring_width, &boxes))
        .collect();
    let mut out = img.clone();
    for (b, c) in boxes.into_iter().zip(fills) {
        out.fill_rect(b, c);
    }
    out
}
