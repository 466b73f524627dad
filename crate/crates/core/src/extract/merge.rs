use crate::color::LabColor;

use super::segment::{neighbors4, Segment};

/// Segments whose mean chroma is below this are clustered on lightness
/// instead of hue.
pub const ACHROMATIC_CHROMA: f64 = 5.0;

const MAX_SHIFT_ITERS: usize = 500;

/// Mean-shift a point to its mode under a Gaussian KDE of `samples`.
/// `dist` returns the signed displacement from the current position to a
/// sample (wrapped for circular domains); `step` applies a displacement.
fn mean_shift(
    start: f64,
    samples: &[f64],
    bandwidth: f64,
    dist: impl Fn(f64, f64) -> f64,
    step: impl Fn(f64, f64) -> f64,
) -> f64 {
    let mut x = start;
    for _ in 0..MAX_SHIFT_ITERS {
        let (mut num, mut den) = (0.0, 0.0);
        for &s in samples {
            let d = dist(x, s);
            let k = (-0.5 * (d / bandwidth).powi(2)).exp();
            num += k * d;
            den += k;
        }
        let shift = if den > 0.0 { num / den } else { 0.0 };
        x = step(x, shift);
        if shift.abs() < 1e-9 * bandwidth {
            break;
        }
    }
    x
}

fn wrap_degrees(d: f64) -> f64 {
    let d = d.rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

/// Assign each value the index of its KDE mode. Modes closer than a quarter
/// bandwidth are treated as one.
fn mode_labels(values: &[f64], bandwidth: f64, circular: bool) -> Vec<usize> {
    let dist = |x: f64, s: f64| if circular { wrap_degrees(s - x) } else { s - x };
    let step = |x: f64, d: f64| if circular { (x + d).rem_euclid(360.0) } else { x + d };
    let mut modes: Vec<f64> = Vec::new();
    values
        .iter()
        .map(|&v| {
            let m = mean_shift(v, values, bandwidth, dist, step);
            match modes.iter().position(|&q| dist(q, m).abs() < 0.25 * bandwidth) {
                Some(i) => i,
                None => {
                    modes.push(m);
                    modes.len() - 1
                }
            }
        })
        .collect()
}

/// Merge adjacent segments that fall in the same KDE mode: hue (degrees) for
/// chromatic segments, lightness for near-gray ones. Repeats until no merge
/// happens, so the result is a fixed point.
pub fn merge_gradient_segments(segs: &[Segment], bandwidth: f64) -> Vec<Segment> {
    let mut current: Vec<Segment> = segs.to_vec();
    while current.len() > 1 {
        match merge_once(&current, bandwidth) {
            Some(next) => current = next,
            None => break,
        }
    }
    current
}

fn merge_once(segs: &[Segment], bandwidth: f64) -> Option<Vec<Segment>> {
    let n = segs.len();
    let chromatic: Vec<usize> = (0..n)
        .filter(|&i| segs[i].mean.chroma() >= ACHROMATIC_CHROMA)
        .collect();
    let gray: Vec<usize> = (0..n)
        .filter(|&i| segs[i].mean.chroma() < ACHROMATIC_CHROMA)
        .collect();

    // Cluster key per segment: (is_chromatic, mode index).
    let mut cluster = vec![(false, 0usize); n];
    let hues: Vec<f64> = chromatic.iter().map(|&i| segs[i].mean.hue_degrees()).collect();
    for (k, m) in mode_labels(&hues, bandwidth, true).into_iter().enumerate() {
        cluster[chromatic[k]] = (true, m);
    }
    let lightness: Vec<f64> = gray.iter().map(|&i| segs[i].mean.l).collect();
    for (k, m) in mode_labels(&lightness, bandwidth, false).into_iter().enumerate() {
        cluster[gray[k]] = (false, m);
    }

    let (w, h) = (segs[0].image_width, segs[0].image_height);
    let max_pixel = segs.iter().filter_map(|s| s.pixels.last()).max().copied()? as usize;
    let mut owner = vec![u32::MAX; max_pixel + 1];
    for (i, s) in segs.iter().enumerate() {
        for &p in &s.pixels {
            owner[p as usize] = i as u32;
        }
    }

    let mut uf = UnionFind::new(n);
    let mut merged_any = false;
    for (i, s) in segs.iter().enumerate() {
        for &p in &s.pixels {
            for q in neighbors4(p, w, h) {
                let Some(&j) = owner.get(q as usize) else { continue };
                if j == u32::MAX || j as usize == i {
                    continue;
                }
                let j = j as usize;
                if cluster[i] == cluster[j] && uf.union(i, j) {
                    merged_any = true;
                }
            }
        }
    }
    if !merged_any {
        return None;
    }

    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        groups[uf.find(i)].push(i);
    }
    let mut out: Vec<Segment> = groups
        .into_iter()
        .filter(|g| !g.is_empty())
        .map(|g| combine(&g.iter().map(|&i| &segs[i]).collect::<Vec<_>>()))
        .collect();
    out.sort_by_key(|s| s.pixels[0]);
    Some(out)
}

fn combine(parts: &[&Segment]) -> Segment {
    if parts.len() == 1 {
        return parts[0].clone();
    }
    let total: usize = parts.iter().map(|s| s.area()).sum();
    let mut sum = [0.0; 3];
    let mut pixels = Vec::with_capacity(total);
    let mut bbox = parts[0].bbox;
    for s in parts {
        let a = s.area() as f64;
        sum[0] += s.mean.l * a;
        sum[1] += s.mean.a * a;
        sum[2] += s.mean.b * a;
        pixels.extend_from_slice(&s.pixels);
        bbox = bbox.union(&s.bbox);
    }
    pixels.sort_unstable();
    let t = total as f64;
    Segment {
        pixels,
        image_width: parts[0].image_width,
        image_height: parts[0].image_height,
        mean: LabColor::new(sum[0] / t, sum[1] / t, sum[2] / t),
        bbox,
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.parent[hi] = lo;
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::{lab_to_rgb_clamped, RgbColor};
    use crate::doc::BBox;
    use crate::extract::segment_regions;
    use crate::raster::RasterImage;

    fn lab(l: f64, a: f64, b: f64) -> RgbColor {
        lab_to_rgb_clamped(LabColor::new(l, a, b))
    }

    #[test]
    fn vertical_gradient_collapses() {
        let mut img = RasterImage::filled(60, 60, RgbColor::new(255, 255, 255));
        // Two stacked bands with the same hue, different lightness.
        img.fill_rect(BBox::new(10, 10, 40, 20), lab(45.0, 40.0, 30.0));
        img.fill_rect(BBox::new(10, 30, 40, 20), lab(60.0, 40.0, 30.0));
        let segs = segment_regions(&img, 4.0);
        assert_eq!(segs.len(), 3);
        let merged = merge_gradient_segments(&segs, 3.0);
        assert_eq!(merged.len(), 2);
        assert_eq!(merged[1].bbox, BBox::new(10, 10, 40, 40));
    }

    #[test]
    fn red_and_blue_stay_apart() {
        let mut img = RasterImage::filled(40, 20, RgbColor::new(200, 20, 20));
        img.fill_rect(BBox::new(20, 0, 20, 20), RgbColor::new(20, 20, 200));
        let segs = segment_regions(&img, 4.0);
        assert_eq!(merge_gradient_segments(&segs, 3.0), segs);
    }

    #[test]
    fn single_segment_is_identity() {
        let img = RasterImage::filled(10, 10, RgbColor::new(1, 2, 3));
        let segs = segment_regions(&img, 4.0);
        assert_eq!(merge_gradient_segments(&segs, 3.0), segs);
    }

    #[test]
    fn hue_wraps_around_zero() {
        let labels = mode_labels(&[359.0, 1.0, 180.0], 3.0, true);
        assert_eq!(labels[0], labels[1]);
        assert_ne!(labels[0], labels[2]);
    }

    #[test]
    fn merging_is_idempotent() {
        let mut img = RasterImage::filled(80, 80, RgbColor::new(255, 255, 255));
        for (i, l) in [35.0, 42.0, 49.0, 56.0].iter().enumerate() {
            img.fill_rect(BBox::new(10, 10 + 10 * i as u32, 60, 10), lab(*l, -30.0, 40.0));
        }
        img.fill_rect(BBox::new(5, 70, 30, 8), lab(50.0, 10.0, -50.0));
        let segs = segment_regions(&img, 4.0);
        let once = merge_gradient_segments(&segs, 3.0);
        assert!(once.len() < segs.len());
        assert_eq!(merge_gradient_segments(&once, 3.0), once);
    }
}
