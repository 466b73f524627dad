use std::collections::VecDeque;

use crate::color::{ciede2000, LabColor};
use crate::doc::BBox;
use crate::raster::RasterImage;

/// A 4-connected region of pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// Row-major pixel offsets, ascending.
    pub pixels: Vec<u32>,
    /// Width of the image the offsets refer to.
    pub image_width: u32,
    pub image_height: u32,
    pub mean: LabColor,
    pub bbox: BBox,
}

impl Segment {
    pub fn from_pixels(mut pixels: Vec<u32>, lab: &[LabColor], image_width: u32, image_height: u32) -> Self {
        pixels.sort_unstable();
        let mut sum = [0.0; 3];
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
        for &p in &pixels {
            let c = lab[p as usize];
            sum[0] += c.l;
            sum[1] += c.a;
            sum[2] += c.b;
            let (x, y) = (p % image_width, p / image_width);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        let n = pixels.len().max(1) as f64;
        Self {
            pixels,
            image_width,
            image_height,
            mean: LabColor::new(sum[0] / n, sum[1] / n, sum[2] / n),
            bbox: BBox::new(x0, y0, x1 + 1 - x0, y1 + 1 - y0),
        }
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    pub fn coords(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.pixels
            .iter()
            .map(move |&p| (p % self.image_width, p / self.image_width))
    }

    /// Number of pixels on the image border.
    pub fn border_pixels(&self) -> usize {
        self.coords()
            .filter(|&(x, y)| {
                x == 0 || y == 0 || x + 1 == self.image_width || y + 1 == self.image_height
            })
            .count()
    }
}

pub(crate) fn neighbors4(p: u32, width: u32, height: u32) -> impl Iterator<Item = u32> {
    let (x, y) = (p % width, p / width);
    [
        (x > 0).then(|| p - 1),
        (x + 1 < width).then(|| p + 1),
        (y > 0).then(|| p - width),
        (y + 1 < height).then(|| p + width),
    ]
    .into_iter()
    .flatten()
}

/// Region growing with the default minimum-area rule (0.05% of the image).
pub fn segment_regions(img: &RasterImage, threshold: f64) -> Vec<Segment> {
    let min_area = super::ExtractParams::default().min_segment_area(img.len());
    segment_regions_with(img, threshold, min_area)
}

/// Grow 4-connected regions: a neighbor joins when its CIEDE2000 distance to
/// the region's running mean is below `threshold`. Regions smaller than
/// `min_area` are then absorbed by the adjacent region with the closest mean.
pub fn segment_regions_with(img: &RasterImage, threshold: f64, min_area: usize) -> Vec<Segment> {
    let (w, h) = (img.width(), img.height());
    let lab = img.to_lab();
    let n = lab.len();
    const UNSET: u32 = u32::MAX;
    let mut labels = vec![UNSET; n];
    let mut regions: Vec<Region> = Vec::new();
    let mut queue = VecDeque::new();

    for seed in 0..n as u32 {
        if labels[seed as usize] != UNSET {
            continue;
        }
        let id = regions.len() as u32;
        let mut region = Region::default();
        labels[seed as usize] = id;
        region.add(seed, lab[seed as usize]);
        queue.push_back(seed);
        while let Some(p) = queue.pop_front() {
            for q in neighbors4(p, w, h) {
                if labels[q as usize] != UNSET {
                    continue;
                }
                if ciede2000(lab[q as usize], region.mean()) < threshold {
                    labels[q as usize] = id;
                    region.add(q, lab[q as usize]);
                    queue.push_back(q);
                }
            }
        }
        regions.push(region);
    }

    absorb_small_regions(&mut regions, &mut labels, w, h, min_area);

    let mut out: Vec<Segment> = regions
        .into_iter()
        .filter(|r| !r.pixels.is_empty())
        .map(|r| Segment::from_pixels(r.pixels, &lab, w, h))
        .collect();
    out.sort_by_key(|s| s.pixels[0]);
    out
}

#[derive(Default)]
struct Region {
    pixels: Vec<u32>,
    sum: [f64; 3],
}

impl Region {
    fn add(&mut self, p: u32, c: LabColor) {
        self.pixels.push(p);
        self.sum[0] += c.l;
        self.sum[1] += c.a;
        self.sum[2] += c.b;
    }

    fn mean(&self) -> LabColor {
        let n = self.pixels.len() as f64;
        LabColor::new(self.sum[0] / n, self.sum[1] / n, self.sum[2] / n)
    }

    fn absorb(&mut self, other: Region) {
        self.pixels.extend(other.pixels);
        for k in 0..3 {
            self.sum[k] += other.sum[k];
        }
    }
}

fn absorb_small_regions(regions: &mut [Region], labels: &mut [u32], w: u32, h: u32, min_area: usize) {
    loop {
        // Smallest undersized region first; ties by label.
        let Some(small) = (0..regions.len())
            .filter(|&i| !regions[i].pixels.is_empty() && regions[i].pixels.len() < min_area)
            .min_by_key(|&i| (regions[i].pixels.len(), i))
        else {
            return;
        };
        let mut adjacent: Vec<u32> = regions[small]
            .pixels
            .iter()
            .flat_map(|&p| neighbors4(p, w, h))
            .map(|q| labels[q as usize])
            .filter(|&l| l as usize != small)
            .collect();
        adjacent.sort_unstable();
        adjacent.dedup();
        if adjacent.is_empty() {
            // The region is the whole image.
            return;
        }
        let mean = regions[small].mean();
        let target = adjacent
            .into_iter()
            .min_by(|&a, &b| {
                let da = ciede2000(mean, regions[a as usize].mean());
                let db = ciede2000(mean, regions[b as usize].mean());
                da.total_cmp(&db)
                    .then(regions[b as usize].pixels.len().cmp(&regions[a as usize].pixels.len()))
                    .then(a.cmp(&b))
            })
            .unwrap() as usize;
        let moved = std::mem::take(&mut regions[small]);
        for &p in &moved.pixels {
            labels[p as usize] = target as u32;
        }
        regions[target].absorb(moved);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::RgbColor;

    #[test]
    fn uniform_image_is_one_segment() {
        let img = RasterImage::filled(30, 20, RgbColor::new(90, 120, 30));
        let segs = segment_regions(&img, 4.0);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].area(), 600);
        assert_eq!(segs[0].bbox, BBox::new(0, 0, 30, 20));
    }

    #[test]
    fn two_halves_are_two_segments() {
        let mut img = RasterImage::filled(40, 20, RgbColor::new(250, 250, 250));
        img.fill_rect(BBox::new(20, 0, 20, 20), RgbColor::new(30, 60, 160));
        let segs = segment_regions(&img, 4.0);
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].bbox, BBox::new(0, 0, 20, 20));
        assert_eq!(segs[1].bbox, BBox::new(20, 0, 20, 20));
    }

    #[test]
    fn slivers_are_absorbed() {
        let mut img = RasterImage::filled(100, 100, RgbColor::new(250, 250, 250));
        img.fill_rect(BBox::new(10, 10, 40, 40), RgbColor::new(200, 20, 20));
        // 2-pixel speck, below 0.05% of 10_000 = 5 pixels.
        img.fill_rect(BBox::new(70, 70, 2, 1), RgbColor::new(0, 0, 0));
        let segs = segment_regions(&img, 4.0);
        assert_eq!(segs.len(), 2);
        let total: usize = segs.iter().map(Segment::area).sum();
        assert_eq!(total, 10_000);
    }
}
