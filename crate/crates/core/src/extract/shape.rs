//! Outline tracing, polygon simplification and shape classification.

use crate::doc::ElementType;

use super::segment::Segment;
use super::ExtractParams;

type Pt = (f64, f64);

// Clockwise (in image coordinates, y down) starting west.
const DIRS: [(i32, i32); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

/// Outer border of a segment by Moore-neighbor border following, in image
/// coordinates. Only the outer boundary is followed; holes are ignored.
pub fn trace_outer_contour(seg: &Segment) -> Vec<(i32, i32)> {
    if seg.pixels.is_empty() {
        return Vec::new();
    }
    // Local mask with a one-pixel margin.
    let bx = seg.bbox.x as i32 - 1;
    let by = seg.bbox.y as i32 - 1;
    let mw = seg.bbox.w as i32 + 2;
    let mh = seg.bbox.h as i32 + 2;
    let mut mask = vec![false; (mw * mh) as usize];
    for (x, y) in seg.coords() {
        mask[((y as i32 - by) * mw + (x as i32 - bx)) as usize] = true;
    }
    let fg = |x: i32, y: i32| x >= 0 && y >= 0 && x < mw && y < mh && mask[(y * mw + x) as usize];

    // First pixel in raster order; its west neighbor is background.
    let first = seg.pixels[0];
    let start = (
        (first % seg.image_width) as i32 - bx,
        (first / seg.image_width) as i32 - by,
    );
    let dir_of = |from: (i32, i32), to: (i32, i32)| {
        DIRS.iter()
            .position(|&d| (from.0 + d.0, from.1 + d.1) == to)
            .expect("backtrack is a neighbor")
    };

    let mut contour = vec![start];
    let start_back = (start.0 - 1, start.1);
    let mut current = start;
    let mut back = start_back;
    let limit = 4 * seg.pixels.len() + 16;
    for _ in 0..limit {
        let k = dir_of(current, back);
        let mut next = None;
        for i in 1..=8 {
            let d = DIRS[(k + i) % 8];
            let p = (current.0 + d.0, current.1 + d.1);
            if fg(p.0, p.1) {
                let pd = DIRS[(k + i - 1) % 8];
                next = Some((p, (current.0 + pd.0, current.1 + pd.1)));
                break;
            }
        }
        let Some((p, b)) = next else {
            break; // isolated pixel
        };
        if p == start && b == start_back {
            break;
        }
        // Second stopping rule: leaving the start pixel towards the same
        // neighbour as the very first move means the loop is complete.
        if current == start && contour.len() > 2 && p == contour[1] {
            contour.pop();
            break;
        }
        contour.push(p);
        current = p;
        back = b;
    }
    contour
        .into_iter()
        .map(|(x, y)| (x + bx, y + by))
        .collect()
}

fn perpendicular_distance(p: Pt, a: Pt, b: Pt) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len = dx.hypot(dy);
    if len == 0.0 {
        return (p.0 - a.0).hypot(p.1 - a.1);
    }
    ((p.0 - a.0) * dy - (p.1 - a.1) * dx).abs() / len
}

/// Ramer-Douglas-Peucker on an open polyline; keeps both endpoints.
fn rdp(points: &[Pt], eps: f64, out: &mut Vec<Pt>) {
    if points.len() < 3 {
        out.extend_from_slice(&points[..points.len().saturating_sub(1)]);
        return;
    }
    let (a, b) = (points[0], points[points.len() - 1]);
    let (idx, dmax) = points[1..points.len() - 1]
        .iter()
        .enumerate()
        .map(|(i, &p)| (i + 1, perpendicular_distance(p, a, b)))
        .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    if dmax > eps {
        rdp(&points[..=idx], eps, out);
        rdp(&points[idx..], eps, out);
    } else {
        out.push(a);
    }
}

pub fn contour_length(contour: &[(i32, i32)]) -> f64 {
    let n = contour.len();
    (0..n)
        .map(|i| {
            let (a, b) = (contour[i], contour[(i + 1) % n]);
            ((a.0 - b.0) as f64).hypot((a.1 - b.1) as f64)
        })
        .sum()
}

/// Simplify a closed contour. The loop is cut at the point farthest from the
/// centroid and at the point farthest from that one, so the result does not
/// depend on where tracing started.
pub fn simplify_closed(contour: &[(i32, i32)], eps: f64) -> Vec<Pt> {
    let pts: Vec<Pt> = contour.iter().map(|&(x, y)| (x as f64, y as f64)).collect();
    let n = pts.len();
    if n < 4 {
        return pts;
    }
    let c = centroid(&pts);
    let far = |from: Pt| {
        (0..n)
            .max_by(|&i, &j| {
                let di = (pts[i].0 - from.0).hypot(pts[i].1 - from.1);
                let dj = (pts[j].0 - from.0).hypot(pts[j].1 - from.1);
                di.total_cmp(&dj).then(j.cmp(&i))
            })
            .unwrap()
    };
    let ia = far(c);
    let ib = far(pts[ia]);
    let (lo, hi) = (ia.min(ib), ia.max(ib));
    let first: Vec<Pt> = pts[lo..=hi].to_vec();
    let second: Vec<Pt> = pts[hi..].iter().chain(pts[..=lo].iter()).copied().collect();
    let mut out = Vec::new();
    rdp(&first, eps, &mut out);
    rdp(&second, eps, &mut out);

    // Drop vertices that became collinear with their neighbours across the cut.
    loop {
        let m = out.len();
        if m <= 3 {
            break;
        }
        let weakest = (0..m)
            .map(|i| (i, perpendicular_distance(out[i], out[(i + m - 1) % m], out[(i + 1) % m])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if weakest.1 <= eps {
            out.remove(weakest.0);
        } else {
            break;
        }
    }
    out
}

fn centroid(pts: &[Pt]) -> Pt {
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    (sx / n, sy / n)
}

fn shoelace(pts: &[Pt]) -> f64 {
    let n = pts.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum::<f64>()
        .abs()
}

pub fn classify_shape(seg: &Segment) -> ElementType {
    classify_shape_with(seg, &ExtractParams::default())
}

pub fn classify_shape_with(seg: &Segment, params: &ExtractParams) -> ElementType {
    let contour = trace_outer_contour(seg);
    if contour.len() < 4 {
        return ElementType::Others;
    }
    let eps = params.rdp_eps_fraction * contour_length(&contour);
    let poly = simplify_closed(&contour, eps);
    match poly.len() {
        3 => ElementType::Triangle,
        4 => {
            let sides: Vec<f64> = (0..4)
                .map(|i| {
                    let (a, b) = (poly[i], poly[(i + 1) % 4]);
                    (a.0 - b.0).hypot(a.1 - b.1)
                })
                .collect();
            let max = sides.iter().copied().fold(f64::MIN, f64::max);
            let min = sides.iter().copied().fold(f64::MAX, f64::min);
            if min > 0.0 && max / min <= params.square_ratio {
                ElementType::Square
            } else {
                ElementType::Rectangle
            }
        }
        5 => ElementType::Pentagon,
        m if m > params.circle_min_vertices => {
            let pts: Vec<Pt> = contour.iter().map(|&(x, y)| (x as f64, y as f64)).collect();
            let c = centroid(&pts);
            let r = pts.iter().map(|p| (p.0 - c.0).hypot(p.1 - c.1)).sum::<f64>() / pts.len() as f64;
            let ratio = shoelace(&pts) / (std::f64::consts::PI * r * r);
            if (0.9..=1.1).contains(&ratio) {
                ElementType::Circle
            } else {
                ElementType::Others
            }
        }
        _ => ElementType::Others,
    }
}
