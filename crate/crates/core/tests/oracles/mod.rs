//! Independent reference implementations used by the integration and
//! acceptance tests. Apart from the finite-difference probe of the loss,
//! nothing here calls into the library's own math.

#![allow(dead_code)]

use ndarray::Array2;
use palettizer::features::FeatureKind;
use palettizer::nested_set::TreeShape;
use palettizer::recommender::{Batch, ColumnSpec, VaeacNetwork};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Published CIEDE2000 verification pairs (Sharma, Wu & Dalal data set):
/// (L1, a1, b1, L2, a2, b2, ΔE00), ΔE00 rounded to 4 decimals.
pub const SHARMA_PAIRS: [[f64; 7]; 34] = [
    [50.0, 2.6772, -79.7751, 50.0, 0.0, -82.7485, 2.0425],
    [50.0, 3.1571, -77.2803, 50.0, 0.0, -82.7485, 2.8615],
    [50.0, 2.8361, -74.0200, 50.0, 0.0, -82.7485, 3.4412],
    [50.0, -1.3802, -84.2814, 50.0, 0.0, -82.7485, 1.0000],
    [50.0, -1.1848, -84.8006, 50.0, 0.0, -82.7485, 1.0000],
    [50.0, -0.9009, -85.5211, 50.0, 0.0, -82.7485, 1.0000],
    [50.0, 0.0, 0.0, 50.0, -1.0, 2.0, 2.3669],
    [50.0, -1.0, 2.0, 50.0, 0.0, 0.0, 2.3669],
    [50.0, 2.4900, -0.0010, 50.0, -2.4900, 0.0009, 7.1792],
    [50.0, 2.4900, -0.0010, 50.0, -2.4900, 0.0010, 7.1792],
    [50.0, 2.4900, -0.0010, 50.0, -2.4900, 0.0011, 7.2195],
    [50.0, 2.4900, -0.0010, 50.0, -2.4900, 0.0012, 7.2195],
    [50.0, -0.0010, 2.4900, 50.0, 0.0009, -2.4900, 4.8045],
    [50.0, -0.0010, 2.4900, 50.0, 0.0010, -2.4900, 4.8045],
    [50.0, -0.0010, 2.4900, 50.0, 0.0011, -2.4900, 4.7461],
    [50.0, 2.5000, 0.0000, 50.0, 0.0000, -2.5000, 4.3065],
    [50.0, 2.5000, 0.0000, 73.0, 25.0, -18.0, 27.1492],
    [50.0, 2.5000, 0.0000, 61.0, -5.0, 29.0, 22.8977],
    [50.0, 2.5000, 0.0000, 56.0, -27.0, -3.0, 31.9030],
    [50.0, 2.5000, 0.0000, 58.0, 24.0, 15.0, 19.4535],
    [50.0, 2.5000, 0.0000, 50.0, 3.1736, 0.5854, 1.0000],
    [50.0, 2.5000, 0.0000, 50.0, 3.2972, 0.0000, 1.0000],
    [50.0, 2.5000, 0.0000, 50.0, 1.8634, 0.5757, 1.0000],
    [50.0, 2.5000, 0.0000, 50.0, 3.2592, 0.3350, 1.0000],
    [60.2574, -34.0099, 36.2677, 60.4626, -34.1751, 39.4387, 1.2644],
    [63.0109, -31.0961, -5.8663, 62.8187, -29.7946, -4.0864, 1.2630],
    [61.2901, 3.7196, -5.3901, 61.4292, 2.2480, -4.9620, 1.8731],
    [35.0831, -44.1164, 3.7933, 35.0232, -40.0716, 1.5901, 1.8645],
    [22.7233, 20.0904, -46.6940, 23.0331, 14.9730, -42.5619, 2.0373],
    [36.4612, 47.8580, 18.3852, 36.2715, 50.5065, 21.2231, 1.4146],
    [90.8027, -2.0831, 1.4410, 91.1528, -1.6435, 0.0447, 1.4441],
    [90.9257, -0.5406, -0.9208, 88.6381, -0.8985, -0.7239, 1.5381],
    [6.7747, -0.2908, -2.4247, 5.8714, -0.0985, -2.2286, 0.6377],
    [2.0776, 0.0795, -1.1350, 0.9033, -0.0636, -0.5514, 0.9082],
];

/// CIEDE2000 written out in degrees, step by step.
pub fn de00(p: [f64; 3], q: [f64; 3]) -> f64 {
    let rad = |d: f64| d.to_radians();
    let (l1, a1, b1) = (p[0], p[1], p[2]);
    let (l2, a2, b2) = (q[0], q[1], q[2]);
    let c_bar = ((a1 * a1 + b1 * b1).sqrt() + (a2 * a2 + b2 * b2).sqrt()) / 2.0;
    let g = 0.5 * (1.0 - (c_bar.powi(7) / (c_bar.powi(7) + 25f64.powi(7))).sqrt());
    let a1p = (1.0 + g) * a1;
    let a2p = (1.0 + g) * a2;
    let c1p = (a1p * a1p + b1 * b1).sqrt();
    let c2p = (a2p * a2p + b2 * b2).sqrt();
    let hue = |b: f64, a: f64| {
        if b == 0.0 && a == 0.0 {
            0.0
        } else {
            let h = b.atan2(a).to_degrees();
            if h < 0.0 {
                h + 360.0
            } else {
                h
            }
        }
    };
    let h1p = hue(b1, a1p);
    let h2p = hue(b2, a2p);

    let dl = l2 - l1;
    let dc = c2p - c1p;
    let dh_angle = if c1p * c2p == 0.0 {
        0.0
    } else if (h2p - h1p).abs() <= 180.0 {
        h2p - h1p
    } else if h2p - h1p > 180.0 {
        h2p - h1p - 360.0
    } else {
        h2p - h1p + 360.0
    };
    let dh = 2.0 * (c1p * c2p).sqrt() * rad(dh_angle / 2.0).sin();

    let l_bar = (l1 + l2) / 2.0;
    let cp_bar = (c1p + c2p) / 2.0;
    let hp_bar = if c1p * c2p == 0.0 {
        h1p + h2p
    } else if (h1p - h2p).abs() <= 180.0 {
        (h1p + h2p) / 2.0
    } else if h1p + h2p < 360.0 {
        (h1p + h2p + 360.0) / 2.0
    } else {
        (h1p + h2p - 360.0) / 2.0
    };
    let t = 1.0 - 0.17 * rad(hp_bar - 30.0).cos() + 0.24 * rad(2.0 * hp_bar).cos() + 0.32 * rad(3.0 * hp_bar + 6.0).cos()
        - 0.20 * rad(4.0 * hp_bar - 63.0).cos();
    let d_theta = 30.0 * (-((hp_bar - 275.0) / 25.0).powi(2)).exp();
    let rc = 2.0 * (cp_bar.powi(7) / (cp_bar.powi(7) + 25f64.powi(7))).sqrt();
    let sl = 1.0 + 0.015 * (l_bar - 50.0).powi(2) / (20.0 + (l_bar - 50.0).powi(2)).sqrt();
    let sc = 1.0 + 0.045 * cp_bar;
    let sh = 1.0 + 0.015 * cp_bar * t;
    let rt = -rad(2.0 * d_theta).sin() * rc;
    ((dl / sl).powi(2) + (dc / sc).powi(2) + (dh / sh).powi(2) + rt * (dc / sc) * (dh / sh)).sqrt()
}

/// NRMSE as printed: for each imputation, sqrt(mean(((x - t)/sd)^2)),
/// averaged over imputations. Zero sds count as one.
pub fn nrmse_bf(truth: &[f64], imps: &[Vec<f64>], sds: &[f64]) -> f64 {
    let mut total = 0.0;
    for imp in imps {
        let mut acc = 0.0;
        for j in 0..truth.len() {
            let sd = if sds[j] > 0.0 { sds[j] } else { 1.0 };
            let e = (imp[j] - truth[j]) / sd;
            acc += e * e;
        }
        total += (acc / truth.len() as f64).sqrt();
    }
    total / imps.len() as f64
}

fn mean_pair_distance(x: &[[f64; 3]], y: &[[f64; 3]]) -> f64 {
    let mut s = 0.0;
    for k in 0..x.len() {
        s += de00(x[k], y[k]);
    }
    s / x.len() as f64
}

pub fn crs_bf(truth: &[[f64; 3]], imps: &[Vec<[f64; 3]>]) -> f64 {
    imps.iter().map(|c| mean_pair_distance(truth, c)).sum()
}

pub fn cvs_bf(imps: &[Vec<[f64; 3]>]) -> f64 {
    let mut s = 0.0;
    for i in 0..imps.len() {
        for j in 0..imps.len() {
            if i < j {
                s += mean_pair_distance(&imps[i], &imps[j]);
            }
        }
    }
    s
}

/// Random ordered tree of `n` nodes: node `i > 0` hangs under a uniformly
/// chosen earlier node; children keep insertion order.
pub fn random_parents<R: Rng>(rng: &mut R, n: usize) -> Vec<Option<usize>> {
    (0..n).map(|i| (i > 0).then(|| rng.gen_range(0..i))).collect()
}

pub fn tree_from_parents(parents: &[Option<usize>]) -> TreeShape {
    fn build(v: usize, parents: &[Option<usize>]) -> TreeShape {
        let kids = (0..parents.len())
            .filter(|&c| parents[c] == Some(v))
            .map(|c| build(c, parents))
            .collect();
        TreeShape::node(format!("n{v}"), kids)
    }
    build(0, parents)
}

/// Closed-form nested-set numbering. Before entering `v`, each of the
/// `pre(v)` earlier pre-order nodes has been entered once, and every one of
/// them except `v`'s ancestors has also been exited:
/// `left = 2·pre − depth + 1`, `right = left + 2·size − 1`.
pub fn nested_set_oracle(parents: &[Option<usize>]) -> Vec<(String, u32, u32)> {
    let n = parents.len();
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![0usize];
    while let Some(v) = stack.pop() {
        order.push(v);
        let mut kids: Vec<usize> = (0..n).filter(|&c| parents[c] == Some(v)).collect();
        kids.reverse();
        stack.extend(kids);
    }
    let depth = |mut v: usize| {
        let mut d = 0;
        while let Some(p) = parents[v] {
            v = p;
            d += 1;
        }
        d
    };
    let size = |v: usize| (0..n).filter(|&c| {
        let mut u = c;
        loop {
            if u == v {
                return true;
            }
            match parents[u] {
                Some(p) => u = p,
                None => return false,
            }
        }
    }).count();
    order
        .iter()
        .enumerate()
        .map(|(pre, &v)| {
            let left = 2 * pre as u32 - depth(v) as u32 + 1;
            (format!("n{v}"), left, left + 2 * size(v) as u32 - 1)
        })
        .collect()
}

pub fn tiny_spec() -> ColumnSpec {
    let mut kinds = vec![FeatureKind::Categorical { group: 0 }; 3];
    kinds.push(FeatureKind::Binary);
    kinds.extend([FeatureKind::Continuous; 8]);
    ColumnSpec::new(kinds)
}

pub fn tiny_batch(rng: &mut ChaCha8Rng) -> Batch {
    let (n, w) = (4, 12);
    let mut x = Array2::from_shape_simple_fn((n, w), || rng.gen_range(-1.5..1.5));
    for i in 0..n {
        let hot = rng.gen_range(0..3);
        for c in 0..3 {
            x[[i, c]] = if c == hot { 1.0 } else { 0.0 };
        }
    }
    let known = Array2::from_shape_simple_fn((n, w), || if rng.gen::<f64>() < 0.9 { 1.0 } else { 0.0 });
    let hidden = Array2::from_shape_simple_fn((n, w), || if rng.gen::<f64>() < 0.5 { 1.0 } else { 0.0 });
    let eps = Array2::from_shape_simple_fn((n, 2), || rng.sample(StandardNormal));
    Batch { x: &x * &known, known, hidden, eps }
}

/// Relative error ‖g − ĝ‖ / (‖g‖ + ‖ĝ‖) between backprop and central
/// differences of the negative ELBO.
pub fn gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = VaeacNetwork::new(tiny_spec(), &[6], 2, &mut rng);
    let batch = tiny_batch(&mut rng);
    let mut grad = net.zeros_like();
    net.loss_and_grad(&batch, &mut grad);
    let analytic: Vec<f64> = grad.params().copied().collect();
    let mut probe = net.clone();
    let h = 1e-6;
    let mut diff = 0.0;
    let mut norm_a = 0.0;
    let mut norm_n = 0.0;
    for (k, a) in analytic.iter().enumerate() {
        let orig = *probe.params_mut().nth(k).unwrap();
        *probe.params_mut().nth(k).unwrap() = orig + h;
        let up = probe.loss(&batch).loss;
        *probe.params_mut().nth(k).unwrap() = orig - h;
        let down = probe.loss(&batch).loss;
        *probe.params_mut().nth(k).unwrap() = orig;
        let num = (up - down) / (2.0 * h);
        diff += (a - num).powi(2);
        norm_a += a * a;
        norm_n += num * num;
    }
    diff.sqrt() / (norm_a.sqrt() + norm_n.sqrt())
}

