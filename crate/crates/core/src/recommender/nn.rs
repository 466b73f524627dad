//! Fully connected networks with ReLU hidden units and manual backprop.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `inputs x outputs`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    /// Glorot-uniform weights, zero bias.
    pub fn new<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let w = Array2::from_shape_fn((inputs, outputs), |_| rng.gen_range(-limit..limit));
        Self {
            w,
            b: Array1::zeros(outputs),
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            w: Array2::zeros(self.w.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Activations kept from a forward pass: the input of every layer.
pub struct MlpTrace {
    inputs: Vec<Array2<f64>>,
}

impl Mlp {
    /// `sizes = [input, hidden.., output]`
    pub fn new<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        Self {
            layers: sizes
                .windows(2)
                .map(|w| Dense::new(w[0], w[1], rng))
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(Dense::zeros_like).collect(),
        }
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().unwrap().w.ncols()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        self.forward_traced(x).0
    }

    pub fn forward_traced(&self, x: &Array2<f64>) -> (Array2<f64>, MlpTrace) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = h.dot(&layer.w);
            z += &layer.b;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            inputs.push(std::mem::replace(&mut h, z));
        }
        (h, MlpTrace { inputs })
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to the network input.
    pub fn backward(&self, trace: &MlpTrace, d_out: Array2<f64>, grad: &mut Mlp) -> Array2<f64> {
        let mut d = d_out;
        for i in (0..self.layers.len()).rev() {
            let input = &trace.inputs[i];
            grad.layers[i].w += &input.t().dot(&d);
            grad.layers[i].b += &d.sum_axis(Axis(0));
            let mut d_in = d.dot(&self.layers[i].w.t());
            if i > 0 {
                // input = relu(pre-activation) of the previous layer.
                d_in.zip_mut_with(input, |g, &a| if a <= 0.0 { *g = 0.0 });
            }
            d = d_in;
        }
        d
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(l.b.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.w.iter_mut().chain(l.b.iter_mut()))
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Mlp::new(&[4, 5, 3], &mut rng);
        let x = Array2::from_shape_fn((2, 4), |_| rng.gen_range(-1.0..1.0));
        let target = Array2::from_shape_fn((2, 3), |_| rng.gen_range(-1.0..1.0));
        let loss = |net: &Mlp| {
            let y = net.forward(&x);
            0.5 * (&y - &target).mapv(|v| v * v).sum()
        };
        let (y, trace) = net.forward_traced(&x);
        let mut grad = net.zeros_like();
        net.backward(&trace, &y - &target, &mut grad);
        let analytic: Vec<f64> = grad.params().copied().collect();
        let h = 1e-6;
        for (k, &g) in analytic.iter().enumerate() {
            let orig = *net.params_mut().nth(k).unwrap();
            *net.params_mut().nth(k).unwrap() = orig + h;
            let up = loss(&net);
            *net.params_mut().nth(k).unwrap() = orig - h;
            let down = loss(&net);
            *net.params_mut().nth(k).unwrap() = orig;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - g).abs() < 1e-7, "param {k}: fd {fd} vs {g}");
        }
    }
}
