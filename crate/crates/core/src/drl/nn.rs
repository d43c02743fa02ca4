//! Dense ReLU networks with exact backpropagation, and Adam.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `in × out`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Fully connected network: ReLU on every hidden layer, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<Dense>,
}

impl MlpGrads {
    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(l.b.iter()).copied())
            .collect()
    }
}

impl Mlp {
    /// Uniform fan-in initialization, `U(−1/√fan_in, 1/√fan_in)` for weights
    /// and biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let layers = sizes
            .windows(2)
            .map(|s| {
                let bound = 1.0 / (s[0] as f64).sqrt();
                Dense {
                    w: Array2::from_shape_simple_fn((s[0], s[1]), || rng.random_range(-bound..bound)),
                    b: Array1::from_shape_simple_fn(s[1], || rng.random_range(-bound..bound)),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        Self {
            layers: sizes
                .windows(2)
                .map(|s| Dense {
                    w: Array2::zeros((s[0], s[1])),
                    b: Array1::zeros(s[1]),
                })
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().w.ncols()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.w.ncols()));
        s
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut h = x.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            h = h.dot(&l.w) + &l.b;
            if i < last {
                h.mapv_inplace(|v| v.max(0.0));
            }
        }
        h
    }

    pub fn forward_cached(&self, x: ArrayView2<'_, f64>) -> (Array2<f64>, ForwardCache) {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut h = x.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            let z = h.dot(&l.w) + &l.b;
            inputs.push(h);
            if i < last {
                h = z.mapv(|v| v.max(0.0));
                pre.push(z);
            } else {
                h = z;
            }
        }
        (h, ForwardCache { inputs, pre })
    }

    /// Gradients of a scalar loss given `∂L/∂output`; also returns `∂L/∂input`.
    pub fn backward(&self, cache: &ForwardCache, grad_out: Array2<f64>) -> (MlpGrads, Array2<f64>) {
        let n = self.layers.len();
        let mut grads: Vec<Dense> = Vec::with_capacity(n);
        let mut g = grad_out;
        for i in (0..n).rev() {
            if i < n - 1 {
                Zip::from(&mut g).and(&cache.pre[i]).for_each(|gv, &z| {
                    if z <= 0.0 {
                        *gv = 0.0;
                    }
                });
            }
            let l = &self.layers[i];
            let dw = cache.inputs[i].t().dot(&g);
            let db = g.sum_axis(Axis(0));
            let g_in = g.dot(&l.w.t());
            grads.push(Dense { w: dw, b: db });
            g = g_in;
        }
        grads.reverse();
        (MlpGrads { layers: grads }, g)
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(l.b.iter()).copied())
            .collect()
    }

    /// Mutable access to parameter `k` in [`Mlp::flat_params`] order.
    pub fn param_mut(&mut self, mut k: usize) -> &mut f64 {
        for l in &mut self.layers {
            if k < l.w.len() {
                let cols = l.w.ncols();
                return &mut l.w[[k / cols, k % cols]];
            }
            k -= l.w.len();
            if k < l.b.len() {
                return &mut l.b[k];
            }
            k -= l.b.len();
        }
        panic!("parameter index out of range");
    }

    /// `self ← τ·online + (1 − τ)·self`.
    pub fn polyak_from(&mut self, online: &Mlp, tau: f64) {
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            Zip::from(&mut t.w).and(&o.w).for_each(|t, &o| *t = tau * o + (1.0 - tau) * *t);
            Zip::from(&mut t.b).and(&o.b).for_each(|t, &o| *t = tau * o + (1.0 - tau) * *t);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub m: MlpGrads,
    pub v: MlpGrads,
    pub t: u64,
}

impl Adam {
    pub fn new(net: &Mlp) -> Self {
        let zeros = || MlpGrads {
            layers: net
                .layers
                .iter()
                .map(|l| Dense {
                    w: Array2::zeros(l.w.raw_dim()),
                    b: Array1::zeros(l.b.raw_dim()),
                })
                .collect(),
        };
        Self {
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &MlpGrads, cfg: &AdamConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let mh = *m / bc1;
            let vh = *v / bc2;
            *p -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
        };
        for (((l, m), v), g) in net
            .layers
            .iter_mut()
            .zip(&mut self.m.layers)
            .zip(&mut self.v.layers)
            .zip(&grads.layers)
        {
            Zip::from(&mut l.w)
                .and(&mut m.w)
                .and(&mut v.w)
                .and(&g.w)
                .for_each(|p, m, v, &g| update(p, m, v, g));
            Zip::from(&mut l.b)
                .and(&mut m.b)
                .and(&mut v.b)
                .and(&g.b)
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
    }
}

/// Adam state for a single scalar parameter.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScalarAdam {
    pub m: f64,
    pub v: f64,
    pub t: u64,
}

impl ScalarAdam {
    pub fn step(&mut self, p: &mut f64, g: f64, cfg: &AdamConfig) {
        self.t += 1;
        self.m = cfg.beta1 * self.m + (1.0 - cfg.beta1) * g;
        self.v = cfg.beta2 * self.v + (1.0 - cfg.beta2) * g * g;
        let mh = self.m / (1.0 - cfg.beta1.powi(self.t as i32));
        let vh = self.v / (1.0 - cfg.beta2.powi(self.t as i32));
        *p -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
    }
}
