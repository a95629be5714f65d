//! Separable cost-to-go network `F1(h)·σ(F2(x, y)) + F3(h)`.
//!
//! `h = T − t` is the number of remaining steps. `F1` and `F3` are quadratics in
//! `h` and `F2` is a two-hidden-layer ReLU MLP of width 8 on the concatenated
//! state `(x, y) ∈ R^{2d}`. All parameters live in one flat vector:
//!
//! ```text
//! [ f1 (3) | f3 (3) | W0 (8×2d) | b1 (8) | W1 (8×8) | b2 (8) | w2 (8) | b3 (1) ]
//! ```
//!
//! with weight matrices row-major (one row per output unit).

use rand::Rng;

/// Hidden width of both MLP layers.
pub const HIDDEN: usize = 8;

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn horizon_features(h: f64) -> [f64; 3] {
    [1.0, h, h * h]
}

/// Offsets of each parameter block.
#[derive(Debug, Clone, Copy)]
struct Layout {
    d: usize,
    w0: usize,
    b1: usize,
    w1: usize,
    b2: usize,
    w2: usize,
    b3: usize,
    len: usize,
}

impl Layout {
    fn new(d: usize) -> Self {
        let w0 = 6;
        let b1 = w0 + HIDDEN * 2 * d;
        let w1 = b1 + HIDDEN;
        let b2 = w1 + HIDDEN * HIDDEN;
        let w2 = b2 + HIDDEN;
        let b3 = w2 + HIDDEN;
        Self {
            d,
            w0,
            b1,
            w1,
            b2,
            w2,
            b3,
            len: b3 + 1,
        }
    }
}

/// Intermediate values of one forward pass, kept for backpropagation.
struct Trace {
    u1: [f64; HIDDEN],
    a1: [f64; HIDDEN],
    u2: [f64; HIDDEN],
    a2: [f64; HIDDEN],
    s: f64,
    phi: [f64; 3],
    f1: f64,
    out: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparableValueNet {
    layout_d: usize,
    params: Vec<f64>,
}

/// One regression example: remaining steps, state pair and target.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub h: usize,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub target: f64,
}

impl SeparableValueNet {
    /// Number of parameters for state dimension `d`.
    pub fn num_params(d: usize) -> usize {
        Layout::new(d).len
    }

    /// All parameters zero: the network outputs 0 everywhere.
    pub fn zeros(d: usize) -> Self {
        Self {
            layout_d: d,
            params: vec![0.0; Self::num_params(d)],
        }
    }

    /// MLP weights uniform in `[−1/√fan_in, 1/√fan_in]`; biases and the `F1`,
    /// `F3` coefficients zero.
    pub fn init(d: usize, rng: &mut impl Rng) -> Self {
        let mut net = Self::zeros(d);
        let l = Layout::new(d);
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut net.params[range] {
                *p = rng.random_range(-bound..=bound);
            }
        };
        fill(l.w0..l.b1, 2 * d);
        fill(l.w1..l.b2, HIDDEN);
        fill(l.w2..l.b3, HIDDEN);
        net
    }

    /// Wraps an existing parameter vector.
    pub fn from_params(d: usize, params: Vec<f64>) -> Option<Self> {
        (params.len() == Self::num_params(d)).then_some(Self { layout_d: d, params })
    }

    pub fn dim(&self) -> usize {
        self.layout_d
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Coefficients `(a0, a1, a2)` of `F1(h) = a0 + a1 h + a2 h²`.
    pub fn f1_coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.params[0..3]
    }

    /// Coefficients of `F3`.
    pub fn f3_coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.params[3..6]
    }

    /// Pre-sigmoid MLP output `F2(x, y)`.
    pub fn mlp_logit(&self, x: &[f64], y: &[f64]) -> f64 {
        let l = Layout::new(self.layout_d);
        let p = &self.params;
        let d = l.d;
        let mut a1 = [0.0; HIDDEN];
        for (k, a) in a1.iter_mut().enumerate() {
            let row = &p[l.w0 + k * 2 * d..l.w0 + (k + 1) * 2 * d];
            let u = p[l.b1 + k] + dot(&row[..d], x) + dot(&row[d..], y);
            *a = u.max(0.0);
        }
        let mut z = p[l.b3];
        for k in 0..HIDDEN {
            let row = &p[l.w1 + k * HIDDEN..l.w1 + (k + 1) * HIDDEN];
            let u = p[l.b2 + k] + dot(row, &a1);
            z += p[l.w2 + k] * u.max(0.0);
        }
        z
    }

    /// `F1(h)·σ(F2(x, y)) + F3(h)`.
    pub fn forward(&self, h: usize, x: &[f64], y: &[f64]) -> f64 {
        let (f1, f3) = self.horizon_terms(h as f64);
        f1 * sigmoid(self.mlp_logit(x, y)) + f3
    }

    fn horizon_terms(&self, h: f64) -> (f64, f64) {
        let phi = horizon_features(h);
        (dot(&self.params[0..3], &phi), dot(&self.params[3..6], &phi))
    }

    /// Writes `forward(h, x_i, y_j)` for all pairs into the row-major `out`.
    ///
    /// `xs` and `ys` hold `d` coordinates per point. The first layer is split
    /// into its `x` and `y` halves, so each pair costs one `8×8` product.
    pub fn forward_pairs(&self, h: usize, xs: &[f64], ys: &[f64], out: &mut [f64]) {
        let l = Layout::new(self.layout_d);
        let d = l.d;
        let p = &self.params;
        let (n, m) = (xs.len() / d, ys.len() / d);
        assert_eq!(out.len(), n * m);
        let (f1, f3) = self.horizon_terms(h as f64);
        let project = |pts: &[f64], offset: usize, bias: bool| -> Vec<[f64; HIDDEN]> {
            pts.chunks_exact(d)
                .map(|pt| {
                    let mut acc = [0.0; HIDDEN];
                    for (k, a) in acc.iter_mut().enumerate() {
                        let row = &p[l.w0 + k * 2 * d + offset..l.w0 + k * 2 * d + offset + d];
                        *a = dot(row, pt) + if bias { p[l.b1 + k] } else { 0.0 };
                    }
                    acc
                })
                .collect()
        };
        let ax = project(xs, 0, true);
        let by = project(ys, d, false);
        let w1 = &p[l.w1..l.b2];
        let b2 = &p[l.b2..l.w2];
        let w2 = &p[l.w2..l.b3];
        let b3 = p[l.b3];
        for (i, a) in ax.iter().enumerate() {
            let row_out = &mut out[i * m..(i + 1) * m];
            for (j, b) in by.iter().enumerate() {
                let mut a1 = [0.0; HIDDEN];
                for k in 0..HIDDEN {
                    a1[k] = (a[k] + b[k]).max(0.0);
                }
                let mut z = b3;
                for k in 0..HIDDEN {
                    let row = &w1[k * HIDDEN..(k + 1) * HIDDEN];
                    let mut u = b2[k];
                    for r in 0..HIDDEN {
                        u += row[r] * a1[r];
                    }
                    z += w2[k] * u.max(0.0);
                }
                row_out[j] = f1 * sigmoid(z) + f3;
            }
        }
    }

    fn trace(&self, h: usize, x: &[f64], y: &[f64]) -> Trace {
        let l = Layout::new(self.layout_d);
        let d = l.d;
        let p = &self.params;
        let mut t = Trace {
            u1: [0.0; HIDDEN],
            a1: [0.0; HIDDEN],
            u2: [0.0; HIDDEN],
            a2: [0.0; HIDDEN],
            s: 0.0,
            phi: horizon_features(h as f64),
            f1: 0.0,
            out: 0.0,
        };
        for k in 0..HIDDEN {
            let row = &p[l.w0 + k * 2 * d..l.w0 + (k + 1) * 2 * d];
            t.u1[k] = p[l.b1 + k] + dot(&row[..d], x) + dot(&row[d..], y);
            t.a1[k] = t.u1[k].max(0.0);
        }
        let mut z = p[l.b3];
        for k in 0..HIDDEN {
            let row = &p[l.w1 + k * HIDDEN..l.w1 + (k + 1) * HIDDEN];
            t.u2[k] = p[l.b2 + k] + dot(row, &t.a1);
            t.a2[k] = t.u2[k].max(0.0);
            z += p[l.w2 + k] * t.a2[k];
        }
        t.s = sigmoid(z);
        t.f1 = dot(&p[0..3], &t.phi);
        t.out = t.f1 * t.s + dot(&p[3..6], &t.phi);
        t
    }

    /// Adds `g · ∂forward/∂θ` at one example to `grad`.
    fn backprop(&self, x: &[f64], y: &[f64], t: &Trace, g: f64, grad: &mut [f64]) {
        let l = Layout::new(self.layout_d);
        let d = l.d;
        let p = &self.params;
        for k in 0..3 {
            grad[k] += g * t.s * t.phi[k];
            grad[3 + k] += g * t.phi[k];
        }
        let dz = g * t.f1 * t.s * (1.0 - t.s);
        grad[l.b3] += dz;
        let mut du2 = [0.0; HIDDEN];
        for k in 0..HIDDEN {
            grad[l.w2 + k] += dz * t.a2[k];
            du2[k] = if t.u2[k] > 0.0 { dz * p[l.w2 + k] } else { 0.0 };
        }
        let mut da1 = [0.0; HIDDEN];
        for k in 0..HIDDEN {
            grad[l.b2 + k] += du2[k];
            for r in 0..HIDDEN {
                grad[l.w1 + k * HIDDEN + r] += du2[k] * t.a1[r];
                da1[r] += du2[k] * p[l.w1 + k * HIDDEN + r];
            }
        }
        for k in 0..HIDDEN {
            let du1 = if t.u1[k] > 0.0 { da1[k] } else { 0.0 };
            grad[l.b1 + k] += du1;
            let row = l.w0 + k * 2 * d;
            for c in 0..d {
                grad[row + c] += du1 * x[c];
                grad[row + d + c] += du1 * y[c];
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Huber-type loss: quadratic within `τ` of the target, linear beyond.
pub fn smooth_l1(f: f64, v: f64, tau: f64) -> f64 {
    let r = (f - v).abs();
    if r < tau {
        r * r / (2.0 * tau)
    } else {
        r - tau / 2.0
    }
}

/// Derivative of [`smooth_l1`] in `f`.
pub fn smooth_l1_grad(f: f64, v: f64, tau: f64) -> f64 {
    let r = f - v;
    if r.abs() < tau {
        r / tau
    } else {
        r.signum()
    }
}

/// Mean smooth-L1 loss over `batch` and its exact gradient in the parameters.
pub fn grad_loss(net: &SeparableValueNet, batch: &[Example<'_>], tau: f64) -> (f64, Vec<f64>) {
    assert!(!batch.is_empty(), "empty minibatch");
    let mut grad = vec![0.0; net.params.len()];
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for ex in batch {
        let t = net.trace(ex.h, ex.x, ex.y);
        loss += smooth_l1(t.out, ex.target, tau);
        let g = scale * smooth_l1_grad(t.out, ex.target, tau);
        if g != 0.0 {
            net.backprop(ex.x, ex.y, &t, g, &mut grad);
        }
    }
    (loss * scale, grad)
}

/// Mean smooth-L1 loss without the gradient.
pub fn mean_loss(net: &SeparableValueNet, batch: &[Example<'_>], tau: f64) -> f64 {
    batch.iter().map(|ex| smooth_l1(net.forward(ex.h, ex.x, ex.y), ex.target, tau)).sum::<f64>() / batch.len() as f64
}
