//! The ReLU network that estimates the conditional expected value
//! `EV(y, a')`, its exact parameter gradient, the ADAM optimizer and
//! supervised pretraining against the rational benchmark.

mod adam;
mod checkpoint;
mod pretrain;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use pretrain::{pretrain, PretrainConfig, PretrainReport};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{IncomeState, ModelParams, WeightInit};

/// Shape of one affine layer, `n_out x n_in`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub n_in: usize,
    pub n_out: usize,
}

/// Fully connected network with ReLU hidden layers and an affine output.
///
/// Parameters live in one flat vector `phi`: every weight matrix in layer
/// order, each stored column-major (`vec(A)`), followed by every bias vector
/// in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct EVModel {
    shapes: Vec<LayerShape>,
    weight_offsets: Vec<usize>,
    bias_offsets: Vec<usize>,
    phi: Vec<f64>,
    income_values: [f64; 2],
}

/// Activations saved by a forward pass for backpropagation.
struct Tape {
    /// Input to each layer (length n_layers).
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of each hidden layer.
    pre: Vec<Vec<f64>>,
}

impl EVModel {
    /// Zero-initialized network with `hidden_layers` ReLU layers of width
    /// `hidden_dim`. `income_values` are the network inputs encoding the
    /// employed and unemployed states.
    pub fn zeros(hidden_dim: usize, hidden_layers: usize, income_values: [f64; 2]) -> Self {
        let mut shapes = Vec::with_capacity(hidden_layers + 1);
        let mut n_in = 2;
        for _ in 0..hidden_layers {
            shapes.push(LayerShape {
                n_in,
                n_out: hidden_dim,
            });
            n_in = hidden_dim;
        }
        shapes.push(LayerShape { n_in, n_out: 1 });
        let mut weight_offsets = Vec::with_capacity(shapes.len());
        let mut off = 0;
        for s in &shapes {
            weight_offsets.push(off);
            off += s.n_in * s.n_out;
        }
        let mut bias_offsets = Vec::with_capacity(shapes.len());
        for s in &shapes {
            bias_offsets.push(off);
            off += s.n_out;
        }
        EVModel {
            shapes,
            weight_offsets,
            bias_offsets,
            phi: vec![0.0; off],
            income_values,
        }
    }

    /// Network sized from `p` with all parameters zero.
    pub fn for_params(p: &ModelParams) -> Self {
        Self::zeros(
            p.hidden_dim,
            p.hidden_layers,
            [p.income_employed, p.income_unemployed],
        )
    }

    /// Gaussian weights (scale per `init`), zero biases.
    pub fn random<R: Rng + ?Sized>(p: &ModelParams, init: WeightInit, rng: &mut R) -> Self {
        let mut m = Self::for_params(p);
        for l in 0..m.shapes.len() {
            let s = m.shapes[l];
            let std = match init {
                WeightInit::Sqrt2 => 2f64.sqrt(),
                WeightInit::He => (2.0 / s.n_in as f64).sqrt(),
            };
            let normal = Normal::new(0.0, std).expect("finite std");
            let off = m.weight_offsets[l];
            for w in &mut m.phi[off..off + s.n_in * s.n_out] {
                *w = normal.sample(rng);
            }
        }
        m
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    pub fn hidden_dim(&self) -> usize {
        self.shapes[0].n_out
    }

    pub fn hidden_layers(&self) -> usize {
        self.shapes.len() - 1
    }

    pub fn income_values(&self) -> [f64; 2] {
        self.income_values
    }

    pub fn n_params(&self) -> usize {
        self.phi.len()
    }

    /// The flat parameter vector.
    pub fn params(&self) -> &[f64] {
        &self.phi
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.phi
    }

    /// Copy of the flat parameter vector.
    pub fn flatten(&self) -> Vec<f64> {
        self.phi.clone()
    }

    /// Replace all parameters from a flat vector laid out as [`Self::flatten`].
    pub fn set_params(&mut self, phi: &[f64]) -> Result<()> {
        if phi.len() != self.phi.len() {
            return Err(Error::ParamLength {
                expected: self.phi.len(),
                got: phi.len(),
            });
        }
        self.phi.copy_from_slice(phi);
        Ok(())
    }

    /// Build a model of the given shape from a flat vector.
    pub fn unflatten(
        hidden_dim: usize,
        hidden_layers: usize,
        income_values: [f64; 2],
        phi: &[f64],
    ) -> Result<Self> {
        let mut m = Self::zeros(hidden_dim, hidden_layers, income_values);
        m.set_params(phi)?;
        Ok(m)
    }

    /// Column-major weight matrix of layer `l`.
    pub fn weights(&self, l: usize) -> &[f64] {
        let s = self.shapes[l];
        let off = self.weight_offsets[l];
        &self.phi[off..off + s.n_in * s.n_out]
    }

    pub fn weights_mut(&mut self, l: usize) -> &mut [f64] {
        let s = self.shapes[l];
        let off = self.weight_offsets[l];
        &mut self.phi[off..off + s.n_in * s.n_out]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        let s = self.shapes[l];
        let off = self.bias_offsets[l];
        &self.phi[off..off + s.n_out]
    }

    pub fn bias_mut(&mut self, l: usize) -> &mut [f64] {
        let s = self.shapes[l];
        let off = self.bias_offsets[l];
        &mut self.phi[off..off + s.n_out]
    }

    pub fn weight_offset(&self, l: usize) -> usize {
        self.weight_offsets[l]
    }

    pub fn bias_offset(&self, l: usize) -> usize {
        self.bias_offsets[l]
    }

    pub fn is_finite(&self) -> bool {
        self.phi.iter().all(|x| x.is_finite())
    }

    #[inline]
    pub fn income_input(&self, y: IncomeState) -> f64 {
        self.income_values[y.index()]
    }

    /// `out = A x + b`, with `A` column-major.
    fn affine(&self, l: usize, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(self.bias(l));
        let n_out = self.shapes[l].n_out;
        let a = self.weights(l);
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let col = &a[j * n_out..(j + 1) * n_out];
            for (o, &w) in out.iter_mut().zip(col) {
                *o += w * xj;
            }
        }
    }

    /// Network output for a raw input pair `(income value, savings)`.
    pub fn forward_raw(&self, y_value: f64, a_next: f64) -> f64 {
        let mut x = vec![y_value, a_next];
        let last = self.shapes.len() - 1;
        for l in 0..last {
            let mut z = vec![0.0; self.shapes[l].n_out];
            self.affine(l, &x, &mut z);
            for v in &mut z {
                *v = v.max(0.0);
            }
            x = z;
        }
        let mut out = [0.0];
        self.affine(last, &x, &mut out);
        out[0]
    }

    /// Estimated `EV(y, a_next)`.
    pub fn forward(&self, y: IncomeState, a_next: f64) -> f64 {
        self.forward_raw(self.income_input(y), a_next)
    }

    fn forward_tape(&self, y_value: f64, a_next: f64) -> (f64, Tape) {
        let last = self.shapes.len() - 1;
        let mut inputs = Vec::with_capacity(self.shapes.len());
        let mut pre = Vec::with_capacity(last);
        let mut x = vec![y_value, a_next];
        for l in 0..last {
            let mut z = vec![0.0; self.shapes[l].n_out];
            self.affine(l, &x, &mut z);
            let h: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
            inputs.push(std::mem::replace(&mut x, h));
            pre.push(z);
        }
        let mut out = [0.0];
        self.affine(last, &x, &mut out);
        inputs.push(x);
        (out[0], Tape { inputs, pre })
    }

    /// Accumulate `scale * d out / d phi` into `grad` and return the output.
    /// The ReLU derivative is taken as 0 at exactly 0.
    pub fn accumulate_grad_raw(&self, y_value: f64, a_next: f64, scale: f64, grad: &mut [f64]) -> f64 {
        self.accumulate_grad_with(y_value, a_next, |_| scale, grad)
    }

    /// Like [`Self::accumulate_grad_raw`], with the scale computed from the
    /// network output (e.g. a loss derivative).
    pub fn accumulate_grad_with<F: FnOnce(f64) -> f64>(
        &self,
        y_value: f64,
        a_next: f64,
        scale: F,
        grad: &mut [f64],
    ) -> f64 {
        debug_assert_eq!(grad.len(), self.phi.len());
        let (out, tape) = self.forward_tape(y_value, a_next);
        let last = self.shapes.len() - 1;
        let mut delta = vec![scale(out)];
        for l in (0..=last).rev() {
            let s = self.shapes[l];
            let x = &tape.inputs[l];
            let woff = self.weight_offsets[l];
            let boff = self.bias_offsets[l];
            for (j, &xj) in x.iter().enumerate() {
                if xj == 0.0 {
                    continue;
                }
                let g = &mut grad[woff + j * s.n_out..woff + (j + 1) * s.n_out];
                for (gi, &d) in g.iter_mut().zip(&delta) {
                    *gi += d * xj;
                }
            }
            for (gi, &d) in grad[boff..boff + s.n_out].iter_mut().zip(&delta) {
                *gi += d;
            }
            if l == 0 {
                break;
            }
            // Propagate through A^l and the ReLU of layer l - 1.
            let a = self.weights(l);
            let z = &tape.pre[l - 1];
            let mut next = vec![0.0; s.n_in];
            for (j, nj) in next.iter_mut().enumerate() {
                if z[j] <= 0.0 {
                    continue;
                }
                let col = &a[j * s.n_out..(j + 1) * s.n_out];
                *nj = col.iter().zip(&delta).map(|(w, d)| w * d).sum();
            }
            delta = next;
        }
        out
    }

    /// Gradient of `EV(y, a_next)` with respect to every parameter.
    pub fn grad_params(&self, y: IncomeState, a_next: f64) -> Vec<f64> {
        let mut g = vec![0.0; self.phi.len()];
        self.accumulate_grad_raw(self.income_input(y), a_next, 1.0, &mut g);
        g
    }

    /// Evaluate the network at every point of an ascending slice of savings
    /// levels for a fixed income state.
    ///
    /// Along a line in input space the network is piecewise linear. The walk
    /// fixes the activation pattern at the current point, carries each unit's
    /// pre-activation as `P + Q s`, and jumps to the nearest point where any
    /// unit changes sign. Values agree with [`Self::forward`] to rounding.
    pub fn eval_line(&self, y: IncomeState, points: &[f64], out: &mut [f64]) {
        self.eval_line_raw(self.income_input(y), points, out)
    }

    pub fn eval_line_raw(&self, y_value: f64, points: &[f64], out: &mut [f64]) {
        assert_eq!(points.len(), out.len());
        if points.is_empty() {
            return;
        }
        debug_assert!(points.windows(2).all(|w| w[0] <= w[1]));
        let hi = points[points.len() - 1];
        let last = self.shapes.len() - 1;
        let width = self.shapes.iter().map(|s| s.n_out).max().unwrap_or(1).max(2);
        let mut p_in = vec![0.0; width];
        let mut q_in = vec![0.0; width];
        let mut p_out = vec![0.0; width];
        let mut q_out = vec![0.0; width];

        let mut s = points[0];
        let mut idx = 0;
        while idx < points.len() {
            p_in[0] = y_value;
            p_in[1] = 0.0;
            q_in[0] = 0.0;
            q_in[1] = 1.0;
            let mut n_in = 2;
            let mut next_break = f64::INFINITY;
            let eps_s = 1e-12 * (1.0 + s.abs());
            for l in 0..last {
                let n_out = self.shapes[l].n_out;
                self.affine(l, &p_in[..n_in], &mut p_out[..n_out]);
                self.linear(l, &q_in[..n_in], &mut q_out[..n_out]);
                for k in 0..n_out {
                    let (zp, zq) = (p_out[k], q_out[k]);
                    let val = zp + zq * s;
                    let tol = 1e-12 * (1.0 + zp.abs() + (zq * s).abs());
                    let active = val > tol || (val.abs() <= tol && zq > 0.0);
                    if zq != 0.0 {
                        let root = -zp / zq;
                        if root > s + eps_s && root < next_break {
                            next_break = root;
                        }
                    }
                    if !active {
                        p_out[k] = 0.0;
                        q_out[k] = 0.0;
                    }
                }
                std::mem::swap(&mut p_in, &mut p_out);
                std::mem::swap(&mut q_in, &mut q_out);
                n_in = n_out;
            }
            let mut c = [0.0];
            let mut d = [0.0];
            self.affine(last, &p_in[..n_in], &mut c);
            self.linear(last, &q_in[..n_in], &mut d);
            let seg_end = next_break.min(hi);
            while idx < points.len() && points[idx] <= seg_end {
                out[idx] = c[0] + d[0] * points[idx];
                idx += 1;
            }
            if idx < points.len() {
                s = if next_break.is_finite() { next_break } else { points[idx] };
            }
        }
    }

    /// `out = A x` (no bias).
    fn linear(&self, l: usize, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let n_out = self.shapes[l].n_out;
        let a = self.weights(l);
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let col = &a[j * n_out..(j + 1) * n_out];
            for (o, &w) in out.iter_mut().zip(col) {
                *o += w * xj;
            }
        }
    }
}

/// Free-function form of [`EVModel::forward`].
pub fn forward(model: &EVModel, y: IncomeState, a_next: f64) -> f64 {
    model.forward(y, a_next)
}

/// Free-function form of [`EVModel::grad_params`].
pub fn grad_params(model: &EVModel, y: IncomeState, a_next: f64) -> Vec<f64> {
    model.grad_params(y, a_next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::linspace;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_params() -> ModelParams {
        ModelParams {
            hidden_dim: 12,
            ..ModelParams::default()
        }
    }

    impl EVModel {
        fn pattern(&self, y: IncomeState, a: f64) -> Vec<bool> {
            let (_, tape) = self.forward_tape(self.income_input(y), a);
            tape.pre.iter().flatten().map(|&z| z > 0.0).collect()
        }
    }

    #[test]
    fn layout_and_shapes() {
        let m = EVModel::for_params(&ModelParams::default());
        assert_eq!(m.shapes().len(), 3);
        assert_eq!(m.weights(0).len(), 160);
        assert_eq!(m.weights(1).len(), 6400);
        assert_eq!(m.weights(2).len(), 80);
        assert_eq!(m.n_params(), 160 + 6400 + 80 + 80 + 80 + 1);
        assert_eq!(m.bias_offset(0), 6640);
    }

    #[test]
    fn constant_network() {
        let mut m = EVModel::for_params(&small_params());
        m.bias_mut(2)[0] = -3.25;
        for a in [0.0, 1.0, 4.5, 7.0] {
            assert_eq!(m.forward(IncomeState::Employed, a), -3.25);
        }
        let g = m.grad_params(IncomeState::Unemployed, 2.0);
        let b2 = m.bias_offset(2);
        assert_eq!(g[b2], 1.0);
        assert!(g.iter().enumerate().all(|(i, &v)| i == b2 || v == 0.0));
    }

    #[test]
    fn relu_clips_negative_preactivation() {
        // One hidden unit with pre-activation a' - 1, read out directly.
        let mut m = EVModel::zeros(1, 1, [1.0, 0.5]);
        m.weights_mut(0).copy_from_slice(&[0.0, 1.0]);
        m.bias_mut(0)[0] = -1.0;
        m.weights_mut(1)[0] = 1.0;
        assert_eq!(m.forward_raw(1.0, 0.0), 0.0);
        assert_eq!(m.forward_raw(1.0, 3.0), 2.0);
    }

    #[test]
    fn pass_through_network() {
        // A^0 = [[0, 1], [0, 0]] routes a' through the first unit.
        let mut m = EVModel::zeros(2, 2, [1.0, 0.5]);
        // column-major: column 0 (y) = [0, 0], column 1 (a') = [1, 0]
        m.weights_mut(0).copy_from_slice(&[0.0, 0.0, 1.0, 0.0]);
        m.weights_mut(1).copy_from_slice(&[1.0, 0.0, 0.0, 0.0]);
        m.weights_mut(2).copy_from_slice(&[1.0, 0.0]);
        for a in [0.0, 0.3, 2.0, 4.5] {
            assert_eq!(m.forward(IncomeState::Employed, a), a);
        }
    }

    #[test]
    fn zero_input_kills_first_layer_column() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = EVModel::random(&small_params(), WeightInit::He, &mut rng);
        let g = m.grad_params(IncomeState::Employed, 0.0);
        let n = m.hidden_dim();
        assert!(g[n..2 * n].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn set_params_checks_length() {
        let mut m = EVModel::for_params(&small_params());
        assert!(matches!(
            m.set_params(&[1.0, 2.0]),
            Err(Error::ParamLength { .. })
        ));
    }

    #[test]
    fn line_walk_matches_pointwise_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for init in [WeightInit::Sqrt2, WeightInit::He] {
            let m = EVModel::random(&ModelParams::default(), init, &mut rng);
            let pts = linspace(0.0, 5.3, 3001);
            for y in IncomeState::ALL {
                let mut out = vec![0.0; pts.len()];
                m.eval_line(y, &pts, &mut out);
                for (&a, &v) in pts.iter().zip(&out) {
                    let f = m.forward(y, a);
                    assert!((f - v).abs() <= 1e-9 * (1.0 + f.abs()), "{a}: {f} vs {v}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn flatten_round_trip(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = EVModel::random(&small_params(), WeightInit::Sqrt2, &mut rng);
            let back = EVModel::unflatten(12, 2, m.income_values(), &m.flatten()).unwrap();
            prop_assert_eq!(back, m);
        }

        #[test]
        fn piecewise_linear_in_savings(seed in 0u64..500, a in 0.0f64..4.4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = EVModel::random(&small_params(), WeightInit::He, &mut rng);
            let d = 1e-3;
            let pts = [a, a + d, a + 2.0 * d];
            let patterns: Vec<Vec<bool>> = pts.iter().map(|&x| m.pattern(IncomeState::Employed, x)).collect();
            prop_assume!(patterns[0] == patterns[1] && patterns[1] == patterns[2]);
            let f: Vec<f64> = pts.iter().map(|&x| m.forward(IncomeState::Employed, x)).collect();
            prop_assert!((f[2] - 2.0 * f[1] + f[0]).abs() < 1e-10);
        }
    }
}
