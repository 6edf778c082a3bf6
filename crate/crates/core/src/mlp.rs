//! Fully connected aggregation network with exact backpropagation and an
//! Adam optimizer.
//!
//! The network maps one feature vector to one scalar density. Everything
//! is generic over [`Scalar`] so the production path runs in `f32` while
//! the finite-difference gradient harness instantiates the identical code
//! in `f64`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use crate::error::{Result, TomoError};
use crate::math;
use crate::rng::Rng64;

/// Float abstraction: `f32` for production, `f64` for oracles.
pub trait Scalar:
    Copy
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + Send
    + Sync
    + core::fmt::Debug
    + 'static
{
    const ZERO: Self;
    const ONE: Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn erf(self) -> Self;
}

impl Scalar for f32 {
    const ZERO: f32 = 0.0;
    const ONE: f32 = 1.0;
    #[inline]
    fn from_f64(v: f64) -> f32 {
        v as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn exp(self) -> f32 {
        math::expf(self)
    }
    #[inline]
    fn erf(self) -> f32 {
        math::erff(self)
    }
}

impl Scalar for f64 {
    const ZERO: f64 = 0.0;
    const ONE: f64 = 1.0;
    #[inline]
    fn from_f64(v: f64) -> f64 {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn exp(self) -> f64 {
        math::exp(self)
    }
    #[inline]
    fn erf(self) -> f64 {
        math::erf(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Gelu,
}

impl Activation {
    #[inline]
    fn apply<S: Scalar>(self, z: S) -> S {
        match self {
            Activation::Relu => {
                if z > S::ZERO {
                    z
                } else {
                    S::ZERO
                }
            }
            Activation::Gelu => {
                // 0.5 z (1 + erf(z / sqrt(2)))
                let half = S::from_f64(0.5);
                let inv_sqrt2 = S::from_f64(core::f64::consts::FRAC_1_SQRT_2);
                half * z * (S::ONE + (z * inv_sqrt2).erf())
            }
        }
    }

    #[inline]
    fn derivative<S: Scalar>(self, z: S) -> S {
        match self {
            Activation::Relu => {
                if z > S::ZERO {
                    S::ONE
                } else {
                    S::ZERO
                }
            }
            Activation::Gelu => {
                let half = S::from_f64(0.5);
                let inv_sqrt2 = S::from_f64(core::f64::consts::FRAC_1_SQRT_2);
                let phi = S::from_f64(1.0 / math::sqrt(2.0 * core::f64::consts::PI))
                    * (-(z * z) * half).exp();
                half * (S::ONE + (z * inv_sqrt2).erf()) + z * phi
            }
        }
    }
}

/// Architecture descriptor: input width, hidden widths, activation. The
/// output is always one scalar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpArch {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl MlpArch {
    pub fn new(input_dim: usize, hidden: Vec<usize>, activation: Activation) -> Result<Self> {
        if input_dim == 0 {
            return Err(TomoError::InvalidInput(String::from(
                "input dimension must be >= 1",
            )));
        }
        if hidden.is_empty() || hidden.contains(&0) {
            return Err(TomoError::InvalidInput(String::from(
                "hidden layer widths must be nonempty and positive",
            )));
        }
        Ok(MlpArch {
            input_dim,
            hidden,
            activation,
        })
    }

    pub const fn output_dim(&self) -> usize {
        1
    }

    /// Layer widths including input and output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend_from_slice(&self.hidden);
        w.push(1);
        w
    }

    pub fn param_count(&self) -> usize {
        self.widths()
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }
}

/// One dense layer: row-major `w[out][in]` plus bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<S: Scalar = f32> {
    pub w: Vec<S>,
    pub b: Vec<S>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl<S: Scalar> Layer<S> {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Layer {
            w: vec![S::ZERO; in_dim * out_dim],
            b: vec![S::ZERO; out_dim],
            in_dim,
            out_dim,
        }
    }
}

/// All weights and biases of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<S: Scalar = f32> {
    pub arch: MlpArch,
    pub layers: Vec<Layer<S>>,
}

impl<S: Scalar> MlpParams<S> {
    pub fn zeros(arch: &MlpArch) -> Self {
        let widths = arch.widths();
        let layers = widths
            .windows(2)
            .map(|w| Layer::zeros(w[0], w[1]))
            .collect();
        MlpParams {
            arch: arch.clone(),
            layers,
        }
    }

    /// Kaiming-uniform fan-in weights and uniform `1/sqrt(fan_in)`
    /// biases, deterministic in the seed. Nonzero biases keep relu
    /// pre-activations off the exact kink.
    pub fn init(arch: &MlpArch, seed: u64) -> Self {
        let mut params = MlpParams::zeros(arch);
        let mut rng = Rng64::new(seed);
        for layer in params.layers.iter_mut() {
            let bound = math::sqrt(6.0 / layer.in_dim as f64);
            for w in layer.w.iter_mut() {
                *w = S::from_f64(rng.next_uniform(-bound, bound));
            }
            let b_bound = 1.0 / math::sqrt(layer.in_dim as f64);
            for b in layer.b.iter_mut() {
                *b = S::from_f64(rng.next_uniform(-b_bound, b_bound));
            }
        }
        params
    }

    pub fn param_count(&self) -> usize {
        self.arch.param_count()
    }

    /// Flattened parameter order: per layer, weights row-major then bias.
    pub fn for_each_param(&self, mut f: impl FnMut(S)) {
        for layer in &self.layers {
            for &w in &layer.w {
                f(w);
            }
            for &b in &layer.b {
                f(b);
            }
        }
    }

    pub fn map_params_from(&mut self, other: &MlpParams<S>, mut f: impl FnMut(S, S) -> S) {
        for (dst, src) in self.layers.iter_mut().zip(other.layers.iter()) {
            for (d, s) in dst.w.iter_mut().zip(src.w.iter()) {
                *d = f(*d, *s);
            }
            for (d, s) in dst.b.iter_mut().zip(src.b.iter()) {
                *d = f(*d, *s);
            }
        }
    }

    /// Multiplies every parameter in place.
    pub fn scale(&mut self, factor: S) {
        for layer in self.layers.iter_mut() {
            for w in layer.w.iter_mut() {
                *w = *w * factor;
            }
            for b in layer.b.iter_mut() {
                *b = *b * factor;
            }
        }
    }

    pub fn to_f64(&self) -> MlpParams<f64> {
        let mut out = MlpParams::<f64>::zeros(&self.arch);
        for (dst, src) in out.layers.iter_mut().zip(self.layers.iter()) {
            for (d, s) in dst.w.iter_mut().zip(src.w.iter()) {
                *d = s.to_f64();
            }
            for (d, s) in dst.b.iter_mut().zip(src.b.iter()) {
                *d = s.to_f64();
            }
        }
        out
    }
}

/// Scratch buffers reused across forward/backward calls.
pub struct Workspace<S: Scalar = f32> {
    /// pre-activations per layer
    zs: Vec<Vec<S>>,
    /// activations per layer (acts[0] unused; input passed separately)
    acts: Vec<Vec<S>>,
    /// backprop deltas per layer
    deltas: Vec<Vec<S>>,
}

impl<S: Scalar> Workspace<S> {
    pub fn new(arch: &MlpArch) -> Self {
        let widths = arch.widths();
        let zs = widths[1..].iter().map(|&w| vec![S::ZERO; w]).collect();
        let acts = widths[1..].iter().map(|&w| vec![S::ZERO; w]).collect();
        let deltas = widths[1..].iter().map(|&w| vec![S::ZERO; w]).collect();
        Workspace { zs, acts, deltas }
    }
}

/// Dot product over eight independent accumulators summed in a fixed
/// order: deterministic, and the lanes vectorize.
#[inline]
fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut acc = [S::ZERO; 8];
    let mut a_chunks = a.chunks_exact(8);
    let mut b_chunks = b.chunks_exact(8);
    for (ca, cb) in (&mut a_chunks).zip(&mut b_chunks) {
        for lane in 0..8 {
            acc[lane] += ca[lane] * cb[lane];
        }
    }
    let mut tail = S::ZERO;
    for (x, y) in a_chunks.remainder().iter().zip(b_chunks.remainder()) {
        tail += *x * *y;
    }
    (((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))) + tail
}

fn forward_ws<S: Scalar>(params: &MlpParams<S>, input: &[S], ws: &mut Workspace<S>) -> S {
    let n_layers = params.layers.len();
    for (l, layer) in params.layers.iter().enumerate() {
        let (prev_acts, rest) = ws.acts.split_at_mut(l);
        let cur_act = &mut rest[0];
        let zs = &mut ws.zs[l];
        let prev: &[S] = if l == 0 { input } else { &prev_acts[l - 1] };
        for o in 0..layer.out_dim {
            let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
            let z = dot(row, prev) + layer.b[o];
            zs[o] = z;
            cur_act[o] = if l + 1 == n_layers {
                z // linear output layer
            } else {
                params.arch.activation.apply(z)
            };
        }
    }
    ws.acts[n_layers - 1][0]
}

/// Forward pass reusing a caller-owned workspace; the hot path for
/// training and voxel-wise reconstruction. Dimensions are the caller's
/// responsibility.
pub fn forward_reusing<S: Scalar>(params: &MlpParams<S>, input: &[S], ws: &mut Workspace<S>) -> S {
    forward_ws(params, input, ws)
}

/// Scalar prediction for one feature vector.
pub fn mlp_forward<S: Scalar>(params: &MlpParams<S>, input: &[S]) -> Result<S> {
    if input.len() != params.arch.input_dim {
        return Err(TomoError::ShapeMismatch(format!(
            "input length {} does not match network input dimension {}",
            input.len(),
            params.arch.input_dim
        )));
    }
    let mut ws = Workspace::new(&params.arch);
    Ok(forward_ws(params, input, &mut ws))
}

/// Accumulates gradients for one sample into `grads`; returns the squared
/// error. `loss_scale` multiplies the residual (use `1` and divide by the
/// batch outside, or pass `2/B` style factors directly).
fn backward_sample<S: Scalar>(
    params: &MlpParams<S>,
    input: &[S],
    target: S,
    grads: &mut MlpParams<S>,
    ws: &mut Workspace<S>,
) -> S {
    let n_layers = params.layers.len();
    let pred = forward_ws(params, input, ws);
    let residual = pred - target;
    // d(residual^2)/dpred = 2 residual
    ws.deltas[n_layers - 1][0] = S::from_f64(2.0) * residual;
    for l in (0..n_layers).rev() {
        let layer = &params.layers[l];
        // propagate delta to the previous layer first (needs this layer's W)
        if l > 0 {
            let (head, tail) = ws.deltas.split_at_mut(l);
            let delta_out = &tail[0];
            let delta_prev = &mut head[l - 1];
            for d in delta_prev.iter_mut() {
                *d = S::ZERO;
            }
            for (row, &d) in layer.w.chunks_exact(layer.in_dim).zip(delta_out.iter()) {
                if d != S::ZERO {
                    for (dp, w) in delta_prev.iter_mut().zip(row.iter()) {
                        *dp += d * *w;
                    }
                }
            }
            let act = params.arch.activation;
            for (dp, z) in delta_prev.iter_mut().zip(ws.zs[l - 1].iter()) {
                *dp = *dp * act.derivative(*z);
            }
        }
        // accumulate this layer's gradients
        let g = &mut grads.layers[l];
        let delta_out = &ws.deltas[l];
        let prev_act: &[S] = if l == 0 { input } else { &ws.acts[l - 1] };
        for ((grow, gb), &d) in g
            .w
            .chunks_exact_mut(layer.in_dim)
            .zip(g.b.iter_mut())
            .zip(delta_out.iter())
        {
            *gb += d;
            for (gw, x) in grow.iter_mut().zip(prev_act.iter()) {
                *gw += d * *x;
            }
        }
    }
    residual * residual
}

/// Sum (not mean) of per-sample gradients and squared errors over a batch
/// stored as consecutive rows of `inputs`. Building block for the sharded
/// trainer, which normalizes after a deterministic reduce.
pub fn backward_batch_sum<S: Scalar>(
    params: &MlpParams<S>,
    inputs: &[S],
    targets: &[S],
) -> Result<(S, MlpParams<S>)> {
    let dim = params.arch.input_dim;
    if targets.is_empty() {
        return Err(TomoError::InvalidInput(String::from(
            "gradient batch must be nonempty",
        )));
    }
    if inputs.len() != dim * targets.len() {
        return Err(TomoError::ShapeMismatch(format!(
            "batch holds {} values, expected {} samples x {} features",
            inputs.len(),
            targets.len(),
            dim
        )));
    }
    let mut grads = MlpParams::zeros(&params.arch);
    let mut ws = Workspace::new(&params.arch);
    let mut sq_sum = S::ZERO;
    for (row, &t) in inputs.chunks_exact(dim).zip(targets.iter()) {
        sq_sum += backward_sample(params, row, t, &mut grads, &mut ws);
    }
    Ok((sq_sum, grads))
}

/// Mean-squared-error loss over a batch and its exact parameter gradients.
pub fn mlp_backward<S: Scalar>(
    params: &MlpParams<S>,
    inputs: &[S],
    targets: &[S],
) -> Result<(S, MlpParams<S>)> {
    let (sq_sum, mut grads) = backward_batch_sum(params, inputs, targets)?;
    let inv_b = S::ONE / S::from_f64(targets.len() as f64);
    let loss = sq_sum * inv_b;
    for layer in grads.layers.iter_mut() {
        for w in layer.w.iter_mut() {
            *w = *w * inv_b;
        }
        for b in layer.b.iter_mut() {
            *b = *b * inv_b;
        }
    }
    Ok((loss, grads))
}

/// Adam accumulator state; moment buffers share the parameter shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<S: Scalar = f32> {
    pub m: MlpParams<S>,
    pub v: MlpParams<S>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(arch: &MlpArch, lr: f64) -> Self {
        AdamState {
            m: MlpParams::zeros(arch),
            v: MlpParams::zeros(arch),
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update with bias correction; mutates params and state.
pub fn adam_step<S: Scalar>(
    params: &mut MlpParams<S>,
    grads: &MlpParams<S>,
    state: &mut AdamState<S>,
) -> Result<()> {
    if params.arch != grads.arch {
        return Err(TomoError::ShapeMismatch(String::from(
            "gradient shapes do not match parameters",
        )));
    }
    state.step += 1;
    let t = state.step as f64;
    let b1 = S::from_f64(state.beta1);
    let b2 = S::from_f64(state.beta2);
    let one_m_b1 = S::from_f64(1.0 - state.beta1);
    let one_m_b2 = S::from_f64(1.0 - state.beta2);
    let corr1 = S::from_f64(1.0 / (1.0 - math::powf(state.beta1, t)));
    let corr2 = S::from_f64(1.0 / (1.0 - math::powf(state.beta2, t)));
    let lr = S::from_f64(state.lr);
    let eps = S::from_f64(state.eps);
    for ((p_layer, g_layer), (m_layer, v_layer)) in params
        .layers
        .iter_mut()
        .zip(grads.layers.iter())
        .zip(state.m.layers.iter_mut().zip(state.v.layers.iter_mut()))
    {
        let update = |p: &mut S, g: S, m: &mut S, v: &mut S| {
            *m = b1 * *m + one_m_b1 * g;
            *v = b2 * *v + one_m_b2 * g * g;
            let m_hat = *m * corr1;
            let v_hat = *v * corr2;
            let denom = S::from_f64(math::sqrt(v_hat.to_f64())) + eps;
            *p = *p - lr * m_hat / denom;
        };
        for ((p, &g), (m, v)) in p_layer
            .w
            .iter_mut()
            .zip(g_layer.w.iter())
            .zip(m_layer.w.iter_mut().zip(v_layer.w.iter_mut()))
        {
            update(p, g, m, v);
        }
        for ((p, &g), (m, v)) in p_layer
            .b
            .iter_mut()
            .zip(g_layer.b.iter())
            .zip(m_layer.b.iter_mut().zip(v_layer.b.iter_mut()))
        {
            update(p, g, m, v);
        }
    }
    Ok(())
}
