//! Fully connected tanh network u*(x, t; theta), generic over the scalar type.
//!
//! The same forward code runs on plain `f64` (grid evaluation, data losses)
//! and on [`Jet`] operands (input-derivative bundles); the two paths perform
//! the identical floating-point operations on the value coefficient, so they
//! agree bitwise. Parameters flatten to one vector (per-layer weights
//! row-major, then biases, with the optional trainable load scalar last) that
//! feeds the optimizer and the checkpoint format.
//!
//! Checkpoint layout, little-endian throughout:
//! - u32: number of layer sizes k (input + hidden... + output)
//! - k * u32: the sizes themselves, e.g. [2, 20, 1]
//! - u32: 1 if a trainable load scalar follows the network parameters, else 0
//! - N * f64: the flattened parameter vector

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::jet::{extract_derivative, jet_constant, jet_variable, Jet};

/// Network shape: two inputs (x, t), tanh hidden layers, one output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub hidden_layers: usize,
    pub neurons_per_layer: usize,
}

impl Architecture {
    pub fn new(hidden_layers: usize, neurons_per_layer: usize) -> Result<Self> {
        let arch = Architecture {
            hidden_layers,
            neurons_per_layer,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers < 1 || self.neurons_per_layer < 1 {
            return Err(Error::Config(format!(
                "architecture needs at least one hidden layer and one neuron, got {}x{}",
                self.hidden_layers, self.neurons_per_layer
            )));
        }
        Ok(())
    }

    /// Layer sizes from input to output, e.g. [2, 20, 1].
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.hidden_layers + 2);
        s.push(2);
        s.extend(std::iter::repeat(self.neurons_per_layer).take(self.hidden_layers));
        s.push(1);
        s
    }

    /// Total flat parameter count excluding any trainable load scalar.
    pub fn param_count(&self) -> usize {
        let sizes = self.sizes();
        sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }
}

/// Network parameters plus the optional trainable load scalar of inverse mode.
///
/// `weights[l]` is row-major fan_out x fan_in; `biases[l]` has fan_out
/// entries. Shapes must stay consistent with `arch`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    pub arch: Architecture,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub trainable_load: Option<f64>,
}

/// All network-output derivatives the beam equations need, at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DerivBundle {
    pub u: f64,
    pub u_t: f64,
    pub u_tt: f64,
    pub u_x: f64,
    pub u_xx: f64,
    pub u_xxxx: f64,
}

/// Where each layer's weights and biases live in the flat vector.
#[derive(Clone, Debug)]
pub struct ParamLayout {
    dims: Vec<(usize, usize)>,
    w_off: Vec<usize>,
    b_off: Vec<usize>,
    /// Flat index of the trainable load scalar, when present.
    pub load_idx: Option<usize>,
    pub total: usize,
}

impl ParamLayout {
    pub fn new(arch: &Architecture, has_load: bool) -> Self {
        let sizes = arch.sizes();
        let mut dims = Vec::new();
        let mut w_off = Vec::new();
        let mut b_off = Vec::new();
        let mut off = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            dims.push((fan_in, fan_out));
            w_off.push(off);
            off += fan_in * fan_out;
            b_off.push(off);
            off += fan_out;
        }
        let load_idx = has_load.then_some(off);
        let total = off + usize::from(has_load);
        ParamLayout {
            dims,
            w_off,
            b_off,
            load_idx,
            total,
        }
    }

    pub fn layer_count(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self, layer: usize) -> (usize, usize) {
        self.dims[layer]
    }

    /// Flat index of weight (out_j, in_i) of `layer`.
    pub fn w_index(&self, layer: usize, out_j: usize, in_i: usize) -> usize {
        let (fan_in, _) = self.dims[layer];
        self.w_off[layer] + out_j * fan_in + in_i
    }

    /// Flat index of bias out_j of `layer`.
    pub fn b_index(&self, layer: usize, out_j: usize) -> usize {
        self.b_off[layer] + out_j
    }
}

impl MlpParams {
    /// All-zero parameters (zero network output everywhere).
    pub fn zeros(arch: Architecture) -> Self {
        let sizes = arch.sizes();
        let weights = sizes.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect();
        let biases = sizes.windows(2).map(|w| vec![0.0; w[1]]).collect();
        MlpParams {
            arch,
            weights,
            biases,
            trainable_load: None,
        }
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(&self.arch, self.trainable_load.is_some())
    }

    pub fn flatten(&self) -> Vec<f64> {
        let layout = self.layout();
        let mut flat = Vec::with_capacity(layout.total);
        for l in 0..self.weights.len() {
            flat.extend_from_slice(&self.weights[l]);
            flat.extend_from_slice(&self.biases[l]);
        }
        if let Some(p) = self.trainable_load {
            flat.push(p);
        }
        flat
    }

    pub fn from_flat(arch: Architecture, has_load: bool, flat: &[f64]) -> Result<Self> {
        arch.validate()?;
        let layout = ParamLayout::new(&arch, has_load);
        if flat.len() != layout.total {
            return Err(Error::Usage(format!(
                "flat parameter vector has length {}, expected {}",
                flat.len(),
                layout.total
            )));
        }
        let sizes = arch.sizes();
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let mut pos = 0;
        for w in sizes.windows(2) {
            let nw = w[0] * w[1];
            weights.push(flat[pos..pos + nw].to_vec());
            pos += nw;
            biases.push(flat[pos..pos + w[1]].to_vec());
            pos += w[1];
        }
        let trainable_load = has_load.then(|| flat[pos]);
        Ok(MlpParams {
            arch,
            weights,
            biases,
            trainable_load,
        })
    }

    fn check_shapes(&self) {
        let sizes = self.arch.sizes();
        debug_assert_eq!(self.weights.len(), sizes.len() - 1);
        debug_assert_eq!(self.biases.len(), sizes.len() - 1);
        for (l, w) in sizes.windows(2).enumerate() {
            debug_assert_eq!(self.weights[l].len(), w[0] * w[1]);
            debug_assert_eq!(self.biases[l].len(), w[1]);
        }
    }
}

/// Scalar kinds the forward pass accepts: plain reals and jets.
pub trait NetScalar: Copy {
    fn scale(self, c: f64) -> Self;
    fn add(self, other: Self) -> Self;
    /// Add a plain constant (bias).
    fn shift(self, c: f64) -> Self;
    /// The network activation (tanh).
    fn activate(self) -> Self;
}

impl NetScalar for f64 {
    fn scale(self, c: f64) -> Self {
        self * c
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn shift(self, c: f64) -> Self {
        self + c
    }
    fn activate(self) -> Self {
        f64::tanh(self)
    }
}

impl NetScalar for Jet {
    fn scale(self, c: f64) -> Self {
        Jet::scale(self, c)
    }
    fn add(self, other: Self) -> Self {
        Jet::add(self, other)
    }
    fn shift(self, c: f64) -> Self {
        self.add_value(c)
    }
    fn activate(self) -> Self {
        Jet::tanh(self)
    }
}

/// Xavier-uniform weights (bound sqrt(6 / (fan_in + fan_out))), zero biases,
/// from a counter-based deterministic generator. No trainable load scalar.
pub fn init_params(arch: Architecture, seed: u64) -> MlpParams {
    arch.validate().expect("invalid architecture");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes = arch.sizes();
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for w in sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let layer: Vec<f64> = (0..fan_in * fan_out)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        weights.push(layer);
        biases.push(vec![0.0; fan_out]);
    }
    MlpParams {
        arch,
        weights,
        biases,
        trainable_load: None,
    }
}

/// tanh MLP evaluation, generic over plain reals and jets.
pub fn forward<S: NetScalar>(params: &MlpParams, x: S, t: S) -> S {
    params.check_shapes();
    let n = params.arch.neurons_per_layer;
    let hidden = params.arch.hidden_layers;

    let mut acts: Vec<S> = Vec::with_capacity(n);
    let w0 = &params.weights[0];
    let b0 = &params.biases[0];
    for j in 0..n {
        let z = x
            .scale(w0[2 * j])
            .add(t.scale(w0[2 * j + 1]))
            .shift(b0[j]);
        acts.push(z.activate());
    }

    let mut next: Vec<S> = Vec::with_capacity(n);
    for l in 1..hidden {
        let w = &params.weights[l];
        let b = &params.biases[l];
        next.clear();
        for j in 0..n {
            let mut z = acts[0].scale(w[j * n]);
            for i in 1..n {
                z = z.add(acts[i].scale(w[j * n + i]));
            }
            next.push(z.shift(b[j]).activate());
        }
        std::mem::swap(&mut acts, &mut next);
    }

    let w_out = &params.weights[hidden];
    let b_out = params.biases[hidden][0];
    let mut z = acts[0].scale(w_out[0]);
    for i in 1..n {
        z = z.add(acts[i].scale(w_out[i]));
    }
    z.shift(b_out)
}

/// Two jet passes assembled into one bundle: order 4 in x with t constant,
/// order 2 in t with x constant. The u field comes out identical from both
/// passes because the value-coefficient arithmetic is the same.
pub fn forward_with_derivs(params: &MlpParams, x: f64, t: f64) -> Result<DerivBundle> {
    let jx = forward(
        params,
        jet_variable(x, 4)?,
        jet_constant(t, 4)?,
    );
    let jt = forward(
        params,
        jet_constant(x, 2)?,
        jet_variable(t, 2)?,
    );
    let bundle = DerivBundle {
        u: jx.value(),
        u_x: extract_derivative(&jx, 1)?,
        u_xx: extract_derivative(&jx, 2)?,
        u_xxxx: extract_derivative(&jx, 4)?,
        u_t: extract_derivative(&jt, 1)?,
        u_tt: extract_derivative(&jt, 2)?,
    };
    let fields = [
        bundle.u,
        bundle.u_x,
        bundle.u_xx,
        bundle.u_xxxx,
        bundle.u_t,
        bundle.u_tt,
    ];
    if fields.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation(format!(
            "non-finite derivative bundle at ({x}, {t})"
        )));
    }
    Ok(bundle)
}

/// Reusable activation/delta buffers for the cached scalar path.
pub struct Workspace {
    /// acts[0] = [x, t]; acts[1..=hidden] post-tanh; acts[hidden+1] = [output].
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    pub fn new(arch: &Architecture) -> Self {
        let sizes = arch.sizes();
        let acts = sizes.iter().map(|&s| vec![0.0; s]).collect();
        let deltas = sizes[1..].iter().map(|&s| vec![0.0; s]).collect();
        Workspace { acts, deltas }
    }
}

/// Plain forward pass that records activations for a following [`backprop`].
pub fn forward_cached(params: &MlpParams, x: f64, t: f64, ws: &mut Workspace) -> f64 {
    params.check_shapes();
    let n = params.arch.neurons_per_layer;
    let hidden = params.arch.hidden_layers;
    ws.acts[0][0] = x;
    ws.acts[0][1] = t;
    for l in 0..hidden {
        let fan_in = if l == 0 { 2 } else { n };
        let w = &params.weights[l];
        let b = &params.biases[l];
        let (prev, rest) = ws.acts.split_at_mut(l + 1);
        let input = &prev[l];
        let out = &mut rest[0];
        for j in 0..n {
            let mut z = b[j];
            for i in 0..fan_in {
                z += w[j * fan_in + i] * input[i];
            }
            out[j] = z.tanh();
        }
    }
    let w = &params.weights[hidden];
    let mut z = params.biases[hidden][0];
    for i in 0..n {
        z += w[i] * ws.acts[hidden][i];
    }
    ws.acts[hidden + 1][0] = z;
    z
}

/// Accumulates `upstream * d(output)/d(theta)` into `grad` using the
/// activations cached by the latest [`forward_cached`] on this workspace.
pub fn backprop(
    params: &MlpParams,
    ws: &mut Workspace,
    upstream: f64,
    layout: &ParamLayout,
    grad: &mut [f64],
) {
    let n = params.arch.neurons_per_layer;
    let hidden = params.arch.hidden_layers;
    debug_assert_eq!(grad.len(), layout.total);

    // output layer: delta is just the upstream sensitivity
    ws.deltas[hidden][0] = upstream;
    {
        let input = &ws.acts[hidden];
        for i in 0..n {
            grad[layout.w_index(hidden, 0, i)] += upstream * input[i];
        }
        grad[layout.b_index(hidden, 0)] += upstream;
    }

    // hidden layers, last to first
    for l in (0..hidden).rev() {
        let fan_in = if l == 0 { 2 } else { n };
        let w_next = &params.weights[l + 1];
        let fan_in_next = n;
        let n_next = if l + 1 == hidden { 1 } else { n };
        let (lo, hi) = ws.deltas.split_at_mut(l + 1);
        let delta_next = &hi[0];
        let delta = &mut lo[l];
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n_next {
                s += w_next[k * fan_in_next + j] * delta_next[k];
            }
            let a = ws.acts[l + 1][j];
            delta[j] = s * (1.0 - a * a);
        }
        let input = &ws.acts[l];
        for j in 0..n {
            let d = delta[j];
            for i in 0..fan_in {
                grad[layout.w_index(l, j, i)] += d * input[i];
            }
            grad[layout.b_index(l, j)] += d;
        }
    }
}

/// Writes the checkpoint format documented in the module header.
pub fn save_checkpoint(params: &MlpParams, path: &Path) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    let sizes = params.arch.sizes();
    buf.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for s in &sizes {
        buf.extend_from_slice(&(*s as u32).to_le_bytes());
    }
    buf.extend_from_slice(&u32::from(params.trainable_load.is_some()).to_le_bytes());
    for v in params.flatten() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    file.write_all(&buf)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// Reads and validates a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<MlpParams> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut pos = 0;
    let mut take_u32 = |bytes: &[u8]| -> Result<u32> {
        if pos + 4 > bytes.len() {
            return Err(Error::Format("checkpoint truncated in header".into()));
        }
        let v = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap());
        pos += 4;
        Ok(v)
    };
    let k = take_u32(&bytes)? as usize;
    if !(3..=64).contains(&k) {
        return Err(Error::Format(format!(
            "checkpoint header claims {k} layer sizes; expected 3..=64"
        )));
    }
    let mut sizes = Vec::with_capacity(k);
    for _ in 0..k {
        sizes.push(take_u32(&bytes)? as usize);
    }
    let has_load = match take_u32(&bytes)? {
        0 => false,
        1 => true,
        other => {
            return Err(Error::Format(format!(
                "checkpoint load flag must be 0 or 1, got {other}"
            )))
        }
    };
    if sizes[0] != 2 || *sizes.last().unwrap() != 1 {
        return Err(Error::Format(format!(
            "checkpoint layer sizes {sizes:?} must start at 2 and end at 1"
        )));
    }
    let hidden = &sizes[1..k - 1];
    let neurons = hidden[0];
    if neurons < 1 || hidden.iter().any(|&h| h != neurons) {
        return Err(Error::Format(format!(
            "checkpoint hidden sizes {hidden:?} must be uniform and nonzero"
        )));
    }
    let arch = Architecture::new(hidden.len(), neurons)?;
    let layout = ParamLayout::new(&arch, has_load);
    let body = &bytes[pos..];
    if body.len() != layout.total * 8 {
        return Err(Error::Format(format!(
            "checkpoint body holds {} bytes, expected {}",
            body.len(),
            layout.total * 8
        )));
    }
    let flat: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    MlpParams::from_flat(arch, has_load, &flat)
}
