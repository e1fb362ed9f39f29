//! The scene MLP: a small fully connected network with ReLU hidden layers
//! and a 4-wide output head (density + RGB), with analytic gradients.
//!
//! Parameters live in one flat `f64` vector: per layer, the weight matrix
//! (`out_dim x in_dim`, row-major) followed by the bias vector. That flat
//! vector is the unit that is broadcast, uploaded and aggregated.

use crate::error::{Error, Result};
use rand::Rng;
use std::io::{Read, Write};
use std::path::Path;

/// Magic prefix of the model parameter file.
pub const MODEL_FILE_MAGIC: &[u8; 8] = b"FNRFPRM1";

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// `(in_dim, out_dim)` per layer, input to output.
    pub layer_dims: Vec<(usize, usize)>,
    /// Row-major weights then biases, per layer, concatenated.
    pub values: Vec<f64>,
}

impl ModelParams {
    /// Total value count for a layer chain.
    pub fn count_for(dims: &[(usize, usize)]) -> usize {
        dims.iter().map(|&(i, o)| i * o + o).sum()
    }

    pub fn zeros(dims: &[(usize, usize)]) -> Self {
        ModelParams {
            layer_dims: dims.to_vec(),
            values: vec![0.0; Self::count_for(dims)],
        }
    }

    /// Glorot-style init: weights uniform in `[-s, s]` with
    /// `s = sqrt(6 / (in + out))`, biases zero. Weights are drawn from `rng`
    /// in storage order; biases consume no draws.
    pub fn init(dims: &[(usize, usize)], rng: &mut impl Rng) -> Self {
        let mut values = Vec::with_capacity(Self::count_for(dims));
        for &(in_dim, out_dim) in dims {
            let s = (6.0 / (in_dim + out_dim) as f64).sqrt();
            for _ in 0..in_dim * out_dim {
                values.push(rng.gen_range(-s..=s));
            }
            values.extend(std::iter::repeat_n(0.0, out_dim));
        }
        ModelParams {
            layer_dims: dims.to_vec(),
            values,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.is_empty() {
            return Err(Error::Contract("model has no layers".into()));
        }
        let expect = Self::count_for(&self.layer_dims);
        if self.values.len() != expect {
            return Err(Error::Contract(format!(
                "parameter vector has {} values, layer dims require {}",
                self.values.len(),
                expect
            )));
        }
        for w in self.layer_dims.windows(2) {
            if w[0].1 != w[1].0 {
                return Err(Error::Contract(format!(
                    "layer chain mismatch: out_dim {} feeds in_dim {}",
                    w[0].1, w[1].0
                )));
            }
        }
        if !self.values.iter().all(|v| v.is_finite()) {
            return Err(Error::Contract("parameter vector has non-finite values".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0].0
    }

    pub fn output_dim(&self) -> usize {
        self.layer_dims.last().map(|&(_, o)| o).unwrap_or(0)
    }

    /// `(weights, biases)` slices of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (start, (i, o)) = self.layer_offset(l);
        (
            &self.values[start..start + i * o],
            &self.values[start + i * o..start + i * o + o],
        )
    }

    fn layer_offset(&self, l: usize) -> (usize, (usize, usize)) {
        let mut start = 0;
        for &(i, o) in &self.layer_dims[..l] {
            start += i * o + o;
        }
        (start, self.layer_dims[l])
    }

    /// Round every value through `f32`, the wire and file precision. Applied
    /// at every parameter exchange so simulated and distributed runs perform
    /// identical arithmetic.
    pub fn quantize_f32(&self) -> Self {
        ModelParams {
            layer_dims: self.layer_dims.clone(),
            values: self.values.iter().map(|&v| v as f32 as f64).collect(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(8 + 4 + 8 * self.layer_dims.len() + 4 * self.values.len());
        buf.extend_from_slice(MODEL_FILE_MAGIC);
        buf.extend_from_slice(&(self.layer_dims.len() as u32).to_le_bytes());
        for &(i, o) in &self.layer_dims {
            buf.extend_from_slice(&(i as u32).to_le_bytes());
            buf.extend_from_slice(&(o as u32).to_le_bytes());
        }
        for &v in &self.values {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&buf).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let bad = |what: &str| Error::Config(format!("model file {}: {what}", path.display()));
        if bytes.len() < 12 || &bytes[..8] != MODEL_FILE_MAGIC {
            return Err(bad("bad magic"));
        }
        let n_layers = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let dims_end = 12 + 8 * n_layers;
        if bytes.len() < dims_end {
            return Err(bad("truncated layer table"));
        }
        let mut layer_dims = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let at = 12 + 8 * l;
            let i = u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
            let o = u32::from_le_bytes(bytes[at + 4..at + 8].try_into().unwrap()) as usize;
            layer_dims.push((i, o));
        }
        let count = Self::count_for(&layer_dims);
        if bytes.len() != dims_end + 4 * count {
            return Err(bad("value payload length mismatch"));
        }
        let values = bytes[dims_end..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        let params = ModelParams { layer_dims, values };
        params.validate().map_err(|e| bad(&e.to_string()))?;
        Ok(params)
    }
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Dot product with four independent accumulators so the reduction
/// vectorizes; summation order is fixed and deterministic.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (mut s0, mut s1, mut s2, mut s3) = (0.0f64, 0.0, 0.0, 0.0);
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    let mut s = (s0 + s2) + (s1 + s3);
    for i in 4 * chunks..n {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn axpy(k: f64, x: &[f64], out: &mut [f64]) {
    for (o, &v) in out.iter_mut().zip(x) {
        *o += k * v;
    }
}

/// Per-sample activation record, sufficient to run the backward pass.
/// `layer_inputs[0]` is the encoded input; `layer_inputs[l]` for `l > 0` is
/// the post-ReLU output of layer `l - 1`. `raw_output` is the pre-head
/// output of the final layer.
#[derive(Debug, Clone)]
pub struct ActivationCache {
    pub layer_inputs: Vec<Vec<f64>>,
    pub raw_output: [f64; 4],
}

/// Forward pass: ReLU hidden layers, then `sigma = softplus(raw[0])` and
/// `rgb = sigmoid(raw[1..4])`.
pub fn mlp_forward(params: &ModelParams, encoded: &[f64]) -> Result<(f64, [f64; 3], ActivationCache)> {
    if encoded.len() != params.input_dim() {
        return Err(Error::Contract(format!(
            "encoded input has dim {}, first layer expects {}",
            encoded.len(),
            params.input_dim()
        )));
    }
    if params.output_dim() != 4 {
        return Err(Error::Contract(format!(
            "final layer emits {} values, the density/color head needs 4",
            params.output_dim()
        )));
    }
    let n_layers = params.layer_dims.len();
    let mut layer_inputs = Vec::with_capacity(n_layers);
    layer_inputs.push(encoded.to_vec());
    for l in 0..n_layers - 1 {
        let (w, b) = params.layer(l);
        let (in_dim, out_dim) = params.layer_dims[l];
        let x = &layer_inputs[l];
        let mut h = vec![0.0; out_dim];
        for (o, ho) in h.iter_mut().enumerate() {
            *ho = (b[o] + dot(&w[o * in_dim..(o + 1) * in_dim], x)).max(0.0);
        }
        layer_inputs.push(h);
    }
    let (w, b) = params.layer(n_layers - 1);
    let (in_dim, _) = params.layer_dims[n_layers - 1];
    let x = &layer_inputs[n_layers - 1];
    let mut raw = [0.0f64; 4];
    for (o, r) in raw.iter_mut().enumerate() {
        *r = b[o] + dot(&w[o * in_dim..(o + 1) * in_dim], x);
    }
    let sigma = softplus(raw[0]);
    let rgb = [sigmoid(raw[1]), sigmoid(raw[2]), sigmoid(raw[3])];
    Ok((
        sigma,
        rgb,
        ActivationCache {
            layer_inputs,
            raw_output: raw,
        },
    ))
}

/// Backward pass from gradients w.r.t. the raw head outputs. Accumulates
/// into `grad`, which must be sized like `params.values`.
pub fn mlp_backward(params: &ModelParams, cache: &ActivationCache, d_raw: [f64; 4], grad: &mut [f64]) {
    debug_assert_eq!(grad.len(), params.values.len());
    let n_layers = params.layer_dims.len();
    let mut offsets = Vec::with_capacity(n_layers);
    let mut at = 0;
    for &(i, o) in &params.layer_dims {
        offsets.push(at);
        at += i * o + o;
    }

    // delta = dL/d(pre-activation) of the current layer, walking backwards.
    let mut delta: Vec<f64> = d_raw.to_vec();
    for l in (0..n_layers).rev() {
        let (in_dim, out_dim) = params.layer_dims[l];
        let x = &cache.layer_inputs[l];
        let w_at = offsets[l];
        let b_at = w_at + in_dim * out_dim;
        let w = &params.values[w_at..b_at];

        let mut dx = vec![0.0; in_dim];
        for o in 0..out_dim {
            let d = delta[o];
            grad[b_at + o] += d;
            let row = o * in_dim;
            axpy(d, &x[..in_dim], &mut grad[w_at + row..w_at + row + in_dim]);
            if l > 0 {
                axpy(d, &w[row..row + in_dim], &mut dx);
            }
        }
        if l > 0 {
            // ReLU mask of the previous layer's output: x > 0.
            for (dv, &xv) in dx.iter_mut().zip(x) {
                if xv <= 0.0 {
                    *dv = 0.0;
                }
            }
            delta = dx;
        }
    }
}

/// Dim-major activation planes for pushing a batch of samples (for example
/// all samples of one ray) through the layers together. Plane `l` holds the
/// input to layer `l` as `[dim][n]`, so the inner loops run over contiguous
/// per-dimension rows and the whole working set stays cache-resident for
/// desk-scale layer widths.
#[derive(Debug, Default)]
pub struct BatchWorkspace {
    n: usize,
    planes: Vec<Vec<f64>>,
    raw: Vec<f64>,
    delta: Vec<f64>,
    delta_next: Vec<f64>,
}

impl BatchWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    fn reset(&mut self, dims: &[(usize, usize)], n: usize) {
        self.n = n;
        self.planes.resize(dims.len(), Vec::new());
        for (plane, &(in_dim, _)) in self.planes.iter_mut().zip(dims) {
            plane.clear();
            plane.resize(in_dim * n, 0.0);
        }
        self.raw.clear();
        self.raw.resize(4 * n, 0.0);
        let widest = dims.iter().map(|&(_, o)| o).max().unwrap_or(0);
        self.delta.clear();
        self.delta.resize(widest * n, 0.0);
        self.delta_next.clear();
        self.delta_next.resize(widest * n, 0.0);
    }

    /// Scatter one sample's encoded input into the first plane.
    pub fn set_input(&mut self, sample: usize, encoded: &[f64]) {
        let n = self.n;
        for (i, &v) in encoded.iter().enumerate() {
            self.planes[0][i * n + sample] = v;
        }
    }
}

/// Forward `n` samples at once; the caller fills the input plane via
/// [`BatchWorkspace::set_input`] after this sizes it. Densities and colors
/// land in `sigmas`/`rgbs`. The hidden planes are retained for
/// [`backward_batch`].
pub fn forward_batch(
    params: &ModelParams,
    ws: &mut BatchWorkspace,
    sigmas: &mut [f64],
    rgbs: &mut [[f64; 3]],
) {
    let n = ws.n;
    debug_assert!(sigmas.len() == n && rgbs.len() == n);
    let n_layers = params.layer_dims.len();
    for l in 0..n_layers {
        let (w, b) = params.layer(l);
        let (in_dim, out_dim) = params.layer_dims[l];
        let last = l + 1 == n_layers;
        // Split the planes vector so the input and output planes can be
        // borrowed together.
        let (head, tail) = ws.planes.split_at_mut(l + 1);
        let input = &head[l];
        let output: &mut [f64] = if last { &mut ws.raw } else { &mut tail[0] };
        for o in 0..out_dim {
            let row = &w[o * in_dim..(o + 1) * in_dim];
            let out_row = &mut output[o * n..(o + 1) * n];
            out_row.fill(b[o]);
            for (i, &wv) in row.iter().enumerate() {
                let in_row = &input[i * n..(i + 1) * n];
                for (ov, &iv) in out_row.iter_mut().zip(in_row) {
                    *ov += wv * iv;
                }
            }
            if !last {
                for ov in out_row.iter_mut() {
                    *ov = ov.max(0.0);
                }
            }
        }
    }
    for s in 0..n {
        sigmas[s] = softplus(ws.raw[s]);
        rgbs[s] = [
            sigmoid(ws.raw[n + s]),
            sigmoid(ws.raw[2 * n + s]),
            sigmoid(ws.raw[3 * n + s]),
        ];
    }
}

/// Backward pass over the whole batch from head-output gradients
/// (`d_raw` is dim-major `[4][n]`), accumulating into `grad`.
pub fn backward_batch(params: &ModelParams, ws: &mut BatchWorkspace, d_raw: &[f64], grad: &mut [f64]) {
    let n = ws.n;
    debug_assert_eq!(d_raw.len(), 4 * n);
    debug_assert_eq!(grad.len(), params.values.len());
    let n_layers = params.layer_dims.len();
    let mut offsets = Vec::with_capacity(n_layers);
    let mut at = 0;
    for &(i, o) in &params.layer_dims {
        offsets.push(at);
        at += i * o + o;
    }

    ws.delta[..4 * n].copy_from_slice(d_raw);
    for l in (0..n_layers).rev() {
        let (in_dim, out_dim) = params.layer_dims[l];
        let input = &ws.planes[l];
        let w_at = offsets[l];
        let b_at = w_at + in_dim * out_dim;

        for o in 0..out_dim {
            let delta_row = &ws.delta[o * n..(o + 1) * n];
            grad[b_at + o] += delta_row.iter().sum::<f64>();
            let grad_row = &mut grad[w_at + o * in_dim..w_at + (o + 1) * in_dim];
            for (i, gv) in grad_row.iter_mut().enumerate() {
                *gv += dot(delta_row, &input[i * n..(i + 1) * n]);
            }
        }

        if l > 0 {
            let w = &params.values[w_at..b_at];
            let delta = &ws.delta;
            let dx = &mut ws.delta_next[..in_dim * n];
            dx.fill(0.0);
            for o in 0..out_dim {
                let delta_row = &delta[o * n..(o + 1) * n];
                for i in 0..in_dim {
                    let wv = w[o * in_dim + i];
                    let dx_row = &mut dx[i * n..(i + 1) * n];
                    for (dv, &dl) in dx_row.iter_mut().zip(delta_row) {
                        *dv += wv * dl;
                    }
                }
            }
            // ReLU mask of the previous activation.
            for (dv, &xv) in dx.iter_mut().zip(&input[..in_dim * n]) {
                if xv <= 0.0 {
                    *dv = 0.0;
                }
            }
            std::mem::swap(&mut ws.delta, &mut ws.delta_next);
        }
    }
}

/// Size the workspace for `n` samples of this model.
pub fn begin_batch(params: &ModelParams, ws: &mut BatchWorkspace, n: usize) {
    ws.reset(&params.layer_dims, n);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const DIMS: &[(usize, usize)] = &[(39, 64), (64, 64), (64, 4)];

    #[test]
    fn zero_network_outputs_softplus_zero_and_mid_gray() {
        let params = ModelParams::zeros(DIMS);
        let (sigma, rgb, _) = mlp_forward(&params, &vec![0.3; 39]).unwrap();
        assert!((sigma - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(rgb, [0.5, 0.5, 0.5]);
    }

    #[test]
    fn saturated_head_biases() {
        let mut params = ModelParams::zeros(DIMS);
        let n = params.values.len();
        // Final bias vector is the last 4 values.
        params.values[n - 4..].copy_from_slice(&[0.0, 20.0, -20.0, 0.0]);
        let (sigma, rgb, _) = mlp_forward(&params, &vec![0.0; 39]).unwrap();
        assert!((sigma - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((rgb[0] - 1.0).abs() < 1e-6);
        assert!(rgb[1].abs() < 1e-6);
        assert!((rgb[2] - 0.5).abs() < 1e-6);
    }

    /// Straight-line re-implementation of the same formulas, written against
    /// the documented parameter layout rather than the `layer()` accessors.
    fn naive_forward(params: &ModelParams, input: &[f64]) -> (f64, [f64; 3]) {
        let mut x = input.to_vec();
        let mut at = 0;
        let last = params.layer_dims.len() - 1;
        let mut raw = Vec::new();
        for (l, &(in_dim, out_dim)) in params.layer_dims.iter().enumerate() {
            let mut y = vec![0.0; out_dim];
            for (o, yo) in y.iter_mut().enumerate() {
                let mut acc = params.values[at + in_dim * out_dim + o]; // bias
                for i in 0..in_dim {
                    acc += params.values[at + o * in_dim + i] * x[i];
                }
                *yo = if l < last { acc.max(0.0) } else { acc };
            }
            at += in_dim * out_dim + out_dim;
            if l < last {
                x = y;
            } else {
                raw = y;
            }
        }
        (
            (1.0 + raw[0].exp()).ln(),
            [
                1.0 / (1.0 + (-raw[1]).exp()),
                1.0 / (1.0 + (-raw[2]).exp()),
                1.0 / (1.0 + (-raw[3]).exp()),
            ],
        )
    }

    #[test]
    fn forward_matches_independent_reimplementation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let params = ModelParams::init(&[(9, 12), (12, 8), (8, 4)], &mut rng);
            let input: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (sigma, rgb, _) = mlp_forward(&params, &input).unwrap();
            let (sigma_ref, rgb_ref) = naive_forward(&params, &input);
            assert!((sigma - sigma_ref).abs() < 1e-9);
            for k in 0..3 {
                assert!((rgb[k] - rgb_ref[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_a_contract_error() {
        let params = ModelParams::zeros(DIMS);
        let err = mlp_forward(&params, &vec![0.0; 7]).unwrap_err();
        assert!(matches!(err, crate::error::Error::Contract(_)));
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = ModelParams::init(DIMS, &mut stream(9, Domain::ModelInit, 0, 0));
        let b = ModelParams::init(DIMS, &mut stream(9, Domain::ModelInit, 0, 0));
        assert_eq!(a, b);
        a.validate().unwrap();
        for (l, &(in_dim, out_dim)) in a.layer_dims.iter().enumerate() {
            let s = (6.0 / (in_dim + out_dim) as f64).sqrt();
            let (w, bias) = a.layer(l);
            assert!(w.iter().all(|v| v.abs() <= s));
            assert!(bias.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn validate_rejects_broken_chain_and_bad_length() {
        let mut p = ModelParams::zeros(&[(3, 4), (5, 4)]);
        assert!(p.validate().is_err());
        p = ModelParams::zeros(DIMS);
        p.values.pop();
        assert!(p.validate().is_err());
        p = ModelParams::zeros(DIMS);
        p.values[0] = f64::NAN;
        assert!(p.validate().is_err());
    }

    #[test]
    fn batched_forward_matches_per_sample_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let params = ModelParams::init(&[(9, 12), (12, 8), (8, 4)], &mut rng);
            let n = rng.gen_range(1..9usize);
            let inputs: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let mut ws = BatchWorkspace::new();
            begin_batch(&params, &mut ws, n);
            for (s, x) in inputs.iter().enumerate() {
                ws.set_input(s, x);
            }
            let mut sigmas = vec![0.0; n];
            let mut rgbs = vec![[0.0f64; 3]; n];
            forward_batch(&params, &mut ws, &mut sigmas, &mut rgbs);
            for (s, x) in inputs.iter().enumerate() {
                let (sigma, rgb, _) = mlp_forward(&params, x).unwrap();
                assert!((sigma - sigmas[s]).abs() < 1e-9);
                for k in 0..3 {
                    assert!((rgb[k] - rgbs[s][k]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn batched_backward_matches_per_sample_backward() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let params = ModelParams::init(&[(9, 12), (12, 8), (8, 4)], &mut rng);
        let n = 5;
        let inputs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let d_raws: Vec<[f64; 4]> = (0..n)
            .map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
            .collect();

        let mut grad_ref = vec![0.0; params.values.len()];
        for (x, d) in inputs.iter().zip(&d_raws) {
            let (_, _, cache) = mlp_forward(&params, x).unwrap();
            mlp_backward(&params, &cache, *d, &mut grad_ref);
        }

        let mut ws = BatchWorkspace::new();
        begin_batch(&params, &mut ws, n);
        for (s, x) in inputs.iter().enumerate() {
            ws.set_input(s, x);
        }
        let mut sigmas = vec![0.0; n];
        let mut rgbs = vec![[0.0f64; 3]; n];
        forward_batch(&params, &mut ws, &mut sigmas, &mut rgbs);
        let mut d_raw_plane = vec![0.0; 4 * n];
        for (s, d) in d_raws.iter().enumerate() {
            for k in 0..4 {
                d_raw_plane[k * n + s] = d[k];
            }
        }
        let mut grad = vec![0.0; params.values.len()];
        backward_batch(&params, &mut ws, &d_raw_plane, &mut grad);
        for (g, r) in grad.iter().zip(&grad_ref) {
            assert!((g - r).abs() < 1e-9, "{g} vs {r}");
        }
    }

    #[test]
    fn model_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let params = ModelParams::init(DIMS, &mut stream(3, Domain::ModelInit, 0, 0));
        params.save(&path).unwrap();
        let loaded = ModelParams::load(&path).unwrap();
        assert_eq!(loaded, params.quantize_f32());
    }

    #[test]
    fn model_file_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        std::fs::write(&path, b"NOTAMODL----").unwrap();
        assert!(matches!(
            ModelParams::load(&path),
            Err(crate::error::Error::Config(_))
        ));
    }
}
