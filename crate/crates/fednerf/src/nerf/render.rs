//! Ray sampling, emission-absorption compositing, and image rendering.

use crate::error::{Error, Result};
use crate::nerf::camera::{CameraPose, PosedImage};
use crate::nerf::encoding::{positional_encode_into, EncodingConfig};
use crate::nerf::mlp::{begin_batch, forward_batch, BatchWorkspace, ModelParams};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    /// Near plane distance, world units.
    pub near: f64,
    /// Far plane distance, world units.
    pub far: f64,
    pub samples_per_ray: usize,
    pub background_rgb: [f64; 3],
    /// Jitter sample positions within their bins (training); midpoints
    /// otherwise (deterministic rendering).
    pub stratified: bool,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            near: 1.5,
            far: 4.8,
            samples_per_ray: 32,
            background_rgb: [0.0, 0.0, 0.0],
            stratified: true,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.near > 0.0 && self.near < self.far) {
            return Err(Error::Contract(format!(
                "render range requires 0 < near < far, got near={} far={}",
                self.near, self.far
            )));
        }
        if self.samples_per_ray == 0 {
            return Err(Error::Contract("samples_per_ray must be at least 1".into()));
        }
        if !self.background_rgb.iter().all(|c| (0.0..=1.0).contains(c)) {
            return Err(Error::Contract("background_rgb outside [0, 1]".into()));
        }
        Ok(())
    }
}

/// Sample depths along a ray: `samples_per_ray` equal bins over
/// `[near, far]`, midpoints when not stratified, one uniform draw per bin
/// otherwise. Consumes exactly `samples_per_ray` draws when stratified and
/// none otherwise. Output is strictly increasing.
pub fn sample_along_ray(cfg: &RenderConfig, rng: &mut impl Rng) -> Vec<f64> {
    let mut ts = Vec::with_capacity(cfg.samples_per_ray);
    sample_along_ray_into(cfg, rng, &mut ts);
    ts
}

pub fn sample_along_ray_into(cfg: &RenderConfig, rng: &mut impl Rng, ts: &mut Vec<f64>) {
    ts.clear();
    let n = cfg.samples_per_ray;
    let bin = (cfg.far - cfg.near) / n as f64;
    for i in 0..n {
        let lo = cfg.near + i as f64 * bin;
        let t = if cfg.stratified {
            lo + bin * rng.gen_range(0.0..1.0)
        } else {
            lo + 0.5 * bin
        };
        ts.push(t);
    }
}

/// Composite one ray. Returns the pixel color and the per-sample weights.
///
/// `delta_i = t_{i+1} - t_i` with the last delta closing to `far`;
/// `alpha_i = 1 - exp(-sigma_i * delta_i)`; weights are transmittance times
/// alpha; whatever weight is left goes to the background.
pub fn volume_render(
    sigmas: &[f64],
    rgbs: &[[f64; 3]],
    ts: &[f64],
    cfg: &RenderConfig,
) -> ([f64; 3], Vec<f64>) {
    let n = ts.len();
    debug_assert!(n >= 1 && sigmas.len() == n && rgbs.len() == n);
    let mut weights = vec![0.0; n];
    let mut transmittance = 1.0f64;
    let mut pixel = [0.0f64; 3];
    for i in 0..n {
        let delta = if i + 1 < n { ts[i + 1] - ts[i] } else { cfg.far - ts[i] };
        let alpha = 1.0 - (-sigmas[i] * delta).exp();
        let w = transmittance * alpha;
        weights[i] = w;
        for k in 0..3 {
            pixel[k] += w * rgbs[i][k];
        }
        transmittance *= 1.0 - alpha;
    }
    for k in 0..3 {
        pixel[k] += transmittance * cfg.background_rgb[k];
    }
    (pixel, weights)
}

/// Gradients of one composited pixel w.r.t. the per-sample densities and
/// colors, given `d_pixel = dL/d(pixel)`.
///
/// With `w_i = T_i * alpha_i`:
///   d pixel_k / d rgb_{i,k}  = w_i
///   d pixel_k / d sigma_j    = delta_j * ((rgb_j,k - bg_k) * T_{j+1}
///                              - sum_{i>j} (rgb_i,k - bg_k) * w_i)
/// computed with a single backward sweep.
pub fn volume_render_backward(
    rgbs: &[[f64; 3]],
    ts: &[f64],
    cfg: &RenderConfig,
    weights: &[f64],
    d_pixel: [f64; 3],
    d_sigma: &mut [f64],
    d_rgb: &mut [[f64; 3]],
) {
    let n = ts.len();
    debug_assert!(rgbs.len() == n && weights.len() == n);

    // Transmittance after each sample: T_{i+1} = T_i - w_i.
    // Suffix sum over i > j of (rgb_i - bg) * w_i, per channel.
    let mut suffix = [0.0f64; 3];
    let mut trans_after = vec![0.0; n];
    let mut t_running = 1.0;
    for i in 0..n {
        t_running -= weights[i];
        trans_after[i] = t_running;
    }
    for j in (0..n).rev() {
        let delta = if j + 1 < n { ts[j + 1] - ts[j] } else { cfg.far - ts[j] };
        let mut acc = 0.0;
        for k in 0..3 {
            d_rgb[j][k] = d_pixel[k] * weights[j];
            let centered = rgbs[j][k] - cfg.background_rgb[k];
            acc += d_pixel[k] * (centered * trans_after[j] - suffix[k]);
        }
        d_sigma[j] = delta * acc;
        for k in 0..3 {
            suffix[k] += (rgbs[j][k] - cfg.background_rgb[k]) * weights[j];
        }
    }
}

/// Render the full view seen from `pose`, deterministically (midpoint
/// sampling regardless of `cfg.stratified`), channels clamped to [0, 1].
pub fn render_image(
    params: &ModelParams,
    pose: &CameraPose,
    cfg: &RenderConfig,
    enc: &EncodingConfig,
) -> Result<PosedImage> {
    pose.validate()?;
    cfg.validate()?;
    if params.input_dim() != enc.encoded_dim() {
        return Err(Error::Contract(format!(
            "model expects input dim {}, encoding produces {}",
            params.input_dim(),
            enc.encoded_dim()
        )));
    }
    let det = RenderConfig {
        stratified: false,
        ..*cfg
    };
    let origin = pose.position();
    let n = det.samples_per_ray;
    let mut pixels = Vec::with_capacity(pose.width as usize * pose.height as usize);
    // Midpoint depths are the same for every ray.
    let bin = (det.far - det.near) / n as f64;
    let ts: Vec<f64> = (0..n).map(|i| det.near + (i as f64 + 0.5) * bin).collect();
    let mut ws = BatchWorkspace::new();
    let mut encoded = Vec::new();
    let mut sigmas = vec![0.0; n];
    let mut rgbs = vec![[0.0f64; 3]; n];
    for row in 0..pose.height {
        for col in 0..pose.width {
            let dir = pose.ray_direction(row, col);
            begin_batch(params, &mut ws, n);
            for (s, &t) in ts.iter().enumerate() {
                let p = [
                    origin[0] + t * dir[0],
                    origin[1] + t * dir[1],
                    origin[2] + t * dir[2],
                ];
                positional_encode_into(p, enc, &mut encoded);
                ws.set_input(s, &encoded);
            }
            forward_batch(params, &mut ws, &mut sigmas, &mut rgbs);
            let (pixel, _) = volume_render(&sigmas, &rgbs, &ts, &det);
            pixels.push(pixel.map(|c| c.clamp(0.0, 1.0)));
        }
    }
    Ok(PosedImage {
        pose: pose.clone(),
        pixels,
    })
}
