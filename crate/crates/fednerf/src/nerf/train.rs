//! Training: rendering loss with analytic gradients, Adam, and the local
//! training loop run by a client within one round.

use crate::error::{Error, Result};
use crate::nerf::camera::PosedImage;
use crate::nerf::encoding::{positional_encode_into, EncodingConfig};
use crate::nerf::mlp::{backward_batch, begin_batch, forward_batch, BatchWorkspace, ModelParams};
use crate::nerf::render::{sample_along_ray_into, volume_render, volume_render_backward, RenderConfig};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct RayBatch {
    pub origins: Vec<[f64; 3]>,
    /// Unit-norm world-space directions.
    pub directions: Vec<[f64; 3]>,
    pub target_rgb: Vec<[f64; 3]>,
}

impl RayBatch {
    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.origins.len() != self.directions.len() || self.origins.len() != self.target_rgb.len() {
            return Err(Error::Contract("ray batch arrays disagree on length".into()));
        }
        for d in &self.directions {
            let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(Error::Contract(format!("ray direction norm {norm} is not 1")));
            }
        }
        if !self
            .target_rgb
            .iter()
            .all(|t| t.iter().all(|c| (0.0..=1.0).contains(c)))
        {
            return Err(Error::Contract("ray target outside [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            // Desk-scale runs train for a few thousand steps; the small MLP
            // needs this much step size to plateau within that budget.
            learning_rate: 2e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam state. Clients start from a fresh state every round.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step_count: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub settings: OptimizerSettings,
}

impl OptimizerState {
    pub fn new(param_count: usize, settings: OptimizerSettings) -> Self {
        OptimizerState {
            step_count: 0,
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            settings,
        }
    }

    pub fn validate(&self, param_count: usize) -> Result<()> {
        if self.first_moment.len() != param_count || self.second_moment.len() != param_count {
            return Err(Error::Contract("optimizer moment vectors sized unlike parameters".into()));
        }
        let s = &self.settings;
        if !(0.0..1.0).contains(&s.beta1) || !(0.0..1.0).contains(&s.beta2) {
            return Err(Error::Contract("adam betas must lie in [0, 1)".into()));
        }
        if !(s.learning_rate >= 0.0) || !(s.epsilon > 0.0) {
            return Err(Error::Contract("learning_rate must be >= 0 and epsilon > 0".into()));
        }
        Ok(())
    }

    /// One Adam update with bias correction. A zero learning rate leaves the
    /// parameters bit-identical while still advancing the moments.
    pub fn step(&mut self, values: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(values.len(), grad.len());
        let s = self.settings;
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - s.beta1.powi(t);
        let c2 = 1.0 - s.beta2.powi(t);
        for i in 0..values.len() {
            let g = grad[i];
            let m = s.beta1 * self.first_moment[i] + (1.0 - s.beta1) * g;
            let v = s.beta2 * self.second_moment[i] + (1.0 - s.beta2) * g * g;
            self.first_moment[i] = m;
            self.second_moment[i] = v;
            values[i] -= s.learning_rate * (m / c1) / ((v / c2).sqrt() + s.epsilon);
        }
    }
}

/// Mean squared error between rendered and target colors over the batch,
/// plus its exact gradient w.r.t. every model parameter.
///
/// Sampling draws are consumed ray by ray in batch order; a given `(batch,
/// cfg, rng seed)` triple always evaluates the same loss.
pub fn loss_and_gradient(
    params: &ModelParams,
    batch: &RayBatch,
    cfg: &RenderConfig,
    enc: &EncodingConfig,
    rng: &mut impl Rng,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Contract("ray batch is empty".into()));
    }
    if params.input_dim() != enc.encoded_dim() {
        return Err(Error::Contract(format!(
            "model expects input dim {}, encoding produces {}",
            params.input_dim(),
            enc.encoded_dim()
        )));
    }
    let n_rays = batch.len();
    let denom = (n_rays * 3) as f64;
    let mut grad = vec![0.0; params.values.len()];
    let mut loss_sum = 0.0;

    let n = cfg.samples_per_ray;
    let mut ws = BatchWorkspace::new();
    let mut ts: Vec<f64> = Vec::new();
    let mut encoded: Vec<f64> = Vec::new();
    let mut sigmas = vec![0.0; n];
    let mut rgbs = vec![[0.0f64; 3]; n];
    let mut d_sigma = vec![0.0; n];
    let mut d_rgb = vec![[0.0f64; 3]; n];
    let mut d_raw = vec![0.0; 4 * n];
    for r in 0..n_rays {
        let o = batch.origins[r];
        let d = batch.directions[r];
        sample_along_ray_into(cfg, rng, &mut ts);

        begin_batch(params, &mut ws, n);
        for (s, &t) in ts.iter().enumerate() {
            let p = [o[0] + t * d[0], o[1] + t * d[1], o[2] + t * d[2]];
            positional_encode_into(p, enc, &mut encoded);
            ws.set_input(s, &encoded);
        }
        forward_batch(params, &mut ws, &mut sigmas, &mut rgbs);

        let (pixel, weights) = volume_render(&sigmas, &rgbs, &ts, cfg);
        let mut d_pixel = [0.0f64; 3];
        for k in 0..3 {
            let residual = pixel[k] - batch.target_rgb[r][k];
            loss_sum += residual * residual;
            d_pixel[k] = 2.0 * residual / denom;
        }

        volume_render_backward(&rgbs, &ts, cfg, &weights, d_pixel, &mut d_sigma, &mut d_rgb);

        // Head derivatives from the head outputs themselves:
        // softplus'(raw0) = sigmoid(raw0) = 1 - exp(-sigma);
        // sigmoid'(raw_k) = rgb_k * (1 - rgb_k).
        for s in 0..n {
            d_raw[s] = d_sigma[s] * (1.0 - (-sigmas[s]).exp());
            for k in 0..3 {
                d_raw[(k + 1) * n + s] = d_rgb[s][k] * rgbs[s][k] * (1.0 - rgbs[s][k]);
            }
        }
        backward_batch(params, &mut ws, &d_raw, &mut grad);
    }

    let loss = loss_sum / denom;
    if !loss.is_finite() {
        return Err(Error::TrainingDivergence {
            round: 0,
            iteration: 0,
        });
    }
    Ok((loss, grad))
}

/// Run `iters` Adam steps over ray batches sampled uniformly from all pixels
/// of `images`. Deterministic given `(params, opt, rng seed)`.
pub fn local_train(
    params: &ModelParams,
    images: &[PosedImage],
    iters: u32,
    mut opt: OptimizerState,
    cfg: &RenderConfig,
    enc: &EncodingConfig,
    rays_per_batch: usize,
    rng: &mut impl Rng,
) -> Result<(ModelParams, OptimizerState, f64)> {
    if images.is_empty() {
        return Err(Error::Contract("local training needs at least one image".into()));
    }
    if iters == 0 {
        return Err(Error::Contract("local training needs at least one iteration".into()));
    }
    opt.validate(params.values.len())?;
    cfg.validate()?;

    // Flat index over every pixel of every image.
    let counts: Vec<usize> = images
        .iter()
        .map(|im| im.pose.width as usize * im.pose.height as usize)
        .collect();
    let total: usize = counts.iter().sum();

    let mut current = params.clone();
    let mut last_loss = 0.0;
    for iteration in 0..iters {
        let mut batch = RayBatch {
            origins: Vec::with_capacity(rays_per_batch),
            directions: Vec::with_capacity(rays_per_batch),
            target_rgb: Vec::with_capacity(rays_per_batch),
        };
        for _ in 0..rays_per_batch {
            let mut idx = rng.gen_range(0..total as u64) as usize;
            let mut img = 0;
            while idx >= counts[img] {
                idx -= counts[img];
                img += 1;
            }
            let image = &images[img];
            let w = image.pose.width as usize;
            let (row, col) = ((idx / w) as u32, (idx % w) as u32);
            batch.origins.push(image.pose.position());
            batch.directions.push(image.pose.ray_direction(row, col));
            batch.target_rgb.push(image.pixels[idx]);
        }

        let (loss, grad) = loss_and_gradient(&current, &batch, cfg, enc, rng).map_err(|e| match e {
            Error::TrainingDivergence { round, .. } => Error::TrainingDivergence {
                round,
                iteration,
            },
            other => other,
        })?;
        opt.step(&mut current.values, &grad);
        last_loss = loss;
    }
    Ok((current, opt, last_loss))
}
