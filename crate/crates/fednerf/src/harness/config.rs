//! Experiment configuration: one JSON file drives the simulator, the server
//! and every client, so all of them derive identical datasets, streams and
//! schedules from the shared seed.

use crate::channel::{default_link_profiles, LinkProfile};
use crate::error::{Error, Result};
use crate::harness::scene::SceneSpec;
use crate::nerf::{EncodingConfig, OptimizerSettings, RenderConfig};
use crate::select::{RateMode, SelectionConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub rounds: u32,
    pub local_iters: u32,
    pub n_clients: u32,
    pub select_k: usize,
    pub q: f64,
    pub rate_mode: RateMode,
    pub seed: u64,
    pub views_per_client: u32,
    pub rays_per_batch: usize,
    /// Hidden layer widths of the scene MLP.
    pub hidden_dims: Vec<usize>,
    pub render: RenderConfig,
    pub encoding: EncodingConfig,
    pub optimizer: OptimizerSettings,
    pub links: Vec<LinkProfile>,
    pub scene: SceneSpec,
    /// Load this dataset directory instead of generating the scene.
    pub dataset: Option<PathBuf>,
    /// Registry file, required in distributed mode.
    pub registry: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Write a test-view render every this many rounds.
    pub render_every: u32,
    pub phase_timeout_secs: u64,
    /// Keep per-round aggregated parameters under `out_dir/params/`.
    pub save_round_params: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            rounds: 400,
            local_iters: 100,
            n_clients: 4,
            select_k: 2,
            q: 1.0,
            rate_mode: RateMode::MeasuredRate,
            seed: 42,
            views_per_client: 4,
            rays_per_batch: 256,
            hidden_dims: vec![64, 64],
            render: RenderConfig::default(),
            encoding: EncodingConfig::default(),
            optimizer: OptimizerSettings::default(),
            links: default_link_profiles(),
            scene: SceneSpec::default(),
            dataset: None,
            registry: None,
            out_dir: PathBuf::from("fednerf-run"),
            render_every: 50,
            phase_timeout_secs: 120,
            save_round_params: false,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |msg: String| Err(Error::Config(msg));
        if self.rounds == 0 {
            return cfg_err("rounds must be at least 1".into());
        }
        if self.local_iters == 0 {
            return cfg_err("local_iters must be at least 1".into());
        }
        if self.n_clients == 0 {
            return cfg_err("n_clients must be at least 1".into());
        }
        if self.select_k == 0 || self.select_k > self.n_clients as usize {
            return cfg_err(format!(
                "select_k {} outside 1..={}",
                self.select_k, self.n_clients
            ));
        }
        if !(self.q >= 0.0) {
            return cfg_err("q must be non-negative".into());
        }
        if self.views_per_client == 0 {
            return cfg_err("views_per_client must be at least 1".into());
        }
        if self.rays_per_batch == 0 {
            return cfg_err("rays_per_batch must be at least 1".into());
        }
        if self.hidden_dims.is_empty() {
            return cfg_err("hidden_dims must name at least one layer".into());
        }
        if self.render_every == 0 {
            return cfg_err("render_every must be at least 1".into());
        }
        self.render.validate().map_err(to_config)?;
        self.scene.validate()?;

        if self.links.len() != self.n_clients as usize {
            return cfg_err(format!(
                "links describes {} devices, n_clients is {}",
                self.links.len(),
                self.n_clients
            ));
        }
        let mut ids: Vec<u32> = self.links.iter().map(|l| l.device_id.0).collect();
        ids.sort_unstable();
        if ids != (1..=self.n_clients).collect::<Vec<_>>() {
            return cfg_err(format!(
                "links must cover device ids 1..={} exactly, got {ids:?}",
                self.n_clients
            ));
        }
        for link in &self.links {
            link.validate().map_err(to_config)?;
        }
        Ok(())
    }

    pub fn selection(&self) -> SelectionConfig {
        SelectionConfig {
            k: self.select_k,
            q: self.q,
            rate_mode: self.rate_mode,
        }
    }

    /// Link profiles in ascending device-id order.
    pub fn sorted_links(&self) -> Vec<LinkProfile> {
        let mut links = self.links.clone();
        links.sort_by_key(|l| l.device_id);
        links
    }

    /// MLP layer chain: encoded input through the hidden widths to the
    /// 4-wide density/color head.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut prev = self.encoding.encoded_dim();
        for &h in &self.hidden_dims {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, 4));
        dims
    }

    pub fn phase_timeout(&self) -> std::time::Duration {
        std::time::Duration::from_secs(self.phase_timeout_secs)
    }
}

fn to_config(e: Error) -> Error {
    Error::Config(e.to_string())
}
