//! Experiment execution: wires the dataset, selector, channel model and
//! round engine together for the three run modes, and writes the metrics
//! CSV, render snapshots and the final model file.

use crate::channel::smooth_ratio_series;
use crate::error::{Error, Result};
use crate::fl::client::{ClientSession, RetryPolicy};
use crate::fl::registry::Registry;
use crate::fl::round::{ClientPool, RoundEngine, RoundRecord};
use crate::fl::server::TcpPool;
use crate::fl::sim::SimPool;
use crate::fl::DeviceId;
use crate::harness::config::ExperimentConfig;
use crate::harness::dataset::{load_dataset, partition_views, run_paths, write_ppm};
use crate::harness::scene::generate_views;
use crate::nerf::{render_image, ModelParams, PosedImage};
use crate::rng::{stream, Domain};
use std::path::Path;

pub const METRICS_HEADER: &str =
    "round,selected_ids,mean_psnr,rate_ratio,rate_ratio_smoothed,broadcast_s,train_s,collect_s";

/// Smoothing window for the rate-ratio column: ten rounds centered on each
/// round, truncated at the series edges.
pub const SMOOTH_WINDOW: usize = 10;

/// Everything derived from the config that the run modes share.
pub struct Prepared {
    pub client_views: Vec<Vec<PosedImage>>,
    pub test_views: Vec<PosedImage>,
    pub initial_params: ModelParams,
}

pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    config.validate()?;
    let views = match &config.dataset {
        Some(dir) => load_dataset(dir)?,
        None => generate_views(&config.scene, config.seed)?,
    };
    let (client_views, test_views) =
        partition_views(&views, config.n_clients, config.views_per_client)?;
    let initial_params = ModelParams::init(
        &config.layer_dims(),
        &mut stream(config.seed, Domain::ModelInit, 0, 0),
    );
    Ok(Prepared {
        client_views,
        test_views,
        initial_params,
    })
}

/// Client sessions for every configured device, ascending id.
fn sessions(config: &ExperimentConfig, client_views: &[Vec<PosedImage>]) -> Vec<ClientSession> {
    config
        .sorted_links()
        .into_iter()
        .zip(client_views)
        .map(|(profile, views)| ClientSession {
            device_id: profile.device_id,
            views: views.clone(),
            profile,
            master_seed: config.seed,
            local_iters: config.local_iters,
            rays_per_batch: config.rays_per_batch,
            optimizer: config.optimizer,
            render_cfg: config.render,
            enc_cfg: config.encoding,
            layer_dims: config.layer_dims(),
        })
        .collect()
}

pub struct ExperimentOutput {
    pub records: Vec<RoundRecord>,
    pub final_params: ModelParams,
    /// Mean test PSNR of the freshly initialized model, before any round.
    pub baseline_psnr: f64,
}

/// Run the full experiment in a single process.
pub fn run_sim(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let prepared = prepare(config)?;
    let pool = SimPool {
        sessions: sessions(config, &prepared.client_views),
    };
    drive(config, pool, prepared)
}

/// Run the server side of a distributed experiment; blocks until every
/// client has connected, then drives the rounds over TCP.
pub fn run_server(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let registry_path = config
        .registry
        .as_ref()
        .ok_or_else(|| Error::Config("distributed mode needs a registry path".into()))?;
    let registry = Registry::load(registry_path)?;
    registry.validate_for(config.n_clients)?;
    let server = registry.server()?;
    let prepared = prepare(config)?;
    let mut pool = TcpPool::listen(
        &format!("{}:{}", server.host, server.port),
        config.n_clients,
        config.layer_dims(),
        config.phase_timeout(),
    )?;
    pool.wait_for_all_clients(config.phase_timeout())?;
    drive(config, pool, prepared)
}

/// Run one client process until the server sends FIN.
pub fn run_client(config: &ExperimentConfig, device_id: u32) -> Result<()> {
    if device_id == 0 || device_id > config.n_clients {
        return Err(Error::Config(format!(
            "device id {device_id} outside 1..={}",
            config.n_clients
        )));
    }
    let registry_path = config
        .registry
        .as_ref()
        .ok_or_else(|| Error::Config("distributed mode needs a registry path".into()))?;
    let registry = Registry::load(registry_path)?;
    let server = registry.server()?.clone();
    let prepared = prepare(config)?;
    let session = sessions(config, &prepared.client_views)
        .into_iter()
        .find(|s| s.device_id == DeviceId(device_id))
        .expect("validated id has a session");
    session.run(&server, &RetryPolicy::default())
}

/// The shared round loop: run every round, write outputs, return records.
fn drive<P: ClientPool>(
    config: &ExperimentConfig,
    pool: P,
    prepared: Prepared,
) -> Result<ExperimentOutput> {
    let paths = run_paths(&config.out_dir);
    std::fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    std::fs::create_dir_all(&paths.renders_dir).map_err(|e| Error::io(&paths.renders_dir, e))?;
    if config.save_round_params {
        std::fs::create_dir_all(&paths.params_dir).map_err(|e| Error::io(&paths.params_dir, e))?;
    }
    config.save(&paths.config_json)?;

    let mut engine = RoundEngine::new(
        pool,
        config.sorted_links(),
        config.selection(),
        prepared.initial_params,
        config.seed,
        prepared.test_views,
        config.render,
        config.encoding,
        config.save_round_params,
    )?;

    let baseline_psnr = engine.evaluate_test_views()?;
    log::info!("baseline test PSNR of the initialized model: {baseline_psnr:.3} dB");

    let mut records = Vec::with_capacity(config.rounds as usize);
    for _ in 0..config.rounds {
        let record = engine.run_round()?;
        log::info!(
            "round {}/{}: selected {} psnr {:.3} ratio {:.4}",
            record.round,
            config.rounds,
            join_ids(&record.selected),
            record.mean_psnr,
            record.rate_ratio
        );
        if record.round % config.render_every == 0 || record.round == config.rounds {
            let snapshot = render_image(
                &engine.global.params,
                &engine.test_view_pose(),
                &config.render,
                &config.encoding,
            )?;
            write_ppm(
                &paths.renders_dir.join(format!("round_{:04}.ppm", record.round)),
                &snapshot,
            )?;
        }
        if config.save_round_params {
            engine
                .global
                .params
                .save(&paths.params_dir.join(format!("round_{:04}.bin", record.round)))?;
        }
        records.push(record);
    }
    engine.pool.shutdown()?;

    write_metrics_csv(&paths.metrics_csv, &records)?;
    engine.global.params.save(&paths.model_bin)?;
    Ok(ExperimentOutput {
        records,
        final_params: engine.global.params,
        baseline_psnr,
    })
}

pub fn join_ids(ids: &[DeviceId]) -> String {
    ids.iter()
        .map(|d| d.0.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

/// Write the per-round metrics. The smoothed ratio column is computed over
/// the whole series, so the file is written once at the end of the run.
pub fn write_metrics_csv(path: &Path, records: &[RoundRecord]) -> Result<()> {
    let ratios: Vec<f64> = records.iter().map(|r| r.rate_ratio).collect();
    let smoothed = smooth_ratio_series(&ratios, SMOOTH_WINDOW);
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for (record, smooth) in records.iter().zip(&smoothed) {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            record.round,
            join_ids(&record.selected),
            record.mean_psnr,
            record.rate_ratio,
            smooth,
            record.timings.broadcast_seconds,
            record.timings.train_seconds,
            record.timings.collect_seconds,
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Parsed rows of a metrics CSV, for re-deriving the ratio series.
pub struct MetricsRows {
    pub rounds: Vec<u32>,
    pub selected: Vec<Vec<DeviceId>>,
    pub mean_psnr: Vec<f64>,
    pub rate_ratio: Vec<f64>,
}

pub fn read_metrics_csv(path: &Path) -> Result<MetricsRows> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, what: &str| {
        Error::Config(format!("{} line {}: {what}", path.display(), line + 1))
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == METRICS_HEADER => {}
        _ => return Err(Error::Config(format!("{}: unexpected CSV header", path.display()))),
    }
    let mut rows = MetricsRows {
        rounds: vec![],
        selected: vec![],
        mean_psnr: vec![],
        rate_ratio: vec![],
    };
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(bad(i, "expected 8 columns"));
        }
        rows.rounds
            .push(fields[0].parse().map_err(|_| bad(i, "bad round"))?);
        let ids = fields[1]
            .split(';')
            .map(|s| s.parse::<u32>().map(DeviceId))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad(i, "bad selected_ids"))?;
        rows.selected.push(ids);
        rows.mean_psnr
            .push(fields[2].parse().map_err(|_| bad(i, "bad mean_psnr"))?);
        rows.rate_ratio
            .push(fields[3].parse().map_err(|_| bad(i, "bad rate_ratio"))?);
    }
    Ok(rows)
}

/// Re-emit the raw and smoothed ratio series of a finished run as CSV text.
pub fn export_metrics(run_dir: &Path, window: usize) -> Result<String> {
    let rows = read_metrics_csv(&run_paths(run_dir).metrics_csv)?;
    let smoothed = smooth_ratio_series(&rows.rate_ratio, window);
    let mut out = String::from("round,rate_ratio,rate_ratio_smoothed\n");
    for ((round, ratio), smooth) in rows.rounds.iter().zip(&rows.rate_ratio).zip(&smoothed) {
        out.push_str(&format!("{round},{ratio:.6},{smooth:.6}\n"));
    }
    Ok(out)
}
