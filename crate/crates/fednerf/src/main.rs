use clap::{Parser, Subcommand, ValueEnum};
use fednerf::error::{Error, Result};
use fednerf::harness::{self, ExperimentConfig, SceneSpec};
use fednerf::nerf::{EncodingConfig, ModelParams, RenderConfig};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "fednerf", about = "Federated NeRF training with channel-aware client selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Sim,
    Server,
    Client,
}

#[derive(Subcommand)]
enum Command {
    /// Ray-trace the procedural scene into a dataset directory.
    GenerateScene {
        /// Scene spec JSON; omitted fields take their defaults.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run an experiment in simulation or as one distributed node.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Sim)]
        mode: Mode,
        /// Client device id (client mode only).
        #[arg(long)]
        device_id: Option<u32>,
    },
    /// Mean PSNR of a saved model over listed dataset views.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// View indices, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        views: Vec<usize>,
        /// Pull render/encoding settings from this experiment config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Re-emit the raw and smoothed rate-ratio series of a finished run.
    ExportMetrics {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value_t = fednerf::harness::run::SMOOTH_WINDOW)]
        window: usize,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FEDNERF_LOG", "info")).init();
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::GenerateScene { spec, out, seed } => {
            let scene = match spec {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                    serde_json::from_str::<SceneSpec>(&text)
                        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
                }
                None => SceneSpec::default(),
            };
            let views = harness::generate_scene(&scene, seed, &out)?;
            println!("wrote {} views to {}", views.len(), out.display());
            Ok(())
        }
        Command::Run {
            config,
            mode,
            device_id,
        } => {
            let config = ExperimentConfig::load(&config)?;
            match mode {
                Mode::Sim => {
                    let output = harness::run_sim(&config)?;
                    report_run(&config, &output);
                    Ok(())
                }
                Mode::Server => {
                    let output = harness::run_server(&config)?;
                    report_run(&config, &output);
                    Ok(())
                }
                Mode::Client => {
                    let id = device_id
                        .ok_or_else(|| Error::Config("client mode needs --device-id".into()))?;
                    harness::run_client(&config, id)
                }
            }
        }
        Command::Evaluate {
            model,
            dataset,
            views,
            config,
        } => {
            let params = ModelParams::load(&model)?;
            let (render, encoding) = match config {
                Some(path) => {
                    let config = ExperimentConfig::load(&path)?;
                    (config.render, config.encoding)
                }
                None => (RenderConfig::default(), infer_encoding(&params)?),
            };
            let mean = harness::evaluate_views(&params, &dataset, &views, &render, &encoding)?;
            println!("mean PSNR over {} view(s): {mean:.4} dB", views.len());
            Ok(())
        }
        Command::ExportMetrics { run, window } => {
            print!("{}", harness::export_metrics(&run, window)?);
            Ok(())
        }
    }
}

fn report_run(config: &ExperimentConfig, output: &harness::ExperimentOutput) {
    let last = output.records.last().expect("at least one round");
    println!(
        "finished {} rounds: baseline {:.3} dB -> final test PSNR {:.3} dB",
        output.records.len(),
        output.baseline_psnr,
        last.mean_psnr
    );
    println!("outputs in {}", config.out_dir.display());
}

/// Recover the encoding config from a model's input width.
fn infer_encoding(params: &ModelParams) -> Result<EncodingConfig> {
    let dim = params.input_dim();
    for include_input in [true, false] {
        let base = if include_input { 3 } else { 0 };
        if dim >= base && (dim - base) % 6 == 0 {
            return Ok(EncodingConfig {
                l_pos: (dim - base) / 6,
                include_input,
            });
        }
    }
    Err(Error::Config(format!(
        "cannot infer encoding from model input dim {dim}; pass --config"
    )))
}
