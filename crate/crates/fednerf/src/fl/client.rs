//! Distributed-mode client: connect, HELLO, then train whenever a MODEL
//! arrives, until FIN.

use crate::channel::{sample_report, LinkProfile};
use crate::error::{Error, Result};
use crate::fl::protocol::{read_message, write_message, Message};
use crate::fl::registry::Endpoint;
use crate::fl::DeviceId;
use crate::nerf::{local_train, EncodingConfig, ModelParams, OptimizerSettings, OptimizerState, PosedImage, RenderConfig};
use crate::rng::{stream, Domain};
use std::net::TcpStream;
use std::time::Duration;

/// Connect retry policy: waits of `base * factor^attempt` between attempts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub base: Duration,
    pub factor: u32,
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            base: Duration::from_secs(1),
            factor: 2,
            max_attempts: 5,
        }
    }
}

/// Everything a client needs to answer MODEL messages deterministically.
#[derive(Debug, Clone)]
pub struct ClientSession {
    pub device_id: DeviceId,
    pub views: Vec<PosedImage>,
    pub profile: LinkProfile,
    pub master_seed: u64,
    pub local_iters: u32,
    pub rays_per_batch: usize,
    pub optimizer: OptimizerSettings,
    pub render_cfg: RenderConfig,
    pub enc_cfg: EncodingConfig,
    pub layer_dims: Vec<(usize, usize)>,
}

impl ClientSession {
    pub fn num_samples(&self) -> u32 {
        self.views
            .iter()
            .map(|v| v.pose.width * v.pose.height)
            .sum()
    }

    /// One local training pass for `round`, starting from the broadcast
    /// parameters. Shared verbatim with the single-process simulator, so
    /// both modes run identical arithmetic.
    pub fn train_round(&self, round: u32, broadcast: &ModelParams) -> Result<ModelParams> {
        let opt = OptimizerState::new(broadcast.values.len(), self.optimizer);
        let mut rng = stream(self.master_seed, Domain::LocalTrain, self.device_id.0, round);
        let (trained, _, loss) = local_train(
            broadcast,
            &self.views,
            self.local_iters,
            opt,
            &self.render_cfg,
            &self.enc_cfg,
            self.rays_per_batch,
            &mut rng,
        )?;
        log::debug!(
            "device {} round {round}: final local loss {loss:.6}",
            self.device_id
        );
        Ok(trained)
    }

    /// Connect (with backoff), handshake, and serve MODEL messages until FIN.
    pub fn run(&self, server: &Endpoint, retry: &RetryPolicy) -> Result<()> {
        let mut stream = connect_with_backoff(server, retry)?;
        write_message(
            &mut stream,
            &Message::Hello {
                device_id: self.device_id,
            },
        )
        .map_err(|e| Error::Protocol(format!("send HELLO: {e}")))?;
        log::info!("device {}: connected to {}:{}", self.device_id, server.host, server.port);

        loop {
            match read_message(&mut stream)? {
                Some(Message::Model { round, params }) => {
                    let broadcast = self.model_from_wire(params)?;
                    let trained = self.train_round(round, &broadcast).map_err(|e| match e {
                        Error::TrainingDivergence { iteration, .. } => {
                            Error::TrainingDivergence { round, iteration }
                        }
                        other => other,
                    })?;
                    let report = sample_report(
                        &self.profile,
                        &mut stream_for_report(self.master_seed, self.device_id, round),
                    );
                    write_message(
                        &mut stream,
                        &Message::Update {
                            device_id: self.device_id,
                            round,
                            num_samples: self.num_samples(),
                            rssi: report.rssi.0,
                            rate_mbps_x100: (report.rate * 100.0).round() as u32,
                            params: trained.values.iter().map(|&v| v as f32).collect(),
                        },
                    )
                    .map_err(|e| Error::Protocol(format!("send UPDATE: {e}")))?;
                    log::info!("device {}: answered round {round}", self.device_id);
                }
                Some(Message::Fin) => {
                    log::info!("device {}: FIN received, exiting", self.device_id);
                    return Ok(());
                }
                Some(other) => {
                    return Err(Error::Protocol(format!(
                        "device {}: unexpected {other:?}",
                        self.device_id
                    )))
                }
                None => {
                    return Err(Error::Protocol(format!(
                        "device {}: server closed the connection without FIN",
                        self.device_id
                    )))
                }
            }
        }
    }

    fn model_from_wire(&self, wire: Vec<f32>) -> Result<ModelParams> {
        let expected = ModelParams::count_for(&self.layer_dims);
        if wire.len() != expected {
            return Err(Error::Protocol(format!(
                "MODEL carries {} parameters, configured model has {expected}",
                wire.len()
            )));
        }
        Ok(ModelParams {
            layer_dims: self.layer_dims.clone(),
            values: wire.into_iter().map(f64::from).collect(),
        })
    }
}

fn stream_for_report(seed: u64, device: DeviceId, round: u32) -> rand_chacha::ChaCha8Rng {
    stream(seed, Domain::ChannelReport, device.0, round)
}

/// Dial the server, retrying with exponential backoff on refusal.
pub fn connect_with_backoff(server: &Endpoint, retry: &RetryPolicy) -> Result<TcpStream> {
    let addr = format!("{}:{}", server.host, server.port);
    let mut wait = retry.base;
    let mut last_err = String::new();
    for attempt in 1..=retry.max_attempts {
        match TcpStream::connect(&addr) {
            Ok(stream) => {
                stream
                    .set_nodelay(true)
                    .map_err(|e| Error::Protocol(format!("socket setup: {e}")))?;
                return Ok(stream);
            }
            Err(e) => {
                last_err = e.to_string();
                log::warn!("connect {addr} attempt {attempt}/{}: {e}", retry.max_attempts);
                if attempt < retry.max_attempts {
                    std::thread::sleep(wait);
                    wait *= retry.factor;
                }
            }
        }
    }
    Err(Error::Protocol(format!(
        "could not connect to {addr} after {} attempts: {last_err}",
        retry.max_attempts
    )))
}
