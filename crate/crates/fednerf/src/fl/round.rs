//! The per-round state machine shared by simulated and distributed runs.
//!
//! One round: sample channel reports for all clients, pick k of them,
//! broadcast the global parameters to the selected clients only, collect
//! their trained updates, aggregate, evaluate the held-out test view(s),
//! and emit a metrics record. How the selected clients actually train is
//! abstracted behind [`ClientPool`], which is the only thing that differs
//! between a single-process simulation and a TCP deployment.
//!
//! Parameters pass through f32 at both exchange points in every mode, so a
//! simulated run and a distributed run with the same seed perform identical
//! arithmetic.

use crate::channel::{sample_report, selected_rate_ratio, ChannelReport, LinkProfile};
use crate::error::{Error, Result};
use crate::fl::{aggregate, DeviceId};
use crate::nerf::{psnr, render_image, EncodingConfig, ModelParams, PosedImage, RenderConfig};
use crate::rng::{stream, Domain};
use crate::select::{select, update_queues, FairnessQueues, SelectionConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalModel {
    pub round: u32,
    pub params: ModelParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub device_id: DeviceId,
    pub round: u32,
    /// Training pixels held by the client.
    pub num_samples: u32,
    pub params: ModelParams,
    pub report: ChannelReport,
}

/// Wall-clock (distributed) or simulated (sim) phase durations in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    pub broadcast_seconds: f64,
    pub train_seconds: f64,
    pub collect_seconds: f64,
}

/// One CSV row worth of per-round metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: u32,
    /// Selected device ids, ascending.
    pub selected: Vec<DeviceId>,
    pub mean_psnr: f64,
    pub rate_ratio: f64,
    pub timings: PhaseTimings,
}

/// Executes the broadcast / train / collect phases for the selected clients.
pub trait ClientPool {
    /// Run one round. `params` is already f32-quantized. Must return one
    /// update per selected client, params f32-exact, in any order.
    fn run_round(
        &mut self,
        round: u32,
        selected: &[DeviceId],
        params: &ModelParams,
        reports: &[ChannelReport],
    ) -> Result<(Vec<ClientUpdate>, PhaseTimings)>;

    /// Called once after the last round.
    fn shutdown(&mut self) -> Result<()> {
        Ok(())
    }
}

pub struct RoundEngine<P: ClientPool> {
    pub pool: P,
    profiles: Vec<LinkProfile>,
    selection: SelectionConfig,
    queues: FairnessQueues,
    pub global: GlobalModel,
    master_seed: u64,
    test_views: Vec<PosedImage>,
    render_cfg: RenderConfig,
    enc_cfg: EncodingConfig,
    /// Per-round aggregated parameter snapshots, kept only when requested.
    pub param_history: Option<Vec<ModelParams>>,
}

impl<P: ClientPool> RoundEngine<P> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        pool: P,
        profiles: Vec<LinkProfile>,
        selection: SelectionConfig,
        initial: ModelParams,
        master_seed: u64,
        test_views: Vec<PosedImage>,
        render_cfg: RenderConfig,
        enc_cfg: EncodingConfig,
        keep_param_history: bool,
    ) -> Result<Self> {
        selection.validate(profiles.len())?;
        for p in &profiles {
            p.validate()?;
        }
        if profiles.windows(2).any(|w| w[0].device_id >= w[1].device_id) {
            return Err(Error::Contract("link profiles must be in ascending id order".into()));
        }
        if test_views.is_empty() {
            return Err(Error::Contract("round engine needs at least one test view".into()));
        }
        initial.validate()?;
        let n = profiles.len();
        Ok(RoundEngine {
            pool,
            profiles,
            selection,
            queues: FairnessQueues::new(n),
            global: GlobalModel {
                round: 0,
                params: initial,
            },
            master_seed,
            test_views,
            render_cfg,
            enc_cfg,
            param_history: keep_param_history.then(Vec::new),
        })
    }

    /// Channel reports for every client for round `t`, ascending id order.
    pub fn reports_for_round(&self, t: u32) -> Vec<ChannelReport> {
        self.profiles
            .iter()
            .map(|p| {
                sample_report(
                    p,
                    &mut stream(self.master_seed, Domain::ChannelReport, p.device_id.0, t),
                )
            })
            .collect()
    }

    /// Execute round `self.global.round + 1`.
    pub fn run_round(&mut self) -> Result<RoundRecord> {
        let t = self.global.round + 1;
        let reports = self.reports_for_round(t);
        let selected = select(&reports, &self.queues, &self.selection)?;
        log::debug!("round {t}: selected {:?}", selected.iter().map(|d| d.0).collect::<Vec<_>>());

        let broadcast = self.global.params.quantize_f32();
        let (mut updates, timings) = self
            .pool
            .run_round(t, &selected, &broadcast, &reports)
            .map_err(|e| match e {
                Error::TrainingDivergence { iteration, .. } => Error::TrainingDivergence {
                    round: t,
                    iteration,
                },
                other => other,
            })?;

        if updates.len() != selected.len() {
            return Err(Error::Contract(format!(
                "round {t}: got {} updates for {} selected clients",
                updates.len(),
                selected.len()
            )));
        }
        for u in &updates {
            if !selected.contains(&u.device_id) {
                return Err(Error::Contract(format!(
                    "round {t}: update from unselected device {}",
                    u.device_id
                )));
            }
            if u.round != t {
                return Err(Error::Contract(format!(
                    "round {t}: device {} answered round {}",
                    u.device_id, u.round
                )));
            }
        }
        updates.sort_by_key(|u| u.device_id);

        let new_params = aggregate(&updates)?;
        self.global = GlobalModel {
            round: t,
            params: new_params,
        };
        if let Some(history) = &mut self.param_history {
            history.push(self.global.params.clone());
        }

        let mean_psnr = self.evaluate_test_views()?;
        let rate_ratio = selected_rate_ratio(&selected, &reports)?;
        self.queues = update_queues(&self.queues, &reports, &selected);

        Ok(RoundRecord {
            round: t,
            selected,
            mean_psnr,
            rate_ratio,
            timings,
        })
    }

    /// Pose of the first held-out test view, for render snapshots.
    pub fn test_view_pose(&self) -> crate::nerf::CameraPose {
        self.test_views[0].pose.clone()
    }

    /// Mean PSNR of the current global model over the held-out test views.
    pub fn evaluate_test_views(&self) -> Result<f64> {
        let mut sum = 0.0;
        for view in &self.test_views {
            let rendered = render_image(&self.global.params, &view.pose, &self.render_cfg, &self.enc_cfg)?;
            sum += psnr(&rendered, view)?;
        }
        Ok(sum / self.test_views.len() as f64)
    }
}
