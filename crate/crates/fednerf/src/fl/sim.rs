//! Single-process client pool: runs the selected clients' training inline,
//! with transfer times simulated from the round's channel rates.
//!
//! Timing semantics in sim mode: broadcast and collect are the summed
//! transfer times of the MODEL and UPDATE frames over each selected client's
//! sampled rate (sequential transfers over the shared access point);
//! train_seconds is reported as zero since no compute model is simulated.

use crate::channel::{transfer_seconds, ChannelReport};
use crate::error::Result;
use crate::fl::client::ClientSession;
use crate::fl::round::{ClientPool, ClientUpdate, PhaseTimings};
use crate::fl::DeviceId;
use crate::nerf::ModelParams;

pub struct SimPool {
    /// One session per client, ascending device id.
    pub sessions: Vec<ClientSession>,
}

/// Encoded frame sizes (magic + length + type + body).
fn model_frame_bytes(param_count: usize) -> usize {
    7 + 8 + 4 * param_count
}

fn update_frame_bytes(param_count: usize) -> usize {
    7 + 21 + 4 * param_count
}

impl ClientPool for SimPool {
    fn run_round(
        &mut self,
        round: u32,
        selected: &[DeviceId],
        params: &ModelParams,
        reports: &[ChannelReport],
    ) -> Result<(Vec<ClientUpdate>, PhaseTimings)> {
        let mut timings = PhaseTimings::default();
        let mut updates = Vec::with_capacity(selected.len());
        let param_count = params.values.len();
        for id in selected {
            let session = self
                .sessions
                .iter()
                .find(|s| s.device_id == *id)
                .unwrap_or_else(|| panic!("no session for device {id}"));
            let rate = reports
                .iter()
                .find(|r| r.device_id == *id)
                .map(|r| r.rate)
                .expect("selected device has a report");
            timings.broadcast_seconds += transfer_seconds(model_frame_bytes(param_count), rate);

            let trained = session.train_round(round, params)?;
            let report = reports.iter().find(|r| r.device_id == *id).unwrap().clone();
            updates.push(ClientUpdate {
                device_id: *id,
                round,
                num_samples: session.num_samples(),
                // Quantize exactly like the wire would.
                params: trained.quantize_f32(),
                report,
            });
            timings.collect_seconds += transfer_seconds(update_frame_bytes(param_count), rate);
        }
        Ok((updates, timings))
    }
}
