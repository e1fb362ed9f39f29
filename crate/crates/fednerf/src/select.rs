//! Channel-aware partial client selection.
//!
//! Each round every client gets a linear score `q * r_hat + queue`, where
//! `r_hat` is its normalized transmission rate (or quality level) and
//! `queue` counts the rounds since it was last selected. The top-k scores
//! win, ties broken by ascending device id. At `q = 0` this degenerates to
//! exact round-robin, so every client's data keeps reaching the model; as
//! `q` grows it approaches rate-greedy selection, trading fairness for
//! cheaper transmissions.

use crate::channel::ChannelReport;
use crate::error::{Error, Result};
use crate::fl::DeviceId;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMode {
    /// Normalize each client's measured rate by the round's maximum rate.
    MeasuredRate,
    /// Use the discrete quality level z / 4.
    QualityLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Clients selected per round.
    pub k: usize,
    /// Trade-off weight between transmission rate and fairness.
    pub q: f64,
    pub rate_mode: RateMode,
}

impl SelectionConfig {
    pub fn validate(&self, n_clients: usize) -> Result<()> {
        if self.k == 0 || self.k > n_clients {
            return Err(Error::Contract(format!(
                "select_k {} outside 1..={n_clients}",
                self.k
            )));
        }
        if !(self.q >= 0.0) {
            return Err(Error::Contract("q must be non-negative".into()));
        }
        Ok(())
    }
}

/// Rounds-since-selected counters, one per client, keyed by position in the
/// ascending-id client list.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessQueues {
    pub rounds_waiting: Vec<u64>,
}

impl FairnessQueues {
    pub fn new(n_clients: usize) -> Self {
        FairnessQueues {
            rounds_waiting: vec![0; n_clients],
        }
    }
}

/// Normalized rate of `report` among `all`, in (0, 1].
pub fn normalized_rate(report: &ChannelReport, all: &[ChannelReport], mode: RateMode) -> f64 {
    match mode {
        RateMode::MeasuredRate => {
            let max = all.iter().map(|r| r.rate).fold(f64::MIN, f64::max);
            report.rate / max
        }
        RateMode::QualityLevel => report.z.0 as f64 / 4.0,
    }
}

/// Pick `cfg.k` clients by score. `reports` must be in ascending device-id
/// order, parallel to `queues`. Returns the selected ids in ascending order.
///
/// The per-client scores decompose over subsets, so this equals the argmax
/// of the summed score over all k-subsets, with ties resolved toward the
/// lexicographically smallest id set.
pub fn select(
    reports: &[ChannelReport],
    queues: &FairnessQueues,
    cfg: &SelectionConfig,
) -> Result<Vec<DeviceId>> {
    let n = reports.len();
    if n < cfg.k {
        return Err(Error::Contract(format!(
            "cannot select {} of {n} clients",
            cfg.k
        )));
    }
    if queues.rounds_waiting.len() != n {
        return Err(Error::Contract("fairness queues sized unlike reports".into()));
    }
    let mut scored: Vec<(f64, DeviceId)> = reports
        .iter()
        .zip(&queues.rounds_waiting)
        .map(|(r, &waiting)| {
            (
                cfg.q * normalized_rate(r, reports, cfg.rate_mode) + waiting as f64,
                r.device_id,
            )
        })
        .collect();
    // Descending score, ascending id among ties.
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut chosen: Vec<DeviceId> = scored[..cfg.k].iter().map(|&(_, id)| id).collect();
    chosen.sort();
    Ok(chosen)
}

/// Reset the selected clients' queues and age everyone else by one round.
pub fn update_queues(queues: &FairnessQueues, reports: &[ChannelReport], selected: &[DeviceId]) -> FairnessQueues {
    FairnessQueues {
        rounds_waiting: reports
            .iter()
            .zip(&queues.rounds_waiting)
            .map(|(r, &waiting)| {
                if selected.contains(&r.device_id) {
                    0
                } else {
                    waiting + 1
                }
            })
            .collect(),
    }
}
