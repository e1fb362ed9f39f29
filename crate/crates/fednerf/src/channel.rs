//! Simulated wireless links: per-round RSSI sampling, the RSSI-to-quality
//! mapping, transmission rates, transfer-time accounting, and the
//! selected-rate-ratio metric with smoothing.

use crate::error::{Error, Result};
use crate::fl::DeviceId;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Received signal strength indicator; larger means a better channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct RssiSample(pub u8);

impl RssiSample {
    pub fn new(value: u8) -> Result<Self> {
        if value > 100 {
            return Err(Error::Contract(format!("RSSI {value} outside 0..=100")));
        }
        Ok(RssiSample(value))
    }
}

/// Discrete channel quality level z in 1..=4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct QualityLevel(pub u8);

/// Quality level from RSSI:
/// RSSI <= 50 -> 1; 50 < RSSI <= 60 -> 2; 60 < RSSI <= 70 -> 3; RSSI > 70 -> 4.
pub fn rssi_to_quality(rssi: RssiSample) -> QualityLevel {
    QualityLevel(match rssi.0 {
        0..=50 => 1,
        51..=60 => 2,
        61..=70 => 3,
        _ => 4,
    })
}

/// Static description of one client's link, around which per-round samples
/// fluctuate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkProfile {
    pub device_id: DeviceId,
    pub base_rssi: u8,
    pub base_rate_mbps: f64,
    #[serde(default = "default_rssi_jitter")]
    pub rssi_jitter: u8,
    #[serde(default = "default_rate_jitter_frac")]
    pub rate_jitter_frac: f64,
}

fn default_rssi_jitter() -> u8 {
    3
}

fn default_rate_jitter_frac() -> f64 {
    0.05
}

impl LinkProfile {
    pub fn validate(&self) -> Result<()> {
        if self.base_rssi > 100 {
            return Err(Error::Contract(format!(
                "device {}: base_rssi {} outside 0..=100",
                self.device_id.0, self.base_rssi
            )));
        }
        if !(self.base_rate_mbps > 0.0) {
            return Err(Error::Contract(format!(
                "device {}: base_rate_mbps must be positive",
                self.device_id.0
            )));
        }
        if !(0.0..1.0).contains(&self.rate_jitter_frac) {
            return Err(Error::Contract(format!(
                "device {}: rate_jitter_frac outside [0, 1)",
                self.device_id.0
            )));
        }
        Ok(())
    }
}

/// Testbed defaults: four clients, measured RSSI (50, 41, 66, 73) and
/// downlink rates (217.48, 197.18, 270.43, 305.81) Mbit/s.
pub fn default_link_profiles() -> Vec<LinkProfile> {
    const BASES: [(u8, f64); 4] = [(50, 217.48), (41, 197.18), (66, 270.43), (73, 305.81)];
    BASES
        .iter()
        .enumerate()
        .map(|(i, &(rssi, rate))| LinkProfile {
            device_id: DeviceId(i as u32 + 1),
            base_rssi: rssi,
            base_rate_mbps: rate,
            rssi_jitter: default_rssi_jitter(),
            rate_jitter_frac: default_rate_jitter_frac(),
        })
        .collect()
}

/// One client's channel state for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelReport {
    pub device_id: DeviceId,
    pub rssi: RssiSample,
    pub z: QualityLevel,
    /// Transmission rate in Mbit/s.
    pub rate: f64,
}

/// Sample this round's channel state: RSSI jittered by a uniform integer in
/// `[-rssi_jitter, +rssi_jitter]` and clamped to 0..=100, rate scaled by a
/// uniform factor in `[1 - rate_jitter_frac, 1 + rate_jitter_frac]`. The
/// caller provides the stream derived for `(device, round)`, which makes the
/// report deterministic in `(seed, device, round)`.
pub fn sample_report(profile: &LinkProfile, rng: &mut impl Rng) -> ChannelReport {
    let j = profile.rssi_jitter as i32;
    let offset = if j > 0 { rng.gen_range(-j..=j) } else { 0 };
    let rssi = RssiSample((profile.base_rssi as i32 + offset).clamp(0, 100) as u8);
    let v = if profile.rate_jitter_frac > 0.0 {
        rng.gen_range(-profile.rate_jitter_frac..=profile.rate_jitter_frac)
    } else {
        0.0
    };
    let rate = profile.base_rate_mbps * (1.0 + v);
    ChannelReport {
        device_id: profile.device_id,
        rssi,
        z: rssi_to_quality(rssi),
        rate,
    }
}

/// Seconds to move `payload_bytes` at `rate_mbps` Mbit/s.
pub fn transfer_seconds(payload_bytes: usize, rate_mbps: f64) -> f64 {
    payload_bytes as f64 * 8.0 / (rate_mbps * 1e6)
}

/// Sum of the selected clients' rates over the sum of everyone's rates.
pub fn selected_rate_ratio(selected: &[DeviceId], reports: &[ChannelReport]) -> Result<f64> {
    if reports.is_empty() {
        return Err(Error::Contract("rate ratio needs at least one report".into()));
    }
    let mut sel_sum = 0.0;
    let mut all_sum = 0.0;
    for r in reports {
        all_sum += r.rate;
        if selected.contains(&r.device_id) {
            sel_sum += r.rate;
        }
    }
    for id in selected {
        if !reports.iter().any(|r| r.device_id == *id) {
            return Err(Error::Contract(format!(
                "selected device {} has no channel report",
                id.0
            )));
        }
    }
    Ok(sel_sum / all_sum)
}

/// Centered moving average: element `t` averages indices
/// `[t - floor(w/2), t + ceil(w/2) - 1]`, truncated at the series edges.
pub fn smooth_ratio_series(series: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "smoothing window must be at least 1");
    let n = series.len();
    let back = window / 2;
    let fwd = window - back; // t .. t + fwd - 1 inclusive
    (0..n)
        .map(|t| {
            let lo = t.saturating_sub(back);
            let hi = (t + fwd).min(n);
            let slice = &series[lo..hi];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}
