//! Uplink traffic profiles, transmission events, interference sets and SINR.

use rand::Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::Location;
use crate::rng::Fading;

pub const SECONDS_PER_HOUR: f64 = 3600.0;

/// UNB IoT device behaviour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficProfile {
    pub packets_per_hour: f64,
    pub repetitions: u32,
    pub packet_duration_s: f64,
    pub tx_power_w: f64,
    pub signal_bandwidth_hz: f64,
    pub num_bands: usize,
    pub band_width_hz: f64,
}

impl TrafficProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.packets_per_hour >= 0.0 && self.packets_per_hour.is_finite()) {
            return Err(invalid(
                "packets_per_hour",
                "must be finite and non-negative",
            ));
        }
        if self.repetitions < 1 {
            return Err(invalid("repetitions", "at least one repetition"));
        }
        if !(self.packet_duration_s > 0.0) {
            return Err(invalid("packet_duration_s", "must be positive"));
        }
        if self.num_bands < 1 {
            return Err(invalid("num_bands", "at least one band"));
        }
        if !(self.signal_bandwidth_hz > 0.0 && self.signal_bandwidth_hz < self.band_width_hz) {
            return Err(invalid(
                "signal_bandwidth_hz",
                "must be positive and narrower than a band",
            ));
        }
        Ok(())
    }

    /// Total spectrum span M * W.
    pub fn span_hz(&self) -> f64 {
        self.num_bands as f64 * self.band_width_hz
    }

    /// Band index (0-based) holding a center frequency.
    pub fn band_of(&self, frequency_hz: f64) -> usize {
        ((frequency_hz / self.band_width_hz).floor() as usize).min(self.num_bands - 1)
    }
}

/// Incumbent (non-UNB) devices sharing the unlicensed bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncumbentProfile {
    pub packets_per_hour: f64,
    pub repetitions: u32,
    pub packet_duration_s: f64,
    pub tx_power_w: f64,
    pub bandwidth_hz: f64,
    pub band_pmf: Vec<f64>,
}

impl IncumbentProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.packets_per_hour >= 0.0 && self.packets_per_hour.is_finite()) {
            return Err(invalid(
                "incumbent packets_per_hour",
                "must be non-negative",
            ));
        }
        if self.repetitions < 1 {
            return Err(invalid("incumbent repetitions", "at least one"));
        }
        if !(self.packet_duration_s > 0.0) || !(self.bandwidth_hz > 0.0) {
            return Err(invalid(
                "incumbent profile",
                "duration and bandwidth must be positive",
            ));
        }
        validate_pmf(&self.band_pmf)
    }
}

pub fn validate_pmf(pmf: &[f64]) -> Result<()> {
    if pmf.is_empty() || pmf.iter().any(|p| !(*p >= 0.0)) {
        return Err(invalid("band_pmf", "entries must be non-negative"));
    }
    let total: f64 = pmf.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(invalid("band_pmf", format!("sums to {total}, expected 1")));
    }
    Ok(())
}

/// Propagation and decoding constants, powers expressed relative to the IoT
/// transmit power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub pathloss_exponent: f64,
    pub noise_ratio: f64,
    pub incumbent_ratio: f64,
    pub decode_threshold: f64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.pathloss_exponent > 2.0) {
            return Err(invalid("pathloss_exponent", "must exceed 2"));
        }
        if !(self.decode_threshold > 0.0) {
            return Err(invalid("decode_threshold", "must be positive"));
        }
        if !(self.noise_ratio >= 0.0 && self.incumbent_ratio >= 0.0) {
            return Err(invalid("power ratios", "must be non-negative"));
        }
        Ok(())
    }

    /// Path-loss gain `d^-alpha` from a squared distance.
    #[inline]
    pub fn path_gain(&self, squared_distance: f64) -> f64 {
        if self.pathloss_exponent == 4.0 {
            1.0 / (squared_distance * squared_distance)
        } else {
            squared_distance.powf(-0.5 * self.pathloss_exponent)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceKind {
    Iot,
    Incumbent,
}

/// One repetition of one packet on the air.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionEvent {
    /// Stable identifier, used to key fading draws.
    pub id: u64,
    pub kind: SourceKind,
    pub device_id: u32,
    pub packet_index: u32,
    /// 1-based repetition number.
    pub repetition_index: u32,
    pub start_time: f64,
    pub duration: f64,
    pub center_frequency: f64,
    /// 0-based band index.
    pub band: usize,
    pub bandwidth: f64,
    pub source: Location,
}

impl TransmissionEvent {
    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration
    }

    /// True when the two transmissions collide in time and frequency.
    #[inline]
    pub fn overlaps(&self, other: &TransmissionEvent) -> bool {
        self.start_time < other.end_time()
            && other.start_time < self.end_time()
            && (self.center_frequency - other.center_frequency).abs()
                < 0.5 * (self.bandwidth + other.bandwidth)
    }

    /// Whether `other` interferes with this (IoT) transmission. Incumbents
    /// only affect targets in their own band.
    #[inline]
    pub fn is_interfered_by(&self, other: &TransmissionEvent) -> bool {
        if other.kind == SourceKind::Incumbent && other.band != self.band {
            return false;
        }
        self.overlaps(other)
    }
}

/// Half-open time interval in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeWindow {
    pub start: f64,
    pub end: f64,
}

impl TimeWindow {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }
}

fn arrival_times<R: Rng + ?Sized>(
    rate_per_hour: f64,
    window: TimeWindow,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mean = rate_per_hour * window.length() / SECONDS_PER_HOUR;
    if mean <= 0.0 {
        return Ok(Vec::new());
    }
    let n = Poisson::new(mean)
        .map_err(|e| invalid("packets_per_hour", e.to_string()))?
        .sample(rng) as usize;
    let mut times: Vec<f64> = (0..n)
        .map(|_| rng.random_range(window.start..window.end))
        .collect();
    times.sort_by(f64::total_cmp);
    Ok(times)
}

/// IoT events for packets arriving in `window`; ids start at `first_id`.
pub fn generate_iot_events_in<R: Rng + ?Sized>(
    profile: &TrafficProfile,
    devices: &[Location],
    window: TimeWindow,
    first_id: u64,
    rng: &mut R,
) -> Result<Vec<TransmissionEvent>> {
    profile.validate()?;
    let lo = profile.signal_bandwidth_hz / 2.0;
    let hi = profile.span_hz() - profile.signal_bandwidth_hz / 2.0;
    let mut id = first_id;
    let mut events = Vec::new();
    for (device, loc) in devices.iter().enumerate() {
        for (n, t0) in arrival_times(profile.packets_per_hour, window, rng)?
            .into_iter()
            .enumerate()
        {
            for r in 0..profile.repetitions {
                let f = rng.random_range(lo..hi);
                events.push(TransmissionEvent {
                    id,
                    kind: SourceKind::Iot,
                    device_id: device as u32,
                    packet_index: n as u32,
                    repetition_index: r + 1,
                    start_time: t0 + r as f64 * profile.packet_duration_s,
                    duration: profile.packet_duration_s,
                    center_frequency: f,
                    band: profile.band_of(f),
                    bandwidth: profile.signal_bandwidth_hz,
                    source: *loc,
                });
                id += 1;
            }
        }
    }
    Ok(events)
}

/// IoT events for packets arriving in `[0, horizon)`.
pub fn generate_iot_events<R: Rng + ?Sized>(
    profile: &TrafficProfile,
    devices: &[Location],
    horizon: f64,
    rng: &mut R,
) -> Result<Vec<TransmissionEvent>> {
    if !(horizon > 0.0) {
        return Err(invalid("horizon", "must be positive"));
    }
    generate_iot_events_in(profile, devices, TimeWindow::new(0.0, horizon), 0, rng)
}

/// Incumbent events in `window`. Each packet draws its band from the
/// profile's PMF; the carrier is uniform over the band's feasible range and an
/// incumbent as wide as the band is clipped to it.
pub fn generate_incumbent_events_in<R: Rng + ?Sized>(
    profile: &IncumbentProfile,
    band_width_hz: f64,
    devices: &[Location],
    window: TimeWindow,
    first_id: u64,
    rng: &mut R,
) -> Result<Vec<TransmissionEvent>> {
    profile.validate()?;
    let bands =
        WeightedIndex::new(&profile.band_pmf).map_err(|e| invalid("band_pmf", e.to_string()))?;
    let bandwidth = profile.bandwidth_hz.min(band_width_hz);
    let mut id = first_id;
    let mut events = Vec::new();
    for (device, loc) in devices.iter().enumerate() {
        for (n, t0) in arrival_times(profile.packets_per_hour, window, rng)?
            .into_iter()
            .enumerate()
        {
            let band = bands.sample(rng);
            let base = band as f64 * band_width_hz;
            let slack = band_width_hz - bandwidth;
            for r in 0..profile.repetitions {
                let offset = if slack > 0.0 {
                    rng.random_range(0.0..slack)
                } else {
                    0.0
                };
                events.push(TransmissionEvent {
                    id,
                    kind: SourceKind::Incumbent,
                    device_id: device as u32,
                    packet_index: n as u32,
                    repetition_index: r + 1,
                    start_time: t0 + r as f64 * profile.packet_duration_s,
                    duration: profile.packet_duration_s,
                    center_frequency: base + bandwidth / 2.0 + offset,
                    band,
                    bandwidth,
                    source: *loc,
                });
                id += 1;
            }
        }
    }
    Ok(events)
}

/// Incumbent events for packets arriving in `[0, horizon)`.
pub fn generate_incumbent_events<R: Rng + ?Sized>(
    profile: &IncumbentProfile,
    band_width_hz: f64,
    devices: &[Location],
    horizon: f64,
    rng: &mut R,
) -> Result<Vec<TransmissionEvent>> {
    if !(horizon > 0.0) {
        return Err(invalid("horizon", "must be positive"));
    }
    generate_incumbent_events_in(
        profile,
        band_width_hz,
        devices,
        TimeWindow::new(0.0, horizon),
        0,
        rng,
    )
}

/// All events other than `target` that collide with it. Linear scan; the
/// simulator uses the time-indexed version in [`crate::sim::EventStream`].
pub fn interferers_of<'a>(
    target: &TransmissionEvent,
    all: &'a [TransmissionEvent],
) -> Vec<&'a TransmissionEvent> {
    all.iter()
        .filter(|e| e.id != target.id && target.is_interfered_by(e))
        .collect()
}

/// Relative transmit power of an event with respect to IoT devices.
#[inline]
pub fn relative_power(event: &TransmissionEvent, channel: &ChannelParams) -> f64 {
    match event.kind {
        SourceKind::Iot => 1.0,
        SourceKind::Incumbent => channel.incumbent_ratio,
    }
}

/// SINR of `target` at `receiver`.
///
/// `receiver_key` identifies the receiving location for the fading source so
/// that every (event, receiver) link has its own gain.
pub fn sinr_at<F: Fading + ?Sized>(
    target: &TransmissionEvent,
    receiver: &Location,
    receiver_key: u64,
    interferers: &[&TransmissionEvent],
    fading: &F,
    channel: &ChannelParams,
) -> Result<f64> {
    let d2 = target.source.squared_distance_to(receiver);
    if d2 == 0.0 {
        return Err(Error::SingularGeometry);
    }
    let signal = fading.gain(target.id, receiver_key) * channel.path_gain(d2);
    let mut denom = channel.noise_ratio;
    for e in interferers {
        let d2 = e.source.squared_distance_to(receiver);
        denom +=
            relative_power(e, channel) * fading.gain(e.id, receiver_key) * channel.path_gain(d2);
    }
    Ok(signal / denom)
}
