//! Experiment configuration: explicit units on every field, TOML on disk.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::AreaRegion;
use crate::planner::Mode;
use crate::sim::RadioEnvironment;
use crate::traffic::{validate_pmf, ChannelParams, IncumbentProfile, TrafficProfile};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1e3
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// All parameters of one experiment. Defaults reproduce the reference
/// deployment at desk scale (10 km disk, 100 Monte-Carlo iterations).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub noise_power_dbm: f64,
    pub iot_tx_power_dbm: f64,
    pub incumbent_tx_power_dbm: f64,
    /// Packets per device per hour (N).
    pub packets_per_hour: f64,
    /// Repetitions per packet (R).
    pub repetitions: u32,
    pub incumbent_packets_per_hour: f64,
    pub incumbent_repetitions: u32,
    pub iot_payload_bytes: f64,
    pub incumbent_payload_bytes: f64,
    /// Repetition airtime; defaults to payload bits over the signal bandwidth.
    pub packet_duration_s: Option<f64>,
    pub incumbent_packet_duration_s: Option<f64>,
    /// IoT signal bandwidth (w).
    pub signal_bandwidth_hz: f64,
    /// Incumbent signal bandwidth (w_I).
    pub incumbent_bandwidth_hz: f64,
    /// Width of one multiplexing band (W).
    pub band_width_hz: f64,
    pub num_bands: usize,
    pub decode_threshold_db: f64,
    pub pathloss_exponent: f64,
    pub training_s: f64,
    pub evaluation_s: f64,
    pub iot_density_per_km2: f64,
    pub incumbent_density_per_km2: f64,
    /// Installed base stations (B).
    pub installed: usize,
    /// Candidate locations (C).
    pub candidates: usize,
    /// New base stations to place.
    pub delta_b: usize,
    /// Temporary training-only base stations for the model-based method.
    pub temporary: usize,
    pub region: AreaRegion,
    /// Solver time limit (T_sol).
    pub solver_time_limit_s: f64,
    pub mc_iterations: usize,
    pub seed: u64,
    /// JDP estimates demanded per band by the model-based training plan.
    pub jdp_demand_per_band: usize,
    pub viable_cap: usize,
    pub replay_cap: usize,
    /// Fixed incumbent band PMF; drawn uniformly from the simplex each
    /// iteration when absent.
    pub incumbent_pmf: Option<Vec<f64>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            noise_power_dbm: -146.0,
            iot_tx_power_dbm: 14.0,
            incumbent_tx_power_dbm: 14.0,
            packets_per_hour: 3.0,
            repetitions: 3,
            incumbent_packets_per_hour: 3.0,
            incumbent_repetitions: 1,
            iot_payload_bytes: 20.0,
            incumbent_payload_bytes: 200.0,
            packet_duration_s: None,
            incumbent_packet_duration_s: None,
            signal_bandwidth_hz: 600.0,
            incumbent_bandwidth_hz: 200e3,
            band_width_hz: 200e3,
            num_bands: 3,
            decode_threshold_db: 10.0,
            pathloss_exponent: 4.0,
            training_s: 600.0,
            evaluation_s: 3600.0,
            iot_density_per_km2: 50.0,
            incumbent_density_per_km2: 50.0,
            installed: 6,
            candidates: 0,
            delta_b: 0,
            temporary: 0,
            region: AreaRegion::disk(10_000.0),
            solver_time_limit_s: 10.0,
            mc_iterations: 100,
            seed: 1,
            jdp_demand_per_band: 10,
            viable_cap: 100_000,
            replay_cap: 100_000,
            incumbent_pmf: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let non_negative = [
            ("packets_per_hour", self.packets_per_hour),
            (
                "incumbent_packets_per_hour",
                self.incumbent_packets_per_hour,
            ),
            ("iot_density_per_km2", self.iot_density_per_km2),
            ("incumbent_density_per_km2", self.incumbent_density_per_km2),
            ("training_s", self.training_s),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(
                    name,
                    format!("must be finite and non-negative, got {v}"),
                ));
            }
        }
        let positive = [
            ("iot_payload_bytes", self.iot_payload_bytes),
            ("incumbent_payload_bytes", self.incumbent_payload_bytes),
            ("signal_bandwidth_hz", self.signal_bandwidth_hz),
            ("incumbent_bandwidth_hz", self.incumbent_bandwidth_hz),
            ("band_width_hz", self.band_width_hz),
            ("evaluation_s", self.evaluation_s),
            ("solver_time_limit_s", self.solver_time_limit_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        if self.delta_b > self.candidates {
            return Err(invalid("delta_b", "exceeds the number of candidates"));
        }
        if self.installed == 0 && self.delta_b == 0 {
            return Err(invalid("installed", "no base station to assign"));
        }
        if let Some(pmf) = &self.incumbent_pmf {
            if pmf.len() != self.num_bands {
                return Err(invalid("incumbent_pmf", "needs one entry per band"));
            }
            validate_pmf(pmf)?;
        }
        self.region.validate()?;
        self.environment(vec![
            1.0 / self.num_bands.max(1) as f64;
            self.num_bands.max(1)
        ])
        .validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn iot_density_per_m2(&self) -> f64 {
        self.iot_density_per_km2 * 1e-6
    }

    pub fn incumbent_density_per_m2(&self) -> f64 {
        self.incumbent_density_per_km2 * 1e-6
    }

    pub fn decode_threshold(&self) -> f64 {
        db_to_linear(self.decode_threshold_db)
    }

    pub fn iot_packet_duration_s(&self) -> f64 {
        self.packet_duration_s
            .unwrap_or(8.0 * self.iot_payload_bytes / self.signal_bandwidth_hz)
    }

    pub fn incumbent_duration_s(&self) -> f64 {
        self.incumbent_packet_duration_s
            .unwrap_or(8.0 * self.incumbent_payload_bytes / self.incumbent_bandwidth_hz)
    }

    pub fn traffic(&self) -> TrafficProfile {
        TrafficProfile {
            packets_per_hour: self.packets_per_hour,
            repetitions: self.repetitions,
            packet_duration_s: self.iot_packet_duration_s(),
            tx_power_w: dbm_to_watts(self.iot_tx_power_dbm),
            signal_bandwidth_hz: self.signal_bandwidth_hz,
            num_bands: self.num_bands,
            band_width_hz: self.band_width_hz,
        }
    }

    pub fn incumbents(&self, band_pmf: Vec<f64>) -> IncumbentProfile {
        IncumbentProfile {
            packets_per_hour: self.incumbent_packets_per_hour,
            repetitions: self.incumbent_repetitions,
            packet_duration_s: self.incumbent_duration_s(),
            tx_power_w: dbm_to_watts(self.incumbent_tx_power_dbm),
            bandwidth_hz: self.incumbent_bandwidth_hz,
            band_pmf,
        }
    }

    pub fn channel(&self) -> ChannelParams {
        let p = dbm_to_watts(self.iot_tx_power_dbm);
        ChannelParams {
            pathloss_exponent: self.pathloss_exponent,
            noise_ratio: dbm_to_watts(self.noise_power_dbm) / p,
            incumbent_ratio: dbm_to_watts(self.incumbent_tx_power_dbm) / p,
            decode_threshold: self.decode_threshold(),
        }
    }

    pub fn environment(&self, band_pmf: Vec<f64>) -> RadioEnvironment {
        RadioEnvironment {
            traffic: self.traffic(),
            incumbents: self.incumbents(band_pmf),
            channel: self.channel(),
        }
    }

    pub fn solver_time_limit(&self) -> std::time::Duration {
        std::time::Duration::from_secs_f64(self.solver_time_limit_s)
    }

    /// Per-band installed floor used by the baselines and training.
    pub fn band_floor(&self) -> usize {
        self.installed / self.num_bands.max(1)
    }

    /// Training sites of a given method beyond the installed stations.
    pub fn training_extra_sites(&self, mode: Mode) -> usize {
        match mode {
            Mode::Mod => self.temporary,
            Mode::Meas if self.delta_b > 0 => self.candidates,
            Mode::Meas => 0,
        }
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    ExperimentConfig::from_toml(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
