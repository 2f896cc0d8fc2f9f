//! Stochastic-geometry models of decoding probabilities.
//!
//! Active devices at any time and frequency are treated as a homogeneous
//! Poisson point process whose density follows from the duty cycle of the
//! traffic. With Rayleigh fading and negligible noise this gives a Gaussian
//! shaped success probability in the link distance, which is then averaged
//! over uniformly placed sources.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{distance, AreaRegion, Location, NetworkLayout};
use crate::optimize::ObjectiveCoefficients;
use crate::quadrature::{region_mean, DEFAULT_TOLERANCE};
use crate::traffic::{validate_pmf, IncumbentProfile, TrafficProfile, SECONDS_PER_HOUR};

fn check_probability(p: f64) -> Result<f64> {
    if p > 1.0 {
        Err(Error::ActivityProbability(p))
    } else {
        Ok(p)
    }
}

/// Probability that an IoT device is active in the vulnerability window of a
/// given transmission: `2 N R T / 1 h * 2 w / (M W)`.
pub fn activity_probability(traffic: &TrafficProfile) -> Result<f64> {
    traffic.validate()?;
    let time =
        2.0 * traffic.packets_per_hour * traffic.repetitions as f64 * traffic.packet_duration_s
            / SECONDS_PER_HOUR;
    let freq = 2.0 * traffic.signal_bandwidth_hz / traffic.span_hz();
    check_probability(time * freq)
}

/// Density of active IoT devices per square meter for `devices` devices.
pub fn active_density(traffic: &TrafficProfile, devices: f64, region: &AreaRegion) -> Result<f64> {
    if !(devices >= 0.0) {
        return Err(invalid("devices", "must be non-negative"));
    }
    region.validate()?;
    Ok(devices * activity_probability(traffic)? / region.area())
}

/// Probability that an incumbent device transmits a packet overlapping an
/// IoT repetition in the incumbent's band. Time overlap occurs within a
/// window of `T + T_I`; frequency overlap requires the centers to be within
/// `(w + w_I) / 2`, which for an incumbent as wide as the band is certain.
pub fn incumbent_activity_probability(
    incumbents: &IncumbentProfile,
    traffic: &TrafficProfile,
) -> Result<f64> {
    incumbents.validate()?;
    traffic.validate()?;
    let time = incumbents.packets_per_hour
        * incumbents.repetitions as f64
        * (traffic.packet_duration_s + incumbents.packet_duration_s)
        / SECONDS_PER_HOUR;
    let w_i = incumbents.bandwidth_hz.min(traffic.band_width_hz);
    let freq = ((traffic.signal_bandwidth_hz + w_i) / traffic.band_width_hz).min(1.0);
    check_probability(time * freq)
}

/// Per-band density of active incumbents; band `m` hosts a fraction
/// `band_pmf[m]` of the incumbent packets.
pub fn incumbent_active_density(
    incumbents: &IncumbentProfile,
    traffic: &TrafficProfile,
    devices: f64,
    region: &AreaRegion,
) -> Result<Vec<f64>> {
    if !(devices >= 0.0) {
        return Err(invalid("devices", "must be non-negative"));
    }
    region.validate()?;
    validate_pmf(&incumbents.band_pmf)?;
    let p = incumbent_activity_probability(incumbents, traffic)?;
    let area = region.area();
    Ok(incumbents
        .band_pmf
        .iter()
        .map(|q| devices * q * p / area)
        .collect())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 2.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(invalid(
            "pathloss_exponent",
            format!("must exceed 2, got {alpha}"),
        ))
    }
}

/// Interference coefficient `pi (lambda + P_I^(2/alpha) lambda_I) (2 pi / alpha) / sin(2 pi / alpha)`.
pub fn epsilon(
    lambda: f64,
    lambda_incumbent: f64,
    incumbent_ratio: f64,
    alpha: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    if lambda < 0.0 || lambda_incumbent < 0.0 || incumbent_ratio < 0.0 {
        return Err(invalid(
            "epsilon",
            "densities and power ratio must be non-negative",
        ));
    }
    let k = 2.0 * PI / alpha;
    Ok(PI * (lambda + incumbent_ratio.powf(2.0 / alpha) * lambda_incumbent) * k / k.sin())
}

/// Probability that the SINR exceeds `tau` at link distance `p_ib`.
pub fn ccdf_sinr(tau: f64, p_ib: f64, epsilon: f64, alpha: f64) -> f64 {
    (-epsilon * tau.powf(2.0 / alpha) * p_ib * p_ib).exp()
}

/// `psi = epsilon tau^(2/alpha)`.
pub fn psi_of(epsilon: f64, tau: f64, alpha: f64) -> f64 {
    epsilon * tau.powf(2.0 / alpha)
}

/// Average decoding probability at `bs` for sources uniform over `region`.
pub fn adp(psi: f64, region: &AreaRegion, bs: &Location) -> Result<f64> {
    if !(psi >= 0.0) {
        return Err(invalid("psi", "must be non-negative"));
    }
    if !region.contains(bs) {
        return Err(Error::InvalidRegion("base station outside region".into()));
    }
    if psi == 0.0 {
        return Ok(1.0);
    }
    let (bx, by) = (bs.x(), bs.y());
    region_mean(
        region,
        |x, y| {
            let (dx, dy) = (x - bx, y - by);
            (-psi * (dx * dx + dy * dy)).exp()
        },
        DEFAULT_TOLERANCE,
    )
}

/// Source-averaged factor of the joint decoding model; distances are taken
/// from the coordinate origin.
pub fn capital_psi(epsilon: f64, tau: f64, alpha: f64, region: &AreaRegion) -> Result<f64> {
    check_alpha(alpha)?;
    let k = (2.0 / alpha + 1.0) * psi_of(epsilon, tau, alpha);
    if !(k >= 0.0) {
        return Err(invalid("epsilon", "must be non-negative"));
    }
    if k == 0.0 {
        return Ok(1.0);
    }
    region_mean(
        region,
        |x, y| (-k * (x * x + y * y)).exp(),
        DEFAULT_TOLERANCE,
    )
}

/// Upper bound on the joint decoding probability of a source at distance
/// `p_i` from the midpoint of two receivers `d` apart.
pub fn jdp_conditional_bound(epsilon: f64, tau: f64, alpha: f64, d: f64, p_i: f64) -> f64 {
    let psi = psi_of(epsilon, tau, alpha);
    (-0.5 * psi * d * d).exp() * ((-2.0 / alpha - 1.0) * psi * p_i * p_i).exp()
}

/// Joint decoding probability of two receivers `d` apart.
pub fn jdp(psi: f64, capital_psi: f64, d: f64) -> f64 {
    capital_psi * (-0.5 * psi * d * d).exp()
}

/// Model parameters of one band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandParameters {
    pub epsilon_per_m2: f64,
    pub psi_per_m2: f64,
    pub capital_psi: f64,
}

/// Per-band parameters with the shared exponent, threshold and region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParameters {
    pub pathloss_exponent: f64,
    /// Linear decoding threshold.
    pub decode_threshold: f64,
    pub region: AreaRegion,
    pub bands: Vec<BandParameters>,
}

impl ModelParameters {
    /// Parameters computed from known densities, one entry of
    /// `incumbent_densities` per band.
    pub fn analytic(
        iot_density: f64,
        incumbent_densities: &[f64],
        incumbent_ratio: f64,
        alpha: f64,
        tau: f64,
        region: &AreaRegion,
    ) -> Result<Self> {
        let bands = incumbent_densities
            .iter()
            .map(|&li| {
                let eps = epsilon(iot_density, li, incumbent_ratio, alpha)?;
                Ok(BandParameters {
                    epsilon_per_m2: eps,
                    psi_per_m2: psi_of(eps, tau, alpha),
                    capital_psi: capital_psi(eps, tau, alpha, region)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            pathloss_exponent: alpha,
            decode_threshold: tau,
            region: region.clone(),
            bands,
        })
    }

    pub fn num_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.pathloss_exponent)?;
        self.region.validate()?;
        for b in &self.bands {
            if !(b.psi_per_m2 >= 0.0) || !(0.0..=1.0).contains(&b.capital_psi) {
                return Err(invalid("bands", "psi must be >= 0 and Psi within [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let params: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// Model-predicted ADP and JDP coefficients for every placement site.
pub fn predict_coefficients(
    params: &ModelParameters,
    layout: &NetworkLayout,
) -> Result<ObjectiveCoefficients> {
    params.validate()?;
    let sites = layout.placement_sites();
    let mut coeffs = ObjectiveCoefficients::new(sites.len(), params.num_bands());
    for (m, band) in params.bands.iter().enumerate() {
        for (b, loc) in sites.iter().enumerate() {
            coeffs.set_linear(b, m, adp(band.psi_per_m2, &params.region, loc)?);
            for (v, other) in sites.iter().enumerate().skip(b + 1) {
                coeffs.set_quadratic(
                    b,
                    v,
                    m,
                    jdp(band.psi_per_m2, band.capital_psi, distance(loc, other)),
                );
            }
        }
    }
    Ok(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sample_uniform;
    use crate::rng::stream;
    use approx::assert_relative_eq;

    fn table_traffic() -> TrafficProfile {
        TrafficProfile {
            packets_per_hour: 3.0,
            repetitions: 3,
            packet_duration_s: 160.0 / 600.0,
            tx_power_w: 0.025,
            signal_bandwidth_hz: 600.0,
            num_bands: 3,
            band_width_hz: 200e3,
        }
    }

    /// Mean of exp(-psi |x - bs|^2) over a disk, computed around the
    /// receiver: the radial integral is closed-form and only the angle is
    /// integrated numerically (periodic trapezoid rule).
    fn disk_adp_oracle(psi: f64, radius: f64, p_b: f64) -> f64 {
        let n = 20_000;
        let mut acc = 0.0;
        for k in 0..n {
            let phi = 2.0 * PI * (k as f64 + 0.5) / n as f64;
            let rho = -p_b * phi.cos() + (radius * radius - p_b * p_b * phi.sin().powi(2)).sqrt();
            acc += (1.0 - (-psi * rho * rho).exp()) / (2.0 * psi);
        }
        acc * (2.0 * PI / n as f64) / (PI * radius * radius)
    }

    #[test]
    fn table_activity_by_hand() {
        // 2 * 3 * 3 * (160/600) / 3600 = 0.00133333...
        // 2 * 600 / 600e3 = 0.002
        let p = activity_probability(&table_traffic()).unwrap();
        assert_relative_eq!(p, 0.001_333_333_333_333_333_3 * 0.002, max_relative = 1e-12);
    }

    #[test]
    fn density_scaling() {
        let region = AreaRegion::disk(1000.0);
        let mut t = table_traffic();
        let l3 = active_density(&t, 1e4, &region).unwrap();
        t.num_bands = 6;
        let l6 = active_density(&t, 1e4, &region).unwrap();
        assert_relative_eq!(l6, l3 / 2.0, max_relative = 1e-12);
        t.packets_per_hour = 0.0;
        assert_eq!(active_density(&t, 1e4, &region).unwrap(), 0.0);
    }

    #[test]
    fn activity_above_one_is_rejected() {
        let mut t = table_traffic();
        t.packets_per_hour = 1e6;
        t.signal_bandwidth_hz = 100e3;
        assert!(matches!(
            activity_probability(&t),
            Err(Error::ActivityProbability(_))
        ));
    }

    #[test]
    fn incumbent_activity() {
        let inc = IncumbentProfile {
            packets_per_hour: 3.0,
            repetitions: 1,
            packet_duration_s: 1600.0 / 200e3,
            tx_power_w: 0.025,
            bandwidth_hz: 200e3,
            band_pmf: vec![0.5, 0.25, 0.25],
        };
        let t = table_traffic();
        let p = incumbent_activity_probability(&inc, &t).unwrap();
        assert_relative_eq!(
            p,
            3.0 * (160.0 / 600.0 + 0.008) / 3600.0,
            max_relative = 1e-12
        );
        let region = AreaRegion::disk(1000.0);
        let l = incumbent_active_density(&inc, &t, 100.0, &region).unwrap();
        assert_relative_eq!(l[0], 2.0 * l[1], max_relative = 1e-12);
        assert_relative_eq!(
            l.iter().sum::<f64>(),
            100.0 * p / region.area(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn epsilon_values() {
        assert_eq!(epsilon(0.0, 0.0, 1.0, 4.0).unwrap(), 0.0);
        assert_relative_eq!(
            epsilon(1e-6, 0.0, 1.0, 4.0).unwrap(),
            4.934_802_200_544_679e-6,
            max_relative = 1e-12
        );
        for alpha in [2.5, 3.0, 4.0, 5.5] {
            assert_relative_eq!(
                epsilon(0.0, 3e-7, 1.0, alpha).unwrap(),
                epsilon(3e-7, 0.0, 7.0, alpha).unwrap(),
                max_relative = 1e-12
            );
        }
        assert!(epsilon(1e-6, 0.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn ccdf_limits_and_monotonicity() {
        assert_eq!(ccdf_sinr(10.0, 0.0, 1e-6, 4.0), 1.0);
        assert_eq!(ccdf_sinr(10.0, 500.0, 0.0, 4.0), 1.0);
        let mut prev = 1.0;
        for k in 1..50 {
            let v = ccdf_sinr(0.1 * k as f64, 300.0, 1e-6, 4.0);
            assert!(v < prev && v > 0.0);
            prev = v;
        }
        assert!(ccdf_sinr(1.0, 400.0, 1e-6, 4.0) < ccdf_sinr(1.0, 300.0, 1e-6, 4.0));
        assert!(ccdf_sinr(1.0, 300.0, 2e-6, 4.0) < ccdf_sinr(1.0, 300.0, 1e-6, 4.0));
    }

    #[test]
    fn adp_matches_receiver_centered_oracle() {
        let region = AreaRegion::disk(10_000.0);
        let psi = 5e-8;
        // At the center the oracle is closed form.
        let center = (1.0 - (-psi * 1e8f64).exp()) / (psi * 1e8);
        assert_relative_eq!(
            adp(psi, &region, &Location::origin()).unwrap(),
            center,
            epsilon = 2e-6
        );
        for p_b in [2_000.0, 6_000.0, 9_500.0] {
            let got = adp(psi, &region, &Location::polar(p_b, 1.0)).unwrap();
            assert_relative_eq!(got, disk_adp_oracle(psi, 10_000.0, p_b), epsilon = 2e-6);
        }
    }

    #[test]
    fn adp_matches_monte_carlo() {
        let region = AreaRegion::disk(10_000.0);
        let psi = 5e-8;
        let pts = sample_uniform(&region, 1_000_000, &mut stream(21, 0, 0));
        let mc = pts
            .iter()
            .map(|p| (-psi * p.radius().powi(2)).exp())
            .sum::<f64>()
            / pts.len() as f64;
        assert!((adp(psi, &region, &Location::origin()).unwrap() - mc).abs() < 1e-3);
        let bs = Location::polar(4000.0, -2.0);
        let mc = pts
            .iter()
            .map(|p| (-psi * p.squared_distance_to(&bs)).exp())
            .sum::<f64>()
            / pts.len() as f64;
        assert!((adp(psi, &region, &bs).unwrap() - mc).abs() < 1e-3);
    }

    #[test]
    fn adp_limits() {
        let region = AreaRegion::disk(1000.0);
        let bs = Location::polar(300.0, 0.3);
        assert_eq!(adp(0.0, &region, &bs).unwrap(), 1.0);
        let mut prev = 1.0;
        for k in [1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3] {
            let v = adp(k, &region, &bs).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 0.01);
        assert!(adp(1e-6, &region, &Location::polar(2000.0, 0.0)).is_err());
    }

    #[test]
    fn adp_is_rotation_invariant_on_disk() {
        let region = AreaRegion::disk(5000.0);
        let a = adp(1e-7, &region, &Location::polar(3000.0, 0.1)).unwrap();
        let b = adp(1e-7, &region, &Location::polar(3000.0, 2.9)).unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-6);
    }

    #[test]
    fn adp_on_square_matches_separable_oracle() {
        // Centered square: the mean factors into two 1-D Gaussian means.
        let side = 4000.0;
        let psi = 3e-7;
        let n = 200_000;
        let h = side / n as f64;
        let one_d: f64 = (0..n)
            .map(|k| {
                let x = -side / 2.0 + (k as f64 + 0.5) * h;
                (-psi * x * x).exp()
            })
            .sum::<f64>()
            * h
            / side;
        let region = AreaRegion::polygon(vec![
            [-side / 2.0, -side / 2.0],
            [side / 2.0, -side / 2.0],
            [side / 2.0, side / 2.0],
            [-side / 2.0, side / 2.0],
        ]);
        assert_relative_eq!(
            adp(psi, &region, &Location::origin()).unwrap(),
            one_d * one_d,
            epsilon = 2e-6
        );
    }

    #[test]
    fn capital_psi_is_adp_with_scaled_coefficient() {
        let region = AreaRegion::disk(10_000.0);
        let (alpha, tau) = (4.0, 1.0);
        let eps = 5e-8;
        let got = capital_psi(eps, tau, alpha, &region).unwrap();
        let k = 1.5 * eps;
        assert_relative_eq!(
            got,
            adp(k, &region, &Location::origin()).unwrap(),
            epsilon = 1e-15
        );
        assert_relative_eq!(got, (1.0 - (-k * 1e8f64).exp()) / (k * 1e8), epsilon = 2e-6);
        assert_eq!(capital_psi(0.0, tau, alpha, &region).unwrap(), 1.0);
    }

    #[test]
    fn jdp_shape() {
        let eps = 2e-7;
        assert_eq!(jdp_conditional_bound(eps, 1.0, 4.0, 0.0, 0.0), 1.0);
        let f = jdp_conditional_bound(eps, 2.0, 4.0, 700.0, 0.0);
        let g = jdp_conditional_bound(eps, 2.0, 4.0, 0.0, 900.0);
        assert_relative_eq!(
            jdp_conditional_bound(eps, 2.0, 4.0, 700.0, 900.0),
            f * g,
            max_relative = 1e-14
        );
        assert_eq!(jdp(1e-7, 0.6, 0.0), 0.6);
        assert_eq!(jdp(0.0, 0.6, 5000.0), 0.6);
        let mut prev = 0.6;
        for k in 1..20 {
            let v = jdp(1e-7, 0.6, 300.0 * k as f64);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn analytic_parameters_round_trip() {
        let region = AreaRegion::disk(10_000.0);
        let params =
            ModelParameters::analytic(1e-7, &[0.0, 2e-8, 5e-8], 1.0, 4.0, 10.0, &region).unwrap();
        for b in &params.bands {
            assert_relative_eq!(
                b.psi_per_m2,
                b.epsilon_per_m2 * 10f64.sqrt(),
                max_relative = 1e-15
            );
        }
        let text = params.to_toml().unwrap();
        assert_eq!(ModelParameters::from_toml(&text).unwrap(), params);
        assert!(ModelParameters::from_toml(&text.replace("bands", "bandz")).is_err());
    }

    #[test]
    fn predicted_coefficients_compose_adp_and_jdp() {
        let region = AreaRegion::disk(10_000.0);
        let params =
            ModelParameters::analytic(1e-7, &[1e-8, 4e-8], 1.0, 4.0, 10.0, &region).unwrap();
        let layout = NetworkLayout::new(
            vec![Location::polar(1000.0, 0.0), Location::polar(3000.0, 2.0)],
            vec![Location::polar(5000.0, -1.0)],
            vec![],
            region.clone(),
        )
        .unwrap();
        let c = predict_coefficients(&params, &layout).unwrap();
        let sites = layout.placement_sites();
        for m in 0..2 {
            let band = params.bands[m];
            for b in 0..3 {
                assert_eq!(
                    c.linear(b, m),
                    adp(band.psi_per_m2, &region, &sites[b]).unwrap()
                );
                for v in 0..3 {
                    if v != b {
                        assert_eq!(c.quadratic(b, v, m), c.quadratic(v, b, m));
                        let d = distance(&sites[b], &sites[v]);
                        assert_eq!(
                            c.quadratic(b, v, m),
                            jdp(band.psi_per_m2, band.capital_psi, d)
                        );
                    }
                }
            }
        }
    }
}
