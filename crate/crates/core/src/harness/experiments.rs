//! Desk-scale counterparts of the evaluation figures: model validation
//! curves (ADP, JDP, fit accuracy) and Monte-Carlo method comparisons.

use std::collections::BTreeMap;

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_band_params, JdpSample};
use crate::geometry::{sample_uniform, Location};
use crate::models::{active_density, adp, incumbent_active_density, jdp, ModelParameters};
use crate::rng::{derive_seed, stream, streams, RayleighFading};
use crate::sim::{DecodeField, EventStream, Population};

use super::config::{db_to_linear, ExperimentConfig};
use super::{run_methods, ResultRow, RunLabel, StrategyRegistry};

/// One point of a validation curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub experiment: String,
    pub series: String,
    pub x: f64,
    pub y: f64,
    pub std_error: f64,
    pub count: u64,
}

pub fn write_curve<W: std::io::Write>(points: &[CurvePoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

fn incumbent_pmf(config: &ExperimentConfig) -> Vec<f64> {
    config
        .incumbent_pmf
        .clone()
        .unwrap_or_else(|| vec![1.0 / config.num_bands as f64; config.num_bands])
}

/// Model parameters implied by the configured densities and traffic at
/// decoding threshold `tau` (linear).
pub fn analytic_parameters(config: &ExperimentConfig, tau: f64) -> Result<ModelParameters> {
    let region = &config.region;
    let area = region.area();
    let env = config.environment(incumbent_pmf(config));
    let lambda = active_density(&env.traffic, config.iot_density_per_m2() * area, region)?;
    let lambda_inc = incumbent_active_density(
        &env.incumbents,
        &env.traffic,
        config.incumbent_density_per_m2() * area,
        region,
    )?;
    ModelParameters::analytic(
        lambda,
        &lambda_inc,
        env.channel.incumbent_ratio,
        config.pathloss_exponent,
        tau,
        region,
    )
}

fn binomial_point(experiment: &str, series: &str, x: f64, hits: u64, count: u64) -> CurvePoint {
    let y = if count > 0 {
        hits as f64 / count as f64
    } else {
        0.0
    };
    CurvePoint {
        experiment: experiment.into(),
        series: series.into(),
        x,
        y,
        std_error: if count > 0 {
            (y * (1.0 - y) / count as f64).sqrt()
        } else {
            0.0
        },
        count,
    }
}

/// Streams of `config.mc_iterations` independent realizations, each over
/// `config.evaluation_s` seconds, with a fixed incumbent PMF.
fn realizations(
    config: &ExperimentConfig,
) -> impl ParallelIterator<Item = Result<(EventStream, RayleighFading)>> + '_ {
    (0..config.mc_iterations).into_par_iter().map(move |i| {
        let seed = derive_seed(config.seed, 0, i as u64);
        let env = config.environment(incumbent_pmf(config));
        let pop = Population::sample(
            &config.region,
            config.iot_density_per_m2(),
            config.incumbent_density_per_m2(),
            &mut stream(seed, streams::POPULATION, 0),
        )?;
        let s = EventStream::generate(
            &env,
            &pop,
            config.evaluation_s,
            &mut stream(seed, streams::IOT_EVENTS, 0),
            &mut stream(seed, streams::INCUMBENT_EVENTS, 0),
        )?;
        Ok((
            s,
            RayleighFading::new(derive_seed(seed, streams::FADING, 0)),
        ))
    })
}

/// Simulated and modeled ADP of band 0 at `receiver` for each threshold.
pub fn fig3_adp(
    config: &ExperimentConfig,
    receiver: Location,
    taus_db: &[f64],
) -> Result<Vec<CurvePoint>> {
    let taus: Vec<f64> = taus_db.iter().map(|&t| db_to_linear(t)).collect();
    let env = config.environment(incumbent_pmf(config));
    let counts = realizations(config)
        .map(|r| {
            let (s, fading) = r?;
            let sinr = s.sinr_samples(&receiver, 0, &fading, &env.channel)?;
            let bands = s.counted_bands();
            let mut hits = vec![0u64; taus.len()];
            let mut total = 0u64;
            for (x, b) in sinr.iter().zip(bands) {
                if b != 0 {
                    continue;
                }
                total += 1;
                for (h, &t) in hits.iter_mut().zip(&taus) {
                    *h += u64::from(*x > t);
                }
            }
            Ok((hits, total))
        })
        .collect::<Result<Vec<_>>>()?;
    let total: u64 = counts.iter().map(|c| c.1).sum();
    let mut out = Vec::new();
    for (k, (&t_db, &t)) in taus_db.iter().zip(&taus).enumerate() {
        let hits: u64 = counts.iter().map(|c| c.0[k]).sum();
        out.push(binomial_point("fig3", "simulation", t_db, hits, total));
        let params = analytic_parameters(config, t)?;
        out.push(CurvePoint {
            experiment: "fig3".into(),
            series: "model".into(),
            x: t_db,
            y: adp(params.bands[0].psi_per_m2, &config.region, &receiver)?,
            std_error: 0.0,
            count: 0,
        });
    }
    Ok(out)
}

/// Simulated and modeled JDP of band 0 for two receivers at `(-d/2, 0)` and
/// `(d/2, 0)`, at the configured threshold.
pub fn fig4_jdp(config: &ExperimentConfig, separations_m: &[f64]) -> Result<Vec<CurvePoint>> {
    let sites: Vec<Location> = separations_m
        .iter()
        .flat_map(|&d| {
            [
                Location::cartesian(-d / 2.0, 0.0),
                Location::cartesian(d / 2.0, 0.0),
            ]
        })
        .collect();
    let env = config.environment(incumbent_pmf(config));
    let counts = realizations(config)
        .map(|r| {
            let (s, fading) = r?;
            let field = DecodeField::compute(&s, &sites, config.num_bands, &fading, &env.channel)?;
            let mut joint = vec![0u64; separations_m.len()];
            let mut total = 0u64;
            for rep in 0..field.num_repetitions() {
                if field.band(rep) != 0 {
                    continue;
                }
                total += 1;
                let dec = field.decoders(rep);
                for (k, j) in joint.iter_mut().enumerate() {
                    let both = dec.binary_search(&(2 * k as u16)).is_ok()
                        && dec.binary_search(&(2 * k as u16 + 1)).is_ok();
                    *j += u64::from(both);
                }
            }
            Ok((joint, total))
        })
        .collect::<Result<Vec<_>>>()?;
    let total: u64 = counts.iter().map(|c| c.1).sum();
    let band = analytic_parameters(config, config.decode_threshold())?.bands[0];
    let mut out = Vec::new();
    for (k, &d) in separations_m.iter().enumerate() {
        let hits: u64 = counts.iter().map(|c| c.0[k]).sum();
        out.push(binomial_point("fig4", "simulation", d, hits, total));
        out.push(CurvePoint {
            experiment: "fig4".into(),
            series: "model".into(),
            x: d,
            y: jdp(band.psi_per_m2, band.capital_psi, d),
            std_error: 0.0,
            count: 0,
        });
    }
    Ok(out)
}

/// Root-mean-square error of held-out JDP prediction after fitting to `S`
/// noisy estimates, for each `S` in `sample_sizes`. Estimates are binomial
/// with `trials_per_estimate` draws around the analytic JDP of band 0 at
/// uniformly placed station pairs. The same trial draws are reused across
/// sample sizes.
pub fn fig5_rmse(
    config: &ExperimentConfig,
    sample_sizes: &[usize],
    trials_per_estimate: u64,
    held_out: usize,
) -> Result<Vec<CurvePoint>> {
    let band = analytic_parameters(config, config.decode_threshold())?.bands[0];
    let s_max = sample_sizes.iter().copied().max().unwrap_or(0);
    let per_trial = (0..config.mc_iterations)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(config.seed, streams::TRAINING, t as u64);
            let draw = |rng: &mut crate::rng::SimRng| -> Result<(f64, f64)> {
                let p = sample_uniform(&config.region, 2, rng);
                let d = p[0].distance_to(&p[1]);
                let truth = jdp(band.psi_per_m2, band.capital_psi, d);
                let k = Binomial::new(trials_per_estimate, truth)
                    .map_err(|e| Error::Config(e.to_string()))?
                    .sample(rng);
                Ok((d, k as f64 / trials_per_estimate as f64))
            };
            let fit_pairs = (0..s_max)
                .map(|_| draw(&mut rng))
                .collect::<Result<Vec<_>>>()?;
            let test_pairs = (0..held_out)
                .map(|_| draw(&mut rng))
                .collect::<Result<Vec<_>>>()?;
            sample_sizes
                .iter()
                .map(|&s| {
                    let samples: Vec<JdpSample> = fit_pairs[..s]
                        .iter()
                        .enumerate()
                        .map(|(i, &(d, e))| JdpSample {
                            band: 0,
                            pair: (2 * i, 2 * i + 1),
                            separation_m: d,
                            estimate: e,
                            weight: trials_per_estimate,
                        })
                        .collect();
                    let f = fit_band_params(&samples)?;
                    let mse = test_pairs
                        .iter()
                        .map(|&(d, e)| (jdp(f.psi, f.capital_psi, d) - e).powi(2))
                        .sum::<f64>()
                        / held_out as f64;
                    Ok(mse.sqrt())
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per_trial.len() as f64;
    Ok(sample_sizes
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let values: Vec<f64> = per_trial.iter().map(|v| v[k]).collect();
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            CurvePoint {
                experiment: "fig5".into(),
                series: "jdp-rmse".into(),
                x: s as f64,
                y: mean,
                std_error: (var / n).sqrt(),
                count: per_trial.len() as u64,
            }
        })
        .collect())
}

fn sweep(
    config: &ExperimentConfig,
    experiment: &str,
    variable: &str,
    values: &[f64],
    methods: &[&str],
    apply: impl Fn(&mut ExperimentConfig, f64),
) -> Result<Vec<ResultRow>> {
    let registry = StrategyRegistry::default();
    let mut rows = Vec::new();
    for &v in values {
        let mut c = config.clone();
        apply(&mut c, v);
        rows.extend(run_methods(
            &c,
            &registry,
            methods,
            RunLabel {
                experiment,
                sweep_variable: variable,
                sweep_value: v,
            },
        )?);
    }
    Ok(rows)
}

/// Model- and measurement-based assignment against the replayed optima as
/// the training time varies.
pub fn fig6_training_time(config: &ExperimentConfig, training_s: &[f64]) -> Result<Vec<ResultRow>> {
    sweep(
        config,
        "fig6",
        "training_s",
        training_s,
        &["mod", "meas", "replay-tdp", "replay-pdp"],
        |c, v| c.training_s = v,
    )
}

/// Band assignment methods as the IoT density varies.
pub fn fig7_density(
    config: &ExperimentConfig,
    densities_per_km2: &[f64],
) -> Result<Vec<ResultRow>> {
    sweep(
        config,
        "fig7",
        "iot_density_per_km2",
        densities_per_km2,
        &["random", "max-separation", "mod", "meas"],
        |c, v| c.iot_density_per_km2 = v,
    )
}

/// Placement of new stations as the IoT density varies.
pub fn fig8_placement(
    config: &ExperimentConfig,
    densities_per_km2: &[f64],
) -> Result<Vec<ResultRow>> {
    if config.delta_b == 0 {
        return Err(Error::Config("placement needs delta_b > 0".into()));
    }
    sweep(
        config,
        "fig8",
        "iot_density_per_km2",
        densities_per_km2,
        &["random-placement", "max-separation", "mod", "meas"],
        |c, v| c.iot_density_per_km2 = v,
    )
}

/// Mean of a per-iteration paired difference with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedGap {
    pub mean: f64,
    pub std_error: f64,
    pub pairs: usize,
}

impl PairedGap {
    /// True when the two-sided 95% interval lies above zero.
    pub fn positive_at_95(&self) -> bool {
        self.pairs > 1 && self.mean - 1.96 * self.std_error > 0.0
    }
}

/// PDP of method `a` minus method `b`, paired by (sweep value, iteration).
pub fn paired_gap(rows: &[ResultRow], a: &str, b: &str) -> PairedGap {
    let mut by_key: BTreeMap<(u64, usize), (Option<f64>, Option<f64>)> = BTreeMap::new();
    for r in rows {
        let e = by_key
            .entry((r.sweep_value.to_bits(), r.iteration))
            .or_default();
        if r.method == a {
            e.0 = Some(r.pdp);
        } else if r.method == b {
            e.1 = Some(r.pdp);
        }
    }
    let diffs: Vec<f64> = by_key
        .values()
        .filter_map(|(x, y)| Some((*x)? - (*y)?))
        .collect();
    let n = diffs.len();
    if n == 0 {
        return PairedGap {
            mean: 0.0,
            std_error: 0.0,
            pairs: 0,
        };
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0).max(1.0);
    PairedGap {
        mean,
        std_error: (var / n as f64).sqrt(),
        pairs: n,
    }
}

/// Mean PDP per (method, sweep value).
pub fn mean_pdp(rows: &[ResultRow]) -> BTreeMap<(String, u64), f64> {
    let mut acc: BTreeMap<(String, u64), (f64, usize)> = BTreeMap::new();
    for r in rows {
        let e = acc
            .entry((r.method.clone(), r.sweep_value.to_bits()))
            .or_default();
        e.0 += r.pdp;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(k, (s, n))| (k, s / n as f64))
        .collect()
}
