//! Acceptance suite: one PASS/FAIL line per criterion; exits non-zero when
//! any criterion fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;

use unbplan::fit::{fit_band_params, JdpSample};
use unbplan::geometry::{AreaRegion, Location};
use unbplan::harness::experiments::{
    fig3_adp, fig4_jdp, fig5_rmse, fig6_training_time, fig7_density, fig8_placement, paired_gap,
    CurvePoint,
};
use unbplan::harness::pipeline::run_training;
use unbplan::harness::{ExperimentConfig, Iteration, ResultRow};
use unbplan::models::jdp;
use unbplan::optimize::{
    brute_force_p3, min_eigenvalue, random_assignment, second_moment_matrix, solve_p3,
    ObjectiveCoefficients, SolveStatus,
};
use unbplan::planner::{enumerate_viable, measurable_set, EstimateKey, KeySpace, Mode};
use unbplan::rng::stream;
use unbplan::sim::{Listening, Phase};
use unbplan::stats::{empirical_pdp, empirical_tdp, PairwiseStats};

type Verdict = Result<(bool, String), Box<dyn std::error::Error>>;
type Criterion = (&'static str, fn() -> Verdict);

/// Environment of the threshold and separation sweeps: single band, no
/// noise, long packets and equal IoT and incumbent densities.
fn sweep_environment(radius_m: f64) -> ExperimentConfig {
    ExperimentConfig {
        noise_power_dbm: f64::NEG_INFINITY,
        num_bands: 1,
        packet_duration_s: Some(208.0 / 600.0),
        incumbent_packet_duration_s: Some(2080.0 / 200e3),
        iot_density_per_km2: 53.05,
        incumbent_density_per_km2: 53.05,
        region: AreaRegion::disk(radius_m),
        installed: 1,
        evaluation_s: 3600.0,
        ..ExperimentConfig::default()
    }
}

fn split(points: &[CurvePoint]) -> (Vec<&CurvePoint>, Vec<&CurvePoint>) {
    let sim = points.iter().filter(|p| p.series == "simulation").collect();
    let model = points.iter().filter(|p| p.series == "model").collect();
    (sim, model)
}

fn mean_pdp_of(rows: &[ResultRow], method: &str) -> f64 {
    let v: Vec<f64> = rows
        .iter()
        .filter(|r| r.method == method)
        .map(|r| r.pdp)
        .collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn adp_model_vs_simulation() -> Verdict {
    let start = Instant::now();
    let config = ExperimentConfig {
        mc_iterations: 2,
        ..sweep_environment(10_000.0)
    };
    let taus = [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0];
    let points = fig3_adp(&config, Location::origin(), &taus)?;
    let (sim, model) = split(&points);
    let worst = sim
        .iter()
        .zip(&model)
        .map(|(s, m)| (s.y - m.y).abs())
        .fold(0.0, f64::max);
    let reps = sim.iter().map(|p| p.count).min().unwrap_or(0);
    let elapsed = start.elapsed();
    Ok((
        worst <= 0.05 && reps >= 10_000 && elapsed <= Duration::from_secs(300),
        format!(
            "max |model - sim| {worst:.4}, {reps} repetitions per point, {:.1} s",
            elapsed.as_secs_f64()
        ),
    ))
}

fn jdp_upper_bound() -> Verdict {
    let start = Instant::now();
    let config = ExperimentConfig {
        mc_iterations: 1,
        decode_threshold_db: 0.0,
        ..sweep_environment(30_000.0)
    };
    let d = [250.0, 500.0, 1000.0, 2000.0, 3000.0, 4000.0, 6000.0, 8000.0];
    let points = fig4_jdp(&config, &d)?;
    let (sim, model) = split(&points);
    let min_z = sim
        .iter()
        .zip(&model)
        .map(|(s, m)| (m.y - s.y) / s.std_error)
        .fold(f64::INFINITY, f64::min);
    let decreasing = model.windows(2).all(|w| w[1].y < w[0].y);
    let elapsed = start.elapsed();
    Ok((
        min_z >= -3.0 && decreasing && elapsed <= Duration::from_secs(300),
        format!(
            "min (model - sim) / sigma {min_z:.2}, model strictly decreasing: {decreasing}, {:.1} s",
            elapsed.as_secs_f64()
        ),
    ))
}

fn bound_chain() -> Verdict {
    let mut rng = stream(3, 0, 0);
    let (mut violations, mut worst_slack) = (0, f64::INFINITY);
    let instances = 60;
    for i in 0..instances {
        let config = ExperimentConfig {
            region: AreaRegion::disk(3000.0),
            installed: rng.random_range(1..=5),
            num_bands: rng.random_range(1..=3),
            training_s: 60.0,
            evaluation_s: 900.0,
            iot_density_per_km2: rng.random_range(20.0..80.0),
            incumbent_density_per_km2: rng.random_range(5.0..60.0),
            seed: 100 + i,
            ..ExperimentConfig::default()
        };
        let it = Iteration::prepare(&config, 0)?;
        let b = config.installed;
        let m_count = config.num_bands;
        let x = random_assignment(b, 0, m_count, 0, &mut rng)?;
        let listening = Listening::from_assignment(&x, &[]);
        let log = it.field.log(&[Phase {
            window: it.evaluation,
            listening,
        }]);
        let tdp = empirical_tdp(&log)?;
        let pdp = empirical_pdp(&log)?;
        let total: u64 = log.packets.iter().map(|p| u64::from(p.repetitions)).sum();
        let coeffs = ObjectiveCoefficients::from_stats(&PairwiseStats::from_log(&log), b)?;
        // Per-band objective weighted by the empirical share of repetitions
        // sent on that band.
        let mut normalized = 0.0;
        for m in 0..m_count {
            let on: Vec<usize> = (0..b).filter(|&s| x.band(s) == Some(m)).collect();
            let Some(&first) = on.first() else { continue };
            let share = log.site(first, m).observed as f64 / total as f64;
            let mut value: f64 = on.iter().map(|&s| coeffs.linear(s, m)).sum();
            for (k, &s) in on.iter().enumerate() {
                for &v in &on[k + 1..] {
                    value -= coeffs.quadratic(s, v, m);
                }
            }
            normalized += share * value;
        }
        let sigma = (tdp * (1.0 - tdp) / total as f64).sqrt();
        let slack = tdp + 3.0 * sigma - normalized;
        worst_slack = worst_slack.min(slack);
        if slack < 0.0 || tdp > pdp {
            violations += 1;
        }
    }
    Ok((
        violations == 0,
        format!("{instances} instances, {violations} violations, smallest slack {worst_slack:.4}"),
    ))
}

fn optimizer_exactness() -> Verdict {
    let start = Instant::now();
    let mut rng = stream(4, 0, 0);
    let (mut agree, instances) = (0, 200);
    for _ in 0..instances {
        let rows = rng.random_range(1..=8);
        let installed = rng.random_range(0..=rows);
        let candidates = rows - installed;
        let delta_b = rng.random_range(0..=candidates.min(2));
        let bands = rng.random_range(1..=3);
        let mut c = ObjectiveCoefficients::new(rows, bands);
        let adp: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..bands).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        for (b, row) in adp.iter().enumerate() {
            for (m, &a) in row.iter().enumerate() {
                c.set_linear(b, m, a);
                for (v, other) in adp.iter().enumerate().skip(b + 1) {
                    let cap = a.min(other[m]);
                    c.set_quadratic(b, v, m, rng.random_range(0.0..=cap));
                }
            }
        }
        let fast = solve_p3(&c, installed, delta_b, Duration::from_secs(30))?;
        let exact = brute_force_p3(&c, installed, delta_b)?;
        if fast.status == SolveStatus::Optimal && (fast.objective - exact.objective).abs() <= 1e-9 {
            agree += 1;
        }
    }
    let elapsed = start.elapsed();
    Ok((
        agree == instances && elapsed <= Duration::from_secs(120),
        format!(
            "{agree}/{instances} objectives agree, {:.1} s",
            elapsed.as_secs_f64()
        ),
    ))
}

fn parameter_recovery() -> Verdict {
    let mut rng = stream(5, 0, 0);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let psi = 10f64.powf(rng.random_range(-8.0..-6.0));
        let cap = rng.random_range(0.05..0.95);
        let samples: Vec<JdpSample> = (1..=10)
            .map(|k| {
                let d = (0.4 * k as f64 / psi).sqrt();
                JdpSample {
                    band: 0,
                    pair: (0, k),
                    separation_m: d,
                    estimate: jdp(psi, cap, d),
                    weight: 1000,
                }
            })
            .collect();
        let fit = fit_band_params(&samples)?;
        worst = worst
            .max(((fit.psi - psi) / psi).abs())
            .max(((fit.capital_psi - cap) / cap).abs());
    }

    let config = ExperimentConfig {
        mc_iterations: 200,
        decode_threshold_db: 0.0,
        ..sweep_environment(10_000.0)
    };
    let sizes = [4, 5, 6, 7, 8, 9, 10, 15, 20];
    let curve = fig5_rmse(&config, &sizes, 1000, 100)?;
    let y = |s: usize| curve.iter().find(|p| p.x == s as f64).expect("swept size");
    let monotone = (4..10).all(|s| {
        let (a, b) = (y(s), y(s + 1));
        b.y - a.y <= 3.0 * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt()
    }) && y(10).y < y(4).y;
    let change = (y(20).y - y(10).y) / y(10).y;
    Ok((
        worst <= 1e-4 && monotone && change.abs() < 0.2,
        format!(
            "noiseless relative error {worst:.1e}; RMSE S=4 {:.5}, S=10 {:.5}, S=20 {:.5}; decreasing 4..10: {monotone}; change 10->20 {:+.1}%",
            y(4).y,
            y(10).y,
            y(20).y,
            100.0 * change
        ),
    ))
}

fn end_to_end_dominance() -> Verdict {
    let start = Instant::now();
    let config = ExperimentConfig {
        installed: 12,
        num_bands: 3,
        mc_iterations: 100,
        seed: 6,
        ..ExperimentConfig::default()
    };
    let rows = fig7_density(&config, &[30.0, 55.0, 80.0])?;
    let gaps = [
        ("mod", "max-separation"),
        ("meas", "max-separation"),
        ("max-separation", "random"),
    ]
    .map(|(a, b)| (a, b, paired_gap(&rows, a, b)));
    let elapsed = start.elapsed();
    let ok = gaps.iter().all(|g| g.2.positive_at_95()) && elapsed <= Duration::from_secs(1800);
    let detail = gaps
        .iter()
        .map(|(a, b, g)| {
            format!(
                "{a} - {b} {:+.4} (se {:.4}, n {})",
                g.mean, g.std_error, g.pairs
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    Ok((ok, format!("{detail}; {:.0} s", elapsed.as_secs_f64())))
}

fn near_optimality() -> Verdict {
    let config = ExperimentConfig {
        installed: 6,
        mc_iterations: 100,
        seed: 7,
        ..ExperimentConfig::default()
    };
    let rows = fig6_training_time(&config, &[600.0])?;
    let best = mean_pdp_of(&rows, "replay-tdp");
    let (m, e) = (
        mean_pdp_of(&rows, "mod") / best,
        mean_pdp_of(&rows, "meas") / best,
    );
    Ok((
        m >= 0.95 && e >= 0.95,
        format!("relative to replay-tdp PDP {best:.4}: mod {m:.3}, meas {e:.3}"),
    ))
}

fn placement_value() -> Verdict {
    let config = ExperimentConfig {
        installed: 12,
        candidates: 30,
        delta_b: 1,
        viable_cap: 5000,
        mc_iterations: 34,
        seed: 8,
        ..ExperimentConfig::default()
    };
    let rows = fig8_placement(&config, &[30.0, 55.0, 80.0])?;
    let gap = paired_gap(&rows, "mod", "random-placement");
    let diff = (mean_pdp_of(&rows, "mod") - mean_pdp_of(&rows, "meas")).abs();
    Ok((
        gap.positive_at_95() && diff <= 0.02,
        format!(
            "mod - random-placement {:+.4} (se {:.4}, n {}); |mod - meas| {diff:.4}",
            gap.mean, gap.std_error, gap.pairs
        ),
    ))
}

fn coverage_audit() -> Verdict {
    let mut rng = stream(9, 0, 0);
    let (mut under, instances) = (0, 100);
    for i in 0..instances {
        let num_bands = rng.random_range(1..=3);
        let installed = rng.random_range(num_bands.max(2)..=6);
        let temporary = rng.random_range(0..=3);
        let mode = if rng.random_bool(0.5) {
            Mode::Mod
        } else {
            Mode::Meas
        };
        let config = ExperimentConfig {
            region: AreaRegion::disk(2000.0),
            installed,
            temporary,
            num_bands,
            iot_density_per_km2: 100.0,
            incumbent_density_per_km2: 20.0,
            training_s: 600.0,
            evaluation_s: 60.0,
            jdp_demand_per_band: rng.random_range(1..=8),
            seed: 1000 + i,
            ..ExperimentConfig::default()
        };
        let it = Iteration::prepare(&config, 0)?;
        let extra: Vec<usize> = (0..temporary).map(|t| it.temporary_site(t)).collect();
        let training = run_training(&it, mode, &extra, |_| true)?;
        let global = |s: usize| {
            if s < installed {
                s
            } else {
                extra[s - installed]
            }
        };

        let viable = enumerate_viable(
            installed,
            temporary,
            num_bands,
            config.band_floor(),
            usize::MAX,
            &mut rng,
        )?;
        let space = KeySpace {
            num_sites: installed + temporary,
            num_bands,
        };
        let reachable: BTreeSet<u32> = viable
            .iter()
            .flat_map(|x| measurable_set(x, num_bands, mode))
            .collect();
        let collected = |key: u32| match space.decode(key) {
            EstimateKey::Adp { site, band } => training.log.site(global(site), band).observed > 0,
            EstimateKey::Jdp { a, b, band } => {
                training.log.pair(global(a), global(b), band).observed > 0
            }
        };
        let covered = match mode {
            Mode::Meas => reachable.iter().all(|&k| collected(k)),
            Mode::Mod => (0..num_bands).all(|m| {
                let on_band: Vec<u32> = reachable
                    .iter()
                    .copied()
                    .filter(|&k| {
                        space.band_of(k) == m && matches!(space.decode(k), EstimateKey::Jdp { .. })
                    })
                    .collect();
                let demand = config.jdp_demand_per_band.min(on_band.len());
                on_band.iter().filter(|&&k| collected(k)).count() >= demand
            }),
        };
        if !covered {
            under += 1;
        }
    }
    Ok((
        under == 0,
        format!("{instances} plans executed, {under} under-covered"),
    ))
}

fn concavity_witness() -> Verdict {
    let mut rng = stream(10, 0, 0);
    let mut smallest = f64::INFINITY;
    for k in 0..100u64 {
        let samples: Vec<Vec<f64>> = if k % 5 == 0 {
            // Decoder sets of simulated repetitions on band 0.
            let config = ExperimentConfig {
                region: AreaRegion::disk(3000.0),
                installed: rng.random_range(2..=10),
                num_bands: 1,
                training_s: 0.0,
                evaluation_s: 600.0,
                seed: k,
                ..ExperimentConfig::default()
            };
            let it = Iteration::prepare(&config, 0)?;
            (0..it.field.num_repetitions())
                .map(|rep| {
                    let dec = it.field.decoders(rep);
                    (0..config.installed)
                        .map(|s| f64::from(u8::from(dec.contains(&(s as u16)))))
                        .collect()
                })
                .collect()
        } else {
            let n = rng.random_range(2..=12);
            let q: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let weight: f64 = rng.random_range(0.0..1.0);
            (0..rng.random_range(20..=400))
                .map(|_| {
                    let shared: f64 = rng.random_range(0.0..1.0);
                    q.iter()
                        .map(|&qb| {
                            let u = weight * shared + (1.0 - weight) * rng.random_range(0.0..1.0);
                            f64::from(u8::from(u < qb))
                        })
                        .collect()
                })
                .collect()
        };
        smallest = smallest.min(min_eigenvalue(second_moment_matrix(&samples)?));
    }
    Ok((
        smallest >= -1e-9,
        format!("100 datasets, smallest eigenvalue {smallest:.3e}"),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("ADP model vs simulation", adp_model_vs_simulation),
        ("JDP model bounds simulation", jdp_upper_bound),
        ("objective <= TDP <= PDP", bound_chain),
        ("optimizer matches brute force", optimizer_exactness),
        ("parameter recovery", parameter_recovery),
        ("end-to-end dominance", end_to_end_dominance),
        ("near-optimality vs replay", near_optimality),
        ("placement value", placement_value),
        ("training coverage audit", coverage_audit),
        ("concavity witness", concavity_witness),
    ];
    // Numeric arguments select criteria; everything else is ignored.
    let selected: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let (mut failed, mut ran) = (0, 0);
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !selected.is_empty() && !selected.contains(&(i + 1)) {
            continue;
        }
        ran += 1;
        let (pass, detail) = match run() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "{} criterion {:>2} {name}: {detail}",
            if pass { "PASS" } else { "FAIL" },
            i + 1
        );
    }
    println!("{} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
