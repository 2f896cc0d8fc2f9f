//! Least-squares estimation of the joint decoding model from measured JDPs.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{distance, NetworkLayout};
use crate::models::{BandParameters, ModelParameters};
use crate::stats::PairwiseStats;

const MAX_ITERATIONS: usize = 200;
const REL_TOLERANCE: f64 = 1e-10;

/// One measured JDP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JdpSample {
    pub band: usize,
    pub pair: (usize, usize),
    pub separation_m: f64,
    pub estimate: f64,
    pub weight: u64,
}

/// Fitted `(psi, Psi)` of one band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandFit {
    pub psi: f64,
    pub capital_psi: f64,
    /// Sum of squared residuals at the solution.
    pub residual: f64,
    pub iterations: usize,
}

fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn objective(samples: &[JdpSample], u: f64, v: f64) -> f64 {
    let (psi, cap) = (u.exp(), logistic(v));
    samples
        .iter()
        .map(|s| {
            let r = s.estimate - cap * (-0.5 * psi * s.separation_m.powi(2)).exp();
            r * r
        })
        .sum()
}

fn initial_guess(samples: &[JdpSample]) -> (f64, f64) {
    let cap = samples
        .iter()
        .map(|s| s.estimate)
        .fold(0.0, f64::max)
        .clamp(1e-3, 1.0);
    // Slope of log(estimate / Psi) against d^2 through the origin.
    let (mut num, mut den, mut d2_sum) = (0.0, 0.0, 0.0);
    for s in samples {
        let d2 = s.separation_m.powi(2);
        d2_sum += d2;
        if s.estimate > 0.0 {
            let y = (s.estimate / cap).ln();
            num += y * d2;
            den += d2 * d2;
        }
    }
    let mean_d2 = (d2_sum / samples.len() as f64).max(f64::MIN_POSITIVE);
    let slope = if den > 0.0 { num / den } else { 0.0 };
    let psi = (-2.0 * slope).max(1e-6 / mean_d2);
    (psi, cap)
}

/// Fits `Psi exp(-psi d^2 / 2)` to the samples of one band with a damped
/// Gauss-Newton (Levenberg-Marquardt) iteration on `psi = exp(u)`,
/// `Psi = logistic(v)`.
pub fn fit_band_params(samples: &[JdpSample]) -> Result<BandFit> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} JDP samples, at least 2 needed",
            samples.len()
        )));
    }
    let first = samples[0].separation_m;
    if samples.iter().all(|s| s.separation_m == first) {
        return Err(Error::Underdetermined(
            "all samples share one separation".into(),
        ));
    }
    if samples
        .iter()
        .any(|s| !(0.0..=1.0).contains(&s.estimate) || !(s.separation_m >= 0.0))
    {
        return Err(Error::InsufficientData(
            "estimates must lie in [0, 1]".into(),
        ));
    }

    let (psi0, cap0) = initial_guess(samples);
    let mut u = psi0.ln();
    let mut v = logit(cap0.min(1.0 - 1e-9));
    let mut f = objective(samples, u, v);
    let mut mu = 1e-3;

    for iteration in 1..=MAX_ITERATIONS {
        let (psi, cap) = (u.exp(), logistic(v));
        // Normal equations for the model derivatives.
        let (mut a11, mut a12, mut a22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for s in samples {
            let half_d2 = 0.5 * s.separation_m.powi(2);
            let e = (-psi * half_d2).exp();
            let r = s.estimate - cap * e;
            let ju = -cap * e * psi * half_d2;
            let jv = e * cap * (1.0 - cap);
            a11 += ju * ju;
            a12 += ju * jv;
            a22 += jv * jv;
            g1 += ju * r;
            g2 += jv * r;
        }
        let mut accepted = false;
        while mu < 1e20 {
            let (b11, b22) = (a11 + mu * a11.max(1e-30), a22 + mu * a22.max(1e-30));
            let det = b11 * b22 - a12 * a12;
            if det.abs() < f64::MIN_POSITIVE {
                mu *= 10.0;
                continue;
            }
            let du = (b22 * g1 - a12 * g2) / det;
            let dv = (b11 * g2 - a12 * g1) / det;
            let f_new = objective(samples, u + du, v + dv);
            if f_new.is_finite() && f_new < f {
                u += du;
                v += dv;
                let decrease = (f - f_new) / f;
                f = f_new;
                mu = (mu / 10.0).max(1e-12);
                accepted = true;
                if decrease < REL_TOLERANCE || f < 1e-30 {
                    return Ok(finish(u, v, f, iteration));
                }
                break;
            }
            mu *= 10.0;
        }
        if !accepted {
            // No descent direction left: a stationary point.
            return Ok(finish(u, v, f, iteration));
        }
    }
    Err(Error::NonConvergence(format!(
        "least squares did not settle in {MAX_ITERATIONS} iterations"
    )))
}

fn finish(u: f64, v: f64, residual: f64, iterations: usize) -> BandFit {
    BandFit {
        psi: u.exp(),
        capital_psi: logistic(v),
        residual,
        iterations,
    }
}

/// JDP samples of band `m` with separations taken from `layout.all_sites()`.
pub fn band_samples(stats: &PairwiseStats, layout: &NetworkLayout, m: usize) -> Vec<JdpSample> {
    let sites = layout.all_sites();
    stats
        .jdp_entries(m)
        .into_iter()
        .map(|(a, b, e)| JdpSample {
            band: m,
            pair: (a, b),
            separation_m: distance(&sites[a], &sites[b]),
            estimate: e.value,
            weight: e.count,
        })
        .collect()
}

/// Fits every band independently; `alpha`, `tau` and the region are copied
/// into the result.
pub fn fit_all_bands(
    stats: &PairwiseStats,
    layout: &NetworkLayout,
    alpha: f64,
    tau: f64,
) -> Result<ModelParameters> {
    if stats.num_sites() != layout.all_sites().len() {
        return Err(Error::ShapeMismatch(format!(
            "statistics over {} sites, layout has {}",
            stats.num_sites(),
            layout.all_sites().len()
        )));
    }
    let bands = (0..stats.num_bands())
        .into_par_iter()
        .map(|m| {
            let fit =
                fit_band_params(&band_samples(stats, layout, m)).map_err(|e| Error::BandFit {
                    band: m,
                    source: Box::new(e),
                })?;
            Ok(BandParameters {
                epsilon_per_m2: fit.psi / tau.powf(2.0 / alpha),
                psi_per_m2: fit.psi,
                capital_psi: fit.capital_psi,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModelParameters {
        pathloss_exponent: alpha,
        decode_threshold: tau,
        region: layout.region.clone(),
        bands,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{AreaRegion, Location};
    use crate::log::{DecodingLog, PairCount};
    use crate::models::jdp;
    use proptest::prelude::*;

    fn synthetic(psi: f64, cap: f64, seps: &[f64]) -> Vec<JdpSample> {
        seps.iter()
            .enumerate()
            .map(|(i, &d)| JdpSample {
                band: 0,
                pair: (0, i + 1),
                separation_m: d,
                estimate: jdp(psi, cap, d),
                weight: 1000,
            })
            .collect()
    }

    fn separations() -> Vec<f64> {
        (1..=10).map(|k| 800.0 * k as f64).collect()
    }

    #[test]
    fn recovers_noiseless_parameters() {
        let s = synthetic(5e-8, 0.6, &separations());
        let fit = fit_band_params(&s).unwrap();
        assert!(((fit.psi - 5e-8) / 5e-8).abs() < 1e-4, "{fit:?}");
        assert!(((fit.capital_psi - 0.6) / 0.6).abs() < 1e-4, "{fit:?}");
        let (psi0, cap0) = initial_guess(&s);
        assert!(fit.residual <= objective(&s, psi0.ln(), logit(cap0)));
    }

    #[test]
    fn constant_estimates_give_flat_model() {
        let mut s = synthetic(0.0, 0.4, &separations());
        for x in &mut s {
            x.estimate = 0.4;
        }
        let fit = fit_band_params(&s).unwrap();
        assert!((fit.capital_psi - 0.4).abs() < 1e-6);
        assert!(fit.psi * 8000f64.powi(2) < 1e-4);
    }

    #[test]
    fn underdetermined_and_insufficient() {
        let s = synthetic(5e-8, 0.6, &[1000.0, 1000.0, 1000.0]);
        assert!(matches!(
            fit_band_params(&s),
            Err(Error::Underdetermined(_))
        ));
        let s = synthetic(5e-8, 0.6, &[1000.0]);
        assert!(matches!(
            fit_band_params(&s),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn zero_estimates_are_tolerated() {
        let mut s = synthetic(2e-7, 0.5, &separations());
        s.push(JdpSample {
            separation_m: 20_000.0,
            estimate: 0.0,
            ..s[0]
        });
        let fit = fit_band_params(&s).unwrap();
        assert!(((fit.psi - 2e-7) / 2e-7).abs() < 1e-3);
    }

    #[test]
    fn fits_every_band_from_stats() {
        let region = AreaRegion::disk(10_000.0);
        let sites: Vec<Location> = (0..5)
            .map(|k| Location::polar(1500.0 * k as f64, 0.0))
            .collect();
        let layout = NetworkLayout::new(sites.clone(), vec![], vec![], region).unwrap();
        let mut log = DecodingLog::new(5, 2);
        for a in 0..5 {
            for b in (a + 1)..5 {
                let d = distance(&sites[a], &sites[b]);
                let joint = (jdp(1e-7, 0.5, d) * 1e6).round() as u64;
                for m in 0..2 {
                    *log.pair_mut(a, b, m) = PairCount {
                        observed: 1_000_000,
                        joint,
                    };
                }
            }
        }
        let params = fit_all_bands(&PairwiseStats::from_log(&log), &layout, 4.0, 10.0).unwrap();
        assert_eq!(params.bands[0], params.bands[1]);
        assert!(((params.bands[0].psi_per_m2 - 1e-7) / 1e-7).abs() < 1e-3);

        let empty = DecodingLog::new(5, 2);
        let err = fit_all_bands(&PairwiseStats::from_log(&empty), &layout, 4.0, 10.0).unwrap_err();
        assert!(matches!(err, Error::BandFit { band: 0, .. }));
    }

    proptest! {
        #[test]
        fn order_does_not_matter(rot in 0usize..10) {
            let mut s = synthetic(8e-8, 0.7, &separations());
            for (i, x) in s.iter_mut().enumerate() {
                x.estimate = (x.estimate + 0.01 * ((i * 7 % 5) as f64 - 2.0)).clamp(0.0, 1.0);
            }
            let a = fit_band_params(&s).unwrap();
            s.rotate_left(rot);
            let b = fit_band_params(&s).unwrap();
            prop_assert!(((a.psi - b.psi) / a.psi).abs() < 1e-6);
            prop_assert!((a.capital_psi - b.capital_psi).abs() < 1e-6);
            prop_assert!(a.capital_psi <= 1.0 && a.psi >= 0.0);
        }
    }
}
