//! Empirical decoding probabilities estimated from decoding logs.

use std::io::Write;

use crate::error::{Error, Result};
use crate::log::{num_pairs, pair_index, DecodingLog};

/// A ratio estimate together with the number of trials behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub count: u64,
}

impl Estimate {
    fn from_counts(hits: u64, trials: u64) -> Option<Self> {
        (trials > 0).then(|| Self {
            value: hits as f64 / trials as f64,
            count: trials,
        })
    }

    /// Binomial standard error of the estimate.
    pub fn std_error(&self) -> f64 {
        (self.value * (1.0 - self.value) / self.count as f64).sqrt()
    }
}

pub fn empirical_adp(log: &DecodingLog, b: usize, m: usize) -> Result<f64> {
    let c = log.site(b, m);
    if c.observed == 0 {
        return Err(Error::InsufficientData(format!(
            "location {b} never observed band {m}"
        )));
    }
    Ok(c.decoded as f64 / c.observed as f64)
}

pub fn empirical_jdp(log: &DecodingLog, b: usize, v: usize, m: usize) -> Result<f64> {
    let c = log.pair(b, v, m);
    if c.observed == 0 {
        return Err(Error::InsufficientData(format!(
            "locations {b} and {v} never observed band {m} together"
        )));
    }
    Ok(c.joint as f64 / c.observed as f64)
}

/// Fraction of complete packets with at least one decoded repetition.
pub fn empirical_pdp(log: &DecodingLog) -> Result<f64> {
    if log.packets.is_empty() {
        return Err(Error::InsufficientData(
            "log holds no complete packet".into(),
        ));
    }
    let hit = log.packets.iter().filter(|p| p.decoded > 0).count();
    Ok(hit as f64 / log.packets.len() as f64)
}

/// Fraction of repetitions of complete packets that were decoded.
pub fn empirical_tdp(log: &DecodingLog) -> Result<f64> {
    let total: u64 = log.packets.iter().map(|p| p.repetitions as u64).sum();
    if total == 0 {
        return Err(Error::InsufficientData(
            "log holds no complete packet".into(),
        ));
    }
    let hit: u64 = log.packets.iter().map(|p| p.decoded as u64).sum();
    Ok(hit as f64 / total as f64)
}

/// All ADP and JDP estimates available in one log. Entries are `None` where
/// the corresponding location (pair) never listened to the band.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseStats {
    num_sites: usize,
    num_bands: usize,
    adp: Vec<Option<Estimate>>,
    jdp: Vec<Option<Estimate>>,
}

impl PairwiseStats {
    pub fn from_log(log: &DecodingLog) -> Self {
        let (n, nb) = (log.num_sites(), log.num_bands());
        let mut adp = Vec::with_capacity(n * nb);
        for b in 0..n {
            for m in 0..nb {
                let c = log.site(b, m);
                adp.push(Estimate::from_counts(c.decoded, c.observed));
            }
        }
        let mut jdp = vec![None; num_pairs(n) * nb];
        for a in 0..n {
            for b in (a + 1)..n {
                for m in 0..nb {
                    let c = log.pair(a, b, m);
                    jdp[pair_index(n, a, b) * nb + m] = Estimate::from_counts(c.joint, c.observed);
                }
            }
        }
        Self {
            num_sites: n,
            num_bands: nb,
            adp,
            jdp,
        }
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn num_bands(&self) -> usize {
        self.num_bands
    }

    pub fn adp(&self, b: usize, m: usize) -> Option<Estimate> {
        self.adp[b * self.num_bands + m]
    }

    /// Symmetric in `b`, `v`; `b == v` returns the ADP.
    pub fn jdp(&self, b: usize, v: usize, m: usize) -> Option<Estimate> {
        if b == v {
            return self.adp(b, m);
        }
        let (a, b) = if b < v { (b, v) } else { (v, b) };
        self.jdp[pair_index(self.num_sites, a, b) * self.num_bands + m]
    }

    /// Measured JDP entries on band `m` as `(b, v, estimate)` with `b < v`.
    pub fn jdp_entries(&self, m: usize) -> Vec<(usize, usize, Estimate)> {
        let mut out = Vec::new();
        for a in 0..self.num_sites {
            for b in (a + 1)..self.num_sites {
                if let Some(e) = self.jdp(a, b, m) {
                    out.push((a, b, e));
                }
            }
        }
        out
    }

    /// CSV with columns `kind,loc_a,loc_b,band,estimate,count`; ADP rows
    /// repeat the location in both columns.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["kind", "loc_a", "loc_b", "band", "estimate", "count"])?;
        for b in 0..self.num_sites {
            for m in 0..self.num_bands {
                if let Some(e) = self.adp(b, m) {
                    w.serialize(("adp", b, b, m, e.value, e.count))?;
                }
            }
        }
        for m in 0..self.num_bands {
            for (a, b, e) in self.jdp_entries(m) {
                w.serialize(("jdp", a, b, m, e.value, e.count))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
