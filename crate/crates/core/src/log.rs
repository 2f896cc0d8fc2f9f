//! Decoding logs: the counts a central processor can assemble from the
//! captures of every listening base station.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of the unordered pair `a < b` among `n` sites.
#[inline]
pub fn pair_index(n: usize, a: usize, b: usize) -> usize {
    debug_assert!(a < b && b < n);
    a * n - a * (a + 1) / 2 + (b - a - 1)
}

pub fn num_pairs(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteCount {
    pub observed: u64,
    pub decoded: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCount {
    pub observed: u64,
    pub joint: u64,
}

/// Outcome of one complete packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketOutcome {
    pub repetitions: u32,
    /// Repetitions decoded by at least one contributing base station.
    pub decoded: u32,
}

/// Per-site, per-band and per-pair repetition counts plus packet outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodingLog {
    num_sites: usize,
    num_bands: usize,
    pub horizon_s: f64,
    site: Vec<SiteCount>,
    pair: Vec<PairCount>,
    pub packets: Vec<PacketOutcome>,
    /// Band listened to by each site, one entry per phase.
    pub assignments: Vec<Vec<Option<usize>>>,
}

impl DecodingLog {
    pub fn new(num_sites: usize, num_bands: usize) -> Self {
        Self {
            num_sites,
            num_bands,
            horizon_s: 0.0,
            site: vec![SiteCount::default(); num_sites * num_bands],
            pair: vec![PairCount::default(); num_pairs(num_sites) * num_bands],
            packets: Vec::new(),
            assignments: Vec::new(),
        }
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn num_bands(&self) -> usize {
        self.num_bands
    }

    pub fn site(&self, b: usize, m: usize) -> SiteCount {
        self.site[b * self.num_bands + m]
    }

    pub fn site_mut(&mut self, b: usize, m: usize) -> &mut SiteCount {
        &mut self.site[b * self.num_bands + m]
    }

    /// Pair counts; order of `a`, `b` is irrelevant. `a == b` yields the
    /// site counts.
    pub fn pair(&self, a: usize, b: usize, m: usize) -> PairCount {
        if a == b {
            let s = self.site(a, m);
            return PairCount {
                observed: s.observed,
                joint: s.decoded,
            };
        }
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        self.pair[pair_index(self.num_sites, a, b) * self.num_bands + m]
    }

    pub fn pair_mut(&mut self, a: usize, b: usize, m: usize) -> &mut PairCount {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        &mut self.pair[pair_index(self.num_sites, a, b) * self.num_bands + m]
    }

    /// Adds `other` into `self`. Counts are additive, so merging is
    /// commutative up to packet order.
    pub fn merge(&mut self, other: &DecodingLog) -> Result<()> {
        if other.num_sites != self.num_sites || other.num_bands != self.num_bands {
            return Err(Error::ShapeMismatch(format!(
                "cannot merge log of {}x{} into {}x{}",
                other.num_sites, other.num_bands, self.num_sites, self.num_bands
            )));
        }
        for (a, b) in self.site.iter_mut().zip(&other.site) {
            a.observed += b.observed;
            a.decoded += b.decoded;
        }
        for (a, b) in self.pair.iter_mut().zip(&other.pair) {
            a.observed += b.observed;
            a.joint += b.joint;
        }
        self.packets.extend_from_slice(&other.packets);
        self.assignments.extend(other.assignments.iter().cloned());
        self.horizon_s += other.horizon_s;
        Ok(())
    }

    /// Site rows: `location_id,band,observed,decoded` (observed sites only).
    pub fn write_site_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["location_id", "band", "observed", "decoded"])?;
        for b in 0..self.num_sites {
            for m in 0..self.num_bands {
                let c = self.site(b, m);
                if c.observed > 0 {
                    w.serialize((b, m, c.observed, c.decoded))?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Pair rows: `loc_a,loc_b,band,joint_decoded,observed` with `loc_a < loc_b`.
    pub fn write_pair_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["loc_a", "loc_b", "band", "joint_decoded", "observed"])?;
        for a in 0..self.num_sites {
            for b in (a + 1)..self.num_sites {
                for m in 0..self.num_bands {
                    let c = self.pair(a, b, m);
                    if c.observed > 0 {
                        w.serialize((a, b, m, c.joint, c.observed))?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Rebuilds the count tables from the two CSV files. Packet outcomes are
    /// not part of the CSV contract and come back empty.
    pub fn read_csv<R1: Read, R2: Read>(
        sites: R1,
        pairs: R2,
        num_sites: usize,
        num_bands: usize,
    ) -> Result<Self> {
        let mut log = Self::new(num_sites, num_bands);
        let check = |b: usize, m: usize, line: u64| -> Result<()> {
            if b >= num_sites || m >= num_bands {
                return Err(Error::ShapeMismatch(format!(
                    "record {line}: site {b} band {m} out of range"
                )));
            }
            Ok(())
        };
        let mut r = csv::Reader::from_reader(sites);
        for (i, rec) in r.deserialize::<(usize, usize, u64, u64)>().enumerate() {
            let (b, m, observed, decoded) = rec?;
            check(b, m, i as u64 + 2)?;
            *log.site_mut(b, m) = SiteCount { observed, decoded };
        }
        let mut r = csv::Reader::from_reader(pairs);
        for (i, rec) in r
            .deserialize::<(usize, usize, usize, u64, u64)>()
            .enumerate()
        {
            let (a, b, m, joint, observed) = rec?;
            check(a.max(b), m, i as u64 + 2)?;
            if a == b {
                return Err(Error::ShapeMismatch(format!(
                    "record {}: loc_a == loc_b",
                    i + 2
                )));
            }
            *log.pair_mut(a, b, m) = PairCount { observed, joint };
        }
        Ok(log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_index_is_dense() {
        let n = 6;
        let mut seen = vec![false; num_pairs(n)];
        for a in 0..n {
            for b in (a + 1)..n {
                let i = pair_index(n, a, b);
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn csv_round_trip() {
        let mut log = DecodingLog::new(3, 2);
        *log.site_mut(0, 1) = SiteCount {
            observed: 10,
            decoded: 4,
        };
        *log.site_mut(2, 1) = SiteCount {
            observed: 10,
            decoded: 7,
        };
        *log.pair_mut(2, 0, 1) = PairCount {
            observed: 10,
            joint: 3,
        };
        let (mut s, mut p) = (Vec::new(), Vec::new());
        log.write_site_csv(&mut s).unwrap();
        log.write_pair_csv(&mut p).unwrap();
        let text = String::from_utf8(p.clone()).unwrap();
        assert!(text.starts_with("loc_a,loc_b,band,joint_decoded,observed\n0,2,1,3,10"));
        let back = DecodingLog::read_csv(&s[..], &p[..], 3, 2).unwrap();
        assert_eq!(back.site(0, 1), log.site(0, 1));
        assert_eq!(back.pair(0, 2, 1), log.pair(0, 2, 1));
        assert!(DecodingLog::read_csv(&s[..], &p[..], 2, 2).is_err());
    }

    #[test]
    fn merge_adds_counts_and_rejects_shape_mismatch() {
        let mut a = DecodingLog::new(2, 1);
        *a.site_mut(0, 0) = SiteCount {
            observed: 5,
            decoded: 2,
        };
        let b = a.clone();
        a.merge(&b).unwrap();
        assert_eq!(
            a.site(0, 0),
            SiteCount {
                observed: 10,
                decoded: 4
            }
        );
        assert!(a.merge(&DecodingLog::new(3, 1)).is_err());
    }
}
