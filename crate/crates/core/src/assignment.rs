//! The placement/band assignment matrix X of shape (B + C) x M.

use std::cmp::Ordering;
use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Binary assignment stored row-wise: each location listens to at most one
/// band, so a row is either empty or holds a single band index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AssignmentMatrix {
    rows: Vec<Option<usize>>,
    installed: usize,
    num_bands: usize,
}

impl AssignmentMatrix {
    pub fn empty(installed: usize, candidates: usize, num_bands: usize) -> Self {
        Self {
            rows: vec![None; installed + candidates],
            installed,
            num_bands,
        }
    }

    pub fn from_rows(installed: usize, num_bands: usize, rows: Vec<Option<usize>>) -> Result<Self> {
        if installed > rows.len() {
            return Err(Error::ShapeMismatch(format!(
                "{installed} installed rows but only {} rows",
                rows.len()
            )));
        }
        if let Some(m) = rows.iter().flatten().find(|&&m| m >= num_bands) {
            return Err(Error::ShapeMismatch(format!("band {m} out of range")));
        }
        Ok(Self {
            rows,
            installed,
            num_bands,
        })
    }

    /// From an explicit 0/1 matrix; rows with more than one entry are rejected.
    pub fn from_binary(installed: usize, matrix: &[Vec<u8>]) -> Result<Self> {
        let num_bands = matrix.first().map_or(0, Vec::len);
        let mut rows = Vec::with_capacity(matrix.len());
        for (b, row) in matrix.iter().enumerate() {
            if row.len() != num_bands {
                return Err(Error::ShapeMismatch(format!(
                    "row {b} has {} columns",
                    row.len()
                )));
            }
            if row.iter().any(|&v| v > 1) {
                return Err(Error::InfeasibleAssignment(format!(
                    "row {b} is not binary"
                )));
            }
            let ones: Vec<usize> = (0..num_bands).filter(|&m| row[m] == 1).collect();
            match ones.len() {
                0 => rows.push(None),
                1 => rows.push(Some(ones[0])),
                _ => {
                    return Err(Error::InfeasibleAssignment(format!(
                        "location {b} assigned to {} bands",
                        ones.len()
                    )))
                }
            }
        }
        Self::from_rows(installed, num_bands, rows)
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_installed(&self) -> usize {
        self.installed
    }

    pub fn num_candidates(&self) -> usize {
        self.rows.len() - self.installed
    }

    pub fn num_bands(&self) -> usize {
        self.num_bands
    }

    pub fn band(&self, b: usize) -> Option<usize> {
        self.rows[b]
    }

    pub fn rows(&self) -> &[Option<usize>] {
        &self.rows
    }

    pub fn set(&mut self, b: usize, band: Option<usize>) {
        debug_assert!(band.is_none_or(|m| m < self.num_bands));
        self.rows[b] = band;
    }

    /// Entry `[X]_{b,m}`.
    pub fn get(&self, b: usize, m: usize) -> bool {
        self.rows[b] == Some(m)
    }

    pub fn placed_candidates(&self) -> usize {
        self.rows[self.installed..]
            .iter()
            .filter(|r| r.is_some())
            .count()
    }

    /// Number of occupied rows on each band.
    pub fn band_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_bands];
        for m in self.rows.iter().flatten() {
            counts[*m] += 1;
        }
        counts
    }

    /// Checks the placement constraints: every installed row holds exactly
    /// one band and exactly `delta_b` candidate rows are occupied.
    pub fn validate(&self, delta_b: usize) -> Result<()> {
        if let Some(b) = (0..self.installed).find(|&b| self.rows[b].is_none()) {
            return Err(Error::InfeasibleAssignment(format!(
                "installed base station {b} has no band"
            )));
        }
        let placed = self.placed_candidates();
        if placed != delta_b {
            return Err(Error::InfeasibleAssignment(format!(
                "{placed} candidate locations used, expected {delta_b}"
            )));
        }
        Ok(())
    }

    /// `vec(X)`: column-major flattening.
    pub fn vec(&self) -> Vec<u8> {
        let mut v = Vec::with_capacity(self.rows.len() * self.num_bands);
        for m in 0..self.num_bands {
            for r in &self.rows {
                v.push(u8::from(*r == Some(m)));
            }
        }
        v
    }

    /// Lexicographic order of `vec(X)`.
    pub fn lex_cmp(&self, other: &Self) -> Ordering {
        self.vec().cmp(&other.vec())
    }

    /// CSV with columns `location,kind,band`; `band` is empty for unused rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["location", "kind", "band"])?;
        for (b, r) in self.rows.iter().enumerate() {
            let kind = if b < self.installed {
                "installed"
            } else {
                "candidate"
            };
            let band = r.map(|m| m.to_string()).unwrap_or_default();
            w.write_record([b.to_string().as_str(), kind, band.as_str()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, num_bands: usize) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut rows = Vec::new();
        let mut installed = 0;
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let field = |k: usize| rec.get(k).unwrap_or("").trim().to_string();
            let b: usize = field(0)
                .parse()
                .map_err(|_| Error::Config(format!("line {line}: bad location")))?;
            if b != rows.len() {
                return Err(Error::Config(format!(
                    "line {line}: locations must be consecutive"
                )));
            }
            match field(1).as_str() {
                "installed" => {
                    if installed != rows.len() {
                        return Err(Error::Config(format!(
                            "line {line}: installed rows must come first"
                        )));
                    }
                    installed += 1;
                }
                "candidate" => {}
                other => {
                    return Err(Error::Config(format!(
                        "line {line}: unknown kind `{other}`"
                    )))
                }
            }
            let band = field(2);
            rows.push(if band.is_empty() {
                None
            } else {
                Some(
                    band.parse()
                        .map_err(|_| Error::Config(format!("line {line}: bad band")))?,
                )
            });
        }
        Self::from_rows(installed, num_bands, rows)
    }
}
