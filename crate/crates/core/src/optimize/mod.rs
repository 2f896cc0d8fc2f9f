//! Placement and band assignment: the second-order objective, an exact
//! branch-and-bound solver, an exhaustive oracle and baseline heuristics.

mod baselines;
mod bnb;
mod concavity;

use std::io::{Read, Write};

pub use baselines::{max_separation_assignment, random_assignment};
pub use bnb::{brute_force, solve, Problem, Solution, SolveStatus};
pub use concavity::{min_eigenvalue, second_moment_matrix};

use crate::assignment::AssignmentMatrix;
use crate::error::{Error, Result};
use crate::log::{num_pairs, pair_index};
use crate::stats::PairwiseStats;

use std::time::Duration;

/// ADP (linear) and JDP (quadratic) coefficients of the objective over the
/// placement sites: installed base stations first, then candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveCoefficients {
    num_rows: usize,
    num_bands: usize,
    linear: Vec<f64>,
    quadratic: Vec<f64>,
}

impl ObjectiveCoefficients {
    pub fn new(num_rows: usize, num_bands: usize) -> Self {
        Self {
            num_rows,
            num_bands,
            linear: vec![0.0; num_rows * num_bands],
            quadratic: vec![0.0; num_pairs(num_rows) * num_bands],
        }
    }

    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    pub fn num_bands(&self) -> usize {
        self.num_bands
    }

    pub fn linear(&self, b: usize, m: usize) -> f64 {
        self.linear[b * self.num_bands + m]
    }

    pub fn set_linear(&mut self, b: usize, m: usize, value: f64) {
        self.linear[b * self.num_bands + m] = value;
    }

    fn pair_slot(&self, b: usize, v: usize, m: usize) -> usize {
        let (a, b) = if b < v { (b, v) } else { (v, b) };
        pair_index(self.num_rows, a, b) * self.num_bands + m
    }

    /// Symmetric in `b`, `v`; requires `b != v`.
    pub fn quadratic(&self, b: usize, v: usize, m: usize) -> f64 {
        self.quadratic[self.pair_slot(b, v, m)]
    }

    pub fn set_quadratic(&mut self, b: usize, v: usize, m: usize, value: f64) {
        let k = self.pair_slot(b, v, m);
        self.quadratic[k] = value;
    }

    /// Measured coefficients. Unmeasured ADPs are zero; an unmeasured JDP
    /// falls back to the product of the two ADPs.
    pub fn from_stats(stats: &PairwiseStats, rows: usize) -> Result<Self> {
        let sites: Vec<usize> = (0..rows).collect();
        Self::from_stats_at(stats, &sites)
    }

    /// As [`Self::from_stats`], with row `i` taken from statistics site
    /// `sites[i]`.
    pub fn from_stats_at(stats: &PairwiseStats, sites: &[usize]) -> Result<Self> {
        if let Some(&s) = sites.iter().find(|&&s| s >= stats.num_sites()) {
            return Err(Error::ShapeMismatch(format!(
                "site {s} requested from statistics over {} sites",
                stats.num_sites()
            )));
        }
        let nb = stats.num_bands();
        let rows = sites.len();
        let mut c = Self::new(rows, nb);
        for (b, &sb) in sites.iter().enumerate() {
            for m in 0..nb {
                c.set_linear(b, m, stats.adp(sb, m).map_or(0.0, |e| e.value));
            }
        }
        for b in 0..rows {
            for v in (b + 1)..rows {
                for m in 0..nb {
                    let value = match stats.jdp(sites[b], sites[v], m) {
                        Some(e) => e.value,
                        None => c.linear(b, m) * c.linear(v, m),
                    };
                    c.set_quadratic(b, v, m, value);
                }
            }
        }
        Ok(c)
    }

    /// CSV with columns `kind,loc_a,loc_b,band,value`; linear rows repeat
    /// the location.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["kind", "loc_a", "loc_b", "band", "value"])?;
        for b in 0..self.num_rows {
            for m in 0..self.num_bands {
                w.serialize(("linear", b, b, m, self.linear(b, m)))?;
            }
        }
        for b in 0..self.num_rows {
            for v in (b + 1)..self.num_rows {
                for m in 0..self.num_bands {
                    w.serialize(("quadratic", b, v, m, self.quadratic(b, v, m)))?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, num_rows: usize, num_bands: usize) -> Result<Self> {
        let mut c = Self::new(num_rows, num_bands);
        let mut r = csv::Reader::from_reader(reader);
        for (i, rec) in r
            .deserialize::<(String, usize, usize, usize, f64)>()
            .enumerate()
        {
            let (kind, a, b, m, value) = rec?;
            let line = i + 2;
            if a >= num_rows || b >= num_rows || m >= num_bands {
                return Err(Error::ShapeMismatch(format!(
                    "line {line}: index out of range"
                )));
            }
            match kind.as_str() {
                "linear" if a == b => c.set_linear(a, m, value),
                "quadratic" if a != b => c.set_quadratic(a, b, m, value),
                _ => {
                    return Err(Error::Config(format!(
                        "line {line}: bad record kind `{kind}`"
                    )))
                }
            }
        }
        Ok(c)
    }
}

/// Second-order objective: sum of the ADPs of occupied rows minus the JDPs
/// of co-band pairs.
pub fn objective_value(x: &AssignmentMatrix, coeffs: &ObjectiveCoefficients) -> Result<f64> {
    if x.num_rows() != coeffs.num_rows() || x.num_bands() != coeffs.num_bands() {
        return Err(Error::ShapeMismatch(format!(
            "assignment {}x{} vs coefficients {}x{}",
            x.num_rows(),
            x.num_bands(),
            coeffs.num_rows(),
            coeffs.num_bands()
        )));
    }
    let rows = x.rows();
    let mut total = 0.0;
    for (b, rb) in rows.iter().enumerate() {
        let Some(m) = *rb else { continue };
        total += coeffs.linear(b, m);
        for (v, rv) in rows.iter().enumerate().skip(b + 1) {
            if *rv == Some(m) {
                total -= coeffs.quadratic(b, v, m);
            }
        }
    }
    Ok(total)
}

fn p3_problem(coeffs: &ObjectiveCoefficients, installed: usize, delta_b: usize) -> Result<Problem> {
    let rows = coeffs.num_rows();
    if installed > rows {
        return Err(Error::ShapeMismatch(format!(
            "{installed} installed rows of {rows}"
        )));
    }
    let mut p = Problem::new(rows, installed, coeffs.num_bands(), delta_b)?;
    for b in 0..rows {
        for m in 0..coeffs.num_bands() {
            p.set_linear(b, m, coeffs.linear(b, m));
            for v in (b + 1)..rows {
                p.set_pair(b, v, m, -coeffs.quadratic(b, v, m));
            }
        }
    }
    Ok(p)
}

/// Maximizes the second-order objective over feasible assignments with
/// `installed` installed rows and exactly `delta_b` candidates placed.
pub fn solve_p3(
    coeffs: &ObjectiveCoefficients,
    installed: usize,
    delta_b: usize,
    time_limit: Duration,
) -> Result<Solution> {
    solve(&p3_problem(coeffs, installed, delta_b)?, time_limit)
}

/// Exhaustive optimum of the second-order objective; the lexicographically
/// smallest `vec(X)` wins among ties.
pub fn brute_force_p3(
    coeffs: &ObjectiveCoefficients,
    installed: usize,
    delta_b: usize,
) -> Result<Solution> {
    brute_force(&p3_problem(coeffs, installed, delta_b)?)
}
