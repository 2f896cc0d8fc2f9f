//! Depth-first branch and bound over row assignments.
//!
//! Each row (placement site) takes one option: a band, or nothing for an
//! unused candidate. The objective is a sum of per-row terms plus a term for
//! every pair of rows on the same band. The bound at a node adds, for every
//! open row, its best option given the rows already fixed, plus half of the
//! positive pair terms it could still collect with other open rows.

use std::cmp::Ordering;
use std::time::{Duration, Instant};

use crate::assignment::AssignmentMatrix;
use crate::error::{Error, Result};
use crate::log::{num_pairs, pair_index};

const TIE: f64 = 1e-9;
const BRUTE_FORCE_CAP: f64 = 1e7;

/// A row-assignment problem: rows `0..installed` must take a band, exactly
/// `delta_b` of the remaining rows take one, and each band must hold at
/// least `floor` installed rows.
#[derive(Debug, Clone)]
pub struct Problem {
    rows: usize,
    installed: usize,
    bands: usize,
    delta_b: usize,
    floor: usize,
    linear: Vec<f64>,
    pair: Vec<f64>,
}

impl Problem {
    pub fn new(rows: usize, installed: usize, bands: usize, delta_b: usize) -> Result<Self> {
        if bands == 0 || installed > rows {
            return Err(Error::ShapeMismatch(format!(
                "{rows} rows, {installed} installed, {bands} bands"
            )));
        }
        if delta_b > rows - installed {
            return Err(Error::InfeasibleAssignment(format!(
                "{delta_b} new base stations but only {} candidates",
                rows - installed
            )));
        }
        Ok(Self {
            rows,
            installed,
            bands,
            delta_b,
            floor: 0,
            linear: vec![0.0; rows * bands],
            pair: vec![0.0; num_pairs(rows) * bands],
        })
    }

    /// Requires at least `floor` installed rows on every band.
    pub fn with_floor(mut self, floor: usize) -> Result<Self> {
        if floor * self.bands > self.installed {
            return Err(Error::InfeasibleAssignment(format!(
                "floor {floor} on {} bands needs more than {} installed base stations",
                self.bands, self.installed
            )));
        }
        self.floor = floor;
        Ok(self)
    }

    pub fn set_linear(&mut self, b: usize, m: usize, value: f64) {
        self.linear[b * self.bands + m] = value;
    }

    pub fn set_pair(&mut self, b: usize, v: usize, m: usize, value: f64) {
        let (a, b) = if b < v { (b, v) } else { (v, b) };
        self.pair[pair_index(self.rows, a, b) * self.bands + m] = value;
    }

    fn lin(&self, b: usize, m: usize) -> f64 {
        self.linear[b * self.bands + m]
    }

    fn pr(&self, a: usize, b: usize, m: usize) -> f64 {
        self.pair[pair_index(self.rows, a, b) * self.bands + m]
    }

    /// Objective of a complete row assignment.
    pub fn value(&self, rows: &[Option<usize>]) -> f64 {
        let mut total = 0.0;
        for (b, rb) in rows.iter().enumerate() {
            let Some(m) = *rb else { continue };
            total += self.lin(b, m);
            for (v, rv) in rows.iter().enumerate().skip(b + 1) {
                if *rv == Some(m) {
                    total += self.pr(b, v, m);
                }
            }
        }
        total
    }

    pub fn is_feasible(&self, rows: &[Option<usize>]) -> bool {
        if rows.len() != self.rows || rows.iter().flatten().any(|&m| m >= self.bands) {
            return false;
        }
        if rows[..self.installed].iter().any(Option::is_none) {
            return false;
        }
        if rows[self.installed..].iter().flatten().count() != self.delta_b {
            return false;
        }
        let mut counts = vec![0; self.bands];
        for m in rows[..self.installed].iter().flatten() {
            counts[*m] += 1;
        }
        counts.iter().all(|&c| c >= self.floor)
    }

    fn to_matrix(&self, rows: Vec<Option<usize>>) -> AssignmentMatrix {
        AssignmentMatrix::from_rows(self.installed, self.bands, rows).expect("rows within shape")
    }
}

/// Whether the search finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// The time limit stopped the search; the assignment is the best found.
    TimeLimited,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub assignment: AssignmentMatrix,
    pub objective: f64,
    pub status: SolveStatus,
    pub nodes: u64,
}

/// Order of `vec(X)` computed from row form.
fn lex_rows(a: &[Option<usize>], b: &[Option<usize>], bands: usize) -> Ordering {
    for m in 0..bands {
        for (x, y) in a.iter().zip(b) {
            match (*x == Some(m)).cmp(&(*y == Some(m))) {
                Ordering::Equal => {}
                other => return other,
            }
        }
    }
    Ordering::Equal
}

struct Incumbent {
    rows: Vec<Option<usize>>,
    value: f64,
}

impl Incumbent {
    fn offer(&mut self, rows: &[Option<usize>], value: f64, bands: usize) {
        let better = value > self.value + TIE
            || (value >= self.value - TIE
                && (self.rows.is_empty() || lex_rows(rows, &self.rows, bands) == Ordering::Less));
        if better {
            self.rows.clear();
            self.rows.extend_from_slice(rows);
        }
        self.value = self.value.max(value);
    }
}

struct Search<'a> {
    p: &'a Problem,
    rows: Vec<Option<usize>>,
    /// Value of each option for each row given the rows fixed so far.
    contrib: Vec<f64>,
    counts: Vec<usize>,
    placed: usize,
    partial: f64,
    best: Incumbent,
    has_positive_pairs: bool,
    nodes: u64,
    start: Instant,
    limit: Duration,
    timed_out: bool,
    scratch: Vec<f64>,
}

impl<'a> Search<'a> {
    fn new(p: &'a Problem, limit: Duration) -> Self {
        Self {
            p,
            rows: Vec::with_capacity(p.rows),
            contrib: p.linear.clone(),
            counts: vec![0; p.bands],
            placed: 0,
            partial: 0.0,
            best: Incumbent {
                rows: Vec::new(),
                value: f64::NEG_INFINITY,
            },
            has_positive_pairs: p.pair.iter().any(|&x| x > 0.0),
            nodes: 0,
            start: Instant::now(),
            limit,
            timed_out: false,
            scratch: Vec::new(),
        }
    }

    fn apply(&mut self, option: Option<usize>) {
        let r = self.rows.len();
        if let Some(m) = option {
            let nb = self.p.bands;
            self.partial += self.contrib[r * nb + m];
            for u in (r + 1)..self.p.rows {
                self.contrib[u * nb + m] += self.p.pr(r, u, m);
            }
            if r < self.p.installed {
                self.counts[m] += 1;
            } else {
                self.placed += 1;
            }
        }
        self.rows.push(option);
    }

    fn undo(&mut self) {
        let option = self.rows.pop().expect("undo after apply");
        let r = self.rows.len();
        if let Some(m) = option {
            let nb = self.p.bands;
            for u in (r + 1)..self.p.rows {
                self.contrib[u * nb + m] -= self.p.pr(r, u, m);
            }
            self.partial -= self.contrib[r * nb + m];
            if r < self.p.installed {
                self.counts[m] -= 1;
            } else {
                self.placed -= 1;
            }
        }
    }

    /// Whether the open rows can still satisfy the floor and the candidate count.
    fn feasible(&self) -> bool {
        let k = self.rows.len();
        let p = self.p;
        let open_installed = p.installed.saturating_sub(k);
        let deficit: usize = self.counts.iter().map(|&c| p.floor.saturating_sub(c)).sum();
        if deficit > open_installed {
            return false;
        }
        let open_candidates = p.rows - k.max(p.installed);
        self.placed <= p.delta_b && p.delta_b - self.placed <= open_candidates
    }

    fn bound(&mut self) -> f64 {
        let p = self.p;
        let k = self.rows.len();
        let nb = p.bands;
        let need = p.delta_b - self.placed;
        let mut total = self.partial;
        self.scratch.clear();
        let mut gains = Vec::new();
        for r in k..p.rows {
            // At most `need` open candidates are placed, one fewer when `r`
            // is one of them.
            let cap = if r < p.installed {
                need
            } else {
                need.saturating_sub(1)
            };
            let mut best = f64::NEG_INFINITY;
            for m in 0..nb {
                let mut g = self.contrib[r * nb + m];
                if self.has_positive_pairs {
                    let mut extra = 0.0;
                    gains.clear();
                    for u in k..p.rows {
                        if u != r {
                            let (a, b) = if r < u { (r, u) } else { (u, r) };
                            let v = p.pr(a, b, m).max(0.0);
                            if u < p.installed {
                                extra += v;
                            } else if v > 0.0 && cap > 0 {
                                gains.push(v);
                            }
                        }
                    }
                    if gains.len() > cap {
                        gains.select_nth_unstable_by(cap - 1, |a, b| b.total_cmp(a));
                        gains.truncate(cap);
                    }
                    g += 0.5 * (extra + gains.iter().sum::<f64>());
                }
                best = best.max(g);
            }
            if r < p.installed {
                total += best;
            } else {
                self.scratch.push(best);
            }
        }
        if need > 0 {
            self.scratch.sort_unstable_by(|a, b| b.total_cmp(a));
            total += self.scratch[..need].iter().sum::<f64>();
        }
        total
    }

    fn run(&mut self) {
        self.nodes += 1;
        // The limit only applies once a feasible assignment is known.
        if self.nodes.is_multiple_of(64)
            && !self.best.rows.is_empty()
            && self.start.elapsed() > self.limit
        {
            self.timed_out = true;
        }
        if self.timed_out {
            return;
        }
        let p = self.p;
        let r = self.rows.len();
        if r == p.rows {
            let value = p.value(&self.rows);
            self.best.offer(&self.rows, value, p.bands);
            return;
        }
        let nb = p.bands;
        let mut options: Vec<(Option<usize>, f64)> = Vec::with_capacity(nb + 1);
        if r >= p.installed {
            options.push((None, 0.0));
        }
        for m in 0..nb {
            options.push((Some(m), self.contrib[r * nb + m]));
        }
        options.sort_by(|a, b| b.1.total_cmp(&a.1));
        for (option, _) in options {
            self.apply(option);
            if self.feasible() && self.bound() >= self.best.value - TIE {
                self.run();
            }
            self.undo();
            if self.timed_out {
                return;
            }
        }
    }
}

/// Branch-and-bound optimum. When `time_limit` elapses the best assignment
/// found so far is returned with [`SolveStatus::TimeLimited`].
pub fn solve(problem: &Problem, time_limit: Duration) -> Result<Solution> {
    let mut search = Search::new(problem, time_limit);
    search.run();
    if search.best.rows.is_empty() && problem.rows > 0 {
        return Err(Error::InfeasibleAssignment(if search.timed_out {
            "time limit reached before any feasible assignment".into()
        } else {
            "no feasible assignment".into()
        }));
    }
    let rows = std::mem::take(&mut search.best.rows);
    let objective = problem.value(&rows);
    Ok(Solution {
        assignment: problem.to_matrix(rows),
        objective,
        status: if search.timed_out {
            SolveStatus::TimeLimited
        } else {
            SolveStatus::Optimal
        },
        nodes: search.nodes,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn enumerate(p: &Problem, rows: &mut Vec<Option<usize>>, visit: &mut dyn FnMut(&[Option<usize>])) {
    if rows.len() == p.rows {
        if p.is_feasible(rows) {
            visit(rows);
        }
        return;
    }
    let placed = rows[p.installed.min(rows.len())..].iter().flatten().count();
    let r = rows.len();
    if r >= p.installed {
        if p.rows - r > p.delta_b - placed {
            rows.push(None);
            enumerate(p, rows, visit);
            rows.pop();
        }
        if placed == p.delta_b {
            return;
        }
    }
    for m in 0..p.bands {
        rows.push(Some(m));
        enumerate(p, rows, visit);
        rows.pop();
    }
}

/// Exhaustive optimum; among assignments within a tolerance of the best
/// value the lexicographically smallest `vec(X)` is returned.
pub fn brute_force(p: &Problem) -> Result<Solution> {
    let candidates = p.rows - p.installed;
    let size =
        binomial(candidates, p.delta_b) * (p.bands as f64).powi((p.installed + p.delta_b) as i32);
    if size > BRUTE_FORCE_CAP {
        return Err(Error::EnumerationCap {
            size,
            cap: BRUTE_FORCE_CAP,
        });
    }
    let mut max = f64::NEG_INFINITY;
    let mut count = 0u64;
    enumerate(p, &mut Vec::new(), &mut |rows| {
        max = max.max(p.value(rows));
        count += 1;
    });
    if count == 0 {
        return Err(Error::InfeasibleAssignment("no feasible assignment".into()));
    }
    let mut best: Option<Vec<Option<usize>>> = None;
    enumerate(p, &mut Vec::new(), &mut |rows| {
        if p.value(rows) >= max - TIE
            && best
                .as_ref()
                .is_none_or(|b| lex_rows(rows, b, p.bands) == Ordering::Less)
        {
            best = Some(rows.to_vec());
        }
    });
    let rows = best.expect("at least one assignment reaches the maximum");
    Ok(Solution {
        objective: p.value(&rows),
        assignment: p.to_matrix(rows),
        status: SolveStatus::Optimal,
        nodes: count,
    })
}
