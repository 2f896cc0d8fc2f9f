//! Training-phase planning: which band assignments to apply, and for how
//! long, so that the required ADP and JDP estimates can be collected.
//!
//! Training sites are the installed base stations (indices `0..B`) followed
//! by temporary ones. Installed stations must keep a minimum number per band;
//! temporary stations are unconstrained.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::log::{num_pairs, pair_index};
use crate::optimize::ObjectiveCoefficients;

/// Which estimates a training campaign must collect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// A number of distinct JDP estimates per band, for model fitting.
    Mod,
    /// Every reachable ADP and JDP estimate.
    Meas,
}

/// Candidate band assignments of the training sites.
#[derive(Debug, Clone, PartialEq)]
pub struct ViableAssignmentSet {
    pub installed: usize,
    pub temporary: usize,
    pub num_bands: usize,
    pub floor: usize,
    /// True when every viable assignment is listed.
    pub exhaustive: bool,
    bands: Vec<u8>,
}

impl ViableAssignmentSet {
    pub fn num_sites(&self) -> usize {
        self.installed + self.temporary
    }

    pub fn len(&self) -> usize {
        self.bands.len() / self.num_sites().max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    pub fn get(&self, i: usize) -> &[u8] {
        let n = self.num_sites();
        &self.bands[i * n..(i + 1) * n]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u8]> {
        self.bands.chunks(self.num_sites().max(1))
    }

    pub fn satisfies_floor(&self, assignment: &[u8]) -> bool {
        satisfies_floor(assignment, self.installed, self.num_bands, self.floor)
    }

    /// Keeps only the assignments accepted by `keep`, in order.
    pub fn retain(&mut self, keep: impl Fn(&[u8]) -> bool) {
        let n = self.num_sites().max(1);
        let bands = std::mem::take(&mut self.bands);
        self.bands = bands
            .chunks(n)
            .filter(|x| keep(x))
            .flatten()
            .copied()
            .collect();
        self.exhaustive = false;
    }
}

/// Viability predicate: the second-order objective of the installed
/// stations' bands, under coefficients from an earlier training episode, is
/// at least `threshold`.
pub fn predicted_objective_at_least(
    coeffs: &ObjectiveCoefficients,
    threshold: f64,
) -> impl Fn(&[u8]) -> bool + '_ {
    move |x: &[u8]| {
        let x = &x[..coeffs.num_rows().min(x.len())];
        let mut value = 0.0;
        for (b, &mb) in x.iter().enumerate() {
            value += coeffs.linear(b, mb as usize);
            for (v, _) in x.iter().enumerate().skip(b + 1).filter(|(_, &mv)| mv == mb) {
                value -= coeffs.quadratic(b, v, mb as usize);
            }
        }
        value >= threshold
    }
}

fn satisfies_floor(assignment: &[u8], installed: usize, num_bands: usize, floor: usize) -> bool {
    let mut counts = vec![0usize; num_bands];
    for &m in &assignment[..installed] {
        counts[m as usize] += 1;
    }
    counts.iter().all(|&c| c >= floor)
}

/// Number of assignments of `installed` labelled stations to `num_bands`
/// bands with at least `floor` per band.
fn count_installed(installed: usize, num_bands: usize, floor: usize) -> f64 {
    // ways[k]: assignments of k labelled stations to the bands seen so far.
    let mut binom = vec![vec![0.0f64; installed + 1]; installed + 1];
    for n in 0..=installed {
        binom[n][0] = 1.0;
        for k in 1..=n {
            binom[n][k] = binom[n - 1][k - 1] + if k < n { binom[n - 1][k] } else { 0.0 };
        }
    }
    let mut ways = vec![0.0; installed + 1];
    ways[0] = 1.0;
    for _ in 0..num_bands {
        let mut next = vec![0.0; installed + 1];
        for (k, slot) in next.iter_mut().enumerate() {
            for j in floor..=k {
                *slot += binom[k][j] * ways[k - j];
            }
        }
        ways = next;
    }
    ways[installed]
}

/// Size of the full viable set.
pub fn count_viable(installed: usize, temporary: usize, num_bands: usize, floor: usize) -> f64 {
    count_installed(installed, num_bands, floor) * (num_bands as f64).powi(temporary as i32)
}

/// Lists the viable assignments in lexicographic order, or a uniform sample
/// of `cap` distinct ones when there are more than `cap`.
pub fn enumerate_viable<R: Rng + ?Sized>(
    installed: usize,
    temporary: usize,
    num_bands: usize,
    floor: usize,
    cap: usize,
    rng: &mut R,
) -> Result<ViableAssignmentSet> {
    if num_bands == 0 || num_bands > u8::MAX as usize {
        return Err(Error::ShapeMismatch(format!("{num_bands} bands")));
    }
    if floor * num_bands > installed {
        return Err(Error::InfeasibleAssignment(format!(
            "floor {floor} on {num_bands} bands needs more than {installed} installed base stations"
        )));
    }
    let n = installed + temporary;
    let total = count_viable(installed, temporary, num_bands, floor);
    let mut set = ViableAssignmentSet {
        installed,
        temporary,
        num_bands,
        floor,
        exhaustive: total <= cap as f64,
        bands: Vec::new(),
    };
    if n == 0 {
        return Ok(set);
    }
    if set.exhaustive {
        let mut x = vec![0u8; n];
        loop {
            if satisfies_floor(&x, installed, num_bands, floor) {
                set.bands.extend_from_slice(&x);
            }
            // Odometer increment with the last site varying fastest.
            let mut i = n;
            loop {
                if i == 0 {
                    return Ok(set);
                }
                i -= 1;
                x[i] += 1;
                if (x[i] as usize) < num_bands {
                    break;
                }
                x[i] = 0;
            }
        }
    }
    // Rejection sampling gives uniform draws over the viable set.
    let mut seen: HashSet<Vec<u8>> = HashSet::with_capacity(cap);
    let mut x = vec![0u8; n];
    while seen.len() < cap {
        for v in x.iter_mut() {
            *v = rng.random_range(0..num_bands) as u8;
        }
        if satisfies_floor(&x, installed, num_bands, floor) && seen.insert(x.clone()) {
            set.bands.extend_from_slice(&x);
        }
    }
    Ok(set)
}

/// Dense indexing of the estimates over `num_sites` training sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeySpace {
    pub num_sites: usize,
    pub num_bands: usize,
}

/// A decoded estimate key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateKey {
    Adp { site: usize, band: usize },
    Jdp { a: usize, b: usize, band: usize },
}

impl KeySpace {
    pub fn jdp(&self, a: usize, b: usize, m: usize) -> u32 {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        (pair_index(self.num_sites, a, b) * self.num_bands + m) as u32
    }

    pub fn adp(&self, b: usize, m: usize) -> u32 {
        ((num_pairs(self.num_sites) + b) * self.num_bands + m) as u32
    }

    pub fn size(&self) -> usize {
        (num_pairs(self.num_sites) + self.num_sites) * self.num_bands
    }

    pub fn band_of(&self, key: u32) -> usize {
        key as usize % self.num_bands
    }

    pub fn decode(&self, key: u32) -> EstimateKey {
        let band = self.band_of(key);
        let idx = key as usize / self.num_bands;
        let pairs = num_pairs(self.num_sites);
        if idx >= pairs {
            return EstimateKey::Adp {
                site: idx - pairs,
                band,
            };
        }
        let n = self.num_sites;
        let mut a = 0;
        let mut start = 0;
        while start + (n - a - 1) <= idx {
            start += n - a - 1;
            a += 1;
        }
        EstimateKey::Jdp {
            a,
            b: a + 1 + idx - start,
            band,
        }
    }
}

/// Keys collectable under one assignment, sorted.
pub fn measurable_set(assignment: &[u8], num_bands: usize, mode: Mode) -> Vec<u32> {
    let space = KeySpace {
        num_sites: assignment.len(),
        num_bands,
    };
    let mut keys = Vec::new();
    for (a, &ma) in assignment.iter().enumerate() {
        for (b, &mb) in assignment.iter().enumerate().skip(a + 1) {
            if ma == mb {
                keys.push(space.jdp(a, b, ma as usize));
            }
        }
        if mode == Mode::Meas {
            keys.push(space.adp(a, ma as usize));
        }
    }
    keys.sort_unstable();
    keys
}

/// Demands per partition over a key space.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageTarget {
    pub space: KeySpace,
    pub mode: Mode,
    /// One demand per band in MOD mode; a single demand in MEAS mode.
    pub demands: Vec<usize>,
}

impl CoverageTarget {
    pub fn per_band(space: KeySpace, demands: Vec<usize>) -> Self {
        Self {
            space,
            mode: Mode::Mod,
            demands,
        }
    }

    /// Every key reachable by at least one of `sets`.
    pub fn full(space: KeySpace, sets: &[Vec<u32>]) -> Self {
        let reachable: HashSet<u32> = sets.iter().flatten().copied().collect();
        Self {
            space,
            mode: Mode::Meas,
            demands: vec![reachable.len()],
        }
    }

    fn partition(&self, key: u32) -> usize {
        match self.mode {
            Mode::Mod => self.space.band_of(key),
            Mode::Meas => 0,
        }
    }

    fn reachable_counts(&self, sets: &[Vec<u32>]) -> Vec<usize> {
        let mut seen = vec![false; self.space.size()];
        let mut counts = vec![0; self.demands.len()];
        for &k in sets.iter().flatten() {
            if !seen[k as usize] {
                seen[k as usize] = true;
                counts[self.partition(k)] += 1;
            }
        }
        counts
    }

    /// Caps every demand at the number of keys the sets can reach.
    pub fn pruned(&self, sets: &[Vec<u32>]) -> Self {
        let reach = self.reachable_counts(sets);
        let mut out = self.clone();
        for (d, r) in out.demands.iter_mut().zip(reach) {
            *d = (*d).min(r);
        }
        out
    }
}

/// Ordered assignments chosen for training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingPlan {
    /// Indices into the viable set, in selection order.
    pub chosen: Vec<usize>,
    /// Band of every training site, one entry per chosen assignment.
    pub assignments: Vec<Vec<usize>>,
}

/// Greedy partition set cover: repeatedly picks the set that reduces the
/// residual demands most, crediting each partition at most its remaining
/// demand. Ties go to the lowest index.
pub fn greedy_cover(target: &CoverageTarget, sets: &[Vec<u32>]) -> Result<Vec<usize>> {
    let reach = target.reachable_counts(sets);
    let short: Vec<String> = target
        .demands
        .iter()
        .zip(&reach)
        .enumerate()
        .filter(|(_, (d, r))| d > r)
        .map(|(p, (d, r))| format!("partition {p}: demand {d}, reachable {r}"))
        .collect();
    if !short.is_empty() {
        return Err(Error::Uncoverable(short.join("; ")));
    }

    let mut residual = target.demands.clone();
    let mut covered = vec![false; target.space.size()];
    let mut per_partition = vec![0usize; residual.len()];
    let mut gain = |set: &[u32], covered: &[bool], residual: &[usize]| -> usize {
        per_partition.iter_mut().for_each(|c| *c = 0);
        for &k in set {
            if !covered[k as usize] {
                per_partition[target.partition(k)] += 1;
            }
        }
        per_partition
            .iter()
            .zip(residual)
            .map(|(c, r)| (*c).min(*r))
            .sum()
    };

    // Lazy evaluation: stored gains are upper bounds because capped coverage
    // only shrinks as more keys are covered.
    let mut heap: BinaryHeap<(usize, Reverse<usize>, usize)> = sets
        .iter()
        .enumerate()
        .map(|(i, s)| (gain(s, &covered, &residual), Reverse(i), 0))
        .collect();
    let mut chosen = Vec::new();
    let mut round = 0;
    while residual.iter().any(|&r| r > 0) {
        let Some((g, Reverse(i), stamp)) = heap.pop() else {
            return Err(Error::Uncoverable(
                "sets exhausted before demands were met".into(),
            ));
        };
        if stamp != round {
            heap.push((gain(&sets[i], &covered, &residual), Reverse(i), round));
            continue;
        }
        if g == 0 {
            return Err(Error::Uncoverable("no set adds coverage".into()));
        }
        for &k in &sets[i] {
            if !covered[k as usize] {
                covered[k as usize] = true;
                let p = target.partition(k);
                residual[p] = residual[p].saturating_sub(1);
            }
        }
        chosen.push(i);
        round += 1;
    }
    Ok(chosen)
}

/// Builds the measurable sets of a viable set and plans a cover for them.
/// MOD demands are pruned to what the viable set can reach.
pub fn plan_training(
    viable: &ViableAssignmentSet,
    mode: Mode,
    per_band_demand: usize,
) -> Result<TrainingPlan> {
    let space = KeySpace {
        num_sites: viable.num_sites(),
        num_bands: viable.num_bands,
    };
    let sets: Vec<Vec<u32>> = viable
        .iter()
        .map(|x| measurable_set(x, viable.num_bands, mode))
        .collect();
    let target = match mode {
        Mode::Mod => {
            CoverageTarget::per_band(space, vec![per_band_demand; viable.num_bands]).pruned(&sets)
        }
        Mode::Meas => CoverageTarget::full(space, &sets),
    };
    let chosen = greedy_cover(&target, &sets)?;
    let assignments = chosen
        .iter()
        .map(|&i| viable.get(i).iter().map(|&m| m as usize).collect())
        .collect();
    Ok(TrainingPlan {
        chosen,
        assignments,
    })
}

/// One training phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledPhase {
    pub start_s: f64,
    pub duration_s: f64,
    pub bands: Vec<usize>,
}

/// Splits `t_train` into equal contiguous phases, one per plan entry. A plan
/// with no entries (nothing to learn) still needs one phase so that the
/// network keeps operating; callers pass the operating assignment then.
pub fn schedule(plan: &TrainingPlan, t_train: f64) -> Result<Vec<ScheduledPhase>> {
    if plan.assignments.is_empty() {
        return Err(Error::EmptyPlan);
    }
    if !(t_train > 0.0) {
        return Err(crate::error::invalid("t_train", "must be positive"));
    }
    let n = plan.assignments.len();
    let d = t_train / n as f64;
    Ok(plan
        .assignments
        .iter()
        .enumerate()
        .map(|(i, bands)| ScheduledPhase {
            start_s: i as f64 * d,
            duration_s: if i + 1 == n {
                t_train - i as f64 * d
            } else {
                d
            },
            bands: bands.clone(),
        })
        .collect())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    chosen: Vec<usize>,
    phases: Vec<ScheduledPhase>,
}

/// Writes the plan and its schedule as TOML.
pub fn save_plan(plan: &TrainingPlan, t_train: f64, path: &Path) -> Result<()> {
    let file = PlanFile {
        chosen: plan.chosen.clone(),
        phases: schedule(plan, t_train)?,
    };
    let text = toml::to_string(&file).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Reads a plan written by [`save_plan`], returning it with its schedule.
pub fn load_plan(path: &Path) -> Result<(TrainingPlan, Vec<ScheduledPhase>)> {
    let file: PlanFile = toml::from_str(&std::fs::read_to_string(path)?)
        .map_err(|e| Error::Config(e.to_string()))?;
    let plan = TrainingPlan {
        chosen: file.chosen,
        assignments: file.phases.iter().map(|p| p.bands.clone()).collect(),
    };
    Ok((plan, file.phases))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn permutations_when_one_per_band() {
        let v = enumerate_viable(3, 0, 3, 1, 1000, &mut stream(0, 0, 0)).unwrap();
        assert_eq!(v.len(), 6);
        assert!(v.exhaustive);
        // Temporary stations are free.
        let v = enumerate_viable(3, 1, 3, 1, 1000, &mut stream(0, 0, 0)).unwrap();
        assert_eq!(v.len(), 18);
    }

    #[test]
    fn no_floor_gives_all_assignments() {
        let v = enumerate_viable(2, 0, 2, 0, 1000, &mut stream(0, 0, 0)).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(v.get(0), &[0, 0]);
        assert_eq!(v.get(3), &[1, 1]);
    }

    #[test]
    fn counts_match_enumeration() {
        for (b, bh, m, f) in [(5, 1, 2, 2), (6, 0, 3, 2), (7, 2, 3, 1), (4, 0, 1, 4)] {
            let v = enumerate_viable(b, bh, m, f, 1_000_000, &mut stream(0, 0, 0)).unwrap();
            assert_eq!(v.len() as f64, count_viable(b, bh, m, f));
            assert!(v.iter().all(|x| v.satisfies_floor(x)));
        }
    }

    #[test]
    fn capped_sample_is_distinct_and_viable() {
        let v = enumerate_viable(6, 4, 3, 2, 500, &mut stream(71, 0, 0)).unwrap();
        assert!(!v.exhaustive);
        assert_eq!(v.len(), 500);
        let distinct: HashSet<&[u8]> = v.iter().collect();
        assert_eq!(distinct.len(), 500);
        assert!(v.iter().all(|x| v.satisfies_floor(x)));
        assert!(enumerate_viable(2, 0, 3, 1, 10, &mut stream(0, 0, 0)).is_err());
    }

    #[test]
    fn measurable_sets() {
        assert!(measurable_set(&[0, 1, 2], 3, Mode::Mod).is_empty());
        assert_eq!(measurable_set(&[1, 1, 1], 3, Mode::Mod).len(), 3);
        let meas = measurable_set(&[1, 1, 0, 2], 3, Mode::Meas);
        assert_eq!(meas.len(), 1 + 4);
        let space = KeySpace {
            num_sites: 4,
            num_bands: 3,
        };
        assert!(meas.contains(&space.jdp(0, 1, 1)));
        assert!(meas.contains(&space.adp(3, 2)));
    }

    #[test]
    fn key_space_is_dense_and_decodable() {
        let space = KeySpace {
            num_sites: 5,
            num_bands: 3,
        };
        let mut seen = vec![false; space.size()];
        for a in 0..5 {
            for m in 0..3 {
                let k = space.adp(a, m);
                assert_eq!(space.decode(k), EstimateKey::Adp { site: a, band: m });
                seen[k as usize] = true;
                for b in (a + 1)..5 {
                    let k = space.jdp(a, b, m);
                    assert_eq!(space.decode(k), EstimateKey::Jdp { a, b, band: m });
                    seen[k as usize] = true;
                }
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn cover_edge_cases() {
        let space = KeySpace {
            num_sites: 3,
            num_bands: 1,
        };
        let t = CoverageTarget::per_band(space, vec![0]);
        assert!(greedy_cover(&t, &[vec![0, 1]]).unwrap().is_empty());
        let t = CoverageTarget::per_band(space, vec![3]);
        assert_eq!(
            greedy_cover(&t, &[vec![0], vec![0, 1, 2], vec![1]]).unwrap(),
            vec![1]
        );
        let t = CoverageTarget::per_band(space, vec![3]);
        assert!(matches!(
            greedy_cover(&t, &[vec![0], vec![1]]),
            Err(Error::Uncoverable(_))
        ));
    }

    #[test]
    fn ties_pick_lowest_index() {
        let space = KeySpace {
            num_sites: 4,
            num_bands: 1,
        };
        let t = CoverageTarget::per_band(space, vec![2]);
        assert_eq!(
            greedy_cover(&t, &[vec![0], vec![1, 2], vec![3, 4]]).unwrap(),
            vec![1]
        );
    }

    #[test]
    fn viability_filter_drops_low_objective_assignments() {
        // Stations 0 and 1 overlap strongly; sharing a band is penalized.
        let mut c = ObjectiveCoefficients::new(3, 2);
        for b in 0..3 {
            for m in 0..2 {
                c.set_linear(b, m, 0.5);
            }
        }
        c.set_quadratic(0, 1, 0, 0.4);
        c.set_quadratic(0, 1, 1, 0.4);
        let mut v = enumerate_viable(3, 1, 2, 1, 1000, &mut stream(0, 0, 0)).unwrap();
        let before = v.len();
        v.retain(predicted_objective_at_least(&c, 1.5));
        assert!(v.len() < before && !v.is_empty());
        assert!(!v.exhaustive);
        assert!(v.iter().all(|x| x[0] != x[1] && v.satisfies_floor(x)));
    }

    #[test]
    fn schedule_splits_evenly() {
        let plan = TrainingPlan {
            chosen: vec![0, 1, 2],
            assignments: vec![vec![0], vec![1], vec![2]],
        };
        let s = schedule(&plan, 600.0).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|p| (p.duration_s - 200.0).abs() < 1e-12));
        assert_eq!(s.iter().map(|p| p.duration_s).sum::<f64>(), 600.0);
        assert_eq!(s[2].start_s, 400.0);
        let one = TrainingPlan {
            chosen: vec![4],
            assignments: vec![vec![1]],
        };
        assert_eq!(schedule(&one, 600.0).unwrap()[0].duration_s, 600.0);
        let empty = TrainingPlan {
            chosen: vec![],
            assignments: vec![],
        };
        assert!(matches!(schedule(&empty, 600.0), Err(Error::EmptyPlan)));
    }

    #[test]
    fn plan_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plan.toml");
        let plan = TrainingPlan {
            chosen: vec![3, 1],
            assignments: vec![vec![0, 1], vec![1, 1]],
        };
        save_plan(&plan, 600.0, &path).unwrap();
        let (back, phases) = load_plan(&path).unwrap();
        assert_eq!(back, plan);
        assert_eq!(phases[1].start_s, 300.0);
    }
}
