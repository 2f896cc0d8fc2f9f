use std::time::Duration;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::assignment::AssignmentMatrix;
use crate::error::{Error, Result};
use crate::geometry::{distance, NetworkLayout};

use super::bnb::{solve, Problem, Solution};

/// Random bands with at least `floor(B / M)` installed base stations per band
/// and `delta_b` candidates chosen uniformly, each on a random band.
pub fn random_assignment<R: Rng + ?Sized>(
    installed: usize,
    candidates: usize,
    num_bands: usize,
    delta_b: usize,
    rng: &mut R,
) -> Result<AssignmentMatrix> {
    if num_bands == 0 {
        return Err(Error::ShapeMismatch("no bands".into()));
    }
    if delta_b > candidates {
        return Err(Error::InfeasibleAssignment(format!(
            "{delta_b} new base stations but only {candidates} candidates"
        )));
    }
    let floor = installed / num_bands;
    let mut bands: Vec<usize> = (0..num_bands)
        .flat_map(|m| std::iter::repeat_n(m, floor))
        .collect();
    while bands.len() < installed {
        bands.push(rng.random_range(0..num_bands));
    }
    bands.shuffle(rng);
    let mut rows: Vec<Option<usize>> = bands.into_iter().map(Some).collect();
    rows.resize(installed + candidates, None);
    let all: Vec<usize> = (installed..installed + candidates).collect();
    for &b in all.choose_multiple(rng, delta_b) {
        rows[b] = Some(rng.random_range(0..num_bands));
    }
    AssignmentMatrix::from_rows(installed, num_bands, rows)
}

/// Maximizes the summed separation of co-band base stations subject to the
/// same per-band floor as [`random_assignment`]. Without the floor every
/// station would share one band.
pub fn max_separation_assignment(
    layout: &NetworkLayout,
    num_bands: usize,
    delta_b: usize,
    time_limit: Duration,
) -> Result<Solution> {
    let sites = layout.placement_sites();
    let installed = layout.num_installed();
    let mut p = Problem::new(sites.len(), installed, num_bands, delta_b)?
        .with_floor(installed / num_bands.max(1))?;
    for b in 0..sites.len() {
        for v in (b + 1)..sites.len() {
            let d = distance(&sites[b], &sites[v]);
            for m in 0..num_bands {
                p.set_pair(b, v, m, d);
            }
        }
    }
    solve(&p, time_limit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{AreaRegion, Location};
    use crate::optimize::bnb::brute_force;
    use crate::rng::stream;

    #[test]
    fn one_per_band_is_a_permutation() {
        let mut rng = stream(51, 0, 0);
        for _ in 0..50 {
            let x = random_assignment(3, 0, 3, 0, &mut rng).unwrap();
            let mut bands: Vec<usize> = x.rows().iter().flatten().copied().collect();
            bands.sort_unstable();
            assert_eq!(bands, vec![0, 1, 2]);
        }
    }

    #[test]
    fn floor_holds_and_occupancy_is_uniform() {
        let mut rng = stream(52, 0, 0);
        let mut hist = [0usize; 3];
        let draws = 3000;
        for _ in 0..draws {
            let x = random_assignment(7, 4, 3, 2, &mut rng).unwrap();
            x.validate(2).unwrap();
            let mut counts = [0usize; 3];
            for m in x.rows()[..7].iter().flatten() {
                counts[*m] += 1;
            }
            assert!(counts.iter().all(|&c| c >= 2));
            for m in x.rows().iter().flatten() {
                hist[*m] += 1;
            }
        }
        let total = (draws * 9) as f64;
        for h in hist {
            let p = h as f64 / total;
            assert!((p - 1.0 / 3.0).abs() < 0.02, "{p}");
        }
    }

    fn layout(points: &[(f64, f64)], candidates: &[(f64, f64)]) -> NetworkLayout {
        let loc = |&(x, y): &(f64, f64)| Location::cartesian(x, y);
        NetworkLayout::new(
            points.iter().map(loc).collect(),
            candidates.iter().map(loc).collect(),
            vec![],
            AreaRegion::disk(10_000.0),
        )
        .unwrap()
    }

    #[test]
    fn two_stations_split_bands() {
        let l = layout(&[(0.0, 0.0), (100.0, 0.0)], &[]);
        let s = max_separation_assignment(&l, 2, 0, Duration::from_secs(1)).unwrap();
        assert_eq!(s.objective, 0.0);
        assert_eq!(s.assignment.rows(), &[Some(1), Some(0)]);
    }

    #[test]
    fn collinear_single_band_sums_all_distances() {
        let l = layout(&[(0.0, 0.0), (100.0, 0.0), (300.0, 0.0)], &[]);
        let s = max_separation_assignment(&l, 1, 0, Duration::from_secs(1)).unwrap();
        assert!((s.objective - 600.0).abs() < 1e-9);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = stream(53, 0, 0);
        for _ in 0..30 {
            let region = AreaRegion::disk(5000.0);
            let l = NetworkLayout::random(region, 5, 3, &mut rng).unwrap();
            let s = max_separation_assignment(&l, 2, 1, Duration::from_secs(5)).unwrap();
            let sites = l.placement_sites();
            let mut p = Problem::new(8, 5, 2, 1).unwrap().with_floor(2).unwrap();
            for b in 0..8 {
                for v in (b + 1)..8 {
                    for m in 0..2 {
                        p.set_pair(b, v, m, distance(&sites[b], &sites[v]));
                    }
                }
            }
            let bf = brute_force(&p).unwrap();
            assert!((s.objective - bf.objective).abs() < 1e-6);
            assert_eq!(s.assignment, bf.assignment);
        }
    }
}
