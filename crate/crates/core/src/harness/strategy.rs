//! Placement and band-assignment methods behind one trait, looked up by name.

use rand::seq::IndexedRandom;

use crate::assignment::AssignmentMatrix;
use crate::error::{Error, Result};
use crate::fit::fit_all_bands;
use crate::models::predict_coefficients;
use crate::optimize::{
    max_separation_assignment, random_assignment, solve_p3, ObjectiveCoefficients,
};
use crate::planner::{EstimateKey, Mode};
use crate::rng::streams;
use crate::stats::PairwiseStats;

use super::pipeline::{all_installed_assignments, forced_assignment, run_training, Iteration};

/// What a method decided for one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub assignment: AssignmentMatrix,
    /// Objective value the method optimized, when it has one.
    pub objective: Option<f64>,
    pub training_phases: usize,
}

impl Decision {
    fn plain(assignment: AssignmentMatrix) -> Self {
        Self {
            assignment,
            objective: None,
            training_phases: 0,
        }
    }
}

pub trait AssignmentStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn decide(&self, it: &Iteration) -> Result<Decision>;
}

/// Random bands with the per-band floor; random placement of new stations.
pub struct RandomStrategy;

impl AssignmentStrategy for RandomStrategy {
    fn name(&self) -> &'static str {
        "random"
    }

    fn decide(&self, it: &Iteration) -> Result<Decision> {
        let cfg = &it.config;
        let x = random_assignment(
            it.installed(),
            it.candidates(),
            cfg.num_bands,
            cfg.delta_b,
            &mut it.rng(streams::STRATEGY, self.name()),
        )?;
        Ok(Decision::plain(x))
    }
}

/// Maximizes the summed co-band separation.
pub struct MaxSeparationStrategy;

impl AssignmentStrategy for MaxSeparationStrategy {
    fn name(&self) -> &'static str {
        "max-separation"
    }

    fn decide(&self, it: &Iteration) -> Result<Decision> {
        let cfg = &it.config;
        let s = max_separation_assignment(
            &it.layout,
            cfg.num_bands,
            cfg.delta_b,
            cfg.solver_time_limit(),
        )?;
        Ok(Decision {
            objective: Some(s.objective),
            ..Decision::plain(s.assignment)
        })
    }
}

/// Fits the decoding model to JDP estimates from training and optimizes the
/// predicted objective.
pub struct ModelStrategy;

impl AssignmentStrategy for ModelStrategy {
    fn name(&self) -> &'static str {
        "mod"
    }

    fn decide(&self, it: &Iteration) -> Result<Decision> {
        if let Some(x) = forced_assignment(it) {
            return Ok(Decision::plain(x));
        }
        let cfg = &it.config;
        let extra: Vec<usize> = (0..cfg.temporary).map(|t| it.temporary_site(t)).collect();
        let training = run_training(it, Mode::Mod, &extra, |_| true)?;
        let stats = PairwiseStats::from_log(&training.log);
        let params = fit_all_bands(
            &stats,
            &it.layout,
            cfg.pathloss_exponent,
            cfg.decode_threshold(),
        )?;
        let coeffs = predict_coefficients(&params, &it.layout)?;
        let s = solve_p3(
            &coeffs,
            it.installed(),
            cfg.delta_b,
            cfg.solver_time_limit(),
        )?;
        Ok(Decision {
            assignment: s.assignment,
            objective: Some(s.objective),
            training_phases: training.plan.chosen.len(),
        })
    }
}

/// Estimates every ADP and JDP directly, with temporary stations at all
/// candidate locations when new stations are to be placed.
pub struct MeasurementStrategy;

impl AssignmentStrategy for MeasurementStrategy {
    fn name(&self) -> &'static str {
        "meas"
    }

    fn decide(&self, it: &Iteration) -> Result<Decision> {
        if let Some(x) = forced_assignment(it) {
            return Ok(Decision::plain(x));
        }
        let cfg = &it.config;
        let installed = it.installed();
        let extra: Vec<usize> = if cfg.delta_b > 0 {
            (0..it.candidates()).map(|c| it.candidate_site(c)).collect()
        } else {
            Vec::new()
        };
        // Two candidates only share a band when at least two are placed.
        let relevant = |k: EstimateKey| match k {
            EstimateKey::Jdp { a, b, .. } => cfg.delta_b >= 2 || a < installed || b < installed,
            EstimateKey::Adp { .. } => true,
        };
        let training = run_training(it, Mode::Meas, &extra, relevant)?;
        let stats = PairwiseStats::from_log(&training.log);
        let coeffs = ObjectiveCoefficients::from_stats(&stats, installed + it.candidates())?;
        let s = solve_p3(&coeffs, installed, cfg.delta_b, cfg.solver_time_limit())?;
        Ok(Decision {
            assignment: s.assignment,
            objective: Some(s.objective),
            training_phases: training.plan.chosen.len(),
        })
    }
}

/// Places new stations at random candidates, then assigns bands of all
/// stations from direct measurements.
pub struct RandomPlacementStrategy;

impl AssignmentStrategy for RandomPlacementStrategy {
    fn name(&self) -> &'static str {
        "random-placement"
    }

    fn decide(&self, it: &Iteration) -> Result<Decision> {
        let cfg = &it.config;
        let installed = it.installed();
        let all: Vec<usize> = (0..it.candidates()).collect();
        let mut chosen: Vec<usize> = all
            .choose_multiple(&mut it.rng(streams::STRATEGY, self.name()), cfg.delta_b)
            .copied()
            .collect();
        chosen.sort_unstable();
        let extra: Vec<usize> = chosen.iter().map(|&c| it.candidate_site(c)).collect();
        let training = run_training(it, Mode::Meas, &extra, |_| true)?;
        let stats = PairwiseStats::from_log(&training.log);
        let sites: Vec<usize> = (0..installed).chain(extra.iter().copied()).collect();
        let coeffs = ObjectiveCoefficients::from_stats_at(&stats, &sites)?;
        let s = solve_p3(&coeffs, sites.len(), 0, cfg.solver_time_limit())?;
        let mut rows = vec![None; installed + it.candidates()];
        for (i, &site) in sites.iter().enumerate() {
            rows[site] = s.assignment.band(i);
        }
        Ok(Decision {
            assignment: AssignmentMatrix::from_rows(installed, cfg.num_bands, rows)?,
            objective: Some(s.objective),
            training_phases: training.plan.chosen.len(),
        })
    }
}

/// Which metric a replay maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayCriterion {
    Tdp,
    Pdp,
}

/// Replays every band assignment of the installed stations against the
/// evaluation traffic and keeps the best one. Only available in simulation.
pub struct ReplayStrategy(pub ReplayCriterion);

impl AssignmentStrategy for ReplayStrategy {
    fn name(&self) -> &'static str {
        match self.0 {
            ReplayCriterion::Tdp => "replay-tdp",
            ReplayCriterion::Pdp => "replay-pdp",
        }
    }

    fn decide(&self, it: &Iteration) -> Result<Decision> {
        if it.config.delta_b > 0 {
            return Err(Error::Config(
                "replay covers band assignment only; set delta_b = 0".into(),
            ));
        }
        let mut best: Option<(f64, AssignmentMatrix)> = None;
        for x in all_installed_assignments(it)? {
            let o = it.evaluate(&x);
            let score = match self.0 {
                ReplayCriterion::Tdp => o.tdp,
                ReplayCriterion::Pdp => o.pdp,
            };
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, x));
            }
        }
        let (score, x) = best.expect("at least one assignment");
        Ok(Decision {
            objective: Some(score),
            ..Decision::plain(x)
        })
    }
}

/// Strategies addressable by name.
pub struct StrategyRegistry {
    entries: Vec<Box<dyn AssignmentStrategy>>,
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(RandomStrategy));
        r.register(Box::new(MaxSeparationStrategy));
        r.register(Box::new(ModelStrategy));
        r.register(Box::new(MeasurementStrategy));
        r.register(Box::new(RandomPlacementStrategy));
        r.register(Box::new(ReplayStrategy(ReplayCriterion::Tdp)));
        r.register(Box::new(ReplayStrategy(ReplayCriterion::Pdp)));
        r
    }
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    /// Adds a strategy, replacing any with the same name.
    pub fn register(&mut self, strategy: Box<dyn AssignmentStrategy>) {
        self.entries.retain(|s| s.name() != strategy.name());
        self.entries.push(strategy);
    }

    pub fn get(&self, name: &str) -> Result<&dyn AssignmentStrategy> {
        self.entries
            .iter()
            .find(|s| s.name() == name)
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::UnknownStrategy(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|s| s.name()).collect()
    }
}
