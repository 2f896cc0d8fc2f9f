//! One Monte-Carlo iteration: shared topology and traffic, training runs,
//! and evaluation of the chosen assignments.

use rand::SeedableRng;
use rand_distr::{Distribution, Exp1};

use crate::assignment::AssignmentMatrix;
use crate::error::{Error, Result};
use crate::geometry::{sample_uniform, NetworkLayout};
use crate::log::DecodingLog;
use crate::planner::{
    enumerate_viable, greedy_cover, measurable_set, schedule, CoverageTarget, EstimateKey,
    KeySpace, Mode, TrainingPlan,
};
use crate::rng::{derive_seed, stream, streams, RayleighFading, SimRng};
use crate::sim::{
    DecodeField, EventStream, Listening, Outcome, Phase, Population, RadioEnvironment,
};
use crate::traffic::TimeWindow;

use super::config::ExperimentConfig;

/// Incumbent band PMF drawn uniformly from the probability simplex.
pub fn uniform_simplex<R: rand::Rng + ?Sized>(num_bands: usize, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = (0..num_bands).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}

/// Everything the methods of one iteration share. Training occupies
/// `[0, training_s)` and evaluation the following `evaluation_s` seconds of
/// the same event stream.
#[derive(Debug, Clone)]
pub struct Iteration {
    pub config: ExperimentConfig,
    pub index: usize,
    /// Seed from which every stream of this iteration is derived.
    pub seed: u64,
    pub layout: NetworkLayout,
    pub env: RadioEnvironment,
    pub field: DecodeField,
    pub training: TimeWindow,
    pub evaluation: TimeWindow,
}

impl Iteration {
    pub fn prepare(config: &ExperimentConfig, index: usize) -> Result<Self> {
        config.validate()?;
        let seed = derive_seed(config.seed, 0, index as u64);
        let mut topo = stream(seed, streams::TOPOLOGY, 0);
        let mut layout = NetworkLayout::random(
            config.region.clone(),
            config.installed,
            config.candidates,
            &mut topo,
        )?;
        layout.temporary = sample_uniform(&layout.region, config.temporary, &mut topo);

        let pmf = match &config.incumbent_pmf {
            Some(p) => p.clone(),
            None => uniform_simplex(config.num_bands, &mut stream(seed, streams::PMF, 0)),
        };
        let env = config.environment(pmf);
        let population = Population::sample(
            &layout.region,
            config.iot_density_per_m2(),
            config.incumbent_density_per_m2(),
            &mut stream(seed, streams::POPULATION, 0),
        )?;
        let horizon = config.training_s + config.evaluation_s;
        let events = EventStream::generate(
            &env,
            &population,
            horizon,
            &mut stream(seed, streams::IOT_EVENTS, 0),
            &mut stream(seed, streams::INCUMBENT_EVENTS, 0),
        )?;
        let fading = RayleighFading::new(derive_seed(seed, streams::FADING, 0));
        let field = DecodeField::compute(
            &events,
            &layout.all_sites(),
            config.num_bands,
            &fading,
            &env.channel,
        )?;
        Ok(Self {
            config: config.clone(),
            index,
            seed,
            layout,
            env,
            field,
            training: TimeWindow::new(0.0, config.training_s),
            evaluation: TimeWindow::new(config.training_s, horizon + 1.0),
        })
    }

    pub fn installed(&self) -> usize {
        self.layout.num_installed()
    }

    pub fn candidates(&self) -> usize {
        self.layout.num_candidates()
    }

    /// Site index of candidate `c` in `layout.all_sites()`.
    pub fn candidate_site(&self, c: usize) -> usize {
        self.installed() + c
    }

    /// Site index of temporary station `t` in `layout.all_sites()`.
    pub fn temporary_site(&self, t: usize) -> usize {
        self.installed() + self.candidates() + t
    }

    /// Deterministic generator for a labelled purpose within this iteration.
    pub fn rng(&self, stream_label: u64, name: &str) -> SimRng {
        let tag = name
            .bytes()
            .fold(0u64, |h, b| h.wrapping_mul(131).wrapping_add(u64::from(b)));
        SimRng::seed_from_u64(derive_seed(self.seed, stream_label, tag))
    }

    /// PDP and TDP of `assignment` over the evaluation window.
    pub fn evaluate(&self, assignment: &AssignmentMatrix) -> Outcome {
        let temporary = vec![None; self.layout.temporary.len()];
        self.field.outcome_in(
            &Listening::from_assignment(assignment, &temporary),
            self.evaluation,
        )
    }
}

/// Decoding log collected while a training plan runs.
#[derive(Debug, Clone)]
pub struct Training {
    pub plan: TrainingPlan,
    pub log: DecodingLog,
}

/// Plans and runs training over the installed stations plus the stations at
/// `extra` (site indices into `layout.all_sites()`). Keys for which
/// `relevant` is false are left out of the coverage universe; its indices
/// refer to training sites, installed first.
pub fn run_training(
    it: &Iteration,
    mode: Mode,
    extra: &[usize],
    relevant: impl Fn(EstimateKey) -> bool,
) -> Result<Training> {
    let cfg = &it.config;
    let installed = it.installed();
    let viable = enumerate_viable(
        installed,
        extra.len(),
        cfg.num_bands,
        cfg.band_floor(),
        cfg.viable_cap,
        &mut it.rng(streams::VIABLE, &format!("{mode:?}")),
    )?;
    let space = KeySpace {
        num_sites: viable.num_sites(),
        num_bands: cfg.num_bands,
    };
    let sets: Vec<Vec<u32>> = viable
        .iter()
        .map(|x| {
            let mut keys = measurable_set(x, cfg.num_bands, mode);
            keys.retain(|&k| relevant(space.decode(k)));
            keys
        })
        .collect();
    let target = match mode {
        Mode::Mod => CoverageTarget::per_band(space, vec![cfg.jdp_demand_per_band; cfg.num_bands])
            .pruned(&sets),
        Mode::Meas => CoverageTarget::full(space, &sets),
    };
    let chosen = greedy_cover(&target, &sets)?;
    let plan = TrainingPlan {
        assignments: chosen
            .iter()
            .map(|&i| viable.get(i).iter().map(|&m| m as usize).collect())
            .collect(),
        chosen,
    };

    if plan.chosen.is_empty() {
        // Nothing measurable is demanded.
        return Ok(Training {
            log: DecodingLog::new(it.field.num_sites(), cfg.num_bands),
            plan,
        });
    }
    let global = |i: usize| {
        if i < installed {
            i
        } else {
            extra[i - installed]
        }
    };
    let phases: Vec<Phase> = schedule(&plan, cfg.training_s)?
        .into_iter()
        .map(|ph| {
            let n = it.field.num_sites();
            let mut bands = vec![None; n];
            let mut contributes = vec![false; n];
            for (i, &m) in ph.bands.iter().enumerate() {
                bands[global(i)] = Some(m);
                contributes[global(i)] = i < installed;
            }
            Phase {
                window: TimeWindow::new(ph.start_s, ph.start_s + ph.duration_s),
                listening: Listening { bands, contributes },
            }
        })
        .collect();
    Ok(Training {
        log: it.field.log(&phases),
        plan,
    })
}

/// When only one placement and assignment exists there is nothing to learn.
pub fn forced_assignment(it: &Iteration) -> Option<AssignmentMatrix> {
    let cfg = &it.config;
    if cfg.num_bands != 1 || !(cfg.delta_b == 0 || cfg.delta_b == cfg.candidates) {
        return None;
    }
    let rows = (0..it.installed() + it.candidates())
        .map(|b| (b < it.installed() || cfg.delta_b > 0).then_some(0))
        .collect();
    AssignmentMatrix::from_rows(it.installed(), 1, rows).ok()
}

/// Every assignment of the installed stations, in lexicographic order.
pub fn all_installed_assignments(it: &Iteration) -> Result<Vec<AssignmentMatrix>> {
    let cfg = &it.config;
    let b = it.installed();
    let size = (cfg.num_bands as f64).powi(b as i32);
    if size > cfg.replay_cap as f64 {
        return Err(Error::EnumerationCap {
            size,
            cap: cfg.replay_cap as f64,
        });
    }
    let mut out = Vec::with_capacity(size as usize);
    let mut x = vec![0usize; b];
    loop {
        let mut rows: Vec<Option<usize>> = x.iter().map(|&m| Some(m)).collect();
        rows.resize(b + it.candidates(), None);
        out.push(AssignmentMatrix::from_rows(b, cfg.num_bands, rows)?);
        let mut i = b;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            x[i] += 1;
            if x[i] < cfg.num_bands {
                break;
            }
            x[i] = 0;
        }
    }
}
