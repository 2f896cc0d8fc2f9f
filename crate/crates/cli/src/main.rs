use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use unbplan::fit::fit_all_bands;
use unbplan::geometry::Location;
use unbplan::harness::experiments::{
    fig3_adp, fig4_jdp, fig5_rmse, fig6_training_time, fig7_density, fig8_placement, mean_pdp,
    write_curve, CurvePoint,
};
use unbplan::harness::pipeline::run_training;
use unbplan::harness::{
    load_config, run_methods, write_rows, ExperimentConfig, Iteration, ResultRow, RunLabel,
    StrategyRegistry,
};
use unbplan::optimize::random_assignment;
use unbplan::planner::{save_plan, Mode};
use unbplan::rng::streams;
use unbplan::stats::PairwiseStats;

#[derive(Parser)]
#[command(
    name = "unbplan",
    version,
    about = "Base-station placement and band assignment for UNB IoT networks"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML); built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long = "mc-iters", global = true)]
    mc_iters: Option<usize>,
    /// Worker threads for Monte-Carlo iterations.
    #[arg(long, global = true)]
    parallel: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a random assignment and write the ADP/JDP estimates.
    Simulate,
    /// Run model-based training on one iteration and write fitted parameters.
    Fit,
    /// Plan the training phases of one iteration.
    PlanTraining {
        #[arg(long, value_enum, default_value = "mod")]
        mode: ModeArg,
    },
    /// Compare band assignment methods.
    Assign {
        #[arg(long = "method", default_values = ["random", "max-separation", "mod", "meas"])]
        methods: Vec<String>,
    },
    /// Compare placement methods for the configured number of new stations.
    Place {
        #[arg(long = "method", default_values = ["random-placement", "max-separation", "mod", "meas"])]
        methods: Vec<String>,
    },
    /// Reproduce one evaluation figure.
    Experiment {
        #[arg(value_enum)]
        figure: Figure,
        /// Sweep values; figure-specific defaults when absent.
        #[arg(long, value_delimiter = ',')]
        sweep: Vec<f64>,
    },
    /// Best assignment found by replaying every assignment.
    ReplayOptimal {
        #[arg(long, value_enum, default_value = "pdp")]
        criterion: CriterionArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Mod,
    Meas,
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    Tdp,
    Pdp,
}

#[derive(Clone, Copy, ValueEnum)]
enum Figure {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(n) = common.mc_iters {
        config.mc_iterations = n;
    }
    config.validate()?;
    Ok(config)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn summarize(rows: &[ResultRow]) {
    for ((method, sweep), pdp) in mean_pdp(rows) {
        eprintln!(
            "{method:>18} sweep={:<10} mean PDP {pdp:.4}",
            f64::from_bits(sweep)
        );
    }
}

fn emit_rows(rows: &[ResultRow], out: Option<&Path>) -> Result<()> {
    summarize(rows);
    write_rows(rows, output(out)?)?;
    Ok(())
}

fn emit_curve(points: &[CurvePoint], out: Option<&Path>) -> Result<()> {
    for p in points {
        eprintln!("{:>10} x={:<10} y={:.5}", p.series, p.x, p.y);
    }
    write_curve(points, output(out)?)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut config = load(&cli.common)?;
    let out = cli.common.out.as_deref();
    let registry = StrategyRegistry::default();
    match cli.command {
        Command::Simulate => {
            let it = Iteration::prepare(&config, 0)?;
            let x = random_assignment(
                it.installed(),
                it.candidates(),
                config.num_bands,
                config.delta_b,
                &mut it.rng(streams::STRATEGY, "simulate"),
            )?;
            let o = it.evaluate(&x);
            eprintln!(
                "PDP {:.4} TDP {:.4} over {} packets",
                o.pdp, o.tdp, o.packets
            );
            let temporary = vec![None; it.layout.temporary.len()];
            let log = it
                .field
                .log_single(&unbplan::sim::Listening::from_assignment(&x, &temporary));
            PairwiseStats::from_log(&log).write_csv(output(out)?)?;
        }
        Command::Fit => {
            let it = Iteration::prepare(&config, 0)?;
            let extra: Vec<usize> = (0..config.temporary)
                .map(|t| it.temporary_site(t))
                .collect();
            let training = run_training(&it, Mode::Mod, &extra, |_| true)?;
            let stats = PairwiseStats::from_log(&training.log);
            let params = fit_all_bands(
                &stats,
                &it.layout,
                config.pathloss_exponent,
                config.decode_threshold(),
            )?;
            output(out)?.write_all(params.to_toml()?.as_bytes())?;
        }
        Command::PlanTraining { mode } => {
            let it = Iteration::prepare(&config, 0)?;
            let (mode, extra): (Mode, Vec<usize>) = match mode {
                ModeArg::Mod => (
                    Mode::Mod,
                    (0..config.temporary)
                        .map(|t| it.temporary_site(t))
                        .collect(),
                ),
                ModeArg::Meas if config.delta_b > 0 => (
                    Mode::Meas,
                    (0..config.candidates)
                        .map(|c| it.candidate_site(c))
                        .collect(),
                ),
                ModeArg::Meas => (Mode::Meas, Vec::new()),
            };
            let training = run_training(&it, mode, &extra, |_| true)?;
            eprintln!("{} training phases", training.plan.chosen.len());
            let path = out
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("plan.toml"));
            save_plan(&training.plan, config.training_s, &path)?;
        }
        Command::Assign { methods } | Command::Place { methods } => {
            let names: Vec<&str> = methods.iter().map(String::as_str).collect();
            let rows = run_methods(&config, &registry, &names, RunLabel::default())?;
            emit_rows(&rows, out)?;
        }
        Command::ReplayOptimal { criterion } => {
            let name = match criterion {
                CriterionArg::Tdp => "replay-tdp",
                CriterionArg::Pdp => "replay-pdp",
            };
            let rows = run_methods(&config, &registry, &[name], RunLabel::default())?;
            emit_rows(&rows, out)?;
        }
        Command::Experiment { figure, sweep } => {
            let or = |d: &[f64]| {
                if sweep.is_empty() {
                    d.to_vec()
                } else {
                    sweep.clone()
                }
            };
            match figure {
                Figure::Fig3 => {
                    let taus = or(&[-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0]);
                    emit_curve(&fig3_adp(&config, Location::origin(), &taus)?, out)?;
                }
                Figure::Fig4 => {
                    let d = or(&[250.0, 500.0, 1000.0, 2000.0, 3000.0, 4000.0, 6000.0, 8000.0]);
                    emit_curve(&fig4_jdp(&config, &d)?, out)?;
                }
                Figure::Fig5 => {
                    let s: Vec<usize> = or(&[4.0, 6.0, 8.0, 10.0, 15.0, 20.0, 30.0])
                        .iter()
                        .map(|&v| v as usize)
                        .collect();
                    emit_curve(&fig5_rmse(&config, &s, 1000, 100)?, out)?;
                }
                Figure::Fig6 => {
                    let t = or(&[60.0, 120.0, 300.0, 600.0, 1200.0]);
                    emit_rows(&fig6_training_time(&config, &t)?, out)?;
                }
                Figure::Fig7 => {
                    let d = or(&[30.0, 40.0, 50.0, 60.0, 70.0, 80.0]);
                    emit_rows(&fig7_density(&config, &d)?, out)?;
                }
                Figure::Fig8 => {
                    if config.delta_b == 0 {
                        config.candidates = 30;
                        config.delta_b = 1;
                    }
                    let d = or(&[30.0, 40.0, 50.0, 60.0, 70.0, 80.0]);
                    emit_rows(&fig8_placement(&config, &d)?, out)?;
                }
            }
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.common.parallel {
        if n == 0 {
            bail!("--parallel needs at least one thread");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    run(cli)
}
