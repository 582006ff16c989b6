//! Thin command-line front end over the `ranklab` library.
//!
//! The output directory for file-producing subcommands defaults to the
//! `RANKLAB_OUT_DIR` environment variable, then to the current directory.
//! The process exits 0 only when the invoked path met its contracts
//! (solvers converged, studies hit their rates, fits succeeded).

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use ranklab::experiment::{experiment_sweep, mcmc_study, sweep_candidates, ExperimentConfig};
use ranklab::graphgen::{aggregate_sites, generate_page_graph, PageGraph};
use ranklab::learn::{
    adaptive_gd, objective_value, scenario_select, write_instance, write_trace_csv,
    LearningObjective, ModelParams, Scenario, SynthConfig, TrainOptions,
};
use ranklab::mcmc::{burn_in_steps, ensemble_snapshot, required_sample_size, run_walker};
use ranklab::powerlaw::{loglog_fit, rank_sort, write_rank_plot};
use ranklab::solvers::{dense_stationary_oracle, polyak_tremba, power_iteration, SolverReport};
use ranklab::sparse::{RankVector, StochasticMatrix};

#[derive(Parser)]
#[command(name = "ranklab", version, about = "Web-graph PageRank laboratory")]
struct Cli {
    /// Directory for output files (overrides RANKLAB_OUT_DIR).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Solver {
    Mpi,
    PolyakTremba,
    Mcmc,
    Ensemble,
    Dense,
}

#[derive(Subcommand)]
enum Command {
    /// Grow a Buckley-Osthus page graph and write it as BOPG text.
    Generate {
        /// Number of pages.
        #[arg(short = 'n', long)]
        pages: usize,
        /// Attachment parameter a.
        #[arg(short, long, default_value_t = 1.0)]
        attachment: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file (default `pages.bopg` in the output directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Group a page graph into sites of m pages and write BOSG text.
    Aggregate {
        /// BOPG input file.
        #[arg(long)]
        input: PathBuf,
        /// Pages per site.
        #[arg(short, long, default_value_t = 10)]
        m: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the PageRank vector of a BOSG site graph.
    Pagerank {
        /// BOSG input file.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Solver::Mpi)]
        solver: Solver,
        #[arg(long, default_value_t = 0.15)]
        delta: f64,
        /// Target l1 accuracy (mpi) or averaging horizon driver.
        #[arg(long, default_value_t = 1e-7)]
        eps: f64,
        /// Steps for polyak-tremba / mcmc walks; walker burn-in for
        /// ensemble (0 means the burn-in formula with C = 1).
        #[arg(long, default_value_t = 0)]
        steps: u64,
        /// Walker count for the ensemble solver.
        #[arg(long, default_value_t = 10_000)]
        walkers: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Rank CSV output (default `ranks.csv`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a power law to a rank CSV over a rank window.
    Fit {
        /// Rank CSV produced by `pagerank`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 10)]
        lo: usize,
        /// 0 means n/10.
        #[arg(long, default_value_t = 0)]
        hi: usize,
        /// Also write `rank_plot.csv` log2 data.
        #[arg(long, default_value_t = false)]
        plot: bool,
    },
    /// The g(a) sweep: ensembles of graphs per attachment value.
    Sweep {
        /// Comma-separated attachment values.
        #[arg(long, value_delimiter = ',', default_value = "0.277,1,5")]
        a_values: Vec<f64>,
        #[arg(long, default_value_t = 15)]
        graphs_per_a: usize,
        #[arg(long, default_value_t = 10_000)]
        n_sites: usize,
        #[arg(short, long, default_value_t = 10)]
        m: usize,
        #[arg(long, default_value_t = 0.15)]
        delta: f64,
        #[arg(long, default_value_t = 1e-7)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        lo: usize,
        /// 0 means n_sites/10.
        #[arg(long, default_value_t = 0)]
        hi: usize,
        /// Skip a-groups already complete in fits.csv.
        #[arg(long, default_value_t = false)]
        resume: bool,
    },
    /// Walker-ensemble concentration study against the dense oracle.
    McmcStudy {
        #[arg(long, default_value_t = 50)]
        n_sites: usize,
        #[arg(short, long, default_value_t = 10)]
        m: usize,
        #[arg(short, long, default_value_t = 1.0)]
        attachment: f64,
        #[arg(long, default_value_t = 0.15)]
        delta: f64,
        #[arg(long, default_value_t = 10_000)]
        walkers: u64,
        #[arg(long, default_value_t = 200)]
        trials: u64,
        #[arg(long, default_value_t = 0.05)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Supervised-ranking demo on synthetic instances: train, trace,
    /// scenario selection.
    Learn {
        #[arg(long, default_value_t = 30)]
        nodes: usize,
        #[arg(long, default_value_t = 5)]
        features: usize,
        #[arg(long, default_value_t = 3)]
        queries: usize,
        /// Iteration budget T of the truncated solver.
        #[arg(long, default_value_t = 50)]
        iterations: usize,
        #[arg(long, default_value_t = 0.15)]
        delta: f64,
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Poll size for estimating a Bernoulli proportion to +-eps at
    /// confidence 1 - sigma.
    SampleSize {
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long, default_value_t = 0.01)]
        sigma: f64,
    },
}

fn out_dir(cli_dir: &Option<PathBuf>) -> PathBuf {
    cli_dir
        .clone()
        .or_else(|| std::env::var_os("RANKLAB_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn read_matrix(path: &PathBuf) -> Result<StochasticMatrix> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(StochasticMatrix::read_text(BufReader::new(file))?)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let dir = out_dir(&cli.out_dir);
    std::fs::create_dir_all(&dir)?;

    match cli.command {
        Command::Generate {
            pages,
            attachment,
            seed,
            out,
        } => {
            let graph = generate_page_graph(pages, attachment, seed)?;
            let path = out.unwrap_or_else(|| dir.join("pages.bopg"));
            let mut w = BufWriter::new(File::create(&path)?);
            graph.write_text(&mut w)?;
            w.flush()?;
            println!(
                "generated {} pages (a = {attachment}, seed = {seed}) -> {}",
                pages,
                path.display()
            );
        }
        Command::Aggregate { input, m, out } => {
            let file = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let graph = PageGraph::read_text(BufReader::new(file))?;
            let matrix = aggregate_sites(&graph, m)?;
            let path = out.unwrap_or_else(|| dir.join("sites.bosg"));
            let mut w = BufWriter::new(File::create(&path)?);
            matrix.write_text(&mut w)?;
            w.flush()?;
            println!(
                "aggregated {} pages into {} sites (m = {m}) -> {}",
                graph.n_pages(),
                matrix.n_sites(),
                path.display()
            );
        }
        Command::Pagerank {
            input,
            solver,
            delta,
            eps,
            steps,
            walkers,
            seed,
            out,
        } => {
            let matrix = read_matrix(&input)?;
            let n = matrix.n_sites();
            let started = std::time::Instant::now();
            let (ranks, report): (RankVector, Option<SolverReport>) = match solver {
                Solver::Mpi => {
                    let (v, r) = power_iteration(&matrix, delta, eps, 1_000_000, None)?;
                    (v, Some(r))
                }
                Solver::PolyakTremba => {
                    let t = if steps > 0 { steps as usize } else { (2.0 / eps).ceil() as usize };
                    let (v, r) = polyak_tremba(&matrix, None, t)?;
                    (v, Some(r))
                }
                Solver::Mcmc => {
                    let t = if steps > 0 { steps } else { 1_000_000 };
                    (run_walker(&matrix, delta, t, seed)?, None)
                }
                Solver::Ensemble => {
                    let t0 = if steps > 0 {
                        steps
                    } else {
                        burn_in_steps(delta, n, 1e-2, 1.0)?.max(1)
                    };
                    let snap = ensemble_snapshot(&matrix, delta, walkers, t0, seed)?;
                    let path = dir.join("ensemble.csv");
                    let mut w = BufWriter::new(File::create(&path)?);
                    snap.write_csv(&mut w)?;
                    w.flush()?;
                    (snap.frequencies(), None)
                }
                Solver::Dense => (dense_stationary_oracle(&matrix, delta)?, None),
            };
            let path = out.unwrap_or_else(|| dir.join("ranks.csv"));
            let mut w = BufWriter::new(File::create(&path)?);
            ranks.write_csv(&mut w)?;
            w.flush()?;
            match report {
                Some(r) => println!("{}\n{}", SolverReport::CSV_HEADER, r.csv_row()),
                None => println!(
                    "{}\n{},{n},{delta},{eps},0,nan,{:.6}",
                    SolverReport::CSV_HEADER,
                    match solver {
                        Solver::Mcmc => "mcmc",
                        Solver::Ensemble => "ensemble",
                        _ => "dense",
                    },
                    started.elapsed().as_secs_f64()
                ),
            }
            println!("ranks -> {}", path.display());
        }
        Command::Fit { input, lo, hi, plot } => {
            let file = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let ranks = RankVector::read_csv(BufReader::new(file))?;
            let sorted = rank_sort(&ranks);
            let hi = if hi == 0 { (sorted.len() / 10).max(lo + 2) } else { hi };
            let fit = loglog_fit(&sorted, (lo, hi))?;
            println!("a,seed,slope,intercept,r2,lo,hi");
            println!(
                ",,{},{},{},{},{}",
                fit.slope, fit.intercept, fit.r_squared, lo, hi
            );
            if plot {
                let path = dir.join("rank_plot.csv");
                let mut w = BufWriter::new(File::create(&path)?);
                write_rank_plot(&sorted, &mut w)?;
                w.flush()?;
                println!("rank plot -> {}", path.display());
            }
        }
        Command::Sweep {
            a_values,
            graphs_per_a,
            n_sites,
            m,
            delta,
            eps,
            seed,
            lo,
            hi,
            resume,
        } => {
            let cfg = ExperimentConfig {
                a_values,
                graphs_per_a,
                n_sites,
                m,
                delta,
                epsilon: eps,
                base_seed: seed,
                fit_window: Some((lo, if hi == 0 { n_sites / 10 } else { hi })),
            };
            let rows = experiment_sweep(&cfg, &dir, resume)?;
            println!("a,g_mean,g_min,g_max,g_candidate_derived,g_candidate_printed");
            for row in &rows {
                let (derived, printed) = sweep_candidates(row.a);
                println!(
                    "{},{},{},{},{},{}",
                    row.a, row.g_mean, row.g_min, row.g_max, derived, printed
                );
                let failures: Vec<&str> = row
                    .runs
                    .iter()
                    .filter_map(|r| r.outcome.as_ref().err().map(String::as_str))
                    .collect();
                if !failures.is_empty() {
                    bail!("sweep had {} failed runs at a = {}", failures.len(), row.a);
                }
            }
            println!("sweep artifacts -> {}", dir.display());
        }
        Command::McmcStudy {
            n_sites,
            m,
            attachment,
            delta,
            walkers,
            trials,
            sigma,
            seed,
        } => {
            let outcome = mcmc_study(
                n_sites,
                m,
                attachment,
                delta,
                walkers,
                trials,
                sigma,
                seed,
                Some(&dir),
            )?;
            println!(
                "bound {:.6e}, burn-in {}, hits {}/{} ({:.1}%)",
                outcome.bound,
                outcome.burn_in,
                outcome.hits,
                trials,
                100.0 * outcome.hit_rate()
            );
            println!("study csv -> {}", dir.join("mcmc_study.csv").display());
            if outcome.hit_rate() < 1.0 - sigma {
                bail!(
                    "concentration rate {:.3} fell below {:.3}",
                    outcome.hit_rate(),
                    1.0 - sigma
                );
            }
        }
        Command::Learn {
            nodes,
            features,
            queries,
            iterations,
            delta,
            eps,
            seed,
        } => {
            let make = |tag: u64| {
                let cfg = SynthConfig {
                    n_nodes: nodes,
                    feature_dim: features,
                    out_degree: 3.min(nodes),
                    teleport: delta,
                    iterations,
                    seed: ranklab::rng::derive_stream(seed, &[tag]),
                };
                ranklab::learn::synthetic_instance(&cfg, (nodes / 2).max(1)).0
            };
            let train: Vec<_> = (0..queries as u64).map(make).collect();
            let test: Vec<_> = (100..100 + queries as u64).map(make).collect();

            // Write the first training instance in SPRL form.
            let instance_path = dir.join("instance.sprl");
            let mut w = BufWriter::new(File::create(&instance_path)?);
            write_instance(&train[0], &mut w)?;
            w.flush()?;

            let mut objective = LearningObjective::new(&train)?;
            let x0 = vec![0.0; 2 * features];
            let (x, report) = adaptive_gd(&mut objective, &x0, eps, 0.0, 200_000)?;
            let params = ModelParams::from_vec(x)?;
            let trace_path = dir.join("trace.csv");
            let mut w = BufWriter::new(File::create(&trace_path)?);
            write_trace_csv(&report.trace, &mut w)?;
            w.flush()?;
            println!(
                "trained {} queries: F = {:.6e}, ||grad|| = {:.3e}, {} iterations, {:.2} f-evals/iter",
                queries,
                objective_value(&train, &params)?,
                report.final_gradient_norm,
                report.iterations,
                report.function_evals as f64 / report.iterations.max(1) as f64
            );

            let scenarios = vec![
                Scenario {
                    name: "trained-features".into(),
                    train: train.clone(),
                    test: test.clone(),
                },
                Scenario {
                    name: "alternative-seeded".into(),
                    train: (200..200 + queries as u64).map(make).collect(),
                    test,
                },
            ];
            let opts = TrainOptions {
                epsilon: eps,
                inexactness: 0.0,
                max_iterations: 200_000,
            };
            let (best, outcomes) = scenario_select(&scenarios, &opts)?;
            for (i, o) in outcomes.iter().enumerate() {
                println!(
                    "scenario {i} `{}`: train F = {:.6e}, test F = {:.6e}",
                    o.name, o.train_objective, o.test_objective
                );
            }
            println!("selected scenario {best} (`{}`)", outcomes[best].name);
            println!("instance -> {}, trace -> {}", instance_path.display(), trace_path.display());
        }
        Command::SampleSize { eps, sigma } => {
            let n = required_sample_size(eps, sigma)?;
            println!("{n}");
        }
    }
    Ok(())
}
