//! Batch experiments: the g(a) sweep (generate, aggregate, solve, sort,
//! fit, summarize over seeded replicates) and the walker-ensemble
//! concentration study. Everything is a pure function of its config: run
//! seeds derive from `(base_seed, a, replicate)`, output ordering is fixed
//! by `(a, replicate)`, and reruns produce byte-identical CSV files.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graphgen::{aggregate_sites, generate_page_graph, rank_law_candidates};
use crate::mcmc::{burn_in_steps, ensemble_snapshot};
use crate::powerlaw::{loglog_fit, rank_sort, summarize_ensemble, write_rank_plot, PowerLawFit};
use crate::rng::derive_stream;
use crate::solvers::{dense_stationary_oracle, power_iteration};

/// Parameters of a g(a) sweep.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub a_values: Vec<f64>,
    pub graphs_per_a: usize,
    pub n_sites: usize,
    /// Pages per site.
    pub m: usize,
    pub delta: f64,
    pub epsilon: f64,
    pub base_seed: u64,
    /// Rank window of the log-log fit; `None` uses ranks
    /// `[10, n_sites / 10]`.
    pub fit_window: Option<(usize, usize)>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            a_values: vec![1.0],
            graphs_per_a: 15,
            n_sites: 10_000,
            m: 10,
            delta: 0.15,
            epsilon: 1e-7,
            base_seed: 0,
            fit_window: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.a_values.is_empty() {
            return Err(Error::invalid("a_values must not be empty"));
        }
        if self.a_values.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::invalid("a values must be finite and >= 0"));
        }
        if self.graphs_per_a == 0 || self.n_sites == 0 || self.m == 0 {
            return Err(Error::invalid("counts must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("delta must lie in (0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        let (lo, hi) = self.window();
        if lo < 1 || hi > self.n_sites || hi - lo < 2 {
            return Err(Error::invalid(format!(
                "fit window ({lo}, {hi}) invalid for {} sites",
                self.n_sites
            )));
        }
        Ok(())
    }

    /// The fit window in ranks; the default trims the hub head and the
    /// quantized tail.
    pub fn window(&self) -> (usize, usize) {
        self.fit_window.unwrap_or((10, self.n_sites / 10))
    }

    /// Seed of one run, a pure function of `(base_seed, a, replicate)`.
    pub fn run_seed(&self, a: f64, replicate: usize) -> u64 {
        derive_stream(self.base_seed, &[a.to_bits(), replicate as u64])
    }
}

/// The fitted slope of one generated graph, or the error that stopped it.
#[derive(Debug, Clone)]
pub struct SweepRun {
    pub a: f64,
    pub replicate: usize,
    pub seed: u64,
    pub outcome: std::result::Result<PowerLawFit, String>,
}

/// Summary over the replicates of one `a`.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub a: f64,
    pub g_mean: f64,
    pub g_min: f64,
    pub g_max: f64,
    pub runs: Vec<SweepRun>,
}

/// Pipeline of one replicate: generate, aggregate, solve by power
/// iteration, rank-sort, fit.
pub fn single_run(cfg: &ExperimentConfig, a: f64, replicate: usize) -> Result<PowerLawFit> {
    let seed = cfg.run_seed(a, replicate);
    let graph = generate_page_graph(cfg.n_sites * cfg.m, a, seed)?;
    let matrix = aggregate_sites(&graph, cfg.m)?;
    let (ranks, _) = power_iteration(&matrix, cfg.delta, cfg.epsilon, 1_000_000, None)?;
    let sorted = rank_sort(&ranks);
    loglog_fit(&sorted, cfg.window())
}

fn csv_escape(msg: &str) -> String {
    msg.replace([',', '\n'], ";")
}

/// Runs the sweep, writing three artifacts under `out_dir`:
/// `fits.csv` (`a,seed,slope,intercept,r2,lo,hi,error`, one row per run),
/// `summary.csv` (`a,g_mean,g_min,g_max`), and `rank_plot.csv` (log2 data
/// of the first replicate of the first `a`). Rows flush after each `a`, so
/// an interrupted sweep leaves valid prefixes and a rerun with `resume`
/// skips the groups already on disk. Per-run failures land in the error
/// column; they never abort the sweep.
pub fn experiment_sweep(
    cfg: &ExperimentConfig,
    out_dir: impl AsRef<Path>,
    resume: bool,
) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    let fits_path = out_dir.join("fits.csv");
    let summary_path = out_dir.join("summary.csv");

    let done_groups = if resume {
        complete_groups(&fits_path, cfg.graphs_per_a)?
    } else {
        Vec::new()
    };

    let fresh = !resume || !fits_path.exists();
    let mut fits = BufWriter::new(if fresh {
        let mut f = File::create(&fits_path)?;
        writeln!(f, "a,seed,slope,intercept,r2,lo,hi,error")?;
        f
    } else {
        OpenOptions::new().append(true).open(&fits_path)?
    });
    let mut summary = BufWriter::new(if fresh || !summary_path.exists() {
        let mut f = File::create(&summary_path)?;
        writeln!(f, "a,g_mean,g_min,g_max")?;
        f
    } else {
        OpenOptions::new().append(true).open(&summary_path)?
    });

    let mut rows = Vec::new();
    for &a in &cfg.a_values {
        if done_groups.contains(&a.to_bits()) {
            continue;
        }
        // Replicates are independent; results are collected in replicate
        // order regardless of completion order.
        let runs: Vec<SweepRun> = (0..cfg.graphs_per_a)
            .into_par_iter()
            .map(|replicate| SweepRun {
                a,
                replicate,
                seed: cfg.run_seed(a, replicate),
                outcome: single_run(cfg, a, replicate).map_err(|e| e.to_string()),
            })
            .collect();

        for run in &runs {
            match &run.outcome {
                Ok(fit) => writeln!(
                    fits,
                    "{},{},{},{},{},{},{},",
                    run.a,
                    run.seed,
                    fit.slope,
                    fit.intercept,
                    fit.r_squared,
                    fit.rank_window.0,
                    fit.rank_window.1
                )?,
                Err(msg) => writeln!(
                    fits,
                    "{},{},,,,,,{}",
                    run.a,
                    run.seed,
                    csv_escape(msg)
                )?,
            }
        }

        let good: Vec<PowerLawFit> = runs
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok())
            .copied()
            .collect();
        if let Ok(s) = summarize_ensemble(&good) {
            writeln!(summary, "{a},{},{},{}", s.mean, s.min, s.max)?;
            rows.push(SweepRow {
                a,
                g_mean: s.mean,
                g_min: s.min,
                g_max: s.max,
                runs,
            });
        } else {
            writeln!(summary, "{a},,,")?;
            rows.push(SweepRow {
                a,
                g_mean: f64::NAN,
                g_min: f64::NAN,
                g_max: f64::NAN,
                runs,
            });
        }
        fits.flush()?;
        summary.flush()?;
    }

    // Representative rank plot: first replicate of the first a.
    if fresh {
        if let Some(&a) = cfg.a_values.first() {
            let seed = cfg.run_seed(a, 0);
            let graph = generate_page_graph(cfg.n_sites * cfg.m, a, seed)?;
            let matrix = aggregate_sites(&graph, cfg.m)?;
            let (ranks, _) = power_iteration(&matrix, cfg.delta, cfg.epsilon, 1_000_000, None)?;
            let sorted = rank_sort(&ranks);
            let mut plot = BufWriter::new(File::create(out_dir.join("rank_plot.csv"))?);
            write_rank_plot(&sorted, &mut plot)?;
            plot.flush()?;
        }
    }
    Ok(rows)
}

/// Groups in an existing fits.csv that already have all their replicates,
/// keyed by the bit pattern of `a`.
fn complete_groups(path: &PathBuf, graphs_per_a: usize) -> Result<Vec<u64>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut counts: Vec<(u64, usize)> = Vec::new();
    for line in BufReader::new(File::open(path)?).lines().skip(1) {
        let line = line?;
        let Some((a, _)) = line.split_once(',') else {
            continue;
        };
        let Ok(a) = a.parse::<f64>() else { continue };
        let key = a.to_bits();
        match counts.iter_mut().find(|(k, _)| *k == key) {
            Some((_, c)) => *c += 1,
            None => counts.push((key, 1)),
        }
    }
    Ok(counts
        .into_iter()
        .filter(|&(_, c)| c >= graphs_per_a)
        .map(|(k, _)| k)
        .collect())
}

/// The closed-form rank-law exponents printed next to measured slopes in
/// sweep reports: `(derived, printed)` candidates for a given `a`.
pub fn sweep_candidates(a: f64) -> (f64, f64) {
    rank_law_candidates(a)
}

/// One trial of the ensemble concentration study.
#[derive(Debug, Clone)]
pub struct StudyTrial {
    pub trial: u64,
    pub seed: u64,
    pub l2_deviation: f64,
    pub within: bool,
}

/// Outcome of the walker-ensemble concentration study.
#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub bound: f64,
    pub burn_in: u64,
    pub hits: usize,
    pub trials: Vec<StudyTrial>,
}

impl StudyOutcome {
    pub fn hit_rate(&self) -> f64 {
        self.hits as f64 / self.trials.len() as f64
    }
}

/// Releases `n_walkers` walkers for each of `trials` seeded trials on a
/// generated graph and checks the l2 deviation of the snapshot frequencies
/// from the dense-oracle stationary vector against
/// `4 sqrt(ln(1/sigma) / N)`. Writes `trial,seed,l2_deviation,bound,within`
/// to `mcmc_study.csv` when an output directory is given.
#[allow(clippy::too_many_arguments)]
pub fn mcmc_study(
    n_sites: usize,
    m: usize,
    a: f64,
    delta: f64,
    n_walkers: u64,
    trials: u64,
    sigma: f64,
    base_seed: u64,
    out_dir: Option<&Path>,
) -> Result<StudyOutcome> {
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::invalid("sigma must lie in (0, 1)"));
    }
    let graph = generate_page_graph(n_sites * m, a, derive_stream(base_seed, &[0x9aa9]))?;
    let matrix = aggregate_sites(&graph, m)?;
    let oracle = dense_stationary_oracle(&matrix, delta)?;
    let burn_in = burn_in_steps(delta, n_sites, 1e-2, 1.0)?.max(1);
    let bound = 4.0 * ((1.0 / sigma).ln() / n_walkers as f64).sqrt();

    let results: Result<Vec<StudyTrial>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let seed = derive_stream(base_seed, &[trial]);
            let snap = ensemble_snapshot(&matrix, delta, n_walkers, burn_in, seed)?;
            let l2 = snap.frequencies().l2_distance(&oracle);
            Ok(StudyTrial {
                trial,
                seed,
                l2_deviation: l2,
                within: l2 <= bound,
            })
        })
        .collect();
    let trials_vec = results?;
    let hits = trials_vec.iter().filter(|t| t.within).count();

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let mut w = BufWriter::new(File::create(dir.join("mcmc_study.csv"))?);
        writeln!(w, "trial,seed,l2_deviation,bound,within")?;
        for t in &trials_vec {
            writeln!(
                w,
                "{},{},{:.10e},{:.10e},{}",
                t.trial, t.seed, t.l2_deviation, bound, t.within
            )?;
        }
        w.flush()?;
    }
    Ok(StudyOutcome {
        bound,
        burn_in,
        hits,
        trials: trials_vec,
    })
}
