//! Deterministic PageRank solvers.
//!
//! Three routes to the stationary vector:
//! - [`power_iteration`]: repeated teleported application. The teleported
//!   chain contracts l1 distances by at least `1 - delta` per step, so the
//!   run stops once the successive-difference norm falls below
//!   `epsilon * delta`, which guarantees `||p - v||_1 <= epsilon`.
//! - [`polyak_tremba`]: running average of raw-chain iterates. Needs no
//!   spectral gap and no aperiodicity; the residual decays like 1/T.
//! - [`dense_stationary_oracle`]: direct linear solve for small instances,
//!   used as the independent cross-check for the iterative routes.

use std::io::Write;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::sparse::{RankMeta, RankVector, StochasticMatrix};

/// What a solver did: iteration count, the error bound it achieved, and the
/// successive-difference history (one entry per iteration) for convergence
/// diagnostics.
#[derive(Debug, Clone)]
pub struct SolverReport {
    pub solver: &'static str,
    pub n_sites: usize,
    /// Teleport probability used, which lower-bounds the spectral gap.
    /// Zero for raw-chain methods.
    pub delta: f64,
    pub target_epsilon: f64,
    pub iterations: usize,
    pub final_residual: f64,
    pub wall_time: Duration,
    pub deltas: Vec<f64>,
}

impl SolverReport {
    /// One CSV row: `solver,n,delta,epsilon,iterations,residual,seconds`.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6e},{:.6}",
            self.solver,
            self.n_sites,
            self.delta,
            self.target_epsilon,
            self.iterations,
            self.final_residual,
            self.wall_time.as_secs_f64()
        )
    }

    pub const CSV_HEADER: &'static str = "solver,n,delta,epsilon,iterations,residual,seconds";

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        writeln!(w, "{}", self.csv_row())?;
        Ok(())
    }
}

/// Power iteration on the teleported chain.
///
/// Returns a vector within `epsilon` of the stationary solution in l1, or
/// an explicit non-convergence error if `max_iter` is exhausted first.
/// `p0 = None` starts from uniform.
pub fn power_iteration(
    m: &StochasticMatrix,
    delta: f64,
    epsilon: f64,
    max_iter: usize,
    p0: Option<&RankVector>,
) -> Result<(RankVector, SolverReport)> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!(
            "power iteration needs delta in (0, 1), got {delta}"
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let start = Instant::now();
    let mut p = match p0 {
        Some(v) => {
            if v.len() != m.n_sites() {
                return Err(Error::dims("p0 length does not match the matrix".into()));
            }
            v.clone()
        }
        None => RankVector::uniform(m.n_sites()),
    };
    let stop = epsilon * delta;
    let mut deltas = Vec::new();
    for iteration in 1..=max_iter {
        let next = m.teleported_apply(&p, delta)?;
        let diff = next.l1_distance(&p);
        deltas.push(diff);
        p = next;
        if diff <= stop {
            let bound = diff / delta; // ||p - v||_1 <= diff / delta
            let mut out = p;
            out.meta = RankMeta {
                solver: "mpi".into(),
                iterations: iteration,
                residual: bound,
                seed: None,
            };
            let report = SolverReport {
                solver: "mpi",
                n_sites: m.n_sites(),
                delta,
                target_epsilon: epsilon,
                iterations: iteration,
                final_residual: bound,
                wall_time: start.elapsed(),
                deltas,
            };
            return Ok((out, report));
        }
    }
    let last = deltas.last().copied().unwrap_or(f64::INFINITY);
    Err(Error::NoConvergence {
        solver: "mpi",
        iterations: max_iter,
        residual: last / delta,
        target: epsilon,
    })
}

/// Iterate averaging on the raw chain (no teleportation): returns
/// `(1/T) * sum of p(1)..p(T)` together with its stationarity residual.
/// The residual telescopes to `||p(T+1) - p(1)||_1 / T <= 2/T`.
pub fn polyak_tremba(
    m: &StochasticMatrix,
    p0: Option<&RankVector>,
    t: usize,
) -> Result<(RankVector, SolverReport)> {
    if t == 0 {
        return Err(Error::invalid("averaging horizon T must be at least 1"));
    }
    let start = Instant::now();
    let mut p = match p0 {
        Some(v) => {
            if v.len() != m.n_sites() {
                return Err(Error::dims("p0 length does not match the matrix".into()));
            }
            v.clone()
        }
        None => RankVector::uniform(m.n_sites()),
    };
    let mut sum = vec![0.0f64; m.n_sites()];
    for _ in 0..t {
        p = m.transpose_apply(&p)?;
        for (s, v) in sum.iter_mut().zip(p.values()) {
            *s += v;
        }
    }
    let inv_t = 1.0 / t as f64;
    let averaged = RankVector::from_values_unchecked(
        sum.iter().map(|s| s * inv_t).collect(),
        RankMeta {
            solver: "polyak-tremba".into(),
            iterations: t,
            residual: 0.0,
            seed: None,
        },
    );
    let residual = m.residual_l1(0.0, &averaged)?;
    let mut out = averaged;
    out.meta.residual = residual;
    let report = SolverReport {
        solver: "polyak-tremba",
        n_sites: m.n_sites(),
        delta: 0.0,
        target_epsilon: 2.0 / t as f64,
        iterations: t,
        final_residual: residual,
        wall_time: start.elapsed(),
        deltas: Vec::new(),
    };
    Ok((out, report))
}

/// Hard cap for the direct solver; Gaussian elimination is cubic.
pub const DENSE_ORACLE_MAX_SITES: usize = 2000;

/// Direct solution of the stationary equation on the (optionally
/// teleported) chain, by Gaussian elimination on the transposed system with
/// a normalization row. `delta = 0` requires a unique stationary
/// distribution; `delta = 1` is accepted and returns uniform.
pub fn dense_stationary_oracle(m: &StochasticMatrix, delta: f64) -> Result<RankVector> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::invalid(format!("delta must lie in [0, 1], got {delta}")));
    }
    let n = m.n_sites();
    if n > DENSE_ORACLE_MAX_SITES {
        return Err(Error::invalid(format!(
            "dense oracle is limited to {DENSE_ORACLE_MAX_SITES} sites, got {n}"
        )));
    }
    if delta == 1.0 {
        return Ok(RankVector::uniform(n));
    }
    let jump = delta / n as f64;
    let mut rows = vec![vec![jump; n]; n];
    let inv_m = 1.0 / m.denominator() as f64;
    for (r, c, num) in m.entries() {
        rows[r][c] += (1.0 - delta) * num as f64 * inv_m;
    }
    let mut values = stationary_of_dense(&rows)?;
    // Tiny negative components are elimination round-off on exact zeros.
    for v in &mut values {
        if *v < 0.0 {
            if *v < -1e-9 {
                return Err(Error::NonUniqueStationary);
            }
            *v = 0.0;
        }
    }
    let total: f64 = values.iter().sum();
    for v in &mut values {
        *v /= total;
    }
    Ok(RankVector::from_values_unchecked(
        values,
        RankMeta {
            solver: "dense".into(),
            iterations: 0,
            residual: 0.0,
            seed: None,
        },
    ))
}

/// Solves `v^T A = v^T`, `sum(v) = 1` for a dense row-stochastic `A`.
///
/// The rows of `A^T - I` sum to zero, so any one of them is redundant;
/// replacing the last row with the normalization `1^T v = 1` yields a
/// nonsingular system exactly when the stationary distribution is unique.
pub fn stationary_of_dense(a: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = a.len();
    if n == 0 {
        return Err(Error::invalid("empty matrix"));
    }
    // b = A^T - I with the last row replaced by ones; rhs = e_{n-1}.
    let mut b = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..n {
            b[j][i] = a[i][j];
        }
    }
    for (i, row) in b.iter_mut().enumerate() {
        row[i] -= 1.0;
    }
    b[n - 1] = vec![1.0; n];
    let mut rhs = vec![0.0f64; n];
    rhs[n - 1] = 1.0;

    // Gaussian elimination with partial pivoting.
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| b[r1][col].abs().total_cmp(&b[r2][col].abs()))
            .unwrap();
        if b[pivot_row][col].abs() < 1e-12 {
            return Err(Error::NonUniqueStationary);
        }
        b.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        let pivot = b[col][col];
        for row in (col + 1)..n {
            let factor = b[row][col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                b[row][k] -= factor * b[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0f64; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in (row + 1)..n {
            acc -= b[row][k] * x[k];
        }
        x[row] = acc / b[row][row];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphgen::{aggregate_sites, generate_page_graph};

    fn two_cycle() -> StochasticMatrix {
        StochasticMatrix::from_entries(2, 1, vec![(0, 1, 1), (1, 0, 1)]).unwrap()
    }

    /// P = [[0,1],[0,1]]: all link mass flows into state 1.
    fn funnel() -> StochasticMatrix {
        StochasticMatrix::from_entries(2, 1, vec![(0, 1, 1), (1, 1, 1)]).unwrap()
    }

    #[test]
    fn power_iteration_on_symmetric_cycle() {
        let m = two_cycle();
        let (v, report) = power_iteration(&m, 0.15, 1e-10, 10_000, None).unwrap();
        assert!((v.values()[0] - 0.5).abs() < 1e-10);
        assert!((v.values()[1] - 0.5).abs() < 1e-10);
        assert!(report.final_residual <= report.target_epsilon);
    }

    #[test]
    fn power_iteration_stops_immediately_on_stationary_start() {
        let m = two_cycle();
        let stationary = RankVector::uniform(2);
        let (_, report) = power_iteration(&m, 0.15, 1e-8, 100, Some(&stationary)).unwrap();
        assert!(report.iterations <= 1);
        assert!(report.final_residual <= 1e-8);
    }

    #[test]
    fn power_iteration_funnel_hand_value() {
        // Stationary of the teleported funnel: v = (delta/2, 1 - delta/2).
        let m = funnel();
        let (v, _) = power_iteration(&m, 0.15, 1e-12, 10_000, None).unwrap();
        assert!((v.values()[0] - 0.075).abs() < 1e-11);
        assert!((v.values()[1] - 0.925).abs() < 1e-11);
    }

    #[test]
    fn power_iteration_reports_nonconvergence() {
        let m = two_cycle();
        let p0 = RankVector::from_values(vec![1.0, 0.0]).unwrap();
        let err = power_iteration(&m, 0.15, 1e-12, 3, Some(&p0)).unwrap_err();
        match err {
            Error::NoConvergence { solver, iterations, .. } => {
                assert_eq!(solver, "mpi");
                assert_eq!(iterations, 3);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn polyak_tremba_hand_values() {
        let m = two_cycle();
        let p0 = RankVector::from_values(vec![1.0, 0.0]).unwrap();
        // T = 1: average is p(1) = (0, 1); residual 2 = 2/T.
        let (avg, report) = polyak_tremba(&m, Some(&p0), 1).unwrap();
        assert_eq!(avg.values(), &[0.0, 1.0]);
        assert!((report.final_residual - 2.0).abs() < 1e-12);
        // T = 2: iterates (0,1), (1,0) average to (1/2, 1/2); residual 0.
        let (avg, report) = polyak_tremba(&m, Some(&p0), 2).unwrap();
        assert_eq!(avg.values(), &[0.5, 0.5]);
        assert!(report.final_residual < 1e-12);
    }

    #[test]
    fn polyak_tremba_stationary_start_stays_put() {
        let m = two_cycle();
        let stationary = RankVector::uniform(2);
        for t in [1usize, 7, 100] {
            let (avg, report) = polyak_tremba(&m, Some(&stationary), t).unwrap();
            assert!(avg.l1_distance(&stationary) < 1e-12);
            assert!(report.final_residual < 1e-12);
        }
    }

    #[test]
    fn polyak_tremba_rejects_zero_horizon() {
        assert!(polyak_tremba(&two_cycle(), None, 0).is_err());
    }

    #[test]
    fn dense_oracle_on_periodic_cycle() {
        // Unique stationary distribution despite periodicity.
        let v = dense_stationary_oracle(&two_cycle(), 0.0).unwrap();
        assert!((v.values()[0] - 0.5).abs() < 1e-12);
        assert!((v.values()[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dense_oracle_full_teleport_is_uniform() {
        let v = dense_stationary_oracle(&two_cycle(), 1.0).unwrap();
        assert_eq!(v.values(), &[0.5, 0.5]);
    }

    #[test]
    fn dense_oracle_detects_non_uniqueness() {
        // Two disjoint self-loops: every mixture of the two point masses is
        // stationary.
        let m = StochasticMatrix::from_entries(2, 1, vec![(0, 0, 1), (1, 1, 1)]).unwrap();
        match dense_stationary_oracle(&m, 0.0) {
            Err(Error::NonUniqueStationary) => {}
            other => panic!("expected NonUniqueStationary, got {other:?}"),
        }
    }

    #[test]
    fn oracle_and_power_iteration_agree_both_ways() {
        // Cross-check in both directions on a BO site graph.
        let g = generate_page_graph(500, 1.0, 33).unwrap();
        let m = aggregate_sites(&g, 10).unwrap();
        let oracle = dense_stationary_oracle(&m, 0.15).unwrap();
        let (mpi, _) = power_iteration(&m, 0.15, 1e-10, 100_000, None).unwrap();
        assert!(oracle.l1_distance(&mpi) <= 1e-9);
        // The oracle's answer is a fixed point of the teleported step.
        let stepped = m.teleported_apply(&oracle, 0.15).unwrap();
        assert!(oracle.l1_distance(&stepped) <= 1e-12);
    }

    #[test]
    fn geometric_contraction_of_successive_differences() {
        let g = generate_page_graph(600, 0.277, 71).unwrap();
        let m = aggregate_sites(&g, 5).unwrap();
        let (_, report) = power_iteration(&m, 0.15, 1e-10, 100_000, None).unwrap();
        for pair in report.deltas.windows(2) {
            assert!(
                pair[1] / pair[0] <= (1.0 - 0.15) + 1e-9,
                "contraction violated: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn csv_row_shape() {
        let m = two_cycle();
        let (_, report) = power_iteration(&m, 0.15, 1e-8, 1000, None).unwrap();
        let row = report.csv_row();
        assert_eq!(row.split(',').count(), 7);
        assert!(row.starts_with("mpi,2,0.15,"));
    }
}
