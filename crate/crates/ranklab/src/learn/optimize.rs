//! First-order optimizers with adaptive step constants.
//!
//! [`adaptive_gd`] halves its current constant `L` at the start of every
//! iteration, takes the step `x - (1/L) grad`, and doubles `L` until
//! the quadratic-upper-bound test accepts, so each accepted step decreases
//! the objective by at least `||grad||^2 / (2L)` (plus `2 delta_tilde` of
//! slack when the oracle is inexact). [`coordinate_descent`] updates one
//! uniformly random coordinate per iteration with its own constant `L_i`
//! and only checks the full gradient every `d` iterations.

use std::io::Write;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// A smooth objective exposed through value and gradient queries. The
/// optimizers count their calls, so implementations stay free of
/// bookkeeping (mutability is for caches and instrumentation).
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&mut self, x: &[f64]) -> f64;
    fn gradient(&mut self, x: &[f64]) -> Vec<f64>;
}

/// An objective that can additionally serve single partial derivatives and
/// maintain cheap incremental state as coordinates move.
pub trait CoordinateObjective: Objective {
    fn partial(&mut self, x: &[f64], i: usize) -> f64;

    /// Notification that the optimizer changed coordinate `i` away from
    /// `old`; implementations update caches here.
    fn coordinate_moved(&mut self, _x: &[f64], _i: usize, _old: f64) {}
}

/// One row of the optimizer trace CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub gradient_norm: f64,
    pub step_l: f64,
    pub evals: usize,
}

/// Writes `iter,F,grad_norm,L_k,evals` rows.
pub fn write_trace_csv(rows: &[TraceRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "iter,F,grad_norm,L_k,evals")?;
    for r in rows {
        writeln!(
            w,
            "{},{:.10e},{:.10e},{},{}",
            r.iteration, r.objective, r.gradient_norm, r.step_l, r.evals
        )?;
    }
    Ok(())
}

/// What an optimizer run did.
#[derive(Debug, Clone)]
pub struct OptimizerReport {
    pub iterations: usize,
    pub function_evals: usize,
    pub gradient_evals: usize,
    /// Partial-derivative queries (coordinate descent only).
    pub partial_evals: usize,
    pub final_gradient_norm: f64,
    /// Accepted step constant per iteration.
    pub l_history: Vec<f64>,
    pub trace: Vec<TraceRow>,
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Adaptive gradient descent.
///
/// With `inexactness = 0` the stopping rule is `||grad F(x)|| <= epsilon`;
/// with a positive `inexactness` (a `delta_tilde`-oracle) the acceptance
/// test gains `2 delta_tilde` of slack and the run stops at
/// `||grad|| <= epsilon / 2`. Hitting `max_iterations` is an explicit
/// error, never a silent return.
pub fn adaptive_gd(
    objective: &mut dyn Objective,
    x0: &[f64],
    epsilon: f64,
    inexactness: f64,
    max_iterations: usize,
) -> Result<(Vec<f64>, OptimizerReport)> {
    if x0.len() != objective.dim() {
        return Err(Error::dims(format!(
            "x0 has {} coordinates, objective expects {}",
            x0.len(),
            objective.dim()
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(inexactness >= 0.0) {
        return Err(Error::invalid("oracle inexactness must be nonnegative".into()));
    }
    let stop = if inexactness > 0.0 { epsilon / 2.0 } else { epsilon };

    let mut x = x0.to_vec();
    let mut f_x = objective.value(&x);
    let mut function_evals = 1usize;
    let mut gradient_evals = 0usize;
    if !f_x.is_finite() {
        return Err(Error::invalid(format!("objective is not finite at x0: {f_x}")));
    }

    let mut l = 1.0f64;
    let mut l_history = Vec::new();
    let mut trace = Vec::new();

    for iteration in 1..=max_iterations {
        let grad = objective.gradient(&x);
        gradient_evals += 1;
        let gnorm = l2_norm(&grad);
        if gnorm <= stop {
            return Ok((
                x,
                OptimizerReport {
                    iterations: iteration - 1,
                    function_evals,
                    gradient_evals,
                    partial_evals: 0,
                    final_gradient_norm: gnorm,
                    l_history,
                    trace,
                },
            ));
        }

        l /= 2.0;
        let mut evals_this_iteration = 0usize;
        let (trial, f_trial) = loop {
            if !l.is_finite() {
                return Err(Error::invalid(
                    "step search diverged: L is no longer finite".into(),
                ));
            }
            let step: Vec<f64> = grad.iter().map(|g| -g / l).collect();
            let trial: Vec<f64> = x.iter().zip(&step).map(|(xi, s)| xi + s).collect();
            let f_trial = objective.value(&trial);
            function_evals += 1;
            evals_this_iteration += 1;
            let linear: f64 = grad.iter().zip(&step).map(|(g, s)| g * s).sum();
            let quad: f64 = 0.5 * l * step.iter().map(|s| s * s).sum::<f64>();
            let acceptable = f_trial.is_finite()
                && f_trial <= f_x + linear + quad + 2.0 * inexactness;
            if acceptable {
                break (trial, f_trial);
            }
            l *= 2.0;
        };

        x = trial;
        f_x = f_trial;
        l_history.push(l);
        trace.push(TraceRow {
            iteration,
            objective: f_x,
            gradient_norm: gnorm,
            step_l: l,
            evals: evals_this_iteration,
        });
    }

    let grad = objective.gradient(&x);
    Err(Error::NoConvergence {
        solver: "adaptive-gd",
        iterations: max_iterations,
        residual: l2_norm(&grad),
        target: stop,
    })
}

/// Estimate of `delta_tilde` for an inexact oracle: `epsilon^2 / (32 L)`
/// with the current adaptive estimate standing in for `L`.
pub fn default_inexactness(epsilon: f64, l_estimate: f64) -> f64 {
    epsilon * epsilon / (32.0 * l_estimate)
}

/// Probes each coordinate with a finite difference of the partial
/// derivative at `x0`. A heuristic: fine for the smooth objectives here,
/// floored to avoid degenerate steps.
fn estimate_coordinate_lipschitz(
    objective: &mut dyn CoordinateObjective,
    x0: &[f64],
) -> Vec<f64> {
    let mut probe = x0.to_vec();
    let mut out = Vec::with_capacity(x0.len());
    for i in 0..x0.len() {
        let h = 1e-4 * (1.0 + x0[i].abs());
        let old = probe[i];
        let base = objective.partial(&probe, i);
        probe[i] = old + h;
        objective.coordinate_moved(&probe, i, old);
        let shifted = objective.partial(&probe, i);
        probe[i] = old;
        objective.coordinate_moved(&probe, i, old + h);
        out.push(((shifted - base).abs() / h).max(1e-8));
    }
    out
}

/// Randomized coordinate descent: uniformly random coordinate, step
/// `x_i - (1/L_i) dF/dx_i`. The full gradient norm is only checked every
/// `d` iterations (checking it every step would defeat the point of
/// touching one coordinate at a time). The coordinate sequence is
/// reproducible from `seed`.
pub fn coordinate_descent(
    objective: &mut dyn CoordinateObjective,
    x0: &[f64],
    epsilon: f64,
    coordinate_lipschitz: Option<&[f64]>,
    seed: u64,
    max_iterations: usize,
) -> Result<(Vec<f64>, OptimizerReport)> {
    let d = objective.dim();
    if x0.len() != d {
        return Err(Error::dims(format!(
            "x0 has {} coordinates, objective expects {d}",
            x0.len()
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let l_i: Vec<f64> = match coordinate_lipschitz {
        Some(l) => {
            if l.len() != d {
                return Err(Error::dims("coordinate constants length mismatch".into()));
            }
            if l.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::invalid("coordinate constants must be positive".into()));
            }
            l.to_vec()
        }
        None => estimate_coordinate_lipschitz(objective, x0),
    };

    let mut x = x0.to_vec();
    let mut rng = SplitMix64::new(seed);
    let mut updates = 0usize;
    let mut partial_evals = 0usize;
    let mut gradient_evals = 0usize;
    let mut trace = Vec::new();

    loop {
        if updates % d == 0 {
            let grad = objective.gradient(&x);
            gradient_evals += 1;
            let gnorm = l2_norm(&grad);
            trace.push(TraceRow {
                iteration: updates,
                objective: f64::NAN,
                gradient_norm: gnorm,
                step_l: 0.0,
                evals: 0,
            });
            if gnorm <= epsilon {
                return Ok((
                    x,
                    OptimizerReport {
                        iterations: updates,
                        function_evals: 0,
                        gradient_evals,
                        partial_evals,
                        final_gradient_norm: gnorm,
                        l_history: l_i,
                        trace,
                    },
                ));
            }
        }
        if updates >= max_iterations {
            let grad = objective.gradient(&x);
            return Err(Error::NoConvergence {
                solver: "coordinate-descent",
                iterations: updates,
                residual: l2_norm(&grad),
                target: epsilon,
            });
        }
        let i = rng.below_usize(d);
        let gi = objective.partial(&x, i);
        partial_evals += 1;
        let old = x[i];
        x[i] = old - gi / l_i[i];
        objective.coordinate_moved(&x, i, old);
        updates += 1;
    }
}

/// Quadratic objective `F(x) = 1/2 <x, S x> - <b, x>` with a symmetric `S`,
/// an incrementally maintained product `S x` for cheap partial derivatives,
/// and a multiply-add counter for cost comparisons.
pub struct QuadraticObjective {
    s: Vec<Vec<f64>>,
    b: Vec<f64>,
    cached_sx: Option<Vec<f64>>,
    muladds: u64,
}

impl QuadraticObjective {
    pub fn new(s: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        let d = s.len();
        if d == 0 || b.len() != d || s.iter().any(|row| row.len() != d) {
            return Err(Error::dims("S must be square and match b".into()));
        }
        for i in 0..d {
            for j in 0..i {
                if (s[i][j] - s[j][i]).abs() > 1e-12 {
                    return Err(Error::invalid("S must be symmetric".into()));
                }
            }
        }
        Ok(QuadraticObjective {
            s,
            b,
            cached_sx: None,
            muladds: 0,
        })
    }

    /// The rank-one extreme: `S` all ones, `b = 0`. Its largest eigenvalue
    /// is exactly `d`.
    pub fn all_ones(d: usize) -> Self {
        QuadraticObjective::new(vec![vec![1.0; d]; d], vec![0.0; d]).unwrap()
    }

    /// Symmetric `S` with every entry in [1, 2]: all off-diagonal entries 1,
    /// diagonal `1 + u_i` with `u_i` uniform in [1/2, 1]. Positive definite
    /// (ones matrix plus a positive diagonal), largest eigenvalue at least
    /// `d`, diagonal entries at most 2.
    pub fn unit_band_instance(d: usize, seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed);
        let mut s = vec![vec![1.0; d]; d];
        for (i, row) in s.iter_mut().enumerate() {
            row[i] = 1.0 + 0.5 + 0.5 * rng.next_f64();
        }
        let b = (0..d).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
        QuadraticObjective::new(s, b).unwrap()
    }

    /// Diagonal entries of `S`, the per-coordinate Lipschitz constants.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.s.len()).map(|i| self.s[i][i]).collect()
    }

    /// Rayleigh-quotient lower bound on the largest eigenvalue, evaluated
    /// at the all-ones direction: `(1^T S 1) / d`.
    pub fn lambda_max_lower_bound(&self) -> f64 {
        let d = self.s.len() as f64;
        let total: f64 = self.s.iter().flatten().sum();
        total / d
    }

    /// Largest eigenvalue by power iteration (diagnostic; not used by the
    /// optimizers).
    pub fn lambda_max(&self) -> f64 {
        let d = self.s.len();
        let mut v = vec![1.0 / (d as f64).sqrt(); d];
        let mut lambda = 0.0;
        for _ in 0..10_000 {
            let mut next = vec![0.0f64; d];
            for (i, row) in self.s.iter().enumerate() {
                for (j, s) in row.iter().enumerate() {
                    next[i] += s * v[j];
                }
            }
            let norm = l2_norm(&next);
            for n in &mut next {
                *n /= norm;
            }
            let new_lambda: f64 = next
                .iter()
                .enumerate()
                .map(|(i, vi)| vi * self.s[i].iter().zip(&next).map(|(s, w)| s * w).sum::<f64>())
                .sum();
            if (new_lambda - lambda).abs() <= 1e-12 * new_lambda.abs().max(1.0) {
                return new_lambda;
            }
            lambda = new_lambda;
            v = next;
        }
        lambda
    }

    pub fn reset_counter(&mut self) {
        self.muladds = 0;
    }

    /// Multiply-add operations spent since the last reset.
    pub fn counter(&self) -> u64 {
        self.muladds
    }

    fn fresh_sx(&mut self, x: &[f64]) -> Vec<f64> {
        let d = self.s.len();
        let mut sx = vec![0.0f64; d];
        for (i, row) in self.s.iter().enumerate() {
            for (j, s) in row.iter().enumerate() {
                sx[i] += s * x[j];
            }
        }
        self.muladds += (d * d) as u64;
        sx
    }
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.s.len()
    }

    fn value(&mut self, x: &[f64]) -> f64 {
        let sx = self.fresh_sx(x);
        self.muladds += 2 * self.s.len() as u64;
        0.5 * x.iter().zip(&sx).map(|(a, b)| a * b).sum::<f64>()
            - self.b.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    fn gradient(&mut self, x: &[f64]) -> Vec<f64> {
        let sx = self.fresh_sx(x);
        let grad: Vec<f64> = sx.iter().zip(&self.b).map(|(a, b)| a - b).collect();
        self.cached_sx = Some(sx);
        grad
    }
}

impl CoordinateObjective for QuadraticObjective {
    fn partial(&mut self, x: &[f64], i: usize) -> f64 {
        if self.cached_sx.is_none() {
            self.cached_sx = Some(self.fresh_sx(x));
        }
        self.muladds += 1;
        self.cached_sx.as_ref().unwrap()[i] - self.b[i]
    }

    fn coordinate_moved(&mut self, x: &[f64], i: usize, old: f64) {
        let dx = x[i] - old;
        if let Some(sx) = self.cached_sx.as_mut() {
            for (j, v) in sx.iter_mut().enumerate() {
                *v += self.s[j][i] * dx;
            }
            self.muladds += self.s.len() as u64;
        }
    }
}
