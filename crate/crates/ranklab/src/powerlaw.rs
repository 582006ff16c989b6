//! Rank plots and log-log least-squares power-law fits.
//!
//! Components are sorted descending, plotted against rank, and the exponent
//! is estimated by ordinary least squares of `ln v_k` on `ln k` over a rank
//! window. Natural logarithms are used internally; plot files are emitted
//! in log2 to match the usual axes.

use std::io::Write;

use crate::error::{Error, Result};
use crate::sparse::RankVector;

/// One entry of a rank plot: 1-based rank, original site, value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedComponent {
    pub rank: usize,
    pub site: usize,
    pub value: f64,
}

/// Sorts components descending; ties break by ascending site index, so the
/// order is deterministic.
pub fn rank_sort(v: &RankVector) -> Vec<RankedComponent> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| {
        v.values()[j]
            .total_cmp(&v.values()[i])
            .then_with(|| i.cmp(&j))
    });
    order
        .into_iter()
        .enumerate()
        .map(|(idx, site)| RankedComponent {
            rank: idx + 1,
            site,
            value: v.values()[site],
        })
        .collect()
}

/// A fitted power law `v_k ~ k^g` over a rank window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    /// The exponent g.
    pub slope: f64,
    /// Intercept of the least-squares line in natural-log coordinates.
    pub intercept: f64,
    pub r_squared: f64,
    pub rank_window: (usize, usize),
    pub n_points: usize,
    /// Set when the window had zero variance (constant values); r_squared
    /// is reported as 1 in that case.
    pub degenerate: bool,
}

/// Ordinary least squares of `ln y` on `ln x`. All inputs must be positive.
pub fn fit_log_log(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 3 {
        return Err(Error::invalid(format!(
            "need at least 3 points to fit, got {}",
            points.len()
        )));
    }
    for (i, &(x, y)) in points.iter().enumerate() {
        if !(x > 0.0) {
            return Err(Error::invalid(format!("nonpositive abscissa at point {i}")));
        }
        if !(y > 0.0) {
            return Err(Error::NonPositiveFitValue { rank: i });
        }
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for &(x, y) in &logs {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::invalid("all abscissas coincide; no line to fit"));
    }
    if syy == 0.0 {
        // Constant values: slope 0, perfect (if vacuous) fit.
        return Ok(PowerLawFit {
            slope: 0.0,
            intercept: mean_y,
            r_squared: 1.0,
            rank_window: (0, 0),
            n_points: points.len(),
            degenerate: true,
        });
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = logs
        .iter()
        .map(|&(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    Ok(PowerLawFit {
        slope,
        intercept,
        r_squared: 1.0 - ss_res / syy,
        rank_window: (0, 0),
        n_points: points.len(),
        degenerate: false,
    })
}

/// Fits `ln v_k` against `ln k` over ranks `lo..=hi` of a sorted rank plot.
/// A nonpositive value inside the window is a reported fit error, never
/// silently skipped.
pub fn loglog_fit(sorted: &[RankedComponent], window: (usize, usize)) -> Result<PowerLawFit> {
    let (lo, hi) = window;
    if lo < 1 || hi > sorted.len() || hi < lo {
        return Err(Error::invalid(format!(
            "window ({lo}, {hi}) outside ranks 1..={}",
            sorted.len()
        )));
    }
    if hi - lo + 1 < 3 {
        return Err(Error::invalid("fit window must span at least 3 ranks"));
    }
    for rc in &sorted[lo - 1..hi] {
        if !(rc.value > 0.0) {
            return Err(Error::NonPositiveFitValue { rank: rc.rank });
        }
    }
    let points: Vec<(f64, f64)> = sorted[lo - 1..hi]
        .iter()
        .map(|rc| (rc.rank as f64, rc.value))
        .collect();
    let mut fit = fit_log_log(&points)?;
    fit.rank_window = (lo, hi);
    Ok(fit)
}

/// Mean and extreme slopes across an ensemble of fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeSummary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize_ensemble(fits: &[PowerLawFit]) -> Result<SlopeSummary> {
    if fits.is_empty() {
        return Err(Error::invalid("cannot summarize an empty ensemble"));
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for f in fits {
        min = min.min(f.slope);
        max = max.max(f.slope);
        sum += f.slope;
    }
    Ok(SlopeSummary {
        mean: sum / fits.len() as f64,
        min,
        max,
    })
}

/// Writes rank-plot data as `log2_k,log2_v` pairs for external plotting.
/// Only strictly positive values can be plotted on log axes; a zero value
/// is a caller error here.
pub fn write_rank_plot(sorted: &[RankedComponent], mut w: impl Write) -> Result<()> {
    writeln!(w, "log2_k,log2_v")?;
    for rc in sorted {
        if !(rc.value > 0.0) {
            return Err(Error::NonPositiveFitValue { rank: rc.rank });
        }
        writeln!(w, "{},{}", (rc.rank as f64).log2(), rc.value.log2())?;
    }
    Ok(())
}
