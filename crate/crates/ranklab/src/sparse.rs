//! Sparse row-stochastic matrices and rank vectors.
//!
//! [`StochasticMatrix`] stores a site graph in compressed sparse row form
//! with *rational* weights: integer numerators over a shared denominator
//! `m`, so every row sums to `m` exactly and rows stay stochastic by
//! construction. Floats appear only inside the apply kernels.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Row-stochastic sparse matrix with entries `numerator / m`.
///
/// Invariants, enforced at construction and on every read path:
/// - per row, the numerators sum to exactly `m`;
/// - column indices are strictly increasing within a row and `< n_sites`;
/// - no zero numerator is stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StochasticMatrix {
    n_sites: usize,
    denominator: u64,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    numerators: Vec<u64>,
    /// Inclusive running sums of the numerators within each row; the last
    /// entry of every row equals `denominator`. Used for O(log s) row
    /// sampling by binary search.
    cumulative: Vec<u64>,
}

impl StochasticMatrix {
    /// Builds a matrix from `(row, col, numerator)` entries. Entries may be
    /// unsorted; duplicates of the same `(row, col)` are summed.
    pub fn from_entries(
        n_sites: usize,
        denominator: u64,
        entries: impl IntoIterator<Item = (usize, usize, u64)>,
    ) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::invalid("matrix must have at least one site"));
        }
        if denominator == 0 {
            return Err(Error::invalid("denominator m must be positive"));
        }
        let mut sorted: Vec<(usize, usize, u64)> = entries.into_iter().collect();
        for &(r, c, _) in &sorted {
            if r >= n_sites || c >= n_sites {
                return Err(Error::invalid(format!(
                    "entry ({r}, {c}) outside {n_sites} sites"
                )));
            }
        }
        sorted.sort_unstable_by_key(|&(r, c, _)| (r, c));

        let mut row_offsets = Vec::with_capacity(n_sites + 1);
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut numerators = Vec::with_capacity(sorted.len());
        row_offsets.push(0);
        let mut row = 0usize;
        for (r, c, num) in sorted {
            if num == 0 {
                continue;
            }
            while row < r {
                row_offsets.push(col_indices.len());
                row += 1;
            }
            if let Some(last) = col_indices.last().copied() {
                if numerators.len() > row_offsets[row] && last == c {
                    *numerators.last_mut().unwrap() += num;
                    continue;
                }
            }
            col_indices.push(c);
            numerators.push(num);
        }
        while row < n_sites {
            row_offsets.push(col_indices.len());
            row += 1;
        }

        let mut cumulative = vec![0u64; numerators.len()];
        for r in 0..n_sites {
            let (lo, hi) = (row_offsets[r], row_offsets[r + 1]);
            let mut sum = 0u64;
            for k in lo..hi {
                sum += numerators[k];
                cumulative[k] = sum;
            }
            if sum != denominator {
                return Err(Error::invalid(format!(
                    "row {r} numerators sum to {sum}, expected {denominator}"
                )));
            }
        }

        Ok(StochasticMatrix {
            n_sites,
            denominator,
            row_offsets,
            col_indices,
            numerators,
            cumulative,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Shared denominator `m` of all entries.
    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    /// `(column, numerator)` pairs of one row, columns strictly increasing.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        let (lo, hi) = (self.row_offsets[row], self.row_offsets[row + 1]);
        self.col_indices[lo..hi]
            .iter()
            .copied()
            .zip(self.numerators[lo..hi].iter().copied())
    }

    /// All `(row, col, numerator)` entries in (row, col) order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        (0..self.n_sites).flat_map(move |r| self.row(r).map(move |(c, num)| (r, c, num)))
    }

    /// Resolves a sampling ticket in `[0, m)` to the column whose cumulative
    /// weight interval contains it, by binary search within the row.
    pub fn sample_row(&self, row: usize, ticket: u64) -> usize {
        debug_assert!(ticket < self.denominator);
        let (lo, hi) = (self.row_offsets[row], self.row_offsets[row + 1]);
        let cum = &self.cumulative[lo..hi];
        let k = cum.partition_point(|&c| c <= ticket);
        self.col_indices[lo + k]
    }

    /// Left-multiplication by a probability vector: `result_j = sum_i p_i P_ij`.
    ///
    /// Cost O(nnz); the accumulation order is fixed (row-major), so results
    /// are deterministic.
    pub fn transpose_apply(&self, p: &RankVector) -> Result<RankVector> {
        if p.len() != self.n_sites {
            return Err(Error::dims(format!(
                "vector has {} components, matrix has {} sites",
                p.len(),
                self.n_sites
            )));
        }
        let inv_m = 1.0 / self.denominator as f64;
        let mut out = vec![0.0f64; self.n_sites];
        for r in 0..self.n_sites {
            let mass = p.values[r];
            if mass == 0.0 {
                continue;
            }
            for (c, num) in self.row(r) {
                out[c] += mass * (num as f64 * inv_m);
            }
        }
        Ok(RankVector {
            values: out,
            meta: p.meta.clone(),
        })
    }

    /// One teleported step: `(1 - delta) * p^T P + delta * uniform`.
    ///
    /// The dense teleportation matrix is never materialized; `delta = 1` is
    /// accepted as the full-teleport limit and maps everything to uniform.
    pub fn teleported_apply(&self, p: &RankVector, delta: f64) -> Result<RankVector> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::invalid(format!(
                "teleport delta must lie in (0, 1], got {delta}"
            )));
        }
        if delta == 1.0 {
            return Ok(RankVector {
                values: vec![1.0 / self.n_sites as f64; self.n_sites],
                meta: p.meta.clone(),
            });
        }
        let mut stepped = self.transpose_apply(p)?;
        let jump = delta / self.n_sites as f64;
        for v in &mut stepped.values {
            *v = (1.0 - delta) * *v + jump;
        }
        Ok(stepped)
    }

    /// l1 residual of `p` under one (possibly teleported) step:
    /// `|| step(p) - p ||_1`, which is zero exactly when `p` is stationary.
    /// `delta = 0` means the raw chain.
    pub fn residual_l1(&self, delta: f64, p: &RankVector) -> Result<f64> {
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::invalid(format!(
                "residual delta must lie in [0, 1), got {delta}"
            )));
        }
        let next = if delta == 0.0 {
            self.transpose_apply(p)?
        } else {
            self.teleported_apply(p, delta)?
        };
        Ok(next
            .values
            .iter()
            .zip(&p.values)
            .map(|(a, b)| (a - b).abs())
            .sum())
    }

    /// Writes the site-graph text format:
    /// header `BOSG 1 <n_sites> <m>`, then `<row> <col> <numerator>` lines
    /// sorted by (row, col).
    pub fn write_text(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "BOSG 1 {} {}", self.n_sites, self.denominator)?;
        for (r, c, num) in self.entries() {
            writeln!(w, "{r} {c} {num}")?;
        }
        Ok(())
    }

    /// Reads the format written by [`write_text`](Self::write_text),
    /// validating the header, the (row, col) ordering, and all row sums.
    pub fn read_text(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err("BOSG", 1, "empty input"))??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "BOSG" || fields[1] != "1" {
            return Err(parse_err("BOSG", 1, "expected header `BOSG 1 <n> <m>`"));
        }
        let n_sites: usize = fields[2]
            .parse()
            .map_err(|_| parse_err("BOSG", 1, "bad site count"))?;
        let m: u64 = fields[3]
            .parse()
            .map_err(|_| parse_err("BOSG", 1, "bad denominator"))?;

        let mut entries = Vec::new();
        let mut prev: Option<(usize, usize)> = None;
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let (a, b, c) = (it.next(), it.next(), it.next());
            let (Some(a), Some(b), Some(c)) = (a, b, c) else {
                return Err(parse_err("BOSG", idx + 1, "expected `row col numerator`"));
            };
            let row: usize = a.parse().map_err(|_| parse_err("BOSG", idx + 1, "bad row"))?;
            let col: usize = b.parse().map_err(|_| parse_err("BOSG", idx + 1, "bad col"))?;
            let num: u64 = c
                .parse()
                .map_err(|_| parse_err("BOSG", idx + 1, "bad numerator"))?;
            if let Some(p) = prev {
                if (row, col) <= p {
                    return Err(parse_err("BOSG", idx + 1, "entries not sorted by (row, col)"));
                }
            }
            prev = Some((row, col));
            entries.push((row, col, num));
        }
        StochasticMatrix::from_entries(n_sites, m, entries)
    }
}

fn parse_err(what: &'static str, line: usize, message: &str) -> Error {
    Error::Parse {
        what,
        line,
        message: message.to_string(),
    }
}

/// Provenance attached to a rank vector by whichever routine produced it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RankMeta {
    pub solver: String,
    pub iterations: usize,
    pub residual: f64,
    pub seed: Option<u64>,
}

/// A probability vector over sites.
///
/// Components are nonnegative and sum to 1 within 1e-10; validated
/// constructors enforce this.
#[derive(Debug, Clone, PartialEq)]
pub struct RankVector {
    values: Vec<f64>,
    pub meta: RankMeta,
}

impl RankVector {
    pub const SUM_TOLERANCE: f64 = 1e-10;

    /// Uniform distribution over `n` sites.
    pub fn uniform(n: usize) -> Self {
        RankVector {
            values: vec![1.0 / n as f64; n],
            meta: RankMeta::default(),
        }
    }

    /// Validates nonnegativity and normalization.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("rank vector must not be empty"));
        }
        if values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid("rank vector components must be finite and >= 0"));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::invalid(format!(
                "rank vector sums to {sum}, expected 1 within {}",
                Self::SUM_TOLERANCE
            )));
        }
        Ok(RankVector {
            values,
            meta: RankMeta::default(),
        })
    }

    /// Internal constructor for values known to satisfy the invariants.
    pub(crate) fn from_values_unchecked(values: Vec<f64>, meta: RankMeta) -> Self {
        debug_assert!((values.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        RankVector { values, meta }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn l1_distance(&self, other: &RankVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    pub fn l2_distance(&self, other: &RankVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Writes `site,score` CSV with scores at 17 significant digits, which
    /// round-trips f64 exactly.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "site,score")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{i},{v:.16e}")?;
        }
        Ok(())
    }

    /// Reads the CSV written by [`write_csv`](Self::write_csv).
    pub fn read_csv(r: impl BufRead) -> Result<Self> {
        let mut values = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            if idx == 0 {
                if line.trim() != "site,score" {
                    return Err(parse_err("rank csv", 1, "expected header `site,score`"));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let (site, score) = line
                .split_once(',')
                .ok_or_else(|| parse_err("rank csv", idx + 1, "expected `site,score`"))?;
            let site: usize = site
                .parse()
                .map_err(|_| parse_err("rank csv", idx + 1, "bad site index"))?;
            if site != values.len() {
                return Err(parse_err("rank csv", idx + 1, "sites out of order"));
            }
            let score: f64 = score
                .parse()
                .map_err(|_| parse_err("rank csv", idx + 1, "bad score"))?;
            values.push(score);
        }
        RankVector::from_values(values)
    }
}
