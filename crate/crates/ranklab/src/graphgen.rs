//! Buckley–Osthus web-graph generation and site aggregation.
//!
//! The growth model: start from a single page with a self-loop; each new
//! page links to an existing page `i` with probability
//! `(indeg(i) + a) / (t * (a + 1))` where `t` is the current page count.
//! Writing `beta = a / (1 + a)`, that mixture is sampled in O(1) per step:
//! with probability `beta` pick a uniform existing page, otherwise pick the
//! head of a uniformly chosen existing edge (in-degree-proportional choice
//! equals a uniform draw over edge heads). New pages never link to
//! themselves; only page 0 carries a self-loop.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::sparse::StochasticMatrix;

/// A raw Buckley–Osthus digraph: one out-edge per page.
#[derive(Debug, Clone, PartialEq)]
pub struct PageGraph {
    target: Vec<usize>,
    a: f64,
    seed: u64,
}

impl PageGraph {
    pub fn n_pages(&self) -> usize {
        self.target.len()
    }

    /// Attachment parameter.
    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `target[i]` is the page that page `i` links to.
    pub fn targets(&self) -> &[usize] {
        &self.target
    }

    /// In-degree of every page (page 0's self-loop counts).
    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.target.len()];
        for &t in &self.target {
            deg[t] += 1;
        }
        deg
    }

    /// Writes the page-graph text format: header
    /// `BOPG 1 <n_pages> <a> <seed>`, then one `i target[i]` line per page.
    pub fn write_text(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "BOPG 1 {} {} {}", self.target.len(), self.a, self.seed)?;
        for (i, &t) in self.target.iter().enumerate() {
            writeln!(w, "{i} {t}")?;
        }
        Ok(())
    }

    /// Reads the format written by [`write_text`](Self::write_text) and
    /// re-validates the growth invariants.
    pub fn read_text(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Parse {
                what: "BOPG",
                line: 1,
                message: "empty input".into(),
            })??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "BOPG" || fields[1] != "1" {
            return Err(Error::Parse {
                what: "BOPG",
                line: 1,
                message: "expected header `BOPG 1 <n_pages> <a> <seed>`".into(),
            });
        }
        let n_pages: usize = fields[2].parse().map_err(|_| Error::Parse {
            what: "BOPG",
            line: 1,
            message: "bad page count".into(),
        })?;
        let a: f64 = fields[3].parse().map_err(|_| Error::Parse {
            what: "BOPG",
            line: 1,
            message: "bad attachment parameter".into(),
        })?;
        let seed: u64 = fields[4].parse().map_err(|_| Error::Parse {
            what: "BOPG",
            line: 1,
            message: "bad seed".into(),
        })?;

        let mut target = Vec::with_capacity(n_pages);
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let (Some(i), Some(t)) = (it.next(), it.next()) else {
                return Err(Error::Parse {
                    what: "BOPG",
                    line: idx + 1,
                    message: "expected `i target`".into(),
                });
            };
            let i: usize = i.parse().map_err(|_| Error::Parse {
                what: "BOPG",
                line: idx + 1,
                message: "bad page index".into(),
            })?;
            let t: usize = t.parse().map_err(|_| Error::Parse {
                what: "BOPG",
                line: idx + 1,
                message: "bad target".into(),
            })?;
            if i != target.len() {
                return Err(Error::Parse {
                    what: "BOPG",
                    line: idx + 1,
                    message: "pages out of order".into(),
                });
            }
            let valid = if i == 0 { t == 0 } else { t < i };
            if !valid {
                return Err(Error::Parse {
                    what: "BOPG",
                    line: idx + 1,
                    message: format!("target {t} breaks the growth invariant for page {i}"),
                });
            }
            target.push(t);
        }
        if target.len() != n_pages {
            return Err(Error::Parse {
                what: "BOPG",
                line: n_pages + 1,
                message: format!("expected {n_pages} pages, found {}", target.len()),
            });
        }
        Ok(PageGraph { target, a, seed })
    }
}

/// `beta = a / (1 + a)`, the uniform-branch probability of the attachment
/// mixture.
pub fn mixture_beta(a: f64) -> f64 {
    a / (1.0 + a)
}

/// Grows a Buckley–Osthus graph. A pure function of its arguments: the same
/// `(n_pages, a, seed)` reproduce the same graph byte for byte.
pub fn generate_page_graph(n_pages: usize, a: f64, seed: u64) -> Result<PageGraph> {
    if n_pages == 0 {
        return Err(Error::invalid("n_pages must be at least 1"));
    }
    if !a.is_finite() || a < 0.0 {
        return Err(Error::invalid(format!(
            "attachment parameter must be finite and >= 0, got {a}"
        )));
    }
    let beta = mixture_beta(a);
    let mut rng = SplitMix64::new(seed);
    let mut target = Vec::with_capacity(n_pages);
    target.push(0); // base case: a single page with a self-loop
    for i in 1..n_pages {
        // `target[..i]` doubles as the list of edge heads: one edge per page.
        let t = if rng.next_f64() < beta {
            rng.below_usize(i)
        } else {
            target[rng.below_usize(i)]
        };
        target.push(t);
    }
    Ok(PageGraph { target, a, seed })
}

/// Groups consecutive blocks of `m` pages into sites; `l` parallel page
/// links between a site pair become one edge of weight `l/m`. Self-loops
/// are kept (pages of one site may link to each other). Requires `m` to
/// divide `n_pages` exactly; remainders are rejected rather than guessed.
pub fn aggregate_sites(g: &PageGraph, m: usize) -> Result<StochasticMatrix> {
    if m == 0 {
        return Err(Error::invalid("site size m must be positive"));
    }
    if g.n_pages() % m != 0 {
        return Err(Error::invalid(format!(
            "n_pages = {} is not divisible by m = {m}",
            g.n_pages()
        )));
    }
    let n_sites = g.n_pages() / m;
    let entries = g
        .targets()
        .iter()
        .enumerate()
        .map(|(page, &t)| (page / m, t / m, 1u64));
    StochasticMatrix::from_entries(n_sites, m as u64, entries)
}

/// Empirical in-degree histogram: degree -> number of pages with that
/// degree. Counts sum to `n_pages`, and so do `degree * count` products
/// (each page emits exactly one edge).
pub fn indegree_histogram(g: &PageGraph) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for d in g.in_degrees() {
        *hist.entry(d).or_insert(0usize) += 1;
    }
    hist
}

/// Stationary mean-field degree fractions `c_k`.
#[derive(Debug, Clone)]
pub struct DegreeFractions {
    fractions: Vec<f64>,
    a: f64,
}

impl DegreeFractions {
    /// `c_0 .. c_kmax`.
    pub fn fractions(&self) -> &[f64] {
        &self.fractions
    }

    pub fn a(&self) -> f64 {
        self.a
    }
}

/// Solves the stationary degree recursion:
/// `c_0 = 1/(1+beta)` and
/// `c_k / c_{k-1} = 1 - (2-beta) / (1 + beta + k (1-beta))`,
/// whose tail decays like `k^-(2+a)`.
pub fn mean_field_degree_fractions(a: f64, k_max: usize) -> Result<DegreeFractions> {
    if !a.is_finite() || a < 0.0 {
        return Err(Error::invalid(format!(
            "attachment parameter must be finite and >= 0, got {a}"
        )));
    }
    let beta = mixture_beta(a);
    let mut fractions = Vec::with_capacity(k_max + 1);
    let mut c = 1.0 / (1.0 + beta);
    fractions.push(c);
    for k in 1..=k_max {
        c *= 1.0 - (2.0 - beta) / (1.0 + beta + k as f64 * (1.0 - beta));
        fractions.push(c);
    }
    Ok(DegreeFractions { fractions, a })
}

/// The two closed-form candidates for the in-degree *rank-law* exponent:
/// `-(1 - beta)` (what the density law `c_k ~ k^-(2+a)` implies for the
/// rank plot) and `-(1 + beta)` (the exponent as printed alongside it in
/// the literature). They disagree, so fits are reported against both
/// rather than asserting either.
pub fn rank_law_candidates(a: f64) -> (f64, f64) {
    let beta = mixture_beta(a);
    (-(1.0 - beta), -(1.0 + beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_page_is_a_self_loop() {
        let g = generate_page_graph(1, 3.5, 99).unwrap();
        assert_eq!(g.targets(), &[0]);
        let hist = indegree_histogram(&g);
        assert_eq!(hist.get(&1), Some(&1));
        assert_eq!(hist.len(), 1);
    }

    #[test]
    fn second_page_always_links_to_first() {
        for seed in 0..50 {
            let g = generate_page_graph(2, 0.3, seed).unwrap();
            assert_eq!(g.targets(), &[0, 0]);
        }
        let hist = indegree_histogram(&generate_page_graph(2, 0.3, 7).unwrap());
        assert_eq!(hist.get(&0), Some(&1));
        assert_eq!(hist.get(&2), Some(&1));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(generate_page_graph(0, 1.0, 0).is_err());
        assert!(generate_page_graph(10, -0.5, 0).is_err());
        assert!(generate_page_graph(10, f64::NAN, 0).is_err());
        assert!(mean_field_degree_fractions(-1.0, 10).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let g1 = generate_page_graph(5000, 0.277, 424242).unwrap();
        let g2 = generate_page_graph(5000, 0.277, 424242).unwrap();
        assert_eq!(g1, g2);
        let g3 = generate_page_graph(5000, 0.277, 424243).unwrap();
        assert_ne!(g1, g3);
    }

    /// Monte-Carlo check of the attachment law at n = 3, a = 1:
    /// P(page 2 -> page 0) = (2+1)/(2*2) = 3/4.
    #[test]
    fn third_page_attachment_frequency() {
        let trials = 200_000u64;
        let mut to_zero = 0u64;
        for seed in 0..trials {
            let g = generate_page_graph(3, 1.0, seed).unwrap();
            if g.targets()[2] == 0 {
                to_zero += 1;
            }
        }
        let freq = to_zero as f64 / trials as f64;
        let sigma = (0.75 * 0.25 / trials as f64).sqrt();
        assert!(
            (freq - 0.75).abs() <= 3.0 * sigma,
            "frequency {freq} is off 3/4 by more than 3 sigma"
        );
    }

    #[test]
    fn mean_field_fractions_at_a_one() {
        let df = mean_field_degree_fractions(1.0, 50).unwrap();
        let c = df.fractions();
        assert!((c[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((c[1] - 1.0 / 6.0).abs() < 1e-15);
        assert!((c[2] - 1.0 / 15.0).abs() < 1e-15);
        // The recursion telescopes to 4 / ((k+1)(k+2)(k+3)) at a = 1.
        for (k, &ck) in c.iter().enumerate() {
            let k = k as f64;
            let closed = 4.0 / ((k + 1.0) * (k + 2.0) * (k + 3.0));
            assert!((ck - closed).abs() <= 1e-14, "k = {k}: {ck} vs {closed}");
        }
    }

    #[test]
    fn mean_field_partial_sums_approach_one() {
        let df = mean_field_degree_fractions(1.0, 1000).unwrap();
        let sum: f64 = df.fractions().iter().sum();
        assert!((sum - 1.0).abs() < 1e-5, "partial sum {sum}");
    }

    #[test]
    fn c0_matches_stationarity_for_any_a() {
        for a in [0.0, 0.277, 1.0, 5.0, 30.0] {
            let df = mean_field_degree_fractions(a, 0).unwrap();
            let beta = mixture_beta(a);
            assert!((df.fractions()[0] - 1.0 / (1.0 + beta)).abs() < 1e-15);
        }
    }

    /// Brute-force site grouping used as an independent oracle for
    /// aggregate_sites.
    fn brute_force_aggregate(g: &PageGraph, m: usize) -> Vec<BTreeMap<usize, u64>> {
        let n_sites = g.n_pages() / m;
        let mut rows = vec![BTreeMap::new(); n_sites];
        for (page, &t) in g.targets().iter().enumerate() {
            *rows[page / m].entry(t / m).or_insert(0u64) += 1;
        }
        rows
    }

    #[test]
    fn aggregate_hand_trace() {
        // pages [0,0,1,0] with m = 2: site 0 -> itself with weight 1 (two
        // parallel links), site 1 -> site 0 with weight 1.
        let g = PageGraph {
            target: vec![0, 0, 1, 0],
            a: 1.0,
            seed: 0,
        };
        let m = aggregate_sites(&g, 2).unwrap();
        assert_eq!(m.row(0).collect::<Vec<_>>(), vec![(0, 2)]);
        assert_eq!(m.row(1).collect::<Vec<_>>(), vec![(0, 2)]);
    }

    #[test]
    fn aggregate_identity_and_collapse() {
        let g = generate_page_graph(24, 1.0, 5).unwrap();
        // m = 1: one row per page with the single original target.
        let m1 = aggregate_sites(&g, 1).unwrap();
        for (page, &t) in g.targets().iter().enumerate() {
            assert_eq!(m1.row(page).collect::<Vec<_>>(), vec![(t, 1)]);
        }
        // m = n_pages: everything collapses onto one self-loop.
        let mall = aggregate_sites(&g, 24).unwrap();
        assert_eq!(mall.row(0).collect::<Vec<_>>(), vec![(0, 24)]);
    }

    #[test]
    fn aggregate_rejects_remainders() {
        let g = generate_page_graph(10, 1.0, 0).unwrap();
        assert!(aggregate_sites(&g, 3).is_err());
        assert!(aggregate_sites(&g, 0).is_err());
    }

    #[test]
    fn bopg_round_trip() {
        let g = generate_page_graph(500, 0.277, 123).unwrap();
        let mut buf = Vec::new();
        g.write_text(&mut buf).unwrap();
        let back = PageGraph::read_text(&buf[..]).unwrap();
        assert_eq!(g, back);
    }

    proptest! {
        /// The O(1) mixture sampler equals the closed attachment formula:
        /// beta/n + (1-beta) * indeg/n == (indeg + a) / (n (1 + a)).
        #[test]
        fn attachment_mixture_identity(
            indeg in 0u32..10_000,
            n in 1u32..1_000_000,
            a in 0.0f64..100.0,
        ) {
            let beta = mixture_beta(a);
            let n = n as f64;
            let indeg = indeg as f64;
            let mixture = beta / n + (1.0 - beta) * indeg / n;
            let direct = (indeg + a) / (n * (1.0 + a));
            prop_assert!((mixture - direct).abs() <= 1e-12);
        }

        /// Growth invariants hold for arbitrary parameters; aggregation
        /// preserves the edge count.
        #[test]
        fn growth_invariants(n_blocks in 1usize..40, a in 0.0f64..20.0, seed in 0u64..1000) {
            let m = 4;
            let g = generate_page_graph(n_blocks * m, a, seed).unwrap();
            prop_assert_eq!(g.targets()[0], 0);
            for (i, &t) in g.targets().iter().enumerate().skip(1) {
                prop_assert!(t < i);
            }
            let hist = indegree_histogram(&g);
            let pages: usize = hist.values().sum();
            let edges: usize = hist.iter().map(|(d, c)| d * c).sum();
            prop_assert_eq!(pages, g.n_pages());
            prop_assert_eq!(edges, g.n_pages());

            let s = aggregate_sites(&g, m).unwrap();
            let total: u64 = s.entries().map(|(_, _, num)| num).sum();
            prop_assert_eq!(total, g.n_pages() as u64);

            let oracle = brute_force_aggregate(&g, m);
            for (row, expected) in oracle.iter().enumerate() {
                let got: Vec<(usize, u64)> = s.row(row).collect();
                let want: Vec<(usize, u64)> = expected.iter().map(|(&c, &l)| (c, l)).collect();
                prop_assert_eq!(got, want);
            }
        }
    }
}
