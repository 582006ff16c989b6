//! Text format for synthetic ranking instances.
//!
//! Layout: header `SPRL 1 <n> <l> <T> <delta>`, then every edge as
//! `i j f1..fl`, then exactly `n` node lines `w f1..fl`, then label lines
//! `w grade`. Sections appear in that order; the arities (2+l, 1+l, 2
//! fields) plus the known node count make the parse unambiguous even at
//! l = 1.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::learn::model::RankingModel;
use crate::learn::objective::LabeledQuery;

fn fmt_features(features: &[f64]) -> String {
    features
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Writes one labeled instance.
pub fn write_instance(query: &LabeledQuery, mut w: impl Write) -> Result<()> {
    let model = query.model();
    writeln!(
        w,
        "SPRL 1 {} {} {} {}",
        model.n_nodes(),
        model.feature_dim(),
        model.iterations(),
        model.teleport()
    )?;
    for (from, to, features) in model.edges() {
        writeln!(w, "{from} {to} {}", fmt_features(features))?;
    }
    for (node, features) in model.node_features.iter().enumerate() {
        writeln!(w, "{node} {}", fmt_features(features))?;
    }
    for (&node, &grade) in query.labels() {
        writeln!(w, "{node} {grade}")?;
    }
    Ok(())
}

fn bad(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        what: "SPRL",
        line,
        message: message.into(),
    }
}

/// Reads the format written by [`write_instance`], re-validating the model
/// invariants and label constraints.
pub fn read_instance(r: impl BufRead) -> Result<LabeledQuery> {
    let mut lines = r.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty input"))??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 6 || fields[0] != "SPRL" || fields[1] != "1" {
        return Err(bad(1, "expected header `SPRL 1 <n> <l> <T> <delta>`"));
    }
    let n: usize = fields[2].parse().map_err(|_| bad(1, "bad node count"))?;
    let l: usize = fields[3].parse().map_err(|_| bad(1, "bad feature dim"))?;
    let t: usize = fields[4].parse().map_err(|_| bad(1, "bad iteration budget"))?;
    let delta: f64 = fields[5].parse().map_err(|_| bad(1, "bad teleport weight"))?;

    let mut edges: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    let mut node_features: Vec<Vec<f64>> = Vec::new();
    let mut labels: BTreeMap<usize, u8> = BTreeMap::new();

    for (idx, line) in lines {
        let line = line?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let in_edges = node_features.is_empty() && tokens.len() == 2 + l;
        if in_edges {
            let from: usize = tokens[0].parse().map_err(|_| bad(lineno, "bad edge source"))?;
            let to: usize = tokens[1].parse().map_err(|_| bad(lineno, "bad edge target"))?;
            let features = parse_features(&tokens[2..], lineno)?;
            edges.push((from, to, features));
        } else if node_features.len() < n {
            if tokens.len() != 1 + l {
                return Err(bad(lineno, format!("expected node line with {} fields", 1 + l)));
            }
            let node: usize = tokens[0].parse().map_err(|_| bad(lineno, "bad node index"))?;
            if node != node_features.len() {
                return Err(bad(lineno, "node lines out of order"));
            }
            node_features.push(parse_features(&tokens[1..], lineno)?);
        } else {
            if tokens.len() != 2 {
                return Err(bad(lineno, "expected label line `node grade`"));
            }
            let node: usize = tokens[0].parse().map_err(|_| bad(lineno, "bad labeled node"))?;
            let grade: u8 = tokens[1].parse().map_err(|_| bad(lineno, "bad grade"))?;
            if labels.insert(node, grade).is_some() {
                return Err(bad(lineno, format!("node {node} labeled twice")));
            }
        }
    }
    if node_features.len() != n {
        return Err(bad(0, format!("expected {n} node lines, found {}", node_features.len())));
    }
    let model = RankingModel::new(n, edges, node_features, delta, t)?;
    LabeledQuery::new(model, labels)
}

fn parse_features(tokens: &[&str], lineno: usize) -> Result<Vec<f64>> {
    tokens
        .iter()
        .map(|t| {
            t.parse::<f64>().map_err(|_| Error::Parse {
                what: "SPRL",
                line: lineno,
                message: format!("bad feature value `{t}`"),
            })
        })
        .collect()
}
