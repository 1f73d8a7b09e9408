//! Plain-text edge lists.
//!
//! The first non-comment line is `n m`, followed by `m` lines `u v` or `u v w`. Lines
//! starting with `#` and blank lines are skipped. Either every edge carries a weight or none does.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use congest_core::Graph;

/// Parse failures.
#[derive(Debug, thiserror::Error)]
pub enum EdgeListError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("expected {expected} edges, found {found}")]
    Count { expected: usize, found: usize },
    #[error("mixed weighted and unweighted edges")]
    MixedWeights,
    #[error(transparent)]
    Graph(#[from] congest_core::GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn numbers(line: &str, no: usize) -> Result<Vec<u64>, EdgeListError> {
    line.split_whitespace()
        .map(|t| t.parse::<u64>().map_err(|e| EdgeListError::Syntax { line: no, msg: format!("{t:?}: {e}") }))
        .collect()
}

/// Reads an edge list.
pub fn read<R: BufRead>(r: R) -> Result<Graph, EdgeListError> {
    let mut header: Option<(usize, usize)> = None;
    let mut pairs = Vec::new();
    let mut triples = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let xs = numbers(t, i + 1)?;
        let Some((n, _)) = header else {
            let [n, m] = xs[..] else {
                return Err(EdgeListError::Syntax { line: i + 1, msg: "header must be `n m`".into() });
            };
            header = Some((n as usize, m as usize));
            continue;
        };
        let check = |x: u64| -> Result<usize, EdgeListError> {
            if (x as usize) < n {
                Ok(x as usize)
            } else {
                Err(EdgeListError::Syntax { line: i + 1, msg: format!("node {x} out of range for n = {n}") })
            }
        };
        match xs[..] {
            [u, v] => pairs.push((check(u)?, check(v)?)),
            [u, v, w] => triples.push((check(u)?, check(v)?, w)),
            _ => return Err(EdgeListError::Syntax { line: i + 1, msg: "expected `u v` or `u v w`".into() }),
        }
    }
    let (n, m) = header.ok_or(EdgeListError::Syntax { line: 0, msg: "missing header".into() })?;
    if !pairs.is_empty() && !triples.is_empty() {
        return Err(EdgeListError::MixedWeights);
    }
    let found = pairs.len() + triples.len();
    if found != m {
        return Err(EdgeListError::Count { expected: m, found });
    }
    Ok(if triples.is_empty() { Graph::from_pairs(n, &pairs)? } else { Graph::from_weighted(n, &triples)? })
}

/// Renders `g` as an edge list; [`read`] gives back an equal graph.
pub fn to_string(g: &Graph) -> String {
    let mut s = format!("{} {}\n", g.n(), g.m());
    for e in g.edges() {
        match e.w {
            Some(w) => writeln!(s, "{} {} {w}", e.u, e.v),
            None => writeln!(s, "{} {}", e.u, e.v),
        }
        .expect("writing to a String");
    }
    s
}

/// Writes `g` as an edge list.
pub fn write<W: Write>(mut w: W, g: &Graph) -> std::io::Result<()> {
    w.write_all(to_string(g).as_bytes())
}
