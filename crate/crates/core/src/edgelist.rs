//! Plain-text edge lists: one `i j w` triple per line, 0-based ids.
//!
//! Blank lines and lines starting with `#` are ignored. The node count is one
//! more than the largest id mentioned.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

pub fn parse_edge_list(text: &str) -> Result<WeightedGraph> {
    let mut edges = Vec::new();
    let mut max_id: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: idx + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(format!(
                "expected 'i j w', found {} fields",
                fields.len()
            )));
        }
        let i: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(format!("bad node id '{}'", fields[0])))?;
        let j: usize = fields[1]
            .parse()
            .map_err(|_| parse_err(format!("bad node id '{}'", fields[1])))?;
        let w: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(format!("bad weight '{}'", fields[2])))?;
        if i == j {
            return Err(parse_err(format!("self-loop at node {i}")));
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(parse_err(format!("weight {w} outside [0, 1]")));
        }
        max_id = Some(max_id.map_or(i.max(j), |m| m.max(i).max(j)));
        edges.push((i, j, w));
    }
    let n = max_id.map_or(0, |m| m + 1);
    WeightedGraph::from_edges(n, &edges)
}

pub fn read_edge_list(path: impl AsRef<Path>) -> Result<WeightedGraph> {
    parse_edge_list(&std::fs::read_to_string(path)?)
}

/// Serializes every nonzero edge once (`i < j`).
pub fn format_edge_list(g: &WeightedGraph) -> String {
    let mut out = String::new();
    for (i, j, w) in g.edges(0.0) {
        writeln!(out, "{i} {j} {w}").expect("writing to a String cannot fail");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_comments() {
        let g = parse_edge_list("# triangle\n0 1 1.0\n\n1 2 0.5\n0 2 0.25\n").unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.weight(2, 1), 0.5);
        assert_eq!(g.weight(0, 2), 0.25);
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_edge_list("0 1 1\n0 x 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(parse_edge_list("0 1\n").is_err());
        assert!(parse_edge_list("0 0 1\n").is_err());
        assert!(parse_edge_list("0 1 2\n").is_err());
    }

    #[test]
    fn format_then_parse_is_identity() {
        let g = parse_edge_list("0 1 0.3\n1 3 1\n").unwrap();
        assert_eq!(parse_edge_list(&format_edge_list(&g)).unwrap(), g);
    }
}
