//! Shipped code presets: the two designed cyclic-shift base graphs and
//! the default optimized degree distribution used by the random
//! construction.
//!
//! The base graphs were produced by the greedy column-degree design with
//! random tie-breaking, searching candidate seeds for the most balanced
//! variable-node connections after expansion (see the `design-base` CLI
//! subcommand, which regenerates them).

use std::sync::OnceLock;

use crate::graph::{BaseGraph, DegreeDistribution};

/// Row degrees of the 7-row preset base graph (K = 256).
pub const CS7_DEGREES: [usize; 7] = [11, 12, 14, 14, 19, 20, 27];

/// Row degrees of the 8-row preset base graph (K = 256).
pub const CS8_DEGREES: [usize; 8] = [11, 12, 14, 14, 16, 19, 20, 27];

static CS7: OnceLock<BaseGraph> = OnceLock::new();
static CS8: OnceLock<BaseGraph> = OnceLock::new();
static PSI: OnceLock<DegreeDistribution> = OnceLock::new();

/// The designed 7x256 base graph.
pub fn cs7_base_graph() -> BaseGraph {
    CS7.get_or_init(|| {
        BaseGraph::from_text(include_str!("../data/cs7.bg")).expect("shipped cs7 base graph")
    })
    .clone()
}

/// The designed 8x256 base graph.
pub fn cs8_base_graph() -> BaseGraph {
    CS8.get_or_init(|| {
        BaseGraph::from_text(include_str!("../data/cs8.bg")).expect("shipped cs8 base graph")
    })
    .clone()
}

/// The shipped degree distribution for the random construction
/// (optimized for a 16-packet batch over a ten-link channel with 10%
/// loss; regenerate with the `optimize` CLI subcommand).
pub fn default_degree_distribution() -> DegreeDistribution {
    PSI.get_or_init(|| {
        parse_distribution_text(include_str!("../data/psi_default.dist"))
            .expect("shipped degree distribution")
    })
    .clone()
}

/// Parse the "degree mass" line format shared with `degree_opt`.
pub(crate) fn parse_distribution_text(
    text: &str,
) -> Result<DegreeDistribution, crate::graph::GraphError> {
    let mut pairs = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let degree: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| crate::graph::GraphError::Malformed(format!("bad line: {line}")))?;
        let mass: f64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| crate::graph::GraphError::Malformed(format!("bad line: {line}")))?;
        pairs.push((degree, mass));
    }
    DegreeDistribution::from_pairs(&pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_match_design_degrees() {
        let g7 = cs7_base_graph();
        assert_eq!(g7.k(), 256);
        assert_eq!(g7.degrees(), CS7_DEGREES.to_vec());
        let g8 = cs8_base_graph();
        assert_eq!(g8.k(), 256);
        assert_eq!(g8.degrees(), CS8_DEGREES.to_vec());
    }

    #[test]
    fn default_distribution_is_valid() {
        let psi = default_degree_distribution();
        assert!(psi.mean_degree() > 1.0);
        assert!(psi.max_degree() <= 256);
    }
}
