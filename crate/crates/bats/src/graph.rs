//! Tanner-graph construction: random sampling from a degree distribution,
//! cyclic-shift expansion of a base graph, and greedy column-degree design.
//!
//! Graphs are stored as bi-adjacency row supports: row i lists the variable
//! (column) indices selected by check node i, in ascending order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("degree distribution must have at least one mass")]
    EmptyDistribution,
    #[error("degree distribution mass for degree {degree} is negative")]
    NegativeMass { degree: usize },
    #[error("degree distribution sums to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("row degree {degree} exceeds the column count {k}")]
    DegreeTooLarge { degree: usize, k: usize },
    #[error("row degree must be at least 1")]
    ZeroDegree,
    #[error("base graph row {row} has a column index {index} out of range for K={k}")]
    IndexOutOfRange { row: usize, index: usize, k: usize },
    #[error("base graph file is malformed: {0}")]
    Malformed(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for GraphError {
    fn from(e: std::io::Error) -> Self {
        GraphError::Io(e.to_string())
    }
}

/// Probability masses over check-node degrees 1..=K.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    masses: Vec<f64>, // masses[i] is the probability of degree i+1
}

const NORMALIZATION_TOL: f64 = 1e-9;

impl DegreeDistribution {
    /// `masses[i]` is the mass of degree `i + 1`. Must be nonnegative and
    /// sum to 1 within 1e-9.
    pub fn new(masses: Vec<f64>) -> Result<DegreeDistribution, GraphError> {
        if masses.is_empty() {
            return Err(GraphError::EmptyDistribution);
        }
        if let Some(i) = masses.iter().position(|&m| m < 0.0 || !m.is_finite()) {
            return Err(GraphError::NegativeMass { degree: i + 1 });
        }
        let sum: f64 = masses.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(GraphError::NotNormalized { sum });
        }
        Ok(DegreeDistribution { masses })
    }

    /// Point mass on a single degree.
    pub fn degenerate(degree: usize) -> DegreeDistribution {
        assert!(degree >= 1);
        let mut masses = vec![0.0; degree];
        masses[degree - 1] = 1.0;
        DegreeDistribution { masses }
    }

    /// Build from (degree, mass) pairs, renormalizing is NOT done here;
    /// the pairs must already sum to 1.
    pub fn from_pairs(pairs: &[(usize, f64)]) -> Result<DegreeDistribution, GraphError> {
        let max = pairs.iter().map(|&(d, _)| d).max().unwrap_or(0);
        if max == 0 {
            return Err(GraphError::EmptyDistribution);
        }
        let mut masses = vec![0.0; max];
        for &(d, m) in pairs {
            if d == 0 {
                return Err(GraphError::ZeroDegree);
            }
            masses[d - 1] += m;
        }
        DegreeDistribution::new(masses)
    }

    pub fn max_degree(&self) -> usize {
        self.masses.len()
    }

    pub fn mass(&self, degree: usize) -> f64 {
        if degree == 0 || degree > self.masses.len() {
            0.0
        } else {
            self.masses[degree - 1]
        }
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mean_degree(&self) -> f64 {
        self.masses
            .iter()
            .enumerate()
            .map(|(i, m)| (i + 1) as f64 * m)
            .sum()
    }

    pub fn nonzero_count(&self) -> usize {
        self.masses.iter().filter(|&&m| m > 0.0).count()
    }

    /// Sample a degree by inverse CDF.
    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, &m) in self.masses.iter().enumerate() {
            acc += m;
            if u < acc {
                return i + 1;
            }
        }
        // Round-off fallthrough: return the largest nonzero degree.
        self.masses
            .iter()
            .rposition(|&m| m > 0.0)
            .map(|i| i + 1)
            .unwrap_or(1)
    }

    /// Keep the `m` largest masses (ties resolved toward the larger
    /// degree) and renormalize them to sum 1. With fewer than `m`
    /// nonzero masses every nonzero mass survives and the distribution
    /// comes back unchanged.
    pub fn top_m_renormalized(&self, m: usize) -> Result<DegreeDistribution, GraphError> {
        assert!(m >= 1);
        let mut order: Vec<usize> = (0..self.masses.len())
            .filter(|&i| self.masses[i] > 0.0)
            .collect();
        // Descending by mass, then descending by degree.
        order.sort_by(|&a, &b| {
            self.masses[b]
                .partial_cmp(&self.masses[a])
                .unwrap()
                .then(b.cmp(&a))
        });
        order.truncate(m);
        let total: f64 = order.iter().map(|&i| self.masses[i]).sum();
        let mut masses = vec![0.0; self.masses.len()];
        for &i in &order {
            masses[i] = self.masses[i] / total;
        }
        while let Some(&last) = masses.last() {
            if last == 0.0 && masses.len() > 1 {
                masses.pop();
            } else {
                break;
            }
        }
        DegreeDistribution::new(masses)
    }
}

/// The protograph from which cyclic-shift codes are expanded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseGraph {
    k: usize,
    rows: Vec<Vec<usize>>,
}

impl BaseGraph {
    pub fn new(k: usize, rows: Vec<Vec<usize>>) -> Result<BaseGraph, GraphError> {
        for (i, row) in rows.iter().enumerate() {
            if row.is_empty() {
                return Err(GraphError::ZeroDegree);
            }
            if let Some(&bad) = row.iter().find(|&&c| c >= k) {
                return Err(GraphError::IndexOutOfRange {
                    row: i,
                    index: bad,
                    k,
                });
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(GraphError::Malformed(format!(
                    "row {i} is not strictly ascending"
                )));
            }
        }
        Ok(BaseGraph { k, rows })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.len()).collect()
    }

    /// Text format: first line `m K`, then one ascending index list per row.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.m(), self.k);
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<BaseGraph, GraphError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| GraphError::Malformed("empty file".into()))?;
        let mut it = header.split_whitespace();
        let m: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| GraphError::Malformed("bad header".into()))?;
        let k: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| GraphError::Malformed("bad header".into()))?;
        let mut rows = Vec::with_capacity(m);
        for _ in 0..m {
            let line = lines
                .next()
                .ok_or_else(|| GraphError::Malformed("missing row".into()))?;
            let row: Result<Vec<usize>, _> =
                line.split_whitespace().map(|t| t.parse::<usize>()).collect();
            rows.push(row.map_err(|e| GraphError::Malformed(e.to_string()))?);
        }
        if lines.next().is_some() {
            return Err(GraphError::Malformed("trailing content".into()));
        }
        BaseGraph::new(k, rows)
    }

    pub fn save(&self, path: &Path) -> Result<(), GraphError> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<BaseGraph, GraphError> {
        BaseGraph::from_text(&fs::read_to_string(path)?)
    }
}

/// Where a Tanner row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOrigin {
    Random,
    CyclicShift { base_row: usize, shift: usize },
}

/// Bi-adjacency structure of the code: one row per check node (batch).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TannerGraph {
    k: usize,
    rows: Vec<Vec<usize>>,
    origins: Vec<RowOrigin>,
}

impl TannerGraph {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.rows[i]
    }

    pub fn origin(&self, i: usize) -> RowOrigin {
        self.origins[i]
    }

    /// Cyclic-shift layer of row i, if the row has one.
    pub fn layer_of(&self, i: usize) -> Option<usize> {
        match self.origins[i] {
            RowOrigin::CyclicShift { shift, .. } => Some(shift),
            RowOrigin::Random => None,
        }
    }

    /// Check nodes adjacent to the given variable node.
    pub fn neighbors_of_variable(&self, v: usize) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| self.rows[i].binary_search(&v).is_ok())
            .collect()
    }

    /// FNV-1a over the structure, for trace metadata.
    pub fn structure_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: u64| {
            h ^= x;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        };
        eat(self.k as u64);
        eat(self.rows.len() as u64);
        for row in &self.rows {
            eat(row.len() as u64);
            for &c in row {
                eat(c as u64);
            }
        }
        h
    }
}

/// Derive the `m` base-graph row degrees that mimic the renormalized
/// top-m masses of `psi`: degree d appears `gamma_d` times with
/// `gamma_d` rounding `m * psi'_d` up or down and the counts summing
/// to m (degrees repeat when the distribution is concentrated).
/// Returned ascending.
pub fn derive_row_degrees(
    psi: &DegreeDistribution,
    m: usize,
) -> Result<Vec<usize>, GraphError> {
    assert!(m >= 1);
    let top = psi.top_m_renormalized(m)?;
    // Largest-remainder apportionment of m slots.
    let mut counts: Vec<(usize, usize, f64)> = Vec::new(); // (degree, floor, frac)
    let mut assigned = 0usize;
    for d in 1..=top.max_degree() {
        let p = top.mass(d);
        if p > 0.0 {
            let exact = m as f64 * p;
            let fl = exact.floor() as usize;
            assigned += fl;
            counts.push((d, fl, exact - fl as f64));
        }
    }
    let mut leftover = m - assigned;
    // Hand leftovers to the largest fractional parts; ties go to the
    // larger degree so the outcome is deterministic.
    counts.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(b.0.cmp(&a.0)));
    for entry in counts.iter_mut() {
        if leftover == 0 {
            break;
        }
        entry.1 += 1;
        leftover -= 1;
    }
    let mut degrees = Vec::with_capacity(m);
    for &(d, count, _) in &counts {
        degrees.extend(std::iter::repeat_n(d, count));
    }
    degrees.sort_unstable();
    debug_assert_eq!(degrees.len(), m);
    Ok(degrees)
}

/// Tie-break rule for the greedy column-degree design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieBreak {
    /// Pick uniformly among the tied columns (the default behaviour).
    Random,
    /// Always pick the lowest index; fully deterministic.
    LowestIndex,
}

/// Greedy column-degree design: for each requested row degree, in input
/// order, select the columns with the currently smallest column degrees.
pub fn design_base_graph(
    degrees: &[usize],
    k: usize,
    tie_break: TieBreak,
    rng: &mut impl Rng,
) -> Result<BaseGraph, GraphError> {
    for &d in degrees {
        if d == 0 {
            return Err(GraphError::ZeroDegree);
        }
        if d > k {
            return Err(GraphError::DegreeTooLarge { degree: d, k });
        }
    }
    let mut col_degree = vec![0usize; k];
    let mut rows = Vec::with_capacity(degrees.len());
    let mut order: Vec<usize> = (0..k).collect();
    for &d in degrees {
        match tie_break {
            TieBreak::LowestIndex => {
                order.sort_by_key(|&c| (col_degree[c], c));
            }
            TieBreak::Random => {
                let mut keys: Vec<u64> = vec![0; k];
                for key in keys.iter_mut() {
                    *key = rng.gen();
                }
                order.sort_by_key(|&c| (col_degree[c], keys[c]));
            }
        }
        let mut row: Vec<usize> = order[..d].to_vec();
        for &c in &row {
            col_degree[c] += 1;
        }
        row.sort_unstable();
        rows.push(row);
    }
    BaseGraph::new(k, rows)
}

/// Expand a base graph to `n` check nodes: row i is base row `i mod m`
/// right-cyclic-shifted by `i / m` positions; the shift count is the
/// row's layer.
pub fn expand_cs(base: &BaseGraph, n: usize) -> TannerGraph {
    let m = base.m();
    let k = base.k();
    let mut rows = Vec::with_capacity(n);
    let mut origins = Vec::with_capacity(n);
    for i in 0..n {
        let shift = i / m;
        let base_row = i % m;
        let mut row: Vec<usize> = base.rows()[base_row]
            .iter()
            .map(|&c| (c + shift) % k)
            .collect();
        row.sort_unstable();
        rows.push(row);
        origins.push(RowOrigin::CyclicShift { base_row, shift });
    }
    TannerGraph { k, rows, origins }
}

/// Classical random construction: each row's degree is an i.i.d. draw
/// from `psi` and its support is a uniform subset of that size.
pub fn random_tanner(
    psi: &DegreeDistribution,
    k: usize,
    n: usize,
    rng: &mut impl Rng,
) -> TannerGraph {
    assert!(
        (1..=k.min(psi.max_degree())).any(|d| psi.mass(d) > 0.0),
        "degree distribution has no mass at degrees <= K"
    );
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let mut d = psi.sample(rng);
        while d > k {
            d = psi.sample(rng);
        }
        let mut row = rand::seq::index::sample(rng, k, d).into_vec();
        row.sort_unstable();
        rows.push(row);
    }
    TannerGraph {
        k,
        rows,
        origins: vec![RowOrigin::Random; n],
    }
}

/// Build a Tanner graph directly from explicit rows (toy instances,
/// tests, dependence experiments).
pub fn tanner_from_rows(k: usize, rows: Vec<Vec<usize>>) -> Result<TannerGraph, GraphError> {
    let n = rows.len();
    let base = BaseGraph::new(k, rows)?; // reuse validation
    Ok(TannerGraph {
        k,
        rows: base.rows,
        origins: vec![RowOrigin::Random; n],
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphMetrics {
    pub edge_count: usize,
    pub max_row_degree: usize,
    pub column_degrees: Vec<usize>,
}

pub fn graph_metrics(t: &TannerGraph) -> GraphMetrics {
    let mut column_degrees = vec![0usize; t.k()];
    let mut edge_count = 0;
    let mut max_row_degree = 0;
    for row in t.rows() {
        edge_count += row.len();
        max_row_degree = max_row_degree.max(row.len());
        for &c in row {
            column_degrees[c] += 1;
        }
    }
    GraphMetrics {
        edge_count,
        max_row_degree,
        column_degrees,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn distribution_validation() {
        assert!(DegreeDistribution::new(vec![]).is_err());
        assert!(matches!(
            DegreeDistribution::new(vec![0.5, -0.1, 0.6]),
            Err(GraphError::NegativeMass { degree: 2 })
        ));
        assert!(matches!(
            DegreeDistribution::new(vec![0.5, 0.4]),
            Err(GraphError::NotNormalized { .. })
        ));
        let d = DegreeDistribution::new(vec![0.25, 0.75]).unwrap();
        assert_eq!(d.max_degree(), 2);
        assert!((d.mean_degree() - 1.75).abs() < 1e-12);
    }

    #[test]
    fn top_m_renormalization() {
        // {2: 0.5, 3: 0.3, 4: 0.2}, m=2 -> {2: 0.625, 3: 0.375}
        let psi = DegreeDistribution::from_pairs(&[(2, 0.5), (3, 0.3), (4, 0.2)]).unwrap();
        let top = psi.top_m_renormalized(2).unwrap();
        assert!((top.mass(2) - 0.625).abs() < 1e-12);
        assert!((top.mass(3) - 0.375).abs() < 1e-12);
        assert_eq!(top.mass(4), 0.0);
        // m >= nonzero count leaves the distribution unchanged.
        for m in [3, 4, 10] {
            let same = psi.top_m_renormalized(m).unwrap();
            for d in 1..=4 {
                assert!((same.mass(d) - psi.mass(d)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn derive_degrees_degenerate_and_exact() {
        // All mass on one degree: gamma_5 = m, so the degree repeats.
        let psi = DegreeDistribution::degenerate(5);
        assert_eq!(derive_row_degrees(&psi, 3).unwrap(), vec![5, 5, 5]);
        let psi2 = DegreeDistribution::from_pairs(&[(4, 0.5), (8, 0.5)]).unwrap();
        assert_eq!(derive_row_degrees(&psi2, 2).unwrap(), vec![4, 8]);
    }

    #[test]
    fn derive_degrees_apportionment() {
        let spread =
            DegreeDistribution::from_pairs(&[(3, 0.5), (7, 0.25), (9, 0.25)]).unwrap();
        let degrees = derive_row_degrees(&spread, 4).unwrap();
        assert_eq!(degrees, vec![3, 3, 7, 9]);
    }

    #[test]
    fn derive_degrees_sum_matches_m() {
        let psi = DegreeDistribution::from_pairs(&[
            (2, 0.17),
            (3, 0.22),
            (5, 0.31),
            (8, 0.18),
            (13, 0.12),
        ])
        .unwrap();
        for m in 1..=5 {
            let degrees = derive_row_degrees(&psi, m).unwrap();
            assert_eq!(degrees.len(), m);
            // Each count is floor or ceil of m * psi'_d.
            let top = psi.top_m_renormalized(m).unwrap();
            for d in 1..=top.max_degree() {
                let c = degrees.iter().filter(|&&x| x == d).count();
                if top.mass(d) > 0.0 {
                    let exact = m as f64 * top.mass(d);
                    assert!(
                        c == exact.floor() as usize || c == exact.ceil() as usize,
                        "degree {d}: count {c}, exact {exact}"
                    );
                } else {
                    assert_eq!(c, 0);
                }
            }
        }
    }

    #[test]
    fn design_full_row() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let g = design_base_graph(&[4], 4, TieBreak::LowestIndex, &mut rng).unwrap();
        assert_eq!(g.rows()[0], vec![0, 1, 2, 3]);
    }

    #[test]
    fn design_lowest_index_forced() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let g = design_base_graph(&[1, 1], 4, TieBreak::LowestIndex, &mut rng).unwrap();
        assert_eq!(g.rows()[0], vec![0]);
        assert_eq!(g.rows()[1], vec![1]);
    }

    #[test]
    fn design_balances_columns() {
        // Hand-traced greedy run: rows {0,1}, {0,2}, {1,2}; all column
        // degrees end at 2.
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let g = design_base_graph(&[2, 2, 2], 3, TieBreak::LowestIndex, &mut rng).unwrap();
        assert_eq!(g.rows()[0], vec![0, 1]);
        assert_eq!(g.rows()[1], vec![0, 2]);
        assert_eq!(g.rows()[2], vec![1, 2]);
        let t = expand_cs(&g, 3);
        let metrics = graph_metrics(&t);
        assert_eq!(metrics.column_degrees, vec![2, 2, 2]);
    }

    #[test]
    fn design_never_skips_a_smaller_degree_column() {
        // After each row placement no selected column may have had a
        // strictly smaller-degree unselected alternative.
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let degrees = [3, 5, 2, 7, 4, 6];
        for tie in [TieBreak::LowestIndex, TieBreak::Random] {
            let mut col_degree = [0usize; 11];
            let g = design_base_graph(&degrees, 11, tie, &mut rng).unwrap();
            for row in g.rows() {
                let max_sel = row.iter().map(|&c| col_degree[c]).max().unwrap();
                let min_unsel = (0..11)
                    .filter(|c| !row.contains(c))
                    .map(|c| col_degree[c])
                    .min()
                    .unwrap_or(usize::MAX);
                assert!(max_sel <= min_unsel);
                for &c in row {
                    col_degree[c] += 1;
                }
            }
        }
    }

    #[test]
    fn design_rejects_oversized_degree() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        assert!(matches!(
            design_base_graph(&[5], 4, TieBreak::LowestIndex, &mut rng),
            Err(GraphError::DegreeTooLarge { .. })
        ));
    }

    #[test]
    fn expand_identity_layer() {
        let base = BaseGraph::new(6, vec![vec![0, 2], vec![1, 5]]).unwrap();
        let t = expand_cs(&base, 2);
        assert_eq!(t.rows(), base.rows());
        assert_eq!(t.layer_of(0), Some(0));
    }

    #[test]
    fn expand_cyclic_period() {
        let base = BaseGraph::new(5, vec![vec![0, 3], vec![1, 2]]).unwrap();
        let m = base.m();
        let k = base.k();
        let t = expand_cs(&base, m * (k + 1));
        // Layer K rows equal layer 0 rows: shifting by K is the identity.
        for r in 0..m {
            assert_eq!(t.row(k * m + r), t.row(r));
        }
    }

    #[test]
    fn expand_preserves_row_degrees() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let degrees = vec![2, 3, 4];
        let base = design_base_graph(&degrees, 9, TieBreak::Random, &mut rng).unwrap();
        let t = expand_cs(&base, 17);
        for i in 0..t.n() {
            assert_eq!(t.row(i).len(), degrees[i % 3]);
        }
    }

    #[test]
    fn cs7_preset_edge_counts_are_exact() {
        let base = presets::cs7_base_graph();
        for (n, expect) in [(16, 257), (18, 285), (20, 324), (22, 362), (24, 388)] {
            let t = expand_cs(&base, n);
            assert_eq!(graph_metrics(&t).edge_count, expect);
        }
    }

    #[test]
    fn equal_protection_at_full_period() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let degrees = vec![2, 3];
        let k = 7;
        let base = design_base_graph(&degrees, k, TieBreak::Random, &mut rng).unwrap();
        let m = base.m();
        let edge_sum: usize = degrees.iter().sum();
        for period in [1, 2] {
            let n = period * m * k;
            let t = expand_cs(&base, n);
            let metrics = graph_metrics(&t);
            // Every column is selected the same number of times.
            for &cd in &metrics.column_degrees {
                assert_eq!(cd, period * edge_sum);
            }
        }
        // Away from a full period the deviation is strictly positive for
        // this base graph, shrinking again at the next multiple.
        let t = expand_cs(&base, m * k / 2);
        let metrics = graph_metrics(&t);
        let n = (m * k / 2) as f64;
        let target = edge_sum as f64 / (m * k) as f64;
        let dev = metrics
            .column_degrees
            .iter()
            .map(|&cd| (cd as f64 / n - target).abs())
            .fold(0.0f64, f64::max);
        assert!(dev > 0.0);
    }

    #[test]
    fn random_tanner_degenerate_and_empty() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let psi = DegreeDistribution::degenerate(4);
        let t = random_tanner(&psi, 4, 3, &mut rng);
        for i in 0..3 {
            assert_eq!(t.row(i), &[0, 1, 2, 3]);
        }
        let empty = random_tanner(&psi, 4, 0, &mut rng);
        assert_eq!(empty.n(), 0);
        let metrics = graph_metrics(&empty);
        assert_eq!(metrics.edge_count, 0);
        assert_eq!(metrics.max_row_degree, 0);
        assert!(metrics.column_degrees.iter().all(|&c| c == 0));
    }

    #[test]
    fn random_tanner_mean_edges_match_distribution() {
        // The shipped distribution determines the expected edge count
        // directly: E[edges] = N * E[degree]. Monte Carlo over 2000 seeds
        // must agree within 4 sigma.
        let psi = presets::default_degree_distribution();
        let n = 20;
        let seeds = 2000u64;
        let mut total = 0usize;
        let mut totalsq = 0f64;
        for s in 0..seeds {
            let mut rng = ChaCha12Rng::seed_from_u64(s);
            let t = random_tanner(&psi, 256, n, &mut rng);
            let e = graph_metrics(&t).edge_count;
            total += e;
            totalsq += (e * e) as f64;
        }
        let mean = total as f64 / seeds as f64;
        let var = totalsq / seeds as f64 - mean * mean;
        let expected = n as f64 * psi.mean_degree();
        let sigma_mean = (var / seeds as f64).sqrt();
        assert!(
            (mean - expected).abs() < 4.0 * sigma_mean,
            "mean {mean}, expected {expected}, sigma {sigma_mean}"
        );
    }

    #[test]
    fn base_graph_round_trip() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let g = design_base_graph(&[3, 4, 5], 12, TieBreak::Random, &mut rng).unwrap();
        let text = g.to_text();
        let back = BaseGraph::from_text(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn base_graph_rejects_malformed() {
        assert!(BaseGraph::from_text("").is_err());
        assert!(BaseGraph::from_text("1 4\n3 1\n").is_err()); // not ascending
        assert!(BaseGraph::from_text("1 4\n0 9\n").is_err()); // out of range
        assert!(BaseGraph::from_text("2 4\n0 1\n").is_err()); // missing row
    }
}
