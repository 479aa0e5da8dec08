//! Batch encoding and recoding, plus the three decoders (belief
//! propagation, inactivation, layered) in [`decode`].
//!
//! A batch is one check node's runtime state. It starts as `payload =
//! B_sel * G` with `coeff = G`; every recoding multiplies both by a fresh
//! transfer matrix, so `coeff` always equals the accumulated product the
//! receiver knows and the batch stays solvable exactly when
//! `rank(coeff)` equals its degree.

mod decode;

pub use decode::{
    bp_decode, inactivation_decode, layered_decode, DecodeResult, LayeredDecode, LayeredError,
};

use rand::Rng;

use crate::gf::{FieldMatrix, Gf256};
use crate::graph::TannerGraph;

/// How generator entries are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoefficientMode {
    /// i.i.d. uniform over all 256 field values (default).
    #[default]
    UniformAll,
    /// i.i.d. uniform over the 255 nonzero values.
    NonzeroOnly,
}

impl CoefficientMode {
    pub fn name(self) -> &'static str {
        match self {
            CoefficientMode::UniformAll => "uniform",
            CoefficientMode::NonzeroOnly => "nonzero",
        }
    }

    fn sample_matrix(self, rows: usize, cols: usize, rng: &mut impl Rng) -> FieldMatrix {
        match self {
            CoefficientMode::UniformAll => FieldMatrix::random(rows, cols, rng),
            CoefficientMode::NonzeroOnly => FieldMatrix::random_nonzero(rows, cols, rng),
        }
    }
}

/// The K input symbols, each a vector of `pk` field elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceBlock {
    pk: usize,
    symbols: Vec<Vec<Gf256>>,
}

impl SourceBlock {
    pub fn from_symbols(symbols: Vec<Vec<Gf256>>) -> SourceBlock {
        let pk = symbols.first().map_or(0, |s| s.len());
        assert!(symbols.iter().all(|s| s.len() == pk));
        SourceBlock { pk, symbols }
    }

    pub fn zeros(k: usize, pk: usize) -> SourceBlock {
        SourceBlock {
            pk,
            symbols: vec![vec![Gf256::ZERO; pk]; k],
        }
    }

    pub fn random(k: usize, pk: usize, rng: &mut impl Rng) -> SourceBlock {
        SourceBlock {
            pk,
            symbols: (0..k)
                .map(|_| (0..pk).map(|_| Gf256(rng.gen())).collect())
                .collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.symbols.len()
    }

    pub fn pk(&self) -> usize {
        self.pk
    }

    pub fn symbol(&self, k: usize) -> &[Gf256] {
        &self.symbols[k]
    }

    pub fn is_all_zero(&self) -> bool {
        self.symbols
            .iter()
            .all(|s| s.iter().all(|v| v.is_zero()))
    }

    /// The selected symbols as a pk x d matrix (column j is symbol
    /// `indices[j]`).
    pub fn submatrix(&self, indices: &[usize]) -> FieldMatrix {
        let mut out = FieldMatrix::zeros(self.pk, indices.len());
        for (j, &idx) in indices.iter().enumerate() {
            for p in 0..self.pk {
                out.set(p, j, self.symbols[idx][p]);
            }
        }
        out
    }
}

/// One check node's runtime state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub id: usize,
    /// Selected variable indices, one per coeff row, ascending.
    pub variable_indices: Vec<usize>,
    /// Generator as drawn at the source (degree x M).
    pub generator: FieldMatrix,
    /// Effective coefficient matrix after the channel (degree x m).
    pub coeff: FieldMatrix,
    /// Received coded symbols (pk x m).
    pub payload: FieldMatrix,
    /// Cyclic-shift layer, when the construction has one.
    pub layer: Option<usize>,
}

impl Batch {
    pub fn degree(&self) -> usize {
        self.variable_indices.len()
    }

    /// Number of columns currently carried (received packets).
    pub fn received(&self) -> usize {
        self.coeff.cols()
    }

    /// The rank condition: solvable for all its symbols at once.
    pub fn decodable(&self) -> bool {
        self.coeff.rank() == self.degree()
    }

    /// Multiply payload and coefficients by a transfer matrix.
    pub fn apply_transfer(&mut self, h: &FieldMatrix) {
        self.payload = self.payload.mul(h).expect("transfer shape");
        self.coeff = self.coeff.mul(h).expect("transfer shape");
    }

    /// Random linear recoding into `m_out` fresh packets. A batch that
    /// has lost everything becomes `m_out` zero columns (rank 0) rather
    /// than an error.
    pub fn recode(&mut self, m_out: usize, rng: &mut impl Rng) {
        let m_in = self.coeff.cols();
        if m_in == 0 {
            self.payload = FieldMatrix::zeros(self.payload.rows(), m_out);
            self.coeff = FieldMatrix::zeros(self.coeff.rows(), m_out);
            return;
        }
        let h = FieldMatrix::random(m_in, m_out, rng);
        self.apply_transfer(&h);
    }

    /// Keep only the columns marked true (erasure of the others).
    pub fn erase_columns(&mut self, keep: &[bool]) {
        self.payload = self.payload.filter_columns(keep);
        self.coeff = self.coeff.filter_columns(keep);
    }
}

/// Encode one batch per Tanner row: `payload = B_sel * G` with G drawn
/// per `mode`, `batch_size` columns each.
pub fn encode(
    src: &SourceBlock,
    t: &TannerGraph,
    batch_size: usize,
    mode: CoefficientMode,
    rng: &mut impl Rng,
) -> Vec<Batch> {
    assert_eq!(t.k(), src.k(), "graph and source block disagree on K");
    (0..t.n())
        .map(|i| {
            let row = t.row(i);
            let generator = mode.sample_matrix(row.len(), batch_size, rng);
            batch_from_generator(src, t, i, generator)
        })
        .collect()
}

/// Encode with caller-supplied generator matrices (tests and
/// deterministic fixtures).
pub fn encode_with_generators(
    src: &SourceBlock,
    t: &TannerGraph,
    generators: Vec<FieldMatrix>,
) -> Vec<Batch> {
    assert_eq!(t.k(), src.k());
    assert_eq!(t.n(), generators.len());
    generators
        .into_iter()
        .enumerate()
        .map(|(i, g)| batch_from_generator(src, t, i, g))
        .collect()
}

fn batch_from_generator(
    src: &SourceBlock,
    t: &TannerGraph,
    i: usize,
    generator: FieldMatrix,
) -> Batch {
    let row = t.row(i);
    assert_eq!(generator.rows(), row.len());
    let b_sel = src.submatrix(row);
    let payload = b_sel.mul(&generator).expect("encode shape");
    Batch {
        id: i,
        variable_indices: row.to_vec(),
        coeff: generator.clone(),
        generator,
        payload,
        layer: t.layer_of(i),
    }
}
