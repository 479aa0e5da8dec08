//! Multi-hop erasure channel: per-link i.i.d. packet loss with random
//! linear recoding at intermediate nodes, and empirical estimation of
//! the end-to-end rank distribution.
//!
//! A "hop" is a link; `hops` links means `hops - 1` recoding nodes. The
//! destination consumes the surviving columns directly and never
//! recodes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::codec::Batch;
use crate::gf::FieldMatrix;
use crate::seed;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("loss probability {0} is outside [0, 1]")]
    LossOutOfRange(f64),
    #[error("hop count must be at least 1")]
    NoHops,
    #[error("batch size must be at least 1")]
    EmptyBatch,
    #[error("rank distribution sums to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("rank distribution entry {index} is negative")]
    NegativeProbability { index: usize },
    #[error("rank distribution needs at least one entry")]
    Empty,
    #[error("malformed rank distribution: {0}")]
    Malformed(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for ChannelError {
    fn from(e: std::io::Error) -> Self {
        ChannelError::Io(e.to_string())
    }
}

/// End-to-end channel parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    /// Number of links traversed.
    pub hops: usize,
    /// Per-link, per-packet erasure probability.
    pub loss: f64,
    /// Batch size M restored by each recoding.
    pub batch_size: usize,
    /// Recode at the hops-1 intermediate nodes (default true).
    pub recode_at_intermediate: bool,
}

impl ChannelConfig {
    pub fn new(hops: usize, loss: f64, batch_size: usize) -> Result<ChannelConfig, ChannelError> {
        if hops == 0 {
            return Err(ChannelError::NoHops);
        }
        if !(0.0..=1.0).contains(&loss) {
            return Err(ChannelError::LossOutOfRange(loss));
        }
        if batch_size == 0 {
            return Err(ChannelError::EmptyBatch);
        }
        Ok(ChannelConfig {
            hops,
            loss,
            batch_size,
            recode_at_intermediate: true,
        })
    }

    pub fn without_recoding(mut self) -> ChannelConfig {
        self.recode_at_intermediate = false;
        self
    }
}

/// Probabilities h_0..h_M of a received batch having each rank.
#[derive(Debug, Clone, PartialEq)]
pub struct RankDistribution {
    probs: Vec<f64>,
}

const NORMALIZATION_TOL: f64 = 1e-9;

impl RankDistribution {
    pub fn new(probs: Vec<f64>) -> Result<RankDistribution, ChannelError> {
        if probs.is_empty() {
            return Err(ChannelError::Empty);
        }
        if let Some(i) = probs.iter().position(|&p| p < 0.0 || !p.is_finite()) {
            return Err(ChannelError::NegativeProbability { index: i });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(ChannelError::NotNormalized { sum });
        }
        Ok(RankDistribution { probs })
    }

    pub fn batch_size(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn prob(&self, rank: usize) -> f64 {
        self.probs.get(rank).copied().unwrap_or(0.0)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean_rank(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(r, &p)| r as f64 * p)
            .sum()
    }

    /// P(rank <= r) for stochastic-dominance comparisons.
    pub fn cdf(&self, r: usize) -> f64 {
        self.probs.iter().take(r + 1).sum()
    }

    /// One text line of M+1 decimal probabilities.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let cells: Vec<String> = self.probs.iter().map(|p| format!("{p}")).collect();
        let _ = writeln!(out, "{}", cells.join(" "));
        out
    }

    pub fn from_text(text: &str) -> Result<RankDistribution, ChannelError> {
        let line = text
            .lines()
            .find(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .ok_or_else(|| ChannelError::Malformed("no data line".into()))?;
        let probs: Result<Vec<f64>, _> = line.split_whitespace().map(|t| t.parse()).collect();
        RankDistribution::new(probs.map_err(|e: std::num::ParseFloatError| {
            ChannelError::Malformed(e.to_string())
        })?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ChannelError> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RankDistribution, ChannelError> {
        RankDistribution::from_text(&fs::read_to_string(path)?)
    }
}

/// Push one batch through the channel: erase each current column
/// independently on every link, recoding back to M columns at every
/// node except the destination.
pub fn transmit(mut batch: Batch, cfg: &ChannelConfig, rng: &mut impl Rng) -> Batch {
    for hop in 0..cfg.hops {
        let keep: Vec<bool> = (0..batch.received())
            .map(|_| rng.gen::<f64>() >= cfg.loss)
            .collect();
        batch.erase_columns(&keep);
        let is_last = hop + 1 == cfg.hops;
        if !is_last && cfg.recode_at_intermediate {
            batch.recode(cfg.batch_size, rng);
        }
    }
    batch
}

/// Rank-M identity probe: its final coefficient rank is exactly the rank
/// of the accumulated channel transfer product, independent of any outer
/// code.
fn probe_batch(m: usize) -> Batch {
    Batch {
        id: 0,
        variable_indices: (0..m).collect(),
        generator: FieldMatrix::identity(m),
        coeff: FieldMatrix::identity(m),
        payload: FieldMatrix::zeros(0, m),
        layer: None,
    }
}

/// Monte Carlo estimate of the end-to-end rank distribution.
pub fn estimate_rank_distribution(
    cfg: &ChannelConfig,
    trials: usize,
    master_seed: u64,
) -> RankDistribution {
    assert!(trials >= 1);
    let m = cfg.batch_size;
    let ranks: Vec<usize> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng =
                ChaCha12Rng::seed_from_u64(seed::derive(master_seed, &[seed::STAGE_CHANNEL, t as u64]));
            let out = transmit(probe_batch(m), cfg, &mut rng);
            out.coeff.rank()
        })
        .collect();
    let mut histogram = vec![0usize; m + 1];
    for r in ranks {
        histogram[r] += 1;
    }
    let probs = histogram
        .into_iter()
        .map(|c| c as f64 / trials as f64)
        .collect();
    RankDistribution::new(probs).expect("histogram normalizes")
}
