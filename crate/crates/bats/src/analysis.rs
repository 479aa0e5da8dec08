//! Dependence diagnostics for decodability indicators.
//!
//! Every check node and variable node gets a Bernoulli indicator per
//! decoding trial: did it ever become decodable. Monte Carlo traces over
//! a fixed Tanner graph feed Pearson correlations, the two-check-node
//! expectation formula, the conditional-probability inequality check,
//! and the decodable-probability bound check. All verdicts are
//! statistical: Wilson intervals with a three-sigma slack, reported
//! rather than silently coerced.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{transmit, ChannelConfig};
use crate::codec::{
    bp_decode, encode, inactivation_decode, layered_decode, CoefficientMode, SourceBlock,
};
use crate::graph::TannerGraph;
use crate::seed;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("series have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least two samples")]
    TooFewSamples,
    #[error("Pearson correlation is undefined for a constant series")]
    NotApplicable,
    #[error("alpha must lie in (0, 1], got {0}")]
    AlphaOutOfRange(f64),
    #[error("rho must lie in [0, 1], got {0}")]
    RhoOutOfRange(f64),
    #[error("variable node {0} has no neighboring check node")]
    NoNeighbors(usize),
    #[error("conditioning event occurred only {observed} times (need {required})")]
    ConditioningTooRare { observed: usize, required: usize },
    #[error("index {0} conditions on itself")]
    SelfConditioning(usize),
    #[error("node index {index} out of range ({limit})")]
    IndexOutOfRange { index: usize, limit: usize },
    #[error("malformed trace file: {0}")]
    Malformed(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for AnalysisError {
    fn from(e: std::io::Error) -> Self {
        AnalysisError::Io(e.to_string())
    }
}

/// Which decoder produced a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderKind {
    Bp,
    Inactivation,
    /// Layered decoding over a base graph with this many rows.
    Layered { m: usize },
}

impl DecoderKind {
    pub fn name(self) -> String {
        match self {
            DecoderKind::Bp => "bp".into(),
            DecoderKind::Inactivation => "inactivation".into(),
            DecoderKind::Layered { m } => format!("layered:{m}"),
        }
    }

    fn parse(text: &str) -> Result<DecoderKind, AnalysisError> {
        match text {
            "bp" => Ok(DecoderKind::Bp),
            "inactivation" => Ok(DecoderKind::Inactivation),
            other => {
                if let Some(m) = other.strip_prefix("layered:") {
                    let m = m
                        .parse()
                        .map_err(|_| AnalysisError::Malformed(format!("bad decoder {other}")))?;
                    Ok(DecoderKind::Layered { m })
                } else {
                    Err(AnalysisError::Malformed(format!("bad decoder {other}")))
                }
            }
        }
    }
}

/// Provenance of a trace: enough to reproduce or compare runs.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMetadata {
    pub graph_hash: u64,
    pub channel: ChannelConfig,
    pub decoder: DecoderKind,
    pub coefficient_mode: CoefficientMode,
    pub master_seed: u64,
    pub pk: usize,
}

/// T trials of per-node decodability indicators over one fixed graph.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorTrace {
    trials: usize,
    n: usize,
    k: usize,
    cn: Vec<bool>, // trials x n, row-major
    vn: Vec<bool>, // trials x k, row-major
    pub metadata: TraceMetadata,
}

impl IndicatorTrace {
    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn cn(&self, trial: usize, node: usize) -> bool {
        self.cn[trial * self.n + node]
    }

    pub fn vn(&self, trial: usize, node: usize) -> bool {
        self.vn[trial * self.k + node]
    }

    /// Column of check-node indicators over all trials.
    pub fn cn_series(&self, node: usize) -> Vec<bool> {
        (0..self.trials).map(|t| self.cn(t, node)).collect()
    }

    pub fn vn_series(&self, node: usize) -> Vec<bool> {
        (0..self.trials).map(|t| self.vn(t, node)).collect()
    }

    /// Empirical decodable probability of one check node.
    pub fn alpha(&self, node: usize) -> f64 {
        let hits = (0..self.trials).filter(|&t| self.cn(t, node)).count();
        hits as f64 / self.trials as f64
    }

    pub fn beta(&self, node: usize) -> f64 {
        let hits = (0..self.trials).filter(|&t| self.vn(t, node)).count();
        hits as f64 / self.trials as f64
    }

    /// Serialize: text header, blank line, then bit-packed indicator
    /// blocks (cn then vn, one row per trial, LSB-first within bytes).
    pub fn save(&self, path: &Path) -> Result<(), AnalysisError> {
        let mut out = Vec::new();
        let c = &self.metadata.channel;
        writeln!(out, "batstrace 1")?;
        writeln!(out, "trials {} n {} k {}", self.trials, self.n, self.k)?;
        writeln!(out, "graph_hash {}", self.metadata.graph_hash)?;
        writeln!(
            out,
            "channel hops {} loss {} batch_size {} recode {}",
            c.hops, c.loss, c.batch_size, c.recode_at_intermediate
        )?;
        writeln!(out, "decoder {}", self.metadata.decoder.name())?;
        writeln!(out, "coefficient_mode {}", self.metadata.coefficient_mode.name())?;
        writeln!(out, "master_seed {}", self.metadata.master_seed)?;
        writeln!(out, "pk {}", self.metadata.pk)?;
        writeln!(out)?;
        pack_bits(&mut out, &self.cn, self.trials, self.n);
        pack_bits(&mut out, &self.vn, self.trials, self.k);
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<IndicatorTrace, AnalysisError> {
        let bytes = fs::read(path)?;
        let header_end = bytes
            .windows(2)
            .position(|w| w == b"\n\n")
            .ok_or_else(|| AnalysisError::Malformed("missing header terminator".into()))?;
        let header = std::str::from_utf8(&bytes[..header_end])
            .map_err(|e| AnalysisError::Malformed(e.to_string()))?;
        let mut fields = std::collections::HashMap::new();
        let mut lines = header.lines();
        let magic = lines.next().unwrap_or_default();
        if magic != "batstrace 1" {
            return Err(AnalysisError::Malformed(format!("bad magic: {magic}")));
        }
        for line in lines {
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match tokens.as_slice() {
                ["trials", t, "n", n, "k", k] => {
                    fields.insert("trials", t.to_string());
                    fields.insert("n", n.to_string());
                    fields.insert("k", k.to_string());
                }
                ["channel", "hops", h, "loss", l, "batch_size", m, "recode", r] => {
                    fields.insert("hops", h.to_string());
                    fields.insert("loss", l.to_string());
                    fields.insert("batch_size", m.to_string());
                    fields.insert("recode", r.to_string());
                }
                [key, value] => {
                    fields.insert(
                        match *key {
                            "graph_hash" => "graph_hash",
                            "decoder" => "decoder",
                            "coefficient_mode" => "coefficient_mode",
                            "master_seed" => "master_seed",
                            "pk" => "pk",
                            other => {
                                return Err(AnalysisError::Malformed(format!(
                                    "unknown field {other}"
                                )))
                            }
                        },
                        value.to_string(),
                    );
                }
                _ => return Err(AnalysisError::Malformed(format!("bad line: {line}"))),
            }
        }
        let get = |key: &str| -> Result<&String, AnalysisError> {
            fields
                .get(key)
                .ok_or_else(|| AnalysisError::Malformed(format!("missing field {key}")))
        };
        let parse_usize = |key: &str| -> Result<usize, AnalysisError> {
            get(key)?
                .parse()
                .map_err(|_| AnalysisError::Malformed(format!("bad {key}")))
        };
        let trials = parse_usize("trials")?;
        let n = parse_usize("n")?;
        let k = parse_usize("k")?;
        let mut channel = ChannelConfig::new(
            parse_usize("hops")?,
            get("loss")?
                .parse()
                .map_err(|_| AnalysisError::Malformed("bad loss".into()))?,
            parse_usize("batch_size")?,
        )
        .map_err(|e| AnalysisError::Malformed(e.to_string()))?;
        if get("recode")? == "false" {
            channel = channel.without_recoding();
        }
        let decoder = DecoderKind::parse(get("decoder")?)?;
        let coefficient_mode = match get("coefficient_mode")?.as_str() {
            "uniform" => CoefficientMode::UniformAll,
            "nonzero" => CoefficientMode::NonzeroOnly,
            other => return Err(AnalysisError::Malformed(format!("bad mode {other}"))),
        };
        let metadata = TraceMetadata {
            graph_hash: get("graph_hash")?
                .parse()
                .map_err(|_| AnalysisError::Malformed("bad graph_hash".into()))?,
            channel,
            decoder,
            coefficient_mode,
            master_seed: get("master_seed")?
                .parse()
                .map_err(|_| AnalysisError::Malformed("bad master_seed".into()))?,
            pk: parse_usize("pk")?,
        };
        let body = &bytes[header_end + 2..];
        let cn_bytes = trials * n.div_ceil(8);
        let vn_bytes = trials * k.div_ceil(8);
        if body.len() != cn_bytes + vn_bytes {
            return Err(AnalysisError::Malformed(format!(
                "body is {} bytes, expected {}",
                body.len(),
                cn_bytes + vn_bytes
            )));
        }
        let cn = unpack_bits(&body[..cn_bytes], trials, n);
        let vn = unpack_bits(&body[cn_bytes..], trials, k);
        Ok(IndicatorTrace {
            trials,
            n,
            k,
            cn,
            vn,
            metadata,
        })
    }
}

fn pack_bits(out: &mut Vec<u8>, bits: &[bool], rows: usize, cols: usize) {
    let stride = cols.div_ceil(8);
    for r in 0..rows {
        let mut row = vec![0u8; stride];
        for c in 0..cols {
            if bits[r * cols + c] {
                row[c / 8] |= 1 << (c % 8);
            }
        }
        out.extend_from_slice(&row);
    }
}

fn unpack_bits(bytes: &[u8], rows: usize, cols: usize) -> Vec<bool> {
    let stride = cols.div_ceil(8);
    let mut bits = vec![false; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            if bytes[r * stride + c / 8] & (1 << (c % 8)) != 0 {
                bits[r * cols + c] = true;
            }
        }
    }
    bits
}

/// Run T independent encode -> transmit -> decode trials on one fixed
/// graph and record the decodability indicators. Payload content does
/// not influence decodability, so trials use a zero source block with
/// the given symbol size.
pub fn collect_trace(
    t: &TannerGraph,
    cfg: &ChannelConfig,
    decoder: DecoderKind,
    trials: usize,
    pk: usize,
    mode: CoefficientMode,
    master_seed: u64,
) -> IndicatorTrace {
    assert!(trials >= 1);
    let n = t.n();
    let k = t.k();
    let src = SourceBlock::zeros(k, pk);
    let per_trial: Vec<(Vec<bool>, Vec<bool>)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed::derive(
                master_seed,
                &[seed::STAGE_TRACE, trial as u64],
            ));
            let batches = encode(&src, t, cfg.batch_size, mode, &mut rng);
            let received: Vec<_> = batches
                .into_iter()
                .map(|b| transmit(b, cfg, &mut rng))
                .collect();
            let result = match decoder {
                DecoderKind::Bp => bp_decode(&received, k),
                DecoderKind::Inactivation => inactivation_decode(&received, k),
                DecoderKind::Layered { m } => {
                    layered_decode(&received, k, m)
                        .expect("layered trace on a layered graph")
                        .result
                }
            };
            (result.cn_indicator, result.vn_indicator)
        })
        .collect();
    let mut cn = Vec::with_capacity(trials * n);
    let mut vn = Vec::with_capacity(trials * k);
    for (c, v) in per_trial {
        cn.extend(c);
        vn.extend(v);
    }
    IndicatorTrace {
        trials,
        n,
        k,
        cn,
        vn,
        metadata: TraceMetadata {
            graph_hash: t.structure_hash(),
            channel: *cfg,
            decoder,
            coefficient_mode: mode,
            master_seed,
            pk,
        },
    }
}

/// Sample Pearson correlation of two boolean series. Undefined (and
/// reported as such) when either series is constant.
pub fn pearson(x: &[bool], y: &[bool]) -> Result<f64, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(AnalysisError::TooFewSamples);
    }
    let t = x.len() as f64;
    let mx = x.iter().filter(|&&b| b).count() as f64 / t;
    let my = y.iter().filter(|&&b| b).count() as f64 / t;
    let mxy = x
        .iter()
        .zip(y)
        .filter(|&(&a, &b)| a && b)
        .count() as f64
        / t;
    let var_x = mx * (1.0 - mx);
    let var_y = my * (1.0 - my);
    if var_x == 0.0 || var_y == 0.0 {
        return Err(AnalysisError::NotApplicable);
    }
    Ok((mxy - mx * my) / (var_x * var_y).sqrt())
}

/// E[V] for a variable node with two neighboring check nodes of
/// decodable probabilities `alpha1`, `alpha2` and correlation `rho`:
/// `a1 + a2 - a1*a2 - rho*sqrt(a1(1-a1)a2(1-a2))`. Negative rho is
/// rejected as physically invalid here.
pub fn expected_v(alpha1: f64, alpha2: f64, rho: f64) -> Result<f64, AnalysisError> {
    for a in [alpha1, alpha2] {
        if !(a > 0.0 && a <= 1.0) {
            return Err(AnalysisError::AlphaOutOfRange(a));
        }
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(AnalysisError::RhoOutOfRange(rho));
    }
    Ok(alpha1 + alpha2 - alpha1 * alpha2
        - rho * (alpha1 * (1.0 - alpha1) * alpha2 * (1.0 - alpha2)).sqrt())
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    assert!(trials > 0);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * ((p * (1.0 - p) + z2 / (4.0 * n)) / n).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

fn standard_error(p: f64, trials: usize) -> f64 {
    // Floor the variance at one pseudo-count so degenerate estimates
    // still carry nonzero width.
    let n = trials as f64;
    let var = (p * (1.0 - p)).max(1.0 / n);
    (var / n).sqrt()
}

/// Decodable-probability bound report for one variable node: empirical
/// P(V=1) against `1 - min_i P(C_i=0)` (lower) and
/// `1 - prod_i P(C_i=0)` (upper).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub vn: usize,
    pub neighbors: Vec<usize>,
    pub p_v: f64,
    pub lower: f64,
    pub upper: f64,
    pub v_ci: (f64, f64),
    pub lower_ci: (f64, f64),
    pub upper_ci: (f64, f64),
    /// P(V) within [lower - 3 sigma, upper + 3 sigma].
    pub satisfied: bool,
    /// The bound derivation assumes pure peeling, where a variable
    /// decodes exactly when a neighboring check node does. Traces from
    /// inactivation-style decoders recover variables through back
    /// substitution as well, so their reports carry this caveat.
    pub peeling_assumption_holds: bool,
}

pub fn bounds_check(
    trace: &IndicatorTrace,
    graph: &TannerGraph,
    vn: usize,
) -> Result<BoundReport, AnalysisError> {
    if vn >= trace.k() {
        return Err(AnalysisError::IndexOutOfRange {
            index: vn,
            limit: trace.k(),
        });
    }
    let neighbors = graph.neighbors_of_variable(vn);
    if neighbors.is_empty() {
        return Err(AnalysisError::NoNeighbors(vn));
    }
    let t = trace.trials();
    let alphas: Vec<f64> = neighbors.iter().map(|&c| trace.alpha(c)).collect();
    let p_v = trace.beta(vn);
    let lower = alphas.iter().cloned().fold(0.0f64, f64::max);
    let upper = 1.0 - alphas.iter().map(|a| 1.0 - a).product::<f64>();

    let v_hits = (p_v * t as f64).round() as usize;
    let v_ci = wilson_interval(v_hits, t, 1.96);
    let argmax = alphas
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let lower_hits = (alphas[argmax] * t as f64).round() as usize;
    let lower_ci = wilson_interval(lower_hits, t, 1.96);
    // The upper bound is monotone in every alpha; push each one to its
    // own Wilson endpoints.
    let per_alpha_ci: Vec<(f64, f64)> = alphas
        .iter()
        .map(|&a| wilson_interval((a * t as f64).round() as usize, t, 1.96))
        .collect();
    let upper_ci = (
        1.0 - per_alpha_ci.iter().map(|c| 1.0 - c.0).product::<f64>(),
        1.0 - per_alpha_ci.iter().map(|c| 1.0 - c.1).product::<f64>(),
    );

    let se_v = standard_error(p_v, t);
    let se_lower = standard_error(alphas[argmax], t);
    // Delta-method error for the product of complements.
    let var_upper: f64 = alphas
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let others: f64 = alphas
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &b)| 1.0 - b)
                .product();
            let var = (a * (1.0 - a)).max(1.0 / t as f64) / t as f64;
            others * others * var
        })
        .sum();
    let se_upper = var_upper.sqrt();

    let slack_low = 3.0 * (se_v * se_v + se_lower * se_lower).sqrt();
    let slack_high = 3.0 * (se_v * se_v + se_upper * se_upper).sqrt();
    let satisfied = p_v >= lower - slack_low && p_v <= upper + slack_high;

    Ok(BoundReport {
        vn,
        neighbors,
        p_v,
        lower,
        upper,
        v_ci,
        lower_ci,
        upper_ci,
        satisfied,
        peeling_assumption_holds: trace.metadata.decoder == DecoderKind::Bp,
    })
}

/// Conditional-probability report: P(C_i=0) against
/// P(C_i=0 | C_j=0 for j in the conditioning set).
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalReport {
    pub i: usize,
    pub conditioning: Vec<usize>,
    pub conditioning_count: usize,
    pub p_unconditional: f64,
    pub p_conditional: f64,
    pub unconditional_ci: (f64, f64),
    pub conditional_ci: (f64, f64),
    /// True when the inequality fails beyond the 95% intervals, i.e.
    /// the unconditional probability sits above the conditional one.
    pub violated: bool,
}

const MIN_CONDITIONING_EVENTS: usize = 100;

pub fn conditional_check(
    trace: &IndicatorTrace,
    i: usize,
    conditioning: &[usize],
) -> Result<ConditionalReport, AnalysisError> {
    if i >= trace.n() {
        return Err(AnalysisError::IndexOutOfRange {
            index: i,
            limit: trace.n(),
        });
    }
    if let Some(&bad) = conditioning.iter().find(|&&j| j >= trace.n()) {
        return Err(AnalysisError::IndexOutOfRange {
            index: bad,
            limit: trace.n(),
        });
    }
    if conditioning.contains(&i) {
        return Err(AnalysisError::SelfConditioning(i));
    }
    let t = trace.trials();
    let mut cond_events = 0usize;
    let mut cond_zero = 0usize;
    let mut total_zero = 0usize;
    for trial in 0..t {
        let ci = trace.cn(trial, i);
        if !ci {
            total_zero += 1;
        }
        if conditioning.iter().all(|&j| !trace.cn(trial, j)) {
            cond_events += 1;
            if !ci {
                cond_zero += 1;
            }
        }
    }
    if !conditioning.is_empty() && cond_events < MIN_CONDITIONING_EVENTS {
        return Err(AnalysisError::ConditioningTooRare {
            observed: cond_events,
            required: MIN_CONDITIONING_EVENTS,
        });
    }
    let p_unconditional = total_zero as f64 / t as f64;
    let (p_conditional, conditional_ci) = if conditioning.is_empty() {
        (
            p_unconditional,
            wilson_interval(total_zero, t, 1.96),
        )
    } else {
        (
            cond_zero as f64 / cond_events as f64,
            wilson_interval(cond_zero, cond_events, 1.96),
        )
    };
    let unconditional_ci = wilson_interval(total_zero, t, 1.96);
    let violated = unconditional_ci.0 > conditional_ci.1;
    Ok(ConditionalReport {
        i,
        conditioning: conditioning.to_vec(),
        conditioning_count: cond_events,
        p_unconditional,
        p_conditional,
        unconditional_ci,
        conditional_ci,
        violated,
    })
}

/// 2x2 joint frequency table of two check-node indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    /// counts[a][b] = occurrences of (C_i = a, C_j = b).
    pub counts: [[usize; 2]; 2],
    /// Sample correlation; None when a series is constant.
    pub rho: Option<f64>,
    /// Correlation negative beyond the CLT band 3/sqrt(T): one node
    /// being undecodable cannot help another, so this marks a bug or a
    /// mislabeled trace rather than physics.
    pub negative_anomaly: bool,
}

impl JointTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ci,cj,count\n");
        for a in 0..2 {
            for b in 0..2 {
                out.push_str(&format!("{a},{b},{}\n", self.counts[a][b]));
            }
        }
        out
    }
}

pub fn correlation_heatmap(
    trace: &IndicatorTrace,
    i: usize,
    j: usize,
) -> Result<JointTable, AnalysisError> {
    for idx in [i, j] {
        if idx >= trace.n() {
            return Err(AnalysisError::IndexOutOfRange {
                index: idx,
                limit: trace.n(),
            });
        }
    }
    let mut counts = [[0usize; 2]; 2];
    for t in 0..trace.trials() {
        counts[trace.cn(t, i) as usize][trace.cn(t, j) as usize] += 1;
    }
    let rho = pearson(&trace.cn_series(i), &trace.cn_series(j)).ok();
    let negative_anomaly =
        rho.is_some_and(|r| r < -3.0 / (trace.trials() as f64).sqrt());
    Ok(JointTable {
        counts,
        rho,
        negative_anomaly,
    })
}
