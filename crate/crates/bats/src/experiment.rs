//! Reproducible experiment harness: decoding-rate sweeps over hop count
//! and batch count, the base-graph design comparison, and
//! machine-readable outputs (CSV, plot-data series, run metadata).
//!
//! Determinism contract: identical config and master seed give identical
//! result rows; the wall-time column is the one field allowed to vary
//! between runs. Trials fan out across threads but aggregation folds a
//! trial-indexed vector in fixed order, so parallelism never changes the
//! output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{transmit, ChannelConfig, ChannelError};
use crate::codec::{
    bp_decode, encode, inactivation_decode, layered_decode, CoefficientMode, SourceBlock,
};
use crate::gf;
use crate::graph::{
    design_base_graph, expand_cs, graph_metrics, random_tanner, BaseGraph, DegreeDistribution,
    GraphError, TannerGraph, TieBreak,
};
use crate::presets;
use crate::seed;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("q must be 256 (got {0})")]
    UnsupportedFieldOrder(usize),
    #[error("construction {0} requires K = 256")]
    PresetNeedsK256(String),
    #[error("layered decoding needs a cyclic-shift construction")]
    LayeredNeedsLayers,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("distribution: {0}")]
    Distribution(#[from] crate::degree_opt::OptError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Code construction under test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Construction {
    /// Classical random graph from a degree distribution.
    Random,
    /// Shipped designed base graph with 7 rows.
    CsPreset7,
    /// Shipped designed base graph with 8 rows.
    CsPreset8,
    /// Cyclic-shift expansion of a caller-provided base-graph file.
    CsCustom(PathBuf),
    /// Fresh random base graph per instance (preset-7 row degrees).
    CsRandomBase,
    /// Fresh column-degree-designed base graph per instance.
    CsColumnDesigned,
}

impl Construction {
    pub fn name(&self) -> String {
        match self {
            Construction::Random => "random".into(),
            Construction::CsPreset7 => "cs7".into(),
            Construction::CsPreset8 => "cs8".into(),
            Construction::CsCustom(path) => format!("cs:{}", path.display()),
            Construction::CsRandomBase => "cs-random-base".into(),
            Construction::CsColumnDesigned => "cs-column-designed".into(),
        }
    }

    pub fn parse(text: &str) -> Result<Construction, ExperimentError> {
        Ok(match text {
            "random" => Construction::Random,
            "cs7" => Construction::CsPreset7,
            "cs8" => Construction::CsPreset8,
            "cs-random-base" => Construction::CsRandomBase,
            "cs-column-designed" => Construction::CsColumnDesigned,
            other => {
                if let Some(path) = other.strip_prefix("cs:") {
                    Construction::CsCustom(PathBuf::from(path))
                } else {
                    return Err(ExperimentError::BadConfig(format!(
                        "unknown construction `{other}`"
                    )));
                }
            }
        })
    }

    fn id(&self) -> u64 {
        match self {
            Construction::Random => 0,
            Construction::CsPreset7 => 1,
            Construction::CsPreset8 => 2,
            Construction::CsCustom(_) => 3,
            Construction::CsRandomBase => 4,
            Construction::CsColumnDesigned => 5,
        }
    }

    /// Default trial shape: many instances for per-instance
    /// random graphs, many repeats for a fixed designed graph.
    fn default_trials(&self) -> (usize, usize) {
        match self {
            Construction::Random => (2000, 10),
            Construction::CsRandomBase | Construction::CsColumnDesigned => (500, 1),
            _ => (1, 500),
        }
    }

    fn is_fixed_graph(&self) -> bool {
        matches!(
            self,
            Construction::CsPreset7 | Construction::CsPreset8 | Construction::CsCustom(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderChoice {
    Bp,
    Inactivation,
    Layered,
}

impl DecoderChoice {
    pub fn name(self) -> &'static str {
        match self {
            DecoderChoice::Bp => "bp",
            DecoderChoice::Inactivation => "inactivation",
            DecoderChoice::Layered => "layered",
        }
    }

    pub fn parse(text: &str) -> Result<DecoderChoice, ExperimentError> {
        match text {
            "bp" => Ok(DecoderChoice::Bp),
            "inactivation" => Ok(DecoderChoice::Inactivation),
            "layered" => Ok(DecoderChoice::Layered),
            other => Err(ExperimentError::BadConfig(format!(
                "unknown decoder `{other}`"
            ))),
        }
    }
}

/// Full experiment description. File keys match the field names used in
/// the config format: K, pk, M, q, loss, hops, N, construction, decoder,
/// graph_instances, repeats_per_instance, master_seed, output_dir,
/// coefficient_mode, psi_file.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub k: usize,
    pub pk: usize,
    pub batch_size: usize,
    pub q: usize,
    pub loss: f64,
    pub hops: Vec<usize>,
    pub batches: Vec<usize>,
    pub constructions: Vec<Construction>,
    pub decoders: Vec<DecoderChoice>,
    pub graph_instances: Option<usize>,
    pub repeats_per_instance: Option<usize>,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub coefficient_mode: CoefficientMode,
    pub psi_file: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            k: 256,
            pk: 256,
            batch_size: 16,
            q: 256,
            loss: 0.1,
            hops: vec![10],
            batches: vec![20],
            constructions: vec![Construction::CsPreset7],
            decoders: vec![DecoderChoice::Inactivation],
            graph_instances: None,
            repeats_per_instance: None,
            master_seed: 1,
            output_dir: PathBuf::from("out"),
            coefficient_mode: CoefficientMode::UniformAll,
            psi_file: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.q != 256 {
            return Err(ExperimentError::UnsupportedFieldOrder(self.q));
        }
        if self.hops.is_empty() || self.batches.is_empty() {
            return Err(ExperimentError::BadConfig("empty sweep range".into()));
        }
        if self.constructions.is_empty() || self.decoders.is_empty() {
            return Err(ExperimentError::BadConfig(
                "need at least one construction and one decoder".into(),
            ));
        }
        if self.k == 0 || self.batch_size == 0 {
            return Err(ExperimentError::BadConfig("K and M must be positive".into()));
        }
        if self.graph_instances == Some(0) || self.repeats_per_instance == Some(0) {
            return Err(ExperimentError::BadConfig("trial counts must be positive".into()));
        }
        ChannelConfig::new(1, self.loss, self.batch_size)?;
        Ok(())
    }

    /// Parse the flat key-value config format. Unknown keys are errors.
    pub fn parse(text: &str) -> Result<ExperimentConfig, ExperimentError> {
        let mut cfg = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| {
                    ExperimentError::BadConfig(format!("line {}: `{raw}`", lineno + 1))
                })?;
            let bad = |what: &str| {
                ExperimentError::BadConfig(format!("line {}: bad {what}: `{value}`", lineno + 1))
            };
            match key {
                "K" => cfg.k = value.parse().map_err(|_| bad("K"))?,
                "pk" => cfg.pk = value.parse().map_err(|_| bad("pk"))?,
                "M" => cfg.batch_size = value.parse().map_err(|_| bad("M"))?,
                "q" => cfg.q = value.parse().map_err(|_| bad("q"))?,
                "loss" => cfg.loss = value.parse().map_err(|_| bad("loss"))?,
                "hops" => cfg.hops = parse_range_list(value).ok_or_else(|| bad("hops"))?,
                "N" => cfg.batches = parse_range_list(value).ok_or_else(|| bad("N"))?,
                "construction" => {
                    cfg.constructions = value
                        .split(',')
                        .map(|t| Construction::parse(t.trim()))
                        .collect::<Result<_, _>>()?;
                }
                "decoder" => {
                    cfg.decoders = value
                        .split(',')
                        .map(|t| DecoderChoice::parse(t.trim()))
                        .collect::<Result<_, _>>()?;
                }
                "graph_instances" => {
                    cfg.graph_instances = Some(value.parse().map_err(|_| bad("count"))?)
                }
                "repeats_per_instance" => {
                    cfg.repeats_per_instance = Some(value.parse().map_err(|_| bad("count"))?)
                }
                "master_seed" => cfg.master_seed = value.parse().map_err(|_| bad("seed"))?,
                "output_dir" => cfg.output_dir = PathBuf::from(value),
                "coefficient_mode" => {
                    cfg.coefficient_mode = match value {
                        "uniform" => CoefficientMode::UniformAll,
                        "nonzero" => CoefficientMode::NonzeroOnly,
                        _ => return Err(bad("coefficient_mode")),
                    }
                }
                "psi_file" => cfg.psi_file = Some(PathBuf::from(value)),
                other => {
                    return Err(ExperimentError::BadConfig(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn degree_distribution(&self) -> Result<DegreeDistribution, ExperimentError> {
        match &self.psi_file {
            Some(path) => Ok(crate::degree_opt::load_distribution(path)?),
            None => Ok(presets::default_degree_distribution()),
        }
    }
}

/// Parse "10", "1,5,10", or an inclusive range "1..20".
pub fn parse_range_list(text: &str) -> Option<Vec<usize>> {
    if let Some((a, b)) = text.split_once("..") {
        let a: usize = a.trim().parse().ok()?;
        let b: usize = b.trim().trim_start_matches('=').parse().ok()?;
        if a > b {
            return None;
        }
        return Some((a..=b).collect());
    }
    let items: Result<Vec<usize>, _> = text.split(',').map(|t| t.trim().parse()).collect();
    items.ok().filter(|v| !v.is_empty())
}

/// One aggregated sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub construction: String,
    pub decoder: String,
    pub n: usize,
    pub hops: usize,
    pub loss: f64,
    pub trials: usize,
    pub mean_rate: f64,
    pub std_rate: f64,
    pub mean_inact: f64,
    pub std_inact: f64,
    pub edges: f64,
    pub max_row_degree: usize,
    pub seconds: f64,
}

pub const CSV_HEADER: &str = "construction,decoder,N,hops,loss,trials,mean_rate,std_rate,mean_inact,std_inact,edges,max_row_degree,seconds";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{:.3}",
                r.construction,
                r.decoder,
                r.n,
                r.hops,
                r.loss,
                r.trials,
                r.mean_rate,
                r.std_rate,
                r.mean_inact,
                r.std_inact,
                r.edges,
                r.max_row_degree,
                r.seconds
            );
        }
        out
    }

    /// 95% confidence interval on the mean decoding rate of a row.
    pub fn rate_ci(row: &ResultRow) -> (f64, f64) {
        let se = row.std_rate / (row.trials as f64).sqrt();
        (row.mean_rate - 1.96 * se, row.mean_rate + 1.96 * se)
    }
}

/// Sample mean and standard deviation (n - 1 denominator).
pub fn summarize(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn build_graph(
    construction: &Construction,
    cfg: &ExperimentConfig,
    n: usize,
    psi: &DegreeDistribution,
    graph_seed: u64,
) -> Result<TannerGraph, ExperimentError> {
    let mut rng = ChaCha12Rng::seed_from_u64(graph_seed);
    Ok(match construction {
        Construction::Random => random_tanner(psi, cfg.k, n, &mut rng),
        Construction::CsPreset7 => {
            if cfg.k != 256 {
                return Err(ExperimentError::PresetNeedsK256(construction.name()));
            }
            expand_cs(&presets::cs7_base_graph(), n)
        }
        Construction::CsPreset8 => {
            if cfg.k != 256 {
                return Err(ExperimentError::PresetNeedsK256(construction.name()));
            }
            expand_cs(&presets::cs8_base_graph(), n)
        }
        Construction::CsCustom(path) => expand_cs(&BaseGraph::load(path)?, n),
        Construction::CsRandomBase => {
            let rows = presets::CS7_DEGREES
                .iter()
                .map(|&d| {
                    let mut row = rand::seq::index::sample(&mut rng, cfg.k, d).into_vec();
                    row.sort_unstable();
                    row
                })
                .collect();
            expand_cs(&BaseGraph::new(cfg.k, rows)?, n)
        }
        Construction::CsColumnDesigned => {
            let base =
                design_base_graph(&presets::CS7_DEGREES, cfg.k, TieBreak::Random, &mut rng)?;
            expand_cs(&base, n)
        }
    })
}

/// Run every (construction, decoder, N, hops) combination in the config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable, ExperimentError> {
    cfg.validate()?;
    let psi = cfg.degree_distribution()?;
    let mut rows = Vec::new();
    for construction in &cfg.constructions {
        for decoder in &cfg.decoders {
            for &n in &cfg.batches {
                for &hops in &cfg.hops {
                    rows.push(run_arm(cfg, construction, *decoder, n, hops, &psi)?);
                }
            }
        }
    }
    Ok(ResultTable { rows })
}

fn run_arm(
    cfg: &ExperimentConfig,
    construction: &Construction,
    decoder: DecoderChoice,
    n: usize,
    hops: usize,
    psi: &DegreeDistribution,
) -> Result<ResultRow, ExperimentError> {
    let started = Instant::now();
    let (default_instances, default_repeats) = construction.default_trials();
    let instances = cfg.graph_instances.unwrap_or(default_instances);
    let repeats = cfg.repeats_per_instance.unwrap_or(default_repeats);
    let channel = ChannelConfig::new(hops, cfg.loss, cfg.batch_size)?;
    let cid = construction.id();

    if decoder == DecoderChoice::Layered && !construction.name().starts_with("cs") {
        return Err(ExperimentError::LayeredNeedsLayers);
    }

    // Graphs are deterministic per (construction, N, instance); fixed
    // designed graphs ignore the instance label.
    let graphs: Vec<TannerGraph> = (0..instances)
        .map(|inst| {
            let label = if construction.is_fixed_graph() { 0 } else { inst as u64 };
            build_graph(
                construction,
                cfg,
                n,
                psi,
                seed::derive(cfg.master_seed, &[seed::STAGE_GRAPH, cid, n as u64, label]),
            )
        })
        .collect::<Result<_, _>>()?;

    // Layer width = size of layer 0 of the expanded graph.
    let layered_m = graphs
        .first()
        .map(|t| (0..t.n()).filter(|&i| t.layer_of(i) == Some(0)).count())
        .unwrap_or(0)
        .max(1);

    let per_instance: Vec<Vec<(f64, f64)>> = graphs
        .par_iter()
        .enumerate()
        .map(|(inst, t)| {
            (0..repeats)
                .map(|rep| {
                    let trial_seed = seed::derive(
                        cfg.master_seed,
                        &[
                            seed::STAGE_TRIAL,
                            cid,
                            n as u64,
                            hops as u64,
                            inst as u64,
                            rep as u64,
                        ],
                    );
                    let mut rng = ChaCha12Rng::seed_from_u64(trial_seed);
                    let src = SourceBlock::random(cfg.k, cfg.pk, &mut rng);
                    let batches = encode(&src, t, cfg.batch_size, cfg.coefficient_mode, &mut rng);
                    let received: Vec<_> = batches
                        .into_iter()
                        .map(|b| transmit(b, &channel, &mut rng))
                        .collect();
                    let result = match decoder {
                        DecoderChoice::Bp => bp_decode(&received, cfg.k),
                        DecoderChoice::Inactivation => inactivation_decode(&received, cfg.k),
                        DecoderChoice::Layered => {
                            layered_decode(&received, cfg.k, layered_m)
                                .expect("cyclic-shift batches carry layers")
                                .result
                        }
                    };
                    debug_assert!(result.decoded_set().iter().all(|&v| {
                        result.decoded_symbols[v].as_deref() == Some(src.symbol(v))
                    }));
                    (result.decoding_rate, result.inactivation_count as f64)
                })
                .collect()
        })
        .collect();

    let rates: Vec<f64> = per_instance
        .iter()
        .flatten()
        .map(|&(rate, _)| rate)
        .collect();
    let inacts: Vec<f64> = per_instance
        .iter()
        .flatten()
        .map(|&(_, inact)| inact)
        .collect();
    let (mean_rate, std_rate) = summarize(&rates);
    let (mean_inact, std_inact) = summarize(&inacts);

    let edge_counts: Vec<f64> = graphs
        .iter()
        .map(|t| graph_metrics(t).edge_count as f64)
        .collect();
    let (edges, _) = summarize(&edge_counts);
    let max_row_degree = graphs
        .iter()
        .map(|t| graph_metrics(t).max_row_degree)
        .max()
        .unwrap_or(0);

    Ok(ResultRow {
        construction: construction.name(),
        decoder: decoder.name().into(),
        n,
        hops,
        loss: cfg.loss,
        trials: rates.len(),
        mean_rate,
        std_rate,
        mean_inact,
        std_inact,
        edges,
        max_row_degree,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// The base-graph design comparison: random base graphs against
/// column-degree-designed ones, same row degrees, BP decoding.
pub fn run_table2(cfg: &ExperimentConfig) -> Result<ResultTable, ExperimentError> {
    let mut forced = cfg.clone();
    forced.constructions = vec![Construction::CsRandomBase, Construction::CsColumnDesigned];
    forced.decoders = vec![DecoderChoice::Bp];
    if forced.batches.len() == 1 && forced.batches == vec![20] {
        forced.batches = (19..=28).collect();
    }
    run_experiment(&forced)
}

/// One whitespace-delimited series file per (construction, decoder)
/// curve: `x mean std` per line, x being the swept quantity.
pub fn emit_plotdata(table: &ResultTable, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    if table.rows.is_empty() {
        return Err(ExperimentError::BadConfig("empty result table".into()));
    }
    fs::create_dir_all(dir)?;
    let mut curves: Vec<(String, Vec<&ResultRow>)> = Vec::new();
    for row in &table.rows {
        let key = format!("{}_{}", sanitize(&row.construction), row.decoder);
        match curves.iter_mut().find(|(k, _)| *k == key) {
            Some((_, rows)) => rows.push(row),
            None => curves.push((key, vec![row])),
        }
    }
    let mut files = Vec::new();
    for (key, rows) in curves {
        let distinct_n = rows
            .iter()
            .map(|r| r.n)
            .collect::<std::collections::BTreeSet<_>>()
            .len();
        let mut out = String::new();
        for r in &rows {
            let x = if distinct_n > 1 { r.n } else { r.hops };
            let _ = writeln!(out, "{x} {:.6} {:.6}", r.mean_rate, r.std_rate);
        }
        let path = dir.join(format!("{key}.dat"));
        fs::write(&path, out)?;
        files.push(path);
    }
    Ok(files)
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

/// Parse an emitted series file back into (x, mean, std) triples.
pub fn parse_series(path: &Path) -> Result<Vec<(f64, f64, f64)>, ExperimentError> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in text.lines() {
        let cells: Vec<&str> = line.split_whitespace().collect();
        if cells.len() != 3 {
            return Err(ExperimentError::BadConfig(format!("bad series line `{line}`")));
        }
        let parse = |s: &str| -> Result<f64, ExperimentError> {
            s.parse()
                .map_err(|_| ExperimentError::BadConfig(format!("bad number `{s}`")))
        };
        out.push((parse(cells[0])?, parse(cells[1])?, parse(cells[2])?));
    }
    Ok(out)
}

/// Write results.csv, the plot-data series, and the run metadata file.
pub fn write_outputs(cfg: &ExperimentConfig, table: &ResultTable) -> Result<(), ExperimentError> {
    fs::create_dir_all(&cfg.output_dir)?;
    fs::write(cfg.output_dir.join("results.csv"), table.to_csv())?;
    emit_plotdata(table, &cfg.output_dir.join("plotdata"))?;
    fs::write(cfg.output_dir.join("run_metadata.txt"), metadata_text(cfg))?;
    Ok(())
}

/// Everything needed to interpret or reproduce a run.
pub fn metadata_text(cfg: &ExperimentConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "schema_version = 1");
    let _ = writeln!(out, "gf_polynomial = {:#x}", gf::REDUCTION_POLY);
    let _ = writeln!(out, "coefficient_mode = {}", cfg.coefficient_mode.name());
    let _ = writeln!(out, "master_seed = {}", cfg.master_seed);
    let _ = writeln!(
        out,
        "seed_derivation = splitmix64(master, [stage, construction, N, hops, instance, repeat])"
    );
    let _ = writeln!(out, "hops_convention = links; hops-1 intermediate recoding nodes");
    let _ = writeln!(out, "std_convention = sample standard deviation over trials");
    let _ = writeln!(out, "K = {}", cfg.k);
    let _ = writeln!(out, "pk = {}", cfg.pk);
    let _ = writeln!(out, "M = {}", cfg.batch_size);
    let _ = writeln!(out, "q = {}", cfg.q);
    let _ = writeln!(out, "loss = {}", cfg.loss);
    let _ = writeln!(
        out,
        "hops = {}",
        cfg.hops.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(",")
    );
    let _ = writeln!(
        out,
        "N = {}",
        cfg.batches.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")
    );
    let _ = writeln!(
        out,
        "construction = {}",
        cfg.constructions
            .iter()
            .map(|c| c.name())
            .collect::<Vec<_>>()
            .join(",")
    );
    let _ = writeln!(
        out,
        "decoder = {}",
        cfg.decoders
            .iter()
            .map(|d| d.name().to_string())
            .collect::<Vec<_>>()
            .join(",")
    );
    if let Some(gi) = cfg.graph_instances {
        let _ = writeln!(out, "graph_instances = {gi}");
    }
    if let Some(rp) = cfg.repeats_per_instance {
        let _ = writeln!(out, "repeats_per_instance = {rp}");
    }
    if let Some(psi) = &cfg.psi_file {
        let _ = writeln!(out, "psi_file = {}", psi.display());
    }
    out
}
