//! Command-line experiment harness for batched sparse erasure codes.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use bats::analysis::{
    collect_trace, correlation_heatmap, conditional_check, pearson, bounds_check, DecoderKind,
};
use bats::channel::{estimate_rank_distribution, ChannelConfig, RankDistribution};
use bats::codec::CoefficientMode;
use bats::degree_opt::{
    optimize, save_distribution, BatsOmega, OptProblem, DEFAULT_ETA, DEFAULT_GRID,
};
use bats::experiment::{
    run_experiment, run_table2, write_outputs, Construction, DecoderChoice, ExperimentConfig,
};
use bats::graph::{self, design_base_graph, expand_cs, graph_metrics, TieBreak};
use bats::{presets, seed};

#[derive(Parser)]
#[command(
    name = "batsim",
    about = "Batched sparse code simulations: constructions, decoders, channels, diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decoding-rate sweeps over hops and batch counts.
    Experiment(ExperimentArgs),
    /// Base-graph design comparison: random vs column-degree design.
    Table2(ExperimentArgs),
    /// Estimate the end-to-end rank distribution of a channel.
    Rankdist(RankdistArgs),
    /// Dependence diagnostics on decodability indicators.
    Depcheck(DepcheckArgs),
    /// Optimize a degree distribution for a rank distribution.
    Optimize(OptimizeArgs),
    /// Search for a balanced base graph with given row degrees.
    DesignBase(DesignBaseArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Flat key-value config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Repeats per graph instance.
    #[arg(long)]
    trials: Option<usize>,
    /// Graph instances (random-style constructions).
    #[arg(long)]
    instances: Option<usize>,
    /// Comma-separated constructions: random, cs7, cs8, cs:<file>,
    /// cs-random-base, cs-column-designed.
    #[arg(long)]
    construction: Option<String>,
    /// Comma-separated decoders: bp, inactivation, layered.
    #[arg(long)]
    decoder: Option<String>,
    /// Hop sweep: "10", "1..20", or "1,5,10".
    #[arg(long)]
    hops: Option<String>,
    /// Batch-count sweep, same forms as --hops.
    #[arg(long)]
    batches: Option<String>,
    #[arg(long)]
    loss: Option<f64>,
}

impl ExperimentArgs {
    fn build(&self) -> Result<ExperimentConfig, String> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("{}: {e}", path.display()))?;
                ExperimentConfig::parse(&text).map_err(|e| e.to_string())?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(t) = self.trials {
            cfg.repeats_per_instance = Some(t);
        }
        if let Some(i) = self.instances {
            cfg.graph_instances = Some(i);
        }
        if let Some(c) = &self.construction {
            cfg.constructions = c
                .split(',')
                .map(|t| Construction::parse(t.trim()).map_err(|e| e.to_string()))
                .collect::<Result<_, _>>()?;
        }
        if let Some(d) = &self.decoder {
            cfg.decoders = d
                .split(',')
                .map(|t| DecoderChoice::parse(t.trim()).map_err(|e| e.to_string()))
                .collect::<Result<_, _>>()?;
        }
        if let Some(h) = &self.hops {
            cfg.hops =
                bats::experiment::parse_range_list(h).ok_or_else(|| format!("bad --hops {h}"))?;
        }
        if let Some(b) = &self.batches {
            cfg.batches = bats::experiment::parse_range_list(b)
                .ok_or_else(|| format!("bad --batches {b}"))?;
        }
        if let Some(l) = self.loss {
            cfg.loss = l;
        }
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RankdistArgs {
    #[arg(long, default_value_t = 10)]
    hops: usize,
    #[arg(long, default_value_t = 0.1)]
    loss: f64,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DepcheckArgs {
    /// Construction to diagnose (cs7, cs8, cs:<file>, random, or the toy
    /// pair tree / cycle).
    #[arg(long, default_value = "cs7")]
    construction: String,
    #[arg(long, default_value_t = 20)]
    batches: usize,
    #[arg(long, default_value_t = 10)]
    hops: usize,
    #[arg(long, default_value_t = 0.1)]
    loss: f64,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 5000)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Decoder for the trace (bp recommended; the bound check assumes
    /// pure peeling).
    #[arg(long, default_value = "bp")]
    decoder: String,
    #[arg(long, default_value = "depcheck_out")]
    out: PathBuf,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Rank-distribution file (one line of probabilities).
    #[arg(long)]
    rankdist: PathBuf,
    #[arg(long, default_value_t = 256)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_ETA)]
    eta: f64,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DesignBaseArgs {
    /// Comma-separated row degrees, e.g. 11,12,14,14,19,20,27.
    #[arg(long)]
    degrees: String,
    #[arg(long, default_value_t = 256)]
    k: usize,
    /// Candidate seeds to search.
    #[arg(long, default_value_t = 2000)]
    candidates: u64,
    /// Expansion sizes at which balance is scored (comma separated).
    #[arg(long, default_value = "16,20,24,28")]
    expand_n: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Experiment(args) => {
            let cfg = args.build()?;
            let table = run_experiment(&cfg).map_err(|e| e.to_string())?;
            write_outputs(&cfg, &table).map_err(|e| e.to_string())?;
            print!("{}", table.to_csv());
            eprintln!("wrote {}", cfg.output_dir.display());
            Ok(())
        }
        Command::Table2(args) => {
            let cfg = args.build()?;
            let table = run_table2(&cfg).map_err(|e| e.to_string())?;
            write_outputs(&cfg, &table).map_err(|e| e.to_string())?;
            print!("{}", table.to_csv());
            eprintln!("wrote {}", cfg.output_dir.display());
            Ok(())
        }
        Command::Rankdist(args) => {
            let cfg = ChannelConfig::new(args.hops, args.loss, args.batch_size)
                .map_err(|e| e.to_string())?;
            let h = estimate_rank_distribution(&cfg, args.trials, args.seed);
            match &args.out {
                Some(path) => {
                    h.save(path).map_err(|e| e.to_string())?;
                    eprintln!("mean rank {:.4}; wrote {}", h.mean_rank(), path.display());
                }
                None => print!("{}", h.to_text()),
            }
            Ok(())
        }
        Command::Depcheck(args) => depcheck(args),
        Command::Optimize(args) => {
            let h = RankDistribution::load(&args.rankdist).map_err(|e| e.to_string())?;
            let problem = OptProblem {
                h: &h,
                max_degree: args.k,
                eta: args.eta,
                grid: args.grid,
                omega: &BatsOmega,
            };
            let (psi, theta) = optimize(&problem).map_err(|e| e.to_string())?;
            save_distribution(&psi, &args.out).map_err(|e| e.to_string())?;
            eprintln!(
                "theta {theta:.4}, mean degree {:.2}; wrote {}",
                psi.mean_degree(),
                args.out.display()
            );
            Ok(())
        }
        Command::DesignBase(args) => design_base(args),
    }
}

fn build_trace_graph(
    name: &str,
    k: usize,
    n: usize,
    seed_value: u64,
) -> Result<graph::TannerGraph, String> {
    match name {
        "cs7" => Ok(expand_cs(&presets::cs7_base_graph(), n)),
        "cs8" => Ok(expand_cs(&presets::cs8_base_graph(), n)),
        "random" => {
            let psi = presets::default_degree_distribution();
            let mut rng = ChaCha12Rng::seed_from_u64(seed::derive(
                seed_value,
                &[seed::STAGE_GRAPH, 0],
            ));
            Ok(graph::random_tanner(&psi, k, n, &mut rng))
        }
        // Toy A/B pair: same node counts, the cycle variant adds edges
        // between the two subtrees.
        "tree" => graph::tanner_from_rows(
            7,
            vec![vec![0, 1, 2], vec![0, 3, 4], vec![1, 5], vec![3, 6]],
        )
        .map_err(|e| e.to_string()),
        "cycle" => graph::tanner_from_rows(
            7,
            vec![vec![0, 1, 2], vec![0, 1, 2], vec![1, 5], vec![2, 5]],
        )
        .map_err(|e| e.to_string()),
        other => {
            if let Some(path) = other.strip_prefix("cs:") {
                let base =
                    graph::BaseGraph::load(&PathBuf::from(path)).map_err(|e| e.to_string())?;
                Ok(expand_cs(&base, n))
            } else {
                Err(format!("unknown construction `{other}`"))
            }
        }
    }
}

fn depcheck(args: DepcheckArgs) -> Result<(), String> {
    let decoder = match args.decoder.as_str() {
        "bp" => DecoderKind::Bp,
        "inactivation" => DecoderKind::Inactivation,
        other => return Err(format!("unsupported trace decoder `{other}`")),
    };
    let k = if args.construction == "tree" || args.construction == "cycle" {
        7
    } else {
        256
    };
    let n = if args.construction == "tree" || args.construction == "cycle" {
        4
    } else {
        args.batches
    };
    let t = build_trace_graph(&args.construction, k, n, args.seed)?;
    let cfg =
        ChannelConfig::new(args.hops, args.loss, args.batch_size).map_err(|e| e.to_string())?;
    eprintln!(
        "collecting {} trials on {} (N={}, K={})...",
        args.trials,
        args.construction,
        t.n(),
        t.k()
    );
    let trace = collect_trace(
        &t,
        &cfg,
        decoder,
        args.trials,
        1,
        CoefficientMode::UniformAll,
        args.seed,
    );
    std::fs::create_dir_all(&args.out).map_err(|e| e.to_string())?;
    trace
        .save(&args.out.join("trace.bin"))
        .map_err(|e| e.to_string())?;

    if decoder != DecoderKind::Bp {
        eprintln!(
            "note: bound reports assume pure peeling; {} traces recover extra variables by back substitution",
            args.decoder
        );
    }
    // Bound report per variable node.
    let mut csv = String::from("vn,neighbors,p_v,lower,upper,satisfied\n");
    let mut checked = 0usize;
    let mut satisfied = 0usize;
    for v in 0..t.k() {
        match bounds_check(&trace, &t, v) {
            Ok(report) => {
                checked += 1;
                if report.satisfied {
                    satisfied += 1;
                }
                csv.push_str(&format!(
                    "{},{},{:.6},{:.6},{:.6},{}\n",
                    v,
                    report.neighbors.len(),
                    report.p_v,
                    report.lower,
                    report.upper,
                    report.satisfied
                ));
            }
            Err(_) => continue, // isolated variable
        }
    }
    std::fs::write(args.out.join("bounds.csv"), csv).map_err(|e| e.to_string())?;

    // Pairwise diagnostics for the first few check-node pairs. A
    // negative correlation beyond the CLT band marks the pair anomalous.
    let mut pair_csv = String::from("ci,cj,c00,c01,c10,c11,rho,anomaly\n");
    let pairs = t.n().min(6);
    for i in 0..pairs {
        for j in (i + 1)..pairs {
            let table = correlation_heatmap(&trace, i, j).map_err(|e| e.to_string())?;
            pair_csv.push_str(&format!(
                "{i},{j},{},{},{},{},{},{}\n",
                table.counts[0][0],
                table.counts[0][1],
                table.counts[1][0],
                table.counts[1][1],
                table
                    .rho
                    .map(|r| format!("{r:.6}"))
                    .unwrap_or_else(|| "na".into()),
                table.negative_anomaly
            ));
        }
    }
    std::fs::write(args.out.join("pairs.csv"), pair_csv).map_err(|e| e.to_string())?;

    // One conditional-probability check on the first adjacent pair.
    if t.n() >= 2 {
        match conditional_check(&trace, 0, &[1]) {
            Ok(r) => eprintln!(
                "P(C0=0) = {:.4}, P(C0=0 | C1=0) = {:.4} ({} conditioning events){}",
                r.p_unconditional,
                r.p_conditional,
                r.conditioning_count,
                if r.violated { "  [VIOLATED]" } else { "" }
            ),
            Err(e) => eprintln!("conditional check skipped: {e}"),
        }
    }
    if let (Ok(a), Ok(b)) = (
        pearson(&trace.cn_series(0), &trace.cn_series(1)),
        pearson(&trace.cn_series(0), &trace.cn_series(t.n() - 1)),
    ) {
        eprintln!("rho(C0,C1) = {a:.4}, rho(C0,C{}) = {b:.4}", t.n() - 1);
    }
    println!(
        "bounds satisfied for {satisfied}/{checked} variable nodes; reports in {}",
        args.out.display()
    );
    Ok(())
}

fn design_base(args: DesignBaseArgs) -> Result<(), String> {
    let mut degrees: Vec<usize> = args
        .degrees
        .split(',')
        .map(|t| t.trim().parse().map_err(|_| format!("bad degree `{t}`")))
        .collect::<Result<_, _>>()?;
    degrees.sort_unstable();
    let expansions = bats::experiment::parse_range_list(&args.expand_n)
        .ok_or_else(|| format!("bad --expand-n {}", args.expand_n))?;
    // Score a candidate by the column-degree balance of its expansions:
    // summed variance first, then summed uncovered columns.
    let mut best: Option<(f64, usize, u64, graph::BaseGraph)> = None;
    for candidate in 0..args.candidates {
        let mut rng = ChaCha12Rng::seed_from_u64(seed::derive(
            args.seed,
            &[seed::STAGE_GRAPH, candidate],
        ));
        let base = design_base_graph(&degrees, args.k, TieBreak::Random, &mut rng)
            .map_err(|e| e.to_string())?;
        let mut variance = 0.0;
        let mut uncovered = 0usize;
        for &n in &expansions {
            let metrics = graph_metrics(&expand_cs(&base, n));
            let n_cols = metrics.column_degrees.len() as f64;
            let mean = metrics.edge_count as f64 / n_cols;
            variance += metrics
                .column_degrees
                .iter()
                .map(|&c| (c as f64 - mean) * (c as f64 - mean))
                .sum::<f64>()
                / n_cols;
            uncovered += metrics.column_degrees.iter().filter(|&&c| c == 0).count();
        }
        let better = match &best {
            None => true,
            Some((bv, bu, _, _)) => {
                variance < bv - 1e-12 || ((variance - bv).abs() <= 1e-12 && uncovered < *bu)
            }
        };
        if better {
            best = Some((variance, uncovered, candidate, base));
        }
    }
    let (variance, uncovered, candidate, base) = best.expect("at least one candidate");
    base.save(&args.out).map_err(|e| e.to_string())?;
    eprintln!(
        "candidate {candidate}: summed column-degree variance {variance:.4}, {uncovered} total uncovered over N={}; wrote {}",
        args.expand_n,
        args.out.display()
    );
    Ok(())
}
