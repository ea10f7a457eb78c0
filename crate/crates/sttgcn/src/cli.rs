//! Command-line front end: graph construction, reconstruction, training,
//! evaluation, exports and the decomposition benchmark.
//!
//! Every subcommand exits 0 on success and nonzero with a single
//! `error: <kind>: <detail>` line on stderr otherwise. `STT_THREADS` caps
//! worker threads; values 0 and 1 select the deterministic single-threaded
//! mode, which is also the only mode the current implementation uses.

use crate::config::{model_config_from_kv, model_config_to_kv, KvMap, RunConfig};
use crate::data::{
    self, load_flow, make_windows, split, synth_diffusion, FlowFormat, SplitTag,
};
use crate::error::{Error, Result};
use crate::graph::{
    self, build_fusion_matrix, build_spatial_adjacency, load_distance_csv, AdjTensor, FusionGraph,
    ReconstructMethod, ReconstructOptions,
};
use crate::io;
use crate::metrics::MetricReport;
use crate::net::{self, Checkpoint, ModelConfig};
use clap::{Args, Parser, Subcommand};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Reference parameter count of the original PEMS08-scale model, printed
/// alongside ours for comparison (never asserted).
const REFERENCE_PEMS08_PARAM_COUNT: usize = 1_207_108;

#[derive(Parser, Debug)]
#[command(
    name = "sttgcn",
    version,
    about = "Fusion-graph reconstruction via tensor decomposition and a spatial-temporal tensor graph convolutional forecaster"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Default, Clone)]
pub struct CommonArgs {
    /// Flat key=value config file with [section] headers; explicit flags
    /// override file values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for every stochastic component of the subcommand.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build the binary fusion matrix and adjacency tensor from a distance file.
    BuildGraph {
        #[command(flatten)]
        common: CommonArgs,
        /// Distance CSV (`from,to,cost`, 1-based ids).
        #[arg(long)]
        distances: Option<PathBuf>,
        /// Node count; inferred from the largest id when omitted.
        #[arg(long)]
        nodes: Option<usize>,
    },
    /// Decompose the adjacency tensor and write the reconstructed graph.
    Reconstruct {
        #[command(flatten)]
        common: CommonArgs,
        /// Directory holding build-graph outputs (adjacency.stt1).
        #[arg(long)]
        graph: Option<PathBuf>,
        /// tucker | l1tucker | tt
        #[arg(long)]
        method: Option<String>,
    },
    /// Train the forecaster on a flow series against a reconstructed graph.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        flow: Option<PathBuf>,
        /// csv | bin (inferred from the extension when omitted).
        #[arg(long)]
        flow_format: Option<String>,
        /// Reconstructed graph (STM1 matrix).
        #[arg(long)]
        aprime: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the test split.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        flow: Option<PathBuf>,
        #[arg(long)]
        flow_format: Option<String>,
        #[arg(long)]
        aprime: Option<PathBuf>,
        /// Checkpoint manifest path.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Export a reconstructed graph as CSV (full matrix plus slice-1 block).
    ExportGraph {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        aprime: Option<PathBuf>,
    },
    /// Time all decomposition methods on one graph.
    BenchDecomp {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        distances: Option<PathBuf>,
        #[arg(long)]
        nodes: Option<usize>,
    },
    /// Generate the synthetic diffusion dataset.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 12)]
        nodes: usize,
        #[arg(long, default_value_t = 5000)]
        steps: usize,
    },
}

/// Thread cap from `STT_THREADS`; 0 and 1 (and unset) select deterministic
/// single-threaded execution. Higher caps are accepted but the current
/// implementation stays single-threaded.
pub fn thread_cap() -> usize {
    std::env::var("STT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(1)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BuildGraph { common, distances, nodes } => cmd_build_graph(&common, distances, nodes),
        Command::Reconstruct { common, graph, method } => cmd_reconstruct(&common, graph, method),
        Command::Train { common, flow, flow_format, aprime } => cmd_train(&common, flow, flow_format, aprime),
        Command::Evaluate { common, flow, flow_format, aprime, checkpoint } => {
            cmd_evaluate(&common, flow, flow_format, aprime, checkpoint)
        }
        Command::ExportGraph { common, aprime } => cmd_export_graph(&common, aprime),
        Command::BenchDecomp { common, distances, nodes } => cmd_bench(&common, distances, nodes),
        Command::Synth { common, nodes, steps } => cmd_synth(&common, nodes, steps),
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

fn load_run_config(common: &CommonArgs) -> Result<RunConfig> {
    let kv = match &common.config {
        Some(p) => KvMap::load(p)?,
        None => KvMap::default(),
    };
    let mut rc = RunConfig::from_kv(kv);
    if let Some(out) = &common.out {
        rc.out_dir = Some(out.clone());
    }
    rc.validate_inputs()?;
    Ok(rc)
}

fn out_dir(rc: &RunConfig) -> Result<PathBuf> {
    let dir = rc
        .out_dir
        .clone()
        .ok_or_else(|| Error::usage("no output directory: pass --out or set paths.out".to_string()))?;
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn require(path: Option<PathBuf>, fallback: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    let p = path.or(fallback).ok_or_else(|| {
        Error::usage(format!("missing {what}: pass the flag or set it in the config file"))
    })?;
    if !p.exists() {
        return Err(Error::usage(format!("{what} does not exist: {}", p.display())));
    }
    Ok(p)
}

fn flow_format_of(path: &Path, explicit: Option<&str>) -> Result<FlowFormat> {
    match explicit {
        Some("csv") => Ok(FlowFormat::Csv),
        Some("bin") | Some("stt_binary") | Some("stf1") => Ok(FlowFormat::SttBinary),
        Some(other) => Err(Error::usage(format!("unknown flow format `{other}`"))),
        None => match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Ok(FlowFormat::Csv),
            _ => Ok(FlowFormat::SttBinary),
        },
    }
}

fn load_graph_from_distances(path: &Path, nodes: Option<usize>) -> Result<graph::SpatialGraph> {
    let edges = load_distance_csv(path)?;
    let n = match nodes {
        Some(n) => n,
        None => edges
            .iter()
            .map(|e| e.from.max(e.to))
            .max()
            .ok_or_else(|| Error::usage("distance file has no edges and no --nodes given".to_string()))?,
    };
    build_spatial_adjacency(&edges, n)
}

fn reconstruct_options(rc: &RunConfig, seed: u64) -> Result<ReconstructOptions> {
    let mut opts = ReconstructOptions { seed, ..ReconstructOptions::default() };
    if let Some(v) = rc.kv.take_parsed("graph.max_iter")? {
        opts.max_iter = v;
    }
    if let Some(v) = rc.kv.take_parsed("graph.tol")? {
        opts.tol = v;
    }
    if let Some(v) = rc.kv.take_parsed("graph.tt_max_rank")? {
        opts.tt_max_rank = Some(v);
    }
    if let Some(v) = rc.kv.take_parsed("graph.tt_tol")? {
        opts.tt_tol = v;
    }
    Ok(opts)
}

fn build_dataset(rc: &RunConfig, flow_path: &Path, format: FlowFormat, cfg: &ModelConfig) -> Result<data::WindowedDataset> {
    let series = load_flow(flow_path, format)?;
    let windows = make_windows(&series, cfg.window, cfg.horizon, 1)?;
    let ratios = match rc.kv.get("train.split") {
        Some(spec) => {
            let parts: Vec<usize> = spec
                .split(':')
                .map(|p| p.trim().parse::<usize>().map_err(|_| Error::usage(format!("bad split `{spec}`"))))
                .collect::<Result<_>>()?;
            if parts.len() != 3 {
                return Err(Error::usage(format!("split must be a:b:c, got `{spec}`")));
            }
            (parts[0], parts[1], parts[2])
        }
        None => (6, 2, 2),
    };
    split(windows, ratios)
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_build_graph(common: &CommonArgs, distances: Option<PathBuf>, nodes: Option<usize>) -> Result<()> {
    let rc = load_run_config(common)?;
    let dir = out_dir(&rc)?;
    let dist = require(distances, rc.distances.clone(), "distance file")?;
    let g = load_graph_from_distances(&dist, nodes)?;
    let fusion = build_fusion_matrix(&g);
    let adj = graph::blocks_to_tensor(&fusion);

    io::write_matrix(fusion.matrix(), &dir.join("fusion.stm1"))?;
    io::write_tensor(adj.tensor(), &dir.join("adjacency.stt1"))?;

    println!(
        "graph: {} nodes, {} undirected edges; fusion matrix {s}x{s}; adjacency tensor {}x{}x9",
        g.n(),
        g.edges().len(),
        g.n(),
        g.n(),
        s = fusion.side()
    );
    let mut blocks = String::new();
    for k in 0usize..3 {
        let row: Vec<&str> = (0..3)
            .map(|l| match (k, l) {
                _ if k == l => "spatial",
                _ if k.abs_diff(l) == 1 => "identity",
                _ => "zero",
            })
            .collect();
        let _ = writeln!(blocks, "  block row {}: {}", k + 1, row.join(" | "));
    }
    print!("{blocks}");
    Ok(())
}

fn cmd_reconstruct(common: &CommonArgs, graph_dir: Option<PathBuf>, method: Option<String>) -> Result<()> {
    let rc = load_run_config(common)?;
    let dir = out_dir(&rc)?;
    let seed = common.seed.unwrap_or(0);
    let method = ReconstructMethod::parse(
        method
            .as_deref()
            .or_else(|| rc.kv.get("graph.method"))
            .unwrap_or("l1tucker"),
    )?;
    let adj_path = graph_dir
        .map(|d| d.join("adjacency.stt1"))
        .unwrap_or_else(|| dir.join("adjacency.stt1"));
    if !adj_path.exists() {
        return Err(Error::usage(format!(
            "adjacency tensor not found: {} (run build-graph first)",
            adj_path.display()
        )));
    }
    let adj = AdjTensor::from_tensor(io::read_tensor(&adj_path)?)?;

    let opts = reconstruct_options(&rc, seed)?;
    let started = Instant::now();
    let recon = graph::reconstruct_adj_tensor(&adj, method, &opts)?;
    let wall = started.elapsed().as_secs_f64();

    io::write_matrix(recon.graph.matrix(), &dir.join("aprime.stm1"))?;
    let mut kv = KvMap::default();
    kv.set("reconstruct.method", method.tag());
    kv.set("reconstruct.seed", seed);
    kv.set("reconstruct.n", adj.n());
    kv.set("reconstruct.wall_seconds", wall);
    kv.set("reconstruct.iterations", recon.objective_trace.len().saturating_sub(1));
    if let Some(last) = recon.objective_trace.last() {
        kv.set("reconstruct.final_objective", *last);
    }
    if !recon.objective_trace.is_empty() {
        kv.set(
            "reconstruct.objective_trace",
            crate::config::floats_to_string(&recon.objective_trace),
        );
    }
    kv.save(&dir.join("aprime.manifest.txt"))?;

    println!(
        "reconstructed {}x{} graph with {} in {:.3}s ({} sweeps)",
        recon.graph.side(),
        recon.graph.side(),
        method.tag(),
        wall,
        recon.objective_trace.len().saturating_sub(1)
    );
    Ok(())
}

fn model_config_for(rc: &RunConfig, n_nodes: usize, seed: Option<u64>) -> Result<ModelConfig> {
    let mut cfg = model_config_from_kv(&rc.kv, ModelConfig::defaults(n_nodes))?;
    cfg.n_nodes = n_nodes; // data wins over stale config entries
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_train(
    common: &CommonArgs,
    flow: Option<PathBuf>,
    flow_format: Option<String>,
    aprime: Option<PathBuf>,
) -> Result<()> {
    let rc = load_run_config(common)?;
    let dir = out_dir(&rc)?;
    let flow_path = require(flow, rc.flow.clone(), "flow file")?;
    let aprime_path = require(aprime, rc.aprime.clone(), "reconstructed graph")?;
    let format = flow_format_of(&flow_path, flow_format.as_deref())?;

    let aprime = io::read_matrix(&aprime_path)?;
    if aprime.rows() != aprime.cols() || aprime.rows() % 3 != 0 {
        return Err(Error::usage(format!(
            "reconstructed graph must be square 3n x 3n, got {}x{}",
            aprime.rows(),
            aprime.cols()
        )));
    }
    let n_nodes = aprime.rows() / 3;
    let cfg = model_config_for(&rc, n_nodes, common.seed)?;
    let ds = build_dataset(&rc, &flow_path, format, &cfg)?;

    let param_count = cfg.param_count();
    println!("threads: {} (deterministic single-threaded mode)", thread_cap());
    println!(
        "parameter count: {param_count} (reference PEMS08-scale model: {REFERENCE_PEMS08_PARAM_COUNT})"
    );

    let started = Instant::now();
    let outcome = net::train(&ds, &aprime, &cfg)?;
    let wall = started.elapsed().as_secs_f64();

    fs::write(dir.join("history.csv"), net::train::history_to_csv(&outcome.history))?;
    let last = outcome.history.last().expect("training ran at least one epoch");
    let best = &outcome.history[outcome.best_epoch - 1];
    let ck = Checkpoint {
        config: cfg.clone(),
        stats: ds.stats()?.clone(),
        params_flat: outcome.params.to_flat(),
        epoch: last.epoch,
        best_epoch: outcome.best_epoch,
        val_mae: best.val_mae,
        val_rmse: best.val_rmse,
        val_mape: best.val_mape,
    };
    ck.save(&dir, "checkpoint")?;

    println!(
        "trained {} epochs in {:.1}s; best epoch {} with val MAE {:.6}",
        last.epoch, wall, outcome.best_epoch, best.val_mae
    );
    Ok(())
}

fn cmd_evaluate(
    common: &CommonArgs,
    flow: Option<PathBuf>,
    flow_format: Option<String>,
    aprime: Option<PathBuf>,
    checkpoint: Option<PathBuf>,
) -> Result<()> {
    let rc = load_run_config(common)?;
    let dir = out_dir(&rc)?;
    let flow_path = require(flow, rc.flow.clone(), "flow file")?;
    let aprime_path = require(aprime, rc.aprime.clone(), "reconstructed graph")?;
    let ck_path = require(checkpoint, rc.checkpoint.clone(), "checkpoint manifest")?;
    let format = flow_format_of(&flow_path, flow_format.as_deref())?;

    let ck = Checkpoint::load(&ck_path)?;
    let cfg = ck.config.clone();
    let params = ck.params()?;
    let aprime = io::read_matrix(&aprime_path)?;

    // Rebuild windows with the checkpoint's geometry; checkpoint stats take
    // precedence so evaluation matches training-time normalization.
    let series = load_flow(&flow_path, format)?;
    let windows = make_windows(&series, cfg.window, cfg.horizon, 1)?;
    let ds = split(windows, (6, 2, 2))?;
    let test_range = ds.split_range(SplitTag::Test)?;
    let mut samples = ds.samples[test_range].to_vec();
    // Re-normalize inputs with the checkpoint statistics.
    let train_stats = ds.stats()?.clone();
    for s in &mut samples {
        for t in 0..cfg.window {
            for i in 0..cfg.n_nodes {
                let raw = s.input.get(t, i, 0) * train_stats.std[i] + train_stats.mean[i];
                s.input.set(t, i, 0, (raw - ck.stats.mean[i]) / ck.stats.std[i]);
            }
        }
    }

    let started = Instant::now();
    let preds = net::predict_samples(&params, &cfg, &aprime, &samples, &ck.stats)?;
    let wall = started.elapsed().as_secs_f64();

    let pairs = net::train::horizon_pairs(&samples, &preds, cfg.horizon);
    let report = MetricReport::from_per_step(&pairs, wall)?;
    report.write_csv(&dir.join("metrics.csv"))?;

    let mut pred_csv = String::from("sample_start,horizon_step,sensor,actual,predicted,residual\n");
    for (s, p) in samples.iter().zip(&preds) {
        for h in 0..cfg.horizon {
            for i in 0..cfg.n_nodes {
                let actual = s.target.get(h, i);
                let predicted = p.get(i, h);
                let _ = writeln!(
                    pred_csv,
                    "{},{},{},{},{},{}",
                    s.start,
                    h + 1,
                    i + 1,
                    actual,
                    predicted,
                    actual - predicted
                );
            }
        }
    }
    fs::write(dir.join("predictions.csv"), pred_csv)?;

    let agg = report.aggregate();
    println!(
        "test: {} samples; MAE {:.6}, RMSE {:.6}, MAPE {} ({} of {} targets)",
        samples.len(),
        agg.mae,
        agg.rmse,
        agg.mape.map(|v| format!("{v:.4}%")).unwrap_or_else(|| "n/a".to_string()),
        agg.mape_included,
        agg.n
    );
    Ok(())
}

fn cmd_export_graph(common: &CommonArgs, aprime: Option<PathBuf>) -> Result<()> {
    let rc = load_run_config(common)?;
    let dir = out_dir(&rc)?;
    let aprime_path = require(aprime, rc.aprime.clone(), "reconstructed graph")?;
    let matrix = io::read_matrix(&aprime_path)?;
    let fusion = FusionGraph::from_matrix(matrix)?;
    graph::export_graph(&fusion, &dir.join("aprime.csv"), &dir.join("aprime_slice1.csv"))?;
    println!(
        "exported {s}x{s} graph ({} data lines) and {n}x{n} slice-1 block",
        fusion.side() * fusion.side(),
        s = fusion.side(),
        n = fusion.n()
    );
    Ok(())
}

fn cmd_bench(common: &CommonArgs, distances: Option<PathBuf>, nodes: Option<usize>) -> Result<()> {
    let rc = load_run_config(common)?;
    let dir = out_dir(&rc)?;
    let dist = require(distances, rc.distances.clone(), "distance file")?;
    let g = load_graph_from_distances(&dist, nodes)?;
    let seed = common.seed.unwrap_or(0);
    let opts = reconstruct_options(&rc, seed)?;

    let mut csv = String::from("method,n,seconds\n");
    for method in [
        ReconstructMethod::TuckerHooi,
        ReconstructMethod::L1Tucker,
        ReconstructMethod::TensorTrain,
    ] {
        let started = Instant::now();
        let _ = graph::reconstruct_fusion_graph(&g, method, &opts)?;
        let secs = started.elapsed().as_secs_f64();
        let _ = writeln!(csv, "{},{},{}", method.tag(), g.n(), secs);
        println!("{}: {:.4}s", method.tag(), secs);
    }
    fs::write(dir.join("bench.csv"), csv)?;
    Ok(())
}

fn cmd_synth(common: &CommonArgs, nodes: usize, steps: usize) -> Result<()> {
    let rc = load_run_config(common)?;
    let dir = out_dir(&rc)?;
    let seed = common.seed.unwrap_or(42);
    let (series, g) = synth_diffusion(nodes, steps, seed)?;

    data::save_flow(&series, &dir.join("flow.stf1"), FlowFormat::SttBinary)?;
    data::save_flow(&series, &dir.join("flow.csv"), FlowFormat::Csv)?;
    let mut dist = String::from("from,to,cost\n");
    for e in g.edges() {
        let _ = writeln!(dist, "{},{},{}", e.from, e.to, e.cost);
    }
    fs::write(dir.join("distances.csv"), dist)?;
    println!(
        "wrote synthetic series: {} steps x {} nodes (seed {seed}) plus ring distances",
        series.n_steps(),
        series.n_sensors()
    );
    Ok(())
}

// Knot for the model-config serializer so `--config` files written by hand
// and manifests share one format.
pub fn write_model_config_template(cfg: &ModelConfig, path: &Path) -> Result<()> {
    let mut kv = KvMap::default();
    model_config_to_kv(cfg, &mut kv);
    kv.save(path)
}
