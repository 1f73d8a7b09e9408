//! Executing the cells of a config and collecting rows, fits and artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, bail};
use congest_core::aggsim::{AggParams, simulate_general, simulate_star};
use congest_core::algorithms::programs::{BellmanFord, Bfs, Flood, MinAggregation};
use congest_core::algorithms::{
    DistanceMatrix, apsp_unweighted_tradeoff, apsp_weighted_msgopt, bfs_apsp, bipartite_max_matching, dijkstra_apsp,
    hopcroft_karp, neighborhood_cover, validate_cover,
};
use congest_core::bcsim::{BcParams, simulate};
use congest_core::cluster::bs::HierarchyDump;
use congest_core::cluster::{
    BsParams, build_bs_hierarchy_with, ldc_decompose_with, validate_cluster_edge_cases, validate_ldc, validate_pruned,
    validate_radius,
};
use congest_core::constants::Constants;
use congest_core::graph::bipartition;
use congest_core::math::log2_at_least_one;
use congest_core::sim::{Mode, run_bcongest};
use congest_core::{Graph, RandomStream, SimMetrics};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AggKind, AlgorithmSpec, BcProgram, ExperimentConfig};
use crate::export;
use crate::fit::{Fit, fit_exponent};

/// One `(size, parameters, seed)` combination.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub n: usize,
    pub epsilon: Option<f64>,
    pub k: Option<usize>,
    pub w: Option<u64>,
    pub seed: u64,
}

impl Cell {
    /// Stable file-name stem.
    pub fn key(&self) -> String {
        let mut s = format!("n{}", self.n);
        if let Some(e) = self.epsilon {
            s += &format!("-eps{e}");
        }
        if let Some(k) = self.k {
            s += &format!("-k{k}");
        }
        if let Some(w) = self.w {
            s += &format!("-w{w}");
        }
        s + &format!("-s{}", self.seed)
    }
}

/// One row of `results.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub config: String,
    pub cell: String,
    pub n: usize,
    pub m: usize,
    pub epsilon: Option<f64>,
    pub k: Option<usize>,
    pub w: Option<u64>,
    pub seed: u64,
    pub rounds: u64,
    pub messages: u64,
    pub broadcasts: u64,
    pub max_edge_congestion: u64,
    pub in_bits: u64,
    pub out_bits: u64,
    pub attempts: u32,
    pub ok: bool,
    pub error: Option<String>,
    /// FNV-1a of the distance matrix for APSP cells.
    pub checksum: Option<String>,
    pub wall_time_ms: f64,
}

/// A fit of one metric over one parameter group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub config: String,
    pub metric: String,
    pub epsilon: Option<f64>,
    pub k: Option<usize>,
    pub w: Option<u64>,
    pub fit: Option<Fit>,
    pub error: Option<String>,
}

/// Everything a config run produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub constants: Constants,
    pub rows: Vec<Row>,
    pub fits: Vec<FitRecord>,
}

impl SweepResult {
    pub fn failures(&self) -> Vec<&Row> {
        self.rows.iter().filter(|r| !r.ok).collect()
    }
}

/// Rows without wall-clock fields: identical across reruns of the same config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub config: String,
    pub cell: String,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub rounds: u64,
    pub messages: u64,
    pub broadcasts: u64,
    pub max_edge_congestion: u64,
    pub in_bits: u64,
    pub out_bits: u64,
    pub attempts: u32,
    pub ok: bool,
    pub checksum: Option<String>,
}

impl From<&Row> for MetricsRow {
    fn from(r: &Row) -> Self {
        MetricsRow {
            config: r.config.clone(),
            cell: r.cell.clone(),
            n: r.n,
            m: r.m,
            seed: r.seed,
            rounds: r.rounds,
            messages: r.messages,
            broadcasts: r.broadcasts,
            max_edge_congestion: r.max_edge_congestion,
            in_bits: r.in_bits,
            out_bits: r.out_bits,
            attempts: r.attempts,
            ok: r.ok,
            checksum: r.checksum.clone(),
        }
    }
}

/// Run options shared by every config.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; 0 picks the default.
    pub jobs: usize,
    /// Added to every seed of the config.
    pub seed_offset: u64,
    /// Constants overriding the config's own.
    pub constants: Option<Constants>,
}

/// Cells of a config in their canonical order.
pub fn cells(config: &ExperimentConfig, seed_offset: u64) -> Vec<Cell> {
    let mut params: Vec<(Option<f64>, Option<usize>, Option<u64>)> = match &config.algorithm {
        AlgorithmSpec::ApspTradeoff { epsilons }
        | AlgorithmSpec::AggSim { epsilons, .. }
        | AlgorithmSpec::Hierarchy { epsilons } => epsilons.iter().map(|&e| (Some(e), None, None)).collect(),
        AlgorithmSpec::Cover { k, w } => {
            k.iter().flat_map(|&k| w.iter().map(move |&w| (None, Some(k), Some(w)))).collect()
        }
        _ => vec![(None, None, None)],
    };
    if params.is_empty() {
        params.push((None, None, None));
    }
    let mut out = Vec::new();
    for n in config.graph.sizes() {
        for &(epsilon, k, w) in &params {
            for &s in &config.seeds {
                out.push(Cell { n, epsilon, k, w, seed: s + seed_offset });
            }
        }
    }
    out
}

/// Result of one cell beyond its row.
#[derive(Clone, Debug, Default)]
pub struct CellArtifacts {
    pub distances: Option<DistanceMatrix>,
    pub hierarchy: Option<HierarchyDump>,
}

struct Measured {
    metrics: SimMetrics,
    broadcasts: u64,
    attempts: u32,
    artifacts: CellArtifacts,
}

impl Measured {
    fn new(metrics: SimMetrics, broadcasts: u64) -> Self {
        Measured { metrics, broadcasts, attempts: 1, artifacts: CellArtifacts::default() }
    }
}

fn roots(n: usize, r: &[usize]) -> Vec<bool> {
    (0..n).map(|v| r.contains(&v)).collect()
}

/// Checks `messages ≤ C · (In + Out + B) · log₂² n`.
pub fn message_bound_holds(n: usize, m: &SimMetrics, broadcasts: u64, c: &Constants) -> bool {
    let bound = c.message_bound * (m.in_bits + m.out_bits + broadcasts) as f64 * log2_at_least_one(n).powi(2);
    m.messages as f64 <= bound
}

fn bc_cell(g: &Graph, program: BcProgram, seed: u64, c: &Constants) -> anyhow::Result<Measured> {
    let n = g.n();
    let params = BcParams::from_constants(c);
    let direct_rounds = (n * n).max(16) as u64 * 4;
    macro_rules! compare {
        ($prog:expr, $inputs:expr, $t_a:expr) => {{
            let direct = run_bcongest(g, &$prog, &$inputs, direct_rounds, seed)?;
            let sim = simulate(g, &$prog, &$inputs, $t_a, seed, &params)?;
            if sim.outputs != direct.outputs {
                bail!("simulated outputs differ from the direct run");
            }
            if sim.broadcasts != direct.metrics.broadcasts {
                bail!("broadcasts {} differ from the direct run's {}", sim.broadcasts, direct.metrics.broadcasts);
            }
            Measured::new(sim.metrics, sim.broadcasts)
        }};
    }
    Ok(match program {
        BcProgram::Bfs => compare!(Bfs::default(), roots(n, &[seed as usize % n]), n as u64),
        BcProgram::Flood => compare!(Flood { mode: Mode::Bcongest }, roots(n, &[1 % n, 7 % n]), n as u64),
        BcProgram::BellmanFord => compare!(BellmanFord, vec![(); n], (n * n) as u64),
    })
}

fn agg_cell(g: &Graph, kind: AggKind, eps: f64, seed: u64, c: &Constants) -> anyhow::Result<Measured> {
    let n = g.n();
    let hseed = RandomStream::new(seed).derive("hierarchy", 0).seed_u64();
    let h = build_bs_hierarchy_with(g, &BsParams::from_constants(eps, c), hseed)?.prune(g)?;
    let inputs = roots(n, &[seed as usize % n]);
    let direct = run_bcongest(g, &Bfs::default(), &inputs, 4 * n as u64, seed)?;
    let params = AggParams::from_constants(c);
    let sim = match kind {
        AggKind::General => {
            simulate_general(g, &Bfs::default(), &MinAggregation, &inputs, &h, n as u64, seed, &params)?
        }
        AggKind::Star => simulate_star(g, &Bfs::default(), &MinAggregation, &inputs, &h, n as u64, seed, &params)?,
    };
    if sim.outputs != direct.outputs {
        bail!("simulated outputs differ from the direct run");
    }
    Ok(Measured::new(sim.metrics, sim.broadcasts))
}

fn run_cell(g: &Graph, spec: &AlgorithmSpec, cell: &Cell, c: &Constants) -> anyhow::Result<Measured> {
    let seed = cell.seed;
    match spec {
        AlgorithmSpec::ApspTradeoff { .. } => {
            let eps = cell.epsilon.expect("trade-off cells carry ε");
            let run = apsp_unweighted_tradeoff(g, eps, seed, c)?;
            if run.distances != bfs_apsp(g) {
                bail!("distances differ from the BFS oracle");
            }
            let mut out = Measured::new(run.metrics, run.broadcasts);
            out.attempts = run.attempts;
            out.artifacts.distances = Some(run.distances);
            Ok(out)
        }
        AlgorithmSpec::ApspWeighted => {
            let run = apsp_weighted_msgopt(g, seed, c)?;
            if run.distances != dijkstra_apsp(g) {
                bail!("distances differ from the Dijkstra oracle");
            }
            let mut out = Measured::new(run.metrics, run.broadcasts);
            out.artifacts.distances = Some(run.distances);
            Ok(out)
        }
        AlgorithmSpec::BcSim { program } => bc_cell(g, *program, seed, c),
        AlgorithmSpec::AggSim { simulator, .. } => agg_cell(g, *simulator, cell.epsilon.expect("ε"), seed, c),
        AlgorithmSpec::Matching => {
            let run = bipartite_max_matching(g, seed, c)?;
            let side = bipartition(g).context("graph is not bipartite")?;
            let hk = hopcroft_karp(g, &side).len();
            if run.matching.len() != hk {
                bail!("matching of size {} but Hopcroft-Karp finds {hk}", run.matching.len());
            }
            Ok(Measured::new(run.metrics, run.broadcasts))
        }
        AlgorithmSpec::Cover { .. } => {
            let (k, w) = (cell.k.expect("k"), cell.w.expect("W"));
            let run = neighborhood_cover(g, k, w, seed, c)?;
            validate_cover(g, &run.trees, k, w, c)?;
            let mut out = Measured::new(run.metrics, run.broadcasts);
            out.attempts = run.attempts;
            Ok(out)
        }
        AlgorithmSpec::Ldc => {
            let d = ldc_decompose_with(g, &BcParams::from_constants(c).ldc, seed)?;
            validate_ldc(g, &d)?;
            let mut out = Measured::new(d.metrics.clone(), 0);
            out.attempts = d.attempts;
            Ok(out)
        }
        AlgorithmSpec::Hierarchy { .. } => {
            let params = BsParams::from_constants(cell.epsilon.expect("ε"), c);
            let h = build_bs_hierarchy_with(g, &params, seed)?;
            validate_radius(g, &h)?;
            validate_cluster_edge_cases(g, &h, 0..g.m())?;
            let p = h.prune(g)?;
            validate_radius(g, &p)?;
            validate_pruned(&p)?;
            let mut out = Measured::new(h.metrics.clone(), 0);
            out.attempts = h.attempts;
            out.artifacts.hierarchy = Some(p.dump());
            Ok(out)
        }
    }
}

/// Runs one cell; failures become a row with `ok = false`.
pub fn execute(config: &ExperimentConfig, cell: &Cell, c: &Constants, base: &Path) -> (Row, CellArtifacts) {
    let start = Instant::now();
    let graph = config.graph.instance(cell.n, cell.seed, base);
    let (n, m) = graph.as_ref().map_or((cell.n, 0), |g| (g.n(), g.m()));
    let result = graph.and_then(|g| run_cell(&g, &config.algorithm, cell, c));
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut row = Row {
        config: config.name.clone(),
        cell: cell.key(),
        n,
        m,
        epsilon: cell.epsilon,
        k: cell.k,
        w: cell.w,
        seed: cell.seed,
        rounds: 0,
        messages: 0,
        broadcasts: 0,
        max_edge_congestion: 0,
        in_bits: 0,
        out_bits: 0,
        attempts: 0,
        ok: false,
        error: None,
        checksum: None,
        wall_time_ms,
    };
    match result {
        Ok(x) => {
            row.rounds = x.metrics.rounds;
            row.messages = x.metrics.messages;
            row.broadcasts = x.broadcasts;
            row.max_edge_congestion = x.metrics.max_edge_congestion();
            row.in_bits = x.metrics.in_bits;
            row.out_bits = x.metrics.out_bits;
            row.attempts = x.attempts;
            row.ok = true;
            row.checksum = x.artifacts.distances.as_ref().map(|d| format!("{:016x}", d.checksum()));
            (row, x.artifacts)
        }
        Err(e) => {
            row.error = Some(format!("{e:#}"));
            (row, CellArtifacts::default())
        }
    }
}

/// Fits `rounds` and `messages` per parameter group over successful rows.
pub fn fits(config: &str, rows: &[Row]) -> Vec<FitRecord> {
    type Group = (Option<u64>, Option<usize>, Option<u64>);
    let mut groups: BTreeMap<Group, Vec<&Row>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.ok) {
        groups.entry((r.epsilon.map(f64::to_bits), r.k, r.w)).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((eps, k, w), rs) in groups {
        for metric in ["rounds", "messages"] {
            let pts: Vec<(usize, f64)> =
                rs.iter().map(|r| (r.n, if metric == "rounds" { r.rounds } else { r.messages } as f64)).collect();
            let (fit, error) = match fit_exponent(&pts) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            out.push(FitRecord {
                config: config.into(),
                metric: metric.into(),
                epsilon: eps.map(f64::from_bits),
                k,
                w,
                fit,
                error,
            });
        }
    }
    out
}

/// Runs every cell of `config` on a worker pool; rows come back in cell order.
pub fn run_config(
    config: &ExperimentConfig,
    base: &Path,
    opts: &RunOptions,
) -> anyhow::Result<(SweepResult, Vec<CellArtifacts>)> {
    let constants = match opts.constants {
        Some(c) => c,
        None => config.constants(base)?,
    };
    let cells = cells(config, opts.seed_offset);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.jobs).build()?;
    let results: Vec<(Row, CellArtifacts)> =
        pool.install(|| cells.par_iter().map(|cell| execute(config, cell, &constants, base)).collect());
    let (rows, artifacts): (Vec<Row>, Vec<CellArtifacts>) = results.into_iter().unzip();
    let fits = fits(&config.name, &rows);
    Ok((SweepResult { config: config.clone(), constants, rows, fits }, artifacts))
}

/// Writes `results.csv`, `results.json`, `fits.json`, `metrics.json` and any per-cell
/// artifacts under `dir`.
pub fn write_artifacts(dir: &Path, result: &SweepResult, artifacts: &[CellArtifacts]) -> anyhow::Result<Vec<PathBuf>> {
    let mut written =
        vec![dir.join("results.csv"), dir.join("results.json"), dir.join("fits.json"), dir.join("metrics.json")];
    export::write_csv(&written[0], &result.rows)?;
    export::write_json(&written[1], result)?;
    export::write_json(&written[2], &result.fits)?;
    let metrics: Vec<MetricsRow> = result.rows.iter().map(MetricsRow::from).collect();
    export::write_json(&written[3], &metrics)?;
    for (row, a) in result.rows.iter().zip(artifacts) {
        if result.config.outputs.distances
            && let Some(d) = &a.distances
        {
            export::write_distances(&dir.join("distances"), &row.cell, d)?;
            written.push(dir.join("distances").join(format!("{}.bin", row.cell)));
        }
        if result.config.outputs.hierarchies
            && let Some(h) = &a.hierarchy
        {
            let p = dir.join("hierarchies").join(format!("{}.json", row.cell));
            export::write_hierarchy(&p, h)?;
            written.push(p);
        }
    }
    Ok(written)
}
