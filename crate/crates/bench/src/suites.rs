//! Named property suites, one per acceptance criterion.

use std::path::{Path, PathBuf};

use anyhow::Context;
use congest_core::aggsim::{
    AggParams, Simulator, audit_distinct_sources, combine_on_hierarchies, combine_with_smoothing, schedule_bfs,
};
use congest_core::algorithms::apsp::limited_plan;
use congest_core::cluster::{BsParams, build_bs_hierarchy_with, build_ensemble_with, kappa_for};
use congest_core::constants::Constants;
use congest_core::math::{ln_at_least_one, powf};
use congest_core::{Graph, RandomStream};
use serde::Serialize;

use crate::config::{
    AggKind, AlgorithmSpec, BcProgram, ConstantsSource, ExperimentConfig, Family, GraphSpec, OutputSpec,
};
use crate::export;
use crate::fit::fit_exponent;
use crate::run::{
    CellArtifacts, MetricsRow, Row, RunOptions, SweepResult, message_bound_holds, run_config, write_artifacts,
};

/// Suite names in criterion order.
pub const SUITES: [&str; 11] = [
    "bc-oracle",
    "agg-oracle",
    "apsp",
    "tradeoff-scaling",
    "message-bound",
    "structure",
    "scheduler",
    "smoothing",
    "matching",
    "cover",
    "determinism",
];

/// Settings shared by every suite.
#[derive(Clone, Debug, Default)]
pub struct SuiteContext {
    pub constants: Constants,
    pub jobs: usize,
    pub seed_offset: u64,
    /// Where sweeps write their artifacts; nothing is written when `None`.
    pub out_dir: Option<PathBuf>,
}

/// Verdict of one suite.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub criterion: usize,
    pub name: String,
    pub passed: bool,
    /// One line.
    pub summary: String,
    pub details: Vec<String>,
    #[serde(skip)]
    pub sweeps: Vec<(SweepResult, Vec<CellArtifacts>)>,
}

impl SuiteReport {
    /// `criterion N [name]: PASS|FAIL summary`.
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!("criterion {:>2} [{}]: {verdict} {}", self.criterion, self.name, self.summary)
    }
}

/// Runs the suite called `name`.
pub fn run_suite(name: &str, ctx: &SuiteContext) -> anyhow::Result<SuiteReport> {
    let criterion = SUITES.iter().position(|&s| s == name).context(format!("unknown suite {name:?}"))? + 1;
    let mut report = match criterion {
        1 => bc_oracle(ctx),
        2 => agg_oracle(ctx),
        3 => apsp(ctx),
        4 => tradeoff_scaling(ctx),
        5 => message_bound(ctx),
        6 => structure(ctx),
        7 => scheduler(ctx),
        8 => smoothing(ctx),
        9 => matching(ctx),
        10 => cover(ctx),
        _ => determinism(ctx),
    }?;
    report.criterion = criterion;
    report.name = name.into();
    if let Some(dir) = &ctx.out_dir {
        let dir = dir.join(name);
        for (sweep, artifacts) in &report.sweeps {
            write_artifacts(&dir.join(&sweep.config.name), sweep, artifacts)?;
        }
        export::write_json(&dir.join("report.json"), &report)?;
    }
    Ok(report)
}

fn report(
    passed: bool,
    summary: String,
    details: Vec<String>,
    sweeps: Vec<(SweepResult, Vec<CellArtifacts>)>,
) -> SuiteReport {
    SuiteReport { criterion: 0, name: String::new(), passed, summary, details, sweeps }
}

fn config(
    name: &str,
    family: Family,
    sizes: &[usize],
    algorithm: AlgorithmSpec,
    seeds: u64,
    c: &Constants,
) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        graph: GraphSpec { family, sizes: sizes.to_vec(), weights: None, connected: true },
        algorithm,
        seeds: (0..seeds).collect(),
        constants: ConstantsSource::Inline(*c),
        outputs: OutputSpec::default(),
        out_dir: None,
    }
}

fn sweep(cfg: &ExperimentConfig, ctx: &SuiteContext) -> anyhow::Result<(SweepResult, Vec<CellArtifacts>)> {
    let opts = RunOptions { jobs: ctx.jobs, seed_offset: ctx.seed_offset, constants: Some(ctx.constants) };
    run_config(cfg, Path::new("."), &opts)
}

/// Runs `configs` and passes when every cell validated.
fn all_cells_ok(configs: Vec<ExperimentConfig>, ctx: &SuiteContext) -> anyhow::Result<SuiteReport> {
    let mut sweeps = Vec::new();
    let mut details = Vec::new();
    let (mut total, mut bad) = (0, 0);
    for cfg in configs {
        let s = sweep(&cfg, ctx)?;
        total += s.0.rows.len();
        for r in s.0.failures() {
            bad += 1;
            details.push(format!("{} {}: {}", r.config, r.cell, r.error.as_deref().unwrap_or("")));
        }
        let reseeds = s.0.rows.iter().map(|r| r.attempts.saturating_sub(1)).max().unwrap_or(0);
        details.push(format!("{}: {} cells, most reseeds {reseeds}", cfg.name, s.0.rows.len()));
        sweeps.push(s);
    }
    Ok(report(bad == 0, format!("{}/{total} cells equal their oracle", total - bad), details, sweeps))
}

fn bc_corpus(c: &Constants) -> Vec<ExperimentConfig> {
    let gnp = Family::Gnp { p: 0.3 };
    let mut bf =
        config("bellman-ford", gnp.clone(), &[64], AlgorithmSpec::BcSim { program: BcProgram::BellmanFord }, 50, c);
    bf.graph.weights = Some((1, 100));
    vec![
        config("bfs", gnp.clone(), &[64], AlgorithmSpec::BcSim { program: BcProgram::Bfs }, 50, c),
        config("flood", gnp, &[64], AlgorithmSpec::BcSim { program: BcProgram::Flood }, 50, c),
        bf,
    ]
}

fn bc_oracle(ctx: &SuiteContext) -> anyhow::Result<SuiteReport> {
    all_cells_ok(bc_corpus(&ctx.constants), ctx)
}

fn agg_oracle(ctx: &SuiteContext) -> anyhow::Result<SuiteReport> {
    let c = &ctx.constants;
    let gnp = Family::Gnp { p: 0.2 };
    let general = AlgorithmSpec::AggSim { simulator: AggKind::General, epsilons: vec![1.0 / 3.0, 0.5] };
    let star = AlgorithmSpec::AggSim { simulator: AggKind::Star, epsilons: vec![0.5] };
    all_cells_ok(
        vec![config("general", gnp.clone(), &[64, 128], general, 25, c), config("star", gnp, &[64, 128], star, 25, c)],
        ctx,
    )
}

fn apsp(ctx: &SuiteContext) -> anyhow::Result<SuiteReport> {
    let c = &ctx.constants;
    let tradeoff = AlgorithmSpec::ApspTradeoff { epsilons: vec![0.25, 0.5, 1.0] };
    let mut weighted = config("weighted", Family::Gnp { p: 0.3 }, &[64], AlgorithmSpec::ApspWeighted, 25, c);
    weighted.graph.weights = Some((1, 100));
    all_cells_ok(vec![config("tradeoff", Family::Gnp { p: 0.1 }, &[128], tradeoff, 10, c), weighted], ctx)
}

/// Message exponent window `2 + ε ± 0.4`, round exponent window `2 − ε ± 0.4`.
pub const SCALING_TOLERANCE: f64 = 0.4;

fn tradeoff_scaling(ctx: &SuiteContext) -> anyhow::Result<SuiteReport> {
    let c = &ctx.constants;
    let algo = AlgorithmSpec::ApspTradeoff { epsilons: vec![0.5, 1.0] };
    let cfg = config("tradeoff-scaling", Family::NormalizedGnp { factor: 16.0 }, &[64, 128, 256], algo, 5, c);
    let (result, artifacts) = sweep(&cfg, ctx)?;
    let mut passed = result.failures().is_empty();
    let mut details: Vec<String> = result.failures().iter().map(|r| format!("{}: {:?}", r.cell, r.error)).collect();
    let mut summary = Vec::new();
    for f in &result.fits {
        let eps = f.epsilon.expect("trade-off fits carry ε");
        let target = if f.metric == "messages" { 2.0 + eps } else { 2.0 - eps };
        match &f.fit {
            Some(fit) => {
                let ok = (fit.slope - target).abs() <= SCALING_TOLERANCE;
                passed &= ok;
                summary.push(format!("{}@ε={eps}: {:.2} (target {target:.1})", f.metric, fit.slope));
                details.push(format!(
                    "ε = {eps}, {}: slope {:.3}, 95% CI [{:.3}, {:.3}], window [{:.1}, {:.1}]{}",
                    f.metric,
                    fit.slope,
                    fit.ci95.0,
                    fit.ci95.1,
                    target - SCALING_TOLERANCE,
                    target + SCALING_TOLERANCE,
                    if ok { "" } else { " OUTSIDE" }
                ));
            }
            None => {
                passed = false;
                details.push(format!("ε = {eps}, {}: {}", f.metric, f.error.as_deref().unwrap_or("no fit")));
            }
        }
    }

    // Diagnostics only; they do not change the verdict. Messages of n BFS trees scale with
    // n · m, so the edge exponent of the family bounds what the message fit can show.
    let slope_of = |pts: Vec<(usize, f64)>| fit_exponent(&pts).map(|f| f.slope).unwrap_or(f64::NAN);
    let one_seed: Vec<&Row> = result.rows.iter().filter(|r| r.ok && r.epsilon == Some(1.0)).collect();
    details.push(format!(
        "edge exponent of the family: {:.3}",
        slope_of(one_seed.iter().map(|r| (r.n, r.m as f64)).collect())
    ));
    for eps in [0.5, 1.0] {
        let per_nm = result
            .rows
            .iter()
            .filter(|r| r.ok && r.epsilon == Some(eps))
            .map(|r| (r.n, r.messages as f64 / (r.n * r.m) as f64))
            .collect();
        details.push(format!("ε = {eps}: exponent of messages / (n · m) {:.3}", slope_of(per_nm)));
    }
    let dense = config(
        "dense-control",
        Family::Gnp { p: 0.5 },
        &[64, 128, 256],
        AlgorithmSpec::ApspTradeoff { epsilons: vec![1.0] },
        2,
        c,
    );
    let (d, _) = sweep(&dense, ctx)?;
    for f in d.fits.iter().filter(|f| f.metric == "messages") {
        let slope = f.fit.as_ref().map_or(f64::NAN, |f| f.slope);
        details.push(format!("dense control G(n, 1/2), ε = 1: message exponent {slope:.3}"));
    }
    Ok(report(passed, summary.join(", "), details, vec![(result, artifacts)]))
}

fn message_bound(ctx: &SuiteContext) -> anyhow::Result<SuiteReport> {
    let c = &ctx.constants;
    let mut sweeps = Vec::new();
    let mut details = Vec::new();
    let (mut total, mut bad, mut worst) = (0, 0, 0.0f64);
    for cfg in bc_corpus(c) {
        let s = sweep(&cfg, ctx)?;
        for r in &s.0.rows {
            total += 1;
            let mut m = congest_core::SimMetrics::with_edges(0);
            (m.messages, m.in_bits, m.out_bits) = (r.messages, r.in_bits, r.out_bits);
            let base =
                (r.in_bits + r.out_bits + r.broadcasts) as f64 * congest_core::math::log2_at_least_one(r.n).powi(2);
            worst = worst.max(r.messages as f64 / base);
            if !r.ok || !message_bound_holds(r.n, &m, r.broadcasts, c) {
                bad += 1;
                details.push(format!("{} {}: {} messages, ok = {}", r.config, r.cell, r.messages, r.ok));
            }
        }
        sweeps.push(s);
    }
    details.push(format!("largest messages / ((In + Out + B) · log₂² n) = {worst:.4}, C = {}", c.message_bound));
    let summary = format!("{}/{total} runs within C = {} (worst ratio {worst:.4})", total - bad, c.message_bound);
    Ok(report(bad == 0, summary, details, sweeps))
}

/// Builds per rarity estimate.
pub const RARITY_BUILDS: u64 = 1000;

fn structure(ctx: &SuiteContext) -> anyhow::Result<SuiteReport> {
    let c = &ctx.constants;
    let ldc = config("ldc", Family::Gnp { p: 0.1 }, &[256], AlgorithmSpec::Ldc, 100, c);
    let bs256 = config(
        "hierarchy-256",
        Family::Gnp { p: 0.1 },
        &[256],
        AlgorithmSpec::Hierarchy { epsilons: vec![0.5, 1.0 / 3.0] },
        100,
        c,
    );
    let bs64 = config(
        "hierarchy-64",
        Family::Gnp { p: 0.12 },
        &[64],
        AlgorithmSpec::Hierarchy { epsilons: vec![0.5, 1.0 / 3.0, 0.25] },
        100,
        c,
    );
    let mut r = all_cells_ok(vec![ldc, bs256, bs64], ctx)?;

    // Cluster-edge rarity: mean over edges and builds of "e is a cluster edge".
    let eps = 0.5;
    let g = GraphSpec { family: Family::Gnp { p: 0.1 }, sizes: vec![256], weights: None, connected: true }.instance(
        256,
        ctx.seed_offset,
        Path::new("."),
    )?;
    let params = BsParams::from_constants(eps, c);
    let rs = RandomStream::new(ctx.seed_offset).derive("rarity", 0);
    let hits = (0..RARITY_BUILDS)
        .map(|b| -> anyhow::Result<u64> {
            let h = build_bs_hierarchy_with(&g, &params, rs.derive("build", b).seed_u64())?.prune(&g)?;
            Ok(h.cluster_edge_mask(&g).into_iter().filter(|&x| x).count() as u64)
        })
        .sum::<anyhow::Result<u64>>()?;
    let rate = hits as f64 / (g.m() as f64 * RARITY_BUILDS as f64);
    let bound = c.rarity_factor * kappa_for(eps) as f64 * powf(g.n(), -eps);
    let rare = rate <= bound;
    r.details.push(format!("rarity over {RARITY_BUILDS} builds: {rate:.4} ≤ {bound:.4}: {rare}"));
    r.summary = format!("{}; cluster-edge rate {rate:.4} (bound {bound:.4})", r.summary);
    r.passed &= rare;
    Ok(r)
}

fn gnp_instance(n: usize, p: f64, seed: u64) -> anyhow::Result<Graph> {
    GraphSpec { family: Family::Gnp { p }, sizes: vec![n], weights: None, connected: true }.instance(
        n,
        seed,
        Path::new("."),
    )
}

fn scheduler(ctx: &SuiteContext) -> anyhow::Result<SuiteReport> {
    let c = &ctx.constants;
    let n = 256;
    let bound = c.distinct_sources_factor * ln_at_least_one(n);
    let mut details = Vec::new();
    let mut worst = 0;
    let mut passed = true;
    for s in 0..5 {
        let seed = s + ctx.seed_offset;
        let g = gnp_instance(n, 0.1, seed)?;
        let sources: Vec<usize> = (0..n).collect();
        let plan = schedule_bfs(&g, &sources, None, seed, c)?;
        let audit = audit_distinct_sources(&g, &plan, seed)?;
        let exact = (0..n).all(|src| {
            let hops = g.bfs_hops(src);
            (0..n).all(|v| audit.outputs[v].trees[src].map(|t| t.0) == hops[v])
        });
        let ok = audit.max_distinct as f64 <= bound && exact && audit.rounds <= plan.t_a;
        passed &= ok;
        worst = worst.max(audit.max_distinct);
        details.push(format!(
            "seed {seed}: max distinct {} over {} samples, trees exact {exact}, rounds {} of T_A {}",
            audit.max_distinct, audit.samples, audit.rounds, plan.t_a
        ));
    }
    Ok(report(passed, format!("max distinct sources {worst} ≤ {bound:.1}"), details, Vec::new()))
}

fn smoothing(ctx: &SuiteContext) -> anyhow::Result<SuiteReport> {
    let c = &ctx.constants;
    let (n, eps) = (256, 0.5);
    let params = AggParams { shadow: false, ..AggParams::from_constants(c) };
    let bs = BsParams::from_constants(eps, c);
    let mut wins = 0;
    let mut details = Vec::new();
    let mut exact = true;
    for s in 0..10 {
        let seed = s + ctx.seed_offset;
        let g = gnp_instance(n, 0.1, seed)?;
        let plan = limited_plan(&g, eps, seed, c)?;
        let ens = combine_with_smoothing(&g, &plan.components, &bs, Simulator::General, seed, &params)?;
        // The control puts every component on the ensemble's first hierarchy.
        let first = build_ensemble_with(&g, &bs, RandomStream::new(seed).derive("smoothing", 0).seed_u64())?;
        let h0 = first.hierarchies.into_iter().next().expect("ζ ≥ 1");
        let ctl = combine_on_hierarchies(&g, &plan.components, &[h0], &|_| 0, Simulator::General, seed, &params)?;
        exact &= ens.outputs == ctl.outputs;
        let win = ens.audit.max_cluster < ctl.audit.max_cluster;
        wins += usize::from(win);
        details.push(format!(
            "seed {seed}: ensemble {} vs control {} max cluster-edge load ({} components, ζ = {})",
            ens.audit.max_cluster,
            ctl.audit.max_cluster,
            plan.components.len(),
            ens.hierarchies_used
        ));
    }
    let passed = wins >= 9 && exact;
    Ok(report(passed, format!("ensemble strictly lower on {wins}/10 paired seeds"), details, Vec::new()))
}

fn matching(ctx: &SuiteContext) -> anyhow::Result<SuiteReport> {
    let c = &ctx.constants;
    let family = Family::NormalizedBipartiteGnp { factor: 4.0 };
    all_cells_ok(vec![config("matching", family, &[20, 60, 100, 140, 200], AlgorithmSpec::Matching, 20, c)], ctx)
}

fn cover(ctx: &SuiteContext) -> anyhow::Result<SuiteReport> {
    let c = &ctx.constants;
    let algo = AlgorithmSpec::Cover { k: vec![1, 2], w: vec![1, 2] };
    all_cells_ok(vec![config("cover", Family::Gnp { p: 0.1 }, &[128], algo, 20, c)], ctx)
}

fn metrics_bytes(sweeps: &[(SweepResult, Vec<CellArtifacts>)]) -> anyhow::Result<Vec<u8>> {
    let rows: Vec<MetricsRow> = sweeps.iter().flat_map(|s| s.0.rows.iter().map(MetricsRow::from)).collect();
    Ok(serde_json::to_vec_pretty(&rows)?)
}

fn determinism(ctx: &SuiteContext) -> anyhow::Result<SuiteReport> {
    let corpus = bc_corpus(&ctx.constants);
    // Run once single-threaded and once on the requested pool.
    let serial = SuiteContext { jobs: 1, ..ctx.clone() };
    let a: Vec<_> = corpus.iter().map(|cfg| sweep(cfg, &serial)).collect::<anyhow::Result<_>>()?;
    let b: Vec<_> = corpus.iter().map(|cfg| sweep(cfg, ctx)).collect::<anyhow::Result<_>>()?;
    let dir = match &ctx.out_dir {
        Some(d) => d.join("determinism"),
        None => std::env::temp_dir().join(format!("congest-bench-determinism-{}", std::process::id())),
    };
    let (pa, pb) = (dir.join("run-a").join("metrics.json"), dir.join("run-b").join("metrics.json"));
    for (p, s) in [(&pa, &a), (&pb, &b)] {
        std::fs::create_dir_all(p.parent().expect("has a parent"))?;
        std::fs::write(p, metrics_bytes(s)?)?;
    }
    let (ba, bb) = (std::fs::read(&pa)?, std::fs::read(&pb)?);
    if ctx.out_dir.is_none() {
        std::fs::remove_dir_all(&dir).ok();
    }
    let (ha, hb) = (export::sha256_hex(&ba), export::sha256_hex(&bb));
    let rows: usize = a.iter().map(|s| s.0.rows.len()).sum();
    let passed = ba == bb && a.iter().all(|s| s.0.failures().is_empty());
    let details = vec![format!("run a sha256 {ha}"), format!("run b sha256 {hb}")];
    Ok(report(passed, format!("{rows} rows, metrics files identical: {}", ba == bb), details, Vec::new()))
}
