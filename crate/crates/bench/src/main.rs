use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use congest_bench::config::ConstantsFile;
use congest_bench::{ExperimentConfig, RunOptions, SUITES, SuiteContext, run_config, run_suite, write_artifacts};

/// Runs experiment configs and acceptance suites over the CONGEST simulator.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    /// Experiment config (JSON).
    #[arg(long, required_unless_present_any = ["suite", "write_constants"])]
    config: Option<PathBuf>,
    /// Named suite, or `all`. Known: bc-oracle, agg-oracle, apsp, tradeoff-scaling, message-bound,
    /// structure, scheduler, smoothing, matching, cover, determinism.
    #[arg(long)]
    suite: Vec<String>,
    /// Output directory (defaults to the config's `out_dir`, then `out`).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Added to every seed.
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
    /// Constants file overriding the config's constants (suites use the defaults otherwise).
    #[arg(long)]
    constants: Option<PathBuf>,
    /// Write the default constants file to this path and exit.
    #[arg(long)]
    write_constants: Option<PathBuf>,
}

fn run_one(args: &Args, path: &Path) -> anyhow::Result<bool> {
    let config = ExperimentConfig::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let constants = args.constants.as_deref().map(ConstantsFile::load).transpose()?.map(|f| f.constants);
    let opts = RunOptions { jobs: args.jobs, seed_offset: args.seed_offset, constants };
    let out = match (&args.out_dir, &config.out_dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => base.join(d),
        (None, None) => PathBuf::from("out"),
    };
    let (result, artifacts) = run_config(&config, base, &opts)?;
    write_artifacts(&out, &result, &artifacts)?;
    for r in result.failures() {
        eprintln!("FAIL {} {}: {}", r.config, r.cell, r.error.as_deref().unwrap_or(""));
    }
    for f in &result.fits {
        if let Some(fit) = &f.fit {
            println!(
                "fit {} eps={:?}: slope {:.3} [{:.3}, {:.3}]",
                f.metric, f.epsilon, fit.slope, fit.ci95.0, fit.ci95.1
            );
        }
    }
    println!("{} cells, {} failed, artifacts in {}", result.rows.len(), result.failures().len(), out.display());
    Ok(result.failures().is_empty())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let go = || -> anyhow::Result<bool> {
        if let Some(p) = &args.write_constants {
            congest_bench::export::write_json(p, &ConstantsFile::default())?;
            return Ok(true);
        }
        let mut ok = true;
        if let Some(p) = &args.config {
            ok &= run_one(&args, p)?;
        }
        let names: Vec<String> = if args.suite.iter().any(|s| s == "all") {
            SUITES.iter().map(|s| s.to_string()).collect()
        } else {
            args.suite.clone()
        };
        let constants = match &args.constants {
            Some(p) => ConstantsFile::load(p)?.constants,
            None => Default::default(),
        };
        let ctx =
            SuiteContext { constants, jobs: args.jobs, seed_offset: args.seed_offset, out_dir: args.out_dir.clone() };
        for name in names {
            let r = run_suite(&name, &ctx).with_context(|| format!("suite {name}"))?;
            println!("{}", r.line());
            ok &= r.passed;
        }
        Ok(ok)
    };
    match go() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
