//! Experiment configurations and the versioned constants file.

use std::path::{Path, PathBuf};

use anyhow::{Context, bail};
use congest_core::constants::Constants;
use congest_core::graph::{GraphKind, bipartite_gnp, connected_gnp, generate};
use congest_core::{Graph, RandomStream};
use serde::{Deserialize, Serialize};

/// Version written into constants files by this build.
pub const CONSTANTS_VERSION: u32 = 1;

/// Constants as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsFile {
    pub version: u32,
    pub constants: Constants,
}

impl Default for ConstantsFile {
    fn default() -> Self {
        ConstantsFile { version: CONSTANTS_VERSION, constants: Constants::default() }
    }
}

impl ConstantsFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: ConstantsFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if file.version != CONSTANTS_VERSION {
            bail!("{}: constants version {} (this build reads {CONSTANTS_VERSION})", path.display(), file.version);
        }
        Ok(file)
    }
}

/// Where a config takes its constants from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstantsSource {
    /// Path to a constants file, relative to the config file.
    File(PathBuf),
    /// Inline constants; missing fields take their defaults.
    Inline(Constants),
}

impl Default for ConstantsSource {
    fn default() -> Self {
        ConstantsSource::Inline(Constants::default())
    }
}

/// Graph family of a config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Path,
    Grid,
    Clique,
    Gnp {
        p: f64,
    },
    /// `G(n, p)` with `p = min(1, factor · log₂ n / n)`.
    NormalizedGnp {
        factor: f64,
    },
    /// Parts of sizes `⌈n/2⌉` and `⌊n/2⌋`.
    BipartiteGnp {
        p: f64,
    },
    /// Bipartite with `p = min(1, factor · log₂ n / n)`.
    NormalizedBipartiteGnp {
        factor: f64,
    },
    /// Edge list on disk; `sizes` is ignored.
    File {
        path: PathBuf,
    },
}

/// Graph instances of a config: one per size and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub family: Family,
    #[serde(default)]
    pub sizes: Vec<usize>,
    /// Uniform integer weights in `[lo, hi]`.
    #[serde(default)]
    pub weights: Option<(u64, u64)>,
    /// Resample random families until connected.
    #[serde(default = "yes")]
    pub connected: bool,
}

fn yes() -> bool {
    true
}

/// Resampling attempts when a connected instance is requested.
const CONNECT_ATTEMPTS: u32 = 100;

impl GraphSpec {
    /// Sizes to sweep; a file graph has exactly one (unknown until loaded, reported as 0).
    pub fn sizes(&self) -> Vec<usize> {
        match self.family {
            Family::File { .. } => vec![0],
            _ => self.sizes.clone(),
        }
    }

    /// Instance of size `n` under `seed`. `base` resolves relative file paths.
    pub fn instance(&self, n: usize, seed: u64, base: &Path) -> anyhow::Result<Graph> {
        let gseed = RandomStream::new(seed).derive("graph", n as u64).seed_u64();
        let random = |p: f64| -> anyhow::Result<Graph> {
            if self.connected {
                match connected_gnp(n, p, gseed, CONNECT_ATTEMPTS)? {
                    Some((g, _)) => Ok(g),
                    None => bail!("no connected G({n}, {p}) in {CONNECT_ATTEMPTS} samples"),
                }
            } else {
                Ok(generate(GraphKind::Gnp { p }, n, gseed)?)
            }
        };
        let g = match &self.family {
            Family::Path => generate(GraphKind::Path, n, gseed)?,
            Family::Grid => generate(GraphKind::Grid, n, gseed)?,
            Family::Clique => generate(GraphKind::Clique, n, gseed)?,
            Family::Gnp { p } => random(*p)?,
            Family::NormalizedGnp { factor } => random(normalized_p(n, *factor))?,
            Family::BipartiteGnp { p } => self.bipartite(n, *p, gseed)?,
            Family::NormalizedBipartiteGnp { factor } => self.bipartite(n, normalized_p(n, *factor), gseed)?,
            Family::File { path } => {
                let path = base.join(path);
                let f = std::fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
                crate::edgelist::read(std::io::BufReader::new(f))?
            }
        };
        Ok(match self.weights {
            Some((lo, hi)) => {
                g.with_random_weights(lo, hi, RandomStream::new(gseed).derive("weights", 0).seed_u64())?
            }
            None => g,
        })
    }

    fn bipartite(&self, n: usize, p: f64, seed: u64) -> anyhow::Result<Graph> {
        let (l, r) = (n.div_ceil(2), n / 2);
        let tries = if self.connected { CONNECT_ATTEMPTS } else { 1 };
        let rs = RandomStream::new(seed);
        for a in 0..tries as u64 {
            let g = bipartite_gnp(l, r, p, rs.derive("resample", a).seed_u64())?;
            if !self.connected || g.is_connected() {
                return Ok(g);
            }
        }
        bail!("no connected bipartite G({l}, {r}, {p}) in {tries} samples")
    }
}

/// `min(1, factor · log₂ n / n)`.
pub fn normalized_p(n: usize, factor: f64) -> f64 {
    (factor * congest_core::math::log2_at_least_one(n) / n as f64).min(1.0)
}

/// Program run under the cluster simulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcProgram {
    /// BFS from node `seed mod n`.
    Bfs,
    /// Token flood from nodes `1` and `7 mod n`.
    Flood,
    /// Pipelined Bellman-Ford from every node.
    BellmanFord,
}

/// Hierarchy simulation used by `agg_sim`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggKind {
    General,
    Star,
}

/// Algorithm of a config with its parameter lists; cells are their product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum AlgorithmSpec {
    ApspTradeoff {
        epsilons: Vec<f64>,
    },
    ApspWeighted,
    BcSim {
        program: BcProgram,
    },
    /// Min-aggregation BFS from node `seed mod n`.
    AggSim {
        simulator: AggKind,
        epsilons: Vec<f64>,
    },
    Matching,
    Cover {
        k: Vec<usize>,
        w: Vec<u64>,
    },
    Ldc,
    Hierarchy {
        epsilons: Vec<f64>,
    },
}

/// Optional per-cell artifacts.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    /// Distance matrices (binary plus JSON summary) of APSP cells.
    #[serde(default)]
    pub distances: bool,
    /// Hierarchy dumps of `hierarchy` cells.
    #[serde(default)]
    pub hierarchies: bool,
}

/// One experiment: a graph family, an algorithm, seeds and constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub graph: GraphSpec,
    pub algorithm: AlgorithmSpec,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub constants: ConstantsSource,
    #[serde(default)]
    pub outputs: OutputSpec,
    /// Output directory, relative to the config file; `--out-dir` overrides it.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Resolved constants.
    pub fn constants(&self, base: &Path) -> anyhow::Result<Constants> {
        match &self.constants {
            ConstantsSource::Inline(c) => Ok(*c),
            ConstantsSource::File(p) => Ok(ConstantsFile::load(&base.join(p))?.constants),
        }
    }
}
