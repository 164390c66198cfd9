//! Command-line front end: argument parsing, stage dispatch and exit codes.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod stages;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use diachron_core::corpus::write_jsonl;
use diachron_core::syngen::{generate, PlantSpec};
use diachron_core::{Format, PeriodId};
use log::error;

use crate::config::{ClusterSection, Overrides, RunConfig};
use crate::error::{CliError, Result, Stage, StageExt};

#[derive(Debug, Parser)]
#[command(name = "diachron", version, about = "Diachronic cluster analysis of bibliographic keywords")]
pub struct Cli {
    /// Worker threads; 1 is the bit-exactness reference.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Seed overriding the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct StageArgs {
    #[arg(long)]
    pub config: PathBuf,

    /// Artifact directory; overrides `output_dir` from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Input format overriding the config.
    #[arg(long)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Three blocks, shared terms and a second-period novel block.
    Default,
    /// Three disjoint blocks.
    Blocks,
    /// Two groups of linked blocks plus singletons.
    Networks,
    /// 10 000 documents over 5 000 terms.
    Scale,
}

impl Preset {
    /// Generator spec and matching (k_p1, k_p2).
    pub fn spec(self) -> (PlantSpec, usize, usize) {
        match self {
            Preset::Default => (PlantSpec::default(), 3, 4),
            Preset::Blocks => (PlantSpec::blocks_only(3, 200), 3, 3),
            Preset::Networks => (PlantSpec::networks(&[3, 2], 2), 7, 7),
            Preset::Scale => (PlantSpec::scale(), 20, 20),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and validate the corpus.
    Ingest(StageArgs),
    /// Classify terms by diffusion indicators.
    Terms(StageArgs),
    /// Axial K-means per period.
    Cluster(StageArgs),
    /// PCA maps and cluster networks.
    Map(StageArgs),
    /// Cross-period linkage and category cross-table.
    Link(StageArgs),
    /// Re-render SVG maps from their JSON.
    Report(StageArgs),
    /// Every stage in order, atomically.
    Run(StageArgs),
    /// Write a synthetic corpus, its ground truth and a matching config.
    Syngen {
        #[arg(long, value_enum, default_value = "default")]
        preset: Preset,
        #[arg(long)]
        out: PathBuf,
    },
}

pub const RECORDS_FILE: &str = "records.jsonl";
pub const TRUTH_FILE: &str = "truth.json";
pub const CONFIG_FILE: &str = "config.json";

/// Parse, execute and map failures to exit codes.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?;
        return pool.install(|| dispatch(cli));
    }
    dispatch(cli)
}

fn dispatch(cli: &Cli) -> Result<()> {
    let (stage, args) = match &cli.command {
        Command::Syngen { preset, out } => return syngen(*preset, cli.seed, out),
        Command::Ingest(a) => (Stage::Ingest, a),
        Command::Terms(a) => (Stage::Terms, a),
        Command::Cluster(a) => (Stage::Cluster, a),
        Command::Map(a) => (Stage::Map, a),
        Command::Link(a) => (Stage::Link, a),
        Command::Report(a) => (Stage::Report, a),
        Command::Run(a) => (Stage::Run, a),
    };
    let overrides = Overrides {
        seed: cli.seed,
        format: args.format,
        out: args.out.clone(),
    };
    let resolved = config::load(&args.config, &overrides)?;
    if stage == Stage::Run {
        stages::run_all(&resolved)
    } else {
        stages::run_stage(stage, &resolved, &resolved.out_dir)
    }
}

fn syngen(preset: Preset, seed: Option<u64>, out: &Path) -> Result<()> {
    let stage = Stage::Syngen;
    let (mut spec, k_p1, k_p2) = preset.spec();
    if let Some(s) = seed {
        spec.seed = s;
    }
    let (records, truth) = generate(&spec).at(stage)?;
    fs::create_dir_all(out).map_err(|e| CliError::io(stage, out, e))?;
    let mut buf = Vec::new();
    write_jsonl(&records, &mut buf).map_err(|e| CliError::io(stage, out, e))?;
    artifacts::write_bytes(stage, &out.join(RECORDS_FILE), &buf)?;
    artifacts::write_json(stage, &out.join(TRUTH_FILE), &truth)?;
    let config = RunConfig {
        input: PathBuf::from(RECORDS_FILE),
        format: Format::Jsonl,
        periods: spec.periods,
        min_df: 2,
        weighting: Default::default(),
        thresholds: Default::default(),
        cluster: ClusterSection {
            k: k_p1,
            k_p2: (k_p2 != k_p1).then_some(k_p2),
            ..Default::default()
        },
        seed: spec.seed,
        edge_threshold: 0.2,
        link_threshold: 0.3,
        top_m: 10,
        gini_cells: Default::default(),
        dump_matrix: false,
        record_timings: false,
        output_dir: None,
    };
    debug_assert!(config.cluster.k_for(PeriodId::P2) == k_p2);
    artifacts::write_json(stage, &out.join(CONFIG_FILE), &config)
}
