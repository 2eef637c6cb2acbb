//! `sixway` command-line driver: generate density sequences, bake reference
//! lightmaps, march guiding maps, run the network, composite, build
//! datasets, measure and serve.

pub mod commands;
pub mod config;
pub mod manifest;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::path::PathBuf;

pub use config::{ConfigError, PipelineConfig};
pub use manifest::RunManifest;

#[derive(Debug, thiserror::Error)]
#[error("{stage}: {message}")]
pub struct StageError {
    pub stage: &'static str,
    pub message: String,
}

pub(crate) fn stage<E: std::fmt::Display>(stage: &'static str) -> impl Fn(E) -> StageError {
    move |e| StageError { stage, message: e.to_string() }
}

#[derive(Debug, Parser)]
#[command(name = "sixway", version, about = "Six-way lightmap pipeline for volumetric smoke")]
pub struct Cli {
    /// Pipeline config (JSON, or TOML by extension).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for the parallel stages.
    #[arg(long, global = true, env = "SIXWAY_THREADS")]
    pub threads: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a procedural density sequence.
    Gen(GenArgs),
    /// Bake reference six-way lightmaps with the scattering renderer.
    Bake(BakeArgs),
    /// March a guiding map.
    Guide(GuideArgs),
    /// Predict lightmaps from a guiding map.
    Infer(InferArgs),
    /// Relight lightmaps under directional lights.
    Composite(CompositeArgs),
    /// Bake (guiding, lightmaps) training tuples over a camera ring.
    Dataset(DatasetArgs),
    /// MSE and PSNR between two image sets.
    Metrics(MetricsArgs),
    /// Time the runtime stages.
    Bench(BenchArgs),
    /// Pack lightmap frames into a two-texture flipbook atlas.
    PackAtlas(PackAtlasArgs),
    /// Run the live relighting server.
    Serve(ServeArgs),
    /// Write an initialized weight file.
    InitWeights(InitWeightsArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::Bake(_) => "bake",
            Command::Guide(_) => "guide",
            Command::Infer(_) => "infer",
            Command::Composite(_) => "composite",
            Command::Dataset(_) => "dataset",
            Command::Metrics(_) => "metrics",
            Command::Bench(_) => "bench",
            Command::PackAtlas(_) => "pack-atlas",
            Command::Serve(_) => "serve",
            Command::InitWeights(_) => "init-weights",
        }
    }
}

/// Density input: a `.dgrid` file or a sequence `manifest.json`. Without
/// one, the procedural source from the config is used.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SceneArgs {
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Frame index within a sequence.
    #[arg(long, default_value_t = 0)]
    pub frame: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenArgs {
    /// sphere_puff, plume or noise_turbulence.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cubic grid resolution.
    #[arg(long)]
    pub dims: Option<usize>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BakeArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Overrides `bake.spp`.
    #[arg(long)]
    pub spp: Option<u32>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GuideArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InferArgs {
    /// `.nsw` weight file; falls back to `weights` in the config.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub guiding: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// `x,y,z` or `x,y,z:r,g,b`, direction of travel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LightSpec {
    pub dir: [f64; 3],
    pub rgb: [f32; 3],
}

fn triple<T: std::str::FromStr>(s: &str) -> Result<[T; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got {s:?}"));
    }
    let mut v = Vec::with_capacity(3);
    for p in parts {
        v.push(p.parse::<T>().map_err(|_| format!("not a number: {p:?}"))?);
    }
    v.try_into().map_err(|_| unreachable!())
}

pub fn parse_light(s: &str) -> Result<LightSpec, String> {
    let (d, c) = match s.split_once(':') {
        Some((d, c)) => (d, Some(c)),
        None => (s, None),
    };
    let rgb = match c {
        Some(c) => triple::<f32>(c)?,
        None => [1.0; 3],
    };
    Ok(LightSpec { dir: triple(d)?, rgb })
}

pub fn parse_rgb(s: &str) -> Result<[f32; 3], String> {
    triple(s)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompositeArgs {
    /// 8-plane lightmap PFM (sRGB-encoded scattering planes).
    #[arg(long)]
    pub lightmaps: PathBuf,
    /// Replaces the config lights; repeatable.
    #[arg(long = "light", value_parser = parse_light)]
    pub lights: Vec<LightSpec>,
    #[arg(long, value_parser = parse_rgb)]
    pub background: Option<[f32; 3]>,
    /// Guiding map whose depth places pixels for occluder shadows.
    #[arg(long)]
    pub guiding: Option<PathBuf>,
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DatasetArgs {
    /// Sequence `manifest.json`; a procedural sequence is generated when absent.
    #[arg(long)]
    pub sequence: Option<PathBuf>,
    /// Number of ring cameras; overrides `ring.count`.
    #[arg(long)]
    pub cameras: Option<usize>,
    /// Overrides `bake.spp`.
    #[arg(long)]
    pub spp: Option<u32>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MetricsArgs {
    /// Image file or directory of PNG/PFM images.
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Network weights; a seeded random network of the default architecture
    /// is timed when absent.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Also time the reference bake.
    #[arg(long)]
    pub with_bake: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PackAtlasArgs {
    /// Lightmap PFMs in frame order.
    #[arg(long, required = true, num_args = 1..)]
    pub lightmaps: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Sequence `manifest.json` or `.dgrid`; procedural when absent.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Serve precomputed lightmap PFMs instead of running the network.
    #[arg(long, num_args = 1..)]
    pub baked: Vec<PathBuf>,
    /// Built viewer directory.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Run manifest directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchChoice {
    Default,
    Tiny,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InitWeightsArgs {
    #[arg(long, value_enum, default_value_t = ArchChoice::Default)]
    pub arch: ArchChoice,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// All-zero weights instead of random.
    #[arg(long)]
    pub zeros: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<(), StageError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(StageError { stage: "setup", message: "thread count must be at least 1".into() });
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(stage("setup"))?;
    }
    let config = match &cli.config {
        Some(p) => PipelineConfig::load(p).map_err(stage("config"))?,
        None => PipelineConfig::default(),
    };
    commands::dispatch(&cli.command, &config)
}
