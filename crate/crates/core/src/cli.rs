//! Command-line front end: `masks`, `plucker`, `render`, `sample`, `eval`.
//!
//! Exit codes: 0 on success, 2 for bad arguments, malformed configuration or
//! missing/unreadable inputs, 1 when a computation fails after its inputs
//! were accepted.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{load_config, Overrides, RunConfig};
use crate::diffusion::{joint_multiview_sample, GuidedDenoiser, OracleDenoiser, SamplerConfig};
use crate::epipolar::build_mask_set;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::io::{
    decode_ppm, encode_depth_pgm, encode_mask_bitset, encode_mask_pgm, encode_plucker, encode_ppm,
    read_ppm, write_atomic,
};
use crate::metrics::MetricReport;
use crate::plucker::plucker_grid;
use crate::scene::{build_scene, render_view};

#[derive(Debug, Parser)]
#[command(
    name = "epiview",
    version,
    about = "Epipolar multi-view attention and sampling toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build epipolar attention masks for every ordered view pair.
    Masks(RunArgs),
    /// Export per-view Plücker ray embeddings at feature resolution.
    Plucker(RunArgs),
    /// Render the synthetic scene from every camera.
    Render(RunArgs),
    /// Jointly sample all views with the oracle denoiser.
    Sample(SampleArgs),
    /// Compare two directories of PPM images.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Camera-set / run configuration file (TOML).
    #[arg(long)]
    cameras: PathBuf,
    /// Feature resolution for masks and embeddings (8, 16 or 32).
    #[arg(long)]
    res: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long = "blob-steps")]
    blob_steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "scale-t")]
    scale_t: Option<f64>,
    #[arg(long = "scale-c")]
    scale_c: Option<f64>,
    #[arg(long = "scale-e")]
    scale_e: Option<f64>,
    #[arg(long = "scale-p")]
    scale_p: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Sample only the first N cameras.
    #[arg(long)]
    views: Option<usize>,
    /// Directory of `view_<i>.ppm` targets for the oracle; rendered in-process when omitted.
    #[arg(long)]
    targets: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Directory of predicted images.
    #[arg(long)]
    pred: PathBuf,
    /// Directory of reference images with matching file names.
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Input(Error),
    Internal(Error),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Input(_) => 2,
            Failure::Internal(_) => 1,
        }
    }

    fn error(&self) -> &Error {
        match self {
            Failure::Input(e) | Failure::Internal(e) => e,
        }
    }
}

trait Classify<T> {
    fn input(self) -> std::result::Result<T, Failure>;
    fn internal(self) -> std::result::Result<T, Failure>;
}

impl<T> Classify<T> for Result<T> {
    fn input(self) -> std::result::Result<T, Failure> {
        self.map_err(Failure::Input)
    }

    fn internal(self) -> std::result::Result<T, Failure> {
        self.map_err(Failure::Internal)
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Masks(a) => masks(&a),
        Command::Plucker(a) => plucker(&a),
        Command::Render(a) => render(&a),
        Command::Sample(a) => sample(&a),
        Command::Eval(a) => eval(&a),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.error());
            f.code()
        }
    }
}

fn load(args: &RunArgs) -> std::result::Result<(RunConfig, PathBuf), Failure> {
    let overrides = Overrides {
        resolution: args.res,
        steps: args.steps,
        blob_steps: args.blob_steps,
        seed: args.seed,
        scale_t: args.scale_t,
        scale_c: args.scale_c,
        scale_e: args.scale_e,
        scale_p: args.scale_p,
        out: args.out.clone(),
    };
    let cfg = load_config(&args.cameras, &overrides).input()?;
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| Error::Config("out: an output directory is required (--out)".into()))
        .input()?;
    fs::create_dir_all(&out)
        .map_err(|e| Error::io(&out, e))
        .input()?;
    Ok((cfg, out))
}

fn write(path: &Path, bytes: &[u8]) -> Outcome {
    write_atomic(path, bytes).internal()
}

fn masks(args: &RunArgs) -> Outcome {
    let (cfg, out) = load(args)?;
    let poses = cfg.cameras.poses().input()?;
    if poses.len() < 2 {
        return Err(Failure::Input(Error::Config(
            "views: masks need at least 2 cameras".into(),
        )));
    }
    let intr = cfg.feature_intrinsics().input()?;
    let set = build_mask_set(&poses, &intr).internal()?;
    write(&out.join("masks.epim"), &encode_mask_bitset(&set))?;
    for (i, j) in set.ordered_pairs() {
        write(
            &out.join(format!("mask_{i}_{j}.pgm")),
            &encode_mask_pgm(&set, i, j),
        )?;
    }
    Ok(())
}

fn plucker(args: &RunArgs) -> Outcome {
    let (cfg, out) = load(args)?;
    let intr = cfg.feature_intrinsics().input()?;
    for (i, pose) in cfg.cameras.poses().input()?.iter().enumerate() {
        write(
            &out.join(format!("plucker_{i}.bin")),
            &encode_plucker(&plucker_grid(pose, &intr)),
        )?;
    }
    Ok(())
}

/// Renders every view and round-trips the images through 8-bit PPM so they
/// equal what `render` writes to disk.
fn rendered_targets(cfg: &RunConfig, count: usize) -> Result<Vec<(Vec<u8>, Vec<u8>)>> {
    let scene = build_scene(cfg.seed);
    let intr = cfg.cameras.intrinsics()?;
    cfg.cameras.poses()?[..count]
        .iter()
        .map(|pose| {
            let r = render_view(&scene, pose, &intr);
            Ok((encode_ppm(&r.image)?, encode_depth_pgm(&r.depth)?))
        })
        .collect()
}

fn render(args: &RunArgs) -> Outcome {
    let (cfg, out) = load(args)?;
    let n = cfg.cameras.views.len();
    for (i, (ppm, pgm)) in rendered_targets(&cfg, n).internal()?.iter().enumerate() {
        write(&out.join(format!("view_{i}.ppm")), ppm)?;
        write(&out.join(format!("depth_{i}.pgm")), pgm)?;
    }
    write(
        &out.join("scene.toml"),
        build_scene(cfg.seed).to_toml().as_bytes(),
    )
}

fn sample(args: &SampleArgs) -> Outcome {
    let (cfg, out) = load(&args.run)?;
    let available = cfg.cameras.views.len();
    let m = args.views.unwrap_or(available);
    if m < 2 || m > available {
        return Err(Failure::Input(Error::Config(format!(
            "views: need between 2 and {available} views, got {m}"
        ))));
    }
    let targets: Vec<Grid<f64>> = match &args.targets {
        Some(dir) => (0..m)
            .map(|i| read_ppm(&dir.join(format!("view_{i}.ppm"))))
            .collect::<Result<_>>()
            .input()?,
        None => rendered_targets(&cfg, m)
            .internal()?
            .iter()
            .map(|(ppm, _)| decode_ppm(ppm, "rendered target"))
            .collect::<Result<_>>()
            .internal()?,
    };
    let shape = targets[0].shape();
    let oracle = OracleDenoiser::new(targets).input()?;
    let denoiser = GuidedDenoiser {
        inner: oracle,
        scales: cfg.scales,
    };
    let poses = cfg.cameras.poses().input()?;
    let feature = cfg.feature_intrinsics().input()?;
    let sampler = SamplerConfig {
        steps: cfg.steps,
        blob_steps: cfg.blob_steps,
        seed: cfg.seed,
    };
    let samples =
        joint_multiview_sample(&denoiser, &poses[..m], &[], shape, &sampler, Some(&feature))
            .internal()?;
    for (i, img) in samples.iter().enumerate() {
        write(
            &out.join(format!("view_{i}.ppm")),
            &encode_ppm(img).internal()?,
        )?;
    }
    Ok(())
}

fn ppm_names(dir: &Path) -> Result<Vec<String>> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n.ends_with(".ppm"))
        .collect();
    names.sort();
    Ok(names)
}

fn eval(args: &EvalArgs) -> Outcome {
    let names = ppm_names(&args.pred).input()?;
    if names.is_empty() {
        return Err(Failure::Input(Error::invalid(format!(
            "no .ppm images in {}",
            args.pred.display()
        ))));
    }
    let mut report = MetricReport::default();
    for name in &names {
        let a = read_ppm(&args.pred.join(name)).input()?;
        let b = read_ppm(&args.target.join(name)).input()?;
        report.push(name.clone(), &a, &b).input()?;
    }
    fs::create_dir_all(&args.out)
        .map_err(|e| Error::io(&args.out, e))
        .input()?;
    let csv = report.to_csv();
    write(&args.out.join("metrics.csv"), csv.as_bytes())?;
    print!("{csv}");
    Ok(())
}
