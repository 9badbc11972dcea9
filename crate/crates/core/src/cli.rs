//! Command-line front end. JSON results go to stdout, logs to stderr.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::json;

use crate::depth;
use crate::error::{Error, Result};
use crate::io;
use crate::optim::{self, LearningRates, OptimizerConfig, View};
use crate::pipeline::{self, BuildConfig};
use crate::render::{self, Image};
use crate::scene::CloudRole;
use crate::thickness::{ThicknessConfig, DEFAULT_GROW_STEPS, DEFAULT_K, DEFAULT_LAMBDA};
use crate::toy;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;
pub const THREADS_ENV: &str = "FROSTING_THREADS";
pub const OPTIMIZER_STATE_FILE: &str = "optimizer.bin";

#[derive(Debug, Parser)]
#[command(name = "frosting", version, about = "Adaptive Gaussian layers around a mesh")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
    /// Log verbosity on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Complexity score and recommended Poisson depth of a regularized cloud.
    Depth {
        #[arg(long)]
        regularized: PathBuf,
        #[arg(long, default_value_t = depth::DEFAULT_GAMMA)]
        gamma: f64,
    },
    /// Builds the frosting layer and samples Gaussians into a package.
    Build(BuildArgs),
    /// Renders one PNG per camera.
    Render {
        #[arg(long)]
        pkg: PathBuf,
        #[arg(long)]
        cameras: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Use the brute-force compositor.
        #[arg(long)]
        brute: bool,
    },
    /// Refines the Gaussians against posed images.
    Optimize(OptimizeArgs),
    /// Moves the Gaussians along with an edited copy of the base mesh.
    Deform {
        #[arg(long)]
        pkg: PathBuf,
        #[arg(long = "deformed-mesh")]
        deformed_mesh: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// PSNR and SSIM between matching PNGs of two directories.
    Metrics {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
    },
    /// Writes a small synthetic input set (clouds, mesh, cameras).
    Toy {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        cameras: usize,
        #[arg(long, default_value_t = 64)]
        size: u32,
    },
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub unconstrained: PathBuf,
    #[arg(long)]
    pub regularized: PathBuf,
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: f64,
    #[arg(long, default_value_t = pipeline::DEFAULT_BUDGET)]
    pub budget: usize,
    #[arg(long, default_value_t = pipeline::DEFAULT_SEED)]
    pub seed: u64,
    /// Camera file whose centers define the contraction.
    #[arg(long)]
    pub cameras: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_GROW_STEPS)]
    pub grow_steps: usize,
    #[arg(long, default_value_t = 0.5)]
    pub uniform_fraction: f64,
    /// Background color as r,g,b in [0, 1].
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.0, 0.0, 0.0])]
    pub background: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub pkg: PathBuf,
    #[arg(long)]
    pub cameras: PathBuf,
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long, default_value_t = optim::DEFAULT_ITERATIONS)]
    pub iters: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Continue from the optimizer state stored next to the input package.
    #[arg(long)]
    pub resume: bool,
    #[arg(long, default_value_t = LearningRates::default().logits)]
    pub lr_logits: f64,
    #[arg(long, default_value_t = LearningRates::default().scales)]
    pub lr_scales: f64,
    #[arg(long, default_value_t = LearningRates::default().rotation)]
    pub lr_rotation: f64,
    #[arg(long, default_value_t = LearningRates::default().opacity)]
    pub lr_opacity: f64,
    #[arg(long, default_value_t = LearningRates::default().sh)]
    pub lr_sh: f64,
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json value serializes"));
}

fn run_depth(path: &Path, gamma: f64) -> Result<()> {
    let mut cloud = io::read_gaussian_ply(path)?;
    cloud.role = CloudRole::Regularized;
    let a = depth::advise(&cloud, gamma)?;
    print_json(&json!({ "cs": a.cs, "L": a.l_box, "depth": a.depth, "gamma": a.gamma }));
    Ok(())
}

fn run_build(a: &BuildArgs) -> Result<()> {
    let unconstrained = io::read_gaussian_ply(&a.unconstrained)?;
    let mut regularized = io::read_gaussian_ply(&a.regularized)?;
    regularized.role = CloudRole::Regularized;
    let mesh = io::read_obj(&a.mesh)?;
    let camera_centers = match &a.cameras {
        Some(p) => io::read_cameras(p)?.iter().map(|c| c.center()).collect(),
        None => Vec::new(),
    };
    if a.background.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidConfig("background components must lie in [0, 1]".into()));
    }
    let cfg = BuildConfig {
        thickness: ThicknessConfig {
            lambda: a.lambda,
            k: a.k,
            ..Default::default()
        },
        grow_steps: a.grow_steps,
        budget: a.budget,
        seed: a.seed,
        uniform_fraction: a.uniform_fraction,
        camera_centers,
        background: [a.background[0], a.background[1], a.background[2]],
    };
    let scene = pipeline::build_scene(&unconstrained, &regularized, &mesh, &cfg)?;
    io::store_package(&a.out, &scene)?;
    print_json(&json!({
        "cells": scene.layer.cells.len(),
        "gaussians": scene.gaussians.len(),
        "volume": scene.layer.total_volume,
        "sh_degree": scene.sh_degree,
    }));
    Ok(())
}

fn run_render(pkg: &Path, cameras: &Path, out: &Path, brute: bool) -> Result<()> {
    let scene = io::load_package(pkg)?;
    let file = io::read_camera_file(cameras)?;
    let cams = file.cameras()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut names = Vec::with_capacity(cams.len());
    for (i, cam) in cams.iter().enumerate() {
        let img = if brute { scene.render_brute(cam)? } else { scene.render(cam)? };
        let name = file.image_name(i);
        io::write_png(&out.join(&name), &img)?;
        info!("wrote {name}");
        names.push(name);
    }
    print_json(&json!({ "images": names.len(), "files": names }));
    Ok(())
}

fn run_optimize(a: &OptimizeArgs) -> Result<()> {
    let scene = io::load_package(&a.pkg)?;
    let file = io::read_camera_file(&a.cameras)?;
    let views = file
        .cameras()?
        .into_iter()
        .enumerate()
        .map(|(i, camera)| {
            let image = io::read_png(&a.images.join(file.image_name(i)))?;
            Ok(View { camera, image })
        })
        .collect::<Result<Vec<_>>>()?;
    let state = if a.resume {
        Some(io::read_optimizer_state(&a.pkg.join(OPTIMIZER_STATE_FILE))?)
    } else {
        None
    };
    let cfg = OptimizerConfig {
        iterations: a.iters,
        learning_rates: LearningRates {
            logits: a.lr_logits,
            scales: a.lr_scales,
            rotation: a.lr_rotation,
            opacity: a.lr_opacity,
            sh: a.lr_sh,
        },
        seed: a.seed,
    };
    let (refined, report, state) = optim::optimize(&scene, &views, &cfg, state)?;
    io::store_package(&a.out, &refined)?;
    io::write_optimizer_state(&a.out.join(OPTIMIZER_STATE_FILE), &state)?;
    print_json(&json!({
        "steps": report.steps,
        "gaussians": refined.gaussians.len(),
        "initial_ema_loss": report.initial_ema(),
        "final_ema_loss": report.final_ema(),
    }));
    Ok(())
}

fn run_deform(pkg: &Path, mesh: &Path, out: &Path) -> Result<()> {
    let scene = io::load_package(pkg)?;
    let deformed = io::read_obj(mesh)?;
    let moved = pipeline::deform_scene(&scene, &deformed)?;
    io::store_package(out, &moved)?;
    print_json(&json!({ "gaussians": moved.gaussians.len(), "cells": moved.layer.cells.len() }));
    Ok(())
}

fn png_names(dir: &Path) -> Result<Vec<String>> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.to_ascii_lowercase().ends_with(".png"))
        .collect();
    names.sort();
    Ok(names)
}

fn run_metrics(pred: &Path, gt: &Path) -> Result<()> {
    let names = png_names(pred)?;
    if names.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut per_image = Vec::with_capacity(names.len());
    let (mut psnr_sum, mut ssim_sum) = (0.0, 0.0);
    for name in &names {
        let p: Image = io::read_png(&pred.join(name))?;
        let g = io::read_png(&gt.join(name))?;
        if !p.same_shape(&g) {
            return Err(Error::InvalidConfig(format!(
                "{name}: prediction is {}x{}, ground truth {}x{}",
                p.width, p.height, g.width, g.height
            )));
        }
        let (ps, ss) = (render::psnr(&p, &g), render::ssim(&p, &g));
        psnr_sum += ps;
        ssim_sum += ss;
        per_image.push(json!({ "name": name, "psnr": ps, "ssim": ss }));
    }
    let n = names.len() as f64;
    print_json(&json!({ "psnr": psnr_sum / n, "ssim": ssim_sum / n, "per_image": per_image }));
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Depth { regularized, gamma } => run_depth(regularized, *gamma),
        Command::Build(a) => run_build(a),
        Command::Render { pkg, cameras, out, brute } => run_render(pkg, cameras, out, *brute),
        Command::Optimize(a) => run_optimize(a),
        Command::Deform { pkg, deformed_mesh, out } => run_deform(pkg, deformed_mesh, out),
        Command::Metrics { pred, gt } => run_metrics(pred, gt),
        Command::Toy { out, seed, cameras, size } => {
            let cfg = toy::ToyConfig {
                seed: *seed,
                cameras: *cameras,
                width: *size,
                height: *size,
                ..Default::default()
            };
            toy::write_toy_inputs(&cfg, out)?;
            print_json(&json!({ "dir": out, "cameras": cfg.cameras }));
            Ok(())
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Parses `argv` (including the program name) and runs the command.
/// Returns 0 on success, 1 for user errors, 2 for internal failures.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USER } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.verbose);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return EXIT_USER;
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return EXIT_INTERNAL;
        }
    };
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| pool.install(|| run(&cli))));
    match outcome {
        Ok(Ok(())) => EXIT_OK,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            if e.is_internal() {
                EXIT_INTERNAL
            } else {
                EXIT_USER
            }
        }
        Err(_) => {
            eprintln!("error: internal failure (panic)");
            EXIT_INTERNAL
        }
    }
}
