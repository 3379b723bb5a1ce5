//! The `dppmask` command line.
//!
//! Exit codes: 0 success, 1 runtime or property failure, 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::bench::{self, BenchConfig};
use crate::dpp::enum_budget_from_env;
use crate::image::Image;
use crate::io::{self, MaskDocument};
use crate::kernel::FeatureMatrix;
use crate::masking::{
    generate_mask_with_rng, item_rng, patchify, FeatureMode, MaskConfig, PatchGrid,
};
use crate::stats::tau_sweep;
use crate::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "dppmask",
    version,
    about = "Diversity-preserving patch masks for masked image modeling"
)]
struct Cli {
    /// Print progress to stderr (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write one mask document per input image or feature file.
    Mask(MaskArgs),
    /// Run the randomized property suites.
    Verify(VerifyArgs),
    /// Mask statistics across purge ratios.
    Stats(StatsArgs),
    /// Time mask generation.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
struct MaskFlags {
    #[arg(long, default_value_t = 0.75)]
    mask_ratio: f64,
    /// Purge ratio: 0 is fully greedy, 1 fully random.
    #[arg(long, default_value_t = 0.8)]
    tau: f64,
    /// Gaussian kernel bandwidth.
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 16)]
    patch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `pixel` reads PGM/PPM images, `feature` reads DPPF feature files.
    #[arg(long, default_value = "pixel")]
    mode: FeatureMode,
    /// Weight of appended grid-position features (pixel mode).
    #[arg(long, default_value_t = 0.0)]
    position_weight: f64,
    /// Half-width of a per-input uniform jitter on the mask ratio.
    #[arg(long, default_value_t = 0.0)]
    mask_ratio_var: f64,
}

impl MaskFlags {
    fn config(&self) -> MaskConfig {
        MaskConfig {
            mask_ratio: self.mask_ratio,
            purge_ratio: self.tau,
            epsilon: self.epsilon,
            patch_size: self.patch_size,
            seed: self.seed,
            mode: self.mode,
            position_weight: self.position_weight,
            mask_ratio_jitter: self.mask_ratio_var,
        }
    }
}

#[derive(Debug, Args)]
struct MaskArgs {
    #[command(flatten)]
    flags: MaskFlags,
    /// Also write a gray-masked copy of each input image.
    #[arg(long)]
    overlay: bool,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, hide = true)]
    corrupt_update: bool,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[command(flatten)]
    flags: MaskFlags,
    /// Comma-separated purge ratios.
    #[arg(long, value_delimiter = ',', default_value = "0,0.6,0.8,0.9,1")]
    tau_list: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    /// Also write `stats.json` here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Masks timed per mode and size.
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Purge ratio of the greedy mode.
    #[arg(long, default_value_t = 0.8)]
    tau: f64,
    /// `N:k` pairs, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "196:49,64:16,12:3", value_parser = parse_size)]
    sizes: Vec<(usize, usize)>,
    #[arg(long, default_value_t = 768)]
    dim: usize,
    /// Also write `bench.json` here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (n, k) = s
        .split_once(':')
        .ok_or_else(|| format!("expected N:k, got {s:?}"))?;
    let n: usize = n.trim().parse().map_err(|e| format!("{e}"))?;
    let k: usize = k.trim().parse().map_err(|e| format!("{e}"))?;
    if k == 0 || k > n {
        return Err(format!("need 1 <= k <= N, got {n}:{k}"));
    }
    Ok((n, k))
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Mask(a) => cmd_mask(a, cli.verbose),
        Command::Verify(a) => cmd_verify(a),
        Command::Stats(a) => cmd_stats(a, cli.verbose),
        Command::Bench(a) => cmd_bench(a, cli.verbose),
    }
}

fn usage_error(msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    EXIT_USAGE
}

/// Reads one input; the image is kept in pixel mode for overlays.
fn load(
    path: &Path,
    cfg: &MaskConfig,
) -> Result<(Option<Image>, PatchGrid, FeatureMatrix), String> {
    match cfg.mode {
        FeatureMode::Pixel => {
            let image = io::read_image(path).map_err(|e| e.to_string())?;
            let (grid, features) = patchify(&image, cfg.patch_size).map_err(|e| e.to_string())?;
            Ok((Some(image), grid, features))
        }
        FeatureMode::Feature => {
            let features = io::read_features(path).map_err(|e| e.to_string())?;
            let grid = PatchGrid::flat(features.count());
            Ok((None, grid, features))
        }
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into())
}

fn cmd_mask(args: MaskArgs, verbose: u8) -> i32 {
    let cfg = args.flags.config();
    if let Err(e) = cfg.validate() {
        return usage_error(e);
    }
    if args.overlay && cfg.mode == FeatureMode::Feature {
        return usage_error("--overlay needs image inputs (--mode pixel)");
    }
    if let Err(e) = fs::create_dir_all(&args.out_dir) {
        eprintln!("error: cannot create {}: {e}", args.out_dir.display());
        return EXIT_FAILURE;
    }

    let outcomes: Vec<Result<(PathBuf, usize, usize), String>> = args
        .inputs
        .par_iter()
        .enumerate()
        .map(|(i, input)| {
            let (loaded, grid, features) = load(input, &cfg)?;
            let result =
                generate_mask_with_rng(&features, &grid, &cfg, &mut item_rng(cfg.seed, i as u64))
                    .map_err(|e| e.to_string())?;
            let name = stem(input);
            let doc_path = args.out_dir.join(format!("{name}.mask.json"));
            io::write_mask(&doc_path, &MaskDocument::from_result(&result))
                .map_err(|e| e.to_string())?;
            if args.overlay {
                if let Some(image) = &loaded {
                    let ext = if image.channels() == 1 { "pgm" } else { "ppm" };
                    io::write_overlay(
                        image,
                        &result,
                        args.out_dir.join(format!("{name}.overlay.{ext}")),
                    )
                    .map_err(|e| e.to_string())?;
                }
            }
            Ok((doc_path, result.visible.len(), result.greedy_count))
        })
        .collect();

    let mut failed = false;
    for (input, outcome) in args.inputs.iter().zip(outcomes) {
        match outcome {
            Ok((doc, visible, greedy)) => {
                if verbose > 0 {
                    eprintln!(
                        "{} -> {} (visible {visible}, greedy {greedy})",
                        input.display(),
                        doc.display()
                    );
                }
                println!("ok {} visible={visible} greedy={greedy}", input.display());
            }
            Err(e) => {
                failed = true;
                eprintln!("error {}: {e}", input.display());
            }
        }
    }
    if failed {
        EXIT_FAILURE
    } else {
        EXIT_OK
    }
}

fn cmd_verify(args: VerifyArgs) -> i32 {
    if args.trials == 0 {
        eprintln!("warning: --trials 0 runs no checks; passing vacuously");
    }
    let reports = verify::run_all(args.trials, args.seed, args.corrupt_update);
    for r in &reports {
        println!(
            "{} {} trials={} checks={} failures={} max_error={:e} tolerance={:e}",
            if r.passed() { "PASS" } else { "FAIL" },
            r.name,
            r.trials,
            r.checks,
            r.failures,
            r.max_error,
            r.tolerance
        );
    }
    if reports.iter().all(|r| r.passed()) {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}

fn write_report(dir: &Option<PathBuf>, name: &str, text: &str) -> Result<(), String> {
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| e.to_string())?;
        fs::write(dir.join(name), text).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn cmd_stats(args: StatsArgs, verbose: u8) -> i32 {
    let cfg = args.flags.config();
    if let Err(e) = cfg.validate() {
        return usage_error(e);
    }
    if let Some(bad) = args.tau_list.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return usage_error(format!("tau {bad} in --tau-list is outside [0, 1]"));
    }
    let mut failed = false;
    let mut entries = Vec::new();
    for input in &args.inputs {
        if verbose > 0 {
            eprintln!("stats for {}", input.display());
        }
        let outcome = load(input, &cfg).and_then(|(_, grid, f)| {
            tau_sweep(&f, &grid, &cfg, &args.tau_list, args.trials).map_err(|e| e.to_string())
        });
        match outcome {
            Ok(stats) => entries.push(json!({
                "input": input.display().to_string(),
                "taus": stats.iter().map(|s| s.to_json()).collect::<Vec<Value>>(),
            })),
            Err(e) => {
                failed = true;
                eprintln!("error {}: {e}", input.display());
            }
        }
    }
    let doc = json!({
        "config": {
            "epsilon": cfg.epsilon,
            "mask_ratio": cfg.mask_ratio,
            "mode": cfg.mode.as_str(),
            "patch_size": cfg.patch_size,
            "seed": cfg.seed,
        },
        "inputs": entries,
        "trials": args.trials,
    });
    let text = serde_json::to_string(&doc).expect("JSON values always serialize");
    println!("{text}");
    if let Err(e) = write_report(&args.out_dir, "stats.json", &text) {
        eprintln!("error: {e}");
        return EXIT_FAILURE;
    }
    if failed {
        EXIT_FAILURE
    } else {
        EXIT_OK
    }
}

fn cmd_bench(args: BenchArgs, verbose: u8) -> i32 {
    if args.trials == 0 {
        return usage_error("--trials must be at least 1");
    }
    if !(0.0..=1.0).contains(&args.tau) {
        return usage_error("--tau must lie in [0, 1]");
    }
    if args.dim == 0 {
        return usage_error("--dim must be at least 1");
    }
    let cfg = BenchConfig {
        sizes: args.sizes.clone(),
        dim: args.dim,
        repeats: args.trials,
        seed: args.seed,
        greedy_tau: args.tau,
        enum_budget: enum_budget_from_env(),
    };
    let mut reports = Vec::new();
    for &(n, k) in &cfg.sizes {
        let r = bench::time_size(n, k, &cfg);
        if verbose > 0 || r.exact_map.is_err() {
            if let Err(reason) = &r.exact_map {
                eprintln!("exact-map skipped for N={n}, k={k}: {reason}");
            }
        }
        reports.push(r.to_json());
    }
    let doc = json!({
        "dim": cfg.dim,
        "greedy_tau": cfg.greedy_tau,
        "repeats": cfg.repeats,
        "sizes": reports,
    });
    let text = serde_json::to_string(&doc).expect("JSON values always serialize");
    println!("{text}");
    match write_report(&args.out_dir, "bench.json", &text) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}
