//! `kundt` - batch verification of CCNV Kundt metrics and their Killing
//! vectors from scene files.
//!
//! Exit codes: 0 all checks pass, 1 at least one check failed, 2 input error.

mod commands;
mod report;
mod scene;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "kundt", version, about = "CCNV Kundt spacetime verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// CCNV residual plus dual-path Killing checks for every KV block.
    Verify(CommonArgs),
    /// Case tags, causal character over a grid, global non-spacelike test.
    Classify {
        #[command(flatten)]
        common: CommonArgs,
        /// Write the causal grid as delimiter-separated values.
        #[arg(long)]
        grid_out: Option<PathBuf>,
    },
    /// Curvature invariants over the sample with CSI/VSI probe verdicts.
    Invariants(CommonArgs),
    /// Commutators of every KV with ell: proportionality and norms.
    Bracket(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Scene file path.
    scene: PathBuf,
    /// Override the scene's random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the scene's sample count.
    #[arg(long)]
    samples: Option<usize>,
    /// Write the machine-readable report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn load(common: &CommonArgs) -> Result<(scene::Scene, String), String> {
    let bytes = std::fs::read(&common.scene)
        .map_err(|e| format!("cannot read {}: {e}", common.scene.display()))?;
    let digest = {
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        format!("{:x}", hasher.finalize())
    };
    let text = String::from_utf8(bytes).map_err(|e| format!("scene is not UTF-8: {e}"))?;
    let mut scene = scene::load_scene(&text).map_err(|e| e.to_string())?;
    if let Some(seed) = common.seed {
        scene.seed = seed;
    }
    if let Some(samples) = common.samples {
        scene.samples = samples;
    }
    Ok((scene, digest))
}

fn finish(
    report: report::Report,
    common: &CommonArgs,
    grid: Option<(Option<PathBuf>, Option<String>)>,
) -> ExitCode {
    if let Some((Some(path), Some(data))) = grid {
        if let Err(e) = std::fs::write(&path, data) {
            eprintln!("cannot write grid to {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    print!("{}", report.render_human());
    if let Some(path) = &common.report {
        if let Err(e) = std::fs::write(path, report.render_machine()) {
            eprintln!("cannot write report to {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    if report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> Result<ExitCode, (u8, String)> {
        match &cli.command {
            Command::Verify(common) => {
                let (scene, digest) = load(common).map_err(|e| (2, e))?;
                let report =
                    commands::run_verify(&scene, digest).map_err(|e| (1, e.0))?;
                Ok(finish(report, common, None))
            }
            Command::Classify { common, grid_out } => {
                let (scene, digest) = load(common).map_err(|e| (2, e))?;
                let (report, grid) =
                    commands::run_classify(&scene, digest).map_err(|e| (1, e.0))?;
                Ok(finish(report, common, Some((grid_out.clone(), grid))))
            }
            Command::Invariants(common) => {
                let (scene, digest) = load(common).map_err(|e| (2, e))?;
                let report =
                    commands::run_invariants(&scene, digest).map_err(|e| (1, e.0))?;
                Ok(finish(report, common, None))
            }
            Command::Bracket(common) => {
                let (scene, digest) = load(common).map_err(|e| (2, e))?;
                let report =
                    commands::run_bracket(&scene, digest).map_err(|e| (1, e.0))?;
                Ok(finish(report, common, None))
            }
        }
    };
    match run() {
        Ok(code) => code,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
