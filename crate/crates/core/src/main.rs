use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cropland_apt::pipeline::{self, BackendKind, Overrides, RunConfig, StageOutcome, Summary};
use cropland_apt::synthetic::{self, SyntheticSpec};
use cropland_apt::Error;

#[derive(Parser)]
#[command(name = "cropland-apt", version, about = "Cropland mapping by auto-prompting a segmentation model from a land-cover prior")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed; per-tile seeds are derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendKind>,
    /// Worker threads for tile-parallel stages.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// All stages end to end.
    Run,
    /// Write pre-label rasters.
    Prelabel,
    /// Write prompt GeoJSON files from pre-labels.
    Sample,
    /// Write predicted masks from prompt files.
    Predict,
    /// Score masks against ground truth and write reports.
    Evaluate {
        /// Read predicted masks from `<dir>/<tile>.tif`.
        #[arg(long)]
        pred_dir: Option<PathBuf>,
        /// Ground-truth directory overriding the configuration.
        #[arg(long)]
        gt_dir: Option<PathBuf>,
    },
    /// Sweep prompt label noise and report mean and spread of the metrics.
    AblateNoise,
    /// Generate a synthetic dataset and a matching config.toml.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        tiles_x: usize,
        #[arg(long, default_value_t = 2)]
        tiles_y: usize,
        #[arg(long, default_value_t = 240)]
        tile_size: usize,
        #[arg(long, default_value_t = 0.1)]
        corruption: f64,
    },
}

fn load(common: &Common) -> Result<RunConfig, Error> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let o = Overrides {
        seed: common.seed,
        backend: common.backend,
        workers: common.workers,
    };
    RunConfig::load(path, &o)
}

fn print_summary(s: &Summary) {
    println!(
        "{} tiles: {} completed, {} skipped, {} failed",
        s.tiles, s.completed, s.skipped, s.failed
    );
    if let Some(a) = &s.aggregate {
        let f = |v: Option<f64>| v.map_or("n/a".to_owned(), |x| format!("{x:.4}"));
        println!("OA {}  MIoU {}  F1 {}", f(a.micro.oa), f(a.micro.miou), f(a.micro.f1));
    }
}

fn print_stage(results: &[(String, StageOutcome)]) -> bool {
    let mut ok = true;
    for (id, o) in results {
        match o {
            StageOutcome::Written(p) => println!("{id}: {}", p.display()),
            StageOutcome::Skipped => println!("{id}: skipped"),
            StageOutcome::Failed(e) => {
                ok = false;
                println!("{id}: failed: {e}");
            }
        }
    }
    ok
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Synth {
            out,
            tiles_x,
            tiles_y,
            tile_size,
            corruption,
        } => {
            let spec = SyntheticSpec {
                tiles_x,
                tiles_y,
                tile_size,
                corruption,
                seed: cli.common.seed.unwrap_or(0),
                ..Default::default()
            };
            let ds = synthetic::generate(&spec, &out)?;
            let cfg = ds.write_config("out")?;
            println!("{} tiles written; config at {}", ds.tile_ids.len(), cfg.display());
        }
        Command::Run => print_summary(&pipeline::run(load(&cli.common)?)?),
        Command::Prelabel => {
            print_stage(&pipeline::stage_prelabel(load(&cli.common)?)?);
        }
        Command::Sample => {
            print_stage(&pipeline::stage_sample(load(&cli.common)?)?);
        }
        Command::Predict => {
            print_stage(&pipeline::stage_predict(load(&cli.common)?)?);
        }
        Command::Evaluate { pred_dir, gt_dir } => {
            let mut cfg = load(&cli.common)?;
            if let Some(d) = gt_dir {
                cfg.data.gt_dir = Some(d);
            }
            print_summary(&pipeline::stage_evaluate(cfg, pred_dir.as_deref())?);
        }
        Command::AblateNoise => {
            let r = pipeline::ablate_noise(load(&cli.common)?)?;
            for l in &r.levels {
                match l.oa {
                    Some(m) => println!("flip_p {:.3}: OA {:.4} ± {:.4}", l.flip_p, m.mean, m.std),
                    None => println!("flip_p {:.3}: OA n/a", l.flip_p),
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
