use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use framerestore_core::pipeline::{self, PipelineConfig, REFERENCE_FPS_LINE};
use framerestore_core::{Error, ErrorCategory};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "framerestore", version, about = "Restore artifact-degraded endoscopy frames and measure the effect on detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Pipeline config, YAML or JSON.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides the config output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Print per-frame timing (translate only).
    #[arg(long, global = true)]
    bench: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Build a paired clean/degraded corpus from `data.manifest`.
    Degrade,
    /// Patient-wise train/val/test split of `data.manifest`.
    Split,
    /// Train the translator on `data.manifest` (resumes from checkpoints).
    Train,
    /// Translate the uninformative frames of `data.manifest`.
    Translate,
    /// Detect and score `data.manifest` under the configured scenario.
    DetectEval,
    /// Compare `data.raw_report` against `data.translated_report`.
    Report,
    /// Generate, degrade, split, train, translate and evaluate synthetic data.
    E2eSynthetic,
}

fn exit_code(category: ErrorCategory) -> u8 {
    match category {
        ErrorCategory::Config => 2,
        ErrorCategory::Data => 3,
        ErrorCategory::Numeric => 4,
    }
}

fn fail(kind: &str, category: &str, message: String, code: u8) -> ExitCode {
    let body = json!({ "error": kind, "category": category, "message": message, "exit_code": code });
    eprintln!("{body}");
    ExitCode::from(code)
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, Error> {
    let base = match cli.command {
        Command::E2eSynthetic => PipelineConfig::synthetic_default(),
        _ => PipelineConfig::default(),
    };
    let mut cfg = match (&cli.config, cli.command) {
        (Some(path), _) => PipelineConfig::load_over(path, &base)?,
        (None, Command::E2eSynthetic) => base,
        (None, _) => return Err(Error::Config("--config <path> is required for this subcommand".into())),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_root = out.clone();
    }
    Ok(cfg)
}

fn print_json(value: serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(&value).expect("summary serializes"));
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    let out = cfg.output_root.clone();
    let mut log = |msg: &str| eprintln!("[framerestore] {msg}");
    match cli.command {
        Command::Degrade => {
            let c = pipeline::stage_degrade(&cfg, &out)?;
            print_json(json!({
                "config_hash": cfg.hash(),
                "frames": c.pairs.len(),
                "clean": out.join(framerestore_core::degrade::CLEAN_MANIFEST),
                "degraded": out.join(framerestore_core::degrade::DEGRADED_MANIFEST),
                "pairs": out.join(framerestore_core::degrade::PAIRS_FILE),
            }));
        }
        Command::Split => {
            let [train, val, test] = pipeline::stage_split(&cfg, &out)?;
            print_json(json!({
                "config_hash": cfg.hash(),
                "train": train.len(),
                "val": val.len(),
                "test": test.len(),
            }));
        }
        Command::Train => {
            let s = pipeline::stage_train(&cfg, &out, &mut log)?;
            print_json(serde_json::to_value(&s).expect("summary serializes"));
        }
        Command::Translate => {
            let t = pipeline::stage_translate(&cfg, &out)?;
            if cli.bench {
                if let Some(timing) = &t.timing {
                    println!(
                        "translated {} frame(s): compute {:.3}s, io {:.3}s",
                        timing.images, timing.compute_secs, timing.io_secs
                    );
                    match timing.fps {
                        Some(fps) => println!(
                            "throughput: {fps:.2} frames per second ({:.2} ms per frame)",
                            1000.0 / fps
                        ),
                        None => println!("throughput: n/a (no frames translated)"),
                    }
                }
                println!("{REFERENCE_FPS_LINE}");
            }
            print_json(serde_json::to_value(&t).expect("summary serializes"));
        }
        Command::DetectEval => {
            let s = pipeline::stage_detect_eval(&cfg, &out)?;
            println!("# {}", pipeline::scenario_header(s.scenario));
            print!("{}", pipeline::render_single(&s.report));
        }
        Command::Report => {
            let cmp = pipeline::stage_report(&cfg, &out)?;
            print!("{}", cmp.render());
        }
        Command::E2eSynthetic => {
            let s = pipeline::e2e_synthetic(&cfg, &out, &mut log)?;
            let r = &s.restoration;
            println!("# {}", s.header);
            print!("{}", s.comparison.render());
            println!(
                "restoration on {} held-out frames: median PSNR {:.2} dB -> {:.2} dB ({:+.2} dB), detector F1 {:.2}% -> {:.2}% ({:+.2} pp)",
                r.frames,
                r.median_psnr_degraded,
                r.median_psnr_translated,
                r.psnr_gain(),
                r.f1_degraded,
                r.f1_translated,
                r.f1_gain()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return fail("usage", "config", e.to_string().trim().to_string(), 2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let category = match e.category() {
                ErrorCategory::Config => "config",
                ErrorCategory::Data => "data",
                ErrorCategory::Numeric => "numeric",
            };
            fail(e.kind(), category, e.to_string(), exit_code(e.category()))
        }
    }
}
