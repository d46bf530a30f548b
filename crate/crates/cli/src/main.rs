//! Command-line frontend: detect motion states over a frame directory,
//! generate synthetic scenes, evaluate predictions, and benchmark latency.

use std::fs;
use std::io::{BufRead, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use zerospeed_core::decision::MotionState;
use zerospeed_core::evalbench;
use zerospeed_core::pipeline::{self, PipelineConfig, SpeedSignal};
use zerospeed_core::synth::{self, GroundTruth, SceneSpec};
use zerospeed_core::Error;

const EXIT_INPUT: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "zerospeed", version, about = "Vision-based motion-state detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify every frame in a directory and emit JSON lines.
    Detect {
        /// Directory of frame_NNNNNN.pgm|png files.
        #[arg(long)]
        input: PathBuf,
        /// Pipeline configuration (JSON); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Optional frame,speed_kmh CSV driving ROI profile selection.
        #[arg(long)]
        signal: Option<PathBuf>,
        /// Output JSONL path, '-' for stdout.
        #[arg(long, default_value = "-")]
        output: String,
        /// Abort on the first unreadable frame instead of skipping it.
        #[arg(long)]
        strict: bool,
        /// Override the RANSAC seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render a synthetic ground-truth scene.
    Generate {
        /// Scene specification (JSON).
        #[arg(long)]
        spec: PathBuf,
        /// Output directory for frames, truth.jsonl and the spec copy.
        #[arg(long)]
        out: PathBuf,
        /// Frame format.
        #[arg(long, default_value = "pgm", value_parser = ["pgm", "png"])]
        format: String,
    },
    /// Score predictions against ground truth.
    Evaluate {
        /// Predictions JSONL (detect output).
        #[arg(long)]
        pred: PathBuf,
        /// Ground truth JSONL with {"frame": n, "label": "..."} records.
        #[arg(long)]
        truth: PathBuf,
        /// Machine-readable JSON report instead of the table.
        #[arg(long, conflicts_with = "table")]
        json: bool,
        /// Human-readable table (default).
        #[arg(long)]
        table: bool,
    },
    /// Measure per-frame latency over a frame directory.
    Bench {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Fresh pipeline repetitions to run.
        #[arg(long, default_value_t = 1)]
        reps: usize,
        /// Machine-readable JSON report instead of the table.
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_INPUT,
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Detect { input, config, signal, output, strict, seed } => {
            let mut config = match config {
                Some(path) => PipelineConfig::load(&path)?,
                None => PipelineConfig::default(),
            };
            if let Some(seed) = seed {
                config.ransac.rng_seed = seed;
            }
            let signal = signal.map(|p| SpeedSignal::load(&p)).transpose()?;
            let summary = if output == "-" {
                let stdout = std::io::stdout();
                let mut writer = BufWriter::new(stdout.lock());
                let summary = pipeline::run(&input, config, signal.as_ref(), &mut writer, strict)?;
                writer.flush()?;
                summary
            } else {
                let file = fs::File::create(&output)?;
                let mut writer = BufWriter::new(file);
                let summary = pipeline::run(&input, config, signal.as_ref(), &mut writer, strict)?;
                writer.flush()?;
                summary
            };
            eprintln!(
                "{} frames: {} static, {} vibration, {} moving, {} indeterminate{}; latency {:.2} ms +/- {:.2}",
                summary.frames,
                summary.static_frames,
                summary.vibration_frames,
                summary.moving_frames,
                summary.indeterminate_frames,
                if summary.skipped_files > 0 {
                    format!(" ({} unreadable files skipped)", summary.skipped_files)
                } else {
                    String::new()
                },
                summary.latency_mean_ms,
                summary.latency_std_ms,
            );
            Ok(())
        }
        Command::Generate { spec, out, format } => {
            let text = fs::read_to_string(&spec).map_err(|e| Error::Input {
                path: spec.clone(),
                message: e.to_string(),
            })?;
            let scene: SceneSpec = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("invalid scene spec {}: {e}", spec.display())))?;
            synth::write_scene(&scene, &out, format == "png")?;
            eprintln!("wrote {} frames to {}", scene.n_frames, out.display());
            Ok(())
        }
        Command::Evaluate { pred, truth, json, table: _ } => {
            let predictions = load_predictions(&pred)?;
            let truth_records = load_truth(&truth)?;
            let report = evalbench::score(&predictions, &truth_records)?;
            let merged = evalbench::merge_two_class(&report.matrix);
            if json {
                let combined = serde_json::json!({
                    "three_class": report,
                    "two_class": merged,
                });
                println!("{}", serde_json::to_string_pretty(&combined).expect("report serializes"));
            } else {
                print_report_table(&report, &merged);
            }
            Ok(())
        }
        Command::Bench { input, config, reps, json } => {
            let config = match config {
                Some(path) => PipelineConfig::load(&path)?,
                None => PipelineConfig::default(),
            };
            let reports = evalbench::bench(&input, &config, reps)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&reports).expect("report serializes"));
            } else {
                println!(
                    "{:<12} {:>4} {:>7} {:>10} {:>9} {:>9} {:>12}",
                    "resolution", "rep", "frames", "mean_ms", "std_ms", "p99_ms", "cpu_time_ms"
                );
                for r in &reports {
                    println!(
                        "{:<12} {:>4} {:>7} {:>10.2} {:>9.2} {:>9.2} {:>12.1}",
                        r.resolution, r.repetition, r.frames, r.mean_ms, r.std_ms, r.p99_ms, r.cpu_time_ms
                    );
                }
            }
            Ok(())
        }
    }
}

fn load_predictions(path: &PathBuf) -> Result<Vec<(u64, MotionState)>, Error> {
    let file = fs::File::open(path).map_err(|e| Error::Input {
        path: path.clone(),
        message: e.to_string(),
    })?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let decision: pipeline::FrameDecision =
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: idx + 1,
                message: format!("bad prediction record: {e}"),
            })?;
        out.push((decision.frame, decision.state));
    }
    Ok(out)
}

fn load_truth(path: &PathBuf) -> Result<Vec<(u64, zerospeed_core::synth::SceneKind)>, Error> {
    let file = fs::File::open(path).map_err(|e| Error::Input {
        path: path.clone(),
        message: e.to_string(),
    })?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: GroundTruth = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: format!("bad truth record: {e}"),
        })?;
        out.push((record.frame, record.label));
    }
    Ok(out)
}

fn print_report_table(report: &evalbench::ScoreReport, merged: &evalbench::TwoClassReport) {
    println!("three-class confusion (rows = truth, cols = predicted):");
    println!("{:>12} {:>9} {:>9} {:>9} {:>14}", "", "static", "vibration", "moving", "indeterminate");
    let names = ["static", "vibration", "moving"];
    for (i, name) in names.iter().enumerate() {
        let row = report.matrix.counts[i];
        println!(
            "{:>12} {:>9} {:>9} {:>9} {:>14}",
            name, row[0], row[1], row[2], report.matrix.indeterminate[i]
        );
    }
    println!();
    println!("{:>12} {:>10} {:>10} {:>10}", "class", "precision", "recall", "f1");
    for (i, name) in names.iter().enumerate() {
        let m = report.per_class[i];
        println!("{:>12} {:>10.5} {:>10.5} {:>10.5}", name, m.precision, m.recall, m.f1);
    }
    println!(
        "accuracy {:.5} over {} scored frames ({} indeterminate)",
        report.accuracy, report.scored_frames, report.indeterminate_frames
    );
    println!();
    println!("two-class merge (unmoving = static + vibration):");
    println!("{:>12} {:>10} {:>10} {:>10}", "class", "precision", "recall", "f1");
    println!(
        "{:>12} {:>10.5} {:>10.5} {:>10.5}",
        "unmoving", merged.unmoving.precision, merged.unmoving.recall, merged.unmoving.f1
    );
    println!(
        "{:>12} {:>10.5} {:>10.5} {:>10.5}",
        "moving", merged.moving.precision, merged.moving.recall, merged.moving.f1
    );
    println!("accuracy {:.5}", merged.accuracy);
}
