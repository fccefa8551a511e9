//! `chartab` — reproducible chart↔table pipelines: corpus synthesis, OCR
//! sentinel encoding, masked-objective data prep, geometric parsing with
//! fidelity reports, metric evaluation, and the micro seq2seq trainer.

use std::path::PathBuf;
use std::process::ExitCode;

use chartab_cli::commands;
use chartab_cli::config::{ObjectiveChoice, PipelineConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chartab", version, about)]
struct Cli {
    /// TOML pipeline config; defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Overrides the config file's global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic chart corpus and write its manifest.
    Synth {
        /// Number of samples.
        #[arg(long)]
        n: u64,
        /// Output directory for manifest.jsonl and images/.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overwrite an existing manifest.
        #[arg(long)]
        force: bool,
    },
    /// Validate an external manifest and echo its contents.
    Import {
        #[arg(long)]
        manifest: PathBuf,
        /// Write a normalized copy here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// OCR-extract and sentinel-encode every manifest sample.
    Preprocess {
        #[arg(long)]
        manifest: PathBuf,
        /// Output records file (stc/1 JSONL).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Apply the configured noise model with this character-substitution rate.
        #[arg(long, value_name = "RATE")]
        ocr_noise: Option<f64>,
    },
    /// Apply masked-header/value objectives to preprocessed records.
    Mask {
        /// stc/1 records from `preprocess`.
        #[arg(long)]
        records: PathBuf,
        /// Output records file (maskedpair/1 JSONL).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        objective: Option<ObjectiveChoice>,
        /// Fraction of candidate cells to mask, in (0, 1].
        #[arg(long)]
        rate: Option<f64>,
    },
    /// Geometrically parse a manifest back into tables and score fidelity.
    Parse {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory for parsed.jsonl, report.jsonl, summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_name = "RATE")]
        ocr_noise: Option<f64>,
    },
    /// Score a predictions file against a gold manifest.
    Eval {
        /// Predictions JSONL: one {"id", "pred"} object per line.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Write the JSON report here (always printed to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Case-sensitive text matching.
        #[arg(long)]
        strict_case: bool,
    },
    /// Generate extractive QA pairs from manifest tables.
    QaGen {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        per_sample: Option<usize>,
    },
    /// Train the micro encoder–decoder on the sentinel copy task.
    TrainMicro {
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Output directory for the checkpoint and training report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// In-memory synth → parse → QA round trip with a JSON fidelity report.
    RoundtripReport {
        #[arg(long, default_value_t = 500)]
        n: u64,
        #[arg(long, value_name = "RATE")]
        ocr_noise: Option<f64>,
        #[arg(long)]
        qa_per_sample: Option<usize>,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), chartab_cli::CliError> {
    let cfg = PipelineConfig::load(cli.config.as_deref(), cli.seed)?;
    match cli.command {
        Command::Synth { n, out, force } => {
            let out = commands::resolve_out(out, &cfg, "corpus");
            commands::cmd_synth(&cfg, n, &out, force)
        }
        Command::Import { manifest, out } => commands::cmd_import(&manifest, out.as_deref()),
        Command::Preprocess { manifest, out, ocr_noise } => {
            let out = commands::resolve_out(out, &cfg, "stc.jsonl");
            commands::cmd_preprocess(&cfg, &manifest, &out, ocr_noise)
        }
        Command::Mask { records, out, objective, rate } => {
            let out = commands::resolve_out(out, &cfg, "masked.jsonl");
            commands::cmd_mask(&cfg, &records, &out, objective, rate)
        }
        Command::Parse { manifest, out, ocr_noise } => {
            let out = commands::resolve_out(out, &cfg, "parse");
            commands::cmd_parse(&cfg, &manifest, &out, ocr_noise)
        }
        Command::Eval { pred, manifest, out, strict_case } => {
            commands::cmd_eval(&cfg, &pred, &manifest, out.as_deref(), strict_case)
        }
        Command::QaGen { manifest, out, per_sample } => {
            let out = commands::resolve_out(out, &cfg, "qa.jsonl");
            commands::cmd_qa_gen(&cfg, &manifest, &out, per_sample)
        }
        Command::TrainMicro { steps, lr, out } => {
            let out = commands::resolve_out(out, &cfg, "micro");
            commands::cmd_train_micro(&cfg, steps, lr, &out)
        }
        Command::RoundtripReport { n, ocr_noise, qa_per_sample, out } => {
            commands::cmd_roundtrip_report(&cfg, n, ocr_noise, qa_per_sample, out.as_deref())
                .map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
