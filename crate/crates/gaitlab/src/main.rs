use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use gaitlab::aesi::PartId;
use gaitlab::commands::{
    cmd_build_aesi, cmd_enroll, cmd_evaluate, cmd_identify, cmd_synth, cmd_zernike,
    format_identify_report, EvalMode,
};
use gaitlab::config::PipelineConfig;
use gaitlab::error::Result;
use gaitlab::eval::summary_string;
use gaitlab::silhouette::NormalizationSpec;
use gaitlab::synth::{Injection, SynthConfig};
use gaitlab::zernike::{default_index_set, ZernikeIndex};

/// Gait recognition toolkit: energy silhouette templates, Zernike moment
/// covariate screening, oriented-gradient features and linear-SVM
/// identification.
#[derive(Parser)]
#[command(name = "gaitlab", version, about)]
struct Cli {
    /// Pipeline configuration file (key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the configured random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Cap worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Split,
    Loo,
}

#[derive(Clone, Copy, ValueEnum)]
enum CovariateArg {
    None,
    Coat,
    Bag,
}

#[derive(Clone, Copy, ValueEnum)]
enum PartArg {
    Neck,
    Chest,
    Pelvic,
    Limb,
}

impl PartArg {
    fn to_part(self) -> PartId {
        match self {
            PartArg::Neck => PartId::Neck,
            PartArg::Chest => PartId::Chest,
            PartArg::Pelvic => PartId::Pelvic,
            PartArg::Limb => PartId::Limb,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the moment database and model bank from gallery sequences.
    Enroll {
        /// Dataset root containing dataset.json.
        root: PathBuf,
        /// Directory for the persisted artifacts.
        #[arg(long)]
        out: PathBuf,
        /// Also dump gallery feature vectors as CSV.
        #[arg(long)]
        dump_features: Option<PathBuf>,
    },
    /// Screen and classify one probe sequence directory.
    Identify {
        /// Directory of probe frames (integer-named .png/.pgm files).
        probe: PathBuf,
        #[arg(long)]
        moment_db: PathBuf,
        #[arg(long)]
        model_bank: PathBuf,
    },
    /// Run an evaluation and write report.csv / cmc.csv.
    Evaluate {
        /// Dataset root containing dataset.json.
        root: PathBuf,
        #[arg(long, value_enum, default_value = "loo")]
        mode: ModeArg,
        /// Directory for report.csv and cmc.csv.
        #[arg(long)]
        out: PathBuf,
        /// Fail (nonzero exit) when rank-1 CCR falls below this percent.
        #[arg(long)]
        assert_rank1_min: Option<f64>,
        /// Fail (nonzero exit) when CMC(5) falls below this percent.
        #[arg(long)]
        assert_rank5_min: Option<f64>,
        /// Also dump feature vectors as CSV.
        #[arg(long)]
        dump_features: Option<PathBuf>,
    },
    /// Generate a synthetic dataset.
    Synth {
        /// Output dataset root.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        subjects: usize,
        /// Clean gallery sequences per subject.
        #[arg(long, default_value_t = 4)]
        sequences: usize,
        #[arg(long, default_value_t = 60)]
        frames: usize,
        /// Gait cycle length in frames.
        #[arg(long, default_value_t = 30)]
        cycle: usize,
        /// Probe sequences per subject (0 = none).
        #[arg(long, default_value_t = 0)]
        probe_sequences: usize,
        /// Covariate injected into probe sequences.
        #[arg(long, value_enum, default_value = "none")]
        covariate: CovariateArg,
        /// Body band affected by the covariate.
        #[arg(long, value_enum, default_value = "chest")]
        affected_part: PartArg,
    },
    /// Print the Zernike moments of a grayscale image as CSV.
    Zernike {
        image: PathBuf,
        /// Comma-separated n:m pairs (default 5:1,5:3,5:5).
        #[arg(long)]
        indices: Option<String>,
    },
    /// Build the energy template of a frame directory and save it as PNG.
    BuildAesi {
        frames_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the four part slices into this directory.
        #[arg(long)]
        dump_parts: Option<PathBuf>,
    },
}

fn parse_indices(text: &str) -> Result<Vec<ZernikeIndex>> {
    let mut out = Vec::new();
    for piece in text.split(',') {
        let (n, m) = piece.trim().split_once(':').ok_or_else(|| {
            gaitlab::error::Error::Parameter(format!("expected n:m, got `{piece}`"))
        })?;
        let n = n.parse::<u32>().map_err(|_| {
            gaitlab::error::Error::Parameter(format!("bad order in `{piece}`"))
        })?;
        let m = m.parse::<i32>().map_err(|_| {
            gaitlab::error::Error::Parameter(format!("bad repetition in `{piece}`"))
        })?;
        out.push(ZernikeIndex::new(n, m)?);
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
        config.svm.seed = seed;
    }

    match cli.command {
        Command::Enroll {
            root,
            out,
            dump_features,
        } => {
            let summary = cmd_enroll(&root, &config, &out, dump_features.as_deref())?;
            println!(
                "enrolled {} sequences of {} subjects",
                summary.gallery_sequences, summary.subjects
            );
            println!("moment db:  {}", summary.moment_db_path.display());
            println!("model bank: {}", summary.model_bank_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Identify {
            probe,
            moment_db,
            model_bank,
        } => {
            let report = cmd_identify(&probe, &moment_db, &model_bank, &config)?;
            print!("{}", format_identify_report(&report));
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate {
            root,
            mode,
            out,
            assert_rank1_min,
            assert_rank5_min,
            dump_features,
        } => {
            let mode = match mode {
                ModeArg::Split => EvalMode::Split,
                ModeArg::Loo => EvalMode::Loo,
            };
            let report = cmd_evaluate(&root, &config, mode, &out, dump_features.as_deref())?;
            print!("{}", summary_string(&report));
            let mut failed = false;
            if let Some(min) = assert_rank1_min {
                if report.rank1_ccr < min {
                    eprintln!(
                        "assertion failed: rank-1 CCR {:.2}% below required {min}%",
                        report.rank1_ccr
                    );
                    failed = true;
                }
            }
            if let Some(min) = assert_rank5_min {
                let rank5 = report
                    .cmc
                    .iter()
                    .find(|(r, _)| *r == 5)
                    .map(|(_, p)| *p)
                    .unwrap_or(100.0);
                if rank5 < min {
                    eprintln!("assertion failed: CMC(5) {rank5:.2}% below required {min}%");
                    failed = true;
                }
            }
            Ok(if failed {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Synth {
            out,
            subjects,
            sequences,
            frames,
            cycle,
            probe_sequences,
            covariate,
            affected_part,
        } => {
            let injection = match covariate {
                CovariateArg::None => Injection::None,
                CovariateArg::Coat => Injection::Coat(affected_part.to_part()),
                CovariateArg::Bag => Injection::Bag(affected_part.to_part()),
            };
            let synth = SynthConfig {
                subjects,
                sequences_per_subject: sequences,
                frames_per_sequence: frames,
                cycle_length: cycle,
                injection: Injection::None,
                seed: config.seed,
                normalization: NormalizationSpec::new(
                    config.normalization.target_height,
                    config.normalization.target_width,
                )?,
            };
            let count = cmd_synth(&out, &synth, probe_sequences, injection)?;
            println!("wrote {count} sequences under {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Zernike { image, indices } => {
            let indices = match indices {
                Some(text) => parse_indices(&text)?,
                None => default_index_set(),
            };
            print!("{}", cmd_zernike(&image, &indices)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::BuildAesi {
            frames_dir,
            out,
            dump_parts,
        } => {
            cmd_build_aesi(&frames_dir, &out, dump_parts.as_deref(), &config)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("GAITLAB_LOG")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: could not configure {threads} threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
