use std::fs::File;
use std::io::{self, BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use meetsched::calendar::{Designation, SlotMask};
use meetsched::dialogue::{run_repl, Session};
use meetsched::env::UserDirectory;
use meetsched::experiment::{grad_check_suite, run_experiment, ExperimentConfig, GRAD_TOLERANCE, OUT_DIR_ENV};
use meetsched::policy::PolicyParams;
use meetsched::slotmap::{generate_dataset, write_dataset, MapperModel, PhraseTable, DATASET_SIZE, DEFAULT_FRAMES};

#[derive(Parser)]
#[command(name = "meetsched", version, about = "Meeting scheduling experiments and dialogue")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run {
        config: PathBuf,
    },
    /// Interactive scheduling dialogue.
    Repl {
        mapper_ckpt: PathBuf,
        policy_ckpt: Option<PathBuf>,
        /// Answer requests from the simulated participant profile.
        #[arg(long)]
        simulate: bool,
        /// Initiator's name from the user directory.
        #[arg(long, default_value = "Puneet")]
        initiator: String,
        #[arg(long, default_value = "junior")]
        designation: String,
        /// Comma-separated slots simulated participants refuse.
        #[arg(long, value_delimiter = ',')]
        uncomfortable: Vec<usize>,
        /// Simulated participants accept anything a Senior initiator asks for.
        #[arg(long)]
        senior_override: bool,
    },
    /// Write a labelled time-phrase dataset (sentence TAB 40-bit label).
    GenDataset {
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = DATASET_SIZE)]
        size: usize,
    },
    /// Compare backprop with finite differences for both networks.
    GradCheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 100)]
        updates: usize,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config } => run(&config),
        Command::Repl {
            mapper_ckpt,
            policy_ckpt,
            simulate,
            initiator,
            designation,
            uncomfortable,
            senior_override,
        } => {
            let mapper = MapperModel::load(open(&mapper_ckpt)?)
                .with_context(|| format!("loading {}", mapper_ckpt.display()))?;
            let policy = match &policy_ckpt {
                Some(p) => Some(PolicyParams::load(open(p)?).with_context(|| format!("loading {}", p.display()))?),
                None => None,
            };
            let directory = UserDirectory::default();
            let Some((initiator, _)) = directory.iter().find(|(_, n)| n.eq_ignore_ascii_case(&initiator)) else {
                bail!("unknown initiator `{initiator}`");
            };
            let Some(designation) = Designation::parse(&designation) else {
                bail!("designation must be junior, mid or senior, got `{designation}`");
            };
            let mut session = Session::new(mapper, policy, directory);
            session.initiator = initiator;
            session.designation = designation;
            session.profile.uncomfortable = SlotMask::from_slots(uncomfortable)?;
            session.profile.senior_override = senior_override;
            let stdin = io::stdin();
            run_repl(&mut session, stdin.lock(), &mut io::stdout().lock(), simulate)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::GenDataset { out, seed, size } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data = generate_dataset(&PhraseTable::default(), &DEFAULT_FRAMES, &UserDirectory::default(), size, &mut rng)?;
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            write_dataset(BufWriter::new(file), &data)?;
            println!("wrote {} samples to {}", data.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::GradCheck { seed, samples, updates } => {
            let rows = grad_check_suite(seed, samples, updates)?;
            let mut ok = true;
            println!("{:<38} {:<18} {:>8} {:>8} {:>12}", "network", "stage", "checked", "kinks", "max rel err");
            for r in &rows {
                println!(
                    "{:<38} {:<18} {:>8} {:>8} {:>12.3e}",
                    r.network, r.stage, r.report.checked, r.report.skipped_at_kinks, r.report.max_relative_error
                );
                ok &= r.passed(samples);
            }
            if ok {
                println!("all checks below {GRAD_TOLERANCE:e}");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("some checks failed (tolerance {GRAD_TOLERANCE:e})");
                Ok(ExitCode::FAILURE)
            }
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn run(path: &Path) -> Result<ExitCode> {
    let config = ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))?;
    let override_dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    let out = config.resolved_output_dir(override_dir.as_deref());
    let report = run_experiment(&config, &out)?;
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    Ok(ExitCode::SUCCESS)
}
