//! Command-line harness for the trajectorylet action-recognition pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use trajlet::config::PipelineConfig;
use trajlet::pipeline;
use trajlet::skeleton::{self, MsrCoords};
use trajlet::synth::{self, SynthSpec};

#[derive(Parser)]
#[command(
    name = "trajlet",
    about = "Skeleton action recognition with mined trajectorylet detectors",
    version
)]
struct Cli {
    /// Config file (key=value lines); defaults to the action3d preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a single config key, e.g. --set cluster_k=200. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Coords {
    Real,
    Screen,
}

#[derive(Subcommand)]
enum Command {
    /// Convert raw MSR skeleton files to the canonical instance format.
    Ingest {
        /// Directory of raw `a*_s*_e*` skeleton files.
        input: PathBuf,
        /// Output directory for canonical files (same basenames, .txt).
        output: PathBuf,
        /// Which coordinate rows to keep from interleaved files.
        #[arg(long, value_enum, default_value = "real")]
        coords: Coords,
    },
    /// Train on the configured protocol's training split and save a model bundle.
    Train {
        /// Directory of canonical instance files.
        data: PathBuf,
        /// Output directory for the model bundle (written atomically).
        #[arg(long, default_value = "bundle")]
        out: PathBuf,
    },
    /// Train and evaluate under the configured protocol; print the report.
    Evaluate {
        data: PathBuf,
        /// Also save the model bundle(s) under this directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print machine-readable `metric value` lines instead of the table.
        #[arg(long)]
        machine: bool,
    },
    /// Re-run evaluation for each value of one parameter; print a text table.
    Sweep {
        data: PathBuf,
        /// One of: K, M_A, N_A, L, pyramid_levels, components.
        #[arg(long)]
        parameter: String,
        /// Comma-separated values to sweep over.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
    },
    /// Generate a labeled synthetic dataset with planted motion motifs.
    Synth {
        /// Output directory; also writes planted_windows.txt ground truth.
        output: PathBuf,
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 10)]
        instances_per_class: usize,
        #[arg(long, default_value_t = 8)]
        joints: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Print the report stored in a saved model bundle.
    Report {
        bundle: PathBuf,
        #[arg(long)]
        machine: bool,
    },
}

fn build_config(cli: &Cli) -> trajlet::Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    for pair in &cli.overrides {
        let (key, value) = pair.split_once('=').ok_or_else(|| {
            trajlet::Error::InvalidInput(format!("--set expects KEY=VALUE, got '{pair}'"))
        })?;
        config.set(key.trim(), value.trim())?;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> trajlet::Result<()> {
    match &cli.command {
        Command::Ingest {
            input,
            output,
            coords,
        } => {
            let coords = match coords {
                Coords::Real => MsrCoords::RealWorld,
                Coords::Screen => MsrCoords::Screen,
            };
            std::fs::create_dir_all(output)?;
            let mut paths: Vec<_> = std::fs::read_dir(input)?
                .collect::<std::result::Result<Vec<_>, _>>()?
                .into_iter()
                .map(|e| e.path())
                .filter(|p| p.is_file())
                .collect();
            paths.sort();
            let mut count = 0usize;
            for path in &paths {
                if skeleton::parse_msr_filename(path).is_err() {
                    eprintln!("skipping {} (not an a*_s*_e* file)", path.display());
                    continue;
                }
                let seq = skeleton::load_msr_instance(path, coords, skeleton::MSR_JOINT_COUNT)?;
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap();
                skeleton::save_canonical(&seq, &output.join(format!("{stem}.txt")))?;
                count += 1;
            }
            println!("ingested {count} instances into {}", output.display());
            Ok(())
        }
        Command::Train { data, out } => {
            let config = build_config(cli)?;
            let dataset = pipeline::load_dataset(data, &config.exclusions)?;
            let (train, test) = config.protocol.split(&dataset)?;
            let output = pipeline::run_pipeline(&dataset, &train, &test, &config)?;
            pipeline::save_bundle(&output, out)?;
            println!(
                "trained {} template detectors (C={}); bundle saved to {}",
                output.bundle.template.detectors.len(),
                output.bundle.chosen_c,
                out.display()
            );
            Ok(())
        }
        Command::Evaluate { data, out, machine } => {
            let config = build_config(cli)?;
            let dataset = pipeline::load_dataset(data, &config.exclusions)?;
            let runs = pipeline::evaluate_protocol(&dataset, &config)?;
            for (name, output) in &runs {
                if runs.len() > 1 {
                    println!("=== {name} ===");
                }
                if *machine {
                    print!("{}", output.report.to_machine());
                } else {
                    print!("{}", output.report.to_text());
                }
                if let Some(dir) = out {
                    pipeline::save_bundle(output, &dir.join(name))?;
                }
            }
            if runs.len() > 1 {
                println!("mean_accuracy {:.4}", pipeline::mean_accuracy(&runs));
            }
            Ok(())
        }
        Command::Sweep {
            data,
            parameter,
            values,
        } => {
            let config = build_config(cli)?;
            let dataset = pipeline::load_dataset(data, &config.exclusions)?;
            let table = pipeline::sweep(&dataset, &config, parameter, values)?;
            print!("{table}");
            Ok(())
        }
        Command::Synth {
            output,
            classes,
            instances_per_class,
            joints,
            seed,
        } => {
            let spec = SynthSpec {
                class_count: *classes,
                instances_per_class: *instances_per_class,
                joint_count: *joints,
                seed: *seed,
                ..SynthSpec::default()
            };
            let instances = synth::generate_synthetic(&spec)?;
            synth::write_synthetic(&instances, output)?;
            println!(
                "wrote {} instances ({} classes) to {}",
                instances.len(),
                classes,
                output.display()
            );
            Ok(())
        }
        Command::Report { bundle, machine } => {
            let file = if *machine { "report.machine.txt" } else { "report.txt" };
            let text = std::fs::read_to_string(bundle.join(file))?;
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
