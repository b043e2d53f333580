//! Thin command-line front end over the library pipelines.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mmeval::channel::{write_channel_file, ArrayKind, EvalParams, Normalization};
use mmeval::experiment::{
    generate_channel, run_experiment, verify_bundle, Analysis, ChannelSource, ExperimentConfig,
    FingerprintParams,
};
use mmeval::models::Scenario;

#[derive(Parser)]
#[command(
    name = "mmeval",
    about = "Massive MIMO channel evaluation: spreads, DPC capacity, fingerprints",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Rayleigh,
    LosColocated,
    NlosColocated,
    FarApart,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArrayArg {
    Ula,
    Uca,
}

impl From<ArrayArg> for ArrayKind {
    fn from(a: ArrayArg) -> Self {
        match a {
            ArrayArg::Ula => ArrayKind::Ula,
            ArrayArg::Uca => ArrayKind::Uca,
        }
    }
}

/// Flags shared by the analysis subcommands.
#[derive(Args)]
struct SourceArgs {
    /// Input CTF1 channel file; omit to generate a channel instead.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Scenario preset used when no input file is given.
    #[arg(long, value_enum, default_value = "rayleigh")]
    scenario: ScenarioArg,
    /// Array geometry for generated scenario channels.
    #[arg(long, value_enum, default_value = "ula")]
    array: ArrayArg,
    /// Number of users K for generated channels.
    #[arg(long, default_value_t = 4)]
    users: usize,
    /// Number of antenna ports A for generated Rayleigh channels.
    #[arg(long, default_value_t = 128)]
    ports: usize,
    /// Number of subcarriers N for generated channels.
    #[arg(long, default_value_t = 161)]
    subcarriers: usize,
    /// Master seed: drives channel generation and subset draws.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl SourceArgs {
    /// User count of the channel under analysis: file headers win over the
    /// --users flag.
    fn effective_users(&self) -> Result<usize, String> {
        Ok(self.effective_dims()?.0)
    }

    /// (users, ports) of the channel under analysis.
    fn effective_dims(&self) -> Result<(usize, usize), String> {
        match &self.input {
            Some(path) => mmeval::channel::read_channel_dims(path)
                .map(|(users, ports, _)| (users, ports))
                .map_err(|e| e.to_string()),
            None => match self.scenario {
                ScenarioArg::Rayleigh => Ok((self.users, self.ports)),
                _ => Ok((self.users, 128)),
            },
        }
    }

    fn source(&self) -> ChannelSource {
        match (&self.input, self.scenario) {
            (Some(path), _) => ChannelSource::File { path: path.clone() },
            (None, ScenarioArg::Rayleigh) => ChannelSource::Rayleigh {
                users: self.users,
                ports: self.ports,
                subcarriers: self.subcarriers,
                seed: self.seed,
            },
            (None, s) => ChannelSource::Scenario {
                scenario: match s {
                    ScenarioArg::LosColocated => Scenario::LosColocated,
                    ScenarioArg::NlosColocated => Scenario::NlosColocated,
                    ScenarioArg::FarApart => Scenario::FarApart,
                    ScenarioArg::Rayleigh => unreachable!(),
                },
                users: self.users,
                subcarriers: self.subcarriers,
                seed: self.seed,
                array: self.array.into(),
            },
        }
    }
}

#[derive(Args)]
struct EnsembleArgs {
    /// Antenna counts M: comma list (4,32,128) or range start:step:stop.
    #[arg(long, default_value = "4:4:128")]
    antennas: String,
    /// Random antenna subsets per M (one is used when M equals the port count).
    #[arg(long, default_value_t = 2000)]
    subsets: usize,
    /// Interference-free SNR in dB.
    #[arg(long = "rho-db", default_value_t = 10.0)]
    rho_db: f64,
    /// Channel normalization: 1 (per-user) or 2 (global).
    #[arg(long, default_value_t = 1)]
    norm: u8,
}

impl EnsembleArgs {
    fn params(&self, users: usize, seed: u64) -> Result<EvalParams, String> {
        let antenna_counts = parse_antenna_list(&self.antennas)?;
        let normalization = match self.norm {
            1 => Normalization::Norm1,
            2 => Normalization::Norm2,
            other => return Err(format!("--norm must be 1 or 2, got {other}")),
        };
        Ok(EvalParams {
            rho: 10f64.powf(self.rho_db / 10.0),
            num_users: users,
            antenna_counts,
            num_subsets: self.subsets,
            master_seed: seed,
            normalization,
        })
    }
}

fn parse_antenna_list(text: &str) -> Result<Vec<usize>, String> {
    let parse =
        |s: &str| -> Result<usize, String> { s.trim().parse().map_err(|_| format!("bad antenna count `{s}`")) };
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err("range must be start:step:stop".into());
        }
        let start = parse(parts[0])?;
        let step = parse(parts[1])?;
        let stop = parse(parts[2])?;
        if step == 0 {
            return Err("range step must be positive".into());
        }
        Ok((start..=stop).step_by(step).collect())
    } else {
        text.split(',').map(parse).collect()
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a channel and write it as a CTF1 file (plus a ground-truth
    /// sidecar for geometric scenarios).
    Generate {
        #[command(flatten)]
        source: SourceArgs,
        /// Output CTF1 path.
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth sidecar path (scenario sources only).
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Singular-value-spread ensemble (always Normalization 1).
    Spread {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        /// Output bundle directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// DPC capacity ensemble.
    Capacity {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-user spatial fingerprints over sliding ULA windows.
    Fingerprint {
        #[command(flatten)]
        source: SourceArgs,
        /// Sliding window length in elements.
        #[arg(long, default_value_t = 10)]
        window: usize,
        /// Components estimated per window.
        #[arg(long, default_value_t = 200)]
        mpcs: usize,
        /// Energy fraction the selected cells must cover.
        #[arg(long = "energy-fraction", default_value_t = 0.9)]
        energy_fraction: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a JSON experiment config end to end.
    Run {
        /// Experiment config path.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute a bundle's checksums against its manifest.
    Verify {
        /// Bundle directory containing manifest.json.
        #[arg(long)]
        dir: PathBuf,
    },
}

fn main() -> ExitCode {
    // honor an explicit thread-count override before rayon spins up
    if let Ok(threads) = std::env::var("MMEVAL_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Generate { source, out, truth } => {
            let src = source.source();
            let (tensor, ground_truth) = generate_channel(&src).map_err(|e| e.to_string())?;
            write_channel_file(&tensor, &out).map_err(|e| e.to_string())?;
            println!(
                "wrote {} ({} users x {} ports x {} subcarriers)",
                out.display(),
                tensor.users(),
                tensor.ports(),
                tensor.subcarriers()
            );
            if let Some(path) = truth {
                match ground_truth {
                    Some(t) => {
                        let bytes = serde_json::to_vec_pretty(&t).map_err(|e| e.to_string())?;
                        std::fs::write(&path, bytes).map_err(|e| e.to_string())?;
                        println!("wrote {}", path.display());
                    }
                    None => return Err("--truth is only available for scenario sources".into()),
                }
            }
            Ok(())
        }
        Command::Spread { source, ensemble, out } => {
            let params = ensemble.params(source.effective_users()?, source.seed)?;
            let config = ExperimentConfig {
                source: source.source(),
                analyses: vec![Analysis::Spread],
                params,
                fingerprint: FingerprintParams::default(),
                output_dir: out,
            };
            let manifest = run_experiment(&config).map_err(|e| e.to_string())?;
            print_summary(&config.output_dir, "spread_report.json")?;
            println!("bundle complete: {} artifacts", manifest.artifacts.len());
            Ok(())
        }
        Command::Capacity { source, ensemble, out } => {
            let params = ensemble.params(source.effective_users()?, source.seed)?;
            let config = ExperimentConfig {
                source: source.source(),
                analyses: vec![Analysis::Capacity],
                params,
                fingerprint: FingerprintParams::default(),
                output_dir: out,
            };
            let manifest = run_experiment(&config).map_err(|e| e.to_string())?;
            print_summary(&config.output_dir, "capacity_report.json")?;
            println!("bundle complete: {} artifacts", manifest.artifacts.len());
            Ok(())
        }
        Command::Fingerprint {
            source,
            window,
            mpcs,
            energy_fraction,
            out,
        } => {
            let (users, ports) = source.effective_dims()?;
            let params = EvalParams {
                rho: 10.0,
                num_users: users,
                antenna_counts: vec![ports],
                num_subsets: 1,
                master_seed: source.seed,
                normalization: Normalization::Norm1,
            };
            let config = ExperimentConfig {
                source: source.source(),
                analyses: vec![Analysis::Fingerprint],
                params,
                fingerprint: FingerprintParams {
                    window_len: window,
                    num_mpcs: mpcs,
                    energy_fraction,
                },
                output_dir: out,
            };
            let manifest = run_experiment(&config).map_err(|e| e.to_string())?;
            for a in &manifest.artifacts {
                println!("wrote {}", config.output_dir.join(&a.name).display());
            }
            Ok(())
        }
        Command::Run { config, out } => {
            let text = std::fs::read_to_string(&config).map_err(|e| e.to_string())?;
            let mut cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| e.to_string())?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let manifest = run_experiment(&cfg).map_err(|e| e.to_string())?;
            println!(
                "bundle complete in {}: {} artifacts",
                cfg.output_dir.display(),
                manifest.artifacts.len()
            );
            Ok(())
        }
        Command::Verify { dir } => {
            let manifest = verify_bundle(&dir).map_err(|e| e.to_string())?;
            println!(
                "verified {} artifacts in {}",
                manifest.artifacts.len(),
                dir.display()
            );
            Ok(())
        }
    }
}

/// Prints per-M medians and means from a freshly written report.
fn print_summary(dir: &std::path::Path, report_name: &str) -> Result<(), String> {
    let bytes = std::fs::read(dir.join(report_name)).map_err(|e| e.to_string())?;
    let report: mmeval::ensemble::EnsembleReport =
        serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
    for rec in &report.records {
        println!(
            "{} M={:3}: median {:8.3}  mean {:8.3}  90% CI [{:8.3}, {:8.3}]  ({} samples)",
            rec.metric, rec.antennas, rec.median, rec.mean, rec.ci_low, rec.ci_high, rec.samples
        );
    }
    Ok(())
}
