use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use dlora_core::phy::{self, ChannelModelConfig};
use dlora_core::policy::PolicyKind;
use dlora_core::LoRaParams;

use dlora_sim::config::{self, ConfigFile, SweepSpec};
use dlora_sim::output::{self, AgentSnapshot};
use dlora_sim::sweep::{self, RunOptions};

/// LoRa uplink simulator with UCB bandit agents and baseline policies.
#[derive(Debug, Parser)]
#[command(name = "dlora", version)]
struct Cli {
    /// TOML config file; defaults apply to anything it leaves out.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(
        long,
        global = true,
        value_name = "DIR",
        env = "DLORA_OUT_DIR",
        default_value = "results"
    )]
    out: PathBuf,
    /// Seed override (`run`: sim.seed, `sweep`: sweep.seeds).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Policy override (`run`: sim.policy, `sweep`: sweep.policies).
    #[arg(long, global = true, value_name = "NAME", value_parser = parse_policy)]
    policy: Option<PolicyKind>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the single configuration in [sim].
    Run {
        /// Also write a per-packet trace CSV.
        #[arg(long)]
        trace: bool,
        /// Start from agents saved by an earlier run.
        #[arg(long, value_name = "FILE")]
        agents_in: Option<PathBuf>,
        /// Save the agents after the run.
        #[arg(long, value_name = "FILE")]
        agents_out: Option<PathBuf>,
    },
    /// Run every radius × policy × seed cell of [sweep].
    Sweep {
        /// Also write per-packet trace CSVs, one per cell.
        #[arg(long)]
        trace: bool,
        /// Worker threads (overrides sweep.workers; 0 = all cores).
        #[arg(long, value_name = "N")]
        workers: Option<usize>,
    },
    /// Check a config file and report the sweep size.
    Validate,
    /// Airtime and link thresholds for one parameter set.
    Toa {
        #[arg(long, default_value_t = 7)]
        sf: u8,
        /// Bandwidth, Hz.
        #[arg(long, default_value_t = 125_000)]
        bw: u32,
        /// Payload, bytes.
        #[arg(long, default_value_t = 20)]
        payload: u32,
        /// Transmit power for the energy figure, dBm.
        #[arg(long, default_value_t = 14)]
        tp: i8,
    },
}

fn parse_policy(s: &str) -> Result<PolicyKind, String> {
    s.parse().map_err(|_| {
        format!(
            "unknown policy `{s}`; expected one of {}",
            PolicyKind::names().join(", ")
        )
    })
}

fn load(path: Option<&Path>) -> Result<ConfigFile> {
    Ok(match path {
        Some(p) => config::read_config(p)?,
        None => ConfigFile::default(),
    })
}

fn write_config(out: &Path, file: &ConfigFile) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join(output::CONFIG_FILE);
    std::fs::write(&path, file.to_toml()).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    let mut file = load(cli.config.as_deref())?;
    match cli.command {
        Command::Run {
            trace,
            agents_in,
            agents_out,
        } => {
            if let Some(s) = cli.seed {
                file.sim.seed = s;
            }
            if let Some(p) = cli.policy {
                file.sim.policy = p;
            }
            let spec = SweepSpec::single(&file)?;
            let agents = match &agents_in {
                Some(path) => {
                    let snap: AgentSnapshot = output::read_json(path)?;
                    if snap.domains != spec.base.domains {
                        bail!("{}: snapshot domains differ from the config", path.display());
                    }
                    Some(snap.agents)
                }
                None => None,
            };
            write_config(&cli.out, &file)?;
            let opts = RunOptions {
                trace_dir: trace.then(|| cli.out.clone()),
                agents,
            };
            let art = sweep::run_sweep(&spec, &cli.out, &opts)?;
            if let Some(path) = agents_out {
                let run = &art.runs[0];
                if !run.cell.policy.is_learning() {
                    bail!("policy {} has no agents to save", run.cell.policy);
                }
                let snap = AgentSnapshot {
                    policy: run.cell.policy.name().to_string(),
                    radius_m: run.cell.radius_m,
                    seed: run.cell.seed,
                    domains: spec.base.domains.clone(),
                    agents: run.result.agents.clone(),
                };
                output::write_json(&path, &snap)?;
            }
            print!("{}", output::render_summary(&art.summary_rows));
            eprintln!("wrote {}", art.results.display());
        }
        Command::Sweep { trace, workers } => {
            if let Some(s) = cli.seed {
                file.sweep.seeds = vec![s];
            }
            if let Some(p) = cli.policy {
                file.sweep.policies = vec![p];
            }
            if let Some(w) = workers {
                file.sweep.workers = w;
            }
            let spec = SweepSpec::from_file(&file)?;
            write_config(&cli.out, &file)?;
            let opts = RunOptions {
                trace_dir: trace.then(|| cli.out.join("trace")),
                agents: None,
            };
            let art = sweep::run_sweep(&spec, &cli.out, &opts)?;
            print!("{}", output::render_summary(&art.summary_rows));
            eprintln!("wrote {} rows to {}", art.rows.len(), art.results.display());
        }
        Command::Validate => {
            let spec = SweepSpec::from_file(&file)?;
            SweepSpec::single(&file)?;
            println!(
                "ok: {} sweep runs of {} episodes each",
                spec.cells().len(),
                spec.episodes_per_run()
            );
        }
        Command::Toa { sf, bw, payload, tp } => {
            let ch: ChannelModelConfig = file.channel;
            ch.validate("channel")?;
            let p = LoRaParams::new(sf, bw, 0, tp);
            let toa = phy::time_on_air(payload, &p, &ch)?;
            println!("symbol time      {} s", phy::symbol_time(&p));
            println!("payload symbols  {}", phy::payload_symbols(payload, &p, &ch)?);
            println!("time on air      {toa} s");
            println!("sensitivity      {} dBm", phy::receiver_sensitivity(sf, bw)?);
            println!("SINR threshold   {} dB", phy::sinr_threshold(sf)?);
            println!("energy at {tp} dBm {} mJ", phy::packet_energy(&p, toa));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cmd = Cli::command().after_help(config::key_reference());
    let cli = match Cli::from_arg_matches(&cmd.get_matches()) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
