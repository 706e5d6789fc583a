//! Command-line front end. Exit codes: 0 success, 1 domain error, 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use metis_core::ppo::{Environment, EvacuationEnv, Policy, TrainError, Trainer, TrainingConfig};
use metis_core::sim::{self, EndCondition, RunMode};
use metis_core::world::{load_scenario, save_scenario, validate, FireSource, Scenario};
use metis_core::{geometry::Vec2, samples};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Max radius given to injected fires when the spec leaves it out.
const DEFAULT_INJECT_RADIUS: f64 = 3.0;

#[derive(Debug, Parser)]
#[command(name = "metis", version, about = "Building-evacuation simulator with learned pedestrian policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a scenario document and list every issue.
    Validate { scenario: PathBuf },
    /// Train a policy on a scenario's spawn areas.
    Train {
        scenario: PathBuf,
        /// TOML file with [trainer], [reward] and [perception] tables.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Metrics destination (newline-delimited JSON); standard output if omitted.
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Continue from a checkpoint instead of starting fresh.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run an evacuation with a trained policy and write the event log.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// all_resolved, count_safe:N, count_dead:N, time_limit:SECONDS or manual. Repeatable.
        #[arg(long = "end", default_values_t = [EndCondition::AllResolved.to_spec()])]
        end: Vec<String>,
        #[arg(long)]
        log: PathBuf,
        /// TICK:X,Z[:MAX_RADIUS[:GROWTH_RATE[:PATCH_RATE]]]. Repeatable.
        #[arg(long = "inject")]
        inject: Vec<String>,
    },
    /// Serve the HTTP/WebSocket interface.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Directory holding scenarios/, policies/ and logs/.
        #[arg(long, default_value = "metis-data")]
        data: PathBuf,
    },
    /// Print the results recorded in an event log.
    Results {
        log: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Write one of the built-in sample scenarios.
    Sample {
        /// single_room, training_building or case_study
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

trait ToSpec {
    fn to_spec(&self) -> String;
}

impl ToSpec for EndCondition {
    fn to_spec(&self) -> String {
        match self {
            EndCondition::AllResolved => "all_resolved".into(),
            EndCondition::CountSafe { n } => format!("count_safe:{n}"),
            EndCondition::CountDead { n } => format!("count_dead:{n}"),
            EndCondition::TimeLimit { seconds } => format!("time_limit:{seconds}"),
            EndCondition::Manual => "manual".into(),
        }
    }
}

/// Error with the exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn domain(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_DOMAIN, message: message.into() }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

/// Parses `TICK:X,Z[:MAX_RADIUS[:GROWTH_RATE[:PATCH_RATE]]]`.
pub fn parse_injection(spec: &str) -> Result<(u64, FireSource), String> {
    let bad = || format!("invalid --inject {spec:?}: expected TICK:X,Z[:MAX_RADIUS[:GROWTH_RATE[:PATCH_RATE]]]");
    let parts: Vec<&str> = spec.split(':').collect();
    if !(2..=5).contains(&parts.len()) {
        return Err(bad());
    }
    let tick: u64 = parts[0].parse().map_err(|_| bad())?;
    let (x, z) = parts[1].split_once(',').ok_or_else(bad)?;
    let origin = Vec2::new(x.parse().map_err(|_| bad())?, z.parse().map_err(|_| bad())?);
    let mut source = FireSource::at(origin, DEFAULT_INJECT_RADIUS);
    if let Some(r) = parts.get(2) {
        source.max_radius = r.parse().map_err(|_| bad())?;
    }
    if let Some(g) = parts.get(3) {
        source.growth_rate = g.parse().map_err(|_| bad())?;
    }
    if let Some(p) = parts.get(4) {
        source.patch_rate = p.parse().map_err(|_| bad())?;
    }
    Ok((tick, source))
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| domain(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| domain(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    load_scenario(&read(path)?).map_err(|e| domain(format!("{}: {e}", path.display())))
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    let io = |e: io::Error| domain(e.to_string());
    match command {
        Command::Validate { scenario } => {
            let s = load(&scenario)?;
            let issues = validate(&s);
            if issues.is_empty() {
                writeln!(out, "ok").map_err(io)?;
                return Ok(());
            }
            for i in &issues {
                let entity = i.entity.as_deref().map(|e| format!(" {e}")).unwrap_or_default();
                writeln!(out, "{:?}{entity}: {}", i.code, i.message).map_err(io)?;
            }
            Err(domain(format!("{} validation issue(s)", issues.len())))
        }
        Command::Train { scenario, config, out: ckpt, metrics, resume } => {
            let s = load(&scenario)?;
            let cfg = match &config {
                Some(p) => {
                    let text = String::from_utf8(read(p)?).map_err(|_| domain("config is not UTF-8"))?;
                    TrainingConfig::from_toml_str(&text).map_err(|e| domain(format!("{}: {e}", p.display())))?
                }
                None => TrainingConfig::default(),
            };
            train(&s, cfg, &ckpt, metrics.as_deref(), resume.as_deref(), out)
        }
        Command::Simulate { scenario, policy, seed, end, log, inject } => {
            let conditions = end
                .iter()
                .map(|e| e.parse::<EndCondition>().map_err(|e| usage(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            let injections = inject.iter().map(|i| parse_injection(i).map_err(usage)).collect::<Result<Vec<_>, _>>()?;
            let s = load(&scenario)?;
            let policy = Policy::from_bytes(&read(&policy)?).map_err(|e| domain(e.to_string()))?;
            let (results, text) = sim::run(&s, &policy, conditions, seed, RunMode::Headless, &injections)
                .map_err(|e| domain(e.to_string()))?;
            write(&log, text.as_bytes())?;
            writeln!(out, "{}", serde_json::to_string(&results).expect("results serialize")).map_err(io)?;
            Ok(())
        }
        Command::Serve { addr, data } => crate::server::serve_blocking(addr, data).map_err(|e| domain(e.to_string())),
        Command::Results { log, json } => {
            let text = String::from_utf8(read(&log)?).map_err(|_| domain("log is not UTF-8"))?;
            let r = sim::results_from_log(&text).map_err(|e| domain(e.to_string()))?;
            if json {
                writeln!(out, "{}", serde_json::to_string(&r).expect("results serialize")).map_err(io)?;
            } else {
                writeln!(
                    out,
                    "total: {}\nsurvived: {}\ndied: {}\nunresolved: {}\nelapsed_ticks: {}\nend_reason: {}",
                    r.total, r.survived, r.died, r.unresolved, r.elapsed_ticks, r.end_reason
                )
                .map_err(io)?;
            }
            Ok(())
        }
        Command::Sample { name, out: path } => {
            let (_, s) = samples::all()
                .into_iter()
                .find(|(n, _)| *n == name)
                .ok_or_else(|| usage(format!("unknown sample {name:?}")))?;
            let bytes = save_scenario(&s);
            match path {
                Some(p) => write(&p, &bytes),
                None => out.write_all(&bytes).map_err(io),
            }
        }
    }
}

fn train(
    scenario: &Scenario,
    cfg: TrainingConfig,
    ckpt: &Path,
    metrics: Option<&Path>,
    resume: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), Failure> {
    let tc = &cfg.trainer;
    let mut env =
        EvacuationEnv::new(scenario, cfg.reward.clone(), cfg.perception.clone(), tc.num_parallel_agents, tc.seed)
            .map_err(|e| domain(e.to_string()))?;
    let mut trainer = match resume {
        Some(p) => Trainer::load_checkpoint(&read(p)?, &mut env).map_err(|e| domain(e.to_string()))?,
        None => Trainer::new(cfg.clone(), env.observation_len()).map_err(|e| domain(e.to_string()))?,
    };
    let mut file = match metrics {
        Some(p) => Some(fs::File::create(p).map_err(|e| domain(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let mut write_err = None;
    let result = trainer.run(&mut env, |m| {
        let line = m.to_json_line();
        let r = match file.as_mut() {
            Some(f) => writeln!(f, "{line}"),
            None => writeln!(stdout, "{line}"),
        };
        match r {
            Ok(()) => ControlFlow::Continue(()),
            Err(e) => {
                write_err = Some(e);
                ControlFlow::Break(())
            }
        }
    });
    if let Some(e) = write_err {
        return Err(domain(format!("writing metrics: {e}")));
    }
    match result {
        Ok(()) => write(ckpt, &trainer.save_checkpoint(&env)),
        Err(TrainError::Diverged { step, last_good }) => {
            write(ckpt, &last_good)?;
            Err(domain(format!("training diverged at step {step}; last good checkpoint written to {}", ckpt.display())))
        }
        Err(e) => Err(domain(e.to_string())),
    }
}
