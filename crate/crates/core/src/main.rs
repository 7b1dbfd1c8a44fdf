use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use slotbench::baselines::{RandomSearch, StraightDown};
use slotbench::config::{ConfigFile, Experiment};
use slotbench::eval::{
    read_episodes, render_episode_svg, replay_episode, run_ablation, run_evaluation, train_insertion,
    ABLATION_CSV_HEADER,
};
use slotbench::nn::{read_checkpoint, write_checkpoint};
use slotbench::policy::{LearnedPolicy, Policy};
use slotbench::sac::METRICS_HEADER;
use slotbench::BUILD_ID;

#[derive(Parser, Debug)]
#[command(name = "slotbench", version = BUILD_ID, about = "Train and evaluate planar plate-insertion policies")]
struct Cli {
    /// Experiment file (TOML, unit-suffixed keys); built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; the SLOTBENCH_SEED environment variable takes precedence.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Checkpoint path, `straight-down` or `random-search`.
    #[arg(long, global = true, value_name = "POLICY")]
    policy: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a policy; writes metrics.csv and policy.ckpt.
    Train,
    /// Evaluate a policy; writes report.json and episodes.jsonl.
    Eval,
    /// Train and evaluate every ablation variant; writes ablation.csv and ablation.json.
    Ablate,
    /// Replay a logged episode open-loop and plot it as SVG.
    Replay {
        /// episodes.jsonl written by `eval`.
        log: PathBuf,
        /// Episode id inside the log.
        #[arg(long, default_value_t = 0)]
        episode: u64,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn resolve_seed(flag: u64) -> Result<u64, Failure> {
    match std::env::var("SLOTBENCH_SEED") {
        Ok(v) => {
            v.trim().parse().map_err(|_| Failure::Config(format!("SLOTBENCH_SEED is not an unsigned integer: {v:?}")))
        }
        Err(_) => Ok(flag),
    }
}

fn load_experiment(cli: &Cli, seed: u64) -> Result<Experiment, Failure> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p).map_err(config_err)?,
        None => ConfigFile::default(),
    };
    file.resolve(seed).map_err(config_err)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", path.display())))
}

fn load_policy(spec: Option<&str>, x: &Experiment) -> Result<Box<dyn Policy>, Failure> {
    match spec {
        None => Err(Failure::Config("--policy is required: a checkpoint path, straight-down or random-search".into())),
        Some("straight-down") => Ok(Box::new(StraightDown)),
        Some("random-search") => Ok(Box::new(RandomSearch::default())),
        Some(path) => {
            let f = File::open(path).map_err(|e| Failure::Config(format!("cannot open checkpoint {path}: {e}")))?;
            let ck = read_checkpoint(&mut BufReader::new(f))
                .map_err(|e| Failure::Config(format!("checkpoint {path}: {e}")))?;
            let label = Path::new(path)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "learned".into());
            let p = LearnedPolicy::new(ck, label);
            p.check_compatible(&x.env).map_err(|e| Failure::Config(format!("checkpoint {path}: {e}")))?;
            Ok(Box::new(p))
        }
    }
}

fn cmd_train(x: &Experiment, seed: u64, out: &Path) -> Result<(), Failure> {
    let mut metrics = create(&out.join("metrics.csv"))?;
    writeln!(metrics, "{METRICS_HEADER}").map_err(runtime_err)?;
    let mut write_err: Option<io::Error> = None;
    let every = (x.train.iterations / 50).max(1);
    let outcome = train_insertion(&x.train_setup(), seed, |m, _| {
        if write_err.is_none() {
            if let Err(e) = writeln!(metrics, "{}", m.csv_row()).and_then(|_| metrics.flush()) {
                write_err = Some(e);
            }
        }
        if m.iteration % every == 0 {
            eprintln!(
                "iteration {:>6}  success {:.2}  return {:+.3}  alpha {:.4}  noise {:.2}",
                m.iteration, m.success_rate, m.mean_return, m.alpha, m.epsilon_frac
            );
        }
    })
    .map_err(runtime_err)?;
    if let Some(e) = write_err {
        return Err(runtime_err(format!("writing metrics.csv: {e}")));
    }
    let ck = outcome.agent.checkpoint(x.env.history_len, x.env.include_velocity);
    let mut w = create(&out.join("policy.ckpt"))?;
    write_checkpoint(&mut w, &ck).map_err(runtime_err)?;
    w.flush().map_err(runtime_err)?;
    fs::write(out.join("train.json"), serde_json::to_string_pretty(&(seed, BUILD_ID, x)).map_err(runtime_err)?)
        .map_err(runtime_err)?;
    eprintln!("wrote {}", out.join("policy.ckpt").display());
    Ok(())
}

fn cmd_eval(x: &Experiment, policy: &mut dyn Policy, out: &Path) -> Result<(), Failure> {
    let mut log = create(&out.join("episodes.jsonl"))?;
    let report = run_evaluation(&x.env, &x.protocol, policy, Some(&mut log), BUILD_ID).map_err(runtime_err)?;
    log.flush().map_err(runtime_err)?;
    let json = serde_json::to_string_pretty(&report).map_err(runtime_err)?;
    fs::write(out.join("report.json"), json + "\n").map_err(runtime_err)?;
    println!(
        "{}: success {:.1}% +- {:.1}% over {} episodes",
        report.policy,
        100.0 * report.success_mean,
        100.0 * report.success_std,
        report.episodes.len()
    );
    Ok(())
}

fn cmd_ablate(x: &Experiment, out: &Path) -> Result<(), Failure> {
    let mut csv = create(&out.join("ablation.csv"))?;
    writeln!(csv, "{ABLATION_CSV_HEADER}").map_err(runtime_err)?;
    let mut write_err: Option<io::Error> = None;
    let rows = run_ablation(&x.train_setup(), &x.ablation_variants, &x.ablation_seeds, &x.protocol, BUILD_ID, |row| {
        eprintln!("{}", row.csv_row());
        if write_err.is_none() {
            if let Err(e) = writeln!(csv, "{}", row.csv_row()).and_then(|_| csv.flush()) {
                write_err = Some(e);
            }
        }
    });
    if let Some(e) = write_err {
        return Err(runtime_err(format!("writing ablation.csv: {e}")));
    }
    let json = serde_json::to_string_pretty(&rows).map_err(runtime_err)?;
    fs::write(out.join("ablation.json"), json + "\n").map_err(runtime_err)?;
    if rows.iter().any(|r| r.error.is_some()) {
        return Err(Failure::Runtime("some ablation rows failed; see ablation.csv".into()));
    }
    Ok(())
}

fn cmd_replay(log: &Path, episode: u64, out: &Path) -> Result<(), Failure> {
    let f = File::open(log).map_err(|e| Failure::Config(format!("cannot open log {}: {e}", log.display())))?;
    let episodes = read_episodes(BufReader::new(f)).map_err(runtime_err)?;
    let ep = episodes
        .iter()
        .find(|e| e.header.episode == episode)
        .ok_or_else(|| Failure::Config(format!("episode {episode} not found in {}", log.display())))?;
    let (check, poses) = replay_episode(ep).map_err(runtime_err)?;
    let path = out.join(format!("episode_{episode}.svg"));
    fs::write(&path, render_episode_svg(ep, &poses)).map_err(runtime_err)?;
    println!(
        "replayed {} steps, max pose deviation {:.3e}; wrote {}",
        check.steps,
        check.max_pose_error,
        path.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let seed = resolve_seed(cli.seed)?;
    let x = load_experiment(&cli, seed)?;
    let mut policy = match cli.command {
        Command::Eval => Some(load_policy(cli.policy.as_deref(), &x)?),
        _ => None,
    };
    fs::create_dir_all(&cli.out).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", cli.out.display())))?;
    match &cli.command {
        Command::Train => cmd_train(&x, seed, &cli.out),
        Command::Eval => cmd_eval(&x, policy.as_deref_mut().expect("loaded above"), &cli.out),
        Command::Ablate => cmd_ablate(&x, &cli.out),
        Command::Replay { log, episode } => cmd_replay(log, *episode, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
