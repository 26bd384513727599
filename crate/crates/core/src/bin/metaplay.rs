use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use metaplay::opponents::cfr::expected_value;
use metaplay::opponents::{cfr_train, OpponentSpec, Utility};
use metaplay::rollout::{read_jsonl, write_jsonl};
use metaplay::train::metrics::{metrics_csv, write_frequencies};
use metaplay::train::{
    ablate, build_policy, evaluate, export_state_action_frequencies, theoretical_ceiling, train, AblationAxis,
    PolicyChoice, RunConfig,
};
use metaplay::{Error, Result};

#[derive(Parser)]
#[command(name = "metaplay", version, about = "Meta-episode training and evaluation for repeated games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run config; defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set returns.variant=cumulative`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        match &self.config {
            Some(p) => RunConfig::load(p, &self.overrides),
            None => RunConfig::from_toml_str("", &self.overrides),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train the parametric policy.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "runs/train")]
        out: PathBuf,
    },
    /// Roll out a policy without updates and report metrics.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Parametric checkpoint to evaluate.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Opponent ids (e.g. mcts-1000, kuhn-aggressive); defaults to the population.
        #[arg(long = "opponent")]
        opponents: Vec<String>,
        /// Meta-episodes per opponent; defaults to `eval_meta_episodes`.
        #[arg(long)]
        num: Option<usize>,
        #[arg(long, default_value = "runs/eval")]
        out: PathBuf,
    },
    /// Train matched configs that differ along one axis.
    Ablate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// reward_variant, opponent_distribution, grouping_stationarity or anchor_scope.
        #[arg(long)]
        axis: String,
        #[arg(long, default_value = "runs/ablate")]
        out: PathBuf,
    },
    /// Best-response success probability against each opponent.
    Ceiling {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long = "opponent")]
        opponents: Vec<String>,
    },
    /// Solve Kuhn Poker with counterfactual regret minimization.
    SolveCfr {
        #[arg(long, default_value_t = 100_000)]
        iterations: u64,
        #[arg(long, default_value = "kuhn_cfr.profile")]
        out: PathBuf,
    },
    /// Count (state, action) pairs per episode index in a trajectory log.
    ExportFreqs {
        #[arg(long, default_value = "runs/eval/trajectories.jsonl")]
        input: PathBuf,
        #[arg(long, default_value = "freqs.csv")]
        out: PathBuf,
    },
}

fn opponents(cfg: &RunConfig, ids: &[String]) -> Result<Vec<OpponentSpec>> {
    if ids.is_empty() {
        return Ok(cfg.population().map(|p| p.specs()).unwrap_or_default());
    }
    ids.iter().map(|id| OpponentSpec::from_id(id)).collect()
}

fn print_rows(rows: &[metaplay::train::MetricsRow]) {
    for r in rows {
        println!(
            "{:<22} n={:<5} success by episode {:?}  pass@k {:?}  draw {:.3}",
            r.opponent_id, r.meta_episodes, r.success, r.pass_at, r.draw_rate
        );
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { cfg, out } => {
            let cfg = cfg.load()?;
            let outcome = train(&cfg, Some(&out))?;
            if let Some(last) = outcome.rows.last() {
                println!("final epoch success by episode {:?}", last.success);
            }
            println!("outputs in {}", out.display());
        }
        Command::Eval {
            cfg,
            checkpoint,
            opponents: ids,
            num,
            out,
        } => {
            let mut cfg = cfg.load()?;
            if let Some(path) = checkpoint {
                if matches!(cfg.policy, PolicyChoice::Remote(_)) {
                    return Err(Error::Config("--checkpoint applies to the parametric policy only".into()));
                }
                cfg.policy = PolicyChoice::Parametric { checkpoint: Some(path) };
            }
            let specs = opponents(&cfg, &ids)?;
            let (policy, generator) = build_policy(&cfg)?;
            let ev = evaluate(
                policy.as_ref(),
                &generator,
                &cfg.env,
                &specs,
                num.unwrap_or(cfg.eval_meta_episodes),
                &cfg.rollout(),
                cfg.seed,
            )?;
            fs::create_dir_all(&out)?;
            fs::write(out.join("metrics.csv"), metrics_csv(&ev.rows)?)?;
            write_jsonl(BufWriter::new(File::create(out.join("trajectories.jsonl"))?), &ev.metas)?;
            print_rows(&ev.rows);
        }
        Command::Ablate { cfg, axis, out } => {
            let cfg = cfg.load()?;
            let axis: AblationAxis = axis.parse()?;
            let results = ablate(&cfg, axis, Some(&out))?;
            for (arm, mean) in metaplay::train::ablate::arm_means(&results) {
                println!("{arm:<26} mean final-episode success {mean:.4}");
            }
            println!("per-seed results in {}", out.join("ablation.csv").display());
        }
        Command::Ceiling { cfg, opponents: ids } => {
            let cfg = cfg.load()?;
            let specs = opponents(&cfg, &ids)?;
            let targets: Vec<Option<&OpponentSpec>> = if specs.is_empty() {
                vec![None]
            } else {
                specs.iter().map(Some).collect()
            };
            for spec in targets {
                let c = theoretical_ceiling(&cfg.env, spec)?;
                println!("{:<22} {:.4}  {}", c.opponent_id, c.value, c.note);
            }
        }
        Command::SolveCfr { iterations, out } => {
            let profile = cfr_train(iterations)?;
            let value = expected_value(&profile, &profile, 0, Utility::Chips);
            create_parent(&out)?;
            profile.save(&out)?;
            println!("iterations {iterations}");
            println!("exploitability {:.6} chips/hand", profile.exploitability);
            println!("first-player value {value:.6}");
            println!("profile written to {}", out.display());
        }
        Command::ExportFreqs { input, out } => {
            let metas = read_jsonl(BufReader::new(File::open(&input)?))?;
            let rows = export_state_action_frequencies(&metas);
            create_parent(&out)?;
            write_frequencies(BufWriter::new(File::create(&out)?), &rows)?;
            println!("{} rows from {} meta-episodes written to {}", rows.len(), metas.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

