//! Subcommand implementations. Each returns a summary value so callers and
//! tests can inspect results without parsing console output.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use mmsim_core::env::{EnvConfig, MarketMakingEnv, PreparedDay, RewardKind};
use mmsim_core::features::NormalizerStats;
use mmsim_core::lob::Side;
use mmsim_core::pipeline::{self, MarketDay, ReplayConfig, ReplayStats};
use mmsim_core::report::{EpisodeReport, EpisodeTrace};
use mmsim_core::synthetic::{self, SyntheticConfig};
use mmsim_rl::checkpoint::{self, CheckpointHeader};
use mmsim_rl::evaluate::{run_episode, EvalLabels, NetPolicy, Selection};
use mmsim_rl::trainer::Learner;
use mmsim_rl::{ActionRepeat, Environment, MetricRow, Trainer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFIG_ECHO_FILE: &str = "config.json";

pub fn synth(config: &SyntheticConfig, out: &Path) -> Result<usize, CliError> {
    let ticks = synthetic::generate(config);
    pipeline::save_ticks(out, &ticks)?;
    Ok(ticks.events.len())
}

/// Replays a tick file and writes its snapshot rows. Nothing is written
/// when the input fails to parse or replay.
pub fn snapshot(input: &Path, out: &Path, replay: &ReplayConfig) -> Result<ReplayStats, CliError> {
    let ticks = pipeline::parse_ticks(input)?;
    let (day, stats) = pipeline::replay(&ticks, replay)?;
    pipeline::save_snapshots(out, &day.dataset)?;
    Ok(stats)
}

fn replay_day(path: &Path, replay: &ReplayConfig, instrument: Option<&str>) -> Result<MarketDay, CliError> {
    let ticks = pipeline::parse_ticks(path)?;
    if let Some(expected) = instrument {
        if ticks.header.instrument != expected {
            return Err(CliError::Input {
                path: path.display().to_string(),
                message: format!("instrument {} does not match configured {expected}", ticks.header.instrument),
            });
        }
    }
    let (day, stats) = pipeline::replay(&ticks, replay)?;
    log::info!("{}: {} events, {} snapshots", path.display(), stats.events, stats.rows);
    Ok(day)
}

/// Settings stored alongside the learner in a checkpoint.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointExtra {
    pub run: RunConfig,
    pub env: EnvConfig,
    pub normalizer: NormalizerStats,
    pub instrument: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
    pub step: u64,
    pub updates: u64,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(CliError::io(path))
}

fn incompatible(path: &Path, message: impl Into<String>) -> CliError {
    CliError::IncompatibleCheckpoint { path: path.display().to_string(), message: message.into() }
}

fn read_extra(path: &Path, header: &CheckpointHeader) -> Result<CheckpointExtra, CliError> {
    serde_json::from_value(header.extra.clone()).map_err(|e| incompatible(path, format!("missing run settings: {e}")))
}

pub fn train(cfg: &RunConfig) -> Result<TrainSummary, CliError> {
    cfg.validate()?;
    let replay = cfg.replay_config();
    let markets = cfg
        .train_data
        .iter()
        .map(|p| replay_day(p, &replay, cfg.instrument.as_deref()))
        .collect::<Result<Vec<_>, _>>()?;

    let resumed = match &cfg.resume {
        Some(path) => {
            let (header, learner) = checkpoint::load(path)?;
            let extra = read_extra(path, &header)?;
            Some((path.clone(), learner, extra))
        }
        None => None,
    };
    let normalizer = match (&resumed, &cfg.normalizer_data) {
        (Some((_, _, extra)), _) => extra.normalizer.clone(),
        (None, Some(path)) => pipeline::fit_day(&pipeline::load_day_snapshots(path, &replay)?)?,
        (None, None) => pipeline::fit_day(&markets[0].dataset)?,
    };
    let instrument = markets[0].dataset.instrument.clone();
    let normalizer = Arc::new(normalizer);
    let days: Vec<PreparedDay> = markets
        .into_iter()
        .map(|m| PreparedDay { market: Arc::new(m), normalizer: Some(normalizer.clone()) })
        .collect();

    let env_cfg = cfg.env_config();
    let train_cfg = cfg.train_config();
    let envs = (0..cfg.n_envs)
        .map(|e| {
            let env = MarketMakingEnv::new(env_cfg.clone(), days.clone(), cfg.seed.wrapping_add(1 + e as u64))?;
            Ok(ActionRepeat::new(env, cfg.action_repeat))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let input = envs[0].observation_len();
    let actions = envs[0].n_actions();

    let (learner, appending) = match resumed {
        Some((path, mut learner, _)) => {
            let expected = train_cfg.net_config(input, actions);
            if *learner.net.config() != expected {
                return Err(incompatible(&path, format!("network {:?} does not match {expected:?}", learner.net.config())));
            }
            learner.config = train_cfg;
            log::info!("resuming from {} at step {}", path.display(), learner.step);
            (learner, true)
        }
        None => (Learner::new(train_cfg, input, actions)?, false),
    };

    fs::create_dir_all(&cfg.output_dir).map_err(CliError::io(&cfg.output_dir))?;
    let extra = CheckpointExtra { run: cfg.clone(), env: env_cfg, normalizer: (*normalizer).clone(), instrument };
    write_json(&cfg.output_dir.join(CONFIG_ECHO_FILE), &extra.run)?;
    let extra = serde_json::to_value(&extra).expect("serializable");

    let metrics_path = cfg.output_dir.join(METRICS_FILE);
    let checkpoint_path = cfg.output_dir.join(CHECKPOINT_FILE);
    let append = appending && metrics_path.exists();
    let file = fs::OpenOptions::new()
        .create(true)
        .append(append)
        .write(true)
        .truncate(!append)
        .open(&metrics_path)
        .map_err(CliError::io(&metrics_path))?;
    let mut metrics = BufWriter::new(file);
    if !append {
        writeln!(metrics, "{}", MetricRow::HEADER).map_err(CliError::io(&metrics_path))?;
    }

    let mut trainer = Trainer::with_learner(learner, envs)?;
    let every = cfg.checkpoint_every;
    let mut write_error = None;
    trainer.train_with(|learner, row| {
        if let Err(e) = writeln!(metrics, "{}", row.csv()) {
            write_error.get_or_insert(CliError::Io { path: metrics_path.display().to_string(), source: e });
        }
        if row.update % 10 == 0 {
            log::info!("update {} step {} loss {:.4} mean reward {:.5}", row.update, row.step, row.loss, row.mean_reward);
        }
        if every > 0 && learner.updates % every == 0 {
            checkpoint::save(&checkpoint_path, learner, extra.clone())?;
        }
        Ok(())
    })?;
    if let Some(e) = write_error {
        return Err(e);
    }
    metrics.flush().map_err(CliError::io(&metrics_path))?;
    checkpoint::save(&checkpoint_path, &trainer.learner, extra)?;
    Ok(TrainSummary {
        checkpoint: checkpoint_path,
        metrics: metrics_path,
        step: trainer.learner.step,
        updates: trainer.learner.updates,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub checkpoint: PathBuf,
    pub data: PathBuf,
    /// Defaults to the training setting.
    pub action_repeat: Option<usize>,
    /// Defaults to the training reward.
    pub reward: Option<RewardKind>,
    /// Defaults to an `eval` directory next to the checkpoint.
    pub out: Option<PathBuf>,
    pub sampled: bool,
    pub seed: Option<u64>,
}

/// Settings of one evaluation run, echoed in its report file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub checkpoint: PathBuf,
    pub data: PathBuf,
    pub action_repeat: usize,
    pub reward: RewardKind,
    pub selection: String,
    pub seed: u64,
    pub training_step: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub config: RunConfig,
    pub evaluation: EvalSettings,
    pub report: EpisodeReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOutput {
    pub report: ReportFile,
    pub report_path: PathBuf,
    pub equity_path: PathBuf,
    pub fills_path: PathBuf,
}

pub fn evaluate(opts: &EvalOptions) -> Result<EvalOutput, CliError> {
    let (header, learner) = checkpoint::load(&opts.checkpoint)?;
    let extra = read_extra(&opts.checkpoint, &header)?;
    let replay = extra.run.replay_config();
    let market = replay_day(&opts.data, &replay, None)?;
    if market.dataset.instrument != extra.instrument {
        log::warn!("evaluating a {} model on {}", extra.instrument, market.dataset.instrument);
    }
    let reward = opts.reward.unwrap_or(extra.env.reward);
    let env_cfg = EnvConfig { reward, ..extra.env.clone() };
    let day = PreparedDay::new(market, extra.normalizer.clone());
    let seed = opts.seed.unwrap_or(extra.run.seed);
    let mut env = MarketMakingEnv::new(env_cfg, vec![day], seed)?;
    if env.observation_len() != learner.net.config().input {
        return Err(incompatible(
            &opts.checkpoint,
            format!("network expects {} inputs, environment produces {}", learner.net.config().input, env.observation_len()),
        ));
    }
    let action_repeat = opts.action_repeat.unwrap_or(extra.run.action_repeat);
    if action_repeat == 0 {
        return Err(CliError::config("action repeat must be at least 1"));
    }
    let selection = if opts.sampled { Selection::Sampled } else { Selection::Greedy };
    let policy = NetPolicy { net: &learner.net, selection };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let agent = header.train.agent.name();
    let labels = EvalLabels { agent, reward: reward.name() };
    let (report, trace) = run_episode(&policy, &mut env, 0, action_repeat, &mut rng, labels)?;

    let out = match &opts.out {
        Some(dir) => dir.clone(),
        None => opts.checkpoint.parent().unwrap_or(Path::new(".")).join("eval"),
    };
    fs::create_dir_all(&out).map_err(CliError::io(&out))?;
    let stem = format!("{agent}_{}_ar{action_repeat}_{}", reward.name(), report.date);
    let file = ReportFile {
        config: extra.run,
        evaluation: EvalSettings {
            checkpoint: opts.checkpoint.clone(),
            data: opts.data.clone(),
            action_repeat,
            reward,
            selection: if opts.sampled { "sampled" } else { "greedy" }.into(),
            seed,
            training_step: header.step,
        },
        report,
    };
    let report_path = out.join(format!("{stem}.report.json"));
    let equity_path = out.join(format!("{stem}.equity.csv"));
    let fills_path = out.join(format!("{stem}.fills.csv"));
    write_json(&report_path, &file)?;
    write_series(&equity_path, &fills_path, &trace)?;
    Ok(EvalOutput { report: file, report_path, equity_path, fills_path })
}

/// Writes the equity curve and the fill markers placed on it.
fn write_series(equity_path: &Path, fills_path: &Path, trace: &EpisodeTrace) -> Result<(), CliError> {
    let mut w = BufWriter::new(fs::File::create(equity_path).map_err(CliError::io(equity_path))?);
    let io = CliError::io(equity_path);
    let mut body = String::from("step,midpoint,inventory,equity\n");
    for i in 0..trace.steps.len() {
        body.push_str(&format!("{},{},{},{}\n", trace.steps[i], trace.midpoint[i], trace.inventory[i], trace.equity[i]));
    }
    w.write_all(body.as_bytes()).and_then(|_| w.flush()).map_err(io)?;

    let equity_at: HashMap<usize, f64> = trace.steps.iter().copied().zip(trace.equity.iter().copied()).collect();
    let mut body = String::from("step,side,price,lots,market_order,realized,equity\n");
    for e in &trace.executions {
        let side = match e.side {
            Side::Bid => "buy",
            Side::Ask => "sell",
        };
        let equity = equity_at.get(&e.step).copied().unwrap_or(f64::NAN);
        body.push_str(&format!("{},{side},{},{},{},{},{equity}\n", e.step, e.price, e.lots, e.market_order, e.realized));
    }
    fs::write(fills_path, body).map_err(CliError::io(fills_path))
}

/// One line of the comparison table: reports sharing agent, reward and
/// instrument are averaged over their days.
#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub agent: String,
    pub reward: String,
    pub instrument: String,
    pub days: usize,
    pub daily_return_pct: f64,
    pub mean_trade_return_pct: f64,
    pub round_trips: usize,
    pub fees: f64,
}

pub fn read_report(path: &Path) -> Result<ReportFile, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input { path: path.display().to_string(), message: e.to_string() })
}

pub fn report_table(paths: &[PathBuf]) -> Result<Vec<TableRow>, CliError> {
    let mut groups: BTreeMap<(String, String, String), Vec<EpisodeReport>> = BTreeMap::new();
    for path in paths {
        let r = read_report(path)?.report;
        groups.entry((r.agent.clone(), r.reward.clone(), r.instrument.clone())).or_default().push(r);
    }
    Ok(groups
        .into_iter()
        .map(|((agent, reward, instrument), reports)| {
            let n = reports.len() as f64;
            TableRow {
                agent,
                reward,
                instrument,
                days: reports.len(),
                daily_return_pct: reports.iter().map(|r| r.daily_return_pct).sum::<f64>() / n,
                mean_trade_return_pct: reports.iter().map(|r| r.mean_trade_return_pct).sum::<f64>() / n,
                round_trips: reports.iter().map(|r| r.round_trips).sum(),
                fees: reports.iter().map(|r| r.fees).sum(),
            }
        })
        .collect())
}

pub fn format_table(rows: &[TableRow]) -> String {
    let mut out = format!(
        "{:<8} {:<18} {:<12} {:>5} {:>16} {:>16} {:>8} {:>12}\n",
        "agent", "reward", "instrument", "days", "daily return %", "avg trade %", "trades", "fees"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<8} {:<18} {:<12} {:>5} {:>16.6} {:>16.6} {:>8} {:>12.6}\n",
            r.agent, r.reward, r.instrument, r.days, r.daily_return_pct, r.mean_trade_return_pct, r.round_trips, r.fees
        ));
    }
    out
}
