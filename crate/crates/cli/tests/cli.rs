use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mmsim_cli::commands::{self, EvalOptions};
use mmsim_cli::error::{EXIT_CONFIG, EXIT_DATA};
use mmsim_cli::RunConfig;
use mmsim_core::env::RewardKind;
use mmsim_core::lob::Side;
use mmsim_core::oracles::{ledger_pnl, LedgerTrade};
use mmsim_core::synthetic::SyntheticConfig;
use tempfile::TempDir;

fn mmsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmsim"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("MMSIM_OUTPUT_DIR")
        .env_remove("MMSIM_SEED")
        .output()
        .expect("binary runs")
}

fn write_day(dir: &Path, name: &str, seconds: usize, seed: u64) -> PathBuf {
    let path = dir.join(name);
    let cfg = SyntheticConfig { seconds, seed, ..SyntheticConfig::default() };
    commands::synth(&cfg, &path).unwrap();
    path
}

fn small_config(dir: &Path, day: &Path, out: &str, steps: u64) -> RunConfig {
    RunConfig {
        train_data: vec![day.to_path_buf()],
        output_dir: dir.join(out),
        training_steps: steps,
        window: 4,
        shared_width: 16,
        head_width: 8,
        n_envs: 2,
        n_steps: Some(50),
        checkpoint_every: 5,
        seed: 11,
        ..RunConfig::default()
    }
}

#[test]
fn snapshot_command_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let day = write_day(dir.path(), "day.ticks", 200, 3);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = mmsim(&["snapshot", "--in", day.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("rows"));
    }
    let bytes = fs::read(&a).unwrap();
    assert_eq!(bytes, fs::read(&b).unwrap());
    let rows = bytes.split(|&c| c == b'\n').filter(|l| !l.is_empty()).count() - 2;
    assert!((190..=200).contains(&rows), "{rows} rows");
}

#[test]
fn malformed_tick_file_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.ticks");
    fs::write(&bad, "SYN-USD,0.01,2024-01-01,1\n1000,limit,bid,100,1,1\n999,teleport,bid,100,1,2\n").unwrap();
    let out = dir.path().join("out.csv");
    let o = mmsim(&["snapshot", "--in", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_DATA));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
    assert!(!out.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn invalid_config_lists_every_problem() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "gamma = 2.0\nn_envs = 0\nwindow = 0\n").unwrap();
    let o = mmsim(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    let err = String::from_utf8_lossy(&o.stderr);
    for key in ["train_data", "gamma", "n_envs", "window"] {
        assert!(err.contains(key), "{key} not reported in {err}");
    }

    fs::write(&cfg, "learning_rat = 0.1\n").unwrap();
    assert_eq!(mmsim(&["train", "--config", cfg.to_str().unwrap()]).status.code(), Some(EXIT_CONFIG));
    assert_eq!(mmsim(&["train", "--config", "/nonexistent/run.toml"]).status.code(), Some(EXIT_CONFIG));
}

#[test]
fn train_smoke_through_binary() {
    let dir = TempDir::new().unwrap();
    write_day(dir.path(), "day.ticks", 300, 5);
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "train_data = [\"day.ticks\"]\ntraining_steps = 1000\nwindow = 4\nshared_width = 16\nhead_width = 8\nn_steps = 50\n",
    )
    .unwrap();
    let out = dir.path().join("elsewhere");
    let o = Command::new(env!("CARGO_BIN_EXE_mmsim"))
        .args(["train", "--config", cfg.to_str().unwrap()])
        .env("RUST_LOG", "warn")
        .env("MMSIM_OUTPUT_DIR", &out)
        .env("MMSIM_SEED", "9")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join(commands::CHECKPOINT_FILE).exists());
    let echo: RunConfig = serde_json::from_str(&fs::read_to_string(out.join(commands::CONFIG_ECHO_FILE)).unwrap()).unwrap();
    assert_eq!(echo.seed, 9);
    assert_eq!(echo.training_steps, 1000);
}

#[test]
fn seeded_training_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let day = write_day(dir.path(), "day.ticks", 300, 5);
    let a = commands::train(&small_config(dir.path(), &day, "a", 1000)).unwrap();
    let b = commands::train(&small_config(dir.path(), &day, "b", 1000)).unwrap();
    assert!(a.step >= 1000);
    assert_eq!(fs::read(&a.metrics).unwrap(), fs::read(&b.metrics).unwrap());
    let (_, la) = mmsim_rl::checkpoint::load(&a.checkpoint).unwrap();
    let (_, lb) = mmsim_rl::checkpoint::load(&b.checkpoint).unwrap();
    assert_eq!(la.net.params(), lb.net.params());
}

#[test]
fn resume_continues_the_metric_log() {
    let dir = TempDir::new().unwrap();
    let day = write_day(dir.path(), "day.ticks", 300, 5);
    let first = commands::train(&small_config(dir.path(), &day, "run", 1000)).unwrap();
    let before = fs::read_to_string(&first.metrics).unwrap();
    let resumed = RunConfig { resume: Some(first.checkpoint.clone()), ..small_config(dir.path(), &day, "run", 2000) };
    let second = commands::train(&resumed).unwrap();
    assert!(second.step >= 2000 && second.updates > first.updates);

    let after = fs::read_to_string(&second.metrics).unwrap();
    assert!(after.starts_with(&before));
    let steps: Vec<u64> = after.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(steps.windows(2).all(|w| w[1] > w[0]), "{steps:?}");
    let first_new = after.lines().count() - before.lines().count();
    assert!(first_new > 0);
    assert_eq!(steps[before.lines().count() - 1], first.step + 100);
}

#[test]
fn evaluate_reports_match_ledger() {
    let dir = TempDir::new().unwrap();
    let day = write_day(dir.path(), "day.ticks", 300, 5);
    let eval_day = write_day(dir.path(), "eval.ticks", 240, 6);
    let trained = commands::train(&small_config(dir.path(), &day, "run", 600)).unwrap();

    let mut outputs = Vec::new();
    for repeat in [1, 10] {
        let opts = EvalOptions {
            checkpoint: trained.checkpoint.clone(),
            data: eval_day.clone(),
            action_repeat: Some(repeat),
            reward: None,
            out: Some(dir.path().join("eval")),
            sampled: true,
            seed: Some(1),
        };
        outputs.push(commands::evaluate(&opts).unwrap());
    }
    assert_ne!(outputs[0].report_path, outputs[1].report_path);
    assert!(outputs.iter().all(|o| o.report_path.exists()));

    for o in &outputs {
        let r = &o.report.report;
        assert!(r.total_pnl.is_finite() && r.daily_return_pct.is_finite() && r.mean_trade_return_pct.is_finite());
        let equity = fs::read_to_string(&o.equity_path).unwrap();
        let rows: Vec<Vec<f64>> =
            equity.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
        assert_eq!(rows.len(), r.steps);

        let mut trades = Vec::new();
        for line in fs::read_to_string(&o.fills_path).unwrap().lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            let side = if f[1] == "buy" { Side::Bid } else { Side::Ask };
            let fee_rate = if f[4] == "true" { o.report.config.market_fee } else { 0.0 };
            for _ in 0..f[3].parse::<u32>().unwrap() {
                trades.push(LedgerTrade { side, price: f[2].parse().unwrap(), fee_rate });
            }
        }
        assert!(!trades.is_empty(), "no fills to check");
        let final_mid = rows.last().unwrap()[1];
        let (realized, unrealized) = ledger_pnl(&trades, o.report.config.lot_size, final_mid);
        assert!((realized + unrealized - r.total_pnl).abs() < 1e-9, "{} vs {}", realized + unrealized, r.total_pnl);
        assert!((100.0 * r.total_pnl - r.daily_return_pct).abs() < 1e-12);
    }
}

#[test]
fn report_table_groups_by_agent_reward_instrument() {
    let dir = TempDir::new().unwrap();
    let day = write_day(dir.path(), "day.ticks", 240, 5);
    let mut paths = Vec::new();
    for agent in [mmsim_rl::AgentKind::A2c, mmsim_rl::AgentKind::Ppo] {
        let cfg = RunConfig { agent, ..small_config(dir.path(), &day, agent.name(), 200) };
        let trained = commands::train(&cfg).unwrap();
        for reward in [RewardKind::PositionalPnl, RewardKind::TradeCompletion] {
            let opts = EvalOptions {
                checkpoint: trained.checkpoint.clone(),
                data: day.clone(),
                action_repeat: Some(5),
                reward: Some(reward),
                out: Some(dir.path().join("eval")),
                sampled: false,
                seed: None,
            };
            paths.push(commands::evaluate(&opts).unwrap().report_path);
        }
    }
    let rows = commands::report_table(&paths).unwrap();
    assert_eq!(rows.len(), 4);

    let single = commands::report_table(&paths[..1]).unwrap();
    assert_eq!(single.len(), 1);
    let r = commands::read_report(&paths[0]).unwrap().report;
    assert_eq!(single[0].daily_return_pct, r.daily_return_pct);
    assert_eq!(single[0].mean_trade_return_pct, r.mean_trade_return_pct);
    assert_eq!(single[0].round_trips, r.round_trips);

    let args: Vec<&str> = std::iter::once("report").chain(paths.iter().map(|p| p.to_str().unwrap())).collect();
    let o = mmsim(&args);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 5);
}

#[test]
fn evaluate_rejects_bad_checkpoints() {
    let dir = TempDir::new().unwrap();
    let day = write_day(dir.path(), "day.ticks", 120, 5);
    let junk = dir.path().join("junk.bin");
    fs::write(&junk, b"not a checkpoint").unwrap();
    let o = mmsim(&["evaluate", "--checkpoint", junk.to_str().unwrap(), "--data", day.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_DATA));

    // A checkpoint whose window differs from what its settings describe.
    let trained = commands::train(&small_config(dir.path(), &day, "run", 100)).unwrap();
    let (header, learner) = mmsim_rl::checkpoint::load(&trained.checkpoint).unwrap();
    let mut extra = header.extra.clone();
    extra["env"]["window"] = serde_json::json!(7);
    let tampered = dir.path().join("tampered.bin");
    mmsim_rl::checkpoint::save(&tampered, &learner, extra).unwrap();
    let opts = EvalOptions {
        checkpoint: tampered,
        data: day,
        action_repeat: None,
        reward: None,
        out: Some(dir.path().join("eval")),
        sampled: false,
        seed: None,
    };
    let err = commands::evaluate(&opts).unwrap_err();
    assert!(matches!(err, mmsim_cli::CliError::IncompatibleCheckpoint { .. }), "{err}");
}
