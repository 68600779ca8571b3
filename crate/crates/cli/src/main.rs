mod config;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use config::{ControllerKind, RunConfig};
use furrow_core::evalharness::{
    run_cpath_comparison, run_navigation_suite, run_row_tracking, write_csv, Controller, NavSummary,
    PolicyController, RandomController, RowFollower, WaypointOracle,
};
use furrow_core::learner::Checkpoint;
use furrow_core::perception::{detect_row_stages, render_camera};
use furrow_core::trace::{replay, Trace};
use furrow_core::world::{generate_field, Pose2D};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

/// Simulation, training and evaluation for a 4WIS4WID field robot.
#[derive(Parser, Debug)]
#[command(name = "furrow", version)]
struct Cli {
    /// Run configuration (TOML or JSON). Missing keys take defaults.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; defaults to runs/<command>.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a PPO policy.
    Train {
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Randomised multi-row navigation trials.
    EvalNav(NavArgs),
    /// Single-row tracking with the camera follower.
    EvalRows {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Row curvature amplitude in metres.
        #[arg(long)]
        amplitude: Option<f64>,
    },
    /// 4WIS4WID versus skid-steer on the C-shaped course.
    EvalCpath {
        #[command(flatten)]
        ctrl: ControllerArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-integrate a trace and compare poses.
    Replay {
        trace: PathBuf,
        /// Fail unless the replay is bit-identical.
        #[arg(long)]
        strict: bool,
    },
    /// Serve the teleoperation websocket.
    Teleop {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for session traces.
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Render both cameras at a pose and run the row detector.
    Perceive {
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, allow_hyphen_values = true)]
        y: f64,
        /// Heading in degrees.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        heading: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write every pipeline stage as PNG.
        #[arg(long)]
        dump: bool,
    },
}

#[derive(Args, Debug)]
struct ControllerArgs {
    #[arg(long, value_enum)]
    controller: Option<ControllerKind>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Sample actions instead of using the policy mean.
    #[arg(long)]
    stochastic: bool,
}

#[derive(Args, Debug)]
struct NavArgs {
    #[command(flatten)]
    ctrl: ControllerArgs,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone)]
enum AnyController {
    Policy(PolicyController),
    Oracle(WaypointOracle),
    Random(RandomController),
}

impl Controller for AnyController {
    fn reset(&mut self, seed: u64) {
        match self {
            Self::Policy(c) => c.reset(seed),
            Self::Oracle(c) => c.reset(seed),
            Self::Random(c) => c.reset(seed),
        }
    }

    fn act(&mut self, obs: &[f64], env: &furrow_core::env::FieldEnv) -> f64 {
        match self {
            Self::Policy(c) => c.act(obs, env),
            Self::Oracle(c) => c.act(obs, env),
            Self::Random(c) => c.act(obs, env),
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    let name = match &cli.cmd {
        Command::Train { .. } => "train",
        Command::EvalNav(_) => "eval-nav",
        Command::EvalRows { .. } => "eval-rows",
        Command::EvalCpath { .. } => "eval-cpath",
        Command::Replay { .. } => "replay",
        Command::Teleop { .. } => "teleop",
        Command::Perceive { .. } => "perceive",
    };
    let out = cli.out.clone().unwrap_or_else(|| Path::new("runs").join(name));

    match cli.cmd {
        Command::Train { steps, seed } => {
            if let Some(s) = steps {
                cfg.train.total_steps = s;
            }
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            cfg.validate()?;
            cfg.save(&out)?;
            let t0 = std::time::Instant::now();
            let outcome = furrow_core::learner::train(&cfg.train, &cfg.env, Some(&out), |_| {})?;
            let last = outcome.metrics.last();
            println!(
                "trained {} steps in {:.1} s; last success rate {:?}; checkpoints in {}",
                last.map_or(0, |m| m.step),
                t0.elapsed().as_secs_f64(),
                last.and_then(|m| m.success_rate),
                out.display()
            );
        }
        Command::EvalNav(args) => {
            apply_controller(&mut cfg, &args.ctrl);
            if let Some(t) = args.trials {
                cfg.eval.trials = t;
            }
            if let Some(s) = args.seed {
                cfg.eval.master_seed = s;
            }
            cfg.validate()?;
            cfg.save(&out)?;
            let ctrl = build_controller(&cfg)?;
            let (_, summary) =
                run_navigation_suite(&ctrl, &cfg.env, cfg.eval.trials, cfg.eval.master_seed, Some(&out))?;
            print_nav(&summary);
        }
        Command::EvalRows { trials, seed, amplitude } => {
            if let Some(t) = trials {
                cfg.eval.trials = t;
            }
            if let Some(s) = seed {
                cfg.eval.master_seed = s;
            }
            if let Some(a) = amplitude {
                cfg.rows.amplitude = a;
            }
            cfg.validate()?;
            cfg.save(&out)?;
            let (trials, summary) = run_row_tracking(
                &RowFollower::default(),
                &cfg.env,
                &cfg.rows,
                cfg.eval.trials,
                cfg.eval.master_seed,
            )?;
            write_csv(&trials, &out.join("trials.csv"))?;
            std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
            println!(
                "{} trials, success rate {:.3}, mean track error {:?} px",
                summary.n_trials, summary.success_rate, summary.mean_track_error
            );
        }
        Command::EvalCpath { ctrl, seed } => {
            apply_controller(&mut cfg, &ctrl);
            cfg.validate()?;
            cfg.save(&out)?;
            let mut c = build_controller(&cfg)?;
            let r = run_cpath_comparison(&mut c, &cfg.env, &cfg.baseline, seed)?;
            for (file, (header, steps)) in [("four_ws.jsonl", &r.four_ws_trace), ("skid_steer.jsonl", &r.skid_trace)] {
                if let Some(h) = header {
                    Trace {
                        header: h.clone(),
                        steps: steps.clone(),
                    }
                    .save(&out.join(file))?;
                }
            }
            write_csv(&[r.four_ws.clone(), r.skid_steer.clone()], &out.join("trials.csv"))?;
            std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&r)?)?;
            println!(
                "4WIS4WID {:.2} m / {:.1} s ({:?}), skid-steer {:.2} m / {:.1} s ({:?}); distance ratio {:.3}, time ratio {:.3}",
                r.four_ws.path_length,
                r.four_ws.wall_time_sim,
                r.four_ws.outcome,
                r.skid_steer.path_length,
                r.skid_steer.wall_time_sim,
                r.skid_steer.outcome,
                r.distance_ratio,
                r.time_ratio
            );
        }
        Command::Replay { trace, strict } => {
            let t = Trace::load(&trace).with_context(|| format!("loading {}", trace.display()))?;
            let report = replay(&t)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if strict && !report.identical {
                bail!("replay diverged by up to {:.3e} m", report.max_position_error);
            }
        }
        Command::Teleop {
            port,
            host,
            seed,
            record,
        } => {
            let tc = &mut cfg.teleop;
            tc.port = port.unwrap_or(tc.port);
            tc.seed = seed.unwrap_or(tc.seed);
            if record.is_some() {
                tc.record_dir = record;
            }
            cfg.validate()?;
            let addr: SocketAddr = format!("{host}:{}", cfg.teleop.port)
                .parse()
                .with_context(|| format!("bad address {host}"))?;
            let mut sc = furrow_telemetry::ServerConfig::new(cfg.env.clone(), cfg.teleop.seed);
            sc.record_dir = cfg.teleop.record_dir.clone();
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let handle = furrow_telemetry::serve(sc, addr).await?;
                println!("serving {}", handle.url());
                tokio::signal::ctrl_c().await?;
                handle.shutdown().await?;
                anyhow::Ok(())
            })?;
        }
        Command::Perceive {
            x,
            y,
            heading,
            seed,
            dump,
        } => {
            if dump {
                std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            }
            let field = generate_field(seed, &cfg.env.field)?;
            let pose = Pose2D::new(x, y, heading.to_radians());
            for (label, cam) in [("front", &cfg.env.front_camera), ("rear", &cfg.env.rear_camera)] {
                let img = render_camera(&pose, cam, &field, seed);
                let stages = detect_row_stages(&img, &cfg.env.detector)?;
                let err = stages.track_error();
                println!(
                    "{label}: {} segments, selected {:?}, track error {:.1} px",
                    stages.segments.len(),
                    stages.selected.map(|s| [s.p0, s.p1]),
                    err.value
                );
                if dump {
                    img.save_png(&out.join(format!("{label}_render.png")))?;
                    stages.dump(&out, label)?;
                }
            }
        }
    }
    Ok(())
}

fn apply_controller(cfg: &mut RunConfig, a: &ControllerArgs) {
    if let Some(c) = a.controller {
        cfg.eval.controller = c;
    }
    if a.checkpoint.is_some() {
        cfg.eval.checkpoint = a.checkpoint.clone();
        if a.controller.is_none() {
            cfg.eval.controller = ControllerKind::Policy;
        }
    }
    cfg.eval.stochastic |= a.stochastic;
}

fn build_controller(cfg: &RunConfig) -> Result<AnyController> {
    Ok(match cfg.eval.controller {
        ControllerKind::Oracle => AnyController::Oracle(WaypointOracle),
        ControllerKind::Random => AnyController::Random(RandomController::new(cfg.eval.master_seed)),
        ControllerKind::Policy => {
            let Some(path) = &cfg.eval.checkpoint else {
                bail!("the policy controller needs --checkpoint");
            };
            let ck = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
            if ck.env_config != cfg.env {
                log::warn!("checkpoint was trained with a different environment configuration");
            }
            AnyController::Policy(PolicyController::new(ck.policy, cfg.eval.stochastic))
        }
    })
}

fn print_nav(s: &NavSummary) {
    println!(
        "{} trials (master seed {}): success rate {:.3}, mean path {:?} m, mean Manhattan {:?} m, mean time {:?} s",
        s.n_trials, s.master_seed, s.success_rate, s.mean_path_length, s.mean_manhattan, s.mean_time
    );
}
