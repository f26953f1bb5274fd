use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mlia_core::error::{ConfigError, ModelError, SolveError};
use mlia_core::harness::{
    episode_seed, feasible_instance, load_config, online_config, run_comparison, run_convergence, run_sensitivity,
    write_outputs, ExperimentConfig, Manifest, SensitivityResult,
};
use mlia_core::net::write_edge_list;
use mlia_core::online::{run_episode, theorem_diagnostics, EpisodeTrace, OnlineConfig, PolicyKind};

#[derive(Parser, Debug)]
#[command(name = "mlia", version, about = "Lifetime-aware routing and in-network analytics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for sweeps; instance seed for `static` and `simulate`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    theta: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    radius: Option<f64>,
    #[arg(long, global = true)]
    nodes: Option<usize>,
    #[arg(long = "max-slots", global = true)]
    max_slots: Option<usize>,
    #[arg(long, global = true, default_value = "mlia")]
    policy: PolicyKind,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Solve the static program on one instance.
    Static,
    /// Run one episode of one policy.
    Simulate,
    /// Static solves over the radius and θ grids.
    SweepSensitivity,
    /// Controller episodes over the step-size grid.
    SweepConvergence,
    /// The three policies on shared realizations.
    Compare,
}

enum Failure {
    Config(String),
    Infeasible(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Infeasible(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("cannot write output: {e}"))
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::CapacityRegionEmpty
            | SolveError::Model(ModelError::DisconnectedTopology(_))
            | SolveError::Model(ModelError::InvalidInstance(_)) => Failure::Infeasible(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

fn configure(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(n) = cli.nodes {
        cfg.network.n = n;
    }
    if let Some(s) = cli.seed {
        cfg.network.seed = s;
    }
    if let Some(m) = cli.max_slots {
        cfg.sweep.max_slots = m;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    match cli.command {
        Command::SweepSensitivity => {
            if let Some(r) = cli.radius {
                cfg.network.radius = vec![r];
            }
            if let Some(t) = cli.theta {
                cfg.sweep.theta = vec![t];
            }
        }
        Command::SweepConvergence => {
            if let Some(r) = cli.radius {
                cfg.sweep.convergence_radius = r;
            }
            if let Some(a) = cli.alpha {
                cfg.sweep.alpha = vec![a];
            }
        }
        Command::Compare => {
            if let Some(r) = cli.radius {
                cfg.sweep.comparison_radius = r;
            }
            if let Some(a) = cli.alpha {
                cfg.sweep.comparison_alpha = a;
            }
        }
        Command::Static | Command::Simulate => {
            if let Some(r) = cli.radius {
                cfg.sweep.convergence_radius = r;
            }
            if let Some(a) = cli.alpha {
                cfg.sweep.comparison_alpha = a;
            }
        }
    }
    if let Some(t) = cli.theta {
        cfg.sweep.online_theta = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = configure(cli)?;
    let out: &Path = &cfg.out;
    let manifest = |name: &str| Manifest::new(name, &cfg);
    match cli.command {
        Command::Static => {
            let theta = cfg.sweep.online_theta;
            let radius = cfg.sweep.convergence_radius;
            let cell = cfg.network.seed;
            let (ci, sol) = feasible_instance(&cfg, &cfg.physical_params(), radius, cell, theta)?;
            let csv = format!(
                "{}\n{},{},{},{},{},{},ok\n",
                SensitivityResult::CSV_HEADER,
                cell,
                radius,
                theta,
                sol.lifetime,
                sol.weighted_map,
                sol.objective
            );
            let edges = write_edge_list(&ci.instance);
            write_outputs(out, manifest("static"), &[("static.csv", &csv), ("edges.txt", &edges)])?;
            println!(
                "lifetime {:.1} s, weighted mAP {:.3}, objective {:.6e}, source redraws {}",
                sol.lifetime, sol.weighted_map, sol.objective, ci.redraws
            );
        }
        Command::Simulate => {
            let theta = cfg.sweep.online_theta;
            let alpha = cfg.sweep.comparison_alpha;
            let cell = cfg.network.seed;
            let (ci, sol) =
                feasible_instance(&cfg, &cfg.physical_params(), cfg.sweep.convergence_radius, cell, theta)?;
            let ocfg = OnlineConfig { reference_objective: Some(sol.objective), ..online_config(&cfg, theta) };
            let trace = run_episode(&ci.instance, &ocfg, alpha, cli.policy, episode_seed(cell))?;
            write_episode(out, manifest("simulate"), &ci.instance, &ocfg, &trace, sol.objective, sol.lifetime)?;
            println!(
                "{}: lifetime {} slots (static {:.1} s), death node {:?}",
                trace.policy, trace.lifetime, sol.lifetime, trace.death_node
            );
        }
        Command::SweepSensitivity => {
            let r = run_sensitivity(&cfg);
            write_outputs(
                out,
                manifest("sweep-sensitivity"),
                &[("sensitivity.csv", &r.csv()), ("sensitivity_means.csv", &r.means_csv())],
            )?;
            println!("{} rows, {} grid means", r.rows.len(), r.means.len());
        }
        Command::SweepConvergence => {
            let r = run_convergence(&cfg);
            write_outputs(
                out,
                manifest("sweep-convergence"),
                &[("convergence.csv", &r.csv()), ("convergence_series.csv", &r.series_csv)],
            )?;
            for &a in &cfg.sweep.alpha {
                println!(
                    "alpha {a:e}: median steady gap {:.3}, transient {:.0} slots, lifetime/static {:.3}",
                    r.median(a, |x| x.steady_gap),
                    r.median(a, |x| x.transient_slots as f64),
                    r.median(a, |x| x.lifetime_ratio)
                );
            }
        }
        Command::Compare => {
            let r = run_comparison(&cfg);
            write_outputs(
                out,
                manifest("compare"),
                &[
                    ("comparison.csv", &r.csv()),
                    ("comparison_ratios.csv", &r.ratios_csv()),
                    ("comparison_series.csv", &r.series_csv),
                ],
            )?;
            let (me, mf) = r.median_ratios();
            println!("median lifetime ratio mlia/min-energy {me:.3}, mlia/max-flow {mf:.3}");
        }
    }
    Ok(())
}

fn write_episode(
    out: &Path,
    manifest: Manifest,
    instance: &mlia_core::net::Instance,
    ocfg: &OnlineConfig,
    trace: &EpisodeTrace,
    f_star: f64,
    static_lifetime: f64,
) -> Result<(), Failure> {
    let mut csv = Vec::new();
    trace.write_csv(&mut csv, true)?;
    let csv = String::from_utf8(csv).expect("csv is utf-8");
    let d = theorem_diagnostics(instance, ocfg, trace, f_star);
    let summary = serde_json::json!({
        "episode": trace.summary(),
        "static_lifetime_s": static_lifetime,
        "reference_objective": f_star,
        "average_gap": d.average_gap,
        "gap_bound": d.bound,
        "feasibility_residual": d.feasibility_residual,
    });
    let summary = serde_json::to_string_pretty(&summary).map_err(|e| Failure::Numerical(e.to_string()))? + "\n";
    write_outputs(out, manifest, &[("episode.csv", &csv), ("summary.json", &summary)])?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = match &f {
                Failure::Config(m) => format!("config error: {m}"),
                Failure::Infeasible(m) => format!("infeasible instance: {m}"),
                Failure::Numerical(m) => format!("numerical failure: {m}"),
            };
            eprintln!("mlia: {msg}");
            ExitCode::from(f.code())
        }
    }
}
