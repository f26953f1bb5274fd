use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{ModelError, SolveError};
use crate::net::{generate_rgg, Instance, PhysicalParams};
use crate::online::{run_episode, theorem_diagnostics, EpisodeTrace, OnlineConfig, PolicyKind};
use crate::static_opt::{solve_static, StaticConfig, StaticSolution};

use super::config::ExperimentConfig;

/// Stream of the source-assignment RNG, well clear of the ones the topology
/// generator resamples on.
const SOURCE_STREAM: u64 = 1 << 32;
const EPISODE_TAG: u64 = 0x6570_6973;
const CELL_TAG: u64 = 0x6365_6c6c;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the `index`-th cell under a master seed. Sweeps key their rows by
/// this value; `static --seed` with it rebuilds the same instance.
pub fn cell_seed(master: u64, index: usize) -> u64 {
    splitmix(splitmix(master ^ CELL_TAG).wrapping_add(index as u64))
}

/// Seed of the realization streams for episodes on a cell.
pub fn episode_seed(cell: u64) -> u64 {
    splitmix(cell ^ EPISODE_TAG)
}

/// Each non-gateway node is a source with probability `p`. Draw `draw` of a
/// cell comes from its own stream so topology and sources vary independently.
pub fn draw_sources(cell: u64, draw: usize, n: usize, gateway: usize, p: f64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(cell);
    rng.set_stream(SOURCE_STREAM + draw as u64);
    (0..n).map(|i| i != gateway && rng.gen_bool(p)).collect()
}

/// Why a cell produced no numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Disconnected,
    Infeasible,
    Numerical,
}

impl CellStatus {
    pub fn name(self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::Disconnected => "disconnected",
            CellStatus::Infeasible => "infeasible",
            CellStatus::Numerical => "numerical",
        }
    }

    fn of(err: &SolveError) -> Self {
        match err {
            SolveError::CapacityRegionEmpty => CellStatus::Infeasible,
            SolveError::Model(ModelError::DisconnectedTopology(_)) => CellStatus::Disconnected,
            _ => CellStatus::Numerical,
        }
    }
}

/// A connected instance whose sources admit a feasible static policy.
#[derive(Debug, Clone)]
pub struct CellInstance {
    pub instance: Instance,
    pub sources: Vec<bool>,
    /// Source draws rejected before this one.
    pub redraws: usize,
}

/// Draws sources until the static program at `theta` is feasible, up to
/// `source_draws` attempts. Draws without any source are skipped.
pub fn feasible_instance(
    cfg: &ExperimentConfig,
    params: &PhysicalParams,
    radius: f64,
    cell: u64,
    theta: f64,
) -> Result<(CellInstance, StaticSolution), SolveError> {
    let topo = generate_rgg(cfg.network.n, radius, cell)?;
    let mut redraws = 0;
    for draw in 0..cfg.sweep.source_draws {
        let sources = draw_sources(cell, draw, topo.num_nodes(), topo.gateway, cfg.app.source_probability);
        if !sources.contains(&true) {
            redraws += 1;
            continue;
        }
        let instance = Instance::from_topology(&topo, params, &sources)?;
        match solve_static(&instance, &static_config(cfg, theta)) {
            Ok(sol) => return Ok((CellInstance { instance, sources, redraws }, sol)),
            Err(SolveError::CapacityRegionEmpty) => redraws += 1,
            Err(e) => return Err(e),
        }
    }
    Err(SolveError::CapacityRegionEmpty)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityRow {
    pub seed: u64,
    pub radius: f64,
    pub theta: f64,
    pub lifetime_s: f64,
    pub weighted_map: f64,
    pub objective: f64,
    pub status: CellStatus,
    pub redraws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityMean {
    pub radius: f64,
    pub theta: f64,
    pub cells: usize,
    pub mean_lifetime_s: f64,
    pub mean_weighted_map: f64,
    /// Mean lifetime over the mean lifetime at the largest grid θ.
    pub lifetime_ratio: f64,
    /// Mean weighted mAP minus its value at the largest grid θ.
    pub delta_map: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SensitivityResult {
    pub rows: Vec<SensitivityRow>,
    pub means: Vec<SensitivityMean>,
}

impl SensitivityResult {
    pub const CSV_HEADER: &'static str = "seed,radius,theta,lifetime_s,weighted_mAP,objective,status";
    pub const MEANS_HEADER: &'static str =
        "radius,theta,cells,mean_lifetime_s,mean_weighted_mAP,lifetime_ratio,delta_mAP";

    pub fn csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.seed,
                r.radius,
                r.theta,
                r.lifetime_s,
                r.weighted_map,
                r.objective,
                r.status.name()
            );
        }
        s
    }

    pub fn means_csv(&self) -> String {
        let mut s = format!("{}\n", Self::MEANS_HEADER);
        for m in &self.means {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                m.radius, m.theta, m.cells, m.mean_lifetime_s, m.mean_weighted_map, m.lifetime_ratio, m.delta_map
            );
        }
        s
    }

    pub fn mean(&self, radius: f64, theta: f64) -> Option<&SensitivityMean> {
        self.means.iter().find(|m| m.radius == radius && m.theta == theta)
    }
}

/// Static solves over the radius × θ grid for every seed. One source draw is
/// shared by all θ of a (radius, seed) cell.
pub fn run_sensitivity(cfg: &ExperimentConfig) -> SensitivityResult {
    let params = cfg.physical_params();
    let thetas = &cfg.sweep.theta;
    let mut rows = Vec::new();
    for &radius in &cfg.network.radius {
        for s in 0..cfg.network.seeds {
            let cell = cell_seed(cfg.network.seed, s);
            let failed = |status, redraws| {
                thetas.iter().map(move |&theta| SensitivityRow {
                    seed: cell,
                    radius,
                    theta,
                    lifetime_s: f64::NAN,
                    weighted_map: f64::NAN,
                    objective: f64::NAN,
                    status,
                    redraws,
                })
            };
            let (ci, first) = match feasible_instance(cfg, &params, radius, cell, thetas[0]) {
                Ok(v) => v,
                Err(e) => {
                    rows.extend(failed(CellStatus::of(&e), cfg.sweep.source_draws));
                    continue;
                }
            };
            for (k, &theta) in thetas.iter().enumerate() {
                let sol = if k == 0 { Ok(first.clone()) } else { solve_static(&ci.instance, &static_config(cfg, theta)) };
                rows.push(match sol {
                    Ok(sol) => SensitivityRow {
                        seed: cell,
                        radius,
                        theta,
                        lifetime_s: sol.lifetime,
                        weighted_map: sol.weighted_map,
                        objective: sol.objective,
                        status: CellStatus::Ok,
                        redraws: ci.redraws,
                    },
                    Err(e) => failed(CellStatus::of(&e), ci.redraws).nth(k).expect("theta index in range"),
                });
            }
        }
    }
    let means = sensitivity_means(cfg, &rows);
    SensitivityResult { rows, means }
}

fn sensitivity_means(cfg: &ExperimentConfig, rows: &[SensitivityRow]) -> Vec<SensitivityMean> {
    let thetas = &cfg.sweep.theta;
    let top = thetas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::new();
    for &radius in &cfg.network.radius {
        let agg = |theta: f64| {
            let ok: Vec<&SensitivityRow> = rows
                .iter()
                .filter(|r| r.radius == radius && r.theta == theta && r.status == CellStatus::Ok)
                .collect();
            let n = ok.len();
            let mean = |f: fn(&SensitivityRow) -> f64| {
                if n == 0 {
                    f64::NAN
                } else {
                    ok.iter().map(|r| f(r)).sum::<f64>() / n as f64
                }
            };
            (n, mean(|r| r.lifetime_s), mean(|r| r.weighted_map))
        };
        let (_, top_life, top_map) = agg(top);
        for &theta in thetas {
            let (cells, life, map) = agg(theta);
            out.push(SensitivityMean {
                radius,
                theta,
                cells,
                mean_lifetime_s: life,
                mean_weighted_map: map,
                lifetime_ratio: life / top_life,
                delta_map: map - top_map,
            });
        }
    }
    out
}

/// Window of the moving average applied to the gap series.
pub const SMOOTHING_WINDOW: usize = 100;
/// Share of the final part of an episode averaged to get its steady level.
pub const STEADY_FRACTION: f64 = 0.25;
/// The transient ends once the smoothed gap has covered all but this share
/// of the distance from its first value to its steady level.
pub const TRANSIENT_BAND: f64 = 0.1;

/// Summary numbers of one gap/congestion series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesMetrics {
    /// Mean normalized gap from the end of the transient on.
    pub steady_gap: f64,
    /// First slot at which the smoothed gap is inside the band around its
    /// steady level.
    pub transient_slots: usize,
    /// Least-squares slope of congestion against slot.
    pub congestion_slope: f64,
}

fn moving_average(v: &[f64], w: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len());
    let mut acc = 0.0;
    for (k, x) in v.iter().enumerate() {
        acc += x;
        if k >= w {
            acc -= v[k - w];
        }
        out.push(acc / (k + 1).min(w) as f64);
    }
    out
}

fn ls_slope(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    if v.len() < 2 {
        return 0.0;
    }
    let mx = (n - 1.0) / 2.0;
    let my = v.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, y) in v.iter().enumerate() {
        let dx = k as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

fn mean_of(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn series_metrics(gap: &[f64], congestion: &[f64]) -> SeriesMetrics {
    let congestion_slope = ls_slope(congestion);
    if gap.is_empty() {
        return SeriesMetrics { steady_gap: f64::NAN, transient_slots: 0, congestion_slope };
    }
    let smooth = moving_average(gap, SMOOTHING_WINDOW);
    let tail_start = ((1.0 - STEADY_FRACTION) * gap.len() as f64) as usize;
    let steady = mean_of(&smooth[tail_start.min(gap.len() - 1)..]);
    let band = TRANSIENT_BAND * (smooth[0] - steady).abs();
    let transient_slots = smooth.iter().position(|g| (g - steady).abs() <= band).unwrap_or(gap.len());
    SeriesMetrics { steady_gap: mean_of(&gap[transient_slots..]), transient_slots, congestion_slope }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub alpha: f64,
    pub seed: u64,
    pub static_lifetime_s: f64,
    pub lifetime_s: f64,
    pub lifetime_ratio: f64,
    pub steady_gap: f64,
    pub transient_slots: usize,
    pub congestion_slope: f64,
    pub final_congestion: f64,
    pub average_gap: f64,
    pub gap_bound: f64,
    pub identity_error: f64,
    pub status: CellStatus,
}

#[derive(Debug, Clone, Default)]
pub struct ConvergenceResult {
    pub rows: Vec<ConvergenceRow>,
    /// Long-format per-slot series of every episode.
    pub series_csv: String,
}

impl ConvergenceResult {
    pub const CSV_HEADER: &'static str = "alpha,seed,static_lifetime_s,lifetime_s,lifetime_ratio,steady_gap,\
transient_slots,congestion_slope,final_congestion,average_gap,gap_bound,identity_error,status";

    pub fn csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.alpha,
                r.seed,
                r.static_lifetime_s,
                r.lifetime_s,
                r.lifetime_ratio,
                r.steady_gap,
                r.transient_slots,
                r.congestion_slope,
                r.final_congestion,
                r.average_gap,
                r.gap_bound,
                r.identity_error,
                r.status.name()
            );
        }
        s
    }

    /// Median of `f` over successful rows at step size `alpha`.
    pub fn median(&self, alpha: f64, f: impl Fn(&ConvergenceRow) -> f64) -> f64 {
        median(self.rows.iter().filter(|r| r.alpha == alpha && r.status == CellStatus::Ok).map(f).collect())
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.retain(|x| !x.is_nan());
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn online_config(cfg: &ExperimentConfig, theta: f64) -> OnlineConfig {
    OnlineConfig {
        max_slots: cfg.sweep.max_slots,
        stochastic: cfg.stochastic(),
        flow_unit: cfg.sweep.flow_unit,
        ..OnlineConfig::new(theta)
    }
}

pub const SERIES_HEADER: &str = "alpha,seed,slot,policy,gap_norm,congestion,min_battery_J,active_links,processed_bits,forwarded_bits";

/// Runs the controller for every (α, seed) at the convergence radius and θ.
/// A seed's instance and realizations are shared across α.
pub fn run_convergence(cfg: &ExperimentConfig) -> ConvergenceResult {
    let params = cfg.physical_params();
    let theta = cfg.sweep.online_theta;
    let radius = cfg.sweep.convergence_radius;
    let mut out = ConvergenceResult { rows: Vec::new(), series_csv: format!("{SERIES_HEADER}\n") };
    let mut cells = Vec::new();
    for s in 0..cfg.network.seeds {
        let cell = cell_seed(cfg.network.seed, s);
        cells.push((cell, feasible_instance(cfg, &params, radius, cell, theta)));
    }
    for &alpha in &cfg.sweep.alpha {
        for (cell, found) in &cells {
            let failed = |status, static_lifetime_s| ConvergenceRow {
                alpha,
                seed: *cell,
                static_lifetime_s,
                lifetime_s: f64::NAN,
                lifetime_ratio: f64::NAN,
                steady_gap: f64::NAN,
                transient_slots: 0,
                congestion_slope: f64::NAN,
                final_congestion: f64::NAN,
                average_gap: f64::NAN,
                gap_bound: f64::NAN,
                identity_error: f64::NAN,
                status,
            };
            let (ci, sol) = match found {
                Ok(v) => v,
                Err(e) => {
                    out.rows.push(failed(CellStatus::of(e), f64::NAN));
                    continue;
                }
            };
            let ocfg = OnlineConfig { reference_objective: Some(sol.objective), ..online_config(cfg, theta) };
            let trace = match run_episode(&ci.instance, &ocfg, alpha, PolicyKind::Mlia, episode_seed(*cell)) {
                Ok(t) => t,
                Err(e) => {
                    out.rows.push(failed(CellStatus::of(&e), sol.lifetime));
                    continue;
                }
            };
            let mut prefix = Vec::new();
            trace.write_csv(&mut prefix, false).expect("writing to memory");
            for line in String::from_utf8(prefix).expect("csv is utf-8").lines() {
                let _ = writeln!(out.series_csv, "{alpha},{cell},{line}");
            }
            let m = series_metrics(&trace.gap_series(), &trace.congestion_series());
            let d = theorem_diagnostics(&ci.instance, &ocfg, &trace, sol.objective);
            let lifetime = trace.lifetime as f64;
            out.rows.push(ConvergenceRow {
                alpha,
                seed: *cell,
                static_lifetime_s: sol.lifetime,
                lifetime_s: lifetime,
                lifetime_ratio: lifetime / sol.lifetime,
                steady_gap: m.steady_gap,
                transient_slots: m.transient_slots,
                congestion_slope: m.congestion_slope,
                final_congestion: trace.slots.last().map_or(0.0, |s| s.congestion),
                average_gap: d.average_gap,
                gap_bound: d.bound,
                identity_error: d.identity_error,
                status: CellStatus::Ok,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub seed: u64,
    pub policy: PolicyKind,
    pub lifetime_s: f64,
    pub mean_reward: f64,
    pub mean_processed_bits: f64,
    pub identity_error: f64,
    pub status: CellStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRatio {
    pub seed: u64,
    pub min_energy_theta: f64,
    pub mlia_over_min_energy: f64,
    pub mlia_over_max_flow: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ComparisonResult {
    pub rows: Vec<ComparisonRow>,
    pub ratios: Vec<ComparisonRatio>,
    /// Per-slot reward and battery series, long format.
    pub series_csv: String,
}

impl ComparisonResult {
    pub const CSV_HEADER: &'static str = "seed,policy,lifetime_s,mean_reward,mean_processed_bits,identity_error,status";
    pub const RATIOS_HEADER: &'static str = "seed,min_energy_theta,mlia_over_min_energy,mlia_over_max_flow";

    pub fn csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.seed,
                r.policy,
                r.lifetime_s,
                r.mean_reward,
                r.mean_processed_bits,
                r.identity_error,
                r.status.name()
            );
        }
        s
    }

    pub fn ratios_csv(&self) -> String {
        let mut s = format!("{}\n", Self::RATIOS_HEADER);
        for r in &self.ratios {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                r.seed, r.min_energy_theta, r.mlia_over_min_energy, r.mlia_over_max_flow
            );
        }
        s
    }

    pub fn median_ratios(&self) -> (f64, f64) {
        (
            median(self.ratios.iter().map(|r| r.mlia_over_min_energy).collect()),
            median(self.ratios.iter().map(|r| r.mlia_over_max_flow).collect()),
        )
    }
}

pub const COMPARISON_SERIES_HEADER: &str = "seed,slot,policy,reward,min_battery_J";
/// Relative mismatch in processed bits tolerated between the controller and
/// the min-energy benchmark before the benchmark's θ is recalibrated.
pub const CALIBRATION_TOLERANCE: f64 = 0.02;
const CALIBRATION_STEPS: usize = 40;

/// θ of the min-energy benchmark at which its mean processed bits per slot
/// come within `CALIBRATION_TOLERANCE` of `target`; bisection in log θ.
pub fn calibrate_min_energy(
    instance: &Instance,
    ocfg: &OnlineConfig,
    seed: u64,
    target: f64,
) -> Result<(f64, EpisodeTrace), SolveError> {
    let run = |theta: f64| {
        let c = OnlineConfig { min_energy_theta: Some(theta), ..ocfg.clone() };
        run_episode(instance, &c, 1.0, PolicyKind::MinEnergy, seed)
    };
    let close = |t: &EpisodeTrace| (t.mean_processed_bits() - target).abs() <= CALIBRATION_TOLERANCE * target.abs();
    let first = run(ocfg.theta)?;
    if close(&first) || target <= 0.0 {
        return Ok((ocfg.theta, first));
    }
    let (mut lo, mut hi) = (1e-12f64.ln(), 0.0);
    let mut best = (ocfg.theta, first);
    for _ in 0..CALIBRATION_STEPS {
        let mid = 0.5 * (lo + hi);
        let trace = run(mid.exp())?;
        let p = trace.mean_processed_bits();
        let better = (p - target).abs() < (best.1.mean_processed_bits() - target).abs();
        let done = close(&trace);
        if better {
            best = (mid.exp(), trace);
        }
        if done {
            break;
        }
        if p < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

/// The three policies on identical realizations, flat reward per frame.
pub fn run_comparison(cfg: &ExperimentConfig) -> ComparisonResult {
    let params = cfg.comparison_params();
    let theta = cfg.sweep.online_theta;
    let alpha = cfg.sweep.comparison_alpha;
    let mut out = ComparisonResult { series_csv: format!("{COMPARISON_SERIES_HEADER}\n"), ..Default::default() };
    for s in 0..cfg.network.seeds {
        let cell = cell_seed(cfg.network.seed, s);
        let failed = |status| {
            PolicyKind::ALL.map(|policy| ComparisonRow {
                seed: cell,
                policy,
                lifetime_s: f64::NAN,
                mean_reward: f64::NAN,
                mean_processed_bits: f64::NAN,
                identity_error: f64::NAN,
                status,
            })
        };
        let ci = match feasible_instance(cfg, &params, cfg.sweep.comparison_radius, cell, theta) {
            Ok((ci, _)) => ci,
            Err(e) => {
                out.rows.extend(failed(CellStatus::of(&e)));
                continue;
            }
        };
        let ocfg = online_config(cfg, theta);
        let eseed = episode_seed(cell);
        let traces = (|| -> Result<_, SolveError> {
            let mlia = run_episode(&ci.instance, &ocfg, alpha, PolicyKind::Mlia, eseed)?;
            let (me_theta, min_energy) = calibrate_min_energy(&ci.instance, &ocfg, eseed, mlia.mean_processed_bits())?;
            let max_flow = run_episode(&ci.instance, &ocfg, alpha, PolicyKind::MaxFlow, eseed)?;
            Ok((me_theta, [mlia, min_energy, max_flow]))
        })();
        let (me_theta, traces) = match traces {
            Ok(v) => v,
            Err(e) => {
                out.rows.extend(failed(CellStatus::of(&e)));
                continue;
            }
        };
        for t in &traces {
            let n = t.slots.len().max(1) as f64;
            out.rows.push(ComparisonRow {
                seed: cell,
                policy: t.policy,
                lifetime_s: t.lifetime as f64,
                mean_reward: t.slots.iter().map(|r| r.reward).sum::<f64>() / n,
                mean_processed_bits: t.mean_processed_bits(),
                identity_error: t.identity_error,
                status: CellStatus::Ok,
            });
            for r in &t.slots {
                let _ = writeln!(out.series_csv, "{cell},{},{},{},{}", r.slot, t.policy, r.reward, r.min_battery);
            }
        }
        let life = |k: usize| traces[k].lifetime as f64;
        out.ratios.push(ComparisonRatio {
            seed: cell,
            min_energy_theta: me_theta,
            mlia_over_min_energy: life(0) / life(1),
            mlia_over_max_flow: life(0) / life(2),
        });
    }
    out
}

/// `StaticConfig` with the harness flow unit.
pub fn static_config(cfg: &ExperimentConfig, theta: f64) -> StaticConfig {
    StaticConfig { flow_unit: cfg.frame_bits(), ..StaticConfig::new(theta) }
}
