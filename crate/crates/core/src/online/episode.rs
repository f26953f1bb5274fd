use std::io::{self, Write};

use serde::Serialize;

use crate::error::SolveError;
use crate::net::Instance;
use crate::static_opt::{analytics_reward, node_power, static_objective, Policy};

use super::action::{SlotAction, SlotSolver};
use super::dual::{flow_excess, DualState};
use super::min_energy::benchmark_policy_min_energy;
use super::realization::{sample_slot, RealizationStreams, SLOT_SECONDS};
use super::{OnlineConfig, PolicyKind};

/// Allowed disagreement between the averaged subgradients and `ν/(αT)`.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;
const IDENTITY_EVERY: usize = 100;
/// Battery overdraw forgiven as rounding, relative to the budget.
const BATTERY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotRecord {
    pub slot: usize,
    /// Static objective at the slot action, exact utilities.
    pub objective: f64,
    /// Exact analytics reward of the slot action.
    pub reward: f64,
    /// `Σ ν` after the slot's update.
    pub congestion: f64,
    pub min_battery: f64,
    pub active_links: usize,
    pub processed_bits: f64,
    pub forwarded_bits: f64,
    /// `‖g + λ‖²` in flow units.
    pub excess_norm_sq: f64,
}

#[derive(Debug, Clone)]
pub struct EpisodeTrace {
    pub policy: PolicyKind,
    pub theta: f64,
    pub alpha: f64,
    pub seed: u64,
    pub slots: Vec<SlotRecord>,
    /// Per-slot rates when `record_actions` is set.
    pub actions: Vec<Policy>,
    pub active_sets: Vec<Vec<usize>>,
    /// Completed slots.
    pub lifetime: usize,
    /// The node whose battery would have gone negative; `None` when the
    /// slot cap ended the episode.
    pub death_node: Option<usize>,
    /// Energy the fatal slot would have drawn from the dying node.
    pub death_demand: Option<f64>,
    /// Slot count at which each lifetime group lost its first node.
    pub group_deaths: Vec<Option<usize>>,
    pub batteries: Vec<f64>,
    pub final_nu: Vec<Vec<f64>>,
    /// `Σ_t (g + λ)[t]` in flow units.
    pub excess_sum: Vec<Vec<f64>>,
    /// Worst relative mismatch of the telescoping identity over all checks.
    pub identity_error: f64,
    pub reference_objective: Option<f64>,
    pub programs_solved: usize,
    pub greedy_slots: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpisodeSummary {
    pub policy: String,
    pub seed: u64,
    pub theta: f64,
    pub alpha: f64,
    pub lifetime_slots: usize,
    pub death_node: Option<usize>,
    pub mean_processed_bits: f64,
    pub mean_forwarded_bits: f64,
    pub final_congestion: f64,
    pub identity_error: f64,
    pub greedy_slots: usize,
}

impl EpisodeTrace {
    /// `(f(x[t], y[t]) − f*)/θ` for slot index `k` (0-based).
    pub fn gap_norm(&self, k: usize) -> f64 {
        match self.reference_objective {
            Some(f) if self.theta > 0.0 => (self.slots[k].objective - f) / self.theta,
            _ => f64::NAN,
        }
    }

    pub fn gap_series(&self) -> Vec<f64> {
        (0..self.slots.len()).map(|k| self.gap_norm(k)).collect()
    }

    pub fn congestion_series(&self) -> Vec<f64> {
        self.slots.iter().map(|s| s.congestion).collect()
    }

    pub fn identity_holds(&self) -> bool {
        self.identity_error <= IDENTITY_TOLERANCE
    }

    pub fn mean_processed_bits(&self) -> f64 {
        mean(self.slots.iter().map(|s| s.processed_bits))
    }

    pub fn summary(&self) -> EpisodeSummary {
        EpisodeSummary {
            policy: self.policy.name().to_string(),
            seed: self.seed,
            theta: self.theta,
            alpha: self.alpha,
            lifetime_slots: self.lifetime,
            death_node: self.death_node,
            mean_processed_bits: self.mean_processed_bits(),
            mean_forwarded_bits: mean(self.slots.iter().map(|s| s.forwarded_bits)),
            final_congestion: self.slots.last().map_or(0.0, |s| s.congestion),
            identity_error: self.identity_error,
            greedy_slots: self.greedy_slots,
        }
    }

    pub const CSV_HEADER: &'static str =
        "slot,policy,gap_norm,congestion,min_battery_J,active_links,processed_bits,forwarded_bits";

    pub fn write_csv<W: Write>(&self, mut w: W, header: bool) -> io::Result<()> {
        if header {
            writeln!(w, "{}", Self::CSV_HEADER)?;
        }
        for (k, s) in self.slots.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                s.slot,
                self.policy,
                self.gap_norm(k),
                s.congestion,
                s.min_battery,
                s.active_links,
                s.processed_bits,
                s.forwarded_bits
            )?;
        }
        Ok(())
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

enum Controller {
    Lagrangian(SlotSolver),
    Plan(super::min_energy::MinEnergyPlan),
}

/// Runs one episode until the first battery would go negative or the slot
/// cap is reached. Realizations depend only on `seed`, so every policy sees
/// the same arrivals, capacities and noise.
pub fn run_episode(
    instance: &Instance,
    cfg: &OnlineConfig,
    alpha: f64,
    kind: PolicyKind,
    seed: u64,
) -> Result<EpisodeTrace, SolveError> {
    cfg.validate(instance)?;
    let mut dual = DualState::new(instance, alpha)?;
    let mut controller = match kind {
        PolicyKind::MinEnergy => Controller::Plan(benchmark_policy_min_energy(
            instance,
            cfg.min_energy_theta.unwrap_or(cfg.theta),
            cfg.flow_unit,
        )?),
        _ => Controller::Lagrangian(SlotSolver::new(instance, cfg, kind)),
    };
    let static_cfg = cfg.static_config();
    let groups = static_cfg.resolved_groups(instance);
    let mut streams = RealizationStreams::new(seed);
    let n = instance.num_nodes();
    let nc = instance.num_apps();
    let mut batteries: Vec<f64> = instance.nodes().iter().map(|v| v.energy_budget).collect();
    let mut excess_sum = vec![vec![0.0; nc]; n];

    let mut trace = EpisodeTrace {
        policy: kind,
        theta: cfg.theta,
        alpha,
        seed,
        slots: Vec::new(),
        actions: Vec::new(),
        active_sets: Vec::new(),
        lifetime: 0,
        death_node: None,
        death_demand: None,
        group_deaths: vec![None; groups.len()],
        batteries: Vec::new(),
        final_nu: Vec::new(),
        excess_sum: Vec::new(),
        identity_error: 0.0,
        reference_objective: cfg.reference_objective,
        programs_solved: 0,
        greedy_slots: 0,
    };

    for t in 1..=cfg.max_slots {
        let slot = sample_slot(instance, &cfg.stochastic, &mut streams);
        let action: SlotAction = match &mut controller {
            Controller::Lagrangian(solver) => solver.action(instance, cfg, &dual, &slot)?,
            Controller::Plan(plan) => plan.action(instance, &slot),
        };

        let energy: Vec<f64> = (0..n).map(|i| node_power(instance, &action.policy, i) * SLOT_SECONDS).collect();
        let dying = instance.energy_nodes().find(|&i| {
            let budget = instance.nodes()[i].energy_budget;
            batteries[i] - energy[i] < -BATTERY_SLACK * budget
        });
        if let Some(i) = dying {
            trace.death_node = Some(i);
            trace.death_demand = Some(energy[i]);
            for (k, g) in groups.iter().enumerate() {
                if g.nodes.contains(&i) {
                    trace.group_deaths[k] = Some(t - 1);
                }
            }
            break;
        }
        for i in instance.energy_nodes() {
            batteries[i] = (batteries[i] - energy[i]).max(0.0);
        }

        let excess = flow_excess(instance, &action.policy, &slot, cfg.flow_unit);
        for (acc, e) in excess_sum.iter_mut().zip(&excess) {
            for (a, d) in acc.iter_mut().zip(e) {
                *a += d;
            }
        }
        dual.step(&excess);
        if t % IDENTITY_EVERY == 0 {
            trace.identity_error = trace.identity_error.max(identity_error(&dual, &excess_sum));
        }

        let policy = &action.policy;
        trace.slots.push(SlotRecord {
            slot: t,
            objective: static_objective(instance, &static_cfg, policy),
            reward: analytics_reward(instance, policy),
            congestion: dual.congestion(),
            min_battery: instance.energy_nodes().map(|i| batteries[i]).fold(f64::INFINITY, f64::min),
            active_links: policy.active_links().len(),
            processed_bits: policy.y.iter().flatten().sum::<f64>() * SLOT_SECONDS,
            forwarded_bits: policy.x.iter().flatten().sum::<f64>() * SLOT_SECONDS,
            excess_norm_sq: excess.iter().flatten().map(|e| e * e).sum(),
        });
        trace.programs_solved += action.programs_solved;
        trace.greedy_slots += usize::from(action.greedy);
        if cfg.record_actions {
            trace.active_sets.push(action.active_links());
            trace.actions.push(action.policy);
        }
        trace.lifetime = t;
    }

    if dual.t > 0 {
        trace.identity_error = trace.identity_error.max(identity_error(&dual, &excess_sum));
    }
    trace.batteries = batteries;
    trace.final_nu = dual.nu;
    trace.excess_sum = excess_sum;
    Ok(trace)
}

/// Relative mismatch between `(1/T)Σ(g+λ)` and `ν[T+1]/(αT)`.
fn identity_error(dual: &DualState, excess_sum: &[Vec<f64>]) -> f64 {
    let t = dual.t as f64;
    dual.nu
        .iter()
        .flatten()
        .zip(excess_sum.iter().flatten())
        .map(|(nu, s)| {
            let avg = s / t;
            (nu / (dual.alpha * t) - avg).abs() / avg.abs().max(1.0)
        })
        .fold(0.0, f64::max)
}
