//! The static lifetime/analytics program: LP construction, solution, and the
//! policy-level quantities derived from it (power, lifetime, reward).

mod program;

pub use program::{build_static_program, StaticProgram};
pub(crate) use program::{assemble, Conservation, EnergyTerm, ProgramSpec};

use crate::error::{ModelError, SolveError};
use crate::lp::{solve_lp, LpStatus};
use crate::net::{Instance, REWARD_PER_MAP_POINT};

/// One frame of the default video workload, in bits (0.5 MB).
pub const DEFAULT_FLOW_UNIT_BITS: f64 = 4e6;

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub nodes: Vec<usize>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticConfig {
    /// Weight of the analytics term; `1 - theta` weighs the lifetime term.
    pub theta: f64,
    /// Lifetime groups; `None` is a single group of every non-gateway node.
    pub groups: Option<Vec<Group>>,
    /// Bits per flow unit. Rates inside the program are in flow units per
    /// second, and `weighted_map` is mAP points per flow unit processed.
    pub flow_unit: f64,
}

impl StaticConfig {
    pub fn new(theta: f64) -> Self {
        Self { theta, groups: None, flow_unit: DEFAULT_FLOW_UNIT_BITS }
    }

    pub fn with_groups(mut self, groups: Vec<Group>) -> Self {
        self.groups = Some(groups);
        self
    }

    pub fn validate(&self, instance: &Instance) -> Result<(), ModelError> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(ModelError::InvalidInstance(format!("theta {} outside [0, 1]", self.theta)));
        }
        if !(self.flow_unit > 0.0) {
            return Err(ModelError::InvalidInstance("flow unit must be positive".into()));
        }
        for g in self.groups.iter().flatten() {
            if !(g.weight >= 0.0) {
                return Err(ModelError::InvalidInstance(format!("group weight {} is negative", g.weight)));
            }
            if let Some(&bad) = g.nodes.iter().find(|&&i| i >= instance.num_nodes() || i == instance.gateway()) {
                return Err(ModelError::InvalidInstance(format!("group member {bad} is not an energy-limited node")));
            }
        }
        Ok(())
    }

    /// Groups with the default filled in.
    pub fn resolved_groups(&self, instance: &Instance) -> Vec<Group> {
        match &self.groups {
            Some(g) => g.clone(),
            None => vec![Group { nodes: instance.energy_nodes().collect(), weight: 1.0 }],
        }
    }
}

/// Routing and processing rates in bit/s, indexed `[link][app]` and
/// `[node][app]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
}

impl Policy {
    pub fn zero(instance: &Instance) -> Self {
        let c = instance.num_apps();
        Self { x: vec![vec![0.0; c]; instance.num_links()], y: vec![vec![0.0; c]; instance.num_nodes()] }
    }

    pub fn link_rate(&self, link: usize) -> f64 {
        self.x[link].iter().sum()
    }

    /// Links carrying a positive rate.
    pub fn active_links(&self) -> Vec<usize> {
        (0..self.x.len()).filter(|&l| self.link_rate(l) > 0.0).collect()
    }
}

/// Power drawn by `node` under `policy`, in watts.
pub fn node_power(instance: &Instance, policy: &Policy, node: usize) -> f64 {
    let links = instance.links();
    let tx: f64 = instance.out_links(node).iter().map(|&l| policy.link_rate(l) * links[l].e_tx).sum();
    let rx: f64 = instance.in_links(node).iter().map(|&l| policy.link_rate(l) * links[l].e_rx).sum();
    let pr: f64 = policy.y[node].iter().sum::<f64>() * instance.nodes()[node].proc_energy;
    tx + rx + pr
}

/// `1 / max_i p_i/E_i` over energy-limited nodes; infinite when no such node
/// draws power.
pub fn lifetime_from_powers(instance: &Instance, powers: &[f64]) -> f64 {
    let worst = instance
        .energy_nodes()
        .map(|i| powers[i] / instance.nodes()[i].energy_budget)
        .fold(0.0, f64::max);
    if worst > 0.0 {
        1.0 / worst
    } else {
        f64::INFINITY
    }
}

/// Reward `Σ ω_i(y_i)` over every node and application.
pub fn analytics_reward(instance: &Instance, policy: &Policy) -> f64 {
    instance
        .apps()
        .iter()
        .enumerate()
        .map(|(c, app)| (0..instance.num_nodes()).map(|i| app.utility[i].eval(policy.y[i][c])).sum::<f64>())
        .sum()
}

/// mAP points per flow unit processed (traffic-weighted over processing
/// locations); zero when nothing is processed.
pub fn weighted_map(instance: &Instance, policy: &Policy, flow_unit: f64) -> f64 {
    let processed: f64 = policy.y.iter().flatten().sum::<f64>() / flow_unit;
    if processed <= 0.0 {
        return 0.0;
    }
    let gained: f64 = instance
        .apps()
        .iter()
        .enumerate()
        .map(|(c, app)| {
            (0..instance.num_nodes())
                .map(|i| {
                    let y = policy.y[i][c];
                    if y > 0.0 {
                        app.utility[i].eval(y) - app.utility[i].value_at_zero()
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
        })
        .sum();
    gained / processed / REWARD_PER_MAP_POINT
}

/// Objective of the scalarized program evaluated at `policy`.
pub fn static_objective(instance: &Instance, cfg: &StaticConfig, policy: &Policy) -> f64 {
    let powers: Vec<f64> = (0..instance.num_nodes()).map(|i| node_power(instance, policy, i)).collect();
    let lifetime_term: f64 = cfg
        .resolved_groups(instance)
        .iter()
        .map(|g| {
            g.weight
                * g.nodes
                    .iter()
                    .map(|&i| powers[i] / instance.nodes()[i].energy_budget)
                    .fold(0.0, f64::max)
        })
        .sum();
    (1.0 - cfg.theta) * lifetime_term - cfg.theta * analytics_reward(instance, policy)
}

/// Worst violations of the static constraints, relative to the size of the
/// quantities involved.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PolicyResiduals {
    pub negativity: f64,
    pub capacity: f64,
    pub interference: f64,
    pub conservation: f64,
}

impl PolicyResiduals {
    pub fn max(&self) -> f64 {
        self.negativity.max(self.capacity).max(self.interference).max(self.conservation)
    }
}

pub fn policy_residuals(instance: &Instance, policy: &Policy) -> PolicyResiduals {
    let mut r = PolicyResiduals::default();
    let links = instance.links();
    for v in policy.x.iter().chain(&policy.y).flatten() {
        r.negativity = r.negativity.max(-v);
    }
    for (l, link) in links.iter().enumerate() {
        r.capacity = r.capacity.max(policy.link_rate(l) / link.mean_capacity - 1.0);
    }
    for (i, node) in instance.nodes().iter().enumerate() {
        let load: f64 = instance.apps().iter().enumerate().map(|(c, a)| a.proc_demand[i] * policy.y[i][c]).sum();
        if node.proc_capacity > 0.0 {
            r.capacity = r.capacity.max(load / node.proc_capacity - 1.0);
        } else {
            r.capacity = r.capacity.max(load);
        }
    }
    let conflict = instance.conflict();
    for (l, link) in links.iter().enumerate() {
        let airtime: f64 = policy.link_rate(l) / link.mean_capacity
            + conflict.neighbors(l).map(|k| policy.link_rate(k) / links[k].mean_capacity).sum::<f64>();
        r.interference = r.interference.max(airtime - 1.0);
    }
    // conservation errors are judged against the total offered load
    let traffic = instance.total_arrival().max(1.0);
    for (c, app) in instance.apps().iter().enumerate() {
        for i in instance.energy_nodes() {
            let inflow: f64 = instance.in_links(i).iter().map(|&l| policy.x[l][c]).sum();
            let outflow: f64 = instance.out_links(i).iter().map(|&l| policy.x[l][c]).sum();
            let y = policy.y[i][c];
            let lhs = inflow + app.flow_reduction[i] * y + app.arrival[i];
            let rhs = outflow + y;
            let scale = lhs.abs().max(rhs.abs()).max(traffic);
            r.conservation = r.conservation.max((lhs - rhs).abs() / scale);
        }
        let gw = instance.gateway();
        let inflow: f64 = instance.in_links(gw).iter().map(|&l| policy.x[l][c]).sum();
        let outflow: f64 = instance.out_links(gw).iter().map(|&l| policy.x[l][c]).sum();
        let scale = inflow.abs().max(traffic);
        r.conservation = r.conservation.max((inflow - policy.y[gw][c]).abs() / scale).max(outflow / scale);
    }
    r
}

#[derive(Debug, Clone)]
pub struct StaticSolution {
    pub policy: Policy,
    /// Seconds; `f64::INFINITY` when no energy-limited node draws power.
    pub lifetime: f64,
    pub per_node_power: Vec<f64>,
    pub analytics_reward: f64,
    pub weighted_map: f64,
    /// Scalarized objective at the optimum.
    pub objective: f64,
    /// The `+∞` lifetime sentinel is in use.
    pub zero_demand: bool,
    pub lp_iterations: usize,
}

pub fn solve_static(instance: &Instance, cfg: &StaticConfig) -> Result<StaticSolution, SolveError> {
    let program = build_static_program(instance, cfg)?;
    let sol = solve_lp(&program.lp)?;
    match sol.status {
        LpStatus::Infeasible => return Err(SolveError::CapacityRegionEmpty),
        LpStatus::Unbounded => return Err(SolveError::Unbounded),
        LpStatus::Optimal => {}
    }
    let policy = program.extract_policy(&sol.primal);
    let per_node_power: Vec<f64> = (0..instance.num_nodes()).map(|i| node_power(instance, &policy, i)).collect();
    let lifetime = lifetime_from_powers(instance, &per_node_power);
    Ok(StaticSolution {
        analytics_reward: analytics_reward(instance, &policy),
        weighted_map: weighted_map(instance, &policy, cfg.flow_unit),
        objective: static_objective(instance, cfg, &policy),
        zero_demand: lifetime.is_infinite(),
        lifetime,
        per_node_power,
        policy,
        lp_iterations: sol.iterations,
    })
}
