//! Slot-by-slot simulation of the dual-subgradient controller and of the
//! two benchmark policies.

mod action;
mod diagnostics;
mod dual;
mod episode;
mod min_energy;
mod realization;

pub use action::{slot_action, SlotAction, SlotSolver, DEFAULT_MIS_CAP};
pub use diagnostics::{running_average_gap, theorem_diagnostics, TheoremDiagnostics};
pub use dual::{dual_update, flow_excess, DualState};
pub use episode::{run_episode, EpisodeSummary, EpisodeTrace, SlotRecord, IDENTITY_TOLERANCE};
pub use min_energy::{benchmark_policy_min_energy, MinEnergyPlan};
pub use realization::{
    sample_slot, NoisyUtility, RealizationStreams, SlotRealization, StochasticConfig, DEFAULT_CAPACITY_SPREAD,
    DEFAULT_UTILITY_NOISE, SLOT_SECONDS,
};

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::ModelError;
use crate::net::Instance;
use crate::static_opt::{Group, StaticConfig, DEFAULT_FLOW_UNIT_BITS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Mlia,
    MinEnergy,
    MaxFlow,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Mlia, PolicyKind::MinEnergy, PolicyKind::MaxFlow];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Mlia => "mlia",
            PolicyKind::MinEnergy => "min-energy",
            PolicyKind::MaxFlow => "max-flow",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown policy `{s}` (expected mlia, min-energy or max-flow)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineConfig {
    pub theta: f64,
    /// Tradeoff weight of the min-energy benchmark; `theta` when `None`.
    pub min_energy_theta: Option<f64>,
    /// Bits per flow unit; multipliers and subgradients are expressed in it.
    pub flow_unit: f64,
    pub groups: Option<Vec<Group>>,
    /// Enumeration limit for maximal independent sets before the greedy
    /// fallback takes over.
    pub mis_cap: usize,
    pub max_slots: usize,
    pub stochastic: StochasticConfig,
    /// Keep every slot's `(x, y)` in the trace.
    pub record_actions: bool,
    /// Static optimum used to normalize the per-slot gap.
    pub reference_objective: Option<f64>,
}

impl OnlineConfig {
    pub fn new(theta: f64) -> Self {
        Self {
            theta,
            min_energy_theta: None,
            flow_unit: DEFAULT_FLOW_UNIT_BITS,
            groups: None,
            mis_cap: DEFAULT_MIS_CAP,
            max_slots: 100_000,
            stochastic: StochasticConfig::default(),
            record_actions: false,
            reference_objective: None,
        }
    }

    pub fn static_config(&self) -> StaticConfig {
        StaticConfig { theta: self.theta, groups: self.groups.clone(), flow_unit: self.flow_unit }
    }

    pub fn validate(&self, instance: &Instance) -> Result<(), ModelError> {
        self.static_config().validate(instance)?;
        if let Some(t) = self.min_energy_theta {
            if !(0.0..=1.0).contains(&t) {
                return Err(ModelError::InvalidInstance(format!("min-energy theta {t} outside [0, 1]")));
            }
        }
        if self.mis_cap == 0 {
            return Err(ModelError::InvalidInstance("independent-set cap must be positive".into()));
        }
        self.stochastic.validate()
    }
}
