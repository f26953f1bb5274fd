use crate::error::SolveError;
use crate::lp::{solve_lp, LpStatus};
use crate::net::Instance;
use crate::static_opt::{assemble, Conservation, EnergyTerm, Policy, ProgramSpec};

use super::action::SlotAction;
use super::realization::{SlotRealization, SLOT_SECONDS};

/// A link never owes more than this many slots of its planned traffic.
const DEFICIT_HORIZON: f64 = 10.0;

/// Offline total-power plan played slot by slot. Each link accrues its
/// planned volume every slot and serves the accrued amount whenever it gets
/// scheduled.
#[derive(Debug, Clone)]
pub struct MinEnergyPlan {
    /// Planned rates in bit/s.
    pub planned: Policy,
    /// Bits owed per link.
    deficit: Vec<f64>,
}

/// Solves `min (1-θ)Σ p_i − θΣ ω` over the mean capacity region.
pub fn benchmark_policy_min_energy(instance: &Instance, theta: f64, flow_unit: f64) -> Result<MinEnergyPlan, SolveError> {
    let link_caps: Vec<f64> = instance.links().iter().map(|l| l.mean_capacity).collect();
    let proc_caps: Vec<f64> = instance.nodes().iter().map(|v| v.proc_capacity).collect();
    let spec = ProgramSpec {
        theta,
        flow_unit,
        energy: EnergyTerm::TotalPower,
        conservation: Conservation::Equality,
        link_caps: &link_caps,
        proc_caps: &proc_caps,
        support: None,
        fractional_interference: true,
        utility_factor: None,
        prune: None,
        utility_weight: 1.0,
    };
    let program = assemble(instance, &spec)?;
    let sol = solve_lp(&program.lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(SolveError::CapacityRegionEmpty),
        LpStatus::Unbounded => return Err(SolveError::Unbounded),
    }
    let planned = program.extract_policy(&sol.primal);
    Ok(MinEnergyPlan { deficit: vec![0.0; instance.num_links()], planned })
}

impl MinEnergyPlan {
    pub fn action(&mut self, instance: &Instance, slot: &SlotRealization) -> SlotAction {
        let nl = instance.num_links();
        let nc = instance.num_apps();
        for l in 0..nl {
            let owed = self.planned.link_rate(l) * SLOT_SECONDS;
            self.deficit[l] = (self.deficit[l] + owed).min(DEFICIT_HORIZON * owed);
        }
        let mut order: Vec<usize> = (0..nl).filter(|&l| self.deficit[l] > 0.0).collect();
        order.sort_by(|&a, &b| self.deficit[b].total_cmp(&self.deficit[a]).then(a.cmp(&b)));

        let conflict = instance.conflict();
        let mut schedule: Vec<usize> = Vec::new();
        let mut policy = Policy::zero(instance);
        for l in order {
            if schedule.iter().any(|&k| conflict.conflicts(k, l)) {
                continue;
            }
            let rate = slot.link_capacity[l].min(self.deficit[l] / SLOT_SECONDS);
            self.deficit[l] -= rate * SLOT_SECONDS;
            let planned = self.planned.link_rate(l);
            for c in 0..nc {
                policy.x[l][c] = rate * self.planned.x[l][c] / planned;
            }
            schedule.push(l);
        }
        schedule.sort_unstable();

        let gw = instance.gateway();
        for i in 0..instance.num_nodes() {
            // the gateway analyses what it received, other nodes follow the plan
            let want: Vec<f64> = if i == gw {
                (0..nc).map(|c| instance.in_links(gw).iter().map(|&l| policy.x[l][c]).sum()).collect()
            } else {
                self.planned.y[i].clone()
            };
            let load: f64 = (0..nc).map(|c| instance.apps()[c].proc_demand[i] * want[c]).sum();
            let shrink = if load > slot.proc_capacity[i] { slot.proc_capacity[i] / load } else { 1.0 };
            for c in 0..nc {
                policy.y[i][c] = want[c] * shrink;
            }
        }
        SlotAction { policy, schedule, lagrangian: f64::NAN, programs_solved: 0, greedy: false }
    }
}
