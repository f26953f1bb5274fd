use std::collections::HashMap;
use std::rc::Rc;

use fixedbitset::FixedBitSet;

use crate::error::{LpError, SolveError};
use crate::lp::{solve_lp_with, LpStatus, Pricing, SolverOptions, VarId};
use crate::net::{maximal_independent_sets, Instance, MisResult};
use crate::static_opt::{assemble, Conservation, EnergyTerm, Group, Policy, ProgramSpec};

use super::dual::DualState;
use super::realization::SlotRealization;
use super::{OnlineConfig, PolicyKind};

pub const DEFAULT_MIS_CAP: usize = 4096;
const CACHE_LIMIT: usize = 20_000;

#[derive(Debug, Clone)]
pub struct SlotAction {
    /// Rates in bit/s.
    pub policy: Policy,
    /// The independent set the rates were optimized over.
    pub schedule: Vec<usize>,
    /// Slot Lagrangian at the chosen action (flow-unit prices).
    pub lagrangian: f64,
    pub programs_solved: usize,
    /// The independent-set enumeration overflowed and the greedy set was used.
    pub greedy: bool,
}

impl SlotAction {
    pub fn idle(instance: &Instance) -> Self {
        Self { policy: Policy::zero(instance), schedule: Vec::new(), lagrangian: 0.0, programs_solved: 0, greedy: false }
    }

    pub fn active_links(&self) -> Vec<usize> {
        self.policy.active_links()
    }
}

/// Per-slot minimizer of the Lagrangian for the controller (`Mlia`) or for
/// the congestion-only benchmark (`MaxFlow`). Keeps a cache of independent
/// sets keyed by the links worth activating.
#[derive(Debug)]
pub struct SlotSolver {
    kind: PolicyKind,
    groups: Vec<Group>,
    /// Convex weights over each group's nodes, from the last epigraph duals.
    /// Any weights give a valid lower bound; good ones prune more sets.
    weights: Vec<Vec<f64>>,
    cache: HashMap<FixedBitSet, Rc<MisResult>>,
}

impl SlotSolver {
    pub fn new(instance: &Instance, cfg: &OnlineConfig, kind: PolicyKind) -> Self {
        assert!(kind != PolicyKind::MinEnergy, "min-energy plays a fixed plan");
        let groups = cfg.static_config().resolved_groups(instance);
        let weights = groups.iter().map(|g| vec![1.0 / g.nodes.len().max(1) as f64; g.nodes.len()]).collect();
        Self { kind, groups, weights, cache: HashMap::new() }
    }

    pub fn action(
        &mut self,
        instance: &Instance,
        cfg: &OnlineConfig,
        dual: &DualState,
        slot: &SlotRealization,
    ) -> Result<SlotAction, SolveError> {
        let gw = instance.gateway();
        let unit = cfg.flow_unit;
        let nc = instance.num_apps();
        let mlia = self.kind == PolicyKind::Mlia;
        let reward = if mlia { cfg.theta } else { 0.0 };
        let mut prices = dual.prices();
        prices[gw].iter_mut().for_each(|p| *p = 0.0);

        // marginal analytics value of one flow unit processed at (i, c), an
        // upper bound since utilities are concave
        let slope = |i: usize, c: usize| {
            reward * slot.utility_factor[i][c] * instance.apps()[c].utility[i].max_slope() * unit
        };

        let mut benefit = vec![0.0; instance.num_links()];
        let mut useful = Vec::new();
        for (l, link) in instance.links().iter().enumerate() {
            if link.src == gw {
                continue;
            }
            let b = (0..nc)
                .map(|c| {
                    let downstream = if link.dst == gw { -slope(gw, c) } else { prices[link.dst][c] };
                    prices[link.src][c] - downstream
                })
                .fold(f64::NEG_INFINITY, f64::max);
            if b > 0.0 {
                benefit[l] = b;
                useful.push(l);
            }
        }

        let mut keep = vec![vec![false; nc]; instance.num_nodes()];
        for (i, row) in keep.iter_mut().enumerate() {
            for (c, k) in row.iter_mut().enumerate() {
                let beta = instance.apps()[c].flow_reduction[i];
                *k = i == gw || prices[i][c] * (1.0 - beta) + slope(i, c) > 0.0;
            }
        }
        let mis = self.independent_sets(instance, &useful, cfg.mis_cap);
        let greedy;
        let sets: Vec<Vec<usize>> = if mis.overflow {
            greedy = true;
            vec![greedy_set(instance, &useful, &benefit, slot)]
        } else {
            greedy = false;
            mis.sets.clone()
        };

        let relax = Relaxation { instance, cfg, reward, prices: &prices, keep: &keep, slot, benefit: &benefit };
        let mut bounds = relax.bounds(&self.power_prices(instance, cfg, &self.weights), &sets);
        let mut done = vec![false; sets.len()];
        let mut best: Option<(f64, usize, Policy, Vec<Vec<f64>>)> = None;
        let mut solved = 0;
        loop {
            // unsolved set with the smallest bound, lowest index on ties
            let Some(k) = (0..sets.len())
                .filter(|&k| !done[k])
                .min_by(|&a, &b| bounds[a].total_cmp(&bounds[b]).then(a.cmp(&b)))
            else {
                break;
            };
            if let Some((value, ..)) = &best {
                if bounds[k] > value + tie_tolerance(*value) {
                    break;
                }
            }
            done[k] = true;
            let (value, policy, weights) = self.solve_set(instance, cfg, &prices, &keep, slot, &sets[k])?;
            solved += 1;
            let weights = normalized(weights);
            if !weights.is_empty() {
                // each weight vector gives another valid bound; keep the tightest
                let fresh = relax.bounds(&self.power_prices(instance, cfg, &weights), &sets);
                for (b, f) in bounds.iter_mut().zip(fresh) {
                    *b = b.max(f);
                }
            }
            let better = match &best {
                None => true,
                Some((v, idx, ..)) => {
                    let tol = tie_tolerance(*v);
                    value < v - tol || (value <= v + tol && k < *idx)
                }
            };
            if better {
                best = Some((value, k, policy, weights));
            }
        }
        let (lagrangian, k, policy, weights) = best.expect("at least one candidate set");
        if !weights.is_empty() {
            self.weights = weights;
        }
        Ok(SlotAction { policy, schedule: sets[k].clone(), lagrangian, programs_solved: solved, greedy })
    }

    /// `c_i` with `(1-θ)Σ_k π_k max_{i∈M_k} p_i/E_i ≥ Σ_i c_i p_i`.
    fn power_prices(&self, instance: &Instance, cfg: &OnlineConfig, weights: &[Vec<f64>]) -> Vec<f64> {
        let mut c = vec![0.0; instance.num_nodes()];
        if self.kind != PolicyKind::Mlia {
            return c;
        }
        for (g, w) in self.groups.iter().zip(weights) {
            for (&i, &wi) in g.nodes.iter().zip(w) {
                c[i] += (1.0 - cfg.theta) * g.weight * wi / instance.nodes()[i].energy_budget;
            }
        }
        c
    }

    fn independent_sets(&mut self, instance: &Instance, useful: &[usize], cap: usize) -> Rc<MisResult> {
        let mut key = FixedBitSet::with_capacity(instance.num_links());
        useful.iter().for_each(|&l| key.insert(l));
        if let Some(hit) = self.cache.get(&key) {
            return Rc::clone(hit);
        }
        if self.cache.len() >= CACHE_LIMIT {
            self.cache.clear();
        }
        let res = Rc::new(maximal_independent_sets(instance.conflict(), Some(useful), cap));
        self.cache.insert(key, Rc::clone(&res));
        res
    }

    fn solve_set(
        &self,
        instance: &Instance,
        cfg: &OnlineConfig,
        prices: &[Vec<f64>],
        keep: &[Vec<bool>],
        slot: &SlotRealization,
        set: &[usize],
    ) -> Result<(f64, Policy, Vec<Vec<f64>>), SolveError> {
        let mlia = self.kind == PolicyKind::Mlia;
        let spec = ProgramSpec {
            theta: if mlia { cfg.theta } else { 0.0 },
            flow_unit: cfg.flow_unit,
            energy: if mlia { EnergyTerm::MaxRatio(self.groups.clone()) } else { EnergyTerm::None },
            conservation: Conservation::Priced(prices),
            link_caps: &slot.link_capacity,
            proc_caps: &slot.proc_capacity,
            support: Some(set),
            fractional_interference: false,
            utility_factor: Some(&slot.utility_factor),
            prune: Some(keep),
            utility_weight: if mlia { 1.0 } else { 0.0 },
        };
        let fail = |source: LpError| SolveError::Candidate { links: set.to_vec(), source };
        let mut program = assemble(instance, &spec)?;

        // prices span many orders of magnitude over an episode; solve a
        // normalized copy so the optimality tolerance stays meaningful
        let scale = program.lp.objective().iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        if scale == 0.0 {
            return Ok((0.0, Policy::zero(instance), Vec::new()));
        }
        for j in 0..program.lp.num_vars() {
            let c = program.lp.objective()[j];
            program.lp.set_objective(VarId(j), c / scale);
        }
        let opts = SolverOptions { pricing: Pricing::DantzigBland, ..SolverOptions::default() };
        let sol = solve_lp_with(&program.lp, &opts).map_err(fail)?;
        match sol.status {
            LpStatus::Optimal => {
                let weights = self
                    .groups
                    .iter()
                    .zip(&program.epigraph_rows)
                    .map(|(g, rows)| {
                        g.nodes
                            .iter()
                            .map(|i| rows.iter().find(|(j, _)| j == i).map_or(0.0, |(_, r)| sol.duals[r.0].abs()))
                            .collect()
                    })
                    .collect();
                Ok((sol.objective * scale, program.extract_policy(&sol.primal), weights))
            }
            LpStatus::Infeasible => Err(fail(LpError::Numerical("slot program infeasible".into()))),
            LpStatus::Unbounded => Err(fail(LpError::Numerical("slot program unbounded".into()))),
        }
    }
}

/// Lagrangian minimizer for the controller with a fresh cache.
pub fn slot_action(
    instance: &Instance,
    cfg: &OnlineConfig,
    dual: &DualState,
    slot: &SlotRealization,
) -> Result<SlotAction, SolveError> {
    SlotSolver::new(instance, cfg, PolicyKind::Mlia).action(instance, cfg, dual, slot)
}

fn tie_tolerance(value: f64) -> f64 {
    1e-12 + 1e-9 * value.abs()
}

/// Separable relaxation of the slot program: the energy maximum is replaced
/// by a weighted sum, which leaves one independent term per link and per
/// processing variable (plus the shared gateway capacity).
struct Relaxation<'a> {
    instance: &'a Instance,
    cfg: &'a OnlineConfig,
    reward: f64,
    prices: &'a [Vec<f64>],
    keep: &'a [Vec<bool>],
    slot: &'a SlotRealization,
    benefit: &'a [f64],
}

impl Relaxation<'_> {
    /// Lower bounds on the slot Lagrangian of every set, with energy priced
    /// by `power_price`.
    fn bounds(&self, power_price: &[f64], sets: &[Vec<usize>]) -> Vec<f64> {
        let instance = self.instance;
        let slot = self.slot;
        let unit = self.cfg.flow_unit;
        let gw = instance.gateway();
        let links = instance.links();
        let base = self.processing_bound(power_price);
        // best value per flow unit on each link, net of priced energy
        let gain: Vec<f64> = links
            .iter()
            .zip(self.benefit)
            .map(|(l, b)| (b - (power_price[l.src] * l.e_tx + power_price[l.dst] * l.e_rx) * unit).max(0.0))
            .collect();
        let min_gamma = instance.apps().iter().map(|a| a.proc_demand[gw]).fold(f64::INFINITY, f64::min);
        let gateway_room = slot.proc_capacity[gw] / (min_gamma * unit);
        sets.iter()
            .map(|set| {
                let mut total = base;
                let mut into_gw: Vec<usize> = Vec::new();
                for &l in set {
                    if links[l].dst == gw {
                        into_gw.push(l);
                    } else {
                        total -= gain[l] * slot.link_capacity[l] / unit;
                    }
                }
                // everything entering the gateway must fit its processing capacity
                into_gw.sort_by(|&a, &b| gain[b].total_cmp(&gain[a]));
                let mut room = gateway_room;
                for l in into_gw {
                    let x = (slot.link_capacity[l] / unit).min(room);
                    total -= gain[l] * x;
                    room -= x;
                }
                total
            })
            .collect()
    }

    /// Smallest value of the processing terms, each kept `y` on its own. The
    /// gateway contributes only its constant, its flow is credited to links.
    fn processing_bound(&self, power_price: &[f64]) -> f64 {
        let instance = self.instance;
        let gw = instance.gateway();
        let unit = self.cfg.flow_unit;
        let mut total = 0.0;
        for (c, app) in instance.apps().iter().enumerate() {
            for i in 0..instance.num_nodes() {
                if !self.keep[i][c] {
                    continue;
                }
                let u = &app.utility[i];
                let w = self.reward * self.slot.utility_factor[i][c];
                if i == gw {
                    total -= w * u.value_at_zero();
                    continue;
                }
                let cap = self.slot.proc_capacity[i] / app.proc_demand[i];
                let per_bit = self.prices[i][c] * (app.flow_reduction[i] - 1.0) / unit
                    + power_price[i] * instance.nodes()[i].proc_energy;
                let f = |y: f64| per_bit * y - w * u.eval(y);
                let mut low = f(0.0).min(f(cap));
                for &(b, _) in u.breakpoints() {
                    if b > 0.0 && b < cap {
                        low = low.min(f(b));
                    }
                }
                total += low;
            }
        }
        total
    }
}

fn normalized(weights: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    if weights.iter().any(|w| w.iter().sum::<f64>() <= 0.0) {
        return Vec::new();
    }
    weights
        .into_iter()
        .map(|w| {
            let total: f64 = w.iter().sum();
            w.into_iter().map(|v| v / total).collect()
        })
        .collect()
}

/// Highest `benefit × capacity` first, skipping conflicts.
fn greedy_set(instance: &Instance, useful: &[usize], benefit: &[f64], slot: &SlotRealization) -> Vec<usize> {
    let mut order = useful.to_vec();
    order.sort_by(|&a, &b| {
        (benefit[b] * slot.link_capacity[b]).total_cmp(&(benefit[a] * slot.link_capacity[a])).then(a.cmp(&b))
    });
    let conflict = instance.conflict();
    let mut set: Vec<usize> = Vec::new();
    for l in order {
        if set.iter().all(|&k| !conflict.conflicts(k, l)) {
            set.push(l);
        }
    }
    set.sort_unstable();
    set
}
