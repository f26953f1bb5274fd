use crate::error::ModelError;
use crate::lp::{encode_pwl_utility, LinearProgram, PiecewiseLinearConcave, Relation, RowId, VarId};
use crate::net::Instance;

use super::{Group, Policy, StaticConfig};

/// How node energy enters the objective.
#[derive(Debug, Clone)]
pub(crate) enum EnergyTerm {
    /// `Σ_k π_k max_{i∈M_k} p_i/E_i` through one epigraph variable per group.
    MaxRatio(Vec<Group>),
    /// `Σ_i p_i`.
    TotalPower,
    None,
}

/// How flow conservation at energy-limited nodes is handled.
#[derive(Debug, Clone)]
pub(crate) enum Conservation<'a> {
    /// Hard equality with the mean arrivals.
    Equality,
    /// Priced into the objective with one multiplier per `[node][app]`
    /// (gateway entries ignored).
    Priced(&'a [Vec<f64>]),
}

/// Everything needed to assemble one of the program variants used across
/// the crate (static, min-energy benchmark, per-slot Lagrangian).
#[derive(Debug, Clone)]
pub(crate) struct ProgramSpec<'a> {
    pub theta: f64,
    pub flow_unit: f64,
    pub energy: EnergyTerm,
    pub conservation: Conservation<'a>,
    /// Link capacities in bit/s.
    pub link_caps: &'a [f64],
    /// Processing capacities in bit/s.
    pub proc_caps: &'a [f64],
    /// Links that may carry traffic; all when `None`.
    pub support: Option<&'a [usize]>,
    /// Add the fractional interference rows.
    pub fractional_interference: bool,
    /// Per `[node][app]` multiplier on the utility values.
    pub utility_factor: Option<&'a [Vec<f64>]>,
    /// Drop `y` variables whose marginal value cannot be positive.
    pub prune: Option<&'a [Vec<bool>]>,
    /// Scales the whole utility term in addition to `theta`.
    pub utility_weight: f64,
}

/// The assembled LP and the handles needed to read a policy back out.
#[derive(Debug, Clone)]
pub struct StaticProgram {
    pub lp: LinearProgram<f64>,
    /// `[link][app]`; `None` for links outside the support.
    pub x_vars: Vec<Vec<Option<VarId>>>,
    /// `[node][app]`.
    pub y_vars: Vec<Vec<Option<VarId>>>,
    /// One epigraph variable per lifetime group.
    pub epigraph_vars: Vec<VarId>,
    /// Epigraph variables hold `max p_i/E_i` multiplied by this factor.
    pub epigraph_scale: f64,
    /// `(node, row)` of every epigraph constraint, per group.
    pub epigraph_rows: Vec<Vec<(usize, RowId)>>,
    pub utility_vars: Vec<VarId>,
    pub flow_unit: f64,
}

impl StaticProgram {
    pub fn extract_policy(&self, primal: &[f64]) -> Policy {
        let read = |v: &Option<VarId>| v.map_or(0.0, |id| primal[id.0].max(0.0) * self.flow_unit);
        Policy {
            x: self.x_vars.iter().map(|row| row.iter().map(read).collect()).collect(),
            y: self.y_vars.iter().map(|row| row.iter().map(read).collect()).collect(),
        }
    }
}

/// LP form of the scalarized lifetime/analytics problem with fractional
/// interference, mean capacities, and exact flow conservation.
pub fn build_static_program(instance: &Instance, cfg: &StaticConfig) -> Result<StaticProgram, ModelError> {
    cfg.validate(instance)?;
    let link_caps: Vec<f64> = instance.links().iter().map(|l| l.mean_capacity).collect();
    let proc_caps: Vec<f64> = instance.nodes().iter().map(|v| v.proc_capacity).collect();
    let spec = ProgramSpec {
        theta: cfg.theta,
        flow_unit: cfg.flow_unit,
        energy: EnergyTerm::MaxRatio(cfg.resolved_groups(instance)),
        conservation: Conservation::Equality,
        link_caps: &link_caps,
        proc_caps: &proc_caps,
        support: None,
        fractional_interference: true,
        utility_factor: None,
        prune: None,
        utility_weight: 1.0,
    };
    assemble(instance, &spec)
}

pub(crate) fn assemble(instance: &Instance, spec: &ProgramSpec<'_>) -> Result<StaticProgram, ModelError> {
    let n = instance.num_nodes();
    let nl = instance.num_links();
    let nc = instance.num_apps();
    let unit = spec.flow_unit;
    let gw = instance.gateway();
    let links = instance.links();
    let nodes = instance.nodes();
    let mut lp = LinearProgram::new();

    let in_support = |l: usize| spec.support.map_or(true, |s| s.contains(&l));
    let single = nc == 1;

    let mut x_vars = vec![vec![None; nc]; nl];
    for l in 0..nl {
        if !in_support(l) {
            continue;
        }
        // the gateway is a sink and never re-emits traffic
        let cap = if links[l].src == gw { 0.0 } else { spec.link_caps[l] / unit };
        for c in 0..nc {
            let ub = if single || cap == 0.0 { Some(cap.max(0.0)) } else { None };
            x_vars[l][c] = Some(lp.add_nonneg(format!("x[{}>{},{c}]", links[l].src, links[l].dst), ub));
        }
    }
    let mut y_vars = vec![vec![None; nc]; n];
    for i in 0..n {
        for c in 0..nc {
            if i != gw && spec.prune.is_some_and(|p| !p[i][c]) {
                continue;
            }
            let gamma = instance.apps()[c].proc_demand[i];
            let ub = if single { Some((spec.proc_caps[i] / (gamma * unit)).max(0.0)) } else { None };
            y_vars[i][c] = Some(lp.add_nonneg(format!("y[{i},{c}]"), ub));
        }
    }

    if !single {
        for l in 0..nl {
            let terms: Vec<(VarId, f64)> = x_vars[l].iter().flatten().map(|&v| (v, 1.0)).collect();
            if !terms.is_empty() {
                lp.add_constraint(terms, Relation::Le, spec.link_caps[l] / unit);
            }
        }
        for i in 0..n {
            let terms: Vec<(VarId, f64)> = (0..nc)
                .filter_map(|c| y_vars[i][c].map(|v| (v, instance.apps()[c].proc_demand[i])))
                .collect();
            if !terms.is_empty() {
                lp.add_constraint(terms, Relation::Le, spec.proc_caps[i] / unit);
            }
        }
    }

    // flow balance: inflow - outflow + (β - 1) y  [= -λ]
    let balance = |i: usize, c: usize| -> Vec<(VarId, f64)> {
        let mut terms = Vec::new();
        for &l in instance.in_links(i) {
            if let Some(v) = x_vars[l][c] {
                terms.push((v, 1.0));
            }
        }
        for &l in instance.out_links(i) {
            if let Some(v) = x_vars[l][c] {
                terms.push((v, -1.0));
            }
        }
        if let Some(v) = y_vars[i][c] {
            terms.push((v, instance.apps()[c].flow_reduction[i] - 1.0));
        }
        terms
    };
    for c in 0..nc {
        for i in instance.energy_nodes() {
            match &spec.conservation {
                Conservation::Equality => {
                    let rhs = -instance.apps()[c].arrival[i] / unit;
                    lp.add_constraint(balance(i, c), Relation::Eq, rhs);
                }
                Conservation::Priced(prices) => {
                    let price = prices[i][c];
                    if price != 0.0 {
                        for (v, a) in balance(i, c) {
                            lp.add_objective(v, price * a);
                        }
                    }
                }
            }
        }
        // the gateway analyses everything it receives
        if let Some(yg) = y_vars[gw][c] {
            let mut terms = vec![(yg, 1.0)];
            for &l in instance.in_links(gw) {
                if let Some(v) = x_vars[l][c] {
                    terms.push((v, -1.0));
                }
            }
            lp.add_constraint(terms, Relation::Eq, 0.0);
        }
    }

    if spec.fractional_interference {
        let conflict = instance.conflict();
        for l in 0..nl {
            let mut terms = Vec::new();
            for k in std::iter::once(l).chain(conflict.neighbors(l)) {
                let w = unit / spec.link_caps[k];
                terms.extend(x_vars[k].iter().flatten().map(|&v| (v, w)));
            }
            if !terms.is_empty() && x_vars[l].iter().any(Option::is_some) {
                lp.add_constraint(terms, Relation::Le, 1.0);
            }
        }
    }

    // power of node i in watts, per flow unit per second
    let power_terms = |i: usize| -> Vec<(VarId, f64)> {
        let mut terms = Vec::new();
        for &l in instance.out_links(i) {
            terms.extend(x_vars[l].iter().flatten().map(|&v| (v, links[l].e_tx * unit)));
        }
        for &l in instance.in_links(i) {
            terms.extend(x_vars[l].iter().flatten().map(|&v| (v, links[l].e_rx * unit)));
        }
        terms.extend(y_vars[i].iter().flatten().map(|&v| (v, nodes[i].proc_energy * unit)));
        terms
    };

    let lifetime_weight = 1.0 - spec.theta;
    let epigraph_scale = instance
        .energy_nodes()
        .map(|i| nodes[i].energy_budget)
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut epigraph_vars = Vec::new();
    let mut epigraph_rows = Vec::new();
    match &spec.energy {
        EnergyTerm::MaxRatio(groups) => {
            for (k, g) in groups.iter().enumerate() {
                let s = lp.add_nonneg(format!("s[{k}]"), None);
                let mut rows = Vec::new();
                lp.set_objective(s, lifetime_weight * g.weight / epigraph_scale);
                for &i in &g.nodes {
                    let ratio = epigraph_scale / nodes[i].energy_budget;
                    let mut terms: Vec<(VarId, f64)> =
                        power_terms(i).into_iter().map(|(v, a)| (v, a * ratio)).collect();
                    if terms.is_empty() {
                        continue;
                    }
                    terms.push((s, -1.0));
                    rows.push((i, lp.add_constraint(terms, Relation::Le, 0.0)));
                }
                epigraph_vars.push(s);
                epigraph_rows.push(rows);
            }
        }
        EnergyTerm::TotalPower => {
            for i in instance.energy_nodes() {
                for (v, a) in power_terms(i) {
                    lp.add_objective(v, lifetime_weight * a);
                }
            }
        }
        EnergyTerm::None => {}
    }

    let mut utility_vars = Vec::new();
    let weight = spec.theta * spec.utility_weight;
    for i in 0..n {
        for c in 0..nc {
            let Some(y) = y_vars[i][c] else { continue };
            let base = &instance.apps()[c].utility[i];
            let factor = spec.utility_factor.map_or(1.0, |f| f[i][c]);
            if base.is_zero() || factor == 0.0 {
                continue;
            }
            let u: PiecewiseLinearConcave<f64> = base.rescale_input(unit).scaled(factor);
            let aux = encode_pwl_utility(&u, y, &mut lp)?;
            lp.set_objective(aux, -weight);
            utility_vars.push(aux);
        }
    }

    Ok(StaticProgram { lp, x_vars, y_vars, epigraph_vars, epigraph_scale, epigraph_rows, utility_vars, flow_unit: unit })
}
