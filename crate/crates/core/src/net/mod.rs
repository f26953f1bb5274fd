//! Network instances: nodes, directed links, applications, and the
//! protocol-interference conflict structure.

mod conflict;
pub mod fixtures;
mod edgelist;
mod rgg;

pub use conflict::{interference_set, maximal_independent_sets, ConflictGraph, MisResult};
pub use edgelist::{parse_edge_list, write_edge_list};
pub use rgg::{generate_rgg, hop_distances, Topology, MAX_RGG_ATTEMPTS};

use std::collections::{HashMap, VecDeque};

use crate::error::ModelError;
use crate::lp::PiecewiseLinearConcave;

#[derive(Debug, Clone)]
pub struct NodeSpec {
    pub id: usize,
    pub position: (f64, f64),
    /// Sustainable analytics throughput in bit/s.
    pub proc_capacity: f64,
    /// Joules; `f64::INFINITY` for the gateway.
    pub energy_budget: f64,
    /// J/bit spent processing.
    pub proc_energy: f64,
    pub is_gateway: bool,
}

#[derive(Debug, Clone)]
pub struct LinkSpec {
    pub src: usize,
    pub dst: usize,
    /// Mean capacity in bit/s.
    pub mean_capacity: f64,
    /// J/bit at the sender.
    pub e_tx: f64,
    /// J/bit at the receiver.
    pub e_rx: f64,
}

/// One commodity. Every per-node vector is indexed by node id.
#[derive(Debug, Clone)]
pub struct AppSpec {
    pub id: usize,
    /// Mean exogenous arrival rate, bit/s.
    pub arrival: Vec<f64>,
    /// Fraction of a processed flow that re-enters the network.
    pub flow_reduction: Vec<f64>,
    /// FLOP/bit; 1 under the throughput normalization of `proc_capacity`.
    pub proc_demand: Vec<f64>,
    /// Reward as a function of the processing rate in bit/s.
    pub utility: Vec<PiecewiseLinearConcave<f64>>,
}

#[derive(Debug, Clone)]
pub struct Instance {
    nodes: Vec<NodeSpec>,
    links: Vec<LinkSpec>,
    apps: Vec<AppSpec>,
    gateway: usize,
    conflict: ConflictGraph,
    out_links: Vec<Vec<usize>>,
    in_links: Vec<Vec<usize>>,
    link_index: HashMap<(usize, usize), usize>,
}

impl Instance {
    pub fn new(nodes: Vec<NodeSpec>, links: Vec<LinkSpec>, apps: Vec<AppSpec>) -> Result<Self, ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidInstance(msg));
        let n = nodes.len();
        if n < 2 {
            return bad(format!("need at least 2 nodes, got {n}"));
        }
        let gateways: Vec<usize> = nodes.iter().filter(|v| v.is_gateway).map(|v| v.id).collect();
        if gateways.len() != 1 {
            return bad(format!("expected exactly one gateway, found {}", gateways.len()));
        }
        let gateway = gateways[0];
        for (i, v) in nodes.iter().enumerate() {
            if v.id != i {
                return bad(format!("node at position {i} has id {}", v.id));
            }
            if !(v.proc_capacity >= 0.0) || !(v.proc_energy >= 0.0) {
                return bad(format!("node {i}: negative processing capacity or energy"));
            }
            if !v.is_gateway && !(v.energy_budget > 0.0 && v.energy_budget.is_finite()) {
                return bad(format!("node {i}: energy budget must be positive and finite"));
            }
        }

        let mut link_index = HashMap::new();
        let mut out_links = vec![Vec::new(); n];
        let mut in_links = vec![Vec::new(); n];
        for (k, l) in links.iter().enumerate() {
            if l.src >= n || l.dst >= n || l.src == l.dst {
                return bad(format!("link {k}: invalid endpoints {} -> {}", l.src, l.dst));
            }
            if !(l.mean_capacity > 0.0) || !(l.e_tx >= 0.0) || !(l.e_rx >= 0.0) {
                return bad(format!("link {} -> {}: capacity must be positive, energies non-negative", l.src, l.dst));
            }
            if link_index.insert((l.src, l.dst), k).is_some() {
                return bad(format!("duplicate link {} -> {}", l.src, l.dst));
            }
            out_links[l.src].push(k);
            in_links[l.dst].push(k);
        }

        // every node must reach the gateway along directed links
        let mut reach = vec![false; n];
        reach[gateway] = true;
        let mut queue = VecDeque::from([gateway]);
        while let Some(v) = queue.pop_front() {
            for &k in &in_links[v] {
                let u = links[k].src;
                if !reach[u] {
                    reach[u] = true;
                    queue.push_back(u);
                }
            }
        }
        if let Some(u) = reach.iter().position(|r| !r) {
            return bad(format!("node {u} has no path to the gateway"));
        }

        for (c, app) in apps.iter().enumerate() {
            if app.arrival.len() != n
                || app.flow_reduction.len() != n
                || app.proc_demand.len() != n
                || app.utility.len() != n
            {
                return bad(format!("application {c}: per-node vectors must have length {n}"));
            }
            for i in 0..n {
                if !(app.arrival[i] >= 0.0) {
                    return bad(format!("application {c}: negative arrival at node {i}"));
                }
                if !(0.0..=1.0).contains(&app.flow_reduction[i]) {
                    return bad(format!("application {c}: flow reduction at node {i} outside [0, 1]"));
                }
                if !(app.proc_demand[i] > 0.0) {
                    return bad(format!("application {c}: processing demand at node {i} must be positive"));
                }
            }
            if app.arrival[gateway] != 0.0 {
                return bad(format!("application {c}: the gateway cannot be a source"));
            }
        }

        let conflict = ConflictGraph::from_links(&links, n);
        Ok(Self { nodes, links, apps, gateway, conflict, out_links, in_links, link_index })
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn links(&self) -> &[LinkSpec] {
        &self.links
    }

    pub fn apps(&self) -> &[AppSpec] {
        &self.apps
    }

    pub fn gateway(&self) -> usize {
        self.gateway
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn num_apps(&self) -> usize {
        self.apps.len()
    }

    pub fn conflict(&self) -> &ConflictGraph {
        &self.conflict
    }

    pub fn out_links(&self, node: usize) -> &[usize] {
        &self.out_links[node]
    }

    pub fn in_links(&self, node: usize) -> &[usize] {
        &self.in_links[node]
    }

    pub fn link_id(&self, src: usize, dst: usize) -> Option<usize> {
        self.link_index.get(&(src, dst)).copied()
    }

    /// Non-gateway nodes in id order.
    pub fn energy_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(move |&i| i != self.gateway)
    }

    /// Copy with every energy budget multiplied by `k`.
    pub fn with_energy_scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        for v in out.nodes.iter_mut().filter(|v| !v.is_gateway) {
            v.energy_budget *= k;
        }
        out
    }

    /// Copy with the given application list (dimensions are re-validated).
    pub fn with_apps(&self, apps: Vec<AppSpec>) -> Result<Self, ModelError> {
        Self::new(self.nodes.clone(), self.links.clone(), apps)
    }

    /// Total mean arrival rate over every node and application, bit/s.
    pub fn total_arrival(&self) -> f64 {
        self.apps.iter().flat_map(|a| a.arrival.iter()).sum()
    }
}

/// Utility of one processed frame per point of mAP, so that rewards are mAP
/// fractions in `[0, 1]`.
pub const REWARD_PER_MAP_POINT: f64 = 0.01;

/// Hardware and traffic constants used to dress a bare topology.
#[derive(Debug, Clone)]
pub struct PhysicalParams {
    pub link_capacity: f64,
    pub e_tx: f64,
    pub e_rx: f64,
    pub energy_budget: f64,
    pub node_proc_capacity: f64,
    pub gateway_proc_capacity: f64,
    pub node_proc_energy: f64,
    pub gateway_proc_energy: f64,
    /// Arrival rate at a source, bit/s.
    pub source_rate: f64,
    pub flow_reduction: f64,
    pub node_utility: PiecewiseLinearConcave<f64>,
    pub gateway_utility: PiecewiseLinearConcave<f64>,
}

impl Instance {
    /// Single-application instance on an RGG topology; `sources[i]` marks the
    /// nodes that receive a stream.
    pub fn from_topology(topo: &Topology, params: &PhysicalParams, sources: &[bool]) -> Result<Self, ModelError> {
        let n = topo.positions.len();
        if sources.len() != n {
            return Err(ModelError::InvalidInstance("source mask length mismatch".into()));
        }
        let nodes = topo
            .positions
            .iter()
            .enumerate()
            .map(|(i, &position)| {
                let gw = i == topo.gateway;
                NodeSpec {
                    id: i,
                    position,
                    proc_capacity: if gw { params.gateway_proc_capacity } else { params.node_proc_capacity },
                    energy_budget: if gw { f64::INFINITY } else { params.energy_budget },
                    proc_energy: if gw { params.gateway_proc_energy } else { params.node_proc_energy },
                    is_gateway: gw,
                }
            })
            .collect();
        let links = topo
            .links
            .iter()
            .map(|&(src, dst)| LinkSpec {
                src,
                dst,
                mean_capacity: params.link_capacity,
                e_tx: params.e_tx,
                e_rx: params.e_rx,
            })
            .collect();
        let app = AppSpec {
            id: 0,
            arrival: (0..n)
                .map(|i| if sources[i] && i != topo.gateway { params.source_rate } else { 0.0 })
                .collect(),
            flow_reduction: vec![params.flow_reduction; n],
            proc_demand: vec![1.0; n],
            utility: (0..n)
                .map(|i| {
                    if i == topo.gateway {
                        params.gateway_utility.clone()
                    } else {
                        params.node_utility.clone()
                    }
                })
                .collect(),
        };
        Self::new(nodes, links, vec![app])
    }
}
