//! Reference parameter sets and small hand-checkable instances.

use crate::lp::PiecewiseLinearConcave;

use super::{generate_rgg, REWARD_PER_MAP_POINT, AppSpec, Instance, LinkSpec, NodeSpec, PhysicalParams, Topology};
use crate::error::ModelError;

pub const FRAME_BITS: f64 = 4e6;
pub const LINK_CAPACITY: f64 = 24e6;
pub const RADIO_POWER: f64 = 0.4;
pub const PROC_POWER: f64 = 2.1;
pub const BATTERY_J: f64 = 2500.0;
pub const NODE_FRAME_TIME: f64 = 3.0;
pub const GATEWAY_FRAME_TIME: f64 = 0.1;
pub const NODE_MAP: f64 = 33.1;
pub const GATEWAY_MAP: f64 = 57.9;
pub const FLOW_REDUCTION: f64 = 1e-3;

/// Linear reward of `map` points per frame processed.
pub fn frame_utility(map: f64, frame_bits: f64) -> PiecewiseLinearConcave<f64> {
    PiecewiseLinearConcave::new(vec![(0.0, 0.0), (frame_bits, map * REWARD_PER_MAP_POINT)])
        .expect("linear utility is concave")
}

/// Raspberry-Pi-class nodes, a GPU gateway, 1 frame/s video sources.
pub fn reference_params() -> PhysicalParams {
    PhysicalParams {
        link_capacity: LINK_CAPACITY,
        e_tx: RADIO_POWER / LINK_CAPACITY,
        e_rx: RADIO_POWER / LINK_CAPACITY,
        energy_budget: BATTERY_J,
        node_proc_capacity: FRAME_BITS / NODE_FRAME_TIME,
        gateway_proc_capacity: FRAME_BITS / GATEWAY_FRAME_TIME,
        node_proc_energy: PROC_POWER * NODE_FRAME_TIME / FRAME_BITS,
        gateway_proc_energy: PROC_POWER * GATEWAY_FRAME_TIME / FRAME_BITS,
        source_rate: FRAME_BITS,
        flow_reduction: FLOW_REDUCTION,
        node_utility: frame_utility(NODE_MAP, FRAME_BITS),
        gateway_utility: frame_utility(GATEWAY_MAP, FRAME_BITS),
    }
}

/// Node 0 is a source one hop from the gateway (node 1).
pub fn two_node(params: &PhysicalParams) -> Instance {
    let topo = Topology { positions: vec![(0.4, 0.5), (0.5, 0.5)], links: vec![(0, 1), (1, 0)], gateway: 1 };
    Instance::from_topology(&topo, params, &[true, false]).expect("two-node instance is valid")
}

/// A chain `0 → 1 → … → gateway` where node 0 is the only source.
pub fn chain(params: &PhysicalParams, len: usize) -> Instance {
    let positions = (0..len).map(|i| (0.1 * i as f64, 0.5)).collect();
    let mut links = Vec::new();
    for i in 0..len - 1 {
        links.push((i, i + 1));
        links.push((i + 1, i));
    }
    links.sort_unstable();
    let topo = Topology { positions, links, gateway: len - 1 };
    let mut sources = vec![false; len];
    sources[0] = true;
    Instance::from_topology(&topo, params, &sources).expect("chain instance is valid")
}

/// Source 0 reaches the gateway (3) either through relay 1, whose battery
/// is `relay_budget`, or through relay 2 at `detour_cost` times the radio
/// energy per bit.
pub fn two_relay(params: &PhysicalParams, relay_budget: f64, detour_cost: f64) -> Instance {
    let node = |id: usize, e: f64, gw: bool| NodeSpec {
        id,
        position: (0.0, 0.0),
        proc_capacity: if gw { params.gateway_proc_capacity } else { params.node_proc_capacity },
        energy_budget: if gw { f64::INFINITY } else { e },
        proc_energy: if gw { params.gateway_proc_energy } else { params.node_proc_energy },
        is_gateway: gw,
    };
    let nodes = vec![
        node(0, params.energy_budget, false),
        node(1, relay_budget, false),
        node(2, params.energy_budget, false),
        node(3, 0.0, true),
    ];
    let link = |src, dst, k: f64| LinkSpec {
        src,
        dst,
        mean_capacity: params.link_capacity,
        e_tx: params.e_tx * k,
        e_rx: params.e_rx * k,
    };
    let links = vec![
        link(0, 1, 1.0),
        link(1, 0, 1.0),
        link(0, 2, detour_cost),
        link(2, 0, detour_cost),
        link(1, 3, 1.0),
        link(3, 1, 1.0),
        link(2, 3, detour_cost),
        link(3, 2, detour_cost),
    ];
    let mut arrival = vec![0.0; 4];
    arrival[0] = params.source_rate;
    let app = AppSpec {
        id: 0,
        arrival,
        flow_reduction: vec![params.flow_reduction; 4],
        proc_demand: vec![1.0; 4],
        utility: (0..4)
            .map(|i| if i == 3 { params.gateway_utility.clone() } else { params.node_utility.clone() })
            .collect(),
    };
    Instance::new(nodes, links, vec![app]).expect("relay instance is valid")
}

/// RGG instance with an explicit source mask.
pub fn rgg_instance(
    n: usize,
    radius: f64,
    seed: u64,
    params: &PhysicalParams,
    sources: &[bool],
) -> Result<Instance, ModelError> {
    let topo = generate_rgg(n, radius, seed)?;
    Instance::from_topology(&topo, params, sources)
}
