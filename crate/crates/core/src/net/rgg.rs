use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::ModelError;

/// Resampling budget for disconnected draws.
pub const MAX_RGG_ATTEMPTS: usize = 100;

/// Node placement and bidirectional links of a random geometric graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub positions: Vec<(f64, f64)>,
    /// Directed links, sorted by `(src, dst)`.
    pub links: Vec<(usize, usize)>,
    pub gateway: usize,
}

impl Topology {
    pub fn num_nodes(&self) -> usize {
        self.positions.len()
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.positions.len()];
        for &(a, b) in &self.links {
            adj[a].push(b);
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        hop_distances(self).iter().all(Option::is_some)
    }
}

/// BFS hop count from every node to the gateway.
pub fn hop_distances(topo: &Topology) -> Vec<Option<usize>> {
    let adj = topo.adjacency();
    let mut dist = vec![None; topo.positions.len()];
    dist[topo.gateway] = Some(0);
    let mut queue = VecDeque::from([topo.gateway]);
    while let Some(v) = queue.pop_front() {
        let dv = dist[v].unwrap_or(0);
        for &w in &adj[v] {
            if dist[w].is_none() {
                dist[w] = Some(dv + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

fn sample(n: usize, radius: f64, rng: &mut ChaCha8Rng) -> Topology {
    let positions: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
    let mut links = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b {
                let (dx, dy) = (positions[a].0 - positions[b].0, positions[a].1 - positions[b].1);
                if dx.hypot(dy) <= radius {
                    links.push((a, b));
                }
            }
        }
    }
    let centre_dist = |p: (f64, f64)| (p.0 - 0.5).hypot(p.1 - 0.5);
    let gateway = (0..n)
        .min_by(|&a, &b| centre_dist(positions[a]).total_cmp(&centre_dist(positions[b])).then(a.cmp(&b)))
        .unwrap_or(0);
    Topology { positions, links, gateway }
}

/// Uniform placement in the unit square; the node nearest the centre is the
/// gateway. Disconnected draws are resampled on successive sub-streams of the
/// seed.
pub fn generate_rgg(n: usize, radius: f64, seed: u64) -> Result<Topology, ModelError> {
    if n < 2 {
        return Err(ModelError::InvalidInstance(format!("need at least 2 nodes, got {n}")));
    }
    if !(radius > 0.0) {
        return Err(ModelError::InvalidInstance(format!("radius must be positive, got {radius}")));
    }
    for attempt in 0..MAX_RGG_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt as u64);
        let topo = sample(n, radius, &mut rng);
        if topo.is_connected() {
            return Ok(topo);
        }
    }
    Err(ModelError::DisconnectedTopology(MAX_RGG_ATTEMPTS))
}
