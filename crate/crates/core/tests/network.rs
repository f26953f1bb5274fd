use std::collections::BTreeSet;

use mlia_core::net::fixtures::reference_params;
use mlia_core::net::{
    generate_rgg, hop_distances, interference_set, maximal_independent_sets, parse_edge_list, write_edge_list,
    ConflictGraph, Instance, Topology,
};
use proptest::prelude::*;

fn find(parent: &mut [usize], v: usize) -> usize {
    let mut r = v;
    while parent[r] != r {
        r = parent[r];
    }
    parent[v] = r;
    r
}

/// Connectivity straight from positions with union-find.
fn connected_by_geometry(topo: &Topology, radius: f64) -> bool {
    let n = topo.positions.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for a in 0..n {
        for b in a + 1..n {
            let (pa, pb) = (topo.positions[a], topo.positions[b]);
            if (pa.0 - pb.0).hypot(pa.1 - pb.1) <= radius {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
        }
    }
    let root = find(&mut parent, 0);
    (0..n).all(|v| find(&mut parent, v) == root)
}

#[test]
fn rgg_is_connected_and_reproducible() {
    let topo = generate_rgg(20, 0.25, 7).unwrap();
    assert!(connected_by_geometry(&topo, 0.25));
    assert!(topo.is_connected());
    assert_eq!(topo, generate_rgg(20, 0.25, 7).unwrap());
    assert_ne!(topo.positions, generate_rgg(20, 0.25, 8).unwrap().positions);
    // every link is symmetric and within range
    for &(a, b) in &topo.links {
        assert!(topo.links.binary_search(&(b, a)).is_ok());
        let (pa, pb) = (topo.positions[a], topo.positions[b]);
        assert!((pa.0 - pb.0).hypot(pa.1 - pb.1) <= 0.25);
    }
    // the gateway is the node nearest the centre
    let d = |p: (f64, f64)| (p.0 - 0.5).hypot(p.1 - 0.5);
    let g = topo.gateway;
    assert!(topo.positions.iter().all(|&p| d(p) >= d(topo.positions[g])));
}

#[test]
fn denser_graphs_have_shorter_paths() {
    let mean_hops = |radius: f64| {
        let mut total = 0.0;
        for seed in 0..50 {
            let topo = generate_rgg(20, radius, seed).unwrap();
            let h = hop_distances(&topo);
            total += h.iter().map(|d| d.unwrap() as f64).sum::<f64>() / 19.0;
        }
        total / 50.0
    };
    assert!(mean_hops(0.45) < mean_hops(0.25));
}

fn instance(radius: f64, seed: u64) -> Instance {
    let topo = generate_rgg(12, radius, seed).unwrap();
    Instance::from_topology(&topo, &reference_params(), &vec![false; 12]).unwrap()
}

#[test]
fn interference_sets_match_neighbourhood_rule() {
    for seed in 0..10 {
        let inst = instance(0.35, seed);
        let n = inst.num_nodes();
        let mut nbrs = vec![BTreeSet::new(); n];
        for l in inst.links() {
            nbrs[l.src].insert(l.dst);
        }
        for (k, l) in inst.links().iter().enumerate() {
            let near: BTreeSet<usize> = nbrs[l.src].union(&nbrs[l.dst]).copied().collect();
            let expected: Vec<usize> = inst
                .links()
                .iter()
                .enumerate()
                .filter(|&(o, m)| o != k && (near.contains(&m.src) || near.contains(&m.dst)))
                .map(|(o, _)| o)
                .collect();
            assert_eq!(interference_set(&inst, l.src, l.dst).unwrap(), expected, "seed {seed} link {k}");
        }
    }
}

#[test]
fn conflict_graph_is_symmetric_closure() {
    for seed in 0..10 {
        let inst = instance(0.3, seed);
        if inst.num_links() > 40 {
            continue;
        }
        let g = inst.conflict();
        for a in 0..inst.num_links() {
            assert!(!g.conflicts(a, a));
            let la = &inst.links()[a];
            let ia = interference_set(&inst, la.src, la.dst).unwrap();
            for b in 0..inst.num_links() {
                assert_eq!(g.conflicts(a, b), g.conflicts(b, a));
                if ia.contains(&b) {
                    assert!(g.conflicts(a, b));
                }
            }
        }
    }
}

#[test]
fn unknown_link_is_an_error() {
    let inst = instance(0.3, 1);
    assert!(interference_set(&inst, 0, 0).is_err());
}

#[test]
fn edge_list_round_trip() {
    let inst = instance(0.4, 2);
    let text = write_edge_list(&inst);
    let links = parse_edge_list(&text).unwrap();
    assert_eq!(links.len(), inst.num_links());
    for (a, b) in links.iter().zip(inst.links()) {
        assert_eq!((a.src, a.dst), (b.src, b.dst));
        assert_eq!(a.mean_capacity, b.mean_capacity);
        assert!((a.e_tx - b.e_tx).abs() <= 1e-15 * b.e_tx);
    }
    assert!(parse_edge_list("0 1 2").is_err());
}

/// Every maximal independent set by subset enumeration.
fn brute_force_mis(g: &ConflictGraph) -> Vec<Vec<usize>> {
    let l = g.num_links();
    let all: Vec<usize> = (0..l).collect();
    let mut out = Vec::new();
    for mask in 0u32..(1 << l) {
        let set: Vec<usize> = (0..l).filter(|&k| mask & (1 << k) != 0).collect();
        if g.is_maximal_within(&set, &all) {
            out.push(set);
        }
    }
    out.sort();
    out
}

fn graph_strategy() -> impl Strategy<Value = ConflictGraph> {
    (1usize..11).prop_flat_map(|l| {
        proptest::collection::vec(proptest::bool::weighted(0.35), l * l).prop_map(move |bits| {
            let sets: Vec<Vec<usize>> =
                (0..l).map(|a| (0..l).filter(|&b| b != a && bits[a * l + b]).collect()).collect();
            ConflictGraph::from_adjacency(&sets)
        })
    })
}

proptest! {
    #[test]
    fn enumeration_finds_exactly_the_maximal_sets(g in graph_strategy()) {
        let res = maximal_independent_sets(&g, None, 10_000);
        prop_assert!(!res.overflow);
        prop_assert_eq!(res.sets, brute_force_mis(&g));
    }

    #[test]
    fn restricted_enumeration_is_maximal_within_universe(g in graph_strategy(), pick in any::<u16>()) {
        let universe: Vec<usize> = (0..g.num_links()).filter(|&k| pick & (1 << k) != 0).collect();
        let res = maximal_independent_sets(&g, Some(&universe), 10_000);
        for s in &res.sets {
            prop_assert!(s.iter().all(|k| universe.contains(k)));
            prop_assert!(g.is_maximal_within(s, &universe));
        }
    }
}
