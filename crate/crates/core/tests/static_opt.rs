use mlia_core::lp::PiecewiseLinearConcave;
use mlia_core::net::fixtures::{self, reference_params};
use mlia_core::net::{AppSpec, Instance, LinkSpec, NodeSpec};
use mlia_core::static_opt::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rgg_with_sources(radius: f64, seed: u64) -> Option<Instance> {
    let p = reference_params();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let sources: Vec<bool> = (0..12).map(|_| rng.gen_bool(0.3)).collect();
    fixtures::rgg_instance(12, radius, seed, &p, &sources).ok()
}

#[test]
fn power_of_forwarding_and_processing() {
    let p = reference_params();
    let inst = fixtures::two_node(&p);
    let mut policy = Policy::zero(&inst);
    assert_eq!(node_power(&inst, &policy, 0), 0.0);

    let l = inst.link_id(0, 1).unwrap();
    policy.x[l][0] = 4e6;
    assert!((node_power(&inst, &policy, 0) - 4e6 * 0.4 / 24e6).abs() < 1e-12);

    let mut local = Policy::zero(&inst);
    local.y[0][0] = 4e6 / 3.0;
    assert!((node_power(&inst, &local, 0) - 2.1).abs() < 1e-12);
}

#[test]
fn two_node_program_shape() {
    let p = reference_params();
    let inst = fixtures::two_node(&p);
    let prog = build_static_program(&inst, &StaticConfig::new(0.5)).unwrap();
    // 2 links + 2 processing rates + 1 epigraph + 1 utility auxiliary per node
    assert_eq!(prog.lp.num_vars(), 2 + 2 + 1 + 2);
    assert_eq!(prog.epigraph_vars.len(), 1);
    assert_eq!(prog.utility_vars.len(), 2);
}

#[test]
fn two_node_forwards_everything() {
    let p = reference_params();
    let inst = fixtures::two_node(&p);
    let sol = solve_static(&inst, &StaticConfig::new(1e-4)).unwrap();
    let l = inst.link_id(0, 1).unwrap();
    assert!((sol.policy.x[l][0] - 4e6).abs() < 1e-3);
    assert!(sol.policy.y[0][0].abs() < 1e-3);
    assert!((sol.lifetime - 37_500.0).abs() <= 1.0, "{}", sol.lifetime);
    assert!((sol.weighted_map - 57.9).abs() < 1e-9);
}

#[test]
fn zero_theta_ignores_utility() {
    let p = reference_params();
    let inst = fixtures::chain(&p, 4);
    let sol = solve_static(&inst, &StaticConfig::new(0.0)).unwrap();
    let expected = (1.0 / sol.lifetime).max(0.0);
    assert!((sol.objective - expected).abs() <= 1e-9 * expected.max(1e-12));
}

#[test]
fn zero_demand_has_infinite_lifetime() {
    let p = reference_params();
    let topo = mlia_core::net::generate_rgg(6, 0.6, 3).unwrap();
    let inst = Instance::from_topology(&topo, &p, &[false; 6]).unwrap();
    let sol = solve_static(&inst, &StaticConfig::new(0.3)).unwrap();
    assert!(sol.zero_demand);
    assert!(sol.lifetime.is_infinite());
    assert_eq!(sol.weighted_map, 0.0);
}

#[test]
fn invalid_theta_is_rejected() {
    let inst = fixtures::two_node(&reference_params());
    assert!(solve_static(&inst, &StaticConfig::new(1.5)).is_err());
    assert!(solve_static(&inst, &StaticConfig::new(-0.1)).is_err());
}

#[test]
fn overloaded_network_reports_empty_capacity_region() {
    let mut p = reference_params();
    p.source_rate = 40e6;
    let inst = fixtures::two_node(&p);
    assert!(matches!(
        solve_static(&inst, &StaticConfig::new(0.5)),
        Err(mlia_core::error::SolveError::CapacityRegionEmpty)
    ));
}

#[test]
fn solutions_satisfy_the_constraints() {
    let mut checked = 0;
    for seed in 0..15 {
        let Some(inst) = rgg_with_sources(0.4, seed) else { continue };
        for theta in [1e-8, 1e-4, 0.5, 1.0] {
            match solve_static(&inst, &StaticConfig::new(theta)) {
                Ok(sol) => {
                    let r = policy_residuals(&inst, &sol.policy);
                    assert!(r.max() <= 1e-6, "seed {seed} theta {theta}: {r:?}");
                    checked += 1;
                }
                Err(mlia_core::error::SolveError::CapacityRegionEmpty) => {}
                Err(e) => panic!("seed {seed}: {e}"),
            }
        }
    }
    assert!(checked > 20);
}

#[test]
fn epigraph_is_tight() {
    for seed in 0..10 {
        let Some(inst) = rgg_with_sources(0.4, seed) else { continue };
        let cfg = StaticConfig::new(1e-3);
        let Ok(sol) = solve_static(&inst, &cfg) else { continue };
        // the reported objective must match the program's optimum
        let prog = build_static_program(&inst, &cfg).unwrap();
        let lp = mlia_core::lp::solve_lp(&prog.lp).unwrap();
        assert!((lp.objective - sol.objective).abs() <= 1e-7 * (1.0 + sol.objective.abs()), "seed {seed}");
    }
}

#[test]
fn scaling_energy_scales_lifetime() {
    for seed in 0..8 {
        let Some(inst) = rgg_with_sources(0.4, seed) else { continue };
        let cfg = StaticConfig::new(0.0);
        let Ok(base) = solve_static(&inst, &cfg) else { continue };
        if base.zero_demand {
            continue;
        }
        for k in [0.5, 3.0] {
            let scaled = solve_static(&inst.with_energy_scaled(k), &cfg).unwrap();
            assert!((scaled.lifetime / base.lifetime - k).abs() < 1e-6 * k, "seed {seed} k {k}");
            assert!((scaled.objective * k - base.objective).abs() < 1e-6 * base.objective.abs());
            assert!(policy_residuals(&inst, &scaled.policy).max() <= 1e-6);
        }
    }
}

#[test]
fn theta_trades_lifetime_for_reward() {
    let grid = [1e-8, 1e-6, 1e-5, 1e-4, 1e-2, 0.5, 1.0];
    for seed in 0..10 {
        let Some(inst) = rgg_with_sources(0.35, seed) else { continue };
        let sols: Vec<_> = grid.iter().map(|&t| solve_static(&inst, &StaticConfig::new(t))).collect();
        if sols.iter().any(|s| s.is_err()) {
            continue;
        }
        let sols: Vec<_> = sols.into_iter().map(Result::unwrap).collect();
        for w in sols.windows(2) {
            let inv = |s: &StaticSolution| 1.0 / s.lifetime;
            assert!(inv(&w[1]) >= inv(&w[0]) - 1e-6 * inv(&w[0]), "seed {seed}");
            assert!(w[1].analytics_reward >= w[0].analytics_reward - 1e-6 * w[0].analytics_reward.abs().max(1.0));
        }
    }
}

#[test]
fn relay_with_small_battery_is_avoided() {
    let p = reference_params();
    // relay 1 has a tenth of the battery, the detour costs twice the energy
    let inst = fixtures::two_relay(&p, p.energy_budget / 10.0, 2.0);
    let sol = solve_static(&inst, &StaticConfig::new(1e-8)).unwrap();
    let via_weak = sol.policy.x[inst.link_id(0, 1).unwrap()][0];
    let via_detour = sol.policy.x[inst.link_id(0, 2).unwrap()][0];
    assert!(via_detour > via_weak, "{via_weak} {via_detour}");
    // min-max balance: relay 2 and the weak relay drain at the same pace
    let ratio = |i: usize| sol.per_node_power[i] / inst.nodes()[i].energy_budget;
    assert!((ratio(1) - ratio(2)).abs() < 1e-6 * ratio(2) || ratio(1) < ratio(2));
}

struct ChainCase {
    inst: Instance,
    theta: f64,
}

fn random_chain(seed: u64) -> ChainCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu = 24e6;
    let e_radio = rng.gen_range(1e-8..1e-6);
    let nodes: Vec<NodeSpec> = (0..3)
        .map(|i| NodeSpec {
            id: i,
            position: (i as f64 * 0.1, 0.0),
            proc_capacity: if i == 2 { 40e6 } else { rng.gen_range(5e5..4e6) },
            energy_budget: if i == 2 { f64::INFINITY } else { rng.gen_range(1000.0..3000.0) },
            proc_energy: rng.gen_range(1e-8..2e-6),
            is_gateway: i == 2,
        })
        .collect();
    let link = |src, dst| LinkSpec { src, dst, mean_capacity: mu, e_tx: e_radio, e_rx: e_radio };
    let links = vec![link(0, 1), link(1, 0), link(1, 2), link(2, 1)];
    let lambda = rng.gen_range(1e6..6e6);
    let map: Vec<f64> = (0..3).map(|_| rng.gen_range(10.0..60.0)).collect();
    let app = AppSpec {
        id: 0,
        arrival: vec![lambda, 0.0, 0.0],
        flow_reduction: vec![1e-3; 3],
        proc_demand: vec![1.0; 3],
        utility: map.iter().map(|&m| PiecewiseLinearConcave::linear(m / 4e6).unwrap()).collect(),
    };
    let theta = [1e-6, 1e-4, 1e-2, 0.5][rng.gen_range(0..4)];
    ChainCase { inst: Instance::new(nodes, links, vec![app]).unwrap(), theta }
}

/// Grid search over the two local processing rates with forward-only
/// routing, which is where every optimum of a chain lies.
fn chain_grid_optimum(case: &ChainCase, steps: usize) -> f64 {
    let inst = &case.inst;
    let app = &inst.apps()[0];
    let lambda = app.arrival[0];
    let beta = 1e-3;
    let nodes = inst.nodes();
    let l01 = &inst.links()[0];
    let mu = l01.mean_capacity;
    let y0_max = nodes[0].proc_capacity.min(lambda / (1.0 - beta));
    let mut best = f64::INFINITY;
    for a in 0..=steps {
        let y0 = y0_max * a as f64 / steps as f64;
        let x01 = lambda - (1.0 - beta) * y0;
        let y1_max = nodes[1].proc_capacity.min(x01 / (1.0 - beta));
        for b in 0..=steps {
            let y1 = y1_max * b as f64 / steps as f64;
            let x12 = (x01 - (1.0 - beta) * y1).max(0.0);
            let y2 = x12;
            if x01 / mu + x12 / mu > 1.0 + 1e-12 || y2 > nodes[2].proc_capacity {
                continue;
            }
            let p0 = x01 * l01.e_tx + y0 * nodes[0].proc_energy;
            let p1 = x01 * l01.e_rx + x12 * l01.e_tx + y1 * nodes[1].proc_energy;
            let worst = (p0 / nodes[0].energy_budget).max(p1 / nodes[1].energy_budget);
            let reward = app.utility[0].eval(y0) + app.utility[1].eval(y1) + app.utility[2].eval(y2);
            best = best.min((1.0 - case.theta) * worst - case.theta * reward);
        }
    }
    best
}

#[test]
fn chain_matches_grid_search() {
    let mut compared = 0;
    for seed in 0..30 {
        let case = random_chain(seed);
        let sol = match solve_static(&case.inst, &StaticConfig::new(case.theta)) {
            Ok(s) => s,
            Err(mlia_core::error::SolveError::CapacityRegionEmpty) => continue,
            Err(e) => panic!("{e}"),
        };
        let coarse = chain_grid_optimum(&case, 100);
        let fine = chain_grid_optimum(&case, 400);
        // the program optimizes over a superset of the grid
        assert!(sol.objective <= fine + 1e-9 * fine.abs().max(1e-9), "seed {seed}");
        // and the grid converges onto it
        let gap_fine = fine - sol.objective;
        let gap_coarse = coarse - sol.objective;
        assert!(gap_fine <= gap_coarse + 1e-12 && gap_fine <= 0.02 * fine.abs().max(1e-6), "seed {seed}: {gap_fine}");
        compared += 1;
    }
    assert!(compared >= 20);
}
