use mlia_core::net::fixtures::{self, reference_params};
use mlia_core::net::{Instance, REWARD_PER_MAP_POINT};
use mlia_core::online::*;
use mlia_core::static_opt::{solve_static, Policy, StaticConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// First source draw on the seed-`seed` RGG whose static program is feasible;
/// `None` when the topology itself is disconnected.
fn try_feasible_rgg(n: usize, radius: f64, seed: u64) -> Option<Instance> {
    let p = reference_params();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51);
    for _ in 0..200 {
        let sources: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        let inst = fixtures::rgg_instance(n, radius, seed, &p, &sources).ok()?;
        if solve_static(&inst, &StaticConfig::new(1e-5)).is_ok() {
            return Some(inst);
        }
    }
    panic!("no feasible source draw for seed {seed}");
}

fn feasible_rgg(n: usize, radius: f64, seed: u64) -> Instance {
    try_feasible_rgg(n, radius, seed).expect("connected topology")
}

fn zero_sources(inst: &Instance) -> bool {
    inst.total_arrival() == 0.0
}

#[test]
fn zero_spread_keeps_mean_capacities() {
    let inst = feasible_rgg(10, 0.4, 1);
    let cfg = StochasticConfig { capacity_spread: 0.0, ..StochasticConfig::default() };
    let mut streams = RealizationStreams::new(5);
    for _ in 0..50 {
        let slot = sample_slot(&inst, &cfg, &mut streams);
        for (l, link) in inst.links().iter().enumerate() {
            assert_eq!(slot.link_capacity[l], link.mean_capacity);
        }
    }
}

#[test]
fn realizations_stay_in_their_ranges() {
    let inst = feasible_rgg(10, 0.4, 2);
    let cfg = StochasticConfig::default();
    let mut streams = RealizationStreams::new(9);
    for _ in 0..200 {
        let slot = sample_slot(&inst, &cfg, &mut streams);
        for (l, link) in inst.links().iter().enumerate() {
            let r = slot.link_capacity[l] / link.mean_capacity;
            assert!((0.75..=1.25).contains(&r), "{r}");
        }
        for (i, node) in inst.nodes().iter().enumerate() {
            assert_eq!(slot.proc_capacity[i], node.proc_capacity);
            let f = slot.utility_factor[i][0];
            assert!((0.8..=1.2).contains(&f), "{f}");
            let bits = slot.arrivals[i][0];
            assert_eq!(bits % cfg.frame_bits, 0.0);
            if inst.apps()[0].arrival[i] == 0.0 {
                assert_eq!(bits, 0.0);
            }
        }
    }
}

#[test]
fn poisson_arrivals_have_the_right_mean() {
    let inst = fixtures::two_node(&reference_params());
    let cfg = StochasticConfig::default();
    let mut streams = RealizationStreams::new(17);
    let slots = 10_000;
    let total: f64 = (0..slots).map(|_| sample_slot(&inst, &cfg, &mut streams).arrivals[0][0]).sum();
    let mean = total / slots as f64;
    // one frame per slot: the sample mean has standard deviation 4e6/√10000
    let sigma = 4e6 / (slots as f64).sqrt();
    assert!((mean - 4e6).abs() <= 3.0 * sigma, "{mean}");
}

#[test]
fn realizations_are_reproducible() {
    let inst = feasible_rgg(10, 0.4, 3);
    let cfg = StochasticConfig::default();
    let draw = |seed| {
        let mut s = RealizationStreams::new(seed);
        (0..20).map(|_| sample_slot(&inst, &cfg, &mut s)).collect::<Vec<_>>()
    };
    assert_eq!(draw(4), draw(4));
    assert_ne!(draw(4), draw(5));
}

fn three_chain_action(inst: &Instance) -> (Policy, SlotRealization) {
    let mut action = Policy::zero(inst);
    action.x[inst.link_id(0, 1).unwrap()][0] = 2e6;
    action.x[inst.link_id(1, 2).unwrap()][0] = 3e6;
    let mut arrivals = vec![vec![0.0]; 3];
    arrivals[0][0] = 4e6;
    let slot = SlotRealization {
        arrivals,
        link_capacity: inst.links().iter().map(|l| l.mean_capacity).collect(),
        proc_capacity: inst.nodes().iter().map(|v| v.proc_capacity).collect(),
        utility_factor: vec![vec![1.0]; 3],
    };
    (action, slot)
}

#[test]
fn dual_update_by_hand() {
    let inst = fixtures::chain(&reference_params(), 3);
    let (action, slot) = three_chain_action(&inst);
    let dual = DualState::new(&inst, 1e-3).unwrap();
    let next = dual_update(&dual, &inst, &slot, &action, 1.0);
    assert!((next.nu[0][0] - 2000.0).abs() < 1e-9);
    assert!((next.nu[1][0] + 1000.0).abs() < 1e-9);
    assert_eq!(next.nu[2][0], 0.0);
    assert_eq!(next.t, 1);
}

#[test]
fn idle_slot_leaves_duals_unchanged() {
    let inst = fixtures::chain(&reference_params(), 3);
    let (_, mut slot) = three_chain_action(&inst);
    slot.arrivals[0][0] = 0.0;
    let mut dual = DualState::new(&inst, 1e-2).unwrap();
    dual.nu[0][0] = 3.5;
    dual.nu[1][0] = -1.25;
    let next = dual_update(&dual, &inst, &slot, &Policy::zero(&inst), 4e6);
    assert_eq!(next.nu, dual.nu);
}

#[test]
fn invalid_step_size_is_rejected() {
    let inst = fixtures::two_node(&reference_params());
    assert!(DualState::new(&inst, 0.0).is_err());
    assert!(DualState::new(&inst, -1e-3).is_err());
}

#[test]
fn zero_prices_and_zero_theta_give_the_idle_action() {
    let inst = feasible_rgg(20, 0.25, 4);
    let cfg = OnlineConfig::new(0.0);
    let dual = DualState::new(&inst, 1e-3).unwrap();
    let mut streams = RealizationStreams::new(1);
    let slot = sample_slot(&inst, &cfg.stochastic, &mut streams);
    let action = slot_action(&inst, &cfg, &dual, &slot).unwrap();
    assert!(action.policy.x.iter().flatten().all(|&v| v == 0.0));
    assert!(action.policy.y.iter().flatten().all(|&v| v == 0.0));
    assert!(action.lagrangian.abs() < 1e-15);
}

/// Two nodes, θ = 0: sending one flow unit costs `e_tx·F/E` in the energy
/// term and earns the source price, so the link saturates exactly when the
/// price exceeds that cost.
#[test]
fn source_saturates_above_the_energy_price() {
    let p = reference_params();
    let inst = fixtures::two_node(&p);
    let cfg = OnlineConfig::new(0.0);
    let threshold = p.e_tx * cfg.flow_unit / p.energy_budget;
    let mut streams = RealizationStreams::new(8);
    let slot = sample_slot(&inst, &cfg.stochastic, &mut streams);
    let l = inst.link_id(0, 1).unwrap();
    for (factor, saturated) in [(1.05, true), (0.95, false), (3.0, true), (0.2, false)] {
        let mut dual = DualState::new(&inst, 1.0).unwrap();
        dual.nu[0][0] = factor * threshold;
        let action = slot_action(&inst, &cfg, &dual, &slot).unwrap();
        let expected = if saturated { slot.link_capacity[l] } else { 0.0 };
        assert!((action.policy.x[l][0] - expected).abs() <= 1e-6 * slot.link_capacity[l], "{factor}");
        // processing locally costs far more than the price pays
        assert_eq!(action.policy.y[0][0], 0.0);
        // the gateway never sends
        assert_eq!(action.policy.x[inst.link_id(1, 0).unwrap()][0], 0.0);
    }
}

#[test]
fn max_flow_starts_idle_and_follows_pressure() {
    let inst = feasible_rgg(20, 0.25, 5);
    let mut cfg = OnlineConfig::new(1e-5);
    cfg.max_slots = 1;
    cfg.record_actions = true;
    let trace = run_episode(&inst, &cfg, 1e-3, PolicyKind::MaxFlow, 3).unwrap();
    assert!(trace.actions[0].x.iter().flatten().all(|&v| v == 0.0));
    assert!(trace.actions[0].y.iter().flatten().all(|&v| v == 0.0));

    let two = fixtures::two_node(&reference_params());
    let mut solver = SlotSolver::new(&two, &cfg, PolicyKind::MaxFlow);
    let mut dual = DualState::new(&two, 1.0).unwrap();
    dual.nu[0][0] = 1e-6;
    let mut streams = RealizationStreams::new(2);
    let slot = sample_slot(&two, &cfg.stochastic, &mut streams);
    let action = solver.action(&two, &cfg, &dual, &slot).unwrap();
    let l = two.link_id(0, 1).unwrap();
    assert!((action.policy.x[l][0] - slot.link_capacity[l]).abs() <= 1e-6 * slot.link_capacity[l]);
}

#[test]
fn deterministic_forwarding_lifetime() {
    let p = reference_params();
    let inst = fixtures::two_node(&p);
    let mut cfg = OnlineConfig::new(1e-5);
    cfg.stochastic = StochasticConfig::deterministic();
    cfg.max_slots = 40_000;
    let plan = run_episode(&inst, &cfg, 1e-3, PolicyKind::MinEnergy, 0).unwrap();
    // 2500 J / (4e6 bit × 0.4 W / 24e6 bit/s) per slot
    assert_eq!(plan.lifetime, 37_500);
    assert_eq!(plan.death_node, Some(0));

    // A single bottleneck, so the controller forwards the same traffic, plus
    // the frames it sends ahead while ν falls from 0 to the level where the
    // gateway reward θ·ω' is priced out: |ν|/α frames in total.
    let mlia = run_episode(&inst, &cfg, 1e-3, PolicyKind::Mlia, 0).unwrap();
    let nu = mlia.final_nu[0][0];
    let reward = 1e-5 * fixtures::GATEWAY_MAP * REWARD_PER_MAP_POINT;
    let cost = p.e_tx * cfg.flow_unit / p.energy_budget;
    assert!((1e-3 * nu + reward - cost).abs() < 2e-5, "{nu}");
    let ahead = -nu / 1e-3;
    assert!((mlia.lifetime as f64 + ahead - 37_500.0).abs() < 10.0, "{} {ahead}", mlia.lifetime);
    assert!(mlia.identity_holds());
}

#[test]
fn controller_spares_the_weak_relay() {
    let p = reference_params();
    let inst = fixtures::two_relay(&p, 250.0, 2.0);
    let mut cfg = OnlineConfig::new(1e-5);
    cfg.stochastic = StochasticConfig::deterministic();
    cfg.max_slots = 20_000;
    let plan = run_episode(&inst, &cfg, 1e-3, PolicyKind::MinEnergy, 0).unwrap();
    let mlia = run_episode(&inst, &cfg, 1e-3, PolicyKind::Mlia, 0).unwrap();
    // min-energy burns relay 1: 250 J at 2 × 0.4 W × 4e6/24e6
    assert_eq!(plan.death_node, Some(1));
    assert!((plan.lifetime as f64 - 1875.0).abs() <= 1.0, "{}", plan.lifetime);
    assert!(mlia.lifetime > 3 * plan.lifetime, "{} vs {}", mlia.lifetime, plan.lifetime);
    assert_ne!(mlia.death_node, Some(1));
}

#[test]
fn zero_demand_runs_to_the_slot_cap() {
    let p = reference_params();
    let topo = mlia_core::net::generate_rgg(8, 0.5, 2).unwrap();
    let inst = Instance::from_topology(&topo, &p, &[false; 8]).unwrap();
    assert!(zero_sources(&inst));
    let mut cfg = OnlineConfig::new(1e-5);
    cfg.max_slots = 1500;
    for kind in PolicyKind::ALL {
        let trace = run_episode(&inst, &cfg, 1e-3, kind, 1).unwrap();
        assert_eq!(trace.lifetime, 1500, "{kind}");
        assert_eq!(trace.death_node, None);
    }
}

fn check_invariants(inst: &Instance, cfg: &OnlineConfig, trace: &EpisodeTrace) {
    let mut streams = RealizationStreams::new(trace.seed);
    let conflict = inst.conflict();
    let mut prev_battery = f64::INFINITY;
    for (t, action) in trace.actions.iter().enumerate() {
        let slot = sample_slot(inst, &cfg.stochastic, &mut streams);
        let active = action.active_links();
        assert!(conflict.is_independent(&active), "slot {t}: {active:?}");
        for l in 0..inst.num_links() {
            assert!(action.link_rate(l) <= slot.link_capacity[l] * (1.0 + 1e-9));
        }
        for i in 0..inst.num_nodes() {
            assert!(action.y[i][0] <= slot.proc_capacity[i] * (1.0 + 1e-9));
        }
        assert!(action.x.iter().chain(&action.y).flatten().all(|&v| v >= 0.0));
        let b = trace.slots[t].min_battery;
        assert!(b <= prev_battery && b >= 0.0);
        prev_battery = b;
    }
    for i in inst.energy_nodes() {
        assert!(trace.batteries[i] >= 0.0);
    }
    if let (Some(i), Some(demand)) = (trace.death_node, trace.death_demand) {
        assert!(demand > trace.batteries[i]);
    }
    assert!(trace.identity_holds(), "{}", trace.identity_error);
}

#[test]
fn episodes_respect_interference_capacity_and_energy() {
    let inst = feasible_rgg(20, 0.25, 7);
    let mut cfg = OnlineConfig::new(1e-5);
    cfg.record_actions = true;
    cfg.max_slots = 400;
    for kind in PolicyKind::ALL {
        let trace = run_episode(&inst, &cfg, 1e-3, kind, 11).unwrap();
        check_invariants(&inst, &cfg, &trace);
    }
}

#[test]
fn duals_telescope() {
    let inst = feasible_rgg(20, 0.25, 8);
    let mut cfg = OnlineConfig::new(1e-5);
    cfg.max_slots = 700;
    for alpha in [1e-2, 1e-3, 1e-4] {
        let trace = run_episode(&inst, &cfg, alpha, PolicyKind::Mlia, 2).unwrap();
        assert!(trace.identity_holds(), "{}", trace.identity_error);
        for (nu, s) in trace.final_nu.iter().flatten().zip(trace.excess_sum.iter().flatten()) {
            assert!((nu - alpha * s).abs() <= 1e-9 * (alpha * s).abs().max(1.0));
        }
    }
}

#[test]
fn episodes_are_deterministic() {
    let inst = feasible_rgg(20, 0.25, 9);
    let mut cfg = OnlineConfig::new(1e-5);
    cfg.max_slots = 300;
    let csv = |trace: &EpisodeTrace| {
        let mut buf = Vec::new();
        trace.write_csv(&mut buf, true).unwrap();
        buf
    };
    for kind in PolicyKind::ALL {
        let a = run_episode(&inst, &cfg, 1e-3, kind, 21).unwrap();
        let b = run_episode(&inst, &cfg, 1e-3, kind, 21).unwrap();
        assert_eq!(a.slots, b.slots);
        assert_eq!(csv(&a), csv(&b));
    }
}

#[test]
fn csv_has_the_documented_columns() {
    let inst = fixtures::two_node(&reference_params());
    let mut cfg = OnlineConfig::new(1e-5);
    cfg.max_slots = 3;
    cfg.reference_objective = Some(0.0);
    let trace = run_episode(&inst, &cfg, 1e-3, PolicyKind::Mlia, 0).unwrap();
    let mut buf = Vec::new();
    trace.write_csv(&mut buf, true).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "slot,policy,gap_norm,congestion,min_battery_J,active_links,processed_bits,forwarded_bits");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("1,mlia,"));
    assert!(lines.iter().skip(1).all(|l| l.split(',').count() == 8));
    let json = serde_json::to_string(&trace.summary()).unwrap();
    assert!(json.contains("\"lifetime_slots\":3"));
}

#[test]
fn noiseless_bound_is_alpha_epsilon_one() {
    let p = reference_params();
    let inst = fixtures::two_relay(&p, 1000.0, 2.0);
    let mut cfg = OnlineConfig::new(1e-3);
    cfg.stochastic = StochasticConfig::deterministic();
    cfg.max_slots = 800;
    let st = solve_static(&inst, &cfg.static_config()).unwrap();
    for alpha in [1e-2, 5e-3] {
        let trace = run_episode(&inst, &cfg, alpha, PolicyKind::Mlia, 0).unwrap();
        let d = theorem_diagnostics(&inst, &cfg, &trace, st.objective);
        assert_eq!(d.epsilon2, 0.0);
        assert!((d.bound - alpha * d.epsilon1).abs() <= 1e-15 * d.bound.max(1.0));
        assert!(d.identity_holds);
        let avg = running_average_gap(&trace, st.objective);
        assert!((avg.last().unwrap() - d.average_gap).abs() < 1e-12);
    }
}

#[test]
fn utility_noise_bound() {
    let u = NoisyUtility { base: fixtures::frame_utility(40.0, 4e6), noise: 0.2 };
    assert!((u.error_bound(8e6) - 0.16).abs() < 1e-12);
    for f in [0.8, 1.0, 1.2] {
        for y in [0.0, 1e6, 8e6] {
            assert!((u.eval(y, f) - u.base.eval(y)).abs() <= u.error_bound(8e6) + 1e-12);
        }
    }
}

#[test]
fn policy_names_round_trip() {
    for kind in PolicyKind::ALL {
        assert_eq!(kind.name().parse::<PolicyKind>().unwrap(), kind);
    }
    assert!("greedy".parse::<PolicyKind>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn random_episodes_keep_their_invariants(seed in 0u64..1000, radius in 0.25f64..0.45) {
        let inst = try_feasible_rgg(14, radius, seed);
        prop_assume!(inst.is_some());
        let inst = inst.unwrap();
        let mut cfg = OnlineConfig::new(1e-5);
        cfg.record_actions = true;
        cfg.max_slots = 150;
        let trace = run_episode(&inst, &cfg, 1e-3, PolicyKind::Mlia, seed).unwrap();
        check_invariants(&inst, &cfg, &trace);
    }
}
