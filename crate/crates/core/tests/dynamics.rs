use agc_core::demos::{self, Example};
use agc_core::graph::Topology;
use agc_core::sim::{self, consensus_function, InitialStates, SimConfig};
use agc_core::synthesis::design;
use agc_core::tolerances::Tolerances;
use agc_core::verify::analyze;
use proptest::prelude::*;

fn seeded(seed: u64, t_final: f64) -> SimConfig {
    let mut cfg = SimConfig::new(InitialStates::Seeded { seed, low: -1.0, high: 1.0 });
    cfg.t_final = t_final;
    cfg
}

// The network average obeys the open-loop plant for any symmetric coupling.
#[test]
fn average_follows_open_loop_plant() {
    let tol = Tolerances::default();
    let plant = demos::plant(Example::One);
    let gains = design(&plant, demos::EXAMPLE1_DEMO_GAMMA, Example::One.mode(), &tol).unwrap();
    let topo = Topology::path(5).unwrap();
    let trace = sim::run(&seeded(3, 1.0), &plant, &gains, &topo).unwrap();
    let d = plant.state_dim();
    for s in trace.samples.iter().step_by(10) {
        let mut mean = vec![0.0; d];
        for i in 0..5 {
            for j in 0..d {
                mean[j] += s.state.x[i * d + j] / 5.0;
            }
        }
        let expect = consensus_function(plant.a(), &trace.initial_states, 5, s.state.t);
        for j in 0..d {
            assert!((mean[j] - expect[j]).abs() < 1e-7, "t={} {mean:?} vs {expect:?}", s.state.t);
        }
    }
}

// Path and star graphs are slower to agree within 3 s but the cost bound
// must still dominate.
#[test]
fn bound_dominates_on_sparse_families() {
    let tol = Tolerances::default();
    let plant = demos::plant(Example::One);
    let gains = design(&plant, demos::EXAMPLE1_DEMO_GAMMA, Example::One.mode(), &tol).unwrap();
    for i in 0..8u64 {
        let n = 3 + (i as usize) % 4;
        let topo = if i % 2 == 0 { Topology::path(n) } else { Topology::star(n) }.unwrap();
        let trace = sim::run(&seeded(200 + i, 3.0), &plant, &gains, &topo).unwrap();
        let r = analyze(&trace, &plant, &gains, &topo, &tol).unwrap();
        assert!(r.realized_cost <= r.bound, "run {i}: {} > {}", r.realized_cost, r.bound);
        assert!(r.weights_monotone, "run {i}");
        assert!(r.final_disagreement < r.initial_disagreement, "run {i}");
    }
}

#[test]
fn leader_follower_bound_dominates_on_demo_topology() {
    let tol = Tolerances::default();
    let setup = demos::setup(Example::Two);
    let gains = design(&setup.plant, setup.gamma, Example::Two.mode(), &tol).unwrap();
    for seed in 0..4 {
        let trace = sim::run(&seeded(seed, 2.0), &setup.plant, &gains, &setup.topology).unwrap();
        let r = analyze(&trace, &setup.plant, &gains, &setup.topology, &tol).unwrap();
        assert!(r.realized_cost <= r.bound, "seed {seed}");
        assert!(r.weights_monotone);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn realized_cost_is_nondecreasing(seed in 0u64..1000, n in 2usize..6) {
        let tol = Tolerances::default();
        let plant = demos::plant(Example::One);
        let gains = design(&plant, demos::EXAMPLE1_DEMO_GAMMA, Example::One.mode(), &tol).unwrap();
        let topo = Topology::cycle(n.max(3)).unwrap();
        let trace = sim::run(&seeded(seed, 0.5), &plant, &gains, &topo).unwrap();
        for pair in trace.samples.windows(2) {
            prop_assert!(pair[1].state.j_realized >= pair[0].state.j_realized);
            prop_assert!(pair[1].state.j_bound_integral >= pair[0].state.j_bound_integral);
        }
    }
}
