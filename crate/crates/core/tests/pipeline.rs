use harq_noma::model::{average_power, LinkParams, PowerSchedule, QosSpec};
use harq_noma::monte_carlo::{simulate_episode_power, simulate_user2_outage};
use harq_noma::outage::{user2_outage_closed, User2OutageInput};
use harq_noma::pairing::{cost_matrix, permutation_oracle, sample_placement, swap_matching, PairCostParams};
use harq_noma::sca::{
    epa_baseline, full_average_power, min_rounds, model_objective, model_outage, model_violation, optimize,
    ScaParams,
};

fn link(d: f64) -> LinkParams {
    LinkParams::new(d, 2.0, 0.1).unwrap()
}

fn params(rounds: usize, delta: f64, p_max: f64) -> ScaParams {
    ScaParams::new(
        rounds,
        link(10.0),
        link(4.0),
        QosSpec::new(0.2, delta).unwrap(),
        QosSpec::new(1.0, delta).unwrap(),
        p_max,
    )
    .unwrap()
}

#[test]
fn optimized_schedule_is_feasible_and_beats_equal_power() {
    for t in 1..=3 {
        let p = params(t, 0.1, 40.0);
        let out = optimize(&p).unwrap().unwrap();
        assert!(model_violation(&p, &out.schedule).is_none());
        assert_eq!(model_objective(&p, &out.schedule), out.objective);
        let (_, epa) = epa_baseline(&p, 0.2).unwrap().unwrap();
        assert!(out.objective <= epa + 1e-9, "T={t}: {} vs {epa}", out.objective);
    }
}

#[test]
fn optimized_outage_holds_in_simulation() {
    let p = params(2, 0.1, 40.0);
    let s = optimize(&p).unwrap().unwrap().schedule;
    let gain2 = p.link2.gain();
    let closed = user2_outage_closed(&User2OutageInput::new(s.p2().to_vec(), gain2, 1.0, 10).unwrap()).unwrap();
    assert!((closed.raw - model_outage(&p, &s)).abs() < 1e-12);
    // The model bounds the own-signal stage only; a zero first-stage target
    // switches the SIC stage off in simulation.
    let own = simulate_user2_outage(&s, gain2, 0.0, 1.0, 1_000_000, 21).unwrap();
    assert!(own.estimate <= 0.1 + 3.0 * own.stderr + 2e-3, "{own:?}");
    // With p1 = γ1 p2 the SIC stage itself fails often, which the model ignores.
    let both = simulate_user2_outage(&s, gain2, 0.2, 1.0, 1_000_000, 21).unwrap();
    assert!(both.estimate > 0.3, "{both:?}");
}

#[test]
fn ratio_tight_schedule_always_retransmits_once() {
    // p1 = γ1 p2 leaves the weak user below target after one round, so the
    // second round is always sent and the full average power is exact.
    let p = params(2, 0.1, 40.0);
    let s = optimize(&p).unwrap().unwrap().schedule;
    let full = full_average_power(&p, &s).unwrap();
    let direct = average_power(&s, &[1.0, 1.0]).unwrap();
    assert!((full - direct).abs() <= 1e-9 * direct);
    let mc = simulate_episode_power(&s, p.link1.gain(), p.link2.gain(), 0.2, 1.0, 100_000, 4).unwrap();
    assert!((mc.estimate - direct).abs() <= 1e-9 * direct, "{mc:?} vs {direct}");
}

#[test]
fn episode_power_matches_full_average_power() {
    let p = params(3, 0.1, 40.0);
    let s = PowerSchedule::new(vec![6.0, 8.0, 10.0], vec![2.0, 2.0, 3.0]).unwrap();
    let full = full_average_power(&p, &s).unwrap();
    let mc = simulate_episode_power(&s, p.link1.gain(), p.link2.gain(), 0.2, 1.0, 1_000_000, 8).unwrap();
    assert!((mc.estimate - full).abs() / full <= 0.05, "{mc:?} vs {full}");
}

#[test]
fn fewer_rounds_needed_with_looser_target() {
    let loose = min_rounds(&params(1, 0.1, 10.0), 5).unwrap().0;
    let tight = min_rounds(&params(1, 0.001, 10.0), 5).unwrap().0;
    assert!(loose <= tight);
    assert!(tight >= 2);
}

#[test]
fn matching_pipeline_on_a_small_cell() {
    let placement = sample_placement(3, 4.0, 10.0, 12).unwrap();
    let pc = PairCostParams {
        rounds: 2,
        path_loss_exponent: 2.0,
        noise_power: 0.1,
        qos_cu: QosSpec::new(1.0, 0.1).unwrap(),
        qos_eu: QosSpec::new(0.2, 0.1).unwrap(),
        pair_power: 40.0 / 3.0,
        sca_tolerance: None,
        sca_max_outer_iterations: None,
    };
    let costs = cost_matrix(&placement, &pc).unwrap();
    let matched = swap_matching(&costs);
    let oracle = permutation_oracle(&costs).unwrap();
    assert!(matched.total_cost >= oracle.total_cost);
    assert!(matched.total_cost <= 1.03 * oracle.total_cost);
    assert_eq!(costs, cost_matrix(&placement, &pc).unwrap());
}
