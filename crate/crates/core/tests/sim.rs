use inspect_core::model::{derive, Detectability, ModelParams};
use inspect_core::oracle::renewal_payoff;
use inspect_core::payoffs::{policy_cost, ActionStrategy, InspectionPolicy};
use inspect_core::sim::{estimate, simulate_run, simulate_runs, summarize, SimConfig};

fn maintenance_perfect() -> ModelParams {
    ModelParams::from_values(2.0, 1.0, 2.0, 1.25, 0.5, Detectability::Perfect, 0.0).unwrap()
}

fn innovation() -> ModelParams {
    ModelParams::from_values(1.0, 2.0, 2.0, 1.25, 0.5, Detectability::Perfect, 0.0).unwrap()
}

fn cfg(n_runs: usize, seed: u64) -> SimConfig {
    SimConfig { n_runs, seed, ..SimConfig::default() }
}

#[test]
fn quadrupling_runs_halves_the_standard_error() {
    let policy = InspectionPolicy::Exponential { gamma: 1.2 };
    let small = estimate(&policy, &ActionStrategy::AlwaysWork, &maintenance_perfect(), &cfg(5_000, 3)).unwrap();
    let large = estimate(&policy, &ActionStrategy::AlwaysWork, &maintenance_perfect(), &cfg(20_000, 3)).unwrap();
    for (a, b) in [
        (small.mean_cost.std_err, large.mean_cost.std_err),
        (small.mean_agent_payoff.std_err, large.mean_agent_payoff.std_err),
    ] {
        assert!((a / b - 2.0).abs() < 0.2, "{a} / {b}");
    }
}

#[test]
fn report_does_not_depend_on_record_order() {
    let policy = InspectionPolicy::Periodic { tau: 0.5 };
    let strategy = ActionStrategy::ShirkThenWork { t_switch: 0.2 };
    let p = innovation().with_delta(Detectability::Finite(3.0));
    let c = cfg(3_000, 9);
    let forward = simulate_runs(&policy, &strategy, &p, &c).unwrap();
    let mut backward: Vec<_> = (0..c.n_runs as u64)
        .rev()
        .map(|run| simulate_run(&policy, &strategy, &p, &c, run).unwrap())
        .collect();
    let reference = summarize(&forward);
    assert_eq!(summarize(&backward), reference);
    // an interleaved order too
    backward.sort_by_key(|r| (r.run % 7, r.run));
    assert_eq!(summarize(&backward), reference);
    assert_eq!(estimate(&policy, &strategy, &p, &c).unwrap(), reference);
}

#[test]
fn simulated_means_match_closed_forms_across_seeds() {
    let innovation_tau = 0.9485599924429406;
    let cases = [
        (maintenance_perfect(), InspectionPolicy::Exponential { gamma: 1.2 }, ActionStrategy::AlwaysWork),
        (innovation(), InspectionPolicy::Periodic { tau: innovation_tau }, ActionStrategy::AlwaysWork),
        (
            innovation(),
            InspectionPolicy::Periodic { tau: innovation_tau },
            ActionStrategy::ShirkThenWork { t_switch: std::f64::consts::LN_2 },
        ),
        (
            maintenance_perfect().with_delta(Detectability::Finite(5.0)),
            InspectionPolicy::DelayedExponential { tau_hat: 0.358351893845611, pi: 0.6767423789178793, gamma: 2.210526315789474 },
            ActionStrategy::WorkThenShirk { t_switch: 0.3 },
        ),
    ];
    let seeds = 0..20u64;
    let (mut inside, mut total) = (0, 0);
    for (p, policy, strategy) in &cases {
        let d = derive(p).unwrap();
        let payoff = renewal_payoff(policy, p, strategy).unwrap();
        let cost = (*strategy == ActionStrategy::AlwaysWork).then(|| policy_cost(policy, &d).unwrap());
        for seed in seeds.clone() {
            let r = estimate(policy, strategy, p, &cfg(4_000, seed)).unwrap();
            total += 1;
            let mut ok = (r.mean_agent_payoff.mean - payoff).abs() <= 4.0 * r.mean_agent_payoff.std_err;
            if let Some(cost) = cost {
                ok &= (r.mean_cost.mean - cost).abs() <= 4.0 * r.mean_cost.std_err;
            }
            inside += ok as usize;
        }
    }
    assert!(inside as f64 >= 0.99 * total as f64, "{inside} of {total}");
}

#[test]
fn binding_deviation_is_worth_u1_in_simulation() {
    let strategy = ActionStrategy::ShirkThenWork { t_switch: std::f64::consts::LN_2 };
    let policy = InspectionPolicy::Periodic { tau: 0.9485599924429406 };
    let r = estimate(&policy, &strategy, &innovation(), &cfg(200_000, 1)).unwrap();
    let e = r.mean_agent_payoff;
    assert!((e.mean - 1.25).abs() <= 3.0 * e.std_err, "{e:?}");
}

#[test]
fn runs_are_reproducible_individually() {
    let policy = InspectionPolicy::Exponential { gamma: 1.2 };
    let c = cfg(100, 42);
    let all = simulate_runs(&policy, &ActionStrategy::AlwaysWork, &maintenance_perfect(), &c).unwrap();
    for run in [0u64, 17, 99] {
        let one = simulate_run(&policy, &ActionStrategy::AlwaysWork, &maintenance_perfect(), &c, run).unwrap();
        assert_eq!(one, all[run as usize]);
    }
}
