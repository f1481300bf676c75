use chanlab::solvers::oracle::{brute_force_oracle, OracleObjective};
use chanlab::{
    max_output_pnorm, min_output_entropy, random_channel, tensor_channel, OptimizerConfig,
    SchattenP,
};

fn cfg() -> OptimizerConfig {
    OptimizerConfig::default().with_restarts(24)
}

#[test]
fn minimal_output_entropy_is_subadditive_on_qubit_pairs() {
    for k in 0..4u64 {
        let phi = random_channel(2, 2, 4, 100 + k).unwrap();
        let omega = random_channel(2, 2, 3, 200 + k).unwrap();
        let pair = min_output_entropy(&tensor_channel(&phi, &omega), &cfg())
            .unwrap()
            .value;
        let sum = min_output_entropy(&phi, &cfg()).unwrap().value
            + min_output_entropy(&omega, &cfg()).unwrap().value;
        assert!(pair <= sum + 2e-4, "pair {pair} > {sum}");
    }
}

#[test]
fn maximal_output_norm_is_supermultiplicative_on_qubit_pairs() {
    for pv in [1.5, 2.0, 4.0] {
        let p = SchattenP::new(pv).unwrap();
        for k in 0..3u64 {
            let phi = random_channel(2, 2, 4, 300 + k).unwrap();
            let omega = random_channel(2, 2, 2, 400 + k).unwrap();
            let pair = max_output_pnorm(&tensor_channel(&phi, &omega), p, &cfg())
                .unwrap()
                .value;
            let prod = max_output_pnorm(&phi, p, &cfg()).unwrap().value
                * max_output_pnorm(&omega, p, &cfg()).unwrap().value;
            assert!(pair >= prod - 1e-5, "p={pv}: {pair} < {prod}");
        }
    }
}

#[test]
fn solvers_are_never_beaten_by_the_oracle() {
    let p2 = SchattenP::new(2.0).unwrap();
    for (din, dout, env) in [(3, 2, 3), (3, 3, 2), (4, 2, 4)] {
        let phi = random_channel(din, dout, env, 500 + din as u64).unwrap();
        let s = min_output_entropy(&phi, &cfg()).unwrap().value;
        let o = brute_force_oracle(&phi, OracleObjective::Moe, 20_000, 1).unwrap();
        assert!(s <= o + 1e-9, "moe {s} vs oracle {o}");
        let s = max_output_pnorm(&phi, p2, &cfg()).unwrap().value;
        let o = brute_force_oracle(&phi, OracleObjective::PNorm(p2), 20_000, 2).unwrap();
        assert!(s >= o - 1e-9, "nu_2 {s} vs oracle {o}");
    }
}

#[test]
fn identical_seeds_give_identical_optima() {
    let phi = random_channel(3, 2, 3, 600).unwrap();
    let a = min_output_entropy(&phi, &cfg().with_seed(3)).unwrap();
    let b = min_output_entropy(&phi, &cfg().with_seed(3)).unwrap();
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    assert_eq!(
        a.argument.pure_state().unwrap().amplitudes(),
        b.argument.pure_state().unwrap().amplitudes()
    );
    assert!(a.restarts_agreeing >= 1 && a.restarts_agreeing <= 24);
}
