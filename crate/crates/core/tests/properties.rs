use chanlab::channel::tensor_apply_pure;
use chanlab::extension::{embed_input, embed_input_at};
use chanlab::matrix::{partial_trace, schatten_norm, tensor, vec_norm, ComplexMatrix, C64};
use chanlab::random::{random_density_matrix, random_pure_state, rng};
use chanlab::{
    bistochastic_extension, build_weyl, random_channel, tensor_channel, unital_extension,
    von_neumann_entropy, Channel, DensityMatrix, GroupElement, SchattenP, Subsystem,
};
use proptest::prelude::*;

fn channel_dims() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (1usize..=4, 1usize..=4, any::<u64>()).prop_flat_map(|(din, dout, seed)| {
        let min_env = din.div_ceil(dout);
        (Just(din), Just(dout), min_env..=8, Just(seed))
    })
}

fn state_spectrum_ok(rho: &ComplexMatrix) -> bool {
    (rho.trace().re - 1.0).abs() < 1e-10
        && rho.hermitian_residual() < 1e-12
        && rho.eigvalsh()[0] > -1e-10
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_channels_are_trace_preserving_and_map_states_to_states((din, dout, env, seed) in channel_dims(), s in any::<u64>()) {
        let ch = random_channel(din, dout, env, seed).unwrap();
        let rep = ch.validate();
        prop_assert!(rep.valid, "{:?}", rep.problems);
        prop_assert!(rep.tp_residual <= 1e-10);
        let rho = random_density_matrix(din, din, &mut rng(s));
        let out = ch.apply(&rho).unwrap();
        prop_assert!(state_spectrum_ok(out.matrix()));
    }

    #[test]
    fn entropy_is_between_zero_and_log_dimension(d in 1usize..=8, rank in 1usize..=8, s in any::<u64>()) {
        let rho = random_density_matrix(d, rank, &mut rng(s));
        let e = von_neumann_entropy(&rho);
        prop_assert!(e >= 0.0 && e <= (d as f64).ln() + 1e-12);
        let psi = random_pure_state(d, &mut rng(s ^ 1));
        prop_assert!(von_neumann_entropy(&psi.projector()).abs() < 1e-10);
    }

    #[test]
    fn schatten_norms_decrease_in_p(d in 1usize..=6, s in any::<u64>(), p in 1.0f64..4.0, dq in 0.0f64..4.0) {
        let rho = random_density_matrix(d, d, &mut rng(s));
        let lo = schatten_norm(rho.matrix(), SchattenP::new(p).unwrap()).unwrap();
        let hi = schatten_norm(rho.matrix(), SchattenP::new(p + dq).unwrap()).unwrap();
        let inf = schatten_norm(rho.matrix(), SchattenP::Infinity).unwrap();
        prop_assert!(hi <= lo + 1e-12);
        prop_assert!(inf <= hi + 1e-12);
        prop_assert!((schatten_norm(rho.matrix(), SchattenP::new(1.0).unwrap()).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn partial_trace_inverts_tensor(a in 1usize..=4, b in 1usize..=4, s in any::<u64>()) {
        let mut r = rng(s);
        let x = random_density_matrix(a, a, &mut r);
        let y = random_density_matrix(b, b, &mut r);
        let xy = x.tensor(&y);
        prop_assert!(partial_trace(&xy, Subsystem::First, (a, b)).unwrap().matrix().max_abs_diff(x.matrix()) < 1e-12);
        prop_assert!(partial_trace(&xy, Subsystem::Second, (a, b)).unwrap().matrix().max_abs_diff(y.matrix()) < 1e-12);
    }

    #[test]
    fn weyl_twirl_is_complete_noise(d in 1usize..=6, s in any::<u64>()) {
        let weyl = build_weyl(d).unwrap();
        let rho = random_density_matrix(d, 1 + (s as usize % d), &mut rng(s));
        let out = weyl.twirl(&rho).unwrap();
        prop_assert!(out.matrix().max_abs_diff(DensityMatrix::maximally_mixed(d).matrix()) <= 1e-12);
    }

    #[test]
    fn weyl_operators_are_unitary(d in 1usize..=6, idx in any::<usize>()) {
        let weyl = build_weyl(d).unwrap();
        let z = GroupElement::from_index(idx % (d * d), d);
        let w = weyl.op(z).unwrap();
        prop_assert!((&w.adjoint() * w).max_abs_diff(&ComplexMatrix::identity(d)) < 1e-12);
    }

    #[test]
    fn bistochastic_extension_embeds_and_covaries(c in 1usize..=3, d in 1usize..=3, seed in any::<u64>(), s in any::<u64>()) {
        let phi = random_channel(c, d, c * d, seed).unwrap();
        let prime = bistochastic_extension(&phi);
        prop_assert_eq!((prime.dim_in(), prime.dim_out()), (d * d * c, d));
        prop_assert!(prime.validate().unitality_residual <= 1e-10);
        let rho = random_density_matrix(c, c, &mut rng(s));
        let want = phi.apply(&rho).unwrap();
        prop_assert!(prime.apply(&embed_input(&rho, d)).unwrap().matrix().max_abs_diff(want.matrix()) <= 1e-12);
        let weyl = build_weyl(d).unwrap();
        let z = GroupElement::from_index(s as usize % (d * d), d);
        let got = prime.apply(&embed_input_at(&rho, d, z).unwrap()).unwrap();
        prop_assert!(got.matrix().max_abs_diff(&weyl.op(z).unwrap().conjugate(want.matrix())) <= 1e-12);
    }

    #[test]
    fn unital_extension_shifts_entropy_by_log_cd(c in 1usize..=2, d in 1usize..=3, seed in any::<u64>(), s in any::<u64>()) {
        let phi = random_channel(c, d, c * d, seed).unwrap();
        let prime = bistochastic_extension(&phi);
        let unital = unital_extension(&phi);
        prop_assert_eq!(unital.dim_in(), unital.dim_out());
        prop_assert!(unital.validate().unitality_residual <= 1e-10);
        let n = prime.dim_in();
        let rho = random_density_matrix(n, 1 + (s as usize % n), &mut rng(s));
        let a = von_neumann_entropy(&unital.apply(&rho).unwrap());
        let b = von_neumann_entropy(&prime.apply(&rho).unwrap());
        prop_assert!((a - b - ((c * d) as f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn tensor_action_factorizes(seed_a in any::<u64>(), seed_b in any::<u64>(), s in any::<u64>()) {
        let a = random_channel(2, 3, 3, seed_a).unwrap();
        let b = random_channel(3, 2, 2, seed_b).unwrap();
        let mut r = rng(s);
        let x = random_density_matrix(2, 2, &mut r);
        let y = random_density_matrix(3, 3, &mut r);
        let ab = tensor_channel(&a, &b);
        let lhs = ab.apply(&x.tensor(&y)).unwrap();
        let rhs = tensor(a.apply(&x).unwrap().matrix(), b.apply(&y).unwrap().matrix());
        prop_assert!(lhs.matrix().max_abs_diff(&rhs) < 1e-12);
        let psi = random_pure_state(6, &mut r);
        let direct = ab.apply_pure(psi.amplitudes());
        prop_assert!(tensor_apply_pure(&a, &b, psi.amplitudes()).max_abs_diff(&direct) < 1e-12);
    }

    #[test]
    fn channel_json_roundtrips_exactly((din, dout, env, seed) in channel_dims()) {
        let ch = random_channel(din, dout, env, seed).unwrap();
        let text = serde_json::to_string(&ch).unwrap();
        let back: Channel = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &ch);
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn pure_states_are_unit_vectors(d in 1usize..=16, s in any::<u64>()) {
        let psi = random_pure_state(d, &mut rng(s));
        prop_assert!((vec_norm(psi.amplitudes()) - 1.0).abs() < 1e-12);
        let scaled: Vec<C64> = psi.amplitudes().iter().map(|z| z * 2.0).collect();
        prop_assert!(chanlab::PureState::new(scaled).is_err());
    }

    #[test]
    fn schatten_exponent_domain(p in -10.0f64..10.0) {
        prop_assert_eq!(SchattenP::new(p).is_ok(), p >= 1.0);
    }
}
