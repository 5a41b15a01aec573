use proptest::prelude::*;
use realinterp::discretize::{BuildOptions, BOUNDARY_TOL};
use realinterp::grid::Window;
use realinterp::kfunc::{MinFormula, WeightedSeqCouple};
use realinterp::qcfn::VerifyConfig;
use realinterp::spaces::{block_norm, gilbert_rhs, janson_norm, BlockSpace};
use realinterp::stability::Triple;
use realinterp::{DiscretizingSequence, Exponent, QuasiConcaveFn, SeqVector};

fn power_log() -> impl Strategy<Value = QuasiConcaveFn> {
    (0.2f64..0.8, 0.0f64..1.0, 0.0f64..1.0).prop_filter_map("quasi-concave", |(theta, a, b)| QuasiConcaveFn::power_log(theta, a, b).ok())
}

fn sqrt_setup() -> (QuasiConcaveFn, DiscretizingSequence) {
    let phi = QuasiConcaveFn::power(0.5).unwrap();
    let seq = DiscretizingSequence::build(&phi, &Window::symmetric(4.0, 24.0).unwrap(), 2.0).unwrap();
    (phi, seq)
}

fn vectors() -> impl Strategy<Value = SeqVector> {
    prop::collection::btree_map(-10i64..=10, -3.0f64..3.0, 1..8).prop_map(|m| m.into_iter().collect())
}

fn exponent() -> impl Strategy<Value = Exponent> {
    prop_oneof![Just(Exponent::ONE), Just(Exponent::TWO), Just(Exponent::INFINITY), (1.0f64..8.0).prop_map(|p| Exponent::new(p).unwrap())]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn built_sequences_verify(f in power_log(), rho in 1.3f64..4.0) {
        let seq = DiscretizingSequence::build(&f, &Window::new(1e-12, 1e12).unwrap(), rho).unwrap();
        let report = seq.verify();
        prop_assert!(report.passed(), "{:?}", report.violations);
        prop_assert!(report.value("max_tightness_slack").unwrap() < 1e-9);
        // both constraints grow by rho, so t grows by at least rho²
        prop_assert!(seq.log_points().windows(2).all(|w| w[1] - w[0] >= 2.0 * rho.ln() - 1e-9));
    }

    #[test]
    fn looser_bisection_moves_points_little(f in power_log()) {
        let w = Window::new(1e-8, 1e8).unwrap();
        let fine = DiscretizingSequence::build(&f, &w, 2.0).unwrap();
        let coarse = DiscretizingSequence::build_with(&f, &w, &BuildOptions { tolerance: 1e-10, tight_tolerance: 1e-7, ..Default::default() }).unwrap();
        prop_assert_eq!(fine.k_min(), coarse.k_min());
        prop_assert_eq!(fine.k_max(), coarse.k_max());
        for k in fine.k_min()..=fine.k_max() {
            prop_assert!((fine.log_point(k).unwrap() - coarse.log_point(k).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn partition_is_right_closed(ratios in prop::collection::vec(-60.0f64..60.0, 1..40)) {
        let (_, seq) = sqrt_setup();
        let pairs: Vec<(i64, f64)> = ratios.iter().enumerate().map(|(i, u)| (i as i64, u.exp())).collect();
        let part = seq.block_partition(&pairs);
        prop_assert_eq!(part.assigned_count() + part.unassigned.len(), pairs.len());
        for (k, members) in &part.blocks {
            for &i in members {
                let u = ratios[i as usize];
                prop_assert!(u > seq.log_point(k - 1).unwrap() + BOUNDARY_TOL * 0.5);
                prop_assert!(u <= seq.log_point(*k).unwrap() + BOUNDARY_TOL);
            }
        }
    }

    #[test]
    fn composites_of_verified_functions_are_quasi_concave(f in power_log(), g in power_log(), h in power_log()) {
        let c = QuasiConcaveFn::compose_parameter(&f, &g, &h, &VerifyConfig::default());
        prop_assert!(c.is_ok());
    }

    #[test]
    fn norms_are_lattice_monotone(a in vectors(), bump in prop::collection::vec(0.0f64..2.0, 21), p in exponent(), q in exponent()) {
        let (phi, seq) = sqrt_setup();
        let c = WeightedSeqCouple::sequence_couple(q, &seq).unwrap();
        let b: SeqVector = a.iter().map(|(i, x)| (i, x.signum() * (x.abs() + bump[(i + 10) as usize]))).collect();
        let ja = janson_norm(&MinFormula(&c), &a, &seq, p).unwrap().value;
        let jb = janson_norm(&MinFormula(&c), &b, &seq, p).unwrap().value;
        prop_assert!(jb >= ja * (1.0 - 1e-12));
        let ga = gilbert_rhs(&c, &phi, &seq, p, &a).unwrap();
        let gb = gilbert_rhs(&c, &phi, &seq, p, &b).unwrap();
        prop_assert!(gb >= ga * (1.0 - 1e-12));
    }

    #[test]
    fn janson_norm_decreases_in_p(a in vectors(), p1 in 1.0f64..6.0, dp in 0.0f64..6.0) {
        let (_, seq) = sqrt_setup();
        let c = WeightedSeqCouple::sequence_couple(Exponent::TWO, &seq).unwrap();
        let lo = janson_norm(&MinFormula(&c), &a, &seq, Exponent::new(p1).unwrap()).unwrap();
        let hi = janson_norm(&MinFormula(&c), &a, &seq, Exponent::new(p1 + dp).unwrap()).unwrap();
        let inf = janson_norm(&MinFormula(&c), &a, &seq, Exponent::INFINITY).unwrap();
        prop_assert!(lo.value >= hi.value * (1.0 - 1e-12) && hi.value >= inf.value * (1.0 - 1e-12));
        prop_assert!(lo.tail_estimate <= lo.value);
    }

    #[test]
    fn embedding_chain_over_fine_exponent(a in vectors(), p in exponent(), q in 1.0f64..8.0) {
        // couples built from ℓ¹ dominate those from ℓq, which dominate those from ℓ∞
        let (_, seq) = sqrt_setup();
        let norm = |fine: Exponent| {
            let c = WeightedSeqCouple::sequence_couple(fine, &seq).unwrap();
            janson_norm(&MinFormula(&c), &a, &seq, p).unwrap().value
        };
        let (n1, nq, ninf) = (norm(Exponent::ONE), norm(Exponent::new(q).unwrap()), norm(Exponent::INFINITY));
        prop_assert!(n1 >= nq * (1.0 - 1e-12) && nq >= ninf * (1.0 - 1e-12));

        let setup = Triple::power().setup(&Window::symmetric(4.0, 16.0).unwrap(), 2.0).unwrap();
        let block = |fine: Exponent| {
            let spaces = setup.block_spaces(p, fine).unwrap();
            setup.interpolated_norm(&spaces, &a, p).unwrap()
        };
        let (b1, bq, binf) = (block(Exponent::ONE), block(Exponent::new(q).unwrap()), block(Exponent::INFINITY));
        prop_assert!(b1 >= bq * (1.0 - 1e-12) && bq >= binf * (1.0 - 1e-12));
    }

    #[test]
    fn equal_exponents_ignore_blocks(a in vectors(), p in exponent()) {
        let (phi, seq) = sqrt_setup();
        let c = WeightedSeqCouple::sequence_couple(p, &seq).unwrap();
        let blocked = BlockSpace::gilbert(&c, &phi, &seq, p).unwrap();
        let weights = c.indices().map(|i| (i, blocked.weight(i).unwrap())).collect();
        let flat = BlockSpace::weighted_lp(p, weights).unwrap();
        let (x, y) = (block_norm(&blocked, &a).unwrap(), block_norm(&flat, &a).unwrap());
        prop_assert!((x - y).abs() <= 1e-12 * x);
    }
}

#[test]
fn composite_weights_match_target_norm() {
    // p = q on the block couple for the power triple: block weights 1/φ₀ and
    // 1/φ₁ recombine to the plain weighted norm with weight 1/φ(φ₀,φ₁)(t̃_i)
    let triple = Triple::power();
    let setup = triple.setup(&Window::symmetric(4.0, 16.0).unwrap(), 2.0).unwrap();
    let c = WeightedSeqCouple::from_fn(Exponent::TWO, setup.inner.k_min(), setup.inner.k_max(), |i| {
        let t = setup.inner.point(i).unwrap();
        (1.0 / triple.phi0.eval(t).unwrap(), 1.0 / triple.phi1.eval(t).unwrap())
    })
    .unwrap();
    for i in -5..=5 {
        let (v, w) = c.weights(i).unwrap();
        let gilbert_weight = v / triple.phi.eval(v / w).unwrap();
        let composite = triple.composite().eval(setup.inner.point(i).unwrap()).unwrap();
        assert!((gilbert_weight * composite - 1.0).abs() < 1e-12);
    }
}
