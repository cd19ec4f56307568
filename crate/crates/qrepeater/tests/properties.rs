use nalgebra::DMatrix;
use proptest::prelude::*;
use qrepeater::distribution::{
    distribute_pair, distribute_quad, pair_fidelity_closed_form, success_probability_closed_form, BellDiagonalPair,
    DistributionParams,
};
use qrepeater::planner::{self, RepeaterParams};
use qrepeater::purification::{purify, TripletEvolutionSpec};
use qrepeater::qmat::{self, partial_trace, BellState, DensityOperator, HermitianOperator, Tensor};
use qrepeater::swapping::{
    self, chain_compose_pairs, conventional_chain_fidelity, conventional_fidelity, dynamical_weights, SwapMethod,
};
use qrepeater::C64;

fn rank2(f: f64) -> BellDiagonalPair {
    BellDiagonalPair::rank2(BellState::PhiMinus, BellState::PsiMinus, f).unwrap()
}

/// Random density matrix A A† / tr from a flat list of parts.
fn density(dim: usize, parts: &[f64]) -> DensityOperator {
    let a = DMatrix::from_fn(dim, dim, |i, j| C64::new(parts[2 * (i * dim + j)], parts[2 * (i * dim + j) + 1]));
    let m = &a * a.adjoint();
    let tr = m.trace().re;
    DensityOperator::new(m / C64::new(tr, 0.0), vec![dim]).unwrap()
}

fn hermitian(dim: usize, parts: &[f64]) -> HermitianOperator {
    let a = DMatrix::from_fn(dim, dim, |i, j| C64::new(parts[2 * (i * dim + j)], parts[2 * (i * dim + j) + 1]));
    HermitianOperator::new((&a + a.adjoint()) * C64::new(0.5, 0.0), vec![dim]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partial_trace_undoes_tensor(
        a in prop::collection::vec(-1.0f64..1.0, 8),
        b in prop::collection::vec(-1.0f64..1.0, 18),
    ) {
        let (ra, rb) = (density(2, &a), density(3, &b));
        let joint = ra.tensor(&rb).unwrap();
        prop_assert!(partial_trace(&joint, &[0]).unwrap().max_abs_diff(&ra) < 1e-12);
        prop_assert!(partial_trace(&joint, &[1]).unwrap().max_abs_diff(&rb) < 1e-12);
    }

    #[test]
    fn evolution_keeps_a_density_matrix(
        r in prop::collection::vec(-1.0f64..1.0, 32),
        h in prop::collection::vec(-1.0f64..1.0, 32),
        t in 0.0f64..10.0,
    ) {
        let rho = density(4, &r);
        let out = qmat::evolve(&rho, &hermitian(4, &h), t).unwrap();
        prop_assert!((out.trace() - 1.0).abs() < 1e-12);
        prop_assert!(out.check_psd().is_ok());
        let before = rho.eigenvalues();
        let after = out.eigenvalues();
        for (x, y) in before.iter().zip(&after) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded(
        a in prop::collection::vec(-1.0f64..1.0, 32),
        b in prop::collection::vec(-1.0f64..1.0, 32),
    ) {
        let (x, y) = (density(4, &a), density(4, &b));
        let (fxy, fyx) = (qmat::fidelity(&x, &y).unwrap(), qmat::fidelity(&y, &x).unwrap());
        prop_assert!((fxy - fyx).abs() < 1e-8);
        prop_assert!((-1e-12..=1.0 + 1e-9).contains(&fxy));
        prop_assert!((qmat::fidelity(&x, &x).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn distribution_matches_closed_form(alpha in 0.05f64..=1.0, ell in 0.0f64..150.0) {
        let p = DistributionParams::standard(alpha, ell).unwrap();
        let pair = distribute_pair(&p).unwrap();
        prop_assert!((pair.state.weight(BellState::PsiPlus) - pair_fidelity_closed_form(alpha, p.eta())).abs() < 1e-10);
        prop_assert!((pair.success_prob - success_probability_closed_form(alpha, p.eta())).abs() < 1e-10);
        prop_assert_eq!(pair.state.rank(1e-12), if ell == 0.0 { 1 } else { 2 });
    }

    #[test]
    fn weights_sum_to_one(f in 0.5f64..=1.0) {
        let s = dynamical_weights(f);
        prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(s.iter().all(|&w| w >= -1e-15));
    }

    #[test]
    fn dynamical_weights_ordered_above_threshold(f in 0.5f64..=1.0) {
        let s = dynamical_weights(f);
        prop_assert!(s.windows(2).all(|w| w[0] >= w[1] - 1e-15), "{:?}", s);
        // the dynamical final fidelity never beats the conventional one
        prop_assert!(s[0] <= conventional_fidelity(f) + 1e-12);
    }

    #[test]
    fn swap_outcomes_agree(f in 0.5f64..=1.0) {
        let seg = rank2(f);
        for m in [SwapMethod::Conventional, SwapMethod::Dynamical] {
            prop_assert!(swapping::swap(&seg, &seg, &seg, m).unwrap().outcome_spread < 1e-12);
        }
    }

    #[test]
    fn conventional_chain_matches_closed_form(f in 0.5f64..=1.0, k in 0usize..4) {
        let n = [1u32, 3, 5, 7][k];
        let r = chain_compose_pairs(&rank2(f), n, SwapMethod::Conventional).unwrap();
        prop_assert!((r.f_final - conventional_chain_fidelity(f, n)).abs() < 1e-12);
        prop_assert_eq!(r.closed_form, Some(conventional_chain_fidelity(f, n)));
    }

    #[test]
    fn rate_drops_with_segments(alpha in 0.1f64..=1.0, ell in 1.0f64..100.0, k in 0u32..30) {
        let n = 2 * k + 1;
        let p = RepeaterParams::new(alpha, ell, n).unwrap();
        prop_assert!(planner::rate(&p.with_segments(n + 2)).unwrap() < planner::rate(&p).unwrap());
    }

    #[test]
    fn success_ratio_ignores_swap_probability(alpha in 0.1f64..=1.0, ell in 0.0f64..150.0, psw in 0.1f64..=1.0) {
        let p = RepeaterParams::new(alpha, ell, 3).unwrap();
        let q = RepeaterParams { p_swap: psw, ..p };
        let ratio = |r: &RepeaterParams| planner::success_probability(r) / r.p_swap;
        prop_assert!((ratio(&p) - ratio(&q)).abs() <= 1e-12 * ratio(&p).abs().max(1e-300));
        prop_assert!((ratio(&p) - planner::success_ratio(alpha, p.eta())).abs() <= 1e-12);
    }

    #[test]
    fn segment_length_monotone_in_target(alpha in 0.5f64..=1.0, k in 0u32..8, lo in 0.75f64..0.9, gap in 0.01f64..0.05) {
        let p = RepeaterParams::new(alpha, 10.0, 2 * k + 1).unwrap();
        let (a, b) = (planner::solve_segment_length(&p, lo), planner::solve_segment_length(&p, lo + gap));
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert!(b <= a + planner::LENGTH_TOL_KM);
            if a.is_finite() {
                let f = planner::chain_fidelity(&p.with_length(a)).unwrap();
                prop_assert!((f - lo).abs() < 1e-3);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn purification_outcomes_symmetric(alpha in 0.3f64..=1.0, ell in 1.0f64..60.0) {
        let p = DistributionParams::standard(alpha, ell).unwrap();
        let out = purify(&distribute_pair(&p).unwrap(), &distribute_quad(&p).unwrap(), &TripletEvolutionSpec::default()).unwrap();
        prop_assert_eq!(out.outcomes.len(), 4);
        prop_assert!(out.outcome_spread < 1e-10);
        let first = out.outcomes[0].probability;
        prop_assert!(out.outcomes.iter().all(|o| (o.probability - first).abs() < 1e-12));
        for o in &out.outcomes {
            prop_assert_eq!(o.state.support(1e-12), vec![BellState::PhiMinus, BellState::PsiMinus]);
        }
    }
}
