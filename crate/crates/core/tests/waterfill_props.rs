use proptest::prelude::*;

use seqpred_core::model::{make_noise, EllipsoidSpec, ParamVector};
use seqpred_core::waterfill::{kl_risk_gaussian, oracle_risk, solve_waterfill};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oracle_risk_is_pointwise_minimum(
        theta in prop::collection::vec(-3.0f64..3.0, 1..12),
        tau in prop::collection::vec(0.0f64..9.0, 12),
        eps in 0.05f64..1.5,
        gamma in 0.1f64..4.0,
    ) {
        let noise = make_noise(eps, gamma).unwrap();
        let th = ParamVector::new(theta.clone()).unwrap();
        let best = oracle_risk(&th, &noise);
        let sq: Vec<f64> = theta.iter().map(|t| t * t).collect();
        prop_assert!((kl_risk_gaussian(&th, &sq, &noise) - best).abs() < 1e-12);
        prop_assert!(kl_risk_gaussian(&th, &tau[..theta.len()], &noise) >= best - 1e-12);
        prop_assert!(best >= 0.0);
    }

    #[test]
    fn waterfill_solution_is_feasible_and_monotone(
        alpha in 0.5f64..4.0,
        radius in 0.1f64..30.0,
        eps in 1e-3f64..0.3,
        gamma in 0.1f64..5.0,
    ) {
        let spec = EllipsoidSpec::sobolev(alpha, radius).unwrap();
        let noise = make_noise(eps, gamma).unwrap();
        let sol = solve_waterfill(&spec, &noise).unwrap();
        prop_assert_eq!(sol.truncation, sol.tau_sq.len());
        prop_assert!(sol.tau_sq.iter().all(|t| *t > 0.0));
        prop_assert!(sol.tau_sq.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(sol.constraint_residual.abs() <= 1e-9 * radius.max(1.0));
        let lf = sol.least_favorable().unwrap();
        let at_lf = kl_risk_gaussian(&lf, &sol.tau_sq, &noise);
        prop_assert!((at_lf - sol.minimax_risk).abs() <= 1e-9 * sol.minimax_risk.max(1e-12));
    }

    /// The Gaussian-prior risk is affine in `θ_i²`, so no boundary point can
    /// beat the least favourable one.
    #[test]
    fn boundary_points_do_not_exceed_minimax_risk(
        alpha in 0.75f64..3.0,
        radius in 0.5f64..10.0,
        eps in 0.01f64..0.2,
        weights in prop::collection::vec(0.0f64..1.0, 1..40),
    ) {
        let spec = EllipsoidSpec::sobolev(alpha, radius).unwrap();
        let noise = make_noise(eps, 1.0).unwrap();
        let sol = solve_waterfill(&spec, &noise).unwrap();
        let total: f64 = weights.iter().sum();
        prop_assume!(total > 0.0);
        // spread the ellipsoid budget B over the first coordinates
        let theta: Vec<f64> = weights
            .iter()
            .enumerate()
            .map(|(i, w)| (radius * w / total / spec.coeff_sq(i + 1).unwrap()).sqrt())
            .collect();
        let risk = kl_risk_gaussian(&ParamVector::new(theta).unwrap(), &sol.tau_sq, &noise);
        prop_assert!(risk <= sol.minimax_risk * (1.0 + 1e-9) + 1e-12);
    }
}
