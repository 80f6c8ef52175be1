use infoshock::elastic_net::{
    fit, fit_path, fit_traced, kkt_violation, lambda_max, FitOptions, PenaltySpec,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn problem() -> impl Strategy<Value = (DMatrix<f64>, Vec<f64>)> {
    (4usize..25, 1usize..8).prop_flat_map(|(t, d)| {
        (
            prop::collection::vec(-3.0f64..3.0, t * d),
            prop::collection::vec(-3.0f64..3.0, t),
        )
            .prop_map(move |(x, y)| (DMatrix::from_vec(t, d, x), y))
    })
}

fn options() -> impl Strategy<Value = FitOptions> {
    (any::<bool>(), any::<bool>()).prop_map(|(standardize, fit_intercept)| FitOptions {
        standardize,
        fit_intercept,
        ..FitOptions::default()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sweeps_never_increase_the_objective(
        (x, y) in problem(),
        opts in options(),
        eta in 0.0f64..=1.0,
        frac in 0.001f64..1.0,
    ) {
        let scale = y.iter().map(|v| v * v).sum::<f64>().max(1.0);
        let p = PenaltySpec::new(frac * scale, eta).unwrap();
        let (_, trace) = fit_traced(&x, &y, p, &opts).unwrap();
        for w in trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn converged_fits_satisfy_stationarity(
        (x, y) in problem(),
        opts in options(),
        eta in 0.0f64..=1.0,
        frac in 0.001f64..1.0,
    ) {
        let scale = y.iter().map(|v| v * v).sum::<f64>().max(1.0);
        let p = PenaltySpec::new(frac * scale, eta).unwrap();
        let f = fit(&x, &y, p, &opts).unwrap();
        prop_assert!(f.converged);
        let v = kkt_violation(&x, &y, &f, &opts).unwrap();
        prop_assert!(v < 1e-6, "KKT violation {v}");
    }

    #[test]
    fn at_or_above_lambda_max_every_coefficient_is_zero(
        (x, y) in problem(),
        standardize in any::<bool>(),
        eta in 0.01f64..=1.0,
        mult in 1.0f64..10.0,
    ) {
        let opts = FitOptions { standardize, ..FitOptions::default() };
        let top = lambda_max(&x, &y, eta, &opts).unwrap();
        let f = fit(&x, &y, PenaltySpec::new(top * mult, eta).unwrap(), &opts).unwrap();
        prop_assert_eq!(f.n_nonzero(), 0);
        let path = fit_path(&x, &y, eta, &[top * mult, top], &opts).unwrap();
        prop_assert!(path.iter().all(|f| f.n_nonzero() == 0));
    }

    #[test]
    fn warm_started_path_matches_cold_fits(
        (x, y) in problem(),
        eta in 0.05f64..=1.0,
    ) {
        let opts = FitOptions::default();
        let top = lambda_max(&x, &y, eta, &opts).unwrap();
        let lambdas: Vec<f64> = (0..5).map(|i| top * 0.3f64.powi(i)).collect();
        let path = fit_path(&x, &y, eta, &lambdas, &opts).unwrap();
        for (l, warm) in lambdas.iter().zip(&path) {
            let cold = fit(&x, &y, PenaltySpec::new(*l, eta).unwrap(), &opts).unwrap();
            let obj = |f| infoshock::elastic_net::objective(&x, &y, f, &opts).unwrap();
            let (a, b) = (obj(warm), obj(&cold));
            prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "{a} vs {b}");
        }
    }
}
