use infoshock::regression::{design_with_intercept, ols_hc, HcType};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn data() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (6usize..40, 1usize..4).prop_flat_map(|(t, k)| {
        (
            prop::collection::vec(prop::collection::vec(-5.0f64..5.0, t), k),
            prop::collection::vec(-5.0f64..5.0, t),
        )
    })
}

fn well_posed(x: &DMatrix<f64>) -> bool {
    let sv = x.clone().singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    lo > 1e-6 * hi
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn residuals_are_orthogonal_to_every_column((cols, y) in data()) {
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let x = design_with_intercept(&refs).unwrap();
        prop_assume!(well_posed(&x));
        let f = ols_hc(&x, &y, HcType::HC1).unwrap();
        let e = DVector::from_column_slice(&f.residuals);
        let g = x.transpose() * &e;
        let scale = y.iter().map(|v| v.abs()).fold(1.0, f64::max) * x.nrows() as f64;
        prop_assert!(g.amax() < 1e-9 * scale, "X'e = {g}");
        for i in 0..y.len() {
            prop_assert!((f.fitted[i] + f.residuals[i] - y[i]).abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn covariance_is_the_sandwich((cols, y) in data()) {
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let x = design_with_intercept(&refs).unwrap();
        prop_assume!(well_posed(&x));
        let (t, k) = x.shape();
        prop_assume!(t > k);
        let bread = (x.transpose() * &x).try_inverse().unwrap();
        let yv = DVector::from_column_slice(&y);
        let b = &bread * x.transpose() * &yv;
        let e = &yv - &x * &b;
        let mut meat = DMatrix::zeros(k, k);
        for i in 0..t {
            let xi = x.row(i).transpose();
            meat += &xi * xi.transpose() * (e[i] * e[i]);
        }
        let hc0 = &bread * meat * &bread;
        let f0 = ols_hc(&x, &y, HcType::HC0).unwrap();
        let f1 = ols_hc(&x, &y, HcType::HC1).unwrap();
        let tol = 1e-8 * hc0.amax().max(1e-12);
        prop_assert!((&f0.robust_cov - &hc0).amax() < tol);
        let ratio = t as f64 / (t - k) as f64;
        prop_assert!((&f1.robust_cov - &hc0 * ratio).amax() < tol * ratio);
        for j in 0..k {
            prop_assert!((f0.coefficients[j] - b[j]).abs() < 1e-8 * b.amax().max(1.0));
            prop_assert!((f1.standard_errors[j] - f1.robust_cov[(j, j)].sqrt()).abs() < 1e-14);
        }
    }
}
