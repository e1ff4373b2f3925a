use std::sync::Arc;

use fracsing::fracops::{log_grid, RadialTrace};
use fracsing::io::fmt_float;
use fracsing::kelvin::{rescale_trace, KelvinTrace, PointTrace};
use fracsing::quadrature::hemisphere_rule;
use fracsing::specfun::{beta_fn, lambda_even};
use fracsing::{validate_params, Params};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn lambda_is_even(n in 2usize..=5, sigma in 0.02f64..0.98, frac in -0.999f64..0.999) {
        let alpha = frac * (n as f64 + 2.0 * sigma) / 2.0;
        let a = lambda_even(alpha, n, sigma).unwrap();
        let b = lambda_even(-alpha, n, sigma).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs());
    }

    #[test]
    fn admissibility_is_the_exponent_window(n in 2usize..=6, sigma in 0.01f64..0.99, p in 1.0f64..6.0) {
        let nf = n as f64;
        let inside = nf / (nf - 2.0 * sigma) < p && p < (nf + 2.0 * sigma) / (nf - 2.0 * sigma);
        prop_assert_eq!(validate_params(n, sigma, p).is_ok(), inside);
    }

    #[test]
    fn hemisphere_rule_reproduces_beta_function(n in 2usize..=5, sigma in 0.05f64..0.95) {
        let rule = hemisphere_rule::<f64>(n, sigma, 128).unwrap();
        prop_assert!(rule.weights.iter().all(|&w| w > 0.0));
        let got = rule.integrate(|_| 1.0);
        let want = 0.5 * beta_fn(n as f64 / 2.0, 1.0 - sigma).unwrap();
        prop_assert!((got - want).abs() <= 1e-12 * want, "{} vs {}", got, want);
    }

    #[test]
    fn rescaling_composes(lam in 0.1f64..10.0, mu in 0.1f64..10.0, r in 1e-2f64..1e2) {
        let params = Params::new(3, 0.5, 1.8).unwrap();
        let u = RadialTrace::from_fn(log_grid(1e-4, 1e4, 41), |s: f64| (1.0 + s * s).powf(-0.7))
            .unwrap()
            .with_tails(0.0, 1.4);
        let a = rescale_trace(&rescale_trace(&u, lam, &params).unwrap(), mu, &params).unwrap();
        let b = rescale_trace(&u, lam * mu, &params).unwrap();
        let (x, y) = (a.eval(r).unwrap(), b.eval(r).unwrap());
        prop_assert!((x - y).abs() <= 1e-13 * y);
    }

    #[test]
    fn kelvin_is_an_involution(
        c in prop::array::uniform3(-1.0f64..1.0),
        y in prop::array::uniform3(-3.0f64..3.0),
        lam in 0.2f64..2.0,
    ) {
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let d: Vec<f64> = y.iter().zip(&c).map(|(a, b)| a - b).collect();
        prop_assume!(norm(&y) > 1e-2 && norm(&d) > 1e-2);
        let u: Arc<dyn PointTrace<f64>> = Arc::new(
            RadialTrace::from_fn(vec![1e-3, 1e3], |_| 0.0).unwrap().with_evaluator(Arc::new(|r: f64| 1.0 / (1.0 + r))),
        );
        let once = Arc::new(KelvinTrace::new(u.clone(), c.to_vec(), lam, 3, 0.4).unwrap());
        let twice = KelvinTrace::new(once, c.to_vec(), lam, 3, 0.4).unwrap();
        let (a, b) = (twice.eval_point(&y).unwrap(), u.eval_point(&y).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * b);
    }

    #[test]
    fn float_format_round_trips(x in prop::num::f64::NORMAL) {
        prop_assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
    }
}
