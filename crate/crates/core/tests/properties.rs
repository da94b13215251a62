use std::f64::consts::PI;

use majda_core::model::{self, ModelParams};
use majda_core::spectral::{projector, spectral_split, BlockLimit, EvansValue, Side};
use majda_core::winding::{arg_step, build_contour, winding_number};
use majda_core::zero_ea::zero_ea_coeffs;
use num_complex::Complex64;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ModelParams> {
    (0.0f64..0.9, 0.001f64..1.0, 0.01f64..10.0, 0.05f64..4.0, 0.0f64..8.0).prop_map(|(u_plus, frac, k, d, ea)| {
        let q = frac * model::q_max(u_plus);
        ModelParams { q, k, d, ea, u_plus, u_ig: u_plus + 0.05 }
    })
}

fn limit() -> impl Strategy<Value = BlockLimit> {
    (0.01f64..1.5, 0.0f64..3.0, 0.0f64..0.5, 0.05f64..4.0).prop_map(|(alpha, kphi, q, d)| BlockLimit { alpha, kphi, q, d })
}

fn right_half_plane() -> impl Strategy<Value = Complex64> {
    (0.0f64..20.0, -20.0f64..20.0).prop_filter("away from the origin", |(re, im)| re.hypot(*im) > 1e-3).prop_map(|(re, im)| Complex64::new(re, im))
}

proptest! {
    #[test]
    fn burned_state_solves_rankine_hugoniot(p in params()) {
        let ends = model::burned_states(&p).unwrap();
        prop_assert!(model::rh_residual(p.u_plus, ends.u_minus_strong, p.q).abs() <= 1e-12);
        prop_assert!(model::rh_residual(p.u_plus, ends.u_minus_weak, p.q).abs() <= 1e-12);
        prop_assert!(ends.u_minus_strong >= 1.0 && ends.u_minus_weak <= 1.0);
        prop_assert!((ends.u_minus_strong + ends.u_minus_weak - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn validation_never_panics(q in any::<f64>(), k in any::<f64>(), d in any::<f64>(), ea in any::<f64>(), u_plus in any::<f64>(), u_ig in any::<f64>()) {
        let p = ModelParams { q, k, d, ea, u_plus, u_ig };
        let diag = model::validate(&p);
        prop_assert_eq!(diag.valid, diag.failures.is_empty());
        prop_assert_eq!(diag.valid, p.checked().is_ok());
    }

    #[test]
    fn beyond_cj_is_never_valid(u_plus in 0.0f64..0.99, excess in 1e-9f64..1.0) {
        let p = ModelParams { q: model::q_max(u_plus) + excess, u_plus, u_ig: u_plus + 0.01, ..ModelParams::default() };
        prop_assert!(!model::validate(&p).valid);
    }

    #[test]
    fn auto_grid_stays_below_cj(u_plus in 0.0f64..0.99) {
        let g = model::q_grid(u_plus);
        prop_assert_eq!(g.len(), 25);
        let qm = model::q_max(u_plus);
        prop_assert!(g.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(g.iter().all(|&q| q > 0.0 && q < qm));
    }

    #[test]
    fn splitting_is_consistent_in_the_right_half_plane(lim in limit(), lam in right_half_plane()) {
        let sm = spectral_split(&lim, Side::Minus, lam);
        prop_assert!(sm.group().iter().all(|g| g.re > 0.0));
        prop_assert!(sm.rest.iter().all(|r| r.re < 0.0));
        let plus = BlockLimit { alpha: -lim.alpha, kphi: 0.0, ..lim };
        let sp = spectral_split(&plus, Side::Plus, lam);
        prop_assert!(sp.group().iter().all(|g| g.re < 0.0));
        prop_assert!(sp.rest.iter().all(|r| r.re > 0.0));
    }

    #[test]
    fn projector_is_a_commuting_idempotent(lim in limit(), lam in right_half_plane()) {
        let split = spectral_split(&lim, Side::Minus, lam);
        prop_assume!(split.gap > 1e-3);
        let m = lim.matrix(lam);
        let p = projector(&m, &split);
        let scale = 1.0 + p.norm() * p.norm();
        prop_assert!((p * p - p).norm() <= 1e-9 * scale);
        prop_assert!((p * m - m * p).norm() <= 1e-9 * scale * (1.0 + m.norm()));
        let tr: Complex64 = (0..4).map(|i| p[(i, i)]).sum();
        prop_assert!((tr - 2.0).norm() <= 1e-9 * scale);
    }

    #[test]
    fn zero_ea_identities(k in 1e-3f64..1e3, d in 1e-2f64..1e2) {
        let cf = zero_ea_coeffs(&ModelParams { k, d, ea: 0.0, ..ModelParams::default() }).unwrap();
        prop_assert!((d * cf.mu_plus * cf.mu_plus + cf.mu_plus - k).abs() <= 1e-12 * (1.0 + k));
        prop_assert!((cf.d0 * (1.0 + d * cf.mu_plus) - 1.0).abs() <= 1e-12);
        prop_assert!((cf.z(-1e-300) - cf.z(0.0)).abs() <= 1e-12);
        prop_assert!((cf.dz(-1e-300) - cf.dz(0.0)).abs() <= 1e-12 * (1.0 + cf.dz(0.0)));
        prop_assert!(cf.z(-50.0) >= 0.0 && cf.z(50.0) <= 1.0);
    }

    #[test]
    fn argument_steps_are_principal(a in -50.0f64..50.0, b in -50.0f64..50.0) {
        let l = Complex64::new(1.0, 0.0);
        let s = arg_step(&EvansValue::from_value(l, Complex64::from_polar(1.0, a)), &EvansValue::from_value(l, Complex64::from_polar(2.0, b)));
        prop_assert!(s > -PI - 1e-12 && s <= PI + 1e-12);
        let d = b - a - s;
        prop_assert!((d / (2.0 * PI) - (d / (2.0 * PI)).round()).abs() < 1e-9);
    }

    #[test]
    fn winding_counts_planted_zeros(zeros in prop::collection::vec((0.2f64..0.9, 0.05f64..0.95), 0..4), radius in 1.0f64..50.0) {
        // zeros placed inside the half-disk, well away from the contour
        let planted: Vec<Complex64> = zeros.iter().map(|&(r, t)| Complex64::from_polar(r * radius, (t - 0.5) * PI * 0.9)).collect();
        let f = |l: Complex64| planted.iter().fold(Complex64::new(1.0, 0.0), |acc, z| acc * (l - z) / radius);
        let mut contour = build_contour(radius, 40).unwrap();
        contour.symmetric = false;
        let trace: Vec<EvansValue> = contour.evaluation_nodes().into_iter().map(|l| EvansValue::from_value(l, f(l))).collect();
        let (res, _) = winding_number(trace, false, |segs| {
            Ok(segs.iter().map(|(a, b)| { let m = contour.midpoint(a.lambda, b.lambda); EvansValue::from_value(m, f(m)) }).collect())
        }).unwrap();
        prop_assert!(res.certified);
        prop_assert_eq!(res.winding, planted.len() as i64);
    }
}
