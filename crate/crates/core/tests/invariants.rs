use bridgepot::feynman_kac::{path_rng, sample_bridge};
use bridgepot::functionals::{k_transform, newton_potential, BridgeSpec};
use bridgepot::kernels::{explicit_constant, f_estimate, f_integral, heat_kernel, k0, Dimension};
use bridgepot::potentials::{Potential, PotentialForm, Sign, Support};
use bridgepot::quadrature::QuadratureSpec;
use bridgepot::real;
use bridgepot::sup::{sup_search, SupDomain, SupStrategy};
use proptest::prelude::*;

fn point(d: usize, r: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-r..r, d)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    a == b || ((a - b) / b).abs() <= tol
}

fn leaf() -> impl Strategy<Value = PotentialForm> {
    prop_oneof![
        (-5.0..5.0f64).prop_map(|value| PotentialForm::Constant { value }),
        (point(3, 2.0), 0.1..3.0f64, -5.0..5.0f64).prop_map(|(center, radius, amplitude)| {
            PotentialForm::BallIndicator {
                center,
                radius,
                amplitude,
            }
        }),
        (-1.5..0.5f64, 0.0..0.5f64, proptest::option::of(1.0..4.0f64), -3.0..3.0f64).prop_map(
            |(exponent, inner_radius, outer_radius, amplitude)| PotentialForm::RadialPower {
                exponent,
                inner_radius,
                outer_radius,
                amplitude,
            }
        ),
    ]
}

fn form() -> impl Strategy<Value = PotentialForm> {
    leaf().prop_recursive(3, 12, 3, |inner| {
        prop_oneof![
            (0.1..10.0f64, inner.clone()).prop_map(|(s, i)| PotentialForm::Dilate { s, inner: Box::new(i) }),
            (-3.0..3.0f64, inner.clone()).prop_map(|(factor, i)| PotentialForm::Scale {
                factor,
                inner: Box::new(i)
            }),
            prop::collection::vec(inner, 1..3).prop_map(|terms| PotentialForm::Sum { terms }),
        ]
    })
}

proptest! {
    #[test]
    fn potential_json_round_trip(f in form()) {
        let v = Potential::new(f).unwrap();
        let back = Potential::from_json(&v.to_json()).unwrap();
        prop_assert_eq!(&back, &v);
        prop_assert_eq!(back.sign(), v.sign());
    }

    #[test]
    fn sign_and_bounds_agree_with_values(f in form(), zs in prop::collection::vec(point(3, 3.0), 16)) {
        let v = Potential::new(f).unwrap();
        let (upper, lower) = v.part_bounds();
        for z in &zs {
            let x = v.evaluate(z).unwrap();
            if x.is_infinite() {
                continue;
            }
            match v.sign() {
                Sign::Zero => prop_assert_eq!(x, 0.0),
                Sign::Nonpositive => prop_assert!(x <= 0.0),
                Sign::Nonnegative => prop_assert!(x >= 0.0),
                Sign::Mixed => {}
            }
            if let Some(u) = upper {
                prop_assert!(x <= u * (1.0 + 1e-12) + 1e-12, "{} > {}", x, u);
            }
            if let Some(l) = lower {
                prop_assert!(-x <= l * (1.0 + 1e-12) + 1e-12, "{} < -{}", x, l);
            }
            if let Support::Compact { radius } = v.support() {
                let r = z.iter().map(|c| c * c).sum::<f64>().sqrt();
                if r > radius * (1.0 + 1e-12) {
                    prop_assert_eq!(x, 0.0);
                }
            }
        }
    }

    #[test]
    fn dilation_evaluates_pointwise(f in form(), s in 0.01..100.0f64, z in point(3, 3.0)) {
        let v = Potential::new(f).unwrap();
        let ds = v.dilate(s).unwrap();
        let direct = s * v.evaluate(&z.iter().map(|c| c * s.sqrt()).collect::<Vec<_>>()).unwrap();
        let got = ds.evaluate(&z).unwrap();
        prop_assert!(got == direct || close(got, direct, 1e-12), "{} vs {}", got, direct);
    }

    #[test]
    fn real_text_round_trip(bits in any::<u64>()) {
        let v = f64::from_bits(bits);
        let back = real::parse(&real::format(v)).unwrap();
        prop_assert!(back.to_bits() == v.to_bits() || (v.is_nan() && back.is_nan()));
    }

    #[test]
    fn heat_kernel_symmetry_and_scaling(
        t in 0.01..10.0f64,
        x in point(4, 3.0),
        y in point(4, 3.0),
        lambda in 0.2..5.0f64,
    ) {
        let d = Dimension::new(4).unwrap();
        let g = heat_kernel(t, &x, &y, d).unwrap();
        prop_assert_eq!(g, heat_kernel(t, &y, &x, d).unwrap());
        let lx: Vec<f64> = x.iter().map(|c| lambda * c).collect();
        let ly: Vec<f64> = y.iter().map(|c| lambda * c).collect();
        let scaled = heat_kernel(lambda * lambda * t, &lx, &ly, d).unwrap();
        prop_assert!(close(scaled * lambda.powi(4), g, 1e-12) || g < 1e-280);
    }

    #[test]
    fn k0_scaling(x in point(3, 5.0), y in point(3, 5.0), lambda in 0.1..10.0f64) {
        // |x||y| and x·y are invariant under (x, y) -> (λx, y/λ)
        let d = Dimension::new(3).unwrap();
        prop_assume!(x.iter().any(|c| c.abs() > 1e-3));
        let lx: Vec<f64> = x.iter().map(|c| lambda * c).collect();
        let ly: Vec<f64> = y.iter().map(|c| c / lambda).collect();
        let a = k0(&lx, &ly, d).unwrap();
        let b = k0(&x, &y, d).unwrap() / lambda;
        prop_assert!(close(a, b, 1e-12) || b < 1e-280);
    }

    #[test]
    fn bridge_paths_are_pinned(t in 0.01..10.0f64, x in point(3, 5.0), y in point(3, 5.0), seed in any::<u64>()) {
        let spec = BridgeSpec::new(t, x.clone(), y.clone()).unwrap();
        let path = sample_bridge(&spec, 10, &mut path_rng(seed, 0));
        prop_assert_eq!(path.len(), 11);
        prop_assert_eq!(&path[0], &x);
        prop_assert_eq!(&path[10], &y);
        prop_assert!(path.iter().flatten().all(|c| c.is_finite()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn f_is_bounded_by_explicit_constant(
        la in -3.0..3.0f64,
        lb in -3.0..3.0f64,
        beta in 1.5..3.5f64,
        c in 0.1..5.0f64,
    ) {
        let (a, b) = (10f64.powf(la), 10f64.powf(lb));
        let q = QuadratureSpec::one_dim();
        let f = f_integral(a, b, beta, c, &q).unwrap();
        let bound = explicit_constant(beta, c, &q).unwrap().value * f_estimate(a, b, beta);
        prop_assert!(f.is_converged());
        prop_assert!(f.value > 0.0 && f.value.is_finite());
        prop_assert!(f.value <= bound * (1.0 + 1e-6), "{} > {}", f.value, bound);
    }

    #[test]
    fn k_is_additive_for_same_sign_balls(
        r1 in 0.2..2.0f64,
        r2 in 0.2..2.0f64,
        a1 in 0.1..3.0f64,
        a2 in 0.1..3.0f64,
        x in point(3, 2.0),
        y in point(3, 2.0),
    ) {
        let q = QuadratureSpec::multi_dim().with_rel_tol(1e-9);
        let b1 = Potential::ball(vec![0.0; 3], r1, -a1).unwrap();
        let b2 = Potential::ball(vec![0.0; 3], r2, -a2).unwrap();
        let sum = Potential::sum(vec![b1.clone(), b2.clone()]).unwrap();
        let k = |v: &Potential| k_transform(v, &x, &y, &q).unwrap().value;
        prop_assert!(close(k(&sum), k(&b1) + k(&b2), 1e-7));
    }

    #[test]
    fn ball_newton_potential_decreases_outside(r in 1.0..20.0f64, step in 0.1..5.0f64) {
        let q = QuadratureSpec::multi_dim();
        let v = Potential::ball(vec![0.0; 4], 1.0, 2.0).unwrap();
        let at = |s: f64| newton_potential(&v, &[s, 0.0, 0.0, 0.0], &q).unwrap().value;
        prop_assert!(at(r + step) < at(r));
    }

    #[test]
    fn sup_search_finds_concave_maximum(cx in 0.1..0.9f64, cy in 0.1..0.9f64) {
        let domain = SupDomain::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![false, false]).unwrap();
        let peak = |u: &[f64]| 2.0 - (u[0] - cx).powi(2) - 3.0 * (u[1] - cy).powi(2);
        let r = sup_search(peak, &domain, &SupStrategy::default()).unwrap();
        prop_assert!((r.value - 2.0).abs() < 1e-8);
        prop_assert!(!r.boundary_hit);
        prop_assert!((r.arg[0] - cx).abs() < 1e-3 && (r.arg[1] - cy).abs() < 1e-3);
    }
}

#[test]
fn centred_ball_newton_closed_form() {
    // uniform ball in three dimensions: (3 - r²)/6 inside, 1/(3r) outside
    let v = Potential::ball(vec![0.0; 3], 1.0, -1.0).unwrap();
    let q = QuadratureSpec::multi_dim().with_rel_tol(1e-10);
    for r in [0.0, 0.4, 0.99, 1.01, 3.0, 50.0] {
        let want = if r < 1.0 { (3.0 - r * r) / 6.0 } else { 1.0 / (3.0 * r) };
        let got = newton_potential(&v, &[0.0, r, 0.0], &q).unwrap().value;
        assert!(close(got, want, 1e-8), "r = {r}: {got} vs {want}");
    }
}
