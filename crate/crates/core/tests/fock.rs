use dysonchain::fock::{
    bogoliubov_sign_check, build_ladder, displacement, gauss_decompose, gauss_exponent, gauss_residual, ladder_n,
    matrix_exp, number_n, rotation, su11_generators, xi_coth_xi, FockConfig, OperatorMatrix, C64,
};
use dysonchain::Error;
use proptest::prelude::*;
use std::f64::consts::PI;

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() < tol
}

fn max_abs(m: &OperatorMatrix) -> f64 {
    m.entries().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn ladder_on_two_levels() {
    let (a, ad) = build_ladder(&FockConfig { dim: 2, tail_guard: 1, tol_tail: 1e-10, pad: 0 });
    assert_eq!(a.get(0, 1), C64::new(1.0, 0.0));
    assert_eq!(a.get(0, 0), C64::default());
    assert_eq!(a.get(1, 0), C64::default());
    assert_eq!(ad.get(1, 0), C64::new(1.0, 0.0));
}

#[test]
fn number_operator_is_ad_a() {
    let (a, ad) = ladder_n(3);
    let n = ad.dot(&a);
    for m in 0..3 {
        assert!(close(n.get(m, m), C64::new(m as f64, 0.0), 1e-15));
    }
    assert!(max_abs(&(&number_n(3) - &n)) < 1e-15);
}

#[test]
fn canonical_commutator_breaks_only_at_the_top() {
    let (a, ad) = ladder_n(40);
    let c = a.dot(&ad) - ad.dot(&a);
    let diff = &c - &OperatorMatrix::identity(40);
    assert!(max_abs(&diff.block(39)) < 1e-13);
    // the top level sees −(N−1) instead of 1
    assert!(close(c.get(39, 39), C64::new(-39.0, 0.0), 1e-12));
}

#[test]
fn exponential_of_zero_and_diagonal() {
    let e = matrix_exp(&OperatorMatrix::zeros(6)).unwrap();
    assert!(max_abs(&(&e - &OperatorMatrix::identity(6))) < 1e-15);
    let d = OperatorMatrix::from_diag([C64::new(0.0, PI), C64::default(), C64::new(0.5, 0.0)]);
    let e = matrix_exp(&d).unwrap();
    assert!(close(e.get(0, 0), C64::new(-1.0, 0.0), 1e-14));
    assert!(close(e.get(1, 1), C64::new(1.0, 0.0), 1e-15));
    assert!(close(e.get(2, 2), C64::new(0.5f64.exp(), 0.0), 1e-14));
}

#[test]
fn vacuum_elements_follow_normal_ordering() {
    // e^{γa + γ*a†} = e^{γ*a†} e^{γa} e^{|γ|²/2}, so ⟨0|·|0⟩ = e^{|γ|²/2};
    // the unitary D(θ) = e^{θa† − θ*a} gives e^{−|θ|²/2} instead.
    let (a, ad) = ladder_n(40);
    let g = C64::new(0.3, 0.0);
    let herm = matrix_exp(&(a.scale(g) + ad.scale(g.conj()))).unwrap();
    assert!((herm.get(0, 0).re - (0.09f64 / 2.0).exp()).abs() < 1e-13);
    let unit = matrix_exp(&(ad.scale(g) - a.scale(g.conj()))).unwrap();
    assert!((unit.get(0, 0).re - (-0.09f64 / 2.0).exp()).abs() < 1e-13);
}

#[test]
fn displacement_overlap_and_inverse() {
    let cfg = FockConfig::new(40).unwrap();
    assert!(max_abs(&(&displacement(C64::default(), &cfg).unwrap() - &OperatorMatrix::identity(40))) < 1e-15);
    let d = displacement(C64::new(0.5, 0.0), &cfg).unwrap();
    assert!((d.get(0, 0).re - 0.882_496_902_584_595).abs() < 1e-12);
    let th = C64::new(0.4, 0.0);
    let p = displacement(th, &cfg).unwrap().dot(&displacement(-th, &cfg).unwrap());
    assert!(max_abs(&(&p - &OperatorMatrix::identity(40))) < 1e-10);
}

#[test]
fn displacement_reports_tail_population() {
    let cfg = FockConfig::new(10).unwrap();
    assert!(matches!(displacement(C64::new(2.5, 0.0), &cfg), Err(Error::Truncation { .. })));
}

#[test]
fn rotation_values() {
    let three = FockConfig { dim: 3, tail_guard: 1, tol_tail: 1e-10, pad: 0 };
    let r = rotation(PI, &three);
    for (m, want) in [1.0, -1.0, 1.0].into_iter().enumerate() {
        assert!(close(r.get(m, m), C64::new(want, 0.0), 1e-15));
    }
    let cfg = FockConfig::new(12).unwrap();
    assert!(max_abs(&(&rotation(0.0, &cfg) - &OperatorMatrix::identity(12))) == 0.0);
    let lhs = rotation(0.7, &cfg).dot(&rotation(-1.9, &cfg));
    assert!(max_abs(&(&lhs - &rotation(-1.2, &cfg))) < 1e-12);
}

#[test]
fn su11_algebra_on_interior_levels() {
    let cfg = FockConfig::new(20).unwrap();
    let (kp, km, k0) = su11_generators(&cfg);
    let inner = 16;
    assert!(max_abs(&(&k0.commutator(&kp) - &kp).block(inner)) < 1e-13);
    assert!(max_abs(&(&kp.commutator(&km) + &k0.scale_re(2.0)).block(inner)) < 1e-13);

    let (_, _, k0) = su11_generators(&FockConfig { dim: 4, tail_guard: 1, tol_tail: 1e-10, pad: 0 });
    for (m, want) in [0.25, 0.75, 1.25, 1.75].into_iter().enumerate() {
        assert!(close(k0.get(m, m), C64::new(want, 0.0), 1e-15));
    }
}

#[test]
fn xi_coth_xi_continues_through_zero() {
    for q in [-2.0f64, -1e-3, -1e-4, 0.0, 1e-4, 1e-3, 0.5] {
        let want = if q > 0.0 {
            q.sqrt() / q.sqrt().tanh()
        } else if q < 0.0 {
            (-q).sqrt() / (-q).sqrt().tan()
        } else {
            1.0
        };
        assert!((xi_coth_xi(q).unwrap() - want).abs() < 1e-12, "q = {q}");
    }
}

#[test]
fn gauss_mu_zero_limit() {
    let p = gauss_decompose(0.3, C64::default()).unwrap();
    assert_eq!(p.lambda_plus.norm(), 0.0);
    assert_eq!(p.lambda_minus.norm(), 0.0);
    assert!((p.lambda_zero.re - 0.6f64.exp()).abs() < 1e-12);
    let r = gauss_residual(&p, &FockConfig::new(30).unwrap()).unwrap();
    assert!(r < 1e-12, "{r}");
}

#[test]
fn gauss_fields_are_consistent() {
    let mu = C64::from_polar(0.1, PI / 3.0);
    let p = gauss_decompose(0.4, mu).unwrap();
    assert!((p.varphi - PI / 3.0).abs() < 1e-14);
    assert!(close(p.z, mu * 5.0, 1e-15));
    assert!(close(p.lambda_plus, -C64::from_polar(p.phi, -p.varphi), 1e-15));
    assert!(close(p.lambda_minus, -C64::from_polar(p.phi, p.varphi), 1e-15));
    assert!((p.lambda_zero.re - (p.phi * p.phi - p.chi)).abs() < 1e-15);
}

#[test]
fn gauss_matches_matrix_exponential() {
    let p = gauss_decompose(0.4, C64::new(0.1, 0.0)).unwrap();
    let r = gauss_residual(&p, &FockConfig::new(60).unwrap()).unwrap();
    assert!(r < 1e-9, "{r}");
}

#[test]
fn gauss_trigonometric_branch() {
    // ε² < 4|μ|², so Ξ is imaginary
    match gauss_decompose(0.2, C64::new(0.15, 0.0)) {
        Ok(p) => {
            assert!(p.xi.re == 0.0 && p.xi.im > 0.0);
            let r = gauss_residual(&p, &FockConfig::new(60).unwrap()).unwrap();
            assert!(r < 1e-9, "{r}");
        }
        Err(e) => assert!(matches!(e, Error::Branch(_) | Error::Domain(_)), "{e}"),
    }
}

#[test]
fn gauss_rejects_zero_epsilon() {
    assert!(matches!(gauss_decompose(0.0, C64::new(0.1, 0.0)), Err(Error::Domain(_))));
}

#[test]
fn bogoliubov_sign_is_resolved() {
    let p = gauss_decompose(0.3, C64::new(0.05, 0.08)).unwrap();
    let s = bogoliubov_sign_check(&p, &FockConfig::new(40).unwrap()).unwrap();
    assert!(s.matched.is_some(), "{s:?}");
    assert!(s.residual_plus.min(s.residual_minus) < 1e-8);
    assert!(s.residual_plus.max(s.residual_minus) > 0.1);
}

fn arb_matrix(max_dim: usize, bound: f64) -> impl Strategy<Value = OperatorMatrix> {
    (2..=max_dim).prop_flat_map(move |n| {
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n * n).prop_map(move |v| {
            let m = OperatorMatrix::from_fn(n, |i, j| C64::new(v[i * n + j].0, v[i * n + j].1));
            let s = m.norm_one();
            if s > bound {
                m.scale_re(bound / s)
            } else {
                m
            }
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exp_inverts_with_negation(m in arb_matrix(12, 5.0)) {
        let p = matrix_exp(&m).unwrap().dot(&matrix_exp(&-&m).unwrap());
        let err = max_abs(&(&p - &OperatorMatrix::identity(m.dim())));
        prop_assert!(err < 1e-10, "{}", err);
    }

    // The diagonal number operator is exact; the product √m·√m is only
    // exact to rounding.
    #[test]
    fn number_operator_is_exact(dim in 6usize..50) {
        let cfg = FockConfig::new(dim).unwrap();
        let (a, ad) = build_ladder(&cfg);
        let n = ad.dot(&a);
        let exact = number_n(cfg.work_dim());
        for m in 0..cfg.keep() {
            prop_assert_eq!(exact.get(m, m), C64::new(m as f64, 0.0));
            prop_assert!((n.get(m, m) - C64::new(m as f64, 0.0)).norm() <= 4.0 * f64::EPSILON * m as f64);
        }
    }

    #[test]
    fn displacement_is_unitary(r in 0.0..1.0f64, arg in -PI..PI) {
        let cfg = FockConfig::new(40).unwrap();
        let theta = C64::from_polar(r * (cfg.keep() as f64 / 4.0).sqrt() * 0.999, arg);
        let d = displacement(theta, &cfg).unwrap();
        let err = max_abs(&(&d.dagger().dot(&d) - &OperatorMatrix::identity(40)).block(cfg.keep()));
        prop_assert!(err < 1e-10, "{}", err);
    }

    #[test]
    fn gauss_exponential_is_positive(mag in 0.05..0.8f64, neg in any::<bool>(), frac in 0.0..1.0f64, arg in -PI..PI) {
        let eps = if neg { -mag } else { mag };
        let g = gauss_exponent(eps, C64::from_polar(0.4 * mag * frac, arg), 16);
        let e = matrix_exp(&g).unwrap();
        let herm = max_abs(&(&e - &e.dagger())) / max_abs(&e);
        prop_assert!(herm < 1e-12, "{}", herm);
        let (vals, _) = e.hermitian_part().hermitian_eigen();
        prop_assert!(vals.iter().all(|&v| v > 0.0), "{:?}", vals);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn gauss_residual_in_box(mag in 0.05..0.8f64, neg in any::<bool>(), frac in 0.0..1.0f64, arg in -PI..PI) {
        let eps = if neg { -mag } else { mag };
        let mu = C64::from_polar(0.4 * mag * frac, arg);
        let p = gauss_decompose(eps, mu).unwrap();
        let r = gauss_residual(&p, &FockConfig::new(40).unwrap()).unwrap();
        prop_assert!(r < 1e-9, "ε = {}, μ = {}: {}", eps, mu, r);
    }
}
