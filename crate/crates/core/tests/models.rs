use dysonchain::fock::{FockConfig, OperatorMatrix, C64};
use dysonchain::models::expr::Expr;
use dysonchain::models::{
    build_linear_hamiltonian, build_swanson_hamiltonian, hermiticity_residual, pt_symmetry_check, PtModel,
};
use dysonchain::{CoefficientTrack, Error, Grid, LinearModel, SwansonModel};
use proptest::prelude::*;

fn small(dim: usize) -> FockConfig {
    FockConfig { dim, tail_guard: 1, tol_tail: 1e-10, pad: 0 }
}

fn max_abs(m: &OperatorMatrix) -> f64 {
    m.entries().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

#[test]
fn free_linear_hamiltonian_is_the_number_operator() {
    let m = LinearModel::from_exprs("1", "0", "0").unwrap();
    let h = build_linear_hamiltonian(&m, 0.3, &small(3));
    assert_eq!(h, OperatorMatrix::from_diag([c(0.0), c(1.0), c(2.0)]));
}

#[test]
fn linear_antihermitian_part() {
    let m = LinearModel::from_exprs("1", "0.2", "0.4").unwrap();
    let h = build_linear_hamiltonian(&m, 0.0, &small(8));
    let d = &h - &h.dagger();
    // (α − β)(a − a†): entries ∓0.2√m just off the diagonal
    for j in 1..8 {
        let s = (j as f64).sqrt();
        assert!((d.get(j - 1, j) - c(-0.2 * s)).norm() < 1e-15);
        assert!((d.get(j, j - 1) - c(0.2 * s)).norm() < 1e-15);
    }
    assert!(hermiticity_residual(&h, &FockConfig::new(40).unwrap()) > 0.0);
}

#[test]
fn hermitian_linear_drive() {
    let m = LinearModel::from_exprs("1 + 0.1*t", "0.3*exp(i*t)", "0.3*exp(-i*t)").unwrap();
    for t in [0.0, 0.4, 1.0] {
        let h = build_linear_hamiltonian(&m, t, &FockConfig::new(20).unwrap());
        assert!(hermiticity_residual(&h, &FockConfig::new(20).unwrap()) < 1e-16);
    }
}

#[test]
fn swanson_free_and_hermitian_cases() {
    let free = SwansonModel::from_exprs("1", "0", "0").unwrap();
    let h = build_swanson_hamiltonian(&free, 0.0, &small(3));
    assert_eq!(h, OperatorMatrix::from_diag([c(0.5), c(1.5), c(2.5)]));
    let sym = SwansonModel::from_exprs("1", "0.25", "0.25").unwrap();
    let cfg = FockConfig::new(20).unwrap();
    assert_eq!(hermiticity_residual(&build_swanson_hamiltonian(&sym, 0.0, &cfg), &cfg), 0.0);
}

#[test]
fn swanson_spectrum_is_real() {
    // independent closed form: E_n = (n + ½) √(ω² − 4αβ)
    let m = SwansonModel::from_exprs("1", "0.2", "0.3").unwrap();
    let h = build_swanson_hamiltonian(&m, 0.0, &FockConfig::new(60).unwrap());
    let mut ev = h.eigenvalues();
    ev.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
    let scale = (1.0f64 - 4.0 * 0.2 * 0.3).sqrt();
    for (n, e) in ev.iter().take(12).enumerate() {
        assert!(e.im.abs() < 1e-8, "E_{n} = {e}");
        assert!((e.re - (n as f64 + 0.5) * scale).abs() < 1e-8, "E_{n} = {e}");
    }
}

#[test]
fn residual_of_anti_hermitian_identity() {
    let cfg = FockConfig::new(10).unwrap();
    let m = OperatorMatrix::scalar(10, C64::new(0.0, 1.0));
    assert!((hermiticity_residual(&m, &cfg) - 2.0).abs() < 1e-15);
}

#[test]
fn pt_check_cases() {
    let lin = LinearModel::from_exprs("cos(t)", "sin(t)", "sin(t)").unwrap();
    assert!(pt_symmetry_check(PtModel::Linear(&lin), 1.0, 101).pass);
    let growing = LinearModel::from_exprs("1 + t", "0", "0").unwrap();
    let r = pt_symmetry_check(PtModel::Linear(&growing), 1.5, 31);
    assert!(!r.pass);
    assert!((r.omega_even - 3.0).abs() < 1e-12);
    let sw = SwansonModel::from_exprs("cos(t)", "0.2*cos(t)", "0.3*cos(2*t)").unwrap();
    let r = pt_symmetry_check(PtModel::Swanson(&sw), 1.0, 51);
    assert!(r.pass);
    assert_eq!(r.analytic_continuation, "unchecked");
}

#[test]
fn expressions_evaluate() {
    let cases: [(&str, f64, C64); 7] = [
        ("1", 0.7, c(1.0)),
        ("-0.3*sin(t)", 0.5, c(-0.3 * 0.5f64.sin())),
        ("1 + 0.3*sin(t)", 2.0, c(1.0 + 0.3 * 2.0f64.sin())),
        ("0.1 - 0.05*i", 0.0, C64::new(0.1, -0.05)),
        ("exp(i*pi)", 0.0, c(-1.0)),
        ("2*t/4 - (t - 1)", 3.0, c(-0.5)),
        ("cos(t)*cos(t) + sin(t)*sin(t)", 1.234, c(1.0)),
    ];
    for (src, t, want) in cases {
        let got = Expr::parse(src).unwrap().eval(t);
        assert!((got - want).norm() < 1e-15, "{src} at {t}: {got}");
    }
    assert!(Expr::parse("0.4").unwrap().is_constant());
    assert!(!Expr::parse("cos(2*t)").unwrap().is_constant());
}

#[test]
fn expression_errors_carry_a_column() {
    for (src, col) in [("1 +", 4), ("sin t", 5), ("2 * (t", 7), ("1 $ 2", 3)] {
        match Expr::parse(src) {
            Err(Error::Parse { column, .. }) => assert_eq!(column, col, "{src}"),
            other => panic!("{src}: {other:?}"),
        }
    }
}

#[test]
fn sampled_tracks_survive_serialization() {
    let grid = Grid::new(0.0, 1.0, 0.05).unwrap();
    let values: Vec<C64> = grid.times().iter().map(|&t| C64::new(t.sin(), (2.0 * t).cos())).collect();
    let track = CoefficientTrack::from_grid(&grid, values.clone()).unwrap();
    let text = serde_json::to_string(&track).unwrap();
    let back: CoefficientTrack = serde_json::from_str(&text).unwrap();
    for (i, t) in grid.times().into_iter().enumerate() {
        assert_eq!(back.eval(t), values[i]);
    }
    for k in 0..200 {
        let t = 0.003 + k as f64 * 0.0049;
        assert!((back.eval(t) - track.eval(t)).norm() < 1e-12);
    }
}

#[test]
fn closed_tracks_accept_every_config_form() {
    let n: CoefficientTrack = serde_json::from_str("0.25").unwrap();
    let p: CoefficientTrack = serde_json::from_str(r#"{"re": 0.1, "im": -0.2}"#).unwrap();
    let s: CoefficientTrack = serde_json::from_str(r#""0.3*cos(t)""#).unwrap();
    assert_eq!(n.eval(9.0), c(0.25));
    assert_eq!(p.eval(0.0), C64::new(0.1, -0.2));
    assert!((s.eval(1.0) - c(0.3 * 1.0f64.cos())).norm() < 1e-16);
    assert!(serde_json::from_str::<CoefficientTrack>(r#""sin(""#).is_err());
}

#[test]
fn sampled_tracks_need_a_uniform_grid() {
    let v = vec![c(0.0); 5];
    assert!(CoefficientTrack::sampled(vec![0.0, 0.1, 0.25, 0.3, 0.4], v.clone()).is_err());
    assert!(CoefficientTrack::sampled(vec![0.0, 0.1, 0.2], v[..3].to_vec()).is_err());
    assert!(CoefficientTrack::sampled(vec![0.0, 0.1, 0.2, 0.3, 0.4], v).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hamiltonians_are_linear_in_alpha(w in -2.0..2.0f64, a in -1.0..1.0f64, a2 in -1.0..1.0f64, b in -1.0..1.0f64, t in 0.0..1.0f64) {
        let cfg = FockConfig::new(12).unwrap();
        let h = |w: f64, a: f64, b: f64| {
            let lin = LinearModel::new(CoefficientTrack::real(w), CoefficientTrack::real(a), CoefficientTrack::real(b));
            let sw = SwansonModel::new(CoefficientTrack::real(w), CoefficientTrack::real(a), CoefficientTrack::real(b));
            (build_linear_hamiltonian(&lin, t, &cfg), build_swanson_hamiltonian(&sw, t, &cfg))
        };
        let (l, s) = h(w, a + a2, b);
        let (l1, s1) = h(w, a, b);
        let (l2, s2) = h(0.0, a2, 0.0);
        prop_assert!(max_abs(&(&l - &(&l1 + &l2))) < 1e-14);
        prop_assert!(max_abs(&(&s - &(&s1 + &s2))) < 1e-13);
    }

    #[test]
    fn symmetrized_matrices_have_zero_residual(v in prop::collection::vec(-1.0..1.0f64, 2 * 64)) {
        let m = OperatorMatrix::from_fn(8, |i, j| C64::new(v[2 * (8 * i + j)], v[2 * (8 * i + j) + 1]));
        let cfg = small(8);
        prop_assert_eq!(hermiticity_residual(&(&m + &m.dagger()), &cfg), 0.0);
    }
}
