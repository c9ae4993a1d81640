//! Map solvers against matrix oracles and closed forms.

use std::sync::Arc;

use dysonchain::chain::{lift, lower, ChainNode};
use dysonchain::dyson::{
    bar_f, bar_gamma, bar_root_residuals, build_bar_map_linear, invariant_counterpart_coeffs, linear_hermitian_coeffs,
    metric_drift, quasi_hermiticity_residual, solve_gamma_ode, solve_schrodinger_like, solve_swanson_bar,
    solve_swanson_bar_track, solve_swanson_invariant, swanson_bar_oracle, InvariantOptions, InvariantPath,
};
use dysonchain::fock::{gauss_decompose, guarded_rel, ladder_n, matrix_exp, number_n, FockConfig, OperatorMatrix, C64};
use dysonchain::models::{build_linear_hamiltonian, hermiticity_residual};
use dysonchain::{FdScheme, Grid, LinearModel, SwansonModel, TimeOperator};
use proptest::prelude::*;

const I: C64 = C64::new(0.0, 1.0);

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn padded(dim: usize, pad: usize) -> FockConfig {
    FockConfig::new(dim).unwrap().with_pad(pad)
}

/// `exp(γa + γ*a†)` and its inverse, built directly.
fn displacement_pair(g: C64, n: usize) -> (OperatorMatrix, OperatorMatrix) {
    let (a, ad) = ladder_n(n);
    let m = a.scale(g) + ad.scale(g.conj());
    (matrix_exp(&m).unwrap(), matrix_exp(&-&m).unwrap())
}

fn identity_part(m: &OperatorMatrix, keep: usize) -> C64 {
    m.block(keep).trace() / keep as f64
}

#[test]
fn bar_values_for_constant_drive() {
    let m = LinearModel::from_exprs("1", "0.2", "0.4").unwrap();
    let b = bar_gamma(&m, 0.0).unwrap();
    assert!((b.gamma - c(0.1, 0.0)).norm() < 1e-15);
    assert!(b.warning.is_none());
    assert!((bar_f(&m, 0.0).unwrap() - c(0.01, 0.0)).norm() < 1e-15);
}

#[test]
fn bar_values_vanish_for_hermitian_drive() {
    let m = LinearModel::from_exprs("1.3", "0.25", "0.25").unwrap();
    assert_eq!(bar_gamma(&m, 0.0).unwrap().gamma, c(0.0, 0.0));
    assert_eq!(bar_f(&m, 0.0).unwrap(), c(0.0, 0.0));
}

#[test]
fn bar_values_for_imaginary_drive() {
    let m = LinearModel::from_exprs("2", "0.1*i", "0.3*i").unwrap();
    let b = bar_gamma(&m, 0.0).unwrap();
    assert!((b.gamma - c(0.0, -0.1)).norm() < 1e-15);
    assert!(b.side_violation < 1e-15);
    let f = bar_f(&m, 0.0).unwrap();
    assert!((f - c(0.02, 0.0)).norm() < 1e-15);

    // the identity part of η̄Hη̄⁻¹, measured with matrices
    let n = 60;
    let (e, ei) = displacement_pair(b.gamma, n);
    let h = build_linear_hamiltonian(&m, 0.0, &padded(40, 20));
    let hb = e.dot(&h).dot(&ei);
    let keep = 35;
    assert!((hb.get(0, 0) - f).norm() < 1e-12);
    assert!(hermiticity_residual(&hb, &FockConfig::new(40).unwrap()) < 1e-10);
    assert!((identity_part(&(&hb - &number_n(n).scale(c(2.0, 0.0))), keep) - f).norm() < 1e-12);
}

#[test]
fn bar_side_condition_is_flagged() {
    let m = LinearModel::from_exprs("1", "0.2*i", "0.4").unwrap();
    let b = bar_gamma(&m, 0.0).unwrap();
    assert!(b.side_violation > 0.07);
    assert!(b.warning.is_some());
}

#[test]
fn bar_map_of_free_model_is_identity() {
    let m = LinearModel::from_exprs("1", "0", "0").unwrap();
    let grid = Grid::new(0.0, 0.1, 0.01).unwrap();
    let cfg = FockConfig::new(10).unwrap();
    let map = build_bar_map_linear(&m, &grid, &cfg).unwrap();
    for i in [0, 5, 10] {
        assert_eq!(map.eta(i).unwrap(), OperatorMatrix::identity(10));
    }
}

#[test]
fn bar_counterpart_matches_closed_form() {
    let m = LinearModel::from_exprs("1", "0.2", "0.4").unwrap();
    let cfg = padded(40, 20);
    let grid = Grid::new(0.0, 0.01, 0.01).unwrap();
    let map = build_bar_map_linear(&m, &grid, &cfg).unwrap();
    let n = cfg.work_dim();
    let h = build_linear_hamiltonian(&m, 0.0, &cfg);
    let (e, ei) = displacement_pair(c(0.1, 0.0), n);
    let hb = e.dot(&h).dot(&ei);
    let (a, ad) = ladder_n(n);
    let u = c(0.3, 0.0);
    let want = number_n(n) + a.scale(u) + ad.scale(u.conj()) + OperatorMatrix::scalar(n, c(0.01, 0.0));
    assert!(guarded_rel(&hb, &want, &cfg, 1.0) < 1e-9);
    assert!(guarded_rel(&map.conjugate(0, &h).unwrap(), &want, &cfg, 1.0) < 1e-9);
}

#[test]
fn bar_counterpart_is_hermitian_along_a_drive() {
    let m = LinearModel::from_exprs("1", "0.2*sin(t)", "0.4*sin(t)").unwrap();
    let cfg = padded(40, 20);
    let grid = Grid::new(0.0, 1.0, 0.05).unwrap();
    let map = build_bar_map_linear(&m, &grid, &cfg).unwrap();
    let h = m.hamiltonian(&grid, &cfg);
    for i in 0..grid.len() {
        let hb = map.conjugate(i, &h.at(i).unwrap()).unwrap();
        assert!(hermiticity_residual(&hb, &cfg) < 1e-10, "t = {}", grid.t(i));
    }
}

#[test]
fn gamma_ode_fixed_point_at_zero() {
    let m = LinearModel::from_exprs("1", "0", "0").unwrap();
    let grid = Grid::new(0.0, 1.0, 1e-2).unwrap();
    let map = solve_gamma_ode(&m, c(0.0, 0.0), &grid, &FockConfig::new(10).unwrap()).unwrap();
    assert!(map.gammas().unwrap().iter().all(|g| g.norm() == 0.0));
}

#[test]
fn gamma_ode_matches_integrating_factor() {
    let (w, al, be) = (1.0, c(0.2, 0.0), c(0.4, 0.0));
    let m = LinearModel::from_exprs("1", "0.2", "0.4").unwrap();
    let g0 = c(0.1, -0.05);
    let grid = Grid::new(0.0, 1.0, 1e-3).unwrap();
    let map = solve_gamma_ode(&m, g0, &grid, &FockConfig::new(10).unwrap()).unwrap();
    let star = -(al - be.conj()) / (2.0 * w);
    let exact = |t: f64| (I * w * t).exp() * (g0 - star) + star;
    let gs = map.gammas().unwrap();
    assert!((gs[grid.len() - 1] - exact(1.0)).norm() < 1e-9);
    let worst = grid.times().iter().zip(gs).map(|(&t, g)| (g - exact(t)).norm()).fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn gamma_ode_is_stationary_at_the_bar_value() {
    let m = LinearModel::from_exprs("1", "0.2", "0.4").unwrap();
    let grid = Grid::new(0.0, 5.0, 1e-3).unwrap();
    let g0 = bar_gamma(&m, 0.0).unwrap().gamma;
    let map = solve_gamma_ode(&m, g0, &grid, &FockConfig::new(10).unwrap()).unwrap();
    let drift = map.gammas().unwrap().iter().map(|g| (g - g0).norm()).fold(0.0, f64::max);
    assert!(drift < 1e-9, "{drift}");
}

#[test]
fn hermitian_coefficients_for_trivial_gamma() {
    let m = LinearModel::from_exprs("1", "0.2*sin(t)", "0.4").unwrap();
    let grid = Grid::new(0.0, 0.5, 0.01).unwrap();
    let zero = vec![c(0.0, 0.0); grid.len()];
    let hc = linear_hermitian_coeffs(&m, &zero, &grid, FdScheme::Richardson);
    for (i, t) in grid.times().into_iter().enumerate() {
        assert_eq!(hc.u[i], m.alpha.eval(t));
        assert_eq!(hc.v[i], m.beta.eval(t));
        assert_eq!(hc.f[i], c(0.0, 0.0));
    }
}

#[test]
fn gamma_ode_gives_hermitian_linear_part() {
    let m = LinearModel::from_exprs("1", "0.2*sin(t)", "0.4*cos(t)").unwrap();
    let grid = Grid::new(0.0, 1.0, 1e-3).unwrap();
    let map = solve_gamma_ode(&m, c(0.07, 0.02), &grid, &FockConfig::new(10).unwrap()).unwrap();
    let hc = linear_hermitian_coeffs(&m, map.gammas().unwrap(), &grid, FdScheme::Richardson);
    assert!(hc.max_v_minus_u_conj() < 1e-8);
    for (i, t) in grid.times().into_iter().enumerate() {
        let (_, al, be) = m.coefficients(t);
        assert!((hc.u[i] - (al + be.conj()) / 2.0).norm() < 1e-8, "t = {t}");
    }
}

#[test]
fn identity_coefficient_matches_matrices() {
    let m = LinearModel::from_exprs("1", "0.2", "0.4").unwrap();
    let cfg = padded(40, 20);
    let grid = Grid::new(0.0, 0.2, 1e-2).unwrap();
    let g = bar_gamma(&m, 0.0).unwrap().gamma;
    let map = solve_gamma_ode(&m, g, &grid, &cfg).unwrap();
    let hc = linear_hermitian_coeffs(&m, map.gammas().unwrap(), &grid, FdScheme::Richardson);
    let h = m.hamiltonian(&grid, &cfg);
    let n = cfg.work_dim();
    let (a, ad) = ladder_n(n);
    for i in [0, 10, 20] {
        let hp = map.counterpart(i, &h.at(i).unwrap()).unwrap();
        let rest = &(&hp - &number_n(n)) - &(a.scale(hc.u[i]) + ad.scale(hc.v[i]));
        assert!((identity_part(&rest, cfg.keep()) - hc.f[i]).norm() < 1e-10);
    }
}

#[test]
fn swanson_bar_trivial_root() {
    let m = SwansonModel::from_exprs("1", "0", "0").unwrap();
    let root = solve_swanson_bar(&m, 0.0, (0.2, c(0.0, 0.0))).unwrap();
    assert_eq!(root.params.mu, c(0.0, 0.0));
    assert!(swanson_bar_oracle(&root.params, &m, 0.0, &padded(30, 30)).unwrap() < 1e-14);
}

#[test]
fn swanson_bar_root_converges() {
    let m = SwansonModel::from_exprs("1", "0.2", "0.3").unwrap();
    let root = solve_swanson_bar(&m, 0.0, (-0.15, c(-0.01, 0.0))).unwrap();
    assert!(root.residual[0].abs().max(root.residual[1].abs()) < 1e-12);
    let oracle = swanson_bar_oracle(&root.params, &m, 0.0, &padded(60, 40)).unwrap();
    assert!(oracle < 1e-8, "{oracle}");

    let again = solve_swanson_bar(&m, 0.0, (root.params.epsilon, root.params.mu)).unwrap();
    assert!((again.params.mu - root.params.mu).norm() <= 4.0 * f64::EPSILON * root.params.mu.norm());
    let (w, al, be) = m.coefficients(0.0);
    let r = bar_root_residuals(&again.params, w, al, be);
    assert!(r[0].abs().max(r[1].abs()) < 1e-12);
}

#[test]
fn swanson_bar_track_is_smooth() {
    let m = SwansonModel::from_exprs("1", "0.2*cos(t)", "0.3*cos(t)").unwrap();
    let grid = Grid::new(0.0, 1.0, 0.05).unwrap();
    let (map, roots) = solve_swanson_bar_track(&m, &grid, &padded(20, 20), (-0.15, c(-0.01, 0.0))).unwrap();
    assert_eq!(roots.len(), grid.len());
    assert!(roots.iter().all(|r| r.iterations <= 10));
    let p = map.su11_params().unwrap();
    let jump = p.windows(2).map(|w| (w[1].mu - w[0].mu).norm()).fold(0.0, f64::max);
    assert!(jump < 0.01, "{jump}");
}

#[test]
fn invariant_map_is_stationary_for_constant_coefficients() {
    let m = SwansonModel::from_exprs("1", "0.2", "0.3").unwrap();
    let root = solve_swanson_bar(&m, 0.0, (-0.15, c(-0.01, 0.0))).unwrap();
    let grid = Grid::new(0.0, 5.0, 1e-2).unwrap();
    let opts = InvariantOptions { oracle_stride: 100, ..Default::default() };
    let (sol, rep) = solve_swanson_invariant(&m, &root.params, &grid, &padded(30, 30), &opts).unwrap();
    assert_eq!(rep.path, InvariantPath::Nominal);
    assert!(rep.nominal_drift_rate < 1e-10, "{}", rep.nominal_drift_rate);
    let gap = sol.su11_params().unwrap().iter().map(|p| (p.mu - root.params.mu).norm()).fold(0.0, f64::max);
    assert!(gap < 1e-8, "{gap}");
}

#[test]
fn invariant_counterpart_of_free_model() {
    let p = gauss_decompose(0.3, c(0.0, 0.0)).unwrap();
    let (w, v) = invariant_counterpart_coeffs(&p, c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
    assert!((w - c(1.0, 0.0)).norm() < 1e-15);
    assert!(v.norm() < 1e-15);
}

#[test]
fn invariant_map_with_driven_coefficients() {
    let m = SwansonModel::from_exprs("1", "0.2*cos(t)", "0.3*cos(t)").unwrap();
    let root = solve_swanson_bar(&m, 0.0, (-0.15, c(-0.01, 0.0))).unwrap();
    let grid = Grid::new(0.0, 1.0, 1e-3).unwrap();
    let cfg = padded(30, 30);
    let opts = InvariantOptions { oracle_stride: 250, ..Default::default() };
    let (sol, rep) = solve_swanson_invariant(&m, &root.params, &grid, &cfg, &opts).unwrap();
    assert!(rep.residual < 1e-6, "{rep:?}");
    assert_eq!(rep.checked_points, 5);
    if rep.path == InvariantPath::Fallback {
        assert!(rep.nominal_residual > opts.tolerance || rep.nominal_error.is_some());
    }
    for i in 0..grid.len() {
        if i % 200 == 0 {
            assert!(sol.hermiticity_of_eta(i).unwrap() < 1e-12);
        }
    }
}

#[test]
fn schrodinger_like_map_of_hermitian_generator() {
    let m = LinearModel::from_exprs("1", "0.3", "0.3").unwrap();
    let cfg = FockConfig::new(12).unwrap();
    let grid = Grid::new(0.0, 1.0, 1e-3).unwrap();
    let h = m.hamiltonian(&grid, &cfg);
    let map = solve_schrodinger_like(&h, OperatorMatrix::identity(12), &cfg).unwrap();
    for i in [0, 500, 1000] {
        let rho = map.rho(i).unwrap();
        let err = (&rho - &OperatorMatrix::identity(12)).norm_fro();
        assert!(err < 1e-9, "{err}");
    }
}

#[test]
fn schrodinger_like_map_freezes_the_metric() {
    let m = LinearModel::from_exprs("1", "0.2", "0.4").unwrap();
    let cfg = padded(20, 15);
    let grid = Grid::new(0.0, 1.0, 1e-3).unwrap();
    let eta0 = build_bar_map_linear(&m, &grid, &cfg).unwrap().eta(0).unwrap();
    let h = m.hamiltonian(&grid, &cfg);
    let map = Arc::new(solve_schrodinger_like(&h, eta0, &cfg).unwrap());
    assert!(metric_drift(&map).unwrap() < 1e-6);

    let zero = OperatorMatrix::zeros(cfg.work_dim());
    for i in [0, 400, 1000] {
        let r = quasi_hermiticity_residual(&h.at(i).unwrap(), &map.rho(i).unwrap(), &zero, &cfg);
        assert!(r < 1e-6, "{r}");
    }

    let mut node = ChainNode::base(h.clone());
    let up = lift(&mut node, map).unwrap();
    for i in [0, 1, 500, 999, 1000] {
        let h0 = h.at(i).unwrap();
        let dev = guarded_rel(&up.hamiltonian.at(i).unwrap(), &h0.scale_re(2.0), &cfg, 0.0);
        assert!(dev < 1e-6, "{dev}");
    }
}

#[test]
fn schrodinger_like_rejects_a_singular_start() {
    let cfg = FockConfig::new(8).unwrap();
    let grid = Grid::new(0.0, 0.1, 0.01).unwrap();
    let h = LinearModel::from_exprs("1", "0", "0").unwrap().hamiltonian(&grid, &cfg);
    assert!(solve_schrodinger_like(&h, OperatorMatrix::zeros(8), &cfg).is_err());
}

#[test]
fn quasi_hermiticity_trivial_case() {
    let cfg = FockConfig::new(10).unwrap();
    let h = build_linear_hamiltonian(&LinearModel::from_exprs("1", "0.3", "0.3").unwrap(), 0.0, &cfg);
    let r = quasi_hermiticity_residual(&h, &OperatorMatrix::identity(10), &OperatorMatrix::zeros(10), &cfg);
    assert!(r < 1e-16);
}

#[test]
fn quasi_hermiticity_of_the_bar_pair() {
    let m = LinearModel::from_exprs("1", "0.2*sin(t)", "0.4*sin(t)").unwrap();
    let cfg = padded(30, 20);
    let grid = Grid::new(0.0, 1.0, 1e-3).unwrap();
    let map = Arc::new(build_bar_map_linear(&m, &grid, &cfg).unwrap());
    let h = m.hamiltonian(&grid, &cfg);
    let below = lower(&ChainNode::base(h.clone()), map.clone()).unwrap();
    let zero = OperatorMatrix::zeros(cfg.work_dim());
    for i in [3, 250, 500, 997] {
        let rho = map.rho(i).unwrap();
        let r = quasi_hermiticity_residual(&below.hamiltonian.at(i).unwrap(), &rho, &map.rho_dot(i).unwrap(), &cfg);
        assert!(r < 1e-8, "{r}");
        let r0 = quasi_hermiticity_residual(&h.at(i).unwrap(), &rho, &zero, &cfg);
        assert!(r0 < 1e-10, "{r0}");
    }
}

/// Central differences: halving the step cuts the error in ρ̇ about 4×.
#[test]
fn finite_difference_rate_is_second_order() {
    let m = LinearModel::from_exprs("1", "0.2*sin(2*t)", "0.4*sin(2*t)").unwrap();
    let cfg = padded(16, 10);
    let error = |step: f64| {
        let grid = Grid::new(0.0, 1.0, step).unwrap();
        let map = build_bar_map_linear(&m, &grid, &cfg).unwrap();
        let i = grid.index_of(0.5).unwrap();
        let fine = map.rho_dot(i).unwrap();
        let rough = map.with_scheme(FdScheme::Central2).rho_dot(i).unwrap();
        (&rough - &fine).norm_fro() / fine.norm_fro()
    };
    let (coarse, fine) = (error(0.02), error(0.01));
    let ratio = coarse / fine;
    assert!((ratio - 4.0).abs() < 0.4, "{coarse:e} / {fine:e} = {ratio}");
}

#[test]
fn maps_are_hermitian_and_metrics_positive() {
    let lin = LinearModel::from_exprs("1", "0.2*sin(t)", "0.4").unwrap();
    let cfg = padded(20, 10);
    let grid = Grid::new(0.0, 1.0, 0.01).unwrap();
    let bar = build_bar_map_linear(&lin, &grid, &cfg).unwrap();
    let sw = SwansonModel::from_exprs("1", "0.2", "0.3").unwrap();
    let (su, _) = solve_swanson_bar_track(&sw, &grid, &cfg, (-0.15, c(-0.01, 0.0))).unwrap();
    for map in [&bar, &su] {
        for i in [0, 50, 100] {
            assert!(map.hermiticity_of_eta(i).unwrap() < 1e-12);
            assert!(map.rho_min_eigenvalue(i).unwrap() > 0.0);
        }
    }
}

#[test]
fn conjugation_preserves_the_interior_spectrum() {
    // both sides against E_n = ω n − αβ/ω
    let m = LinearModel::from_exprs("1", "0.2", "0.4").unwrap();
    let cfg = padded(40, 20);
    let grid = Grid::new(0.0, 0.01, 0.01).unwrap();
    let map = build_bar_map_linear(&m, &grid, &cfg).unwrap();
    let h = build_linear_hamiltonian(&m, 0.0, &cfg);
    let hb = map.conjugate(0, &h).unwrap().block(cfg.keep());
    let (vals, _) = hb.hermitian_eigen();
    let mut raw = h.eigenvalues();
    raw.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
    for n in 0..10 {
        let want = n as f64 - 0.08;
        assert!((vals[n] - want).abs() < 1e-8, "h̄: {} vs {want}", vals[n]);
        assert!((raw[n] - c(want, 0.0)).norm() < 1e-8, "H: {} vs {want}", raw[n]);
    }
}

fn time_op(grid: Grid, m: OperatorMatrix) -> TimeOperator {
    TimeOperator::indexed(grid, m.dim(), move |_| Ok(m.clone()))
}

#[test]
fn constant_generator_gives_exponential() {
    // η_t = η₀ e^{−iHt} for constant H
    let cfg = FockConfig::new(8).unwrap();
    let grid = Grid::new(0.0, 1.0, 1e-3).unwrap();
    let h = build_linear_hamiltonian(&LinearModel::from_exprs("1", "0.2", "0.4").unwrap(), 0.0, &cfg);
    let (e0, _) = displacement_pair(c(0.1, 0.0), 8);
    let map = solve_schrodinger_like(&time_op(grid, h.clone()), e0.clone(), &cfg).unwrap();
    let exact = e0.dot(&matrix_exp(&h.scale(-I)).unwrap());
    let err = (&map.eta(grid.len() - 1).unwrap() - &exact).norm_fro() / exact.norm_fro();
    assert!(err < 1e-10, "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bar_counterpart_is_hermitian(w in 0.5..2.0f64, a in -0.4..0.4f64, b in -0.4..0.4f64, phase in -3.0..3.0f64) {
        // Im(αβ) = 0 with α = a e^{iφ}, β = b e^{−iφ}
        let al = C64::from_polar(a, phase);
        let be = C64::from_polar(b, -phase);
        let src = |z: C64| format!("{:?} + {:?}*i", z.re, z.im);
        let m = LinearModel::from_exprs(&format!("{w:?}"), &src(al), &src(be)).unwrap();
        let cfg = padded(20, 20);
        let g = bar_gamma(&m, 0.0).unwrap().gamma;
        let (e, ei) = displacement_pair(g, cfg.work_dim());
        let hb = e.dot(&build_linear_hamiltonian(&m, 0.0, &cfg)).dot(&ei);
        let r = hermiticity_residual(&hb, &cfg);
        prop_assert!(r < 1e-10, "{}", r);
        prop_assert!((hb.get(0, 0) - bar_f(&m, 0.0).unwrap()).norm() < 1e-10);
    }
}
