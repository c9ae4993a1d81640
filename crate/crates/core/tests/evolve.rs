use std::collections::BTreeMap;
use std::sync::Arc;

use dysonchain::chain::{build_chain, ChainOptions};
use dysonchain::dyson::{build_bar_map_linear, linear_hermitian_coeffs, solve_gamma_ode};
use dysonchain::evolve::{
    analytic_propagate, cross_space_matrix_elements, inner, propagate_flat, propagate_metric,
    quadrature_expectations, schrodinger_residual, AnalyticPropagatorSpec, Space, Stepper,
};
use dysonchain::fock::{coherent_state, number_n};
use dysonchain::{
    ChainNode, Error, FdScheme, FockConfig, Grid, LinearModel, Observable, OperatorMatrix, StateVector, TimeOperator,
    C64,
};
use ndarray::Array1;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn cfg(dim: usize, pad: usize) -> FockConfig {
    FockConfig::new(dim).unwrap().with_pad(pad)
}

fn constant(grid: Grid, m: OperatorMatrix) -> TimeOperator {
    TimeOperator::sampled(grid, vec![m; grid.len()]).unwrap()
}

#[test]
fn number_state_picks_up_its_phase() {
    let fock = cfg(10, 0);
    let grid = Grid::new(0.0, 2.0, 1e-2).unwrap();
    let h = constant(grid, number_n(10).scale_re(1.5));
    let mut amps = Array1::from_elem(10, c(0.0, 0.0));
    amps[1] = c(1.0, 0.0);
    let phi0 = StateVector::new(amps, Space::Flat(0), 0.0).unwrap();
    for stepper in [Stepper::Cf4, Stepper::Midpoint] {
        let rec = propagate_flat(&h, &phi0, &fock, stepper).unwrap();
        for (i, t) in grid.times().into_iter().enumerate() {
            let want = C64::from_polar(1.0, -1.5 * t);
            assert!((rec.states[i][1] - want).norm() < 1e-12, "{stepper:?} t = {t}");
        }
        assert!(rec.flat_norm_drift() < 1e-13);
    }
}

#[test]
fn flat_propagation_refuses_non_hermitian_generators() {
    let fock = cfg(20, 0);
    let grid = Grid::new(0.0, 0.1, 1e-2).unwrap();
    let h = LinearModel::from_exprs("1", "0.2", "0.4").unwrap().hamiltonian(&grid, &fock);
    let phi0 = StateVector::coherent(c(0.5, 0.0), &fock, Space::Flat(0), 0.0).unwrap();
    assert!(matches!(propagate_flat(&h, &phi0, &fock, Stepper::Cf4), Err(Error::NotHermitian { .. })));
}

#[test]
fn coherent_amplitude_is_capped() {
    let fock = cfg(20, 0);
    assert!(StateVector::coherent(c(2.0, 0.0), &fock, Space::Flat(0), 0.0).is_err());
    let s = StateVector::coherent(c(0.5, 0.5), &fock, Space::Flat(0), 0.0).unwrap();
    assert!((s.flat_norm() - 1.0).abs() < 1e-12);
}

#[test]
fn identity_map_reduces_metric_to_flat() {
    let m = LinearModel::from_exprs("1", "0.3*sin(t)", "0.3*sin(t)").unwrap();
    let fock = cfg(20, 10);
    let grid = Grid::new(0.0, 1.0, 1e-2).unwrap();
    let free = LinearModel::from_exprs("1", "0", "0").unwrap();
    let map = build_bar_map_linear(&free, &grid, &fock).unwrap();
    let h = m.hamiltonian(&grid, &fock);
    let psi0 = StateVector::coherent(c(0.4, -0.2), &fock, Space::Metric(0), 0.0).unwrap();
    let metric = propagate_metric(&h, &psi0, &map, Some(&h), Stepper::Cf4).unwrap();
    let flat = propagate_flat(&h, &psi0, &fock, Stepper::Cf4).unwrap();
    assert_eq!(metric.metric_norm, flat.flat_norm);
    assert_eq!(metric.max_transport_residual(), 0.0);
}

#[test]
fn metric_norm_is_conserved_under_the_bar_map() {
    let m = LinearModel::from_exprs("1", "0.2", "0.4").unwrap();
    let fock = cfg(30, 20);
    let grid = Grid::new(0.0, 2.0, 1e-3).unwrap();
    let map = Arc::new(build_bar_map_linear(&m, &grid, &fock).unwrap());
    let h = m.hamiltonian(&grid, &fock);
    let m2 = map.clone();
    let hb = h.map(move |i, x| m2.conjugate(i, &x));
    let psi0 = StateVector::coherent(c(0.5, 0.2), &fock, Space::Metric(0), 0.0).unwrap();
    let rec = propagate_metric(&h, &psi0, &map, Some(&hb), Stepper::Cf4).unwrap();
    assert!(rec.metric_norm_drift() < 1e-9, "{}", rec.metric_norm_drift());
    assert!(rec.max_transport_residual() < 1e-8, "{}", rec.max_transport_residual());
    // the flat norm of ψ is not conserved
    assert!(rec.flat_norm_drift() > 1e-3);
}

#[test]
fn free_oscillator_closed_form() {
    let m = LinearModel::from_exprs("1", "0", "0").unwrap();
    let fock = cfg(30, 20);
    let grid = Grid::new(0.0, 3.0, 2e-3).unwrap();
    let h = m.hamiltonian(&grid, &fock);
    let zero = vec![c(0.0, 0.0); grid.len()];
    let hc = linear_hermitian_coeffs(&m, &zero, &grid, FdScheme::Richardson);
    let spec = AnalyticPropagatorSpec::new(c(0.0, 0.0), 0, &m.omega, &hc, &grid).unwrap();
    let r = 0.7;
    let traj = analytic_propagate(&spec, c(r, 0.0), &grid, &fock, Some(&h)).unwrap();
    assert!(traj.residual.unwrap() < 1e-8);
    for (i, t) in grid.times().into_iter().enumerate() {
        assert!((traj.amplitude[i] - C64::from_polar(r, -t)).norm() < 1e-12);
        let direct = coherent_state(C64::from_polar(r, -t), &fock).unwrap();
        let overlap = inner(&direct, &traj.record.states[i]).norm();
        assert!((overlap - 1.0).abs() < 1e-10, "t = {t}");
    }

    // quadratures by three routes against r cos χ and −r sin χ
    let map = build_bar_map_linear(&m, &grid, &fock).unwrap();
    let psi0 = StateVector::coherent(c(r, 0.0), &fock, Space::Metric(0), 0.0).unwrap();
    let metric = propagate_metric(&h, &psi0, &map, None, Stepper::Cf4).unwrap();
    let flat = propagate_flat(&h, &psi0, &fock, Stepper::Cf4).unwrap();
    let q = quadrature_expectations(&map, &metric, &flat, &traj).unwrap();
    for (i, t) in q.times.iter().enumerate() {
        assert!((q.metric[i][0] - r * t.cos()).abs() < 1e-9);
        assert!((q.metric[i][1] + r * t.sin()).abs() < 1e-9);
    }
    assert!(q.metric_vs_closed < 1e-9 && q.flat_vs_closed < 1e-9);
}

#[test]
fn schrodinger_residual_flags_a_wrong_phase() {
    let fock = cfg(10, 0);
    let grid = Grid::new(0.0, 1.0, 1e-3).unwrap();
    let h = constant(grid, number_n(10));
    let basis = |t: f64, w: f64| {
        let mut v = Array1::from_elem(10, c(0.0, 0.0));
        v[2] = C64::from_polar(1.0, -w * t);
        v
    };
    let good: Vec<_> = grid.times().into_iter().map(|t| basis(t, 2.0)).collect();
    let bad: Vec<_> = grid.times().into_iter().map(|t| basis(t, 2.1)).collect();
    assert!(schrodinger_residual(&h, &good, &fock).unwrap() < 1e-8);
    assert!((schrodinger_residual(&h, &bad, &fock).unwrap() - 0.1).abs() < 1e-6);
}

#[test]
fn observables_agree_across_a_global_link() {
    // α = −β* keeps the scalar part of every counterpart real
    let m = LinearModel::from_exprs("1", "-0.3", "0.3").unwrap();
    let fock = cfg(30, 20);
    let grid = Grid::new(0.0, 1.0, 1e-3).unwrap();
    let bar = Arc::new(build_bar_map_linear(&m, &grid, &fock).unwrap());
    let ode = Arc::new(solve_gamma_ode(&m, c(0.15, 0.05), &grid, &fock).unwrap());
    let maps = BTreeMap::from([(-1, bar.clone()), (0, ode.clone())]);
    let nodes = build_chain(ChainNode::base(m.hamiltonian(&grid, &fock)), &maps, -1, 1, &fock, &ChainOptions::default())
        .unwrap();
    let link = nodes[0].gauge_to_next.as_ref().unwrap();

    // matching initial states: η̄ ψ = η ψ′
    let psi0 = StateVector::coherent(c(0.3, 0.1), &fock, Space::Metric(-1), 0.0).unwrap();
    let up0 = ode.eta_inv(0).unwrap().dot(&bar.eta(0).unwrap()).apply(&psi0.amplitudes);
    let up0 = StateVector::new(up0, Space::Metric(0), 0.0).unwrap();
    let lo = propagate_metric(&nodes[0].hamiltonian, &psi0, &bar, None, Stepper::Cf4).unwrap();
    let up = propagate_metric(&nodes[1].hamiltonian, &up0, &ode, None, Stepper::Cf4).unwrap();

    let [x1, _] = Observable::quadratures(fock.work_dim());
    let one = Observable::new(OperatorMatrix::identity(fock.work_dim()), &fock).unwrap();
    for obs in [&one, &x1] {
        for i in [0, 500, 1000] {
            let rep = cross_space_matrix_elements(
                obs,
                [&bar, &ode],
                link,
                (&lo.states[i], &lo.states[i]),
                (&up.states[i], &up.states[i]),
                i,
            )
            .unwrap();
            assert!(rep.deviation < 1e-7, "t = {}: {}", grid.t(i), rep.deviation);
        }
    }
}

