//! State propagation in flat and metric spaces, observable transport, and
//! the displaced-Fock propagator of the linear model.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::chain::{ChainNode, GaugeKind, GaugeLink};
use crate::dyson::{DysonMapSolution, HermitianCoefficients};
use crate::error::{Error, Result};
use crate::fock::{coherent_state, displacement, expm_action, ladder_n, FockConfig, OperatorMatrix, C64, I};
use crate::grid::{cumulative_integral, differentiate, rk4_integrate, FdScheme, Grid, TimeOperator};
use crate::models::{hermiticity_residual, CoefficientTrack};

/// Which Hilbert space a state lives in, and at which chain level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "level", rename_all = "snake_case")]
pub enum Space {
    /// `φ`-type: flat inner product.
    Flat(i32),
    /// `ψ`-type: inner product weighted by the level's metric.
    Metric(i32),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub amplitudes: Array1<C64>,
    pub space: Space,
    pub time: f64,
}

impl StateVector {
    pub fn new(amplitudes: Array1<C64>, space: Space, time: f64) -> Result<Self> {
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("state vector"));
        }
        Ok(StateVector { amplitudes, space, time })
    }

    /// `D(θ)|0⟩`, refusing amplitudes beyond `√keep / 2`.
    pub fn coherent(theta: C64, fock: &FockConfig, space: Space, time: f64) -> Result<Self> {
        let cap = (fock.keep() as f64).sqrt() / 2.0;
        if theta.norm() > cap {
            return Err(Error::InvalidConfig(format!("|θ| = {} exceeds the amplitude cap {cap}", theta.norm())));
        }
        Self::new(coherent_state(theta, fock)?, space, time)
    }

    pub fn flat_norm(&self) -> f64 {
        norm_sqr(&self.amplitudes)
    }

    /// `⟨ψ|ρψ⟩`
    pub fn metric_norm(&self, rho: &OperatorMatrix) -> f64 {
        inner(&self.amplitudes, &rho.apply(&self.amplitudes)).re
    }
}

/// `⟨x|y⟩`
pub fn inner(x: &Array1<C64>, y: &Array1<C64>) -> C64 {
    x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum()
}

fn norm_sqr(x: &Array1<C64>) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// Time stepper for `i ∂_t x = G_t x`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stepper {
    /// Fourth-order commutator-free exponential integrator (two exponentials
    /// per step, generator sampled at the Gauss points).
    #[default]
    Cf4,
    /// `exp(−iδ G_{t+δ/2})`
    Midpoint,
}

const SQRT3_6: f64 = 0.288_675_134_594_812_9;

/// One step of length `dt` from `t`.
pub fn step(g: &TimeOperator, t: f64, dt: f64, x: &Array1<C64>, stepper: Stepper) -> Result<Array1<C64>> {
    match stepper {
        Stepper::Midpoint => expm_action(&g.at_time(t + dt / 2.0)?.scale(-I * dt), x),
        Stepper::Cf4 => {
            let g1 = g.at_time(t + (0.5 - SQRT3_6) * dt)?;
            let g2 = g.at_time(t + (0.5 + SQRT3_6) * dt)?;
            let (a1, a2) = (0.25 + SQRT3_6, 0.25 - SQRT3_6);
            let first = (&g1.scale_re(a1) + &g2.scale_re(a2)).scale(-I * dt);
            let second = (&g1.scale_re(a2) + &g2.scale_re(a1)).scale(-I * dt);
            expm_action(&second, &expm_action(&first, x)?)
        }
    }
}

fn propagate(g: &TimeOperator, x0: &Array1<C64>, stepper: Stepper) -> Result<Vec<Array1<C64>>> {
    if x0.len() != g.dim() {
        return Err(Error::DimMismatch { expected: g.dim(), got: x0.len() });
    }
    let grid = g.grid();
    let mut out = Vec::with_capacity(grid.len());
    out.push(x0.clone());
    for i in 0..grid.len() - 1 {
        let next = step(g, grid.t(i), grid.t(i + 1) - grid.t(i), &out[i], stepper)?;
        out.push(next);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub grid: Grid,
    pub space: Space,
    pub stepper: Stepper,
    pub states: Vec<Array1<C64>>,
    pub flat_norm: Vec<f64>,
    /// `⟨ψ|ρψ⟩`; empty for flat trajectories.
    pub metric_norm: Vec<f64>,
    /// `‖η ψ − φ‖` against a parallel flat run; empty when not checked.
    pub transport_residual: Vec<f64>,
}

fn max_drift(v: &[f64]) -> f64 {
    v.iter().map(|x| (x - v[0]).abs()).fold(0.0, f64::max)
}

impl TrajectoryRecord {
    fn new(grid: Grid, space: Space, stepper: Stepper, states: Vec<Array1<C64>>) -> Self {
        let flat_norm = states.iter().map(norm_sqr).collect();
        TrajectoryRecord { grid, space, stepper, states, flat_norm, metric_norm: Vec::new(), transport_residual: Vec::new() }
    }

    pub fn state(&self, i: usize) -> StateVector {
        StateVector { amplitudes: self.states[i].clone(), space: self.space, time: self.grid.t(i) }
    }

    pub fn flat_norm_drift(&self) -> f64 {
        max_drift(&self.flat_norm)
    }

    pub fn metric_norm_drift(&self) -> f64 {
        if self.metric_norm.is_empty() {
            return f64::NAN;
        }
        max_drift(&self.metric_norm)
    }

    pub fn max_transport_residual(&self) -> f64 {
        self.transport_residual.iter().copied().fold(f64::NAN, f64::max)
    }

    /// Columns `t, flat_norm, metric_norm, transport_residual` followed by
    /// any extra named columns.
    pub fn write_csv(&self, extra: &[(&str, Vec<f64>)], path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["t", "flat_norm", "metric_norm", "transport_residual"];
        header.extend(extra.iter().map(|(n, _)| *n));
        w.write_record(&header)?;
        let opt = |v: &[f64], i: usize| v.get(i).map(|x| format!("{x:.17e}")).unwrap_or_default();
        for i in 0..self.grid.len() {
            let mut row = vec![
                format!("{:.17e}", self.grid.t(i)),
                opt(&self.flat_norm, i),
                opt(&self.metric_norm, i),
                opt(&self.transport_residual, i),
            ];
            row.extend(extra.iter().map(|(_, v)| opt(v, i)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Generators with a larger guarded Hermiticity residual are refused.
pub const HERMITICITY_ABORT: f64 = 1e-6;

/// Propagates `φ` under a Hermitian generator. No renormalization.
pub fn propagate_flat(h: &TimeOperator, phi0: &StateVector, fock: &FockConfig, stepper: Stepper) -> Result<TrajectoryRecord> {
    let grid = *h.grid();
    for i in 0..grid.len() {
        let r = hermiticity_residual(&h.at(i)?, fock);
        if r > HERMITICITY_ABORT {
            return Err(Error::NotHermitian { t: grid.t(i), residual: r });
        }
    }
    let space = match phi0.space {
        Space::Flat(k) | Space::Metric(k) => Space::Flat(k),
    };
    Ok(TrajectoryRecord::new(grid, space, stepper, propagate(h, &phi0.amplitudes, stepper)?))
}

/// Propagates `ψ` under the non-Hermitian `H` and records `⟨ψ|ρψ⟩`. With a
/// flat generator given, `φ₀ = η₀ψ₀` is propagated alongside and compared
/// with `η ψ` at every node.
pub fn propagate_metric(
    big_h: &TimeOperator,
    psi0: &StateVector,
    map: &DysonMapSolution,
    flat: Option<&TimeOperator>,
    stepper: Stepper,
) -> Result<TrajectoryRecord> {
    big_h.grid().ensure_same(map.grid())?;
    let grid = *big_h.grid();
    let space = match psi0.space {
        Space::Flat(k) | Space::Metric(k) => Space::Metric(k),
    };
    let mut rec = TrajectoryRecord::new(grid, space, stepper, propagate(big_h, &psi0.amplitudes, stepper)?);
    rec.metric_norm = (0..grid.len())
        .map(|i| Ok(inner(&rec.states[i], &map.rho(i)?.apply(&rec.states[i])).re))
        .collect::<Result<_>>()?;
    if let Some(h) = flat {
        let phi0 = map.eta(0)?.apply(&psi0.amplitudes);
        let phis = propagate(h, &phi0, stepper)?;
        rec.transport_residual = (0..grid.len())
            .map(|i| Ok(norm_sqr(&(&map.eta(i)?.apply(&rec.states[i]) - &phis[i])).sqrt()))
            .collect::<Result<_>>()?;
    }
    Ok(rec)
}

/// A Hermitian flat-space observable `o`; its image at a level with map
/// `η` is `O = η⁻¹ o η`.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    pub flat_form: OperatorMatrix,
}

impl Observable {
    pub fn new(o: OperatorMatrix, fock: &FockConfig) -> Result<Self> {
        let r = hermiticity_residual(&o, fock);
        if r > 1e-10 {
            return Err(Error::InvalidConfig(format!("observable is not Hermitian (residual {r:.3e})")));
        }
        Ok(Observable { flat_form: o })
    }

    pub fn transported(&self, map: &DysonMapSolution, i: usize) -> Result<OperatorMatrix> {
        Ok(map.eta_inv(i)?.dot(&self.flat_form).dot(&map.eta(i)?))
    }

    /// `x₁ = (a + a†)/2`, `x₂ = (a − a†)/2i` on an `n`-level space.
    pub fn quadratures(n: usize) -> [Observable; 2] {
        let (a, ad) = ladder_n(n);
        [
            Observable { flat_form: (&a + &ad).scale_re(0.5) },
            Observable { flat_form: (&a - &ad).scale(C64::new(0.0, -0.5)) },
        ]
    }
}

/// `⟨ψ|ρ O ψ̃⟩`
pub fn metric_element(o: &OperatorMatrix, rho: &OperatorMatrix, psi: &Array1<C64>, psi_t: &Array1<C64>) -> C64 {
    inner(psi, &rho.apply(&o.apply(psi_t)))
}

/// Data of the displaced-Fock solution `U_t = Υ_t D(θ_t) R(χ_t) D†(θ₀)` for
/// `h = ω a†a + u a + u* a† + f`.
///
/// Two θ tracks are kept: `theta_nominal = θ₀ e^{−iχ}`, which only solves the
/// drive-free part, and `theta` from `iθ̇ = ωθ + u*`. With the latter the
/// global phase picks up `Re(uθ)` as well.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticPropagatorSpec {
    pub theta0: C64,
    pub m: usize,
    pub times: Vec<f64>,
    pub chi: Vec<f64>,
    pub f: Vec<f64>,
    pub theta: Vec<C64>,
    pub theta_nominal: Vec<C64>,
    /// Lewis–Riesenfeld phase `−mχ − ∫f`.
    pub phase: Vec<f64>,
    /// `−∫ (f + Re(u θ))`, the global phase that goes with `theta`.
    pub global_phase: Vec<f64>,
}

impl AnalyticPropagatorSpec {
    pub fn new(
        theta0: C64,
        m: usize,
        omega: &CoefficientTrack,
        coeffs: &HermitianCoefficients,
        grid: &Grid,
    ) -> Result<Self> {
        let times = grid.times();
        if coeffs.u.len() != times.len() || coeffs.f.len() != times.len() {
            return Err(Error::GridMismatch("coefficient tracks do not cover the grid".into()));
        }
        let w: Vec<C64> = times.iter().map(|&t| omega.eval(t)).collect();
        if let Some(bad) = w.iter().find(|z| z.im.abs() > 1e-12) {
            return Err(Error::InvalidConfig(format!("ω must be real here, got {bad}")));
        }
        let chi: Vec<f64> = cumulative_integral(&w, grid.step()).iter().map(|z| z.re).collect();
        let f: Vec<f64> = coeffs.f.iter().map(|z| z.re).collect();
        let u = CoefficientTrack::from_grid(grid, coeffs.u.clone())?;
        let theta = rk4_integrate(grid, theta0, |t, th: &C64| Ok(-I * (omega.eval(t).re * th + u.eval(t).conj())))?;
        let theta_nominal = chi.iter().map(|&x| theta0 * C64::from_polar(1.0, -x)).collect();
        let f_int = cumulative_integral(&coeffs.f.iter().map(|z| C64::from(z.re)).collect::<Vec<_>>(), grid.step());
        let phase = chi.iter().zip(&f_int).map(|(x, fi)| -(m as f64) * x - fi.re).collect();
        let g: Vec<C64> = (0..times.len()).map(|i| C64::from(f[i] + (coeffs.u[i] * theta[i]).re)).collect();
        let global_phase = cumulative_integral(&g, grid.step()).iter().map(|z| -z.re).collect();
        Ok(AnalyticPropagatorSpec { theta0, m, times, chi, f, theta, theta_nominal, phase, global_phase })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticTrajectory {
    /// Built with the corrected θ and global phase.
    pub record: TrajectoryRecord,
    /// Built with the nominal θ and `Υ = exp(−i∫f)`.
    pub nominal: TrajectoryRecord,
    /// Coherent amplitude `e^{−iχ}(φ₀ − θ₀) + θ_t`, corrected θ.
    pub amplitude: Vec<C64>,
    pub amplitude_nominal: Vec<C64>,
    /// `e^{−iχ} φ₀`, what the nominal amplitude telescopes to.
    pub telescoped: Vec<C64>,
    /// `max ‖(i∂_t − h)φ‖` over the guarded components, if `h` was given.
    pub residual: Option<f64>,
    pub nominal_residual: Option<f64>,
}

/// Evaluates `U_t|φ₀⟩` with matrices for a coherent `|φ₀⟩`.
pub fn analytic_propagate(
    spec: &AnalyticPropagatorSpec,
    phi0: C64,
    grid: &Grid,
    fock: &FockConfig,
    h: Option<&TimeOperator>,
) -> Result<AnalyticTrajectory> {
    let start = displacement(-spec.theta0, fock)?.apply(&coherent_state(phi0, fock)?);
    let n = start.len();
    let build = |theta: &[C64], phase: &dyn Fn(usize) -> f64| -> Result<Vec<Array1<C64>>> {
        (0..grid.len())
            .map(|i| {
                let rotated: Array1<C64> =
                    (0..n).map(|k| start[k] * C64::from_polar(1.0, -spec.chi[i] * k as f64)).collect();
                Ok(displacement(theta[i], fock)?.apply(&rotated) * C64::from_polar(1.0, phase(i)))
            })
            .collect()
    };
    let f_int = cumulative_integral(&spec.f.iter().map(|&x| C64::from(x)).collect::<Vec<_>>(), grid.step());
    let states = build(&spec.theta, &|i| spec.global_phase[i])?;
    let nominal_states = build(&spec.theta_nominal, &|i| -f_int[i].re)?;
    let residual = h.map(|h| schrodinger_residual(h, &states, fock)).transpose()?;
    let nominal_residual = h.map(|h| schrodinger_residual(h, &nominal_states, fock)).transpose()?;
    let amp = |theta: &[C64]| -> Vec<C64> {
        (0..grid.len()).map(|i| C64::from_polar(1.0, -spec.chi[i]) * (phi0 - spec.theta0) + theta[i]).collect()
    };
    Ok(AnalyticTrajectory {
        record: TrajectoryRecord::new(*grid, Space::Flat(0), Stepper::Cf4, states),
        nominal: TrajectoryRecord::new(*grid, Space::Flat(0), Stepper::Cf4, nominal_states),
        amplitude: amp(&spec.theta),
        amplitude_nominal: amp(&spec.theta_nominal),
        telescoped: spec.chi.iter().map(|&x| C64::from_polar(1.0, -x) * phi0).collect(),
        residual,
        nominal_residual,
    })
}

/// `max_t ‖i φ̇ − h φ‖` over the guarded components, `φ̇` by finite differences.
pub fn schrodinger_residual(h: &TimeOperator, states: &[Array1<C64>], fock: &FockConfig) -> Result<f64> {
    let grid = h.grid();
    let n = states[0].len();
    let mut mat = Array2::<C64>::zeros((states.len(), n));
    for (i, s) in states.iter().enumerate() {
        mat.row_mut(i).assign(s);
    }
    let mut dots = Array2::<C64>::zeros((states.len(), n));
    for k in 0..n {
        let d = differentiate(&mat.column(k).to_vec(), grid.step(), FdScheme::Richardson);
        dots.column_mut(k).assign(&Array1::from(d));
    }
    let keep = fock.keep();
    let mut worst = 0.0f64;
    for (i, s) in states.iter().enumerate() {
        let hs = h.at(i)?.apply(s);
        let r: f64 = (0..keep).map(|k| (I * dots[[i, k]] - hs[k]).norm_sqr()).sum();
        worst = worst.max(r.sqrt());
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureReport {
    pub times: Vec<f64>,
    /// `⟨ψ|ρ X_k ψ⟩` with `X_k = η⁻¹ x_k η`.
    pub metric: Vec<[f64; 2]>,
    /// `⟨φ|x_k φ⟩`
    pub flat: Vec<[f64; 2]>,
    /// Real and imaginary parts of the coherent amplitude (corrected θ).
    pub closed: Vec<[f64; 2]>,
    pub closed_nominal: Vec<[f64; 2]>,
    pub telescoped: Vec<[f64; 2]>,
    pub metric_vs_flat: f64,
    pub metric_vs_closed: f64,
    pub flat_vs_closed: f64,
    pub nominal_vs_closed: f64,
}

/// Quadrature expectations by three routes: metric-space matrices, flat-space
/// matrices and the coherent-amplitude closed form.
pub fn quadrature_expectations(
    map: &DysonMapSolution,
    metric: &TrajectoryRecord,
    flat: &TrajectoryRecord,
    analytic: &AnalyticTrajectory,
) -> Result<QuadratureReport> {
    let grid = map.grid();
    let xs = Observable::quadratures(map.dim());
    let split = |z: &C64| [z.re, z.im];
    let mut rep = QuadratureReport {
        times: grid.times(),
        metric: Vec::with_capacity(grid.len()),
        flat: Vec::with_capacity(grid.len()),
        closed: analytic.amplitude.iter().map(split).collect(),
        closed_nominal: analytic.amplitude_nominal.iter().map(split).collect(),
        telescoped: analytic.telescoped.iter().map(split).collect(),
        metric_vs_flat: 0.0,
        metric_vs_closed: 0.0,
        flat_vs_closed: 0.0,
        nominal_vs_closed: 0.0,
    };
    for i in 0..grid.len() {
        let rho = map.rho(i)?;
        let (psi, phi) = (&metric.states[i], &flat.states[i]);
        let mut m = [0.0; 2];
        let mut f = [0.0; 2];
        for k in 0..2 {
            m[k] = metric_element(&xs[k].transported(map, i)?, &rho, psi, psi).re;
            f[k] = inner(phi, &xs[k].flat_form.apply(phi)).re;
        }
        rep.metric.push(m);
        rep.flat.push(f);
    }
    let gap = |a: &[[f64; 2]], b: &[[f64; 2]]| {
        a.iter().zip(b).map(|(x, y)| (x[0] - y[0]).abs().max((x[1] - y[1]).abs())).fold(0.0, f64::max)
    };
    rep.metric_vs_flat = gap(&rep.metric, &rep.flat);
    rep.metric_vs_closed = gap(&rep.metric, &rep.closed);
    rep.flat_vs_closed = gap(&rep.flat, &rep.closed);
    rep.nominal_vs_closed = gap(&rep.closed_nominal, &rep.closed);
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossSpaceReport {
    pub kind: GaugeKind,
    /// `⟨ψ|ρ O ψ̃⟩` at the lower level.
    pub lower: C64,
    /// `⟨ψ′|ρ′ O′ ψ̃′⟩` at the upper level.
    pub upper: C64,
    /// `⟨φ|o φ̃⟩` with `φ = η ψ`.
    pub flat: C64,
    /// `max(|lower − upper|, |lower − flat|)`; NaN for local links.
    pub deviation: f64,
    pub note: Option<String>,
}

/// Matrix elements of one observable at two neighbouring levels, for states
/// propagated independently at each level.
pub fn cross_space_matrix_elements(
    obs: &Observable,
    maps: [&DysonMapSolution; 2],
    link: &GaugeLink,
    lower_states: (&Array1<C64>, &Array1<C64>),
    upper_states: (&Array1<C64>, &Array1<C64>),
    i: usize,
) -> Result<CrossSpaceReport> {
    let [lo, up] = maps;
    let lower = metric_element(&obs.transported(lo, i)?, &lo.rho(i)?, lower_states.0, lower_states.1);
    let upper = metric_element(&obs.transported(up, i)?, &up.rho(i)?, upper_states.0, upper_states.1);
    let eta = lo.eta(i)?;
    let flat = inner(&eta.apply(lower_states.0), &obs.flat_form.apply(&eta.apply(lower_states.1)));
    let (deviation, note) = match link.kind {
        GaugeKind::Global => ((lower - upper).norm().max((lower - flat).norm()), None),
        GaugeKind::Local => (
            f64::NAN,
            Some("local link: the gauge operator is not resolved, so the conjugation chain is not evaluated".into()),
        ),
    };
    Ok(CrossSpaceReport { kind: link.kind, lower, upper, flat, deviation, note })
}

/// Matrix element of `H′` in its own space compared with the two forms it
/// can be rewritten into, and with the flat element of `h′`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OwnSpaceReport {
    /// `⟨ψ′|ρ′ H′ ψ̃′⟩`
    pub direct: C64,
    /// `⟨φ′|(h′ − i η̇′ η′⁻¹) φ̃′⟩`
    pub via_counterpart: C64,
    /// `⟨φ′|η′ η⁻¹ h η η′⁻¹ φ̃′⟩`
    pub via_lower: C64,
    /// `⟨φ′|h′ φ̃′⟩`
    pub flat: C64,
    pub deviation: f64,
    /// `|direct − flat|`: nonzero means `H′` is not an observable in its own space.
    pub gap: f64,
}

/// `lower` is node `k`, `upper` node `k+1`; both need maps and counterparts.
/// `states` live in the metric space of `upper`.
pub fn own_space_element(
    lower: &ChainNode,
    upper: &ChainNode,
    states: (&Array1<C64>, &Array1<C64>),
    i: usize,
) -> Result<OwnSpaceReport> {
    let missing = || Error::InvalidConfig("both levels need a map and a counterpart".into());
    let (eta, h) = (lower.dyson.as_ref().ok_or_else(missing)?, lower.hermitian_counterpart.as_ref().ok_or_else(missing)?);
    let (eta_p, h_p) = (upper.dyson.as_ref().ok_or_else(missing)?, upper.hermitian_counterpart.as_ref().ok_or_else(missing)?);
    let direct = metric_element(&upper.hamiltonian.at(i)?, &eta_p.rho(i)?, states.0, states.1);
    let e = eta_p.eta(i)?;
    let (phi, phi_t) = (e.apply(states.0), e.apply(states.1));
    let hp = h_p.at(i)?;
    let rate = eta_p.eta_dot(i)?.dot(&eta_p.eta_inv(i)?).scale(I);
    let via_counterpart = inner(&phi, &(&hp - &rate).apply(&phi_t));
    let bridge = e.dot(&eta.eta_inv(i)?);
    let back = eta.eta(i)?.dot(&eta_p.eta_inv(i)?);
    let via_lower = inner(&phi, &bridge.dot(&h.at(i)?).dot(&back).apply(&phi_t));
    let flat = inner(&phi, &hp.apply(&phi_t));
    Ok(OwnSpaceReport {
        direct,
        via_counterpart,
        via_lower,
        flat,
        deviation: (direct - via_counterpart).norm().max((direct - via_lower).norm()),
        gap: (direct - flat).norm(),
    })
}
