//! SU(1,1) maps for the Swanson model.
//!
//! The map `η = exp(ε(a†a+½) + μa² + μ*a†²)` acts on `(a, a†)` through the
//! 2×2 matrix of [`bogoliubov`], so the coefficients of `ηHη⁻¹ + iη̇η⁻¹` in
//! the basis `{a†a+½, a², a†²}` can be computed exactly without truncation.
//! Matrix oracles on the Fock space are used to certify the results.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{DysonMapSolution, Provenance};
use crate::error::{Error, Result};
use crate::fock::{bogoliubov, gauss_decompose, matrix_exp, FockConfig, OperatorMatrix, Su11Params, C64, I};
use crate::grid::{rk4_integrate, Grid};
use crate::models::{hermiticity_residual, Basis, SwansonModel};

/// `h = W(a†a+½) + V a² + T a†²`
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SwansonCoeffs {
    pub w: C64,
    pub v: C64,
    pub t: C64,
}

impl std::ops::Add for SwansonCoeffs {
    type Output = SwansonCoeffs;
    fn add(self, o: SwansonCoeffs) -> SwansonCoeffs {
        SwansonCoeffs { w: self.w + o.w, v: self.v + o.v, t: self.t + o.t }
    }
}

impl SwansonCoeffs {
    /// Reads the coefficients off the `(0,0)`, `(0,2)`, `(2,0)` entries.
    pub fn from_matrix(h: &OperatorMatrix) -> Self {
        let s2 = std::f64::consts::SQRT_2;
        SwansonCoeffs { w: h.get(0, 0) * 2.0, v: h.get(0, 2) / s2, t: h.get(2, 0) / s2 }
    }
}

/// Coefficients of `η H η⁻¹` for `H = ω(a†a+½) + αa² + βa†²`.
pub fn conjugated_coeffs(epsilon: f64, mu: C64, w: C64, al: C64, be: C64) -> SwansonCoeffs {
    let m = bogoliubov(epsilon, mu);
    let (m11, m12, m21, m22) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    SwansonCoeffs {
        w: w * (m22 * m11 + m21 * m12) + 2.0 * al * m11 * m12 + 2.0 * be * m21 * m22,
        v: w * m21 * m11 + al * m11 * m11 + be * m21 * m21,
        t: w * m22 * m12 + al * m12 * m12 + be * m22 * m22,
    }
}

/// Coefficients of `i η̇ η⁻¹` given parameter rates `(ε̇, μ̇)`.
///
/// `d/dt e^L` is the top-right block of `exp([[L, L̇], [0, L]])`. With
/// `Ṁ M⁻¹ = [[p, q], [r, −p]]` the generator is `−p(a†a+½) + (r/2)a² − (q/2)a†²`.
pub fn velocity_coeffs(epsilon: f64, mu: C64, d_epsilon: f64, d_mu: C64) -> Result<SwansonCoeffs> {
    let l = [[C64::from(-epsilon), -2.0 * mu.conj()], [2.0 * mu, C64::from(epsilon)]];
    let ld = [[C64::from(-d_epsilon), -2.0 * d_mu.conj()], [2.0 * d_mu, C64::from(d_epsilon)]];
    let block = OperatorMatrix::from_fn(4, |i, j| match (i < 2, j < 2) {
        (true, true) => l[i][j],
        (true, false) => ld[i][j - 2],
        (false, false) => l[i - 2][j - 2],
        (false, true) => C64::default(),
    });
    let e = matrix_exp(&block)?;
    let md = [[e.get(0, 2), e.get(0, 3)], [e.get(1, 2), e.get(1, 3)]];
    let m = bogoliubov(epsilon, mu);
    // det M = 1
    let minv = [[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]];
    let k = |i: usize, j: usize| md[i][0] * minv[0][j] + md[i][1] * minv[1][j];
    let (p, q, r) = (k(0, 0), k(0, 1), k(1, 0));
    Ok(SwansonCoeffs { w: -I * p, v: I * r * 0.5, t: -I * q * 0.5 })
}

/// `[Im W, Re(T − V*), Im(T − V*)]`; zero iff the quadratic form is Hermitian.
pub fn hermiticity_vector(c: &SwansonCoeffs) -> [f64; 3] {
    let d = c.t - c.v.conj();
    [c.w.im, d.re, d.im]
}

struct Polar {
    aw: f64,
    pw: f64,
    aa: f64,
    pa: f64,
    ab: f64,
    pb: f64,
}

fn polar(w: C64, al: C64, be: C64) -> Polar {
    Polar { aw: w.norm(), pw: w.arg(), aa: al.norm(), pa: al.arg(), ab: be.norm(), pb: be.arg() }
}

/// Residuals of the two real equations fixing `(Φ̄, φ̄)`.
pub fn bar_root_residuals(p: &Su11Params, w: C64, al: C64, be: C64) -> [f64; 2] {
    let c = polar(w, al, be);
    let (ph, chi, vp) = (p.phi, p.chi, p.varphi);
    let r1 = (c.aw * ph * c.pw.sin() + c.aa * (vp - c.pa).sin()) * (1.0 - ph * ph)
        + c.ab * ((2.0 * chi - 1.0) * ph * ph - chi * chi) * (vp + c.pb).sin();
    let r2 = (chi - 1.0) * ph * c.aw * c.pw.cos()
        + c.aa * (1.0 - ph * ph) * (vp - c.pa).cos()
        + c.ab * (ph * ph - chi * chi) * (vp + c.pb).cos();
    [r1, r2]
}

/// Nominal `(W̄, V̄)` of the bar counterpart.
pub fn bar_counterpart_coeffs(p: &Su11Params, w: C64, al: C64, be: C64) -> (C64, C64) {
    let c = polar(w, al, be);
    let (ph, chi, vp) = (p.phi, p.chi, p.varphi);
    let den = chi - ph * ph;
    let ww = (c.aw * (chi + ph * ph) * c.pw.cos()
        - 2.0 * ph * (c.aa * (vp - c.pa).cos() + c.ab * chi * (vp + c.pb).cos()))
        / den;
    let vv = (c.aw * ph * C64::from_polar(1.0, vp + c.pw)
        - c.aa * C64::from_polar(1.0, c.pa)
        - c.ab * ph * ph * C64::from_polar(1.0, -2.0 * vp))
        / den;
    (C64::from(ww), vv)
}

/// Nominal `(W, V)` of the invariant-map counterpart.
pub fn invariant_counterpart_coeffs(p: &Su11Params, w: C64, al: C64, be: C64) -> (C64, C64) {
    let c = polar(w, al, be);
    let (ph, chi, vp) = (p.phi, p.chi, p.varphi);
    let ww = c.aw * c.pw.cos() + 2.0 * ph / (1.0 - chi) * (c.aa * (vp - c.pa).cos() - c.ab * (vp + c.pb).cos());
    let vv = (c.aa * C64::from_polar(1.0, c.pa)
        - c.ab * chi * C64::from_polar(1.0, -c.pb)
        - I * c.aw * ph * c.pw.sin() * C64::from_polar(1.0, vp))
        / (1.0 - chi);
    (C64::from(ww), vv)
}

/// Nominal rates `(Φ̇, φ̇)`.
pub fn invariant_rates(phi: f64, chi: f64, varphi: f64, w: C64, al: C64, be: C64) -> Result<[f64; 2]> {
    if (chi - 1.0).abs() < 1e-12 {
        return Err(Error::Singularity(format!("χ = {chi} hits the 1 − χ pole")));
    }
    if phi.abs() < 1e-300 {
        return Err(Error::Singularity("Φ = 0 makes the φ̇ equation singular".into()));
    }
    let c = polar(w, al, be);
    let d_phi = 2.0 / (chi - 1.0)
        * ((c.aw * phi * c.pw.sin() + c.aa * (varphi - c.pa).sin()) * (1.0 - phi * phi)
            + c.ab * ((2.0 * chi - 1.0) * phi * phi - chi * chi) * (varphi + c.pb).sin());
    let d_varphi = 2.0 / ((chi - 1.0) * phi)
        * (c.aa * (1.0 - phi * phi) * (varphi - c.pa).cos() + c.ab * (phi * phi - chi * chi) * (varphi + c.pb).cos())
        + 2.0 * c.aw * c.pw.cos();
    Ok([d_phi, d_varphi])
}

/// Inverts `Φ(|μ|)` at fixed ε on the real-Ξ branch and rebuilds
/// `μ = ε z / 2` with `arg z = φ`.
pub fn phi_to_mu(epsilon: f64, phi: f64, varphi: f64) -> Result<C64> {
    if phi == 0.0 {
        return Ok(C64::default());
    }
    let g = |m: f64| -> Result<f64> { Ok(gauss_decompose(epsilon, C64::from(m))?.phi - phi) };
    let (mut lo, mut hi) = (0.0, epsilon.abs() / 2.0 * (1.0 - 1e-9));
    let (glo, ghi) = (-phi, g(hi)?);
    if glo * ghi > 0.0 {
        return Err(Error::Domain(format!("Φ = {phi} is outside the real-Ξ range at ε = {epsilon}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid)? * glo > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-17 * hi.max(1e-300) {
            break;
        }
    }
    let m = 0.5 * (lo + hi);
    let z = C64::from_polar(2.0 * m / epsilon.abs(), varphi);
    Ok(z * (epsilon / 2.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwansonBarRoot {
    pub params: Su11Params,
    pub iterations: usize,
    pub residual: [f64; 2],
}

pub const NEWTON_MAX_ITER: usize = 100;
pub const NEWTON_TOL: f64 = 1e-12;

/// Newton on the unknowns `(|μ|, arg μ)` with ε held at the seed value,
/// using a central-difference Jacobian and step halving.
pub fn solve_swanson_bar(model: &SwansonModel, t: f64, seed: (f64, C64)) -> Result<SwansonBarRoot> {
    let eps = seed.0;
    let (w, al, be) = model.coefficients(t);
    let f = |x: [f64; 2]| -> Result<[f64; 2]> {
        let p = gauss_decompose(eps, C64::from_polar(x[0], x[1]))?;
        Ok(bar_root_residuals(&p, w, al, be))
    };
    let size = |r: [f64; 2]| r[0].abs().max(r[1].abs());
    let mut x = [seed.1.norm(), seed.1.arg()];
    let mut r = f(x)?;
    for it in 0..=NEWTON_MAX_ITER {
        if size(r) < 1e-15 || (it > 0 && size(r) < NEWTON_TOL && it == NEWTON_MAX_ITER) {
            return finish(eps, x, r, it);
        }
        if it == NEWTON_MAX_ITER {
            break;
        }
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let h = 1e-6 * x[k].abs().max(1e-2);
            let (mut xp, mut xm) = (x, x);
            xp[k] += h;
            xm[k] -= h;
            let (fp, fm) = (f(xp)?, f(xm)?);
            for row in 0..2 {
                jac[row][k] = (fp[row] - fm[row]) / (2.0 * h);
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let scale = jac.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
        if !(det.abs() > 1e-14 * scale * scale) {
            return Err(Error::SingularJacobian(format!("det = {det:.3e} at |μ| = {}, arg μ = {}", x[0], x[1])));
        }
        let dx = [
            -(jac[1][1] * r[0] - jac[0][1] * r[1]) / det,
            -(-jac[1][0] * r[0] + jac[0][0] * r[1]) / det,
        ];
        let mut lambda = 1.0;
        let mut accepted = None;
        while lambda > 1e-4 {
            let trial = [x[0] + lambda * dx[0], x[1] + lambda * dx[1]];
            if let Ok(rt) = f(trial) {
                if size(rt) < size(r) || size(r) < 1e-13 {
                    accepted = Some((trial, rt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((xn, rn)) => {
                let stalled = (xn[0] - x[0]).abs() + (xn[1] - x[1]).abs() < 1e-16 * (1.0 + x[0].abs() + x[1].abs());
                x = xn;
                r = rn;
                if stalled && size(r) < NEWTON_TOL {
                    return finish(eps, x, r, it + 1);
                }
            }
            None if size(r) < NEWTON_TOL => return finish(eps, x, r, it),
            None => break,
        }
    }
    Err(Error::NoConvergence { iterations: NEWTON_MAX_ITER, residual: size(r) })
}

fn finish(eps: f64, x: [f64; 2], r: [f64; 2], iterations: usize) -> Result<SwansonBarRoot> {
    let mu = C64::from_polar(x[0], x[1]);
    Ok(SwansonBarRoot { params: gauss_decompose(eps, mu)?, iterations, residual: r })
}

/// Hermiticity residual of `η̄ H η̄⁻¹`, computed with matrices.
pub fn swanson_bar_oracle(p: &Su11Params, model: &SwansonModel, t: f64, fock: &FockConfig) -> Result<f64> {
    let n = fock.work_dim();
    let basis = Basis::new(n);
    let g = crate::fock::gauss_exponent(p.epsilon, p.mu, n);
    let h = matrix_exp(&g)?.dot(&basis.swanson(model, t)).dot(&matrix_exp(&-&g)?);
    Ok(hermiticity_residual(&h, fock))
}

/// Bar roots on every grid node, each seeded from its predecessor.
pub fn solve_swanson_bar_track(
    model: &SwansonModel,
    grid: &Grid,
    fock: &FockConfig,
    seed: (f64, C64),
) -> Result<(DysonMapSolution, Vec<SwansonBarRoot>)> {
    let mut roots: Vec<SwansonBarRoot> = Vec::with_capacity(grid.len());
    let mut s = seed;
    for t in grid.times() {
        let root = solve_swanson_bar(model, t, s)?;
        s = (root.params.epsilon, root.params.mu);
        roots.push(root);
    }
    let params = roots.iter().map(|r| r.params).collect();
    Ok((DysonMapSolution::su11(*grid, *fock, params, Provenance::SwansonNewton), roots))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantOptions {
    /// Matrix oracle runs on every `oracle_stride`-th node.
    pub oracle_stride: usize,
    /// Hermiticity bar for the counterpart.
    pub tolerance: f64,
    pub allow_fallback: bool,
}

impl Default for InvariantOptions {
    fn default() -> Self {
        InvariantOptions { oracle_stride: 1, tolerance: 1e-6, allow_fallback: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvariantPath {
    Nominal,
    Fallback,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub path: InvariantPath,
    /// Oracle residual of the nominal-ODE map (∞ if it could not be built).
    pub nominal_residual: f64,
    pub nominal_error: Option<String>,
    /// Oracle residual of the returned map.
    pub residual: f64,
    /// Largest gap between oracle `(W, V)` and the nominal closed forms on
    /// the nominal path.
    pub nominal_wv_deviation: f64,
    /// `max |(Φ, φ)_t − (Φ, φ)_0| / span` on the nominal path.
    pub nominal_drift_rate: f64,
    pub epsilon_range: (f64, f64),
    pub checked_points: usize,
}

/// Max oracle residual and the oracle `(W, V, T)` at each checked node.
fn invariant_oracle(
    sol: &DysonMapSolution,
    model: &SwansonModel,
    stride: usize,
) -> Result<(f64, Vec<(usize, SwansonCoeffs)>)> {
    let grid = *sol.grid();
    let basis = Basis::new(sol.dim());
    let mut worst = 0.0f64;
    let mut coeffs = Vec::new();
    let mut idx: Vec<usize> = (0..grid.len()).step_by(stride.max(1)).collect();
    if *idx.last().unwrap() != grid.len() - 1 {
        idx.push(grid.len() - 1);
    }
    for i in idx {
        let h = sol.counterpart(i, &basis.swanson(model, grid.t(i)))?;
        worst = worst.max(hermiticity_residual(&h, sol.fock()));
        coeffs.push((i, SwansonCoeffs::from_matrix(&h)));
    }
    Ok((worst, coeffs))
}

fn nominal_path(
    model: &SwansonModel,
    init: &Su11Params,
    grid: &Grid,
    fock: &FockConfig,
) -> Result<(DysonMapSolution, f64)> {
    let eps = init.epsilon;
    let ys = rk4_integrate(grid, [init.phi, init.varphi], |t, y: &[f64; 2]| {
        let p = gauss_decompose(eps, phi_to_mu(eps, y[0], y[1])?)?;
        let (w, al, be) = model.coefficients(t);
        invariant_rates(y[0], p.chi, y[1], w, al, be)
    })?;
    let span = grid.t1() - grid.t0();
    let drift = ys.iter().map(|y| (y[0] - ys[0][0]).abs().max((y[1] - ys[0][1]).abs())).fold(0.0, f64::max) / span;
    let params = ys
        .iter()
        .map(|y| gauss_decompose(eps, phi_to_mu(eps, y[0], y[1])?))
        .collect::<Result<Vec<_>>>()?;
    Ok((DysonMapSolution::su11(*grid, *fock, params, Provenance::SwansonOdeNominal), drift))
}

/// Rates `(ε̇, Re μ̇, Im μ̇)` that keep `ηHη⁻¹ + iη̇η⁻¹` Hermitian: three real
/// conditions, linear in the rates.
fn fallback_rates(y: &[f64; 3], w: C64, al: C64, be: C64) -> Result<[f64; 3]> {
    let mu = C64::new(y[1], y[2]);
    let r0 = hermiticity_vector(&conjugated_coeffs(y[0], mu, w, al, be));
    let cols = [
        hermiticity_vector(&velocity_coeffs(y[0], mu, 1.0, C64::default())?),
        hermiticity_vector(&velocity_coeffs(y[0], mu, 0.0, C64::new(1.0, 0.0))?),
        hermiticity_vector(&velocity_coeffs(y[0], mu, 0.0, C64::new(0.0, 1.0))?),
    ];
    let a = Matrix3::from_fn(|i, j| cols[j][i]);
    let b = Vector3::new(-r0[0], -r0[1], -r0[2]);
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::SingularJacobian(format!("rate system singular at ε = {}, μ = {mu}", y[0])))?;
    Ok([x[0], x[1], x[2]])
}

fn fallback_path(model: &SwansonModel, init: &Su11Params, grid: &Grid, fock: &FockConfig) -> Result<DysonMapSolution> {
    let ys = rk4_integrate(grid, [init.epsilon, init.mu.re, init.mu.im], |t, y: &[f64; 3]| {
        let (w, al, be) = model.coefficients(t);
        fallback_rates(y, w, al, be)
    })?;
    let params = ys
        .iter()
        .map(|y| gauss_decompose(y[0], C64::new(y[1], y[2])))
        .collect::<Result<Vec<_>>>()?;
    Ok(DysonMapSolution::su11(*grid, *fock, params, Provenance::SwansonOdeFallback))
}

/// Invariant map from the nominal `(Φ, φ)` equations, with ε held at the
/// initial value; if the matrix oracle rejects it, the three-parameter rate
/// equations take over. The report records which path produced the map.
pub fn solve_swanson_invariant(
    model: &SwansonModel,
    init: &Su11Params,
    grid: &Grid,
    fock: &FockConfig,
    opts: &InvariantOptions,
) -> Result<(DysonMapSolution, InvariantReport)> {
    let mut report = InvariantReport {
        path: InvariantPath::Nominal,
        nominal_residual: f64::INFINITY,
        nominal_error: None,
        residual: f64::INFINITY,
        nominal_wv_deviation: f64::INFINITY,
        nominal_drift_rate: f64::INFINITY,
        epsilon_range: (init.epsilon, init.epsilon),
        checked_points: 0,
    };
    let nominal = nominal_path(model, init, grid, fock).and_then(|(sol, drift)| {
        let (res, coeffs) = invariant_oracle(&sol, model, opts.oracle_stride)?;
        Ok((sol, drift, res, coeffs))
    });
    match nominal {
        Ok((sol, drift, res, coeffs)) => {
            report.nominal_residual = res;
            report.nominal_drift_rate = drift;
            report.checked_points = coeffs.len();
            let params = sol.su11_params().expect("su11 family");
            report.nominal_wv_deviation = coeffs
                .iter()
                .map(|(i, c)| {
                    let (w, al, be) = model.coefficients(grid.t(*i));
                    let (w_cf, v_cf) = invariant_counterpart_coeffs(&params[*i], w, al, be);
                    (c.w - w_cf).norm().max((c.v - v_cf).norm())
                })
                .fold(0.0, f64::max);
            if res < opts.tolerance || !opts.allow_fallback {
                report.residual = res;
                return Ok((sol, report));
            }
        }
        Err(e) => {
            if !opts.allow_fallback {
                return Err(e);
            }
            report.nominal_error = Some(e.to_string());
        }
    }
    let sol = fallback_path(model, init, grid, fock)?;
    let (res, coeffs) = invariant_oracle(&sol, model, opts.oracle_stride)?;
    let eps: Vec<f64> = sol.su11_params().expect("su11 family").iter().map(|p| p.epsilon).collect();
    report.path = InvariantPath::Fallback;
    report.residual = res;
    report.checked_points = coeffs.len();
    report.epsilon_range = eps.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    Ok((sol, report))
}
