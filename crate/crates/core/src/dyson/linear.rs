//! Displacement maps `η = exp(γ a + γ* a†)` for the linear model.

use super::{DysonMapSolution, HermitianCoefficients, Provenance};
use crate::error::{Error, Result};
use crate::fock::{FockConfig, C64, I};
use crate::grid::{differentiate, rk4_step, FdScheme, Grid};
use crate::models::{CoefficientTrack, LinearModel};

#[derive(Clone, Debug, PartialEq)]
pub struct BarGamma {
    pub gamma: C64,
    /// `|Im(α β)|`; the bar counterpart is Hermitian only when this vanishes.
    pub side_violation: f64,
    pub warning: Option<String>,
}

fn omega_nonzero(model: &LinearModel, t: f64) -> Result<C64> {
    let w = model.omega.eval(t);
    if w.norm() == 0.0 {
        return Err(Error::DivisionByZero(format!("ω = 0 at t = {t}")));
    }
    Ok(w)
}

/// `γ̄ = (β* − α) / 2ω`
pub fn bar_gamma(model: &LinearModel, t: f64) -> Result<BarGamma> {
    let w = omega_nonzero(model, t)?;
    let (al, be) = (model.alpha.eval(t), model.beta.eval(t));
    let side_violation = (al * be).im.abs();
    let warning = (side_violation > 1e-12)
        .then(|| format!("Im(αβ) = {side_violation:.3e} at t = {t}: the bar counterpart cannot be Hermitian"));
    Ok(BarGamma { gamma: (be.conj() - al) / (2.0 * w), side_violation, warning })
}

/// `f̄ = (|α|² + |β|² − 2αβ) / 4ω`
pub fn bar_f(model: &LinearModel, t: f64) -> Result<C64> {
    let w = omega_nonzero(model, t)?;
    let (al, be) = (model.alpha.eval(t), model.beta.eval(t));
    Ok((al.norm_sqr() + be.norm_sqr() - 2.0 * al * be) / (4.0 * w))
}

pub fn build_bar_map_linear(model: &LinearModel, grid: &Grid, fock: &FockConfig) -> Result<DysonMapSolution> {
    let gammas = grid.times().into_iter().map(|t| bar_gamma(model, t).map(|b| b.gamma)).collect::<Result<_>>()?;
    Ok(DysonMapSolution::displacement(*grid, *fock, gammas, Provenance::BarClosedForm))
}

/// Local error bound for one step of the γ integrator.
const GAMMA_STEP_TOL: f64 = 1e-10;

/// Integrates `γ̇ = iωγ + i(α − β*)/2` with RK4 at the grid spacing. Each step
/// is checked against two half steps and rejected if they disagree by more
/// than 1e-10.
pub fn solve_gamma_ode(model: &LinearModel, gamma0: C64, grid: &Grid, fock: &FockConfig) -> Result<DysonMapSolution> {
    let mut rhs = |t: f64, g: &C64| -> Result<C64> {
        let (w, al, be) = model.coefficients(t);
        Ok(I * w * g + I * (al - be.conj()) * 0.5)
    };
    let mut gammas = Vec::with_capacity(grid.len());
    gammas.push(gamma0);
    for i in 0..grid.len() - 1 {
        let (t, h) = (grid.t(i), grid.t(i + 1) - grid.t(i));
        let y = gammas[i];
        let full = rk4_step(&mut rhs, t, &y, h)?;
        let mid = rk4_step(&mut rhs, t, &y, h / 2.0)?;
        let two = rk4_step(&mut rhs, t + h / 2.0, &mid, h / 2.0)?;
        let err = (full - two).norm() * 16.0 / 15.0;
        if err > GAMMA_STEP_TOL {
            return Err(Error::StepRejected(format!("local error {err:.3e} at t = {t}")));
        }
        gammas.push(full);
    }
    Ok(DysonMapSolution::displacement(*grid, *fock, gammas, Provenance::GammaOde))
}

/// Coefficients of `h = η H′ η⁻¹` for a displacement map with parameters
/// `gamma` on `grid`: `u = ωγ + α + iγ̇`, `v = −ωγ* + β + iγ̇*`,
/// `f = −ω|γ|² − αγ* + βγ + (i/2)(γγ̇* − γ*γ̇)`.
pub fn linear_hermitian_coeffs(
    model: &LinearModel,
    gamma: &[C64],
    grid: &Grid,
    scheme: FdScheme,
) -> HermitianCoefficients {
    let gd = differentiate(gamma, grid.step(), scheme);
    let mut out = HermitianCoefficients { times: grid.times(), ..Default::default() };
    for (i, t) in grid.times().into_iter().enumerate() {
        let (w, al, be) = model.coefficients(t);
        let (g, d) = (gamma[i], gd[i]);
        out.u.push(w * g + al + I * d);
        out.v.push(-w * g.conj() + be + I * d.conj());
        out.f.push(-w * g.norm_sqr() - al * g.conj() + be * g + I * 0.5 * (g * d.conj() - g.conj() * d));
    }
    out
}

/// Nominal identity coefficient of `h′` for the level above, built from the
/// maps `γ` (level 0) and `γ′` (level 1).
pub fn linear_f_prime(model: &LinearModel, gamma: &[C64], gamma_prime: &[C64], grid: &Grid) -> Vec<C64> {
    grid.times()
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let (w, al, be) = model.coefficients(t);
            let (g, gp) = (gamma[i], gamma_prime[i]);
            w * (g.norm_sqr() + 2.0 * gp.norm_sqr() - (g * gp.conj()).re)
                + 0.5 * (al * g.conj() - be * g).re
                - I * (al * gp.conj() - be * gp).im
        })
        .collect()
}

/// Linear-model coefficients of `H′ = H + iη⁻¹η̇` for a displacement map:
/// `α′ = α + iγ̇`, `β′ = β + iγ̇*` (the c-number shift is dropped; it does
/// not enter the next map).
pub fn lift_linear_model(model: &LinearModel, map: &DysonMapSolution) -> Result<LinearModel> {
    let gamma = map
        .gammas()
        .ok_or_else(|| Error::InvalidConfig("lifting a linear model needs a displacement map".into()))?;
    let grid = map.grid();
    let gd = differentiate(gamma, grid.step(), map.scheme());
    let times = grid.times();
    let alpha = times.iter().zip(&gd).map(|(&t, d)| model.alpha.eval(t) + I * d).collect();
    let beta = times.iter().zip(&gd).map(|(&t, d)| model.beta.eval(t) + I * d.conj()).collect();
    Ok(LinearModel::new(
        model.omega.clone(),
        CoefficientTrack::from_grid(grid, alpha)?,
        CoefficientTrack::from_grid(grid, beta)?,
    ))
}

/// Coefficients of `h̄ = η̄ H η̄⁻¹` (no time derivative enters).
pub fn bar_hermitian_coeffs(model: &LinearModel, grid: &Grid) -> Result<HermitianCoefficients> {
    let mut out = HermitianCoefficients { times: grid.times(), ..Default::default() };
    for t in grid.times() {
        let (w, al, be) = model.coefficients(t);
        let g = bar_gamma(model, t)?.gamma;
        out.u.push(w * g + al);
        out.v.push(-w * g.conj() + be);
        out.f.push(-w * g.norm_sqr() - al * g.conj() + be * g);
    }
    Ok(out)
}
