//! Time-dependent Dyson maps.
//!
//! A [`DysonMapSolution`] keeps the per-time parameters of its family and
//! realizes `η_t`, `η_t⁻¹` lazily on first use; `η̇_t` is a finite difference
//! over the realized grid values.

mod export;
mod linear;
mod schrodinger;
mod swanson;

pub use export::{read_blob, write_blob, write_solution_csv, BLOB_MAGIC};
pub use linear::{
    bar_f, bar_gamma, bar_hermitian_coeffs, build_bar_map_linear, lift_linear_model, linear_f_prime, linear_hermitian_coeffs,
    solve_gamma_ode, BarGamma,
};
pub use schrodinger::{metric_drift, solve_schrodinger_like, GROWTH_CAP};
pub use swanson::{
    conjugated_coeffs, bar_counterpart_coeffs, bar_root_residuals, invariant_counterpart_coeffs, invariant_rates, hermiticity_vector, phi_to_mu, solve_swanson_bar,
    solve_swanson_bar_track, solve_swanson_invariant, swanson_bar_oracle, velocity_coeffs, InvariantOptions,
    InvariantPath, InvariantReport, SwansonBarRoot, SwansonCoeffs,
};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fock::{gauss_exponent, matrix_exp, FockConfig, OperatorMatrix, Su11Params, C64, I};
use crate::grid::{differentiate_op, FdScheme, Grid, TimeOperator};
use crate::models::Basis;

/// Which solver produced a map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    BarClosedForm,
    GammaOde,
    SwansonNewton,
    SwansonOdeNominal,
    SwansonOdeFallback,
    SchrodingerLike,
    Constant,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MapParams {
    /// `η = exp(γ a + γ* a†)`
    Displacement(Vec<C64>),
    /// `η = exp(ε(a†a+½) + μ a² + μ* a†²)`
    Su11(Vec<Su11Params>),
    /// Matrix-propagated; no parameters.
    Matrix,
}

#[derive(Clone, Debug)]
pub struct DysonMapSolution {
    grid: Grid,
    fock: FockConfig,
    params: Arc<MapParams>,
    eta: TimeOperator,
    eta_inv: TimeOperator,
    scheme: FdScheme,
    provenance: Provenance,
}

impl DysonMapSolution {
    pub fn displacement(grid: Grid, fock: FockConfig, gammas: Vec<C64>, provenance: Provenance) -> Self {
        assert_eq!(gammas.len(), grid.len(), "one γ per grid node");
        let n = fock.work_dim();
        let basis = Arc::new(Basis::new(n));
        let g = Arc::new(gammas.clone());
        let exponent = move |i: usize, sign: f64| {
            (basis.a.scale(g[i]) + basis.ad.scale(g[i].conj())).scale_re(sign)
        };
        let e1 = exponent.clone();
        let eta = TimeOperator::indexed(grid, n, move |i| matrix_exp(&e1(i, 1.0)));
        let eta_inv = TimeOperator::indexed(grid, n, move |i| matrix_exp(&exponent(i, -1.0)));
        DysonMapSolution {
            grid,
            fock,
            params: Arc::new(MapParams::Displacement(gammas)),
            eta,
            eta_inv,
            scheme: FdScheme::default(),
            provenance,
        }
    }

    pub fn su11(grid: Grid, fock: FockConfig, params: Vec<Su11Params>, provenance: Provenance) -> Self {
        assert_eq!(params.len(), grid.len(), "one parameter set per grid node");
        let n = fock.work_dim();
        let p = Arc::new(params.clone());
        let p2 = p.clone();
        let eta = TimeOperator::indexed(grid, n, move |i| matrix_exp(&gauss_exponent(p[i].epsilon, p[i].mu, n)));
        let eta_inv = TimeOperator::indexed(grid, n, move |i| {
            matrix_exp(&gauss_exponent(-p2[i].epsilon, -p2[i].mu, n))
        });
        DysonMapSolution {
            grid,
            fock,
            params: Arc::new(MapParams::Su11(params)),
            eta,
            eta_inv,
            scheme: FdScheme::default(),
            provenance,
        }
    }

    pub fn matrices(grid: Grid, fock: FockConfig, etas: Vec<OperatorMatrix>, provenance: Provenance) -> Result<Self> {
        let eta = TimeOperator::sampled(grid, etas)?;
        let src = eta.clone();
        let eta_inv = TimeOperator::indexed(grid, fock.work_dim(), move |i| src.at(i)?.inverse());
        Ok(DysonMapSolution {
            grid,
            fock,
            params: Arc::new(MapParams::Matrix),
            eta,
            eta_inv,
            scheme: FdScheme::default(),
            provenance,
        })
    }

    /// The same matrix at every node.
    pub fn constant(grid: Grid, fock: FockConfig, eta: OperatorMatrix) -> Result<Self> {
        let etas = vec![eta; grid.len()];
        Self::matrices(grid, fock, etas, Provenance::Constant)
    }

    /// Same map, different stencil for `η̇`.
    pub fn with_scheme(&self, scheme: FdScheme) -> Self {
        DysonMapSolution { scheme, ..self.clone() }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn fock(&self) -> &FockConfig {
        &self.fock
    }

    pub fn params(&self) -> &MapParams {
        &self.params
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn scheme(&self) -> FdScheme {
        self.scheme
    }

    pub fn dim(&self) -> usize {
        self.fock.work_dim()
    }

    pub fn gammas(&self) -> Option<&[C64]> {
        match &*self.params {
            MapParams::Displacement(g) => Some(g),
            _ => None,
        }
    }

    pub fn su11_params(&self) -> Option<&[Su11Params]> {
        match &*self.params {
            MapParams::Su11(p) => Some(p),
            _ => None,
        }
    }

    pub fn eta(&self, i: usize) -> Result<OperatorMatrix> {
        self.eta.at(i)
    }

    pub fn eta_inv(&self, i: usize) -> Result<OperatorMatrix> {
        self.eta_inv.at(i)
    }

    pub fn eta_dot(&self, i: usize) -> Result<OperatorMatrix> {
        differentiate_op(i, &self.grid, self.scheme, |k| self.eta.at(k))
    }

    pub fn rho(&self, i: usize) -> Result<OperatorMatrix> {
        let e = self.eta(i)?;
        Ok(e.dagger().dot(&e))
    }

    pub fn rho_dot(&self, i: usize) -> Result<OperatorMatrix> {
        differentiate_op(i, &self.grid, self.scheme, |k| self.rho(k))
    }

    /// `η⁻¹ η̇`, the term added by a lift.
    pub fn pullback_rate(&self, i: usize) -> Result<OperatorMatrix> {
        Ok(self.eta_inv(i)?.dot(&self.eta_dot(i)?))
    }

    /// `η X η⁻¹`
    pub fn conjugate(&self, i: usize, x: &OperatorMatrix) -> Result<OperatorMatrix> {
        Ok(self.eta(i)?.dot(x).dot(&self.eta_inv(i)?))
    }

    /// `η X η⁻¹ + i η̇ η⁻¹`
    pub fn counterpart(&self, i: usize, x: &OperatorMatrix) -> Result<OperatorMatrix> {
        let inv = self.eta_inv(i)?;
        let rate = self.eta_dot(i)?.dot(&inv).scale(I);
        Ok(self.eta(i)?.dot(x).dot(&inv) + rate)
    }

    pub fn eta_operator(&self) -> TimeOperator {
        self.eta.clone()
    }

    pub fn eta_inv_operator(&self) -> TimeOperator {
        self.eta_inv.clone()
    }

    /// `‖η − η†‖ / ‖η‖` on the guarded block.
    pub fn hermiticity_of_eta(&self, i: usize) -> Result<f64> {
        let e = self.eta(i)?.block(self.fock.keep());
        Ok((&e - &e.dagger()).norm_fro() / e.norm_fro())
    }

    /// Smallest eigenvalue of the guarded block of `ρ`.
    pub fn rho_min_eigenvalue(&self, i: usize) -> Result<f64> {
        let (vals, _) = self.rho(i)?.block(self.fock.keep()).hermitian_eigen();
        Ok(vals[0])
    }
}

/// Coefficient functions of the Hermitian counterparts, sampled on a grid.
///
/// Linear model: `h = ω a†a + u a + v a† + f`; Swanson: `h = W(a†a+½) + V a² + T a†²`.
/// Vectors belonging to the other model are left empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HermitianCoefficients {
    pub times: Vec<f64>,
    pub u: Vec<C64>,
    pub v: Vec<C64>,
    pub f: Vec<C64>,
    pub w: Vec<C64>,
    pub big_v: Vec<C64>,
    pub big_t: Vec<C64>,
    pub f_prime: Vec<C64>,
}

impl HermitianCoefficients {
    /// `max |v − u*|`
    pub fn max_v_minus_u_conj(&self) -> f64 {
        self.u.iter().zip(&self.v).map(|(u, v)| (v - u.conj()).norm()).fold(0.0, f64::max)
    }

    pub fn max_im_f(&self) -> f64 {
        self.f.iter().map(|f| f.im.abs()).fold(0.0, f64::max)
    }

    pub fn max_im_w(&self) -> f64 {
        self.w.iter().map(|w| w.im.abs()).fold(0.0, f64::max)
    }

    /// `max |T − V*|`
    pub fn max_t_minus_v_conj(&self) -> f64 {
        self.big_v.iter().zip(&self.big_t).map(|(v, t)| (t - v.conj()).norm()).fold(0.0, f64::max)
    }
}

/// `‖H†ρ − ρH − iρ̇‖_F / ‖ρ‖_F` on the guarded block.
pub fn quasi_hermiticity_residual(
    h: &OperatorMatrix,
    rho: &OperatorMatrix,
    rho_dot: &OperatorMatrix,
    fock: &FockConfig,
) -> f64 {
    let k = fock.keep();
    let lhs = &(&h.dagger().dot(rho) - &rho.dot(h)) - &rho_dot.scale(I);
    lhs.block(k).norm_fro() / rho.block(k).norm_fro()
}
