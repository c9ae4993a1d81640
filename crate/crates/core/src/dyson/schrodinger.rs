//! Maps solving `i ∂_t η = η H`.

use super::{DysonMapSolution, Provenance};
use crate::error::{Error, Result};
use crate::fock::{FockConfig, OperatorMatrix, I};
use crate::grid::{rk4_step, TimeOperator};

/// Largest `‖η‖₁` tolerated during propagation.
pub const GROWTH_CAP: f64 = 1e12;

/// RK4 on `η̇ = −i η H` at the grid spacing. Midpoint values of `H` come
/// from the operator itself (exact for continuous sources, cubic otherwise).
pub fn solve_schrodinger_like(h: &TimeOperator, eta0: OperatorMatrix, fock: &FockConfig) -> Result<DysonMapSolution> {
    if eta0.dim() != h.dim() {
        return Err(Error::DimMismatch { expected: h.dim(), got: eta0.dim() });
    }
    if eta0.cond_one()? > GROWTH_CAP {
        return Err(Error::Singular);
    }
    let grid = *h.grid();
    let mut rhs = |t: f64, e: &OperatorMatrix| -> Result<OperatorMatrix> { Ok(e.dot(&h.at_time(t)?).scale(-I)) };
    let mut etas = Vec::with_capacity(grid.len());
    etas.push(eta0);
    for i in 0..grid.len() - 1 {
        let next = rk4_step(&mut rhs, grid.t(i), &etas[i], grid.t(i + 1) - grid.t(i))?;
        let norm = next.norm_one();
        if !next.is_finite() || norm > GROWTH_CAP {
            return Err(Error::Overflow { norm, cap: GROWTH_CAP });
        }
        etas.push(next);
    }
    DysonMapSolution::matrices(grid, *fock, etas, Provenance::SchrodingerLike)
}

/// `max_t ‖ρ_t − ρ_0‖ / ‖ρ_0‖` on the guarded block.
pub fn metric_drift(map: &DysonMapSolution) -> Result<f64> {
    let k = map.fock().keep();
    let r0 = map.rho(0)?.block(k);
    let mut worst = 0.0f64;
    for i in 1..map.grid().len() {
        worst = worst.max((&map.rho(i)?.block(k) - &r0).norm_fro() / r0.norm_fro());
    }
    Ok(worst)
}
