//! Coefficient tracks and the two model Hamiltonians.

pub mod expr;
mod track;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use track::CoefficientTrack;

use crate::fock::{ladder_n, number_n, re, FockConfig, OperatorMatrix, C64};
use crate::grid::{Grid, TimeOperator};

/// `H = ω a†a + α a + β a†`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearModel {
    pub omega: CoefficientTrack,
    pub alpha: CoefficientTrack,
    pub beta: CoefficientTrack,
}

/// `H = ω (a†a + ½) + α a² + β a†²`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwansonModel {
    pub omega: CoefficientTrack,
    pub alpha: CoefficientTrack,
    pub beta: CoefficientTrack,
}

impl LinearModel {
    pub fn new(omega: CoefficientTrack, alpha: CoefficientTrack, beta: CoefficientTrack) -> Self {
        LinearModel { omega, alpha, beta }
    }

    /// Parses three closed-form expressions.
    pub fn from_exprs(omega: &str, alpha: &str, beta: &str) -> crate::Result<Self> {
        Ok(Self::new(
            CoefficientTrack::closed(omega)?,
            CoefficientTrack::closed(alpha)?,
            CoefficientTrack::closed(beta)?,
        ))
    }

    pub fn coefficients(&self, t: f64) -> (C64, C64, C64) {
        (self.omega.eval(t), self.alpha.eval(t), self.beta.eval(t))
    }

    pub fn hamiltonian(&self, grid: &Grid, config: &FockConfig) -> TimeOperator {
        let basis = Arc::new(Basis::new(config.work_dim()));
        let model = self.clone();
        TimeOperator::continuous(*grid, config.work_dim(), move |t| Ok(basis.linear(&model, t)))
    }
}

impl SwansonModel {
    pub fn new(omega: CoefficientTrack, alpha: CoefficientTrack, beta: CoefficientTrack) -> Self {
        SwansonModel { omega, alpha, beta }
    }

    pub fn from_exprs(omega: &str, alpha: &str, beta: &str) -> crate::Result<Self> {
        Ok(Self::new(
            CoefficientTrack::closed(omega)?,
            CoefficientTrack::closed(alpha)?,
            CoefficientTrack::closed(beta)?,
        ))
    }

    pub fn coefficients(&self, t: f64) -> (C64, C64, C64) {
        (self.omega.eval(t), self.alpha.eval(t), self.beta.eval(t))
    }

    pub fn hamiltonian(&self, grid: &Grid, config: &FockConfig) -> TimeOperator {
        let basis = Arc::new(Basis::new(config.work_dim()));
        let model = self.clone();
        TimeOperator::continuous(*grid, config.work_dim(), move |t| Ok(basis.swanson(&model, t)))
    }
}

/// Ladder-operator building blocks on `n` levels.
#[derive(Clone, Debug)]
pub struct Basis {
    pub a: OperatorMatrix,
    pub ad: OperatorMatrix,
    pub num: OperatorMatrix,
    pub a2: OperatorMatrix,
    pub ad2: OperatorMatrix,
    pub num_half: OperatorMatrix,
}

impl Basis {
    pub fn new(n: usize) -> Self {
        let (a, ad) = ladder_n(n);
        let num = number_n(n);
        let a2 = a.dot(&a);
        let ad2 = ad.dot(&ad);
        let num_half = &num + &OperatorMatrix::identity(n).scale_re(0.5);
        Basis { a, ad, num, a2, ad2, num_half }
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn linear(&self, m: &LinearModel, t: f64) -> OperatorMatrix {
        let (w, al, be) = m.coefficients(t);
        self.linear_from(w, al, be)
    }

    pub fn linear_from(&self, w: C64, al: C64, be: C64) -> OperatorMatrix {
        self.num.scale(w) + self.a.scale(al) + self.ad.scale(be)
    }

    pub fn swanson(&self, m: &SwansonModel, t: f64) -> OperatorMatrix {
        let (w, al, be) = m.coefficients(t);
        self.swanson_from(w, al, be)
    }

    pub fn swanson_from(&self, w: C64, al: C64, be: C64) -> OperatorMatrix {
        self.num_half.scale(w) + self.a2.scale(al) + self.ad2.scale(be)
    }
}

/// `ω a†a + α a + β a†` at time `t` on the working space.
pub fn build_linear_hamiltonian(model: &LinearModel, t: f64, config: &FockConfig) -> OperatorMatrix {
    Basis::new(config.work_dim()).linear(model, t)
}

/// `ω(a†a + ½) + α a² + β a†²` at time `t` on the working space.
pub fn build_swanson_hamiltonian(model: &SwansonModel, t: f64, config: &FockConfig) -> OperatorMatrix {
    Basis::new(config.work_dim()).swanson(model, t)
}

/// `‖M − M†‖_F / max(‖M‖_F, 1)` on the guarded block.
pub fn hermiticity_residual(m: &OperatorMatrix, config: &FockConfig) -> f64 {
    let b = m.block(config.keep());
    (&b - &b.dagger()).norm_fro() / b.norm_fro().max(1.0)
}

pub const PT_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PtReport {
    /// `max |ω_t − ω_{−t}|`
    pub omega_even: f64,
    /// Linear model: `max |α_t + α_{−t}|`; Swanson: `max |α_t − α_{−t}|`.
    pub alpha: f64,
    pub beta: f64,
    pub pass: bool,
    /// The "generic function of it" alternative is not tested.
    pub analytic_continuation: String,
}

pub enum PtModel<'a> {
    Linear(&'a LinearModel),
    Swanson(&'a SwansonModel),
}

/// Even-ω / odd-(α, β) test for the linear model, all-even for Swanson.
pub fn pt_symmetry_check(model: PtModel<'_>, horizon: f64, samples: usize) -> PtReport {
    let n = samples.max(2);
    let times = (0..n).map(|k| -horizon + 2.0 * horizon * k as f64 / (n - 1) as f64);
    let (om, al, be, odd) = match model {
        PtModel::Linear(m) => (&m.omega, &m.alpha, &m.beta, true),
        PtModel::Swanson(m) => (&m.omega, &m.alpha, &m.beta, false),
    };
    let sign = if odd { re(1.0) } else { re(-1.0) };
    let (mut dw, mut da, mut db) = (0.0f64, 0.0f64, 0.0f64);
    for t in times {
        dw = dw.max((om.eval(t) - om.eval(-t)).norm());
        da = da.max((al.eval(t) + sign * al.eval(-t)).norm());
        db = db.max((be.eval(t) + sign * be.eval(-t)).norm());
    }
    PtReport {
        omega_even: dw,
        alpha: da,
        beta: db,
        pass: dw < PT_TOLERANCE && da < PT_TOLERANCE && db < PT_TOLERANCE,
        analytic_continuation: "unchecked".into(),
    }
}
