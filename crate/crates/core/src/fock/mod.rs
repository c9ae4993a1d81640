//! Truncated Fock-space linear algebra.
//!
//! Matrices are built on `work_dim() = dim + pad` levels; residual norms look
//! only at the first `dim - tail_guard` levels, where truncation of the ladder
//! algebra has not leaked in.

mod expm;
mod gauss;
mod matrix;

pub use expm::{expm_action, matrix_exp, matrix_exp_capped, DEFAULT_EXP_CAP, SQUARING_THRESHOLD};
pub use gauss::{
    bogoliubov, bogoliubov_sign_check, gauss_decompose, gauss_exponent, gauss_product, gauss_residual,
    gauss_residual_with_pad, xi_coth_xi, BogoliubovSignCheck, Su11Params, Sign,
};
pub use matrix::OperatorMatrix;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = num_complex::Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FockConfig {
    /// Truncation dimension N.
    pub dim: usize,
    /// Top levels excluded from every residual.
    #[serde(default = "default_tail_guard")]
    pub tail_guard: usize,
    #[serde(default = "default_tol_tail")]
    pub tol_tail: f64,
    /// Extra levels carried in the working space and cropped before measuring.
    #[serde(default)]
    pub pad: usize,
}

fn default_tail_guard() -> usize {
    5
}

fn default_tol_tail() -> f64 {
    1e-10
}

impl FockConfig {
    pub fn new(dim: usize) -> Result<Self> {
        let cfg = FockConfig { dim, tail_guard: default_tail_guard(), tol_tail: default_tol_tail(), pad: 0 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_guard(mut self, tail_guard: usize) -> Result<Self> {
        self.tail_guard = tail_guard;
        self.validate()?;
        Ok(self)
    }

    pub fn with_pad(mut self, pad: usize) -> Self {
        self.pad = pad;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.dim < 4 {
            bad.push(format!("fock.dim = {} must be at least 4", self.dim));
        }
        if self.tail_guard >= self.dim {
            bad.push(format!("fock.tail_guard = {} must be below dim = {}", self.tail_guard, self.dim));
        }
        if !(self.tol_tail >= 0.0) {
            bad.push(format!("fock.tol_tail = {} must be nonnegative", self.tol_tail));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad.join("; ")))
        }
    }

    pub fn work_dim(&self) -> usize {
        self.dim + self.pad
    }

    /// Number of levels that enter residual norms.
    pub fn keep(&self) -> usize {
        self.dim - self.tail_guard
    }
}

/// Ladder pair `(a, a†)` on `n` levels.
pub fn ladder_n(n: usize) -> (OperatorMatrix, OperatorMatrix) {
    let a = OperatorMatrix::from_fn(n, |i, j| if j == i + 1 { re((j as f64).sqrt()) } else { C64::default() });
    let ad = a.dagger();
    (a, ad)
}

/// `(a, a†)` on the working space of `config`.
pub fn build_ladder(config: &FockConfig) -> (OperatorMatrix, OperatorMatrix) {
    ladder_n(config.work_dim())
}

pub fn number_n(n: usize) -> OperatorMatrix {
    OperatorMatrix::from_diag((0..n).map(|m| re(m as f64)))
}

/// `(K₊, K₋, K₀) = (a†²/2, a²/2, a†a/2 + 1/4)`.
pub fn su11_generators(config: &FockConfig) -> (OperatorMatrix, OperatorMatrix, OperatorMatrix) {
    su11_n(config.work_dim())
}

pub(crate) fn su11_n(n: usize) -> (OperatorMatrix, OperatorMatrix, OperatorMatrix) {
    let (a, ad) = ladder_n(n);
    let kp = ad.dot(&ad).scale_re(0.5);
    let km = a.dot(&a).scale_re(0.5);
    let k0 = OperatorMatrix::from_diag((0..n).map(|m| re(m as f64 / 2.0 + 0.25)));
    (kp, km, k0)
}

/// `R(χ) = exp(-iχ a†a)`.
pub fn rotation(chi: f64, config: &FockConfig) -> OperatorMatrix {
    OperatorMatrix::from_diag((0..config.work_dim()).map(|m| C64::from_polar(1.0, -chi * m as f64)))
}

/// `D(θ) = exp(θa† − θ*a)`, with a tail-population check on `D(θ)|0⟩`.
pub fn displacement(theta: C64, config: &FockConfig) -> Result<OperatorMatrix> {
    let (a, ad) = build_ladder(config);
    let d = matrix_exp(&(&ad.scale(theta) - &a.scale(theta.conj())))?;
    let population: f64 = (config.keep()..config.work_dim()).map(|m| d.get(m, 0).norm_sqr()).sum();
    if population > config.tol_tail {
        return Err(Error::Truncation { population, tolerance: config.tol_tail });
    }
    Ok(d)
}

/// Coherent state `D(θ)|0⟩`.
pub fn coherent_state(theta: C64, config: &FockConfig) -> Result<Array1<C64>> {
    let d = displacement(theta, config)?;
    Ok(d.entries().column(0).to_owned())
}

/// Frobenius norm of the guarded block.
pub fn guarded_norm(m: &OperatorMatrix, config: &FockConfig) -> f64 {
    m.block(config.keep()).norm_fro()
}

/// `‖A − B‖ / max(‖B‖, floor)` on the guarded block.
pub fn guarded_rel(a: &OperatorMatrix, b: &OperatorMatrix, config: &FockConfig, floor: f64) -> f64 {
    let k = config.keep();
    let d = (&a.block(k) - &b.block(k)).norm_fro();
    d / b.block(k).norm_fro().max(floor)
}
