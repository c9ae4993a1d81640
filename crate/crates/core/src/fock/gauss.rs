//! SU(1,1) Gauss decomposition of `exp(ε(a†a+½) + μa² + μ*a†²)`.

use serde::{Deserialize, Serialize};

use super::{matrix_exp, number_n, su11_n, ladder_n, re, FockConfig, OperatorMatrix, C64};
use crate::error::{Error, Result};

/// Derived quantities of the Gauss decomposition, all computed from `(ε, μ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Su11Params {
    pub epsilon: f64,
    pub mu: C64,
    pub xi: C64,
    pub gamma_plus: C64,
    pub gamma_minus: C64,
    pub z: C64,
    pub phi: f64,
    pub chi: f64,
    pub varphi: f64,
    pub lambda_plus: C64,
    pub lambda_minus: C64,
    pub lambda_zero: C64,
}

/// `Ξ coth Ξ` as a function of `q = Ξ²`; even in Ξ, so real for either sign
/// of `q`. The point `q = 0` is a removable singularity.
pub fn xi_coth_xi(q: f64) -> Result<f64> {
    if q.abs() < 1e-3 {
        return Ok(1.0 + q / 3.0 - q * q / 45.0 + 2.0 * q.powi(3) / 945.0 - q.powi(4) / 4725.0);
    }
    if q > 0.0 {
        let x = q.sqrt();
        return Ok(x / x.tanh());
    }
    let y = (-q).sqrt();
    let s = y.sin();
    if s.abs() < 1e-12 {
        return Err(Error::Branch(format!("cot(|Ξ|) pole at |Ξ| = {y}")));
    }
    Ok(y * y.cos() / s)
}

pub fn gauss_decompose(epsilon: f64, mu: C64) -> Result<Su11Params> {
    if !epsilon.is_finite() || !mu.re.is_finite() || !mu.im.is_finite() {
        return Err(Error::Domain("non-finite (epsilon, mu)".into()));
    }
    if epsilon == 0.0 {
        return Err(Error::Domain("epsilon = 0 leaves z = 2μ/ε undefined".into()));
    }
    let q = epsilon * epsilon - 4.0 * mu.norm_sqr();
    let xi = if q >= 0.0 { re(q.sqrt()) } else { C64::new(0.0, (-q).sqrt()) };
    let x = xi_coth_xi(q)?;
    let gamma_plus = 1.0 + x / epsilon;
    let gamma_minus = 1.0 - x / epsilon;
    if gamma_minus.abs() < 1e-12 {
        return Err(Error::Branch(format!("Γ₋ vanishes at ε = {epsilon}, |μ| = {}", mu.norm())));
    }
    let z = mu * (2.0 / epsilon);
    let phi = z.norm() / gamma_minus;
    let chi = 2.0 / gamma_minus - 1.0;
    let varphi = if z.norm() > 0.0 { z.arg() } else { 0.0 };
    let lambda_plus = -C64::from_polar(phi, -varphi);
    let lambda_minus = -C64::from_polar(phi, varphi);
    let lambda_zero = phi * phi - chi;
    if !(lambda_zero > 0.0) || !lambda_zero.is_finite() {
        return Err(Error::Domain(format!("λ₀ = {lambda_zero} is not on the positive real axis")));
    }
    Ok(Su11Params {
        epsilon,
        mu,
        xi,
        gamma_plus: re(gamma_plus),
        gamma_minus: re(gamma_minus),
        z,
        phi,
        chi,
        varphi,
        lambda_plus,
        lambda_minus,
        lambda_zero: re(lambda_zero),
    })
}

/// `ε(a†a+½) + μa² + μ*a†²` on `n` levels.
pub fn gauss_exponent(epsilon: f64, mu: C64, n: usize) -> OperatorMatrix {
    let (a, ad) = ladder_n(n);
    let half = OperatorMatrix::identity(n).scale_re(0.5);
    (&number_n(n) + &half).scale_re(epsilon) + a.dot(&a).scale(mu) + ad.dot(&ad).scale(mu.conj())
}

/// `exp(λ₊K₊) exp(ln λ₀ K₀) exp(λ₋K₋)` on `n` levels. The factors are
/// triangular, so the truncated product is exact on every retained level.
pub fn gauss_product(p: &Su11Params, n: usize) -> Result<OperatorMatrix> {
    let (kp, km, _) = su11_n(n);
    let ln0 = p.lambda_zero.re.ln();
    let mid = OperatorMatrix::from_diag((0..n).map(|m| re((ln0 * (m as f64 / 2.0 + 0.25)).exp())));
    let left = matrix_exp(&kp.scale(p.lambda_plus))?;
    let right = matrix_exp(&km.scale(p.lambda_minus))?;
    Ok(left.dot(&mid).dot(&right))
}

/// Relative mismatch between both sides of the decomposition on the guarded
/// block. The left side couples every level to the ones above it, so it is
/// computed in a padded space that grows until the cropped block stops
/// changing.
pub fn gauss_residual(p: &Su11Params, config: &FockConfig) -> Result<f64> {
    let keep = config.keep();
    let step = (config.dim / 3).max(20);
    let cap = 8 * config.dim.max(30);
    let mut pad = config.pad.max(step);
    let mut prev = matrix_exp(&gauss_exponent(p.epsilon, p.mu, config.dim + pad))?.block(keep);
    loop {
        pad += step;
        let cur = matrix_exp(&gauss_exponent(p.epsilon, p.mu, config.dim + pad))?.block(keep);
        let change = (&cur - &prev).norm_fro() / cur.norm_fro();
        prev = cur;
        if change < 1e-14 || pad >= cap {
            break;
        }
    }
    let rhs = gauss_product(p, config.dim)?.block(keep);
    Ok((&prev - &rhs).norm_fro() / prev.norm_fro())
}

/// Same measurement with a fixed pad (0 reproduces the bare truncation).
pub fn gauss_residual_with_pad(p: &Su11Params, config: &FockConfig, pad: usize) -> Result<f64> {
    let keep = config.keep();
    let lhs = matrix_exp(&gauss_exponent(p.epsilon, p.mu, config.dim + pad))?.block(keep);
    let rhs = gauss_product(p, config.dim)?.block(keep);
    Ok((&lhs - &rhs).norm_fro() / lhs.norm_fro())
}

/// 2×2 matrix `M` with `η (a, a†)ᵀ η⁻¹ = M (a, a†)ᵀ` for `η = exp(ε(a†a+½) + μa² + μ*a†²)`.
///
/// `ad_G` acts on `(a, a†)` as `L = [[-ε, -2μ*], [2μ, ε]]` and `L² = Ξ² 1`, so
/// `e^L = cosh Ξ + (sinh Ξ / Ξ) L`.
pub fn bogoliubov(epsilon: f64, mu: C64) -> [[C64; 2]; 2] {
    let q = epsilon * epsilon - 4.0 * mu.norm_sqr();
    let (ch, sh) = cosh_sinhc(q);
    let l = [[re(-epsilon), -2.0 * mu.conj()], [2.0 * mu, re(epsilon)]];
    [
        [ch + sh * l[0][0], sh * l[0][1]],
        [sh * l[1][0], ch + sh * l[1][1]],
    ]
}

fn cosh_sinhc(q: f64) -> (C64, C64) {
    if q.abs() < 1e-4 {
        let ch = 1.0 + q / 2.0 + q * q / 24.0 + q.powi(3) / 720.0;
        let sh = 1.0 + q / 6.0 + q * q / 120.0 + q.powi(3) / 5040.0;
        return (re(ch), re(sh));
    }
    if q > 0.0 {
        let x = q.sqrt();
        (re(x.cosh()), re(x.sinh() / x))
    } else {
        let y = (-q).sqrt();
        (re(y.cos()), re(y.sin() / y))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BogoliubovSignCheck {
    pub residual_plus: f64,
    pub residual_minus: f64,
    /// The sign whose residual is below 1e-8, if any.
    pub matched: Option<Sign>,
}

/// Compares `η (a, a†) η⁻¹` computed by conjugation against the nominal
/// transform `±λ₀^{-1/2} [[-1, λ₊], [-λ₋, χ]] (a, a†)` for both signs.
pub fn bogoliubov_sign_check(p: &Su11Params, config: &FockConfig) -> Result<BogoliubovSignCheck> {
    let n = config.dim + config.pad.max(config.dim).max(20);
    let keep = config.keep();
    let g = gauss_exponent(p.epsilon, p.mu, n);
    let eta = matrix_exp(&g)?;
    let eta_inv = matrix_exp(&-&g)?;
    let (a, ad) = ladder_n(n);
    let direct_a = eta.dot(&a).dot(&eta_inv).block(keep);
    let direct_ad = eta.dot(&ad).dot(&eta_inv).block(keep);
    let s = 1.0 / p.lambda_zero.re.sqrt();
    let nominal_a = (&a.scale_re(-1.0) + &ad.scale(p.lambda_plus)).scale_re(s).block(keep);
    let nominal_ad = (&a.scale(-p.lambda_minus) + &ad.scale_re(p.chi)).scale_re(s).block(keep);
    let scale = (direct_a.norm_fro().powi(2) + direct_ad.norm_fro().powi(2)).sqrt();
    let res = |sgn: f64| {
        let ea = (&direct_a - &nominal_a.scale_re(sgn)).norm_fro();
        let ed = (&direct_ad - &nominal_ad.scale_re(sgn)).norm_fro();
        (ea * ea + ed * ed).sqrt() / scale
    };
    let residual_plus = res(1.0);
    let residual_minus = res(-1.0);
    let matched = if residual_plus.min(residual_minus) < 1e-8 {
        Some(if residual_plus < residual_minus { Sign::Plus } else { Sign::Minus })
    } else {
        None
    };
    Ok(BogoliubovSignCheck { residual_plus, residual_minus, matched })
}
