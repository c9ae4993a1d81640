//! Scaling-and-squaring Taylor exponential.

use ndarray::Array1;

use super::{OperatorMatrix, C64};
use crate::error::{Error, Result};

/// Kernel is applied once `‖M / 2^s‖₁` drops to this value.
pub const SQUARING_THRESHOLD: f64 = 0.5;

/// Default 1-norm cap above which [`matrix_exp`] refuses to work.
pub const DEFAULT_EXP_CAP: f64 = 700.0;

const MAX_TERMS: usize = 40;

/// `e^M` with the default cap.
pub fn matrix_exp(m: &OperatorMatrix) -> Result<OperatorMatrix> {
    matrix_exp_capped(m, DEFAULT_EXP_CAP)
}

pub fn matrix_exp_capped(m: &OperatorMatrix, cap: f64) -> Result<OperatorMatrix> {
    if !m.is_finite() {
        return Err(Error::NonFinite("matrix_exp argument"));
    }
    let norm = m.norm_one();
    if norm > cap {
        return Err(Error::Overflow { norm, cap });
    }
    let mut s = 0u32;
    let mut scaled = norm;
    while scaled > SQUARING_THRESHOLD {
        scaled *= 0.5;
        s += 1;
    }
    let x = m.scale_re(0.5f64.powi(s as i32));
    let mut out = taylor(&x);
    for _ in 0..s {
        out = out.dot(&out);
    }
    if !out.is_finite() {
        return Err(Error::Overflow { norm, cap });
    }
    Ok(out)
}

// With ‖X‖₁ ≤ 1/2 the k-th term is below 2^-k / k!, so ~18 terms reach 1e-22.
fn taylor(x: &OperatorMatrix) -> OperatorMatrix {
    let n = x.dim();
    let mut sum = OperatorMatrix::identity(n);
    let mut term = OperatorMatrix::identity(n);
    for k in 1..=MAX_TERMS {
        term = term.dot(x).scale_re(1.0 / k as f64);
        sum += &term;
        if term.norm_one() <= 1e-18 * sum.norm_one() {
            break;
        }
    }
    sum
}

/// `e^M v` without forming `e^M`.
pub fn expm_action(m: &OperatorMatrix, v: &Array1<C64>) -> Result<Array1<C64>> {
    let norm = m.norm_one();
    if !norm.is_finite() {
        return Err(Error::NonFinite("expm_action argument"));
    }
    if norm > DEFAULT_EXP_CAP {
        return Err(Error::Overflow { norm, cap: DEFAULT_EXP_CAP });
    }
    let steps = ((norm / SQUARING_THRESHOLD).ceil() as usize).max(1);
    let inv = 1.0 / steps as f64;
    let mut out = v.clone();
    for _ in 0..steps {
        let mut term = out.clone();
        let mut acc = out.clone();
        for k in 1..=MAX_TERMS {
            term = m.apply(&term).mapv(|z| z * (inv / k as f64));
            acc += &term;
            let tn = term.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let an = acc.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if tn <= 1e-18 * an.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        out = acc;
    }
    Ok(out)
}
