use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::DMatrix;
use ndarray::{s, Array1, Array2};

use super::C64;
use crate::error::{Error, Result};

/// Dense complex square matrix on a truncated Fock space.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    m: Array2<C64>,
}

impl OperatorMatrix {
    /// Wraps an array, rejecting non-square or non-finite input.
    pub fn new(m: Array2<C64>) -> Result<Self> {
        let (r, c) = m.dim();
        if r != c {
            return Err(Error::DimMismatch { expected: r, got: c });
        }
        if r == 0 {
            return Err(Error::InvalidConfig("empty matrix".into()));
        }
        let out = OperatorMatrix { m };
        if !out.is_finite() {
            return Err(Error::NonFinite("operator matrix"));
        }
        Ok(out)
    }

    pub(crate) fn from_array(m: Array2<C64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        OperatorMatrix { m }
    }

    pub fn zeros(dim: usize) -> Self {
        OperatorMatrix { m: Array2::zeros((dim, dim)) }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, C64::new(1.0, 0.0))
    }

    pub fn scalar(dim: usize, c: C64) -> Self {
        Self::from_diag((0..dim).map(|_| c))
    }

    pub fn from_diag<I: IntoIterator<Item = C64>>(diag: I) -> Self {
        let d: Vec<C64> = diag.into_iter().collect();
        Self::from_array(Array2::from_diag(&Array1::from(d)))
    }

    pub fn from_fn<F: FnMut(usize, usize) -> C64>(dim: usize, mut f: F) -> Self {
        Self::from_array(Array2::from_shape_fn((dim, dim), |(i, j)| f(i, j)))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.m
    }

    pub fn into_inner(self) -> Array2<C64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.m[[i, j]]
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn dagger(&self) -> Self {
        Self::from_array(self.m.t().mapv(|z| z.conj()))
    }

    pub fn dot(&self, other: &OperatorMatrix) -> Self {
        Self::from_array(self.m.dot(&other.m))
    }

    pub fn apply(&self, v: &Array1<C64>) -> Array1<C64> {
        self.m.dot(v)
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::from_array(&self.m * c)
    }

    pub fn scale_re(&self, c: f64) -> Self {
        Self::from_array(self.m.mapv(|z| z * c))
    }

    pub fn trace(&self) -> C64 {
        self.m.diag().sum()
    }

    pub fn norm_fro(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        self.m
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Top-left `keep × keep` block.
    pub fn block(&self, keep: usize) -> Self {
        let k = keep.min(self.dim());
        Self::from_array(self.m.slice(s![..k, ..k]).to_owned())
    }

    /// Crops or zero-pads to `dim`.
    pub fn resized(&self, dim: usize) -> Self {
        let mut out = Array2::zeros((dim, dim));
        let k = dim.min(self.dim());
        out.slice_mut(s![..k, ..k]).assign(&self.m.slice(s![..k, ..k]));
        Self::from_array(out)
    }

    /// `[self, other]`
    pub fn commutator(&self, other: &OperatorMatrix) -> Self {
        &self.dot(other) - &other.dot(self)
    }

    pub fn hermitian_part(&self) -> Self {
        (self + &self.dagger()).scale_re(0.5)
    }

    pub fn inverse(&self) -> Result<Self> {
        let lu = to_na(&self.m).lu();
        let inv = lu.try_inverse().ok_or(Error::Singular)?;
        let out = from_na(&inv);
        if !out.is_finite() {
            return Err(Error::Singular);
        }
        Ok(out)
    }

    /// `self⁻¹ · rhs`
    pub fn solve(&self, rhs: &OperatorMatrix) -> Result<Self> {
        let lu = to_na(&self.m).lu();
        let x = lu.solve(&to_na(&rhs.m)).ok_or(Error::Singular)?;
        let out = from_na(&x);
        if !out.is_finite() {
            return Err(Error::Singular);
        }
        Ok(out)
    }

    /// `lhs · self⁻¹`, via `(self† \ lhs†)†`.
    pub fn right_solve(&self, lhs: &OperatorMatrix) -> Result<Self> {
        Ok(self.dagger().solve(&lhs.dagger())?.dagger())
    }

    pub fn solve_vec(&self, rhs: &Array1<C64>) -> Result<Array1<C64>> {
        let lu = to_na(&self.m).lu();
        let b = nalgebra::DVector::from_iterator(rhs.len(), rhs.iter().copied());
        let x = lu.solve(&b).ok_or(Error::Singular)?;
        Ok(Array1::from_iter(x.iter().copied()))
    }

    /// Eigenvalues of a general matrix (complex Schur form), sorted by real part.
    pub fn eigenvalues(&self) -> Vec<C64> {
        let (_, t) = to_na(&self.m).schur().unpack();
        let mut ev: Vec<C64> = t.diagonal().iter().copied().collect();
        ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        ev
    }

    /// Eigen-decomposition of the Hermitian part; ascending eigenvalues,
    /// eigenvectors as columns.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, OperatorMatrix) {
        let eig = to_na(&self.hermitian_part().m).symmetric_eigen();
        let n = self.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vecs = Self::from_fn(n, |i, j| eig.eigenvectors[(i, order[j])]);
        (vals, vecs)
    }

    /// 1-norm condition number `‖M‖₁ ‖M⁻¹‖₁`.
    pub fn cond_one(&self) -> Result<f64> {
        Ok(self.norm_one() * self.inverse()?.norm_one())
    }
}

fn to_na(m: &Array2<C64>) -> DMatrix<C64> {
    let (r, c) = m.dim();
    DMatrix::from_fn(r, c, |i, j| m[[i, j]])
}

fn from_na(m: &DMatrix<C64>) -> OperatorMatrix {
    OperatorMatrix::from_array(Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)]))
}

macro_rules! binop {
    ($tr:ident, $f:ident, $op:tt) => {
        impl $tr<&OperatorMatrix> for &OperatorMatrix {
            type Output = OperatorMatrix;
            fn $f(self, rhs: &OperatorMatrix) -> OperatorMatrix {
                OperatorMatrix::from_array(&self.m $op &rhs.m)
            }
        }
        impl $tr<OperatorMatrix> for OperatorMatrix {
            type Output = OperatorMatrix;
            fn $f(self, rhs: OperatorMatrix) -> OperatorMatrix {
                OperatorMatrix::from_array(self.m $op rhs.m)
            }
        }
        impl $tr<&OperatorMatrix> for OperatorMatrix {
            type Output = OperatorMatrix;
            fn $f(self, rhs: &OperatorMatrix) -> OperatorMatrix {
                OperatorMatrix::from_array(self.m $op &rhs.m)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);

impl AddAssign<&OperatorMatrix> for OperatorMatrix {
    fn add_assign(&mut self, rhs: &OperatorMatrix) {
        self.m += &rhs.m;
    }
}

/// Matrix product.
impl Mul<&OperatorMatrix> for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.dot(rhs)
    }
}

impl Mul<C64> for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, c: C64) -> OperatorMatrix {
        self.scale(c)
    }
}

impl Mul<C64> for OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(mut self, c: C64) -> OperatorMatrix {
        self.m.mapv_inplace(|z| z * c);
        self
    }
}

impl Neg for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn neg(self) -> OperatorMatrix {
        OperatorMatrix::from_array(self.m.mapv(|z| -z))
    }
}
