//! Uniform time grids, stencils, quadrature and fixed-step RK4.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{OperatorMatrix, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    t0: f64,
    t1: f64,
    step: f64,
    n: usize,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpec {
    t0: f64,
    t1: f64,
    step: f64,
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;
    fn try_from(s: GridSpec) -> Result<Grid> {
        Grid::new(s.t0, s.t1, s.step)
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> GridSpec {
        GridSpec { t0: g.t0, t1: g.t1, step: g.step }
    }
}

impl Grid {
    /// The span must hold a whole number of steps (to 1e-9 relative).
    pub fn new(t0: f64, t1: f64, step: f64) -> Result<Self> {
        let mut bad = Vec::new();
        if !(step > 0.0) || !step.is_finite() {
            bad.push(format!("grid.step = {step} must be positive"));
        }
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            bad.push(format!("grid.t1 = {t1} must exceed grid.t0 = {t0}"));
        }
        if !bad.is_empty() {
            return Err(Error::InvalidConfig(bad.join("; ")));
        }
        let ratio = (t1 - t0) / step;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidConfig(format!(
                "grid.step = {step} does not divide [{t0}, {t1}] into whole steps"
            )));
        }
        Ok(Grid { t0, t1, step, n: steps as usize + 1 })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn t(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.t1
        } else {
            self.t0 + i as f64 * self.step
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.t(i)).collect()
    }

    /// Same span with the step halved.
    pub fn refined(&self) -> Grid {
        Grid { t0: self.t0, t1: self.t1, step: self.step / 2.0, n: 2 * self.n - 1 }
    }

    /// Grid index if `t` sits on a node (to 1e-9 of a step).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.step;
        let k = x.round();
        if (x - k).abs() < 1e-9 && k >= 0.0 && (k as usize) < self.n {
            Some(k as usize)
        } else {
            None
        }
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.n == other.n && (self.t0 - other.t0).abs() < 1e-12 && (self.step - other.step).abs() < 1e-15
    }

    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self} vs {other}")))
        }
    }

    /// Four-point Lagrange weights for `t`, clamped to the grid ends. On a
    /// node the weight vector is that node alone, so knots are reproduced
    /// bit for bit.
    pub fn lagrange4(&self, t: f64) -> Vec<(usize, f64)> {
        if let Some(i) = self.index_of(t) {
            return vec![(i, 1.0)];
        }
        let x = ((t - self.t0) / self.step).clamp(0.0, (self.n - 1) as f64);
        let base = (x.floor() as isize - 1).clamp(0, self.n as isize - 4) as usize;
        let nodes: Vec<f64> = (0..4).map(|k| (base + k) as f64).collect();
        (0..4)
            .map(|k| {
                let w = (0..4)
                    .filter(|&j| j != k)
                    .map(|j| (x - nodes[j]) / (nodes[k] - nodes[j]))
                    .product::<f64>();
                (base + k, w)
            })
            .collect()
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}] step {} ({} points)", self.t0, self.t1, self.step, self.n)
    }
}

/// Finite-difference stencil for time derivatives on a grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdScheme {
    /// Second-order central differences.
    Central2,
    /// Central differences with one Richardson level (five points, fourth
    /// order); one-sided five-point stencils at the ends.
    #[default]
    Richardson,
}

impl FdScheme {
    /// Weights `(index, w)` with `f'(t_i) ≈ Σ w f(t_index) / step`.
    pub fn weights(&self, i: usize, n: usize) -> Vec<(usize, f64)> {
        match self {
            FdScheme::Central2 => {
                assert!(n >= 3, "central differences need three points");
                if i == 0 {
                    vec![(0, -1.5), (1, 2.0), (2, -0.5)]
                } else if i == n - 1 {
                    vec![(n - 1, 1.5), (n - 2, -2.0), (n - 3, 0.5)]
                } else {
                    vec![(i - 1, -0.5), (i + 1, 0.5)]
                }
            }
            FdScheme::Richardson => {
                assert!(n >= 5, "five-point stencils need five points");
                const E0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
                const E1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
                let d = 12.0;
                if i < 2 {
                    let w = if i == 0 { E0 } else { E1 };
                    (0..5).map(|k| (k, w[k] / d)).collect()
                } else if i + 2 >= n {
                    let w = if i == n - 1 { E0 } else { E1 };
                    (0..5).map(|k| (n - 1 - k, -w[k] / d)).collect()
                } else {
                    vec![(i - 2, 1.0 / d), (i - 1, -8.0 / d), (i + 1, 8.0 / d), (i + 2, -1.0 / d)]
                }
            }
        }
    }

    pub fn order(&self) -> u32 {
        match self {
            FdScheme::Central2 => 2,
            FdScheme::Richardson => 4,
        }
    }
}

/// Derivative of sampled complex values.
pub fn differentiate(values: &[C64], step: f64, scheme: FdScheme) -> Vec<C64> {
    let n = values.len();
    (0..n)
        .map(|i| scheme.weights(i, n).iter().map(|&(k, w)| values[k] * w).sum::<C64>() / step)
        .collect()
}

/// Derivative at node `i` of a matrix-valued function given by `get`.
pub fn differentiate_op<F>(i: usize, grid: &Grid, scheme: FdScheme, mut get: F) -> Result<OperatorMatrix>
where
    F: FnMut(usize) -> Result<OperatorMatrix>,
{
    let mut acc: Option<OperatorMatrix> = None;
    for (k, w) in scheme.weights(i, grid.len()) {
        let term = get(k)?.scale_re(w / grid.step());
        acc = Some(match acc {
            Some(a) => a + term,
            None => term,
        });
    }
    Ok(acc.expect("stencil is never empty"))
}

/// Running integral `∫_{t0}^{t_i} f` with fourth-order cubic panels.
pub fn cumulative_integral(values: &[C64], step: f64) -> Vec<C64> {
    let n = values.len();
    let mut out = vec![C64::default(); n];
    if n < 2 {
        return out;
    }
    if n < 4 {
        for i in 1..n {
            out[i] = out[i - 1] + (values[i - 1] + values[i]) * (step / 2.0);
        }
        return out;
    }
    let f = values;
    for i in 0..n - 1 {
        let panel = if i == 0 {
            9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]
        } else if i == n - 2 {
            9.0 * f[n - 1] + 19.0 * f[n - 2] - 5.0 * f[n - 3] + f[n - 4]
        } else {
            -f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2]
        };
        out[i + 1] = out[i] + panel * (step / 24.0);
    }
    out
}

/// State types the fixed-step integrator can advance.
pub trait OdeState: Clone {
    /// `self + a x`
    fn axpy(&self, a: f64, x: &Self) -> Self;
}

impl OdeState for C64 {
    fn axpy(&self, a: f64, x: &Self) -> Self {
        self + x * a
    }
}

impl<const N: usize> OdeState for [f64; N] {
    fn axpy(&self, a: f64, x: &Self) -> Self {
        std::array::from_fn(|k| self[k] + a * x[k])
    }
}

impl OdeState for OperatorMatrix {
    fn axpy(&self, a: f64, x: &Self) -> Self {
        self + &x.scale_re(a)
    }
}

/// One classical Runge–Kutta step.
pub fn rk4_step<S, F>(f: &mut F, t: f64, y: &S, h: f64) -> Result<S>
where
    S: OdeState,
    F: FnMut(f64, &S) -> Result<S>,
{
    let k1 = f(t, y)?;
    let k2 = f(t + h / 2.0, &y.axpy(h / 2.0, &k1))?;
    let k3 = f(t + h / 2.0, &y.axpy(h / 2.0, &k2))?;
    let k4 = f(t + h, &y.axpy(h, &k3))?;
    Ok(y.axpy(h / 6.0, &k1).axpy(h / 3.0, &k2).axpy(h / 3.0, &k3).axpy(h / 6.0, &k4))
}

/// RK4 over every step of `grid`, returning the state at each node.
pub fn rk4_integrate<S, F>(grid: &Grid, y0: S, mut f: F) -> Result<Vec<S>>
where
    S: OdeState,
    F: FnMut(f64, &S) -> Result<S>,
{
    let mut out = Vec::with_capacity(grid.len());
    out.push(y0);
    for i in 0..grid.len() - 1 {
        let h = grid.t(i + 1) - grid.t(i);
        let next = rk4_step(&mut f, grid.t(i), &out[i], h)?;
        out.push(next);
    }
    Ok(out)
}

type ContinuousFn = dyn Fn(f64) -> Result<OperatorMatrix> + Send + Sync;
type IndexedFn = dyn Fn(usize) -> Result<OperatorMatrix> + Send + Sync;

#[derive(Clone)]
enum Source {
    Continuous(Arc<ContinuousFn>),
    Indexed { f: Arc<IndexedFn>, cache: Arc<Vec<OnceLock<OperatorMatrix>>> },
}

/// Operator-valued function of time on a grid.
///
/// Continuous sources are exact between nodes; indexed sources are computed
/// once per node on first use and interpolated (cubic) in between. Clones
/// share the cache.
#[derive(Clone)]
pub struct TimeOperator {
    grid: Grid,
    dim: usize,
    src: Source,
}

impl fmt::Debug for TimeOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.src {
            Source::Continuous(_) => "continuous",
            Source::Indexed { .. } => "indexed",
        };
        write!(f, "TimeOperator({kind}, dim {}, {})", self.dim, self.grid)
    }
}

impl TimeOperator {
    pub fn continuous<F>(grid: Grid, dim: usize, f: F) -> Self
    where
        F: Fn(f64) -> Result<OperatorMatrix> + Send + Sync + 'static,
    {
        TimeOperator { grid, dim, src: Source::Continuous(Arc::new(f)) }
    }

    pub fn indexed<F>(grid: Grid, dim: usize, f: F) -> Self
    where
        F: Fn(usize) -> Result<OperatorMatrix> + Send + Sync + 'static,
    {
        let cache = Arc::new((0..grid.len()).map(|_| OnceLock::new()).collect());
        TimeOperator { grid, dim, src: Source::Indexed { f: Arc::new(f), cache } }
    }

    pub fn sampled(grid: Grid, mats: Vec<OperatorMatrix>) -> Result<Self> {
        if mats.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} samples for {} nodes", mats.len(), grid.len())));
        }
        let dim = mats[0].dim();
        let cache: Vec<OnceLock<OperatorMatrix>> = mats
            .into_iter()
            .map(|m| {
                let c = OnceLock::new();
                let _ = c.set(m);
                c
            })
            .collect();
        let f: Arc<IndexedFn> = Arc::new(|_| unreachable!("sampled operators are fully cached"));
        Ok(TimeOperator { grid, dim, src: Source::Indexed { f, cache: Arc::new(cache) } })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Value at grid node `i`.
    pub fn at(&self, i: usize) -> Result<OperatorMatrix> {
        match &self.src {
            Source::Continuous(f) => f(self.grid.t(i)),
            Source::Indexed { f, cache } => {
                if let Some(m) = cache[i].get() {
                    return Ok(m.clone());
                }
                let m = f(i)?;
                let _ = cache[i].set(m.clone());
                Ok(m)
            }
        }
    }

    /// Value at an arbitrary time inside the grid span.
    pub fn at_time(&self, t: f64) -> Result<OperatorMatrix> {
        match &self.src {
            Source::Continuous(f) => f(t),
            Source::Indexed { .. } => {
                let mut acc: Option<OperatorMatrix> = None;
                for (k, w) in self.grid.lagrange4(t) {
                    let term = if w == 1.0 { self.at(k)? } else { self.at(k)?.scale_re(w) };
                    acc = Some(match acc {
                        Some(a) => a + term,
                        None => term,
                    });
                }
                Ok(acc.expect("interpolation stencil is never empty"))
            }
        }
    }

    /// Materializes every node.
    pub fn to_vec(&self) -> Result<Vec<OperatorMatrix>> {
        (0..self.grid.len()).map(|i| self.at(i)).collect()
    }

    /// Node-wise transform, evaluated lazily.
    pub fn map<F>(&self, f: F) -> TimeOperator
    where
        F: Fn(usize, OperatorMatrix) -> Result<OperatorMatrix> + Send + Sync + 'static,
    {
        let me = self.clone();
        TimeOperator::indexed(self.grid, self.dim, move |i| f(i, me.at(i)?))
    }
}
