//! The chain `…, H̄̄, H̄, H, H′, H″, …` of Hamiltonians linked by Dyson maps,
//! and the gauge relations between neighbouring Hermitian counterparts.
//!
//! Node `k` owns the map of the link `k → k+1`. Its Hermitian counterpart is
//! `h_k = η_k H_{k+1} η_k⁻¹ = η_k H_k η_k⁻¹ + i η̇_k η_k⁻¹`.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dyson::{solve_schrodinger_like, DysonMapSolution};
use crate::error::{Error, Result};
use crate::fock::{guarded_rel, FockConfig, OperatorMatrix, C64, I};
use crate::grid::{cumulative_integral, differentiate, Grid, TimeOperator};
use crate::models::hermiticity_residual;

/// Sign in front of `i η⁻¹ η̇` when lifting. `Minus` exists only to check
/// that the verification suite notices a wrong sign.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermSign {
    #[default]
    Plus,
    Minus,
}

impl TermSign {
    fn factor(self) -> C64 {
        match self {
            TermSign::Plus => I,
            TermSign::Minus => -I,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChainNode {
    pub index: i32,
    pub hamiltonian: TimeOperator,
    pub dyson: Option<Arc<DysonMapSolution>>,
    pub hermitian_counterpart: Option<TimeOperator>,
    pub gauge_to_next: Option<GaugeLink>,
}

impl ChainNode {
    pub fn base(hamiltonian: TimeOperator) -> Self {
        ChainNode { index: 0, hamiltonian, dyson: None, hermitian_counterpart: None, gauge_to_next: None }
    }

    pub fn grid(&self) -> &Grid {
        self.hamiltonian.grid()
    }
}

fn check_link(h: &TimeOperator, map: &DysonMapSolution) -> Result<()> {
    h.grid().ensure_same(map.grid())?;
    if h.dim() != map.dim() {
        return Err(Error::DimMismatch { expected: h.dim(), got: map.dim() });
    }
    Ok(())
}

/// Attaches `map` to `node` and returns node `k+1` with `H′ = H + i η⁻¹ η̇`.
/// `node` receives its counterpart `η H′ η⁻¹`.
pub fn lift(node: &mut ChainNode, map: Arc<DysonMapSolution>) -> Result<ChainNode> {
    lift_signed(node, map, TermSign::Plus)
}

pub fn lift_signed(node: &mut ChainNode, map: Arc<DysonMapSolution>, sign: TermSign) -> Result<ChainNode> {
    check_link(&node.hamiltonian, &map)?;
    let m = map.clone();
    let factor = sign.factor();
    let upper = node.hamiltonian.map(move |i, h| Ok(h + m.pullback_rate(i)?.scale(factor)));
    let m = map.clone();
    node.hermitian_counterpart = Some(upper.map(move |i, hp| m.conjugate(i, &hp)));
    node.dyson = Some(map);
    Ok(ChainNode {
        index: node.index + 1,
        hamiltonian: upper,
        dyson: None,
        hermitian_counterpart: None,
        gauge_to_next: None,
    })
}

/// Node `k−1` with `H̄ = H − i η̄⁻¹ η̄̇` and counterpart `η̄ H η̄⁻¹`.
pub fn lower(node: &ChainNode, map: Arc<DysonMapSolution>) -> Result<ChainNode> {
    check_link(&node.hamiltonian, &map)?;
    let m = map.clone();
    let hamiltonian = node.hamiltonian.map(move |i, h| Ok(h - m.pullback_rate(i)?.scale(I)));
    let m = map.clone();
    let counterpart = node.hamiltonian.map(move |i, h| m.conjugate(i, &h));
    Ok(ChainNode {
        index: node.index - 1,
        hamiltonian,
        dyson: Some(map),
        hermitian_counterpart: Some(counterpart),
        gauge_to_next: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainOptions {
    pub sign: TermSign,
    /// Gauge analysis looks at every `gauge_stride`-th node; phases are only
    /// integrated when this is 1.
    pub gauge_stride: usize,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions { sign: TermSign::Plus, gauge_stride: 1 }
    }
}

/// Nodes `k_min..=k_max`, ordered by index. `maps[k]` is the link `k → k+1`.
pub fn build_chain(
    base: ChainNode,
    maps: &BTreeMap<i32, Arc<DysonMapSolution>>,
    k_min: i32,
    k_max: i32,
    fock: &FockConfig,
    opts: &ChainOptions,
) -> Result<Vec<ChainNode>> {
    build_chain_with(base, k_min, k_max, fock, opts, |k, _| maps.get(&k).cloned().ok_or(Error::MissingMap(k)))
}

/// As [`build_chain`], with maps produced on demand. The supplier receives
/// the link level and the Hamiltonian of the node the link starts from when
/// going up, or ends at when going down.
pub fn build_chain_with<F>(
    base: ChainNode,
    k_min: i32,
    k_max: i32,
    fock: &FockConfig,
    opts: &ChainOptions,
    mut supply: F,
) -> Result<Vec<ChainNode>>
where
    F: FnMut(i32, &TimeOperator) -> Result<Arc<DysonMapSolution>>,
{
    if k_min > 0 || k_max < 0 {
        return Err(Error::InvalidConfig(format!("chain depth ({k_min}, {k_max}) must span 0")));
    }
    let mut up = vec![base];
    for k in 0..k_max {
        let map = supply(k, &up[k as usize].hamiltonian)?;
        let next = lift_signed(&mut up[k as usize], map, opts.sign)?;
        up.push(next);
    }
    let mut down: Vec<ChainNode> = Vec::new();
    for k in (k_min..0).rev() {
        let from = down.last().unwrap_or(&up[0]);
        let map = supply(k, &from.hamiltonian)?;
        down.push(lower(from, map)?);
    }
    down.reverse();
    down.extend(up);
    let mut nodes = down;
    for j in 0..nodes.len().saturating_sub(1) {
        if let (Some(lo), Some(hi)) = (&nodes[j].hermitian_counterpart, &nodes[j + 1].hermitian_counterpart) {
            nodes[j].gauge_to_next = Some(analyze_gauge_strided(lo, hi, fock, opts.gauge_stride)?);
        }
    }
    Ok(nodes)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaugeKind {
    Global,
    Local,
}

/// Gauge threshold on the off-identity remainder.
pub const GLOBAL_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeLink {
    pub kind: GaugeKind,
    pub grid: Grid,
    /// Grid indices at which the difference was examined.
    pub samples: Vec<usize>,
    /// Identity coefficient of `h_upper − h_lower` at each sample.
    pub c_track: Vec<C64>,
    /// `∫ C dτ` from `t₀`; empty unless every node was sampled and the link is global.
    pub phase: Vec<C64>,
    /// Off-identity remainder relative to `max(‖h_upper‖, 1)` at each sample.
    pub remainder: Vec<f64>,
    pub residual_offdiag: f64,
}

impl GaugeLink {
    /// `A_t = exp(−i phase_t)`, a multiple of the identity. `None` for local
    /// links, which this library does not resolve.
    pub fn a(&self, i: usize) -> Option<C64> {
        (self.kind == GaugeKind::Global && !self.phase.is_empty()).then(|| (-I * self.phase[i]).exp())
    }

    pub fn a_matrix(&self, i: usize, dim: usize) -> Option<OperatorMatrix> {
        self.a(i).map(|a| OperatorMatrix::scalar(dim, a))
    }

    /// The same link with its phase multiplied by `factor`.
    pub fn with_scaled_phase(&self, factor: f64) -> GaugeLink {
        GaugeLink { phase: self.phase.iter().map(|p| p * factor).collect(), ..self.clone() }
    }
}

pub fn analyze_gauge(h_lower: &TimeOperator, h_upper: &TimeOperator, fock: &FockConfig) -> Result<GaugeLink> {
    analyze_gauge_strided(h_lower, h_upper, fock, 1)
}

/// Splits `Δ = h_upper − h_lower` on the guarded block into `(tr Δ / keep)·1`
/// plus a remainder.
pub fn analyze_gauge_strided(
    h_lower: &TimeOperator,
    h_upper: &TimeOperator,
    fock: &FockConfig,
    stride: usize,
) -> Result<GaugeLink> {
    h_lower.grid().ensure_same(h_upper.grid())?;
    let grid = *h_lower.grid();
    let mut samples: Vec<usize> = (0..grid.len()).step_by(stride.max(1)).collect();
    if *samples.last().unwrap() != grid.len() - 1 {
        samples.push(grid.len() - 1);
    }
    let k = fock.keep();
    let mut c_track = Vec::with_capacity(samples.len());
    let mut remainder = Vec::with_capacity(samples.len());
    for &i in &samples {
        let hu = h_upper.at(i)?.block(k);
        let d = &hu - &h_lower.at(i)?.block(k);
        let c = d.trace() / k as f64;
        let rest = &d - &OperatorMatrix::scalar(k, c);
        c_track.push(c);
        remainder.push(rest.norm_fro() / hu.norm_fro().max(1.0));
    }
    let residual_offdiag = remainder.iter().copied().fold(0.0, f64::max);
    let kind = if residual_offdiag < GLOBAL_TOL { GaugeKind::Global } else { GaugeKind::Local };
    let phase = if kind == GaugeKind::Global && samples.len() == grid.len() {
        cumulative_integral(&c_track, grid.step())
    } else {
        Vec::new()
    };
    Ok(GaugeLink { kind, grid, samples, c_track, phase, remainder, residual_offdiag })
}

/// `max_t ‖i Ȧ − (h_upper A − A h_lower)‖ / max_t ‖h_upper − h_lower‖` on the
/// guarded block, with `Ȧ` by finite differences.
pub fn gauge_ode_residual(
    link: &GaugeLink,
    h_lower: &TimeOperator,
    h_upper: &TimeOperator,
    fock: &FockConfig,
) -> Result<f64> {
    if link.kind == GaugeKind::Local {
        return Err(Error::LocalLink(format!("remainder {:.3e}", link.residual_offdiag)));
    }
    if link.phase.len() != link.grid.len() {
        return Err(Error::InvalidConfig("gauge phase was not integrated on every node".into()));
    }
    let a: Vec<C64> = (0..link.grid.len()).map(|i| (-I * link.phase[i]).exp()).collect();
    let a_dot = differentiate(&a, link.grid.step(), crate::grid::FdScheme::Richardson);
    let k = fock.keep();
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..link.grid.len() {
        let d = &h_upper.at(i)?.block(k) - &h_lower.at(i)?.block(k);
        scale = scale.max(d.norm_fro());
        let lhs = OperatorMatrix::scalar(k, I * a_dot[i]);
        worst = worst.max((&lhs - &d.scale(a[i])).norm_fro());
    }
    Ok(worst / if scale > 0.0 { scale } else { 1.0 })
}

/// Self-consistent lowering with a Schrödinger-like map: `η̄` must solve
/// `i ∂_t η̄ = η̄ H̄` for the very `H̄` it produces. Starting from `H̄ = H`, the
/// relaxed update `H̄ ← (H̄ + H − i η̄⁻¹ η̄̇) / 2` is applied `sweeps` times.
pub fn lower_schrodinger_like(node: &ChainNode, eta0: &OperatorMatrix, fock: &FockConfig, sweeps: usize) -> Result<ChainNode> {
    let h = node.hamiltonian.clone();
    let mut guess = h.clone();
    let mut map = Arc::new(solve_schrodinger_like(&guess, eta0.clone(), fock)?);
    for _ in 0..sweeps {
        let m = map.clone();
        let hh = h.clone();
        let g = guess.clone();
        let mats = (0..h.grid().len())
            .map(|i| Ok((&g.at(i)? + &hh.at(i)? - m.pullback_rate(i)?.scale(I)).scale_re(0.5)))
            .collect::<Result<Vec<_>>>()?;
        guess = TimeOperator::sampled(*h.grid(), mats)?;
        map = Arc::new(solve_schrodinger_like(&guess, eta0.clone(), fock)?);
    }
    lower(node, map)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseReport {
    pub levels: Vec<i32>,
    /// `‖H_k − 2^k H‖ / ‖H‖` per level and node.
    pub deviation: Vec<Vec<f64>>,
    /// Hermiticity residual of each counterpart, per level and node (NaN
    /// where a level has no counterpart).
    pub herm_residual: Vec<Vec<f64>>,
    /// Largest deviation over `k ≠ 0`.
    pub max_deviation: f64,
}

/// Builds levels `−depth..=depth` with Schrödinger-like maps from `eta0`
/// and measures how far each level is from `2^k H`.
pub fn collapse_check(
    base: &ChainNode,
    eta0: &OperatorMatrix,
    fock: &FockConfig,
    depth: i32,
    sign: TermSign,
) -> Result<(Vec<ChainNode>, CollapseReport)> {
    let mut up = vec![base.clone()];
    for k in 0..depth as usize {
        let map = Arc::new(solve_schrodinger_like(&up[k].hamiltonian, eta0.clone(), fock)?);
        let next = lift_signed(&mut up[k], map, sign)?;
        up.push(next);
    }
    let mut down: Vec<ChainNode> = Vec::new();
    for _ in 0..depth {
        let from = down.last().unwrap_or(&up[0]);
        down.push(lower_schrodinger_like(from, eta0, fock, 3)?);
    }
    down.reverse();
    down.extend(up);
    let report = collapse_deviation(&down, &base.hamiltonian, fock)?;
    Ok((down, report))
}

/// `‖H_k − 2^k H‖ / ‖H‖` for every node, plus counterpart Hermiticity.
pub fn collapse_deviation(nodes: &[ChainNode], base: &TimeOperator, fock: &FockConfig) -> Result<CollapseReport> {
    let grid = *base.grid();
    let base_mats = base.to_vec()?;
    let mut deviation = Vec::new();
    let mut herm_residual = Vec::new();
    let mut max_deviation = 0.0f64;
    for node in nodes {
        node.grid().ensure_same(&grid)?;
        let factor = 2f64.powi(node.index);
        let mut dev = Vec::with_capacity(grid.len());
        let mut herm = Vec::with_capacity(grid.len());
        for (i, h0) in base_mats.iter().enumerate() {
            dev.push(guarded_rel(&node.hamiltonian.at(i)?, &h0.scale_re(factor), fock, 0.0) * factor);
            herm.push(match &node.hermitian_counterpart {
                Some(cp) => hermiticity_residual(&cp.at(i)?, fock),
                None => f64::NAN,
            });
        }
        if node.index != 0 {
            max_deviation = max_deviation.max(dev.iter().copied().fold(0.0, f64::max));
        }
        deviation.push(dev);
        herm_residual.push(herm);
    }
    Ok(CollapseReport { levels: nodes.iter().map(|n| n.index).collect(), deviation, herm_residual, max_deviation })
}

/// Chain CSV: one row per level and node. Gauge columns describe the link to
/// the next level; the collapse column is empty when not supplied.
pub fn write_chain_csv(
    nodes: &[ChainNode],
    fock: &FockConfig,
    collapse: Option<&CollapseReport>,
    path: &Path,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record([
        "k", "t", "herm_residual", "gauge_kind", "C_re", "C_im", "phase_re", "phase_im", "collapse_deviation",
    ])?;
    for node in nodes {
        let level = collapse.and_then(|r| r.levels.iter().position(|&k| k == node.index));
        let grid = node.grid();
        for i in 0..grid.len() {
            let herm = match &node.hermitian_counterpart {
                Some(cp) => format!("{:.6e}", hermiticity_residual(&cp.at(i)?, fock)),
                None => String::new(),
            };
            let (kind, c, ph) = match &node.gauge_to_next {
                Some(g) => {
                    let kind = match g.kind {
                        GaugeKind::Global => "global",
                        GaugeKind::Local => "local",
                    };
                    let c = g.samples.iter().position(|&s| s == i).map(|p| g.c_track[p]);
                    (kind, c, g.phase.get(i).copied())
                }
                None => ("", None, None),
            };
            let num = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
            let dev = collapse.zip(level).map(|(r, n)| r.deviation[n][i]);
            w.write_record([
                node.index.to_string(),
                format!("{:.17e}", grid.t(i)),
                herm,
                kind.to_string(),
                num(c.map(|z| z.re)),
                num(c.map(|z| z.im)),
                num(ph.map(|z| z.re)),
                num(ph.map(|z| z.im)),
                num(dev),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
