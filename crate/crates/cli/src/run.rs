//! Scenario execution: map solves and chain build, gauge analysis,
//! evolution, then the listed checks.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use dysonchain::chain::{
    analyze_gauge_strided, collapse_deviation, gauge_ode_residual, lift_signed, lower, lower_schrodinger_like,
    write_chain_csv, GLOBAL_TOL,
};
use dysonchain::dyson::{
    bar_gamma, bar_hermitian_coeffs, build_bar_map_linear, linear_hermitian_coeffs, lift_linear_model, metric_drift,
    solve_gamma_ode, solve_schrodinger_like, solve_swanson_bar, solve_swanson_bar_track, solve_swanson_invariant,
    swanson_bar_oracle, write_blob, write_solution_csv, InvariantOptions, InvariantPath, InvariantReport,
    SwansonBarRoot,
};
use dysonchain::evolve::{
    analytic_propagate, cross_space_matrix_elements, own_space_element, propagate_flat, propagate_metric,
    quadrature_expectations, AnalyticPropagatorSpec, QuadratureReport, Space,
};
use dysonchain::models::hermiticity_residual;
use dysonchain::{
    ChainNode, CoefficientTrack, DysonMapSolution, FockConfig, GaugeKind, Grid, LinearModel, Observable,
    OperatorMatrix, StateVector, SwansonModel, TimeOperator, TrajectoryRecord,
};
use ndarray::Array1;

use crate::error::CliError;
use crate::report::{Check, RunReport};
use crate::scenario::{CheckKind, Eta0Source, EvolutionSection, MapKind, ModelSpec, ObservableKind, Scenario};

/// Tolerances, one per check kind.
pub fn tolerance(kind: CheckKind) -> f64 {
    match kind {
        CheckKind::BarHermiticity => 1e-10,
        CheckKind::GammaStationary => 1e-9,
        CheckKind::GammaConsistency => 1e-8,
        CheckKind::CounterpartHermiticity => 1e-8,
        CheckKind::GaugeGlobal | CheckKind::GaugeLocal => GLOBAL_TOL,
        CheckKind::GaugePhaseOde => 1e-6,
        CheckKind::CrossSpace => 1e-8,
        CheckKind::OwnSpaceElement => 1e-8,
        CheckKind::Collapse => 1e-6,
        // |log2(ratio) − 4|
        CheckKind::CollapseOrder => 0.5,
        CheckKind::MetricConstancy => 1e-6,
        CheckKind::FlatNorm => 1e-9,
        CheckKind::MetricNorm => 1e-8,
        CheckKind::Transport => 1e-6,
        CheckKind::Quadratures => 1e-6,
        CheckKind::FreeQuadratures => 1e-10,
        CheckKind::BarRootResidual => 1e-12,
        CheckKind::BarRootOracle => 1e-8,
        CheckKind::SwansonStationarity => 1e-10,
        CheckKind::InvariantHermiticity => 1e-6,
    }
}

/// Horizon of the stationary γ run.
pub const GAMMA_STATIONARY_SPAN: f64 = 5.0;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Artifacts go to `<out_dir>/<scenario>/`; nothing is written when unset.
    pub out_dir: Option<PathBuf>,
}

type CoreResult<T> = dysonchain::Result<T>;

struct Built {
    grid: Grid,
    fock: FockConfig,
    base: TimeOperator,
    k_min: i32,
    nodes: Vec<ChainNode>,
    /// Linear-model coefficients of node `k`, where they are known.
    linear: BTreeMap<i32, LinearModel>,
    roots: Vec<SwansonBarRoot>,
    invariant: Option<InvariantReport>,
}

impl Built {
    fn node(&self, k: i32) -> Option<&ChainNode> {
        usize::try_from(k - self.k_min).ok().and_then(|j| self.nodes.get(j))
    }

    fn map(&self, k: i32) -> Option<&Arc<DysonMapSolution>> {
        self.node(k).and_then(|n| n.dyson.as_ref())
    }

    fn links(&self) -> impl Iterator<Item = (&ChainNode, &ChainNode)> {
        self.nodes.windows(2).filter(|w| w[0].gauge_to_next.is_some()).map(|w| (&w[0], &w[1]))
    }
}

fn core<T>(sc: &Scenario, stage: &str, r: CoreResult<T>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Core { scenario: sc.name.clone(), stage: stage.to_string(), source })
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn eta0_matrix(sc: &Scenario, src: Eta0Source, grid: &Grid, fock: &FockConfig) -> CoreResult<OperatorMatrix> {
    match (src, &sc.model) {
        (Eta0Source::Identity, _) => Ok(OperatorMatrix::identity(fock.work_dim())),
        (Eta0Source::Bar, ModelSpec::Linear(m)) => {
            let g = bar_gamma(m, grid.t0())?.gamma;
            let one = Grid::new(grid.t0(), grid.t0() + grid.step(), grid.step())?;
            DysonMapSolution::displacement(one, *fock, vec![g; one.len()], dysonchain::Provenance::BarClosedForm)
                .eta(0)
        }
        (Eta0Source::Bar, ModelSpec::Swanson(_)) => {
            Err(dysonchain::Error::InvalidConfig("the bar η₀ source needs the linear model".into()))
        }
    }
}

fn build(sc: &Scenario) -> Result<Built, CliError> {
    let grid = core(sc, "grid", sc.grid.grid())?;
    let fock = core(sc, "fock", sc.fock.config())?;
    let base = match &sc.model {
        ModelSpec::Linear(m) => m.hamiltonian(&grid, &fock),
        ModelSpec::Swanson(m) => m.hamiltonian(&grid, &fock),
    };
    let mut linear = BTreeMap::new();
    if let ModelSpec::Linear(m) = &sc.model {
        linear.insert(0, m.clone());
    }
    let mut roots = Vec::new();
    let mut invariant = None;

    let mut up = vec![ChainNode::base(base.clone())];
    for k in 0..sc.chain.k_max {
        let kind = sc.map_at(k).expect("validated: every link has a map");
        let stage = format!("map {} at level {k}", kind.label());
        let h = up[k as usize].hamiltonian.clone();
        let map = match kind {
            MapKind::GammaOde { gamma0 } => {
                let m = linear.get(&k).ok_or_else(|| CliError::Core {
                    scenario: sc.name.clone(),
                    stage: stage.clone(),
                    source: dysonchain::Error::InvalidConfig(format!("no linear model is known at level {k}")),
                })?;
                core(sc, &stage, solve_gamma_ode(m, gamma0.0, &grid, &fock))?
            }
            MapKind::SwansonOde { seed, oracle_stride, allow_fallback } => {
                let ModelSpec::Swanson(m) = &sc.model else { unreachable!("validated") };
                let root = core(sc, &stage, solve_swanson_bar(m, grid.t0(), (seed.epsilon, seed.mu.0)))?;
                let opts = InvariantOptions {
                    oracle_stride: *oracle_stride,
                    tolerance: tolerance(CheckKind::InvariantHermiticity),
                    allow_fallback: *allow_fallback,
                };
                let (map, rep) = core(sc, &stage, solve_swanson_invariant(m, &root.params, &grid, &fock, &opts))?;
                invariant = Some(rep);
                map
            }
            MapKind::SchrodingerLike { eta0 } => {
                let e0 = core(sc, &stage, eta0_matrix(sc, *eta0, &grid, &fock))?;
                core(sc, &stage, solve_schrodinger_like(&h, e0, &fock))?
            }
            MapKind::BarClosedForm | MapKind::SwansonNewton { .. } => unreachable!("validated: lower levels only"),
        };
        let map = Arc::new(map);
        if let Some(m) = linear.get(&k) {
            if map.gammas().is_some() {
                let lifted = core(sc, &stage, lift_linear_model(m, &map))?;
                linear.insert(k + 1, lifted);
            }
        }
        let next = core(sc, &stage, lift_signed(&mut up[k as usize], map, sc.lift_sign))?;
        up.push(next);
    }

    let mut down: Vec<ChainNode> = Vec::new();
    for k in (sc.chain.k_min..0).rev() {
        let kind = sc.map_at(k).expect("validated: every link has a map");
        let stage = format!("map {} at level {k}", kind.label());
        let from = down.last().unwrap_or(&up[0]);
        let node = match (kind, &sc.model) {
            (MapKind::BarClosedForm, ModelSpec::Linear(m)) => {
                let map = core(sc, &stage, build_bar_map_linear(m, &grid, &fock))?;
                core(sc, &stage, lower(from, Arc::new(map)))?
            }
            (MapKind::SwansonNewton { seed }, ModelSpec::Swanson(m)) => {
                let (map, r) =
                    core(sc, &stage, solve_swanson_bar_track(m, &grid, &fock, (seed.epsilon, seed.mu.0)))?;
                roots = r;
                core(sc, &stage, lower(from, Arc::new(map)))?
            }
            (MapKind::SchrodingerLike { eta0 }, _) => {
                let e0 = core(sc, &stage, eta0_matrix(sc, *eta0, &grid, &fock))?;
                core(sc, &stage, lower_schrodinger_like(from, &e0, &fock, 3))?
            }
            _ => unreachable!("validated"),
        };
        down.push(node);
    }
    down.reverse();
    down.extend(up);
    Ok(Built { grid, fock, base, k_min: sc.chain.k_min, nodes: down, linear, roots, invariant })
}

fn analyze_links(sc: &Scenario, b: &mut Built) -> Result<(), CliError> {
    for j in 0..b.nodes.len().saturating_sub(1) {
        if let (Some(lo), Some(hi)) = (&b.nodes[j].hermitian_counterpart, &b.nodes[j + 1].hermitian_counterpart) {
            let link = core(sc, "gauge", analyze_gauge_strided(lo, hi, &b.fock, sc.chain.sample_stride))?;
            b.nodes[j].gauge_to_next = Some(link);
        }
    }
    Ok(())
}

/// States of one level: `ψ` and `ψ̃`.
struct LevelStates {
    level: i32,
    psi: Vec<Array1<dysonchain::C64>>,
    psi_tilde: Vec<Array1<dysonchain::C64>>,
}

struct Evolution {
    level: i32,
    metric: TrajectoryRecord,
    flat: TrajectoryRecord,
    quadratures: Option<CoreResult<QuadratureReport>>,
    analytic_residuals: Option<(f64, f64)>,
    levels: Vec<LevelStates>,
    level_error: Option<String>,
}

fn needs(sc: &Scenario, kinds: &[CheckKind]) -> bool {
    sc.checks.iter().any(|c| kinds.contains(c))
}

fn evolve(sc: &Scenario, ev: &EvolutionSection, b: &Built) -> Result<Evolution, CliError> {
    let stage = format!("evolution at level {}", ev.level);
    let node = b.node(ev.level).expect("validated");
    let map = b.map(ev.level).expect("validated").clone();
    let big_h = &node.hamiltonian;
    let small_h = node.hermitian_counterpart.as_ref().expect("mapped nodes have counterparts");
    let t0 = b.grid.t0();
    let phi0 = core(sc, &stage, StateVector::coherent(ev.phi0.0, &b.fock, Space::Flat(ev.level), t0))?;
    let into_metric = |flat: &Array1<dysonchain::C64>, m: &DysonMapSolution| -> CoreResult<Array1<dysonchain::C64>> {
        m.eta_inv(0).map(|e| e.apply(flat))
    };
    let psi0 = core(sc, &stage, into_metric(&phi0.amplitudes, &map))?;
    let psi0 = core(sc, &stage, StateVector::new(psi0, Space::Metric(ev.level), t0))?;
    let metric = core(sc, &stage, propagate_metric(big_h, &psi0, &map, Some(small_h), ev.stepper))?;
    let flat = core(sc, &stage, propagate_flat(small_h, &phi0, &b.fock, ev.stepper))?;

    let mut out = Evolution {
        level: ev.level,
        metric,
        flat,
        quadratures: None,
        analytic_residuals: None,
        levels: Vec::new(),
        level_error: None,
    };

    if needs(sc, &[CheckKind::Quadratures, CheckKind::FreeQuadratures]) || sc.outputs.csv {
        let coeffs = match sc.map_at(ev.level) {
            Some(MapKind::BarClosedForm) => b.linear.get(&(ev.level + 1)).map(|m| (m, bar_hermitian_coeffs(m, &b.grid))),
            Some(MapKind::GammaOde { .. }) => b.linear.get(&ev.level).map(|m| {
                let g = map.gammas().expect("displacement map");
                (m, Ok(linear_hermitian_coeffs(m, g, &b.grid, map.scheme())))
            }),
            _ => None,
        };
        if let Some((model, coeffs)) = coeffs {
            let q = coeffs.and_then(|c| {
                let spec = AnalyticPropagatorSpec::new(ev.theta0.0, 0, &model.omega, &c, &b.grid)?;
                let an = analytic_propagate(&spec, ev.phi0.0, &b.grid, &b.fock, Some(small_h))?;
                out.analytic_residuals = an.residual.zip(an.nominal_residual);
                quadrature_expectations(&map, &out.metric, &out.flat, &an)
            });
            out.quadratures = Some(q);
        }
    }

    if needs(sc, &[CheckKind::CrossSpace, CheckKind::OwnSpaceElement]) {
        match level_states(sc, ev, b, &out.metric) {
            Ok(l) => out.levels = l,
            Err(e) => out.level_error = Some(e.to_string()),
        }
    }
    Ok(out)
}

/// `ψ, ψ̃` at the evolution level and every mapped level above it. The upper
/// level starts from `η′₀⁻¹ η₀ ψ₀`, the gauge factor being 1 at `t₀`.
fn level_states(
    sc: &Scenario,
    ev: &EvolutionSection,
    b: &Built,
    metric: &TrajectoryRecord,
) -> CoreResult<Vec<LevelStates>> {
    let t0 = b.grid.t0();
    let tilde = ev.phi0_tilde.unwrap_or(ev.phi0).0;
    let map = b.map(ev.level).expect("validated");
    let phi_t = StateVector::coherent(tilde, &b.fock, Space::Flat(ev.level), t0)?;
    let psi_t0 = StateVector::new(map.eta_inv(0)?.apply(&phi_t.amplitudes), Space::Metric(ev.level), t0)?;
    let node = b.node(ev.level).expect("validated");
    let run = |h: &TimeOperator, m: &DysonMapSolution, s: &StateVector| -> CoreResult<Vec<Array1<dysonchain::C64>>> {
        Ok(propagate_metric(h, s, m, None, ev.stepper)?.states)
    };
    let mut levels = vec![LevelStates {
        level: ev.level,
        psi: metric.states.clone(),
        psi_tilde: run(&node.hamiltonian, map, &psi_t0)?,
    }];
    let mut k = ev.level;
    while let (Some(lo), Some(hi)) = (b.node(k), b.node(k + 1)) {
        let (Some(_), Some(m_lo), Some(m_hi)) = (&lo.gauge_to_next, &lo.dyson, &hi.dyson) else { break };
        let bridge = m_hi.eta_inv(0)?.dot(&m_lo.eta(0)?);
        let prev = levels.last().expect("seeded above");
        let s = StateVector::new(bridge.apply(&prev.psi[0]), Space::Metric(k + 1), t0)?;
        let st = StateVector::new(bridge.apply(&prev.psi_tilde[0]), Space::Metric(k + 1), t0)?;
        levels.push(LevelStates {
            level: k + 1,
            psi: run(&hi.hamiltonian, m_hi, &s)?,
            psi_tilde: run(&hi.hamiltonian, m_hi, &st)?,
        });
        k += 1;
    }
    let _ = sc;
    Ok(levels)
}

fn samples(n: usize, stride: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).step_by(stride.max(1)).collect();
    if v.last() != Some(&(n - 1)) {
        v.push(n - 1);
    }
    v
}

fn fold_max(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, |a: f64, x| if x.is_nan() || a.is_nan() { f64::NAN } else { a.max(x) })
}

struct Ctx<'a> {
    sc: &'a Scenario,
    b: &'a Built,
    evo: Option<&'a Evolution>,
}

fn evaluate(ctx: &Ctx<'_>, kind: CheckKind) -> Check {
    let name = kind.name();
    let tol = tolerance(kind);
    match check_inner(ctx, kind, &name, tol) {
        Ok(c) => c,
        Err(e) => Check::error(name, tol, e.to_string()),
    }
}

fn linear_base<'a>(ctx: &Ctx<'a>) -> CoreResult<&'a LinearModel> {
    match &ctx.sc.model {
        ModelSpec::Linear(m) => Ok(m),
        ModelSpec::Swanson(_) => Err(dysonchain::Error::InvalidConfig("needs the linear model".into())),
    }
}

fn swanson_base<'a>(ctx: &Ctx<'a>) -> CoreResult<&'a SwansonModel> {
    match &ctx.sc.model {
        ModelSpec::Swanson(m) => Ok(m),
        ModelSpec::Linear(_) => Err(dysonchain::Error::InvalidConfig("needs the swanson model".into())),
    }
}

fn missing(what: &str) -> dysonchain::Error {
    dysonchain::Error::InvalidConfig(format!("scenario provides no {what}"))
}

fn check_inner(ctx: &Ctx<'_>, kind: CheckKind, name: &str, tol: f64) -> CoreResult<Check> {
    let (sc, b) = (ctx.sc, ctx.b);
    let grid = &b.grid;
    let fock = &b.fock;
    let evo = || ctx.evo.ok_or_else(|| missing("evolution"));
    Ok(match kind {
        CheckKind::BarHermiticity => {
            let m = linear_base(ctx)?;
            let map = build_bar_map_linear(m, grid, fock)?;
            let series = (0..grid.len())
                .map(|i| Ok((grid.t(i), hermiticity_residual(&map.conjugate(i, &b.base.at(i)?)?, fock))))
                .collect::<CoreResult<Vec<_>>>()?;
            Check::below(name, fold_max(series.iter().map(|s| s.1)), tol).with_series(series)
        }
        CheckKind::GammaStationary => {
            let m = linear_base(ctx)?;
            let t0 = grid.t0();
            let (w, al, be) = m.coefficients(t0);
            let frozen = LinearModel::new(
                CoefficientTrack::constant(w),
                CoefficientTrack::constant(al),
                CoefficientTrack::constant(be),
            );
            let long = Grid::new(t0, t0 + GAMMA_STATIONARY_SPAN, grid.step())?;
            let g0 = bar_gamma(&frozen, t0)?.gamma;
            let sol = solve_gamma_ode(&frozen, g0, &long, fock)?;
            let gs = sol.gammas().expect("displacement map");
            let series: Vec<(f64, f64)> = gs.iter().enumerate().map(|(i, g)| (long.t(i), (g - g0).norm())).collect();
            let mut c = Check::below(name, fold_max(series.iter().map(|s| s.1)), tol).with_series(series);
            let constant = m.omega.is_constant() && m.alpha.is_constant() && m.beta.is_constant();
            if !constant {
                c = c.with_detail("coefficients frozen at t0");
            }
            c
        }
        CheckKind::GammaConsistency => {
            let mut worst = None::<f64>;
            let mut series = vec![0.0f64; grid.len()];
            for req in sc.maps.iter().filter(|r| matches!(r.kind, MapKind::GammaOde { .. })) {
                let map = b.map(req.level).ok_or_else(|| missing("gamma map"))?;
                let m = b.linear.get(&req.level).ok_or_else(|| missing("linear model at the map level"))?;
                let hc = linear_hermitian_coeffs(m, map.gammas().expect("displacement map"), grid, map.scheme());
                for (i, t) in grid.times().into_iter().enumerate() {
                    let (_, al, be) = m.coefficients(t);
                    let dv = (hc.v[i] - hc.u[i].conj()).norm();
                    let du = (hc.u[i] - (al + be.conj()) * 0.5).norm();
                    series[i] = series[i].max(dv.max(du));
                }
                worst = Some(worst.unwrap_or(0.0).max(fold_max(series.iter().copied())));
            }
            let worst = worst.ok_or_else(|| missing("gamma_ode map"))?;
            Check::below(name, worst, tol).with_series(grid.times().into_iter().zip(series).collect())
        }
        CheckKind::CounterpartHermiticity => {
            let idx = samples(grid.len(), sc.chain.sample_stride);
            let mut series = vec![0.0f64; idx.len()];
            let mut any = false;
            for n in &b.nodes {
                if let Some(cp) = &n.hermitian_counterpart {
                    any = true;
                    for (s, &i) in idx.iter().enumerate() {
                        series[s] = series[s].max(hermiticity_residual(&cp.at(i)?, fock));
                    }
                }
            }
            if !any {
                return Err(missing("counterpart"));
            }
            let series: Vec<(f64, f64)> = idx.iter().map(|&i| grid.t(i)).zip(series).collect();
            Check::below(name, fold_max(series.iter().map(|s| s.1)), tol).with_series(series)
        }
        CheckKind::GaugeGlobal | CheckKind::GaugeLocal => {
            let links: Vec<_> = b.links().map(|(lo, _)| lo.gauge_to_next.as_ref().expect("filtered")).collect();
            if links.is_empty() {
                return Err(missing("gauge link"));
            }
            let rem: Vec<f64> = links.iter().map(|l| l.residual_offdiag).collect();
            let l0 = links[0];
            let series = l0.samples.iter().enumerate().map(|(s, &i)| {
                (grid.t(i), fold_max(links.iter().map(|l| l.remainder[s])))
            });
            let detail = links
                .iter()
                .zip(b.links())
                .map(|(l, (lo, _))| format!("{}→{} {:?} {:.2e}", lo.index, lo.index + 1, l.kind, l.residual_offdiag))
                .collect::<Vec<_>>()
                .join(", ");
            let c = if kind == CheckKind::GaugeGlobal {
                Check::below(name, fold_max(rem.iter().copied()), tol)
            } else {
                Check::above(name, rem.iter().copied().fold(f64::INFINITY, f64::min), tol)
            };
            c.with_series(series.collect()).with_detail(detail)
        }
        CheckKind::GaugePhaseOde => {
            let mut worst = 0.0f64;
            let mut any = false;
            for (lo, hi) in b.links() {
                let link = lo.gauge_to_next.as_ref().expect("filtered");
                let (hl, hu) = (
                    lo.hermitian_counterpart.as_ref().expect("linked"),
                    hi.hermitian_counterpart.as_ref().expect("linked"),
                );
                worst = worst.max(gauge_ode_residual(link, hl, hu, fock)?);
                any = true;
            }
            if !any {
                return Err(missing("gauge link"));
            }
            Check::below(name, worst, tol)
        }
        CheckKind::CrossSpace => {
            let ev = evo()?;
            if let Some(e) = &ev.level_error {
                return Err(dysonchain::Error::InvalidConfig(e.clone()));
            }
            if ev.levels.len() < 2 {
                return Err(missing("mapped level above the evolution level"));
            }
            let obs = observables(ctx, b.fock.work_dim());
            let idx = samples(grid.len(), ctx.sc.evolution.as_ref().map_or(100, |e| e.sample_stride));
            let mut series = vec![0.0f64; idx.len()];
            let mut notes = Vec::new();
            for pair in ev.levels.windows(2) {
                let (lo, hi) = (&pair[0], &pair[1]);
                let node = b.node(lo.level).expect("evolved levels exist");
                let link = node.gauge_to_next.as_ref().expect("walked along links");
                let maps = [&**b.map(lo.level).expect("mapped"), &**b.map(hi.level).expect("mapped")];
                for (s, &i) in idx.iter().enumerate() {
                    for o in &obs {
                        let r = cross_space_matrix_elements(
                            o,
                            maps,
                            link,
                            (&lo.psi[i], &lo.psi_tilde[i]),
                            (&hi.psi[i], &hi.psi_tilde[i]),
                            i,
                        )?;
                        if let Some(n) = r.note {
                            notes.push(format!("{}→{}: {n}", lo.level, hi.level));
                        }
                        series[s] = if r.deviation.is_nan() { f64::NAN } else { series[s].max(r.deviation) };
                    }
                }
            }
            notes.dedup();
            let series: Vec<(f64, f64)> = idx.iter().map(|&i| grid.t(i)).zip(series).collect();
            let c = Check::below(name, fold_max(series.iter().map(|s| s.1)), tol).with_series(series);
            if notes.is_empty() {
                c.with_detail(format!("{} links", ev.levels.len() - 1))
            } else {
                c.with_detail(notes.join("; "))
            }
        }
        CheckKind::OwnSpaceElement => {
            let ev = evo()?;
            if let Some(e) = &ev.level_error {
                return Err(dysonchain::Error::InvalidConfig(e.clone()));
            }
            let up = ev.levels.get(1).ok_or_else(|| missing("mapped level above the evolution level"))?;
            let (lo, hi) = (b.node(ev.level).expect("evolved"), b.node(up.level).expect("evolved"));
            let idx = samples(grid.len(), ctx.sc.evolution.as_ref().map_or(100, |e| e.sample_stride));
            let mut series = Vec::with_capacity(idx.len());
            let mut gap = 0.0f64;
            for &i in &idx {
                let r = own_space_element(lo, hi, (&up.psi[i], &up.psi_tilde[i]), i)?;
                gap = gap.max(r.gap);
                series.push((grid.t(i), r.deviation));
            }
            Check::below(name, fold_max(series.iter().map(|s| s.1)), tol)
                .with_series(series)
                .with_detail(format!("|direct − flat h′| up to {gap:.3e}"))
        }
        CheckKind::Collapse => {
            let rep = collapse_deviation(&b.nodes, &b.base, fock)?;
            let series = (0..grid.len())
                .map(|i| {
                    let d = rep.levels.iter().zip(&rep.deviation).filter(|(k, _)| **k != 0).map(|(_, d)| d[i]);
                    (grid.t(i), fold_max(d))
                })
                .collect();
            Check::below(name, rep.max_deviation, tol).with_series(series)
        }
        CheckKind::CollapseOrder => {
            let coarse = collapse_deviation(&b.nodes, &b.base, fock)?.max_deviation;
            let mut fine_sc = sc.clone();
            fine_sc.grid.step /= 2.0;
            fine_sc.checks.clear();
            let fine_b = build(&fine_sc).map_err(|e| dysonchain::Error::InvalidConfig(e.to_string()))?;
            let fine = collapse_deviation(&fine_b.nodes, &fine_b.base, fock)?.max_deviation;
            let ratio = coarse / fine;
            Check::below(name, (ratio.log2() - 4.0).abs(), tol)
                .with_detail(format!("ratio {ratio:.3} ({coarse:.3e} → {fine:.3e})"))
        }
        CheckKind::MetricConstancy => {
            let mut worst = None::<f64>;
            for req in sc.maps.iter().filter(|r| matches!(r.kind, MapKind::SchrodingerLike { .. })) {
                let map = b.map(req.level).ok_or_else(|| missing("schrodinger-like map"))?;
                worst = Some(worst.unwrap_or(0.0).max(metric_drift(map)?));
            }
            Check::below(name, worst.ok_or_else(|| missing("schrodinger_like map"))?, tol)
        }
        CheckKind::FlatNorm => {
            let ev = evo()?;
            let f = &ev.flat.flat_norm;
            let series = f.iter().enumerate().map(|(i, x)| (grid.t(i), (x - f[0]).abs())).collect();
            Check::below(name, ev.flat.flat_norm_drift(), tol).with_series(series)
        }
        CheckKind::MetricNorm => {
            let ev = evo()?;
            let f = &ev.metric.metric_norm;
            let series = f.iter().enumerate().map(|(i, x)| (grid.t(i), (x - f[0]).abs())).collect();
            Check::below(name, ev.metric.metric_norm_drift(), tol).with_series(series)
        }
        CheckKind::Transport => {
            let ev = evo()?;
            let series = ev.metric.transport_residual.iter().enumerate().map(|(i, x)| (grid.t(i), *x)).collect();
            Check::below(name, ev.metric.max_transport_residual(), tol).with_series(series)
        }
        CheckKind::Quadratures => {
            let ev = evo()?;
            let q = quad(ev)?;
            let series = (0..q.times.len())
                .map(|i| {
                    let d = |a: &[f64; 2], b: &[f64; 2]| (a[0] - b[0]).abs().max((a[1] - b[1]).abs());
                    let m = d(&q.metric[i], &q.flat[i]).max(d(&q.metric[i], &q.closed[i])).max(d(&q.flat[i], &q.closed[i]));
                    (q.times[i], m)
                })
                .collect();
            let measured = q.metric_vs_flat.max(q.metric_vs_closed).max(q.flat_vs_closed);
            let mut detail = format!("nominal θ off by {:.3e}", q.nominal_vs_closed);
            if let Some((r, rn)) = ev.analytic_residuals {
                detail += &format!("; propagator residual {r:.2e} (nominal {rn:.2e})");
            }
            Check::below(name, measured, tol).with_series(series).with_detail(detail)
        }
        CheckKind::FreeQuadratures => {
            let ev = evo()?;
            let q = quad(ev)?;
            let series: Vec<(f64, f64)> = (0..q.times.len())
                .map(|i| {
                    let (m, z) = (q.metric[i], q.telescoped[i]);
                    (q.times[i], (m[0] - z[0]).abs().max((m[1] - z[1]).abs()))
                })
                .collect();
            Check::below(name, fold_max(series.iter().map(|s| s.1)), tol).with_series(series)
        }
        CheckKind::BarRootResidual => {
            if b.roots.is_empty() {
                return Err(missing("swanson_newton map"));
            }
            let series: Vec<(f64, f64)> = b
                .roots
                .iter()
                .enumerate()
                .map(|(i, r)| (grid.t(i), r.residual[0].abs().max(r.residual[1].abs())))
                .collect();
            let iters = b.roots.iter().map(|r| r.iterations).max().unwrap_or(0);
            Check::below(name, fold_max(series.iter().map(|s| s.1)), tol)
                .with_series(series)
                .with_detail(format!("at most {iters} Newton iterations per node"))
        }
        CheckKind::BarRootOracle => {
            let m = swanson_base(ctx)?;
            if b.roots.is_empty() {
                return Err(missing("swanson_newton map"));
            }
            let series = samples(grid.len(), sc.chain.sample_stride)
                .into_iter()
                .map(|i| Ok((grid.t(i), swanson_bar_oracle(&b.roots[i].params, m, grid.t(i), fock)?)))
                .collect::<CoreResult<Vec<_>>>()?;
            Check::below(name, fold_max(series.iter().map(|s| s.1)), tol).with_series(series)
        }
        CheckKind::SwansonStationarity => {
            let rep = b.invariant.as_ref().ok_or_else(|| missing("swanson_ode map"))?;
            let c = Check::below(name, rep.nominal_drift_rate, tol);
            if rep.path == InvariantPath::Nominal {
                c.with_detail("nominal path")
            } else {
                Check { pass: false, ..c.with_detail("map came from the fallback path") }
            }
        }
        CheckKind::InvariantHermiticity => {
            let rep = b.invariant.as_ref().ok_or_else(|| missing("swanson_ode map"))?;
            let path = match rep.path {
                InvariantPath::Nominal => "nominal",
                InvariantPath::Fallback => "fallback",
            };
            Check::below(name, rep.residual, tol).with_detail(format!(
                "{path} path, {} points checked, nominal residual {:.3e}",
                rep.checked_points, rep.nominal_residual
            ))
        }
    })
}

fn quad(ev: &Evolution) -> CoreResult<&QuadratureReport> {
    match &ev.quadratures {
        Some(Ok(q)) => Ok(q),
        Some(Err(e)) => Err(dysonchain::Error::InvalidConfig(e.to_string())),
        None => Err(missing("closed-form propagator for this map kind")),
    }
}

fn observables(ctx: &Ctx<'_>, n: usize) -> Vec<Observable> {
    let [x1, x2] = Observable::quadratures(n);
    let kinds = ctx.sc.evolution.as_ref().map(|e| e.observables.clone()).unwrap_or_default();
    kinds
        .iter()
        .map(|k| match k {
            ObservableKind::X1 => x1.clone(),
            ObservableKind::X2 => x2.clone(),
        })
        .collect()
}

/// Runs every stage and check. Module failures during the pipeline abort the
/// run; failures inside a check only fail that check.
pub fn run(sc: &Scenario, opts: &RunOptions) -> Result<RunReport, CliError> {
    sc.validate()?;
    let mut report = RunReport::new(&sc.name);

    let t = Instant::now();
    let mut b = build(sc)?;
    report.timings_ms.insert("maps_and_chain".into(), ms(t));

    let t = Instant::now();
    analyze_links(sc, &mut b)?;
    report.timings_ms.insert("gauge".into(), ms(t));
    for (lo, _) in b.links() {
        let kind = match lo.gauge_to_next.as_ref().expect("filtered").kind {
            GaugeKind::Global => "global",
            GaugeKind::Local => "local",
        };
        report.diagnostics.gauge_kinds.push((lo.index, kind.to_string()));
    }
    report.diagnostics.newton_iterations = b.roots.iter().map(|r| r.iterations).collect();
    if let Some(inv) = &b.invariant {
        report.diagnostics.invariant_path = Some(
            match inv.path {
                InvariantPath::Nominal => "nominal",
                InvariantPath::Fallback => "fallback",
            }
            .into(),
        );
        if let Some(e) = &inv.nominal_error {
            report.diagnostics.notes.push(format!("nominal invariant path failed: {e}"));
        }
        report.diagnostics.values.insert("invariant_nominal_residual".into(), inv.nominal_residual);
    }

    let t = Instant::now();
    let evo = match &sc.evolution {
        Some(ev) => Some(evolve(sc, ev, &b)?),
        None => None,
    };
    report.timings_ms.insert("evolution".into(), ms(t));
    if let Some(ev) = &evo {
        if let Some((r, rn)) = ev.analytic_residuals {
            report.diagnostics.values.insert("propagator_residual".into(), r);
            report.diagnostics.values.insert("propagator_residual_nominal".into(), rn);
        }
    }

    let t = Instant::now();
    let ctx = Ctx { sc, b: &b, evo: evo.as_ref() };
    for &kind in &sc.checks {
        let tc = Instant::now();
        report.checks.push(evaluate(&ctx, kind));
        report.timings_ms.insert(format!("check:{kind}"), ms(tc));
    }
    report.timings_ms.insert("checks".into(), ms(t));

    if let Some(dir) = &opts.out_dir {
        let t = Instant::now();
        write_outputs(sc, &b, evo.as_ref(), &report, &dir.join(&sc.name))?;
        report.timings_ms.insert("outputs".into(), ms(t));
        report.write_json(&dir.join(&sc.name).join("report.json"))?;
    }
    Ok(report)
}

fn write_outputs(
    sc: &Scenario,
    b: &Built,
    evo: Option<&Evolution>,
    report: &RunReport,
    dir: &Path,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.display().to_string(), source: e })?;
    let out = |r: CoreResult<()>| core(sc, "outputs", r);
    if sc.outputs.csv {
        report.write_series(dir)?;
        for n in &b.nodes {
            if let Some(m) = &n.dyson {
                let k = n.index;
                out(write_solution_csv(m, None, sc.chain.sample_stride, &dir.join(format!("map_{k}.csv"))))?;
            }
        }
        if let Some(ev) = evo {
            let mut extra: Vec<(&str, Vec<f64>)> = Vec::new();
            if let Some(Ok(q)) = &ev.quadratures {
                let col = |v: &[[f64; 2]], k: usize| v.iter().map(|x| x[k]).collect::<Vec<_>>();
                extra.push(("x1", col(&q.metric, 0)));
                extra.push(("x2", col(&q.metric, 1)));
                extra.push(("x1_flat", col(&q.flat, 0)));
                extra.push(("x2_flat", col(&q.flat, 1)));
                extra.push(("x1_closed_form", col(&q.closed, 0)));
                extra.push(("x2_closed_form", col(&q.closed, 1)));
                extra.push(("x1_closed_form_nominal", col(&q.closed_nominal, 0)));
                extra.push(("x2_closed_form_nominal", col(&q.closed_nominal, 1)));
            }
            out(ev.metric.write_csv(&extra, &dir.join(format!("trajectory_{}.csv", ev.level))))?;
        }
    }
    if sc.outputs.chain_csv {
        let collapse = if sc.checks.contains(&CheckKind::Collapse) {
            Some(core(sc, "outputs", collapse_deviation(&b.nodes, &b.base, &b.fock))?)
        } else {
            None
        };
        out(write_chain_csv(&b.nodes, &b.fock, collapse.as_ref(), &dir.join("chain.csv")))?;
    }
    if sc.outputs.matrices {
        for n in &b.nodes {
            if let Some(m) = &n.dyson {
                let mats = core(sc, "outputs", m.eta_operator().to_vec())?;
                out(write_blob(&mats, &dir.join(format!("eta_{}.bin", n.index))))?;
            }
        }
    }
    Ok(())
}
