//! Scenario files: one TOML document per run.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use dysonchain::chain::TermSign;
use dysonchain::evolve::Stepper;
use dysonchain::models::expr::Expr;
use dysonchain::{FockConfig, Grid, LinearModel, SwansonModel, C64};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub checks: Vec<CheckKind>,
    /// Sign of the lift term. Only the mutation suite sets this.
    #[serde(default, skip_serializing_if = "is_plus")]
    pub lift_sign: TermSign,
    pub model: ModelSpec,
    #[serde(default)]
    pub fock: FockSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub chain: ChainSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub maps: Vec<MapRequest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolution: Option<EvolutionSection>,
    #[serde(default)]
    pub outputs: OutputSection,
}

fn is_plus(s: &TermSign) -> bool {
    *s == TermSign::Plus
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Linear(LinearModel),
    Swanson(SwansonModel),
}

impl ModelSpec {
    pub fn label(&self) -> &'static str {
        match self {
            ModelSpec::Linear(_) => "linear",
            ModelSpec::Swanson(_) => "swanson",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FockSection {
    pub dim: usize,
    pub tail_guard: usize,
    pub pad: usize,
}

impl Default for FockSection {
    fn default() -> Self {
        FockSection { dim: 40, tail_guard: 5, pad: 0 }
    }
}

impl FockSection {
    pub fn config(&self) -> dysonchain::Result<FockConfig> {
        Ok(FockConfig::new(self.dim)?.with_guard(self.tail_guard)?.with_pad(self.pad))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub t0: f64,
    pub t1: f64,
    pub step: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { t0: 0.0, t1: 1.0, step: 1e-3 }
    }
}

impl GridSection {
    pub fn grid(&self) -> dysonchain::Result<Grid> {
        Grid::new(self.t0, self.t1, self.step)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainSection {
    pub k_min: i32,
    pub k_max: i32,
    /// Gauge links are examined on every `sample_stride`-th node.
    pub sample_stride: usize,
}

impl Default for ChainSection {
    fn default() -> Self {
        ChainSection { k_min: 0, k_max: 0, sample_stride: 1 }
    }
}

/// A complex constant: a number, `{re, im}`, or an expression in which `t`
/// is not used.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexSpec", into = "ComplexSpec")]
pub struct Complex(pub C64);

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum ComplexSpec {
    Number(f64),
    Pair { re: f64, im: f64 },
    Text(String),
}

impl TryFrom<ComplexSpec> for Complex {
    type Error = String;
    fn try_from(spec: ComplexSpec) -> Result<Self, String> {
        match spec {
            ComplexSpec::Number(x) => Ok(Complex(C64::new(x, 0.0))),
            ComplexSpec::Pair { re, im } => Ok(Complex(C64::new(re, im))),
            ComplexSpec::Text(s) => {
                let e = Expr::parse(&s).map_err(|e| e.to_string())?;
                if !e.is_constant() {
                    return Err(format!("`{s}` depends on t; a constant is required"));
                }
                Ok(Complex(e.eval(0.0)))
            }
        }
    }
}

impl From<Complex> for ComplexSpec {
    fn from(c: Complex) -> Self {
        ComplexSpec::Pair { re: c.0.re, im: c.0.im }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seed {
    pub epsilon: f64,
    pub mu: Complex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Eta0Source {
    /// The closed-form bar map of the base model at `t0`.
    Bar,
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapRequest {
    /// The link `level → level + 1`.
    pub level: i32,
    #[serde(flatten)]
    pub kind: MapKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapKind {
    BarClosedForm,
    GammaOde {
        gamma0: Complex,
    },
    SwansonNewton {
        seed: Seed,
    },
    /// Invariant map started from the bar root at `t0`.
    SwansonOde {
        seed: Seed,
        #[serde(default = "one")]
        oracle_stride: usize,
        #[serde(default = "yes")]
        allow_fallback: bool,
    },
    SchrodingerLike {
        eta0: Eta0Source,
    },
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl MapKind {
    pub fn label(&self) -> &'static str {
        match self {
            MapKind::BarClosedForm => "bar_closed_form",
            MapKind::GammaOde { .. } => "gamma_ode",
            MapKind::SwansonNewton { .. } => "swanson_newton",
            MapKind::SwansonOde { .. } => "swanson_ode",
            MapKind::SchrodingerLike { .. } => "schrodinger_like",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    X1,
    X2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSection {
    #[serde(default)]
    pub level: i32,
    /// Coherent amplitude of the flat initial state.
    pub phi0: Complex,
    /// Second state for off-diagonal matrix elements.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi0_tilde: Option<Complex>,
    #[serde(default = "zero")]
    pub theta0: Complex,
    #[serde(default = "both_quadratures")]
    pub observables: Vec<ObservableKind>,
    #[serde(default)]
    pub stepper: Stepper,
    /// Matrix elements are compared on every `sample_stride`-th node.
    #[serde(default = "hundred")]
    pub sample_stride: usize,
}

fn zero() -> Complex {
    Complex(C64::new(0.0, 0.0))
}

fn both_quadratures() -> Vec<ObservableKind> {
    vec![ObservableKind::X1, ObservableKind::X2]
}

fn hundred() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Per-check series, trajectories and map parameters.
    pub csv: bool,
    /// Chain table with every node of every level (evaluates all counterparts).
    pub chain_csv: bool,
    /// Raw η matrices, one blob per map.
    pub matrices: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { csv: true, chain_csv: false, matrices: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    BarHermiticity,
    GammaStationary,
    GammaConsistency,
    CounterpartHermiticity,
    GaugeGlobal,
    GaugeLocal,
    GaugePhaseOde,
    CrossSpace,
    OwnSpaceElement,
    Collapse,
    CollapseOrder,
    MetricConstancy,
    FlatNorm,
    MetricNorm,
    Transport,
    Quadratures,
    FreeQuadratures,
    BarRootResidual,
    BarRootOracle,
    SwansonStationarity,
    InvariantHermiticity,
}

impl CheckKind {
    pub const ALL: [CheckKind; 21] = [
        CheckKind::BarHermiticity,
        CheckKind::GammaStationary,
        CheckKind::GammaConsistency,
        CheckKind::CounterpartHermiticity,
        CheckKind::GaugeGlobal,
        CheckKind::GaugeLocal,
        CheckKind::GaugePhaseOde,
        CheckKind::CrossSpace,
        CheckKind::OwnSpaceElement,
        CheckKind::Collapse,
        CheckKind::CollapseOrder,
        CheckKind::MetricConstancy,
        CheckKind::FlatNorm,
        CheckKind::MetricNorm,
        CheckKind::Transport,
        CheckKind::Quadratures,
        CheckKind::FreeQuadratures,
        CheckKind::BarRootResidual,
        CheckKind::BarRootOracle,
        CheckKind::SwansonStationarity,
        CheckKind::InvariantHermiticity,
    ];

    pub fn name(self) -> String {
        serde_json::to_value(self).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
    }

    fn needs_evolution(self) -> bool {
        matches!(
            self,
            CheckKind::CrossSpace
                | CheckKind::OwnSpaceElement
                | CheckKind::FlatNorm
                | CheckKind::MetricNorm
                | CheckKind::Transport
                | CheckKind::Quadratures
                | CheckKind::FreeQuadratures
        )
    }

    fn needs_linear(self) -> bool {
        matches!(
            self,
            CheckKind::BarHermiticity
                | CheckKind::GammaStationary
                | CheckKind::Quadratures
                | CheckKind::FreeQuadratures
        )
    }

    fn needs_swanson(self) -> bool {
        matches!(
            self,
            CheckKind::BarRootResidual
                | CheckKind::BarRootOracle
                | CheckKind::SwansonStationarity
                | CheckKind::InvariantHermiticity
        )
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl Scenario {
    pub fn from_toml(src: &str, origin: &str) -> Result<Scenario, CliError> {
        let sc: Scenario =
            toml::from_str(src).map_err(|e| CliError::Parse { origin: origin.to_string(), message: e.to_string() })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Parse { origin: self.name.clone(), message: e.to_string() })
    }

    pub fn map_at(&self, level: i32) -> Option<&MapKind> {
        self.maps.iter().find(|m| m.level == level).map(|m| &m.kind)
    }

    /// Every violated invariant, not just the first.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut bad = Vec::new();
        let g = &self.grid;
        if !(g.step > 0.0) {
            bad.push(format!("grid.step = {} must be positive", g.step));
        }
        if !(g.t1 > g.t0) {
            bad.push(format!("grid.t1 = {} must exceed grid.t0 = {}", g.t1, g.t0));
        }
        if bad.is_empty() {
            if let Err(e) = g.grid() {
                bad.push(format!("grid: {e}"));
            }
        }
        if let Err(e) = self.fock.config() {
            bad.push(e.to_string());
        }
        let c = &self.chain;
        if c.k_min > 0 || c.k_max < 0 {
            bad.push(format!("chain.k_min = {} .. chain.k_max = {} must span 0", c.k_min, c.k_max));
        }
        if c.sample_stride == 0 {
            bad.push("chain.sample_stride must be at least 1".into());
        }

        let mut levels = BTreeSet::new();
        for m in &self.maps {
            if !levels.insert(m.level) {
                bad.push(format!("maps: level {} appears twice", m.level));
            }
            if m.level < c.k_min || m.level > c.k_max {
                bad.push(format!("maps: level {} lies outside the chain {}..={}", m.level, c.k_min, c.k_max));
            }
            let linear = matches!(self.model, ModelSpec::Linear(_));
            let ok = match (&m.kind, m.level) {
                (MapKind::BarClosedForm, -1) => linear,
                (MapKind::GammaOde { .. }, k) => linear && k >= 0,
                (MapKind::SwansonNewton { .. }, -1) => !linear,
                (MapKind::SwansonOde { oracle_stride, .. }, 0) => {
                    if *oracle_stride == 0 {
                        bad.push("maps: swanson_ode.oracle_stride must be at least 1".into());
                    }
                    !linear
                }
                (MapKind::SchrodingerLike { eta0 }, _) => linear || *eta0 == Eta0Source::Identity,
                _ => false,
            };
            if !ok {
                bad.push(format!(
                    "maps: {} is not available at level {} for the {} model",
                    m.kind.label(),
                    m.level,
                    self.model.label()
                ));
            }
        }
        for k in c.k_min..c.k_max {
            if !levels.contains(&k) {
                bad.push(format!("maps: the link {k} → {} has no map", k + 1));
            }
        }

        let mut seen = BTreeSet::new();
        for ch in &self.checks {
            if !seen.insert(*ch) {
                bad.push(format!("checks: `{ch}` is listed twice"));
            }
            if ch.needs_evolution() && self.evolution.is_none() {
                bad.push(format!("checks: `{ch}` needs an [evolution] section"));
            }
            if ch.needs_linear() && !matches!(self.model, ModelSpec::Linear(_)) {
                bad.push(format!("checks: `{ch}` needs the linear model"));
            }
            if ch.needs_swanson() && !matches!(self.model, ModelSpec::Swanson(_)) {
                bad.push(format!("checks: `{ch}` needs the swanson model"));
            }
        }

        if let Some(ev) = &self.evolution {
            if ev.sample_stride == 0 {
                bad.push("evolution.sample_stride must be at least 1".into());
            }
            if !levels.contains(&ev.level) {
                bad.push(format!("evolution.level = {} needs a map at that level", ev.level));
            }
        }

        if bad.is_empty() {
            Ok(())
        } else {
            Err(CliError::Invalid { scenario: self.name.clone(), problems: bad })
        }
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let src = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
    Scenario::from_toml(&src, &path.display().to_string())
}

pub fn save_scenario(sc: &Scenario, path: &Path) -> Result<(), CliError> {
    std::fs::write(path, sc.to_toml()?).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })
}

/// Scenarios compiled into the binary, in suite order.
pub const SHIPPED: &[(&str, &str)] = &[
    ("minimal", include_str!("../scenarios/minimal.toml")),
    ("linear_gamma", include_str!("../scenarios/linear_gamma.toml")),
    ("linear_global_gauge", include_str!("../scenarios/linear_global_gauge.toml")),
    ("linear_driven", include_str!("../scenarios/linear_driven.toml")),
    ("linear_free", include_str!("../scenarios/linear_free.toml")),
    ("chain_collapse", include_str!("../scenarios/chain_collapse.toml")),
    ("metric_constancy", include_str!("../scenarios/metric_constancy.toml")),
    ("swanson_bar", include_str!("../scenarios/swanson_bar.toml")),
    ("swanson_local_gauge", include_str!("../scenarios/swanson_local_gauge.toml")),
];

pub fn shipped(name: &str) -> Result<Scenario, CliError> {
    let (_, src) = SHIPPED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| CliError::UnknownScenario(name.to_string()))?;
    Scenario::from_toml(src, name)
}
