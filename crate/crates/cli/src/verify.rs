//! The acceptance suite: shipped scenarios, a sign-flipped rerun of two of
//! them, and randomized Gauss-decomposition draws.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use dysonchain::chain::TermSign;
use dysonchain::fock::{gauss_decompose, gauss_residual};
use dysonchain::{FockConfig, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::report::RunReport;
use crate::run::{run, RunOptions};
use crate::scenario::{shipped, CheckKind, Scenario, SHIPPED};

/// Gauss draws: count, seed, dimension and the sampled box.
pub const GAUSS_DRAWS: usize = 200;
pub const GAUSS_SEED: u64 = 0x5eed_0011;
pub const GAUSS_DIM: usize = 60;
pub const GAUSS_EPS_RANGE: (f64, f64) = (0.05, 0.8);
pub const GAUSS_MU_FRACTION: f64 = 0.4;
pub const GAUSS_TOL: f64 = 1e-9;
pub const GAUSS_LIMIT_TOL: f64 = 1e-12;
/// A sign-flipped run must miss its bar by at least this much.
pub const MUTATION_MARGIN: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Part {
    pub source: String,
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub id: u8,
    pub title: String,
    pub parts: Vec<Part>,
    pub pass: bool,
}

impl Criterion {
    fn new(id: u8, title: &str, parts: Vec<Part>) -> Self {
        let pass = !parts.is_empty() && parts.iter().all(|p| p.pass);
        Criterion { id, title: title.to_string(), parts, pass }
    }

    /// One line: verdict, title, then every constituent measurement.
    pub fn line(&self) -> String {
        let parts: Vec<String> = self
            .parts
            .iter()
            .map(|p| format!("{}={:.3e} (tol {:.0e})", p.name, p.measured, p.tolerance))
            .collect();
        format!(
            "criterion {:>2} {} {}: {}",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.title,
            parts.join(", ")
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub criteria: Vec<Criterion>,
    pub runs: Vec<RunReport>,
    pub elapsed_ms: f64,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }

    pub fn table(&self) -> String {
        let mut out: String = self.criteria.iter().map(|c| c.line() + "\n").collect();
        let n = self.criteria.iter().filter(|c| c.pass).count();
        out += &format!("{n}/{} criteria pass in {:.1} s\n", self.criteria.len(), self.elapsed_ms / 1e3);
        out
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyOptions {
    pub out_dir: Option<PathBuf>,
    /// Worker threads for independent scenarios; 0 or 1 runs them in order.
    pub parallel: usize,
}

fn mutant(name: &str, keep: &[CheckKind]) -> Result<Scenario, CliError> {
    let mut sc = shipped(name)?;
    sc.name = format!("{name}_mutant");
    sc.lift_sign = TermSign::Minus;
    sc.checks = keep.to_vec();
    sc.evolution = None;
    Ok(sc)
}

/// Worst residual over the random draws, and the μ = 0 limit error.
pub fn gauss_suite() -> dysonchain::Result<(f64, f64)> {
    let fock = FockConfig::new(GAUSS_DIM)?;
    let mut rng = ChaCha8Rng::seed_from_u64(GAUSS_SEED);
    let mut worst = 0.0f64;
    for _ in 0..GAUSS_DRAWS {
        let mag = rng.gen_range(GAUSS_EPS_RANGE.0..=GAUSS_EPS_RANGE.1);
        let eps = if rng.gen_bool(0.5) { mag } else { -mag };
        let r = GAUSS_MU_FRACTION * mag * rng.gen::<f64>().sqrt();
        let mu = C64::from_polar(r, rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI));
        worst = worst.max(gauss_residual(&gauss_decompose(eps, mu)?, &fock)?);
    }
    let mut limit = 0.0f64;
    for eps in [-0.8, -0.3, -0.05, 0.05, 0.3, 0.8] {
        let p = gauss_decompose(eps, C64::new(0.0, 0.0))?;
        limit = limit.max((p.lambda_zero - (2.0 * eps).exp()).norm());
    }
    Ok((worst, limit))
}

fn part(reports: &BTreeMap<String, RunReport>, scenario: &str, check: CheckKind) -> Part {
    let name = check.name();
    match reports.get(scenario).and_then(|r| r.check(&name)) {
        Some(c) => Part { source: scenario.into(), name, measured: c.measured, tolerance: c.tolerance, pass: c.pass },
        None => Part { source: scenario.into(), name, measured: f64::NAN, tolerance: f64::NAN, pass: false },
    }
}

/// The sign-flipped run has to fail, by a clear margin.
fn mutation_part(reports: &BTreeMap<String, RunReport>, scenario: &str, check: CheckKind) -> Part {
    let p = part(reports, scenario, check);
    Part {
        name: format!("{}[flipped]", p.name),
        pass: !p.pass && p.measured >= MUTATION_MARGIN,
        tolerance: MUTATION_MARGIN,
        ..p
    }
}

pub fn verify_all(opts: &VerifyOptions) -> Result<Verification, CliError> {
    let start = Instant::now();
    let mut scenarios: Vec<Scenario> = SHIPPED.iter().map(|(n, _)| shipped(n)).collect::<Result<_, _>>()?;
    scenarios.push(mutant("linear_global_gauge", &[CheckKind::GaugeGlobal, CheckKind::CounterpartHermiticity])?);
    scenarios.push(mutant("chain_collapse", &[CheckKind::Collapse])?);

    let run_opts = RunOptions { out_dir: opts.out_dir.clone() };
    let results: Vec<Result<RunReport, CliError>> = if opts.parallel > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.parallel)
            .build()
            .expect("thread pool");
        pool.install(|| scenarios.par_iter().map(|sc| run(sc, &run_opts)).collect())
    } else {
        scenarios.iter().map(|sc| run(sc, &run_opts)).collect()
    };
    let runs: Vec<RunReport> = results.into_iter().collect::<Result<_, _>>()?;
    let reports: BTreeMap<String, RunReport> = runs.iter().map(|r| (r.scenario.clone(), r.clone())).collect();

    let gauss = gauss_suite();
    let gauss_parts = match gauss {
        Ok((worst, limit)) => vec![
            Part {
                source: "gauss".into(),
                name: format!("gauss_residual[{GAUSS_DRAWS} draws]"),
                measured: worst,
                tolerance: GAUSS_TOL,
                pass: worst < GAUSS_TOL,
            },
            Part {
                source: "gauss".into(),
                name: "lambda0_limit".into(),
                measured: limit,
                tolerance: GAUSS_LIMIT_TOL,
                pass: limit < GAUSS_LIMIT_TOL,
            },
        ],
        Err(e) => vec![Part {
            source: format!("gauss: {e}"),
            name: "gauss_residual".into(),
            measured: f64::NAN,
            tolerance: GAUSS_TOL,
            pass: false,
        }],
    };

    use CheckKind as K;
    let r = &reports;
    let criteria = vec![
        Criterion::new(
            1,
            "bar-map Hermiticity, linear model",
            vec![part(r, "linear_gamma", K::BarHermiticity), part(r, "linear_driven", K::BarHermiticity)],
        ),
        Criterion::new(
            2,
            "gamma ODE consistency",
            vec![part(r, "linear_gamma", K::GammaStationary), part(r, "linear_gamma", K::GammaConsistency)],
        ),
        Criterion::new(
            3,
            "global gauge, linear model",
            vec![
                part(r, "linear_global_gauge", K::GaugeGlobal),
                part(r, "linear_global_gauge", K::GaugePhaseOde),
                part(r, "linear_global_gauge", K::CrossSpace),
            ],
        ),
        Criterion::new(
            4,
            "chain collapse with Schrodinger-like maps",
            vec![part(r, "chain_collapse", K::Collapse), part(r, "chain_collapse", K::CollapseOrder)],
        ),
        Criterion::new(5, "metric constancy", vec![part(r, "metric_constancy", K::MetricConstancy)]),
        Criterion::new(
            6,
            "probability conservation",
            vec![part(r, "linear_driven", K::FlatNorm), part(r, "linear_driven", K::MetricNorm)],
        ),
        Criterion::new(
            7,
            "quadrature closed form",
            vec![part(r, "linear_driven", K::Quadratures), part(r, "linear_free", K::FreeQuadratures)],
        ),
        Criterion::new(8, "SU(1,1) Gauss decomposition", gauss_parts),
        Criterion::new(
            9,
            "Swanson bar root",
            vec![
                part(r, "swanson_bar", K::BarRootResidual),
                part(r, "swanson_bar", K::BarRootOracle),
                part(r, "swanson_bar", K::SwansonStationarity),
            ],
        ),
        Criterion::new(
            10,
            "Swanson invariant map and local gauge",
            vec![
                part(r, "swanson_local_gauge", K::InvariantHermiticity),
                part(r, "swanson_local_gauge", K::GaugeLocal),
            ],
        ),
        Criterion::new(
            11,
            "mutation sensitivity",
            vec![
                mutation_part(r, "linear_global_gauge_mutant", K::GaugeGlobal),
                mutation_part(r, "linear_global_gauge_mutant", K::CounterpartHermiticity),
                mutation_part(r, "chain_collapse_mutant", K::Collapse),
            ],
        ),
    ];
    Ok(Verification { criteria, runs, elapsed_ms: start.elapsed().as_secs_f64() * 1e3 })
}
