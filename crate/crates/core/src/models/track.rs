use std::fmt;

use serde::{Deserialize, Serialize};

use super::expr::Expr;
use crate::error::{Error, Result};
use crate::fock::C64;
use crate::grid::Grid;

/// Complex-valued function of time: a closed-form expression or cubic
/// interpolation through uniformly spaced samples (held constant outside
/// the knots).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrackSpec", into = "TrackSpec")]
pub struct CoefficientTrack {
    kind: Kind,
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Closed { src: String, expr: Expr },
    Sampled { grid: Grid, times: Vec<f64>, values: Vec<C64> },
}

/// On-disk forms: a bare number, an expression string, `{re, im}`, or
/// `{samples = [[t, re, im], ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum TrackSpec {
    Number(f64),
    Text(String),
    Pair { re: f64, im: f64 },
    Samples { samples: Vec<[f64; 3]> },
}

impl TryFrom<TrackSpec> for CoefficientTrack {
    type Error = Error;
    fn try_from(spec: TrackSpec) -> Result<Self> {
        match spec {
            TrackSpec::Number(x) => Self::closed(&format!("{x:?}")),
            TrackSpec::Text(s) => Self::closed(&s),
            TrackSpec::Pair { re, im } => Self::closed(&format!("{re:?} + {im:?}*i")),
            TrackSpec::Samples { samples } => {
                let times = samples.iter().map(|s| s[0]).collect();
                let values = samples.iter().map(|s| C64::new(s[1], s[2])).collect();
                Self::sampled(times, values)
            }
        }
    }
}

impl From<CoefficientTrack> for TrackSpec {
    fn from(track: CoefficientTrack) -> TrackSpec {
        match track.kind {
            Kind::Closed { src, .. } => TrackSpec::Text(src),
            Kind::Sampled { times, values, .. } => TrackSpec::Samples {
                samples: times.iter().zip(&values).map(|(&t, v)| [t, v.re, v.im]).collect(),
            },
        }
    }
}

impl CoefficientTrack {
    pub fn closed(src: &str) -> Result<Self> {
        let expr = Expr::parse(src)?;
        Ok(CoefficientTrack { kind: Kind::Closed { src: src.trim().to_string(), expr } })
    }

    pub fn constant(value: C64) -> Self {
        Self::closed(&format!("{:?} + {:?}*i", value.re, value.im)).expect("constant expressions parse")
    }

    pub fn real(value: f64) -> Self {
        Self::closed(&format!("{value:?}")).expect("constant expressions parse")
    }

    /// Samples at uniformly spaced times; at least four knots.
    pub fn sampled(times: Vec<f64>, values: Vec<C64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidConfig(format!("{} times for {} values", times.len(), values.len())));
        }
        if times.len() < 4 {
            return Err(Error::InvalidConfig("cubic interpolation needs at least 4 samples".into()));
        }
        let n = times.len();
        let step = (times[n - 1] - times[0]) / (n - 1) as f64;
        let grid = Grid::new(times[0], times[n - 1], step)?;
        for (k, &t) in times.iter().enumerate() {
            if (t - grid.t(k)).abs() > 1e-9 * step {
                return Err(Error::InvalidConfig(format!("sample {k} at t = {t} is off the uniform grid")));
            }
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("track samples"));
        }
        Ok(CoefficientTrack { kind: Kind::Sampled { grid, times, values } })
    }

    pub fn from_grid(grid: &Grid, values: Vec<C64>) -> Result<Self> {
        Self::sampled(grid.times(), values)
    }

    pub fn eval(&self, t: f64) -> C64 {
        match &self.kind {
            Kind::Closed { expr, .. } => expr.eval(t),
            Kind::Sampled { grid, values, .. } => {
                grid.lagrange4(t).into_iter().map(|(k, w)| values[k] * w).sum()
            }
        }
    }

    pub fn is_sampled(&self) -> bool {
        matches!(self.kind, Kind::Sampled { .. })
    }

    pub fn is_constant(&self) -> bool {
        match &self.kind {
            Kind::Closed { expr, .. } => expr.is_constant(),
            Kind::Sampled { values, .. } => values.iter().all(|v| *v == values[0]),
        }
    }
}

impl fmt::Display for CoefficientTrack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Closed { src, .. } => write!(f, "{src}"),
            Kind::Sampled { grid, .. } => write!(f, "sampled on {grid}"),
        }
    }
}
