//! Test problems with initial/boundary data and exact solutions.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interpolation::CenterSet;
use crate::operators::{BoundaryData2d, ScalarData, SystemData};

/// Generator family used for scattered centers.
pub const SCATTER_GENERATOR: &str = "ChaCha8Rng::seed_from_u64";
pub const MAX_SCATTER_ATTEMPTS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemName {
    InflowBump,
    PeriodicSin2,
    Varcoeff,
    Acoustic,
    Advect2d,
}

impl ProblemName {
    pub const ALL: [ProblemName; 5] =
        [Self::InflowBump, Self::PeriodicSin2, Self::Varcoeff, Self::Acoustic, Self::Advect2d];

    pub fn spec(self) -> ProblemSpec {
        match self {
            Self::InflowBump => inflow_bump(),
            Self::PeriodicSin2 => periodic_sin2(),
            Self::Varcoeff => varcoeff_problem(),
            Self::Acoustic => acoustic_problem(),
            Self::Advect2d => advection_2d(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::InflowBump => "inflow_bump",
            Self::PeriodicSin2 => "periodic_sin2",
            Self::Varcoeff => "varcoeff",
            Self::Acoustic => "acoustic",
            Self::Advect2d => "advect2d",
        }
    }
}

impl fmt::Display for ProblemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown problem '{s}'")))
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Velocity {
    Constant(f64),
    Variable { a: ScalarData, da: ScalarData },
    /// u_t + c v_x = 0, v_t + c u_x = 0
    System { c: f64 },
    Constant2d([f64; 2]),
}

#[derive(Clone, Copy, Debug)]
pub enum BoundaryData {
    Inflow(ScalarData),
    Periodic,
    Characteristic(SystemData),
    Inflow2d(BoundaryData2d),
}

#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub name: ProblemName,
    pub dim: usize,
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    pub velocity: Velocity,
    /// Initial value of every state component.
    pub initial: fn(&[f64]) -> f64,
    pub boundary: BoundaryData,
    pub exact: Option<fn(f64, &[f64]) -> f64>,
    pub periodic: bool,
    pub default_t_end: f64,
}

impl ProblemSpec {
    pub fn lower(&self) -> &[f64] {
        &self.lower[..self.dim]
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper[..self.dim]
    }

    /// Number of state components per center.
    pub fn components(&self) -> usize {
        match self.velocity {
            Velocity::System { .. } => 2,
            _ => 1,
        }
    }
}

/// e¹⁶ exp(-16 / (1 - (4x - 1)²)) on (0, 1/2), zero elsewhere; peak 1 at x = 1/4.
pub fn bump(x: f64) -> f64 {
    if x > 0.0 && x < 0.5 {
        let s = 4.0 * x - 1.0;
        (16.0 - 16.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

fn bump_initial(x: &[f64]) -> f64 {
    bump(x[0])
}

fn bump_inflow(t: f64) -> f64 {
    bump(0.5 - t)
}

fn bump_exact(t: f64, x: &[f64]) -> f64 {
    let s = x[0] - t;
    if s >= 0.0 {
        bump(s)
    } else {
        bump_inflow(-s)
    }
}

pub fn inflow_bump() -> ProblemSpec {
    ProblemSpec {
        name: ProblemName::InflowBump,
        dim: 1,
        lower: [0.0, 0.0],
        upper: [1.0, 0.0],
        velocity: Velocity::Constant(1.0),
        initial: bump_initial,
        boundary: BoundaryData::Inflow(bump_inflow),
        exact: Some(bump_exact),
        periodic: false,
        default_t_end: 0.5,
    }
}

fn sin2_exact(t: f64, x: &[f64]) -> f64 {
    (2.0 * PI * (x[0] - t)).sin().powi(2)
}

fn sin2_initial(x: &[f64]) -> f64 {
    sin2_exact(0.0, x)
}

/// ∫₀¹ sin⁴(2πx) dx, the energy of the periodic solution.
pub const SIN2_ENERGY: f64 = 3.0 / 8.0;

pub fn periodic_sin2() -> ProblemSpec {
    ProblemSpec {
        name: ProblemName::PeriodicSin2,
        dim: 1,
        lower: [0.0, 0.0],
        upper: [1.0, 0.0],
        velocity: Velocity::Constant(1.0),
        initial: sin2_initial,
        boundary: BoundaryData::Periodic,
        exact: Some(sin2_exact),
        periodic: true,
        default_t_end: 100.0,
    }
}

fn varcoeff_a(x: f64) -> f64 {
    x
}

fn varcoeff_da(_x: f64) -> f64 {
    1.0
}

fn varcoeff_u0(x: f64) -> f64 {
    (12.0 * (x - 0.1)).sin()
}

fn varcoeff_initial(x: &[f64]) -> f64 {
    varcoeff_u0(x[0])
}

fn varcoeff_exact(t: f64, x: &[f64]) -> f64 {
    let e = (-t).exp();
    e * varcoeff_u0(x[0] * e)
}

fn zero_data(_t: f64) -> f64 {
    0.0
}

pub fn varcoeff_problem() -> ProblemSpec {
    ProblemSpec {
        name: ProblemName::Varcoeff,
        dim: 1,
        lower: [0.0, 0.0],
        upper: [2.0 * PI, 0.0],
        velocity: Velocity::Variable { a: varcoeff_a, da: varcoeff_da },
        initial: varcoeff_initial,
        boundary: BoundaryData::Inflow(zero_data),
        exact: Some(varcoeff_exact),
        periodic: false,
        default_t_end: 1.5,
    }
}

fn zero_initial(_x: &[f64]) -> f64 {
    0.0
}

/// Characteristic data (sin t, 0) at the left end and (0, sin t) at the right.
fn acoustic_data(t: f64) -> ([f64; 2], [f64; 2]) {
    let s = t.sin();
    ([s, 0.0], [0.0, s])
}

pub fn acoustic_problem() -> ProblemSpec {
    ProblemSpec {
        name: ProblemName::Acoustic,
        dim: 1,
        lower: [0.0, 0.0],
        upper: [1.0, 0.0],
        velocity: Velocity::System { c: 1.0 },
        initial: zero_initial,
        boundary: BoundaryData::Characteristic(acoustic_data),
        exact: None,
        periodic: false,
        default_t_end: 100.0,
    }
}

/// Characteristic transform W = (1/√2)[[1, 1], [1, -1]].
pub fn characteristic_transform() -> [[f64; 2]; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [[s, s], [s, -s]]
}

fn advect2d_u0(x: f64, y: f64) -> f64 {
    (4.0 * PI * x).sin() * (1.0 - 0.5 * (2.0 * PI * y).sin())
}

fn advect2d_initial(p: &[f64]) -> f64 {
    advect2d_u0(p[0], p[1])
}

fn advect2d_exact(t: f64, p: &[f64]) -> f64 {
    if p[0] <= t {
        0.0
    } else {
        advect2d_u0(p[0] - t, p[1])
    }
}

fn zero_data_2d(_t: f64, _p: &[f64]) -> f64 {
    0.0
}

pub fn advection_2d() -> ProblemSpec {
    ProblemSpec {
        name: ProblemName::Advect2d,
        dim: 2,
        lower: [0.0, 0.0],
        upper: [1.0, 1.0],
        velocity: Velocity::Constant2d([1.0, 0.0]),
        initial: advect2d_initial,
        boundary: BoundaryData::Inflow2d(zero_data_2d),
        exact: Some(advect2d_exact),
        periodic: false,
        default_t_end: 0.52632,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterConfig {
    pub sigma: f64,
    pub seed: u64,
}

/// x̃₀ = 0, x̃_N = 1, x̃_n = n/N + Z_n with Z_n ~ U(-1/(σN), 1/(σN)).
///
/// The interior is redrawn (continuing the same stream) whenever ordering or a
/// minimum spacing of 0.1/N is violated.
pub fn scattered_centers(n: usize, cfg: ScatterConfig) -> Result<CenterSet> {
    if !(cfg.sigma > 0.0) {
        return Err(Error::Config(format!("sigma = {} must be positive", cfg.sigma)));
    }
    if n < 2 {
        return Err(Error::Config(format!("scattered centers need N >= 2, got {n}")));
    }
    let nf = n as f64;
    let width = 1.0 / (cfg.sigma * nf);
    let min_gap = 0.1 / nf;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..MAX_SCATTER_ATTEMPTS {
        let mut x = Vec::with_capacity(n + 1);
        x.push(0.0);
        for i in 1..n {
            x.push(i as f64 / nf + rng.gen_range(-width..width));
        }
        x.push(1.0);
        if x.windows(2).all(|w| w[1] - w[0] >= min_gap) {
            return CenterSet::new_1d(x);
        }
    }
    Err(Error::DegenerateCenters(format!(
        "no admissible scattered set after {MAX_SCATTER_ATTEMPTS} attempts (N = {n}, sigma = {})",
        cfg.sigma
    )))
}
