//! SSPRK(3,3) time stepping with CFL step selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::Semidiscretization;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeIntegration {
    pub cfl: f64,
    pub t_end: f64,
    /// Observer is called every `record_stride` steps (and at both ends).
    pub record_stride: usize,
}

impl TimeIntegration {
    pub fn new(cfl: f64, t_end: f64, record_stride: usize) -> Result<Self> {
        if !(cfl > 0.0 && cfl.is_finite()) {
            return Err(Error::Config(format!("cfl = {cfl} must be positive")));
        }
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::Config(format!("t_end = {t_end} must be nonnegative")));
        }
        Ok(Self { cfl, t_end, record_stride: record_stride.max(1) })
    }
}

/// Δt = C h / λ_max.
pub fn compute_dt(c: f64, h: f64, lambda_max: f64) -> Result<f64> {
    if !(c > 0.0 && h > 0.0 && lambda_max > 0.0) {
        return Err(Error::Domain(format!("dt needs positive C, h, lambda_max; got {c}, {h}, {lambda_max}")));
    }
    Ok(c * h / lambda_max)
}

/// Scratch buffers for one step.
#[derive(Clone, Debug, Default)]
pub struct StepBuffers {
    k: Vec<f64>,
    stage: Vec<f64>,
}

fn check(v: &[f64], t: f64, stage: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::BlowUp { t, stage })
    }
}

/// One SSPRK(3,3) step in place. Every stage is evaluated at the nominal
/// time `t`.
pub fn ssprk33_step_in_place(
    rhs: &dyn Fn(&[f64], f64, &mut [f64]),
    u: &mut [f64],
    t: f64,
    dt: f64,
    buf: &mut StepBuffers,
) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt = {dt} must be positive")));
    }
    let n = u.len();
    buf.k.resize(n, 0.0);
    buf.stage.resize(n, 0.0);
    let StepBuffers { k, stage } = buf;

    rhs(u, t, k);
    for i in 0..n {
        stage[i] = u[i] + dt * k[i];
    }
    check(stage, t, 1)?;

    rhs(stage, t, k);
    for i in 0..n {
        stage[i] = 0.75 * u[i] + 0.25 * stage[i] + 0.25 * dt * k[i];
    }
    check(stage, t, 2)?;

    rhs(stage, t, k);
    for i in 0..n {
        u[i] = u[i] / 3.0 + 2.0 / 3.0 * stage[i] + 2.0 / 3.0 * dt * k[i];
    }
    check(u, t, 3)
}

pub fn ssprk33_step(rhs: &dyn Fn(&[f64], f64, &mut [f64]), u: &[f64], t: f64, dt: f64) -> Result<Vec<f64>> {
    let mut v = u.to_vec();
    ssprk33_step_in_place(rhs, &mut v, t, dt, &mut StepBuffers::default())?;
    Ok(v)
}

/// Final state of a completed integration.
#[derive(Clone, Debug, PartialEq)]
pub struct Integrated {
    pub state: Vec<f64>,
    pub t: f64,
    pub steps: usize,
    pub dt: f64,
}

/// Integrates from `t0` to `ti.t_end` with Δt = C h / λ_max, the last step
/// truncated to land on `t_end`. `observer(t, u)` sees the initial state,
/// every `record_stride`-th state and the final state.
pub fn integrate(
    op: &dyn Semidiscretization,
    u0: &[f64],
    t0: f64,
    ti: &TimeIntegration,
    observer: &mut dyn FnMut(f64, &[f64]),
) -> Result<Integrated> {
    let dt = compute_dt(ti.cfl, op.spacing(), op.lambda_max())?;
    let rhs = |u: &[f64], t: f64, out: &mut [f64]| op.rhs_into(u, t, out);
    integrate_with(&rhs, &|u: &mut [f64], t| op.constrain(u, t), u0, t0, ti.t_end, dt, ti.record_stride, observer)
}

/// Like [`integrate`] for a bare right-hand side and constraint hook.
#[allow(clippy::too_many_arguments)]
pub fn integrate_with(
    rhs: &dyn Fn(&[f64], f64, &mut [f64]),
    constrain: &dyn Fn(&mut [f64], f64),
    u0: &[f64],
    t0: f64,
    t_end: f64,
    dt: f64,
    stride: usize,
    observer: &mut dyn FnMut(f64, &[f64]),
) -> Result<Integrated> {
    let mut u = u0.to_vec();
    observer(t0, &u);
    let span = t_end - t0;
    if span <= 0.0 {
        return Ok(Integrated { state: u, t: t0, steps: 0, dt });
    }
    let steps = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
    let stride = stride.max(1);
    let mut buf = StepBuffers::default();
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        let (h, t_next) = if k + 1 == steps { (t_end - t, t_end) } else { (dt, t0 + (k + 1) as f64 * dt) };
        ssprk33_step_in_place(rhs, &mut u, t, h, &mut buf)?;
        constrain(&mut u, t_next);
        if (k + 1) % stride == 0 || k + 1 == steps {
            observer(t_next, &u);
        }
    }
    Ok(Integrated { state: u, t: t_end, steps, dt })
}
