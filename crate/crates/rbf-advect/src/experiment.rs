//! Run configuration, operator assembly from a problem, and study drivers.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::correction::CorrectionSolve;
use crate::diagnostics::{self, BlowUp, ConditioningRow, RunReport};
use crate::error::{Error, Result};
use crate::interpolation::{CenterSet, EvalPrecision, NodalBasis};
use crate::kernels::Kernel;
use crate::operators::{
    BoundarySource, DeltaKind, Discretization1d, Discretization2d, Fr1d, Sat1d, Sat2d, SatSystem1d,
    Semidiscretization, SemidiscreteOperator, Usual1d, Usual2d, VarCoeff1d, VarCoeffBoundary,
};
use crate::par::{self, Execution};
use crate::problems::{self, BoundaryData, ProblemName, ProblemSpec, ScatterConfig, Velocity};
use crate::quadrature::QuadratureRule;
use crate::timestep::{self, TimeIntegration};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Usual,
    Fr,
    Sat,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Usual => "usual",
            Method::Fr => "fr",
            Method::Sat => "sat",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "usual" => Ok(Method::Usual),
            "fr" => Ok(Method::Fr),
            "sat" => Ok(Method::Sat),
            _ => Err(Error::Config(format!("unknown method '{s}' (usual | fr | sat)"))),
        }
    }
}

pub const DEFAULT_CFL: f64 = 0.1;
/// Default CFL constant for the 2D SAT scheme, whose corner penalties are stiff.
pub const DEFAULT_CFL_SAT_2D: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemName,
    pub method: Method,
    pub kernel: Kernel,
    /// Centers per direction; scattered sets have N+1 points.
    pub n: usize,
    pub m: Option<usize>,
    pub cfl: Option<f64>,
    pub t_end: Option<f64>,
    pub tau_l: f64,
    pub tau_r: f64,
    pub r0: f64,
    pub r1: f64,
    pub alpha_skew: f64,
    pub scatter: Option<ScatterConfig>,
    pub quad_points: usize,
    pub quad_panels: usize,
    pub record_stride: usize,
    pub delta: DeltaKind,
    pub correction_solve: CorrectionSolve,
    pub precision: EvalPrecision,
    pub exec: Execution,
}

impl RunConfig {
    pub fn new(problem: ProblemName, method: Method, kernel: Kernel, n: usize) -> Self {
        Self {
            problem,
            method,
            kernel,
            n,
            m: None,
            cfl: None,
            t_end: None,
            tau_l: -1.0,
            tau_r: 1.0,
            r0: 0.5,
            r1: 0.5,
            alpha_skew: 0.5,
            scatter: None,
            quad_points: 10,
            quad_panels: 1,
            record_stride: 10,
            delta: DeltaKind::Consistent,
            correction_solve: CorrectionSolve::Lu,
            precision: EvalPrecision::Auto,
            exec: Execution::default(),
        }
    }

    pub fn degree_bound(&self) -> usize {
        self.m.unwrap_or(self.kernel.default_degree_bound())
    }

    pub fn effective_cfl(&self) -> f64 {
        self.cfl.unwrap_or(match (self.problem, self.method) {
            (ProblemName::Advect2d, Method::Sat) => DEFAULT_CFL_SAT_2D,
            _ => DEFAULT_CFL,
        })
    }

    pub fn effective_t_end(&self) -> f64 {
        self.t_end.unwrap_or(self.problem.spec().default_t_end)
    }

    pub fn rule(&self) -> Result<QuadratureRule> {
        QuadratureRule::new(self.quad_panels, self.quad_points)
    }

    /// Rejects every combination violating a documented precondition.
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        let spec = self.problem.spec();
        let supported = match self.problem {
            ProblemName::InflowBump | ProblemName::PeriodicSin2 => true,
            ProblemName::Varcoeff | ProblemName::Advect2d => self.method != Method::Fr,
            ProblemName::Acoustic => self.method == Method::Sat,
        };
        if !supported {
            return Err(Error::Config(format!("method {} is not available for {}", self.method, self.problem)));
        }
        let m = self.degree_bound();
        if m < self.kernel.cpd_order() {
            return Err(Error::Config(format!(
                "m = {m} below the CPD order {} of {}",
                self.kernel.cpd_order(),
                self.kernel
            )));
        }
        if self.n < 2 {
            return Err(Error::Config(format!("N = {} too small", self.n)));
        }
        if let Some(c) = self.cfl {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("cfl = {c} must be positive")));
            }
        }
        if let Some(t) = self.t_end {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("t_end = {t} must be nonnegative")));
            }
        }
        if self.method == Method::Sat {
            let a = match spec.velocity {
                Velocity::Constant(a) => a,
                _ => 1.0,
            };
            if matches!(spec.velocity, Velocity::Constant(_) | Velocity::Variable { .. }) {
                crate::operators::check_penalty(a, self.tau_l, self.tau_r)?;
            }
        }
        if self.problem == ProblemName::Acoustic {
            for (name, r) in [("R0", self.r0), ("R1", self.r1)] {
                if !(r > 0.0 && r < 1.0) {
                    return Err(Error::Stability(format!("{name} = {r} must lie in (0, 1)")));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.alpha_skew) {
            return Err(Error::Config(format!("alpha_skew = {} outside [0, 1]", self.alpha_skew)));
        }
        if let Some(s) = self.scatter {
            if !(s.sigma > 0.0) {
                return Err(Error::Config(format!("sigma = {} must be positive", s.sigma)));
            }
            if spec.dim != 1 || spec.lower[0] != 0.0 || spec.upper[0] != 1.0 {
                return Err(Error::Config("scattered centers are defined on [0, 1] only".into()));
            }
        }
        if self.quad_panels == 0 || !(1..=crate::quadrature::MAX_GAUSS_POINTS).contains(&self.quad_points) {
            return Err(Error::Config(format!(
                "quadrature needs panels >= 1 and 1..=64 points, got {} x {}",
                self.quad_panels, self.quad_points
            )));
        }
        if let CorrectionSolve::TruncatedSvd { rel_tol } = self.correction_solve {
            if !(rel_tol > 0.0 && rel_tol < 1.0) {
                return Err(Error::Config(format!("truncated SVD tolerance {rel_tol} outside (0, 1)")));
            }
        }
        Ok(())
    }

    pub fn centers(&self, spec: &ProblemSpec) -> Result<CenterSet> {
        if spec.dim == 2 {
            return CenterSet::tensor_grid_2d(spec.lower, spec.upper, self.n, self.n);
        }
        match self.scatter {
            Some(cfg) => problems::scattered_centers(self.n, cfg),
            None => CenterSet::equidistant_1d(spec.lower[0], spec.upper[0], self.n),
        }
    }
}

/// Assembles the operator for a validated configuration.
pub fn build_operator(cfg: &RunConfig) -> Result<SemidiscreteOperator> {
    cfg.validate()?;
    let spec = cfg.problem.spec();
    let rule = cfg.rule()?;
    let exec = cfg.exec;
    let centers = cfg.centers(&spec)?;
    let basis = NodalBasis::new(centers, cfg.kernel, Some(cfg.degree_bound()), spec.lower(), spec.upper(), exec)?
        .with_precision(cfg.precision);
    let (lo, hi) = (spec.lower[0], spec.upper[0]);
    let source = match spec.boundary {
        BoundaryData::Inflow(g) => BoundarySource::Data(g),
        _ => BoundarySource::Periodic,
    };
    Ok(match (spec.velocity, cfg.method) {
        (Velocity::Constant(a), Method::Usual) => {
            SemidiscreteOperator::Usual1d(Usual1d::new(Discretization1d::new(basis, lo, hi, &rule, exec)?, a, source)?)
        }
        (Velocity::Constant(a), Method::Sat) => SemidiscreteOperator::Sat1d(Sat1d::new(
            Discretization1d::new(basis, lo, hi, &rule, exec)?,
            a,
            cfg.tau_l,
            cfg.tau_r,
            cfg.delta,
            source,
        )?),
        (Velocity::Constant(a), Method::Fr) => {
            SemidiscreteOperator::Fr1d(Fr1d::new(basis, lo, hi, a, source, &rule, cfg.correction_solve, exec)?)
        }
        (Velocity::Variable { a, da }, method) => {
            let g = match spec.boundary {
                BoundaryData::Inflow(g) => g,
                _ => return Err(Error::Config("variable-coefficient problems need inflow data".into())),
            };
            let boundary = match method {
                Method::Sat => VarCoeffBoundary::Weak { tau: cfg.tau_l, delta: cfg.delta },
                _ => VarCoeffBoundary::Strong,
            };
            let disc = Discretization1d::new(basis, lo, hi, &rule, exec)?;
            SemidiscreteOperator::VarCoeff1d(VarCoeff1d::new(disc, a, da, cfg.alpha_skew, boundary, g)?)
        }
        (Velocity::System { c }, _) => {
            let data = match spec.boundary {
                BoundaryData::Characteristic(d) => d,
                _ => return Err(Error::Config("system problems need characteristic data".into())),
            };
            let disc = Discretization1d::new(basis, lo, hi, &rule, exec)?;
            SemidiscreteOperator::SatSystem1d(SatSystem1d::new(disc, c, cfg.r0, cfg.r1, cfg.delta, data)?)
        }
        (Velocity::Constant2d(a), method) => {
            let g = match spec.boundary {
                BoundaryData::Inflow2d(g) => g,
                _ => return Err(Error::Config("2D problems need inflow data".into())),
            };
            let disc = Discretization2d::new(basis, spec.lower, spec.upper, &rule, exec)?;
            match method {
                Method::Sat => SemidiscreteOperator::Sat2d(Sat2d::new(disc, a, g, exec)?),
                _ => SemidiscreteOperator::Usual2d(Usual2d::new(disc, a, g, exec)),
            }
        }
    })
}

/// Initial state, components stacked.
pub fn initial_state(op: &SemidiscreteOperator, spec: &ProblemSpec) -> Vec<f64> {
    let c = op.basis().centers();
    let one: Vec<f64> = (0..c.len()).map(|i| (spec.initial)(c.point(i))).collect();
    let mut u = Vec::with_capacity(one.len() * spec.components());
    for _ in 0..spec.components() {
        u.extend_from_slice(&one);
    }
    op.constrain(&mut u, 0.0);
    u
}

/// A finished (or blown-up) run.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub state: Vec<f64>,
    pub operator: SemidiscreteOperator,
}

pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    let op = build_operator(cfg)?;
    run_with_operator(cfg, op)
}

pub fn run_with_operator(cfg: &RunConfig, op: SemidiscreteOperator) -> Result<RunOutcome> {
    let spec = cfg.problem.spec();
    let ti = TimeIntegration::new(cfg.effective_cfl(), cfg.effective_t_end(), cfg.record_stride)?;
    let basis = op.basis();
    let mut report = RunReport {
        problem: cfg.problem.to_string(),
        method: cfg.method.to_string(),
        kernel: cfg.kernel.to_string(),
        n: cfg.n,
        centers: basis.len(),
        degree_bound: basis.poly().degree_bound(),
        extended_precision: basis.extended_precision(),
        nonpositive_mass: op.mass().nonpositive.clone(),
        generator: cfg.scatter.map(|_| problems::SCATTER_GENERATOR.to_string()),
        seed: cfg.scatter.map(|s| s.seed),
        ..Default::default()
    };
    if basis.dim() == 1 {
        report.cond_vandermonde = Some(basis.vandermonde_condition());
    }
    if let SemidiscreteOperator::Fr1d(fr) = &op {
        report.cond_a = Some(fr.corrections().cond_a());
        report.correction_residuals = Some(fr.residuals().clone());
    }
    let u0 = initial_state(&op, &spec);
    let mut energy = Vec::new();
    let mut conservation = Vec::new();
    let is_fr = matches!(op, SemidiscreteOperator::Fr1d(_));
    let result = timestep::integrate(&op, &u0, 0.0, &ti, &mut |t, u| {
        energy.push((t, op.energy(u)));
        if is_fr {
            if let (Some(r), Some((fl, fr))) = (op.rates(u, t), op.boundary_fluxes(u, t)) {
                conservation.push((t, (r.mass - (fl - fr)).abs()));
            }
        }
    });
    report.energy = energy;
    report.conservation = conservation;
    report.dt = timestep::compute_dt(ti.cfl, op.spacing(), op.lambda_max())?;
    let state = match result {
        Ok(done) => {
            report.t_final = done.t;
            report.steps = done.steps;
            done.state
        }
        Err(Error::BlowUp { t, stage }) => {
            report.blow_up = Some(BlowUp { t, stage });
            report.t_final = t;
            return Ok(RunOutcome { report, state: Vec::new(), operator: op });
        }
        Err(e) => return Err(e),
    };
    report.max_abs_state = crate::linalg::norm_inf(&state);
    if let Some(exact) = spec.exact {
        let c = basis.centers();
        let t = report.t_final;
        let ue: Vec<f64> = (0..c.len()).map(|i| exact(t, c.point(i))).collect();
        let (l1, linf) = diagnostics::discrete_errors(&state, &ue)?;
        report.error_l1 = Some(l1);
        report.error_linf = Some(linf);
        report.error_l2_nodal = Some(diagnostics::nodal_l2(&state, &ue)?);
        let f = move |x: &[f64]| exact(t, x);
        report.error_l2 = Some(diagnostics::l2_error(basis, &state, &f, op.quad_grid(), cfg.exec));
    }
    Ok(RunOutcome { report, state, operator: op })
}

/// Runs independent configurations, concurrently when `exec` allows.
/// Results keep the input order.
pub fn run_many(configs: &[RunConfig], exec: Execution) -> Vec<Result<RunReport>> {
    par::map_range(exec, configs.len(), |i| run(&configs[i]).map(|o| o.report))
}

/// Condition number and residuals of the correction system.
pub fn conditioning(
    kernel: Kernel,
    n: usize,
    m: Option<usize>,
    rule: &QuadratureRule,
    precision: EvalPrecision,
    exec: Execution,
) -> Result<ConditioningRow> {
    use crate::correction;
    let centers = CenterSet::equidistant_1d(0.0, 1.0, n)?;
    let nb = NodalBasis::new(centers, kernel, m, &[0.0], &[1.0], exec)?.with_precision(precision);
    let aux = correction::auxiliary_basis(&nb, 0.0, 1.0, exec)?;
    let cf = correction::build_corrections(&nb, aux, 0.0, 1.0, rule, CorrectionSolve::Lu, exec)?;
    let res = correction::verify_corrections(&cf, &nb, rule, exec);
    Ok(ConditioningRow {
        kernel: kernel.to_string(),
        n,
        cond_a: cf.cond_a(),
        max_residual_cl: res.max_residual_cl,
        max_residual_cr: res.max_residual_cr,
    })
}
