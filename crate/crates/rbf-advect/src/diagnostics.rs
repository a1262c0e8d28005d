//! Error norms, convergence orders, run reports and their CSV schemas.

use std::io::Write;

use serde::Serialize;

use crate::correction::CorrectionResiduals;
use crate::error::{Error, Result};
use crate::interpolation::NodalBasis;
use crate::par::Execution;
use crate::quadrature::QuadGrid;

/// (ℓ¹, ℓ∞): mean and maximum absolute nodal difference.
pub fn discrete_errors(u_num: &[f64], u_exact: &[f64]) -> Result<(f64, f64)> {
    if u_num.len() != u_exact.len() || u_num.is_empty() {
        return Err(Error::Dimension(format!("error vectors of length {} and {}", u_num.len(), u_exact.len())));
    }
    let diffs = u_num.iter().zip(u_exact).map(|(a, b)| (a - b).abs());
    let (sum, max) = diffs.fold((0.0, 0.0f64), |(s, m), d| (s + d, m.max(d)));
    Ok((sum / u_num.len() as f64, max))
}

/// Euclidean norm of the nodal error vector.
pub fn nodal_l2(u_num: &[f64], u_exact: &[f64]) -> Result<f64> {
    if u_num.len() != u_exact.len() {
        return Err(Error::Dimension(format!("error vectors of length {} and {}", u_num.len(), u_exact.len())));
    }
    Ok(u_num.iter().zip(u_exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
}

/// sqrt(∫(u_N - u)²) by quadrature.
pub fn l2_error(
    nb: &NodalBasis,
    u_num: &[f64],
    exact: &(dyn Fn(&[f64]) -> f64 + Sync),
    grid: &QuadGrid,
    exec: Execution,
) -> f64 {
    let it = nb.interpolant(u_num);
    grid.integrate(exec, |x| (it.evaluate(x) - exact(x)).powi(2)).max(0.0).sqrt()
}

/// Mean of log₂(e_j / e_{j+1}) over consecutive entries (grids refined by 2).
pub fn average_order(errors: &[f64]) -> Result<f64> {
    if errors.len() < 2 {
        return Err(Error::Domain("average order needs at least two errors".into()));
    }
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::Domain(format!("errors must be positive and finite, got {e}")));
    }
    let orders: f64 = errors.windows(2).map(|w| (w[0] / w[1]).log2()).sum();
    Ok(orders / (errors.len() - 1) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BlowUp {
    pub t: f64,
    pub stage: usize,
}

/// Everything recorded for one simulation.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RunReport {
    pub problem: String,
    pub method: String,
    pub kernel: String,
    pub n: usize,
    /// Number of centers actually used (N+1 for scattered sets, N² in 2D).
    pub centers: usize,
    pub degree_bound: usize,
    /// Cardinal functions summed in double-double.
    pub extended_precision: bool,
    pub error_l1: Option<f64>,
    pub error_linf: Option<f64>,
    pub error_l2: Option<f64>,
    pub error_l2_nodal: Option<f64>,
    pub max_abs_state: f64,
    pub energy: Vec<(f64, f64)>,
    pub conservation: Vec<(f64, f64)>,
    pub cond_vandermonde: Option<f64>,
    pub cond_a: Option<f64>,
    pub correction_residuals: Option<CorrectionResiduals>,
    pub nonpositive_mass: Vec<usize>,
    pub blow_up: Option<BlowUp>,
    pub t_final: f64,
    pub steps: usize,
    pub dt: f64,
    pub generator: Option<String>,
    pub seed: Option<u64>,
}

impl RunReport {
    pub fn run_id(&self) -> String {
        format!("{}-{}-{}-N{}", self.problem, self.method, self.kernel.replace(' ', "_"), self.n)
    }

    pub fn blew_up(&self) -> bool {
        self.blow_up.is_some()
    }

    /// Largest |E(t) - E(0)| over records with t ≤ t_max.
    pub fn max_energy_deviation(&self, reference: f64, t_max: f64) -> f64 {
        self.energy
            .iter()
            .filter(|(t, _)| *t <= t_max)
            .fold(0.0, |m, (_, e)| m.max((e - reference).abs()))
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6e}"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv output: {e}"))
}

/// errors.csv: one row per run, then an order row per (problem, method,
/// kernel) group with `N = avg`.
pub fn write_errors_csv<W: Write>(out: W, reports: &[RunReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["problem", "method", "kernel", "N", "l1", "linf", "l2", "order_l1", "order_linf"])
        .map_err(csv_err)?;
    let mut groups: Vec<(String, String, String)> = Vec::new();
    for r in reports {
        let n = r.n.to_string();
        let (l1, linf, l2) = if r.blew_up() {
            ("blowup".to_string(), "blowup".to_string(), "blowup".to_string())
        } else {
            (opt(r.error_l1), opt(r.error_linf), opt(r.error_l2))
        };
        w.write_record([r.problem.as_str(), &r.method, &r.kernel, &n, &l1, &linf, &l2, "", ""])
            .map_err(csv_err)?;
        let key = (r.problem.clone(), r.method.clone(), r.kernel.clone());
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    for (p, m, k) in groups {
        let rows: Vec<&RunReport> =
            reports.iter().filter(|r| r.problem == p && r.method == m && r.kernel == k).collect();
        if rows.len() < 2 {
            continue;
        }
        let col = |f: fn(&RunReport) -> Option<f64>| -> Option<f64> {
            let v: Option<Vec<f64>> = rows.iter().map(|r| if r.blew_up() { None } else { f(r) }).collect();
            v.and_then(|v| average_order(&v).ok())
        };
        let o1 = col(|r| r.error_l1);
        let oi = col(|r| r.error_linf);
        w.write_record([p.as_str(), &m, &k, "avg", "", "", "", &opt(o1), &opt(oi)]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Config(format!("csv output: {e}")))
}

pub fn write_energy_csv<W: Write>(out: W, reports: &[RunReport]) -> Result<()> {
    write_series(out, reports, "E", |r| &r.energy)
}

pub fn write_conservation_csv<W: Write>(out: W, reports: &[RunReport]) -> Result<()> {
    write_series(out, reports, "residual", |r| &r.conservation)
}

fn write_series<W: Write>(
    out: W,
    reports: &[RunReport],
    value: &str,
    series: fn(&RunReport) -> &Vec<(f64, f64)>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run_id", "t", value]).map_err(csv_err)?;
    for r in reports {
        let id = r.run_id();
        for (t, v) in series(r) {
            w.write_record([id.as_str(), &format!("{t:.10e}"), &format!("{v:.10e}")]).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Config(format!("csv output: {e}")))
}

/// One row of the FR conditioning report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditioningRow {
    pub kernel: String,
    pub n: usize,
    pub cond_a: f64,
    pub max_residual_cl: f64,
    pub max_residual_cr: f64,
}

/// conditioning.csv (kernel, N, cond_A).
pub fn write_conditioning_csv<W: Write>(out: W, rows: &[ConditioningRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kernel", "N", "cond_A"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([r.kernel.as_str(), &r.n.to_string(), &format!("{:.6e}", r.cond_a)]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Config(format!("csv output: {e}")))
}

/// Correction report with residuals of the defining conditions.
pub fn write_correction_csv<W: Write>(out: W, rows: &[ConditioningRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kernel", "N", "cond_A", "max_residual_cL", "max_residual_cR"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.kernel.as_str(),
            &r.n.to_string(),
            &format!("{:.6e}", r.cond_a),
            &format!("{:.6e}", r.max_residual_cl),
            &format!("{:.6e}", r.max_residual_cr),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Config(format!("csv output: {e}")))
}
