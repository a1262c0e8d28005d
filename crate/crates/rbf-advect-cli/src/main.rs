//! Command-line driver: single runs, convergence studies, long-time energy
//! studies, scattered-center studies and the FR conditioning report.

mod options;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rbf_advect::diagnostics::{self, RunReport};
use rbf_advect::experiment::{self, run_many};
use rbf_advect::problems::ScatterConfig;
use rbf_advect::quadrature::QuadratureRule;
use rbf_advect::{Error, Kernel, Method, ProblemName, Result, RunConfig};

use options::{Common, STUDY_NS};

const EXIT_FAILURE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_BLOWUP: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "rbf-advect", version, about = "Global RBF schemes for linear advection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One simulation (defaults: inflow_bump, sat, cubic, N=40)
    Run(Common),
    /// Convergence study over N (default N = 10,20,40,80)
    Study(Common),
    /// Energy histories to long times (defaults: periodic_sin2, all methods, quintic, N=80)
    Longtime(Common),
    /// Study on randomly perturbed centers in [0, 1]
    Scatter(ScatterArgs),
    /// Condition number of the FR correction system (default cubic and quintic, N = 10,20,40,80)
    Condition(Common),
}

#[derive(Args, Debug)]
struct ScatterArgs {
    #[command(flatten)]
    common: Common,
    /// Number of consecutive seeds starting at --seed
    #[arg(long, default_value_t = 1)]
    seeds: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| dispatch(cli.command)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            report_error(&e, None);
            ExitCode::from(if e.is_validation() { EXIT_VALIDATION } else { EXIT_FAILURE })
        }
    }
}

/// RBF_ADVECT_THREADS caps the worker pool.
fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("RBF_ADVECT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("RBF_ADVECT_THREADS = '{v}' is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Dimension(_) => "dimension",
        Error::Singular(_) => "singular",
        Error::Domain(_) => "domain",
        Error::DegenerateCenters(_) => "degenerate_centers",
        Error::Config(_) => "config",
        Error::Stability(_) => "stability",
        Error::Correction { .. } => "correction",
        Error::BlowUp { .. } => "blowup",
    }
}

/// One line per failure on stderr: `error kind=<kind> [run=<id>] message="<text>"`.
fn report_error(e: &Error, run: Option<&str>) {
    let run = run.map(|r| format!(" run={r}")).unwrap_or_default();
    eprintln!("error kind={}{run} message={:?}", error_kind(e), e.to_string());
}

fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::Run(c) => {
            let c = c.merged()?;
            let problem = c.problem_or(ProblemName::InflowBump)?;
            let configs =
                c.configs(problem, &c.methods_or(&[Method::Sat])?, &c.kernels_or(&[Kernel::CUBIC])?, &c.ns_or(&[40]), None)?;
            if configs.len() != 1 {
                return Err(Error::Config(format!(
                    "run takes one method, kernel and N ({} combinations given); use study",
                    configs.len()
                )));
            }
            simulate(&c, &configs)
        }
        Command::Study(c) => {
            let c = c.merged()?;
            let problem = c.problem_or(ProblemName::InflowBump)?;
            let configs =
                c.configs(problem, &c.methods_or(&[Method::Sat])?, &c.kernels_or(&[Kernel::CUBIC])?, &c.ns_or(&STUDY_NS), None)?;
            simulate(&c, &configs)
        }
        Command::Longtime(c) => {
            let c = c.merged()?;
            let problem = c.problem_or(ProblemName::PeriodicSin2)?;
            let methods = c.methods_or(&[Method::Usual, Method::Fr, Method::Sat])?;
            let configs = c.configs(problem, &methods, &c.kernels_or(&[Kernel::QUINTIC])?, &c.ns_or(&[80]), None)?;
            simulate(&c, &configs)
        }
        Command::Scatter(s) => scatter(s),
        Command::Condition(c) => condition(c.merged()?),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", path.display())))
}

fn prepare_out_dir(c: &Common) -> Result<std::path::PathBuf> {
    let dir = c.out_dir();
    fs::create_dir_all(&dir).map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

/// Runs every configuration and collects reports; failures are logged and
/// skipped so one bad run does not abort a study.
fn collect(configs: &[RunConfig], c: &Common) -> (Vec<RunReport>, bool) {
    let mut reports = Vec::new();
    let mut failed = false;
    for (cfg, result) in configs.iter().zip(run_many(configs, c.execution())) {
        match result {
            Ok(r) => {
                if let Some(b) = r.blow_up {
                    eprintln!("blowup run={} t={:.6e} stage={}", r.run_id(), b.t, b.stage);
                }
                reports.push(r);
            }
            Err(e) => {
                failed = true;
                let id = format!("{}-{}-{}-N{}", cfg.problem, cfg.method, cfg.kernel.to_string().replace(' ', "_"), cfg.n);
                report_error(&e, Some(&id));
            }
        }
    }
    (reports, failed)
}

fn exit_code(reports: &[RunReport], failed: bool) -> u8 {
    if reports.iter().any(RunReport::blew_up) {
        EXIT_BLOWUP
    } else if failed {
        EXIT_FAILURE
    } else {
        0
    }
}

fn simulate(c: &Common, configs: &[RunConfig]) -> Result<u8> {
    let dir = prepare_out_dir(c)?;
    let (reports, failed) = collect(configs, c);
    diagnostics::write_errors_csv(create(&dir, "errors.csv")?, &reports)?;
    diagnostics::write_energy_csv(create(&dir, "energy.csv")?, &reports)?;
    diagnostics::write_conservation_csv(create(&dir, "conservation.csv")?, &reports)?;
    write_runs_csv(create(&dir, "runs.csv")?, &reports)?;
    Ok(exit_code(&reports, failed))
}

fn scatter(s: ScatterArgs) -> Result<u8> {
    let c = s.common.merged()?;
    if s.seeds == 0 {
        return Err(Error::Config("seeds must be at least 1".into()));
    }
    let problem = c.problem_or(ProblemName::InflowBump)?;
    let methods = c.methods_or(&[Method::Sat])?;
    let kernels = c.kernels_or(&[Kernel::CUBIC])?;
    let ns = c.ns_or(&STUDY_NS);
    let sigma = c.sigma.unwrap_or(4.0);
    let first = c.seed.unwrap_or(0);
    let mut configs = Vec::new();
    for seed in first..first + s.seeds {
        configs.extend(c.configs(problem, &methods, &kernels, &ns, Some(ScatterConfig { sigma, seed }))?);
    }
    let dir = prepare_out_dir(&c)?;
    let (reports, failed) = collect(&configs, &c);
    write_runs_csv(create(&dir, "runs.csv")?, &reports)?;
    diagnostics::write_energy_csv(create(&dir, "energy.csv")?, &reports)?;
    Ok(exit_code(&reports, failed))
}

fn condition(c: Common) -> Result<u8> {
    let kernels = c.kernels_or(&[Kernel::CUBIC, Kernel::QUINTIC])?;
    let ns = c.ns_or(&STUDY_NS);
    let rule = QuadratureRule::new(1, c.quad_points.unwrap_or(10))?;
    let precision = c.precision()?;
    let mut rows = Vec::new();
    for &kernel in &kernels {
        for &n in &ns {
            if n < 2 {
                return Err(Error::Config(format!("N = {n} too small")));
            }
            rows.push(experiment::conditioning(kernel, n, c.m, &rule, precision, c.execution())?);
        }
    }
    let dir = prepare_out_dir(&c)?;
    diagnostics::write_conditioning_csv(create(&dir, "conditioning.csv")?, &rows)?;
    diagnostics::write_correction_csv(create(&dir, "correction.csv")?, &rows)?;
    Ok(0)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6e}"))
}

/// runs.csv: one row of run metadata per simulation, including blow-up flags.
fn write_runs_csv<W: std::io::Write>(out: W, reports: &[RunReport]) -> Result<()> {
    let err = |e: csv::Error| Error::Config(format!("csv output: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "run_id", "problem", "method", "kernel", "N", "centers", "m", "extended_precision", "dt", "steps",
        "t_final", "blowup", "l1", "linf", "l2", "l2_nodal", "max_abs_state", "cond_vandermonde", "cond_A",
        "nonpositive_mass", "generator", "seed",
    ])
    .map_err(err)?;
    for r in reports {
        let nonpositive: Vec<String> = r.nonpositive_mass.iter().map(usize::to_string).collect();
        w.write_record([
            r.run_id(),
            r.problem.clone(),
            r.method.clone(),
            r.kernel.clone(),
            r.n.to_string(),
            r.centers.to_string(),
            r.degree_bound.to_string(),
            r.extended_precision.to_string(),
            format!("{:.6e}", r.dt),
            r.steps.to_string(),
            format!("{:.6e}", r.t_final),
            r.blew_up().to_string(),
            fmt_opt(r.error_l1),
            fmt_opt(r.error_linf),
            fmt_opt(r.error_l2),
            fmt_opt(r.error_l2_nodal),
            format!("{:.6e}", r.max_abs_state),
            fmt_opt(r.cond_vandermonde),
            fmt_opt(r.cond_a),
            nonpositive.join(" "),
            r.generator.clone().unwrap_or_default(),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Config(format!("csv output: {e}")))
}
