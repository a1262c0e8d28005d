//! Command-line options, key=value config files and their resolution into run configurations.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use rbf_advect::interpolation::EvalPrecision;
use rbf_advect::operators::DeltaKind;
use rbf_advect::problems::ScatterConfig;
use rbf_advect::{Error, Kernel, Method, ProblemName, Result, RunConfig};

pub const STUDY_NS: [usize; 4] = [10, 20, 40, 80];

/// Options shared by every subcommand. Unset flags fall back to the config
/// file, then to per-subcommand defaults.
#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// key=value file; flags given on the command line take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub problem: Option<String>,
    /// usual | fr | sat (repeatable)
    #[arg(long)]
    pub method: Vec<String>,
    /// cubic | quintic | tps<k> | phs<p> | gaussian:epsilon=<e> | multiquadric:epsilon=<e> (repeatable)
    #[arg(long)]
    pub kernel: Vec<String>,
    /// Centers per direction (repeatable or comma separated)
    #[arg(long = "N", value_delimiter = ',')]
    pub n: Vec<usize>,
    /// Polynomial degree bound
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub cfl: Option<f64>,
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    /// Inflow penalty τ_L
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<f64>,
    /// Outflow penalty τ_R
    #[arg(long = "tau-r", allow_hyphen_values = true)]
    pub tau_r: Option<f64>,
    #[arg(long = "R0")]
    pub r0: Option<f64>,
    #[arg(long = "R1")]
    pub r1: Option<f64>,
    /// Scatter strength: perturbations are drawn from U(-1/(σN), 1/(σN))
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "out-dir")]
    pub out_dir: Option<PathBuf>,
    /// Gauss-Legendre points per panel
    #[arg(long = "quad-points")]
    pub quad_points: Option<usize>,
    /// Record energy every k steps
    #[arg(long = "record-stride")]
    pub record_stride: Option<usize>,
    /// auto | double | extended
    #[arg(long)]
    pub precision: Option<String>,
    /// consistent | lumped
    #[arg(long)]
    pub delta: Option<String>,
    /// Disable data parallelism inside each run
    #[arg(long)]
    pub serial: bool,
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config(format!("bad value '{v}' for {key}")))
}

impl Common {
    /// Fills unset options from the config file, if any.
    pub fn merged(mut self) -> Result<Self> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_config(&text)?;
        Ok(self)
    }

    pub fn apply_config(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("config line {}: expected key=value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let list = || value.split(',').map(str::trim).filter(|s| !s.is_empty());
            match key.replace('_', "-").as_str() {
                "problem" => fill(&mut self.problem, value.to_string()),
                "method" if self.method.is_empty() => self.method = list().map(String::from).collect(),
                "kernel" if self.kernel.is_empty() => self.kernel = vec![value.to_string()],
                "N" if self.n.is_empty() => self.n = list().map(|v| parse(key, v)).collect::<Result<_>>()?,
                "method" | "kernel" | "N" => {}
                "m" => fill(&mut self.m, parse(key, value)?),
                "cfl" => fill(&mut self.cfl, parse(key, value)?),
                "t-end" => fill(&mut self.t_end, parse(key, value)?),
                "tau" => fill(&mut self.tau, parse(key, value)?),
                "tau-r" => fill(&mut self.tau_r, parse(key, value)?),
                "R0" => fill(&mut self.r0, parse(key, value)?),
                "R1" => fill(&mut self.r1, parse(key, value)?),
                "sigma" => fill(&mut self.sigma, parse(key, value)?),
                "seed" => fill(&mut self.seed, parse(key, value)?),
                "out-dir" => fill(&mut self.out_dir, PathBuf::from(value)),
                "quad-points" => fill(&mut self.quad_points, parse(key, value)?),
                "record-stride" => fill(&mut self.record_stride, parse(key, value)?),
                "precision" => fill(&mut self.precision, value.to_string()),
                "delta" => fill(&mut self.delta, value.to_string()),
                "serial" => self.serial |= parse::<bool>(key, value)?,
                _ => return Err(Error::Config(format!("config line {}: unknown key '{key}'", lineno + 1))),
            }
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn problem_or(&self, default: ProblemName) -> Result<ProblemName> {
        self.problem.as_deref().map_or(Ok(default), str::parse)
    }

    pub fn methods_or(&self, default: &[Method]) -> Result<Vec<Method>> {
        if self.method.is_empty() {
            return Ok(default.to_vec());
        }
        self.method.iter().map(|m| m.parse()).collect()
    }

    pub fn kernels_or(&self, default: &[Kernel]) -> Result<Vec<Kernel>> {
        if self.kernel.is_empty() {
            return Ok(default.to_vec());
        }
        self.kernel.iter().map(|k| k.parse()).collect()
    }

    pub fn ns_or(&self, default: &[usize]) -> Vec<usize> {
        if self.n.is_empty() { default.to_vec() } else { self.n.clone() }
    }

    pub fn precision(&self) -> Result<EvalPrecision> {
        self.precision.as_deref().map_or(Ok(EvalPrecision::Auto), str::parse)
    }

    fn delta(&self) -> Result<DeltaKind> {
        match self.delta.as_deref() {
            None | Some("consistent") => Ok(DeltaKind::Consistent),
            Some("lumped") => Ok(DeltaKind::Lumped),
            Some(d) => Err(Error::Config(format!("unknown delta '{d}' (consistent | lumped)"))),
        }
    }

    pub fn execution(&self) -> rbf_advect::par::Execution {
        if self.serial { rbf_advect::par::Execution::Serial } else { rbf_advect::par::Execution::Parallel }
    }

    /// One validated configuration for every (method, kernel, N) combination.
    pub fn configs(
        &self,
        problem: ProblemName,
        methods: &[Method],
        kernels: &[Kernel],
        ns: &[usize],
        scatter: Option<ScatterConfig>,
    ) -> Result<Vec<RunConfig>> {
        let precision = self.precision()?;
        let delta = self.delta()?;
        let mut out = Vec::new();
        for &method in methods {
            for &kernel in kernels {
                for &n in ns {
                    let mut cfg = RunConfig::new(problem, method, kernel, n);
                    cfg.m = self.m;
                    cfg.cfl = self.cfl;
                    cfg.t_end = self.t_end;
                    if let Some(t) = self.tau {
                        cfg.tau_l = t;
                    }
                    if let Some(t) = self.tau_r {
                        cfg.tau_r = t;
                    }
                    if let Some(r) = self.r0 {
                        cfg.r0 = r;
                    }
                    if let Some(r) = self.r1 {
                        cfg.r1 = r;
                    }
                    if let Some(q) = self.quad_points {
                        cfg.quad_points = q;
                    }
                    if let Some(s) = self.record_stride {
                        if s == 0 {
                            return Err(Error::Config("record-stride must be at least 1".into()));
                        }
                        cfg.record_stride = s;
                    }
                    cfg.scatter = scatter;
                    cfg.precision = precision;
                    cfg.delta = delta;
                    cfg.exec = self.execution();
                    cfg.validate()?;
                    out.push(cfg);
                }
            }
        }
        Ok(out)
    }
}

fn fill<T>(slot: &mut Option<T>, v: T) {
    if slot.is_none() {
        *slot = Some(v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_fills_only_unset_options() {
        let mut c = Common { cfl: Some(0.05), ..Default::default() };
        c.apply_config("# study\nproblem = varcoeff\nN = 10, 20\ncfl = 0.2\nt_end = 1.5\nkernel = quintic\n")
            .unwrap();
        assert_eq!(c.problem.as_deref(), Some("varcoeff"));
        assert_eq!(c.n, vec![10, 20]);
        assert_eq!(c.cfl, Some(0.05));
        assert_eq!(c.t_end, Some(1.5));
        assert_eq!(c.kernels_or(&[]).unwrap(), vec![Kernel::QUINTIC]);
    }

    #[test]
    fn config_file_rejects_unknown_keys_and_bad_values() {
        assert!(Common::default().apply_config("colour = blue").is_err());
        assert!(Common::default().apply_config("cfl = fast").is_err());
        assert!(Common::default().apply_config("just words").is_err());
    }

    #[test]
    fn configs_are_validated_up_front() {
        let c = Common { tau: Some(-0.4), ..Default::default() };
        let err = c
            .configs(ProblemName::InflowBump, &[Method::Sat], &[Kernel::CUBIC], &[10], None)
            .unwrap_err();
        assert!(err.is_validation());
        let ok = Common::default()
            .configs(ProblemName::InflowBump, &[Method::Sat, Method::Usual], &[Kernel::CUBIC], &[10, 20], None)
            .unwrap();
        assert_eq!(ok.len(), 4);
    }
}
