//! Right-hand sides L(u) of the semidiscrete systems.

use serde::{Deserialize, Serialize};

use crate::correction::{self, CorrectionFunctions, CorrectionResiduals, CorrectionSolve};
use crate::error::{Error, Result};
use crate::interpolation::NodalBasis;
use crate::linalg::{self, DenseMatrix};
use crate::par::Execution;
use crate::quadrature::{self, MassVector, QuadGrid, QuadratureRule};

pub type ScalarData = fn(f64) -> f64;

/// Numerical flux for f(u) = a u.
pub fn upwind(a: f64, u_left: f64, u_right: f64) -> f64 {
    if a >= 0.0 {
        a * u_left
    } else {
        a * u_right
    }
}

/// Inflow data for a scalar 1D problem.
#[derive(Clone, Copy, Debug)]
pub enum BoundarySource {
    /// g(t) prescribed at the inflow boundary.
    Data(ScalarData),
    /// Inflow value taken from the interpolant at the outflow boundary.
    Periodic,
}

/// Discretization of the boundary Dirac delta in 1D penalty terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum DeltaKind {
    /// M⁻¹ψ(x_b) with M the Gram matrix: the Riesz representer of point evaluation.
    #[default]
    Consistent,
    /// H⁻¹e_b with the lumped mass h_n = ∫ψ_n; needs a center on the boundary.
    Lumped,
}

/// Rates of ∫u_N and ∫u_N² of the function-level semidiscretization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rates {
    pub mass: f64,
    pub energy: f64,
}

/// Shared 1D machinery: basis, differentiation matrix, mass data and
/// quadrature samples.
#[derive(Debug)]
pub struct Discretization1d {
    basis: NodalBasis,
    lower: f64,
    upper: f64,
    d: DenseMatrix,
    gram: DenseMatrix,
    mass: MassVector,
    psi_l: Vec<f64>,
    psi_r: Vec<f64>,
    grid: QuadGrid,
    psi_q: DenseMatrix,
    dpsi_q: DenseMatrix,
}

impl Discretization1d {
    pub fn new(basis: NodalBasis, lower: f64, upper: f64, rule: &QuadratureRule, exec: Execution) -> Result<Self> {
        Self::with_extra_breaks(basis, None, lower, upper, rule, exec)
    }

    fn with_extra_breaks(
        basis: NodalBasis,
        aux: Option<&NodalBasis>,
        lower: f64,
        upper: f64,
        rule: &QuadratureRule,
        exec: Execution,
    ) -> Result<Self> {
        if basis.dim() != 1 {
            return Err(Error::Dimension("Discretization1d needs a 1D basis".into()));
        }
        let grid = match aux {
            Some(a) => QuadGrid::aligned(&[&basis, a], &[lower], &[upper], rule),
            None => QuadGrid::aligned(&[&basis], &[lower], &[upper], rule),
        };
        let d = basis.differentiation_matrix(0, exec);
        let psi_q = basis.eval_matrix(grid.points(), exec);
        let dpsi_q = basis.deriv_matrix(grid.points(), 0, exec);
        let gram = quadrature::weighted_product(&psi_q, grid.weights(), &psi_q, exec);
        let mass = quadrature::mass_vector(&basis, &grid, exec);
        let psi_l = basis.psi(&[lower]);
        let psi_r = basis.psi(&[upper]);
        Ok(Self { basis, lower, upper, d, gram, mass, psi_l, psi_r, grid, psi_q, dpsi_q })
    }

    pub fn basis(&self) -> &NodalBasis {
        &self.basis
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn differentiation(&self) -> &DenseMatrix {
        &self.d
    }

    pub fn gram(&self) -> &DenseMatrix {
        &self.gram
    }

    pub fn mass(&self) -> &MassVector {
        &self.mass
    }

    pub fn grid(&self) -> &QuadGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn value_left(&self, u: &[f64]) -> f64 {
        linalg::dot(&self.psi_l, u)
    }

    pub fn value_right(&self, u: &[f64]) -> f64 {
        linalg::dot(&self.psi_r, u)
    }

    /// ∫u_N² = uᵀMu.
    pub fn energy(&self, u: &[f64]) -> f64 {
        linalg::dot(u, &self.gram.matvec(u))
    }

    /// ∫u_N = hᵀu.
    pub fn integral(&self, u: &[f64]) -> f64 {
        linalg::dot(&self.mass.h, u)
    }

    /// Index of the center sitting on the boundary, if any.
    pub fn boundary_node(&self, right: bool) -> Option<usize> {
        let c = self.basis.centers().coords();
        let (i, x) = if right { (c.len() - 1, self.upper) } else { (0, self.lower) };
        (c[i] == x).then_some(i)
    }

    pub fn delta(&self, kind: DeltaKind, right: bool) -> Result<Vec<f64>> {
        match kind {
            DeltaKind::Consistent => {
                let lu = linalg::lu_factor(&self.gram)?;
                let rhs = if right { &self.psi_r } else { &self.psi_l };
                linalg::solve(&lu, rhs)
            }
            DeltaKind::Lumped => {
                let i = self.boundary_node(right).ok_or_else(|| {
                    Error::Config("lumped delta needs a center on the boundary".into())
                })?;
                let mut e = vec![0.0; self.len()];
                e[i] = 1.0 / self.mass.h[i];
                Ok(e)
            }
        }
    }

    fn sample(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (self.psi_q.matvec(u), self.dpsi_q.matvec(u))
    }
}

/// Common interface of all semidiscretizations.
pub trait Semidiscretization: Send + Sync {
    /// Length of the state vector.
    fn state_len(&self) -> usize;
    fn rhs_into(&self, u: &[f64], t: f64, out: &mut [f64]);
    /// Re-imposes strongly enforced values after a completed step.
    fn constrain(&self, _u: &mut [f64], _t: f64) {}
    /// Largest characteristic speed.
    fn lambda_max(&self) -> f64;
    /// Minimal center spacing.
    fn spacing(&self) -> f64;
    /// ∫ of the squared interpolant, summed over components.
    fn energy(&self, u: &[f64]) -> f64;
    /// Function-level mass/energy rates where defined.
    fn rates(&self, _u: &[f64], _t: f64) -> Option<Rates> {
        None
    }
    /// (f_num_L, f_num_R) for flux-based schemes.
    fn boundary_fluxes(&self, _u: &[f64], _t: f64) -> Option<(f64, f64)> {
        None
    }

    fn rhs(&self, u: &[f64], t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.state_len()];
        self.rhs_into(u, t, &mut out);
        out
    }
}

fn inflow_values(disc: &Discretization1d, a: f64, source: BoundarySource, u: &[f64], t: f64) -> (f64, f64) {
    match source {
        BoundarySource::Data(g) => (g(t), g(t)),
        BoundarySource::Periodic => {
            let _ = a;
            (disc.value_right(u), disc.value_left(u))
        }
    }
}

/// Strong injection of the inflow value.
#[derive(Debug)]
pub struct Usual1d {
    disc: Discretization1d,
    a: f64,
    source: BoundarySource,
    inflow: usize,
    outflow: usize,
}

impl Usual1d {
    pub fn new(disc: Discretization1d, a: f64, source: BoundarySource) -> Result<Self> {
        let right = a < 0.0;
        let inflow = disc
            .boundary_node(right)
            .ok_or_else(|| Error::Config("strong injection needs a center on the inflow boundary".into()))?;
        let outflow = disc
            .boundary_node(!right)
            .unwrap_or(if right { 0 } else { disc.len() - 1 });
        Ok(Self { disc, a, source, inflow, outflow })
    }

    pub fn discretization(&self) -> &Discretization1d {
        &self.disc
    }

    fn injected(&self, u: &[f64], t: f64) -> f64 {
        match self.source {
            BoundarySource::Data(g) => g(t),
            BoundarySource::Periodic => u[self.outflow],
        }
    }
}

impl Semidiscretization for Usual1d {
    fn state_len(&self) -> usize {
        self.disc.len()
    }

    fn rhs_into(&self, u: &[f64], t: f64, out: &mut [f64]) {
        let mut v = u.to_vec();
        v[self.inflow] = self.injected(u, t);
        self.disc.d.matvec_into(&v, out);
        out.iter_mut().for_each(|o| *o *= -self.a);
        out[self.inflow] = 0.0;
    }

    fn constrain(&self, u: &mut [f64], t: f64) {
        u[self.inflow] = self.injected(u, t);
    }

    fn lambda_max(&self) -> f64 {
        self.a.abs()
    }

    fn spacing(&self) -> f64 {
        self.disc.basis.centers().spacing()
    }

    fn energy(&self, u: &[f64]) -> f64 {
        self.disc.energy(u)
    }

    fn rates(&self, u: &[f64], t: f64) -> Option<Rates> {
        let mut v = u.to_vec();
        v[self.inflow] = self.injected(u, t);
        let (uq, duq) = self.disc.sample(&v);
        let w = self.disc.grid.weights();
        let mass = -self.a * linalg::dot(w, &duq);
        let energy = -2.0 * self.a * uq.iter().zip(&duq).zip(w).map(|((x, y), w)| x * y * w).sum::<f64>();
        Some(Rates { mass, energy })
    }
}

/// SAT penalty at both ends.
#[derive(Debug)]
pub struct Sat1d {
    disc: Discretization1d,
    a: f64,
    tau_l: f64,
    tau_r: f64,
    delta_l: Vec<f64>,
    delta_r: Vec<f64>,
    source: BoundarySource,
}

/// τ_L < -1/2 for a > 0, τ_R > 1/2 for a < 0.
pub fn check_penalty(a: f64, tau_l: f64, tau_r: f64) -> Result<()> {
    if a > 0.0 && !(tau_l < -0.5) {
        return Err(Error::Stability(format!("tau_L = {tau_l} must be below -1/2")));
    }
    if a < 0.0 && !(tau_r > 0.5) {
        return Err(Error::Stability(format!("tau_R = {tau_r} must exceed 1/2")));
    }
    Ok(())
}

impl Sat1d {
    pub fn new(disc: Discretization1d, a: f64, tau_l: f64, tau_r: f64, delta: DeltaKind, source: BoundarySource) -> Result<Self> {
        check_penalty(a, tau_l, tau_r)?;
        let delta_l = disc.delta(delta, false)?;
        let delta_r = disc.delta(delta, true)?;
        Ok(Self { disc, a, tau_l, tau_r, delta_l, delta_r, source })
    }

    pub fn discretization(&self) -> &Discretization1d {
        &self.disc
    }

    /// Penalty amplitudes multiplying δ_L and δ_R.
    fn penalties(&self, u: &[f64], t: f64) -> (f64, f64, f64, f64) {
        let (gl, gr) = inflow_values(&self.disc, self.a, self.source, u, t);
        let (ul, ur) = (self.disc.value_left(u), self.disc.value_right(u));
        let pl = self.tau_l * self.a.max(0.0) * (ul - gl);
        let pr = self.tau_r * self.a.min(0.0) * (ur - gr);
        (pl, pr, ul, ur)
    }

    /// Upper bound on the energy rate from the boundary data at time t.
    pub fn energy_rate_bound(&self, t: f64) -> f64 {
        let g = match self.source {
            BoundarySource::Data(g) => g(t),
            BoundarySource::Periodic => return 0.0,
        };
        if self.a > 0.0 {
            -self.tau_l * self.tau_l * self.a * g * g / (1.0 + 2.0 * self.tau_l)
        } else {
            -self.tau_r * self.tau_r * self.a.abs() * g * g / (2.0 * self.tau_r - 1.0)
        }
    }
}

impl Semidiscretization for Sat1d {
    fn state_len(&self) -> usize {
        self.disc.len()
    }

    fn rhs_into(&self, u: &[f64], t: f64, out: &mut [f64]) {
        self.disc.d.matvec_into(u, out);
        let (pl, pr, _, _) = self.penalties(u, t);
        for ((o, dl), dr) in out.iter_mut().zip(&self.delta_l).zip(&self.delta_r) {
            *o = -self.a * *o + pl * dl + pr * dr;
        }
    }

    fn lambda_max(&self) -> f64 {
        self.a.abs()
    }

    fn spacing(&self) -> f64 {
        self.disc.basis.centers().spacing()
    }

    fn energy(&self, u: &[f64]) -> f64 {
        self.disc.energy(u)
    }

    fn rates(&self, u: &[f64], t: f64) -> Option<Rates> {
        let (uq, duq) = self.disc.sample(u);
        let w = self.disc.grid.weights();
        let (pl, pr, ul, ur) = self.penalties(u, t);
        let mass = -self.a * linalg::dot(w, &duq) + pl + pr;
        let vol = -2.0 * self.a * uq.iter().zip(&duq).zip(w).map(|((x, y), w)| x * y * w).sum::<f64>();
        Some(Rates { mass, energy: vol + 2.0 * (pl * ul + pr * ur) })
    }
}

/// Flux reconstruction with RBF correction functions.
#[derive(Debug)]
pub struct Fr1d {
    disc: Discretization1d,
    a: f64,
    corrections: CorrectionFunctions,
    residuals: CorrectionResiduals,
    dcl: Vec<f64>,
    dcr: Vec<f64>,
    dcl_q: Vec<f64>,
    dcr_q: Vec<f64>,
    source: BoundarySource,
}

impl Fr1d {
    /// Builds and verifies the corrections; refuses them if the defining
    /// conditions are violated beyond the conditioning-scaled tolerance.
    pub fn new(
        basis: NodalBasis,
        lower: f64,
        upper: f64,
        a: f64,
        source: BoundarySource,
        rule: &QuadratureRule,
        solver: CorrectionSolve,
        exec: Execution,
    ) -> Result<Self> {
        let aux = correction::auxiliary_basis(&basis, lower, upper, exec)?;
        let corrections = correction::build_corrections(&basis, aux, lower, upper, rule, solver, exec)?;
        let residuals = correction::verify_corrections(&corrections, &basis, rule, exec);
        if !residuals.passed() {
            return Err(Error::Correction {
                cond: corrections.cond_a(),
                context: format!(
                    "verification failed: residuals {:.2e}/{:.2e} above {:.2e}",
                    residuals.max_residual_cl, residuals.max_residual_cr, residuals.tolerance
                ),
            });
        }
        let disc = Discretization1d::with_extra_breaks(basis, Some(corrections.auxiliary()), lower, upper, rule, exec)?;
        let (dcl, dcr) = corrections.derivatives_at(disc.basis.centers().coords(), exec);
        let (dcl_q, dcr_q) = corrections.derivatives_at(disc.grid.points(), exec);
        Ok(Self { disc, a, corrections, residuals, dcl, dcr, dcl_q, dcr_q, source })
    }

    pub fn discretization(&self) -> &Discretization1d {
        &self.disc
    }

    pub fn corrections(&self) -> &CorrectionFunctions {
        &self.corrections
    }

    pub fn residuals(&self) -> &CorrectionResiduals {
        &self.residuals
    }

    /// Conservation tolerance max(1e-6, cond(A)·1e-13).
    pub fn conservation_tolerance(&self) -> f64 {
        self.residuals.tolerance
    }

    /// Jumps f_num - a u_N at both ends.
    fn jumps(&self, u: &[f64], t: f64) -> (f64, f64, f64, f64) {
        let (gl, gr) = inflow_values(&self.disc, self.a, self.source, u, t);
        let (ul, ur) = (self.disc.value_left(u), self.disc.value_right(u));
        let fl = upwind(self.a, gl, ul);
        let fr = upwind(self.a, ur, gr);
        (fl - self.a * ul, fr - self.a * ur, fl, fr)
    }
}

impl Semidiscretization for Fr1d {
    fn state_len(&self) -> usize {
        self.disc.len()
    }

    fn rhs_into(&self, u: &[f64], t: f64, out: &mut [f64]) {
        self.disc.d.matvec_into(u, out);
        let (jl, jr, _, _) = self.jumps(u, t);
        for ((o, cl), cr) in out.iter_mut().zip(&self.dcl).zip(&self.dcr) {
            *o = -self.a * *o - cl * jl - cr * jr;
        }
    }

    fn lambda_max(&self) -> f64 {
        self.a.abs()
    }

    fn spacing(&self) -> f64 {
        self.disc.basis.centers().spacing()
    }

    fn energy(&self, u: &[f64]) -> f64 {
        self.disc.energy(u)
    }

    fn rates(&self, u: &[f64], t: f64) -> Option<Rates> {
        let (uq, duq) = self.disc.sample(u);
        let (jl, jr, _, _) = self.jumps(u, t);
        let w = self.disc.grid.weights();
        let (mut mass, mut energy) = (0.0, 0.0);
        for q in 0..w.len() {
            let f = -self.a * duq[q] - self.dcl_q[q] * jl - self.dcr_q[q] * jr;
            mass += w[q] * f;
            energy += 2.0 * w[q] * uq[q] * f;
        }
        Some(Rates { mass, energy })
    }

    fn boundary_fluxes(&self, u: &[f64], t: f64) -> Option<(f64, f64)> {
        let (_, _, fl, fr) = self.jumps(u, t);
        Some((fl, fr))
    }
}

/// Boundary treatment for the variable-coefficient operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VarCoeffBoundary {
    Strong,
    Weak { tau: f64, delta: DeltaKind },
}

/// Skew-symmetric split α(a u)_x + (1-α)(a_x u + a u_x) with a left inflow
/// penalty or injection.
#[derive(Debug)]
pub struct VarCoeff1d {
    disc: Discretization1d,
    alpha: f64,
    a_nodes: Vec<f64>,
    da_nodes: Vec<f64>,
    a_left: f64,
    a_max: f64,
    penalty: Option<(f64, Vec<f64>)>,
    inflow: Option<usize>,
    g: ScalarData,
}

impl VarCoeff1d {
    pub fn new(
        disc: Discretization1d,
        a: ScalarData,
        da: ScalarData,
        alpha: f64,
        boundary: VarCoeffBoundary,
        g: ScalarData,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Config(format!("alpha_skew = {alpha} outside [0, 1]")));
        }
        let x = disc.basis.centers().coords().to_vec();
        let a_nodes: Vec<f64> = x.iter().map(|&x| a(x)).collect();
        let da_nodes: Vec<f64> = x.iter().map(|&x| da(x)).collect();
        let (lo, hi) = disc.bounds();
        let a_left = a(lo);
        let a_max = disc
            .grid
            .points()
            .iter()
            .chain([lo, hi].iter())
            .fold(0.0f64, |m, &x| m.max(a(x).abs()));
        let (penalty, inflow) = match boundary {
            VarCoeffBoundary::Weak { tau, delta } => {
                check_penalty(1.0, tau, 1.0)?;
                (Some((tau, disc.delta(delta, false)?)), None)
            }
            VarCoeffBoundary::Strong => {
                let node = if a_left > 0.0 {
                    Some(disc.boundary_node(false).ok_or_else(|| {
                        Error::Config("strong injection needs a center on the inflow boundary".into())
                    })?)
                } else {
                    None
                };
                (None, node)
            }
        };
        Ok(Self { disc, alpha, a_nodes, da_nodes, a_left, a_max, penalty, inflow, g })
    }

    pub fn discretization(&self) -> &Discretization1d {
        &self.disc
    }
}

impl Semidiscretization for VarCoeff1d {
    fn state_len(&self) -> usize {
        self.disc.len()
    }

    fn rhs_into(&self, u: &[f64], t: f64, out: &mut [f64]) {
        let mut v = u.to_vec();
        if let Some(i) = self.inflow {
            v[i] = (self.g)(t);
        }
        let au: Vec<f64> = v.iter().zip(&self.a_nodes).map(|(u, a)| u * a).collect();
        let d_au = self.disc.d.matvec(&au);
        let du = self.disc.d.matvec(&v);
        let al = self.alpha;
        for n in 0..out.len() {
            out[n] = -(al * d_au[n] + (1.0 - al) * (self.da_nodes[n] * v[n] + self.a_nodes[n] * du[n]));
        }
        if let Some((tau, delta)) = &self.penalty {
            let p = tau * self.a_left.max(0.0) * (self.disc.value_left(u) - (self.g)(t));
            if p != 0.0 {
                out.iter_mut().zip(delta).for_each(|(o, d)| *o += p * d);
            }
        }
        if let Some(i) = self.inflow {
            out[i] = 0.0;
        }
    }

    fn constrain(&self, u: &mut [f64], t: f64) {
        if let Some(i) = self.inflow {
            u[i] = (self.g)(t);
        }
    }

    fn lambda_max(&self) -> f64 {
        self.a_max
    }

    fn spacing(&self) -> f64 {
        self.disc.basis.centers().spacing()
    }

    fn energy(&self, u: &[f64]) -> f64 {
        self.disc.energy(u)
    }
}

/// Boundary data of the acoustic system: characteristic targets at x_L and x_R.
pub type SystemData = fn(f64) -> ([f64; 2], [f64; 2]);

/// SAT for u_t + c v_x = 0, v_t + c u_x = 0 with reflecting characteristic
/// boundary conditions w⁺ = R0 w⁻ + g0 at x_L and w⁻ = R1 w⁺ + g1 at x_R,
/// where w± = (u ± v)/√2.
#[derive(Debug)]
pub struct SatSystem1d {
    disc: Discretization1d,
    c: f64,
    r0: f64,
    r1: f64,
    delta_l: Vec<f64>,
    delta_r: Vec<f64>,
    data: SystemData,
    pi0: DenseMatrix,
    pi1: DenseMatrix,
}

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

impl SatSystem1d {
    pub fn new(disc: Discretization1d, c: f64, r0: f64, r1: f64, delta: DeltaKind, data: SystemData) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::Config(format!("wave speed c = {c} must be positive")));
        }
        for (name, r) in [("R0", r0), ("R1", r1)] {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::Stability(format!("{name} = {r} must lie in (0, 1)")));
            }
        }
        // Penalty matrices acting on (u, v) at the boundary, zero data:
        // left  p = -c X [[1, -R0], [0, 0]] Xᵀ U,  right p = -c X [[0, 0], [-R1, 1]] Xᵀ U.
        let x = DenseMatrix::from_rows(&[vec![SQRT_HALF, SQRT_HALF], vec![SQRT_HALF, -SQRT_HALF]])?;
        let xt = x.transpose();
        let e = Execution::Serial;
        let pi0 = x
            .matmul(&DenseMatrix::from_rows(&[vec![-c, c * r0], vec![0.0, 0.0]])?, e)?
            .matmul(&xt, e)?;
        let pi1 = x
            .matmul(&DenseMatrix::from_rows(&[vec![0.0, 0.0], vec![c * r1, -c]])?, e)?
            .matmul(&xt, e)?;
        let op = Self {
            delta_l: disc.delta(delta, false)?,
            delta_r: disc.delta(delta, true)?,
            disc,
            c,
            r0,
            r1,
            data,
            pi0,
            pi1,
        };
        let (e0, e1) = op.boundary_form_eigenvalues();
        if e0 > 1e-12 || e1 > 1e-12 {
            return Err(Error::Stability(format!(
                "boundary operators not negative semi-definite (max eigenvalues {e0:.3e}, {e1:.3e})"
            )));
        }
        Ok(op)
    }

    pub fn discretization(&self) -> &Discretization1d {
        &self.disc
    }

    pub fn boundary_operators(&self) -> (&DenseMatrix, &DenseMatrix) {
        (&self.pi0, &self.pi1)
    }

    /// Largest eigenvalues of the symmetric boundary forms ½A + sym(Π₀) at
    /// x_L and -½A + sym(Π₁) at x_R, A = [[0, c], [c, 0]].
    pub fn boundary_form_eigenvalues(&self) -> (f64, f64) {
        let top = |m: &DenseMatrix, sign: f64| {
            let a = m[(0, 0)];
            let d = m[(1, 1)];
            let b = 0.5 * (m[(0, 1)] + m[(1, 0)]) + sign * 0.5 * self.c;
            0.5 * (a + d) + (0.25 * (a - d).powi(2) + b * b).sqrt()
        };
        (top(&self.pi0, 1.0), top(&self.pi1, -1.0))
    }

    /// Penalty vectors in (u, v) space at both ends.
    fn penalties(&self, u: &[f64], v: &[f64], t: f64) -> ([f64; 2], [f64; 2]) {
        let (g0, g1) = (self.data)(t);
        let (ul, vl) = (self.disc.value_left(u), self.disc.value_left(v));
        let (ur, vr) = (self.disc.value_right(u), self.disc.value_right(v));
        let (wp0, wm0) = (SQRT_HALF * (ul + vl), SQRT_HALF * (ul - vl));
        let (wp1, wm1) = (SQRT_HALF * (ur + vr), SQRT_HALF * (ur - vr));
        let s0 = -self.c * (wp0 - self.r0 * wm0 - g0[0]);
        let s1 = -self.c * (wm1 - self.r1 * wp1 - g1[1]);
        ([SQRT_HALF * s0, SQRT_HALF * s0], [SQRT_HALF * s1, -SQRT_HALF * s1])
    }
}

impl Semidiscretization for SatSystem1d {
    fn state_len(&self) -> usize {
        2 * self.disc.len()
    }

    fn rhs_into(&self, s: &[f64], t: f64, out: &mut [f64]) {
        let n = self.disc.len();
        let (u, v) = s.split_at(n);
        let (p0, p1) = self.penalties(u, v, t);
        let (ou, ov) = out.split_at_mut(n);
        self.disc.d.matvec_into(v, ou);
        self.disc.d.matvec_into(u, ov);
        for i in 0..n {
            let (dl, dr) = (self.delta_l[i], self.delta_r[i]);
            ou[i] = -self.c * ou[i] + p0[0] * dl + p1[0] * dr;
            ov[i] = -self.c * ov[i] + p0[1] * dl + p1[1] * dr;
        }
    }

    fn lambda_max(&self) -> f64 {
        self.c
    }

    fn spacing(&self) -> f64 {
        self.disc.basis.centers().spacing()
    }

    fn energy(&self, s: &[f64]) -> f64 {
        let n = self.disc.len();
        self.disc.energy(&s[..n]) + self.disc.energy(&s[n..])
    }

    fn rates(&self, s: &[f64], t: f64) -> Option<Rates> {
        let n = self.disc.len();
        let (u, v) = s.split_at(n);
        let (uq, duq) = self.disc.sample(u);
        let (vq, dvq) = self.disc.sample(v);
        let w = self.disc.grid.weights();
        let (p0, p1) = self.penalties(u, v, t);
        let mut energy = 0.0;
        for q in 0..w.len() {
            energy += -2.0 * self.c * w[q] * (uq[q] * dvq[q] + vq[q] * duq[q]);
        }
        let (ul, vl) = (self.disc.value_left(u), self.disc.value_left(v));
        let (ur, vr) = (self.disc.value_right(u), self.disc.value_right(v));
        energy += 2.0 * (p0[0] * ul + p0[1] * vl + p1[0] * ur + p1[1] * vr);
        let mass = -self.c * (linalg::dot(w, &dvq) + linalg::dot(w, &duq)) + p0[0] + p0[1] + p1[0] + p1[1];
        Some(Rates { mass, energy })
    }
}

/// Inflow data on the boundary of a 2D box.
pub type BoundaryData2d = fn(f64, &[f64]) -> f64;

/// Boundary edges of the unit-square style box, with outward normals.
const EDGES: [([f64; 2], usize, bool); 4] = [
    ([-1.0, 0.0], 0, false), // west: x = lower
    ([1.0, 0.0], 0, true),   // east: x = upper
    ([0.0, -1.0], 1, false), // south: y = lower
    ([0.0, 1.0], 1, true),   // north: y = upper
];

/// Shared 2D machinery.
#[derive(Debug)]
pub struct Discretization2d {
    basis: NodalBasis,
    lower: [f64; 2],
    upper: [f64; 2],
    dx: DenseMatrix,
    dy: DenseMatrix,
    mass: MassVector,
    grid: QuadGrid,
}

impl Discretization2d {
    pub fn new(basis: NodalBasis, lower: [f64; 2], upper: [f64; 2], rule: &QuadratureRule, exec: Execution) -> Result<Self> {
        if basis.dim() != 2 {
            return Err(Error::Dimension("Discretization2d needs a 2D basis".into()));
        }
        let grid = QuadGrid::aligned(&[&basis], &lower, &upper, rule);
        let dx = basis.differentiation_matrix(0, exec);
        let dy = basis.differentiation_matrix(1, exec);
        let mass = quadrature::mass_vector(&basis, &grid, exec);
        Ok(Self { basis, lower, upper, dx, dy, mass, grid })
    }

    pub fn basis(&self) -> &NodalBasis {
        &self.basis
    }

    pub fn mass(&self) -> &MassVector {
        &self.mass
    }

    pub fn grid(&self) -> &QuadGrid {
        &self.grid
    }

    pub fn differentiation(&self) -> (&DenseMatrix, &DenseMatrix) {
        (&self.dx, &self.dy)
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Inflow nodes with Σ over their inflow edges of a·n (negative).
    fn inflow_nodes(&self, a: [f64; 2]) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            let p = self.basis.centers().point(i);
            let mut an = 0.0;
            for (normal, axis, upper) in EDGES {
                let edge = if upper { self.upper[axis] } else { self.lower[axis] };
                let dot = a[0] * normal[0] + a[1] * normal[1];
                if p[axis] == edge && dot < 0.0 {
                    an += dot;
                }
            }
            if an < 0.0 {
                out.push((i, an));
            }
        }
        out
    }

    fn advect(&self, a: [f64; 2], u: &[f64], out: &mut [f64]) {
        self.dx.matvec_into(u, out);
        out.iter_mut().for_each(|o| *o *= -a[0]);
        if a[1] != 0.0 {
            let dyu = self.dy.matvec(u);
            out.iter_mut().zip(dyu).for_each(|(o, d)| *o -= a[1] * d);
        }
    }

    /// ∫u_N² by quadrature of the interpolant.
    pub fn energy(&self, u: &[f64], exec: Execution) -> f64 {
        quadrature::energy(&self.basis, u, &self.grid, exec)
    }
}

/// Strong injection on the inflow edges.
#[derive(Debug)]
pub struct Usual2d {
    disc: Discretization2d,
    a: [f64; 2],
    inflow: Vec<usize>,
    g: BoundaryData2d,
    exec: Execution,
}

impl Usual2d {
    pub fn new(disc: Discretization2d, a: [f64; 2], g: BoundaryData2d, exec: Execution) -> Self {
        let inflow = disc.inflow_nodes(a).into_iter().map(|(i, _)| i).collect();
        Self { disc, a, inflow, g, exec }
    }

    pub fn discretization(&self) -> &Discretization2d {
        &self.disc
    }

    pub fn inflow_nodes(&self) -> &[usize] {
        &self.inflow
    }
}

impl Semidiscretization for Usual2d {
    fn state_len(&self) -> usize {
        self.disc.len()
    }

    fn rhs_into(&self, u: &[f64], t: f64, out: &mut [f64]) {
        let mut v = u.to_vec();
        self.constrain(&mut v, t);
        self.disc.advect(self.a, &v, out);
        for &i in &self.inflow {
            out[i] = 0.0;
        }
    }

    fn constrain(&self, u: &mut [f64], t: f64) {
        for &i in &self.inflow {
            u[i] = (self.g)(t, self.disc.basis.centers().point(i));
        }
    }

    fn lambda_max(&self) -> f64 {
        self.a[0].hypot(self.a[1])
    }

    fn spacing(&self) -> f64 {
        self.disc.basis.centers().spacing()
    }

    fn energy(&self, u: &[f64]) -> f64 {
        self.disc.energy(u, self.exec)
    }
}

/// SAT with Π = ½a on the inflow edges: -½ (a·n)⁻ H⁻¹ (u - g).
#[derive(Debug)]
pub struct Sat2d {
    disc: Discretization2d,
    a: [f64; 2],
    /// (node, ½ Σ a·n / h_n)
    penalties: Vec<(usize, f64)>,
    g: BoundaryData2d,
    exec: Execution,
}

impl Sat2d {
    pub fn new(disc: Discretization2d, a: [f64; 2], g: BoundaryData2d, exec: Execution) -> Result<Self> {
        let mut penalties = Vec::new();
        for (i, an) in disc.inflow_nodes(a) {
            let h = disc.mass.h[i];
            if h == 0.0 {
                return Err(Error::Singular(format!("zero mass h_{i} at an inflow node")));
            }
            penalties.push((i, 0.5 * an / h));
        }
        Ok(Self { disc, a, penalties, g, exec })
    }

    pub fn discretization(&self) -> &Discretization2d {
        &self.disc
    }

    /// Admissibility 2Π·n ≤ a·n on each inflow edge for Π = ½a.
    pub fn admissible(&self) -> bool {
        EDGES.iter().all(|(n, _, _)| {
            let an = self.a[0] * n[0] + self.a[1] * n[1];
            an >= 0.0 || 2.0 * (0.5 * an) <= an
        })
    }

    pub fn penalties(&self) -> &[(usize, f64)] {
        &self.penalties
    }
}

impl Semidiscretization for Sat2d {
    fn state_len(&self) -> usize {
        self.disc.len()
    }

    fn rhs_into(&self, u: &[f64], t: f64, out: &mut [f64]) {
        self.disc.advect(self.a, u, out);
        for &(i, k) in &self.penalties {
            out[i] += k * (u[i] - (self.g)(t, self.disc.basis.centers().point(i)));
        }
    }

    fn lambda_max(&self) -> f64 {
        self.a[0].hypot(self.a[1])
    }

    fn spacing(&self) -> f64 {
        self.disc.basis.centers().spacing()
    }

    fn energy(&self, u: &[f64]) -> f64 {
        self.disc.energy(u, self.exec)
    }
}

/// One of the assembled semidiscretizations.
#[derive(Debug)]
pub enum SemidiscreteOperator {
    Usual1d(Usual1d),
    Fr1d(Fr1d),
    Sat1d(Sat1d),
    VarCoeff1d(VarCoeff1d),
    SatSystem1d(SatSystem1d),
    Usual2d(Usual2d),
    Sat2d(Sat2d),
}

impl SemidiscreteOperator {
    pub fn inner(&self) -> &dyn Semidiscretization {
        match self {
            Self::Usual1d(o) => o,
            Self::Fr1d(o) => o,
            Self::Sat1d(o) => o,
            Self::VarCoeff1d(o) => o,
            Self::SatSystem1d(o) => o,
            Self::Usual2d(o) => o,
            Self::Sat2d(o) => o,
        }
    }

    /// The nodal basis of the primal centers.
    pub fn basis(&self) -> &NodalBasis {
        match self {
            Self::Usual1d(o) => o.disc.basis(),
            Self::Fr1d(o) => o.disc.basis(),
            Self::Sat1d(o) => o.disc.basis(),
            Self::VarCoeff1d(o) => o.disc.basis(),
            Self::SatSystem1d(o) => o.disc.basis(),
            Self::Usual2d(o) => o.disc.basis(),
            Self::Sat2d(o) => o.disc.basis(),
        }
    }

    pub fn quad_grid(&self) -> &QuadGrid {
        match self {
            Self::Usual1d(o) => o.disc.grid(),
            Self::Fr1d(o) => o.disc.grid(),
            Self::Sat1d(o) => o.disc.grid(),
            Self::VarCoeff1d(o) => o.disc.grid(),
            Self::SatSystem1d(o) => o.disc.grid(),
            Self::Usual2d(o) => o.disc.grid(),
            Self::Sat2d(o) => o.disc.grid(),
        }
    }

    pub fn mass(&self) -> &MassVector {
        match self {
            Self::Usual1d(o) => o.disc.mass(),
            Self::Fr1d(o) => o.disc.mass(),
            Self::Sat1d(o) => o.disc.mass(),
            Self::VarCoeff1d(o) => o.disc.mass(),
            Self::SatSystem1d(o) => o.disc.mass(),
            Self::Usual2d(o) => o.disc.mass(),
            Self::Sat2d(o) => o.disc.mass(),
        }
    }
}

impl Semidiscretization for SemidiscreteOperator {
    fn state_len(&self) -> usize {
        self.inner().state_len()
    }
    fn rhs_into(&self, u: &[f64], t: f64, out: &mut [f64]) {
        self.inner().rhs_into(u, t, out)
    }
    fn constrain(&self, u: &mut [f64], t: f64) {
        self.inner().constrain(u, t)
    }
    fn lambda_max(&self) -> f64 {
        self.inner().lambda_max()
    }
    fn spacing(&self) -> f64 {
        self.inner().spacing()
    }
    fn energy(&self, u: &[f64]) -> f64 {
        self.inner().energy(u)
    }
    fn rates(&self, u: &[f64], t: f64) -> Option<Rates> {
        self.inner().rates(u, t)
    }
    fn boundary_fluxes(&self, u: &[f64], t: f64) -> Option<(f64, f64)> {
        self.inner().boundary_fluxes(u, t)
    }
}

pub fn rhs_usual_1d(op: &Usual1d, u: &[f64], t: f64) -> Vec<f64> {
    op.rhs(u, t)
}

pub fn rhs_fr_1d(op: &Fr1d, u: &[f64], t: f64) -> Vec<f64> {
    op.rhs(u, t)
}

pub fn rhs_sat_1d(op: &Sat1d, u: &[f64], t: f64) -> Vec<f64> {
    op.rhs(u, t)
}

pub fn rhs_varcoeff_1d(op: &VarCoeff1d, u: &[f64], t: f64) -> Vec<f64> {
    op.rhs(u, t)
}

pub fn rhs_sat_system(op: &SatSystem1d, state: &[f64], t: f64) -> Vec<f64> {
    op.rhs(state, t)
}

pub fn rhs_sat_2d(op: &Sat2d, u: &[f64], t: f64) -> Vec<f64> {
    op.rhs(u, t)
}

pub fn rhs_usual_2d(op: &Usual2d, u: &[f64], t: f64) -> Vec<f64> {
    op.rhs(u, t)
}
