//! Correction functions c_L, c_R for the flux-reconstruction scheme.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interpolation::{CenterSet, EvalPrecision, NodalBasis};
use crate::linalg::{self, DenseMatrix};
use crate::par::Execution;
use crate::quadrature::{self, QuadGrid, QuadratureRule};

/// How the (N+2)x(N+2) correction system is solved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
pub enum CorrectionSolve {
    /// Partial-pivoting LU; the pivots decide the component along the null space.
    #[default]
    Lu,
    /// Minimum-norm solve discarding singular values below `rel_tol * σ_max`.
    TruncatedSvd { rel_tol: f64 },
}

/// Residuals of the defining conditions of c_L and c_R.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionResiduals {
    /// max over the boundary rows and max_k |⟨ψ_k, c_L'⟩ + ψ_k(x_L)|
    pub max_residual_cl: f64,
    /// max over the boundary rows and max_k |⟨ψ_k, c_R'⟩ - ψ_k(x_R)|
    pub max_residual_cr: f64,
    /// max(1e-6, cond(A) * 1e-13)
    pub tolerance: f64,
}

impl CorrectionResiduals {
    pub fn passed(&self) -> bool {
        self.max_residual_cl <= self.tolerance && self.max_residual_cr <= self.tolerance
    }
}

pub fn residual_tolerance(cond_a: f64) -> f64 {
    (cond_a * 1e-13).max(1e-6)
}

#[derive(Debug)]
pub struct CorrectionFunctions {
    aux: NodalBasis,
    gamma_l: Vec<f64>,
    gamma_r: Vec<f64>,
    matrix: DenseMatrix,
    cond_a: f64,
    lu_flagged_singular: bool,
    lower: f64,
    upper: f64,
}

/// Auxiliary basis on N+2 equidistant centers including both ends.
pub fn auxiliary_basis(nb: &NodalBasis, lower: f64, upper: f64, exec: Execution) -> Result<NodalBasis> {
    let centers = CenterSet::equidistant_1d(lower, upper, nb.len() + 2)?;
    let precision = if nb.extended_precision() { EvalPrecision::Extended } else { EvalPrecision::Double };
    Ok(NodalBasis::new(centers, nb.kernel(), Some(nb.poly().degree_bound()), &[lower], &[upper], exec)?.with_precision(precision))
}

/// Assembles the correction matrix: rows ψ̃_j(x_L), ψ̃_j(x_R), ⟨ψ_k, ψ̃_j'⟩.
pub fn correction_matrix(nb: &NodalBasis, aux: &NodalBasis, grid: &QuadGrid, lower: f64, upper: f64, exec: Execution) -> DenseMatrix {
    let s = quadrature::inner_product_matrix(nb, aux, grid, exec);
    let m = aux.len();
    let mut a = DenseMatrix::zeros(m, m);
    a.row_mut(0).copy_from_slice(&aux.psi(&[lower]));
    a.row_mut(1).copy_from_slice(&aux.psi(&[upper]));
    for k in 0..nb.len() {
        a.row_mut(k + 2).copy_from_slice(s.row(k));
    }
    a
}

pub fn build_corrections(
    nb: &NodalBasis,
    aux: NodalBasis,
    lower: f64,
    upper: f64,
    rule: &QuadratureRule,
    solver: CorrectionSolve,
    exec: Execution,
) -> Result<CorrectionFunctions> {
    if nb.dim() != 1 || aux.dim() != 1 {
        return Err(Error::Dimension("correction functions are one-dimensional".into()));
    }
    let n = nb.len();
    if aux.len() != n + 2 {
        return Err(Error::Config(format!("auxiliary basis needs {} centers, has {}", n + 2, aux.len())));
    }
    let ac = aux.centers().coords();
    if ac[0] != lower || ac[n + 1] != upper {
        return Err(Error::Config("auxiliary centers must include both boundary points".into()));
    }
    let grid = QuadGrid::aligned(&[nb, &aux], &[lower], &[upper], rule);
    let a = correction_matrix(nb, &aux, &grid, lower, upper, exec);
    let cond_a = linalg::condition_number(&a)?;
    let psi_l = nb.psi(&[lower]);
    let psi_r = nb.psi(&[upper]);
    let mut rhs_l = vec![1.0, 0.0];
    rhs_l.extend(psi_l.iter().map(|v| -v));
    let mut rhs_r = vec![0.0, 1.0];
    rhs_r.extend(psi_r.iter().copied());
    let context = || format!("kernel {}, N = {n}, m = {}", nb.kernel(), nb.poly().degree_bound());
    let (gamma_l, gamma_r, flagged) = match solver {
        CorrectionSolve::Lu => {
            let lu = linalg::lu_factor(&a)?;
            if lu.is_singular() {
                return Err(Error::Correction { cond: cond_a, context: format!("{}; LU pivot ratio {:.2e}", context(), lu.min_pivot_ratio()) });
            }
            (linalg::solve(&lu, &rhs_l)?, linalg::solve(&lu, &rhs_r)?, false)
        }
        CorrectionSolve::TruncatedSvd { rel_tol } => {
            (linalg::tsvd_solve(&a, &rhs_l, rel_tol)?, linalg::tsvd_solve(&a, &rhs_r, rel_tol)?, false)
        }
    };
    if gamma_l.iter().chain(&gamma_r).any(|v| !v.is_finite()) {
        return Err(Error::Correction { cond: cond_a, context: format!("{}; non-finite coefficients", context()) });
    }
    Ok(CorrectionFunctions { aux, gamma_l, gamma_r, matrix: a, cond_a, lu_flagged_singular: flagged, lower, upper })
}

impl CorrectionFunctions {
    pub fn auxiliary(&self) -> &NodalBasis {
        &self.aux
    }

    pub fn gamma_l(&self) -> &[f64] {
        &self.gamma_l
    }

    pub fn gamma_r(&self) -> &[f64] {
        &self.gamma_r
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn cond_a(&self) -> f64 {
        self.cond_a
    }

    pub fn lu_flagged_singular(&self) -> bool {
        self.lu_flagged_singular
    }

    pub fn c_l(&self, x: f64) -> f64 {
        linalg::dot(&self.aux.psi(&[x]), &self.gamma_l)
    }

    pub fn c_r(&self, x: f64) -> f64 {
        linalg::dot(&self.aux.psi(&[x]), &self.gamma_r)
    }

    /// (c_L'(p), c_R'(p)) at each point of `points`.
    pub fn derivatives_at(&self, points: &[f64], exec: Execution) -> (Vec<f64>, Vec<f64>) {
        let d = self.aux.deriv_matrix(points, 0, exec);
        (d.matvec(&self.gamma_l), d.matvec(&self.gamma_r))
    }
}

/// Re-evaluates every defining condition by direct quadrature of c_L', c_R'.
pub fn verify_corrections(cf: &CorrectionFunctions, nb: &NodalBasis, rule: &QuadratureRule, exec: Execution) -> CorrectionResiduals {
    let (lo, hi) = (cf.lower, cf.upper);
    let grid = QuadGrid::aligned(&[nb, &cf.aux], &[lo], &[hi], rule);
    let (dl, dr) = cf.derivatives_at(grid.points(), exec);
    let psi = nb.eval_matrix(grid.points(), exec);
    let wl: Vec<f64> = dl.iter().zip(grid.weights()).map(|(d, w)| d * w).collect();
    let wr: Vec<f64> = dr.iter().zip(grid.weights()).map(|(d, w)| d * w).collect();
    let il = psi.vecmat(&wl);
    let ir = psi.vecmat(&wr);
    let psi_l = nb.psi(&[lo]);
    let psi_r = nb.psi(&[hi]);
    let mut rl = (cf.c_l(lo) - 1.0).abs().max(cf.c_l(hi).abs());
    let mut rr = cf.c_r(lo).abs().max((cf.c_r(hi) - 1.0).abs());
    for k in 0..nb.len() {
        rl = rl.max((il[k] + psi_l[k]).abs());
        rr = rr.max((ir[k] - psi_r[k]).abs());
    }
    CorrectionResiduals { max_residual_cl: rl, max_residual_cr: rr, tolerance: residual_tolerance(cf.cond_a) }
}
