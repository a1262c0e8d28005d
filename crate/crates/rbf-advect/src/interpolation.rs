//! Augmented RBF interpolation: Vandermonde assembly, cardinal basis,
//! evaluation and differentiation matrices in one and two dimensions.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::linalg::{self, DenseMatrix, LuFactorization};
use crate::par::Execution;
use crate::xprec::{Dd, Dot2, RowAccumulator};

/// Rank threshold (relative to σ_max) for the unisolvency check.
pub const UNISOLVENCY_TOL: f64 = 1e-10;

/// Interpolation centers in one or two dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct CenterSet {
    dim: usize,
    coords: Vec<f64>,
    spacing: f64,
}

impl CenterSet {
    /// Strictly increasing points on a line.
    pub fn new_1d(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.iter().any(|x| !x.is_finite()) {
            return Err(Error::DegenerateCenters("centers must be finite and nonempty".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::DegenerateCenters("1D centers must be strictly increasing".into()));
        }
        let spacing = points.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        Ok(Self { dim: 1, coords: points, spacing })
    }

    pub fn new_2d(points: &[[f64; 2]]) -> Result<Self> {
        if points.is_empty() || points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::DegenerateCenters("centers must be finite and nonempty".into()));
        }
        let mut spacing = f64::INFINITY;
        for (i, p) in points.iter().enumerate() {
            for q in &points[i + 1..] {
                let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
                if d == 0.0 {
                    return Err(Error::DegenerateCenters(format!("duplicate center {p:?}")));
                }
                spacing = spacing.min(d);
            }
        }
        Ok(Self { dim: 2, coords: points.iter().flatten().copied().collect(), spacing })
    }

    /// `n` equidistant points on `[a, b]` including both ends.
    pub fn equidistant_1d(a: f64, b: f64, n: usize) -> Result<Self> {
        if n < 2 || b <= a {
            return Err(Error::Config(format!("need n >= 2 points on a nonempty interval, got n={n} on [{a}, {b}]")));
        }
        let h = (b - a) / (n - 1) as f64;
        let mut pts: Vec<f64> = (0..n).map(|i| a + h * i as f64).collect();
        pts[n - 1] = b;
        Self::new_1d(pts)
    }

    /// Tensor grid of `nx * ny` points including the edges; x varies fastest.
    pub fn tensor_grid_2d(lower: [f64; 2], upper: [f64; 2], nx: usize, ny: usize) -> Result<Self> {
        let xs = Self::equidistant_1d(lower[0], upper[0], nx)?;
        let ys = Self::equidistant_1d(lower[1], upper[1], ny)?;
        let mut coords = Vec::with_capacity(2 * nx * ny);
        for &y in ys.coords() {
            for &x in xs.coords() {
                coords.push(x);
                coords.push(y);
            }
        }
        Ok(Self { dim: 2, coords, spacing: xs.spacing.min(ys.spacing) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Flat coordinates, point-major.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Smallest distance between two distinct centers.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
}

/// Polynomials of total degree `< m` in coordinates mapped affinely to `[-1, 1]^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialSpace {
    dim: usize,
    degree_bound: usize,
    lower: [f64; 2],
    upper: [f64; 2],
    exponents: Vec<[u32; 2]>,
}

impl PolynomialSpace {
    pub fn new(dim: usize, degree_bound: usize, lower: &[f64], upper: &[f64]) -> Result<Self> {
        if !(dim == 1 || dim == 2) || lower.len() != dim || upper.len() != dim {
            return Err(Error::Dimension(format!("polynomial space of dimension {dim}")));
        }
        if lower.iter().zip(upper).any(|(l, u)| !(u > l)) {
            return Err(Error::Config("empty scaling box".into()));
        }
        let mut exponents = Vec::new();
        for deg in 0..degree_bound as u32 {
            if dim == 1 {
                exponents.push([deg, 0]);
            } else {
                for ey in 0..=deg {
                    exponents.push([deg - ey, ey]);
                }
            }
        }
        let mut lo = [0.0; 2];
        let mut hi = [1.0; 2];
        lo[..dim].copy_from_slice(lower);
        hi[..dim].copy_from_slice(upper);
        Ok(Self { dim, degree_bound, lower: lo, upper: hi, exponents })
    }

    pub fn degree_bound(&self) -> usize {
        self.degree_bound
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Q = binomial(d + m - 1, d).
    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    fn scaled(&self, x: &[f64], axis: usize) -> Dd {
        let mid = 0.5 * (self.lower[axis] + self.upper[axis]);
        Dd::diff(x[axis], mid).scale(self.jacobian(axis))
    }

    fn jacobian(&self, axis: usize) -> f64 {
        2.0 / (self.upper[axis] - self.lower[axis])
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let mut t = vec![Dd::ZERO; out.len()];
        self.eval_into_dd(x, &mut t);
        for (o, v) in out.iter_mut().zip(t) {
            *o = v.to_f64();
        }
    }

    pub fn eval_deriv_into(&self, x: &[f64], axis: usize, out: &mut [f64]) {
        let mut t = vec![Dd::ZERO; out.len()];
        self.eval_deriv_into_dd(x, axis, &mut t);
        for (o, v) in out.iter_mut().zip(t) {
            *o = v.to_f64();
        }
    }

    pub(crate) fn eval_into_dd(&self, x: &[f64], out: &mut [Dd]) {
        let z: Vec<Dd> = (0..self.dim).map(|a| self.scaled(x, a)).collect();
        for (o, e) in out.iter_mut().zip(&self.exponents) {
            *o = (0..self.dim).fold(Dd::from(1.0), |acc, a| acc * z[a].powi(e[a]));
        }
    }

    pub(crate) fn eval_deriv_into_dd(&self, x: &[f64], axis: usize, out: &mut [Dd]) {
        let z: Vec<Dd> = (0..self.dim).map(|a| self.scaled(x, a)).collect();
        for (o, e) in out.iter_mut().zip(&self.exponents) {
            *o = (0..self.dim).fold(Dd::from(1.0), |acc, a| {
                let p = e[a];
                if a != axis {
                    acc * z[a].powi(p)
                } else if p == 0 {
                    Dd::ZERO
                } else {
                    acc * z[a].powi(p - 1).scale(f64::from(p) * self.jacobian(a))
                }
            });
        }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// |a - b| in double-double; exact up to the final rounding in 1D.
fn distance_dd(a: &[f64], b: &[f64]) -> Dd {
    if a.len() == 1 {
        return Dd::diff(a[0], b[0]).abs();
    }
    a.iter()
        .zip(b)
        .fold(Dd::ZERO, |s, (x, y)| {
            let d = Dd::diff(*x, *y);
            s + d * d
        })
        .sqrt()
}

fn check_pairing(centers: &CenterSet, kernel: &Kernel, poly: &PolynomialSpace) -> Result<()> {
    kernel.validate()?;
    if poly.dim() != centers.dim() {
        return Err(Error::Dimension("polynomial space and centers differ in dimension".into()));
    }
    if poly.degree_bound() < kernel.cpd_order() {
        return Err(Error::Config(format!(
            "degree bound m = {} below the CPD order {} of the {kernel} kernel",
            poly.degree_bound(),
            kernel.cpd_order()
        )));
    }
    let (n, q) = (centers.len(), poly.len());
    if n < q {
        return Err(Error::DegenerateCenters(format!("N = {n} centers cannot determine Q = {q} polynomial terms")));
    }
    if q > 0 {
        let p = DenseMatrix::from_fn(q, n, |i, j| {
            let mut row = vec![0.0; q];
            poly.eval_into(centers.point(j), &mut row);
            row[i]
        });
        let r = linalg::rank(&p, UNISOLVENCY_TOL);
        if r < q {
            return Err(Error::DegenerateCenters(format!(
                "centers are not unisolvent for degree < {}: rank(P) = {r} < {q}",
                poly.degree_bound()
            )));
        }
    }
    Ok(())
}

/// The block matrix [[Φ, Pᵀ], [P, 0]].
pub fn assemble_vandermonde(centers: &CenterSet, kernel: &Kernel, poly: &PolynomialSpace) -> Result<DenseMatrix> {
    check_pairing(centers, kernel, poly)?;
    Ok(vandermonde_unchecked(centers, kernel, poly))
}

fn vandermonde_unchecked(centers: &CenterSet, kernel: &Kernel, poly: &PolynomialSpace) -> DenseMatrix {
    let w = centers.len() + poly.len();
    let v = vandermonde_dd(centers, kernel, poly);
    DenseMatrix::from_fn(w, w, |i, j| v[i * w + j].to_f64())
}

/// Row-major double-double Vandermonde matrix.
fn vandermonde_dd(centers: &CenterSet, kernel: &Kernel, poly: &PolynomialSpace) -> Vec<Dd> {
    let (n, q) = (centers.len(), poly.len());
    let w = n + q;
    let mut v = vec![Dd::ZERO; w * w];
    let mut prow = vec![Dd::ZERO; q];
    for i in 0..n {
        for j in 0..n {
            v[i * w + j] = kernel.phi_dd(distance_dd(centers.point(i), centers.point(j)));
        }
        poly.eval_into_dd(centers.point(i), &mut prow);
        for (a, &p) in prow.iter().enumerate() {
            v[i * w + n + a] = p;
            v[(n + a) * w + i] = p;
        }
    }
    v
}

/// Iterative refinement steps for the cardinal coefficients.
const REFINEMENT_STEPS: usize = 4;

/// Cardinal functions are summed in double-double once max|coef|·ε, the
/// cancellation error of plain summation, exceeds this. Kept below the 1e-8
/// cardinality tolerance; above it plain evaluation of quintic N = 40 misses.
pub const EXTENDED_EVAL_THRESHOLD: f64 = 5e-9;

/// Arithmetic used when summing cardinal functions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EvalPrecision {
    /// Double-double when max|coef|·ε exceeds [`EXTENDED_EVAL_THRESHOLD`].
    #[default]
    Auto,
    Double,
    Extended,
}

impl std::str::FromStr for EvalPrecision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "double" => Ok(Self::Double),
            "extended" => Ok(Self::Extended),
            _ => Err(Error::Config(format!("unknown precision '{s}' (auto, double, extended)"))),
        }
    }
}

impl std::fmt::Display for EvalPrecision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Auto => "auto",
            Self::Double => "double",
            Self::Extended => "extended",
        })
    }
}

enum Row {
    Plain(Vec<f64>),
    Extended(Vec<Dd>),
}

/// Cardinal functions ψ_k with ψ_k(x_n) = δ_kn.
#[derive(Debug)]
pub struct NodalBasis {
    centers: CenterSet,
    kernel: Kernel,
    poly: PolynomialSpace,
    /// Column k holds (α^(k), β^(k)); `coef_lo` carries the double-double tail.
    coef: DenseMatrix,
    coef_lo: DenseMatrix,
    extended: bool,
    vandermonde: DenseMatrix,
    lu: LuFactorization,
    cond: OnceLock<f64>,
}

pub fn build_nodal_basis(
    centers: CenterSet,
    kernel: Kernel,
    poly: PolynomialSpace,
    exec: Execution,
) -> Result<NodalBasis> {
    check_pairing(&centers, &kernel, &poly)?;
    let (n, q) = (centers.len(), poly.len());
    let w = n + q;
    let vdd = vandermonde_dd(&centers, &kernel, &poly);
    let v = DenseMatrix::from_fn(w, w, |i, j| vdd[i * w + j].to_f64());
    let lu = linalg::lu_factor(&v)?;
    if lu.is_singular() {
        return Err(Error::Singular(format!(
            "Vandermonde matrix for kernel {kernel}, N = {n}, m = {}",
            poly.degree_bound()
        )));
    }
    let identity = DenseMatrix::from_fn(w, n, |i, j| f64::from(u8::from(i == j)));
    let mut coef = linalg::solve_many(&lu, &identity, exec)?;
    let mut coef_lo = DenseMatrix::zeros(w, n);
    // The coefficients grow like h^(1-2k), so plain double storage alone leaves
    // the cardinal conditions violated by |coef|·eps. Refine in double-double.
    let mut best = f64::INFINITY;
    for _ in 0..REFINEMENT_STEPS {
        let residual = DenseMatrix::from_row_fn(exec, w, n, |i, out| {
            let mut acc = RowAccumulator::new(n);
            if i < n {
                acc.add_at(i, 1.0);
            }
            for (l, a) in vdd[i * w..(i + 1) * w].iter().enumerate() {
                if a.hi != 0.0 {
                    acc.add_scaled(-*a, coef.row(l), coef_lo.row(l));
                }
            }
            acc.values_into(out);
        });
        let size = residual.max_abs();
        if !(size < 0.5 * best) {
            break;
        }
        best = size;
        let delta = linalg::solve_many(&lu, &residual, exec)?;
        let prev = (coef.clone(), coef_lo.clone());
        for i in 0..w {
            for j in 0..n {
                let c = Dd { hi: coef[(i, j)], lo: coef_lo[(i, j)] } + Dd::from(delta[(i, j)]);
                coef[(i, j)] = c.hi;
                coef_lo[(i, j)] = c.lo;
            }
        }
        if !coef.as_slice().iter().all(|c| c.is_finite()) {
            (coef, coef_lo) = prev;
            break;
        }
    }
    let nb = NodalBasis { centers, kernel, poly, coef, coef_lo, extended: false, vandermonde: v, lu, cond: OnceLock::new() };
    Ok(nb.with_precision(EvalPrecision::Auto))
}

impl NodalBasis {
    /// Convenience constructor: kernel's default degree bound unless `m` given,
    /// polynomials scaled to the box `[lower, upper]`.
    pub fn new(
        centers: CenterSet,
        kernel: Kernel,
        m: Option<usize>,
        lower: &[f64],
        upper: &[f64],
        exec: Execution,
    ) -> Result<Self> {
        let poly = PolynomialSpace::new(centers.dim(), m.unwrap_or(kernel.default_degree_bound()), lower, upper)?;
        build_nodal_basis(centers, kernel, poly, exec)
    }

    pub fn centers(&self) -> &CenterSet {
        &self.centers
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn poly(&self) -> &PolynomialSpace {
        &self.poly
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.centers.dim()
    }

    pub fn coefficient_matrix(&self) -> &DenseMatrix {
        &self.coef
    }

    pub fn vandermonde(&self) -> &DenseMatrix {
        &self.vandermonde
    }

    pub fn factorization(&self) -> &LuFactorization {
        &self.lu
    }

    /// cond(V), computed on first use.
    pub fn vandermonde_condition(&self) -> f64 {
        *self.cond.get_or_init(|| linalg::condition_number(&self.vandermonde).unwrap_or(f64::INFINITY))
    }

    fn check_point(&self, x: &[f64]) {
        assert_eq!(x.len(), self.dim(), "point dimension");
    }

    /// [φ(|x - x_1|), ..., φ(|x - x_N|), p_1(x), ..., p_Q(x)]
    pub fn feature_row(&self, x: &[f64], out: &mut [f64]) {
        self.check_point(x);
        let n = self.len();
        for (j, o) in out[..n].iter_mut().enumerate() {
            *o = self.kernel.phi_unchecked(distance(x, self.centers.point(j)));
        }
        self.poly.eval_into(x, &mut out[n..]);
    }

    /// ∂/∂x_axis of [`Self::feature_row`].
    pub fn feature_row_deriv(&self, x: &[f64], axis: usize, out: &mut [f64]) {
        self.check_point(x);
        let n = self.len();
        for (j, o) in out[..n].iter_mut().enumerate() {
            let c = self.centers.point(j);
            *o = self.kernel.d1_over_r(distance(x, c)) * (x[axis] - c[axis]);
        }
        self.poly.eval_deriv_into(x, axis, &mut out[n..]);
    }

    fn feature_row_dd(&self, x: &[f64], out: &mut [Dd]) {
        self.check_point(x);
        let n = self.len();
        for (j, o) in out[..n].iter_mut().enumerate() {
            *o = self.kernel.phi_dd(distance_dd(x, self.centers.point(j)));
        }
        self.poly.eval_into_dd(x, &mut out[n..]);
    }

    fn feature_row_deriv_dd(&self, x: &[f64], axis: usize, out: &mut [Dd]) {
        self.check_point(x);
        let n = self.len();
        for (j, o) in out[..n].iter_mut().enumerate() {
            let c = self.centers.point(j);
            let r = distance_dd(x, c);
            *o = self.kernel.d1_over_r_dd(r) * Dd::diff(x[axis], c[axis]);
        }
        self.poly.eval_deriv_into_dd(x, axis, &mut out[n..]);
    }

    /// Feature row in the precision the basis evaluates in.
    fn row(&self, x: &[f64], axis: Option<usize>) -> Row {
        let w = self.coef.rows();
        if self.extended {
            let mut row = vec![Dd::ZERO; w];
            match axis {
                None => self.feature_row_dd(x, &mut row),
                Some(a) => self.feature_row_deriv_dd(x, a, &mut row),
            }
            Row::Extended(row)
        } else {
            let mut row = vec![0.0; w];
            match axis {
                None => self.feature_row(x, &mut row),
                Some(a) => self.feature_row_deriv(x, a, &mut row),
            }
            Row::Plain(row)
        }
    }

    /// (ψ_1(x), ..., ψ_N(x))
    pub fn psi(&self, x: &[f64]) -> Vec<f64> {
        self.combine_row(&self.row(x, None))
    }

    /// (∂ψ_1(x), ..., ∂ψ_N(x)) along `axis`.
    pub fn dpsi(&self, x: &[f64], axis: usize) -> Vec<f64> {
        self.combine_row(&self.row(x, Some(axis)))
    }

    fn coef_dd(&self, i: usize, j: usize) -> Dd {
        Dd { hi: self.coef[(i, j)], lo: self.coef_lo[(i, j)] }
    }

    /// Whether evaluation runs in double-double.
    pub fn extended_precision(&self) -> bool {
        self.extended
    }

    pub fn with_precision(mut self, p: EvalPrecision) -> Self {
        self.extended = match p {
            EvalPrecision::Auto => self.coef.max_abs() * f64::EPSILON > EXTENDED_EVAL_THRESHOLD,
            EvalPrecision::Double => false,
            EvalPrecision::Extended => true,
        };
        self
    }

    /// rowᵀ·coef
    fn combine_row(&self, row: &Row) -> Vec<f64> {
        match row {
            Row::Plain(row) => {
                let mut acc = vec![0.0; self.len()];
                for (k, r) in row.iter().enumerate() {
                    if *r != 0.0 {
                        for (a, c) in acc.iter_mut().zip(self.coef.row(k)) {
                            *a += r * c;
                        }
                    }
                }
                acc
            }
            Row::Extended(row) => {
                let mut acc = RowAccumulator::new(self.len());
                for (k, r) in row.iter().enumerate() {
                    if r.hi != 0.0 {
                        acc.add_scaled(*r, self.coef.row(k), self.coef_lo.row(k));
                    }
                }
                acc.values()
            }
        }
    }

    /// Σ_q w_q ψ_k(p_q) for every k, summed as coefᵀ·(Σ_q w_q features(p_q)).
    pub fn weighted_sums(&self, points: &[f64], weights: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let w = self.coef.rows();
        let mut f = RowAccumulator::new(w);
        let mut row = vec![Dd::ZERO; w];
        let mut hi = vec![0.0; w];
        let mut lo = vec![0.0; w];
        for (q, wq) in weights.iter().enumerate() {
            self.feature_row_dd(&points[q * d..(q + 1) * d], &mut row);
            for ((h, l), r) in hi.iter_mut().zip(lo.iter_mut()).zip(&row) {
                (*h, *l) = (r.hi, r.lo);
            }
            f.add_scaled(Dd::from(*wq), &hi, &lo);
        }
        let f = f.values_dd();
        let mut acc = RowAccumulator::new(self.len());
        for (k, fk) in f.iter().enumerate() {
            acc.add_scaled(*fk, self.coef.row(k), self.coef_lo.row(k));
        }
        acc.values()
    }

    /// Matrix with entries ψ_k(p_i) for flat point list `points`.
    pub fn eval_matrix(&self, points: &[f64], exec: Execution) -> DenseMatrix {
        self.sample_matrix(points, None, exec)
    }

    /// Matrix with entries ∂ψ_k(p_i)/∂x_axis.
    pub fn deriv_matrix(&self, points: &[f64], axis: usize, exec: Execution) -> DenseMatrix {
        self.sample_matrix(points, Some(axis), exec)
    }

    fn sample_matrix(&self, points: &[f64], axis: Option<usize>, exec: Execution) -> DenseMatrix {
        let d = self.dim();
        assert_eq!(points.len() % d, 0, "flat point list");
        DenseMatrix::from_row_fn(exec, points.len() / d, self.len(), |i, out| {
            let row = self.row(&points[i * d..(i + 1) * d], axis);
            out.copy_from_slice(&self.combine_row(&row));
        })
    }

    /// D with D_nk = ∂ψ_k(x_n)/∂x_axis.
    pub fn differentiation_matrix(&self, axis: usize, exec: Execution) -> DenseMatrix {
        self.deriv_matrix(self.centers.coords(), axis, exec)
    }

    /// Interpolant of the nodal values `u`.
    pub fn interpolant(&self, u: &[f64]) -> Interpolant<'_> {
        assert_eq!(u.len(), self.len(), "nodal vector length");
        let c: Vec<Dd> = (0..self.coef.rows())
            .map(|i| {
                let mut acc = Dot2::default();
                for (j, v) in u.iter().enumerate() {
                    acc.add_dd_prod(self.coef_dd(i, j), Dd::from(*v));
                }
                acc.value_dd()
            })
            .collect();
        Interpolant { basis: self, coef: c }
    }

    pub fn evaluate(&self, u: &[f64], x: &[f64]) -> f64 {
        linalg::dot(&self.psi(x), u)
    }

    pub fn evaluate_derivative(&self, u: &[f64], x: &[f64], axis: usize) -> f64 {
        linalg::dot(&self.dpsi(x, axis), u)
    }

    /// max_{k,n} |ψ_k(x_n) - δ_kn|
    pub fn cardinal_error(&self) -> f64 {
        let e = self.eval_matrix(self.centers.coords(), Execution::Serial);
        let mut worst: f64 = 0.0;
        for i in 0..e.rows() {
            for j in 0..e.cols() {
                worst = worst.max((e[(i, j)] - f64::from(u8::from(i == j))).abs());
            }
        }
        worst
    }
}

pub fn evaluate(nb: &NodalBasis, u: &[f64], x: &[f64]) -> f64 {
    nb.evaluate(u, x)
}

pub fn evaluate_derivative(nb: &NodalBasis, u: &[f64], x: &[f64], axis: usize) -> f64 {
    nb.evaluate_derivative(u, x, axis)
}

pub fn differentiation_matrix(nb: &NodalBasis, axis: usize, exec: Execution) -> DenseMatrix {
    nb.differentiation_matrix(axis, exec)
}

/// u_N(x) = Σ α_n φ(|x - x_n|) + Σ β_i p_i(x).
#[derive(Clone, Debug)]
pub struct Interpolant<'a> {
    basis: &'a NodalBasis,
    /// (α, β) in double-double.
    coef: Vec<Dd>,
}

impl Interpolant<'_> {
    pub fn alpha(&self) -> Vec<f64> {
        self.coef[..self.basis.len()].iter().map(|c| c.to_f64()).collect()
    }

    pub fn beta(&self) -> Vec<f64> {
        self.coef[self.basis.len()..].iter().map(|c| c.to_f64()).collect()
    }

    fn combine(&self, row: &Row) -> f64 {
        match row {
            Row::Plain(row) => row.iter().zip(&self.coef).map(|(r, c)| r * c.hi).sum(),
            Row::Extended(row) => {
                let mut acc = Dot2::default();
                for (r, c) in row.iter().zip(&self.coef) {
                    acc.add_dd_prod(*r, *c);
                }
                acc.value()
            }
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.combine(&self.basis.row(x, None))
    }

    pub fn derivative(&self, x: &[f64], axis: usize) -> f64 {
        self.combine(&self.basis.row(x, Some(axis)))
    }

    /// Values at a flat list of points.
    pub fn evaluate_many(&self, points: &[f64], exec: Execution) -> Vec<f64> {
        let d = self.basis.dim();
        crate::par::map_range(exec, points.len() / d, |i| self.evaluate(&points[i * d..(i + 1) * d]))
    }

    /// ‖P α‖∞, the matching-constraint residual.
    pub fn matching_residual(&self) -> f64 {
        let q = self.basis.poly.len();
        let mut row = vec![Dd::ZERO; q];
        let mut acc = vec![Dot2::default(); q];
        for (j, a) in self.coef[..self.basis.len()].iter().enumerate() {
            self.basis.poly.eval_into_dd(self.basis.centers.point(j), &mut row);
            for (s, p) in acc.iter_mut().zip(&row) {
                s.add_dd_prod(*p, *a);
            }
        }
        acc.iter().fold(0.0, |m, s| m.max(s.value().abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn basis_1d(n: usize, kernel: Kernel, m: usize) -> NodalBasis {
        let c = CenterSet::equidistant_1d(0.0, 1.0, n).unwrap();
        NodalBasis::new(c, kernel, Some(m), &[0.0], &[1.0], Execution::Serial).unwrap()
    }

    #[test]
    fn tiny_vandermonde_matrices() {
        let poly0 = PolynomialSpace::new(1, 0, &[0.0], &[1.0]).unwrap();
        let one = CenterSet::new_1d(vec![0.5]).unwrap();
        let cubic = Kernel::CUBIC;
        // m = 0 is below the cubic CPD order, so go through the unchecked path.
        assert_eq!(vandermonde_unchecked(&one, &cubic, &poly0).as_slice(), &[0.0]);
        let two = CenterSet::new_1d(vec![0.0, 1.0]).unwrap();
        assert_eq!(vandermonde_unchecked(&two, &cubic, &poly0).as_slice(), &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(assemble_vandermonde(&two, &cubic, &poly0), Err(Error::Config(_))));
    }

    #[test]
    fn vandermonde_is_symmetric() {
        let c = CenterSet::new_1d(vec![0.0, 0.13, 0.5, 0.71, 1.0]).unwrap();
        let p = PolynomialSpace::new(1, 3, &[0.0], &[1.0]).unwrap();
        let v = assemble_vandermonde(&c, &Kernel::QUINTIC, &p).unwrap();
        assert_eq!(v, v.transpose());
    }

    #[test]
    fn polynomial_dimension() {
        assert_eq!(PolynomialSpace::new(1, 3, &[0.0], &[1.0]).unwrap().len(), 3);
        assert_eq!(PolynomialSpace::new(2, 3, &[0.0, 0.0], &[1.0, 1.0]).unwrap().len(), 6);
        assert_eq!(PolynomialSpace::new(2, 0, &[0.0, 0.0], &[1.0, 1.0]).unwrap().len(), 0);
    }

    #[test]
    fn non_unisolvent_centers_rejected() {
        // Points on a single line cannot determine the quadratics in 2D.
        let c = CenterSet::new_2d(&[[0.0, 0.0], [0.5, 0.0], [1.0, 0.0], [0.25, 0.0], [0.75, 0.0], [0.1, 0.0]]).unwrap();
        let p = PolynomialSpace::new(2, 3, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!(matches!(assemble_vandermonde(&c, &Kernel::QUINTIC, &p), Err(Error::DegenerateCenters(_))));
    }

    #[test]
    fn cardinality_and_partition_of_unity() {
        for (k, m) in [(Kernel::CUBIC, 2), (Kernel::QUINTIC, 3)] {
            let nb = basis_1d(20, k, m);
            assert!(nb.cardinal_error() < 1e-8);
            for i in 0..20 {
                let x = (i as f64 * 0.377).fract();
                let s: f64 = nb.psi(&[x]).iter().sum();
                assert_abs_diff_eq!(s, 1.0, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn linear_reproduction_on_five_points() {
        let nb = basis_1d(5, Kernel::CUBIC, 2);
        let u: Vec<f64> = nb.centers().coords().to_vec();
        assert_abs_diff_eq!(nb.evaluate(&u, &[0.37]), 0.37, epsilon = 1e-8);
        assert_abs_diff_eq!(nb.evaluate_derivative(&u, &[0.37], 0), 1.0, epsilon = 1e-7);
        let w: Vec<f64> = u.iter().map(|x| (3.0 * x).exp()).collect();
        let it = nb.interpolant(&w);
        assert!(it.matching_residual() <= 1e-8 * linalg::norm_inf(&it.alpha()));
    }

    #[test]
    fn differentiation_matrix_annihilates_constants() {
        let nb = basis_1d(12, Kernel::QUINTIC, 3);
        let d = nb.differentiation_matrix(0, Execution::Serial);
        for v in d.matvec(&[1.0; 12]) {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-8);
        }
        for v in d.matvec(nb.centers().coords()) {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-7);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let nb = basis_1d(40, Kernel::CUBIC, 2);
        let u: Vec<f64> = nb.centers().coords().iter().map(|x| (2.0 * std::f64::consts::PI * x).sin()).collect();
        let h = 1e-6;
        let fd = (nb.evaluate(&u, &[0.5 + h]) - nb.evaluate(&u, &[0.5 - h])) / (2.0 * h);
        assert_abs_diff_eq!(nb.evaluate_derivative(&u, &[0.5], 0), fd, epsilon = 1e-5);
    }

    #[test]
    fn two_dimensional_basis() {
        let c = CenterSet::tensor_grid_2d([0.0, 0.0], [1.0, 1.0], 5, 4).unwrap();
        assert_eq!(c.len(), 20);
        assert_abs_diff_eq!(c.spacing(), 0.25, epsilon = 1e-15);
        let nb = NodalBasis::new(c, Kernel::CUBIC, None, &[0.0, 0.0], &[1.0, 1.0], Execution::Serial).unwrap();
        assert!(nb.cardinal_error() < 1e-8);
        let u: Vec<f64> = (0..20).map(|i| 2.0 * nb.centers().point(i)[0] - nb.centers().point(i)[1]).collect();
        assert_abs_diff_eq!(nb.evaluate(&u, &[0.3, 0.6]), 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(nb.evaluate_derivative(&u, &[0.3, 0.6], 0), 2.0, epsilon = 1e-7);
        assert_abs_diff_eq!(nb.evaluate_derivative(&u, &[0.3, 0.6], 1), -1.0, epsilon = 1e-7);
    }

    #[test]
    fn degree_bound_below_cpd_order_rejected() {
        let c = CenterSet::equidistant_1d(0.0, 1.0, 6).unwrap();
        let r = NodalBasis::new(c, Kernel::QUINTIC, Some(2), &[0.0], &[1.0], Execution::Serial);
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
