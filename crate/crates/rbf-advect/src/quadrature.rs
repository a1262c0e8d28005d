//! Composite Gauss–Legendre rules aligned with the interpolation centers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interpolation::NodalBasis;
use crate::linalg::DenseMatrix;
use crate::par::{self, Execution};

pub const MAX_GAUSS_POINTS: usize = 64;

/// Points per chunk in parallel reductions; fixed so sums do not depend on
/// the thread count.
const CHUNK: usize = 512;

/// Gauss–Legendre nodes (ascending) and weights on [-1, 1].
pub fn gauss_legendre_nodes(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(1..=MAX_GAUSS_POINTS).contains(&n) {
        return Err(Error::Domain(format!("Gauss-Legendre order {n} outside 1..={MAX_GAUSS_POINTS}")));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess for the i-th largest root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A Gauss–Legendre rule applied on `panels` equal subpanels of every
/// interval between consecutive breakpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    panels: usize,
    points_per_panel: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::new(1, 10).expect("default rule")
    }
}

impl QuadratureRule {
    pub fn new(panels: usize, points_per_panel: usize) -> Result<Self> {
        if panels == 0 {
            return Err(Error::Config("quadrature needs at least one panel".into()));
        }
        let (nodes, weights) = gauss_legendre_nodes(points_per_panel)?;
        Ok(Self { panels, points_per_panel, nodes, weights })
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    pub fn points_per_panel(&self) -> usize {
        self.points_per_panel
    }

    pub fn reference_nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn reference_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same rule with the panel count doubled.
    pub fn refined(&self) -> Self {
        Self { panels: 2 * self.panels, ..self.clone() }
    }

    /// Nodes and weights over sorted breakpoints.
    pub fn composite(&self, breaks: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::new();
        let mut ws = Vec::new();
        for w in breaks.windows(2) {
            let h = (w[1] - w[0]) / self.panels as f64;
            for p in 0..self.panels {
                let a = w[0] + h * p as f64;
                let mid = a + 0.5 * h;
                for (z, wt) in self.nodes.iter().zip(&self.weights) {
                    xs.push(mid + 0.5 * h * z);
                    ws.push(0.5 * h * wt);
                }
            }
        }
        (xs, ws)
    }
}

/// Composite rule over `panels` equal subintervals of [a, b].
pub fn integrate_1d(f: impl Fn(f64) -> f64, a: f64, b: f64, rule: &QuadratureRule) -> f64 {
    let (xs, ws) = rule.composite(&[a, b]);
    xs.iter().zip(&ws).map(|(x, w)| w * f(*x)).sum()
}

/// Realized quadrature points and weights over a box, in 1D or 2D.
#[derive(Clone, Debug)]
pub struct QuadGrid {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadGrid {
    pub fn line(breaks: &[f64], rule: &QuadratureRule) -> Self {
        let (points, weights) = rule.composite(breaks);
        Self { dim: 1, points, weights }
    }

    /// Tensor product; x varies fastest.
    pub fn tensor(xbreaks: &[f64], ybreaks: &[f64], rule: &QuadratureRule) -> Self {
        let (xs, wx) = rule.composite(xbreaks);
        let (ys, wy) = rule.composite(ybreaks);
        let mut points = Vec::with_capacity(2 * xs.len() * ys.len());
        let mut weights = Vec::with_capacity(xs.len() * ys.len());
        for (y, vy) in ys.iter().zip(&wy) {
            for (x, vx) in xs.iter().zip(&wx) {
                points.push(*x);
                points.push(*y);
                weights.push(vx * vy);
            }
        }
        Self { dim: 2, points, weights }
    }

    /// Panels aligned with every center coordinate of every basis plus the
    /// box edges.
    pub fn aligned(bases: &[&NodalBasis], lower: &[f64], upper: &[f64], rule: &QuadratureRule) -> Self {
        let dim = lower.len();
        let breaks: Vec<Vec<f64>> = (0..dim)
            .map(|axis| {
                let mut b = vec![lower[axis], upper[axis]];
                for nb in bases {
                    for i in 0..nb.len() {
                        b.push(nb.centers().point(i)[axis]);
                    }
                }
                b.retain(|x| *x >= lower[axis] && *x <= upper[axis]);
                b.sort_by(f64::total_cmp);
                b.dedup();
                b
            })
            .collect();
        if dim == 1 {
            Self::line(&breaks[0], rule)
        } else {
            Self::tensor(&breaks[0], &breaks[1], rule)
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Σ w_q f(x_q), chunked for parallel evaluation with a fixed summation order.
    pub fn integrate(&self, exec: Execution, f: impl Fn(&[f64]) -> f64 + Sync + Send) -> f64 {
        let chunks = self.len().div_ceil(CHUNK);
        par::map_range(exec, chunks, |c| {
            let r = c * CHUNK..((c + 1) * CHUNK).min(self.len());
            r.map(|q| self.weights[q] * f(self.point(q))).sum::<f64>()
        })
        .into_iter()
        .sum()
    }

    /// Σ w_q g(x_q) for vector-valued g of length `len`.
    pub fn integrate_vec(
        &self,
        exec: Execution,
        len: usize,
        g: impl Fn(&[f64], &mut [f64]) + Sync + Send,
    ) -> Vec<f64> {
        let chunks = self.len().div_ceil(CHUNK);
        let parts = par::map_range(exec, chunks, |c| {
            let mut acc = vec![0.0; len];
            let mut buf = vec![0.0; len];
            for q in c * CHUNK..((c + 1) * CHUNK).min(self.len()) {
                g(self.point(q), &mut buf);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += self.weights[q] * b;
                }
            }
            acc
        });
        let mut total = vec![0.0; len];
        for p in parts {
            for (t, v) in total.iter_mut().zip(p) {
                *t += v;
            }
        }
        total
    }
}

/// Σ_q a[q,k] w_q b[q,j] for sample matrices `a`, `b` sharing rows.
pub fn weighted_product(a: &DenseMatrix, w: &[f64], b: &DenseMatrix, exec: Execution) -> DenseMatrix {
    assert_eq!(a.rows(), w.len());
    assert_eq!(b.rows(), w.len());
    let at = a.transpose();
    DenseMatrix::from_row_fn(exec, a.cols(), b.cols(), |k, out| {
        for (q, (&akq, &wq)) in at.row(k).iter().zip(w).enumerate() {
            let s = akq * wq;
            if s != 0.0 {
                for (o, bv) in out.iter_mut().zip(b.row(q)) {
                    *o += s * bv;
                }
            }
        }
    })
}

/// ⟨ψ_k, ψ̃_j'⟩ for one pair, on panels aligned with both center sets.
pub fn inner_product_deriv(
    nb: &NodalBasis,
    k: usize,
    other: &NodalBasis,
    j: usize,
    lower: f64,
    upper: f64,
    rule: &QuadratureRule,
) -> f64 {
    let grid = QuadGrid::aligned(&[nb, other], &[lower], &[upper], rule);
    grid.integrate(Execution::Serial, |x| nb.psi(x)[k] * other.dpsi(x, 0)[j])
}

/// S with S_kj = ⟨ψ_k, ψ̃_j'⟩.
pub fn inner_product_matrix(nb: &NodalBasis, other: &NodalBasis, grid: &QuadGrid, exec: Execution) -> DenseMatrix {
    let psi = nb.eval_matrix(grid.points(), exec);
    let dpsi = other.deriv_matrix(grid.points(), 0, exec);
    weighted_product(&psi, grid.weights(), &dpsi, exec)
}

/// M with M_kj = ∫ψ_k ψ_j.
pub fn gram_matrix(nb: &NodalBasis, grid: &QuadGrid, exec: Execution) -> DenseMatrix {
    let psi = nb.eval_matrix(grid.points(), exec);
    weighted_product(&psi, grid.weights(), &psi, exec)
}

/// h_n = ∫ψ_n together with the indices where h_n ≤ 0.
#[derive(Clone, Debug, PartialEq)]
pub struct MassVector {
    pub h: Vec<f64>,
    pub nonpositive: Vec<usize>,
}

pub fn mass_vector(nb: &NodalBasis, grid: &QuadGrid, exec: Execution) -> MassVector {
    let h = if nb.extended_precision() {
        nb.weighted_sums(grid.points(), grid.weights())
    } else {
        // ∫ of the feature row, then combined with the cardinal coefficients.
        let width = nb.coefficient_matrix().rows();
        let f = grid.integrate_vec(exec, width, |x, out| nb.feature_row(x, out));
        nb.coefficient_matrix().vecmat(&f)
    };
    let nonpositive = h.iter().enumerate().filter(|(_, v)| **v <= 0.0).map(|(i, _)| i).collect();
    MassVector { h, nonpositive }
}

/// ∫ u_N² over the grid.
pub fn energy(nb: &NodalBasis, u: &[f64], grid: &QuadGrid, exec: Execution) -> f64 {
    let it = nb.interpolant(u);
    grid.integrate(exec, |x| it.evaluate(x).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interpolation::CenterSet;
    use crate::kernels::Kernel;
    use approx::assert_abs_diff_eq;

    #[test]
    fn low_order_rules() {
        let (x, w) = gauss_legendre_nodes(1).unwrap();
        assert_eq!((x, w), (vec![0.0], vec![2.0]));
        let (x, w) = gauss_legendre_nodes(2).unwrap();
        assert_abs_diff_eq!(x[1], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(x[0], -1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-15);
        let (x, w) = gauss_legendre_nodes(5).unwrap();
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert_abs_diff_eq!(s, 2.0 / 9.0, epsilon = 1e-14);
        assert!(gauss_legendre_nodes(0).is_err());
        assert!(gauss_legendre_nodes(65).is_err());
    }

    #[test]
    fn high_order_rules_are_exact() {
        for n in [10, 20, 33, 64] {
            let (x, w) = gauss_legendre_nodes(n).unwrap();
            assert!(w.iter().all(|w| *w > 0.0));
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
            let deg = 2 * n - 2;
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert_abs_diff_eq!(s, 2.0 / (deg as f64 + 1.0), epsilon = 1e-13);
        }
    }

    #[test]
    fn composite_integrals() {
        let r = QuadratureRule::default();
        assert_abs_diff_eq!(integrate_1d(|_| 1.0, 0.0, 1.0, &r), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(integrate_1d(|x| x.powi(3), 0.0, 1.0, &r), 0.25, epsilon = 1e-14);
        let r16 = QuadratureRule::new(16, 10).unwrap();
        let s = integrate_1d(|x| (2.0 * std::f64::consts::PI * x).sin().powi(4), 0.0, 1.0, &r16);
        assert_abs_diff_eq!(s, 3.0 / 8.0, epsilon = 1e-10);
    }

    #[test]
    fn mass_vector_symmetry_and_sum() {
        let c = CenterSet::new_1d(vec![0.25, 0.75]).unwrap();
        let nb = NodalBasis::new(c, Kernel::Multiquadric { epsilon: 1.0 }, Some(1), &[0.0], &[1.0], Execution::Serial)
            .unwrap();
        let g = QuadGrid::aligned(&[&nb], &[0.0], &[1.0], &QuadratureRule::default());
        let h = mass_vector(&nb, &g, Execution::Serial).h;
        assert_abs_diff_eq!(h[0], h[1], epsilon = 1e-14);
        assert_abs_diff_eq!(h[0] + h[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn energy_of_simple_states() {
        let c = CenterSet::equidistant_1d(0.0, 1.0, 9).unwrap();
        let nb = NodalBasis::new(c, Kernel::CUBIC, None, &[0.0], &[1.0], Execution::Serial).unwrap();
        let g = QuadGrid::aligned(&[&nb], &[0.0], &[1.0], &QuadratureRule::default());
        assert_eq!(energy(&nb, &[0.0; 9], &g, Execution::Serial), 0.0);
        assert_abs_diff_eq!(energy(&nb, &[1.0; 9], &g, Execution::Serial), 1.0, epsilon = 1e-12);
    }
}
