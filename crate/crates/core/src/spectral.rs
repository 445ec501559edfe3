//! Laplacian eigendecomposition, the regularized spectral basis, and effective dimension.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::Laplacian;
use crate::linalg::{dot, Matrix};
use crate::scalar::Scalar;

/// Stopping rule for the cyclic Jacobi eigensolver.
#[derive(Debug, Clone, Copy)]
pub struct JacobiOptions {
    /// Target for the Frobenius norm of the off-diagonal part.
    ///
    /// The effective threshold is `max(tolerance, 10 * eps * ||A||_F)`, which only
    /// differs from `tolerance` when the scalar type cannot resolve it.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for JacobiOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_sweeps: 100,
        }
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending, eigenvectors in columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub eigenvalues: Vec<T>,
    pub eigenvectors: Matrix<T>,
    pub sweeps: usize,
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Eigenvalues are sorted ascending by a stable sort, and each eigenvector is
/// flipped so that its first component with magnitude above `1e-12` is positive.
pub fn symmetric_eigen<T: Scalar>(a: &Matrix<T>, opts: JacobiOptions) -> Result<SymmetricEigen<T>> {
    if !a.is_square() {
        return Err(Error::InvalidArgument("eigendecomposition of non-square matrix".into()));
    }
    let n = a.nrows();
    let threshold = T::lit(opts.tolerance).max(T::lit(10.0) * T::epsilon() * a.frobenius_norm());
    let skip_below = threshold / T::from_usize_lossy(n.max(1));

    let mut m = a.as_slice().to_vec();
    // rows of `vt` are the eigenvectors
    let mut vt = Matrix::<T>::identity(n).as_slice().to_vec();

    let off_norm = |m: &[T]| -> T {
        let mut acc = T::zero();
        for i in 0..n {
            for j in i + 1..n {
                acc = acc + m[i * n + j] * m[i * n + j];
            }
        }
        (acc + acc).sqrt()
    };

    let mut sweeps = 0;
    loop {
        let residual = off_norm(&m);
        if residual <= threshold {
            break;
        }
        if sweeps == opts.max_sweeps {
            return Err(Error::EigenNoConvergence {
                sweeps,
                residual: residual.as_f64(),
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() < skip_below {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (apq + apq);
                let t = if theta.abs() > T::max_value().sqrt() {
                    T::lit(0.5) / theta
                } else {
                    let sign = if theta < T::zero() { -T::one() } else { T::one() };
                    sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;

                rotate_rows(&mut m, n, p, q, c, s);
                m[p * n + p] = app - t * apq;
                m[q * n + q] = aqq + t * apq;
                m[p * n + q] = T::zero();
                m[q * n + p] = T::zero();
                for r in 0..n {
                    if r != p && r != q {
                        m[r * n + p] = m[p * n + r];
                        m[r * n + q] = m[q * n + r];
                    }
                }
                rotate_rows(&mut vt, n, p, q, c, s);
            }
        }
    }

    let diag: Vec<T> = (0..n).map(|i| m[i * n + i]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).expect("finite eigenvalues"));

    let sign_floor = T::lit(1e-12);
    let mut eigenvectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let v = &vt[src * n..(src + 1) * n];
        let flip = v.iter().find(|x| x.abs() > sign_floor).is_some_and(|x| *x < T::zero());
        for (r, &x) in v.iter().enumerate() {
            eigenvectors[(r, col)] = if flip { -x } else { x };
        }
    }
    Ok(SymmetricEigen {
        eigenvalues: order.iter().map(|&i| diag[i]).collect(),
        eigenvectors,
        sweeps,
    })
}

/// `(row_p, row_q) <- (c row_p - s row_q, s row_p + c row_q)` on a row-major buffer.
#[inline]
fn rotate_rows<T: Scalar>(buf: &mut [T], n: usize, p: usize, q: usize, c: T, s: T) {
    debug_assert!(p < q);
    let (head, tail) = buf.split_at_mut(q * n);
    let rp = &mut head[p * n..(p + 1) * n];
    let rq = &mut tail[..n];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Eigenbasis of a graph Laplacian plus the regularized spectrum `Λ = Λ_L + λI`.
///
/// Row `v` of `q` is the feature vector of arm (node) `v`.
#[derive(Debug, Clone)]
pub struct SpectralBasis<T> {
    q: Arc<Matrix<T>>,
    lap_eigenvalues: Arc<Vec<T>>,
    lambda_reg: T,
    reg_eigenvalues: Vec<T>,
}

impl<T: Scalar> SpectralBasis<T> {
    /// Assembles a basis from an orthogonal matrix and its ascending spectrum.
    pub fn from_parts(q: Matrix<T>, lap_eigenvalues: Vec<T>, lambda_reg: T) -> Result<Self> {
        if !q.is_square() || q.nrows() != lap_eigenvalues.len() {
            return Err(Error::InvalidArgument("basis dimensions disagree".into()));
        }
        if lap_eigenvalues.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument("eigenvalues must be ascending".into()));
        }
        let basis = Self {
            q: Arc::new(q),
            lap_eigenvalues: Arc::new(lap_eigenvalues),
            lambda_reg: T::zero(),
            reg_eigenvalues: Vec::new(),
        };
        basis.with_lambda(lambda_reg)
    }

    /// Same eigenvectors with a different regularization shift.
    pub fn with_lambda(&self, lambda_reg: T) -> Result<Self> {
        if !(lambda_reg > T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "regularization lambda must be positive, got {lambda_reg}"
            )));
        }
        Ok(Self {
            q: Arc::clone(&self.q),
            lap_eigenvalues: Arc::clone(&self.lap_eigenvalues),
            lambda_reg,
            reg_eigenvalues: self.lap_eigenvalues.iter().map(|&e| e + lambda_reg).collect(),
        })
    }

    pub fn num_arms(&self) -> usize {
        self.q.nrows()
    }

    /// Eigenvector matrix, eigenvectors in columns.
    pub fn q(&self) -> &Matrix<T> {
        &self.q
    }

    pub fn lap_eigenvalues(&self) -> &[T] {
        &self.lap_eigenvalues
    }

    pub fn lambda_reg(&self) -> T {
        self.lambda_reg
    }

    pub fn reg_eigenvalues(&self) -> &[T] {
        &self.reg_eigenvalues
    }

    pub fn arm_feature(&self, v: usize) -> Result<&[T]> {
        if v >= self.num_arms() {
            return Err(Error::IndexOutOfRange {
                index: v,
                len: self.num_arms(),
            });
        }
        Ok(self.q.row(v))
    }

    /// Noiseless payoff `f_α(v) = <x_v, α>` for every arm.
    pub fn payoffs(&self, alpha: &[T]) -> Vec<T> {
        self.q.mat_vec(alpha)
    }

    /// `sqrt(α^T Λ α)`
    pub fn lambda_norm(&self, alpha: &[T]) -> T {
        alpha
            .iter()
            .zip(&self.reg_eigenvalues)
            .map(|(&a, &l)| l * a * a)
            .sum::<T>()
            .sqrt()
    }

    pub fn effective_dimension(&self, horizon: u64) -> usize {
        effective_dimension(&self.reg_eigenvalues, self.lambda_reg, horizon)
    }

    /// `Q Λ_L Q^T`
    pub fn reconstruct_laplacian(&self) -> Matrix<T> {
        let n = self.num_arms();
        let q = &*self.q;
        Matrix::from_fn(n, n, |i, j| {
            q.row(i)
                .iter()
                .zip(q.row(j))
                .zip(self.lap_eigenvalues.iter())
                .map(|((&a, &b), &l)| a * l * b)
                .sum()
        })
    }
}

pub fn eigendecompose<T: Scalar>(laplacian: &Laplacian<T>, lambda_reg: T) -> Result<SpectralBasis<T>> {
    eigendecompose_with(laplacian, lambda_reg, JacobiOptions::default())
}

pub fn eigendecompose_with<T: Scalar>(
    laplacian: &Laplacian<T>,
    lambda_reg: T,
    opts: JacobiOptions,
) -> Result<SpectralBasis<T>> {
    let eig = symmetric_eigen(laplacian.matrix(), opts)?;
    SpectralBasis::from_parts(eig.eigenvectors, eig.eigenvalues, lambda_reg)
}

/// Largest `d` in `1..=N` with `(d - 1) λ_d <= T / ln(1 + T / λ)`.
///
/// `reg_eigenvalues` must be ascending and positive, so the left-hand side is
/// non-decreasing in `d` and the admissible set is a prefix.
pub fn effective_dimension<T: Scalar>(reg_eigenvalues: &[T], lambda: T, horizon: u64) -> usize {
    debug_assert!(reg_eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    let t = horizon as f64;
    let threshold = t / (1.0 + t / lambda.as_f64()).ln();
    let admissible = reg_eigenvalues
        .iter()
        .enumerate()
        .take_while(|(i, l)| (*i as f64) * l.as_f64() <= threshold)
        .count();
    admissible.max(1)
}

/// Checks `Q^T Q = I` entrywise.
pub fn orthogonality_error<T: Scalar>(q: &Matrix<T>) -> T {
    let n = q.ncols();
    let mut worst = T::zero();
    for i in 0..n {
        let ci = q.column(i);
        for j in i..n {
            let cj = q.column(j);
            let target = if i == j { T::one() } else { T::zero() };
            worst = worst.max((dot(&ci, &cj) - target).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_laplacian, WeightedGraph};

    fn complete(n: usize) -> WeightedGraph<f64> {
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v, 1.0)));
        WeightedGraph::new(n, edges).unwrap()
    }

    #[test]
    fn two_node_basis() {
        let g = WeightedGraph::<f64>::new(2, [(0, 1, 1.0)]).unwrap();
        let b = eigendecompose(&build_laplacian(&g), 1.0).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!(b.lap_eigenvalues()[0].abs() < 1e-12);
        assert!((b.lap_eigenvalues()[1] - 2.0).abs() < 1e-12);
        let q = b.q();
        assert!((q[(0, 0)] - h).abs() < 1e-12 && (q[(1, 0)] - h).abs() < 1e-12);
        assert!((q[(0, 1)] - h).abs() < 1e-12 && (q[(1, 1)] + h).abs() < 1e-12);
        let x0 = b.arm_feature(0).unwrap();
        assert!((x0[0] - h).abs() < 1e-12 && (x0[1] - h).abs() < 1e-12);
    }

    #[test]
    fn k4_spectrum() {
        let b = eigendecompose(&build_laplacian(&complete(4)), 1.0).unwrap();
        let want = [1.0, 5.0, 5.0, 5.0];
        for (got, want) in b.reg_eigenvalues().iter().zip(want) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn first_eigenvector_is_constant() {
        let g = WeightedGraph::new(5, [(0, 1, 0.5), (1, 2, 2.0), (2, 3, 1.0), (3, 4, 0.3), (0, 4, 1.0)]).unwrap();
        let b = eigendecompose(&build_laplacian(&g), 0.1).unwrap();
        let c = 1.0 / 5f64.sqrt();
        for v in 0..5 {
            assert!((b.q()[(v, 0)] - c).abs() < 1e-10);
        }
        // f_α for α = (c, 0, ..) is constant
        let alpha = [3.0, 0.0, 0.0, 0.0, 0.0];
        for f in b.payoffs(&alpha) {
            assert!((f - 3.0 * c).abs() < 1e-10);
        }
    }

    #[test]
    fn arm_feature_out_of_range() {
        let b = eigendecompose(&build_laplacian(&complete(3)), 1.0).unwrap();
        assert!(matches!(b.arm_feature(3), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn effective_dimension_worked_example() {
        assert_eq!(effective_dimension(&[1.0, 2.0, 3.0, 4.0, 5.0], 1.0, 10), 2);
    }

    #[test]
    fn effective_dimension_at_least_one() {
        assert_eq!(effective_dimension(&[1.0, 1e9, 1e10], 1.0, 1), 1);
    }

    #[test]
    fn no_convergence_is_reported() {
        let g = crate::graph::generate_barabasi_albert::<f64>(12, 2, 1, crate::graph::WeightLaw::Uniform).unwrap();
        let opts = JacobiOptions {
            tolerance: 1e-12,
            max_sweeps: 1,
        };
        match eigendecompose_with(&build_laplacian(&g), 1.0, opts) {
            Err(Error::EigenNoConvergence { sweeps, residual }) => {
                assert_eq!(sweeps, 1);
                assert!(residual > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_positive_lambda() {
        let b = eigendecompose(&build_laplacian(&complete(3)), 1.0).unwrap();
        assert!(b.with_lambda(0.0).is_err());
    }

    #[test]
    fn f32_eigensolver() {
        let g = WeightedGraph::new(4, [(0, 1, 1.0f32), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        let b = eigendecompose(&build_laplacian(&g), 1.0f32).unwrap();
        assert!(orthogonality_error(b.q()) < 1e-5);
        assert!(b.reconstruct_laplacian().max_abs_diff(build_laplacian(&g).matrix()) < 1e-5);
    }
}
