//! Dense linear-algebra helpers. Bulk products use `ndarray`; factorizations
//! go through `nalgebra`.

use log::warn;
use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn to_na(m: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

pub fn from_na(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Thin SVD `m = U·diag(s)·Vᵀ`, returned as `(U, s, V)`.
pub fn svd(m: ArrayView2<'_, f64>) -> (Array2<f64>, Array1<f64>, Array2<f64>) {
    let svd = to_na(m).svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᵀ");
    (
        from_na(u),
        svd.singular_values.iter().copied().collect(),
        from_na(&v_t.transpose()),
    )
}

/// Eigenvalue floor used by [`sym_inv_sqrt`].
pub const EIGEN_FLOOR: f64 = 1e-12;

/// `(A + ridge·I)^{-1/2}` for a symmetric positive semi-definite `A`, via
/// eigendecomposition with eigenvalues floored at [`EIGEN_FLOOR`].
pub fn sym_inv_sqrt(a: ArrayView2<'_, f64>, ridge: f64) -> Array2<f64> {
    sym_power(a, ridge, -0.5)
}

pub fn sym_sqrt(a: ArrayView2<'_, f64>, ridge: f64) -> Array2<f64> {
    sym_power(a, ridge, 0.5)
}

fn sym_power(a: ArrayView2<'_, f64>, ridge: f64, power: f64) -> Array2<f64> {
    let mut m = to_na(a);
    // symmetrize against round-off from the Gram product
    m = (&m + m.transpose()) * 0.5;
    for i in 0..m.nrows() {
        m[(i, i)] += ridge;
    }
    let eig = m.symmetric_eigen();
    let vals = eig.eigenvalues.map(|l| l.max(EIGEN_FLOOR).powf(power));
    let q = &eig.eigenvectors;
    from_na(&(q * DMatrix::from_diagonal(&vals) * q.transpose()))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: ArrayView2<'_, f64>) -> f64 {
    to_na(a).symmetric_eigenvalues().min()
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

/// Haar-distributed random orthogonal `n×n` matrix (QR of a Gaussian matrix
/// with the sign of `R`'s diagonal folded into `Q`).
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Array2<f64> {
    let g = to_na(gaussian_matrix(n, n, rng).view());
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    from_na(&q)
}

/// Random `rows×cols` matrix with orthonormal rows when `rows ≤ cols`, or
/// orthonormal columns otherwise.
pub fn random_orthonormal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let (tall_rows, tall_cols) = (rows.max(cols), rows.min(cols));
    let g = to_na(gaussian_matrix(tall_rows, tall_cols, rng).view());
    let q = from_na(&g.qr().q());
    if rows >= cols {
        q
    } else {
        q.reversed_axes()
    }
}

/// Orthogonal factor `U·Vᵀ` of a square matrix.
pub fn orthogonal_factor(m: ArrayView2<'_, f64>) -> Array2<f64> {
    let (u, s, v) = svd(m);
    let max = s.iter().copied().fold(0.0, f64::max);
    if s.iter().any(|&x| x <= max * 1e-12) {
        warn!("orthogonal factor of a rank-deficient matrix is not unique");
    }
    u.dot(&v.t())
}

/// Affine map `x ↦ M·x + c`, applied to row-major batches as `X·Mᵀ + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    pub matrix: Array2<f64>,
    pub offset: Array1<f64>,
}

impl LinearMap {
    pub fn identity(d: usize) -> Self {
        LinearMap {
            matrix: Array2::eye(d),
            offset: Array1::zeros(d),
        }
    }

    pub fn linear(matrix: Array2<f64>) -> Self {
        let offset = Array1::zeros(matrix.nrows());
        LinearMap { matrix, offset }
    }

    pub fn input_dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        x.dot(&self.matrix.t()) + &self.offset
    }

    /// `self ∘ inner`, i.e. `x ↦ self(inner(x))`.
    pub fn compose(&self, inner: &LinearMap) -> LinearMap {
        LinearMap {
            matrix: self.matrix.dot(&inner.matrix),
            offset: self.matrix.dot(&inner.offset) + &self.offset,
        }
    }

    /// Rounds every entry to the nearest `f32`, matching what the on-disk
    /// container stores.
    pub fn to_f32_precision(&self) -> LinearMap {
        LinearMap {
            matrix: self.matrix.mapv(|v| v as f32 as f64),
            offset: self.offset.mapv(|v| v as f32 as f64),
        }
    }
}

pub fn frobenius(m: ArrayView2<'_, f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthogonal_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = random_orthogonal(20, &mut rng);
        let err = frobenius((q.t().dot(&q) - Array2::<f64>::eye(20)).view());
        assert!(err < 1e-12);
    }

    #[test]
    fn orthonormal_rows_and_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let wide = random_orthonormal(4, 9, &mut rng);
        assert!(frobenius((wide.dot(&wide.t()) - Array2::<f64>::eye(4)).view()) < 1e-12);
        let tall = random_orthonormal(9, 4, &mut rng);
        assert!(frobenius((tall.t().dot(&tall) - Array2::<f64>::eye(4)).view()) < 1e-12);
    }

    #[test]
    fn inverse_sqrt_squares_to_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = gaussian_matrix(30, 6, &mut rng);
        let c = g.t().dot(&g);
        let w = sym_inv_sqrt(c.view(), 0.0);
        let should_be_eye = w.dot(&c).dot(&w);
        assert!(frobenius((should_be_eye - Array2::<f64>::eye(6)).view()) < 1e-10);
        let s = sym_sqrt(c.view(), 0.0);
        assert!(frobenius((s.dot(&s) - &c).view()) < 1e-9);
    }

    #[test]
    fn compose_matches_sequential_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = LinearMap {
            matrix: gaussian_matrix(3, 5, &mut rng),
            offset: gaussian_matrix(1, 3, &mut rng).row(0).to_owned(),
        };
        let b = LinearMap {
            matrix: gaussian_matrix(4, 3, &mut rng),
            offset: gaussian_matrix(1, 4, &mut rng).row(0).to_owned(),
        };
        let x = gaussian_matrix(7, 5, &mut rng);
        let staged = b.apply(a.apply(x.view()).view());
        let fused = b.compose(&a).apply(x.view());
        assert!(frobenius((staged - fused).view()) < 1e-12);
    }
}
