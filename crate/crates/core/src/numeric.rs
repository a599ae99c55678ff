//! Scalar abstraction and small dense linear-algebra helpers.

use nalgebra::{DMatrix, DVector, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar the crate is generic over.
///
/// Implemented for `f32` and `f64`. Tolerances and literal constants are
/// written as `f64` and converted through [`Scalar::of`].
pub trait Scalar: RealField + Copy + FromPrimitive + ToPrimitive {
    /// Machine epsilon of the concrete type.
    const EPS: Self;

    /// Convert an `f64` constant into this scalar type.
    fn of(x: f64) -> Self;

    /// Widen to `f64`, e.g. for reporting.
    fn to_f64_lossy(self) -> f64;
}

impl Scalar for f64 {
    const EPS: Self = f64::EPSILON;

    #[inline]
    fn of(x: f64) -> Self {
        x
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    const EPS: Self = f32::EPSILON;

    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

/// Absolute value without the `Signed`/`ComplexField` method ambiguity.
#[inline]
pub(crate) fn abs<S: Scalar>(x: S) -> S {
    if x < S::zero() {
        -x
    } else {
        x
    }
}

/// Squared Frobenius norm.
pub fn frob_sq<S: Scalar>(a: &DMatrix<S>) -> S {
    a.iter().fold(S::zero(), |acc, &v| acc + v * v)
}

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted in
/// descending order. The input is symmetrised first; eigenvector signs are
/// normalised so that the first entry of appreciable magnitude is positive,
/// which keeps output reproducible across runs and platforms.
pub fn sym_eig_desc<S: Scalar>(a: &DMatrix<S>) -> (DVector<S>, DMatrix<S>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "symmetric eigendecomposition needs a square matrix");
    let sym = (a + a.transpose()) * S::of(0.5);
    let decomp = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        decomp.eigenvalues[j]
            .partial_cmp(&decomp.eigenvalues[i])
            .expect("eigenvalues are finite")
    });
    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = decomp.eigenvalues[src];
        let mut col = decomp.eigenvectors.column(src).clone_owned();
        fix_sign(&mut col);
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

/// Eigenvalues of a symmetric matrix, descending. Cheaper than
/// [`sym_eig_desc`] when eigenvectors are not needed.
pub fn sym_eigenvalues_desc<S: Scalar>(a: &DMatrix<S>) -> DVector<S> {
    let sym = (a + a.transpose()) * S::of(0.5);
    let mut vals: Vec<S> = sym.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|x, y| y.partial_cmp(x).expect("eigenvalues are finite"));
    DVector::from_vec(vals)
}

fn fix_sign<S: Scalar>(v: &mut DVector<S>) {
    let threshold = S::of(1e-12);
    for i in 0..v.len() {
        if abs(v[i]) > threshold {
            if v[i] < S::zero() {
                *v = -v.clone();
            }
            return;
        }
    }
}

/// Symmetric positive semi-definite square root. Negative eigenvalues from
/// rounding are clamped to zero. Diagonal input takes an entrywise
/// shortcut.
pub fn psd_sqrt<S: Scalar>(a: &DMatrix<S>) -> DMatrix<S> {
    let n = a.nrows();
    let is_diagonal =
        (0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)] == S::zero()));
    if is_diagonal {
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            out[(i, i)] = a[(i, i)].max(S::zero()).sqrt();
        }
        return out;
    }
    let (values, vectors) = sym_eig_desc(a);
    let n = a.nrows();
    let mut scaled = vectors.clone();
    for r in 0..n {
        let root = if values[r] > S::zero() { values[r].sqrt() } else { S::zero() };
        for i in 0..n {
            scaled[(i, r)] *= root;
        }
    }
    &scaled * vectors.transpose()
}

/// Orthogonal projector onto the column space of `a`, computed through the
/// singular value decomposition. The rank cut is the relative rule
/// `max(nrows, ncols) * eps * sigma_max`, so a zero matrix yields the zero
/// projector.
pub fn orth_projector<S: Scalar>(a: &DMatrix<S>) -> DMatrix<S> {
    let m = a.nrows();
    if a.ncols() == 0 || m == 0 {
        return DMatrix::zeros(m, m);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("svd requested u");
    let sigma_max = svd.singular_values.iter().copied().fold(S::zero(), |x, y| if y > x { y } else { x });
    let cutoff = S::from_usize(m.max(a.ncols())).unwrap() * S::EPS * sigma_max;
    let mut p = DMatrix::zeros(m, m);
    for (r, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            let col = u.column(r);
            p += col * col.transpose();
        }
    }
    p
}

/// Kronecker product, column-major vectorisation convention.
pub fn kronecker<S: Scalar>(a: &DMatrix<S>, b: &DMatrix<S>) -> DMatrix<S> {
    a.kronecker(b)
}

/// Column-major vectorisation of a matrix.
pub fn vec_mat<S: Scalar>(a: &DMatrix<S>) -> DVector<S> {
    DVector::from_column_slice(a.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn eigendecomposition_reconstructs() {
        let a = random_matrix(6, 6, 1);
        let sym = &a * a.transpose();
        let (vals, vecs) = sym_eig_desc(&sym);
        let rebuilt = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
        assert_relative_eq!(rebuilt, sym, epsilon = 1e-10);
        for r in 1..vals.len() {
            assert!(vals[r - 1] >= vals[r]);
        }
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let a = random_matrix(5, 5, 2);
        let sym = &a * a.transpose();
        let root = psd_sqrt(&sym);
        assert_relative_eq!(&root * &root, sym, epsilon = 1e-9);
    }

    #[test]
    fn projector_of_zero_matrix_is_zero() {
        let z = DMatrix::<f64>::zeros(4, 2);
        let p = orth_projector(&z);
        assert_eq!(p, DMatrix::zeros(4, 4));
    }

    #[test]
    fn eigenvalue_only_path_matches_full() {
        let a = random_matrix(7, 7, 3);
        let sym = &a * a.transpose();
        let quick = sym_eigenvalues_desc(&sym);
        let (full, _) = sym_eig_desc(&sym);
        assert_relative_eq!(quick, full, epsilon = 1e-10);
    }
}
