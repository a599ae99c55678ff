//! Construction of the orthonormal covariate-space basis and projection of
//! the panel onto it.
//!
//! Stacking the covariates side by side gives an `n x TK` design whose
//! column space carries all the identifying variation. An orthonormal basis
//! `Q` of that space maps the `n`-dimensional model into a `TK`-dimensional
//! one; the slope coefficients are unaffected while the loadings shrink to
//! `Q^T Lambda`. Any orthonormal basis of the same space produces the same
//! projected model up to rotation, which is why both a symmetric-root and a
//! QR construction are offered.
//!
//! Covariates of rank one (time dummies, cross-sectional invariants) make
//! the stacked design singular; they enter the basis through their
//! cross-section factor instead, see [`LowRankSpec`].

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numeric::{frob_sq, sym_eig_desc, Scalar};
use crate::panel::PanelData;

/// How the orthonormal basis is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BasisMethod {
    /// `X (X^T X)^{-1/2}` via eigendecomposition of the Gram matrix. The
    /// default; reproduces the canonical construction.
    #[default]
    SymmetricRoot,
    /// Thin QR factorisation. Spans the same space and is cheaper.
    Qr,
}

/// Rank-one factorisation `X_k = v w^T` of a low-rank covariate.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankComponent<S: Scalar> {
    /// Cross-section factor (length n). Carries the scale.
    pub cross_section: DVector<S>,
    /// Time factor (length T), unit norm.
    pub time_profile: DVector<S>,
}

/// Per-covariate low-rank flags used when building the basis.
///
/// A flagged covariate contributes only its cross-section factor to the
/// stacked design, keeping the Gram matrix invertible.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankSpec<S: Scalar> {
    components: Vec<Option<LowRankComponent<S>>>,
}

impl<S: Scalar> LowRankSpec<S> {
    /// No covariate is treated as low rank.
    pub fn none(k: usize) -> Self {
        Self { components: (0..k).map(|_| None).collect() }
    }

    /// Run [`detect_low_rank`] on every covariate with the given relative
    /// tolerance (the default elsewhere is `1e-8`).
    pub fn detect(data: &PanelData<S>, tol: S) -> Result<Self> {
        let mut components = Vec::with_capacity(data.k());
        for xk in data.x() {
            components.push(detect_low_rank(xk, tol)?);
        }
        Ok(Self { components })
    }

    /// Flag a single covariate (0-based) with an explicit factorisation.
    pub fn with_component(mut self, k: usize, component: LowRankComponent<S>) -> Self {
        self.components[k] = Some(component);
        self
    }

    /// Per-covariate components, `None` for full-rank covariates.
    pub fn components(&self) -> &[Option<LowRankComponent<S>>] {
        &self.components
    }

    /// Number of flagged covariates.
    pub fn low_rank_count(&self) -> usize {
        self.components.iter().filter(|c| c.is_some()).count()
    }
}

/// Where a block of basis columns came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisBlock {
    /// 0-based covariate index.
    pub covariate: usize,
    /// True when the block is the single column of a low-rank covariate.
    pub low_rank: bool,
    /// Column range inside the stacked design / basis.
    pub cols: Range<usize>,
}

/// Orthonormal basis of the stacked covariate column space.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformBasis<S: Scalar> {
    q: DMatrix<S>,
    method: BasisMethod,
    column_map: Vec<BasisBlock>,
}

impl<S: Scalar> TransformBasis<S> {
    /// The `n x m` orthonormal basis matrix.
    pub fn q(&self) -> &DMatrix<S> {
        &self.q
    }

    /// Construction method used.
    pub fn method(&self) -> BasisMethod {
        self.method
    }

    /// Which stacked-design columns each covariate contributed.
    pub fn column_map(&self) -> &[BasisBlock] {
        &self.column_map
    }

    /// Number of basis columns (the transformed row dimension).
    pub fn dim(&self) -> usize {
        self.q.ncols()
    }
}

/// The panel projected onto the covariate column space.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedPanel<S: Scalar> {
    y: DMatrix<S>,
    x: Vec<DMatrix<S>>,
    n: usize,
    basis: TransformBasis<S>,
}

impl<S: Scalar> TransformedPanel<S> {
    /// Projected outcomes, `m x T`.
    pub fn y(&self) -> &DMatrix<S> {
        &self.y
    }

    /// Projected covariates, each `m x T`.
    pub fn x(&self) -> &[DMatrix<S>] {
        &self.x
    }

    /// Original cross-section size (used in objective normalisation).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of periods.
    pub fn t(&self) -> usize {
        self.y.ncols()
    }

    /// Number of covariates.
    pub fn k(&self) -> usize {
        self.x.len()
    }

    /// Transformed row dimension `m` (equals `TK` without low-rank blocks).
    pub fn m(&self) -> usize {
        self.y.nrows()
    }

    /// The basis the projection was built from.
    pub fn basis(&self) -> &TransformBasis<S> {
        &self.basis
    }
}

/// Test a covariate for a rank-one structure.
///
/// Returns the leading singular pair `(v, w)` scaled so `X ~ v w^T` when
/// the ratio of the second to the first singular value is at most `tol`;
/// `None` when the covariate is genuinely full rank. An all-zero covariate
/// is an error since it cannot carry identifying variation.
pub fn detect_low_rank<S: Scalar>(
    xk: &DMatrix<S>,
    tol: S,
) -> Result<Option<LowRankComponent<S>>> {
    if frob_sq(xk) == S::zero() {
        return Err(Error::DegenerateCovariate(0));
    }
    let svd = xk.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd requested u");
    let vt = svd.v_t.as_ref().expect("svd requested v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .expect("singular values are finite")
    });
    let s1 = svd.singular_values[order[0]];
    let s2 = if order.len() > 1 { svd.singular_values[order[1]] } else { S::zero() };
    if s2 > tol * s1 {
        return Ok(None);
    }
    let cross_section = u.column(order[0]).clone_owned() * s1;
    let time_profile = vt.row(order[0]).transpose();
    Ok(Some(LowRankComponent { cross_section, time_profile }))
}

/// Build the orthonormal basis of the stacked covariate space.
///
/// Flagged low-rank covariates contribute their cross-section factor as a
/// single column; all other covariates contribute their full `T`-column
/// block. Errors identify the covariate block responsible when the stacked
/// design is rank deficient.
pub fn build_basis<S: Scalar>(
    data: &PanelData<S>,
    spec: &LowRankSpec<S>,
    method: BasisMethod,
) -> Result<TransformBasis<S>> {
    if spec.components().len() != data.k() {
        return Err(Error::Dimension(format!(
            "low-rank spec covers {} covariates, panel has {}",
            spec.components().len(),
            data.k()
        )));
    }
    let n = data.n();
    let t = data.t();

    // Stack low-rank cross-section factors first, then full blocks.
    let mut column_map = Vec::new();
    let mut cols = 0usize;
    for (k, comp) in spec.components().iter().enumerate() {
        if comp.is_some() {
            column_map.push(BasisBlock { covariate: k, low_rank: true, cols: cols..cols + 1 });
            cols += 1;
        }
    }
    for (k, comp) in spec.components().iter().enumerate() {
        if comp.is_none() {
            column_map.push(BasisBlock { covariate: k, low_rank: false, cols: cols..cols + t });
            cols += t;
        }
    }

    let mut design = DMatrix::zeros(n, cols);
    for block in &column_map {
        if block.low_rank {
            let comp = spec.components()[block.covariate].as_ref().unwrap();
            design.set_column(block.cols.start, &comp.cross_section);
        } else {
            let xk = &data.x()[block.covariate];
            for (offset, col) in block.cols.clone().enumerate() {
                design.set_column(col, &xk.column(offset));
            }
        }
    }

    let gram = design.transpose() * &design;
    let (eigvals, eigvecs) = sym_eig_desc(&gram);
    let floor = S::of(1e-12) * eigvals[0].max(S::zero());
    if eigvals[cols - 1] <= floor {
        // Attribute the deficiency to the covariate block with the largest
        // weight in the null eigenvector.
        let null = eigvecs.column(cols - 1);
        let mut worst = (0usize, S::zero());
        for block in &column_map {
            let weight = block.cols.clone().map(|c| null[c] * null[c]).fold(S::zero(), |a, b| a + b);
            if weight > worst.1 {
                worst = (block.covariate, weight);
            }
        }
        return Err(Error::RankDeficient { block: worst.0 + 1 });
    }

    let q = match method {
        BasisMethod::SymmetricRoot => {
            let mut inv_root = DMatrix::zeros(cols, cols);
            for r in 0..cols {
                let scale = S::one() / eigvals[r].sqrt();
                let col = eigvecs.column(r) * scale;
                inv_root += &col * eigvecs.column(r).transpose();
            }
            &design * inv_root
        }
        BasisMethod::Qr => {
            let qr = design.clone().qr();
            qr.q()
        }
    };

    Ok(TransformBasis { q, method, column_map })
}

/// Project the panel onto the basis: `y -> Q^T y`, `x_k -> Q^T x_k`.
///
/// The projected covariates lose nothing: `Q Q^T x_k = x_k` because each
/// covariate lies in the space the basis spans.
pub fn transform_panel<S: Scalar>(
    data: &PanelData<S>,
    basis: &TransformBasis<S>,
) -> Result<TransformedPanel<S>> {
    if basis.q().nrows() != data.n() {
        return Err(Error::Dimension(format!(
            "basis has {} rows, panel cross-section is {}",
            basis.q().nrows(),
            data.n()
        )));
    }
    let qt = basis.q().transpose();
    let y = &qt * data.y();
    let x = data.x().iter().map(|xk| &qt * xk).collect();
    Ok(TransformedPanel { y, x, n: data.n(), basis: basis.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_panel(n: usize, t: usize, k: usize, seed: u64) -> PanelData<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |r: usize, c: usize| {
            DMatrix::<f64>::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng))
        };
        let y = draw(n, t);
        let x = (0..k).map(|_| draw(n, t)).collect();
        PanelData::new(y, x, None).unwrap()
    }

    #[test]
    fn detect_low_rank_flags_time_dummy() {
        let n = 12;
        let _t = 4;
        let w = DVector::from_vec(vec![1.0, 0.0, 0.0, 2.0]);
        let x = DVector::from_element(n, 1.0) * w.transpose();
        let comp = detect_low_rank(&x, 1e-8).unwrap().expect("rank one");
        // Cross-section factor proportional to the vector of ones.
        let v = &comp.cross_section;
        let mean = v.mean();
        for i in 0..n {
            assert_relative_eq!(v[i], mean, epsilon = 1e-10);
        }
        let rebuilt = &comp.cross_section * comp.time_profile.transpose();
        let rel = ((&rebuilt - &x).norm()) / x.norm();
        assert!(rel <= 1e-10, "relative reconstruction error {rel}");
    }

    #[test]
    fn detect_low_rank_passes_full_rank_covariate() {
        let data = random_panel(30, 4, 1, 3);
        assert!(detect_low_rank(&data.x()[0], 1e-8).unwrap().is_none());
    }

    #[test]
    fn detect_low_rank_tolerates_tiny_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = DVector::<f64>::from_fn(20, |_, _| StandardNormal.sample(&mut rng));
        let w = DVector::<f64>::from_fn(5, |_, _| StandardNormal.sample(&mut rng));
        let noise = DMatrix::<f64>::from_fn(20, 5, |_, _| {
            let e: f64 = StandardNormal.sample(&mut rng);
            e * 1e-12
        });
        let x = &v * w.transpose() + noise;
        assert!(detect_low_rank(&x, 1e-6).unwrap().is_some());
    }

    #[test]
    fn detect_low_rank_rejects_zero_matrix() {
        let x = DMatrix::<f64>::zeros(8, 3);
        assert!(matches!(detect_low_rank(&x, 1e-8), Err(Error::DegenerateCovariate(_))));
    }

    #[test]
    fn basis_is_orthonormal_and_spans_covariates() {
        let data = random_panel(30, 4, 2, 11);
        let basis = build_basis(&data, &LowRankSpec::none(2), BasisMethod::SymmetricRoot).unwrap();
        let q = basis.q();
        assert_eq!(q.shape(), (30, 8));
        let gram = q.transpose() * q;
        assert_relative_eq!(gram, DMatrix::identity(8, 8), epsilon = 1e-10);
        // Q Q^T reproduces the projector onto the stacked covariate space.
        let mut stacked = DMatrix::zeros(30, 8);
        for (k, xk) in data.x().iter().enumerate() {
            for c in 0..4 {
                stacked.set_column(4 * k + c, &xk.column(c));
            }
        }
        let p = crate::numeric::orth_projector(&stacked);
        assert_relative_eq!(q * q.transpose(), p, epsilon = 1e-10);
    }

    #[test]
    fn symmetric_root_of_orthonormal_covariate_is_itself() {
        // A single covariate with orthonormal columns is already a basis.
        let mut x = DMatrix::<f64>::zeros(6, 3);
        x[(0, 0)] = 1.0;
        x[(2, 1)] = 1.0;
        x[(5, 2)] = 1.0;
        let data = PanelData::new(DMatrix::zeros(6, 3), vec![x.clone()], None).unwrap();
        let basis = build_basis(&data, &LowRankSpec::none(1), BasisMethod::SymmetricRoot).unwrap();
        assert_relative_eq!(basis.q().clone(), x, epsilon = 1e-10);
    }

    #[test]
    fn duplicate_covariate_is_reported_rank_deficient() {
        let data = random_panel(30, 4, 1, 5);
        let x1 = data.x()[0].clone();
        let dup = PanelData::new(data.y().clone(), vec![x1.clone(), x1], None).unwrap();
        let err = build_basis(&dup, &LowRankSpec::none(2), BasisMethod::SymmetricRoot).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }), "got {err}");
    }

    #[test]
    fn low_rank_block_keeps_design_invertible() {
        let mut data = random_panel(40, 4, 2, 6);
        // Replace the second covariate with a rank-one matrix.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v = DVector::<f64>::from_fn(40, |_, _| StandardNormal.sample(&mut rng));
        let w = DVector::<f64>::from_fn(4, |_, _| StandardNormal.sample(&mut rng));
        let x_low = &v * w.transpose();
        data = PanelData::new(data.y().clone(), vec![data.x()[0].clone(), x_low], None).unwrap();

        // Without flagging, the stacked design is singular.
        assert!(build_basis(&data, &LowRankSpec::none(2), BasisMethod::SymmetricRoot).is_err());

        let spec = LowRankSpec::detect(&data, 1e-8).unwrap();
        assert_eq!(spec.low_rank_count(), 1);
        let basis = build_basis(&data, &spec, BasisMethod::SymmetricRoot).unwrap();
        assert_eq!(basis.dim(), 1 + 4);
        let gram = basis.q().transpose() * basis.q();
        assert_relative_eq!(gram, DMatrix::identity(5, 5), epsilon = 1e-10);
        // Both covariates still lie in the spanned space.
        let p = basis.q() * basis.q().transpose();
        for xk in data.x() {
            assert_relative_eq!(&p * xk, xk.clone(), epsilon = 1e-8);
        }
    }

    #[test]
    fn transform_shapes_and_reconstruction() {
        let data = random_panel(30, 4, 2, 21);
        let basis = build_basis(&data, &LowRankSpec::none(2), BasisMethod::SymmetricRoot).unwrap();
        let tp = transform_panel(&data, &basis).unwrap();
        assert_eq!(tp.m(), 8);
        assert_eq!(tp.t(), 4);
        assert_eq!(tp.n(), 30);
        for (xk, xtil) in data.x().iter().zip(tp.x()) {
            assert_eq!(xtil.nrows(), 8);
            // No information loss: Q * Q^T x_k = x_k.
            assert_relative_eq!(basis.q() * xtil, xk.clone(), epsilon = 1e-8);
        }
        // Q Q^T y equals the projection of y.
        let p = basis.q() * basis.q().transpose();
        assert_relative_eq!(basis.q() * tp.y(), &p * data.y(), epsilon = 1e-10);
    }

    #[test]
    fn transform_is_exact_on_noiseless_static_outcomes() {
        let data = random_panel(24, 3, 2, 31);
        let beta = [2.0, -1.0];
        let y = data.x()[0].clone() * beta[0] + data.x()[1].clone() * beta[1];
        let data = PanelData::new(y, data.x().to_vec(), None).unwrap();
        let basis = build_basis(&data, &LowRankSpec::none(2), BasisMethod::SymmetricRoot).unwrap();
        let tp = transform_panel(&data, &basis).unwrap();
        let combined = tp.x()[0].clone() * beta[0] + tp.x()[1].clone() * beta[1];
        assert_relative_eq!(tp.y().clone(), combined, epsilon = 1e-10);
    }

    #[test]
    fn transform_rejects_foreign_basis() {
        let data = random_panel(30, 4, 1, 41);
        let other = random_panel(20, 4, 1, 42);
        let basis = build_basis(&other, &LowRankSpec::none(1), BasisMethod::SymmetricRoot).unwrap();
        assert!(transform_panel(&data, &basis).is_err());
    }

    #[test]
    fn qr_and_symmetric_root_span_the_same_space() {
        let data = random_panel(25, 3, 2, 51);
        let b1 = build_basis(&data, &LowRankSpec::none(2), BasisMethod::SymmetricRoot).unwrap();
        let b2 = build_basis(&data, &LowRankSpec::none(2), BasisMethod::Qr).unwrap();
        let p1 = b1.q() * b1.q().transpose();
        let p2 = b2.q() * b2.q().transpose();
        assert_relative_eq!(p1, p2, epsilon = 1e-10);
        let gram = b2.q().transpose() * b2.q();
        assert_relative_eq!(gram, DMatrix::identity(6, 6), epsilon = 1e-10);
    }
}
