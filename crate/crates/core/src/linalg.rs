//! Dense linear-algebra primitives.
//!
//! Everything here is a pure function of its inputs. Matrices are stored as
//! column-major [`nalgebra::DMatrix`] values behind small validating newtypes.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Entrywise tolerance on `QᵀQ − I` for a basis to count as orthonormal.
pub const ORTHO_TOL: f64 = 1e-10;

/// Default residual-norm cutoff below which a vector adds no new dimension.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Relative singular-value cutoff (`σ < cutoff·σ_max` is treated as zero) for
/// restricted least-squares fits.
pub const LSTSQ_CUTOFF: f64 = 1e-10;

/// A real `m × n` matrix with finite entries and at least one row.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    pub fn new(inner: DMatrix<f64>) -> Result<Self> {
        if inner.nrows() == 0 {
            return Err(Error::invalid("matrix must have at least one row"));
        }
        for j in 0..inner.ncols() {
            for i in 0..inner.nrows() {
                if !inner[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(DenseMatrix(inner))
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(rows, cols))
    }

    /// Builds a matrix from columns of equal length.
    pub fn from_columns(rows: usize, columns: &[DVector<f64>]) -> Result<Self> {
        for c in columns {
            if c.len() != rows {
                return Err(Error::DimensionMismatch {
                    expected: rows,
                    found: c.len(),
                });
            }
        }
        let mut inner = DMatrix::zeros(rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            inner.set_column(j, c);
        }
        Self::new(inner)
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.0.column(j).into_owned()
    }

    pub fn set_column(&mut self, j: usize, values: &DVector<f64>) -> Result<()> {
        if values.len() != self.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.nrows(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: j });
        }
        self.0.set_column(j, values);
        Ok(())
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// An `m × k` matrix with orthonormal columns. `k = 0` is the empty basis.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    columns: DMatrix<f64>,
}

impl OrthonormalBasis {
    /// The zero-dimensional subspace of `ℝ^ambient`.
    pub fn empty(ambient: usize) -> Self {
        OrthonormalBasis {
            columns: DMatrix::zeros(ambient, 0),
        }
    }

    /// Wraps columns that are already orthonormal to within [`ORTHO_TOL`].
    pub fn from_orthonormal_columns(columns: DMatrix<f64>) -> Result<Self> {
        let gram = columns.transpose() * &columns;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                if (gram[(i, j)] - target).abs() > ORTHO_TOL || !gram[(i, j)].is_finite() {
                    return Err(Error::invalid(format!(
                        "columns are not orthonormal: gram[({i}, {j})] = {}",
                        gram[(i, j)]
                    )));
                }
            }
        }
        Ok(OrthonormalBasis { columns })
    }

    pub fn ambient_dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn dim(&self) -> usize {
        self.columns.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.dim() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn column(&self, i: usize) -> DVector<f64> {
        self.columns.column(i).into_owned()
    }

    /// `‖P e_j‖²`, i.e. the squared norm of row `j`.
    pub fn row_norm_sq(&self, j: usize) -> f64 {
        self.columns.row(j).norm_squared()
    }

    /// The `|Ω| × k` row restriction. Not orthonormal in general.
    pub fn restrict_rows(&self, omega: &IndexSet) -> DMatrix<f64> {
        self.columns.select_rows(omega.indices())
    }

    /// Largest entrywise deviation of `QᵀQ` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.columns.transpose() * &self.columns;
        let mut worst = 0.0_f64;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }
}

/// A strictly increasing set of row indices in `[0, ambient)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    ambient: usize,
    indices: Vec<usize>,
}

impl IndexSet {
    pub fn new(ambient: usize, indices: Vec<usize>) -> Result<Self> {
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::invalid("indices must be strictly increasing"));
            }
        }
        if let Some(&last) = indices.last() {
            if last >= ambient {
                return Err(Error::IndexOutOfRange {
                    index: last,
                    bound: ambient,
                });
            }
        }
        Ok(IndexSet { ambient, indices })
    }

    /// Sorts the input; duplicates are rejected.
    pub fn from_unsorted(ambient: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        Self::new(ambient, indices)
    }

    pub fn full(ambient: usize) -> Self {
        IndexSet {
            ambient,
            indices: (0..ambient).collect(),
        }
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Gathers `y[Ω]`.
    pub fn gather(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        if y.len() != self.ambient {
            return Err(Error::DimensionMismatch {
                expected: self.ambient,
                found: y.len(),
            });
        }
        Ok(DVector::from_iterator(
            self.len(),
            self.indices.iter().map(|&i| y[i]),
        ))
    }
}

/// An angle in `[0, π/2]`, in radians.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);
    pub const RIGHT: Angle = Angle(FRAC_PI_2);

    pub fn new(radians: f64) -> Result<Self> {
        if !(0.0..=FRAC_PI_2).contains(&radians) {
            return Err(Error::invalid(format!(
                "angle {radians} outside [0, pi/2]"
            )));
        }
        Ok(Angle(radians))
    }

    /// Clamps into `[0, π/2]`; NaN maps to π/2.
    pub fn clamped(radians: f64) -> Self {
        if radians.is_nan() {
            return Angle::RIGHT;
        }
        Angle(radians.clamp(0.0, FRAC_PI_2))
    }

    pub fn radians(self) -> f64 {
        self.0
    }
}

/// Orthonormalizes `vectors` in order with classical Gram–Schmidt applied
/// twice per vector. Vectors whose residual norm is at most `rank_tol` are
/// dropped.
pub fn orthonormalize(vectors: &[DVector<f64>], rank_tol: f64) -> Result<OrthonormalBasis> {
    let ambient = vectors
        .first()
        .map(|v| v.len())
        .ok_or_else(|| Error::invalid("orthonormalize needs at least one vector"))?;
    if !(rank_tol > 0.0) {
        return Err(Error::invalid("rank_tol must be positive"));
    }
    if ambient == 0 {
        return Err(Error::invalid("vectors must have positive length"));
    }
    let mut accepted: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        if v.len() != ambient {
            return Err(Error::DimensionMismatch {
                expected: ambient,
                found: v.len(),
            });
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &accepted {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let norm = w.norm();
        if norm > rank_tol {
            accepted.push(w / norm);
        }
    }
    let mut columns = DMatrix::zeros(ambient, accepted.len());
    for (j, q) in accepted.iter().enumerate() {
        columns.set_column(j, q);
    }
    Ok(OrthonormalBasis { columns })
}

/// `Q(Qᵀy)`; the zero vector for the empty basis.
pub fn project(basis: &OrthonormalBasis, y: &DVector<f64>) -> Result<DVector<f64>> {
    check_len(basis.ambient_dim(), y.len())?;
    if basis.is_empty() {
        return Ok(DVector::zeros(y.len()));
    }
    let coeffs = basis.matrix().tr_mul(y);
    Ok(basis.matrix() * coeffs)
}

/// Least-squares fit of observed entries against the row-restricted basis.
///
/// The restriction `Û_Ω` is generally not orthonormal, so projections onto
/// its span go through a thin SVD with singular values below
/// `LSTSQ_CUTOFF · σ_max` discarded.
#[derive(Debug, Clone)]
pub struct RestrictedFit {
    omega: IndexSet,
    // Left singular vectors of Û_Ω kept after the cutoff (|Ω| × rank).
    range: DMatrix<f64>,
    // Minimum-norm pseudo-inverse of Û_Ω (k × |Ω|).
    pinv: DMatrix<f64>,
    basis: OrthonormalBasis,
    rank: usize,
}

impl RestrictedFit {
    pub fn new(basis: &OrthonormalBasis, omega: &IndexSet) -> Result<Self> {
        check_len(basis.ambient_dim(), omega.ambient())?;
        if omega.is_empty() {
            return Err(Error::invalid("sample set must be nonempty"));
        }
        let k = basis.dim();
        let p = omega.len();
        if k == 0 {
            return Ok(RestrictedFit {
                omega: omega.clone(),
                range: DMatrix::zeros(p, 0),
                pinv: DMatrix::zeros(0, p),
                basis: basis.clone(),
                rank: 0,
            });
        }
        let restricted = basis.restrict_rows(omega);
        let svd = restricted.svd(true, true);
        let u = svd.u.expect("svd computed with u");
        let v_t = svd.v_t.expect("svd computed with v_t");
        let sigma = &svd.singular_values;
        let sigma_max = sigma.iter().cloned().fold(0.0_f64, f64::max);
        let cutoff = LSTSQ_CUTOFF * sigma_max;
        let keep: Vec<usize> = (0..sigma.len())
            .filter(|&i| sigma[i] > cutoff && sigma[i] > 0.0)
            .collect();
        let rank = keep.len();
        let mut range = DMatrix::zeros(p, rank);
        let mut pinv = DMatrix::zeros(k, p);
        for (c, &i) in keep.iter().enumerate() {
            let ui = u.column(i);
            range.set_column(c, &ui);
            let vi = v_t.row(i).transpose();
            pinv += (vi / sigma[i]) * ui.transpose();
        }
        Ok(RestrictedFit {
            omega: omega.clone(),
            range,
            pinv,
            basis: basis.clone(),
            rank,
        })
    }

    pub fn omega(&self) -> &IndexSet {
        &self.omega
    }

    /// Numerical rank of `Û_Ω`.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// True when `Û_Ω` lost rank relative to the basis dimension.
    pub fn is_degenerate(&self) -> bool {
        self.rank < self.basis.dim()
    }

    /// `‖y_Ω − P_{span Û_Ω} y_Ω‖₂`.
    pub fn residual_norm(&self, y_omega: &DVector<f64>) -> Result<f64> {
        check_len(self.omega.len(), y_omega.len())?;
        if self.rank == 0 {
            return Ok(y_omega.norm());
        }
        let coeffs = self.range.tr_mul(y_omega);
        Ok((y_omega - &self.range * coeffs).norm())
    }

    /// Minimum-norm `c = argmin ‖Û_Ω c − y_Ω‖`.
    pub fn coefficients(&self, y_omega: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.omega.len(), y_omega.len())?;
        Ok(&self.pinv * y_omega)
    }

    /// `Û c` with `c` from [`RestrictedFit::coefficients`].
    pub fn reconstruct(&self, y_omega: &DVector<f64>) -> Result<DVector<f64>> {
        if self.basis.is_empty() {
            return Err(Error::EmptyBasis);
        }
        let c = self.coefficients(y_omega)?;
        Ok(self.basis.matrix() * c)
    }
}

/// Residual norm of a restricted fit together with the degeneracy flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualFit {
    pub norm: f64,
    pub degenerate: bool,
}

/// `‖y_Ω − Û_Ω Û_Ω⁺ y_Ω‖₂`. A rank-deficient `Û_Ω` still yields the
/// minimum-norm residual, with `degenerate` set.
pub fn restricted_residual_norm(
    basis: &OrthonormalBasis,
    omega: &IndexSet,
    y_omega: &DVector<f64>,
) -> Result<ResidualFit> {
    let fit = RestrictedFit::new(basis, omega)?;
    Ok(ResidualFit {
        norm: fit.residual_norm(y_omega)?,
        degenerate: fit.is_degenerate(),
    })
}

/// `Û Û_Ω⁺ y_Ω`, the column completed from its sampled entries.
pub fn reconstruct_column(
    basis: &OrthonormalBasis,
    omega: &IndexSet,
    y_omega: &DVector<f64>,
) -> Result<DVector<f64>> {
    if basis.is_empty() {
        return Err(Error::EmptyBasis);
    }
    RestrictedFit::new(basis, omega)?.reconstruct(y_omega)
}

/// `(m/k) · max_j ‖P e_j‖²`.
pub fn coherence(basis: &OrthonormalBasis) -> Result<f64> {
    if basis.is_empty() {
        return Err(Error::EmptyBasis);
    }
    let m = basis.ambient_dim();
    let max_row = (0..m)
        .map(|j| basis.row_norm_sq(j))
        .fold(0.0_f64, f64::max);
    Ok(m as f64 / basis.dim() as f64 * max_row)
}

/// Angle between `u` and its projection onto `basis`; π/2 for the empty
/// basis.
pub fn vector_subspace_angle(u: &DVector<f64>, basis: &OrthonormalBasis) -> Result<Angle> {
    check_len(basis.ambient_dim(), u.len())?;
    let norm = u.norm();
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    let p = project(basis, u)?;
    let along = p.norm();
    let across = (u - &p).norm();
    Ok(Angle::clamped(across.atan2(along)))
}

/// Angle between the lines spanned by `u` and `v`.
pub fn vector_angle(u: &DVector<f64>, v: &DVector<f64>) -> Result<Angle> {
    check_len(u.len(), v.len())?;
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    let sign = if u.dot(v) < 0.0 { -1.0 } else { 1.0 };
    // chord between the aligned unit vectors is 2·sin(θ/2)
    let chord = ((u / nu) - (v / nv) * sign).norm();
    Ok(Angle::clamped(2.0 * (0.5 * chord).min(1.0).asin()))
}

/// Largest principal angle from `u` into `v`: `max_{x∈U} min_{y∈V} θ(x, y)`.
///
/// Asymmetric. When `dim U > dim V` some direction of `U` is orthogonal to
/// `V` and the result is π/2.
pub fn subspace_subspace_angle(u: &OrthonormalBasis, v: &OrthonormalBasis) -> Result<Angle> {
    check_len(u.ambient_dim(), v.ambient_dim())?;
    if u.is_empty() || v.is_empty() {
        return Err(Error::EmptyBasis);
    }
    if u.dim() > v.dim() {
        return Ok(Angle::RIGHT);
    }
    let cross = v.matrix().tr_mul(u.matrix());
    let cos_min = cross
        .singular_values()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let residual = u.matrix() - v.matrix() * &cross;
    let sin_max = residual
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0_f64, f64::max);
    // Sines resolve small angles, cosines resolve angles near π/2.
    let theta = if sin_max * sin_max < 0.5 {
        sin_max.min(1.0).asin()
    } else {
        cos_min.clamp(0.0, 1.0).acos()
    };
    Ok(Angle::clamped(theta))
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_4;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    fn e(m: usize, i: usize) -> DVector<f64> {
        let mut x = DVector::zeros(m);
        x[i] = 1.0;
        x
    }

    fn basis(vectors: &[DVector<f64>]) -> OrthonormalBasis {
        orthonormalize(vectors, DEFAULT_RANK_TOL).unwrap()
    }

    #[test]
    fn orthonormalize_keeps_orthonormal_input() {
        let b = basis(&[e(3, 0), e(3, 1)]);
        assert_eq!(b.dim(), 2);
        assert!(b.orthonormality_error() <= ORTHO_TOL);
    }

    #[test]
    fn orthonormalize_drops_duplicates() {
        let b = basis(&[e(3, 0), e(3, 0)]);
        assert_eq!(b.dim(), 1);
        assert_abs_diff_eq!(b.column(0), e(3, 0), epsilon = 1e-15);
    }

    #[test]
    fn orthonormalize_drops_dependent_third_vector() {
        let inputs = [v(&[1.0, 1.0, 0.0]), v(&[1.0, -1.0, 0.0]), v(&[2.0, 0.0, 0.0])];
        let b = basis(&inputs);
        assert_eq!(b.dim(), 2);
        for x in &inputs {
            let r = x - project(&b, x).unwrap();
            assert!(r.norm() < 1e-10);
        }
        // the e1-e2 plane: e3 is orthogonal to the span
        assert!(project(&b, &e(3, 2)).unwrap().norm() < 1e-12);
    }

    #[test]
    fn orthonormalize_rejects_mixed_lengths() {
        let err = orthonormalize(&[e(3, 0), e(4, 0)], 1e-12).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn orthonormalize_stays_orthonormal_at_larger_k() {
        // nearly dependent columns stress single-pass Gram-Schmidt
        let m = 60;
        let k = 40;
        let mut vectors = Vec::new();
        for j in 0..k {
            vectors.push(DVector::from_fn(m, |i, _| {
                1.0 / ((i + j + 1) as f64) + if i == j { 1e-3 } else { 0.0 }
            }));
        }
        let b = basis(&vectors);
        assert!(b.orthonormality_error() <= ORTHO_TOL, "{}", b.orthonormality_error());
    }

    #[test]
    fn project_examples() {
        let b = basis(&[e(3, 0)]);
        assert_eq!(project(&b, &v(&[2.0, 3.0, 4.0])).unwrap(), v(&[2.0, 0.0, 0.0]));

        let empty = OrthonormalBasis::empty(3);
        assert_eq!(project(&empty, &v(&[2.0, 3.0, 4.0])).unwrap(), DVector::zeros(3));

        let diag = basis(&[v(&[1.0, 1.0, 0.0])]);
        let p = project(&diag, &e(3, 0)).unwrap();
        assert_abs_diff_eq!(p, v(&[0.5, 0.5, 0.0]), epsilon = 1e-15);
    }

    #[test]
    fn project_rejects_wrong_length() {
        let b = basis(&[e(3, 0)]);
        assert!(project(&b, &e(4, 0)).is_err());
    }

    #[test]
    fn restricted_residual_examples() {
        let b = basis(&[e(4, 0)]);
        let omega = IndexSet::new(4, vec![0, 1]).unwrap();
        let fit = restricted_residual_norm(&b, &omega, &v(&[5.0, 3.0])).unwrap();
        assert_abs_diff_eq!(fit.norm, 3.0, epsilon = 1e-14);
        assert!(!fit.degenerate);

        let empty = OrthonormalBasis::empty(4);
        let fit = restricted_residual_norm(&empty, &omega, &v(&[3.0, 4.0])).unwrap();
        assert_abs_diff_eq!(fit.norm, 5.0, epsilon = 1e-14);
    }

    #[test]
    fn restricted_residual_matches_normal_equations() {
        let b = basis(&[v(&[1.0, 1.0, 1.0])]);
        let omega = IndexSet::new(3, vec![0, 1]).unwrap();
        let y = v(&[1.0, 0.0]);
        let got = restricted_residual_norm(&b, &omega, &y).unwrap().norm;

        // normal equations: c = (aᵀa)⁻¹ aᵀy with a = Û_Ω
        let a = b.restrict_rows(&omega);
        let ata = (a.transpose() * &a)[(0, 0)];
        let aty = (a.transpose() * &y)[0];
        let c = aty / ata;
        let oracle = (&y - &a * DVector::from_element(1, c)).norm();
        assert_abs_diff_eq!(got, oracle, epsilon = 1e-14);
        assert_abs_diff_eq!(got, 2.0_f64.sqrt() / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn restricted_residual_flags_degeneracy() {
        // row 2 of e1 is zero, so Û_Ω = 0 for Ω = {2}
        let b = basis(&[e(3, 0)]);
        let omega = IndexSet::new(3, vec![2]).unwrap();
        let fit = restricted_residual_norm(&b, &omega, &v(&[2.0])).unwrap();
        assert!(fit.degenerate);
        assert_abs_diff_eq!(fit.norm, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn reconstruct_examples() {
        let b = basis(&[e(3, 0)]);
        let omega = IndexSet::new(3, vec![0]).unwrap();
        let x = reconstruct_column(&b, &omega, &v(&[7.0])).unwrap();
        assert_abs_diff_eq!(x, v(&[7.0, 0.0, 0.0]), epsilon = 1e-14);

        let b = basis(&[v(&[1.0, 1.0, 1.0])]);
        let omega = IndexSet::new(3, vec![0, 1]).unwrap();
        let x = reconstruct_column(&b, &omega, &v(&[1.0, 0.0])).unwrap();
        // c = (y·u_Ω)/‖u_Ω‖² = (1/√3)/(2/3) = √3/2
        let c = 3.0_f64.sqrt() / 2.0;
        assert_abs_diff_eq!(x, b.column(0) * c, epsilon = 1e-14);
        assert_abs_diff_eq!(x, v(&[0.5, 0.5, 0.5]), epsilon = 1e-14);
    }

    #[test]
    fn reconstruct_interpolates_span_members() {
        let b = basis(&[v(&[1.0, 2.0, 0.0, 1.0, 3.0]), v(&[0.0, 1.0, 1.0, -1.0, 2.0])]);
        let y = b.column(0) * 0.7 - b.column(1) * 1.3;
        let omega = IndexSet::new(5, vec![0, 2, 4]).unwrap();
        let x = reconstruct_column(&b, &omega, &omega.gather(&y).unwrap()).unwrap();
        assert_abs_diff_eq!(x, y, epsilon = 1e-9);
    }

    #[test]
    fn reconstruct_needs_a_basis() {
        let omega = IndexSet::full(3);
        let err = reconstruct_column(&OrthonormalBasis::empty(3), &omega, &v(&[1.0, 2.0, 3.0]));
        assert!(matches!(err, Err(Error::EmptyBasis)));
    }

    #[test]
    fn coherence_examples() {
        assert_abs_diff_eq!(coherence(&basis(&[e(4, 0)])).unwrap(), 4.0, epsilon = 1e-14);
        let flat = basis(&[v(&[1.0, 1.0, 1.0, 1.0])]);
        assert_abs_diff_eq!(coherence(&flat).unwrap(), 1.0, epsilon = 1e-14);
        let mixed = basis(&[e(4, 0), v(&[0.0, 1.0, 1.0, 0.0])]);
        // row norms: 1, 1/2, 1/2, 0
        assert_abs_diff_eq!(coherence(&mixed).unwrap(), 2.0, epsilon = 1e-14);
        assert!(matches!(
            coherence(&OrthonormalBasis::empty(4)),
            Err(Error::EmptyBasis)
        ));
    }

    #[test]
    fn vector_subspace_angle_examples() {
        let b1 = basis(&[e(3, 0)]);
        assert_eq!(vector_subspace_angle(&e(3, 0), &b1).unwrap().radians(), 0.0);
        let b2 = basis(&[e(3, 1)]);
        assert_abs_diff_eq!(
            vector_subspace_angle(&e(3, 0), &b2).unwrap().radians(),
            FRAC_PI_2,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            vector_subspace_angle(&v(&[1.0, 1.0, 0.0]), &b1).unwrap().radians(),
            (1.0 / 2.0_f64.sqrt()).acos(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            vector_subspace_angle(&e(3, 0), &OrthonormalBasis::empty(3))
                .unwrap()
                .radians(),
            FRAC_PI_2
        );
        assert!(matches!(
            vector_subspace_angle(&DVector::zeros(3), &b1),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn subspace_angle_examples() {
        let u = basis(&[e(3, 0), e(3, 1)]);
        assert_eq!(subspace_subspace_angle(&u, &u).unwrap().radians(), 0.0);

        let u = basis(&[e(3, 0)]);
        let v23 = basis(&[e(3, 1), e(3, 2)]);
        assert_abs_diff_eq!(
            subspace_subspace_angle(&u, &v23).unwrap().radians(),
            FRAC_PI_2,
            epsilon = 1e-15
        );

        let alpha: f64 = 0.3;
        let u = basis(&[v(&[alpha.cos(), alpha.sin(), 0.0])]);
        let v1 = basis(&[e(3, 0)]);
        assert_abs_diff_eq!(
            subspace_subspace_angle(&u, &v1).unwrap().radians(),
            0.3,
            epsilon = 1e-14
        );
    }

    #[test]
    fn subspace_angle_is_asymmetric() {
        let small = basis(&[e(3, 0)]);
        let big = basis(&[e(3, 0), e(3, 1)]);
        assert_eq!(subspace_subspace_angle(&small, &big).unwrap().radians(), 0.0);
        assert_eq!(subspace_subspace_angle(&big, &small).unwrap(), Angle::RIGHT);
    }

    #[test]
    fn subspace_angle_rejects_ambient_mismatch() {
        let a = basis(&[e(3, 0)]);
        let b = basis(&[e(4, 0)]);
        assert!(matches!(
            subspace_subspace_angle(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn vector_angle_is_line_angle() {
        let a = v(&[1.0, 0.0]);
        let b = v(&[1.0, 1.0]);
        assert_abs_diff_eq!(vector_angle(&a, &b).unwrap().radians(), FRAC_PI_4, epsilon = 1e-15);
        assert_abs_diff_eq!(vector_angle(&a, &(-&b)).unwrap().radians(), FRAC_PI_4, epsilon = 1e-15);
        let t = 1e-9_f64;
        let c = v(&[t.cos(), t.sin()]);
        assert_abs_diff_eq!(vector_angle(&a, &c).unwrap().radians(), t, epsilon = 1e-20);
    }

    #[test]
    fn index_set_validation() {
        assert!(IndexSet::new(5, vec![0, 0]).is_err());
        assert!(IndexSet::new(5, vec![3, 1]).is_err());
        assert!(IndexSet::new(5, vec![5]).is_err());
        let s = IndexSet::from_unsorted(5, vec![4, 1, 2]).unwrap();
        assert_eq!(s.indices(), &[1, 2, 4]);
    }

    #[test]
    fn dense_matrix_rejects_non_finite() {
        let mut m = DMatrix::zeros(2, 2);
        m[(1, 0)] = f64::NAN;
        assert!(matches!(
            DenseMatrix::new(m),
            Err(Error::NonFinite { row: 1, col: 0 })
        ));
        assert!(DenseMatrix::new(DMatrix::zeros(0, 3)).is_err());
    }
}
