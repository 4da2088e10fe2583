//! Minimal dense real linear algebra used by every other module: vectors,
//! matrices, subspaces with orthogonal projectors, spectral tools and small
//! SPD solves.
//!
//! Everything is dense and desk-scale (n up to a couple of thousands); the
//! rate layer needs dense eigen-solves anyway, so no sparse machinery is
//! provided.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Convenience constructor for tests and examples.
pub fn vector(entries: &[f64]) -> Vector {
    Vector::from_row_slice(entries)
}

/// Row-major matrix constructor.
pub fn matrix(rows: usize, cols: usize, entries: &[f64]) -> Matrix {
    Matrix::from_row_slice(rows, cols, entries)
}

pub fn all_finite_vec(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

pub fn all_finite_mat(m: &Matrix) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// A closed vector subspace of R^n stored through an orthonormal basis.
///
/// The basis columns are orthonormal by construction, which makes the
/// orthogonal projector `B Bᵀ` exact and the orthogonal complement free
/// (`Id − B Bᵀ`).
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    ambient_dim: usize,
    /// n × d matrix with orthonormal columns spanning the subspace.
    basis: Matrix,
}

impl Subspace {
    /// Builds a subspace from an arbitrary spanning set (matrix columns),
    /// using modified Gram–Schmidt with one re-orthogonalization pass.
    /// Linearly dependent columns are dropped.
    pub fn from_spanning(ambient_dim: usize, spanning: &[Vector]) -> Result<Self> {
        let mut basis: Vec<Vector> = Vec::new();
        for (idx, v) in spanning.iter().enumerate() {
            if v.len() != ambient_dim {
                return Err(Error::invalid(format!(
                    "spanning vector {idx} has dimension {}, expected {ambient_dim}",
                    v.len()
                )));
            }
            if !all_finite_vec(v) {
                return Err(Error::invalid(format!(
                    "spanning vector {idx} has non-finite entries"
                )));
            }
            let original_norm = v.norm();
            if original_norm == 0.0 {
                continue;
            }
            let mut w = v.clone();
            // Two MGS sweeps ("twice is enough") keep the basis orthonormal
            // to machine precision even for ill-conditioned spanning sets.
            for _ in 0..2 {
                for b in &basis {
                    let c = b.dot(&w);
                    w -= b * c;
                }
            }
            let res_norm = w.norm();
            if res_norm > 1e-10 * original_norm {
                basis.push(w / res_norm);
            }
        }
        let dim = basis.len();
        let mut b = Matrix::zeros(ambient_dim, dim);
        for (j, col) in basis.iter().enumerate() {
            b.set_column(j, col);
        }
        Ok(Subspace {
            ambient_dim,
            basis: b,
        })
    }

    /// The whole space R^n.
    pub fn full(ambient_dim: usize) -> Self {
        Subspace {
            ambient_dim,
            basis: Matrix::identity(ambient_dim, ambient_dim),
        }
    }

    /// The trivial subspace {0}.
    pub fn zero(ambient_dim: usize) -> Self {
        Subspace {
            ambient_dim,
            basis: Matrix::zeros(ambient_dim, 0),
        }
    }

    /// Subspace spanned by the given coordinate axes.
    pub fn from_coordinates(ambient_dim: usize, coords: &[usize]) -> Result<Self> {
        let mut cols = Vec::with_capacity(coords.len());
        for &i in coords {
            if i >= ambient_dim {
                return Err(Error::invalid(format!(
                    "coordinate {i} out of range for dimension {ambient_dim}"
                )));
            }
            let mut e = Vector::zeros(ambient_dim);
            e[i] = 1.0;
            cols.push(e);
        }
        Self::from_spanning(ambient_dim, &cols)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Dimension of the subspace itself.
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn is_full(&self) -> bool {
        self.dim() == self.ambient_dim
    }

    /// Orthogonal projection of `x` onto the subspace.
    pub fn project(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.ambient_dim {
            return Err(Error::invalid(format!(
                "cannot project vector of dimension {} onto subspace of ambient dimension {}",
                x.len(),
                self.ambient_dim
            )));
        }
        Ok(&self.basis * (self.basis.transpose() * x))
    }

    /// Projection onto the orthogonal complement.
    pub fn project_complement(&self, x: &Vector) -> Result<Vector> {
        Ok(x - self.project(x)?)
    }

    /// Dense projector matrix `B Bᵀ`.
    pub fn projector(&self) -> Matrix {
        &self.basis * self.basis.transpose()
    }

    /// Euclidean distance from `x` to the subspace.
    pub fn distance(&self, x: &Vector) -> Result<f64> {
        Ok(self.project_complement(x)?.norm())
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> Result<bool> {
        Ok(self.distance(x)? <= tol * (1.0 + x.norm()))
    }
}

const POWER_ITER_PER_DIM: usize = 10;
/// Small matrices get a floor on the iteration cap: the 10·n budget is meant
/// for desk-scale problems and is too tight when n is tiny and the top two
/// eigenvalues nearly coincide.
const POWER_ITER_MIN_DIM: usize = 200;

/// Largest singular value of `m` within relative tolerance `tol`, computed by
/// power iteration on `mᵀm` from a deterministic start.
///
/// The all-ones start vector can be exactly orthogonal to the dominant
/// eigenspace on hand-crafted inputs; a second deterministic ramp start
/// covers that case while keeping the result reproducible.
pub fn spectral_norm(m: &Matrix, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::invalid("spectral_norm requires tol > 0"));
    }
    if !all_finite_mat(m) {
        return Err(Error::invalid("spectral_norm requires finite entries"));
    }
    let n = m.ncols();
    if n == 0 || m.nrows() == 0 {
        return Ok(0.0);
    }
    let gram = m.transpose() * m;
    let starts: [fn(usize) -> f64; 2] = [|_| 1.0, |i| 1.0 + (i as f64 + 1.0).sqrt()];
    let mut last_estimate = 0.0;
    for (attempt, start) in starts.iter().enumerate() {
        let mut v = Vector::from_fn(n, |i, _| start(i));
        v /= v.norm();
        let mut lambda = 0.0;
        let cap = POWER_ITER_PER_DIM * n.max(POWER_ITER_MIN_DIM);
        for _ in 0..cap {
            let w = &gram * &v;
            let wnorm = w.norm();
            if wnorm == 0.0 {
                // v lies in the null space; the ramp start will move off it
                // unless the matrix itself is zero.
                lambda = 0.0;
                break;
            }
            let new_lambda = v.dot(&w);
            v = w / wnorm;
            if (new_lambda - lambda).abs() <= tol * new_lambda.abs().max(f64::MIN_POSITIVE) {
                return Ok(new_lambda.max(0.0).sqrt());
            }
            lambda = new_lambda;
        }
        last_estimate = lambda.max(0.0).sqrt();
        if lambda == 0.0 && attempt + 1 < starts.len() {
            continue;
        }
        if lambda > 0.0 {
            return Err(Error::NumericalFailure {
                message: format!("power iteration did not converge within {cap} iterations"),
                last_estimate: Some(last_estimate),
            });
        }
    }
    // Both deterministic starts were annihilated; only the zero matrix does
    // this up to rounding.
    if gram.norm() <= f64::EPSILON * (n as f64) {
        Ok(0.0)
    } else {
        Err(Error::NumericalFailure {
            message: "power iteration stalled on a non-zero matrix".into(),
            last_estimate: Some(last_estimate),
        })
    }
}

/// Largest eigenvalue modulus of a square matrix, from the full complex
/// eigenvalue set of a dense Schur decomposition. Power iteration alone is
/// not enough here: the inputs are non-symmetric and may carry complex
/// eigenvalue pairs.
pub fn spectral_radius(m: &Matrix, tol: f64) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid("spectral_radius requires a square matrix"));
    }
    if !all_finite_mat(m) {
        return Err(Error::invalid("spectral_radius requires finite entries"));
    }
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let eps = tol.max(f64::EPSILON);
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), eps, 0).ok_or_else(|| {
        Error::numerical("Schur decomposition did not converge for spectral radius")
    })?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max))
}

/// Solves `a x = b` for symmetric positive definite `a` via Cholesky, with a
/// single iterative-refinement pass to meet the 1e-9 relative residual
/// contract.
pub fn solve_spd(a: &Matrix, b: &Vector) -> Result<Vector> {
    if a.nrows() != a.ncols() {
        return Err(Error::invalid("solve_spd requires a square matrix"));
    }
    if a.nrows() != b.len() {
        return Err(Error::invalid("solve_spd dimension mismatch"));
    }
    let scale = a.norm();
    let sym_defect = (a - a.transpose()).norm();
    if sym_defect > 1e-8 * scale.max(1.0) {
        return Err(Error::invalid("solve_spd requires a symmetric matrix"));
    }
    let chol = nalgebra::linalg::Cholesky::new(a.clone())
        .ok_or_else(|| Error::invalid("solve_spd requires a positive definite matrix"))?;
    let mut x = chol.solve(b);
    let mut residual = b - a * &x;
    let target = 1e-9 * b.norm();
    if residual.norm() > target {
        x += chol.solve(&residual);
        residual = b - a * &x;
        if residual.norm() > target {
            return Err(Error::NumericalFailure {
                message: "solve_spd residual above tolerance after refinement".into(),
                last_estimate: Some(residual.norm()),
            });
        }
    }
    Ok(x)
}

/// Inverse of an SPD matrix through its Cholesky factorization.
pub fn invert_spd(a: &Matrix) -> Result<Matrix> {
    if a.nrows() != a.ncols() {
        return Err(Error::invalid("invert_spd requires a square matrix"));
    }
    let sym_defect = (a - a.transpose()).norm();
    if sym_defect > 1e-8 * a.norm().max(1.0) {
        return Err(Error::invalid("invert_spd requires a symmetric matrix"));
    }
    nalgebra::linalg::Cholesky::new(a.clone())
        .map(|c| c.inverse())
        .ok_or_else(|| Error::invalid("invert_spd requires a positive definite matrix"))
}

/// Limit `lim_k M^k` of an averaged (hence non-expansive) matrix, i.e. the
/// spectral projector onto the eigenvalue-1 eigenspace.
///
/// For a non-expansive `M`, fixed vectors of `M` are also fixed by `Mᵀ`, so
/// `fix(M) ⟂ ran(Id − M)` and the spectral projector is the *orthogonal*
/// projector onto `null(Id − M)`. Singular values of `Id − M` below `tol`
/// count as zero, mirroring "eigenvalues within tol of 1 count as 1".
pub fn limit_projector(m: &Matrix, tol: f64) -> Result<Matrix> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid("limit_projector requires a square matrix"));
    }
    let n = m.nrows();
    let id = Matrix::identity(n, n);
    let svd = (&id - m).svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::numerical("SVD did not return right singular vectors"))?;
    let mut q = Matrix::zeros(n, n);
    let mut rank = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= tol {
            q.set_column(rank, &v_t.row(i).transpose());
            rank += 1;
        }
    }
    let q = q.columns(0, rank).into_owned();
    let p = &q * q.transpose();
    // The projector must commute with M up to roundoff; a violation means M
    // was not non-expansive with a semisimple unit eigenvalue.
    let defect = (m * &p - &p).norm().max((&p * m - &p).norm());
    if defect > 1e-7 * (1.0 + m.norm()) {
        return Err(Error::NumericalFailure {
            message: "limit projector does not commute with the matrix; input is not an averaged map"
                .into(),
            last_estimate: Some(defect),
        });
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {a} ≈ {b} (tol {tol})");
    }

    #[test]
    fn project_diagonal_symmetry() {
        let s = Subspace::from_spanning(2, &[vector(&[1.0, 1.0])]).unwrap();
        let p = s.project(&vector(&[2.0, 0.0])).unwrap();
        assert!((p - vector(&[1.0, 1.0])).norm() < 1e-12);
    }

    #[test]
    fn project_full_space_is_identity() {
        let s = Subspace::full(3);
        let x = vector(&[0.3, -2.0, 7.5]);
        assert!((s.project(&x).unwrap() - &x).norm() < 1e-12);
    }

    #[test]
    fn project_zero_subspace() {
        let s = Subspace::zero(2);
        let p = s.project(&vector(&[3.0, -4.0])).unwrap();
        assert_eq!(p, vector(&[0.0, 0.0]));
    }

    #[test]
    fn project_dimension_mismatch_rejected() {
        let s = Subspace::full(3);
        assert!(s.project(&vector(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn orthonormal_basis_from_dependent_spanning_set() {
        let s = Subspace::from_spanning(
            3,
            &[
                vector(&[1.0, 1.0, 0.0]),
                vector(&[2.0, 2.0, 0.0]),
                vector(&[1.0, 0.0, 1.0]),
            ],
        )
        .unwrap();
        assert_eq!(s.dim(), 2);
        let b = s.basis();
        let gram = b.transpose() * b;
        assert!((gram - Matrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn projector_idempotent_and_pythagoras() {
        let mut rng = deterministic_rng(7);
        let s = Subspace::from_spanning(6, &[rand_vec(&mut rng, 6), rand_vec(&mut rng, 6)]).unwrap();
        for _ in 0..100 {
            let x = rand_vec(&mut rng, 6);
            let px = s.project(&x).unwrap();
            let ppx = s.project(&px).unwrap();
            assert!((&px - &ppx).norm() <= 1e-10 * x.norm().max(1.0));
            let qx = s.project_complement(&x).unwrap();
            let lhs = x.norm_squared();
            let rhs = px.norm_squared() + qx.norm_squared();
            assert!((lhs - rhs).abs() <= 1e-9 * lhs.max(1.0));
            assert!(px.norm() <= x.norm() + 1e-12);
        }
    }

    #[test]
    fn spectral_norm_identity_and_diag() {
        assert_close(spectral_norm(&Matrix::identity(3, 3), 1e-12).unwrap(), 1.0, 1e-9);
        let d = matrix(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        assert_close(spectral_norm(&d, 1e-12).unwrap(), 2.0, 1e-9);
    }

    #[test]
    fn spectral_norm_nilpotent() {
        // singular values of [[0,1],[0,0]] are {1, 0}: sqrt of eig(mᵀm)
        let m = matrix(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert_close(spectral_norm(&m, 1e-12).unwrap(), 1.0, 1e-9);
    }

    #[test]
    fn spectral_norm_zero_matrix() {
        assert_eq!(spectral_norm(&Matrix::zeros(3, 3), 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn spectral_norm_survives_adversarial_start() {
        // all-ones is exactly orthogonal to the dominant eigenvector (1,-1)
        let m = matrix(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert_close(spectral_norm(&m, 1e-12).unwrap(), 2.0, 1e-8);
    }

    #[test]
    fn spectral_norm_lower_bound_on_probes() {
        let mut rng = deterministic_rng(11);
        let m = rand_mat(&mut rng, 5, 5);
        let norm = spectral_norm(&m, 1e-12).unwrap();
        for _ in 0..50 {
            let v = rand_vec(&mut rng, 5);
            assert!(norm + 1e-9 >= (&m * &v).norm() / v.norm());
        }
    }

    #[test]
    fn spectral_radius_diag() {
        let d = matrix(2, 2, &[0.5, 0.0, 0.0, -0.25]);
        assert_close(spectral_radius(&d, 1e-12).unwrap(), 0.5, 1e-10);
    }

    #[test]
    fn spectral_radius_complex_pair() {
        // 0.3 times a quarter-turn rotation: characteristic polynomial
        // t^2 + 0.09 = 0, eigenvalues ±0.3i.
        let m = matrix(2, 2, &[0.0, -0.3, 0.3, 0.0]);
        assert_close(spectral_radius(&m, 1e-12).unwrap(), 0.3, 1e-10);
    }

    #[test]
    fn spectral_radius_zero() {
        assert_close(spectral_radius(&Matrix::zeros(3, 3), 1e-12).unwrap(), 0.0, 1e-15);
    }

    #[test]
    fn solve_spd_identity_and_diag() {
        let x = solve_spd(&Matrix::identity(2, 2), &vector(&[1.0, 2.0])).unwrap();
        assert!((x - vector(&[1.0, 2.0])).norm() < 1e-12);
        let x = solve_spd(&matrix(2, 2, &[2.0, 0.0, 0.0, 4.0]), &vector(&[2.0, 4.0])).unwrap();
        assert!((x - vector(&[1.0, 1.0])).norm() < 1e-12);
    }

    #[test]
    fn solve_spd_two_by_two() {
        // [[2,1],[1,2]] (3,3)ᵀ -> (1,1)ᵀ by hand
        let a = matrix(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let x = solve_spd(&a, &vector(&[3.0, 3.0])).unwrap();
        assert!((x - vector(&[1.0, 1.0])).norm() < 1e-12);
    }

    #[test]
    fn solve_spd_rejects_non_spd() {
        let a = matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(solve_spd(&a, &vector(&[1.0, 1.0])).is_err());
        let asym = matrix(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(solve_spd(&asym, &vector(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn solve_spd_roundtrip_random() {
        let mut rng = deterministic_rng(3);
        for _ in 0..20 {
            let g = rand_mat(&mut rng, 4, 4);
            let a = &g * g.transpose() + Matrix::identity(4, 4);
            let b = rand_vec(&mut rng, 4);
            let x = solve_spd(&a, &b).unwrap();
            assert!((&a * &x - &b).norm() <= 1e-9 * b.norm());
        }
    }

    #[test]
    fn limit_projector_of_contraction_is_zero() {
        let m = matrix(2, 2, &[0.5, 0.0, 0.0, 0.25]);
        let p = limit_projector(&m, 1e-10).unwrap();
        assert!(p.norm() < 1e-12);
    }

    #[test]
    fn limit_projector_keeps_fixed_subspace() {
        let m = matrix(2, 2, &[1.0, 0.0, 0.0, 0.3]);
        let p = limit_projector(&m, 1e-10).unwrap();
        assert!((p - matrix(2, 2, &[1.0, 0.0, 0.0, 0.0])).norm() < 1e-10);
    }

    pub(crate) fn deterministic_rng(seed: u64) -> impl rand::Rng {
        use rand::SeedableRng;
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    pub(crate) fn rand_vec(rng: &mut impl rand::Rng, n: usize) -> Vector {
        Vector::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    pub(crate) fn rand_mat(rng: &mut impl rand::Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    proptest! {
        #[test]
        fn projection_never_expands(entries in proptest::collection::vec(-10.0f64..10.0, 4)) {
            let s = Subspace::from_spanning(4, &[vector(&[1.0, 0.5, 0.0, 0.0]), vector(&[0.0, 0.0, 1.0, -1.0])]).unwrap();
            let x = vector(&entries);
            let px = s.project(&x).unwrap();
            prop_assert!(px.norm() <= x.norm() + 1e-10);
        }
    }
}
