//! Smooth terms `F` and their subspace restriction `G = F ∘ P_V`, with
//! gradients, Hessians and the Lipschitz moduli β and β_V that bound the
//! admissible step-sizes.

use crate::error::{Error, Result};
use crate::linear::{all_finite_mat, all_finite_vec, spectral_norm, Matrix, Subspace, Vector};

/// A convex, twice continuously differentiable term. Only the quadratic is
/// shipped, but the solver and rate layers only go through this surface.
pub trait Smooth {
    fn dim(&self) -> usize;
    fn eval(&self, x: &Vector) -> Result<f64>;
    fn grad(&self, x: &Vector) -> Result<Vector>;
    /// Dense Hessian at `x` (constant for quadratics).
    fn hessian(&self, x: &Vector) -> Result<Matrix>;
}

/// Least-squares data term `F(x) = ½‖Kx − f‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothQuadratic {
    k: Matrix,
    f: Vector,
}

impl SmoothQuadratic {
    pub fn new(k: Matrix, f: Vector) -> Result<Self> {
        if k.nrows() != f.len() {
            return Err(Error::invalid(format!(
                "K has {} rows but target has length {}",
                k.nrows(),
                f.len()
            )));
        }
        if !all_finite_mat(&k) || !all_finite_vec(&f) {
            return Err(Error::invalid("K and f must be finite"));
        }
        Ok(SmoothQuadratic { k, f })
    }

    pub fn operator(&self) -> &Matrix {
        &self.k
    }

    pub fn target(&self) -> &Vector {
        &self.f
    }

    fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.len() != self.k.ncols() {
            return Err(Error::invalid(format!(
                "expected dimension {}, got {}",
                self.k.ncols(),
                x.len()
            )));
        }
        Ok(())
    }
}

impl Smooth for SmoothQuadratic {
    fn dim(&self) -> usize {
        self.k.ncols()
    }

    fn eval(&self, x: &Vector) -> Result<f64> {
        self.check_dim(x)?;
        Ok(0.5 * (&self.k * x - &self.f).norm_squared())
    }

    fn grad(&self, x: &Vector) -> Result<Vector> {
        self.check_dim(x)?;
        Ok(self.k.transpose() * (&self.k * x - &self.f))
    }

    fn hessian(&self, _x: &Vector) -> Result<Matrix> {
        Ok(self.k.transpose() * &self.k)
    }
}

/// Relative spectral tolerance used when computing Lipschitz moduli.
const MODULUS_TOL: f64 = 1e-9;

/// Lipschitz moduli `(β, β_V)` of ∇F and ∇G: the reciprocals of the Hessian
/// norm and of the V-restricted Hessian norm. `β_V = +∞` signals that the
/// restricted Hessian vanishes (∇G is constant); `β_V ≥ β` always.
pub fn lipschitz_moduli<S: Smooth>(term: &S, v: &Subspace) -> Result<(f64, f64)> {
    if v.ambient_dim() != term.dim() {
        return Err(Error::invalid("subspace dimension does not match smooth term"));
    }
    let h = term.hessian(&Vector::zeros(term.dim()))?;
    let norm = spectral_norm(&h, MODULUS_TOL)?;
    if norm == 0.0 {
        return Err(Error::invalid("zero smooth term has no finite Lipschitz modulus"));
    }
    let beta = 1.0 / norm;
    let p = v.projector();
    let restricted = &p * &h * &p;
    let restricted_norm = spectral_norm(&restricted, MODULUS_TOL)?;
    let beta_v = if restricted_norm <= f64::EPSILON * norm {
        f64::INFINITY
    } else {
        1.0 / restricted_norm
    };
    Ok((beta, beta_v))
}

/// The restriction `G = F ∘ P_V` together with its cached moduli.
///
/// `∇G = P_V ∘ ∇F ∘ P_V` is (1/β_V)-Lipschitz with β_V ≥ β, which widens the
/// admissible step-size interval compared to running on F directly.
#[derive(Debug, Clone)]
pub struct Restricted<S: Smooth> {
    base: S,
    v: Subspace,
    beta: f64,
    beta_v: f64,
}

pub type RestrictedQuadratic = Restricted<SmoothQuadratic>;

impl<S: Smooth> Restricted<S> {
    pub fn new(base: S, v: Subspace) -> Result<Self> {
        let (beta, beta_v) = lipschitz_moduli(&base, &v)?;
        debug_assert!(beta_v >= beta - 1e-12);
        Ok(Restricted { base, v, beta, beta_v })
    }

    pub fn base(&self) -> &S {
        &self.base
    }

    pub fn subspace(&self) -> &Subspace {
        &self.v
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn beta_v(&self) -> f64 {
        self.beta_v
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn eval_g(&self, x: &Vector) -> Result<f64> {
        self.base.eval(&self.v.project(x)?)
    }

    /// `∇G(x) = P_V ∇F(P_V x)`; the output lies in V.
    pub fn grad_g(&self, x: &Vector) -> Result<Vector> {
        let px = self.v.project(x)?;
        self.v.project(&self.base.grad(&px)?)
    }

    /// `H_G = P_V ∇²F P_V` at the given point.
    pub fn hessian_g(&self, x: &Vector) -> Result<Matrix> {
        let p = self.v.projector();
        Ok(&p * self.base.hessian(x)? * &p)
    }
}
