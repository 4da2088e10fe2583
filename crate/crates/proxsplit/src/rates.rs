//! Local linear-rate certification: assembles the linearized fixed-point
//! matrices at a converged anchor, computes the limit projector and the
//! spectral contraction factor, and compares the prediction against the
//! observed decay of a trajectory.

use crate::diagnostics::{Anchor, IdentificationReport};
use crate::error::{Error, Result};
use crate::linear::{invert_spd, limit_projector, spectral_radius, Matrix, Vector};
use crate::regularizers::{default_signature_tol, Regularizer};
use crate::smooth::Smooth;
use crate::solvers::{FdrProblem, GammaRule, TosProblem, Trajectory};

/// Eigenvalues of the one-step matrix within this distance of 1 count as 1
/// when extracting the limit projector.
pub const UNIT_EIGENVALUE_TOL: f64 = 1e-10;

/// Common surface of the FDR and TOS linearizations used by the certifier.
pub trait RateLinearization {
    /// The one-step matrix (M_{γ,λ} or L_{γ,λ}).
    fn one_step(&self) -> &Matrix;
    /// The limit `lim_k` of its powers.
    fn limit(&self) -> &Matrix;
    /// Whether every non-smooth piece is locally polyhedral at the anchor.
    fn is_polyhedral(&self) -> bool;
}

/// Linearization of the FDR fixed-point map at the anchor.
#[derive(Debug, Clone)]
pub struct LinearizationFdr {
    pub h_g: Matrix,
    pub h_rbar: Matrix,
    pub w_rbar: Matrix,
    pub m_rbar: Matrix,
    pub m_gamma: Matrix,
    pub m_gamma_lambda: Matrix,
    pub m_inf: Matrix,
    pub gamma: f64,
    pub lambda: f64,
    pub margin: f64,
    polyhedral: bool,
}

impl RateLinearization for LinearizationFdr {
    fn one_step(&self) -> &Matrix {
        &self.m_gamma_lambda
    }
    fn limit(&self) -> &Matrix {
        &self.m_inf
    }
    fn is_polyhedral(&self) -> bool {
        self.polyhedral
    }
}

/// Shared assembly of `Id + 2 A B − A − B − γ A H B` followed by relaxation
/// and the limit projector. For FDR, `B = P_V` and `H = H_G` (which already
/// commutes with P_V); for TOS, `B = M_J̃` and `H = H_F`.
fn assemble_one_step(
    a: &Matrix,
    b: &Matrix,
    h: &Matrix,
    gamma: f64,
    lambda: f64,
) -> (Matrix, Matrix) {
    let n = a.nrows();
    let id = Matrix::identity(n, n);
    let core = &id + 2.0 * a * b - a - b - gamma * a * h * b;
    let relaxed = (1.0 - lambda) * &id + lambda * &core;
    (core, relaxed)
}

/// Builds the FDR linearization at the anchor: tangent projector of the
/// anchor's signature, scaled Riemannian Hessian `H_R̄ = γ ∇²_M R`,
/// `W_R̄ = (Id + H_R̄)^{−1}`, `M_R̄ = T W_R̄ T`, then the one-step matrix and
/// its limit.
pub fn build_fdr_linearization<S: Smooth>(
    anchor: &Anchor,
    problem: &FdrProblem<S>,
    gamma: f64,
    lambda: f64,
) -> Result<LinearizationFdr> {
    let n = anchor.dim();
    let x_star = &anchor.x_star;
    let sig = problem.reg.signature(x_star, default_signature_tol(x_star))?;
    let t = problem.reg.tangent_projector(&sig, n)?;
    // R̄ = γR − ⟨·, x*−z*−γ∇G(x*)⟩: the linear term has no Hessian, so only
    // γ times the Riemannian Hessian of R survives.
    let h_rbar = gamma * problem.reg.riemannian_hessian(x_star, &sig)?;
    let id = Matrix::identity(n, n);
    let w_rbar = invert_spd(&(&id + &h_rbar))?;
    let m_rbar = &t * &w_rbar * &t;
    let h_g = problem.smooth.hessian_g(x_star)?;
    let p_v = problem.subspace().projector();
    let (m_gamma, m_gamma_lambda) = assemble_one_step(&m_rbar, &p_v, &h_g, gamma, lambda);
    let m_inf = limit_projector(&m_gamma_lambda, UNIT_EIGENVALUE_TOL)?;
    let subgrad = (x_star - &anchor.z_star) / gamma - problem.smooth.grad_g(x_star)?;
    let margin = problem.reg.nondegeneracy_margin(x_star, &subgrad)?;
    Ok(LinearizationFdr {
        h_g,
        h_rbar,
        w_rbar,
        m_rbar,
        m_gamma,
        m_gamma_lambda,
        m_inf,
        gamma,
        lambda,
        margin,
        polyhedral: problem.reg.is_polyhedral(),
    })
}

/// Converged anchor of a TOS run: `x* = prox_{γJ}(z*)`.
#[derive(Debug, Clone)]
pub struct TosAnchor {
    pub z_star: Vector,
    pub x_star: Vector,
    pub gamma: f64,
}

impl TosAnchor {
    pub fn from_reference(reference: &Trajectory, gamma: f64, problem: &TosProblem) -> Result<Self> {
        if reference.terminal_residual > crate::diagnostics::ANCHOR_RESIDUAL_TOL {
            return Err(Error::invalid(format!(
                "TOS reference run did not converge: terminal residual {}",
                reference.terminal_residual
            )));
        }
        let z_star = reference.last().z.clone();
        let x_star = problem.reg_j.prox(gamma, &z_star)?;
        Ok(TosAnchor { z_star, x_star, gamma })
    }
}

/// Linearization of the TOS fixed-point map at the anchor.
#[derive(Debug, Clone)]
pub struct LinearizationTos {
    pub h_f: Matrix,
    pub h_jtilde: Matrix,
    pub h_rtilde: Matrix,
    pub w_jtilde: Matrix,
    pub w_rtilde: Matrix,
    pub m_jtilde: Matrix,
    pub m_rtilde: Matrix,
    pub l_gamma: Matrix,
    pub l_gamma_lambda: Matrix,
    pub l_inf: Matrix,
    pub gamma: f64,
    pub lambda: f64,
    pub margin_r: f64,
    pub margin_j: f64,
    polyhedral: bool,
}

impl RateLinearization for LinearizationTos {
    fn one_step(&self) -> &Matrix {
        &self.l_gamma_lambda
    }
    fn limit(&self) -> &Matrix {
        &self.l_inf
    }
    fn is_polyhedral(&self) -> bool {
        self.polyhedral
    }
}

fn tangent_block(reg: &Regularizer, x_star: &Vector, gamma: f64) -> Result<(Matrix, Matrix, Matrix)> {
    let n = x_star.len();
    let sig = reg.signature(x_star, default_signature_tol(x_star))?;
    let t = reg.tangent_projector(&sig, n)?;
    let h = gamma * reg.riemannian_hessian(x_star, &sig)?;
    let w = invert_spd(&(Matrix::identity(n, n) + &h))?;
    let m = &t * &w * &t;
    Ok((h, w, m))
}

/// Builds the TOS linearization
/// `L_γ = Id + 2 M_R̃ M_J̃ − M_R̃ − M_J̃ − γ M_R̃ H_F M_J̃` at the anchor.
pub fn build_tos_linearization(
    anchor: &TosAnchor,
    problem: &TosProblem,
    gamma: f64,
    lambda: f64,
) -> Result<LinearizationTos> {
    let x_star = &anchor.x_star;
    let (h_rtilde, w_rtilde, m_rtilde) = tangent_block(&problem.reg_r, x_star, gamma)?;
    let (h_jtilde, w_jtilde, m_jtilde) = tangent_block(&problem.reg_j, x_star, gamma)?;
    let h_f = problem.smooth.hessian(x_star)?;
    let (l_gamma, l_gamma_lambda) = assemble_one_step(&m_rtilde, &m_jtilde, &h_f, gamma, lambda);
    let l_inf = limit_projector(&l_gamma_lambda, UNIT_EIGENVALUE_TOL)?;
    let grad = problem.smooth.grad(x_star)?;
    let margin_r = problem
        .reg_r
        .nondegeneracy_margin(x_star, &((x_star - &anchor.z_star) / gamma - grad))?;
    let margin_j = problem
        .reg_j
        .nondegeneracy_margin(x_star, &((&anchor.z_star - x_star) / gamma))?;
    Ok(LinearizationTos {
        h_f,
        h_jtilde,
        h_rtilde,
        w_jtilde,
        w_rtilde,
        m_jtilde,
        m_rtilde,
        l_gamma,
        l_gamma_lambda,
        l_inf,
        gamma,
        lambda,
        margin_r,
        margin_j,
        polyhedral: problem.reg_r.is_polyhedral() && problem.reg_j.is_polyhedral(),
    })
}

/// Predicted asymptotic contraction factor: the spectral radius of the
/// one-step matrix minus its limit.
pub fn predicted_rate(lin: &impl RateLinearization) -> Result<f64> {
    spectral_radius(&(lin.one_step() - lin.limit()), 1e-12)
}

/// Which decay series the observed factor is measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateSeries {
    /// Polyhedral non-smooth parts, quadratic smooth part, constant
    /// parameters: the raw distance ‖z_k − z*‖ itself contracts at ρ.
    ExactDistance,
    /// General case: the projected sequence ‖(Id − M^∞)(z_k − z*)‖ carries
    /// the rate.
    ProjectedSequence,
}

#[derive(Debug, Clone)]
pub struct RateCertificate {
    pub predicted_rho: f64,
    pub observed_factor: f64,
    pub window: (usize, usize),
    pub series: RateSeries,
    pub matched: bool,
    pub tol_rel: f64,
    /// Set when the step-size schedule converges slower than the contraction
    /// itself, so the observed decay is governed by the schedule error.
    pub dominated_by_schedule: bool,
}

/// Minimum usable post-identification records for a trustworthy slope fit.
const MIN_WINDOW_RECORDS: usize = 30;

/// Compares the predicted factor against the observed per-iteration decay on
/// the post-identification window, stopping before the distance floor
/// (10 machine epsilons of ‖z*‖).
pub fn certify(
    lin: &impl RateLinearization,
    z_star: &Vector,
    traj: &Trajectory,
    ident: &IdentificationReport,
    tol_rel: f64,
) -> Result<RateCertificate> {
    let k_ident = ident
        .identified_at
        .ok_or_else(|| Error::invalid("cannot certify a rate without identification"))?;
    let predicted_rho = predicted_rate(lin)?;
    let series_kind = if lin.is_polyhedral() && traj.schedule.is_stationary() {
        RateSeries::ExactDistance
    } else {
        RateSeries::ProjectedSequence
    };
    let floor = 10.0 * f64::EPSILON * z_star.norm().max(1.0);
    let id = Matrix::identity(z_star.len(), z_star.len());
    let residual_map = &id - lin.limit();
    let mut series = Vec::new();
    for rec in &traj.records {
        if rec.k < k_ident {
            continue;
        }
        let diff = &rec.z - z_star;
        let value = match series_kind {
            RateSeries::ExactDistance => diff.norm(),
            RateSeries::ProjectedSequence => (&residual_map * diff).norm(),
        };
        if value <= floor {
            break;
        }
        series.push((rec.k, value));
    }
    if series.len() < MIN_WINDOW_RECORDS {
        return Err(Error::insufficient(format!(
            "rate window holds {} records, need {MIN_WINDOW_RECORDS}",
            series.len()
        )));
    }
    let window = (series[0].0, series[series.len() - 1].0);
    let observed_factor = crate::diagnostics::fit_log_slope(&series, window)?;
    let matched = (observed_factor - predicted_rho).abs() <= tol_rel * predicted_rho;
    let dominated_by_schedule = match &traj.schedule.gamma {
        GammaRule::Constant(_) => false,
        GammaRule::PowerDecay { .. } => true,
        GammaRule::Geometric { ratio, .. } => *ratio > predicted_rho,
    };
    Ok(RateCertificate {
        predicted_rho,
        observed_factor,
        window,
        series: series_kind,
        matched,
        tol_rel,
        dominated_by_schedule,
    })
}

/// Product-space embedding that certifies GFB runs with equal weights: the
/// stacked shadow variables follow the FDR linearization on R^{mn} with the
/// averaging subspace, the block-diagonal tangent machinery, and step-size
/// mγ.
#[derive(Debug, Clone)]
pub struct GfbEmbedding {
    pub m_gamma_lambda: Matrix,
    pub m_inf: Matrix,
    pub z_star: Vector,
    pub polyhedral: bool,
    pub gamma_product: f64,
}

impl RateLinearization for GfbEmbedding {
    fn one_step(&self) -> &Matrix {
        &self.m_gamma_lambda
    }
    fn limit(&self) -> &Matrix {
        &self.m_inf
    }
    fn is_polyhedral(&self) -> bool {
        self.polyhedral
    }
}

/// Assembles the product-space linearization for a GFB run with equal
/// weights from its converged reference trajectory (stacked z*).
pub fn build_gfb_linearization(
    reference: &Trajectory,
    problem: &crate::solvers::GfbProblem,
    gamma: f64,
    lambda: f64,
) -> Result<GfbEmbedding> {
    let m = problem.regs.len();
    let n = problem.dim();
    if problem.weights.iter().any(|&w| (w - 1.0 / m as f64).abs() > 1e-12) {
        return Err(Error::unsupported(
            "the product-space certification is implemented for equal weights only",
        ));
    }
    if reference.terminal_residual > crate::diagnostics::ANCHOR_RESIDUAL_TOL {
        return Err(Error::invalid("GFB reference run did not converge"));
    }
    let z_star = reference.last().z.clone();
    if z_star.len() != m * n {
        return Err(Error::invalid("reference trajectory does not stack the shadow variables"));
    }
    let gamma_product = m as f64 * gamma;
    // x* block: the average of the shadow fixed points
    let mut x_star_block = Vector::zeros(n);
    for i in 0..m {
        x_star_block += z_star.rows(i * n, n).into_owned();
    }
    x_star_block /= m as f64;

    // block-diagonal tangent machinery, one block per regularizer
    let big = m * n;
    let id_big = Matrix::identity(big, big);
    let mut m_rbar = Matrix::zeros(big, big);
    for (i, reg) in problem.regs.iter().enumerate() {
        let (_, _, m_i) = tangent_block(reg, &x_star_block, gamma_product)?;
        m_rbar.view_mut((i * n, i * n), (n, n)).copy_from(&m_i);
    }
    // averaging subspace projector: every (a, b) block is Id/m
    let mut p_s = Matrix::zeros(big, big);
    for a in 0..m {
        for b in 0..m {
            for d in 0..n {
                p_s[(a * n + d, b * n + d)] = 1.0 / m as f64;
            }
        }
    }
    // product smooth term ½‖[K/m ... K/m] z − f‖²: Hessian blocks KᵀK/m²
    let h_block = problem.smooth.hessian(&x_star_block)? / (m as f64 * m as f64);
    let mut h_f = Matrix::zeros(big, big);
    for a in 0..m {
        for b in 0..m {
            h_f.view_mut((a * n, b * n), (n, n)).copy_from(&h_block);
        }
    }
    let h_g = &p_s * &h_f * &p_s;
    let core = &id_big + 2.0 * &m_rbar * &p_s - &m_rbar - &p_s - gamma_product * &m_rbar * &h_g;
    let m_gamma_lambda = (1.0 - lambda) * &id_big + lambda * core;
    let m_inf = limit_projector(&m_gamma_lambda, UNIT_EIGENVALUE_TOL)?;
    Ok(GfbEmbedding {
        m_gamma_lambda,
        m_inf,
        z_star,
        polyhedral: problem.regs.iter().all(|r| r.is_polyhedral()),
        gamma_product,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{matrix, vector, Subspace};
    use crate::regularizers::Regularizer;
    use crate::smooth::{Restricted, SmoothQuadratic};
    use crate::solvers::{apply_fixed_point_fdr, fdr_run, RunOptions, Schedule};
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    fn rand_vec(rng: &mut impl Rng, n: usize) -> Vector {
        Vector::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    fn constrained_lasso(seed: u64) -> (FdrProblem<SmoothQuadratic>, f64) {
        let mut r = rng(seed);
        let k = Matrix::from_fn(10, 8, |_, _| r.random::<f64>() - 0.5);
        let q = SmoothQuadratic::new(k, rand_vec(&mut r, 10)).unwrap();
        let v = Subspace::from_spanning(8, &(0..4).map(|_| rand_vec(&mut r, 8)).collect::<Vec<_>>()).unwrap();
        let problem = FdrProblem::new(
            Restricted::new(q, v).unwrap(),
            Regularizer::l1(0.2).unwrap(),
        )
        .unwrap();
        let gamma = problem.smooth.beta_v();
        (problem, gamma)
    }

    fn converged_anchor(problem: &FdrProblem<SmoothQuadratic>, gamma: f64) -> Anchor {
        let traj = fdr_run(
            problem,
            &Schedule::stationary(gamma, 1.0),
            &RunOptions::new(200_000, 1e-14, 200_000).unwrap(),
        )
        .unwrap();
        Anchor::from_reference(&traj, gamma, problem.subspace()).unwrap()
    }

    #[test]
    fn hand_computed_two_by_two_linearization() {
        // T = diag(1,0), H_G = Id, P_V = Id, γ = 0.5, λ = 1 (polyhedral R):
        // M_R̄ = T and M_γ = T(Id − γH_G) = diag(0.5, 0); limit 0, ρ = 0.5
        let t = matrix(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let h_g = Matrix::identity(2, 2);
        let p_v = Matrix::identity(2, 2);
        let (m_gamma, m_gl) = assemble_one_step(&t, &p_v, &h_g, 0.5, 1.0);
        assert!((m_gamma - matrix(2, 2, &[0.5, 0.0, 0.0, 0.0])).norm() < 1e-14);
        let m_inf = limit_projector(&m_gl, 1e-10).unwrap();
        assert!(m_inf.norm() < 1e-12);
        assert!((spectral_radius(&(m_gl - m_inf), 1e-12).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn relaxation_is_an_affine_spectral_map() {
        let t = matrix(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let h_g = Matrix::identity(2, 2);
        let p_v = Matrix::identity(2, 2);
        let lambda = 0.6;
        let (core, relaxed) = assemble_one_step(&t, &p_v, &h_g, 0.5, lambda);
        // shared eigenvectors: eig(relaxed) = (1−λ) + λ·eig(core)
        for i in 0..2 {
            let expected = (1.0 - lambda) + lambda * core[(i, i)];
            assert!((relaxed[(i, i)] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn predicted_rate_simple_cases() {
        struct Plain {
            m: Matrix,
            p: Matrix,
        }
        impl RateLinearization for Plain {
            fn one_step(&self) -> &Matrix {
                &self.m
            }
            fn limit(&self) -> &Matrix {
                &self.p
            }
            fn is_polyhedral(&self) -> bool {
                true
            }
        }
        let half = Plain { m: 0.5 * Matrix::identity(2, 2), p: Matrix::zeros(2, 2) };
        assert!((predicted_rate(&half).unwrap() - 0.5).abs() < 1e-12);
        let id = Plain { m: Matrix::identity(2, 2), p: Matrix::identity(2, 2) };
        assert!(predicted_rate(&id).unwrap() < 1e-12);
        let mixed = Plain {
            m: matrix(2, 2, &[1.0, 0.0, 0.0, 0.3]),
            p: matrix(2, 2, &[1.0, 0.0, 0.0, 0.0]),
        };
        assert!((predicted_rate(&mixed).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn fdr_linearization_invariants() {
        let (problem, gamma) = constrained_lasso(42);
        let anchor = converged_anchor(&problem, gamma);
        let lin = build_fdr_linearization(&anchor, &problem, gamma, 1.0).unwrap();
        assert!(lin.margin > 0.0, "instance should be non-degenerate, margin {}", lin.margin);

        // W_R̄ symmetric with spectrum in (0, 1]
        assert!((&lin.w_rbar - lin.w_rbar.transpose()).norm() < 1e-10);
        let eigs = lin.w_rbar.clone().symmetric_eigenvalues();
        for e in eigs.iter() {
            assert!(*e > 0.0 && *e <= 1.0 + 1e-12, "W eigenvalue {e} outside (0,1]");
        }

        // non-expansiveness of the one-step matrix on probes
        let mut r = rng(9);
        for _ in 0..100 {
            let v = rand_vec(&mut r, 8);
            assert!((&lin.m_gamma_lambda * &v).norm() <= v.norm() + 1e-9);
        }

        // idempotent limit and invariance
        assert!((&lin.m_inf * &lin.m_inf - &lin.m_inf).norm() <= 1e-8);
        assert!((&lin.m_gamma_lambda * &lin.m_inf - &lin.m_inf).norm() <= 1e-8);

        // strict spectral gap
        let rho = predicted_rate(&lin).unwrap();
        assert!(rho < 1.0 - 1e-10);
    }

    #[test]
    fn power_consistency_of_limit() {
        let (problem, gamma) = constrained_lasso(43);
        let anchor = converged_anchor(&problem, gamma);
        let lin = build_fdr_linearization(&anchor, &problem, gamma, 1.0).unwrap();
        let rho_plus = predicted_rate(&lin).unwrap() + 1e-6;
        let mut power = Matrix::identity(8, 8);
        let mut c = 0.0f64;
        let mut norms = Vec::new();
        for k in 1..=200 {
            power = &power * &lin.m_gamma_lambda;
            let norm = (&power - &lin.m_inf).norm();
            norms.push((k, norm));
            if k <= 20 {
                c = c.max(norm / rho_plus.powi(k));
            }
        }
        for (k, norm) in norms {
            assert!(
                norm <= (c + 1e-9) * rho_plus.powi(k),
                "power consistency broke at k={k}: {norm}"
            );
        }
    }

    #[test]
    fn linearization_fidelity_near_anchor() {
        let (problem, gamma) = constrained_lasso(44);
        let anchor = converged_anchor(&problem, gamma);
        let lin = build_fdr_linearization(&anchor, &problem, gamma, 1.0).unwrap();
        let mut r = rng(4);
        let radius = 1e-5;
        for _ in 0..20 {
            let mut dir = rand_vec(&mut r, 8);
            dir /= dir.norm();
            let z = &anchor.z_star + radius * &dir;
            let fz = apply_fixed_point_fdr(gamma, &problem, &z).unwrap();
            let predicted = &anchor.z_star + &lin.m_gamma_lambda * (radius * &dir);
            let err = (fz - predicted).norm();
            assert!(err <= 1e-3 * radius, "fidelity error {err} at radius {radius}");
        }
    }

    #[test]
    fn certify_exact_linear_recursion() {
        // synthetic trajectory z_{k+1} − z* = M (z_k − z*) with M = diag(0.6, 0.2)
        let m = matrix(2, 2, &[0.6, 0.0, 0.0, 0.2]);
        let z_star = vector(&[1.0, -2.0]);
        let mut records = Vec::new();
        let mut diff = vector(&[1.0, 1.0]);
        for k in 0..120 {
            records.push(crate::solvers::TrajectoryRecord {
                k,
                gamma: 1.0,
                lambda: 1.0,
                z: &z_star + &diff,
                x: Vector::zeros(2),
                u: Vector::zeros(2),
                residual: 0.0,
            });
            diff = &m * diff;
        }
        let traj = Trajectory {
            records,
            stride: 1,
            stop_reason: crate::solvers::StopReason::MaxIter,
            total_iterations: 119,
            terminal_residual: 0.0,
            schedule: Schedule::stationary(1.0, 1.0),
        };
        struct Plain {
            m: Matrix,
            p: Matrix,
        }
        impl RateLinearization for Plain {
            fn one_step(&self) -> &Matrix {
                &self.m
            }
            fn limit(&self) -> &Matrix {
                &self.p
            }
            fn is_polyhedral(&self) -> bool {
                true
            }
        }
        let lin = Plain { m, p: Matrix::zeros(2, 2) };
        let ident = IdentificationReport { identified_at: Some(0), margin: None };
        let cert = certify(&lin, &z_star, &traj, &ident, 0.10).unwrap();
        assert_eq!(cert.series, RateSeries::ExactDistance);
        assert!(cert.matched, "observed {} vs predicted {}", cert.observed_factor, cert.predicted_rho);
        assert!((cert.observed_factor - 0.6).abs() < 0.02);
    }

    #[test]
    fn certify_requires_enough_records() {
        let (problem, gamma) = constrained_lasso(45);
        let anchor = converged_anchor(&problem, gamma);
        let lin = build_fdr_linearization(&anchor, &problem, gamma, 1.0).unwrap();
        let traj = fdr_run(
            &problem,
            &Schedule::stationary(gamma, 1.0),
            &RunOptions::new(10, 0.0, 1).unwrap(),
        )
        .unwrap();
        let ident = IdentificationReport { identified_at: Some(0), margin: None };
        let err = certify(&lin, &anchor.z_star, &traj, &ident, 0.1).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn tos_linearization_invariants_on_small_instance() {
        use crate::solvers::{apply_fixed_point_tos, tos_run, LambdaRule, RunOptions, TosProblem};
        let mut r = rng(61);
        let k = Matrix::from_fn(12, 8, |_, _| r.random::<f64>() - 0.5);
        let q = SmoothQuadratic::new(k, rand_vec(&mut r, 12)).unwrap();
        let problem = TosProblem::new(
            q.clone(),
            Regularizer::group_l12(0.4, vec![vec![0, 1], vec![2, 3], vec![4, 5], vec![6, 7]], 8).unwrap(),
            Regularizer::tv1d(0.2, 8).unwrap(),
        )
        .unwrap();
        let (beta, _) = crate::smooth::lipschitz_moduli(&q, &Subspace::full(8)).unwrap();
        let gamma = beta;
        let reference = tos_run(
            &problem,
            gamma,
            &LambdaRule::Constant(1.0),
            &RunOptions::new(200_000, 1e-14, 200_000).unwrap(),
        )
        .unwrap();
        let anchor = TosAnchor::from_reference(&reference, gamma, &problem).unwrap();

        // the converged point is a fixed point of the operator
        let mapped = apply_fixed_point_tos(gamma, &problem, &anchor.z_star).unwrap();
        assert!((&mapped - &anchor.z_star).norm() <= 1e-9);

        let lin = build_tos_linearization(&anchor, &problem, gamma, 1.0).unwrap();
        for w in [&lin.w_rtilde, &lin.w_jtilde] {
            assert!((w - w.transpose()).norm() < 1e-10);
            let eigs = w.clone().symmetric_eigenvalues();
            for e in eigs.iter() {
                assert!(*e > 0.0 && *e <= 1.0 + 1e-12);
            }
        }
        for _ in 0..100 {
            let v = rand_vec(&mut r, 8);
            assert!((&lin.l_gamma_lambda * &v).norm() <= v.norm() + 1e-9);
        }
        assert!((&lin.l_inf * &lin.l_inf - &lin.l_inf).norm() <= 1e-8);
        assert!((&lin.l_gamma_lambda * &lin.l_inf - &lin.l_inf).norm() <= 1e-8);
        assert!(predicted_rate(&lin).unwrap() < 1.0 - 1e-10);
    }

    #[test]
    fn gfb_embedding_requires_equal_weights() {
        use crate::solvers::{gfb_run, GfbProblem, LambdaRule, RunOptions};
        let q = SmoothQuadratic::new(Matrix::identity(2, 2), vector(&[1.0, 0.0])).unwrap();
        let problem = GfbProblem::new(
            q,
            vec![Regularizer::l1(0.1).unwrap(), Regularizer::l1(0.1).unwrap()],
            vec![0.3, 0.7],
        )
        .unwrap();
        let traj = gfb_run(&problem, 0.5, &LambdaRule::Constant(1.0), &RunOptions::new(4000, 1e-14, 4000).unwrap()).unwrap();
        let err = build_gfb_linearization(&traj, &problem, 0.5, 1.0).unwrap_err();
        assert!(matches!(err, Error::UnsupportedFeature(_)));
    }

    #[test]
    fn nuclear_norm_linearization_unsupported() {
        let mut r = rng(50);
        let q = SmoothQuadratic::new(Matrix::identity(4, 4), rand_vec(&mut r, 4)).unwrap();
        let problem = FdrProblem::new(
            Restricted::new(q, Subspace::full(4)).unwrap(),
            Regularizer::nuclear(0.5, 2, 2).unwrap(),
        )
        .unwrap();
        let anchor = Anchor {
            z_star: Vector::zeros(4),
            x_star: Vector::zeros(4),
            gamma: 1.0,
            v_star: Vector::zeros(4),
        };
        let err = build_fdr_linearization(&anchor, &problem, 1.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::UnsupportedFeature(_)));
    }
}
