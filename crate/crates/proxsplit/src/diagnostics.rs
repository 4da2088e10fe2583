//! Post-hoc and in-loop measurement: the Bregman divergence criterion with
//! its best-iterate and ergodic rates, the per-iteration energy-inequality
//! audit, identification detection and empirical rate-slope estimation.

use crate::error::{Error, Result};
use crate::linear::{Subspace, Vector};
use crate::regularizers::{default_signature_tol, ManifoldSignature, Regularizer};
use crate::smooth::Smooth;
use crate::solvers::{FdrProblem, Schedule, Trajectory};

/// Converged reference point together with the normal vector `v* = (x*−z*)/γ`
/// certifying its optimality. For FB (V the whole space) z* = x* and v* = 0.
#[derive(Debug, Clone)]
pub struct Anchor {
    pub z_star: Vector,
    pub x_star: Vector,
    pub gamma: f64,
    pub v_star: Vector,
}

/// Residual a reference run must reach before it is trusted as an anchor.
pub const ANCHOR_RESIDUAL_TOL: f64 = 1e-12;

impl Anchor {
    /// Builds the anchor from a converged reference trajectory.
    pub fn from_reference(reference: &Trajectory, gamma: f64, v: &Subspace) -> Result<Self> {
        if reference.terminal_residual > ANCHOR_RESIDUAL_TOL {
            return Err(Error::invalid(format!(
                "reference run did not converge: terminal residual {} > {ANCHOR_RESIDUAL_TOL}",
                reference.terminal_residual
            )));
        }
        if !(gamma > 0.0) {
            return Err(Error::invalid("anchor gamma must be positive"));
        }
        let last = reference.last();
        let z_star = last.z.clone();
        let x_star = v.project(&z_star)?;
        if (&x_star - &last.x).norm() > 1e-9 * (1.0 + x_star.norm()) {
            return Err(Error::invalid("reference trajectory x is not the projection of z"));
        }
        let v_star = (&x_star - &z_star) / gamma;
        let tangential = v.project(&v_star)?;
        if tangential.norm() > 1e-9 * (1.0 + v_star.norm()) {
            return Err(Error::numerical("v* has a component inside V"));
        }
        Ok(Anchor { z_star, x_star, gamma, v_star })
    }

    pub fn dim(&self) -> usize {
        self.x_star.len()
    }
}

/// Bregman divergence of the composite objective at `y`, anchored at x*:
/// `R(y) + G(y) − R(x*) − G(x*) − ⟨v*, P_{V⊥} y⟩`. Non-negative on the whole
/// space; equal to the plain objective gap when V is everything.
pub fn bregman<S: Smooth>(anchor: &Anchor, problem: &FdrProblem<S>, y: &Vector) -> Result<f64> {
    let ry = problem.reg.eval(y)?;
    if ry.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let phi_y = ry + problem.smooth.eval_g(y)?;
    let phi_star = problem.reg.eval(&anchor.x_star)? + problem.smooth.eval_g(&anchor.x_star)?;
    let y_perp = problem.subspace().project_complement(y)?;
    Ok(phi_y - phi_star - anchor.v_star.dot(&y_perp))
}

/// Per-record Bregman series: pointwise value at u_k, running best, running
/// ergodic mean, and the (k+1)-scaled versions of both.
#[derive(Debug, Clone)]
pub struct BregmanSeries {
    pub ks: Vec<usize>,
    pub values: Vec<f64>,
    pub best: Vec<f64>,
    pub ergodic: Vec<f64>,
    pub scaled_best: Vec<f64>,
    pub scaled_ergodic: Vec<f64>,
    /// With stride > 1 the ergodic mean only averages recorded iterates.
    pub ergodic_approximate: bool,
}

pub fn bregman_series<S: Smooth>(
    anchor: &Anchor,
    problem: &FdrProblem<S>,
    traj: &Trajectory,
) -> Result<BregmanSeries> {
    let n = traj.records.len();
    let mut series = BregmanSeries {
        ks: Vec::with_capacity(n),
        values: Vec::with_capacity(n),
        best: Vec::with_capacity(n),
        ergodic: Vec::with_capacity(n),
        scaled_best: Vec::with_capacity(n),
        scaled_ergodic: Vec::with_capacity(n),
        ergodic_approximate: traj.stride > 1,
    };
    let mut best = f64::INFINITY;
    let mut mean = Vector::zeros(anchor.dim());
    for (i, rec) in traj.records.iter().enumerate() {
        let d = bregman(anchor, problem, &rec.u)?;
        best = best.min(d);
        // running mean over recorded u_i
        let count = (i + 1) as f64;
        mean = (&mean * (count - 1.0) + &rec.u) / count;
        let d_erg = bregman(anchor, problem, &mean)?;
        let scale = (rec.k + 1) as f64;
        series.ks.push(rec.k);
        series.values.push(d);
        series.best.push(best);
        series.ergodic.push(d_erg);
        series.scaled_best.push(scale * best);
        series.scaled_ergodic.push(scale * d_erg);
    }
    Ok(series)
}

/// One row of the energy-inequality audit at step k → k+1.
#[derive(Debug, Clone, Copy)]
pub struct AuditRow {
    pub k: usize,
    pub divergence: f64,
    pub phi_k: f64,
    pub phi_next: f64,
    pub xi_text: f64,
    pub xi_proof: f64,
    pub zeta: f64,
    /// Signed slack of the inequality audited against the larger ξ variant;
    /// negative means a violation.
    pub slack: f64,
}

#[derive(Debug, Clone)]
pub struct AuditReport {
    pub rows: Vec<AuditRow>,
    pub max_violation: f64,
}

/// Audits the per-iteration energy inequality
/// `D(u_{k+1}) + φ_{k+1} ≤ φ_k + (γ_{k+1}−γ_k)/2·‖v*‖² + ξ_{k+1} + ζ_{k+1}`
/// along an unrelaxed stride-1 trajectory.
///
/// ξ is computed in both published forms — the constant prefactor
/// `|γ̲ − β_V|/(2γ̲β_V)` and the per-step `|γ_k − β_V|/(2γ_k β_V)` the proof
/// actually passes through — and the slack is taken against the larger.
/// ζ_{k+1} uses `|γ_{k+1} − γ_k|` with `‖z_{k+1} − x*‖²`.
pub fn audit_energy_inequality<S: Smooth>(
    anchor: &Anchor,
    problem: &FdrProblem<S>,
    traj: &Trajectory,
    schedule: &Schedule,
) -> Result<AuditReport> {
    if !schedule.is_unrelaxed() {
        return Err(Error::invalid("the energy inequality audit requires lambda = 1"));
    }
    if traj.stride != 1 {
        return Err(Error::invalid("the energy inequality audit requires stride 1"));
    }
    let beta_v = problem.smooth.beta_v();
    let gamma_lower = schedule.gamma.lower();
    let v_norm2 = anchor.v_star.norm_squared();
    let phi = |z: &Vector, x: &Vector, gamma: f64| -> Result<f64> {
        let z_perp = problem.subspace().project_complement(z)?;
        let a = (&z_perp + gamma * &anchor.v_star).norm_squared();
        let b = (x - &anchor.x_star).norm_squared();
        Ok((a + b) / (2.0 * gamma))
    };
    // Trajectory records store, at index k, the step-size used to *produce*
    // z_k; the inequality's γ_k is the step-size used *from* z_k, i.e. the
    // schedule value at k+1.
    let mut rows = Vec::with_capacity(traj.records.len().saturating_sub(1));
    let mut max_violation = 0.0f64;
    for k in 0..traj.records.len() - 1 {
        let cur = &traj.records[k];
        let next = &traj.records[k + 1];
        debug_assert_eq!(next.k, cur.k + 1);
        let gamma_k = schedule.gamma_at(cur.k + 1);
        let gamma_next = schedule.gamma_at(cur.k + 2);
        let dz2 = (&next.z - &cur.z).norm_squared();
        let xi_text = (gamma_lower - beta_v).abs() / (2.0 * gamma_lower * beta_v) * dz2;
        let xi_proof = (gamma_k - beta_v).abs() / (2.0 * gamma_k * beta_v) * dz2;
        let zeta = (gamma_next - gamma_k).abs() / (2.0 * gamma_lower * gamma_lower)
            * (&next.z - &anchor.x_star).norm_squared();
        let divergence = bregman(anchor, problem, &next.u)?;
        let phi_k = phi(&cur.z, &cur.x, gamma_k)?;
        let phi_next = phi(&next.z, &next.x, gamma_next)?;
        let slack = phi_k + (gamma_next - gamma_k) / 2.0 * v_norm2 + xi_text.max(xi_proof) + zeta
            - divergence
            - phi_next;
        max_violation = max_violation.max(-slack);
        rows.push(AuditRow {
            k: cur.k,
            divergence,
            phi_k,
            phi_next,
            xi_text,
            xi_proof,
            zeta,
            slack,
        });
    }
    Ok(AuditReport { rows, max_violation })
}

/// First recorded iteration from which every signature matches the target,
/// together with the non-degeneracy margin when the caller supplies one.
#[derive(Debug, Clone)]
pub struct IdentificationReport {
    pub identified_at: Option<usize>,
    pub margin: Option<f64>,
}

/// Scans the recorded u_k patterns for the earliest record index past which
/// every signature equals `target`.
pub fn detect_identification(
    traj: &Trajectory,
    reg: &Regularizer,
    target: &ManifoldSignature,
    tol: Option<f64>,
) -> Result<IdentificationReport> {
    detect_identification_with(traj, reg, target, tol, |rec| &rec.u)
}

/// Identification scan over an arbitrary record field (`u` for the prox
/// output, `x` when the second non-smooth term of TOS is being tracked).
pub fn detect_identification_with(
    traj: &Trajectory,
    reg: &Regularizer,
    target: &ManifoldSignature,
    tol: Option<f64>,
    pick: impl Fn(&crate::solvers::TrajectoryRecord) -> &Vector,
) -> Result<IdentificationReport> {
    let mut identified_at = None;
    for rec in &traj.records {
        let point = pick(rec);
        let tol = tol.unwrap_or_else(|| default_signature_tol(point));
        let sig = reg.signature(point, tol)?;
        if sig == *target {
            if identified_at.is_none() {
                identified_at = Some(rec.k);
            }
        } else {
            identified_at = None;
        }
    }
    Ok(IdentificationReport { identified_at, margin: None })
}

/// Least-squares slope of log(value) against k over `[k_lo, k_hi]`, returned
/// as the per-iteration factor `exp(slope)`.
pub fn fit_log_slope(series: &[(usize, f64)], window: (usize, usize)) -> Result<f64> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(k, _)| *k >= window.0 && *k <= window.1)
        .map(|&(k, v)| (k as f64, v))
        .collect();
    if pts.len() < 2 {
        return Err(Error::insufficient(format!(
            "log-slope fit needs at least 2 points in the window, found {}",
            pts.len()
        )));
    }
    if pts.iter().any(|&(_, v)| !(v > 0.0)) {
        return Err(Error::invalid("log-slope fit requires positive values on the window"));
    }
    let n = pts.len() as f64;
    let mean_k: f64 = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y: f64 = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, v) in &pts {
        num += (k - mean_k) * (v.ln() - mean_y);
        den += (k - mean_k) * (k - mean_k);
    }
    if den == 0.0 {
        return Err(Error::insufficient("log-slope fit window has a single abscissa"));
    }
    Ok((num / den).exp())
}
