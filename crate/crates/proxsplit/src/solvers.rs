//! The four iterative schemes (non-stationary FDR, FB, GFB, TOS), their
//! fixed-point operators, step-size/relaxation schedules with admissibility
//! validation, and trajectory recording.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linear::{all_finite_vec, Subspace, Vector};
use crate::regularizers::Regularizer;
use crate::smooth::{Restricted, Smooth, SmoothQuadratic};

/// Step-size rule γ_k. Decay formulas are indexed from k = 1 (the first
/// step); `1/k^q` and `r^k` are degenerate at k = 0.
#[derive(Debug, Clone, PartialEq)]
pub enum GammaRule {
    Constant(f64),
    /// γ_k = (1 + 1/k^q)·base
    PowerDecay { base: f64, exponent: f64 },
    /// γ_k = (1 + r^k)·base with r ∈ (0, 1)
    Geometric { base: f64, ratio: f64 },
}

impl GammaRule {
    pub fn at(&self, k: usize) -> f64 {
        let k = k.max(1) as f64;
        match self {
            GammaRule::Constant(g) => *g,
            GammaRule::PowerDecay { base, exponent } => (1.0 + k.powf(-exponent)) * base,
            GammaRule::Geometric { base, ratio } => (1.0 + ratio.powf(k)) * base,
        }
    }

    /// Limit γ of the sequence.
    pub fn limit(&self) -> f64 {
        match self {
            GammaRule::Constant(g) => *g,
            GammaRule::PowerDecay { base, .. } | GammaRule::Geometric { base, .. } => *base,
        }
    }

    /// Infimum of γ_k over k ≥ 1 (approached at the limit for the decaying
    /// families).
    pub fn lower(&self) -> f64 {
        self.limit()
    }

    /// Supremum of γ_k over k ≥ 1 (attained at k = 1 for the decaying
    /// families).
    pub fn upper(&self) -> f64 {
        self.at(1)
    }
}

/// Relaxation rule λ_k: constant, or an arbitrary user-supplied sequence
/// (validated over a finite horizon only).
#[derive(Clone)]
pub enum LambdaRule {
    Constant(f64),
    Custom(Arc<dyn Fn(usize) -> f64 + Send + Sync>),
}

impl LambdaRule {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            LambdaRule::Constant(l) => *l,
            LambdaRule::Custom(f) => f(k.max(1)),
        }
    }
}

impl fmt::Debug for LambdaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaRule::Constant(l) => write!(f, "Constant({l})"),
            LambdaRule::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl PartialEq for LambdaRule {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (LambdaRule::Constant(a), LambdaRule::Constant(b)) => a == b,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub gamma: GammaRule,
    pub lambda: LambdaRule,
}

impl Schedule {
    pub fn stationary(gamma: f64, lambda: f64) -> Self {
        Schedule {
            gamma: GammaRule::Constant(gamma),
            lambda: LambdaRule::Constant(lambda),
        }
    }

    pub fn gamma_at(&self, k: usize) -> f64 {
        self.gamma.at(k)
    }

    pub fn lambda_at(&self, k: usize) -> f64 {
        self.lambda.at(k)
    }

    pub fn is_stationary(&self) -> bool {
        matches!(
            (&self.gamma, &self.lambda),
            (GammaRule::Constant(_), LambdaRule::Constant(_))
        )
    }

    pub fn lambda_limit(&self) -> f64 {
        match &self.lambda {
            LambdaRule::Constant(l) => *l,
            // terminal value stands in for the limit of custom sequences
            LambdaRule::Custom(f) => f(usize::MAX / 2),
        }
    }

    pub fn is_unrelaxed(&self) -> bool {
        matches!(self.lambda, LambdaRule::Constant(l) if l == 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionStatus {
    Pass,
    /// Satisfied except for closed-boundary touches in the first few steps;
    /// those steps still apply a non-expansive (1-averaged) map, so the run
    /// is admissible.
    BoundaryPrefix,
    /// Could not be decided symbolically for this rule family; checked on
    /// the finite horizon only.
    Undecided,
    Fail,
}

#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub name: &'static str,
    pub status: ConditionStatus,
    pub detail: String,
}

/// Outcome of checking the admissibility conditions of a schedule against a
/// modulus β_V over a finite horizon.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub conditions: Vec<ConditionReport>,
}

impl ValidationReport {
    /// The run may proceed: no hard failure among the conditions.
    pub fn passed(&self) -> bool {
        self.conditions
            .iter()
            .all(|c| c.status != ConditionStatus::Fail)
    }
}

const BOUNDARY_PREFIX_LEN: usize = 8;
const BOUNDARY_TOL: f64 = 1e-12;

/// Upper bound of the admissible relaxation interval; degenerates to 2 when
/// the restricted gradient is constant (β_V = ∞).
fn lambda_cap(beta_v: f64, gamma: f64) -> f64 {
    if beta_v.is_infinite() {
        2.0
    } else {
        (4.0 * beta_v - gamma) / (2.0 * beta_v)
    }
}

/// Checks the step-size/relaxation admissibility conditions over `horizon`
/// steps: γ_k confined to (0, 2β_V), λ_k inside its open interval, the
/// divergence condition on Σ λ_k((4β_V − γ_k)/(2β_V) − λ_k) and the
/// summability of λ_k|γ_k − γ| (the last two decided symbolically per rule
/// family).
pub fn validate_schedule(s: &Schedule, beta_v: f64, horizon: usize) -> Result<ValidationReport> {
    if !(beta_v > 0.0) {
        return Err(Error::invalid("validate_schedule requires beta_v > 0"));
    }
    let horizon = horizon.max(2);
    let cap = 2.0 * beta_v;
    let mut conditions = Vec::new();

    // (i) step-size bounds
    {
        let mut worst: Option<(usize, f64)> = None;
        let mut prefix_touches = 0usize;
        for k in 1..=horizon {
            let g = s.gamma_at(k);
            if !(g > 0.0) {
                worst = Some((k, g));
                break;
            }
            if g >= cap {
                if g <= cap * (1.0 + BOUNDARY_TOL) && k <= BOUNDARY_PREFIX_LEN {
                    prefix_touches += 1;
                } else {
                    worst = Some((k, g));
                    break;
                }
            }
        }
        conditions.push(match (worst, prefix_touches) {
            (Some((k, g)), _) => ConditionReport {
                name: "gamma_bounds",
                status: ConditionStatus::Fail,
                detail: format!("gamma_{k} = {g} outside (0, {cap})"),
            },
            (None, 0) => ConditionReport {
                name: "gamma_bounds",
                status: ConditionStatus::Pass,
                detail: format!(
                    "gamma in [{}, {}] over horizon, cap {cap}",
                    s.gamma.lower(),
                    s.gamma.upper()
                ),
            },
            (None, t) => ConditionReport {
                name: "gamma_bounds",
                status: ConditionStatus::BoundaryPrefix,
                detail: format!("{t} boundary touch(es) of 2*beta_v within the first {BOUNDARY_PREFIX_LEN} steps"),
            },
        });
    }

    // (ii) relaxation bounds
    {
        let mut worst: Option<(usize, f64, f64)> = None;
        let mut prefix_touches = 0usize;
        for k in 1..=horizon {
            let l = s.lambda_at(k);
            let bound = lambda_cap(beta_v, s.gamma_at(k));
            if !(l > 0.0) {
                worst = Some((k, l, bound));
                break;
            }
            if l >= bound {
                if l <= bound * (1.0 + BOUNDARY_TOL) && k <= BOUNDARY_PREFIX_LEN {
                    prefix_touches += 1;
                } else {
                    worst = Some((k, l, bound));
                    break;
                }
            }
        }
        conditions.push(match (worst, prefix_touches) {
            (Some((k, l, b)), _) => ConditionReport {
                name: "lambda_bounds",
                status: ConditionStatus::Fail,
                detail: format!("lambda_{k} = {l} outside (0, {b})"),
            },
            (None, 0) => ConditionReport {
                name: "lambda_bounds",
                status: ConditionStatus::Pass,
                detail: "lambda inside its open interval over the horizon".into(),
            },
            (None, t) => ConditionReport {
                name: "lambda_bounds",
                status: ConditionStatus::BoundaryPrefix,
                detail: format!("{t} boundary touch(es) within the first {BOUNDARY_PREFIX_LEN} steps"),
            },
        });
    }

    // (iii) divergence of sum lambda_k ((4 beta_v - gamma_k)/(2 beta_v) - lambda_k)
    {
        let report = match &s.lambda {
            LambdaRule::Constant(l) => {
                let limit_bound = lambda_cap(beta_v, s.gamma.limit());
                if *l > 0.0 && *l < limit_bound {
                    ConditionReport {
                        name: "relaxation_divergence",
                        status: ConditionStatus::Pass,
                        detail: format!(
                            "constant lambda: terms tend to {} > 0, series diverges",
                            l * (limit_bound - l)
                        ),
                    }
                } else {
                    ConditionReport {
                        name: "relaxation_divergence",
                        status: ConditionStatus::Fail,
                        detail: format!("constant lambda {l} not inside (0, {limit_bound})"),
                    }
                }
            }
            LambdaRule::Custom(_) => {
                let partial: f64 = (1..=horizon)
                    .map(|k| {
                        let l = s.lambda_at(k);
                        l * (lambda_cap(beta_v, s.gamma_at(k)) - l)
                    })
                    .sum();
                ConditionReport {
                    name: "relaxation_divergence",
                    status: ConditionStatus::Undecided,
                    detail: format!("custom lambda rule: horizon partial sum = {partial}"),
                }
            }
        };
        conditions.push(report);
    }

    // (iv) summability of lambda_k |gamma_k - gamma|
    {
        let report = match (&s.gamma, &s.lambda) {
            (GammaRule::Constant(_), _) => ConditionReport {
                name: "gamma_error_summability",
                status: ConditionStatus::Pass,
                detail: "stationary step-size: the error series is identically zero".into(),
            },
            (GammaRule::PowerDecay { exponent, .. }, LambdaRule::Constant(_)) => {
                if *exponent > 1.0 {
                    ConditionReport {
                        name: "gamma_error_summability",
                        status: ConditionStatus::Pass,
                        detail: format!("sum 1/k^q converges for q = {exponent} > 1"),
                    }
                } else {
                    ConditionReport {
                        name: "gamma_error_summability",
                        status: ConditionStatus::Fail,
                        detail: format!("sum 1/k^q diverges for q = {exponent} <= 1"),
                    }
                }
            }
            (GammaRule::Geometric { ratio, .. }, LambdaRule::Constant(_)) => {
                if *ratio > 0.0 && *ratio < 1.0 {
                    ConditionReport {
                        name: "gamma_error_summability",
                        status: ConditionStatus::Pass,
                        detail: format!("geometric series with ratio {ratio} converges"),
                    }
                } else {
                    ConditionReport {
                        name: "gamma_error_summability",
                        status: ConditionStatus::Fail,
                        detail: format!("ratio {ratio} outside (0, 1)"),
                    }
                }
            }
            (_, LambdaRule::Custom(_)) => {
                let partial: f64 = (1..=horizon)
                    .map(|k| s.lambda_at(k) * (s.gamma_at(k) - s.gamma.limit()).abs())
                    .sum();
                ConditionReport {
                    name: "gamma_error_summability",
                    status: ConditionStatus::Undecided,
                    detail: format!("custom lambda rule: horizon partial sum = {partial}"),
                }
            }
        };
        conditions.push(report);
    }

    Ok(ValidationReport { conditions })
}

/// State carried between iterations: the governing sequence z, its
/// feasible projection x and the prox output u.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub z: Vector,
    pub x: Vector,
    pub u: Vector,
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    ResidualTol,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub k: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub z: Vector,
    pub x: Vector,
    pub u: Vector,
    /// ‖z_k − z_{k−1}‖ (zero at the initial record).
    pub residual: f64,
}

/// Recorded run of a solver: one record every `stride` iterations plus the
/// initial and terminal states.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    pub stride: usize,
    pub stop_reason: StopReason,
    pub total_iterations: usize,
    pub terminal_residual: f64,
    pub schedule: Schedule,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectoryRecord {
        self.records.last().expect("trajectory always holds the terminal record")
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub max_iter: usize,
    pub residual_tol: f64,
    pub record_stride: usize,
    /// Reserved for randomized variants; the shipped initializations are
    /// deterministic (z0 = 0).
    pub seed: u64,
}

impl RunOptions {
    pub fn new(max_iter: usize, residual_tol: f64, record_stride: usize) -> Result<Self> {
        if max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if !(residual_tol >= 0.0) {
            return Err(Error::invalid("residual_tol must be non-negative"));
        }
        Ok(RunOptions {
            max_iter,
            residual_tol,
            record_stride: record_stride.max(1),
            seed: 0,
        })
    }
}

/// Composite problem handled by FDR: smooth F restricted to V, one
/// non-smooth term, and the subspace constraint.
#[derive(Debug, Clone)]
pub struct FdrProblem<S: Smooth> {
    pub smooth: Restricted<S>,
    pub reg: Regularizer,
}

impl<S: Smooth> FdrProblem<S> {
    pub fn new(smooth: Restricted<S>, reg: Regularizer) -> Result<Self> {
        if let Some(d) = reg.dim() {
            if d != smooth.dim() {
                return Err(Error::invalid("regularizer dimension does not match smooth term"));
            }
        }
        Ok(FdrProblem { smooth, reg })
    }

    pub fn subspace(&self) -> &Subspace {
        self.smooth.subspace()
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }
}

/// One FDR update: u⁺ = prox_{γR}(2x − z − γ∇G(x)), z⁺ = z + λ(u⁺ − x),
/// x⁺ = P_V(z⁺). Expects x = P_V z on entry; maintains it on exit.
pub fn fdr_step<S: Smooth>(
    state: &SolverState,
    gamma: f64,
    lambda: f64,
    problem: &FdrProblem<S>,
) -> Result<SolverState> {
    let grad = problem.smooth.grad_g(&state.x)?;
    let arg = 2.0 * &state.x - &state.z - gamma * grad;
    let u = problem.reg.prox(gamma, &arg)?;
    let z = &state.z + lambda * (&u - &state.x);
    let x = problem.subspace().project(&z)?;
    Ok(SolverState { z, x, u, k: state.k + 1 })
}

fn fresh_state(dim: usize, subspace: &Subspace) -> Result<SolverState> {
    let z = Vector::zeros(dim);
    let x = subspace.project(&z)?;
    let u = x.clone();
    Ok(SolverState { z, x, u, k: 0 })
}

fn record_from(state: &SolverState, gamma: f64, lambda: f64, residual: f64) -> TrajectoryRecord {
    TrajectoryRecord {
        k: state.k,
        gamma,
        lambda,
        z: state.z.clone(),
        x: state.x.clone(),
        u: state.u.clone(),
        residual,
    }
}

fn run_loop<F>(
    dim: usize,
    subspace: &Subspace,
    schedule: &Schedule,
    opts: &RunOptions,
    mut step: F,
) -> Result<Trajectory>
where
    F: FnMut(&SolverState, f64, f64) -> Result<SolverState>,
{
    let mut state = fresh_state(dim, subspace)?;
    let mut records = vec![record_from(&state, schedule.gamma_at(1), schedule.lambda_at(1), 0.0)];
    let mut stop_reason = StopReason::MaxIter;
    let mut residual = f64::INFINITY;
    for k in 1..=opts.max_iter {
        let gamma = schedule.gamma_at(k);
        let lambda = schedule.lambda_at(k);
        let next = step(&state, gamma, lambda)?;
        if !all_finite_vec(&next.z) || !all_finite_vec(&next.u) {
            return Err(Error::NumericalFailure {
                message: format!("iterate became non-finite at iteration {k}"),
                last_estimate: Some(state.z.norm()),
            });
        }
        residual = (&next.z - &state.z).norm();
        state = next;
        let due = k % opts.record_stride == 0;
        let stopping = residual <= opts.residual_tol || k == opts.max_iter;
        if due && !stopping {
            records.push(record_from(&state, gamma, lambda, residual));
        }
        if stopping {
            records.push(record_from(&state, gamma, lambda, residual));
            if residual <= opts.residual_tol {
                stop_reason = StopReason::ResidualTol;
            }
            break;
        }
    }
    Ok(Trajectory {
        records,
        stride: opts.record_stride,
        stop_reason,
        total_iterations: state.k,
        terminal_residual: residual,
        schedule: schedule.clone(),
    })
}

/// Runs non-stationary FDR until the residual tolerance or the iteration
/// cap. The schedule must validate against β_V first.
pub fn fdr_run<S: Smooth>(
    problem: &FdrProblem<S>,
    schedule: &Schedule,
    opts: &RunOptions,
) -> Result<Trajectory> {
    let report = validate_schedule(schedule, problem.smooth.beta_v(), opts.max_iter.min(10_000))?;
    if !report.passed() {
        let reasons: Vec<String> = report
            .conditions
            .iter()
            .filter(|c| c.status == ConditionStatus::Fail)
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect();
        return Err(Error::invalid(format!("schedule failed validation: {}", reasons.join("; "))));
    }
    run_loop(problem.dim(), problem.subspace(), schedule, opts, |state, gamma, lambda| {
        fdr_step(state, gamma, lambda, problem)
    })
}

/// Unrelaxed non-stationary forward–backward: x⁺ = prox_{γR}(x − γ∇F(x)).
/// Structurally identical to FDR with V the whole space and λ ≡ 1; the
/// trajectory stores z = x = u.
pub fn fb_run(
    smooth: &SmoothQuadratic,
    reg: &Regularizer,
    schedule: &Schedule,
    opts: &RunOptions,
) -> Result<Trajectory> {
    if !schedule.is_unrelaxed() {
        return Err(Error::invalid("fb_run implements the unrelaxed scheme; lambda must be 1"));
    }
    let full = Subspace::full(smooth.dim());
    let problem = FdrProblem::new(Restricted::new(smooth.clone(), full)?, reg.clone())?;
    fdr_run(&problem, schedule, opts)
}

/// Multi-regularizer problem for GFB.
#[derive(Debug, Clone)]
pub struct GfbProblem {
    pub smooth: SmoothQuadratic,
    pub regs: Vec<Regularizer>,
    pub weights: Vec<f64>,
}

impl GfbProblem {
    pub fn new(smooth: SmoothQuadratic, regs: Vec<Regularizer>, weights: Vec<f64>) -> Result<Self> {
        if regs.is_empty() || regs.len() != weights.len() {
            return Err(Error::invalid("GFB needs one weight per regularizer"));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w < 1.0)) && weights.len() > 1 {
            return Err(Error::invalid("GFB weights must lie in (0, 1)"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("GFB weights must sum to 1"));
        }
        for reg in &regs {
            if let Some(d) = reg.dim() {
                if d != smooth.dim() {
                    return Err(Error::invalid("regularizer dimension mismatch in GFB problem"));
                }
            }
        }
        Ok(GfbProblem { smooth, regs, weights })
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }
}

/// Generalized forward–backward with constant γ: one shadow variable z_i per
/// regularizer, x⁺ = Σ ω_i z_i⁺. The trajectory stacks the shadow variables
/// into z ∈ R^{mn} (and the per-term prox outputs into u) while x stays in
/// R^n.
pub fn gfb_run(
    problem: &GfbProblem,
    gamma: f64,
    lambda: &LambdaRule,
    opts: &RunOptions,
) -> Result<Trajectory> {
    let n = problem.dim();
    let m = problem.regs.len();
    let beta = 1.0 / crate::linear::spectral_norm(&problem.smooth.hessian(&Vector::zeros(n))?, 1e-12)?;
    if !(gamma > 0.0 && gamma < 2.0 * beta) {
        return Err(Error::invalid(format!("GFB step-size {gamma} outside (0, {})", 2.0 * beta)));
    }
    let schedule = Schedule { gamma: GammaRule::Constant(gamma), lambda: lambda.clone() };

    let mut z: Vec<Vector> = vec![Vector::zeros(n); m];
    let mut x = Vector::zeros(n);
    let mut u: Vec<Vector> = vec![x.clone(); m];
    let stack = |parts: &[Vector]| -> Vector {
        let mut out = Vector::zeros(n * parts.len());
        for (i, p) in parts.iter().enumerate() {
            out.rows_mut(i * n, n).copy_from(p);
        }
        out
    };

    let mut records = vec![TrajectoryRecord {
        k: 0,
        gamma,
        lambda: schedule.lambda_at(1),
        z: stack(&z),
        x: x.clone(),
        u: stack(&u),
        residual: 0.0,
    }];
    let mut stop_reason = StopReason::MaxIter;
    let mut residual = f64::INFINITY;
    let mut total = 0usize;
    for k in 1..=opts.max_iter {
        let lam = schedule.lambda_at(k);
        let grad = problem.smooth.grad(&x)?;
        let mut znorm2 = 0.0;
        for i in 0..m {
            let arg = 2.0 * &x - &z[i] - gamma * &grad;
            u[i] = problem.regs[i].prox(gamma / problem.weights[i], &arg)?;
            let znew = &z[i] + lam * (&u[i] - &x);
            znorm2 += (&znew - &z[i]).norm_squared();
            z[i] = znew;
        }
        x = Vector::zeros(n);
        for (w, zi) in problem.weights.iter().zip(z.iter()) {
            x += *w * zi;
        }
        if !all_finite_vec(&x) {
            return Err(Error::numerical(format!("GFB iterate became non-finite at iteration {k}")));
        }
        residual = znorm2.sqrt();
        total = k;
        let due = k % opts.record_stride == 0;
        let stopping = residual <= opts.residual_tol || k == opts.max_iter;
        if due || stopping {
            records.push(TrajectoryRecord {
                k,
                gamma,
                lambda: lam,
                z: stack(&z),
                x: x.clone(),
                u: stack(&u),
                residual,
            });
        }
        if stopping {
            if residual <= opts.residual_tol {
                stop_reason = StopReason::ResidualTol;
            }
            break;
        }
    }
    Ok(Trajectory {
        records,
        stride: opts.record_stride,
        stop_reason,
        total_iterations: total,
        terminal_residual: residual,
        schedule,
    })
}

/// Three-term problem for TOS: smooth F plus two non-smooth terms; the
/// governing variable is mapped back through x = prox_{γJ}(z).
#[derive(Debug, Clone)]
pub struct TosProblem {
    pub smooth: SmoothQuadratic,
    pub reg_r: Regularizer,
    pub reg_j: Regularizer,
}

impl TosProblem {
    pub fn new(smooth: SmoothQuadratic, reg_r: Regularizer, reg_j: Regularizer) -> Result<Self> {
        for reg in [&reg_r, &reg_j] {
            if let Some(d) = reg.dim() {
                if d != smooth.dim() {
                    return Err(Error::invalid("regularizer dimension mismatch in TOS problem"));
                }
            }
        }
        Ok(TosProblem { smooth, reg_r, reg_j })
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }
}

/// Three-operator splitting with constant γ:
/// u⁺ = prox_{γR}(2x − z − γ∇F(x)), z⁺ = z + λ(u⁺ − x), x⁺ = prox_{γJ}(z⁺).
pub fn tos_run(
    problem: &TosProblem,
    gamma: f64,
    lambda: &LambdaRule,
    opts: &RunOptions,
) -> Result<Trajectory> {
    let n = problem.dim();
    let beta = 1.0 / crate::linear::spectral_norm(&problem.smooth.hessian(&Vector::zeros(n))?, 1e-12)?;
    if !(gamma > 0.0 && gamma < 2.0 * beta) {
        return Err(Error::invalid(format!("TOS step-size {gamma} outside (0, {})", 2.0 * beta)));
    }
    let schedule = Schedule { gamma: GammaRule::Constant(gamma), lambda: lambda.clone() };

    let z0 = Vector::zeros(n);
    let x0 = problem.reg_j.prox(gamma, &z0)?;
    let mut state = SolverState { z: z0, x: x0.clone(), u: x0, k: 0 };
    let mut records = vec![record_from(&state, gamma, schedule.lambda_at(1), 0.0)];
    let mut stop_reason = StopReason::MaxIter;
    let mut residual = f64::INFINITY;
    for k in 1..=opts.max_iter {
        let lam = schedule.lambda_at(k);
        let grad = problem.smooth.grad(&state.x)?;
        let arg = 2.0 * &state.x - &state.z - gamma * grad;
        let u = problem.reg_r.prox(gamma, &arg)?;
        let z = &state.z + lam * (&u - &state.x);
        let x = problem.reg_j.prox(gamma, &z)?;
        if !all_finite_vec(&z) {
            return Err(Error::numerical(format!("TOS iterate became non-finite at iteration {k}")));
        }
        residual = (&z - &state.z).norm();
        state = SolverState { z, x, u, k };
        let due = k % opts.record_stride == 0;
        let stopping = residual <= opts.residual_tol || k == opts.max_iter;
        if due || stopping {
            records.push(record_from(&state, gamma, lam, residual));
        }
        if stopping {
            if residual <= opts.residual_tol {
                stop_reason = StopReason::ResidualTol;
            }
            break;
        }
    }
    Ok(Trajectory {
        records,
        stride: opts.record_stride,
        stop_reason,
        total_iterations: state.k,
        terminal_residual: residual,
        schedule,
    })
}

/// Applies the FDR fixed-point operator
/// `F_γ = ½(Id + R_{γR} ∘ R_V)(Id − γ∇G)` through the two reflections.
/// One unrelaxed `fdr_step` from a consistent state reproduces this exactly.
pub fn apply_fixed_point_fdr<S: Smooth>(
    gamma: f64,
    problem: &FdrProblem<S>,
    z: &Vector,
) -> Result<Vector> {
    let forward = z - gamma * problem.smooth.grad_g(z)?;
    let reflected_v = 2.0 * problem.subspace().project(&forward)? - &forward;
    let reflected_r = 2.0 * problem.reg.prox(gamma, &reflected_v)? - &reflected_v;
    Ok(0.5 * (forward + reflected_r))
}

/// Applies the TOS fixed-point operator consistent with the iteration:
/// `T_γ(z) = z − prox_{γJ}(z) + prox_{γR}(2 prox_{γJ}(z) − z − γ∇F(prox_{γJ}(z)))`.
/// One unrelaxed TOS step from a consistent state reproduces this exactly.
pub fn apply_fixed_point_tos(gamma: f64, problem: &TosProblem, z: &Vector) -> Result<Vector> {
    let x = problem.reg_j.prox(gamma, z)?;
    let arg = 2.0 * &x - z - gamma * problem.smooth.grad(&x)?;
    let u = problem.reg_r.prox(gamma, &arg)?;
    Ok(z - x + u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{matrix, vector, Matrix};
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    fn rand_vec(rng: &mut impl Rng, n: usize) -> Vector {
        Vector::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    fn one_dim_lasso(target: f64, mu: f64) -> FdrProblem<SmoothQuadratic> {
        let q = SmoothQuadratic::new(Matrix::identity(1, 1), vector(&[target])).unwrap();
        FdrProblem::new(
            Restricted::new(q, Subspace::full(1)).unwrap(),
            Regularizer::l1(mu).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn problem_values_are_shareable_across_threads() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<Schedule>();
        assert_send_sync::<FdrProblem<SmoothQuadratic>>();
        assert_send_sync::<GfbProblem>();
        assert_send_sync::<TosProblem>();
        assert_send_sync::<Trajectory>();
        assert_send_sync::<crate::linear::Subspace>();
        assert_send_sync::<crate::regularizers::Regularizer>();
    }

    #[test]
    fn validate_stationary_schedule() {
        let s = Schedule::stationary(1.0, 1.0);
        let report = validate_schedule(&s, 1.0, 100).unwrap();
        assert!(report.passed());
        assert!(report.conditions.iter().all(|c| c.status == ConditionStatus::Pass));
    }

    #[test]
    fn validate_geometric_and_power_cases() {
        let beta = 0.7;
        let s = Schedule {
            gamma: GammaRule::Geometric { base: beta, ratio: 0.5 },
            lambda: LambdaRule::Constant(1.0),
        };
        assert!(validate_schedule(&s, 1.0, 1000).unwrap().passed());

        let s = Schedule {
            gamma: GammaRule::PowerDecay { base: beta, exponent: 1.1 },
            lambda: LambdaRule::Constant(1.0),
        };
        let report = validate_schedule(&s, 1.0, 1000).unwrap();
        assert!(report.passed());
        let summability = report
            .conditions
            .iter()
            .find(|c| c.name == "gamma_error_summability")
            .unwrap();
        assert_eq!(summability.status, ConditionStatus::Pass);
    }

    #[test]
    fn validate_rejects_non_summable_power() {
        let s = Schedule {
            gamma: GammaRule::PowerDecay { base: 0.5, exponent: 0.9 },
            lambda: LambdaRule::Constant(1.0),
        };
        assert!(!validate_schedule(&s, 1.0, 100).unwrap().passed());
    }

    #[test]
    fn validate_tolerates_initial_boundary_touch() {
        // gamma_1 = 2 beta_v exactly for the q-power family with base beta_v
        let s = Schedule {
            gamma: GammaRule::PowerDecay { base: 1.0, exponent: 1.1 },
            lambda: LambdaRule::Constant(1.0),
        };
        let report = validate_schedule(&s, 1.0, 1000).unwrap();
        assert!(report.passed());
        assert!(report
            .conditions
            .iter()
            .any(|c| c.status == ConditionStatus::BoundaryPrefix));
    }

    #[test]
    fn validate_rejects_oversized_gamma() {
        let s = Schedule::stationary(2.5, 1.0);
        assert!(!validate_schedule(&s, 1.0, 100).unwrap().passed());
    }

    #[test]
    fn fdr_step_fixed_point_when_trivial() {
        // R = 0-like (subspace indicator of the full space), F with K = Id,
        // f = 0, z at the minimizer 0 stays put
        let q = SmoothQuadratic::new(Matrix::identity(2, 2), Vector::zeros(2)).unwrap();
        let problem = FdrProblem::new(
            Restricted::new(q, Subspace::full(2)).unwrap(),
            Regularizer::subspace_indicator(Subspace::full(2)),
        )
        .unwrap();
        let state = fresh_state(2, &Subspace::full(2)).unwrap();
        let next = fdr_step(&state, 0.9, 1.0, &problem).unwrap();
        assert!((next.z - state.z).norm() < 1e-15);
    }

    #[test]
    fn fdr_step_soft_threshold_hand_value() {
        // 1-D, R = |·|, F = 0-ish: use K = Id, f = z so the gradient vanishes
        // at the current point; from z = x = 2, gamma = 1: u = prox(2) = 1
        let q = SmoothQuadratic::new(Matrix::identity(1, 1), vector(&[2.0])).unwrap();
        let problem = FdrProblem::new(
            Restricted::new(q, Subspace::full(1)).unwrap(),
            Regularizer::l1(1.0).unwrap(),
        )
        .unwrap();
        let state = SolverState { z: vector(&[2.0]), x: vector(&[2.0]), u: vector(&[2.0]), k: 0 };
        let next = fdr_step(&state, 1.0, 1.0, &problem).unwrap();
        assert!((next.u[0] - 1.0).abs() < 1e-15);
        assert!((next.z[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fdr_run_reaches_analytic_minimizer() {
        // min ½(x−1)² + 0.3|x|: minimizer = soft-threshold of 1 at 0.3
        let problem = one_dim_lasso(1.0, 0.3);
        let schedule = Schedule::stationary(1.0, 1.0);
        let opts = RunOptions::new(500, 1e-13, 1).unwrap();
        let traj = fdr_run(&problem, &schedule, &opts).unwrap();
        assert_eq!(traj.stop_reason, StopReason::ResidualTol);
        assert!((traj.last().x[0] - 0.7).abs() < 1e-10);
    }

    #[test]
    fn zero_problem_stops_immediately() {
        let q = SmoothQuadratic::new(Matrix::identity(2, 2), Vector::zeros(2)).unwrap();
        let problem = FdrProblem::new(
            Restricted::new(q, Subspace::full(2)).unwrap(),
            Regularizer::subspace_indicator(Subspace::full(2)),
        )
        .unwrap();
        let opts = RunOptions::new(100, 0.0, 1).unwrap();
        let traj = fdr_run(&problem, &Schedule::stationary(1.0, 1.0), &opts).unwrap();
        assert_eq!(traj.total_iterations, 1);
        assert_eq!(traj.stop_reason, StopReason::ResidualTol);
    }

    #[test]
    fn fdr_iterates_stay_feasible() {
        let mut r = rng(3);
        let k = Matrix::from_fn(6, 8, |_, _| r.random::<f64>() - 0.5);
        let q = SmoothQuadratic::new(k, rand_vec(&mut r, 6)).unwrap();
        let v = Subspace::from_spanning(8, &(0..3).map(|_| rand_vec(&mut r, 8)).collect::<Vec<_>>()).unwrap();
        let problem = FdrProblem::new(
            Restricted::new(q, v).unwrap(),
            Regularizer::l1(0.1).unwrap(),
        )
        .unwrap();
        let gamma = problem.smooth.beta_v();
        let opts = RunOptions::new(300, 0.0, 10).unwrap();
        let traj = fdr_run(&problem, &Schedule::stationary(gamma, 1.0), &opts).unwrap();
        for rec in &traj.records {
            let infeas = problem.subspace().project_complement(&rec.x).unwrap().norm();
            assert!(infeas <= 1e-10 * (1.0 + rec.x.norm()));
        }
    }

    #[test]
    fn residuals_are_square_summable() {
        let problem = one_dim_lasso(5.0, 0.5);
        let opts = RunOptions::new(400, 0.0, 1).unwrap();
        let traj = fdr_run(&problem, &Schedule::stationary(1.5, 1.0), &opts).unwrap();
        let sq: Vec<f64> = traj.records.iter().skip(1).map(|r| r.residual * r.residual).collect();
        let first = sq[0];
        let last = *sq.last().unwrap();
        assert!(last < 1e-3 * first, "square residuals must collapse: {last} vs {first}");
    }

    #[test]
    fn fb_matches_fdr_on_full_space() {
        let mut r = rng(8);
        let k = Matrix::from_fn(5, 4, |_, _| r.random::<f64>() - 0.5);
        let q = SmoothQuadratic::new(k, rand_vec(&mut r, 5)).unwrap();
        let reg = Regularizer::l1(0.2).unwrap();
        let (beta, _) = crate::smooth::lipschitz_moduli(&q, &Subspace::full(4)).unwrap();
        let schedule = Schedule::stationary(beta, 1.0);
        let opts = RunOptions::new(50, 0.0, 1).unwrap();

        let fb = fb_run(&q, &reg, &schedule, &opts).unwrap();
        let problem = FdrProblem::new(Restricted::new(q, Subspace::full(4)).unwrap(), reg).unwrap();
        let fdr = fdr_run(&problem, &schedule, &opts).unwrap();
        for (a, b) in fb.records.iter().zip(fdr.records.iter()) {
            assert!((&a.z - &b.z).norm() <= 1e-12);
            assert!((&a.x - &b.x).norm() <= 1e-12);
        }
    }

    #[test]
    fn fb_fixed_point_equation_residual() {
        let q = SmoothQuadratic::new(Matrix::identity(1, 1), vector(&[2.0])).unwrap();
        let reg = Regularizer::l1(0.4).unwrap();
        let schedule = Schedule::stationary(0.8, 1.0);
        let opts = RunOptions::new(2000, 1e-14, 1).unwrap();
        let traj = fb_run(&q, &reg, &schedule, &opts).unwrap();
        let x = &traj.last().x;
        let fp = reg.prox(0.8, &(x - 0.8 * q.grad(x).unwrap())).unwrap();
        assert!((fp - x).norm() <= 1e-10);
    }

    #[test]
    fn fb_one_step_quadratic() {
        // R = 0 modeled as the indicator of the whole space (prox = Id);
        // with gamma = beta = 1 the quadratic is solved in one step
        let q = SmoothQuadratic::new(Matrix::identity(2, 2), Vector::zeros(2)).unwrap();
        let reg = Regularizer::subspace_indicator(Subspace::full(2));
        let schedule = Schedule::stationary(1.0, 1.0);
        let opts = RunOptions::new(10, 0.0, 1).unwrap();
        let traj = fb_run(&q, &reg, &schedule, &opts).unwrap();
        // x1 = x0 - grad(x0) = 0 from any start; z0 = 0 already optimal
        assert!(traj.last().x.norm() < 1e-15);
    }

    #[test]
    fn gfb_single_term_reduces_to_relaxed_fb() {
        let mut r = rng(21);
        let k = Matrix::from_fn(4, 4, |_, _| r.random::<f64>() - 0.5);
        let q = SmoothQuadratic::new(k, rand_vec(&mut r, 4)).unwrap();
        let reg = Regularizer::l1(0.3).unwrap();
        let (beta, _) = crate::smooth::lipschitz_moduli(&q, &Subspace::full(4)).unwrap();
        let gamma = 0.9 * beta;
        let lambda = LambdaRule::Constant(0.7);
        let opts = RunOptions::new(60, 0.0, 1).unwrap();
        let gfb = gfb_run(
            &GfbProblem::new(q.clone(), vec![reg.clone()], vec![1.0]).unwrap(),
            gamma,
            &lambda,
            &opts,
        )
        .unwrap();

        // hand-rolled relaxed FB: x+ = (1-λ)x + λ prox(x - γ∇F(x))
        let mut x = Vector::zeros(4);
        for rec in gfb.records.iter().skip(1) {
            let lam = 0.7;
            let p = reg.prox(gamma, &(&x - gamma * q.grad(&x).unwrap())).unwrap();
            x = (1.0 - lam) * &x + lam * p;
            assert!((&rec.x - &x).norm() <= 1e-12, "mismatch at k={}", rec.k);
        }
    }

    #[test]
    fn gfb_all_zero_regs_recovers_least_squares() {
        let mut r = rng(33);
        let k = Matrix::from_fn(6, 3, |_, _| r.random::<f64>() - 0.5);
        let f = rand_vec(&mut r, 6);
        let q = SmoothQuadratic::new(k.clone(), f.clone()).unwrap();
        // two "zero" regularizers: indicators of the whole space
        let whole = Regularizer::subspace_indicator(Subspace::full(3));
        let problem = GfbProblem::new(q, vec![whole.clone(), whole], vec![0.5, 0.5]).unwrap();
        let (beta, _) = crate::smooth::lipschitz_moduli(&problem.smooth, &Subspace::full(3)).unwrap();
        let opts = RunOptions::new(4000, 1e-13, 100).unwrap();
        let traj = gfb_run(&problem, beta, &LambdaRule::Constant(1.0), &opts).unwrap();
        let normal = k.transpose() * &k;
        let sol = crate::linear::solve_spd(&normal, &(k.transpose() * &f)).unwrap();
        assert!((&traj.last().x - &sol).norm() < 1e-8);
    }

    #[test]
    fn gfb_rejects_bad_weights() {
        let q = SmoothQuadratic::new(Matrix::identity(2, 2), Vector::zeros(2)).unwrap();
        let reg = Regularizer::l1(1.0).unwrap();
        assert!(GfbProblem::new(q.clone(), vec![reg.clone(), reg.clone()], vec![0.5, 0.6]).is_err());
        assert!(GfbProblem::new(q, vec![reg], vec![]).is_err());
    }

    #[test]
    fn tos_with_trivial_j_matches_relaxed_fb() {
        let mut r = rng(44);
        let k = Matrix::from_fn(4, 4, |_, _| r.random::<f64>() - 0.5);
        let q = SmoothQuadratic::new(k, rand_vec(&mut r, 4)).unwrap();
        let reg_r = Regularizer::l1(0.25).unwrap();
        let reg_j = Regularizer::subspace_indicator(Subspace::full(4));
        let (beta, _) = crate::smooth::lipschitz_moduli(&q, &Subspace::full(4)).unwrap();
        let gamma = 0.8 * beta;
        let opts = RunOptions::new(60, 0.0, 1).unwrap();
        let tos = tos_run(
            &TosProblem::new(q.clone(), reg_r.clone(), reg_j).unwrap(),
            gamma,
            &LambdaRule::Constant(0.9),
            &opts,
        )
        .unwrap();
        let mut x = Vector::zeros(4);
        for rec in tos.records.iter().skip(1) {
            let lam = 0.9;
            let p = reg_r.prox(gamma, &(&x - gamma * q.grad(&x).unwrap())).unwrap();
            x = (1.0 - lam) * &x + lam * p;
            assert!((&rec.x - &x).norm() <= 1e-12);
        }
    }

    #[test]
    fn tos_differs_from_fdr_when_gradient_leaves_subspace() {
        // J = ι_V replaces P_V, but TOS uses ∇F where FDR uses ∇G = P_V∇F P_V;
        // construct a 2-D case with ∇F(x) ∉ V and check the iterates differ.
        let k = matrix(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let f = vector(&[1.0, 2.0]);
        let q = SmoothQuadratic::new(k, f).unwrap();
        let v = Subspace::from_coordinates(2, &[0]).unwrap();
        let reg_r = Regularizer::l1(0.2).unwrap();

        let gamma = 0.3;
        let opts = RunOptions::new(5, 0.0, 1).unwrap();
        let tos = tos_run(
            &TosProblem::new(q.clone(), reg_r.clone(), Regularizer::subspace_indicator(v.clone())).unwrap(),
            gamma,
            &LambdaRule::Constant(1.0),
            &opts,
        )
        .unwrap();
        let fdr = fdr_run(
            &FdrProblem::new(Restricted::new(q, v).unwrap(), reg_r).unwrap(),
            &Schedule::stationary(gamma, 1.0),
            &opts,
        )
        .unwrap();
        let dz = (&tos.records[2].z - &fdr.records[2].z).norm();
        assert!(dz > 1e-6, "TOS and FDR should differ here, got {dz}");
    }

    #[test]
    fn tos_zero_terms_freeze_z() {
        // F's gradient vanishes at 0 when f = 0; R and J trivial
        let q = SmoothQuadratic::new(Matrix::identity(2, 2), Vector::zeros(2)).unwrap();
        let whole = Regularizer::subspace_indicator(Subspace::full(2));
        let opts = RunOptions::new(3, 0.0, 1).unwrap();
        let traj = tos_run(
            &TosProblem::new(q, whole.clone(), whole).unwrap(),
            0.9,
            &LambdaRule::Constant(1.0),
            &opts,
        )
        .unwrap();
        assert!(traj.last().z.norm() < 1e-15);
    }

    #[test]
    fn fixed_point_operator_matches_one_step() {
        let mut r = rng(61);
        let k = Matrix::from_fn(5, 5, |_, _| r.random::<f64>() - 0.5);
        let q = SmoothQuadratic::new(k, rand_vec(&mut r, 5)).unwrap();
        let v = Subspace::from_spanning(5, &[rand_vec(&mut r, 5), rand_vec(&mut r, 5)]).unwrap();
        let problem = FdrProblem::new(
            Restricted::new(q, v.clone()).unwrap(),
            Regularizer::l1(0.3).unwrap(),
        )
        .unwrap();
        let gamma = 0.9 * problem.smooth.beta_v();
        for _ in 0..20 {
            let z = rand_vec(&mut r, 5);
            let x = v.project(&z).unwrap();
            let state = SolverState { z: z.clone(), x: x.clone(), u: x, k: 0 };
            let stepped = fdr_step(&state, gamma, 1.0, &problem).unwrap();
            let applied = apply_fixed_point_fdr(gamma, &problem, &z).unwrap();
            assert!((&stepped.z - &applied).norm() <= 1e-11);
        }
    }

    #[test]
    fn fixed_point_fdr_contracts_everything_for_identity_quadratic() {
        // R = 0, V = whole space, F = ½‖·‖², γ = 1 = β: the forward map is
        // Id − ∇F = 0, both reflections fix 0, so F_γ ≡ 0.
        let q = SmoothQuadratic::new(Matrix::identity(1, 1), Vector::zeros(1)).unwrap();
        let problem = FdrProblem::new(
            Restricted::new(q, Subspace::full(1)).unwrap(),
            Regularizer::subspace_indicator(Subspace::full(1)),
        )
        .unwrap();
        let out = apply_fixed_point_fdr(1.0, &problem, &vector(&[3.7])).unwrap();
        assert!(out.norm() < 1e-15);
    }

    #[test]
    fn fixed_point_operators_nonexpansive() {
        let mut r = rng(77);
        let k = Matrix::from_fn(6, 6, |_, _| r.random::<f64>() - 0.5);
        let q = SmoothQuadratic::new(k, rand_vec(&mut r, 6)).unwrap();
        let v = Subspace::from_spanning(6, &(0..3).map(|_| rand_vec(&mut r, 6)).collect::<Vec<_>>()).unwrap();
        let problem = FdrProblem::new(
            Restricted::new(q.clone(), v).unwrap(),
            Regularizer::l1(0.3).unwrap(),
        )
        .unwrap();
        let gamma_fdr = 1.2 * problem.smooth.beta_v();
        let tos_problem = TosProblem::new(
            q.clone(),
            Regularizer::l1(0.3).unwrap(),
            Regularizer::tv1d(0.2, 6).unwrap(),
        )
        .unwrap();
        let (beta, _) = crate::smooth::lipschitz_moduli(&q, &Subspace::full(6)).unwrap();
        let gamma_tos = 1.2 * beta;
        for _ in 0..100 {
            let a = rand_vec(&mut r, 6);
            let b = rand_vec(&mut r, 6);
            let fa = apply_fixed_point_fdr(gamma_fdr, &problem, &a).unwrap();
            let fb = apply_fixed_point_fdr(gamma_fdr, &problem, &b).unwrap();
            assert!((fa - fb).norm() <= (&a - &b).norm() + 1e-10);
            let ta = apply_fixed_point_tos(gamma_tos, &tos_problem, &a).unwrap();
            let tb = apply_fixed_point_tos(gamma_tos, &tos_problem, &b).unwrap();
            assert!((ta - tb).norm() <= (&a - &b).norm() + 1e-10);
        }
    }

    #[test]
    fn tos_fixed_point_matches_one_step() {
        let mut r = rng(91);
        let k = Matrix::from_fn(4, 4, |_, _| r.random::<f64>() - 0.5);
        let q = SmoothQuadratic::new(k, rand_vec(&mut r, 4)).unwrap();
        let problem = TosProblem::new(
            q,
            Regularizer::l1(0.3).unwrap(),
            Regularizer::tv1d(0.2, 4).unwrap(),
        )
        .unwrap();
        let gamma = 0.4;
        for _ in 0..20 {
            let z = rand_vec(&mut r, 4);
            // one unrelaxed step from the consistent state (z, prox_{γJ}(z))
            let x = problem.reg_j.prox(gamma, &z).unwrap();
            let grad = problem.smooth.grad(&x).unwrap();
            let u = problem.reg_r.prox(gamma, &(2.0 * &x - &z - gamma * grad)).unwrap();
            let z_next = &z + (&u - &x);
            let applied = apply_fixed_point_tos(gamma, &problem, &z).unwrap();
            assert!((&z_next - &applied).norm() <= 1e-11);
        }
    }

    #[test]
    fn converged_run_is_a_fixed_point() {
        let problem = one_dim_lasso(3.0, 0.7);
        let schedule = Schedule::stationary(1.1, 1.0);
        let opts = RunOptions::new(3000, 1e-14, 1).unwrap();
        let traj = fdr_run(&problem, &schedule, &opts).unwrap();
        let z = &traj.last().z;
        let fz = apply_fixed_point_fdr(1.1, &problem, z).unwrap();
        assert!((fz - z).norm() <= 1e-9);
    }

    #[test]
    fn km_contraction_toward_reference_fixed_point() {
        let mut r = rng(101);
        let k = Matrix::from_fn(8, 6, |_, _| r.random::<f64>() - 0.5);
        let q = SmoothQuadratic::new(k, rand_vec(&mut r, 8)).unwrap();
        let v = Subspace::from_spanning(6, &(0..3).map(|_| rand_vec(&mut r, 6)).collect::<Vec<_>>()).unwrap();
        let problem = FdrProblem::new(
            Restricted::new(q, v).unwrap(),
            Regularizer::l1(0.15).unwrap(),
        )
        .unwrap();
        let gamma = problem.smooth.beta_v();
        let schedule = Schedule::stationary(gamma, 1.0);
        let reference = fdr_run(&problem, &schedule, &RunOptions::new(20_000, 1e-14, 20_000).unwrap()).unwrap();
        let z_star = &reference.last().z;
        let traj = fdr_run(&problem, &schedule, &RunOptions::new(2000, 0.0, 1).unwrap()).unwrap();
        let mut prev = (&traj.records[0].z - z_star).norm();
        for rec in traj.records.iter().skip(1) {
            let d = (&rec.z - z_star).norm();
            assert!(d <= prev + 1e-10, "quasi-non-expansiveness violated: {d} > {prev}");
            prev = d;
        }
    }
}
