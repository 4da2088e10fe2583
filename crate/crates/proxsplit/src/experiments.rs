//! Problem generators for the two experiment families, schedule presets,
//! the end-to-end run pipelines, CSV and static-plot emission, and run
//! comparison.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::diagnostics::{
    audit_energy_inequality, bregman_series, detect_identification_with, Anchor, AuditReport,
    BregmanSeries, IdentificationReport,
};
use crate::error::{Error, Result};
use crate::linear::{Matrix, Subspace, Vector};
use crate::rates::{
    build_fdr_linearization, build_gfb_linearization, build_tos_linearization, certify,
    RateCertificate, TosAnchor,
};
use crate::regularizers::{default_signature_tol, ManifoldSignature, Regularizer};
use crate::smooth::{Restricted, Smooth, SmoothQuadratic};
use crate::solvers::{
    fdr_run, gfb_run, tos_run, validate_schedule, FdrProblem, GammaRule, GfbProblem, LambdaRule,
    RunOptions, Schedule, StopReason, TosProblem, Trajectory, ValidationReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// ½‖Kx − f‖² + μ‖x‖₁ + ι_V(x)
    LassoConstrained,
    /// μ₁‖x‖_{1,2} + ½‖Kx − f‖² + μ₂‖Dx‖₁
    GroupTv,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::LassoConstrained => write!(f, "lasso_constrained"),
            Family::GroupTv => write!(f, "group_tv"),
        }
    }
}

/// Fully deterministic description of a synthetic instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub family: Family,
    /// Rows of the sensing operator K.
    pub rows: usize,
    /// Ambient dimension n.
    pub dim: usize,
    /// Non-zero count of the ground truth (lasso) or active block count
    /// (group_tv).
    pub sparsity: usize,
    /// Subspace dimension d (lasso_constrained only).
    pub subspace_dim: usize,
    /// Block size for group_tv.
    pub block_size: usize,
    pub noise: f64,
    pub mu: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub seed: u64,
}

impl ProblemSpec {
    pub fn lasso_constrained(seed: u64) -> Self {
        ProblemSpec {
            family: Family::LassoConstrained,
            rows: 100,
            dim: 200,
            sparsity: 8,
            subspace_dim: 40,
            block_size: 0,
            noise: 0.01,
            mu: 0.1,
            mu1: 0.0,
            mu2: 0.0,
            seed,
        }
    }

    pub fn group_tv(seed: u64) -> Self {
        ProblemSpec {
            family: Family::GroupTv,
            rows: 128,
            dim: 256,
            sparsity: 4,
            subspace_dim: 0,
            block_size: 8,
            noise: 0.01,
            mu: 0.0,
            mu1: 0.1,
            mu2: 0.05,
            seed,
        }
    }

    pub fn fingerprint(&self) -> String {
        format!(
            "{}:m{}n{}s{}d{}b{}noise{}mu{}mu1{}mu2{}seed{}",
            self.family,
            self.rows,
            self.dim,
            self.sparsity,
            self.subspace_dim,
            self.block_size,
            self.noise,
            self.mu,
            self.mu1,
            self.mu2,
            self.seed
        )
    }
}

/// A generated instance: the data term plus the family-specific pieces.
#[derive(Debug, Clone)]
pub enum ProblemInstance {
    Lasso {
        spec: ProblemSpec,
        smooth: SmoothQuadratic,
        subspace: Subspace,
        reg: Regularizer,
        ground_truth: Vector,
    },
    GroupTv {
        spec: ProblemSpec,
        smooth: SmoothQuadratic,
        reg_group: Regularizer,
        reg_tv: Regularizer,
        ground_truth: Vector,
    },
}

impl ProblemInstance {
    pub fn spec(&self) -> &ProblemSpec {
        match self {
            ProblemInstance::Lasso { spec, .. } | ProblemInstance::GroupTv { spec, .. } => spec,
        }
    }

    pub fn smooth(&self) -> &SmoothQuadratic {
        match self {
            ProblemInstance::Lasso { smooth, .. } | ProblemInstance::GroupTv { smooth, .. } => smooth,
        }
    }

    pub fn ground_truth(&self) -> &Vector {
        match self {
            ProblemInstance::Lasso { ground_truth, .. }
            | ProblemInstance::GroupTv { ground_truth, .. } => ground_truth,
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Draws `count` distinct indices from `0..n`, sorted, deterministically.
fn sample_indices(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<usize> {
    let mut picked = rand::seq::index::sample(rng, n, count).into_vec();
    picked.sort_unstable();
    picked
}

/// Generates a deterministic synthetic instance. The sensing operator has
/// standard normal entries scaled by 1/√m; the ground truth carries ±1
/// values; for the constrained family the subspace is built to contain the
/// ground truth (its support axes plus d−s extra random directions).
pub fn generate(spec: &ProblemSpec) -> Result<ProblemInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (m, n) = (spec.rows, spec.dim);
    if m == 0 || n == 0 {
        return Err(Error::invalid("instance dimensions must be positive"));
    }
    let scale = 1.0 / (m as f64).sqrt();
    let k = Matrix::from_fn(m, n, |_, _| normal(&mut rng) * scale);

    match spec.family {
        Family::LassoConstrained => {
            let s = spec.sparsity;
            let d = spec.subspace_dim;
            if s == 0 || s > n {
                return Err(Error::invalid("sparsity must lie in 1..=n"));
            }
            if d < s || d > n {
                return Err(Error::invalid(
                    "subspace dimension must be at least the sparsity and at most n",
                ));
            }
            let support = sample_indices(&mut rng, n, s);
            let mut x0 = Vector::zeros(n);
            for &i in &support {
                x0[i] = if rng.random::<bool>() { 1.0 } else { -1.0 };
            }
            let mut spanning: Vec<Vector> = support
                .iter()
                .map(|&i| {
                    let mut e = Vector::zeros(n);
                    e[i] = 1.0;
                    e
                })
                .collect();
            for _ in 0..d - s {
                spanning.push(Vector::from_fn(n, |_, _| normal(&mut rng)));
            }
            let subspace = Subspace::from_spanning(n, &spanning)?;
            if subspace.dim() != d {
                return Err(Error::numerical(
                    "random subspace directions were linearly dependent",
                ));
            }
            let noise = Vector::from_fn(m, |_, _| normal(&mut rng) * spec.noise);
            let f = &k * &x0 + noise;
            Ok(ProblemInstance::Lasso {
                spec: spec.clone(),
                smooth: SmoothQuadratic::new(k, f)?,
                subspace,
                reg: Regularizer::l1(spec.mu)?,
                ground_truth: x0,
            })
        }
        Family::GroupTv => {
            let bs = spec.block_size;
            if bs == 0 || n % bs != 0 {
                return Err(Error::invalid("block size must divide the dimension"));
            }
            let blocks_total = n / bs;
            if spec.sparsity == 0 || spec.sparsity > blocks_total {
                return Err(Error::invalid("active block count must lie in 1..=#blocks"));
            }
            let active = sample_indices(&mut rng, blocks_total, spec.sparsity);
            let mut x0 = Vector::zeros(n);
            for &b in &active {
                let value = if rng.random::<bool>() { 1.0 } else { -1.0 };
                for i in b * bs..(b + 1) * bs {
                    x0[i] = value;
                }
            }
            let noise = Vector::from_fn(m, |_, _| normal(&mut rng) * spec.noise);
            let f = &k * &x0 + noise;
            let blocks: Vec<Vec<usize>> = (0..blocks_total)
                .map(|b| (b * bs..(b + 1) * bs).collect())
                .collect();
            Ok(ProblemInstance::GroupTv {
                spec: spec.clone(),
                smooth: SmoothQuadratic::new(k, f)?,
                reg_group: Regularizer::group_l12(spec.mu1, blocks, n)?,
                reg_tv: Regularizer::tv1d(spec.mu2, n)?,
                ground_truth: x0,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Fdr,
    Fb,
    Gfb,
    Tos,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Fdr => write!(f, "fdr"),
            Method::Fb => write!(f, "fb"),
            Method::Gfb => write!(f, "gfb"),
            Method::Tos => write!(f, "tos"),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fdr" => Ok(Method::Fdr),
            "fb" => Ok(Method::Fb),
            "gfb" => Ok(Method::Gfb),
            "tos" => Ok(Method::Tos),
            other => Err(Error::invalid(format!("unknown method '{other}'"))),
        }
    }
}

/// Step-size schedule presets. The decay shapes follow the four comparison
/// cases of the experiments; the base is the modulus matching each method's
/// admissible interval (β_V for FDR, β for FB/GFB/TOS).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Stationary,
    /// γ_k = (1 + 1/k^{1.1})·base
    Case1,
    /// γ_k = (1 + 1/k²)·base
    Case2,
    /// γ_k = (1 + 0.999^k)·base
    Case3,
    /// γ_k = (1 + 0.5^k)·base
    Case4,
}

impl Preset {
    pub fn schedule(&self, base: f64) -> Schedule {
        let gamma = match self {
            Preset::Stationary => GammaRule::Constant(base),
            Preset::Case1 => GammaRule::PowerDecay { base, exponent: 1.1 },
            Preset::Case2 => GammaRule::PowerDecay { base, exponent: 2.0 },
            Preset::Case3 => GammaRule::Geometric { base, ratio: 0.999 },
            Preset::Case4 => GammaRule::Geometric { base, ratio: 0.5 },
        };
        Schedule { gamma, lambda: LambdaRule::Constant(1.0) }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::Stationary => write!(f, "stationary"),
            Preset::Case1 => write!(f, "case1"),
            Preset::Case2 => write!(f, "case2"),
            Preset::Case3 => write!(f, "case3"),
            Preset::Case4 => write!(f, "case4"),
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stationary" => Ok(Preset::Stationary),
            "case1" => Ok(Preset::Case1),
            "case2" => Ok(Preset::Case2),
            "case3" => Ok(Preset::Case3),
            "case4" => Ok(Preset::Case4),
            other => Err(Error::invalid(format!("unknown preset '{other}'"))),
        }
    }
}

/// One CSV row of a run report; the schema is fixed and shared by all
/// methods (columns without a meaning for a method hold NaN).
#[derive(Debug, Clone)]
pub struct CsvRow {
    pub k: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub objective: f64,
    pub bregman: f64,
    pub best_bregman: f64,
    pub ergodic_bregman: f64,
    pub dist_z: f64,
    pub dist_x: f64,
    pub dist_u: f64,
    pub signature_size: usize,
    pub identified: bool,
}

pub const CSV_HEADER: &str = "k,gamma_k,lambda_k,objective,bregman,best_bregman,ergodic_bregman,dist_z,dist_x,dist_u,signature_size,identified";

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

impl CsvRow {
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.k,
            fmt17(self.gamma),
            fmt17(self.lambda),
            fmt17(self.objective),
            fmt17(self.bregman),
            fmt17(self.best_bregman),
            fmt17(self.ergodic_bregman),
            fmt17(self.dist_z),
            fmt17(self.dist_x),
            fmt17(self.dist_u),
            self.signature_size,
            u8::from(self.identified),
        )
    }
}

/// Everything a finished experiment reports.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub fingerprint: String,
    pub method: Method,
    pub preset: Preset,
    pub validation: ValidationReport,
    pub rows: Vec<CsvRow>,
    pub identification: IdentificationReport,
    pub certificate: Option<RateCertificate>,
    pub audit: Option<AuditReport>,
    pub bregman: Option<BregmanSeries>,
    pub stop_reason: StopReason,
    pub total_iterations: usize,
    pub wall_clock_ms: u128,
    pub anchor_z_norm: f64,
    pub csv_path: Option<PathBuf>,
    pub plot_paths: Vec<PathBuf>,
}

impl RunReport {
    pub fn terminal_dist_z(&self) -> f64 {
        self.rows.last().map(|r| r.dist_z).unwrap_or(f64::NAN)
    }

    pub fn dist_z_series(&self) -> Vec<(usize, f64)> {
        self.rows.iter().map(|r| (r.k, r.dist_z)).collect()
    }
}

/// Options for a full experiment run.
#[derive(Debug, Clone)]
pub struct ExperimentOptions {
    pub max_iter: usize,
    pub residual_tol: f64,
    pub record_stride: usize,
    /// Multiplier on `max_iter` for the trusted reference run.
    pub reference_factor: usize,
    pub emit_plots: bool,
    /// Relative tolerance handed to the rate certifier.
    pub rate_tol_rel: f64,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            max_iter: 5000,
            residual_tol: 0.0,
            record_stride: 1,
            reference_factor: 10,
            emit_plots: false,
            rate_tol_rel: 0.10,
        }
    }
}

fn reference_options(opts: &ExperimentOptions) -> Result<RunOptions> {
    let iters = opts.max_iter.saturating_mul(opts.reference_factor.max(1));
    RunOptions::new(iters, 1e-14, iters)
}

fn main_options(opts: &ExperimentOptions) -> Result<RunOptions> {
    RunOptions::new(opts.max_iter, opts.residual_tol, opts.record_stride)
}

/// Identification detector for stacked trajectories: each block is matched
/// against its own regularizer/target pair.
fn detect_identification_blocks(
    traj: &Trajectory,
    parts: &[(Regularizer, ManifoldSignature)],
    block_len: usize,
) -> Result<IdentificationReport> {
    let mut identified_at = None;
    for rec in &traj.records {
        let mut all = true;
        for (i, (reg, target)) in parts.iter().enumerate() {
            let block = rec.u.rows(i * block_len, block_len).into_owned();
            let sig = reg.signature(&block, default_signature_tol(&block))?;
            if sig != *target {
                all = false;
                break;
            }
        }
        if all {
            if identified_at.is_none() {
                identified_at = Some(rec.k);
            }
        } else {
            identified_at = None;
        }
    }
    Ok(IdentificationReport { identified_at, margin: None })
}

fn annotate_identified(rows: &mut [CsvRow], identified_at: Option<usize>) {
    if let Some(k0) = identified_at {
        for row in rows.iter_mut() {
            row.identified = row.k >= k0;
        }
    }
}

/// Runs the full pipeline for one (instance, method, preset) triple:
/// generate, validate the schedule, run a 10x stationary reference for the
/// anchor, run the method, compute diagnostics and (when supported) the rate
/// certificate, and emit CSV/plots under `out_dir`.
pub fn run_experiment(
    spec: &ProblemSpec,
    method: Method,
    preset: Preset,
    opts: &ExperimentOptions,
    out_dir: Option<&Path>,
) -> Result<RunReport> {
    let started = Instant::now();
    let instance = generate(spec)?;
    let mut report = match (&instance, method) {
        (ProblemInstance::Lasso { .. }, Method::Fdr | Method::Fb) => {
            run_lasso(&instance, method, preset, opts)
        }
        (ProblemInstance::GroupTv { .. }, Method::Gfb) => run_gfb(&instance, preset, opts),
        (ProblemInstance::GroupTv { .. }, Method::Tos) => run_tos(&instance, preset, opts),
        _ => Err(Error::invalid(format!(
            "method {method} is not applicable to family {}",
            spec.family
        ))),
    }?;
    report.wall_clock_ms = started.elapsed().as_millis();
    if let Some(dir) = out_dir {
        let run_dir = dir.join(format!("{}_{method}_{preset}_seed{}", spec.family, spec.seed));
        std::fs::create_dir_all(&run_dir)
            .map_err(|e| Error::invalid(format!("cannot create output directory: {e}")))?;
        let csv_path = run_dir.join("trajectory.csv");
        write_csv(&csv_path, &report.rows)?;
        report.csv_path = Some(csv_path);
        if opts.emit_plots {
            report.plot_paths = emit_plots(&run_dir, &report)?;
        }
    }
    Ok(report)
}

fn run_lasso(
    instance: &ProblemInstance,
    method: Method,
    preset: Preset,
    opts: &ExperimentOptions,
) -> Result<RunReport> {
    let (spec, smooth, subspace, reg) = match instance {
        ProblemInstance::Lasso { spec, smooth, subspace, reg, .. } => (spec, smooth, subspace, reg),
        _ => unreachable!(),
    };
    let v = match method {
        Method::Fdr => subspace.clone(),
        Method::Fb => Subspace::full(spec.dim),
        _ => unreachable!(),
    };
    let problem = FdrProblem::new(Restricted::new(smooth.clone(), v)?, reg.clone())?;
    let base = match method {
        Method::Fdr => problem.smooth.beta_v(),
        _ => problem.smooth.beta(),
    };
    let schedule = preset.schedule(base);
    let validation = validate_schedule(&schedule, problem.smooth.beta_v(), opts.max_iter)?;

    // trusted anchor from a stationary run at the limit step-size
    let gamma_limit = schedule.gamma.limit();
    let reference_schedule = Schedule::stationary(gamma_limit, schedule.lambda_limit());
    let reference = fdr_run(&problem, &reference_schedule, &reference_options(opts)?)?;
    let anchor = Anchor::from_reference(&reference, gamma_limit, problem.subspace())?;

    let traj = fdr_run(&problem, &schedule, &main_options(opts)?)?;
    let series = bregman_series(&anchor, &problem, &traj)?;
    let target = problem
        .reg
        .signature(&anchor.x_star, default_signature_tol(&anchor.x_star))?;
    let mut identification =
        detect_identification_with(&traj, &problem.reg, &target, None, |rec| &rec.u)?;
    let subgrad =
        (&anchor.x_star - &anchor.z_star) / gamma_limit - problem.smooth.grad_g(&anchor.x_star)?;
    identification.margin = Some(problem.reg.nondegeneracy_margin(&anchor.x_star, &subgrad)?);

    let audit = if schedule.is_unrelaxed() && traj.stride == 1 {
        Some(audit_energy_inequality(&anchor, &problem, &traj, &schedule)?)
    } else {
        None
    };

    let lin = build_fdr_linearization(&anchor, &problem, gamma_limit, schedule.lambda_limit())?;
    let certificate = match certify(&lin, &anchor.z_star, &traj, &identification, opts.rate_tol_rel)
    {
        Ok(cert) => Some(cert),
        Err(Error::InsufficientData(_)) | Err(Error::InvalidInput(_)) => None,
        Err(e) => return Err(e),
    };

    let mut rows = Vec::with_capacity(traj.records.len());
    for (i, rec) in traj.records.iter().enumerate() {
        let sig = problem.reg.signature(&rec.u, default_signature_tol(&rec.u))?;
        rows.push(CsvRow {
            k: rec.k,
            gamma: rec.gamma,
            lambda: rec.lambda,
            objective: problem.reg.eval(&rec.x)? + problem.smooth.eval_g(&rec.x)?,
            bregman: series.values[i],
            best_bregman: series.best[i],
            ergodic_bregman: series.ergodic[i],
            dist_z: (&rec.z - &anchor.z_star).norm(),
            dist_x: (&rec.x - &anchor.x_star).norm(),
            dist_u: (&rec.u - &anchor.x_star).norm(),
            signature_size: sig.size(),
            identified: false,
        });
    }
    annotate_identified(&mut rows, identification.identified_at);

    Ok(RunReport {
        fingerprint: spec.fingerprint(),
        method,
        preset,
        validation,
        rows,
        identification,
        certificate,
        audit,
        bregman: Some(series),
        stop_reason: traj.stop_reason,
        total_iterations: traj.total_iterations,
        wall_clock_ms: 0,
        anchor_z_norm: anchor.z_star.norm(),
        csv_path: None,
        plot_paths: Vec::new(),
    })
}

fn run_gfb(instance: &ProblemInstance, preset: Preset, opts: &ExperimentOptions) -> Result<RunReport> {
    let (spec, smooth, reg_group, reg_tv) = match instance {
        ProblemInstance::GroupTv { spec, smooth, reg_group, reg_tv, .. } => {
            (spec, smooth, reg_group, reg_tv)
        }
        _ => unreachable!(),
    };
    if preset != Preset::Stationary {
        return Err(Error::invalid("GFB uses a constant step-size; only the stationary preset applies"));
    }
    let problem = GfbProblem::new(
        smooth.clone(),
        vec![reg_group.clone(), reg_tv.clone()],
        vec![0.5, 0.5],
    )?;
    let (beta, _) =
        crate::smooth::lipschitz_moduli(smooth, &Subspace::full(spec.dim))?;
    let gamma = beta;
    let schedule = Schedule::stationary(gamma, 1.0);
    let validation = validate_schedule(&schedule, beta, opts.max_iter)?;

    let lambda = LambdaRule::Constant(1.0);
    let reference = gfb_run(&problem, gamma, &lambda, &reference_options(opts)?)?;
    let embedding = build_gfb_linearization(&reference, &problem, gamma, 1.0)?;
    let z_star = embedding.z_star.clone();
    let n = spec.dim;
    let mut x_star = Vector::zeros(n);
    for i in 0..2 {
        x_star += z_star.rows(i * n, n).into_owned();
    }
    x_star /= 2.0;

    let traj = gfb_run(&problem, gamma, &lambda, &main_options(opts)?)?;
    let targets = vec![
        (
            reg_group.clone(),
            reg_group.signature(&x_star, default_signature_tol(&x_star))?,
        ),
        (
            reg_tv.clone(),
            reg_tv.signature(&x_star, default_signature_tol(&x_star))?,
        ),
    ];
    let mut identification = detect_identification_blocks(&traj, &targets, n)?;
    // product-space optimality per block: (x̄ − z_i*)/(mγ) − ∇F(x̄)/m ∈ ∂R_i(x̄)
    let half_grad = smooth.grad(&x_star)? / 2.0;
    let g_group = {
        let z1 = z_star.rows(0, n).into_owned();
        (&x_star - &z1) / (2.0 * gamma) - &half_grad
    };
    let g_tv = {
        let z2 = z_star.rows(n, n).into_owned();
        (&x_star - &z2) / (2.0 * gamma) - &half_grad
    };
    let margin = reg_group
        .nondegeneracy_margin(&x_star, &g_group)?
        .min(reg_tv.nondegeneracy_margin(&x_star, &g_tv)?);
    identification.margin = Some(margin);

    let certificate = match certify(&embedding, &z_star, &traj, &identification, opts.rate_tol_rel) {
        Ok(cert) => Some(cert),
        Err(Error::InsufficientData(_)) | Err(Error::InvalidInput(_)) => None,
        Err(e) => return Err(e),
    };

    let u_star = {
        let mut u = Vector::zeros(2 * n);
        u.rows_mut(0, n).copy_from(&x_star);
        u.rows_mut(n, n).copy_from(&x_star);
        u
    };
    let mut rows = Vec::with_capacity(traj.records.len());
    for rec in &traj.records {
        let mut sig_size = 0usize;
        for (i, (reg, _)) in targets.iter().enumerate() {
            let block = rec.u.rows(i * n, n).into_owned();
            sig_size += reg.signature(&block, default_signature_tol(&block))?.size();
        }
        rows.push(CsvRow {
            k: rec.k,
            gamma: rec.gamma,
            lambda: rec.lambda,
            objective: smooth.eval(&rec.x)?
                + reg_group.eval(&rec.x)?
                + reg_tv.eval(&rec.x)?,
            bregman: f64::NAN,
            best_bregman: f64::NAN,
            ergodic_bregman: f64::NAN,
            dist_z: (&rec.z - &z_star).norm(),
            dist_x: (&rec.x - &x_star).norm(),
            dist_u: (&rec.u - &u_star).norm(),
            signature_size: sig_size,
            identified: false,
        });
    }
    annotate_identified(&mut rows, identification.identified_at);

    Ok(RunReport {
        fingerprint: spec.fingerprint(),
        method: Method::Gfb,
        preset,
        validation,
        rows,
        identification,
        certificate,
        audit: None,
        bregman: None,
        stop_reason: traj.stop_reason,
        total_iterations: traj.total_iterations,
        wall_clock_ms: 0,
        anchor_z_norm: z_star.norm(),
        csv_path: None,
        plot_paths: Vec::new(),
    })
}

fn run_tos(instance: &ProblemInstance, preset: Preset, opts: &ExperimentOptions) -> Result<RunReport> {
    let (spec, smooth, reg_group, reg_tv) = match instance {
        ProblemInstance::GroupTv { spec, smooth, reg_group, reg_tv, .. } => {
            (spec, smooth, reg_group, reg_tv)
        }
        _ => unreachable!(),
    };
    if preset != Preset::Stationary {
        return Err(Error::invalid("TOS assumes a constant step-size; only the stationary preset applies"));
    }
    let problem = TosProblem::new(smooth.clone(), reg_group.clone(), reg_tv.clone())?;
    let (beta, _) = crate::smooth::lipschitz_moduli(smooth, &Subspace::full(spec.dim))?;
    let gamma = beta;
    let schedule = Schedule::stationary(gamma, 1.0);
    let validation = validate_schedule(&schedule, beta, opts.max_iter)?;

    let lambda = LambdaRule::Constant(1.0);
    let reference = tos_run(&problem, gamma, &lambda, &reference_options(opts)?)?;
    let anchor = TosAnchor::from_reference(&reference, gamma, &problem)?;
    let lin = build_tos_linearization(&anchor, &problem, gamma, 1.0)?;

    let traj = tos_run(&problem, gamma, &lambda, &main_options(opts)?)?;
    let target_r = reg_group.signature(&anchor.x_star, default_signature_tol(&anchor.x_star))?;
    let target_j = reg_tv.signature(&anchor.x_star, default_signature_tol(&anchor.x_star))?;
    let ident_u = detect_identification_with(&traj, reg_group, &target_r, None, |rec| &rec.u)?;
    let ident_x = detect_identification_with(&traj, reg_tv, &target_j, None, |rec| &rec.x)?;
    let identified_at = match (ident_u.identified_at, ident_x.identified_at) {
        (Some(a), Some(b)) => Some(a.max(b)),
        _ => None,
    };
    let mut identification = IdentificationReport { identified_at, margin: None };
    identification.margin = Some(lin.margin_r.min(lin.margin_j));

    let certificate = match certify(&lin, &anchor.z_star, &traj, &identification, opts.rate_tol_rel) {
        Ok(cert) => Some(cert),
        Err(Error::InsufficientData(_)) | Err(Error::InvalidInput(_)) => None,
        Err(e) => return Err(e),
    };

    let mut rows = Vec::with_capacity(traj.records.len());
    for rec in &traj.records {
        let sig = reg_group.signature(&rec.u, default_signature_tol(&rec.u))?;
        rows.push(CsvRow {
            k: rec.k,
            gamma: rec.gamma,
            lambda: rec.lambda,
            objective: smooth.eval(&rec.x)? + reg_group.eval(&rec.x)? + reg_tv.eval(&rec.x)?,
            bregman: f64::NAN,
            best_bregman: f64::NAN,
            ergodic_bregman: f64::NAN,
            dist_z: (&rec.z - &anchor.z_star).norm(),
            dist_x: (&rec.x - &anchor.x_star).norm(),
            dist_u: (&rec.u - &anchor.x_star).norm(),
            signature_size: sig.size(),
            identified: false,
        });
    }
    annotate_identified(&mut rows, identification.identified_at);

    Ok(RunReport {
        fingerprint: spec.fingerprint(),
        method: Method::Tos,
        preset,
        validation,
        rows,
        identification,
        certificate,
        audit: None,
        bregman: None,
        stop_reason: traj.stop_reason,
        total_iterations: traj.total_iterations,
        wall_clock_ms: 0,
        anchor_z_norm: anchor.z_star.norm(),
        csv_path: None,
        plot_paths: Vec::new(),
    })
}

/// Stacks a single-block lasso problem onto the m-copy product space: the
/// data term becomes ½‖[K/m … K/m]·z − f‖², the constraint is the averaging
/// subspace, and the separable ℓ1 term keeps its weight. Running FDR on this
/// embedding with step mγ reproduces GFB with equal weights and step γ.
pub fn product_embedding_lasso(
    smooth: &SmoothQuadratic,
    mu: f64,
    copies: usize,
) -> Result<FdrProblem<SmoothQuadratic>> {
    if copies < 2 {
        return Err(Error::invalid("the product embedding needs at least two copies"));
    }
    let m = smooth.operator().nrows();
    let n = smooth.operator().ncols();
    let mut k_prod = Matrix::zeros(m, copies * n);
    for c in 0..copies {
        k_prod
            .view_mut((0, c * n), (m, n))
            .copy_from(&(smooth.operator() / copies as f64));
    }
    let mut spanning = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = Vector::zeros(copies * n);
        for c in 0..copies {
            v[c * n + j] = 1.0;
        }
        spanning.push(v);
    }
    let s = Subspace::from_spanning(copies * n, &spanning)?;
    FdrProblem::new(
        Restricted::new(SmoothQuadratic::new(k_prod, smooth.target().clone())?, s)?,
        Regularizer::l1(mu)?,
    )
}

pub fn write_csv(path: &Path, rows: &[CsvRow]) -> Result<()> {
    let mut out = String::with_capacity(rows.len() * 220 + 128);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_line());
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::invalid(format!("cannot write CSV: {e}")))
}

/// Aligned comparison of several runs of the same instance.
#[derive(Debug, Clone)]
pub struct ComparisonTable {
    pub labels: Vec<String>,
    /// (k, one dist_z column per run); rows where any run lacks the k are
    /// dropped.
    pub rows: Vec<(usize, Vec<f64>)>,
    pub terminal_errors: Vec<f64>,
    pub identification: Vec<Option<usize>>,
    pub observed_factors: Vec<Option<f64>>,
}

pub fn compare_runs(reports: &[&RunReport]) -> Result<ComparisonTable> {
    if reports.len() < 2 {
        return Err(Error::invalid("compare_runs needs at least two reports"));
    }
    let fingerprint = &reports[0].fingerprint;
    if reports.iter().any(|r| &r.fingerprint != fingerprint) {
        return Err(Error::invalid("compare_runs requires runs of the same instance"));
    }
    let mut rows = Vec::new();
    'outer: for row in &reports[0].rows {
        let mut values = vec![row.dist_z];
        for other in &reports[1..] {
            match other.rows.iter().find(|r| r.k == row.k) {
                Some(r) => values.push(r.dist_z),
                None => continue 'outer,
            }
        }
        rows.push((row.k, values));
    }
    Ok(ComparisonTable {
        labels: reports
            .iter()
            .map(|r| format!("{}_{}", r.method, r.preset))
            .collect(),
        rows,
        terminal_errors: reports.iter().map(|r| r.terminal_dist_z()).collect(),
        identification: reports.iter().map(|r| r.identification.identified_at).collect(),
        observed_factors: reports
            .iter()
            .map(|r| r.certificate.as_ref().map(|c| c.observed_factor))
            .collect(),
    })
}

// ---------------------------------------------------------------------------
// static SVG plots

struct SvgSeries<'a> {
    label: &'a str,
    color: &'a str,
    points: Vec<(f64, f64)>,
}

fn svg_chart(title: &str, x_label: &str, y_label: &str, series: &[SvgSeries]) -> String {
    let (w, h) = (760.0, 480.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            if x.is_finite() && y.is_finite() {
                xmin = xmin.min(x);
                xmax = xmax.max(x);
                ymin = ymin.min(y);
                ymax = ymax.max(y);
            }
        }
    }
    if !xmin.is_finite() || xmin == xmax {
        xmax = xmin + 1.0;
    }
    if !ymin.is_finite() || ymin == ymax {
        ymax = ymin + 1.0;
    }
    let sx = (w - ml - mr) / (xmax - xmin);
    let sy = (h - mt - mb) / (ymax - ymin);
    let px = |x: f64| ml + (x - xmin) * sx;
    let py = |y: f64| h - mb - (y - ymin) * sy;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{title}</text>\n",
        w / 2.0
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - mb,
        w - mr,
        h - mb
    ));
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - mb
    ));
    // tick labels at the extremes
    for (x, anchor) in [(xmin, "start"), (xmax, "end")] {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"{anchor}\">{x:.3}</text>\n",
            px(x),
            h - mb + 16.0
        ));
    }
    for y in [ymin, ymax] {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{y:.3}</text>\n",
            ml - 6.0,
            py(y) + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{x_label}</text>\n",
        (ml + w - mr) / 2.0,
        h - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{y_label}</text>\n",
        (mt + h - mb) / 2.0,
        (mt + h - mb) / 2.0
    ));
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        if pts.is_empty() {
            continue;
        }
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            s.color,
            pts.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{}\">{}</text>\n",
            w - mr - 160.0,
            mt + 16.0 * (i as f64 + 1.0),
            s.color,
            s.label
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Emits the two standard charts: the Bregman best-iterate decay in log-log
/// axes and the anchor distance in semi-log axes, with the predicted-rate
/// reference line starting at the identification iteration.
fn emit_plots(dir: &Path, report: &RunReport) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    let log10 = |v: f64| v.max(1e-300).log10();

    if report.bregman.is_some() {
        let pts: Vec<(f64, f64)> = report
            .rows
            .iter()
            .filter(|r| r.best_bregman > 0.0)
            .map(|r| ((r.k as f64 + 1.0).log10(), log10(r.best_bregman)))
            .collect();
        let svg = svg_chart(
            "best-iterate Bregman divergence",
            "log10(k+1)",
            "log10(best divergence)",
            &[SvgSeries { label: "best divergence", color: "black", points: pts }],
        );
        let p = dir.join("bregman.svg");
        std::fs::write(&p, svg).map_err(|e| Error::invalid(format!("cannot write plot: {e}")))?;
        paths.push(p);
    }

    let mut series = vec![SvgSeries {
        label: "distance to anchor",
        color: "black",
        points: report
            .rows
            .iter()
            .filter(|r| r.dist_z > 0.0)
            .map(|r| (r.k as f64, log10(r.dist_z)))
            .collect(),
    }];
    if let (Some(cert), Some(k0)) = (&report.certificate, report.identification.identified_at) {
        if let Some(start) = report.rows.iter().find(|r| r.k >= k0 && r.dist_z > 0.0) {
            let last_k = report.rows.last().map(|r| r.k).unwrap_or(k0);
            let rho_log = cert.predicted_rho.max(1e-300).log10();
            let points = vec![
                (start.k as f64, log10(start.dist_z)),
                (
                    last_k as f64,
                    log10(start.dist_z) + rho_log * (last_k - start.k) as f64,
                ),
            ];
            series.push(SvgSeries { label: "predicted rate", color: "red", points });
        }
    }
    let svg = svg_chart("distance to the anchor", "k", "log10(dist)", &series);
    let p = dir.join("distance.svg");
    std::fs::write(&p, svg).map_err(|e| Error::invalid(format!("cannot write plot: {e}")))?;
    paths.push(p);
    Ok(paths)
}

// ---------------------------------------------------------------------------
// flat key=value configuration files

/// Parses the flat `key = value` configuration format (one pair per line,
/// `#` comments). Unknown keys are rejected to catch typos.
pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let mut cfg = ConfigFile::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("config line {} has no '='", lineno + 1)))?;
        let key = key.trim();
        let value = value.trim();
        let parse_usize = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::invalid(format!("config key '{key}': bad integer '{v}'")))
        };
        let parse_f64 = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::invalid(format!("config key '{key}': bad number '{v}'")))
        };
        match key {
            "family" => {
                cfg.family = Some(match value {
                    "lasso_constrained" => Family::LassoConstrained,
                    "group_tv" => Family::GroupTv,
                    other => return Err(Error::invalid(format!("unknown family '{other}'"))),
                })
            }
            "rows" => cfg.rows = Some(parse_usize(value)?),
            "dim" => cfg.dim = Some(parse_usize(value)?),
            "sparsity" => cfg.sparsity = Some(parse_usize(value)?),
            "subspace_dim" => cfg.subspace_dim = Some(parse_usize(value)?),
            "block_size" => cfg.block_size = Some(parse_usize(value)?),
            "noise" => cfg.noise = Some(parse_f64(value)?),
            "mu" => cfg.mu = Some(parse_f64(value)?),
            "mu1" => cfg.mu1 = Some(parse_f64(value)?),
            "mu2" => cfg.mu2 = Some(parse_f64(value)?),
            "seed" => {
                cfg.seed = Some(value.parse::<u64>().map_err(|_| {
                    Error::invalid(format!("config key 'seed': bad integer '{value}'"))
                })?)
            }
            "method" => cfg.method = Some(value.parse()?),
            "preset" => cfg.preset = Some(value.parse()?),
            "max_iter" => cfg.max_iter = Some(parse_usize(value)?),
            "tol" => cfg.tol = Some(parse_f64(value)?),
            "stride" => cfg.stride = Some(parse_usize(value)?),
            other => return Err(Error::invalid(format!("unknown config key '{other}'"))),
        }
    }
    Ok(cfg)
}

/// Optional values read from a config file; the CLI layers its flags on top.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    pub family: Option<Family>,
    pub rows: Option<usize>,
    pub dim: Option<usize>,
    pub sparsity: Option<usize>,
    pub subspace_dim: Option<usize>,
    pub block_size: Option<usize>,
    pub noise: Option<f64>,
    pub mu: Option<f64>,
    pub mu1: Option<f64>,
    pub mu2: Option<f64>,
    pub seed: Option<u64>,
    pub method: Option<Method>,
    pub preset: Option<Preset>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub stride: Option<usize>,
}

impl ConfigFile {
    /// Builds the problem spec from the configured family (default: the
    /// constrained lasso) with per-key overrides.
    pub fn to_spec(&self) -> ProblemSpec {
        let family = self.family.unwrap_or(Family::LassoConstrained);
        let seed = self.seed.unwrap_or(0);
        let mut spec = match family {
            Family::LassoConstrained => ProblemSpec::lasso_constrained(seed),
            Family::GroupTv => ProblemSpec::group_tv(seed),
        };
        if let Some(v) = self.rows {
            spec.rows = v;
        }
        if let Some(v) = self.dim {
            spec.dim = v;
        }
        if let Some(v) = self.sparsity {
            spec.sparsity = v;
        }
        if let Some(v) = self.subspace_dim {
            spec.subspace_dim = v;
        }
        if let Some(v) = self.block_size {
            spec.block_size = v;
        }
        if let Some(v) = self.noise {
            spec.noise = v;
        }
        if let Some(v) = self.mu {
            spec.mu = v;
        }
        if let Some(v) = self.mu1 {
            spec.mu1 = v;
        }
        if let Some(v) = self.mu2 {
            spec.mu2 = v;
        }
        spec
    }
}
