//! The catalog of partly smooth non-smooth terms: evaluation, proximity
//! operators, active-manifold signatures, tangent projectors, flat-manifold
//! Riemannian Hessians and non-degeneracy margins.
//!
//! Every kind is convex; all active manifolds handled here are affine
//! (coordinate subspaces, sign rays, piecewise-constant runs), except the
//! fixed-rank manifold of the nuclear norm which is curved — for that kind
//! only evaluation, prox and the rank signature are available.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::linear::{all_finite_vec, Matrix, Subspace, Vector};

/// Default scale-aware threshold deciding which entries count as zero when
/// reading an activity pattern off a floating-point iterate.
pub fn default_signature_tol(x: &Vector) -> f64 {
    1e-10 * (1.0 + x.amax())
}

/// Tolerance for the consistency checks inside the non-degeneracy margin
/// (on-support sign conditions, dual feasibility).
const MARGIN_CONSISTENCY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum Regularizer {
    /// μ‖x‖₁
    L1 { weight: f64 },
    /// μ Σ_b ‖x_b‖ over disjoint blocks covering all coordinates.
    GroupL12 { weight: f64, blocks: Vec<Vec<usize>> },
    /// μ‖x‖∞
    LInf { weight: f64 },
    /// μ‖D x‖₁ with D the forward finite-difference operator on a chain.
    Tv1D { weight: f64, dim: usize },
    /// μ Σ σ_i(X) on vectorized (column-major) n₁×n₂ matrices.
    Nuclear { weight: f64, rows: usize, cols: usize },
    /// Indicator of a closed vector subspace.
    SubspaceIndicator { subspace: Subspace },
}

/// Discrete activity pattern identifying the active manifold of an iterate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ManifoldSignature {
    /// Non-zero coordinates (ℓ1).
    Support(BTreeSet<usize>),
    /// Blocks with non-zero restriction (ℓ1,2).
    ActiveBlocks(BTreeSet<usize>),
    /// Saturating coordinates of the max-norm together with their signs;
    /// empty at the origin.
    Saturation { indices: Vec<usize>, signs: Vec<i8> },
    /// Indices of non-zero consecutive differences (TV).
    JumpSet(BTreeSet<usize>),
    /// Matrix rank (nuclear norm).
    Rank(usize),
    /// Subspace indicator: a single manifold, nothing to identify.
    Trivial,
}

impl ManifoldSignature {
    /// Cardinality of the discrete pattern (support size, active blocks,
    /// saturation count, jump count, rank; 0 for the trivial signature).
    pub fn size(&self) -> usize {
        match self {
            ManifoldSignature::Support(s) => s.len(),
            ManifoldSignature::ActiveBlocks(s) => s.len(),
            ManifoldSignature::Saturation { indices, .. } => indices.len(),
            ManifoldSignature::JumpSet(s) => s.len(),
            ManifoldSignature::Rank(r) => *r,
            ManifoldSignature::Trivial => 0,
        }
    }
}

/// Builds the `(n−1)×n` forward-difference matrix with rows `(…, −1, +1, …)`.
pub fn difference_matrix(n: usize) -> Matrix {
    let rows = n.saturating_sub(1);
    Matrix::from_fn(rows, n, |i, j| {
        if j == i {
            -1.0
        } else if j == i + 1 {
            1.0
        } else {
            0.0
        }
    })
}

impl Regularizer {
    pub fn l1(weight: f64) -> Result<Self> {
        check_weight(weight)?;
        Ok(Regularizer::L1 { weight })
    }

    /// Blocks must be non-empty, disjoint and cover `0..dim`; prox
    /// separability fails for overlapping groups, so those are rejected.
    pub fn group_l12(weight: f64, blocks: Vec<Vec<usize>>, dim: usize) -> Result<Self> {
        check_weight(weight)?;
        let mut seen = vec![false; dim];
        for (bi, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::invalid(format!("block {bi} is empty")));
            }
            for &i in block {
                if i >= dim {
                    return Err(Error::invalid(format!("block {bi} index {i} out of range")));
                }
                if seen[i] {
                    return Err(Error::invalid(format!(
                        "blocks overlap at coordinate {i}; groups must be disjoint"
                    )));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::invalid("blocks must cover every coordinate"));
        }
        Ok(Regularizer::GroupL12 { weight, blocks })
    }

    pub fn linf(weight: f64) -> Result<Self> {
        check_weight(weight)?;
        Ok(Regularizer::LInf { weight })
    }

    pub fn tv1d(weight: f64, dim: usize) -> Result<Self> {
        check_weight(weight)?;
        if dim == 0 {
            return Err(Error::invalid("TV requires a positive dimension"));
        }
        Ok(Regularizer::Tv1D { weight, dim })
    }

    pub fn nuclear(weight: f64, rows: usize, cols: usize) -> Result<Self> {
        check_weight(weight)?;
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("nuclear norm requires a non-empty shape"));
        }
        Ok(Regularizer::Nuclear { weight, rows, cols })
    }

    pub fn subspace_indicator(subspace: Subspace) -> Self {
        Regularizer::SubspaceIndicator { subspace }
    }

    /// Ambient dimension the regularizer acts on, when fixed by its
    /// structure (ℓ1 and ℓ∞ accept any dimension).
    pub fn dim(&self) -> Option<usize> {
        match self {
            Regularizer::L1 { .. } | Regularizer::LInf { .. } => None,
            Regularizer::GroupL12 { blocks, .. } => {
                Some(blocks.iter().map(|b| b.len()).sum())
            }
            Regularizer::Tv1D { dim, .. } => Some(*dim),
            Regularizer::Nuclear { rows, cols, .. } => Some(rows * cols),
            Regularizer::SubspaceIndicator { subspace } => Some(subspace.ambient_dim()),
        }
    }

    fn check_dim(&self, x: &Vector) -> Result<()> {
        if let Some(d) = self.dim() {
            if x.len() != d {
                return Err(Error::invalid(format!(
                    "regularizer expects dimension {d}, got {}",
                    x.len()
                )));
            }
        }
        if !all_finite_vec(x) {
            return Err(Error::invalid("input vector has non-finite entries"));
        }
        Ok(())
    }

    pub fn eval(&self, x: &Vector) -> Result<f64> {
        self.check_dim(x)?;
        Ok(match self {
            Regularizer::L1 { weight } => weight * x.iter().map(|v| v.abs()).sum::<f64>(),
            Regularizer::GroupL12 { weight, blocks } => {
                weight
                    * blocks
                        .iter()
                        .map(|b| block_norm(x, b))
                        .sum::<f64>()
            }
            Regularizer::LInf { weight } => weight * x.amax(),
            Regularizer::Tv1D { weight, dim } => {
                weight
                    * (1..*dim)
                        .map(|i| (x[i] - x[i - 1]).abs())
                        .sum::<f64>()
            }
            Regularizer::Nuclear { weight, rows, cols } => {
                let m = Matrix::from_column_slice(*rows, *cols, x.as_slice());
                weight * m.singular_values().iter().sum::<f64>()
            }
            Regularizer::SubspaceIndicator { subspace } => {
                if subspace.distance(x)? > 1e-9 * (1.0 + x.norm()) {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        })
    }

    /// The proximity operator: the unique minimizer of
    /// `γ R(u) + ½‖u − x‖²`.
    pub fn prox(&self, gamma: f64, x: &Vector) -> Result<Vector> {
        if !(gamma > 0.0) {
            return Err(Error::invalid("prox requires gamma > 0"));
        }
        self.check_dim(x)?;
        Ok(match self {
            Regularizer::L1 { weight } => {
                let t = gamma * weight;
                x.map(|v| soft_threshold(v, t))
            }
            Regularizer::GroupL12 { weight, blocks } => {
                let t = gamma * weight;
                let mut out = x.clone();
                for block in blocks {
                    let norm = block_norm(x, block);
                    let shrink = if norm > t { 1.0 - t / norm } else { 0.0 };
                    for &i in block {
                        out[i] = x[i] * shrink;
                    }
                }
                out
            }
            Regularizer::LInf { weight } => {
                // Moreau decomposition against the ℓ1-ball of radius γμ.
                let radius = gamma * weight;
                x - project_l1_ball(x, radius)
            }
            Regularizer::Tv1D { weight, .. } => taut_string_prox(x, gamma * weight),
            Regularizer::Nuclear { weight, rows, cols } => {
                let m = Matrix::from_column_slice(*rows, *cols, x.as_slice());
                let t = gamma * weight;
                let svd = m.svd(true, true);
                let u = svd.u.as_ref().ok_or_else(|| Error::numerical("SVD missing U"))?;
                let v_t = svd.v_t.as_ref().ok_or_else(|| Error::numerical("SVD missing Vᵀ"))?;
                let mut acc = Matrix::zeros(*rows, *cols);
                for (i, &s) in svd.singular_values.iter().enumerate() {
                    let shrunk = (s - t).max(0.0);
                    if shrunk > 0.0 {
                        acc += shrunk * u.column(i) * v_t.row(i);
                    }
                }
                Vector::from_column_slice(acc.as_slice())
            }
            Regularizer::SubspaceIndicator { subspace } => subspace.project(x)?,
        })
    }

    /// Reads the activity pattern of `x` with zero-threshold `tol`.
    pub fn signature(&self, x: &Vector, tol: f64) -> Result<ManifoldSignature> {
        if tol < 0.0 {
            return Err(Error::invalid("signature tolerance must be non-negative"));
        }
        self.check_dim(x)?;
        Ok(match self {
            Regularizer::L1 { .. } => ManifoldSignature::Support(
                x.iter()
                    .enumerate()
                    .filter(|(_, v)| v.abs() > tol)
                    .map(|(i, _)| i)
                    .collect(),
            ),
            Regularizer::GroupL12 { blocks, .. } => ManifoldSignature::ActiveBlocks(
                blocks
                    .iter()
                    .enumerate()
                    .filter(|(_, b)| block_norm(x, b) > tol)
                    .map(|(i, _)| i)
                    .collect(),
            ),
            Regularizer::LInf { .. } => {
                let max = x.amax();
                if max <= tol {
                    ManifoldSignature::Saturation { indices: vec![], signs: vec![] }
                } else {
                    let mut indices = Vec::new();
                    let mut signs = Vec::new();
                    for (i, &v) in x.iter().enumerate() {
                        if v.abs() >= max - tol {
                            indices.push(i);
                            signs.push(if v >= 0.0 { 1 } else { -1 });
                        }
                    }
                    ManifoldSignature::Saturation { indices, signs }
                }
            }
            Regularizer::Tv1D { dim, .. } => ManifoldSignature::JumpSet(
                (1..*dim)
                    .filter(|&i| (x[i] - x[i - 1]).abs() > tol)
                    .map(|i| i - 1)
                    .collect(),
            ),
            Regularizer::Nuclear { rows, cols, .. } => {
                let m = Matrix::from_column_slice(*rows, *cols, x.as_slice());
                let rank = m
                    .singular_values()
                    .iter()
                    .filter(|&&s| s > tol)
                    .count();
                ManifoldSignature::Rank(rank)
            }
            Regularizer::SubspaceIndicator { .. } => ManifoldSignature::Trivial,
        })
    }

    /// Orthogonal projector onto the tangent space of the manifold encoded
    /// by `sig`. Unsupported for the nuclear norm (curved manifold).
    pub fn tangent_projector(&self, sig: &ManifoldSignature, dim: usize) -> Result<Matrix> {
        match (self, sig) {
            (Regularizer::L1 { .. }, ManifoldSignature::Support(support)) => {
                let mut p = Matrix::zeros(dim, dim);
                for &i in support {
                    if i >= dim {
                        return Err(Error::invalid("support index out of range"));
                    }
                    p[(i, i)] = 1.0;
                }
                Ok(p)
            }
            (Regularizer::GroupL12 { blocks, .. }, ManifoldSignature::ActiveBlocks(active)) => {
                let mut p = Matrix::zeros(dim, dim);
                for &b in active {
                    let block = blocks
                        .get(b)
                        .ok_or_else(|| Error::invalid("active block index out of range"))?;
                    for &i in block {
                        p[(i, i)] = 1.0;
                    }
                }
                Ok(p)
            }
            (Regularizer::LInf { .. }, ManifoldSignature::Saturation { indices, signs }) => {
                // Saturated coordinates move together along the sign ray;
                // the remaining coordinates are free.
                let mut p = Matrix::identity(dim, dim);
                if indices.is_empty() {
                    // origin: the subdifferential has full dimension, T = {0}
                    return Ok(Matrix::zeros(dim, dim));
                }
                let m = indices.len() as f64;
                for &i in indices {
                    p[(i, i)] = 0.0;
                }
                for (a, &i) in indices.iter().enumerate() {
                    for (b, &j) in indices.iter().enumerate() {
                        p[(i, j)] = f64::from(signs[a]) * f64::from(signs[b]) / m;
                    }
                }
                Ok(p)
            }
            (Regularizer::Tv1D { dim: n, .. }, ManifoldSignature::JumpSet(jumps)) => {
                if dim != *n {
                    return Err(Error::invalid("tangent projector dimension mismatch"));
                }
                // {z : (Dz)_i = 0 off the jump set} = vectors constant on
                // each run between jumps; the normalized run indicators form
                // an orthonormal basis of that null space.
                let mut p = Matrix::zeros(dim, dim);
                let mut start = 0usize;
                for run_end in jumps.iter().map(|&j| j + 1).chain(std::iter::once(*n)) {
                    let len = (run_end - start) as f64;
                    for i in start..run_end {
                        for j in start..run_end {
                            p[(i, j)] = 1.0 / len;
                        }
                    }
                    start = run_end;
                }
                Ok(p)
            }
            (Regularizer::SubspaceIndicator { subspace }, ManifoldSignature::Trivial) => {
                Ok(subspace.projector())
            }
            (Regularizer::Nuclear { .. }, _) => Err(Error::unsupported(
                "tangent projector for the fixed-rank manifold is out of scope",
            )),
            _ => Err(Error::invalid("signature kind does not match regularizer kind")),
        }
    }

    /// Riemannian Hessian of the regularizer at `x` on the manifold `sig`
    /// (flat manifolds only). Zero for the polyhedral kinds and for the
    /// subspace indicator; the group norm carries curvature on its active
    /// blocks.
    pub fn riemannian_hessian(&self, x: &Vector, sig: &ManifoldSignature) -> Result<Matrix> {
        let dim = x.len();
        match self {
            Regularizer::L1 { .. }
            | Regularizer::LInf { .. }
            | Regularizer::Tv1D { .. }
            | Regularizer::SubspaceIndicator { .. } => Ok(Matrix::zeros(dim, dim)),
            Regularizer::GroupL12 { weight, blocks } => {
                let active = match sig {
                    ManifoldSignature::ActiveBlocks(a) => a,
                    _ => return Err(Error::invalid("signature kind does not match regularizer")),
                };
                let mut h = Matrix::zeros(dim, dim);
                for &b in active {
                    let block = blocks
                        .get(b)
                        .ok_or_else(|| Error::invalid("active block index out of range"))?;
                    let norm = block_norm(x, block);
                    if norm == 0.0 {
                        return Err(Error::invalid(format!(
                            "block {b} is active in the signature but x vanishes on it"
                        )));
                    }
                    // (μ/‖x_b‖)(Id − x̄ x̄ᵀ) on the block
                    for (a_idx, &i) in block.iter().enumerate() {
                        for (b_idx, &j) in block.iter().enumerate() {
                            let delta = if a_idx == b_idx { 1.0 } else { 0.0 };
                            h[(i, j)] =
                                weight / norm * (delta - x[i] * x[j] / (norm * norm));
                        }
                    }
                }
                let t = self.tangent_projector(sig, dim)?;
                Ok(&t * h * &t)
            }
            Regularizer::Nuclear { .. } => Err(Error::unsupported(
                "Riemannian Hessian for the fixed-rank manifold is out of scope",
            )),
        }
    }

    /// Margin of the non-degeneracy condition: strictly positive iff the
    /// candidate subgradient `g` lies in the relative interior of `∂R(x*)`.
    /// Returns `+∞` when the condition is trivially interior and `−∞` when
    /// `g` is not a subgradient at all (consistency violated).
    pub fn nondegeneracy_margin(&self, x_star: &Vector, g: &Vector) -> Result<f64> {
        self.check_dim(x_star)?;
        if g.len() != x_star.len() {
            return Err(Error::invalid("margin: subgradient dimension mismatch"));
        }
        let tol = default_signature_tol(x_star);
        match self {
            Regularizer::L1 { weight } => {
                let mut margin = f64::INFINITY;
                for i in 0..x_star.len() {
                    if x_star[i].abs() > tol {
                        if (g[i] - weight * x_star[i].signum()).abs() > MARGIN_CONSISTENCY_TOL {
                            return Ok(f64::NEG_INFINITY);
                        }
                    } else {
                        margin = margin.min(weight - g[i].abs());
                    }
                }
                Ok(margin)
            }
            Regularizer::GroupL12 { weight, blocks } => {
                let mut margin = f64::INFINITY;
                for block in blocks {
                    let norm = block_norm(x_star, block);
                    let gb_norm = block_norm(g, block);
                    if norm > tol {
                        let defect: f64 = block
                            .iter()
                            .map(|&i| (g[i] - weight * x_star[i] / norm).powi(2))
                            .sum::<f64>()
                            .sqrt();
                        if defect > MARGIN_CONSISTENCY_TOL {
                            return Ok(f64::NEG_INFINITY);
                        }
                    } else {
                        margin = margin.min(weight - gb_norm);
                    }
                }
                Ok(margin)
            }
            Regularizer::Tv1D { weight, dim } => {
                // ∂(μ‖D·‖₁)(x) = Dᵀ{η : η_i = μ sign((Dx)_i) on jumps, |η_i| ≤ μ off}.
                // Dᵀ has full column rank on the chain, so η is recovered
                // exactly by cumulative sums; g ∈ ran(Dᵀ) iff Σ g_i = 0.
                let n = *dim;
                if n == 1 {
                    return Ok(f64::INFINITY);
                }
                let sum: f64 = g.iter().sum();
                if sum.abs() > MARGIN_CONSISTENCY_TOL * (1.0 + g.norm()) {
                    return Ok(f64::NEG_INFINITY);
                }
                let mut eta = vec![0.0f64; n - 1];
                let mut acc = 0.0;
                for i in 0..n - 1 {
                    acc += g[i];
                    eta[i] = -acc;
                }
                let mut margin = f64::INFINITY;
                for i in 0..n - 1 {
                    let diff = x_star[i + 1] - x_star[i];
                    if diff.abs() > tol {
                        if (eta[i] - weight * diff.signum()).abs() > MARGIN_CONSISTENCY_TOL {
                            return Ok(f64::NEG_INFINITY);
                        }
                    } else {
                        margin = margin.min(weight - eta[i].abs());
                    }
                }
                Ok(margin)
            }
            Regularizer::LInf { weight } => {
                let max = x_star.amax();
                if max <= tol {
                    // ∂(μ‖·‖∞)(0) is the full μ-ball of the ℓ1 norm.
                    let l1: f64 = g.iter().map(|v| v.abs()).sum();
                    return Ok(weight - l1);
                }
                // face of the ℓ1-ball: g supported on the saturation set,
                // g_i sign(x_i) ≥ 0, Σ|g_i| = μ; relative interior needs
                // strictly positive coefficients everywhere on the face.
                let mut margin = f64::INFINITY;
                let mut mass = 0.0;
                for (i, &v) in x_star.iter().enumerate() {
                    if v.abs() >= max - tol {
                        let coeff = g[i] * v.signum();
                        margin = margin.min(coeff);
                        mass += g[i].abs();
                    } else if g[i].abs() > MARGIN_CONSISTENCY_TOL {
                        return Ok(f64::NEG_INFINITY);
                    }
                }
                if (mass - weight).abs() > MARGIN_CONSISTENCY_TOL {
                    return Ok(f64::NEG_INFINITY);
                }
                Ok(margin)
            }
            Regularizer::SubspaceIndicator { subspace } => {
                if !subspace.contains(x_star, 1e-9)? {
                    return Err(Error::invalid("margin: point is not on the subspace"));
                }
                // ∂ι_V(x) = V⊥, whose relative interior is itself.
                Ok(f64::INFINITY)
            }
            Regularizer::Nuclear { .. } => Err(Error::unsupported(
                "non-degeneracy margin for the nuclear norm is out of scope",
            )),
        }
    }

    /// The weight μ (1.0 for the subspace indicator, which has none).
    pub fn weight(&self) -> f64 {
        match self {
            Regularizer::L1 { weight }
            | Regularizer::GroupL12 { weight, .. }
            | Regularizer::LInf { weight }
            | Regularizer::Tv1D { weight, .. }
            | Regularizer::Nuclear { weight, .. } => *weight,
            Regularizer::SubspaceIndicator { .. } => 1.0,
        }
    }

    /// Whether the regularizer is locally polyhedral around every point of
    /// its manifolds (zero Riemannian Hessian everywhere).
    pub fn is_polyhedral(&self) -> bool {
        matches!(
            self,
            Regularizer::L1 { .. }
                | Regularizer::LInf { .. }
                | Regularizer::Tv1D { .. }
                | Regularizer::SubspaceIndicator { .. }
        )
    }
}

fn check_weight(weight: f64) -> Result<()> {
    if !(weight > 0.0) || !weight.is_finite() {
        return Err(Error::invalid("regularizer weight must be a positive finite scalar"));
    }
    Ok(())
}

fn block_norm(x: &Vector, block: &[usize]) -> f64 {
    block.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt()
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Exact Euclidean projection onto the ℓ1 ball of the given radius, by the
/// sort-based threshold search. Sorting ties are broken by index order so
/// the output is deterministic.
pub fn project_l1_ball(x: &Vector, radius: f64) -> Vector {
    if radius <= 0.0 {
        return Vector::zeros(x.len());
    }
    let l1: f64 = x.iter().map(|v| v.abs()).sum();
    if l1 <= radius {
        return x.clone();
    }
    let mut mags: Vec<(f64, usize)> = x.iter().map(|v| v.abs()).zip(0..).collect();
    mags.sort_unstable_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (k, &(u, _)) in mags.iter().enumerate() {
        cum += u;
        let candidate = (cum - radius) / (k as f64 + 1.0);
        if k + 1 == mags.len() || mags[k + 1].0 <= candidate {
            tau = candidate;
            break;
        }
    }
    x.map(|v| soft_threshold(v, tau))
}

/// Exact prox of `t·Σ|x_{i+1} − x_i|` by the taut-string construction: the
/// output is the slope sequence of the shortest path through the tube of
/// half-width `t` around the cumulative sums, with pinned endpoints.
pub fn taut_string_prox(y: &Vector, t: f64) -> Vector {
    let n = y.len();
    if n <= 1 || t == 0.0 {
        return y.clone();
    }
    // r[i] = sum of the first i samples; tube bounds pinned at both ends.
    let mut r = vec![0.0f64; n + 1];
    for i in 0..n {
        r[i + 1] = r[i] + y[i];
    }
    let lb = |i: usize| if i == 0 || i == n { r[i] } else { r[i] - t };
    let ub = |i: usize| if i == 0 || i == n { r[i] } else { r[i] + t };

    let mut out = Vector::zeros(n);
    let mut start = 0usize;
    let mut s0 = 0.0f64;
    while start < n {
        let mut smax = f64::INFINITY;
        let mut smin = f64::NEG_INFINITY;
        let mut jmax = start;
        let mut jmin = start;
        let mut j = start;
        loop {
            j += 1;
            let width = (j - start) as f64;
            let up = (ub(j) - s0) / width;
            let dn = (lb(j) - s0) / width;
            if dn > smax {
                // forced to bend at the upper contact
                for i in start..jmax {
                    out[i] = smax;
                }
                s0 = ub(jmax);
                start = jmax;
                break;
            }
            if up < smin {
                // forced to bend at the lower contact
                for i in start..jmin {
                    out[i] = smin;
                }
                s0 = lb(jmin);
                start = jmin;
                break;
            }
            if up <= smax {
                smax = up;
                jmax = j;
            }
            if dn >= smin {
                smin = dn;
                jmin = j;
            }
            if j == n {
                // straight segment to the pinned endpoint
                let slope = (r[n] - s0) / (n - start) as f64;
                for i in start..n {
                    out[i] = slope;
                }
                start = n;
                break;
            }
        }
    }
    out
}
