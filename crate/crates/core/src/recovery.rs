//! Recovery channels built from a criterion solution.
//!
//! For every Gamma block `q` the construction picks an isometry `U_q` that
//! undoes the transformed errors `F_n` of the block on the code span, a
//! projector `P_q` onto the error space the block produces, and the
//! recovery operator `R_q = U_q^dagger P_q`. Whatever the blocks leave
//! uncovered can be handled by one extra completion operator.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::alphabets::SampleSet;
use crate::channels::KrausChannel;
use crate::criterion::CriterionSolution;
use crate::error::{Error, Result};
use crate::numkit::{
    condition_number, hermitian_defect, operator_norm, orthonormalize, projector, pseudo_inverse, svd, CMatrix,
    CVector, Tolerances, ZERO,
};

pub const BLOCK_TOL: f64 = 1e-8;
pub const COND_MAX: f64 = 1e8;
pub const MIXED_TOL: f64 = 1e-10;

/// How the block isometry `U_q` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IsometryMode {
    /// Least-squares map `psi_j -> F_n psi_j / c_n(j)` on the sampled span, made isometric by polar projection.
    #[default]
    SampledSpan,
    /// Partial isometry from the polar decomposition of the whole operator `F_n`
    /// (for the annihilation operator this is the left shift in `a = T sqrt(n)`).
    OperatorPolar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryOptions {
    pub mode: IsometryMode,
    pub rank_tol: f64,
    /// Largest sample Gram condition number accepted by the sampled-span solve.
    pub cond_max: f64,
    pub block_tol: f64,
    /// Append the completion operator when the block operators are not complete.
    pub complete: bool,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self {
            mode: IsometryMode::SampledSpan,
            rank_tol: 1e-8,
            cond_max: COND_MAX,
            block_tol: BLOCK_TOL,
            complete: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CodeSpace {
    /// Orthonormal basis of the sampled span, one column per dimension.
    pub basis: CMatrix,
    pub projector: CMatrix,
    /// Largest `||P psi_j - psi_j||`.
    pub reconstruction_defect: f64,
}

impl CodeSpace {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }
}

pub fn build_code_projector(samples: &SampleSet, rank_tol: f64) -> Result<CodeSpace> {
    let (basis, rank) = orthonormalize(&samples.states, rank_tol)?;
    if rank == 0 {
        return Err(Error::DegenerateSampleSet("sample states span nothing".into()));
    }
    let p = projector(&basis);
    let reconstruction_defect = (0..samples.len())
        .map(|j| {
            let psi = samples.state(j);
            (&p * &psi - psi).norm()
        })
        .fold(0.0f64, f64::max);
    Ok(CodeSpace { basis, projector: p, reconstruction_defect })
}

#[derive(Debug, Clone)]
pub struct BlockIsometry {
    pub error_index: usize,
    pub isometry: CMatrix,
    /// `||(U Q)^dagger (U Q) - I||_F` with `Q` the code basis.
    pub isometry_defect: f64,
    /// Relative `||U psi_j - F_n psi_j / c_n(j)||` per sample.
    pub sample_defects: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RecoveryBlock {
    pub members: Vec<usize>,
    pub representative: usize,
    pub isometry: CMatrix,
    /// Projector onto the span of `F_n psi_j` over the block members.
    pub projector: CMatrix,
    pub recovery: CMatrix,
    pub isometry_defect: f64,
    pub sample_defects: Vec<f64>,
    /// Largest `||(U_n - U_q) Q||_F` over the other members.
    pub member_spread: f64,
}

#[derive(Debug, Clone)]
pub struct RecoveryChannel {
    pub mode: IsometryMode,
    pub code: CodeSpace,
    pub blocks: Vec<RecoveryBlock>,
    /// `I - Pi`, with `Pi` the projector onto all block error spaces.
    pub completion: Option<CMatrix>,
    /// `||sum_q R_q^dagger R_q - I||_F` over the block operators alone.
    pub completeness_defect: f64,
    /// The same defect compressed to the error spaces.
    pub support_completeness_defect: f64,
    /// Largest `||P_q P_r||` over distinct blocks.
    pub projector_overlap: f64,
    /// Operator norm of `sum_q P_q`.
    pub projector_sum_norm: f64,
    /// `lambda[i][(q, n)] = lambda_qn(alpha_i)`.
    pub lambda: Vec<CMatrix>,
    /// `||R_q E_n psi_i - lambda_qn(alpha_i) psi_i||`.
    pub lambda_defects: Vec<DMatrix<f64>>,
}

impl RecoveryChannel {
    pub fn dim(&self) -> usize {
        self.code.projector.nrows()
    }

    pub fn includes_completion(&self) -> bool {
        self.completion.is_some()
    }

    /// Recovery Kraus operators: one per block, then the completion if present.
    pub fn kraus_ops(&self) -> Vec<&CMatrix> {
        self.blocks.iter().map(|b| &b.recovery).chain(self.completion.as_ref()).collect()
    }

    pub fn block_of(&self, n: usize) -> Option<usize> {
        self.blocks.iter().position(|b| b.members.contains(&n))
    }

    /// `sum_q |lambda_qn(alpha_i)|^2` over blocks and errors for sample `i`.
    pub fn recovered_weight(&self, i: usize) -> f64 {
        self.lambda[i].iter().map(|z| z.norm_sqr()).sum()
    }

    /// Largest entry of the lambda defect table.
    pub fn max_lambda_defect(&self) -> f64 {
        self.lambda_defects.iter().flat_map(|m| m.iter().copied()).fold(0.0f64, f64::max)
    }
}

fn check_inputs(sol: &CriterionSolution, channel: &KrausChannel, samples: &SampleSet) -> Result<()> {
    if channel.dim() != samples.dim() {
        return Err(Error::DimensionMismatch(format!(
            "channel acts on dimension {}, samples live in dimension {}",
            channel.dim(),
            samples.dim()
        )));
    }
    if sol.n_ops() != channel.len() || sol.n_samples() != samples.len() {
        return Err(Error::DimensionMismatch(format!(
            "solution is {}x{}, channel has {} operators and {} samples",
            sol.n_ops(),
            sol.n_samples(),
            channel.len(),
            samples.len()
        )));
    }
    Ok(())
}

/// Partial isometry `sum_k u_k v_k^dagger` over singular values above the cutoff.
fn partial_isometry(m: &CMatrix, rel_cutoff: f64) -> Result<CMatrix> {
    let (u, sigma, v) = svd(m)?;
    let smax = sigma.first().copied().unwrap_or(0.0);
    let keep = sigma.iter().filter(|&&s| s > rel_cutoff * smax && s > 0.0).count();
    Ok(u.columns(0, keep) * v.columns(0, keep).adjoint())
}

/// Isometries `U_n` for every error index with nonzero coefficients, in index order.
pub fn build_isometries(
    sol: &CriterionSolution,
    transformed: &KrausChannel,
    samples: &SampleSet,
    code: &CodeSpace,
    opts: &RecoveryOptions,
) -> Result<Vec<BlockIsometry>> {
    let tol = Tolerances::default();
    let s = samples.len();
    let pinv = match opts.mode {
        IsometryMode::SampledSpan => {
            let cond = condition_number(&samples.gram)?;
            if cond > opts.cond_max {
                return Err(Error::IllConditionedSolve { cond, cond_max: opts.cond_max });
            }
            Some(pseudo_inverse(&samples.states, 1e-14)?)
        }
        IsometryMode::OperatorPolar => None,
    };
    let mut out = Vec::new();
    for n in (0..sol.n_ops()).filter(|&n| !sol.zero_mask[n]) {
        let f = &transformed.ops[n];
        let mut targets = f * &samples.states;
        for j in 0..s {
            let c = sol.c[(n, j)];
            if c == ZERO {
                return Err(Error::ZeroCoefficientBlock { block: n });
            }
            targets.column_mut(j).unscale_mut(1.0);
            let col = targets.column(j) / c;
            targets.set_column(j, &col);
        }
        let isometry = match &pinv {
            Some(pinv) => {
                let a = &targets * pinv;
                partial_isometry(&(a * &code.basis), tol.svd_tol)? * code.basis.adjoint()
            }
            None => partial_isometry(f, tol.svd_tol)?,
        };
        let uq = &isometry * &code.basis;
        let isometry_defect = (uq.ad_mul(&uq) - CMatrix::identity(code.rank(), code.rank())).norm();
        let sample_defects = (0..s)
            .map(|j| {
                let t = targets.column(j);
                (&isometry * samples.states.column(j) - t).norm() / t.norm()
            })
            .collect();
        out.push(BlockIsometry { error_index: n, isometry, isometry_defect, sample_defects });
    }
    Ok(out)
}

/// `lambda_qn(alpha_i) = sum_{n' in block q} conj(u_{n n'}) c_{n'}(alpha_i)`, one `Q x K` matrix per sample.
pub fn lambda_table(sol: &CriterionSolution) -> Vec<CMatrix> {
    let k = sol.n_ops();
    (0..sol.n_samples())
        .map(|i| {
            CMatrix::from_fn(sol.blocks.len(), k, |q, n| {
                sol.blocks[q].iter().map(|&np| sol.u[(n, np)].conj() * sol.c[(np, i)]).sum()
            })
        })
        .collect()
}

/// Build the recovery channel for `channel` from its criterion solution.
pub fn build_recovery(
    sol: &CriterionSolution,
    channel: &KrausChannel,
    samples: &SampleSet,
    opts: &RecoveryOptions,
) -> Result<RecoveryChannel> {
    check_inputs(sol, channel, samples)?;
    let d = channel.dim();
    let code = build_code_projector(samples, opts.rank_tol)?;
    let transformed = channel.transform(&sol.u)?;
    let isometries = build_isometries(sol, &transformed, samples, &code, opts)?;
    let iso_of = |n: usize| isometries.iter().find(|b| b.error_index == n);

    let mut blocks = Vec::with_capacity(sol.blocks.len());
    let mut all_images = Vec::new();
    for (q, members) in sol.blocks.iter().enumerate() {
        let representative = *members.iter().min().ok_or(Error::ZeroCoefficientBlock { block: q })?;
        let rep = iso_of(representative).ok_or(Error::ZeroCoefficientBlock { block: q })?;
        let mut images = CMatrix::zeros(d, members.len() * samples.len());
        for (k, &n) in members.iter().enumerate() {
            images.columns_mut(k * samples.len(), samples.len()).copy_from(&(&transformed.ops[n] * &samples.states));
        }
        let (basis, _) = orthonormalize(&images, opts.rank_tol)?;
        all_images.push(basis.clone());
        let p_q = projector(&basis);
        let member_spread = members
            .iter()
            .filter_map(|&n| iso_of(n))
            .map(|b| ((&b.isometry - &rep.isometry) * &code.basis).norm())
            .fold(0.0f64, f64::max);
        if member_spread > opts.block_tol {
            log::info!("block {q}: member isometries differ by {member_spread:.3e} on the code span");
        }
        blocks.push(RecoveryBlock {
            members: members.clone(),
            representative,
            recovery: rep.isometry.ad_mul(&p_q),
            isometry: rep.isometry.clone(),
            projector: p_q,
            isometry_defect: rep.isometry_defect,
            sample_defects: rep.sample_defects.clone(),
            member_spread,
        });
    }

    let mut projector_overlap = 0.0f64;
    let mut p_sum = CMatrix::zeros(d, d);
    for (q, bq) in blocks.iter().enumerate() {
        p_sum += &bq.projector;
        for br in &blocks[q + 1..] {
            projector_overlap = projector_overlap.max(operator_norm(&(&bq.projector * &br.projector))?);
        }
    }
    let projector_sum_norm = operator_norm(&p_sum)?;

    let mut gram_sum = CMatrix::zeros(d, d);
    for b in &blocks {
        gram_sum += b.recovery.ad_mul(&b.recovery);
    }
    let completeness_defect = (&gram_sum - CMatrix::identity(d, d)).norm();
    let cols: usize = all_images.iter().map(|b| b.ncols()).sum();
    let mut stacked = CMatrix::zeros(d, cols);
    let mut at = 0;
    for b in &all_images {
        stacked.columns_mut(at, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    let (support, _) = orthonormalize(&stacked, opts.rank_tol)?;
    let pi = projector(&support);
    let support_completeness_defect = (&pi * &gram_sum * &pi - &pi).norm();
    let completion = (opts.complete && completeness_defect > opts.block_tol).then(|| CMatrix::identity(d, d) - &pi);

    let lambda = lambda_table(sol);
    let lambda_defects = (0..samples.len())
        .map(|i| {
            let psi = samples.state(i);
            DMatrix::from_fn(blocks.len(), channel.len(), |q, n| {
                let got = &blocks[q].recovery * (&channel.ops[n] * &psi);
                (got - &psi * lambda[i][(q, n)]).norm()
            })
        })
        .collect();

    Ok(RecoveryChannel {
        mode: opts.mode,
        code,
        blocks,
        completion,
        completeness_defect,
        support_completeness_defect,
        projector_overlap,
        projector_sum_norm,
        lambda,
        lambda_defects,
    })
}

fn check_density(rho: &CMatrix, d: usize) -> Result<()> {
    if rho.shape() != (d, d) {
        return Err(Error::DimensionMismatch(format!("density matrix is {:?}, expected {d}x{d}", rho.shape())));
    }
    let tol = Tolerances::default().herm_tol * rho.norm().max(1.0);
    let defect = hermitian_defect(rho);
    if defect > tol {
        return Err(Error::NonHermitianInput { defect, tol });
    }
    Ok(())
}

pub fn apply_channel(channel: &KrausChannel, rho: &CMatrix) -> Result<CMatrix> {
    check_density(rho, channel.dim())?;
    channel.apply(rho)
}

/// Full Kraus sum `sum_q R_q rho R_q^dagger`, completion included.
pub fn apply_recovery(rec: &RecoveryChannel, rho: &CMatrix) -> Result<CMatrix> {
    check_density(rho, rec.dim())?;
    let mut out = CMatrix::zeros(rec.dim(), rec.dim());
    for r in rec.kraus_ops() {
        out += r * rho * r.adjoint();
    }
    Ok(out)
}

/// One recovery outcome: its probability and the normalized post-recovery state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Block index, or `None` for the completion operator.
    pub block: Option<usize>,
    pub probability: f64,
    pub state: Option<CMatrix>,
}

/// Per-outcome view of `apply_recovery`; probabilities are relative to `tr(rho)`.
pub fn recovery_trajectories(rec: &RecoveryChannel, rho: &CMatrix) -> Result<Vec<Trajectory>> {
    check_density(rho, rec.dim())?;
    let total = rho.trace().re;
    if total <= 0.0 {
        return Err(Error::ZeroTrace { trace: total });
    }
    let labels = (0..rec.blocks.len()).map(Some).chain(rec.completion.as_ref().map(|_| None));
    Ok(labels
        .zip(rec.kraus_ops())
        .map(|(block, r)| {
            let out = r * rho * r.adjoint();
            let t = out.trace().re;
            Trajectory {
                block,
                probability: t / total,
                state: (t > 0.0).then(|| out.unscale(t)),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityReport {
    /// `<psi| R(E(rho)) |psi> / tr R(E(rho))`.
    pub fidelity: f64,
    /// `tr R(E(rho)) / tr E(rho)`.
    pub probability: f64,
    pub channel_trace: f64,
    pub recovered_trace: f64,
}

fn trace_floor(reference: f64) -> f64 {
    1e-14 * reference.max(f64::MIN_POSITIVE)
}

pub fn recovery_fidelity(psi: &CVector, channel: &KrausChannel, rec: &RecoveryChannel) -> Result<FidelityReport> {
    let norm2 = psi.norm_squared();
    if norm2 == 0.0 {
        return Err(Error::ZeroTrace { trace: 0.0 });
    }
    let psi = psi.unscale(norm2.sqrt());
    let rho = &psi * psi.adjoint();
    let after = apply_channel(channel, &rho)?;
    let channel_trace = after.trace().re;
    if channel_trace <= trace_floor(1.0) {
        return Err(Error::ZeroTrace { trace: channel_trace });
    }
    let recovered = apply_recovery(rec, &after)?;
    let recovered_trace = recovered.trace().re;
    if recovered_trace <= trace_floor(channel_trace) {
        return Err(Error::ZeroTrace { trace: recovered_trace });
    }
    let overlap = psi.dotc(&(&recovered * &psi)).re;
    Ok(FidelityReport {
        fidelity: (overlap / recovered_trace).clamp(0.0, 1.0),
        probability: recovered_trace / channel_trace,
        channel_trace,
        recovered_trace,
    })
}

/// Fidelity of the single branch `R_q op |psi>` with `|psi>`, normalized.
pub fn branch_fidelity(psi: &CVector, op: &CMatrix, rec: &RecoveryChannel, block: usize) -> Result<f64> {
    let b = rec
        .blocks
        .get(block)
        .ok_or(Error::IndexOutOfRange { index: block, limit: rec.blocks.len() })?;
    let psi = psi.unscale(psi.norm());
    let out = &b.recovery * (op * &psi);
    let n2 = out.norm_squared();
    if n2 <= trace_floor((op * &psi).norm_squared()) {
        return Err(Error::ZeroTrace { trace: n2 });
    }
    Ok(psi.dotc(&out).norm_sqr() / n2)
}

#[derive(Debug, Clone)]
pub struct MixedStateReport {
    /// `||R(E(rho)) - rho||_F`.
    pub defect: f64,
    pub trace_defect: f64,
    /// `c(alpha_j) = sum_{q,n} |lambda_qn(alpha_j)|^2` per mixture component.
    pub component_weights: Vec<f64>,
    pub holds: bool,
}

/// Recovery of `rho = sum_j p_j |psi_j><psi_j|` for a trace-preserving channel.
pub fn mixed_state_recovery_check(
    rec: &RecoveryChannel,
    channel: &KrausChannel,
    weights: &[f64],
    samples: &SampleSet,
) -> Result<MixedStateReport> {
    if !channel.is_trace_preserving() {
        return Err(Error::NotTracePreserving { defect: channel.tp_defect });
    }
    if weights.len() != samples.len() || rec.lambda.len() != samples.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} samples ({} in the recovery tables)",
            weights.len(),
            samples.len(),
            rec.lambda.len()
        )));
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) || total <= 0.0 {
        return Err(Error::DegenerateInput(format!("mixture weights {weights:?} are not a distribution")));
    }
    let d = samples.dim();
    let mut rho = CMatrix::zeros(d, d);
    for (j, w) in weights.iter().enumerate() {
        let psi = samples.state(j);
        rho += (&psi * psi.adjoint()) * Complex64::from(w / total);
    }
    let out = apply_recovery(rec, &apply_channel(channel, &rho)?)?;
    let defect = (&out - &rho).norm();
    Ok(MixedStateReport {
        defect,
        trace_defect: (out.trace().re - 1.0).abs(),
        component_weights: (0..samples.len()).map(|j| rec.recovered_weight(j)).collect(),
        holds: defect <= MIXED_TOL,
    })
}
