//! The factorization criterion on sampled alphabets.
//!
//! For Kraus operators `E_n` and sampled states `psi_i` the V-tensor is
//! `V_nm(i, j) = <psi_i| E_n^dagger E_m |psi_j>`. The criterion asks for a
//! unitary `u` over the error index, coefficients `c_n(i)` and a 0/1 matrix
//! `Gamma` with
//!
//! ```text
//! [u^dagger V(i, j) u]_nm = conj(c_n(i)) c_m(j) Gamma_nm <psi_i|psi_j>
//! ```
//!
//! for all sample pairs. Everything is stored in "big" matrices indexed by
//! `(n, i) -> n * S + i`, so the tensor is the Gram matrix of the vectors
//! `E_m psi_j`.

mod diagnostics;
mod gamma;
mod refine;
mod spectral;

pub use diagnostics::{
    approximate_metrics, cat_overlap_identity_defect, jn_operators, kl_reduction_check, necessary_condition_check,
    squeezed_epsilon, squeezed_omega, squeezed_orthogonal_ratio, squeezed_orthogonal_ratio_direct, ApproximateMetrics,
    KlReport, NecessaryConditionReport,
};
pub use gamma::{blocks_from_gamma, infer_gamma, GammaInference};
pub use spectral::{joint_diagonalize, spectral_init, SpectralInit};

use num_complex::Complex64;

use crate::alphabets::SampleSet;
use crate::channels::KrausChannel;
use crate::error::{Error, Result};
use crate::numkit::{kron, unitarity_defect, CMatrix, ZERO};

pub type GammaMatrix = Vec<Vec<u8>>;

#[derive(Debug, Clone)]
pub struct VTensor {
    pub n_ops: usize,
    pub n_samples: usize,
    /// `big[(n*S + i, m*S + j)] = V_nm(i, j)`.
    pub big: CMatrix,
    pub gram: CMatrix,
    pub channel_label: String,
}

impl VTensor {
    pub fn index(&self, n: usize, i: usize) -> usize {
        n * self.n_samples + i
    }

    pub fn get(&self, n: usize, m: usize, i: usize, j: usize) -> Complex64 {
        self.big[(self.index(n, i), self.index(m, j))]
    }

    /// The `n_ops x n_ops` matrix `V(i, j)`.
    pub fn slice(&self, i: usize, j: usize) -> CMatrix {
        CMatrix::from_fn(self.n_ops, self.n_ops, |n, m| self.get(n, m, i, j))
    }

    pub fn norm(&self) -> f64 {
        self.big.norm()
    }

    /// `u^dagger V u` in the big layout.
    pub fn transformed(&self, u: &CMatrix) -> CMatrix {
        let lift = kron(u, &CMatrix::identity(self.n_samples, self.n_samples));
        let t = lift.ad_mul(&(&self.big * &lift));
        (&t + t.adjoint()).scale(0.5)
    }

    fn overlap_floor(&self, rel: f64) -> f64 {
        rel * self.gram.iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }
}

/// Assemble the V-tensor as the Gram matrix of the vectors `E_m psi_j`.
pub fn build_v_tensor(channel: &KrausChannel, samples: &SampleSet) -> Result<VTensor> {
    if channel.dim() != samples.dim() {
        return Err(Error::DimensionMismatch(format!(
            "channel acts on dimension {}, samples live in dimension {}",
            channel.dim(),
            samples.dim()
        )));
    }
    let (k, s) = (channel.len(), samples.len());
    let mut phi = CMatrix::zeros(samples.dim(), k * s);
    for (m, e) in channel.ops.iter().enumerate() {
        let image = e * &samples.states;
        phi.columns_mut(m * s, s).copy_from(&image);
    }
    let big = phi.ad_mul(&phi);
    let big = (&big + big.adjoint()).scale(0.5);
    Ok(VTensor {
        n_ops: k,
        n_samples: s,
        big,
        gram: samples.gram.clone(),
        channel_label: channel.label.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Relative eigenvalue gap below which the spectral start is treated as degenerate.
    pub spec_gap_tol: f64,
    pub max_iters: usize,
    /// Stop refining once the relative residual change drops below this.
    pub refine_tol: f64,
    pub gamma_threshold: f64,
    pub floor_eps: f64,
    /// Pairs with `|gram| <= overlap_floor_rel * max|gram|` carry no phase information.
    pub overlap_floor_rel: f64,
    /// `c_n` is zero on a sample when `|c_n| <= c_zero_rel * max|c|`.
    pub c_zero_rel: f64,
    /// A coefficient above `order_one_rel * max|c|` counts as order one.
    pub order_one_rel: f64,
    /// Largest number of Gamma entries the transitive closure may flip.
    pub flip_budget: usize,
    pub seed: u64,
    pub jd_sweeps: usize,
    /// Off-diagonal sample pairs used as extra joint-diagonalization slices.
    pub jd_offdiag_slices: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            spec_gap_tol: 1e-6,
            max_iters: 200,
            refine_tol: 1e-12,
            gamma_threshold: 0.5,
            floor_eps: 1e-14,
            overlap_floor_rel: 1e-10,
            c_zero_rel: 1e-8,
            order_one_rel: 1e-4,
            flip_budget: 2,
            seed: 0,
            jd_sweeps: 100,
            jd_offdiag_slices: 32,
        }
    }
}

/// Residual of one Gamma hypothesis other than the inferred one.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaAlternative {
    pub gamma: GammaMatrix,
    pub residual_rel: f64,
}

#[derive(Debug, Clone)]
pub struct CriterionSolution {
    pub u: CMatrix,
    /// `c[(n, i)] = c_n(alpha_i)`.
    pub c: CMatrix,
    pub gamma: GammaMatrix,
    pub zero_mask: Vec<bool>,
    /// Gamma-equivalence classes of the indices with nonzero coefficients.
    pub blocks: Vec<Vec<usize>>,
    pub residual_rel: f64,
    /// `u^dagger V u - model`, big layout.
    pub epsilon: CMatrix,
    pub c_zero_tol: f64,
    /// Error indices whose coefficients mix vanishing and order-one magnitudes.
    pub dichotomy_violations: Vec<usize>,
    /// Sample whose coefficients fix the gauge.
    pub reference_sample: usize,
    pub converged: bool,
    pub iterations: usize,
    pub degenerate_spectrum: bool,
    pub used_joint_diagonalization: bool,
    /// Entries flipped when closing Gamma under transitivity.
    pub gamma_flips: usize,
    pub gamma_alternatives: Vec<GammaAlternative>,
}

impl CriterionSolution {
    pub fn n_ops(&self) -> usize {
        self.c.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.c.ncols()
    }

    pub fn epsilon_entry(&self, n: usize, m: usize, i: usize, j: usize) -> Complex64 {
        let s = self.n_samples();
        self.epsilon[(n * s + i, m * s + j)]
    }

    /// Block containing error index `n`, if `n` has nonzero coefficients.
    pub fn block_of(&self, n: usize) -> Option<usize> {
        self.blocks.iter().position(|b| b.contains(&n))
    }
}

/// `conj(c_n(i)) c_m(j) Gamma_nm G_ij` in the big layout.
pub(crate) fn model(c: &CMatrix, gamma: &GammaMatrix, gram: &CMatrix) -> CMatrix {
    let (k, s) = c.shape();
    CMatrix::from_fn(k * s, k * s, |a, b| {
        let (n, i) = (a / s, a % s);
        let (m, j) = (b / s, b % s);
        if gamma[n][m] == 0 {
            ZERO
        } else {
            c[(n, i)].conj() * c[(m, j)] * gram[(i, j)]
        }
    })
}

/// Relative Frobenius residual of `(u, c, gamma)` against `v`.
pub fn residual(v: &VTensor, u: &CMatrix, c: &CMatrix, gamma: &GammaMatrix) -> f64 {
    let t = v.transformed(u);
    (t - model(c, gamma, &v.gram)).norm() / v.norm()
}

/// Solve for `(u, c, Gamma)` minimizing the relative residual.
///
/// The spectral start is used directly when its eigenvalues are separated;
/// otherwise a joint-diagonalization start is tried as well and the better
/// of the two kept. Failure to converge is reported through
/// `CriterionSolution::converged`, not as an error.
pub fn solve_factorization(v: &VTensor, opts: &SolverOptions) -> Result<CriterionSolution> {
    if v.n_samples < 2 {
        return Err(Error::DegenerateSampleSet(format!(
            "criterion needs at least 2 samples, got {}",
            v.n_samples
        )));
    }
    if v.norm() == 0.0 {
        return Err(Error::DegenerateInput("V-tensor vanishes".into()));
    }
    let init = spectral_init(v, opts)?;
    let mut starts = vec![(init.u.clone(), false)];
    if init.degenerate {
        log::info!("degenerate spectral start; adding joint-diagonalization candidate");
        starts.push((joint_diagonalize(v, &init, opts)?, true));
    }

    let mut best: Option<CriterionSolution> = None;
    let mut last_err = None;
    for (u0, jd) in starts {
        match solve_from(v, &u0, opts) {
            Ok(mut sol) => {
                sol.degenerate_spectrum = init.degenerate;
                sol.used_joint_diagonalization = jd;
                let better = match &best {
                    None => true,
                    Some(b) => {
                        let key = |s: &CriterionSolution| (!s.dichotomy_violations.is_empty(), s.residual_rel);
                        let (a, b) = (key(&sol), key(b));
                        a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
                    }
                };
                if better {
                    best = Some(sol);
                }
            }
            Err(e) => {
                log::debug!("candidate start rejected: {e}");
                last_err = Some(e);
            }
        }
    }
    match best {
        Some(mut sol) => {
            sol.gamma_alternatives = gamma::alternatives(v, &sol, opts);
            Ok(sol)
        }
        None => Err(last_err.unwrap_or(Error::ConvergenceFailure { iterations: 0 })),
    }
}

fn solve_from(v: &VTensor, u0: &CMatrix, opts: &SolverOptions) -> Result<CriterionSolution> {
    let inferred = infer_gamma(v, u0, opts)?;
    let framed = gamma::canonical_frame(u0, &inferred)?;
    let t = v.transformed(&framed.u);
    let floor = v.overlap_floor(opts.overlap_floor_rel);
    let extracted = gamma::extract(v, &t, &framed.gamma, &framed.zero_mask, floor);

    let refined = refine::refine(v, &framed.u, &extracted.c, &framed.gamma, opts)?;
    let (u, c) = gamma::fix_gauge(&refined.u, &refined.c, extracted.reference);

    let t = v.transformed(&u);
    let epsilon = &t - model(&c, &framed.gamma, &v.gram);
    let residual_rel = epsilon.norm() / v.norm();
    let dichotomy_violations = gamma::dichotomy_violations(&c, &framed.zero_mask, framed.c_zero_tol, opts);
    debug_assert!(unitarity_defect(&u) < 1e-8);
    Ok(CriterionSolution {
        blocks: blocks_from_gamma(&framed.gamma, &framed.zero_mask),
        u,
        c,
        gamma: framed.gamma,
        zero_mask: framed.zero_mask,
        residual_rel,
        epsilon,
        c_zero_tol: framed.c_zero_tol,
        dichotomy_violations,
        reference_sample: extracted.reference,
        converged: refined.converged,
        iterations: refined.iterations,
        degenerate_spectrum: false,
        used_joint_diagonalization: false,
        gamma_flips: inferred.flips,
        gamma_alternatives: Vec::new(),
    })
}
