use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{build_v_tensor, solve_factorization, CriterionSolution, GammaMatrix, SolverOptions, VTensor};
use crate::alphabets::{kl_codeword_family, sample_parameters, SampleSet, SamplerStrategy, DEFAULT_RANK_TOL};
use crate::channels::KrausChannel;
use crate::error::{Error, Result};
use crate::hilbert::{annihilation_op, coherent_state, number_op, squeezed_coherent_state, FockSpace, QubitRegister, Space};
use crate::numkit::{c64, eig_hermitian, pseudo_inverse, CMatrix, CVector, Tolerances, ZERO};

#[derive(Debug, Clone)]
pub struct NecessaryConditionReport {
    /// `W_nm(i, j) = V_nm(i, j) / G_ij` in the big layout; zero where skipped.
    pub w: CMatrix,
    /// `evaluated[i][j]` is false for pairs below the overlap floor.
    pub evaluated: Vec<Vec<bool>>,
    pub skipped_pairs: usize,
    /// Largest `|W_nm(i, j) - conj(W_mn(j, i))|`.
    pub max_violation: f64,
    /// Samples whose pairwise overlaps all clear the floor; used for the PSD test.
    pub psd_samples: Vec<usize>,
    /// Smallest eigenvalue of the stacked `W` over `psd_samples`, relative to the largest magnitude.
    pub psd_min_eig_rel: f64,
    pub psd_holds: bool,
}

/// Hermitian pairing and Gram factorizability of `W = V / G`.
pub fn necessary_condition_check(v: &VTensor, opts: &SolverOptions) -> Result<NecessaryConditionReport> {
    let (k, s) = (v.n_ops, v.n_samples);
    let floor = v.overlap_floor(opts.overlap_floor_rel);
    let evaluated: Vec<Vec<bool>> = (0..s).map(|i| (0..s).map(|j| v.gram[(i, j)].norm() > floor).collect()).collect();
    let skipped_pairs = evaluated.iter().flatten().filter(|e| !**e).count();
    let w = CMatrix::from_fn(k * s, k * s, |a, b| {
        let (i, j) = (a % s, b % s);
        if evaluated[i][j] {
            v.big[(a, b)] / v.gram[(i, j)]
        } else {
            ZERO
        }
    });
    let mut max_violation = 0.0f64;
    for a in 0..k * s {
        for b in 0..k * s {
            if evaluated[a % s][b % s] {
                max_violation = max_violation.max((w[(a, b)] - w[(b, a)].conj()).norm());
            }
        }
    }

    let mut clique = vec![0usize];
    for j in 1..s {
        if clique.iter().all(|&i| evaluated[i][j]) {
            clique.push(j);
        }
    }
    let q = clique.len();
    let stacked = CMatrix::from_fn(k * q, k * q, |a, b| {
        let (n, i) = (a / q, clique[a % q]);
        let (m, j) = (b / q, clique[b % q]);
        w[(n * s + i, m * s + j)]
    });
    let stacked = (&stacked + stacked.adjoint()).scale(0.5);
    let (vals, _) = eig_hermitian(&stacked, &Tolerances::default())?;
    let scale = vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let psd_min_eig_rel = if scale > 0.0 { vals[0] / scale } else { 0.0 };
    Ok(NecessaryConditionReport {
        w,
        evaluated,
        skipped_pairs,
        max_violation,
        psd_samples: clique,
        psd_min_eig_rel,
        psd_holds: psd_min_eig_rel >= -1e-8,
    })
}

#[derive(Debug, Clone)]
pub struct ApproximateMetrics {
    pub max_abs_epsilon: f64,
    /// `|eps_nm(i, j)| / (|c_n(i)| |c_m(j)|)` in the big layout; NaN where the denominator vanishes.
    pub ratio: DMatrix<f64>,
    pub max_ratio: f64,
    /// Largest normalized overlap `|T_nm(i, j)| / sqrt(T_nn(i, i) T_mm(j, j))` over pairs with `Gamma_nm = 0`.
    pub orthogonality_defect: f64,
}

pub fn approximate_metrics(v: &VTensor, sol: &CriterionSolution) -> ApproximateMetrics {
    let (k, s) = (v.n_ops, v.n_samples);
    let eps = &sol.epsilon;
    let floor = sol.c_zero_tol * sol.c_zero_tol;
    let ratio = DMatrix::from_fn(k * s, k * s, |a, b| {
        let den = sol.c[(a / s, a % s)].norm() * sol.c[(b / s, b % s)].norm();
        if den > floor {
            eps[(a, b)].norm() / den
        } else {
            f64::NAN
        }
    });
    let max_ratio = ratio.iter().filter(|x| x.is_finite()).fold(0.0f64, |m, x| m.max(*x));
    let t = v.transformed(&sol.u);
    let mut orthogonality_defect = 0.0f64;
    for n in 0..k {
        for m in 0..k {
            if sol.gamma[n][m] == 1 || sol.zero_mask[n] || sol.zero_mask[m] {
                continue;
            }
            for i in 0..s {
                for j in 0..s {
                    let dn = t[(n * s + i, n * s + i)].re;
                    let dm = t[(m * s + j, m * s + j)].re;
                    if dn > 0.0 && dm > 0.0 {
                        let x = t[(n * s + i, m * s + j)].norm() / (dn * dm).sqrt();
                        orthogonality_defect = orthogonality_defect.max(x);
                    }
                }
            }
        }
    }
    ApproximateMetrics {
        max_abs_epsilon: eps.iter().fold(0.0f64, |m, z| m.max(z.norm())),
        ratio,
        max_ratio,
        orthogonality_defect,
    }
}

/// `Omega(alpha, beta) = beta cosh r - conj(alpha) e^{i theta} sinh r`,
/// so that `<alpha|_xi a |beta>_xi = Omega(alpha, beta) <alpha|beta>`.
pub fn squeezed_omega(alpha: Complex64, beta: Complex64, xi: Complex64) -> Complex64 {
    let (r, theta) = (xi.norm(), xi.arg());
    beta * r.cosh() - alpha.conj() * Complex64::from_polar(r.sinh(), theta)
}

fn coherent_overlap(alpha: Complex64, beta: Complex64) -> Complex64 {
    (-0.5 * alpha.norm_sqr() - 0.5 * beta.norm_sqr() + alpha.conj() * beta).exp()
}

/// `eps(beta, alpha) = (conj(beta) - conj(alpha)) e^{i theta} sinh r <alpha|beta>`.
///
/// Satisfies `Omega(alpha, beta) <alpha|beta> = Omega(beta, beta) <alpha|beta> + eps(beta, alpha)`.
pub fn squeezed_epsilon(beta: Complex64, alpha: Complex64, xi: Complex64) -> Complex64 {
    let (r, theta) = (xi.norm(), xi.arg());
    (beta.conj() - alpha.conj()) * Complex64::from_polar(r.sinh(), theta) * coherent_overlap(alpha, beta)
}

/// `sinh^2 r / (|Omega(alpha, alpha)|^2 + sinh^2 r)`.
pub fn squeezed_orthogonal_ratio(alpha: Complex64, xi: Complex64) -> f64 {
    let sh2 = xi.norm().sinh().powi(2);
    sh2 / (squeezed_omega(alpha, alpha, xi).norm_sqr() + sh2)
}

/// `<perp|perp> / <a^dagger a>` with `|perp> = a|alpha>_xi - Omega(alpha, alpha)|alpha>_xi`
/// built on the truncated space.
pub fn squeezed_orthogonal_ratio_direct(alpha: Complex64, xi: Complex64, space: FockSpace) -> Result<f64> {
    let psi = squeezed_coherent_state(alpha, xi, space)?;
    let a = annihilation_op(space);
    let perp = &a * &psi - &psi * squeezed_omega(alpha, alpha, xi);
    let n = psi.dotc(&(number_op(space) * &psi)).re;
    Ok(perp.norm_squared() / n)
}

/// `|(<a_e|b_e> - <a_o|b_o>) - (<-a|b> + <a|-b>)|` with both cats normalized by `1/sqrt 2`.
pub fn cat_overlap_identity_defect(alpha: Complex64, beta: Complex64, space: FockSpace) -> Result<f64> {
    let h = c64(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let (ap, am) = (coherent_state(alpha, space)?, coherent_state(-alpha, space)?);
    let (bp, bm) = (coherent_state(beta, space)?, coherent_state(-beta, space)?);
    let (ae, ao) = ((&ap + &am) * h, (&ap - &am) * h);
    let (be, bo) = ((&bp + &bm) * h, (&bp - &bm) * h);
    let lhs = ae.dotc(&be) - ao.dotc(&bo);
    let rhs = am.dotc(&bp) + ap.dotc(&bm);
    Ok((lhs - rhs).norm())
}

/// `J_n = Psi diag(c_n) Psi^+`, acting as `c_n(alpha_j)` on each sampled state.
pub fn jn_operators(samples: &SampleSet, sol: &CriterionSolution) -> Result<Vec<CMatrix>> {
    let pinv = pseudo_inverse(&samples.states, 1e-12)?;
    Ok((0..sol.n_ops())
        .map(|n| {
            let scaled = CMatrix::from_fn(samples.dim(), samples.len(), |r, j| samples.states[(r, j)] * sol.c[(n, j)]);
            scaled * &pinv
        })
        .collect())
}

pub const KL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct KlReport {
    /// `h_nm = <xi_0| E_n^dagger E_m |xi_0>`.
    pub h: CMatrix,
    /// Largest deviation of `<xi_i| E_n^dagger E_m |xi_i>` from `h`.
    pub codeword_dependence: f64,
    /// Largest `|<xi_i| E_n^dagger E_m |xi_j>|` for `i != j`.
    pub offdiag_defect: f64,
    pub kl_holds: bool,
    pub nlqec_residual: Option<f64>,
    pub gamma: Option<GammaMatrix>,
    pub n_blocks: Option<usize>,
    /// Largest `|c_n(i) - c_n(reference)|` over the sampled superpositions.
    pub c_spread: Option<f64>,
    pub holds: bool,
}

/// Check the Knill-Laflamme conditions and that they carry over to the
/// factorization criterion on random codeword superpositions.
pub fn kl_reduction_check(
    codewords: &[CVector],
    channel: &KrausChannel,
    opts: &SolverOptions,
    n_samples: usize,
    seed: u64,
) -> Result<KlReport> {
    let Some(first) = codewords.first() else {
        return Err(Error::DegenerateInput("no codewords".into()));
    };
    let d = first.len();
    if channel.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "codewords have dimension {d}, channel acts on {}",
            channel.dim()
        )));
    }
    let k = channel.len();
    let moment = |i: usize, j: usize| {
        let imgs_i: Vec<CVector> = channel.ops.iter().map(|e| e * &codewords[i]).collect();
        let imgs_j: Vec<CVector> = channel.ops.iter().map(|e| e * &codewords[j]).collect();
        CMatrix::from_fn(k, k, |n, m| imgs_i[n].dotc(&imgs_j[m]))
    };
    let h = moment(0, 0);
    let mut codeword_dependence = 0.0f64;
    let mut offdiag_defect = 0.0f64;
    for i in 0..codewords.len() {
        for j in 0..codewords.len() {
            let m = moment(i, j);
            if i == j {
                codeword_dependence = codeword_dependence.max((m - &h).camax());
            } else {
                offdiag_defect = offdiag_defect.max(m.camax());
            }
        }
    }
    let kl_holds = codeword_dependence <= KL_TOL && offdiag_defect <= KL_TOL;
    let mut report = KlReport {
        h,
        codeword_dependence,
        offdiag_defect,
        kl_holds,
        nlqec_residual: None,
        gamma: None,
        n_blocks: None,
        c_spread: None,
        holds: kl_holds,
    };
    if codewords.len() < 2 {
        return Ok(report);
    }
    if !d.is_power_of_two() {
        return Err(Error::DimensionMismatch(format!("codeword dimension {d} is not a qubit register")));
    }
    let space = Space::Qubits(QubitRegister::new(d.trailing_zeros() as usize)?);
    let family = kl_codeword_family(codewords.to_vec())?;
    let samples = sample_parameters(
        &family,
        &SamplerStrategy::UniformRandom { count: n_samples, seed },
        space,
        DEFAULT_RANK_TOL,
    )?;
    let v = build_v_tensor(channel, &samples)?;
    let sol = solve_factorization(&v, opts)?;
    let r0 = sol.reference_sample;
    let c_spread = (0..sol.n_ops())
        .flat_map(|n| (0..sol.n_samples()).map(move |i| (n, i)))
        .map(|(n, i)| (sol.c[(n, i)] - sol.c[(n, r0)]).norm())
        .fold(0.0f64, f64::max);
    report.holds = kl_holds && sol.residual_rel <= 10.0 * Tolerances::default().eig_tol && c_spread <= 1e-8;
    report.nlqec_residual = Some(sol.residual_rel);
    report.n_blocks = Some(sol.blocks.len());
    report.gamma = Some(sol.gamma);
    report.c_spread = Some(c_spread);
    Ok(report)
}
