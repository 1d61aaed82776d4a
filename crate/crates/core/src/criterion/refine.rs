//! Alternating refinement of `(u, c)` at fixed Gamma.
//!
//! The objective is `f = ||T - M(c)||_F^2` with `T = U^dagger V U`,
//! `U = u (x) I_S`. The coefficient step is a closed-form least-squares
//! update of one rank-one factor; the unitary step follows the Riemannian
//! gradient on the unitary group with Armijo backtracking.

use super::{model, GammaMatrix, SolverOptions, VTensor};
use crate::error::Result;
use crate::numkit::{c64, expm_antihermitian, kron, CMatrix, Tolerances, ZERO};

pub(crate) struct Refined {
    pub u: CMatrix,
    pub c: CMatrix,
    pub converged: bool,
    pub iterations: usize,
}

fn objective(t: &CMatrix, c: &CMatrix, gamma: &GammaMatrix, gram: &CMatrix) -> f64 {
    (t - model(c, gamma, gram)).norm_squared()
}

/// `Gamma (x) G` in the big layout.
fn weights(gamma: &GammaMatrix, gram: &CMatrix) -> CMatrix {
    let k = gamma.len();
    let s = gram.nrows();
    CMatrix::from_fn(k * s, k * s, |a, b| {
        if gamma[a / s][b / s] == 0 {
            ZERO
        } else {
            gram[(a % s, b % s)]
        }
    })
}

/// Least-squares right factor `y` for fixed left factor `conj(x)`:
/// `y_b = sum_a x_a conj(W_ab) T_ab / sum_a |x_a|^2 |W_ab|^2`.
fn right_factor(t: &CMatrix, x: &CMatrix, w: &CMatrix, zero_mask: &[bool]) -> CMatrix {
    let (k, s) = x.shape();
    let flat: Vec<_> = (0..k * s).map(|a| x[(a / s, a % s)]).collect();
    let mut y = CMatrix::zeros(k, s);
    for b in 0..k * s {
        if zero_mask[b / s] {
            continue;
        }
        let (mut num, mut den) = (ZERO, 0.0);
        for (a, &xa) in flat.iter().enumerate() {
            let wab = w[(a, b)];
            if wab == ZERO {
                continue;
            }
            num += xa * wab.conj() * t[(a, b)];
            den += xa.norm_sqr() * wab.norm_sqr();
        }
        y[(b / s, b % s)] = if den > 0.0 { num / den } else { x[(b / s, b % s)] };
    }
    y
}

/// One accepted-if-better coefficient update; returns the new objective.
fn c_step(t: &CMatrix, c: &mut CMatrix, gamma: &GammaMatrix, gram: &CMatrix, w: &CMatrix, mask: &[bool], f: f64) -> f64 {
    let y = right_factor(t, c, w, mask);
    let f_y = objective(t, &y, gamma, gram);
    let avg = (&*c + &y).scale(0.5);
    let f_avg = objective(t, &avg, gamma, gram);
    if f_y <= f_avg && f_y < f {
        *c = y;
        f_y
    } else if f_avg < f {
        *c = avg;
        f_avg
    } else {
        f
    }
}

/// Run up to `sweeps` coefficient updates in a fixed frame.
pub(crate) fn polish_coefficients(
    v: &VTensor,
    t: &CMatrix,
    c: &CMatrix,
    gamma: &GammaMatrix,
    zero_mask: &[bool],
    sweeps: usize,
) -> CMatrix {
    let w = weights(gamma, &v.gram);
    let mut c = c.clone();
    let mut f = objective(t, &c, gamma, &v.gram);
    for _ in 0..sweeps {
        let next = c_step(t, &mut c, gamma, &v.gram, &w, zero_mask, f);
        if next >= f {
            break;
        }
        f = next;
    }
    c
}

/// Riemannian gradient direction `skew(u^dagger P)` with
/// `P_kl = sum_i [V U E]_{(k,i),(l,i)}`.
fn gradient(v: &VTensor, u: &CMatrix, c: &CMatrix, gamma: &GammaMatrix) -> (CMatrix, f64) {
    let s = v.n_samples;
    let lift = kron(u, &CMatrix::identity(s, s));
    let vu = &v.big * &lift;
    let t = lift.ad_mul(&vu);
    let t = (&t + t.adjoint()).scale(0.5);
    let e = &t - model(c, gamma, &v.gram);
    let f = e.norm_squared();
    let g = vu * e;
    let k = v.n_ops;
    let p = CMatrix::from_fn(k, k, |a, b| (0..s).map(|i| g[(a * s + i, b * s + i)]).sum());
    let x = u.ad_mul(&p);
    ((&x - x.adjoint()).scale(0.5), f)
}

pub(crate) fn refine(v: &VTensor, u: &CMatrix, c: &CMatrix, gamma: &GammaMatrix, opts: &SolverOptions) -> Result<Refined> {
    let vn = v.norm();
    let zero_mask: Vec<bool> = (0..c.nrows()).map(|n| c.row(n).iter().all(|z| *z == ZERO)).collect();
    let w = weights(gamma, &v.gram);
    let tol = Tolerances::default();
    let (mut u, mut c) = (u.clone(), c.clone());
    let mut t = v.transformed(&u);
    let mut f = objective(&t, &c, gamma, &v.gram);
    // rotation angle of the next trial step, adapted as steps succeed or fail
    let mut angle = 0.1;
    let tiny = (1e-15 * vn).powi(2);
    if f <= tiny {
        return Ok(Refined { u, c, converged: true, iterations: 0 });
    }
    for it in 1..=opts.max_iters {
        let r_prev = f.sqrt() / vn;
        f = c_step(&t, &mut c, gamma, &v.gram, &w, &zero_mask, f);

        let (skew, f_now) = gradient(v, &u, &c, gamma);
        f = f.min(f_now);
        let gnorm = skew.norm();
        if gnorm > 0.0 && f > tiny {
            let slope = 4.0 * gnorm * gnorm;
            let mut accepted = false;
            for _ in 0..40 {
                let step = angle / gnorm;
                let trial = &u * expm_antihermitian(&(&skew * c64(-step, 0.0)), &tol)?;
                let t_trial = v.transformed(&trial);
                let f_trial = objective(&t_trial, &c, gamma, &v.gram);
                if f_trial <= f - 1e-4 * step * slope {
                    u = trial;
                    t = t_trial;
                    f = f_trial;
                    angle = (angle * 2.0).min(1.0);
                    accepted = true;
                    break;
                }
                angle *= 0.5;
                if angle < 1e-16 {
                    break;
                }
            }
            if !accepted {
                angle = angle.max(1e-8);
            }
        }

        let r = f.sqrt() / vn;
        if f <= tiny || (r_prev - r).abs() <= opts.refine_tol * r_prev {
            return Ok(Refined { u, c, converged: true, iterations: it });
        }
    }
    log::warn!("refinement hit max_iters = {}", opts.max_iters);
    Ok(Refined { u, c, converged: false, iterations: opts.max_iters })
}
