use std::cmp::Ordering;

use nalgebra::Matrix3;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{SolverOptions, VTensor};
use crate::error::{Error, Result};
use crate::numkit::{c64, eig_hermitian, normalize_column_phases, CMatrix, Tolerances, I};

#[derive(Debug, Clone)]
pub struct SpectralInit {
    pub u: CMatrix,
    /// Eigenvalues of the averaged slice, descending, matching the columns of `u`.
    pub eigenvalues: Vec<f64>,
    /// Runs of column indices whose eigenvalues lie within the gap tolerance.
    pub clusters: Vec<Vec<usize>>,
    pub degenerate: bool,
}

fn lex_cmp(a: &[Complex64], b: &[Complex64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        for (p, q) in [(x.re, y.re), (x.im, y.im)] {
            if (p - q).abs() > 1e-12 {
                // larger leading components first, so identity-like bases keep their order
                return q.partial_cmp(&p).unwrap_or(Ordering::Equal);
            }
        }
    }
    Ordering::Equal
}

/// Eigenbasis of `W = (1/S) sum_i V(i, i) / G_ii`, eigenvalues descending.
///
/// Eigenvectors are phase-normalized so their first significant entry is
/// real positive; inside a degenerate cluster they are ordered
/// lexicographically.
pub fn spectral_init(v: &VTensor, opts: &SolverOptions) -> Result<SpectralInit> {
    let k = v.n_ops;
    let mut w = CMatrix::zeros(k, k);
    let mut used = 0usize;
    for i in 0..v.n_samples {
        let g = v.gram[(i, i)].re;
        if g > 0.0 {
            w += v.slice(i, i).unscale(g);
            used += 1;
        }
    }
    if used == 0 || w.norm() == 0.0 {
        return Err(Error::DegenerateInput("every diagonal V slice vanishes".into()));
    }
    w.unscale_mut(used as f64);
    let w = (&w + w.adjoint()).scale(0.5);
    let (vals, mut vecs) = eig_hermitian(&w, &Tolerances::default())?;
    normalize_column_phases(&mut vecs);

    let scale = vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tol = opts.spec_gap_tol * scale;
    let desc: Vec<usize> = (0..k).rev().collect();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &idx in &desc {
        match clusters.last_mut() {
            Some(c) if vals[*c.last().unwrap()] - vals[idx] < tol => c.push(idx),
            _ => clusters.push(vec![idx]),
        }
    }
    for c in clusters.iter().filter(|c| c.len() > 1) {
        canonical_cluster_basis(&mut vecs, c);
    }
    normalize_column_phases(&mut vecs);
    let col = |j: usize| -> Vec<Complex64> { vecs.column(j).iter().copied().collect() };
    for c in clusters.iter_mut() {
        c.sort_by(|&a, &b| lex_cmp(&col(a), &col(b)));
    }
    let order: Vec<usize> = clusters.iter().flatten().copied().collect();
    let u = CMatrix::from_fn(k, k, |r, c| vecs[(r, order[c])]);
    let eigenvalues = order.iter().map(|&j| vals[j]).collect();

    // re-express clusters in the new column positions
    let mut pos = 0;
    let clusters: Vec<Vec<usize>> = clusters
        .iter()
        .map(|c| {
            let out = (pos..pos + c.len()).collect();
            pos += c.len();
            out
        })
        .collect();
    let degenerate = clusters.iter().any(|c| c.len() > 1);
    Ok(SpectralInit { u, eigenvalues, clusters, degenerate })
}

/// Replace the eigenvectors in `cols` by a basis of their span built from
/// projected standard basis vectors, largest remaining projection first.
///
/// Eigensolvers return an arbitrary rotation inside a degenerate eigenspace;
/// this pins it down so that a subspace aligned with the error index keeps
/// the identity frame.
fn canonical_cluster_basis(vecs: &mut CMatrix, cols: &[usize]) {
    let k = vecs.nrows();
    let span = CMatrix::from_fn(k, cols.len(), |r, c| vecs[(r, cols[c])]);
    let mut residual = &span * span.adjoint();
    for &target in cols {
        let pick = (0..k)
            .max_by(|&a, &b| residual.column(a).norm().total_cmp(&residual.column(b).norm()))
            .expect("nonempty");
        let b = residual.column(pick).normalize();
        residual -= &b * b.adjoint();
        vecs.set_column(target, &b);
    }
}

/// Hermitian test matrices for joint diagonalization: normalized diagonal
/// slices plus Hermitian and anti-Hermitian parts of a seeded random subset
/// of normalized off-diagonal slices.
fn jd_slices(v: &VTensor, opts: &SolverOptions) -> Vec<CMatrix> {
    let floor = v.overlap_floor(opts.overlap_floor_rel);
    let mut out = Vec::new();
    for i in 0..v.n_samples {
        let g = v.gram[(i, i)].re;
        if g > 0.0 {
            out.push(v.slice(i, i).unscale(g));
        }
    }
    let mut pairs: Vec<(usize, usize)> = (0..v.n_samples)
        .flat_map(|i| (i + 1..v.n_samples).map(move |j| (i, j)))
        .filter(|&(i, j)| v.gram[(i, j)].norm() > floor)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    pairs.shuffle(&mut rng);
    pairs.truncate(opts.jd_offdiag_slices);
    pairs.sort_unstable();
    for (i, j) in pairs {
        let m = v.slice(i, j) / v.gram[(i, j)];
        out.push((&m + m.adjoint()).scale(0.5));
        out.push((&m - m.adjoint()) * c64(0.0, -0.5));
    }
    out
}

/// One sweep of complex Jacobi rotations over the index pairs in `clusters`.
///
/// Each rotation `G = [[c, -conj(s)], [s, c]]` maximizes the diagonal mass
/// of `G^dagger A G` summed over all matrices. Returns the largest `|s|`.
pub(crate) fn jacobi_sweep(mats: &mut [CMatrix], q: &mut CMatrix, clusters: &[Vec<usize>]) -> f64 {
    let mut biggest = 0.0f64;
    let scale: f64 = mats.iter().map(|m| m.norm_squared()).sum();
    for cluster in clusters {
        for (a, &p) in cluster.iter().enumerate() {
            for &r in &cluster[a + 1..] {
                let mut g = Matrix3::<f64>::zeros();
                for m in mats.iter() {
                    let h = [m[(p, p)] - m[(r, r)], m[(p, r)] + m[(r, p)], I * (m[(r, p)] - m[(p, r)])];
                    for x in 0..3 {
                        for y in 0..3 {
                            g[(x, y)] += (h[x] * h[y].conj()).re;
                        }
                    }
                }
                // nothing couples p and r: any rotation would be arbitrary
                if g[(1, 1)] + g[(2, 2)] <= 1e-26 * scale {
                    continue;
                }
                let eig = g.symmetric_eigen();
                let top = eig.eigenvalues.imax();
                let mut vec = eig.eigenvectors.column(top).into_owned();
                if vec[0] < 0.0 {
                    vec = -vec;
                }
                let c = ((vec[0] + 1.0) / 2.0).sqrt();
                let s = c64(vec[1], -vec[2]) / (2.0 * c);
                if s.norm() < 1e-14 {
                    continue;
                }
                biggest = biggest.max(s.norm());
                let cc = c64(c, 0.0);
                let rot = |x: Complex64, y: Complex64| (cc * x + s * y, -s.conj() * x + cc * y);
                for m in mats.iter_mut() {
                    // columns: A <- A G
                    for row in 0..m.nrows() {
                        let (x, y) = rot(m[(row, p)], m[(row, r)]);
                        m[(row, p)] = x;
                        m[(row, r)] = y;
                    }
                    // rows: A <- G^dagger A
                    for col in 0..m.ncols() {
                        let (x, y) = rot(m[(p, col)].conj(), m[(r, col)].conj());
                        m[(p, col)] = x.conj();
                        m[(r, col)] = y.conj();
                    }
                }
                for row in 0..q.nrows() {
                    let (x, y) = rot(q[(row, p)], q[(row, r)]);
                    q[(row, p)] = x;
                    q[(row, r)] = y;
                }
            }
        }
    }
    biggest
}

/// Refine the spectral start by joint diagonalization inside its degenerate clusters.
pub fn joint_diagonalize(v: &VTensor, init: &SpectralInit, opts: &SolverOptions) -> Result<CMatrix> {
    let k = v.n_ops;
    let mut mats: Vec<CMatrix> = jd_slices(v, opts).iter().map(|m| init.u.ad_mul(&(m * &init.u))).collect();
    let degenerate: Vec<Vec<usize>> = init.clusters.iter().filter(|c| c.len() > 1).cloned().collect();
    let mut q = CMatrix::identity(k, k);
    for _ in 0..opts.jd_sweeps {
        if jacobi_sweep(&mut mats, &mut q, &degenerate) < 1e-12 {
            return Ok(&init.u * q);
        }
    }
    log::warn!("joint diagonalization stopped after {} sweeps", opts.jd_sweeps);
    Ok(&init.u * q)
}
