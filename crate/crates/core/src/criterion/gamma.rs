use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{model, refine, CriterionSolution, GammaAlternative, GammaMatrix, SolverOptions, VTensor};
use crate::error::{Error, Result};
use crate::numkit::{polar_decompose, CMatrix, ZERO};

/// `|c_n(i)| = sqrt(T_nn(i, i) / G_ii)` from the transformed tensor.
pub(crate) fn magnitudes(v: &VTensor, t: &CMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(v.n_ops, v.n_samples, |n, i| {
        let g = v.gram[(i, i)].re;
        let d = t[(v.index(n, i), v.index(n, i))].re;
        if g > 0.0 && d > 0.0 {
            (d / g).sqrt()
        } else {
            0.0
        }
    })
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

#[derive(Debug, Clone)]
pub struct GammaInference {
    /// Transitively closed Gamma.
    pub gamma: GammaMatrix,
    /// Thresholded statistic before closure.
    pub raw: GammaMatrix,
    /// Median normalized off-diagonal magnitude per index pair.
    pub statistic: Vec<Vec<f64>>,
    pub zero_mask: Vec<bool>,
    pub c_zero_tol: f64,
    pub flips: usize,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let p = self.0[x];
        if p == x {
            return x;
        }
        let root = self.find(p);
        self.0[x] = root;
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Infer Gamma in the frame `u`.
///
/// `Gamma_nm = 1` when the median over sample pairs of
/// `|T_nm(i, j)| / (|c_n(i)| |c_m(j)| |G_ij| + floor_eps)` exceeds the
/// threshold. Only pairs with a usable overlap and nonvanishing
/// coefficients on both sides enter the median.
pub fn infer_gamma(v: &VTensor, u: &CMatrix, opts: &SolverOptions) -> Result<GammaInference> {
    let t = v.transformed(u);
    let mags = magnitudes(v, &t);
    let cmax = mags.max();
    if cmax <= 0.0 {
        return Err(Error::DegenerateInput("channel annihilates every sample".into()));
    }
    let tol = opts.c_zero_rel * cmax;
    let k = v.n_ops;
    let zero_mask: Vec<bool> = (0..k).map(|n| mags.row(n).iter().all(|&x| x <= tol)).collect();
    let floor = v.overlap_floor(opts.overlap_floor_rel);

    let mut statistic = vec![vec![0.0; k]; k];
    let mut raw = vec![vec![0u8; k]; k];
    for n in 0..k {
        raw[n][n] = 1;
        statistic[n][n] = 1.0;
        for m in n + 1..k {
            if zero_mask[n] || zero_mask[m] {
                continue;
            }
            let mut ratios = Vec::new();
            for i in 0..v.n_samples {
                for j in 0..v.n_samples {
                    let g = v.gram[(i, j)].norm();
                    if g <= floor || mags[(n, i)] <= tol || mags[(m, j)] <= tol {
                        continue;
                    }
                    let tnm = t[(v.index(n, i), v.index(m, j))].norm();
                    ratios.push(tnm / (mags[(n, i)] * mags[(m, j)] * g + opts.floor_eps));
                }
            }
            let stat = median(ratios);
            statistic[n][m] = stat;
            statistic[m][n] = stat;
            let on = u8::from(stat > opts.gamma_threshold);
            raw[n][m] = on;
            raw[m][n] = on;
        }
    }

    let mut uf = UnionFind((0..k).collect());
    for n in 0..k {
        for m in n + 1..k {
            if raw[n][m] == 1 {
                uf.union(n, m);
            }
        }
    }
    let mut gamma = vec![vec![0u8; k]; k];
    let mut flips = 0;
    for n in 0..k {
        gamma[n][n] = 1;
        for m in 0..k {
            if n != m && !zero_mask[n] && !zero_mask[m] && uf.find(n) == uf.find(m) {
                gamma[n][m] = 1;
            }
            if m > n && gamma[n][m] != raw[n][m] {
                flips += 1;
            }
        }
    }
    if flips > opts.flip_budget {
        return Err(Error::InconsistentGamma { flips, budget: opts.flip_budget });
    }
    if flips > 0 {
        log::warn!("Gamma closure flipped {flips} entries");
    }
    Ok(GammaInference { gamma, raw, statistic, zero_mask, c_zero_tol: tol, flips })
}

/// Gamma-equivalence classes of unmasked indices, each sorted, ordered by lowest member.
pub fn blocks_from_gamma(gamma: &GammaMatrix, zero_mask: &[bool]) -> Vec<Vec<usize>> {
    let k = gamma.len();
    let mut seen = vec![false; k];
    let mut blocks = Vec::new();
    for n in 0..k {
        if seen[n] || zero_mask[n] {
            continue;
        }
        let block: Vec<usize> = (n..k).filter(|&m| !zero_mask[m] && gamma[n][m] == 1).collect();
        for &m in &block {
            seen[m] = true;
        }
        blocks.push(block);
    }
    blocks
}

pub(crate) struct Framed {
    pub u: CMatrix,
    pub gamma: GammaMatrix,
    pub zero_mask: Vec<bool>,
    pub c_zero_tol: f64,
}

/// Move `u` to the representative of its block-gauge orbit closest to the identity.
///
/// Columns are first sorted by the row of their largest entry; each block
/// of columns is then rotated so its diagonal sub-block is positive
/// semidefinite. Within a Gamma block the rotation is a symmetry of the
/// criterion, so the residual is unchanged.
pub(crate) fn canonical_frame(u: &CMatrix, inf: &GammaInference) -> Result<Framed> {
    let k = u.ncols();
    let home: Vec<usize> = (0..k).map(|c| u.column(c).icamax()).collect();
    let mut perm: Vec<usize> = (0..k).collect();
    perm.sort_by_key(|&c| (home[c], c));
    let mut out = CMatrix::from_fn(k, k, |r, c| u[(r, perm[c])]);
    let gamma: GammaMatrix = (0..k).map(|a| (0..k).map(|b| inf.gamma[perm[a]][perm[b]]).collect()).collect();
    let zero_mask: Vec<bool> = perm.iter().map(|&c| inf.zero_mask[c]).collect();

    let mut groups = blocks_from_gamma(&gamma, &zero_mask);
    groups.extend((0..k).filter(|&n| zero_mask[n]).map(|n| vec![n]));
    for block in &groups {
        let sub = CMatrix::from_fn(block.len(), block.len(), |a, b| out[(block[a], block[b])]);
        let (w, _) = polar_decompose(&sub)?;
        let cols = CMatrix::from_fn(k, block.len(), |r, b| out[(r, block[b])]) * w.adjoint();
        for (b, &col) in block.iter().enumerate() {
            out.set_column(col, &cols.column(b));
        }
    }
    Ok(Framed { u: out, gamma, zero_mask, c_zero_tol: inf.c_zero_tol })
}

pub(crate) struct Extracted {
    pub c: CMatrix,
    pub reference: usize,
}

/// Connected components of the sample overlap graph.
fn components(v: &VTensor, floor: f64) -> Vec<Vec<usize>> {
    let s = v.n_samples;
    let mut label = vec![usize::MAX; s];
    let mut comps = Vec::new();
    for start in 0..s {
        if label[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut stack = vec![start];
        let mut comp = Vec::new();
        label[start] = id;
        while let Some(p) = stack.pop() {
            comp.push(p);
            for q in 0..s {
                if label[q] == usize::MAX && v.gram[(p, q)].norm() > floor {
                    label[q] = id;
                    stack.push(q);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

/// Closed-form coefficients in a fixed frame.
///
/// Magnitudes come from the diagonal slices. For each block the lead index
/// (its lowest member) gets phases propagated along a maximum spanning tree
/// of `|T_ll(p, i)|` from the component's reference sample; other members
/// take their phase relative to the lead from `T_ln(i, i)`.
pub(crate) fn extract(
    v: &VTensor,
    t: &CMatrix,
    gamma: &GammaMatrix,
    zero_mask: &[bool],
    floor: f64,
) -> Extracted {
    let mags = magnitudes(v, t);
    let (k, s) = (v.n_ops, v.n_samples);
    let weight = |i: usize| -> f64 { (0..k).map(|n| mags[(n, i)]).sum() };
    let comps = components(v, floor);
    let roots: Vec<usize> = comps
        .iter()
        .map(|comp| *comp.iter().max_by(|&&a, &&b| weight(a).total_cmp(&weight(b)).then(b.cmp(&a))).unwrap())
        .collect();
    let reference = *roots.iter().max_by(|&&a, &&b| weight(a).total_cmp(&weight(b)).then(b.cmp(&a))).unwrap();

    let mut c = CMatrix::zeros(k, s);
    for block in blocks_from_gamma(gamma, zero_mask) {
        let lead = block[0];
        let mut phase = vec![0.0f64; s];
        for (comp, &root) in comps.iter().zip(&roots) {
            let mut inside = vec![false; s];
            inside[root] = true;
            for _ in 1..comp.len() {
                let mut best: Option<(f64, usize, usize)> = None;
                for &p in comp.iter().filter(|&&p| inside[p]) {
                    for &i in comp.iter().filter(|&&i| !inside[i]) {
                        if v.gram[(p, i)].norm() <= floor {
                            continue;
                        }
                        let w = t[(v.index(lead, p), v.index(lead, i))].norm();
                        if best.is_none_or(|(bw, _, _)| w > bw) {
                            best = Some((w, p, i));
                        }
                    }
                }
                let Some((_, p, i)) = best else { break };
                let tpi = t[(v.index(lead, p), v.index(lead, i))];
                phase[i] = phase[p] + tpi.arg() - v.gram[(p, i)].arg();
                inside[i] = true;
            }
        }
        for &n in &block {
            for i in 0..s {
                let rel = if n == lead {
                    0.0
                } else {
                    t[(v.index(lead, i), v.index(n, i))].arg()
                };
                c[(n, i)] = Complex64::from_polar(mags[(n, i)], phase[i] + rel);
            }
        }
    }
    Extracted { c, reference }
}

/// Rotate each error index so `c_n(reference)` is real and nonnegative,
/// moving the phase into the matching column of `u`.
pub(crate) fn fix_gauge(u: &CMatrix, c: &CMatrix, reference: usize) -> (CMatrix, CMatrix) {
    let (mut u, mut c) = (u.clone(), c.clone());
    for n in 0..c.nrows() {
        let mut pivot = c[(n, reference)];
        if pivot.norm() == 0.0 {
            let best = (0..c.ncols()).max_by(|&a, &b| c[(n, a)].norm().total_cmp(&c[(n, b)].norm()));
            pivot = best.map(|j| c[(n, j)]).unwrap_or(ZERO);
        }
        if pivot.norm() == 0.0 {
            continue;
        }
        let rot = pivot.conj() / pivot.norm();
        for z in c.row_mut(n).iter_mut() {
            *z *= rot;
        }
        for z in u.column_mut(n).iter_mut() {
            *z *= rot;
        }
    }
    (u, c)
}

/// Unmasked indices whose coefficients vanish on some samples but are order one on others.
pub(crate) fn dichotomy_violations(c: &CMatrix, zero_mask: &[bool], c_zero_tol: f64, opts: &SolverOptions) -> Vec<usize> {
    let cmax = c.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    (0..c.nrows())
        .filter(|&n| !zero_mask[n])
        .filter(|&n| {
            let row: Vec<f64> = c.row(n).iter().map(|z| z.norm()).collect();
            let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = row.iter().copied().fold(0.0, f64::max);
            lo <= c_zero_tol && hi > opts.order_one_rel * cmax
        })
        .collect()
}

fn gamma_from_blocks(k: usize, blocks: &[Vec<usize>]) -> GammaMatrix {
    let mut g = vec![vec![0u8; k]; k];
    for (n, row) in g.iter_mut().enumerate() {
        row[n] = 1;
    }
    for b in blocks {
        for &n in b {
            for &m in b {
                g[n][m] = 1;
            }
        }
    }
    g
}

/// Residuals of the two nearest Gamma hypotheses: any two blocks merged, or
/// one index split off its block. Coefficients are re-extracted in the
/// solution's frame and polished with a few coefficient sweeps.
pub(crate) fn alternatives(v: &VTensor, sol: &CriterionSolution, opts: &SolverOptions) -> Vec<GammaAlternative> {
    let k = v.n_ops;
    let blocks = &sol.blocks;
    let mut candidates: Vec<Vec<Vec<usize>>> = Vec::new();
    for a in 0..blocks.len() {
        for b in a + 1..blocks.len() {
            let mut merged: Vec<Vec<usize>> = blocks.clone();
            let mut joined = merged[a].clone();
            joined.extend(&merged[b]);
            joined.sort_unstable();
            merged[a] = joined;
            merged.remove(b);
            candidates.push(merged);
        }
    }
    for (a, block) in blocks.iter().enumerate() {
        if block.len() < 2 {
            continue;
        }
        for &n in block {
            let mut split = blocks.clone();
            split[a].retain(|&m| m != n);
            split.push(vec![n]);
            candidates.push(split);
        }
    }
    let t = v.transformed(&sol.u);
    let floor = v.overlap_floor(opts.overlap_floor_rel);
    let mut out: Vec<GammaAlternative> = candidates
        .into_iter()
        .map(|bl| {
            let gamma = gamma_from_blocks(k, &bl);
            let ex = extract(v, &t, &gamma, &sol.zero_mask, floor);
            let c = refine::polish_coefficients(v, &t, &ex.c, &gamma, &sol.zero_mask, 20);
            let residual_rel = (&t - model(&c, &gamma, &v.gram)).norm() / v.norm();
            GammaAlternative { gamma, residual_rel }
        })
        .collect();
    out.sort_by(|a, b| a.residual_rel.total_cmp(&b.residual_rel));
    out.truncate(2);
    out
}
