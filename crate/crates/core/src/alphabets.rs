//! Parametrized alphabet families and the finite sample sets drawn from them.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hilbert::{
    basis_state, coherent_state, even_cat_state, pauli_op, squeezed_coherent_state, squeezed_displacement,
    FockSpace, Pauli, Space,
};
use crate::numkit::{c64, orthonormalize, CMatrix, CVector};

pub const NORM_TOL: f64 = 1e-10;
pub const DEFAULT_RANK_TOL: f64 = 1e-8;
pub const DEFAULT_GRID_COUNT: usize = 8;
pub const MAX_SAMPLES: usize = 64;
pub const DEFAULT_CAT_MARGIN: f64 = 1.5;

const DOMAIN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum ParamDomain {
    Interval { lo: f64, hi: f64 },
    Discrete(Vec<f64>),
}

impl ParamDomain {
    pub fn point(x: f64) -> Self {
        ParamDomain::Interval { lo: x, hi: x }
    }

    fn is_empty(&self) -> bool {
        match self {
            ParamDomain::Interval { lo, hi } => !(lo <= hi) || !lo.is_finite() || !hi.is_finite(),
            ParamDomain::Discrete(v) => v.is_empty(),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match self {
            ParamDomain::Interval { lo, hi } => x >= lo - DOMAIN_SLACK && x <= hi + DOMAIN_SLACK,
            ParamDomain::Discrete(v) => v.iter().any(|y| (x - y).abs() <= DOMAIN_SLACK),
        }
    }

    fn max_abs(&self) -> f64 {
        match self {
            ParamDomain::Interval { lo, hi } => lo.abs().max(hi.abs()),
            ParamDomain::Discrete(v) => v.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        }
    }

    fn extremes(&self) -> Vec<f64> {
        match self {
            ParamDomain::Interval { lo, hi } => vec![*lo, *hi],
            ParamDomain::Discrete(v) => v.clone(),
        }
    }

    fn grid(&self, count: usize) -> Vec<f64> {
        match self {
            ParamDomain::Interval { lo, hi } => {
                if lo == hi || count <= 1 {
                    vec![*lo]
                } else {
                    let step = (hi - lo) / (count - 1) as f64;
                    (0..count).map(|k| if k + 1 == count { *hi } else { lo + step * k as f64 }).collect()
                }
            }
            ParamDomain::Discrete(v) => v.clone(),
        }
    }

    fn is_continuous(&self) -> bool {
        matches!(self, ParamDomain::Interval { lo, hi } if lo < hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FamilyKind {
    /// `|alpha>`; parameters `(Re alpha, Im alpha)`.
    Coherent,
    /// `S(xi) D(alpha)|0>`; parameters `(Re alpha, Im alpha)`.
    SqueezedCoherent { xi: Complex64 },
    /// Even cat restricted to `Re alpha >= half_plane_margin`.
    EvenCat { half_plane_margin: f64 },
    /// `X_2^j (cos t |00> + e^{i phi} sin t |11>)`; parameters `(j, t, phi)`.
    DephasingPair,
    /// `(e^{i phi0} cos t |00> + sin t |01> + cos t |10> + e^{i phi0} sin t |11>) / sqrt 2`;
    /// parameter `t`.
    FixedPhase { phi0: f64 },
    /// Normalized `sum_j alpha_j |xi_j>`; parameters are `(Re, Im)` pairs.
    KlCodeword { codewords: Vec<CVector> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphabetFamily {
    pub name: String,
    pub kind: FamilyKind,
    pub domain: Vec<ParamDomain>,
}

pub fn coherent_family() -> AlphabetFamily {
    AlphabetFamily {
        name: "coherent".into(),
        kind: FamilyKind::Coherent,
        domain: vec![ParamDomain::Interval { lo: -2.0, hi: 2.0 }, ParamDomain::Interval { lo: -2.0, hi: 2.0 }],
    }
}

pub fn squeezed_coherent_family(xi: Complex64) -> AlphabetFamily {
    AlphabetFamily {
        name: "squeezed_coherent".into(),
        kind: FamilyKind::SqueezedCoherent { xi },
        domain: vec![ParamDomain::Interval { lo: -2.0, hi: 2.0 }, ParamDomain::Interval { lo: -2.0, hi: 2.0 }],
    }
}

pub fn even_cat_family(half_plane_margin: f64) -> Result<AlphabetFamily> {
    if !(half_plane_margin > 0.0) {
        return Err(Error::DomainViolation(format!(
            "cat half-plane margin must be positive, got {half_plane_margin}"
        )));
    }
    Ok(AlphabetFamily {
        name: "even_cat".into(),
        kind: FamilyKind::EvenCat { half_plane_margin },
        domain: vec![
            ParamDomain::Interval { lo: half_plane_margin, hi: half_plane_margin + 2.0 },
            ParamDomain::Interval { lo: -1.0, hi: 1.0 },
        ],
    })
}

pub fn dephasing_pair_family() -> AlphabetFamily {
    AlphabetFamily {
        name: "dephasing_pair".into(),
        kind: FamilyKind::DephasingPair,
        domain: vec![
            ParamDomain::Discrete(vec![0.0, 1.0]),
            ParamDomain::Interval { lo: 0.0, hi: FRAC_PI_2 },
            ParamDomain::Interval { lo: 0.0, hi: 2.0 * PI },
        ],
    }
}

pub fn fixed_phase_family(phi0: f64) -> AlphabetFamily {
    AlphabetFamily {
        name: "fixed_phase".into(),
        kind: FamilyKind::FixedPhase { phi0 },
        domain: vec![ParamDomain::Interval { lo: 0.0, hi: FRAC_PI_2 }],
    }
}

pub fn kl_codeword_family(codewords: Vec<CVector>) -> Result<AlphabetFamily> {
    let k = codewords.len();
    if k == 0 {
        return Err(Error::DegenerateInput("no codewords supplied".into()));
    }
    let d = codewords[0].len();
    if codewords.iter().any(|c| c.len() != d) {
        return Err(Error::DimensionMismatch("codewords have differing dimensions".into()));
    }
    for i in 0..k {
        for j in 0..k {
            let g = codewords[i].dotc(&codewords[j]);
            let want = if i == j { 1.0 } else { 0.0 };
            if (g - c64(want, 0.0)).norm() > NORM_TOL {
                return Err(Error::DegenerateInput(format!(
                    "codewords {i} and {j} are not orthonormal (overlap {g})"
                )));
            }
        }
    }
    Ok(AlphabetFamily {
        name: "kl_codeword".into(),
        kind: FamilyKind::KlCodeword { codewords },
        domain: vec![ParamDomain::Interval { lo: -1.0, hi: 1.0 }; 2 * k],
    })
}

impl AlphabetFamily {
    pub fn param_dims(&self) -> usize {
        match &self.kind {
            FamilyKind::Coherent | FamilyKind::SqueezedCoherent { .. } | FamilyKind::EvenCat { .. } => 2,
            FamilyKind::DephasingPair => 3,
            FamilyKind::FixedPhase { .. } => 1,
            FamilyKind::KlCodeword { codewords } => 2 * codewords.len(),
        }
    }

    pub fn with_domain(mut self, domain: Vec<ParamDomain>) -> Result<Self> {
        if domain.len() != self.param_dims() {
            return Err(Error::DimensionMismatch(format!(
                "family {} takes {} parameters, domain has {}",
                self.name,
                self.param_dims(),
                domain.len()
            )));
        }
        if domain.iter().any(ParamDomain::is_empty) {
            return Err(Error::DomainEmpty);
        }
        self.domain = domain;
        Ok(self)
    }

    /// Whether the family lives on a single oscillator mode.
    pub fn is_bosonic(&self) -> bool {
        matches!(
            self.kind,
            FamilyKind::Coherent | FamilyKind::SqueezedCoherent { .. } | FamilyKind::EvenCat { .. }
        )
    }

    /// Default Fock cutoff covering every parameter in the domain.
    pub fn auto_n_max(&self) -> Option<usize> {
        if !self.is_bosonic() {
            return None;
        }
        let (re, im) = (&self.domain[0], &self.domain[1]);
        match &self.kind {
            FamilyKind::SqueezedCoherent { xi } => {
                // |beta| is convex in alpha, so the box corners bound it
                let mut beta = 0.0f64;
                for &x in &re.extremes() {
                    for &y in &im.extremes() {
                        beta = beta.max(squeezed_displacement(c64(x, y), *xi).norm());
                    }
                }
                Some(FockSpace::auto_n_max_squeezed(beta, xi.norm()))
            }
            _ => Some(FockSpace::auto_n_max(re.max_abs().hypot(im.max_abs()))),
        }
    }

    pub fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_dims() {
            return Err(Error::DimensionMismatch(format!(
                "family {} takes {} parameters, got {}",
                self.name,
                self.param_dims(),
                params.len()
            )));
        }
        if params.iter().any(|x| !x.is_finite()) {
            return Err(Error::DomainViolation(format!("non-finite parameter in {params:?}")));
        }
        for (k, (x, dom)) in params.iter().zip(&self.domain).enumerate() {
            if !dom.contains(*x) {
                return Err(Error::DomainViolation(format!(
                    "parameter {k} = {x} outside {dom:?} for family {}",
                    self.name
                )));
            }
        }
        if let FamilyKind::EvenCat { half_plane_margin } = self.kind {
            if params[0] < half_plane_margin - DOMAIN_SLACK {
                return Err(Error::DomainViolation(format!(
                    "cat amplitude Re(alpha) = {} below half-plane margin {half_plane_margin}",
                    params[0]
                )));
            }
        }
        Ok(())
    }

    /// Normalized alphabet state for `params`, after domain validation.
    pub fn generate(&self, params: &[f64], space: Space) -> Result<CVector> {
        self.check_params(params)?;
        self.raw_state(params, space)
    }

    fn raw_state(&self, p: &[f64], space: Space) -> Result<CVector> {
        let fock = || {
            space
                .fock()
                .ok_or_else(|| Error::DimensionMismatch(format!("family {} needs a Fock space", self.name)))
        };
        let two_qubits = || match space.qubits() {
            Some(q) if q.n_qubits() == 2 => Ok(q),
            _ => Err(Error::DimensionMismatch(format!("family {} needs two qubits", self.name))),
        };
        match &self.kind {
            FamilyKind::Coherent => coherent_state(c64(p[0], p[1]), fock()?),
            FamilyKind::SqueezedCoherent { xi } => squeezed_coherent_state(c64(p[0], p[1]), *xi, fock()?),
            FamilyKind::EvenCat { .. } => even_cat_state(c64(p[0], p[1]), fock()?),
            FamilyKind::DephasingPair => {
                let reg = two_qubits()?;
                let j = p[0].round();
                if j != 0.0 && j != 1.0 {
                    return Err(Error::DomainViolation(format!("j must be 0 or 1, got {}", p[0])));
                }
                let (t, phi) = (p[1], p[2]);
                let psi = basis_state(reg, &[0, 0])? * c64(t.cos(), 0.0)
                    + basis_state(reg, &[1, 1])? * Complex64::from_polar(t.sin(), phi);
                if j == 1.0 {
                    Ok(pauli_op(reg, Pauli::X, 1)? * psi)
                } else {
                    Ok(psi)
                }
            }
            FamilyKind::FixedPhase { phi0 } => {
                two_qubits()?;
                let (c, s) = (p[0].cos(), p[0].sin());
                let e = Complex64::from_polar(std::f64::consts::FRAC_1_SQRT_2, *phi0);
                let h = std::f64::consts::FRAC_1_SQRT_2;
                Ok(CVector::from_vec(vec![e * c, c64(h * s, 0.0), c64(h * c, 0.0), e * s]))
            }
            FamilyKind::KlCodeword { codewords } => {
                if codewords[0].len() != space.dim() {
                    return Err(Error::DimensionMismatch(format!(
                        "codewords have dimension {}, space has {}",
                        codewords[0].len(),
                        space.dim()
                    )));
                }
                let mut v = CVector::zeros(space.dim());
                for (j, cw) in codewords.iter().enumerate() {
                    v += cw * c64(p[2 * j], p[2 * j + 1]);
                }
                let n = v.norm();
                if n <= NORM_TOL {
                    return Err(Error::DegenerateInput("all superposition amplitudes vanish".into()));
                }
                Ok(v.unscale(n))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SamplerStrategy {
    /// `count` evenly spaced points per continuous dimension; discrete
    /// dimensions are enumerated.
    Grid { count: usize },
    UniformRandom { count: usize, seed: u64 },
    Explicit(Vec<Vec<f64>>),
}

impl Default for SamplerStrategy {
    fn default() -> Self {
        SamplerStrategy::Grid { count: DEFAULT_GRID_COUNT }
    }
}

#[derive(Debug, Clone)]
pub struct SampleSet {
    pub params: Vec<Vec<f64>>,
    /// Columns are the sampled states.
    pub states: CMatrix,
    pub gram: CMatrix,
    pub seed: Option<u64>,
    /// Parameters dropped as numerically duplicate.
    pub pruned: Vec<Vec<f64>>,
}

impl SampleSet {
    /// Wrap already-built states without pruning or size checks.
    pub fn from_states(params: Vec<Vec<f64>>, states: Vec<CVector>) -> Result<Self> {
        if params.len() != states.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} parameter tuples for {} states",
                params.len(),
                states.len()
            )));
        }
        if states.is_empty() {
            return Err(Error::DegenerateSampleSet("no states".into()));
        }
        let d = states[0].len();
        if states.iter().any(|s| s.len() != d) {
            return Err(Error::DimensionMismatch("states have differing dimensions".into()));
        }
        let m = CMatrix::from_columns(&states);
        let gram = m.ad_mul(&m);
        Ok(Self { params, states: m, gram, seed: None, pruned: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn state(&self, j: usize) -> CVector {
        self.states.column(j).into_owned()
    }

    pub fn dim(&self) -> usize {
        self.states.nrows()
    }
}

fn grid_points(domain: &[ParamDomain], count: usize) -> Vec<Vec<f64>> {
    let n_cont = domain.iter().filter(|d| d.is_continuous()).count();
    let n_disc: usize = domain.iter().filter(|d| !d.is_continuous()).map(|d| d.grid(1).len()).product();
    let mut per = count.max(1);
    while per > 1 && n_disc * per.pow(n_cont as u32) > MAX_SAMPLES {
        per -= 1;
    }
    if n_disc * per.pow(n_cont as u32) > MAX_SAMPLES {
        log::warn!("grid has {} points even at one per continuous axis", n_disc);
    }
    let axes: Vec<Vec<f64>> = domain.iter().map(|d| d.grid(per)).collect();
    let mut out = vec![Vec::new()];
    for axis in &axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&x| {
                    let mut p = prefix.clone();
                    p.push(x);
                    p
                })
            })
            .collect();
    }
    out
}

fn random_points(domain: &[ParamDomain], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count.min(MAX_SAMPLES))
        .map(|_| {
            domain
                .iter()
                .map(|d| match d {
                    ParamDomain::Interval { lo, hi } if lo < hi => rng.gen_range(*lo..*hi),
                    ParamDomain::Interval { lo, .. } => *lo,
                    ParamDomain::Discrete(v) => v[rng.gen_range(0..v.len())],
                })
                .collect()
        })
        .collect()
}

/// Draw parameters, build states, and prune numerically duplicate samples.
///
/// Candidates are taken in order. A candidate is dropped when its 2x2 Gram
/// block with an already kept sample has condition number above
/// `1 / rank_tol`, or when it falls inside the span of the kept states.
/// Domain validation runs on the survivors, so a cat requested at both
/// `alpha` and `-alpha` keeps whichever comes first.
pub fn sample_parameters(
    family: &AlphabetFamily,
    strategy: &SamplerStrategy,
    space: Space,
    rank_tol: f64,
) -> Result<SampleSet> {
    if family.domain.iter().any(ParamDomain::is_empty) {
        return Err(Error::DomainEmpty);
    }
    let (candidates, seed) = match strategy {
        SamplerStrategy::Grid { count } => (grid_points(&family.domain, *count), None),
        SamplerStrategy::UniformRandom { count, seed } => (random_points(&family.domain, *count, *seed), Some(*seed)),
        SamplerStrategy::Explicit(points) => (points.clone(), None),
    };
    if candidates.is_empty() {
        return Err(Error::DomainEmpty);
    }

    let mut kept_params: Vec<Vec<f64>> = Vec::new();
    let mut kept: Vec<CVector> = Vec::new();
    let mut pruned = Vec::new();
    for p in candidates {
        if p.len() != family.param_dims() {
            return Err(Error::DimensionMismatch(format!(
                "sample {p:?} has {} entries, family {} takes {}",
                p.len(),
                family.name,
                family.param_dims()
            )));
        }
        let v = family.raw_state(&p, space)?;
        let duplicate = kept.iter().any(|w| {
            let g = w.dotc(&v).norm().min(1.0);
            (1.0 - g) * (1.0 / rank_tol) < 1.0 + g
        });
        let independent = if duplicate {
            false
        } else {
            let mut cols = kept.clone();
            cols.push(v.clone());
            orthonormalize(&CMatrix::from_columns(&cols), rank_tol)?.1 == cols.len()
        };
        if independent {
            kept.push(v);
            kept_params.push(p);
        } else {
            log::debug!("pruning duplicate sample {p:?}");
            pruned.push(p);
        }
    }
    for p in &kept_params {
        family.check_params(p)?;
    }
    if kept.len() < 2 {
        return Err(Error::DegenerateSampleSet(format!(
            "{} sample(s) left after pruning {} duplicate(s)",
            kept.len(),
            pruned.len()
        )));
    }
    let mut set = SampleSet::from_states(kept_params, kept)?;
    set.seed = seed;
    set.pruned = pruned;
    Ok(set)
}
