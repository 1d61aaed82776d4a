//! Truncated single-mode Fock space and small qubit registers.
//!
//! Fock operators are exact on levels `0..=n_max` apart from the top row and
//! column, where truncation cuts the ladder. State constructors compute exact
//! amplitudes, reject states whose mass reaches the guard band, and
//! renormalize what remains.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numkit::{c64, expm_antihermitian, tensor, CMatrix, CVector, Tolerances, ONE, ZERO};

/// Probability mass allowed in the guard band before a state is rejected.
pub const TRUNC_TOL: f64 = 1e-10;
/// Number of top Fock levels that must stay empty.
pub const GUARD_BAND: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockSpace {
    dim: usize,
}

impl FockSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::DimensionMismatch(format!(
                "Fock space needs at least 2 levels, got {dim}"
            )));
        }
        Ok(Self { dim })
    }

    pub fn with_n_max(n_max: usize) -> Result<Self> {
        Self::new(n_max + 1)
    }

    /// Default cutoff `ceil(m^2 + 6m + 20)` for a largest amplitude `m`.
    pub fn auto_n_max(max_amplitude: f64) -> usize {
        let m = max_amplitude.abs();
        (m * m + 6.0 * m + 20.0).ceil() as usize
    }

    /// Cutoff for squeezed-coherent states with displacement magnitude at most
    /// `beta` and squeezing `r`.
    ///
    /// The coherent rule is widened by the `e^r` growth of the photon-number
    /// spread, then raised until the `tanh(r)^n` tail of the squeezed vacuum
    /// clears the guard band.
    pub fn auto_n_max_squeezed(beta: f64, r: f64) -> usize {
        let (b, r) = (beta.abs(), r.abs());
        let spread = (b * b + r.sinh().powi(2) + 6.0 * b * r.exp() + 20.0).ceil() as usize;
        let t = r.tanh();
        if t < 1e-3 {
            return spread;
        }
        // 1e-14 leaves headroom for the polynomial prefactor of the tail
        let tail = ((1e-14f64).ln() / t.ln()).ceil() as usize + GUARD_BAND + (b * b).ceil() as usize;
        spread.max(tail)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_max(&self) -> usize {
        self.dim - 1
    }
}

/// Carrier space of an alphabet: one oscillator mode or a qubit register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Fock(FockSpace),
    Qubits(QubitRegister),
}

impl Space {
    pub fn dim(&self) -> usize {
        match self {
            Space::Fock(f) => f.dim(),
            Space::Qubits(q) => q.dim(),
        }
    }

    pub fn fock(&self) -> Option<FockSpace> {
        match self {
            Space::Fock(f) => Some(*f),
            Space::Qubits(_) => None,
        }
    }

    pub fn qubits(&self) -> Option<QubitRegister> {
        match self {
            Space::Qubits(q) => Some(*q),
            Space::Fock(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QubitRegister {
    n_qubits: usize,
}

impl QubitRegister {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > 12 {
            return Err(Error::DimensionMismatch(format!(
                "qubit register size {n_qubits} not supported"
            )));
        }
        Ok(Self { n_qubits })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }
}

pub fn annihilation_op(space: FockSpace) -> CMatrix {
    let d = space.dim();
    CMatrix::from_fn(d, d, |r, c| {
        if c == r + 1 {
            c64((c as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    })
}

pub fn creation_op(space: FockSpace) -> CMatrix {
    annihilation_op(space).adjoint()
}

pub fn number_op(space: FockSpace) -> CMatrix {
    let d = space.dim();
    CMatrix::from_fn(d, d, |r, c| if r == c { c64(r as f64, 0.0) } else { ZERO })
}

pub fn sqrt_number_op(space: FockSpace) -> CMatrix {
    let d = space.dim();
    CMatrix::from_fn(d, d, |r, c| {
        if r == c {
            c64((r as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    })
}

/// `T = sum_n |n><n+1|`.
pub fn left_shift_op(space: FockSpace) -> CMatrix {
    let d = space.dim();
    CMatrix::from_fn(d, d, |r, c| if c == r + 1 { ONE } else { ZERO })
}

pub fn fock_state(n: usize, space: FockSpace) -> Result<CVector> {
    if n >= space.dim() {
        return Err(Error::IndexOutOfRange {
            index: n,
            limit: space.dim(),
        });
    }
    let mut v = CVector::zeros(space.dim());
    v[n] = ONE;
    Ok(v)
}

/// Probability mass in the top `guard_band` levels.
pub fn truncation_defect(v: &CVector, guard_band: usize) -> f64 {
    let d = v.len();
    let start = d.saturating_sub(guard_band);
    v.iter().skip(start).map(|z| z.norm_sqr()).sum()
}

/// Unnormalized coherent amplitudes `e^{-|a|^2/2} a^n / sqrt(n!)` for `n < len`.
fn coherent_amplitudes(alpha: Complex64, len: usize) -> Vec<Complex64> {
    let r = alpha.norm();
    let theta = alpha.arg();
    let mut ln_fact = 0.0;
    (0..len)
        .map(|n| {
            if n > 0 {
                ln_fact += (n as f64).ln();
            }
            if r == 0.0 {
                return if n == 0 { ONE } else { ZERO };
            }
            let ln_mag = -0.5 * r * r + n as f64 * r.ln() - 0.5 * ln_fact;
            Complex64::from_polar(ln_mag.exp(), n as f64 * theta)
        })
        .collect()
}

/// Check exact amplitudes over the truncated range, then renormalize.
///
/// `outside_mass` is the probability that falls beyond `n_max` before
/// truncation.
fn finalize_state(mut amps: Vec<Complex64>, outside_mass: f64, space: FockSpace) -> Result<CVector> {
    amps.truncate(space.dim());
    let v = CVector::from_vec(amps);
    let total = v.norm_squared() + outside_mass.max(0.0);
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::DegenerateInput("state has vanishing norm".into()));
    }
    let defect = (truncation_defect(&v, GUARD_BAND) + outside_mass.max(0.0)) / total;
    if defect > TRUNC_TOL {
        return Err(Error::TruncationError {
            defect,
            tol: TRUNC_TOL,
        });
    }
    let norm = v.norm();
    Ok(v.unscale(norm))
}

/// Coherent state `|alpha>` truncated to the space and renormalized.
pub fn coherent_state(alpha: Complex64, space: FockSpace) -> Result<CVector> {
    let amps = coherent_amplitudes(alpha, space.dim());
    let inside: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
    finalize_state(amps, 1.0 - inside, space)
}

/// `D(alpha) = exp(alpha a^dagger - alpha^* a)` on the truncated space.
pub fn displacement_op(alpha: Complex64, space: FockSpace) -> Result<CMatrix> {
    let a = annihilation_op(space);
    let g = a.adjoint() * alpha - &a * alpha.conj();
    expm_antihermitian(&g, &Tolerances::default())
}

/// `S(xi) = exp((xi^* a^2 - xi a^dagger^2) / 2)` on the truncated space.
pub fn squeeze_op(xi: Complex64, space: FockSpace) -> Result<CMatrix> {
    let a = annihilation_op(space);
    let a2 = &a * &a;
    let g = (&a2 * xi.conj() - a2.adjoint() * xi) * c64(0.5, 0.0);
    expm_antihermitian(&g, &Tolerances::default())
}

/// Displacement of the squeezed-coherent state `S(xi) D(alpha)|0>`.
///
/// Equals `alpha cosh r - alpha^* e^{i theta} sinh r`, which is also the
/// mean of `a` in that state.
pub fn squeezed_displacement(alpha: Complex64, xi: Complex64) -> Complex64 {
    let (r, theta) = (xi.norm(), xi.arg());
    alpha * r.cosh() - alpha.conj() * Complex64::from_polar(r.sinh(), theta)
}

/// Squeezed coherent state `S(xi) D(alpha)|0> = D(beta) S(xi)|0>`.
///
/// Amplitudes follow from the eigen-relation
/// `(a cosh r + a^dagger e^{i theta} sinh r) psi = gamma psi`, which gives a
/// three-term recurrence that stays exact up to the cutoff. The vacuum
/// amplitude fixes the global phase.
pub fn squeezed_coherent_state(alpha: Complex64, xi: Complex64, space: FockSpace) -> Result<CVector> {
    let (r, theta) = (xi.norm(), xi.arg());
    let beta = squeezed_displacement(alpha, xi);
    let e_theta = Complex64::from_polar(1.0, theta);
    let gamma = beta * r.cosh() + beta.conj() * e_theta * r.sinh();
    let vac = -0.5 * beta.norm_sqr() - 0.5 * beta.conj() * beta.conj() * e_theta * r.tanh();
    let phase = Complex64::from_polar(1.0, vac.im);

    // run the recurrence past the cutoff to measure the mass that truncation drops
    let extra = 4 * space.dim() + 200;
    let len = space.dim() + extra;
    let mut amps = vec![ZERO; len];
    amps[0] = phase;
    amps[1] = gamma * amps[0] / r.cosh();
    for n in 1..len - 1 {
        let next = (gamma * amps[n] - e_theta * r.sinh() * (n as f64).sqrt() * amps[n - 1])
            / (r.cosh() * ((n + 1) as f64).sqrt());
        amps[n + 1] = next;
        if next.norm() > 1e150 {
            for z in amps.iter_mut().take(n + 2) {
                *z *= 1e-150;
            }
        }
    }
    // the forward recurrence eventually amplifies rounding noise; find where the tail bottoms out
    let peak = amps.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    let mut last = len;
    for (n, z) in amps.iter().enumerate().skip(space.dim()) {
        if z.norm() < 1e-30 * peak {
            last = n;
            break;
        }
    }
    let outside: f64 = amps[space.dim()..last].iter().map(|z| z.norm_sqr()).sum();
    let inside: f64 = amps[..space.dim()].iter().map(|z| z.norm_sqr()).sum();
    if inside == 0.0 {
        return Err(Error::TruncationError { defect: 1.0, tol: TRUNC_TOL });
    }
    let scale = 1.0 / (inside + outside).sqrt();
    let amps: Vec<Complex64> = amps[..space.dim()].iter().map(|z| z * scale).collect();
    finalize_state(amps, outside * scale * scale, space)
}

fn cat_state(alpha: Complex64, space: FockSpace, parity: usize) -> Result<CVector> {
    let amps = coherent_amplitudes(alpha, space.dim());
    let inside: f64 = amps
        .iter()
        .enumerate()
        .filter(|(n, _)| n % 2 == parity)
        .map(|(_, z)| z.norm_sqr())
        .sum();
    // mass of |alpha> with the requested parity: (1 +/- e^{-2|alpha|^2}) / 2
    let decay = (-2.0 * alpha.norm_sqr()).exp();
    let total = if parity == 0 { 0.5 * (1.0 + decay) } else { 0.5 * (1.0 - decay) };
    if total <= 1e-300 || inside == 0.0 {
        return Err(Error::DegenerateInput(format!(
            "cat state with alpha = {alpha} has vanishing norm"
        )));
    }
    let masked: Vec<Complex64> = amps
        .into_iter()
        .enumerate()
        .map(|(n, z)| if n % 2 == parity { z } else { ZERO })
        .collect();
    finalize_state(masked, (total - inside).max(0.0), space)
}

/// Even cat state, proportional to `|alpha> + |-alpha>`.
pub fn even_cat_state(alpha: Complex64, space: FockSpace) -> Result<CVector> {
    cat_state(alpha, space, 0)
}

/// Odd cat state, proportional to `|alpha> - |-alpha>`. Rejects `alpha = 0`.
pub fn odd_cat_state(alpha: Complex64, space: FockSpace) -> Result<CVector> {
    if alpha.norm() == 0.0 {
        return Err(Error::DegenerateInput("odd cat state at alpha = 0".into()));
    }
    cat_state(alpha, space, 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

pub fn pauli_matrix(which: Pauli) -> CMatrix {
    let z = ZERO;
    let o = ONE;
    let i = c64(0.0, 1.0);
    match which {
        Pauli::X => CMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        Pauli::Y => CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        Pauli::Z => CMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    }
}

/// Pauli operator on `site` (0 = leftmost, most significant qubit).
pub fn pauli_op(register: QubitRegister, which: Pauli, site: usize) -> Result<CMatrix> {
    if site >= register.n_qubits() {
        return Err(Error::IndexOutOfRange {
            index: site,
            limit: register.n_qubits(),
        });
    }
    let factors: Vec<CMatrix> = (0..register.n_qubits())
        .map(|k| {
            if k == site {
                pauli_matrix(which)
            } else {
                CMatrix::identity(2, 2)
            }
        })
        .collect();
    Ok(tensor(&factors))
}

/// Computational basis state; `bits[0]` is the leftmost qubit.
pub fn basis_state(register: QubitRegister, bits: &[u8]) -> Result<CVector> {
    if bits.len() != register.n_qubits() {
        return Err(Error::DimensionMismatch(format!(
            "{} bits for a {}-qubit register",
            bits.len(),
            register.n_qubits()
        )));
    }
    let index = bits.iter().fold(0usize, |acc, &b| (acc << 1) | usize::from(b & 1));
    let mut v = CVector::zeros(register.dim());
    v[index] = ONE;
    Ok(v)
}

pub fn expectation(op: &CMatrix, v: &CVector) -> Complex64 {
    v.dotc(&(op * v))
}
