//! Error channels as ordered Kraus operator lists.

use crate::error::{Error, Result};
use crate::hilbert::{annihilation_op, pauli_op, FockSpace, Pauli, QubitRegister};
use crate::numkit::{c64, unitarity_defect, CMatrix, ZERO};

pub const TP_TOL: f64 = 1e-10;
/// Tolerance on `u^dagger u = I` for Kraus mixing matrices.
pub const MIX_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    pub label: String,
    pub ops: Vec<CMatrix>,
    /// `||sum_n E_n^dagger E_n - I||_F`.
    pub tp_defect: f64,
}

fn tp_defect(ops: &[CMatrix]) -> f64 {
    let d = ops[0].ncols();
    let mut acc = -CMatrix::identity(d, d);
    for e in ops {
        acc += e.ad_mul(e);
    }
    acc.norm()
}

impl KrausChannel {
    pub fn new(label: impl Into<String>, ops: Vec<CMatrix>) -> Result<Self> {
        let Some(first) = ops.first() else {
            return Err(Error::DimensionMismatch("channel needs at least one Kraus operator".into()));
        };
        let (r, c) = first.shape();
        if r != c {
            return Err(Error::DimensionMismatch(format!("Kraus operator is {r}x{c}, expected square")));
        }
        if let Some((k, e)) = ops.iter().enumerate().find(|(_, e)| e.shape() != (r, c)) {
            return Err(Error::DimensionMismatch(format!(
                "Kraus operator {k} is {:?}, operator 0 is {r}x{c}",
                e.shape()
            )));
        }
        let tp_defect = tp_defect(&ops);
        Ok(Self { label: label.into(), ops, tp_defect })
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.tp_defect <= TP_TOL
    }

    pub fn dim(&self) -> usize {
        self.ops[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// `sum_n E_n rho E_n^dagger`.
    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        let d = self.dim();
        if rho.shape() != (d, d) {
            return Err(Error::DimensionMismatch(format!(
                "density matrix is {:?}, channel acts on dimension {d}",
                rho.shape()
            )));
        }
        let mut out = CMatrix::zeros(d, d);
        for e in &self.ops {
            out += e * rho * e.adjoint();
        }
        Ok(out)
    }

    /// `F_{n'} = sum_n E_n u_{n n'}`; the channel action is unchanged for unitary `u`.
    pub fn transform(&self, u: &CMatrix) -> Result<Self> {
        let k = self.ops.len();
        if u.shape() != (k, k) {
            return Err(Error::DimensionMismatch(format!(
                "mixing matrix is {:?} for {k} Kraus operators",
                u.shape()
            )));
        }
        let defect = unitarity_defect(u);
        if defect > MIX_TOL {
            return Err(Error::NonUnitaryTransform { defect });
        }
        let d = self.dim();
        let ops: Vec<CMatrix> = (0..k)
            .map(|col| {
                let mut f = CMatrix::zeros(d, d);
                for (n, e) in self.ops.iter().enumerate() {
                    if u[(n, col)] != ZERO {
                        f += e * u[(n, col)];
                    }
                }
                f
            })
            .collect();
        KrausChannel::new(format!("{}*u", self.label), ops)
    }
}

/// `{I, a}`; not trace preserving.
pub fn simplified_loss(space: FockSpace) -> KrausChannel {
    let d = space.dim();
    KrausChannel::new("simplified_loss", vec![CMatrix::identity(d, d), annihilation_op(space)])
        .expect("identity and a share a shape")
}

/// Smallest `k` with `(1-gamma)^k / k! * n_mean^k < 1e-14`, capped at `n_max`.
pub fn default_k_max(gamma: f64, n_mean: f64, space: FockSpace) -> usize {
    let eps = 1.0 - gamma;
    if eps <= 0.0 || n_mean <= 0.0 {
        return 0;
    }
    let mut term = 1.0f64;
    for k in 1..=space.n_max() {
        term *= eps * n_mean / k as f64;
        if term < 1e-14 {
            return k;
        }
    }
    space.n_max()
}

/// Amplitude damping with transmissivity `gamma`:
/// `A_k = sum_{n >= k} sqrt(C(n,k) gamma^{n-k} (1-gamma)^k) |n-k><n|` for `k = 0..=k_max`.
pub fn amplitude_damping(gamma: f64, space: FockSpace, k_max: usize) -> Result<KrausChannel> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::DomainViolation(format!("damping parameter {gamma} outside (0, 1]")));
    }
    if k_max > space.n_max() {
        return Err(Error::IndexOutOfRange { index: k_max, limit: space.n_max() + 1 });
    }
    let d = space.dim();
    let ln_g = gamma.ln();
    let ln_e = (1.0 - gamma).ln();
    // ln n! for n = 0..d
    let mut ln_fact = vec![0.0f64; d];
    for n in 1..d {
        ln_fact[n] = ln_fact[n - 1] + (n as f64).ln();
    }
    let ops = (0..=k_max)
        .map(|k| {
            let mut a = CMatrix::zeros(d, d);
            if k > 0 && gamma == 1.0 {
                return a;
            }
            for n in k..d {
                let ln_binom = ln_fact[n] - ln_fact[k] - ln_fact[n - k];
                let lg = if n == k { 0.0 } else { (n - k) as f64 * ln_g };
                let le = if k == 0 { 0.0 } else { k as f64 * ln_e };
                a[(n - k, n)] = c64((0.5 * (ln_binom + lg + le)).exp(), 0.0);
            }
            a
        })
        .collect();
    KrausChannel::new(format!("amplitude_damping(gamma={gamma})"), ops)
}

/// `{sqrt(p) I, sqrt(1-p) Z_1 Z_2}` on two qubits.
pub fn collective_dephasing(p: f64) -> Result<KrausChannel> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::DomainViolation(format!("dephasing probability {p} outside [0, 1]")));
    }
    let reg = QubitRegister::new(2)?;
    let zz = pauli_op(reg, Pauli::Z, 0)? * pauli_op(reg, Pauli::Z, 1)?;
    KrausChannel::new(
        format!("collective_dephasing(p={p})"),
        vec![CMatrix::identity(4, 4) * c64(p.sqrt(), 0.0), zz * c64((1.0 - p).sqrt(), 0.0)],
    )
}

pub fn custom_channel(label: impl Into<String>, ops: Vec<CMatrix>) -> Result<KrausChannel> {
    KrausChannel::new(label, ops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{coherent_state, fock_state, number_op, sqrt_number_op};
    use crate::numkit::{outer, ONE};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fock(n_max: usize) -> FockSpace {
        FockSpace::with_n_max(n_max).unwrap()
    }

    fn random_density(d: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = CMatrix::from_fn(d, d, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let rho = &g * g.adjoint();
        let tr = rho.trace();
        rho / tr
    }

    #[test]
    fn simplified_loss_cases() {
        let s = fock(60);
        let ch = simplified_loss(s);
        assert!((ch.tp_defect - number_op(s).norm()).abs() < 1e-9);
        assert!(!ch.is_trace_preserving());
        let vac = fock_state(0, s).unwrap();
        let rho = outer(&vac, &vac);
        assert_eq!(ch.apply(&rho).unwrap(), rho);

        let a1 = coherent_state(ONE, s).unwrap();
        let rho = outer(&a1, &a1);
        let out = ch.apply(&rho).unwrap();
        assert!((out - rho * c64(2.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn damping_identity_at_unit_gamma() {
        let ch = amplitude_damping(1.0, fock(20), 3).unwrap();
        assert!((&ch.ops[0] - CMatrix::identity(21, 21)).norm() < 1e-15);
        assert!(ch.ops[1..].iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn damping_second_form() {
        let s = fock(40);
        let gamma = 0.9f64;
        let ch = amplitude_damping(gamma, s, 5).unwrap();
        let a = annihilation_op(s);
        let gn = CMatrix::from_fn(41, 41, |r, c| if r == c { c64(gamma.sqrt().powi(r as i32), 0.0) } else { ZERO });
        let mut ak = CMatrix::identity(41, 41);
        let mut fact = 1.0;
        for k in 0..=5 {
            if k > 0 {
                ak = ak * &a;
                fact *= k as f64;
            }
            let expect = &gn * &ak * c64(((1.0 - gamma).powi(k as i32) / fact).sqrt(), 0.0);
            assert!((&ch.ops[k] - expect).norm() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn damping_completeness_below_guard() {
        for &gamma in &[0.9, 0.99] {
            let s = fock(60);
            let ch = amplitude_damping(gamma, s, s.n_max()).unwrap();
            let mut acc = CMatrix::zeros(61, 61);
            for e in &ch.ops {
                acc += e.ad_mul(e);
            }
            let sub = acc.view((0, 0), (51, 51)).into_owned() - CMatrix::identity(51, 51);
            assert!(sub.norm() < 1e-10);
        }
    }

    #[test]
    fn damping_on_coherent_state() {
        let s = fock(60);
        let (gamma, alpha, eps) = (0.99f64, 2.0f64, 0.01f64);
        let ch = amplitude_damping(gamma, s, 3).unwrap();
        let lhs = &ch.ops[1] * coherent_state(c64(alpha, 0.0), s).unwrap();
        let rhs = coherent_state(c64(gamma.sqrt() * alpha, 0.0), s).unwrap()
            * c64((-alpha * alpha * eps / 2.0).exp() * eps.sqrt() * alpha, 0.0);
        assert!((lhs - rhs).norm() < 1e-9);
    }

    #[test]
    fn damping_kraus_norms_shrink_as_gamma_grows() {
        let s = fock(30);
        let norms: Vec<f64> = [0.99, 0.995, 0.999, 0.9999]
            .iter()
            .map(|&g| {
                let ch = amplitude_damping(g, s, 4).unwrap();
                ch.ops[1..].iter().map(|a| a.norm()).fold(0.0, f64::max)
            })
            .collect();
        assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
    }

    #[test]
    fn k_max_rule() {
        let s = fock(60);
        // eps n = 0.04: 0.04^k/k! < 1e-14 first at k = 8
        assert_eq!(default_k_max(0.99, 4.0, s), 8);
        assert_eq!(default_k_max(1.0, 4.0, s), 0);
        assert_eq!(default_k_max(0.0001, 40.0, fock(10)), 10);
        let sq = sqrt_number_op(s);
        assert_eq!(sq.nrows(), 61);
    }

    #[test]
    fn dephasing_cases() {
        let ch = collective_dephasing(1.0).unwrap();
        assert_eq!(ch.ops[0], CMatrix::identity(4, 4));
        assert!(ch.ops[1].norm() == 0.0);
        let ch = collective_dephasing(0.3).unwrap();
        assert_eq!(ch.tp_defect, 0.0);
        let mut e01 = crate::numkit::CVector::zeros(4);
        e01[1] = ONE;
        let rho = outer(&e01, &e01);
        assert!((ch.apply(&rho).unwrap() - rho).norm() < 1e-15);
        assert!(collective_dephasing(1.2).is_err());
    }

    #[test]
    fn transform_preserves_action() {
        let s = FockSpace::new(8).unwrap();
        let ch = simplified_loss(s);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let u = CMatrix::from_row_slice(2, 2, &[c64(h, 0.0), c64(h, 0.0), c64(h, 0.0), c64(-h, 0.0)]);
        let f = ch.transform(&u).unwrap();
        let rho = random_density(8, 3);
        assert!((f.apply(&rho).unwrap() - ch.apply(&rho).unwrap()).norm() < 1e-12);
        assert!((f.tp_defect - ch.tp_defect).abs() < 1e-12);
        assert_eq!(ch.transform(&CMatrix::identity(2, 2)).unwrap().ops, ch.ops);
        let bad = CMatrix::from_row_slice(2, 2, &[ONE, ONE, ZERO, ONE]);
        assert!(matches!(ch.transform(&bad), Err(Error::NonUnitaryTransform { .. })));
        assert!(matches!(ch.transform(&CMatrix::identity(3, 3)), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn custom_shape_checks() {
        assert!(custom_channel("x", vec![]).is_err());
        let r = custom_channel("x", vec![CMatrix::identity(2, 2), CMatrix::identity(3, 3)]);
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
        let ok = custom_channel("x", vec![CMatrix::identity(2, 2) * c64(0.5f64.sqrt(), 0.0); 2]).unwrap();
        assert!(ok.is_trace_preserving());
    }
}
