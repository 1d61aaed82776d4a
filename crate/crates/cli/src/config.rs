//! Scenario configuration: the JSON schema, parsing, and resolution into core objects.
//!
//! Every struct rejects unknown keys. Complex numbers are `[re, im]` pairs and
//! matrices are row-major nested arrays.

use nlqec::alphabets::{
    coherent_family, dephasing_pair_family, even_cat_family, fixed_phase_family, kl_codeword_family,
    squeezed_coherent_family, AlphabetFamily, ParamDomain, SamplerStrategy, DEFAULT_CAT_MARGIN, DEFAULT_GRID_COUNT,
    DEFAULT_RANK_TOL,
};
use nlqec::channels::{amplitude_damping, collective_dephasing, custom_channel, default_k_max, simplified_loss, KrausChannel};
use nlqec::criterion::SolverOptions;
use nlqec::hilbert::{basis_state, pauli_op, FockSpace, Pauli, QubitRegister, Space};
use nlqec::numkit::c64;
use nlqec::recovery::{IsometryMode, RecoveryOptions, BLOCK_TOL, COND_MAX};
use nlqec::CMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_ACCEPT_RESIDUAL: f64 = 1e-8;
pub const DEFAULT_APPROX_CEILING: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub space: SpaceSpec,
    pub alphabet: AlphabetSpec,
    pub channel: ChannelSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub recovery: RecoverySpec,
    #[serde(default = "default_accept")]
    pub accept_residual: f64,
    #[serde(default = "default_ceiling")]
    pub approx_ceiling: f64,
    #[serde(default)]
    pub outputs: OutputSpec,
}

fn default_accept() -> f64 {
    DEFAULT_ACCEPT_RESIDUAL
}

fn default_ceiling() -> f64 {
    DEFAULT_APPROX_CEILING
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSpec {
    /// `n_max` omitted means the family's automatic cutoff for its domain.
    Fock {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_max: Option<usize>,
    },
    Qubits { n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphabetSpec {
    pub family: FamilySpec,
    /// One entry per parameter; omitted means the family default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<DomainSpec>>,
    #[serde(default)]
    pub sampler: SamplerSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
}

fn default_rank_tol() -> f64 {
    DEFAULT_RANK_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    Coherent {},
    SqueezedCoherent {
        xi: [f64; 2],
    },
    EvenCat {
        #[serde(default = "default_cat_margin")]
        half_plane_margin: f64,
    },
    DephasingPair {},
    FixedPhase {
        phi0: f64,
    },
    /// Codewords given as computational basis bit strings.
    KlCodeword {
        codewords: Vec<Vec<u8>>,
    },
}

fn default_cat_margin() -> f64 {
    DEFAULT_CAT_MARGIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Interval([f64; 2]),
    Discrete(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerSpec {
    Grid {
        count: usize,
    },
    /// Uses the alphabet seed.
    UniformRandom {
        count: usize,
    },
    Explicit {
        points: Vec<Vec<f64>>,
    },
    /// Explicit points `center + offset`; sweeping `center` moves the whole set.
    Around {
        center: Vec<f64>,
        offsets: Vec<Vec<f64>>,
    },
}

impl Default for SamplerSpec {
    fn default() -> Self {
        SamplerSpec::Grid { count: DEFAULT_GRID_COUNT }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSpec {
    SimplifiedLoss {},
    AmplitudeDamping {
        gamma: f64,
        /// Omitted means the smallest order whose weight on the samples drops below 1e-14.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k_max: Option<usize>,
    },
    CollectiveDephasing {
        p: f64,
    },
    /// `sqrt(weight) * P` for each Pauli string such as `"XIZ"`.
    Pauli {
        terms: Vec<PauliTerm>,
    },
    Custom {
        ops: Vec<Vec<Vec<[f64; 2]>>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PauliTerm {
    pub weight: f64,
    pub string: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub spec_gap_tol: f64,
    pub max_iters: usize,
    pub refine_tol: f64,
    pub gamma_threshold: f64,
    pub floor_eps: f64,
    pub overlap_floor_rel: f64,
    pub c_zero_rel: f64,
    pub order_one_rel: f64,
    pub flip_budget: usize,
    pub seed: u64,
    pub jd_sweeps: usize,
    pub jd_offdiag_slices: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            spec_gap_tol: o.spec_gap_tol,
            max_iters: o.max_iters,
            refine_tol: o.refine_tol,
            gamma_threshold: o.gamma_threshold,
            floor_eps: o.floor_eps,
            overlap_floor_rel: o.overlap_floor_rel,
            c_zero_rel: o.c_zero_rel,
            order_one_rel: o.order_one_rel,
            flip_budget: o.flip_budget,
            seed: o.seed,
            jd_sweeps: o.jd_sweeps,
            jd_offdiag_slices: o.jd_offdiag_slices,
        }
    }
}

impl From<&SolverSpec> for SolverOptions {
    fn from(s: &SolverSpec) -> Self {
        SolverOptions {
            spec_gap_tol: s.spec_gap_tol,
            max_iters: s.max_iters,
            refine_tol: s.refine_tol,
            gamma_threshold: s.gamma_threshold,
            floor_eps: s.floor_eps,
            overlap_floor_rel: s.overlap_floor_rel,
            c_zero_rel: s.c_zero_rel,
            order_one_rel: s.order_one_rel,
            flip_budget: s.flip_budget,
            seed: s.seed,
            jd_sweeps: s.jd_sweeps,
            jd_offdiag_slices: s.jd_offdiag_slices,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSpec {
    #[default]
    SampledSpan,
    OperatorPolar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoverySpec {
    pub mode: ModeSpec,
    pub rank_tol: f64,
    pub cond_max: f64,
    pub block_tol: f64,
    pub complete: bool,
}

impl Default for RecoverySpec {
    fn default() -> Self {
        Self {
            mode: ModeSpec::SampledSpan,
            rank_tol: DEFAULT_RANK_TOL,
            cond_max: COND_MAX,
            block_tol: BLOCK_TOL,
            complete: true,
        }
    }
}

impl From<&RecoverySpec> for RecoveryOptions {
    fn from(s: &RecoverySpec) -> Self {
        RecoveryOptions {
            mode: match s.mode {
                ModeSpec::SampledSpan => IsometryMode::SampledSpan,
                ModeSpec::OperatorPolar => IsometryMode::OperatorPolar,
            },
            rank_tol: s.rank_tol,
            cond_max: s.cond_max,
            block_tol: s.block_tol,
            complete: s.complete,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axes: Vec<SweepAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
}

/// A numeric config field addressed by a dotted path, e.g.
/// `channel.amplitude_damping.gamma` or `alphabet.sampler.around.center.0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub path: String,
    pub values: Vec<f64>,
    /// CSV column header; defaults to the last path segment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl SweepAxis {
    pub fn column(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.path.rsplit('.').next().unwrap_or(&self.path).to_string())
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_value(value: serde_json::Value) -> CliResult<Self> {
        let cfg: ScenarioConfig = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that need no numerics: thresholds, space/family pairing.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if !(self.accept_residual >= 0.0 && self.accept_residual.is_finite()) {
            return bad(format!("accept_residual must be finite and non-negative, got {}", self.accept_residual));
        }
        if !(self.approx_ceiling >= self.accept_residual && self.approx_ceiling.is_finite()) {
            return bad(format!(
                "approx_ceiling {} must be finite and at least accept_residual {}",
                self.approx_ceiling, self.accept_residual
            ));
        }
        let bosonic = matches!(
            self.alphabet.family,
            FamilySpec::Coherent {} | FamilySpec::SqueezedCoherent { .. } | FamilySpec::EvenCat { .. }
        );
        match (&self.space, bosonic) {
            (SpaceSpec::Fock { .. }, false) => return bad("qubit alphabet needs a qubits space".into()),
            (SpaceSpec::Qubits { .. }, true) => return bad("oscillator alphabet needs a fock space".into()),
            _ => {}
        }
        let fock_channel = matches!(self.channel, ChannelSpec::SimplifiedLoss {} | ChannelSpec::AmplitudeDamping { .. });
        if fock_channel && !bosonic {
            return bad("oscillator channel applied to a qubit alphabet".into());
        }
        Ok(())
    }

    pub fn family(&self) -> CliResult<AlphabetFamily> {
        let fam = match &self.alphabet.family {
            FamilySpec::Coherent {} => coherent_family(),
            FamilySpec::SqueezedCoherent { xi } => squeezed_coherent_family(c64(xi[0], xi[1])),
            FamilySpec::EvenCat { half_plane_margin } => even_cat_family(*half_plane_margin).map_err(CliError::config)?,
            FamilySpec::DephasingPair {} => dephasing_pair_family(),
            FamilySpec::FixedPhase { phi0 } => fixed_phase_family(*phi0),
            FamilySpec::KlCodeword { codewords } => {
                let n = codewords.first().map_or(0, Vec::len);
                let reg = QubitRegister::new(n).map_err(CliError::config)?;
                let states = codewords
                    .iter()
                    .map(|bits| basis_state(reg, bits))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(CliError::config)?;
                kl_codeword_family(states).map_err(CliError::config)?
            }
        };
        match &self.alphabet.domain {
            None => Ok(fam),
            Some(d) => {
                let domain = d
                    .iter()
                    .map(|s| match s {
                        DomainSpec::Interval([lo, hi]) => ParamDomain::Interval { lo: *lo, hi: *hi },
                        DomainSpec::Discrete(v) => ParamDomain::Discrete(v.clone()),
                    })
                    .collect();
                fam.with_domain(domain).map_err(CliError::config)
            }
        }
    }

    pub fn space(&self, family: &AlphabetFamily) -> CliResult<Space> {
        match self.space {
            SpaceSpec::Fock { n_max } => {
                let n = match n_max {
                    Some(n) => n,
                    None => family
                        .auto_n_max()
                        .ok_or_else(|| CliError::Config("no automatic cutoff for this family".into()))?,
                };
                Ok(Space::Fock(FockSpace::with_n_max(n).map_err(CliError::config)?))
            }
            SpaceSpec::Qubits { n } => {
                let reg = QubitRegister::new(n).map_err(CliError::config)?;
                if let FamilySpec::KlCodeword { codewords } = &self.alphabet.family {
                    if codewords.iter().any(|c| c.len() != n) {
                        return Err(CliError::Config(format!("codewords must have {n} bits")));
                    }
                }
                Ok(Space::Qubits(reg))
            }
        }
    }

    pub fn sampler(&self) -> CliResult<SamplerStrategy> {
        Ok(match &self.alphabet.sampler {
            SamplerSpec::Grid { count } => SamplerStrategy::Grid { count: *count },
            SamplerSpec::UniformRandom { count } => SamplerStrategy::UniformRandom { count: *count, seed: self.alphabet.seed },
            SamplerSpec::Explicit { points } => SamplerStrategy::Explicit(points.clone()),
            SamplerSpec::Around { center, offsets } => {
                let points = offsets
                    .iter()
                    .map(|o| {
                        if o.len() != center.len() {
                            return Err(CliError::Config(format!(
                                "offset {o:?} has {} entries, center has {}",
                                o.len(),
                                center.len()
                            )));
                        }
                        Ok(center.iter().zip(o).map(|(c, d)| c + d).collect())
                    })
                    .collect::<CliResult<Vec<Vec<f64>>>>()?;
                SamplerStrategy::Explicit(points)
            }
        })
    }

    /// `n_mean` bounds the photon number of the sampled states; it only matters
    /// for amplitude damping without an explicit `k_max`.
    pub fn channel(&self, space: Space, n_mean: f64) -> CliResult<KrausChannel> {
        let need_fock = || space.fock().ok_or_else(|| CliError::Config("channel needs a fock space".into()));
        match &self.channel {
            ChannelSpec::SimplifiedLoss {} => Ok(simplified_loss(need_fock()?)),
            ChannelSpec::AmplitudeDamping { gamma, k_max } => {
                let fock = need_fock()?;
                let k = k_max.unwrap_or_else(|| default_k_max(*gamma, n_mean, fock));
                amplitude_damping(*gamma, fock, k).map_err(CliError::config)
            }
            ChannelSpec::CollectiveDephasing { p } => {
                if space.dim() != 4 {
                    return Err(CliError::Config("collective dephasing acts on two qubits".into()));
                }
                collective_dephasing(*p).map_err(CliError::config)
            }
            ChannelSpec::Pauli { terms } => {
                let reg = space
                    .qubits()
                    .ok_or_else(|| CliError::Config("Pauli channel needs a qubits space".into()))?;
                let ops = terms.iter().map(|t| pauli_term(reg, t)).collect::<CliResult<Vec<_>>>()?;
                custom_channel("pauli", ops).map_err(CliError::config)
            }
            ChannelSpec::Custom { ops } => {
                let d = space.dim();
                let mats = ops
                    .iter()
                    .map(|rows| {
                        if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                            return Err(CliError::Config(format!("custom Kraus operators must be {d}x{d}")));
                        }
                        Ok(CMatrix::from_fn(d, d, |r, c| c64(rows[r][c][0], rows[r][c][1])))
                    })
                    .collect::<CliResult<Vec<_>>>()?;
                custom_channel("custom", mats).map_err(CliError::config)
            }
        }
    }
}

fn pauli_term(reg: QubitRegister, term: &PauliTerm) -> CliResult<CMatrix> {
    if !(term.weight >= 0.0) {
        return Err(CliError::Config(format!("Pauli weight {} is negative", term.weight)));
    }
    if term.string.chars().count() != reg.n_qubits() {
        return Err(CliError::Config(format!(
            "Pauli string {:?} does not have {} sites",
            term.string,
            reg.n_qubits()
        )));
    }
    let mut op = CMatrix::identity(reg.dim(), reg.dim());
    for (site, ch) in term.string.chars().enumerate() {
        let which = match ch {
            'I' => continue,
            'X' => Pauli::X,
            'Y' => Pauli::Y,
            'Z' => Pauli::Z,
            other => return Err(CliError::Config(format!("unknown Pauli letter {other:?}"))),
        };
        op = op * pauli_op(reg, which, site).map_err(CliError::config)?;
    }
    Ok(op * c64(term.weight.sqrt(), 0.0))
}
