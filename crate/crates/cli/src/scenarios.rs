//! Built-in scenarios, one per worked example.

use crate::config::{
    AlphabetSpec, ChannelSpec, DomainSpec, FamilySpec, ModeSpec, OutputSpec, PauliTerm, RecoverySpec, SamplerSpec,
    ScenarioConfig, SolverSpec, SpaceSpec, SweepAxis, SweepSpec, DEFAULT_ACCEPT_RESIDUAL, DEFAULT_APPROX_CEILING,
};

pub const NAMES: [&str; 8] = [
    "example1_coherent",
    "example2_dephasing_dfs",
    "example2_dephasing_fixedphase",
    "example3_squeezed_small_alpha",
    "example3_squeezed_large_alpha",
    "example4_cat",
    "appendixF_damping",
    "kl_repetition3",
];

fn base(name: &str, space: SpaceSpec, alphabet: AlphabetSpec, channel: ChannelSpec) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        space,
        alphabet,
        channel,
        solver: SolverSpec::default(),
        recovery: RecoverySpec::default(),
        accept_residual: DEFAULT_ACCEPT_RESIDUAL,
        approx_ceiling: DEFAULT_APPROX_CEILING,
        outputs: OutputSpec::default(),
    }
}

fn alphabet(family: FamilySpec, domain: Option<Vec<DomainSpec>>, sampler: SamplerSpec) -> AlphabetSpec {
    AlphabetSpec { family, domain, sampler, seed: 0, rank_tol: nlqec::alphabets::DEFAULT_RANK_TOL }
}

fn real_line(points: &[f64]) -> Vec<Vec<f64>> {
    points.iter().map(|&a| vec![a, 0.0]).collect()
}

fn sweep(path: &str, name: &str, values: Vec<f64>) -> OutputSpec {
    OutputSpec {
        report: None,
        sweep: Some(SweepSpec {
            axes: vec![SweepAxis { path: path.into(), values, name: Some(name.into()) }],
            csv: None,
        }),
    }
}

pub fn builtin(name: &str) -> Option<ScenarioConfig> {
    let qubits = |n| SpaceSpec::Qubits { n };
    let cfg = match name {
        "example1_coherent" => base(
            name,
            SpaceSpec::Fock { n_max: Some(60) },
            alphabet(
                FamilySpec::Coherent {},
                Some(vec![DomainSpec::Interval([0.0, 3.0]), DomainSpec::Interval([0.0, 0.0])]),
                SamplerSpec::Explicit { points: real_line(&[1.0, 1.5, 2.0, 2.5]) },
            ),
            ChannelSpec::SimplifiedLoss {},
        ),
        "example2_dephasing_dfs" => base(
            name,
            qubits(2),
            alphabet(FamilySpec::DephasingPair {}, None, SamplerSpec::default()),
            ChannelSpec::CollectiveDephasing { p: 0.5 },
        ),
        "example2_dephasing_fixedphase" => base(
            name,
            qubits(2),
            alphabet(FamilySpec::FixedPhase { phi0: 0.7 }, None, SamplerSpec::default()),
            ChannelSpec::CollectiveDephasing { p: 0.5 },
        ),
        "example3_squeezed_small_alpha" => base(
            name,
            SpaceSpec::Fock { n_max: None },
            alphabet(
                FamilySpec::SqueezedCoherent { xi: [1.0, 0.0] },
                Some(vec![DomainSpec::Interval([0.5, 2.0]), DomainSpec::Interval([0.0, 0.0])]),
                SamplerSpec::Explicit { points: real_line(&[0.75, 1.0, 1.25]) },
            ),
            ChannelSpec::SimplifiedLoss {},
        ),
        "example3_squeezed_large_alpha" => {
            let mut cfg = base(
                name,
                SpaceSpec::Fock { n_max: None },
                alphabet(
                    FamilySpec::SqueezedCoherent { xi: [0.5, 0.0] },
                    Some(vec![DomainSpec::Interval([10.0, 11.5]), DomainSpec::Interval([0.0, 0.0])]),
                    SamplerSpec::Explicit { points: real_line(&[10.0, 10.5, 11.0, 11.5]) },
                ),
                ChannelSpec::SimplifiedLoss {},
            );
            cfg.outputs = sweep("alphabet.family.squeezed_coherent.xi.0", "r", (1..=10).map(|k| k as f64 / 10.0).collect());
            cfg
        }
        "example4_cat" => {
            let mut cfg = base(
                name,
                SpaceSpec::Fock { n_max: None },
                alphabet(
                    FamilySpec::EvenCat { half_plane_margin: 1.5 },
                    Some(vec![DomainSpec::Interval([1.5, 8.5]), DomainSpec::Interval([-1.0, 1.0])]),
                    SamplerSpec::Around {
                        center: vec![4.0, 0.0],
                        offsets: vec![vec![0.0, 0.0], vec![0.25, 0.0], vec![0.0, 0.25]],
                    },
                ),
                ChannelSpec::SimplifiedLoss {},
            );
            cfg.recovery.mode = ModeSpec::OperatorPolar;
            cfg.outputs = sweep("alphabet.sampler.around.center.0", "alpha", vec![2.0, 4.0, 6.0, 8.0]);
            cfg
        }
        "appendixF_damping" => base(
            name,
            SpaceSpec::Fock { n_max: None },
            alphabet(
                FamilySpec::Coherent {},
                Some(vec![DomainSpec::Interval([0.5, 1.5]), DomainSpec::Interval([0.0, 0.0])]),
                SamplerSpec::Explicit { points: real_line(&[1.0, 1.25]) },
            ),
            ChannelSpec::AmplitudeDamping { gamma: 0.99, k_max: None },
        ),
        "kl_repetition3" => {
            let mut terms = vec![PauliTerm { weight: 0.25, string: "III".into() }];
            terms.extend(["XII", "IXI", "IIX"].map(|s| PauliTerm { weight: 0.25, string: s.into() }));
            let mut cfg = base(
                name,
                qubits(3),
                alphabet(
                    FamilySpec::KlCodeword { codewords: vec![vec![0, 0, 0], vec![1, 1, 1]] },
                    None,
                    SamplerSpec::UniformRandom { count: 8 },
                ),
                ChannelSpec::Pauli { terms },
            );
            cfg.alphabet.seed = 7;
            cfg
        }
        _ => return None,
    };
    Some(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::to_json;

    #[test]
    fn every_name_resolves_and_round_trips() {
        for name in NAMES {
            let cfg = builtin(name).unwrap();
            assert_eq!(cfg.name, name);
            cfg.validate().unwrap();
            let back = ScenarioConfig::from_json(&to_json(&cfg)).unwrap();
            assert_eq!(back, cfg, "{name}");
        }
        assert!(builtin("nope").is_none());
    }
}
