//! One scenario run: sample, solve the factorization, optionally build and
//! score the recovery, and assemble the report.

use std::time::Instant;

use log::{debug, info};
use nlqec::alphabets::{sample_parameters, FamilyKind, SampleSet};
use nlqec::criterion::{
    approximate_metrics, build_v_tensor, kl_reduction_check, necessary_condition_check, solve_factorization,
    CriterionSolution, SolverOptions,
};
use nlqec::hilbert::{truncation_defect, Space, GUARD_BAND};
use nlqec::recovery::{
    branch_fidelity, build_recovery, mixed_state_recovery_check, recovery_fidelity, IsometryMode, RecoveryChannel,
    RecoveryOptions,
};
use nlqec::channels::KrausChannel;

use crate::config::ScenarioConfig;
use crate::error::{CliError, CliResult, EXIT_APPROXIMATE, EXIT_EXACT, EXIT_FAIL};
use crate::report::{
    cmatrix, ApproximateSummary, ChannelSection, CriterionSection, Diagnostics, FidelityEntry, GammaAlternativeEntry,
    KlSummary, NecessarySummary, RecoverySection, Report, SampleSection, ToolInfo, Verdict, VerdictClass,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Check,
    Recover,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Recover => "recover",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub exit_code: u8,
}

pub fn classify(residual: f64, accept: f64, ceiling: f64) -> (VerdictClass, u8) {
    if residual <= accept {
        (VerdictClass::Exact, EXIT_EXACT)
    } else if residual <= ceiling {
        (VerdictClass::Approximate, EXIT_APPROXIMATE)
    } else {
        (VerdictClass::Fail, EXIT_FAIL)
    }
}

pub fn run(cfg: &ScenarioConfig, command: Command) -> CliResult<Outcome> {
    let start = Instant::now();
    let family = cfg.family()?;
    let space = cfg.space(&family)?;
    let strategy = cfg.sampler()?;
    info!("{}: sampling {} in dimension {}", cfg.name, family.name, space.dim());
    let samples = sample_parameters(&family, &strategy, space, cfg.alphabet.rank_tol).map_err(CliError::pipeline)?;
    let channel = cfg.channel(space, max_photon_number(&samples, space))?;
    debug!("{} samples kept, {} pruned, {} Kraus operators", samples.len(), samples.pruned.len(), channel.len());

    let opts = SolverOptions::from(&cfg.solver);
    let v = build_v_tensor(&channel, &samples).map_err(CliError::pipeline)?;
    let sol = solve_factorization(&v, &opts).map_err(CliError::pipeline)?;
    let nc = necessary_condition_check(&v, &opts).map_err(CliError::pipeline)?;
    let approx = approximate_metrics(&v, &sol);
    let kl = match &family.kind {
        FamilyKind::KlCodeword { codewords } => {
            let r = kl_reduction_check(codewords, &channel, &opts, samples.len(), cfg.alphabet.seed)
                .map_err(CliError::pipeline)?;
            Some(KlSummary {
                codeword_dependence: r.codeword_dependence,
                offdiag_defect: r.offdiag_defect,
                kl_holds: r.kl_holds,
                nlqec_residual: r.nlqec_residual,
                n_blocks: r.n_blocks,
                c_spread: r.c_spread,
                holds: r.holds,
            })
        }
        _ => None,
    };

    let (class, exit_code) = classify(sol.residual_rel, cfg.accept_residual, cfg.approx_ceiling);
    info!("{}: residual_rel {:.3e} ({class:?})", cfg.name, sol.residual_rel);
    let recovery = match (command, class) {
        (Command::Recover, VerdictClass::Exact | VerdictClass::Approximate) => {
            Some(recovery_section(cfg, &sol, &channel, &samples)?)
        }
        _ => None,
    };

    let report = Report {
        tool: ToolInfo::default(),
        command: command.name().into(),
        config: cfg.clone(),
        samples: SampleSection {
            params: samples.params.clone(),
            pruned: samples.pruned.clone(),
            seed: samples.seed,
            dim: samples.dim(),
            truncation_defects: match space {
                Space::Fock(_) => (0..samples.len()).map(|i| truncation_defect(&samples.state(i), GUARD_BAND)).collect(),
                Space::Qubits(_) => Vec::new(),
            },
        },
        channel: ChannelSection {
            label: channel.label.clone(),
            n_ops: channel.len(),
            tp_defect: channel.tp_defect,
            trace_preserving: channel.is_trace_preserving(),
        },
        criterion: criterion_section(&sol),
        diagnostics: Diagnostics {
            necessary_condition: NecessarySummary {
                max_violation: nc.max_violation,
                skipped_pairs: nc.skipped_pairs,
                psd_samples: nc.psd_samples,
                psd_min_eig_rel: nc.psd_min_eig_rel,
                psd_holds: nc.psd_holds,
            },
            approximate: ApproximateSummary {
                max_abs_epsilon: approx.max_abs_epsilon,
                max_ratio: approx.max_ratio,
                orthogonality_defect: approx.orthogonality_defect,
            },
            kl,
        },
        verdict: Verdict { class, exit_code, accept_residual: cfg.accept_residual, approx_ceiling: cfg.approx_ceiling },
        recovery,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok(Outcome { report, exit_code })
}

/// Largest `<n>` over the sampled states; zero on qubits.
fn max_photon_number(samples: &SampleSet, space: Space) -> f64 {
    if space.fock().is_none() {
        return 0.0;
    }
    (0..samples.len())
        .map(|i| samples.states.column(i).iter().enumerate().map(|(n, z)| n as f64 * z.norm_sqr()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn criterion_section(sol: &CriterionSolution) -> CriterionSection {
    CriterionSection {
        residual_rel: sol.residual_rel,
        gamma: sol.gamma.clone(),
        blocks: sol.blocks.clone(),
        c: cmatrix(&sol.c),
        u: cmatrix(&sol.u),
        zero_mask: sol.zero_mask.clone(),
        reference_sample: sol.reference_sample,
        dichotomy_violations: sol.dichotomy_violations.clone(),
        converged: sol.converged,
        iterations: sol.iterations,
        degenerate_spectrum: sol.degenerate_spectrum,
        used_joint_diagonalization: sol.used_joint_diagonalization,
        gamma_flips: sol.gamma_flips,
        gamma_alternatives: sol
            .gamma_alternatives
            .iter()
            .map(|a| GammaAlternativeEntry { gamma: a.gamma.clone(), residual_rel: a.residual_rel })
            .collect(),
    }
}

fn recovery_section(
    cfg: &ScenarioConfig,
    sol: &CriterionSolution,
    channel: &KrausChannel,
    samples: &SampleSet,
) -> CliResult<RecoverySection> {
    let opts = RecoveryOptions::from(&cfg.recovery);
    let rec = build_recovery(sol, channel, samples, &opts).map_err(CliError::pipeline)?;
    let mixed_ops = channel.transform(&sol.u).map_err(CliError::pipeline)?;
    let mut fidelities = Vec::with_capacity(samples.len());
    for i in 0..samples.len() {
        let psi = samples.state(i);
        let f = recovery_fidelity(&psi, channel, &rec).map_err(CliError::pipeline)?;
        fidelities.push(FidelityEntry {
            params: samples.params[i].clone(),
            fidelity: f.fidelity,
            probability: f.probability,
            channel_trace: f.channel_trace,
            recovered_trace: f.recovered_trace,
            branch: branches(&psi, &mixed_ops, &rec),
        });
    }
    let n = fidelities.len() as f64;
    let min_fidelity = fidelities.iter().map(|f| f.fidelity).fold(f64::INFINITY, f64::min);
    let mean_fidelity = fidelities.iter().map(|f| f.fidelity).sum::<f64>() / n;
    let probability_defect = fidelities.iter().map(|f| (1.0 - f.probability).abs()).fold(0.0, f64::max);
    let (trace_gap, mixed_state_defect) = if channel.is_trace_preserving() {
        let gap = fidelities.iter().map(|f| (f.recovered_trace - f.channel_trace).abs()).fold(0.0, f64::max);
        let weights = vec![1.0; samples.len()];
        let mixed = mixed_state_recovery_check(&rec, channel, &weights, samples).map_err(CliError::pipeline)?;
        (Some(gap), Some(mixed.defect))
    } else {
        (None, None)
    };
    Ok(RecoverySection {
        mode: match rec.mode {
            IsometryMode::SampledSpan => "sampled_span".into(),
            IsometryMode::OperatorPolar => "operator_polar".into(),
        },
        n_blocks: rec.blocks.len(),
        includes_completion: rec.includes_completion(),
        code_rank: rec.code.rank(),
        completeness_defect: rec.completeness_defect,
        support_completeness_defect: rec.support_completeness_defect,
        projector_overlap: rec.projector_overlap,
        projector_sum_norm: rec.projector_sum_norm,
        max_lambda_defect: rec.max_lambda_defect(),
        fidelities,
        min_fidelity,
        mean_fidelity,
        probability_defect,
        trace_gap,
        mixed_state_defect,
    })
}

/// Branch fidelity for each mixed operator `F_n`; `None` for vanishing branches.
fn branches(psi: &nlqec::CVector, mixed: &KrausChannel, rec: &RecoveryChannel) -> Vec<Option<f64>> {
    mixed
        .ops
        .iter()
        .enumerate()
        .map(|(n, op)| rec.block_of(n).and_then(|q| branch_fidelity(psi, op, rec, q).ok()))
        .collect()
}
