//! Machine-readable run reports.
//!
//! Floats are written as `{:.16e}` (17 significant digits) so that every value
//! round-trips exactly. Non-finite values become `null`.

use std::io;

use nlqec::CMatrix;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::config::ScenarioConfig;

/// `[re, im]`.
pub type Cx = [f64; 2];

pub fn cx(z: Complex64) -> Cx {
    [z.re, z.im]
}

/// Row-major nested arrays.
pub fn cmatrix(m: &CMatrix) -> Vec<Vec<Cx>> {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| cx(m[(r, c)])).collect()).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: ToolInfo,
    pub command: String,
    pub config: ScenarioConfig,
    pub samples: SampleSection,
    pub channel: ChannelSection,
    pub criterion: CriterionSection,
    pub diagnostics: Diagnostics,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovery: Option<RecoverySection>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

impl Default for ToolInfo {
    fn default() -> Self {
        ToolInfo { name: "nlqec", version: env!("CARGO_PKG_VERSION") }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleSection {
    pub params: Vec<Vec<f64>>,
    pub pruned: Vec<Vec<f64>>,
    pub seed: Option<u64>,
    pub dim: usize,
    /// Weight in the top guard band of each sampled Fock state; empty for qubits.
    pub truncation_defects: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelSection {
    pub label: String,
    pub n_ops: usize,
    pub tp_defect: f64,
    pub trace_preserving: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionSection {
    pub residual_rel: f64,
    pub gamma: Vec<Vec<u8>>,
    pub blocks: Vec<Vec<usize>>,
    /// `c[n][i]`: error `n`, sample `i`.
    pub c: Vec<Vec<Cx>>,
    pub u: Vec<Vec<Cx>>,
    pub zero_mask: Vec<bool>,
    pub reference_sample: usize,
    pub dichotomy_violations: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
    pub degenerate_spectrum: bool,
    pub used_joint_diagonalization: bool,
    pub gamma_flips: usize,
    pub gamma_alternatives: Vec<GammaAlternativeEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaAlternativeEntry {
    pub gamma: Vec<Vec<u8>>,
    pub residual_rel: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub necessary_condition: NecessarySummary,
    pub approximate: ApproximateSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kl: Option<KlSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NecessarySummary {
    pub max_violation: f64,
    pub skipped_pairs: usize,
    pub psd_samples: Vec<usize>,
    pub psd_min_eig_rel: f64,
    pub psd_holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproximateSummary {
    pub max_abs_epsilon: f64,
    pub max_ratio: f64,
    pub orthogonality_defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KlSummary {
    pub codeword_dependence: f64,
    pub offdiag_defect: f64,
    pub kl_holds: bool,
    pub nlqec_residual: Option<f64>,
    pub n_blocks: Option<usize>,
    pub c_spread: Option<f64>,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictClass {
    Exact,
    Approximate,
    Fail,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub class: VerdictClass,
    pub exit_code: u8,
    pub accept_residual: f64,
    pub approx_ceiling: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoverySection {
    pub mode: String,
    pub n_blocks: usize,
    pub includes_completion: bool,
    pub code_rank: usize,
    pub completeness_defect: f64,
    pub support_completeness_defect: f64,
    pub projector_overlap: f64,
    pub projector_sum_norm: f64,
    pub max_lambda_defect: f64,
    pub fidelities: Vec<FidelityEntry>,
    pub min_fidelity: f64,
    pub mean_fidelity: f64,
    /// `max_i |1 - tr R(E(rho_i)) / tr E(rho_i)|`.
    pub probability_defect: f64,
    /// Only for trace-preserving channels: `max_i |tr R(E(rho_i)) - tr E(rho_i)|`.
    pub trace_gap: Option<f64>,
    /// Only for trace-preserving channels, equal-weight mixture of the samples.
    pub mixed_state_defect: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FidelityEntry {
    pub params: Vec<f64>,
    pub fidelity: f64,
    pub probability: f64,
    pub channel_trace: f64,
    pub recovered_trace: f64,
    /// `branch[n]`: fidelity of `R_q F_n |psi>` with `|psi>` for the block `q`
    /// holding `F_n`; `null` when the branch vanishes.
    pub branch: Vec<Option<f64>>,
}

/// Pretty printing with fixed scientific notation for floats.
pub struct SciFormatter(PrettyFormatter<'static>);

impl Default for SciFormatter {
    fn default() -> Self {
        SciFormatter(PrettyFormatter::new())
    }
}

impl Formatter for SciFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        write!(w, "{value:.8e}")
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serialize with [`SciFormatter`]; the output ends with a newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter::default());
    value.serialize(&mut ser).expect("report types serialize infallibly");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

/// Format a float the way reports do, for CSV cells.
pub fn sci(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nlqec::numkit::c64;

    #[test]
    fn floats_keep_seventeen_digits() {
        let text = to_json(&vec![0.5, 1.0 / 3.0]);
        assert!(text.contains("5.0000000000000000e-1"));
        assert!(text.contains("3.3333333333333331e-1"));
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, vec![0.5, 1.0 / 3.0]);
    }

    #[test]
    fn non_finite_is_null_and_integers_stay_integers() {
        let text = to_json(&(f64::NAN, 3usize));
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v[0].is_null());
        assert_eq!(v[1], serde_json::json!(3));
    }

    #[test]
    fn matrices_are_row_major_pairs() {
        let m = CMatrix::from_row_slice(2, 2, &[c64(1.0, 2.0), c64(3.0, 0.0), c64(0.0, -1.0), c64(4.0, 5.0)]);
        assert_eq!(cmatrix(&m), vec![vec![[1.0, 2.0], [3.0, 0.0]], vec![[0.0, -1.0], [4.0, 5.0]]]);
    }
}
