//! Report documents written by the commands. Every report deserializes back
//! into the same type with unknown fields rejected.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use swarm_core::classify::{GroupVerdict, LimitDynamics, MotionClass, SystemAnalysis};
use swarm_core::spectral::ShiftEntry;
use swarm_core::{ComplexSpectrum, MotionLabel, VertexSet, C64};

/// Complex number as `[re, im]`.
pub type Complex = [f64; 2];

fn pair(z: C64) -> Complex {
    [z.re, z.im]
}

fn spectrum(s: &ComplexSpectrum) -> Vec<Complex> {
    s.values().iter().copied().map(pair).collect()
}

fn blocks(p: &[VertexSet]) -> Vec<Vec<usize>> {
    p.iter().map(|s| s.members().to_vec()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftReport {
    pub lambda: Complex,
    pub is_zero: bool,
    pub spectrum: Vec<Complex>,
    pub max_real_part: f64,
    pub hurwitz: bool,
}

impl From<&ShiftEntry> for ShiftReport {
    fn from(e: &ShiftEntry) -> Self {
        Self {
            lambda: pair(e.lambda),
            is_zero: e.is_zero,
            spectrum: spectrum(&e.shifted),
            max_real_part: e.verdict.max_real_part,
            hurwitz: e.verdict.is_hurwitz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Limit {
    ConvergesToAutonomous,
    Indefinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupReport {
    pub members: Vec<usize>,
    pub agrees: bool,
    pub limit: Limit,
    pub spectrum: Vec<Complex>,
    pub shifts: Vec<ShiftReport>,
}

impl From<&GroupVerdict> for GroupReport {
    fn from(g: &GroupVerdict) -> Self {
        Self {
            members: g.group.members().to_vec(),
            agrees: g.agrees,
            limit: match g.limit_dynamics {
                LimitDynamics::ConvergesToAutonomous => Limit::ConvergesToAutonomous,
                LimitDynamics::Indefinite => Limit::Indefinite,
            },
            spectrum: spectrum(&g.group_spectrum),
            shifts: g.shifts.iter().map(ShiftReport::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeReport {
    pub n: usize,
    pub d: usize,
    pub laplacian: Vec<Vec<f64>>,
    pub laplacian_spectrum: Vec<Complex>,
    pub a_spectrum: Vec<Complex>,
    pub a_hurwitz: bool,
    pub shifts: Vec<ShiftReport>,
    pub has_spanning_tree: bool,
    pub consensus: bool,
    pub groups: Vec<GroupReport>,
    pub undetermined: Vec<usize>,
}

impl AnalyzeReport {
    pub fn new(n: usize, d: usize, s: &SystemAnalysis) -> Self {
        Self {
            n,
            d,
            laplacian: s
                .laplacian
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            laplacian_spectrum: spectrum(&s.report.laplacian_spectrum),
            a_spectrum: spectrum(&s.report.a_spectrum),
            a_hurwitz: s.report.a_verdict.is_hurwitz,
            shifts: s.report.entries.iter().map(ShiftReport::from).collect(),
            has_spanning_tree: s.has_spanning_tree,
            consensus: s.consensus,
            groups: s.groups.iter().map(GroupReport::from).collect(),
            undetermined: s.undetermined.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceReport {
    pub has_spanning_tree: bool,
    pub a_hurwitz: bool,
    pub nonzero_shift_hurwitz: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyReport {
    pub label: MotionLabel,
    pub consensus: bool,
    pub evidence: EvidenceReport,
}

impl ClassifyReport {
    pub fn new(m: &MotionClass, consensus: bool) -> Self {
        Self {
            label: m.label,
            consensus,
            evidence: EvidenceReport {
                has_spanning_tree: m.evidence.has_spanning_tree,
                a_hurwitz: m.evidence.a_hurwitz,
                nonzero_shift_hurwitz: m.evidence.nonzero_shift_verdicts.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterReport {
    pub pairs: Vec<[usize; 2]>,
    pub clusters: Vec<Vec<usize>>,
    pub alpha: usize,
    pub tol: f64,
    pub t_residual: f64,
    /// Trials with other feasible `T` and rescaled eigenvectors that changed
    /// the verdict.
    pub perturbation_flips: usize,
    pub perturbation_trials: usize,
}

impl ClusterReport {
    pub fn new(
        a: &swarm_core::clustering::ClusterAnalysis,
        tol: f64,
        stability: &swarm_core::clustering::StabilityReport,
    ) -> Self {
        Self {
            pairs: a
                .prediction
                .agreeing_pairs
                .iter()
                .map(|&(i, j)| [i, j])
                .collect(),
            clusters: blocks(&a.prediction.partition),
            alpha: a.ordering.alpha,
            tol,
            t_residual: a.t_residual,
            perturbation_flips: stability.flips,
            perturbation_trials: stability.trials,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationReport {
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub method: String,
    pub samples: usize,
    pub final_time: f64,
    pub truncated: bool,
    pub rel_tol: f64,
    pub window_fraction: f64,
    pub clusters: Vec<Vec<usize>>,
    pub csv: Option<String>,
    pub svg: Option<String>,
}

pub fn partition(p: &[VertexSet]) -> Vec<Vec<usize>> {
    blocks(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupCheck {
    pub members: Vec<usize>,
    pub predicted_agree: bool,
    pub observed_agree: bool,
    /// Final over peak value of `maxᵢ ‖ẋᵢ − Axᵢ‖ / maxᵢ ‖xᵢ‖`, for agreeing
    /// groups.
    pub residual_ratio: Option<f64>,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyReport {
    pub label: MotionLabel,
    pub horizon: f64,
    pub horizon_source: HorizonSource,
    pub predicted_clusters: Option<Vec<Vec<usize>>>,
    pub prediction_note: Option<String>,
    pub empirical_clusters: Vec<Vec<usize>>,
    pub groups: Vec<GroupCheck>,
    pub simulation: SimulationReport,
    pub agreement: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonSource {
    /// Given with `--t-end`.
    Flag,
    /// Long enough for the slowest agreeing mode to settle.
    Derived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorReport {
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub path: Option<String>,
}

/// Rounds every number in `v` to `digits` decimals.
pub fn round_numbers(v: &mut Value, digits: u32) {
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                let x = n.as_f64().expect("f64 number");
                let p = 10f64.powi(digits as i32);
                let r = (x * p).round() / p;
                // avoid "-0.0"
                let r = if r == 0.0 { 0.0 } else { r };
                if let Some(m) = serde_json::Number::from_f64(r) {
                    *n = m;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|x| round_numbers(x, digits)),
        Value::Object(map) => map.values_mut().for_each(|x| round_numbers(x, digits)),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn rounding_touches_only_floats() {
        let mut v = json!({"a": [1.23456, -0.0001, 7], "b": {"c": 3.96489}, "s": "x"});
        round_numbers(&mut v, 2);
        assert_eq!(v, json!({"a": [1.23, 0.0, 7], "b": {"c": 3.96}, "s": "x"}));
    }

    #[test]
    fn error_report_omits_missing_path() {
        let e = ErrorReport {
            kind: "spec".into(),
            message: "m".into(),
            path: None,
        };
        assert_eq!(
            serde_json::to_string(&e).unwrap(),
            r#"{"kind":"spec","message":"m"}"#
        );
    }
}
