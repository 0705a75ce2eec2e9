//! Consensus decision and classification of non-consensus motions.
//!
//! | all nonzero-λ shifts Hurwitz | A Hurwitz | spanning tree | label          |
//! |------------------------------|-----------|---------------|----------------|
//! | yes                          | yes       | either        | StableTrivial  |
//! | yes                          | no        | yes           | Consensus      |
//! | yes                          | no        | no            | Class3         |
//! | no                           | either    | yes           | Class1         |
//! | no                           | either    | no            | Class2         |

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::graph::{VertexSet, WeightedDigraph};
use crate::spectral::{self, ComplexSpectrum, ShiftEntry, SpectralReport};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MotionLabel {
    /// All agents agree on a nontrivial trajectory.
    Consensus,
    /// Spanning tree present, some shifted pencil not Hurwitz.
    Class1,
    /// No spanning tree, some shifted pencil not Hurwitz.
    Class2,
    /// No spanning tree, A unstable, every shifted pencil Hurwitz.
    Class3,
    /// A and every shifted pencil Hurwitz: everyone agrees at the origin.
    StableTrivial,
}

impl MotionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            MotionLabel::Consensus => "Consensus",
            MotionLabel::Class1 => "Class1",
            MotionLabel::Class2 => "Class2",
            MotionLabel::Class3 => "Class3",
            MotionLabel::StableTrivial => "StableTrivial",
        }
    }

    /// Label for one combination of the three deciding facts.
    pub fn from_conditions(a_hurwitz: bool, spanning: bool, all_shifts_hurwitz: bool) -> Self {
        match (all_shifts_hurwitz, a_hurwitz, spanning) {
            (true, true, _) => MotionLabel::StableTrivial,
            (true, false, true) => MotionLabel::Consensus,
            (true, false, false) => MotionLabel::Class3,
            (false, _, true) => MotionLabel::Class1,
            (false, _, false) => MotionLabel::Class2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub has_spanning_tree: bool,
    pub a_hurwitz: bool,
    /// Hurwitz flag of `A − λF` for every nonzero Laplacian eigenvalue.
    pub nonzero_shift_verdicts: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionClass {
    pub label: MotionLabel,
    pub evidence: Evidence,
}

/// Consensus criterion. With A unstable the graph must contain a spanning
/// tree and every nonzero-λ shift must be Hurwitz; with A Hurwitz the shift
/// condition alone decides.
pub fn decide_consensus(report: &SpectralReport, spanning: bool) -> bool {
    let shifts_ok = report.all_nonzero_shifts_hurwitz();
    if report.a_verdict.is_hurwitz {
        shifts_ok
    } else {
        spanning && shifts_ok
    }
}

pub fn classify_motion(report: &SpectralReport, spanning: bool) -> MotionClass {
    let evidence = Evidence {
        has_spanning_tree: spanning,
        a_hurwitz: report.a_verdict.is_hurwitz,
        nonzero_shift_verdicts: report.nonzero_shift_verdicts(),
    };
    let all = evidence.nonzero_shift_verdicts.iter().all(|&v| v);
    MotionClass {
        label: MotionLabel::from_conditions(evidence.a_hurwitz, spanning, all),
        evidence,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LimitDynamics {
    /// Members approach a common solution of `ξ̇ = Aξ`.
    ConvergesToAutonomous,
    Indefinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupVerdict {
    pub group: VertexSet,
    pub agrees: bool,
    pub limit_dynamics: LimitDynamics,
    /// Spectrum of the group's induced Laplacian.
    pub group_spectrum: ComplexSpectrum,
    /// Shifted pencils over the group spectrum.
    pub shifts: Vec<ShiftEntry>,
}

/// Agreement verdict for every independent group of `g`.
///
/// A group agrees iff `A − λF` is Hurwitz for every nonzero eigenvalue of its
/// own Laplacian; it then tracks a solution of `ξ̇ = Aξ`.
pub fn analyze_groups(
    a: &DMatrix<f64>,
    f: &DMatrix<f64>,
    g: &WeightedDigraph,
) -> Result<Vec<GroupVerdict>, Error> {
    g.independent_groups()
        .into_iter()
        .map(|group| {
            let l = g.induced_laplacian(&group)?;
            let report = spectral::spectral_report(a, f, &l)?;
            let agrees = report.all_nonzero_shifts_hurwitz();
            Ok(GroupVerdict {
                group,
                agrees,
                limit_dynamics: if agrees {
                    LimitDynamics::ConvergesToAutonomous
                } else {
                    LimitDynamics::Indefinite
                },
                group_spectrum: report.laplacian_spectrum,
                shifts: report.entries,
            })
        })
        .collect()
}

/// Agents outside every independent group; their affiliation depends on the
/// competing pull of the groups upstream and is left undetermined.
pub fn undetermined_agents(n: usize, groups: &[GroupVerdict]) -> Vec<usize> {
    (1..=n)
        .filter(|&v| !groups.iter().any(|g| g.group.contains(v)))
        .collect()
}

/// Everything the theory says about one system.
#[derive(Debug, Clone)]
pub struct SystemAnalysis {
    pub laplacian: DMatrix<f64>,
    pub report: SpectralReport,
    pub has_spanning_tree: bool,
    pub consensus: bool,
    pub motion: MotionClass,
    pub groups: Vec<GroupVerdict>,
    pub undetermined: Vec<usize>,
}

pub fn analyze_system(
    a: &DMatrix<f64>,
    f: &DMatrix<f64>,
    g: &WeightedDigraph,
) -> Result<SystemAnalysis, Error> {
    let laplacian = g.laplacian();
    let report = spectral::spectral_report(a, f, &laplacian)?;
    let has_spanning_tree = g.has_spanning_tree();
    let consensus = decide_consensus(&report, has_spanning_tree);
    let motion = classify_motion(&report, has_spanning_tree);
    let groups = analyze_groups(a, f, g)?;
    let undetermined = undetermined_agents(g.n(), &groups);
    Ok(SystemAnalysis {
        laplacian,
        report,
        has_spanning_tree,
        consensus,
        motion,
        groups,
        undetermined,
    })
}
