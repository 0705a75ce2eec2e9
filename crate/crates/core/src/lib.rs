//! Consensus and non-consensus motions of homogeneous linear multi-agent
//! systems
//!
//! ```text
//! ẋᵢ = A xᵢ + F Σⱼ wᵢⱼ (xⱼ − xᵢ),   i = 1..N
//! ```
//!
//! * [`graph`]: interaction digraphs, Laplacians, spanning trees, independent groups
//! * [`spectral`]: Laplacian spectra and Hurwitz verdicts on `A − λF`
//! * [`classify`]: consensus decision and the three non-consensus classes
//! * [`clustering`]: cluster prediction from the `Ψ = TQ` row pattern
//! * [`simulate`]: RK4 integration of the stacked system and empirical detectors

pub mod classify;
pub mod clustering;
pub mod graph;
pub mod simulate;
pub mod spectral;

pub use classify::{GroupVerdict, LimitDynamics, MotionClass, MotionLabel};
pub use clustering::ClusterPrediction;
pub use graph::{Arc, VertexSet, WeightedDigraph};
pub use simulate::{StackedSystem, TrajectoryRecord};
pub use spectral::{ComplexSpectrum, HurwitzVerdict, SpectralReport, C64};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] graph::GraphError),
    #[error(transparent)]
    Spectral(#[from] spectral::SpectralError),
    #[error(transparent)]
    Cluster(#[from] clustering::ClusterError),
    #[error(transparent)]
    Simulation(#[from] simulate::SimError),
}
