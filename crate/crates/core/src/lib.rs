//! Observability experiments for Schrödinger waves on the torus `𝕋^d`:
//! integer lattice geometry, paraboloid cluster decompositions, space-time
//! spectral fields, Duhamel operators with periodized cutoffs, and Gram-matrix
//! observability probes.

pub mod clusters;
pub mod duhamel;
pub mod error;
pub mod lattice;
pub mod observability;
pub mod report;
pub mod spectral;
pub mod tolerances;

pub use clusters::{
    decompose, neighborhoods, Cluster, ClusterDecomposition, ClusterKind, ClusterStats,
    NeighborhoodSplit, SigmaPoint,
};
pub use duhamel::{CutoffSpec, PotentialSpec, SolveOptions, SolveReport, TemporalSeries};
pub use error::{Error, Result};
pub use lattice::{
    hnf_canonicalize, orbit_census, AffineSublattice, IntVector, OrbitCensus, Sublattice,
};
pub use observability::{Multiplier, MultiplierSpec, ObservabilityReport, ObservationSetup};
pub use spectral::{FreqPoint, FreqSet, Grid, SpectrumField};
