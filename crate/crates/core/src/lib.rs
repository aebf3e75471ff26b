//! Multi-dimensional hierarchical orthogonal matching pursuit.
//!
//! Greedy sparse recovery of multipath channels whose atom-selection step
//! replaces the exhaustive search over a fine dictionary with a coarse-to-fine
//! search over sinc-modulated meta-atoms, one dimension at a time.

pub mod dictionary;
pub mod error;
pub mod experiments;
pub mod hierarchical_search;
pub mod linalg;
pub mod opcount;
pub mod recovery;
pub mod signal_model;

pub type C64 = num_complex::Complex64;

pub use dictionary::{meta_atom, Dictionary, MetaAtomSet};
pub use error::{Error, Result};
pub use hierarchical_search::{
    hsearch_1d, hsearch_tensor, HSearchConfig, HSearchOutcome, Reduction,
};
pub use opcount::{
    predicted_correlations, predicted_selection_mults, OpCounter, Resolution, SelectionMethod,
};
pub use recovery::{homp, mhomp, momp, mp, omp, omp_kronecker, RecoveryResult, StoppingRule};
pub use signal_model::{ObservationGrid, Path, PathSet, TargetDomain};
