//! Stellar-rank robustness toolkit: Fock-space states, Gaussian unitaries,
//! stellar-fidelity profiles, conversion no-go regions and the Wigner
//! logarithmic negativity.

pub mod bounds;
pub mod error;
pub mod fock;
pub mod ops;
pub mod optimize;
pub mod profile;
pub mod wigner;
pub mod zoo;

pub use bounds::{
    assess_protocol, exact_bound_check, nogo_region_multicopy, nogo_region_subadditive,
    wln_bound_check, Assessment, ConversionScenario, Flavor, NoGoRegion, Purity, Rectangle, Verdict,
};
pub use error::{Error, ErrorKind, Result};
pub use fock::{fidelity, inner, project_rank, tensor, tensor_power, trace_distance_pure, FockState};
pub use ops::GaussianCircuit;
pub use profile::{
    approx_rank_from_profile, profile, profile_spec, stellar_fidelity, ApproxRankFunction,
    ProfileOptions, StellarProfile,
};
pub use wigner::{wigner, wln, wln_product, GridOptions, WignerGrid, Wln};
pub use zoo::{Parity, Rank, StateSpec};
