//! Inverse problems: recovering an environment map from a frame, and
//! refining material maps so that their render matches the frame.

mod basis;
mod estimate;
mod loss;
mod refine;

pub use basis::{transport_basis, TransportBasis, MAX_BASIS_RES};
pub use estimate::{estimate_envmap, estimate_with_basis, EnvEstimate, EnvEstimateConfig};
pub use loss::loss_lp;
pub use refine::{
    refine_properties, refinement_loss, RefineConfig, RefineProblem, RefineState, Refinement, MAX_HALVINGS,
    ROUGHNESS_FD_STEP,
};
