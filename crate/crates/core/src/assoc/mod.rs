//! Association: likelihoods, permanents, association weights, ambiguity
//! partitioning and binary assignment.

mod ambiguity;
mod components;
mod lap;
mod likelihood;
mod permanent;
mod weights;

pub use ambiguity::{ambiguity_check, ambiguity_check_with_floor, AmbiguityPartition};
pub use components::{connected_components, Component};
pub use lap::{linear_assignment, solve_min_cost, DEFAULT_MATCH_FLOOR};
pub use likelihood::{gaussian_likelihood, gaussian_ln_likelihood, iou, likelihood_from_iou, DEFAULT_ALPHA};
pub use permanent::{minor, permanent, permanent_with_cap, DEFAULT_SIZE_CAP};
pub use weights::{
    jpdaf_weights, jpdaf_weights_dp, jpdaf_weights_with, pkf_weights, pkf_weights_with, pmht_weights, pmht_weights_with_clutter, LikelihoodMatrix,
    WeightMatrix, WeightMode, WeightOptions,
};
