//! Numerical checks for the majority-vote concentration bound, the
//! noisy-channel total-variation chain, Hellinger/TV inequalities and the
//! assembled generalization bound.

mod bounds;
mod channel;
mod hellinger;
mod report;

pub use bounds::{
    generalization_bound, min_lfs, mv_error_bound, mv_error_exact, simulate_mv_error, McEstimate,
    TheoryInputs, MAX_LF_ERROR,
};
pub use channel::{
    apply_channel, channel_inf_norm_inverse, hellinger, hellinger_squared, inf_norm, tv_distance,
    verify_rcgan_tv_chain, ChainEntry, FiniteJoint, MvComparison, NoisyChannel, CHAIN_TOLERANCE,
};
pub use hellinger::{hellinger_tv_study, HellingerSummary, InequalityResult, INEQUALITY_TOLERANCE};
pub use report::{run_theory, ChainSummary, MinLfsRow, MvRow, TheoryGrid, TheoryReport};
