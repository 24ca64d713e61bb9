//! Small exact oracles and the seeded experiments built on the solvers.

mod experiments;
mod oracle;

pub use experiments::{
    aligned_pair, bound_sweep, convergence_experiment, fit_slope, runtime_scaling, stream_rng,
    synthetic_conformer, synthetic_graph, BoundReport, RateReport, RuntimeReport, RATE_EPSILON,
};
pub use oracle::{
    aligned_structure_distance, direct_fgw_objective, exact_fgw_two_node, wasserstein_bound_check,
    BoundCheck, BOUND_SLACK,
};
