//! Entropic fused Gromov-Wasserstein (FGW) distances and barycenters over
//! attributed graphs, and the forward pass of a conformer aggregation
//! network whose prediction is invariant to rigid motions of each input
//! conformer and to the order of the conformers.
//!
//! Layout:
//!
//! | module | contents |
//! |--------|----------|
//! | [`graph`] | `(H, A, ω)` graphs, couplings, solver parameters |
//! | [`sinkhorn`] | log-domain Sinkhorn for entropic OT |
//! | [`fgw`] | entropic FGW distance via the factorized cost tensor |
//! | [`barycenter`] | block-coordinate FGW barycenters |
//! | [`conformer`] | XYZ input, distance graphs, SchNet-style and GAT encoders |
//! | [`aggregation`] | the end-to-end forward function |
//! | [`bench`] | small exact oracles and convergence/runtime experiments |
//! | [`io`] | JSON graph and report files |

// NaN must fail these checks, so `!(x > 0.0)` is intended.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod graph;
pub mod sinkhorn;
pub mod fgw;
pub mod barycenter;
pub mod conformer;
pub mod aggregation;
pub mod bench;
pub mod io;

pub use error::{Error, Result};
pub use graph::{
    feature_distance_matrix, permute_nodes, validate_graph, AttributedGraph, Coupling, FgwParams,
    LossKind, ValidationReport,
};
pub use sinkhorn::{entropy, marginal_error, sinkhorn_lse, DualPotentials, SinkhornResult};
pub use fgw::{apply_cost_tensor, entropic_fgw, fgw_objective, loss_decomposition, FgwResult, LossDecomposition};
pub use barycenter::{barycenter, feature_update, structure_update, BarycenterOptions, BarycenterResult};
pub use conformer::{conformer_to_graph, gat_forward, parse_xyz, perturb_conformer, schnet_lite_forward, Conformer, EncoderConfig, EncoderWeights, Molecule2D};
pub use aggregation::{barycenter_readout, combine, conan_forward, predict, ConanForwardResult};
