//! Stochastic cross-checks: the coupled heat-bath sampler on trees and the
//! loss-network simulator on small graphs.

mod heat_bath;
mod loss_network;

pub use heat_bath::{
    heat_bath_sweep, random_site_kernel, sample_root_marginal, CoupledSampler, SampleEstimate, TripleState,
    KERNEL_STATE_LIMIT,
};
pub use loss_network::{
    occupancy_tv, product_form_law, simulate_loss_network, Graph, NetworkState, NetworkStats, GRAPH_VERTEX_LIMIT,
};
