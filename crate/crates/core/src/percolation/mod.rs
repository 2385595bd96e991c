//! The blocked space-time percolation problem behind the sampler, plus the
//! cluster statistics and coupling tools used to study it.

mod assignment;
mod bound;
mod clusters;
mod coupling;
mod grid;
mod tail;
mod threshold;
mod union_find;

pub use assignment::{
    block_size_for, build_percolation_config, sample_assignment, space_time_grid, ChannelAssignment,
    PercolationConfig,
};
pub use bound::{conditional_open_lower_bound, conditional_open_lower_bound_at_c};
pub use clusters::{find_clusters, label_closed, max_closed_cluster, spans_axis0, ClusterLabeling};
pub use coupling::{coupled_dependent_sample, ConditionalTable, CoupledSample};
pub use grid::Grid;
pub use tail::{
    cluster_tail_stats, independent_max_clusters, linear_fit, LinearFit, TailStats, MIN_TAIL_CONFIGS,
};
pub use threshold::{
    bootstrap_median_ci, estimate_threshold, first_spanning_fraction, independent_field, median,
    spanning_probability, SizeEstimate, ThresholdEstimate,
};
pub use union_find::UnionFind;
