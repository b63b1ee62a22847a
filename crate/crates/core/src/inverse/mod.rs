//! Reconstruction of edge potentials from D-N maps.

pub mod descent;
pub mod harvest;
pub mod oracle;
pub mod partial;
pub mod plan;
pub mod reconstruct;

pub use descent::{cauchy_descend, descend, extract_strip_ratios, line_relations, LineTrace, Relation};
pub use oracle::{DNOracle, DatasetOracle, LiveOracle};
pub use partial::{solve_partial_data, special_solution_data, CauchyData};
pub use plan::{plan_support, EdgeRef, Plan, SupportSpec};
pub use reconstruct::{reconstruct, reconstruct_partial, EdgeResult, Outcome, ReconstructConfig, Reconstruction};
