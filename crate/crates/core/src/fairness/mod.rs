//! Network-utility maximization over the ergodic rate region.
//!
//! The utility criteria are interchangeable strategies behind the
//! [`Utility`] trait and are looked up by name in a [`UtilityRegistry`]
//! (`"pfs"`, `"hfs"`, `"weighted"`).  [`solve_fairness`] runs the Lagrangian
//! dual loop for one cluster: the inner decoupled maximizations (auxiliary
//! rates in closed form, weighted sum-rate via the power allocator) and a
//! projected-subgradient outer update on the dual prices with a backtracking
//! line search.

mod solver;
mod utility;

pub use solver::{
    solve_all_clusters, solve_fairness, subgradient_step, ClusterRateReport, DualEval, DualState,
    FairnessOptions,
};
pub use utility::{Hfs, Pfs, Utility, UtilityRegistry, UtilitySpec, WeightedSum};
