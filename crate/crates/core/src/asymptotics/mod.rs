//! Large-system (deterministic-equivalent) analysis of one cluster.
//!
//! For a cluster's dual uplink with noise-normalized gains, the per-group
//! output SINR of the joint MMSE receiver converges, as the user-group size
//! grows, to the solution of a coupled fixed-point system.  This module
//! solves those fixed points, evaluates the deterministic equivalent of the
//! normalized log-determinant, and runs the iterative weighted sum-rate
//! power allocation with zero-power pruning.

mod allocation;
mod fixed_point;

pub use allocation::{
    allocate_powers, group_rates, solve_group_rates, weighted_objective, PowerAllocation,
    WeightOrder,
};
pub use fixed_point::{mutual_information, solve_sinr, solve_sinr_table, SinrTable, SuffixEntry};

pub(crate) use allocation::allocate_powers_from;

/// How the SINR fixed points of simultaneously active groups are coupled.
///
/// `Coupled` gives every interfering group its own SINR inside the
/// interference terms (the standard deterministic equivalent for a separable
/// variance profile); `Shared` reuses the target group's SINR for all
/// interferers.  The Monte Carlo oracle arbitrates between the two; `Coupled`
/// is the default and the one the oracle confirms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SinrCoupling {
    #[default]
    Coupled,
    Shared,
}

impl SinrCoupling {
    pub fn name(&self) -> &'static str {
        match self {
            SinrCoupling::Coupled => "coupled",
            SinrCoupling::Shared => "shared",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "coupled" => Some(SinrCoupling::Coupled),
            "shared" => Some(SinrCoupling::Shared),
            _ => None,
        }
    }
}

/// Numerical controls for the fixed-point and power-allocation solvers.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub coupling: SinrCoupling,
    /// Relative step tolerance for the SINR fixed points.
    pub sinr_tol: f64,
    /// Sweep budget per fixed-point solve.
    pub sinr_max_sweeps: usize,
    /// Power-update tolerance relative to the cluster budget.
    pub power_tol: f64,
    pub power_max_iters: usize,
    /// Solve independent suffix systems on the rayon pool when the cluster is
    /// large enough; per-suffix results are bit-identical to sequential
    /// evaluation.
    pub parallel: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            coupling: SinrCoupling::Coupled,
            sinr_tol: 1e-13,
            sinr_max_sweeps: 10_000,
            power_tol: 1e-9,
            power_max_iters: 50_000,
            parallel: true,
        }
    }
}
