//! Ergodic per-group rate distributions for multi-cell multi-antenna downlinks.
//!
//! The crate models a cellular downlink in which clusters of cooperating base
//! stations act as one distributed MIMO transmitter and interference from other
//! clusters is treated as noise.  Each cluster reduces to an equivalent
//! multiple-access ("dual uplink") problem whose ergodic group rates are
//! computed analytically in the large-antenna limit:
//!
//! * [`scenario`] builds cellular geometries (linear 2-cell, wrap-around
//!   hexagonal 7-cell), evaluates pathloss and antenna gains, and reduces each
//!   cooperation cluster to a [`scenario::ClusterProblem`].
//! * [`asymptotics`] solves the limiting MMSE SINR fixed points, runs the
//!   iterative weighted sum-rate power allocation, and evaluates the
//!   deterministic equivalent of the normalized log-determinant.
//! * [`fairness`] maximizes a network utility (proportional fairness, max-min
//!   fairness, or a fixed weighted sum) over the ergodic rate region via
//!   Lagrangian duality with a projected-subgradient outer loop.
//! * [`montecarlo`] is the finite-dimension validation oracle: it samples iid
//!   complex Gaussian channels and estimates the same log-determinant and MMSE
//!   quantities empirically.
//!
//! Rates are computed in nats per user dimension internally and converted to
//! bits at reporting boundaries.

pub mod asymptotics;
pub mod error;
pub mod fairness;
pub mod layouts;
pub mod montecarlo;
pub mod propagation;
pub mod scenario;

pub use asymptotics::{
    allocate_powers, group_rates, mutual_information, solve_sinr, weighted_objective,
    PowerAllocation, SinrCoupling, SinrTable, SolverOptions, WeightOrder,
};
pub use error::{Error, Result};
pub use fairness::{
    solve_all_clusters, solve_fairness, ClusterRateReport, FairnessOptions, Utility,
    UtilityRegistry, UtilitySpec,
};
pub use scenario::{ClusterProblem, Scenario, ScenarioConfig};

/// Conversion factor from nats to bits.
pub const NATS_TO_BITS: f64 = std::f64::consts::LOG2_E;
