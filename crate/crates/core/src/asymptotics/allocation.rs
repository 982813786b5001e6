//! Iterative power allocation for weighted ergodic sum-rate maximization.
//!
//! Groups are ranked by non-decreasing weight; block successive decoding in
//! rank order makes the objective a weighted telescoping sum of suffix
//! mutual informations with non-negative weight increments.  Eliminating the
//! sum-power multiplier from the KKT conditions gives the normalized update
//!
//! ```text
//! q[k] <- budget * num[k] / sum_j num[j],
//! num[k] = sum_{i <= k} delta[i] * (1 - mmse of rank k in suffix i)
//! ```
//!
//! iterated to a fixed point from the uniform split.  Groups driven to zero
//! power are then screened against the KKT multiplier test; if a zero group
//! fails it, the group with the lowest marginal value is pinned to zero
//! permanently and the iteration repeats on the survivors.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scenario::ClusterProblem;

use super::fixed_point::{build_table, RankedGains, SinrTable};
use super::{SinrCoupling, SolverOptions};

/// Fraction of the budget below which a converged power counts as zero for
/// the pruning screen.
const ZERO_POWER_FRACTION: f64 = 1e-9;

/// Suffix systems are solved on the rayon pool once a cluster is this large.
const PARALLEL_THRESHOLD: usize = 24;

/// A weight vector with its non-decreasing ordering and weight increments.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightOrder {
    weights: Vec<f64>,
    /// `pi[rank]` = group index (cluster-local) holding that rank.
    pi: Vec<usize>,
    /// `delta[rank]` = weight step from the previous rank (first rank steps
    /// from zero); non-negative, sums to the maximum weight.
    delta: Vec<f64>,
}

impl WeightOrder {
    /// Rank groups by non-decreasing weight; ties keep the original group
    /// order so results are deterministic.
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInput("empty weight vector".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput(
                "weights must be finite and non-negative".into(),
            ));
        }
        let mut pi: Vec<usize> = (0..weights.len()).collect();
        pi.sort_by(|&a, &b| {
            weights[a]
                .partial_cmp(&weights[b])
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut delta = Vec::with_capacity(weights.len());
        let mut prev = 0.0;
        for &g in &pi {
            delta.push(weights[g] - prev);
            prev = weights[g];
        }
        Ok(WeightOrder { weights: weights.to_vec(), pi, delta })
    }

    pub fn num_groups(&self) -> usize {
        self.weights.len()
    }

    /// Group (cluster-local index) holding `rank`.
    pub fn local(&self, rank: usize) -> usize {
        self.pi[rank]
    }

    pub fn delta(&self, rank: usize) -> f64 {
        self.delta[rank]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn max_weight(&self) -> f64 {
        self.weights[*self.pi.last().unwrap()]
    }

    /// Permute a group-indexed vector into rank order.
    pub fn powers_by_rank(&self, per_group: &[f64]) -> Vec<f64> {
        self.pi.iter().map(|&g| per_group[g]).collect()
    }

    /// Scatter a rank-indexed vector back to group order.
    pub fn ranks_to_groups(&self, by_rank: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; by_rank.len()];
        for (rank, &g) in self.pi.iter().enumerate() {
            out[g] = by_rank[rank];
        }
        out
    }

    /// True if the ranking sorts the weights non-decreasingly.
    pub fn is_sorted(&self) -> bool {
        self.pi
            .windows(2)
            .all(|w| self.weights[w[0]] <= self.weights[w[1]])
    }
}

/// Per-group transmit powers, cluster-local group order, linear units.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub powers: Vec<f64>,
}

impl PowerAllocation {
    pub fn total(&self) -> f64 {
        self.powers.iter().sum()
    }
}

/// Maximize the weighted ergodic sum rate of one cluster.
///
/// Starts from the uniform split and iterates the normalized KKT update
/// until the powers settle to `power_tol` (relative to the budget), then
/// verifies the zero-power multiplier condition, pruning at most one group
/// per round.  Returns the allocation together with the full suffix SINR
/// table at the fixed point.
///
/// Fails with `InvalidInput` when every weight is zero and with
/// `SolverFailure` when an iteration budget is exhausted.
pub fn allocate_powers(
    cluster: &ClusterProblem,
    order: &WeightOrder,
    opts: &SolverOptions,
) -> Result<(PowerAllocation, SinrTable)> {
    allocate_powers_from(cluster, order, opts, None)
}

/// `allocate_powers` with an optional starting point (rank order).  The
/// fixed point is unique, so seeding from a nearby solution changes only the
/// iteration count; the fairness outer loop uses this to warm-start.
pub(crate) fn allocate_powers_from(
    cluster: &ClusterProblem,
    order: &WeightOrder,
    opts: &SolverOptions,
    warm_start: Option<&[f64]>,
) -> Result<(PowerAllocation, SinrTable)> {
    let a = cluster.num_groups();
    if order.num_groups() != a {
        return Err(Error::InvalidInput(format!(
            "weight vector has {} entries for {} groups",
            order.num_groups(),
            a
        )));
    }
    if order.max_weight() <= 0.0 {
        return Err(Error::InvalidInput(
            "all-zero weights: the weighted sum-rate objective is empty".into(),
        ));
    }
    let budget = cluster.sum_power;
    if budget.is_nan() || budget <= 0.0 {
        return Err(Error::InvalidInput("cluster power budget must be positive".into()));
    }

    let ranked = RankedGains::new(cluster, order);
    let needed: Vec<usize> = (0..a).filter(|&r| order.delta(r) > 0.0).collect();
    // Zero power is an absorbing state of the normalized update (no power,
    // no SINR, no numerator), so a warm start must keep every group strictly
    // positive or a group silenced under an earlier weight vector could
    // never come back.
    let mut q: Vec<f64> = match warm_start {
        Some(w) if w.len() == a && w.iter().all(|x| x.is_finite() && *x >= 0.0) => {
            let total: f64 = w.iter().sum();
            if total > 0.0 {
                let floor = 1e-12 * budget;
                let floored: Vec<f64> =
                    w.iter().map(|x| (x * budget / total).max(floor)).collect();
                let total2: f64 = floored.iter().sum();
                floored.iter().map(|x| x * budget / total2).collect()
            } else {
                vec![budget / a as f64; a]
            }
        }
        _ => vec![budget / a as f64; a],
    };
    let mut pruned = vec![false; a];
    let mut warm: Vec<Option<Vec<f64>>> = vec![None; a];
    let mut num = vec![0.0; a];

    'prune: loop {
        // Step 2: iterate the normalized power update to a fixed point.
        let mut converged = false;
        let mut last_delta = f64::INFINITY;
        for _ in 0..opts.power_max_iters {
            solve_needed(&ranked, &needed, &q, &mut warm, opts)?;
            let den = accumulate_numerators(order, &needed, &warm, &mut num);
            if den.is_nan() || den <= 0.0 {
                return Err(Error::SolverFailure {
                    what: "degenerate cluster: no group contributes rate".into(),
                    residual: den,
                    iterations: 0,
                });
            }
            let mut delta = 0.0f64;
            for r in 0..a {
                let nq = if pruned[r] { 0.0 } else { budget * num[r] / den };
                delta = delta.max((nq - q[r]).abs());
                q[r] = nq;
            }
            last_delta = delta;
            if delta <= opts.power_tol * budget {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::SolverFailure {
                what: "power allocation did not settle".into(),
                residual: last_delta / budget,
                iterations: opts.power_max_iters,
            });
        }

        // Step 3: multiplier test for zero-power groups.  The converged
        // tables are one update behind the final powers; refresh them.
        solve_needed(&ranked, &needed, &q, &mut warm, opts)?;
        let den = accumulate_numerators(order, &needed, &warm, &mut num);
        let zero_cut = ZERO_POWER_FRACTION * budget;
        let mut violation = false;
        for r in 0..a {
            if pruned[r] || q[r] > zero_cut {
                continue;
            }
            // Marginal value of rank r at zero power: the per-unit-power
            // SINR slope against each needed suffix's converged loads.
            let mut slope = 0.0;
            for &i in &needed {
                if i > r {
                    break;
                }
                let loads = ranked.loads(&q, i, warm[i].as_ref().unwrap());
                let per_unit: f64 = ranked
                    .gain2(r)
                    .iter()
                    .zip(&loads)
                    .map(|(g, t)| g / t)
                    .sum::<f64>()
                    * ranked.gamma;
                slope += order.delta(i) * per_unit;
            }
            if budget * slope > den * (1.0 + 1e-9) {
                violation = true;
                break;
            }
        }
        if !violation {
            break 'prune;
        }
        // Pin the group with the lowest accumulated marginal SINR to zero
        // and re-run the updates on the survivors.
        let mut lowest = f64::INFINITY;
        let mut victim = None;
        for r in 0..a {
            if pruned[r] {
                continue;
            }
            let mut score = 0.0;
            for &i in &needed {
                if i > r {
                    break;
                }
                score += order.delta(i) * warm[i].as_ref().unwrap()[r - i];
            }
            if score < lowest {
                lowest = score;
                victim = Some(r);
            }
        }
        match victim {
            Some(r) => {
                pruned[r] = true;
                q[r] = 0.0;
            }
            None => break 'prune,
        }
    }

    let table = build_table(&ranked, &q, opts)?;
    let powers = PowerAllocation {
        powers: order.ranks_to_groups(&q),
    };
    Ok((powers, table))
}

/// Solve the SINR systems of every suffix that carries weight, warm-started
/// from the previous iteration.  Suffixes are independent; on large clusters
/// they run on the rayon pool and the per-suffix results are identical to
/// sequential evaluation.
fn solve_needed(
    ranked: &RankedGains,
    needed: &[usize],
    q: &[f64],
    warm: &mut [Option<Vec<f64>>],
    opts: &SolverOptions,
) -> Result<()> {
    match opts.coupling {
        SinrCoupling::Coupled => {
            if opts.parallel && ranked.num_groups >= PARALLEL_THRESHOLD && needed.len() >= 8 {
                let solved: Vec<(usize, Vec<f64>)> = needed
                    .par_iter()
                    .map(|&i| {
                        let seed = warm[i].as_deref();
                        ranked
                            .solve_suffix(q, i, seed, opts)
                            .map(|(sinrs, _)| (i, sinrs))
                    })
                    .collect::<Result<_>>()?;
                for (i, sinrs) in solved {
                    warm[i] = Some(sinrs);
                }
            } else {
                for &i in needed {
                    let seed = warm[i].take();
                    let (sinrs, _) = ranked.solve_suffix(q, i, seed.as_deref(), opts)?;
                    warm[i] = Some(sinrs);
                }
            }
        }
        SinrCoupling::Shared => {
            for &i in needed {
                let mut sinrs = Vec::with_capacity(ranked.num_groups - i);
                for rank in i..ranked.num_groups {
                    sinrs.push(ranked.solve_shared(q, i, rank, opts)?.0);
                }
                warm[i] = Some(sinrs);
            }
        }
    }
    Ok(())
}

/// `num[k] = sum_{i in needed, i <= k} delta[i] * sinr/(1+sinr)`; returns the
/// total.
fn accumulate_numerators(
    order: &WeightOrder,
    needed: &[usize],
    warm: &[Option<Vec<f64>>],
    num: &mut [f64],
) -> f64 {
    num.fill(0.0);
    for &i in needed {
        let d = order.delta(i);
        let sinrs = warm[i].as_ref().unwrap();
        for (offset, s) in sinrs.iter().enumerate() {
            num[i + offset] += d * (s / (1.0 + s));
        }
    }
    num.iter().sum()
}

/// Per-group ergodic rates from the solved suffix table, nats per channel use
/// per user, returned in cluster-local group order.
///
/// Rank `r`'s rate is the drop in suffix mutual information when it is
/// decoded and removed: `mi(r..) - mi(r+1..)`, clamped at zero; a zero-power
/// group's rate is exactly zero.
pub fn group_rates(order: &WeightOrder, powers: &PowerAllocation, table: &SinrTable) -> Vec<f64> {
    let a = order.num_groups();
    let mut by_rank = vec![0.0; a];
    for rank in 0..a {
        let g = order.local(rank);
        if powers.powers[g] == 0.0 {
            continue;
        }
        let r = table.mutual_information(rank) - table.mutual_information(rank + 1);
        by_rank[rank] = r.max(0.0);
    }
    order.ranks_to_groups(&by_rank)
}

/// Solve the table for given powers and return the group rates directly.
pub fn solve_group_rates(
    cluster: &ClusterProblem,
    order: &WeightOrder,
    powers: &PowerAllocation,
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let table = super::fixed_point::solve_sinr_table(cluster, order, powers, opts)?;
    Ok(group_rates(order, powers, &table))
}

/// The weighted sum-rate objective at an arbitrary feasible allocation:
/// `sum_k delta[k] * mi(k..)`, nats per user dimension.
pub fn weighted_objective(
    cluster: &ClusterProblem,
    order: &WeightOrder,
    powers: &PowerAllocation,
    opts: &SolverOptions,
) -> Result<f64> {
    let ranked = RankedGains::new(cluster, order);
    let by_rank = order.powers_by_rank(&powers.powers);
    let mut total = 0.0;
    for rank in 0..order.num_groups() {
        let d = order.delta(rank);
        if d == 0.0 {
            continue;
        }
        let sinrs = match opts.coupling {
            SinrCoupling::Coupled => ranked.solve_suffix(&by_rank, rank, None, opts)?.0,
            SinrCoupling::Shared => {
                let mut s = Vec::with_capacity(order.num_groups() - rank);
                for j in rank..order.num_groups() {
                    s.push(ranked.solve_shared(&by_rank, rank, j, opts)?.0);
                }
                s
            }
        };
        total += d * ranked.mutual_information(&by_rank, rank, &sinrs);
    }
    Ok(total)
}
