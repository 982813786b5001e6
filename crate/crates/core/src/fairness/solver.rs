//! Lagrangian dual solver for one cluster's fairness problem.
//!
//! For fixed dual prices the dual function splits into the closed-form
//! auxiliary-rate maximization and a weighted ergodic sum-rate maximization
//! with weights equal to the prices, which the power allocator solves.  The
//! prices are then driven down the subgradient `R - r` with a backtracking
//! line search, projected onto `mu >= floor`.

use rayon::prelude::*;

use crate::asymptotics::{
    allocate_powers_from, group_rates, PowerAllocation, SinrTable, WeightOrder,
};
use crate::error::Result;
use crate::scenario::ClusterProblem;
use crate::NATS_TO_BITS;

use super::Utility;

/// Outer-loop controls; `solver` configures the inner fixed points.
#[derive(Debug, Clone)]
pub struct FairnessOptions {
    /// Stop when the relative duality gap falls below this.
    pub gap_tol: f64,
    /// ... and the criterion's stationarity measure below this.
    pub stat_tol: f64,
    pub max_outer: usize,
    /// Dual prices never go below this floor.
    pub mu_floor: f64,
    /// Armijo constant of the line search.
    pub armijo: f64,
    pub step_init: f64,
    pub step_shrink: f64,
    pub max_halvings: usize,
    /// Report the tail-averaged primal iterate instead of the last one.
    ///
    /// At symmetric optima the dual prices tie and the optimal rate point
    /// lies on a face of the rate region that only time-sharing between
    /// decode orders attains; the averaged iterate converges to it, while
    /// the last iterate is a vertex that splits tied groups unevenly.
    pub average_iterates: bool,
    pub solver: crate::asymptotics::SolverOptions,
}

impl Default for FairnessOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-3,
            stat_tol: 5e-4,
            max_outer: 2000,
            mu_floor: 1e-6,
            armijo: 1e-4,
            step_init: 1.0,
            step_shrink: 0.5,
            max_halvings: 30,
            average_iterates: true,
            solver: crate::asymptotics::SolverOptions::default(),
        }
    }
}

/// Dual iteration state.
#[derive(Debug, Clone)]
pub struct DualState {
    /// Dual prices, cluster-local group order.
    pub mu: Vec<f64>,
    /// Auxiliary rates of the latest inner solve.
    pub aux_rates: Vec<f64>,
    pub iteration: usize,
    /// Step size accepted by the latest line search.
    pub step: f64,
    /// Relative duality gap per outer iteration.
    pub gap_history: Vec<f64>,
    /// How often the price floor clamped an entry.
    pub floor_hits: usize,
    /// Line searches that exhausted their halving budget.
    pub exhausted_searches: usize,
    /// Starting step of the next line search (adapted by outcomes).
    pub step_hint: f64,
    /// Set when the last search exhausted: the dual sits at a kink
    /// (typically a decode-order tie), where no subgradient direction
    /// descends and diminishing forced steps make the iterates orbit it
    /// instead of freezing on one side.
    pub kink_mode: bool,
    /// Consecutive accepted steps whose relative price displacement was
    /// negligible; a run of them is the crawl signature of a kink that the
    /// Armijo test alone cannot see.
    pub crawl_hits: usize,
    /// Latched at the first exhaustion that happens with the duality gap
    /// already inside tolerance: the value is settled and the rest of the
    /// run only balances the primal average across the tie, one forced step
    /// per iteration.
    pub endgame: bool,
    pub endgame_steps: usize,
}

impl DualState {
    pub fn new(mu: Vec<f64>) -> Self {
        let n = mu.len();
        DualState {
            mu,
            aux_rates: vec![0.0; n],
            iteration: 0,
            step: 0.0,
            gap_history: Vec::new(),
            floor_hits: 0,
            exhausted_searches: 0,
            step_hint: 1.0,
            kink_mode: false,
            crawl_hits: 0,
            endgame: false,
            endgame_steps: 0,
        }
    }
}

/// One dual-function evaluation: the weighted sum-rate solution at given
/// prices plus the dual value.
#[derive(Debug, Clone)]
pub struct DualEval {
    pub dual_value: f64,
    /// Achieved rates, nats, cluster-local group order.
    pub rates: Vec<f64>,
    pub powers: PowerAllocation,
    pub table: SinrTable,
    pub order: WeightOrder,
}

fn evaluate_dual(
    cluster: &ClusterProblem,
    utility: &dyn Utility,
    mu: &[f64],
    opts: &FairnessOptions,
    warm_powers: Option<&[f64]>,
) -> Result<DualEval> {
    // The optimal decode order for subproblem (b) sorts the prices
    // non-decreasingly; WeightOrder does exactly that.
    let order = WeightOrder::new(mu)?;
    debug_assert!(order.is_sorted());
    let warm_rank = warm_powers.map(|w| order.powers_by_rank(w));
    let (powers, table) =
        allocate_powers_from(cluster, &order, &opts.solver, warm_rank.as_deref())?;
    let rates = group_rates(&order, &powers, &table);
    let weighted: f64 = mu.iter().zip(&rates).map(|(m, r)| m * r).sum();
    Ok(DualEval {
        dual_value: utility.dual_intercept(mu) + weighted,
        rates,
        powers,
        table,
        order,
    })
}

/// One projected-subgradient update of the dual prices.
///
/// The subgradient is `R - r` (achieved minus auxiliary rates).  The step
/// backtracks from an adaptive hint until the dual value satisfies the
/// Armijo decrease, evaluating the dual (one full power allocation) per
/// trial.  When every trial fails, the dual sits at a kink of the piecewise
/// dual function (typically a decode-order tie); the update then takes a
/// diminishing forced step so the iterates orbit the kink, which is what
/// lets the averaged primal iterate converge to the time-shared optimum.
/// Returns `None` when the subgradient is exactly zero.
pub fn subgradient_step(
    state: &mut DualState,
    current: &DualEval,
    utility: &dyn Utility,
    cluster: &ClusterProblem,
    opts: &FairnessOptions,
) -> Result<Option<DualEval>> {
    let aux = utility.auxiliary_rates(&state.mu, &current.rates);
    let direction: Vec<f64> = current
        .rates
        .iter()
        .zip(&aux)
        .map(|(r, a)| r - a)
        .collect();
    let norm2: f64 = direction.iter().map(|d| d * d).sum();
    state.aux_rates = aux;
    if norm2 == 0.0 {
        return Ok(None);
    }

    let try_step = |state: &mut DualState, step: f64| -> Result<(Vec<f64>, DualEval)> {
        let mut trial = utility.update_prices(&state.mu, &direction, step);
        state.floor_hits += utility.project_mu(&mut trial, opts.mu_floor);
        let eval = evaluate_dual(cluster, utility, &trial, opts, Some(&current.powers.powers))?;
        Ok((trial, eval))
    };
    let accept =
        |state: &mut DualState, mu: Vec<f64>, step: f64| {
            state.mu = mu;
            state.step = step;
            state.iteration += 1;
        };
    // The required decrease carries a noise floor: the inner allocator is
    // itself iterative, and a microscopic step whose Armijo margin sits
    // below that noise would otherwise "succeed" forever without moving the
    // prices, masking a kink.
    let noise = 1e-9 * (1.0 + current.dual_value.abs());
    let armijo = |eval: &DualEval, step: f64| {
        eval.dual_value <= current.dual_value - opts.armijo * step * norm2 - noise
    };

    // Diminishing forced step.  The subgradient lives in rate units while
    // the prices scale with (utility constant / rate); dividing by the mean
    // rate maps relative rate errors onto relative price moves and keeps the
    // trajectory invariant under rescaling of either.
    let rate_scale = current.rates.iter().map(|r| r.abs()).sum::<f64>()
        / current.rates.len() as f64;
    let harmonic = move |count: usize, mu: &[f64]| -> f64 {
        let mean: f64 = mu.iter().sum::<f64>() / mu.len() as f64;
        opts.step_init * mean / ((1.0 + count as f64) * rate_scale.max(1e-12))
    };

    if state.endgame {
        state.endgame_steps += 1;
        let forced = harmonic(state.endgame_steps, &state.mu);
        let (mu, eval) = try_step(state, forced)?;
        state.step_hint = forced;
        accept(state, mu, forced);
        return Ok(Some(eval));
    }

    // In kink mode only probe once before falling back to the forced step;
    // full backtracking would burn an allocator solve per halving for
    // nothing.
    let budget = if state.kink_mode { 0 } else { opts.max_halvings };
    let mut step = state.step_hint.min(opts.step_init);
    for halving in 0..=budget {
        let (mu, eval) = try_step(state, step)?;
        if armijo(&eval, step) {
            // A run of accepted steps that barely move the prices is a kink
            // crawl: genuine but useless descent along the edge of a tie.
            let mean_mu: f64 = state.mu.iter().sum::<f64>() / state.mu.len() as f64;
            let move_size = direction.iter().fold(0.0f64, |m, d| m.max(d.abs())) * step;
            if move_size < 3e-5 * mean_mu {
                state.crawl_hits += 1;
            } else {
                state.crawl_hits = 0;
            }
            state.kink_mode = state.crawl_hits >= 3;
            state.step_hint = (2.0 * step).min(opts.step_init);
            accept(state, mu, step);
            return Ok(Some(eval));
        }
        if halving < budget {
            step *= opts.step_shrink;
        }
    }
    state.exhausted_searches += 1;
    state.kink_mode = true;
    let forced = harmonic(state.exhausted_searches, &state.mu);
    let (mu, eval) = try_step(state, forced)?;
    state.step_hint = forced;
    accept(state, mu, forced);
    Ok(Some(eval))
}

/// Converged (or best-effort) fairness solution for one cluster.
#[derive(Debug, Clone)]
pub struct ClusterRateReport {
    pub cluster_id: usize,
    /// Global group ids, aligned with `rates_nats` and `powers`.
    pub group_ids: Vec<usize>,
    pub rates_nats: Vec<f64>,
    /// Dual-uplink powers per group, linear.
    pub powers: Vec<f64>,
    /// Final dual prices.
    pub mu: Vec<f64>,
    /// Utility of the achieved rates, nats-based.
    pub utility_value: f64,
    /// Dual value at the final prices (upper bound on the utility).
    pub dual_value: f64,
    /// Relative duality gap at exit.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Criterion-specific stationarity measure at exit.
    pub stationarity: f64,
    pub diagnostics: Vec<String>,
}

impl ClusterRateReport {
    pub fn rates_bits(&self) -> Vec<f64> {
        self.rates_nats.iter().map(|r| r * NATS_TO_BITS).collect()
    }
}

/// Maximize the cluster's network utility over its ergodic rate region.
///
/// Runs the inner/outer dual iteration until the relative duality gap and
/// the criterion's stationarity measure both fall below their tolerances.
/// Non-convergence is not an error: the best iterate seen (by gap) is
/// reported with `converged = false` and a diagnostic.  Linear utilities
/// bypass the loop entirely.
pub fn solve_fairness(
    cluster: &ClusterProblem,
    utility: &dyn Utility,
    opts: &FairnessOptions,
) -> Result<ClusterRateReport> {
    let a = cluster.num_groups();
    let mut diagnostics = Vec::new();

    if let Some(weights) = utility.fixed_weights(&cluster.group_ids) {
        let order = WeightOrder::new(&weights)?;
        let (powers, table) = allocate_powers_from(cluster, &order, &opts.solver, None)?;
        let rates = group_rates(&order, &powers, &table);
        let value = utility.value(&cluster.group_ids, &rates);
        return Ok(ClusterRateReport {
            cluster_id: cluster.cluster_id,
            group_ids: cluster.group_ids.clone(),
            rates_nats: rates,
            powers: powers.powers,
            mu: weights,
            utility_value: value,
            dual_value: value,
            gap: 0.0,
            iterations: 0,
            converged: true,
            stationarity: 0.0,
            diagnostics,
        });
    }

    let mut state = DualState::new(utility.initial_mu(a));
    state.step_hint = opts.step_init;
    state.floor_hits += utility.project_mu(&mut state.mu, opts.mu_floor);
    let mut current = evaluate_dual(cluster, utility, &state.mu, opts, None)?;

    // Every dual value is a valid upper bound; keep the tightest.
    let mut best_dual = f64::INFINITY;
    let mut avg = RunningAverage::new(a);
    let mut restart_gap = f64::INFINITY;
    let mut converged = false;
    // score, mu, rates, powers, value, stat, gap
    #[allow(clippy::type_complexity)]
    let mut best: Option<(f64, Vec<f64>, Vec<f64>, Vec<f64>, f64, f64, f64)> = None;
    loop {
        let vertex_value = utility.value(&cluster.group_ids, &current.rates);
        let vertex_gap_abs = current.dual_value - vertex_value;
        if vertex_gap_abs < -1e-6 * (1.0 + vertex_value.abs()) {
            diagnostics.push(format!(
                "weak duality violated at iteration {}: gap {vertex_gap_abs:.3e}",
                state.iteration
            ));
        }
        best_dual = best_dual.min(current.dual_value);

        // Tail averaging: restart whenever the vertex gap halves, so the
        // average ends up covering only the oscillation plateau around the
        // optimum.  While orbiting a kink the average must accumulate
        // undisturbed -- balancing it across decode-order ties is the whole
        // point of the orbit.
        let vertex_gap = (vertex_gap_abs / vertex_value.abs().max(1e-12)).max(0.0);
        if !opts.average_iterates || (!state.endgame && vertex_gap < 0.5 * restart_gap) {
            avg.reset();
            restart_gap = vertex_gap.max(1e-15);
        }
        avg.add(&current.rates, &current.powers.powers);

        let rates = avg.rates();
        let powers = avg.powers();
        let value = utility.value(&cluster.group_ids, &rates);
        let gap = (best_dual - value) / value.abs().max(1e-12);
        state.gap_history.push(gap);
        let aux = utility.auxiliary_rates(&state.mu, &rates);
        let stat = utility.stationarity(&state.mu, &rates, &aux);
        let score = (gap / opts.gap_tol).max(stat / opts.stat_tol);
        if best.as_ref().is_none_or(|(s, ..)| score < *s) {
            best = Some((score, state.mu.clone(), rates, powers, value, stat, gap));
        }
        if gap <= opts.gap_tol && stat <= opts.stat_tol {
            converged = true;
            break;
        }
        if state.iteration >= opts.max_outer {
            break;
        }
        match subgradient_step(&mut state, &current, utility, cluster, opts)? {
            Some(next) => current = next,
            None => {
                // Zero subgradient: the saddle point is exact.
                converged = gap <= opts.gap_tol;
                break;
            }
        }
        if !state.endgame && state.kink_mode && gap <= opts.gap_tol {
            // A kink at the optimum: from here on only the tie balance is
            // left; stop restarting the average and orbit with forced steps.
            state.endgame = true;
            avg.reset();
        }
    }

    if !converged {
        diagnostics.push(format!(
            "no convergence within {} outer iterations; reporting best iterate",
            opts.max_outer
        ));
    }
    let (_score, mu, rates, powers, value, stat, gap) =
        best.expect("at least the initial iterate was recorded");

    if state.exhausted_searches > 0 {
        diagnostics.push(format!(
            "line search exhausted its halving budget {} time(s)",
            state.exhausted_searches
        ));
    }
    if state.floor_hits > 0 {
        diagnostics.push(format!(
            "price floor {:.1e} clamped {} update(s)",
            opts.mu_floor, state.floor_hits
        ));
    }
    if converged {
        if let Some(g) = rates.iter().position(|r| *r <= 1e-12) {
            diagnostics.push(format!(
                "group {} holds zero rate at convergence",
                cluster.group_ids[g]
            ));
        }
    }

    Ok(ClusterRateReport {
        cluster_id: cluster.cluster_id,
        group_ids: cluster.group_ids.clone(),
        rates_nats: rates,
        powers,
        mu,
        utility_value: value,
        dual_value: best_dual,
        gap,
        iterations: state.iteration,
        converged,
        stationarity: stat,
        diagnostics,
    })
}

/// Uniform running average of the primal iterates (rates and powers).
#[derive(Debug, Clone)]
struct RunningAverage {
    count: f64,
    rates: Vec<f64>,
    powers: Vec<f64>,
}

impl RunningAverage {
    fn new(n: usize) -> Self {
        RunningAverage {
            count: 0.0,
            rates: vec![0.0; n],
            powers: vec![0.0; n],
        }
    }

    fn reset(&mut self) {
        self.count = 0.0;
        self.rates.fill(0.0);
        self.powers.fill(0.0);
    }

    fn add(&mut self, rates: &[f64], powers: &[f64]) {
        self.count += 1.0;
        for (a, r) in self.rates.iter_mut().zip(rates) {
            *a += r;
        }
        for (a, p) in self.powers.iter_mut().zip(powers) {
            *a += p;
        }
    }

    fn rates(&self) -> Vec<f64> {
        self.rates.iter().map(|r| r / self.count).collect()
    }

    fn powers(&self) -> Vec<f64> {
        self.powers.iter().map(|p| p / self.count).collect()
    }
}

/// Solve every cluster independently (they decouple once the interference
/// variances are fixed); clusters run on the rayon pool and the reports come
/// back in cluster order.
pub fn solve_all_clusters(
    clusters: &[ClusterProblem],
    utility: &dyn Utility,
    opts: &FairnessOptions,
) -> Result<Vec<ClusterRateReport>> {
    clusters
        .par_iter()
        .map(|c| solve_fairness(c, utility, opts))
        .collect()
}
