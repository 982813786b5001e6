//! Limiting MMSE SINR fixed points and the deterministic equivalent of the
//! normalized log-determinant.
//!
//! With groups `j` in an active set transmitting powers `q_j` through
//! noise-normalized gains `g[m][j]`, the per-BS interference load is
//!
//! ```text
//! t_m = 1 + sum_j g[m][j]^2 q_j / (1 + sinr_j)
//! ```
//!
//! and each active group's limiting SINR solves
//!
//! ```text
//! sinr_j = gamma * q_j * sum_m g[m][j]^2 / t_m .
//! ```
//!
//! The per-group equation at fixed interference is scalar, increasing and
//! concave in `sinr_j`, so it is solved exactly by Newton iteration from an
//! upper bound; the groups are then relaxed by Gauss-Seidel sweeps until the
//! joint residual settles.  The limiting per-symbol MMSE of group `j` is
//! `1/(1 + sinr_j)`.
//!
//! The normalized mutual information of an active set follows from the same
//! quantities:
//!
//! ```text
//! mi = sum_j [ln(1 + sinr_j) - sinr_j/(1 + sinr_j)] + gamma * sum_m ln t_m .
//! ```

use crate::error::{Error, Result};
use crate::scenario::ClusterProblem;

use super::{SinrCoupling, SolverOptions, WeightOrder};

/// Gains of one cluster with columns permuted into weight-rank order and
/// squared once up front.
#[derive(Debug, Clone)]
pub(crate) struct RankedGains {
    pub gamma: f64,
    pub num_bs: usize,
    pub num_groups: usize,
    /// `gain2[rank * num_bs + m]`
    gain2: Vec<f64>,
}

impl RankedGains {
    pub fn new(cluster: &ClusterProblem, order: &WeightOrder) -> Self {
        Self::with_columns(cluster, |rank| order.local(rank))
    }

    /// Columns taken in the cluster's own order.
    pub fn identity(cluster: &ClusterProblem) -> Self {
        Self::with_columns(cluster, |rank| rank)
    }

    fn with_columns(cluster: &ClusterProblem, col: impl Fn(usize) -> usize) -> Self {
        let num_bs = cluster.num_bs();
        let a = cluster.num_groups();
        let mut gain2 = vec![0.0; num_bs * a];
        for rank in 0..a {
            let c = col(rank);
            for m in 0..num_bs {
                let g = cluster.gains[(m, c)];
                gain2[rank * num_bs + m] = g * g;
            }
        }
        RankedGains {
            gamma: cluster.gamma as f64,
            num_bs,
            num_groups: a,
            gain2,
        }
    }

    #[inline]
    pub fn gain2(&self, rank: usize) -> &[f64] {
        &self.gain2[rank * self.num_bs..(rank + 1) * self.num_bs]
    }

    /// Per-BS interference loads `t_m` of the suffix `start..` given its
    /// solved SINRs.
    pub fn loads(&self, powers: &[f64], start: usize, sinrs: &[f64]) -> Vec<f64> {
        let mut t = vec![1.0; self.num_bs];
        for rank in start..self.num_groups {
            let w = powers[rank] / (1.0 + sinrs[rank - start]);
            if w != 0.0 {
                let g2 = self.gain2(rank);
                for (tm, g) in t.iter_mut().zip(g2) {
                    *tm += g * w;
                }
            }
        }
        t
    }

    /// Jointly solve the SINRs of the active suffix `start..`.
    ///
    /// `warm` seeds the iteration when the caller has a nearby solution;
    /// the fixed point is unique, so seeding changes only the path.
    pub fn solve_suffix(
        &self,
        powers: &[f64],
        start: usize,
        warm: Option<&[f64]>,
        opts: &SolverOptions,
    ) -> Result<(Vec<f64>, usize)> {
        let len = self.num_groups - start;
        let mut sinrs = match warm {
            Some(w) if w.len() == len => w.to_vec(),
            _ => vec![0.0; len],
        };
        // Powers pinned to zero must report a zero SINR exactly.
        for (i, s) in sinrs.iter_mut().enumerate() {
            if powers[start + i] == 0.0 {
                *s = 0.0;
            }
        }
        let mut loads = self.loads(powers, start, &sinrs);
        let mut sweeps = 0;
        loop {
            sweeps += 1;
            let mut max_rel_step = 0.0f64;
            for rank in start..self.num_groups {
                let idx = rank - start;
                let q = powers[rank];
                if q == 0.0 {
                    continue;
                }
                let g2 = self.gain2(rank);
                let own = q / (1.0 + sinrs[idx]);
                // Remove this group's own contribution, solve its scalar
                // equation exactly, then restore the contribution.
                for (tm, g) in loads.iter_mut().zip(g2) {
                    *tm -= g * own;
                }
                let new = newton_sinr(self.gamma * q, g2, &loads, q, sinrs[idx]);
                let back = q / (1.0 + new);
                for (tm, g) in loads.iter_mut().zip(g2) {
                    *tm += g * back;
                }
                let step = (new - sinrs[idx]).abs() / (1.0 + new);
                if step > max_rel_step {
                    max_rel_step = step;
                }
                sinrs[idx] = new;
            }
            if max_rel_step <= opts.sinr_tol {
                break;
            }
            if sweeps >= opts.sinr_max_sweeps {
                return Err(Error::SolverFailure {
                    what: "SINR fixed point did not settle".into(),
                    residual: max_rel_step,
                    iterations: sweeps,
                });
            }
            // Refresh the loads from scratch each sweep so cancellation noise
            // cannot accumulate across sweeps.
            loads = self.loads(powers, start, &sinrs);
        }
        self.check_residual(powers, start, &sinrs, sweeps)?;
        Ok((sinrs, sweeps))
    }

    /// Solve the shared-coupling scalar equation for `target` in the suffix
    /// `start..`: one SINR value appears in every interference term.
    pub fn solve_shared(
        &self,
        powers: &[f64],
        start: usize,
        target: usize,
        opts: &SolverOptions,
    ) -> Result<(f64, usize)> {
        let q = powers[target];
        if q == 0.0 {
            return Ok((0.0, 0));
        }
        // t_m = 1 and the whole suffix load divides by (1 + sinr).
        let mut d = vec![0.0; self.num_bs];
        for rank in start..self.num_groups {
            let g2 = self.gain2(rank);
            let w = powers[rank];
            for (dm, g) in d.iter_mut().zip(g2) {
                *dm += g * w;
            }
        }
        let ones = vec![1.0; self.num_bs];
        let g2 = self.gain2(target);
        let mut x = upper_bound(self.gamma * q, g2, &ones);
        let mut iters = 0;
        loop {
            iters += 1;
            let step = newton_step(self.gamma * q, g2, &ones, &d, x);
            let new = x - step;
            if (new - x).abs() <= opts.sinr_tol * (1.0 + new) {
                return Ok((new.max(0.0), iters));
            }
            if iters >= opts.sinr_max_sweeps {
                return Err(Error::SolverFailure {
                    what: "shared SINR fixed point did not settle".into(),
                    residual: (new - x).abs(),
                    iterations: iters,
                });
            }
            x = new;
        }
    }

    /// Deterministic equivalent of the normalized log-determinant of the
    /// active suffix, nats per user dimension.
    pub fn mutual_information(&self, powers: &[f64], start: usize, sinrs: &[f64]) -> f64 {
        let loads = self.loads(powers, start, sinrs);
        let mut mi = self.gamma * loads.iter().map(|t| t.ln()).sum::<f64>();
        for s in sinrs {
            mi += (1.0 + s).ln() - s / (1.0 + s);
        }
        mi.max(0.0)
    }

    fn check_residual(
        &self,
        powers: &[f64],
        start: usize,
        sinrs: &[f64],
        sweeps: usize,
    ) -> Result<()> {
        let loads = self.loads(powers, start, sinrs);
        let mut residual = 0.0f64;
        let mut max_sinr = 0.0f64;
        for rank in start..self.num_groups {
            let g2 = self.gain2(rank);
            let rhs = self.gamma
                * powers[rank]
                * g2.iter().zip(&loads).map(|(g, t)| g / t).sum::<f64>();
            residual = residual.max((sinrs[rank - start] - rhs).abs());
            max_sinr = max_sinr.max(sinrs[rank - start]);
        }
        let allowed = 1e-10f64.max(1e-12 * (1.0 + max_sinr));
        if residual > allowed {
            return Err(Error::SolverFailure {
                what: "SINR fixed point residual too large".into(),
                residual,
                iterations: sweeps,
            });
        }
        Ok(())
    }
}

/// Upper bound on the scalar SINR: the interference-free matched filter value.
#[inline]
fn upper_bound(scale: f64, g2: &[f64], t: &[f64]) -> f64 {
    scale * g2.iter().zip(t).map(|(g, tm)| g / tm).sum::<f64>()
}

/// One Newton step for `h(x) = x - scale * sum_m g2[m] / (t[m] + d[m]/(1+x))`.
#[inline]
fn newton_step(scale: f64, g2: &[f64], t: &[f64], d: &[f64], x: f64) -> f64 {
    let opx = 1.0 + x;
    let mut f = 0.0;
    let mut fp = 0.0;
    for ((g, tm), dm) in g2.iter().zip(t).zip(d) {
        let denom = tm + dm / opx;
        f += g / denom;
        fp += g * dm / (opx * opx * denom * denom);
    }
    let h = x - scale * f;
    let hp = 1.0 - scale * fp;
    h / hp
}

/// Newton step for the own-load case `d[m] = g2[m] * q`.
#[inline]
fn newton_step_own(scale: f64, g2: &[f64], t: &[f64], q: f64, x: f64) -> f64 {
    let opx = 1.0 + x;
    let mut f = 0.0;
    let mut fp = 0.0;
    for (g, tm) in g2.iter().zip(t) {
        let dm = g * q;
        let denom = tm + dm / opx;
        f += g / denom;
        fp += g * dm / (opx * opx * denom * denom);
    }
    (x - scale * f) / (1.0 - scale * fp)
}

/// Solve `x = scale * sum_m g2[m] / (t[m] + g2[m]*q/(1+x))` for `x >= 0`.
///
/// `h` is convex with `h(0) <= 0`, so Newton from the upper bound descends
/// monotonically onto the root; a handful of steps reach machine precision.
fn newton_sinr(scale: f64, g2: &[f64], t: &[f64], q: f64, warm: f64) -> f64 {
    let hi = upper_bound(scale, g2, t);
    let mut x = hi;
    // A warm start is only usable on the convex side of the root.
    if warm > 0.0 && warm < hi {
        let opw = 1.0 + warm;
        let f: f64 = g2
            .iter()
            .zip(t)
            .map(|(g, tm)| g / (tm + g * q / opw))
            .sum();
        if warm - scale * f >= 0.0 {
            x = warm;
        }
    }
    for _ in 0..60 {
        let step = newton_step_own(scale, g2, t, q, x);
        let new = (x - step).max(0.0);
        if (x - new).abs() <= 1e-16 * (1.0 + new) {
            return new;
        }
        x = new;
    }
    x
}

/// Limiting SINR of one group under joint MMSE reception of an active set.
///
/// The active set is the column suffix `start..` of the cluster's gain
/// matrix (callers permute columns beforehand if they need a different
/// order); `powers` are per-column transmit powers.  With `Coupled` the whole
/// suffix system is solved and the target's component returned; with `Shared`
/// the target's scalar equation reuses its own SINR for every interferer.
///
/// A zero-power target has SINR exactly zero.
pub fn solve_sinr(
    cluster: &ClusterProblem,
    powers: &[f64],
    start: usize,
    target: usize,
    opts: &SolverOptions,
) -> Result<f64> {
    let a = cluster.num_groups();
    if powers.len() != a {
        return Err(Error::InvalidInput(format!(
            "expected {a} powers, got {}",
            powers.len()
        )));
    }
    if target < start || target >= a {
        return Err(Error::InvalidInput(format!(
            "target {target} outside active set {start}..{a}"
        )));
    }
    if powers.iter().any(|q| !q.is_finite() || *q < 0.0) {
        return Err(Error::InvalidInput("powers must be finite and non-negative".into()));
    }
    let ranked = RankedGains::identity(cluster);
    match opts.coupling {
        SinrCoupling::Coupled => {
            let (sinrs, _) = ranked.solve_suffix(powers, start, None, opts)?;
            Ok(sinrs[target - start])
        }
        SinrCoupling::Shared => Ok(ranked.solve_shared(powers, start, target, opts)?.0),
    }
}

/// Fixed-point solutions for every active suffix of a weight ordering.
///
/// Entry `r` holds the SINRs of groups ranked `r..` when exactly those groups
/// are active, together with the suffix's normalized mutual information.
#[derive(Debug, Clone)]
pub struct SinrTable {
    entries: Vec<SuffixEntry>,
}

#[derive(Debug, Clone)]
pub struct SuffixEntry {
    /// SINRs for ranks `start..`, indexed by `rank - start`.
    pub sinrs: Vec<f64>,
    /// Sweeps (or Newton iterations) spent on this suffix.
    pub iterations: usize,
    /// Normalized mutual information of the suffix, nats per user dimension.
    pub mutual_information: f64,
}

impl SinrTable {
    pub(crate) fn from_entries(entries: Vec<SuffixEntry>) -> Self {
        SinrTable { entries }
    }

    pub fn num_groups(&self) -> usize {
        self.entries.len()
    }

    /// SINR of `rank` when ranks `start..` are active.
    pub fn sinr(&self, start: usize, rank: usize) -> f64 {
        self.entries[start].sinrs[rank - start]
    }

    /// Limiting per-symbol MMSE, `1/(1 + sinr)`.
    pub fn mmse(&self, start: usize, rank: usize) -> f64 {
        1.0 / (1.0 + self.sinr(start, rank))
    }

    /// Normalized mutual information of the suffix `start..`; zero for the
    /// empty suffix `start == num_groups()`.
    pub fn mutual_information(&self, start: usize) -> f64 {
        if start >= self.entries.len() {
            0.0
        } else {
            self.entries[start].mutual_information
        }
    }

    pub fn entries(&self) -> &[SuffixEntry] {
        &self.entries
    }
}

/// Solve the full suffix table for given powers (rank order follows `order`).
pub fn solve_sinr_table(
    cluster: &ClusterProblem,
    order: &WeightOrder,
    powers: &super::PowerAllocation,
    opts: &SolverOptions,
) -> Result<SinrTable> {
    let ranked = RankedGains::new(cluster, order);
    let by_rank = order.powers_by_rank(&powers.powers);
    build_table(&ranked, &by_rank, opts)
}

pub(crate) fn build_table(
    ranked: &RankedGains,
    powers_by_rank: &[f64],
    opts: &SolverOptions,
) -> Result<SinrTable> {
    let a = ranked.num_groups;
    let mut entries = Vec::with_capacity(a);
    let mut warm: Option<Vec<f64>> = None;
    // Walk suffixes from the smallest so each solve can seed the next.
    for start in (0..a).rev() {
        let (sinrs, iterations) = match opts.coupling {
            SinrCoupling::Coupled => {
                let seed: Option<Vec<f64>> = warm.as_ref().map(|w| {
                    let mut s = vec![0.0; a - start];
                    s[1..].copy_from_slice(w);
                    s
                });
                ranked.solve_suffix(powers_by_rank, start, seed.as_deref(), opts)?
            }
            SinrCoupling::Shared => {
                let mut sinrs = Vec::with_capacity(a - start);
                let mut total = 0;
                for rank in start..a {
                    let (s, it) = ranked.solve_shared(powers_by_rank, start, rank, opts)?;
                    sinrs.push(s);
                    total += it;
                }
                (sinrs, total)
            }
        };
        let mi = ranked.mutual_information(powers_by_rank, start, &sinrs);
        if matches!(opts.coupling, SinrCoupling::Coupled) {
            warm = Some(sinrs.clone());
        }
        entries.push(SuffixEntry {
            sinrs,
            iterations,
            mutual_information: mi,
        });
    }
    entries.reverse();
    Ok(SinrTable::from_entries(entries))
}

/// Deterministic equivalent of the normalized ergodic log-determinant of the
/// active suffix `start..` (columns in `order`'s rank order), nats per user
/// dimension.  Returns 0 for the empty suffix.
pub fn mutual_information(
    cluster: &ClusterProblem,
    order: &WeightOrder,
    powers: &super::PowerAllocation,
    start: usize,
    opts: &SolverOptions,
) -> Result<f64> {
    let a = cluster.num_groups();
    if start >= a {
        return Ok(0.0);
    }
    let ranked = RankedGains::new(cluster, order);
    let by_rank = order.powers_by_rank(&powers.powers);
    let sinrs = match opts.coupling {
        SinrCoupling::Coupled => ranked.solve_suffix(&by_rank, start, None, opts)?.0,
        SinrCoupling::Shared => {
            let mut s = Vec::with_capacity(a - start);
            for rank in start..a {
                s.push(ranked.solve_shared(&by_rank, start, rank, opts)?.0);
            }
            s
        }
    };
    Ok(ranked.mutual_information(&by_rank, start, &sinrs))
}
