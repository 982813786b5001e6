//! Finite-dimension Monte Carlo oracle.
//!
//! Samples iid complex Gaussian channel matrices for a cluster at group size
//! `n`, computes empirical normalized log-determinants and MMSE traces, and
//! quantifies agreement with the deterministic equivalents.  Every draw is a
//! counter-based stream derived from `(seed, draw index)`, so draws can be
//! evaluated concurrently and still aggregate to bit-identical results:
//! per-draw values land in a draw-indexed vector and are summed sequentially
//! with compensated summation.

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::asymptotics::{PowerAllocation, WeightOrder};
use crate::error::{Error, Result};
use crate::scenario::ClusterProblem;
use crate::NATS_TO_BITS;

/// Per-row agreement rule used by validation tables: the empirical rate must
/// sit within `max(3 stderr, 5% of the analytic rate)`.
pub const STDERR_MULTIPLE: f64 = 3.0;
pub const RELATIVE_SLACK: f64 = 0.05;

/// One sampled composite channel matrix.
///
/// Block `(m, k)` holds `gains[(m,k)] / sqrt(n)` times an iid standard
/// complex Gaussian `gamma*n x n` matrix; columns follow the cluster's own
/// group order.
#[derive(Debug, Clone)]
pub struct ChannelSample {
    pub matrix: DMatrix<Complex<f64>>,
    pub n: usize,
    pub seed: u64,
    pub draw: u64,
}

/// Draw the composite channel for one cluster.
///
/// Deterministic in `(seed, draw)`: the stream is `ChaCha8(seed)` with the
/// draw index as the stream counter, filled block by block in row-major
/// order.
pub fn sample_channel(cluster: &ClusterProblem, n: usize, seed: u64, draw: u64) -> ChannelSample {
    let a = cluster.num_groups();
    let bn = cluster.rx_dim() * n;
    let gamma_n = cluster.gamma as usize * n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw);
    let scale = 1.0 / (2.0 * n as f64).sqrt();
    let mut h = DMatrix::<Complex<f64>>::zeros(bn, a * n);
    for m in 0..cluster.num_bs() {
        for k in 0..a {
            let amp = cluster.gains[(m, k)] * scale;
            for row in 0..gamma_n {
                for col in 0..n {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    h[(m * gamma_n + row, k * n + col)] = Complex::new(amp * re, amp * im);
                }
            }
        }
    }
    ChannelSample { matrix: h, n, seed, draw }
}

/// Compensated (Kahan) accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Sample mean and standard error of a Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    /// Draws that contributed.
    pub draws: usize,
    /// Draws dropped because a factorization failed.
    pub skipped: usize,
}

fn estimate_from(values: &[f64]) -> Estimate {
    let used: Vec<f64> = values.iter().cloned().filter(|v| v.is_finite()).collect();
    let skipped = values.len() - used.len();
    let n = used.len();
    if n == 0 {
        return Estimate { mean: f64::NAN, stderr: f64::NAN, draws: 0, skipped };
    }
    let mut acc = Kahan::default();
    for v in &used {
        acc.add(*v);
    }
    let mean = acc.value() / n as f64;
    let mut var = Kahan::default();
    for v in &used {
        var.add((v - mean) * (v - mean));
    }
    let stderr = if n > 1 {
        (var.value() / (n - 1) as f64 / n as f64).sqrt()
    } else {
        0.0
    };
    Estimate { mean, stderr, draws: n, skipped }
}

/// Columns of the sampled channel permuted into rank order and scaled by the
/// square roots of the group powers.
fn ranked_scaled(
    sample: &ChannelSample,
    order: &WeightOrder,
    powers: &[f64],
) -> DMatrix<Complex<f64>> {
    let n = sample.n;
    let a = order.num_groups();
    let bn = sample.matrix.nrows();
    let mut s = DMatrix::<Complex<f64>>::zeros(bn, a * n);
    for rank in 0..a {
        let local = order.local(rank);
        let w = powers[local].sqrt();
        for col in 0..n {
            for row in 0..bn {
                s[(row, rank * n + col)] = sample.matrix[(row, local * n + col)] * w;
            }
        }
    }
    s
}

/// Normalized log-determinants of every active suffix for one draw, nats per
/// user dimension; entry `r` covers ranks `r..`, entry `a` is 0.  `NaN`
/// marks a failed factorization.
fn draw_suffix_logdets(
    cluster: &ClusterProblem,
    order: &WeightOrder,
    powers: &[f64],
    n: usize,
    seed: u64,
    draw: u64,
) -> Vec<f64> {
    let a = order.num_groups();
    let sample = sample_channel(cluster, n, seed, draw);
    let s = ranked_scaled(&sample, order, powers);
    let gram = s.adjoint() * &s;
    let mut out = vec![0.0; a + 1];
    for start in 0..a {
        let dim = (a - start) * n;
        let mut sub = gram.view((start * n, start * n), (dim, dim)).into_owned();
        for i in 0..dim {
            sub[(i, i)] += Complex::new(1.0, 0.0);
        }
        out[start] = match sub.cholesky() {
            Some(ch) => {
                let mut ld = Kahan::default();
                for i in 0..dim {
                    ld.add(ch.l_dirty()[(i, i)].re.ln());
                }
                2.0 * ld.value() / n as f64
            }
            None => f64::NAN,
        };
    }
    out
}

fn draw_range(draws: usize) -> Vec<u64> {
    (0..draws as u64).collect()
}

/// Empirical mean of the normalized log-determinant of the active suffix
/// `start..` (rank order per `order`).
pub fn empirical_logdet(
    cluster: &ClusterProblem,
    order: &WeightOrder,
    powers: &PowerAllocation,
    start: usize,
    n: usize,
    draws: usize,
    seed: u64,
) -> Result<Estimate> {
    if draws < 2 {
        return Err(Error::InvalidInput("need at least 2 draws".into()));
    }
    let values: Vec<f64> = draw_range(draws)
        .par_iter()
        .map(|&d| draw_suffix_logdets(cluster, order, &powers.powers, n, seed, d)[start])
        .collect();
    Ok(estimate_from(&values))
}

/// Empirical normalized MMSE trace for the group ranked `target` when ranks
/// `start..` are active; each draw's value lies in [0, 1] up to rounding.
#[allow(clippy::too_many_arguments)]
pub fn empirical_mmse(
    cluster: &ClusterProblem,
    order: &WeightOrder,
    powers: &PowerAllocation,
    start: usize,
    target: usize,
    n: usize,
    draws: usize,
    seed: u64,
) -> Result<Estimate> {
    if draws < 2 {
        return Err(Error::InvalidInput("need at least 2 draws".into()));
    }
    let a = order.num_groups();
    if target < start || target >= a {
        return Err(Error::InvalidInput(format!(
            "target rank {target} outside active set {start}..{a}"
        )));
    }
    let local = order.local(target);
    let q = powers.powers[local];
    let values: Vec<f64> = draw_range(draws)
        .par_iter()
        .map(|&d| {
            if q == 0.0 {
                return 1.0;
            }
            let sample = sample_channel(cluster, n, seed, d);
            let s = ranked_scaled(&sample, order, &powers.powers);
            let dim = (a - start) * n;
            let bn = s.nrows();
            let active = s.view((0, start * n), (bn, dim));
            let mut cov = active * active.adjoint();
            for i in 0..bn {
                cov[(i, i)] += Complex::new(1.0, 0.0);
            }
            let h_k = sample.matrix.view((0, local * n), (bn, n)).into_owned();
            match cov.cholesky() {
                Some(ch) => {
                    let x = ch.solve(&h_k);
                    let tr = (h_k.adjoint() * x).trace().re;
                    1.0 - q * tr / n as f64
                }
                None => f64::NAN,
            }
        })
        .collect();
    Ok(estimate_from(&values))
}

/// One row of the validation table.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub group_id: usize,
    pub n: usize,
    pub rate_asymptotic_bits: f64,
    pub rate_empirical_bits: f64,
    pub stderr_bits: f64,
    pub abs_delta: f64,
    pub rel_delta: f64,
    pub pass: bool,
}

/// Agreement rule shared by the validation table and the acceptance tests.
pub fn validation_pass(abs_delta: f64, stderr: f64, asymptotic: f64) -> bool {
    abs_delta <= (STDERR_MULTIPLE * stderr).max(RELATIVE_SLACK * asymptotic.abs())
}

/// Compare per-group empirical rates against the analytic ones for every
/// group size in `n_list`.
///
/// Per draw, the whole telescoping family of suffix log-determinants is
/// evaluated on one channel sample, so each group's empirical rate is the
/// mean of per-draw successive differences (a zero-power group's difference
/// is exactly zero).
pub fn validate_rates(
    cluster: &ClusterProblem,
    order: &WeightOrder,
    powers: &PowerAllocation,
    asymptotic_rates_nats: &[f64],
    n_list: &[usize],
    draws: usize,
    seed: u64,
) -> Result<Vec<ValidationRow>> {
    if draws < 2 {
        return Err(Error::InvalidInput("need at least 2 draws".into()));
    }
    let a = order.num_groups();
    if asymptotic_rates_nats.len() != a {
        return Err(Error::InvalidInput(
            "asymptotic rate vector does not match the cluster".into(),
        ));
    }
    let mut rows = Vec::with_capacity(n_list.len() * a);
    for &n in n_list {
        if n == 0 {
            return Err(Error::InvalidInput("group size n must be >= 1".into()));
        }
        // draw-indexed [draw][rank] rate values
        let per_draw: Vec<Vec<f64>> = draw_range(draws)
            .par_iter()
            .map(|&d| {
                let ld = draw_suffix_logdets(cluster, order, &powers.powers, n, seed, d);
                (0..a).map(|r| ld[r] - ld[r + 1]).collect()
            })
            .collect();
        for rank in 0..a {
            let values: Vec<f64> = per_draw.iter().map(|v| v[rank]).collect();
            let est = estimate_from(&values);
            let local = order.local(rank);
            let asym_bits = asymptotic_rates_nats[local] * NATS_TO_BITS;
            let emp_bits = est.mean * NATS_TO_BITS;
            let stderr_bits = est.stderr * NATS_TO_BITS;
            let abs_delta = (emp_bits - asym_bits).abs();
            rows.push(ValidationRow {
                group_id: cluster.group_ids[local],
                n,
                rate_asymptotic_bits: asym_bits,
                rate_empirical_bits: emp_bits,
                stderr_bits,
                abs_delta,
                rel_delta: if asym_bits != 0.0 { abs_delta / asym_bits } else { 0.0 },
                pass: validation_pass(abs_delta, stderr_bits, asym_bits),
            });
        }
    }
    rows.sort_by_key(|x| (x.group_id, x.n));
    Ok(rows)
}
