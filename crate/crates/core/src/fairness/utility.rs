//! Utility criteria as interchangeable strategies.
//!
//! Each criterion supplies the pieces the dual loop needs: the utility value
//! `g(r)`, the inner maximizer over the auxiliary rates for fixed dual
//! prices, the matching constant term of the dual function, the price
//! initialization/projection, and a stationarity measure used alongside the
//! duality gap as a stopping test.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// A network utility over per-group ergodic rates (nats internally).
///
/// Implementations must be stateless with respect to the dual iteration; all
/// methods are pure functions of their arguments.
pub trait Utility: Send + Sync {
    /// Registry name, e.g. `"pfs"`.
    fn kind(&self) -> &'static str;

    /// Utility value `g(r)`.
    fn value(&self, group_ids: &[usize], rates: &[f64]) -> f64;

    /// Maximizer of `g(r) - sum_k mu_k r_k` for fixed prices; `achieved` are
    /// the rates of the current weighted sum-rate solution, which the
    /// max-min criterion folds into its common auxiliary rate.
    fn auxiliary_rates(&self, mu: &[f64], achieved: &[f64]) -> Vec<f64>;

    /// `max_r [g(r) - sum_k mu_k r_k]`, the price-dependent constant of the
    /// dual function.
    fn dual_intercept(&self, mu: &[f64]) -> f64;

    /// Starting dual prices.
    fn initial_mu(&self, num_groups: usize) -> Vec<f64>;

    /// Move the prices along the (negated) subgradient `direction` with the
    /// given step; the default is the plain additive update.  Criteria whose
    /// dual lives on a simplex can override with a multiplicative step,
    /// which respects positivity and the simplex geometry.
    fn update_prices(&self, mu: &[f64], direction: &[f64], step: f64) -> Vec<f64> {
        mu.iter()
            .zip(direction)
            .map(|(m, d)| m - step * d)
            .collect()
    }

    /// Clamp prices to the floor (plus any criterion-specific projection);
    /// returns how many entries the floor clamped.
    fn project_mu(&self, mu: &mut [f64], floor: f64) -> usize {
        let mut hits = 0;
        for m in mu.iter_mut() {
            if *m < floor {
                *m = floor;
                hits += 1;
            }
        }
        hits
    }

    /// Relative optimality-condition violation at the current iterate; the
    /// loop stops once both this and the duality gap are small.
    fn stationarity(&self, mu: &[f64], achieved: &[f64], aux: &[f64]) -> f64;

    /// For linear utilities: the fixed weights that reduce the whole dual
    /// loop to a single weighted sum-rate solve.
    fn fixed_weights(&self, _group_ids: &[usize]) -> Option<Vec<f64>> {
        None
    }
}

impl fmt::Debug for dyn Utility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Utility({})", self.kind())
    }
}

/// Proportional fairness: `g(r) = sum_k c * ln(r_k)`.
#[derive(Debug, Clone, Copy)]
pub struct Pfs {
    pub c: f64,
}

impl Utility for Pfs {
    fn kind(&self) -> &'static str {
        "pfs"
    }

    fn value(&self, _ids: &[usize], rates: &[f64]) -> f64 {
        rates.iter().map(|r| self.c * r.ln()).sum()
    }

    fn auxiliary_rates(&self, mu: &[f64], _achieved: &[f64]) -> Vec<f64> {
        // KKT of the inner problem: c / r_k = mu_k.
        mu.iter().map(|m| self.c / m).collect()
    }

    fn dual_intercept(&self, mu: &[f64]) -> f64 {
        // At r_k = c/mu_k: sum_k [c ln(c/mu_k) - c].
        mu.iter().map(|m| self.c * ((self.c / m).ln() - 1.0)).sum()
    }

    fn initial_mu(&self, num_groups: usize) -> Vec<f64> {
        vec![1.0; num_groups]
    }

    fn stationarity(&self, mu: &[f64], achieved: &[f64], _aux: &[f64]) -> f64 {
        // |mu_k R_k - c| / c over the achieved rates; the auxiliary
        // maximizer satisfies it exactly by construction, so the achieved
        // version is the one that actually measures convergence.
        mu.iter()
            .zip(achieved)
            .map(|(m, r)| (m * r - self.c).abs() / self.c)
            .fold(0.0, f64::max)
    }
}

/// Hard (max-min) fairness: `g(r) = c * min_k r_k`.
///
/// Solved through the single-rate reformulation: one auxiliary rate `r`
/// constrained by every group rate.  Its dual is finite on the simplex
/// `sum_k mu_k = c`, and the subgradient `R_k - mean(R)` sums to zero, so the
/// updates stay on the simplex by themselves; the projection re-normalizes
/// only to absorb floor clamps.
#[derive(Debug, Clone, Copy)]
pub struct Hfs {
    pub c: f64,
}

impl Utility for Hfs {
    fn kind(&self) -> &'static str {
        "hfs"
    }

    fn value(&self, _ids: &[usize], rates: &[f64]) -> f64 {
        self.c * rates.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    fn auxiliary_rates(&self, _mu: &[f64], achieved: &[f64]) -> Vec<f64> {
        let mean = achieved.iter().sum::<f64>() / achieved.len() as f64;
        vec![mean; achieved.len()]
    }

    fn dual_intercept(&self, _mu: &[f64]) -> f64 {
        // On the simplex the auxiliary term of the dual vanishes.
        0.0
    }

    fn initial_mu(&self, num_groups: usize) -> Vec<f64> {
        vec![self.c / num_groups as f64; num_groups]
    }

    fn update_prices(&self, mu: &[f64], direction: &[f64], step: f64) -> Vec<f64> {
        // Entropic (multiplicative) step: the max-min dual lives on the
        // simplex sum(mu) = c, where relative price moves are the natural
        // coordinates.  The exponent is normalized so the step scalar means
        // the same relative displacement as in the additive update.
        let mean = mu.iter().sum::<f64>() / mu.len() as f64;
        mu.iter()
            .zip(direction)
            .map(|(m, d)| m * (-step * d / mean).clamp(-50.0, 50.0).exp())
            .collect()
    }

    fn project_mu(&self, mu: &mut [f64], floor: f64) -> usize {
        let mut hits = 0;
        for m in mu.iter_mut() {
            if *m < floor {
                *m = floor;
                hits += 1;
            }
        }
        let total: f64 = mu.iter().sum();
        if total > 0.0 {
            let scale = self.c / total;
            for m in mu.iter_mut() {
                *m = (*m * scale).max(floor);
            }
        }
        hits
    }

    fn stationarity(&self, _mu: &[f64], achieved: &[f64], _aux: &[f64]) -> f64 {
        let max = achieved.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = achieved.iter().cloned().fold(f64::INFINITY, f64::min);
        let mean = achieved.iter().sum::<f64>() / achieved.len() as f64;
        if mean <= 0.0 {
            0.0
        } else {
            (max - min) / mean
        }
    }
}

/// Fixed weighted sum `g(r) = sum_k w_k r_k`; the dual loop degenerates to a
/// single weighted sum-rate maximization.
#[derive(Debug, Clone)]
pub struct WeightedSum {
    /// Weights indexed by global group id.
    pub weights: Vec<f64>,
}

impl Utility for WeightedSum {
    fn kind(&self) -> &'static str {
        "weighted"
    }

    fn value(&self, group_ids: &[usize], rates: &[f64]) -> f64 {
        group_ids
            .iter()
            .zip(rates)
            .map(|(&g, r)| self.weights[g] * r)
            .sum()
    }

    fn auxiliary_rates(&self, _mu: &[f64], achieved: &[f64]) -> Vec<f64> {
        achieved.to_vec()
    }

    fn dual_intercept(&self, _mu: &[f64]) -> f64 {
        0.0
    }

    fn initial_mu(&self, num_groups: usize) -> Vec<f64> {
        vec![1.0; num_groups]
    }

    fn stationarity(&self, _mu: &[f64], _achieved: &[f64], _aux: &[f64]) -> f64 {
        0.0
    }

    fn fixed_weights(&self, group_ids: &[usize]) -> Option<Vec<f64>> {
        Some(group_ids.iter().map(|&g| self.weights[g]).collect())
    }
}

/// Parameters used by the registry factories.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilitySpec {
    /// Registry name of the criterion.
    pub kind: String,
    /// Positive utility scale; the optimizer is invariant to it.
    pub c: f64,
    /// Global per-group weights, required by `"weighted"`.
    pub weights: Option<Vec<f64>>,
}

impl UtilitySpec {
    pub fn new(kind: &str) -> Self {
        UtilitySpec {
            kind: kind.to_string(),
            c: 1.0,
            weights: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.c.is_nan() || self.c <= 0.0 {
            return Err(Error::InvalidInput("utility constant must be positive".into()));
        }
        if let Some(w) = &self.weights {
            if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::InvalidInput(
                    "utility weights must be finite and non-negative".into(),
                ));
            }
        }
        Ok(())
    }
}

type Factory = Box<dyn Fn(&UtilitySpec) -> Result<Box<dyn Utility>> + Send + Sync>;

/// Name-indexed registry of utility criteria.
///
/// The standard registry knows `"pfs"`, `"hfs"` and `"weighted"`; callers can
/// register additional criteria under new names.
pub struct UtilityRegistry {
    factories: BTreeMap<String, Factory>,
}

impl UtilityRegistry {
    pub fn empty() -> Self {
        UtilityRegistry { factories: BTreeMap::new() }
    }

    pub fn standard() -> Self {
        let mut reg = Self::empty();
        reg.register("pfs", |spec| {
            spec.validate()?;
            Ok(Box::new(Pfs { c: spec.c }) as Box<dyn Utility>)
        });
        reg.register("hfs", |spec| {
            spec.validate()?;
            Ok(Box::new(Hfs { c: spec.c }) as Box<dyn Utility>)
        });
        reg.register("weighted", |spec| {
            spec.validate()?;
            let weights = spec.weights.clone().ok_or_else(|| {
                Error::InvalidInput("weighted mode requires explicit weights".into())
            })?;
            Ok(Box::new(WeightedSum { weights }) as Box<dyn Utility>)
        });
        reg
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&UtilitySpec) -> Result<Box<dyn Utility>> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn create(&self, spec: &UtilitySpec) -> Result<Box<dyn Utility>> {
        match self.factories.get(&spec.kind) {
            Some(f) => f(spec),
            None => Err(Error::InvalidInput(format!(
                "unknown utility '{}'; available: {}",
                spec.kind,
                self.names().join(", ")
            ))),
        }
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(|s| s.as_str()).collect()
    }
}

impl Default for UtilityRegistry {
    fn default() -> Self {
        Self::standard()
    }
}
