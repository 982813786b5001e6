//! Independent-oracle checks for the power allocator and the deterministic
//! equivalents: exhaustive grid search over the power simplex, the finite-n
//! Monte Carlo estimator, and the built-in layouts end to end.

use cellrate::asymptotics::{
    allocate_powers, mutual_information, weighted_objective, PowerAllocation, SinrCoupling,
    SolverOptions, WeightOrder,
};
use cellrate::fairness::{solve_all_clusters, FairnessOptions, Hfs, Pfs};
use cellrate::layouts::{self, TwoCellCooperation};
use cellrate::montecarlo::empirical_logdet;
use cellrate::scenario::{ClusterProblem, Scenario};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exhaustive search of the weighted objective over the simplex
/// `sum q = budget` with the given step count.
fn grid_search(
    cluster: &ClusterProblem,
    order: &WeightOrder,
    opts: &SolverOptions,
    steps: usize,
) -> (f64, Vec<f64>) {
    let budget = cluster.sum_power;
    let a = cluster.num_groups();
    let eval = |q: Vec<f64>| -> (f64, Vec<f64>) {
        let f = weighted_objective(cluster, order, &PowerAllocation { powers: q.clone() }, opts)
            .expect("objective evaluation");
        (f, q)
    };
    let mut best = (f64::NEG_INFINITY, vec![0.0; a]);
    match a {
        1 => {
            best = eval(vec![budget]);
        }
        2 => {
            for t in 0..=steps {
                let q0 = budget * t as f64 / steps as f64;
                let cand = eval(vec![q0, budget - q0]);
                if cand.0 > best.0 {
                    best = cand;
                }
            }
        }
        3 => {
            for t0 in 0..=steps {
                let q0 = budget * t0 as f64 / steps as f64;
                for t1 in 0..=(steps - t0) {
                    let q1 = budget * t1 as f64 / steps as f64;
                    let cand = eval(vec![q0, q1, budget - q0 - q1]);
                    if cand.0 > best.0 {
                        best = cand;
                    }
                }
            }
        }
        _ => panic!("grid oracle supports up to 3 groups"),
    }
    best
}

fn random_instance(rng: &mut ChaCha8Rng) -> (ClusterProblem, WeightOrder) {
    let a = rng.gen_range(1..=3usize);
    let gamma = rng.gen_range(1..=2u32);
    let max_bs = 4 / gamma as usize;
    let num_bs = rng.gen_range(1..=max_bs);
    let gains = DMatrix::from_fn(num_bs, a, |_, _| rng.gen_range(0.1..1.5));
    let budget = rng.gen_range(0.5..10.0);
    let weights: Vec<f64> = (0..a).map(|_| rng.gen_range(0.1..2.0)).collect();
    (
        ClusterProblem::synthetic(gains, gamma, budget),
        WeightOrder::new(&weights).unwrap(),
    )
}

#[test]
fn allocator_matches_grid_search_on_random_instances() {
    let opts = SolverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for case in 0..20 {
        let (cluster, order) = random_instance(&mut rng);
        let (alloc, _) = allocate_powers(&cluster, &order, &opts).unwrap();
        let f_alg = weighted_objective(&cluster, &order, &alloc, &opts).unwrap();
        let steps = 1000;
        let (f_grid, q_grid) = grid_search(&cluster, &order, &opts, steps);
        assert!(
            (f_alg - f_grid).abs() <= 1e-3 * f_grid.abs(),
            "case {case}: allocator {f_alg} vs grid {f_grid} (q_alg {:?}, q_grid {:?})",
            alloc.powers,
            q_grid
        );
    }
}

#[test]
fn coupled_variant_matches_monte_carlo() {
    // Strongly asymmetric 2-group cluster: the coupled fixed points must sit
    // inside the Monte Carlo confidence band at n = 16; the shared variant's
    // deviation is printed for the record.
    let gains = DMatrix::from_row_slice(2, 2, &[1.3, 0.25, 0.2, 0.9]);
    let cluster = ClusterProblem::synthetic(gains, 1, 8.0);
    let order = WeightOrder::new(&[1.0, 2.0]).unwrap();
    let powers = PowerAllocation { powers: vec![5.0, 3.0] };

    let est = empirical_logdet(&cluster, &order, &powers, 0, 16, 500, 2026).unwrap();
    let coupled = mutual_information(
        &cluster,
        &order,
        &powers,
        0,
        &SolverOptions { coupling: SinrCoupling::Coupled, ..SolverOptions::default() },
    )
    .unwrap();
    let shared = mutual_information(
        &cluster,
        &order,
        &powers,
        0,
        &SolverOptions { coupling: SinrCoupling::Shared, ..SolverOptions::default() },
    )
    .unwrap();
    println!(
        "mc mean {:.6} +- {:.6}; coupled delta {:.2e}; shared delta {:.2e}",
        est.mean,
        est.stderr,
        (coupled - est.mean).abs(),
        (shared - est.mean).abs()
    );
    assert!(
        (coupled - est.mean).abs() <= 3.0 * est.stderr,
        "coupled deterministic equivalent misses the MC band: {} vs {} +- {}",
        coupled,
        est.mean,
        est.stderr
    );
}

#[test]
fn two_cell_pfs_rates_are_mirror_symmetric() {
    let scenario = Scenario::new(layouts::two_cell(TwoCellCooperation::Full)).unwrap();
    let clusters = scenario.cluster_problems();
    let reports =
        solve_all_clusters(&clusters, &Pfs { c: 1.0 }, &FairnessOptions::default()).unwrap();
    assert_eq!(reports.len(), 1);
    let report = &reports[0];
    assert!(report.converged, "{:?}", report.diagnostics);
    let r = report.rates_bits();
    for g in 0..4 {
        let (a, b) = (r[g], r[7 - g]);
        assert!(
            (a - b).abs() <= 8e-3 * a.max(b),
            "mirror groups {g}/{} diverge: {a} vs {b}",
            7 - g
        );
    }
}

#[test]
fn two_cell_no_cooperation_hfs_equalizes_all_rates() {
    let scenario = Scenario::new(layouts::two_cell(TwoCellCooperation::None)).unwrap();
    let clusters = scenario.cluster_problems();
    let reports =
        solve_all_clusters(&clusters, &Hfs { c: 1.0 }, &FairnessOptions::default()).unwrap();
    let mut rates = vec![0.0; 8];
    for rep in &reports {
        assert!(rep.converged, "{:?}", rep.diagnostics);
        for (local, &g) in rep.group_ids.iter().enumerate() {
            rates[g] = rep.rates_bits()[local];
        }
    }
    let max = rates.iter().cloned().fold(f64::MIN, f64::max);
    let min = rates.iter().cloned().fold(f64::MAX, f64::min);
    let mean = rates.iter().sum::<f64>() / 8.0;
    assert!(
        (max - min) / mean <= 1e-3,
        "HFS spread too wide: {rates:?}"
    );
}

#[test]
fn hfs_common_rate_beats_pfs_minimum_on_full_cooperation() {
    let scenario = Scenario::new(layouts::two_cell(TwoCellCooperation::Full)).unwrap();
    let clusters = scenario.cluster_problems();
    let opts = FairnessOptions::default();
    let pfs = solve_all_clusters(&clusters, &Pfs { c: 1.0 }, &opts).unwrap();
    let hfs = solve_all_clusters(&clusters, &Hfs { c: 1.0 }, &opts).unwrap();
    let min_pfs = pfs[0].rates_bits().iter().cloned().fold(f64::MAX, f64::min);
    let min_hfs = hfs[0].rates_bits().iter().cloned().fold(f64::MAX, f64::min);
    assert!(
        min_hfs >= min_pfs - 1e-6,
        "HFS min rate {min_hfs} fell below PFS min rate {min_pfs}"
    );
}
