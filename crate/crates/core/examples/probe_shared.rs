use cellrate::asymptotics::{mutual_information, PowerAllocation, SinrCoupling, SolverOptions, WeightOrder};
use cellrate::montecarlo::empirical_logdet;
use cellrate::scenario::ClusterProblem;
use nalgebra::DMatrix;

fn main() {
    // Heavily loaded, strongly asymmetric instances.
    let cases: Vec<(DMatrix<f64>, u32, Vec<f64>)> = vec![
        (DMatrix::from_row_slice(1, 2, &[3.0, 0.3]), 1, vec![6.0, 6.0]),
        (DMatrix::from_row_slice(1, 3, &[5.0, 1.0, 0.2]), 1, vec![8.0, 4.0, 2.0]),
        (DMatrix::from_row_slice(2, 3, &[4.0, 0.3, 1.0, 0.2, 3.5, 0.8]), 1, vec![5.0, 5.0, 2.0]),
        (DMatrix::from_row_slice(1, 4, &[8.0, 2.0, 0.5, 0.1]), 2, vec![10.0, 6.0, 3.0, 1.0]),
    ];
    for (i, (gains, gamma, q)) in cases.into_iter().enumerate() {
        let budget: f64 = q.iter().sum();
        let a = gains.ncols();
        let cluster = ClusterProblem::synthetic(gains, gamma, budget);
        let order = WeightOrder::new(&(1..=a).map(|x| x as f64).collect::<Vec<_>>()).unwrap();
        let powers = PowerAllocation { powers: q };
        let est = empirical_logdet(&cluster, &order, &powers, 0, 24, 800, 99).unwrap();
        for coupling in [SinrCoupling::Coupled, SinrCoupling::Shared] {
            let opts = SolverOptions { coupling, ..SolverOptions::default() };
            let mi = mutual_information(&cluster, &order, &powers, 0, &opts).unwrap();
            println!(
                "case {i} {:7}: de {mi:.6} mc {:.6}±{:.6} delta {:+.2e} ({:+.1} sigma)",
                coupling.name(),
                est.mean,
                est.stderr,
                mi - est.mean,
                (mi - est.mean) / est.stderr
            );
        }
    }
}
