//! Cellular scenario description and its reduction to per-cluster problems.
//!
//! A [`Scenario`] holds base stations, co-located user groups, propagation
//! parameters, and a partition of both into cooperation clusters.  Each
//! cluster acts as one distributed MIMO transmitter; interference from the
//! other clusters is treated as noise.  [`Scenario::cluster_problems`] reduces
//! every cluster to a [`ClusterProblem`]: an equivalent multiple-access
//! ("dual uplink") instance with noise-normalized amplitude gains.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagation::{
    antenna_gain_linear, db_to_linear, pathloss_amplitude, AntennaParams, LayoutKind,
    PathlossParams, Point,
};

/// One base station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsConfig {
    pub position_km: Point,
    /// Antenna boresight, degrees (ignored when the pattern is disabled).
    #[serde(default)]
    pub boresight_deg: f64,
    /// Antennas per user dimension; every BS must use the same value.
    pub gamma: u32,
}

/// One co-located user group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupConfig {
    pub position_km: Point,
}

/// One cooperation cluster: a set of BS indices and the group indices served
/// by them (0-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub bs: Vec<usize>,
    pub groups: Vec<usize>,
}

/// Serializable scenario description; fields mirror the JSON schema
/// one-to-one.  Distances are km, `per_bs_power_db` is dB relative to the
/// unit noise power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub bs_list: Vec<BsConfig>,
    pub group_list: Vec<GroupConfig>,
    pub per_bs_power_db: f64,
    pub pathloss: PathlossParams,
    pub antenna: AntennaParams,
    pub layout: LayoutKind,
    pub partition: Vec<ClusterSpec>,
}

/// A validated scenario.
///
/// Immutable after construction and safe to share across worker threads.
#[derive(Debug, Clone)]
pub struct Scenario {
    config: ScenarioConfig,
    power_linear: f64,
    cluster_of_group: Vec<usize>,
    warnings: Vec<String>,
}

impl Scenario {
    /// Validate a configuration.
    ///
    /// Structural defects (partition errors, non-finite positions, bad
    /// parameters) are hard errors.  The symmetric-cluster assumption --
    /// every cluster has the same number of BSs and the same multiset of
    /// in-cluster group-to-BS distance profiles -- is checked and reported as
    /// a warning when violated, since the cluster reduction leans on it.
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        let m = config.bs_list.len();
        let k = config.group_list.len();
        if m == 0 || k == 0 {
            return Err(Error::InvalidScenario(
                "scenario needs at least one BS and one group".into(),
            ));
        }
        for (i, bs) in config.bs_list.iter().enumerate() {
            if bs.gamma < 1 {
                return Err(Error::InvalidScenario(format!("bs {i}: gamma must be >= 1")));
            }
            if !bs.position_km.iter().all(|v| v.is_finite())
                || !bs.boresight_deg.is_finite()
            {
                return Err(Error::InvalidScenario(format!("bs {i}: non-finite field")));
            }
        }
        let gamma0 = config.bs_list[0].gamma;
        if config.bs_list.iter().any(|b| b.gamma != gamma0) {
            return Err(Error::InvalidScenario(
                "all BSs must share the same antennas-per-user-dimension".into(),
            ));
        }
        for (i, g) in config.group_list.iter().enumerate() {
            if !g.position_km.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidScenario(format!("group {i}: non-finite position")));
            }
        }
        if !config.per_bs_power_db.is_finite() {
            return Err(Error::InvalidScenario("per_bs_power_db must be finite".into()));
        }
        let p = &config.pathloss;
        if [p.g0, p.eta, p.d0_km, p.d_min_km].iter().any(|v| v.is_nan() || *v <= 0.0) {
            return Err(Error::InvalidScenario(
                "pathloss parameters must be positive".into(),
            ));
        }
        if config.antenna.enabled
            && (config.antenna.theta_3db_deg.is_nan() || config.antenna.theta_3db_deg <= 0.0)
        {
            return Err(Error::InvalidScenario("theta_3db_deg must be positive".into()));
        }
        if let LayoutKind::HexTorus { cell_radius_km } = config.layout {
            if cell_radius_km.is_nan() || cell_radius_km <= 0.0 {
                return Err(Error::InvalidScenario("cell_radius_km must be positive".into()));
            }
        }

        // Partition checks: every BS and every group in exactly one cluster,
        // no empty cluster.
        if config.partition.is_empty() {
            return Err(Error::InvalidScenario("partition is empty".into()));
        }
        let mut bs_seen = vec![false; m];
        let mut group_seen = vec![false; k];
        let mut cluster_of_group = vec![0usize; k];
        for (ell, cl) in config.partition.iter().enumerate() {
            if cl.bs.is_empty() || cl.groups.is_empty() {
                return Err(Error::InvalidScenario(format!(
                    "cluster {ell} has an empty BS or group set"
                )));
            }
            for &b in &cl.bs {
                if b >= m {
                    return Err(Error::InvalidScenario(format!(
                        "cluster {ell}: BS index {b} out of range"
                    )));
                }
                if bs_seen[b] {
                    return Err(Error::InvalidScenario(format!(
                        "BS {b} appears in more than one cluster"
                    )));
                }
                bs_seen[b] = true;
            }
            for &g in &cl.groups {
                if g >= k {
                    return Err(Error::InvalidScenario(format!(
                        "cluster {ell}: group index {g} out of range"
                    )));
                }
                if group_seen[g] {
                    return Err(Error::InvalidScenario(format!(
                        "group {g} appears in more than one cluster"
                    )));
                }
                group_seen[g] = true;
                cluster_of_group[g] = ell;
            }
        }
        if let Some(b) = bs_seen.iter().position(|s| !s) {
            return Err(Error::InvalidScenario(format!("BS {b} is in no cluster")));
        }
        if let Some(g) = group_seen.iter().position(|s| !s) {
            return Err(Error::InvalidScenario(format!("group {g} is in no cluster")));
        }

        let mut scenario = Scenario {
            power_linear: db_to_linear(config.per_bs_power_db),
            config,
            cluster_of_group,
            warnings: Vec::new(),
        };
        scenario.check_symmetry();
        if scenario.config.antenna.enabled && scenario.config.layout == LayoutKind::Linear {
            scenario.warnings.push(
                "antenna pattern is only applied in the hex layout; enabled flag ignored".into(),
            );
        }
        Ok(scenario)
    }

    fn check_symmetry(&mut self) {
        let sizes: Vec<usize> = self.config.partition.iter().map(|c| c.bs.len()).collect();
        if sizes.windows(2).any(|w| w[0] != w[1]) {
            self.warnings.push(format!(
                "asymmetric clusters: BS counts {sizes:?} differ; the cluster reduction assumes symmetric clusters"
            ));
            return;
        }
        // Per cluster: multiset of per-group sorted in-cluster distance
        // profiles, compared lexicographically across clusters.
        let mut profiles: Vec<Vec<Vec<f64>>> = Vec::new();
        for cl in &self.config.partition {
            let mut per_group: Vec<Vec<f64>> = cl
                .groups
                .iter()
                .map(|&g| {
                    let mut ds: Vec<f64> = cl
                        .bs
                        .iter()
                        .map(|&b| {
                            self.config.layout.distance(
                                self.config.bs_list[b].position_km,
                                self.config.group_list[g].position_km,
                            )
                        })
                        .collect();
                    ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    ds
                })
                .collect();
            per_group.sort_by(|a, b| a.partial_cmp(b).unwrap());
            profiles.push(per_group);
        }
        let tol = 1e-9;
        let reference = &profiles[0];
        for (ell, prof) in profiles.iter().enumerate().skip(1) {
            let same = prof.len() == reference.len()
                && prof.iter().zip(reference.iter()).all(|(a, b)| {
                    a.len() == b.len()
                        && a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= tol)
                });
            if !same {
                self.warnings.push(format!(
                    "asymmetric clusters: cluster {ell} has a different group-to-BS distance profile than cluster 0"
                ));
                return;
            }
        }
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn num_bs(&self) -> usize {
        self.config.bs_list.len()
    }

    pub fn num_groups(&self) -> usize {
        self.config.group_list.len()
    }

    pub fn num_clusters(&self) -> usize {
        self.config.partition.len()
    }

    pub fn gamma(&self) -> u32 {
        self.config.bs_list[0].gamma
    }

    /// Per-BS transmit power, linear.
    pub fn power_linear(&self) -> f64 {
        self.power_linear
    }

    /// Diagnostics collected during validation.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn cluster_of_group(&self, group: usize) -> usize {
        self.cluster_of_group[group]
    }

    /// Amplitude gain from BS `bs` to group `group`, including the antenna
    /// pattern when enabled (hex layout only).  Distance and angle use the
    /// nearest wrap image of the group.
    pub fn coupling_gain(&self, bs: usize, group: usize) -> f64 {
        let b = &self.config.bs_list[bs];
        let g = &self.config.group_list[group];
        let (vec, dist) = self.config.layout.displacement_to(b.position_km, g.position_km);
        let mut amp = pathloss_amplitude(dist, &self.config.pathloss)
            .expect("validated scenario has finite distances");
        if self.config.antenna.enabled && !matches!(self.config.layout, LayoutKind::Linear) {
            let angle = vec[1].atan2(vec[0]).to_degrees() - b.boresight_deg;
            amp *= antenna_gain_linear(angle, &self.config.antenna).sqrt();
        }
        amp
    }

    /// Interference-plus-noise variance at group `group`: unit noise plus the
    /// received power from every out-of-cluster BS at full per-BS power.
    pub fn interference_variance(&self, group: usize) -> f64 {
        let ell = self.cluster_of_group[group];
        let own: &ClusterSpec = &self.config.partition[ell];
        let mut sum = 0.0;
        for bs in 0..self.num_bs() {
            if own.bs.contains(&bs) {
                continue;
            }
            let a = self.coupling_gain(bs, group);
            sum += a * a * self.power_linear;
        }
        1.0 + sum
    }

    /// Reduce every cooperation cluster to its dual-uplink instance.
    ///
    /// Rows follow ascending BS index within the cluster, columns ascending
    /// group index; identical inputs produce bit-identical outputs.
    pub fn cluster_problems(&self) -> Vec<ClusterProblem> {
        self.config
            .partition
            .iter()
            .enumerate()
            .map(|(ell, cl)| {
                let mut bs_ids = cl.bs.clone();
                bs_ids.sort_unstable();
                let mut group_ids = cl.groups.clone();
                group_ids.sort_unstable();
                let sigma2: Vec<f64> = group_ids
                    .iter()
                    .map(|&g| self.interference_variance(g))
                    .collect();
                let mut gains = DMatrix::zeros(bs_ids.len(), group_ids.len());
                for (row, &b) in bs_ids.iter().enumerate() {
                    for (col, &g) in group_ids.iter().enumerate() {
                        gains[(row, col)] = self.coupling_gain(b, g) / sigma2[col].sqrt();
                    }
                }
                ClusterProblem {
                    cluster_id: ell,
                    group_ids,
                    bs_ids,
                    gamma: self.gamma(),
                    sum_power: self.power_linear * cl.bs.len() as f64,
                    gains,
                    sigma2,
                }
            })
            .collect()
    }
}

/// One cluster's dual-uplink instance.
///
/// `gains[(m, k)]` is the amplitude gain from in-cluster BS `m` to group `k`
/// divided by the group's interference-plus-noise standard deviation; the
/// receive dimension per user dimension is `gamma * num_bs` and the sum power
/// budget is `num_bs * per-BS power`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterProblem {
    pub cluster_id: usize,
    /// Global group indices, ascending; column order of `gains`.
    pub group_ids: Vec<usize>,
    /// Global BS indices, ascending; row order of `gains`.
    pub bs_ids: Vec<usize>,
    pub gamma: u32,
    /// Cluster sum power budget, linear.
    pub sum_power: f64,
    /// Noise-normalized amplitude gains, `num_bs x num_groups`.
    pub gains: DMatrix<f64>,
    /// Interference-plus-noise variances per group (>= 1).
    pub sigma2: Vec<f64>,
}

impl ClusterProblem {
    /// Number of user groups served by the cluster.
    pub fn num_groups(&self) -> usize {
        self.gains.ncols()
    }

    pub fn num_bs(&self) -> usize {
        self.gains.nrows()
    }

    /// Receive dimensions per user dimension.
    pub fn rx_dim(&self) -> usize {
        self.gamma as usize * self.num_bs()
    }

    /// Build a bare problem from a gain matrix; used by solvers' tests and
    /// synthetic benchmarks.
    pub fn synthetic(gains: DMatrix<f64>, gamma: u32, sum_power: f64) -> Self {
        let a = gains.ncols();
        ClusterProblem {
            cluster_id: 0,
            group_ids: (0..a).collect(),
            bs_ids: (0..gains.nrows()).collect(),
            gamma,
            sum_power,
            sigma2: vec![1.0; a],
            gains,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layouts;

    #[test]
    fn full_cooperation_has_unit_noise() {
        let config = layouts::two_cell(layouts::TwoCellCooperation::Full);
        let s = Scenario::new(config).unwrap();
        for g in 0..s.num_groups() {
            assert_eq!(s.interference_variance(g), 1.0);
        }
        let problems = s.cluster_problems();
        assert_eq!(problems.len(), 1);
        let p = &problems[0];
        assert_eq!(p.num_groups(), 8);
        assert_eq!(p.num_bs(), 2);
        assert_eq!(p.rx_dim(), 2 * 4);
        assert!((p.sum_power - 2.0 * s.power_linear()).abs() < 1e-12);
        // With sigma = 1 the normalized gains equal the raw coupling gains.
        for m in 0..2 {
            for k in 0..8 {
                assert_eq!(p.gains[(m, k)], s.coupling_gain(m, k));
            }
        }
    }

    #[test]
    fn interference_variance_arithmetic_instance() {
        // One out-of-cluster BS with amplitude gain 0.1 and power 100:
        // sigma^2 = 1 + 0.01 * 100 = 2.  Rig the pathloss so the gain at
        // distance 10 km is exactly 0.1.
        let config = ScenarioConfig {
            bs_list: vec![
                BsConfig { position_km: [0.0, 0.0], boresight_deg: 0.0, gamma: 1 },
                BsConfig { position_km: [10.0, 0.0], boresight_deg: 0.0, gamma: 1 },
            ],
            group_list: vec![
                GroupConfig { position_km: [0.0, 0.0] },
                GroupConfig { position_km: [10.0, 0.0] },
            ],
            per_bs_power_db: 20.0,
            pathloss: PathlossParams { g0: 1.0, eta: 2.0, d0_km: 1.0, d_min_km: 0.035 },
            antenna: AntennaParams::default(),
            layout: LayoutKind::Linear,
            partition: vec![
                ClusterSpec { bs: vec![0], groups: vec![0] },
                ClusterSpec { bs: vec![1], groups: vec![1] },
            ],
        };
        let s = Scenario::new(config).unwrap();
        let sigma2 = s.interference_variance(0);
        assert!((sigma2 - 2.0).abs() < 1e-12, "sigma^2 = {sigma2}");
    }

    #[test]
    fn no_cooperation_interference_grows_toward_interferer() {
        let config = layouts::two_cell(layouts::TwoCellCooperation::None);
        let s = Scenario::new(config).unwrap();
        // Groups 0..3 sit in cluster 0 (BS at -1 km); moving right moves
        // toward the interfering BS at +1 km.
        let mut prev = s.interference_variance(0);
        for g in 1..4 {
            let v = s.interference_variance(g);
            assert!(v > prev, "sigma^2 must grow toward the interferer");
            prev = v;
        }
        let problems = s.cluster_problems();
        assert_eq!(problems.len(), 2);
        for p in &problems {
            assert_eq!(p.num_groups(), 4);
            assert_eq!(p.num_bs(), 1);
        }
        // beta = alpha / sqrt(1 + alpha_other^2 P) for each group.
        let p0 = &problems[0];
        for (col, &g) in p0.group_ids.iter().enumerate() {
            let alpha_own = s.coupling_gain(0, g);
            let alpha_other = s.coupling_gain(1, g);
            let expected = alpha_own
                / (1.0 + alpha_other * alpha_other * s.power_linear()).sqrt();
            assert!((p0.gains[(0, col)] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn beta_decreases_when_out_of_cluster_gain_grows() {
        // Fixed in-cluster geometry; push the interfering BS closer and the
        // normalized gain of the affected group must strictly drop.
        let base = layouts::two_cell(layouts::TwoCellCooperation::None);
        let s1 = Scenario::new(base.clone()).unwrap();
        let mut closer = base;
        closer.bs_list[1].position_km = [0.5, 0.0];
        // Keep the same in-cluster distances for cluster 0.
        let s2 = Scenario::new(closer).unwrap();
        let b1 = s1.cluster_problems()[0].gains[(0, 0)];
        let b2 = s2.cluster_problems()[0].gains[(0, 0)];
        assert!(b2 < b1, "stronger interference must shrink beta: {b2} !< {b1}");
    }

    #[test]
    fn seven_cell_sector_cooperation_shape() {
        let layout = layouts::seven_cell(layouts::SevenCellCooperation::Sector);
        let s = Scenario::new(layout.config).unwrap();
        assert_eq!(s.num_bs(), 21);
        assert_eq!(s.num_groups(), 84);
        let problems = s.cluster_problems();
        assert_eq!(problems.len(), 7);
        for p in &problems {
            assert_eq!(p.num_bs(), 3);
            assert_eq!(p.num_groups(), 12);
        }
        assert!(
            s.warnings().is_empty(),
            "wrap-around layout should be symmetric: {:?}",
            s.warnings()
        );
    }

    #[test]
    fn determinism_bitwise() {
        let config = layouts::seven_cell(layouts::SevenCellCooperation::None).config;
        let a = Scenario::new(config.clone()).unwrap().cluster_problems();
        let b = Scenario::new(config).unwrap().cluster_problems();
        assert_eq!(a, b);
    }

    #[test]
    fn partition_errors_are_rejected() {
        let mut config = layouts::two_cell(layouts::TwoCellCooperation::Full);
        config.partition = vec![ClusterSpec { bs: vec![0, 1], groups: vec![0, 1, 2] }];
        assert!(Scenario::new(config).is_err(), "missing groups must fail");

        let mut config = layouts::two_cell(layouts::TwoCellCooperation::Full);
        config.partition[0].bs.push(0);
        assert!(Scenario::new(config).is_err(), "duplicate BS must fail");

        let mut config = layouts::two_cell(layouts::TwoCellCooperation::Full);
        config.partition = vec![
            ClusterSpec { bs: vec![0, 1], groups: (0..8).collect() },
            ClusterSpec { bs: vec![], groups: vec![] },
        ];
        assert!(Scenario::new(config).is_err(), "empty cluster must fail");
    }

    #[test]
    fn asymmetric_partition_warns() {
        let mut config = layouts::two_cell(layouts::TwoCellCooperation::None);
        config.partition = vec![
            ClusterSpec { bs: vec![0], groups: vec![0] },
            ClusterSpec { bs: vec![1], groups: (1..8).collect() },
        ];
        let s = Scenario::new(config).unwrap();
        assert!(
            s.warnings().iter().any(|w| w.contains("asymmetric")),
            "expected a symmetry warning, got {:?}",
            s.warnings()
        );
    }

    #[test]
    fn mixed_gamma_rejected() {
        let mut config = layouts::two_cell(layouts::TwoCellCooperation::Full);
        config.bs_list[1].gamma = 2;
        assert!(Scenario::new(config).is_err());
    }
}
