//! Built-in cellular layouts.
//!
//! Two families are provided, matching the linear 2-cell and the wrap-around
//! three-sectored 7-cell arrangements the tool is meant to study:
//!
//! * [`two_cell`]: BSs at -1 km and +1 km, 8 user groups at the centers of 8
//!   equal segments between them, antenna pattern off.
//! * [`seven_cell`]: 7 hexagonal cells of radius 1 km on a torus, three
//!   co-located BSs per cell center with boresights 120° apart, each sector
//!   split into 4 equal-area diamond grids with one group at each grid
//!   center, antenna pattern on.
//!
//! Default propagation: pathloss exponent 3.76 with a 20 dB cell-edge SNR at
//! 1 km (g0 = 100 at unit transmit power), minimum distance 35 m.

use crate::propagation::{AntennaParams, LayoutKind, PathlossParams, Point};
use crate::scenario::{BsConfig, ClusterSpec, GroupConfig, ScenarioConfig};

/// Antennas per user dimension used by the built-in layouts.
pub const DEFAULT_GAMMA: u32 = 4;
/// Per-BS transmit power, dB over noise.
pub const DEFAULT_POWER_DB: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoCellCooperation {
    /// Both BSs form one cluster serving all groups.
    Full,
    /// Each BS serves the 4 groups on its side.
    None,
}

/// Linear 2-cell layout with `K = 8` groups.
pub fn two_cell(coop: TwoCellCooperation) -> ScenarioConfig {
    let k = 8usize;
    let bs_list = vec![
        BsConfig { position_km: [-1.0, 0.0], boresight_deg: 0.0, gamma: DEFAULT_GAMMA },
        BsConfig { position_km: [1.0, 0.0], boresight_deg: 180.0, gamma: DEFAULT_GAMMA },
    ];
    // Segment centers: -1 + (2i+1)/k for i = 0..k.
    let group_list: Vec<GroupConfig> = (0..k)
        .map(|i| GroupConfig { position_km: [-1.0 + (2 * i + 1) as f64 / k as f64, 0.0] })
        .collect();
    let partition = match coop {
        TwoCellCooperation::Full => vec![ClusterSpec { bs: vec![0, 1], groups: (0..k).collect() }],
        TwoCellCooperation::None => vec![
            ClusterSpec { bs: vec![0], groups: (0..k / 2).collect() },
            ClusterSpec { bs: vec![1], groups: (k / 2..k).collect() },
        ],
    };
    ScenarioConfig {
        bs_list,
        group_list,
        per_bs_power_db: DEFAULT_POWER_DB,
        pathloss: PathlossParams::default(),
        antenna: AntennaParams { enabled: false, ..AntennaParams::default() },
        layout: LayoutKind::Linear,
        partition,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SevenCellCooperation {
    /// Every sector BS on its own (21 clusters).
    None,
    /// The 3 co-located sector BSs of each cell cooperate (7 clusters).
    Sector,
    /// All 21 BSs cooperate (1 cluster).
    Full,
}

/// A 7-cell configuration plus bookkeeping about the grid geometry.
#[derive(Debug, Clone)]
pub struct SevenCellLayout {
    pub config: ScenarioConfig,
    /// Groups at the outermost grid center of their sector (0.75 km from the
    /// cell center).
    pub edge_group_ids: Vec<usize>,
    /// Groups at the innermost grid center (0.25 km).
    pub inner_group_ids: Vec<usize>,
    /// Cell index (0..7) of each group.
    pub cell_of_group: Vec<usize>,
}

/// Three-sectored 7-cell hexagonal layout on a wrap-around torus.
pub fn seven_cell(coop: SevenCellCooperation) -> SevenCellLayout {
    let r = 1.0f64;
    let sqrt3 = 3.0f64.sqrt();
    // Cell centers: origin plus 6 neighbors at distance sqrt(3)·r.
    let mut centers: Vec<Point> = vec![[0.0, 0.0]];
    for j in 0..6 {
        let ang = (30.0 + 60.0 * j as f64).to_radians();
        centers.push([sqrt3 * r * ang.cos(), sqrt3 * r * ang.sin()]);
    }

    // Flat-top hexagon vertices at angles 0°, 60°, ..., 300° and circumradius
    // r.  Sector s of a cell is the rhombus spanned by the vertex directions
    // 120·s and 120·s + 60 (+ the next vertex); its long diagonal, and the
    // sector boresight, points at 120·s + 60 degrees.
    let mut bs_list = Vec::with_capacity(21);
    let mut group_list = Vec::with_capacity(84);
    let mut edge_group_ids = Vec::new();
    let mut inner_group_ids = Vec::new();
    let mut cell_of_group = Vec::with_capacity(84);
    for (cell, &c) in centers.iter().enumerate() {
        for sector in 0..3 {
            let base = 120.0 * sector as f64;
            bs_list.push(BsConfig {
                position_km: c,
                boresight_deg: base + 60.0,
                gamma: DEFAULT_GAMMA,
            });
            let u = unit(base.to_radians(), r);
            let w = unit((base + 120.0).to_radians(), r);
            // The rhombus tiles into 4 half-scale rhombi with centers at
            // (u+w)/4 + {0, u/2, w/2, (u+w)/2}.
            let offsets = [[0.0, 0.0], half(u), half(w), half(add(u, w))];
            for (grid, off) in offsets.iter().enumerate() {
                let center = [
                    c[0] + (u[0] + w[0]) / 4.0 + off[0],
                    c[1] + (u[1] + w[1]) / 4.0 + off[1],
                ];
                let id = group_list.len();
                group_list.push(GroupConfig { position_km: center });
                cell_of_group.push(cell);
                if grid == 0 {
                    inner_group_ids.push(id);
                } else if grid == 3 {
                    edge_group_ids.push(id);
                }
            }
        }
    }

    let partition = match coop {
        SevenCellCooperation::None => (0..21)
            .map(|b| ClusterSpec { bs: vec![b], groups: (4 * b..4 * b + 4).collect() })
            .collect(),
        SevenCellCooperation::Sector => (0..7)
            .map(|cell| ClusterSpec {
                bs: (3 * cell..3 * cell + 3).collect(),
                groups: (12 * cell..12 * cell + 12).collect(),
            })
            .collect(),
        SevenCellCooperation::Full => {
            vec![ClusterSpec { bs: (0..21).collect(), groups: (0..84).collect() }]
        }
    };

    SevenCellLayout {
        config: ScenarioConfig {
            bs_list,
            group_list,
            per_bs_power_db: DEFAULT_POWER_DB,
            pathloss: PathlossParams::default(),
            antenna: AntennaParams { enabled: true, ..AntennaParams::default() },
            layout: LayoutKind::HexTorus { cell_radius_km: r },
            partition,
        },
        edge_group_ids,
        inner_group_ids,
        cell_of_group,
    }
}

fn unit(angle_rad: f64, scale: f64) -> Point {
    [scale * angle_rad.cos(), scale * angle_rad.sin()]
}

fn half(p: Point) -> Point {
    [p[0] / 2.0, p[1] / 2.0]
}

fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;

    #[test]
    fn two_cell_groups_are_mirror_symmetric() {
        let config = two_cell(TwoCellCooperation::Full);
        assert_eq!(config.group_list.len(), 8);
        for i in 0..8 {
            let x = config.group_list[i].position_km[0];
            let mirrored = config.group_list[7 - i].position_km[0];
            assert!((x + mirrored).abs() < 1e-15, "{x} vs {mirrored}");
        }
        assert!((config.group_list[0].position_km[0] + 0.875).abs() < 1e-15);
    }

    #[test]
    fn seven_cell_grid_distances() {
        // Per sector the four grid centers sit at 0.25, sqrt(7)/4, sqrt(7)/4
        // and 0.75 km from the cell center.
        let layout = seven_cell(SevenCellCooperation::None);
        let sqrt7_4 = 7.0f64.sqrt() / 4.0;
        for cell in 0..7 {
            for sector in 0..3 {
                let c = layout.config.bs_list[3 * cell + sector].position_km;
                let mut ds: Vec<f64> = (0..4)
                    .map(|grid| {
                        let g = layout.config.group_list[12 * cell + 4 * sector + grid]
                            .position_km;
                        ((g[0] - c[0]).powi(2) + (g[1] - c[1]).powi(2)).sqrt()
                    })
                    .collect();
                ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let expected = [0.25, sqrt7_4, sqrt7_4, 0.75];
                for (d, e) in ds.iter().zip(expected.iter()) {
                    assert!((d - e).abs() < 1e-12, "distance {d} vs expected {e}");
                }
            }
        }
        assert_eq!(layout.edge_group_ids.len(), 21);
        assert_eq!(layout.inner_group_ids.len(), 21);
    }

    #[test]
    fn seven_cell_partitions_validate_cleanly() {
        for coop in [
            SevenCellCooperation::None,
            SevenCellCooperation::Sector,
            SevenCellCooperation::Full,
        ] {
            let layout = seven_cell(coop);
            let s = Scenario::new(layout.config).unwrap();
            assert!(s.warnings().is_empty(), "{coop:?}: {:?}", s.warnings());
        }
    }

    #[test]
    fn two_cell_dynamic_range_exceeds_30_db() {
        let s = Scenario::new(two_cell(TwoCellCooperation::Full)).unwrap();
        let p = s.power_linear();
        let mut snrs = Vec::new();
        for g in 0..8 {
            for b in 0..2 {
                let a = s.coupling_gain(b, g);
                snrs.push(a * a * p);
            }
        }
        let max = snrs.iter().cloned().fold(f64::MIN, f64::max);
        let min = snrs.iter().cloned().fold(f64::MAX, f64::min);
        assert!(
            10.0 * (max / min).log10() > 30.0,
            "dynamic range too small: {} dB",
            10.0 * (max / min).log10()
        );
    }
}
