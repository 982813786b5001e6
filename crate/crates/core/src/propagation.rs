//! Pathloss, antenna pattern, and layout distance primitives.
//!
//! Gains are kept as *amplitude* factors throughout; squaring gives the power
//! gain.  Distances are in km, angles in degrees, powers linear.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the plane, km.
pub type Point = [f64; 2];

/// Power-law pathloss `gain² = g0 · (max(d, d_min)/d0)^(-eta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathlossParams {
    /// Reference power gain at distance `d0_km` (linear).
    pub g0: f64,
    /// Pathloss exponent.
    pub eta: f64,
    /// Reference distance, km.
    pub d0_km: f64,
    /// Distances are clamped from below to this value, km.
    pub d_min_km: f64,
}

impl Default for PathlossParams {
    fn default() -> Self {
        // g0 = 100 with unit transmit power gives a 20 dB SNR at the 1 km
        // cell edge and >30 dB of dynamic range across a cell.
        Self {
            g0: 100.0,
            eta: 3.76,
            d0_km: 1.0,
            d_min_km: 0.035,
        }
    }
}

/// Parabolic sector antenna pattern with a front-to-back floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaParams {
    /// 3 dB beamwidth, degrees.
    pub theta_3db_deg: f64,
    /// Attenuation floor `a_m`, dB (pattern never drops below `-a_m`).
    pub front_back_db: f64,
    /// Whether the pattern is applied at all.
    pub enabled: bool,
}

impl Default for AntennaParams {
    fn default() -> Self {
        Self {
            theta_3db_deg: 70.0,
            front_back_db: 20.0,
            enabled: false,
        }
    }
}

/// Cell layout; fixes how distances between points are measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayoutKind {
    /// One-dimensional layout, plain Euclidean distance.
    Linear,
    /// Seven hexagonal cells wrapped on a torus: every point is identified
    /// with its six images under the 7-cell super-lattice translations, and
    /// distances are minimized over images.
    HexTorus { cell_radius_km: f64 },
}

impl LayoutKind {
    /// Displacement vectors that map the layout onto itself (identity first).
    pub fn wrap_displacements(&self) -> Vec<Point> {
        match *self {
            LayoutKind::Linear => vec![[0.0, 0.0]],
            LayoutKind::HexTorus { cell_radius_km: r } => {
                // The 7-cell flower tiles the plane under translations of
                // length sqrt(21)·r: t = 2·a1 + a2 with a1, a2 the neighbor
                // steps of length sqrt(3)·r at 30° and 90°, plus the five
                // 60° rotations of t.
                let sqrt3 = 3.0_f64.sqrt();
                let a1 = [sqrt3 * r * 0.5 * sqrt3, sqrt3 * r * 0.5];
                let a2 = [0.0, sqrt3 * r];
                let t = [2.0 * a1[0] + a2[0], 2.0 * a1[1] + a2[1]];
                let (c, s) = (0.5, sqrt3 * 0.5); // cos 60°, sin 60°
                let mut out = Vec::with_capacity(7);
                out.push([0.0, 0.0]);
                let mut v = t;
                for _ in 0..6 {
                    out.push(v);
                    v = [c * v[0] - s * v[1], s * v[0] + c * v[1]];
                }
                out
            }
        }
    }

    /// Vector from `from` to the nearest wrap image of `to`, with its length.
    ///
    /// Ties are broken deterministically in displacement order (identity
    /// first).
    pub fn displacement_to(&self, from: Point, to: Point) -> (Point, f64) {
        let mut best = [to[0] - from[0], to[1] - from[1]];
        let mut best_d = (best[0] * best[0] + best[1] * best[1]).sqrt();
        for disp in self.wrap_displacements().into_iter().skip(1) {
            let v = [to[0] + disp[0] - from[0], to[1] + disp[1] - from[1]];
            let d = (v[0] * v[0] + v[1] * v[1]).sqrt();
            if d < best_d {
                best = v;
                best_d = d;
            }
        }
        (best, best_d)
    }

    /// Minimum distance between `a` and the wrap images of `b`, km.
    pub fn distance(&self, a: Point, b: Point) -> f64 {
        self.displacement_to(a, b).1
    }
}

/// Distance-dependent amplitude gain.
///
/// Returns `sqrt(g0 · (max(d, d_min)/d0)^(-eta))`; strictly decreasing in `d`
/// beyond `d_min`.
pub fn pathloss_amplitude(d_km: f64, params: &PathlossParams) -> Result<f64> {
    if !d_km.is_finite() || d_km < 0.0 {
        return Err(Error::InvalidInput(format!(
            "pathloss distance must be finite and non-negative, got {d_km}"
        )));
    }
    let d = d_km.max(params.d_min_km);
    Ok((params.g0 * (d / params.d0_km).powf(-params.eta)).sqrt())
}

/// Antenna power gain in dB at angle `theta_deg` off boresight:
/// `-min(12 (θ/θ_3dB)², a_m)` with θ folded to [-180°, 180°].
pub fn antenna_gain_db(theta_deg: f64, params: &AntennaParams) -> f64 {
    let theta = fold_angle_deg(theta_deg);
    -(12.0 * (theta / params.theta_3db_deg).powi(2)).min(params.front_back_db)
}

/// Antenna power gain as a linear factor.
pub fn antenna_gain_linear(theta_deg: f64, params: &AntennaParams) -> f64 {
    10f64.powf(antenna_gain_db(theta_deg, params) / 10.0)
}

/// Fold an angle to [-180°, 180°].
pub fn fold_angle_deg(theta: f64) -> f64 {
    let t = theta.rem_euclid(360.0);
    if t > 180.0 {
        t - 360.0
    } else {
        t
    }
}

/// Convert a dB power value to linear.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-12;

    #[test]
    fn pathloss_at_reference_distance() {
        let p = PathlossParams::default();
        let a = pathloss_amplitude(p.d0_km, &p).unwrap();
        assert!((a - p.g0.sqrt()).abs() < EPS, "expected sqrt(g0), got {a}");
    }

    #[test]
    fn pathloss_doubling_ratio() {
        // Power-gain ratio between 2·d0 and d0 must equal 2^(-eta).
        let p = PathlossParams::default();
        let a1 = pathloss_amplitude(p.d0_km, &p).unwrap();
        let a2 = pathloss_amplitude(2.0 * p.d0_km, &p).unwrap();
        let ratio = (a2 * a2) / (a1 * a1);
        let expected = 2f64.powf(-p.eta);
        assert!(
            (ratio - expected).abs() < 1e-14,
            "ratio {ratio} vs {expected}"
        );
    }

    #[test]
    fn pathloss_equidistant_points_equal() {
        let p = PathlossParams::default();
        assert_eq!(
            pathloss_amplitude(0.4, &p).unwrap(),
            pathloss_amplitude(0.4, &p).unwrap()
        );
    }

    #[test]
    fn pathloss_monotone_beyond_dmin() {
        let p = PathlossParams::default();
        let mut prev = pathloss_amplitude(p.d_min_km, &p).unwrap();
        for i in 1..100 {
            let d = p.d_min_km + i as f64 * 0.05;
            let a = pathloss_amplitude(d, &p).unwrap();
            assert!(a < prev, "pathloss must decrease: {a} !< {prev} at {d}");
            prev = a;
        }
    }

    #[test]
    fn pathloss_clamps_below_dmin() {
        let p = PathlossParams::default();
        let at_zero = pathloss_amplitude(0.0, &p).unwrap();
        let at_dmin = pathloss_amplitude(p.d_min_km, &p).unwrap();
        assert_eq!(at_zero, at_dmin);
    }

    #[test]
    fn pathloss_rejects_non_finite() {
        let p = PathlossParams::default();
        assert!(pathloss_amplitude(f64::NAN, &p).is_err());
        assert!(pathloss_amplitude(f64::INFINITY, &p).is_err());
        assert!(pathloss_amplitude(-1.0, &p).is_err());
    }

    #[test]
    fn antenna_boresight_is_unity() {
        let p = AntennaParams::default();
        assert_eq!(antenna_gain_db(0.0, &p), 0.0);
        assert_eq!(antenna_gain_linear(0.0, &p), 1.0);
    }

    #[test]
    fn antenna_half_beamwidth_is_3db() {
        let p = AntennaParams::default();
        let db = antenna_gain_db(p.theta_3db_deg / 2.0, &p);
        assert!((db + 3.0).abs() < EPS, "expected -3 dB, got {db}");
    }

    #[test]
    fn antenna_back_lobe_hits_floor() {
        let p = AntennaParams {
            front_back_db: 20.0,
            ..AntennaParams::default()
        };
        let db = antenna_gain_db(180.0, &p);
        assert!((db + 20.0).abs() < EPS, "expected -20 dB, got {db}");
        assert!((antenna_gain_linear(180.0, &p) - 0.01).abs() < EPS);
    }

    #[test]
    fn antenna_angle_folding() {
        let p = AntennaParams::default();
        assert!((antenna_gain_db(350.0, &p) - antenna_gain_db(-10.0, &p)).abs() < EPS);
        assert!((antenna_gain_db(190.0, &p) - antenna_gain_db(-170.0, &p)).abs() < EPS);
    }

    #[test]
    fn linear_layout_distance_is_euclidean() {
        let l = LayoutKind::Linear;
        assert_eq!(l.distance([0.0, 0.0], [3.0, 4.0]), 5.0);
        assert_eq!(l.distance([1.0, 1.0], [1.0, 1.0]), 0.0);
    }

    #[test]
    fn torus_identity_distance_zero() {
        let l = LayoutKind::HexTorus { cell_radius_km: 1.0 };
        assert_eq!(l.distance([0.3, -0.4], [0.3, -0.4]), 0.0);
    }

    #[test]
    fn torus_wraps_opposite_edges() {
        // Points near opposite edges of the 7-cell flower must be closer via a
        // wrap image than via the plain Euclidean distance; the brute force
        // over all 7 images is the implementation itself, so check against the
        // unwrapped distance.
        let l = LayoutKind::HexTorus { cell_radius_km: 1.0 };
        let sqrt3 = 3.0_f64.sqrt();
        // Centers of two opposite outer cells.
        let p1 = [sqrt3 * (30f64.to_radians()).cos(), sqrt3 * (30f64.to_radians()).sin()];
        let p2 = [-p1[0], -p1[1]];
        let plain = ((p1[0] - p2[0]).powi(2) + (p1[1] - p2[1]).powi(2)).sqrt();
        let wrapped = l.distance(p1, p2);
        assert!(
            wrapped < plain - 1e-9,
            "wrap must shorten the distance: {wrapped} !< {plain}"
        );
    }

    #[test]
    fn torus_all_cells_mutually_adjacent() {
        // Under the 7-cell wrap every pair of cell centers sits at the
        // neighbor distance sqrt(3)·r.
        let r = 1.0;
        let l = LayoutKind::HexTorus { cell_radius_km: r };
        let sqrt3 = 3.0_f64.sqrt();
        let mut centers = vec![[0.0, 0.0]];
        for j in 0..6 {
            let ang = (30.0 + 60.0 * j as f64).to_radians();
            centers.push([sqrt3 * r * ang.cos(), sqrt3 * r * ang.sin()]);
        }
        for i in 0..7 {
            for j in 0..7 {
                if i == j {
                    continue;
                }
                let d = l.distance(centers[i], centers[j]);
                assert!(
                    (d - sqrt3 * r).abs() < 1e-12,
                    "cells {i},{j}: torus distance {d} != {}",
                    sqrt3 * r
                );
            }
        }
    }
}
